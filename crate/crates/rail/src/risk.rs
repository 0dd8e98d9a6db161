//! Empirical value-at-risk and conditional-value-at-risk estimators, the
//! convex surrogate used to learn the risk threshold, and the per-trajectory
//! scalars that weight the tail term in discriminator and policy gradients.
//!
//! The canonical CVaR estimator is the minimization form: the smallest value
//! of the surrogate `h_alpha` over candidate thresholds. On atomic samples
//! this differs from the conditional tail mean (exposed separately as a
//! diagnostic); the minimization form is coherent and is the quantity the
//! learned threshold descends toward.

use serde::{Deserialize, Serialize};

use crate::envs::discounted_horizon;
use crate::error::{Error, Result};

/// Above this sample size the estimator evaluates the surrogate only at the
/// empirical VaR instead of scanning every candidate threshold. The two
/// paths agree mathematically; the scan is kept exact for small samples
/// because oracle tests compare against it bitwise.
const SCAN_LIMIT: usize = 4096;

fn check_sample(costs: &[f64]) -> Result<()> {
    if costs.is_empty() {
        return Err(Error::EmptySample("risk estimator needs a non-empty cost sample".into()));
    }
    if !costs.iter().all(|c| c.is_finite()) {
        return Err(Error::divergence("non-finite trajectory cost"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha must be in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// Smallest sample value `z` such that `count(Z <= z)/N >= alpha`.
///
/// Rank arithmetic is done by counting rather than by `ceil(alpha * N)` so
/// that binary rounding of `alpha` cannot shift the rank. `alpha = 0` maps
/// to the sample minimum.
pub fn empirical_var(costs: &[f64], alpha: f64) -> Result<f64> {
    check_sample(costs)?;
    check_alpha(alpha)?;
    let mut sorted = costs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    for (j, z) in sorted.iter().enumerate() {
        if (j + 1) as f64 / n >= alpha {
            return Ok(*z);
        }
    }
    Ok(*sorted.last().unwrap())
}

/// The convex surrogate `nu + mean((Z - nu)^+) / (1 - alpha)`.
pub fn h_alpha(costs: &[f64], nu: f64, alpha: f64) -> Result<f64> {
    check_sample(costs)?;
    check_alpha(alpha)?;
    let mut excess = 0.0;
    for &z in costs {
        excess += (z - nu).max(0.0);
    }
    Ok(nu + excess / ((1.0 - alpha) * costs.len() as f64))
}

/// CVaR as the minimum of [`h_alpha`] over thresholds.
///
/// The minimum of a piecewise-linear convex function is attained at a kink,
/// and every kink sits on a sample value, so scanning sample values is
/// exact. Large samples skip the scan: the minimizer is the empirical VaR.
pub fn empirical_cvar(costs: &[f64], alpha: f64) -> Result<f64> {
    check_sample(costs)?;
    check_alpha(alpha)?;
    if costs.len() <= SCAN_LIMIT {
        let mut best = f64::INFINITY;
        for &candidate in costs {
            let h = h_alpha(costs, candidate, alpha)?;
            if h < best {
                best = h;
            }
        }
        Ok(best)
    } else {
        let nu_star = empirical_var(costs, alpha)?;
        h_alpha(costs, nu_star, alpha)
    }
}

/// Conditional tail mean `E[Z | Z >= VaR_alpha]`, the definition-side
/// estimator. Coincides with [`empirical_cvar`] on continuous distributions
/// but not on atomic samples; diagnostic only.
pub fn tail_mean(costs: &[f64], alpha: f64) -> Result<f64> {
    let var = empirical_var(costs, alpha)?;
    let tail: Vec<f64> = costs.iter().copied().filter(|&z| z >= var).collect();
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Subgradient of [`h_alpha`] in the threshold:
/// `1 - fraction(Z >= nu) / (1 - alpha)`. Ties count in the tail.
pub fn grad_nu(costs: &[f64], nu: f64, alpha: f64) -> Result<f64> {
    check_sample(costs)?;
    check_alpha(alpha)?;
    let tail = costs.iter().filter(|&&z| z >= nu).count() as f64;
    Ok(1.0 - tail / ((1.0 - alpha) * costs.len() as f64))
}

/// Per-trajectory scalar multiplying discriminator-side tail gradients:
/// `indicator(R >= nu) * (1 - gamma^len)/(1 - gamma) / (1 - alpha)`,
/// with the `gamma = 1` limit equal to `len`.
pub fn disc_cvar_weight(trajectory_cost: f64, nu: f64, alpha: f64, gamma: f64, len: usize) -> f64 {
    debug_assert!(len >= 1);
    debug_assert!(alpha < 1.0);
    if trajectory_cost < nu {
        return 0.0;
    }
    discounted_horizon(gamma, len) / (1.0 - alpha)
}

/// Per-trajectory coefficient multiplying the score-function term in the
/// policy-side tail gradient: `(R - nu)^+ / (1 - alpha)`.
pub fn policy_cvar_coeff(trajectory_cost: f64, nu: f64, alpha: f64) -> f64 {
    debug_assert!(alpha < 1.0);
    (trajectory_cost - nu).max(0.0) / (1.0 - alpha)
}

/// How the learned threshold starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NuInit {
    /// Named policies: `"warm_start"` (empirical VaR of the first batch) or
    /// `"zero"`.
    Named(NuInitKind),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuInitKind {
    WarmStart,
    Zero,
}

impl Default for NuInit {
    fn default() -> Self {
        NuInit::Named(NuInitKind::WarmStart)
    }
}

/// The CVaR bookkeeping carried across training iterations: confidence
/// level, learned threshold, tail weight, and the threshold's learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskState {
    pub alpha: f64,
    pub nu: f64,
    pub lambda_cvar: f64,
    pub nu_learning_rate: f64,
    initialized: bool,
    init: NuInit,
}

impl RiskState {
    pub fn new(alpha: f64, lambda_cvar: f64, nu_learning_rate: f64, init: NuInit) -> Result<Self> {
        check_alpha(alpha)?;
        if lambda_cvar < 0.0 {
            return Err(Error::config("lambda_cvar must be >= 0"));
        }
        let (nu, initialized) = match init {
            NuInit::Value(v) => (v, true),
            NuInit::Named(NuInitKind::Zero) => (0.0, true),
            NuInit::Named(NuInitKind::WarmStart) => (0.0, false),
        };
        Ok(RiskState { alpha, nu, lambda_cvar, nu_learning_rate, initialized, init })
    }

    /// On the first batch a warm-started threshold snaps to the empirical
    /// VaR instead of descending from zero through a dead zone.
    pub fn observe_first_batch(&mut self, costs: &[f64]) -> Result<()> {
        if !self.initialized {
            self.nu = empirical_var(costs, self.alpha)?;
            self.initialized = true;
        }
        Ok(())
    }

    /// One batch-gradient-descent step on the threshold.
    pub fn update_nu(&mut self, costs: &[f64]) -> Result<()> {
        self.observe_first_batch(costs)?;
        let g = grad_nu(costs, self.nu, self.alpha)?;
        self.nu -= self.nu_learning_rate * g;
        Ok(())
    }

    pub fn init_kind(&self) -> NuInit {
        self.init
    }
}

/// Per-batch surrogate trajectory costs with the lengths and discount the
/// gradient weights need.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSample {
    pub costs: Vec<f64>,
    pub lengths: Vec<usize>,
    pub gamma: f64,
}

impl CostSample {
    pub fn new(costs: Vec<f64>, lengths: Vec<usize>, gamma: f64) -> Result<Self> {
        if costs.len() != lengths.len() {
            return Err(Error::shape("costs and lengths must be parallel"));
        }
        check_sample(&costs)?;
        if lengths.iter().any(|&l| l == 0) {
            return Err(Error::shape("trajectory lengths must be positive"));
        }
        Ok(CostSample { costs, lengths, gamma })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }
}
