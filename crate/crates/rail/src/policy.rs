//! Diagonal-Gaussian MLP policy with the log-probability, entropy, and KL
//! utilities the trust-region update needs.
//!
//! The mean comes from a tanh MLP over the observation; the log standard
//! deviation is a free, state-independent parameter vector appended to the
//! flat parameter layout. Log-stds are clamped to `[-5, 2]` at evaluation
//! time, so sampling and densities stay sane even if an update pushes the
//! raw parameters out of range; gradients are zero outside the clamp.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::envs::ActionSampler;
use crate::error::{Error, Result};
use crate::numerics::{MlpSpec, ParamVector};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LOG_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean_spec: MlpSpec,
    mean_params: ParamVector,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    /// Fresh policy with Xavier-initialized mean net and `log_std = 0`
    /// (unit standard deviation).
    pub fn new<R: Rng>(obs_dim: usize, action_dim: usize, hidden: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mean_spec = MlpSpec::new(obs_dim, hidden, action_dim)?;
        let mean_params = mean_spec.init_params(rng);
        Ok(GaussianPolicy {
            mean_spec,
            mean_params,
            log_std: vec![0.0; action_dim],
        })
    }

    pub fn from_parts(mean_spec: MlpSpec, mean_params: ParamVector, log_std: Vec<f64>) -> Result<Self> {
        if mean_params.len() != mean_spec.param_count() {
            return Err(Error::shape("mean parameter count does not match spec"));
        }
        if log_std.len() != mean_spec.output_dim {
            return Err(Error::shape("log_std length does not match action dim"));
        }
        Ok(GaussianPolicy { mean_spec, mean_params, log_std })
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_spec.input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.mean_spec.output_dim
    }

    pub fn mean_spec(&self) -> &MlpSpec {
        &self.mean_spec
    }

    /// Total parameter count: mean net plus one log-std per action dim.
    pub fn param_count(&self) -> usize {
        self.mean_spec.param_count() + self.action_dim()
    }

    /// Flat view: mean-net parameters followed by log-stds.
    pub fn flat_params(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(self.mean_params.as_slice());
        v.extend_from_slice(&self.log_std);
        ParamVector::from_vec(v)
    }

    pub fn set_flat_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "flat parameter length {} does not match policy parameter count {}",
                params.len(),
                self.param_count()
            )));
        }
        let split = self.mean_spec.param_count();
        self.mean_params = ParamVector::from_vec(params.as_slice()[..split].to_vec());
        self.log_std = params.as_slice()[split..].to_vec();
        Ok(())
    }

    /// Index of the first log-std entry within the flat layout.
    pub fn log_std_offset(&self) -> usize {
        self.mean_spec.param_count()
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_spec.forward(&self.mean_params, obs)
    }

    fn clamped_log_std(&self, i: usize) -> f64 {
        self.log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    /// Effective standard deviations (after the clamp).
    pub fn std(&self) -> Vec<f64> {
        (0..self.action_dim()).map(|i| self.clamped_log_std(i).exp()).collect()
    }

    /// 1 where the raw log-std is inside the clamp (gradient passes), else 0.
    pub fn log_std_grad_mask(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|&ls| if (LOG_STD_MIN..=LOG_STD_MAX).contains(&ls) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Exact diagonal-Gaussian log-density of `action` given the state.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::shape("action length mismatch"));
        }
        let mean = self.mean(obs)?;
        let mut lp = 0.0;
        for i in 0..self.action_dim() {
            let ls = self.clamped_log_std(i);
            let sigma = ls.exp();
            let z = (action[i] - mean[i]) / sigma;
            lp += -0.5 * LOG_2PI - ls - 0.5 * z * z;
        }
        Ok(lp)
    }

    /// Gradient of `log_prob` with respect to the flat parameters, scaled by
    /// `scale` and accumulated into `grad_acc`.
    pub fn log_prob_grad_into(
        &self,
        obs: &[f64],
        action: &[f64],
        scale: f64,
        grad_acc: &mut [f64],
    ) -> Result<()> {
        if grad_acc.len() != self.param_count() {
            return Err(Error::shape("gradient accumulator length mismatch"));
        }
        let mean = self.mean(obs)?;
        let d = self.action_dim();
        let mut dmean = vec![0.0; d];
        for i in 0..d {
            let ls = self.clamped_log_std(i);
            let sigma = ls.exp();
            dmean[i] = (action[i] - mean[i]) / (sigma * sigma);
        }
        // Mean-net block.
        let split = self.mean_spec.param_count();
        self.mean_spec
            .backward_into(&self.mean_params, obs, &dmean, scale, &mut grad_acc[..split])?;
        // Log-std block: d logp / d log_std_i = -1 + z_i^2 (inside clamp).
        let mask = self.log_std_grad_mask();
        for i in 0..d {
            let ls = self.clamped_log_std(i);
            let sigma = ls.exp();
            let z = (action[i] - mean[i]) / sigma;
            grad_acc[split + i] += scale * mask[i] * (z * z - 1.0);
        }
        Ok(())
    }

    pub fn log_prob_grad(&self, obs: &[f64], action: &[f64]) -> Result<ParamVector> {
        let mut g = ParamVector::zeros(self.param_count());
        self.log_prob_grad_into(obs, action, 1.0, g.as_mut_slice())?;
        Ok(g)
    }

    /// Differential entropy; state-independent for this parameterization.
    pub fn entropy(&self) -> f64 {
        let d = self.action_dim() as f64;
        let sum_ls: f64 = (0..self.action_dim()).map(|i| self.clamped_log_std(i)).sum();
        sum_ls + 0.5 * d * (1.0 + LOG_2PI)
    }

    /// Gradient of the entropy with respect to the flat parameters.
    pub fn entropy_grad(&self) -> ParamVector {
        let mut g = ParamVector::zeros(self.param_count());
        let split = self.log_std_offset();
        let mask = self.log_std_grad_mask();
        for (i, m) in mask.iter().enumerate() {
            g[split + i] = *m;
        }
        g
    }

    /// Mean over `states` of `KL(old || new)` for diagonal Gaussians.
    pub fn kl_mean(old: &GaussianPolicy, new: &GaussianPolicy, states: &[Vec<f64>]) -> Result<f64> {
        if old.action_dim() != new.action_dim() {
            return Err(Error::shape("policies have different action dims"));
        }
        if states.is_empty() {
            return Err(Error::shape("KL over an empty state batch"));
        }
        let d = old.action_dim();
        let mut total = 0.0;
        for s in states {
            let mo = old.mean(s)?;
            let mn = new.mean(s)?;
            for i in 0..d {
                let lso = old.clamped_log_std(i);
                let lsn = new.clamped_log_std(i);
                let so2 = (2.0 * lso).exp();
                let sn2 = (2.0 * lsn).exp();
                let dm = mo[i] - mn[i];
                total += lsn - lso + (so2 + dm * dm) / (2.0 * sn2) - 0.5;
            }
        }
        Ok(total / states.len() as f64)
    }
}

impl ActionSampler for GaussianPolicy {
    /// Mean plus sigma-scaled standard normal per dimension. One normal
    /// draw per action dimension, in order.
    fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let mean = self.mean(obs)?;
        let std = self.std();
        Ok(mean
            .iter()
            .zip(&std)
            .map(|(m, s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s * z
            })
            .collect())
    }
}
