//! Adam with bias correction, over flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig { learning_rate, ..Default::default() }
    }
}

/// Whether the update moves along the gradient or against it. The
/// discriminator ascends its objective, everything else descends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

/// Optimizer state: step counter plus first/second moment accumulators.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    step_count: u64,
    first_moment: ParamVector,
    second_moment: ParamVector,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            step_count: 0,
            first_moment: ParamVector::zeros(dim),
            second_moment: ParamVector::zeros(dim),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam update in place. Rejects non-finite gradients.
    pub fn step(
        &mut self,
        params: &mut ParamVector,
        grad: &ParamVector,
        direction: Direction,
    ) -> Result<()> {
        if params.len() != grad.len() || params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam step: params {}, grad {}, state {}",
                params.len(),
                grad.len(),
                self.first_moment.len()
            )));
        }
        if !grad.all_finite() {
            return Err(Error::divergence("non-finite gradient in Adam step"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let sign = match direction {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        };
        let m = self.first_moment.as_mut_slice();
        let v = self.second_moment.as_mut_slice();
        let p = params.as_mut_slice();
        for i in 0..p.len() {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] += sign * learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar reference implementation, written independently of the
    /// vectorized path.
    struct ScalarAdam {
        m: f64,
        v: f64,
        t: u64,
    }

    impl ScalarAdam {
        fn step(&mut self, cfg: &AdamConfig, p: f64, g: f64, sign: f64) -> f64 {
            self.t += 1;
            self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * g;
            self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * g * g;
            let mh = self.m / (1.0 - cfg.beta1.powi(self.t as i32));
            let vh = self.v / (1.0 - cfg.beta2.powi(self.t as i32));
            p + sign * cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon)
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(3, cfg);
        let mut params = ParamVector::from_vec(vec![1.0, -2.0, 0.5]);
        let before = params.clone();
        state
            .step(&mut params, &ParamVector::zeros(3), Direction::Descent)
            .unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // With bias correction, the first update is lr * g/(|g| + eps') with
        // eps' tiny, so |update| ~ lr regardless of the gradient scale.
        for &g in &[1e-4, 0.5, 3.0, 250.0] {
            let cfg = AdamConfig::with_learning_rate(0.01);
            let mut state = AdamState::new(1, cfg);
            let mut params = ParamVector::zeros(1);
            state
                .step(&mut params, &ParamVector::from_vec(vec![g]), Direction::Descent)
                .unwrap();
            assert!(
                (params[0].abs() - 0.01).abs() < 1e-6,
                "gradient {g} produced step {}",
                params[0]
            );
            assert!(params[0] < 0.0);
        }
    }

    #[test]
    fn matches_scalar_reference_over_steps() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        let mut state = AdamState::new(1, cfg);
        let mut params = ParamVector::from_vec(vec![0.3]);
        let mut oracle = ScalarAdam { m: 0.0, v: 0.0, t: 0 };
        let mut p = 0.3;
        for _ in 0..2 {
            state
                .step(&mut params, &ParamVector::from_vec(vec![2.0]), Direction::Descent)
                .unwrap();
            p = oracle.step(&cfg, p, 2.0, -1.0);
        }
        assert_eq!(params[0], p);
        // Constant gradient: the second step shrinks only through the
        // epsilon and beta terms, so it stays close to lr.
        let first = 0.3 - oracle_first_step();
        assert!((first - params[0]).abs() < 2.0 * 0.01);
    }

    fn oracle_first_step() -> f64 {
        let cfg = AdamConfig::with_learning_rate(0.01);
        let mut oracle = ScalarAdam { m: 0.0, v: 0.0, t: 0 };
        0.3 - oracle.step(&cfg, 0.3, 2.0, -1.0)
    }

    #[test]
    fn ascent_flips_sign() {
        let cfg = AdamConfig::default();
        let mut up = AdamState::new(1, cfg);
        let mut down = AdamState::new(1, cfg);
        let mut pu = ParamVector::zeros(1);
        let mut pd = ParamVector::zeros(1);
        let g = ParamVector::from_vec(vec![1.5]);
        up.step(&mut pu, &g, Direction::Ascent).unwrap();
        down.step(&mut pd, &g, Direction::Descent).unwrap();
        assert_eq!(pu[0], -pd[0]);
        assert!(pu[0] > 0.0);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(2, cfg);
        let mut params = ParamVector::zeros(2);
        let g = ParamVector::from_vec(vec![1.0, f64::NAN]);
        let err = state.step(&mut params, &g, Direction::Descent).unwrap_err();
        assert!(matches!(err, crate::Error::Divergence(_)));
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn first_step_direction_is_scale_invariant() {
        // Doubling the gradient leaves the first bias-corrected update's
        // sign pattern unchanged.
        let cfg = AdamConfig::default();
        let grads = vec![0.3, -2.0, 0.001, -7.5];
        let mut s1 = AdamState::new(4, cfg);
        let mut s2 = AdamState::new(4, cfg);
        let mut p1 = ParamVector::zeros(4);
        let mut p2 = ParamVector::zeros(4);
        let g1 = ParamVector::from_vec(grads.clone());
        let g2 = ParamVector::from_vec(grads.iter().map(|g| 2.0 * g).collect());
        s1.step(&mut p1, &g1, Direction::Descent).unwrap();
        s2.step(&mut p2, &g2, Direction::Descent).unwrap();
        for i in 0..4 {
            assert_eq!(p1[i].signum(), p2[i].signum());
            assert!((p1[i] - p2[i]).abs() < 1e-6);
        }
    }
}
