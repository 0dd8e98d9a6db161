//! KL-constrained natural-gradient policy updates: conjugate-gradient solve
//! against Fisher-vector products, step sizing from the trust region,
//! backtracking line search, plus the discounted cost-to-go estimates and
//! the fitted value baseline that feed the policy gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disc::Discriminator;
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, Direction, MlpSpec, ParamVector};
use crate::parallel;
use crate::policy::GaussianPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrpoConfig {
    /// Trust-region radius: maximum mean KL between old and new policy.
    pub max_kl: f64,
    pub cg_iterations: usize,
    pub cg_damping: f64,
    pub backtrack_steps: usize,
    pub backtrack_ratio: f64,
    /// Fisher-vector products use every k-th state of the batch.
    pub fvp_subsample: usize,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        TrpoConfig {
            max_kl: 0.01,
            cg_iterations: 10,
            cg_damping: 0.1,
            backtrack_steps: 10,
            backtrack_ratio: 0.8,
            fvp_subsample: 4,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_kl <= 0.0
            || self.cg_iterations == 0
            || self.cg_damping <= 0.0
            || self.backtrack_steps == 0
            || !(0.0..1.0).contains(&self.backtrack_ratio)
            || self.backtrack_ratio <= 0.0
            || self.fvp_subsample == 0
        {
            return Err(Error::config("invalid trust-region configuration"));
        }
        Ok(())
    }
}

/// Approximately solves `A x = b` for symmetric positive-definite `A` given
/// only the matrix-vector product.
pub fn conjugate_gradient<M>(matvec: M, b: &ParamVector, iterations: usize) -> Result<ParamVector>
where
    M: Fn(&ParamVector) -> ParamVector,
{
    let mut x = ParamVector::zeros(b.len());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs_old = r.dot(&r);
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let tol = 1e-10 * b_norm;
    for _ in 0..iterations {
        let ap = matvec(&p);
        if !ap.all_finite() {
            return Err(Error::divergence("non-finite iterate in conjugate gradient"));
        }
        let p_ap = p.dot(&ap);
        if p_ap <= 0.0 {
            // Direction of non-positive curvature; the damped system should
            // prevent this, stop with the current iterate.
            break;
        }
        let alpha = rs_old / p_ap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_new = r.dot(&r);
        if rs_new.sqrt() <= tol {
            break;
        }
        let beta = rs_new / rs_old;
        let mut new_p = r.clone();
        new_p.axpy(beta, &p);
        p = new_p;
        rs_old = rs_new;
    }
    if !x.all_finite() {
        return Err(Error::divergence("non-finite conjugate-gradient solution"));
    }
    Ok(x)
}

/// `(H + damping I) v`, where `H` is the Hessian of the mean KL between the
/// policy and itself at the current parameters.
///
/// For a diagonal Gaussian with a state-independent log-std that Hessian
/// splits exactly: the mean-parameter block is `J^T diag(1/sigma^2) J`
/// averaged over states (`J` the mean-net Jacobian), and the log-std block
/// is `2 I` (masked where the clamp is active). Both follow from double
/// differentiation of the closed-form KL; the first-order terms vanish at
/// equal parameters.
pub fn fisher_vector_product(
    policy: &GaussianPolicy,
    states: &[Vec<f64>],
    v: &ParamVector,
    damping: f64,
) -> Result<ParamVector> {
    if v.len() != policy.param_count() {
        return Err(Error::shape("vector length does not match policy parameters"));
    }
    if states.is_empty() {
        return Err(Error::shape("Fisher-vector product needs states"));
    }
    let split = policy.log_std_offset();
    let d = policy.action_dim();
    let std = policy.std();
    let mean_spec = policy.mean_spec().clone();
    let mean_params = ParamVector::from_vec(v.as_slice()[..split].to_vec());
    // Mean-net block: average J^T diag(1/sigma^2) J v over states.
    let n = states.len();
    let mean_block = parallel::chunked_vector_sum(n, split, |i, acc| {
        let s = &states[i];
        let tangent = &mean_params;
        let mut ju = mean_spec
            .param_jvp(&policy_flat_head(policy), s, tangent)
            .expect("dims checked");
        for (u, sd) in ju.iter_mut().zip(&std) {
            *u /= sd * sd;
        }
        mean_spec
            .backward_into(&policy_flat_head(policy), s, &ju, 1.0 / n as f64, acc)
            .expect("dims checked");
    });
    let mut out = ParamVector::zeros(v.len());
    out.as_mut_slice()[..split].copy_from_slice(&mean_block);
    // Log-std block: Hessian is exactly 2 per unclamped dimension.
    let mask = policy.log_std_grad_mask();
    for i in 0..d {
        out[split + i] = 2.0 * mask[i] * v[split + i];
    }
    out.axpy(damping, v);
    Ok(out)
}

// The mean-net parameter head of the policy's flat layout.
fn policy_flat_head(policy: &GaussianPolicy) -> ParamVector {
    let flat = policy.flat_params();
    ParamVector::from_vec(flat.as_slice()[..policy.log_std_offset()].to_vec())
}

/// What a natural-gradient step did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub accepted: bool,
    /// Mean KL between the pre- and post-update policy (0 if rejected).
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub backtracks: usize,
}

impl StepReport {
    fn rejected(surrogate: f64) -> Self {
        StepReport {
            accepted: false,
            kl: 0.0,
            surrogate_before: surrogate,
            surrogate_after: surrogate,
            backtracks: 0,
        }
    }
}

/// One KL-constrained natural-gradient descent step.
///
/// Solves the damped Fisher system for the step direction, scales it to the
/// trust-region boundary, then backtracks until the surrogate loss
/// decreases and the measured KL respects the radius. If every backtrack
/// fails the parameters are left untouched.
pub fn natural_step<S>(
    policy: &mut GaussianPolicy,
    loss_grad: &ParamVector,
    states: &[Vec<f64>],
    surrogate: S,
    config: &TrpoConfig,
) -> Result<StepReport>
where
    S: Fn(&GaussianPolicy) -> Result<f64>,
{
    config.validate()?;
    let s0 = surrogate(policy)?;
    if loss_grad.norm() == 0.0 {
        return Ok(StepReport::rejected(s0));
    }
    if !loss_grad.all_finite() {
        return Err(Error::divergence("non-finite policy gradient"));
    }
    let old = policy.clone();
    let fvp_states: Vec<Vec<f64>> = states
        .iter()
        .step_by(config.fvp_subsample)
        .cloned()
        .collect();
    let matvec =
        |v: &ParamVector| fisher_vector_product(&old, &fvp_states, v, config.cg_damping).unwrap();
    let direction = conjugate_gradient(&matvec, loss_grad, config.cg_iterations)?;
    if !direction.all_finite() {
        return Ok(StepReport::rejected(s0));
    }
    let dhd = direction.dot(&matvec(&direction));
    if dhd <= 0.0 || !dhd.is_finite() {
        return Ok(StepReport::rejected(s0));
    }
    let full_step = (2.0 * config.max_kl / dhd).sqrt();
    let theta0 = old.flat_params();
    let mut scale = full_step;
    for backtracks in 0..config.backtrack_steps {
        let candidate = theta0.added(-scale, &direction);
        policy.set_flat_params(&candidate)?;
        let kl = GaussianPolicy::kl_mean(&old, policy, states)?;
        let s = surrogate(policy)?;
        if s.is_finite() && kl.is_finite() && kl <= config.max_kl && s < s0 {
            return Ok(StepReport {
                accepted: true,
                kl,
                surrogate_before: s0,
                surrogate_after: s,
                backtracks,
            });
        }
        scale *= config.backtrack_ratio;
    }
    policy.set_flat_params(&theta0)?;
    Ok(StepReport::rejected(s0))
}

/// Discounted tail sums: `q[t] = sum_{k>=t} gamma^(k-t) costs[k]`.
pub fn discounted_tail_sums(per_step: &[f64], gamma: f64) -> Vec<f64> {
    let mut q = vec![0.0; per_step.len()];
    let mut acc = 0.0;
    for t in (0..per_step.len()).rev() {
        acc = per_step[t] + gamma * acc;
        q[t] = acc;
    }
    q
}

/// Per-(state, action) cost-to-go under the discriminator's surrogate cost:
/// the discounted tail sum of `ln D` along each trajectory. Single-sample
/// estimate of the conditional expectation, computed with the updated
/// discriminator.
pub fn estimate_q(
    trajs: &[Trajectory],
    disc: &Discriminator,
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    parallel::indexed_map(trajs.len(), |i| {
        let costs = disc.surrogate_costs(&trajs[i])?;
        Ok(discounted_tail_sums(&costs, gamma))
    })
    .into_iter()
    .collect()
}

/// MLP state-value baseline fit by Adam to discounted returns.
#[derive(Debug, Clone)]
pub struct ValueBaseline {
    spec: MlpSpec,
    params: ParamVector,
    adam: AdamState,
    pub epochs: usize,
}

impl ValueBaseline {
    pub fn new<R: Rng>(
        obs_dim: usize,
        hidden: Vec<usize>,
        learning_rate: f64,
        epochs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden, 1)?;
        let params = spec.init_params(rng);
        let adam = AdamState::new(spec.param_count(), AdamConfig::with_learning_rate(learning_rate));
        Ok(ValueBaseline { spec, params, adam, epochs })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn flat_params(&self) -> ParamVector {
        self.params.clone()
    }

    pub fn set_flat_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.spec.param_count() {
            return Err(Error::shape("baseline parameter count mismatch"));
        }
        self.params = params.clone();
        Ok(())
    }

    pub fn predict(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.spec.forward(&self.params, obs)?[0])
    }

    pub fn predict_batch(&self, states: &[Vec<f64>]) -> Result<Vec<f64>> {
        parallel::indexed_map(states.len(), |i| self.predict(&states[i]))
            .into_iter()
            .collect()
    }

    /// Full-batch Adam on mean squared error for `self.epochs` epochs.
    /// Returns the final epoch's loss.
    pub fn fit(&mut self, states: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
        if states.len() != targets.len() {
            return Err(Error::shape("states/targets length mismatch"));
        }
        if states.is_empty() {
            return Err(Error::shape("baseline fit needs data"));
        }
        let n = states.len();
        let dim = self.spec.param_count();
        let mut last_loss = 0.0;
        for _ in 0..self.epochs {
            let preds = self.predict_batch(states)?;
            last_loss = preds
                .iter()
                .zip(targets)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / n as f64;
            let grad = parallel::chunked_vector_sum(n, dim, |i, acc| {
                let residual = 2.0 * (preds[i] - targets[i]) / n as f64;
                self.spec
                    .backward_into(&self.params, &states[i], &[residual], 1.0, acc)
                    .expect("dims fixed");
            });
            self.adam
                .step(&mut self.params, &ParamVector::from_vec(grad), Direction::Descent)?;
        }
        Ok(last_loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::Normalizer;
    use crate::rng::seeded_rng;
    use rand::Rng;

    /// Dense Gaussian-elimination solve, the oracle for the CG tests.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            m.swap(col, pivot);
            rhs.swap(col, pivot);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = rhs[row];
            for k in row + 1..n {
                acc -= m[row][k] * x[k];
            }
            x[row] = acc / m[row][row];
        }
        x
    }

    #[test]
    fn cg_identity_single_iteration() {
        let b = ParamVector::from_vec(vec![3.0, -1.0, 0.25]);
        let x = conjugate_gradient(|v| v.clone(), &b, 1).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn cg_diagonal_exact() {
        let b = ParamVector::from_vec(vec![1.0, 1.0]);
        let matvec = |v: &ParamVector| ParamVector::from_vec(vec![v[0], 2.0 * v[1]]);
        let x = conjugate_gradient(matvec, &b, 2).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_dense_solver_on_random_spd() {
        let mut rng = seeded_rng(1);
        for _ in 0..10 {
            let n = 8;
            // SPD via M^T M + I.
            let m: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        a[i][j] += m[k][i] * m[k][j];
                    }
                }
                a[i][i] += 1.0;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bv = ParamVector::from_vec(b.clone());
            let a_ref = &a;
            let matvec = move |v: &ParamVector| {
                ParamVector::from_vec(
                    (0..n)
                        .map(|i| (0..n).map(|j| a_ref[i][j] * v[j]).sum())
                        .collect(),
                )
            };
            let x = conjugate_gradient(&matvec, &bv, n).unwrap();
            let want = dense_solve(&a, &b);
            // Residual check against the oracle solution.
            let ax = matvec(&x);
            let mut res = 0.0;
            for i in 0..n {
                res += (ax[i] - b[i]) * (ax[i] - b[i]);
                assert!((x[i] - want[i]).abs() <= 1e-6, "component {i}");
            }
            assert!(res.sqrt() <= 1e-6 * bv.norm());
        }
    }

    fn test_policy(seed: u64) -> GaussianPolicy {
        let mut r = seeded_rng(seed);
        GaussianPolicy::new(3, 2, vec![5], &mut r).unwrap()
    }

    fn test_states(seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut r = seeded_rng(seed);
        (0..n).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn fvp_zero_vector() {
        let p = test_policy(2);
        let states = test_states(3, 5);
        let v = ParamVector::zeros(p.param_count());
        let hv = fisher_vector_product(&p, &states, &v, 0.1).unwrap();
        assert!(hv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fvp_damping_is_additive() {
        // The damped product equals the undamped product plus damping * v.
        let p = test_policy(4);
        let states = test_states(5, 6);
        let mut r = seeded_rng(6);
        let v = ParamVector::from_vec(
            (0..p.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect(),
        );
        let damped = fisher_vector_product(&p, &states, &v, 0.7).unwrap();
        let raw = fisher_vector_product(&p, &states, &v, 0.0).unwrap();
        for i in 0..v.len() {
            assert!((damped[i] - (raw[i] + 0.7 * v[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn fvp_is_symmetric() {
        let p = test_policy(7);
        let states = test_states(8, 4);
        let mut r = seeded_rng(9);
        for _ in 0..5 {
            let u = ParamVector::from_vec(
                (0..p.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect(),
            );
            let v = ParamVector::from_vec(
                (0..p.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect(),
            );
            let hu = fisher_vector_product(&p, &states, &u, 0.0).unwrap();
            let hv = fisher_vector_product(&p, &states, &v, 0.0).unwrap();
            let a = u.dot(&hv);
            let b = v.dot(&hu);
            assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1.0));
        }
    }

    #[test]
    fn fvp_matches_kl_second_difference() {
        // v' H v against the central second difference of mean KL along v.
        let p = test_policy(10);
        let states = test_states(11, 8);
        let mut r = seeded_rng(12);
        let mut v = ParamVector::from_vec(
            (0..p.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect(),
        );
        v.scale(1.0 / v.norm());
        let hv = fisher_vector_product(&p, &states, &v, 0.0).unwrap();
        let vhv = v.dot(&hv);

        let eps = 1e-3;
        let theta = p.flat_params();
        let mut plus = p.clone();
        plus.set_flat_params(&theta.added(eps, &v)).unwrap();
        let mut minus = p.clone();
        minus.set_flat_params(&theta.added(-eps, &v)).unwrap();
        let kl_plus = GaussianPolicy::kl_mean(&p, &plus, &states).unwrap();
        let kl_minus = GaussianPolicy::kl_mean(&p, &minus, &states).unwrap();
        // KL at the center is zero.
        let fd = (kl_plus + kl_minus) / (eps * eps);
        assert!(
            ((vhv - fd) / vhv.abs().max(fd.abs())).abs() <= 1e-3,
            "v'Hv {vhv} vs second difference {fd}"
        );
    }

    #[test]
    fn natural_step_zero_gradient_is_noop() {
        let mut p = test_policy(13);
        let before = p.flat_params();
        let dim = p.param_count();
        let states = test_states(14, 6);
        let report = natural_step(
            &mut p,
            &ParamVector::zeros(dim),
            &states,
            |_| Ok(0.0),
            &TrpoConfig::default(),
        )
        .unwrap();
        assert!(!report.accepted);
        assert_eq!(p.flat_params(), before);
    }

    #[test]
    fn natural_step_matches_analytic_on_linear_policy() {
        // One-dimensional observation, linear mean net: the Fisher is a 3x3
        // matrix computable by hand, so the accepted step must equal the
        // closed-form damped natural-gradient step.
        let spec = MlpSpec::new(1, vec![], 1).unwrap();
        let params = ParamVector::from_vec(vec![0.4, -0.2]);
        let mut policy = GaussianPolicy::from_parts(spec, params, vec![0.0]).unwrap();
        let states: Vec<Vec<f64>> = vec![vec![0.5], vec![-1.0], vec![2.0]];
        let config = TrpoConfig { fvp_subsample: 1, ..Default::default() };

        // Gradient only on the mean parameters.
        let g = ParamVector::from_vec(vec![1.0, -0.5, 0.0]);

        // Analytic damped Fisher: mean block (1/sigma^2) E[(x,1)(x,1)^T],
        // log-std block 2, plus damping.
        let n = states.len() as f64;
        let exx = states.iter().map(|s| s[0] * s[0]).sum::<f64>() / n;
        let ex = states.iter().map(|s| s[0]).sum::<f64>() / n;
        let d = config.cg_damping;
        let a = vec![
            vec![exx + d, ex, 0.0],
            vec![ex, 1.0 + d, 0.0],
            vec![0.0, 0.0, 2.0 + d],
        ];
        let dir = dense_solve(&a, &[1.0, -0.5, 0.0]);
        let dhd: f64 = (0..3)
            .map(|i| dir[i] * (0..3).map(|j| a[i][j] * dir[j]).sum::<f64>())
            .sum();
        let beta = (2.0 * config.max_kl / dhd).sqrt();
        let theta0 = policy.flat_params();
        let expected: Vec<f64> = (0..3).map(|i| theta0[i] - beta * dir[i]).collect();

        let report = natural_step(
            &mut policy,
            &g,
            &states,
            |p| Ok(p.flat_params().dot(&g)),
            &config,
        )
        .unwrap();
        assert!(report.accepted);
        assert_eq!(report.backtracks, 0);
        let got = policy.flat_params();
        for i in 0..3 {
            assert!(
                (got[i] - expected[i]).abs() <= 1e-8,
                "component {i}: {} vs {}",
                got[i],
                expected[i]
            );
        }
        assert!(report.kl <= config.max_kl * 1.0000001);
    }

    #[test]
    fn accepted_steps_respect_kl_radius() {
        let config = TrpoConfig { fvp_subsample: 1, ..Default::default() };
        let mut rng = seeded_rng(20);
        let mut accepted = 0;
        for trial in 0..100 {
            let mut policy = test_policy(100 + trial);
            let states = test_states(200 + trial, 8);
            let g = ParamVector::from_vec(
                (0..policy.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let old = policy.clone();
            let report = natural_step(
                &mut policy,
                &g,
                &states,
                |p| Ok(p.flat_params().dot(&g)),
                &config,
            )
            .unwrap();
            if report.accepted {
                accepted += 1;
                let kl = GaussianPolicy::kl_mean(&old, &policy, &states).unwrap();
                assert!(kl <= 1.05 * config.max_kl, "trial {trial}: kl {kl}");
                assert!(report.surrogate_after <= report.surrogate_before);
            }
        }
        assert!(accepted >= 90, "only {accepted}/100 accepted");
    }

    #[test]
    fn tail_sums_examples() {
        assert_eq!(discounted_tail_sums(&[-1.0, -2.0], 1.0), vec![-3.0, -2.0]);
        assert_eq!(discounted_tail_sums(&[5.0], 0.9), vec![5.0]);
        let q = discounted_tail_sums(&[1.0, 1.0, 1.0], 0.5);
        assert_eq!(q, vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn q_estimate_under_uniform_discriminator() {
        // Zero-parameter discriminator scores 1/2 everywhere, so Q_0 is
        // ln(1/2) times the discounted horizon.
        let spec = MlpSpec::new(5, vec![4], 1).unwrap();
        let disc = Discriminator::from_parts(
            spec.clone(),
            ParamVector::zeros(spec.param_count()),
            Normalizer::identity(5),
        )
        .unwrap();
        let transitions: Vec<crate::envs::Transition> = (0..100)
            .map(|i| crate::envs::Transition {
                state: vec![i as f64, 0.0, 0.0, 0.0],
                action: vec![0.0],
                next_state: vec![i as f64 + 1.0, 0.0, 0.0, 0.0],
                true_cost: 0.0,
            })
            .collect();
        let traj = Trajectory { transitions, seed: 0 };
        let q = estimate_q(std::slice::from_ref(&traj), &disc, 0.99).unwrap();
        let expected = 0.5f64.ln() * (1.0 - 0.99f64.powi(100)) / 0.01;
        assert!((q[0][0] - expected).abs() < 1e-9);
        // Single-step tail: just the final cost.
        assert!((q[0][99] - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn baseline_fit_reduces_heldout_advantage() {
        let mut r = seeded_rng(30);
        let mut baseline = ValueBaseline::new(3, vec![16], 0.01, 200, &mut r).unwrap();
        // Targets follow a smooth function of the state.
        let gen = |r: &mut rand_chacha::ChaCha8Rng| -> (Vec<Vec<f64>>, Vec<f64>) {
            let states: Vec<Vec<f64>> =
                (0..120).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let targets: Vec<f64> =
                states.iter().map(|s| 3.0 * s[0] - s[1] * s[2] + 1.0).collect();
            (states, targets)
        };
        let (train_s, train_t) = gen(&mut r);
        let (held_s, held_t) = gen(&mut r);
        baseline.fit(&train_s, &train_t).unwrap();
        let preds = baseline.predict_batch(&held_s).unwrap();
        let ms_adv: f64 = preds
            .iter()
            .zip(&held_t)
            .map(|(p, t)| (t - p) * (t - p))
            .sum::<f64>()
            / held_t.len() as f64;
        let ms_zero: f64 = held_t.iter().map(|t| t * t).sum::<f64>() / held_t.len() as f64;
        assert!(
            ms_adv < ms_zero,
            "baseline did not reduce mean-squared advantage: {ms_adv} vs {ms_zero}"
        );
    }
}
