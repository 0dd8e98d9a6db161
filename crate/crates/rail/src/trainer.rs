//! The outer training loop: expert training by trust-region optimization on
//! true costs, adversarial imitation with the optional tail-risk term, and
//! policy evaluation.
//!
//! One imitation iteration runs, in order: sample trajectories from the
//! current policy; estimate the tail surrogate on their discounted
//! discriminator costs; ascend the discriminator on its classification
//! gradient plus the weighted tail gradient; recompute costs under the
//! updated discriminator; take one KL-constrained natural-gradient step on
//! the policy gradient (cost-to-go advantages, weighted score-function tail
//! term, entropy term); descend the tail threshold one step. The
//! risk-neutral mode is the exact zero-weight special case of the same
//! loop.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex_string, CvarCostRefresh, Mode, ResolvedConfig};
use crate::disc::{DiscBatch, Discriminator, Normalizer};
use crate::envs::{rollout_batch, ActionSampler, ToyEnv, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, Direction, ParamVector};
use crate::parallel;
use crate::policy::GaussianPolicy;
use crate::risk::{self, RiskState};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::trpo::{discounted_tail_sums, estimate_q, natural_step, StepReport, ValueBaseline};

/// One row of the convergence log, appended per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean undiscounted true trajectory cost of this iteration's batch.
    pub mean_true_cost: f64,
    /// Mean discounted surrogate trajectory cost (expert mode: discounted
    /// true cost).
    pub mean_surrogate_cost: f64,
    pub nu: f64,
    pub disc_objective: f64,
    /// KL of the accepted policy step (0 when rejected).
    pub kl: f64,
    pub accepted: bool,
    /// Tail risk of the batch's true costs at the configured level.
    pub cvar_true: f64,
    /// Digest of (policy params || discriminator params) after the
    /// iteration's updates.
    pub param_digest: String,
}

/// Phase markers emitted by the training loop, in execution order. Tests
/// inject recorders to verify the update ordering contract.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    RolloutsSampled { iteration: usize, n: usize },
    HAlphaEstimated { iteration: usize, fresh: bool, h_alpha: f64, nu: f64 },
    DiscriminatorUpdated { iteration: usize, digest: String },
    QComputed { iteration: usize, disc_digest: String },
    PolicyUpdated { iteration: usize, kl: f64, accepted: bool },
    NuUpdated { iteration: usize, nu: f64 },
}

pub trait TrainHooks {
    fn on_event(&mut self, event: &TrainEvent);
}

/// Hook that ignores everything.
pub struct NoHooks;

impl TrainHooks for NoHooks {
    fn on_event(&mut self, _event: &TrainEvent) {}
}

impl TrainHooks for Vec<TrainEvent> {
    fn on_event(&mut self, event: &TrainEvent) {
        self.push(event.clone());
    }
}

pub fn digest_param_vectors(parts: &[&ParamVector]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        for x in p.iter() {
            hasher.update(x.to_le_bytes());
        }
    }
    hex_string(&hasher.finalize())
}

pub struct TrainOutcome {
    pub policy: GaussianPolicy,
    pub logs: Vec<IterationLog>,
    /// Set when training aborted on divergence; the policy is the last
    /// good state.
    pub diverged: Option<String>,
}

pub struct ImitationOutcome {
    pub policy: GaussianPolicy,
    pub disc: Discriminator,
    pub logs: Vec<IterationLog>,
    pub diverged: Option<String>,
}

/// Flattened step-level view of a trajectory batch.
struct StepBatch {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    /// Trajectory index of each step.
    traj_of_step: Vec<usize>,
    /// Per-step cost-to-go.
    q: Vec<f64>,
}

impl StepBatch {
    fn from_q(trajs: &[Trajectory], q_per_traj: &[Vec<f64>]) -> Self {
        let total: usize = trajs.iter().map(|t| t.len()).sum();
        let mut states = Vec::with_capacity(total);
        let mut actions = Vec::with_capacity(total);
        let mut traj_of_step = Vec::with_capacity(total);
        let mut q = Vec::with_capacity(total);
        for (i, (traj, qs)) in trajs.iter().zip(q_per_traj).enumerate() {
            for (tr, qv) in traj.transitions.iter().zip(qs) {
                states.push(tr.state.clone());
                actions.push(tr.action.clone());
                traj_of_step.push(i);
                q.push(*qv);
            }
        }
        StepBatch { states, actions, traj_of_step, q }
    }

    fn len(&self) -> usize {
        self.states.len()
    }
}

fn standardized(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    values.iter().map(|v| (v - mean) / std).collect()
}

/// The tail-term inputs consumed by the policy and threshold updates.
struct TailTerm {
    /// `(R - nu)^+ / (1 - alpha)` per trajectory (optionally centered).
    coeffs: Vec<f64>,
    /// Frozen `(R - nu)^+` per trajectory for the surrogate.
    excess: Vec<f64>,
}

struct PolicyStepInputs<'a> {
    batch: &'a StepBatch,
    advantages: Vec<f64>,
    lambda: f64,
    alpha: f64,
    entropy_coeff: f64,
    tail: Option<TailTerm>,
}

/// Assembles the policy-loss gradient and matching surrogate, then takes
/// one natural-gradient step.
fn policy_step(
    policy: &mut GaussianPolicy,
    inputs: &PolicyStepInputs<'_>,
    config: &ResolvedConfig,
) -> Result<StepReport> {
    let batch = inputs.batch;
    let t_total = batch.len();
    let n_traj = inputs
        .tail
        .as_ref()
        .map(|t| t.coeffs.len())
        .unwrap_or(0);

    // Per-step scale: advantage term plus the trajectory's tail coefficient.
    let mut scales = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let mut s = inputs.advantages[t] / t_total as f64;
        if let Some(tail) = &inputs.tail {
            s += inputs.lambda * tail.coeffs[batch.traj_of_step[t]] / n_traj as f64;
        }
        scales.push(s);
    }
    let dim = policy.param_count();
    let mut grad = ParamVector::from_vec(parallel::chunked_vector_sum(t_total, dim, |t, acc| {
        policy
            .log_prob_grad_into(&batch.states[t], &batch.actions[t], scales[t], acc)
            .expect("batch shapes fixed");
    }));
    if inputs.entropy_coeff != 0.0 {
        grad.axpy(-inputs.entropy_coeff, &policy.entropy_grad());
    }
    if !grad.all_finite() {
        return Err(Error::divergence("non-finite policy gradient"));
    }

    // Frozen quantities for the importance-weighted surrogate.
    let old_logp: Vec<f64> = parallel::indexed_map(t_total, |t| {
        policy.log_prob(&batch.states[t], &batch.actions[t]).expect("shapes fixed")
    });
    let advantages = inputs.advantages.clone();
    let traj_of_step = batch.traj_of_step.clone();
    let lambda = inputs.lambda;
    let alpha = inputs.alpha;
    let entropy_coeff = inputs.entropy_coeff;
    let tail_excess: Option<Vec<f64>> = inputs.tail.as_ref().map(|t| t.excess.clone());
    let states = &batch.states;
    let actions = &batch.actions;

    let surrogate = |candidate: &GaussianPolicy| -> Result<f64> {
        let logp: Vec<f64> = parallel::indexed_map(t_total, |t| {
            candidate.log_prob(&states[t], &actions[t]).expect("shapes fixed")
        });
        let mut loss = 0.0;
        for t in 0..t_total {
            loss += (logp[t] - old_logp[t]).exp() * advantages[t] / t_total as f64;
        }
        if let Some(excess) = &tail_excess {
            // Per-trajectory importance weights from summed log-prob deltas.
            let mut traj_delta = vec![0.0; n_traj];
            for t in 0..t_total {
                traj_delta[traj_of_step[t]] += logp[t] - old_logp[t];
            }
            let mut tail_loss = 0.0;
            for (d, e) in traj_delta.iter().zip(excess) {
                tail_loss += d.exp() * e / (1.0 - alpha);
            }
            loss += lambda * tail_loss / n_traj as f64;
        }
        if entropy_coeff != 0.0 {
            loss -= entropy_coeff * candidate.entropy();
        }
        Ok(loss)
    };

    natural_step(policy, &grad, &batch.states, surrogate, &config.trpo)
}

fn rollout_seeds(config: &ResolvedConfig, iteration: usize, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| {
            derive_seed(
                config.seed,
                Stream::Rollout { iteration: iteration as u64, index: i as u64 },
            )
        })
        .collect()
}

fn batch_true_costs(trajs: &[Trajectory]) -> Vec<f64> {
    trajs.iter().map(|t| t.true_costs().iter().sum()).collect()
}

/// Trains an expert policy directly on the environment's true cost.
pub fn train_expert(config: &ResolvedConfig, hooks: &mut dyn TrainHooks) -> Result<TrainOutcome> {
    let env = &config.env;
    let mut policy = GaussianPolicy::new(
        env.obs_dim(),
        env.action_dim(),
        crate::numerics::DEFAULT_HIDDEN.to_vec(),
        &mut stream_rng(config.seed, Stream::PolicyInit),
    )?;
    let mut baseline = ValueBaseline::new(
        env.obs_dim(),
        crate::numerics::DEFAULT_HIDDEN.to_vec(),
        config.baseline_lr,
        config.baseline_epochs,
        &mut stream_rng(config.seed, Stream::BaselineInit),
    )?;
    let mut logs = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let snapshot = policy.clone();
        match expert_iteration(config, iteration, &mut policy, &mut baseline, hooks) {
            Ok(log) => logs.push(log),
            Err(Error::Divergence(msg)) => {
                return Ok(TrainOutcome { policy: snapshot, logs, diverged: Some(msg) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainOutcome { policy, logs, diverged: None })
}

fn expert_iteration(
    config: &ResolvedConfig,
    iteration: usize,
    policy: &mut GaussianPolicy,
    baseline: &mut ValueBaseline,
    hooks: &mut dyn TrainHooks,
) -> Result<IterationLog> {
    let env = &config.env;
    let seeds = rollout_seeds(config, iteration, config.traj_per_iter);
    let trajs = rollout_batch(env, policy, &seeds)?;
    hooks.on_event(&TrainEvent::RolloutsSampled { iteration, n: trajs.len() });

    let q_per_traj: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| discounted_tail_sums(&t.true_costs(), env.gamma))
        .collect();
    let batch = StepBatch::from_q(&trajs, &q_per_traj);
    let values = baseline.predict_batch(&batch.states)?;
    let advantages =
        standardized(&batch.q.iter().zip(&values).map(|(q, v)| q - v).collect::<Vec<_>>());

    let report = policy_step(
        policy,
        &PolicyStepInputs {
            batch: &batch,
            advantages,
            lambda: 0.0,
            alpha: config.alpha,
            entropy_coeff: config.entropy_coeff,
            tail: None,
        },
        config,
    )?;
    hooks.on_event(&TrainEvent::PolicyUpdated {
        iteration,
        kl: report.kl,
        accepted: report.accepted,
    });
    baseline.fit(&batch.states, &batch.q)?;

    let true_costs = batch_true_costs(&trajs);
    let mean_true = true_costs.iter().sum::<f64>() / true_costs.len() as f64;
    let mean_disc: f64 = trajs
        .iter()
        .map(|t| t.discounted_true_cost(env.gamma))
        .sum::<f64>()
        / trajs.len() as f64;
    Ok(IterationLog {
        iteration,
        mean_true_cost: mean_true,
        mean_surrogate_cost: mean_disc,
        nu: 0.0,
        disc_objective: 0.0,
        kl: report.kl,
        accepted: report.accepted,
        cvar_true: risk::empirical_cvar(&true_costs, config.alpha)?,
        param_digest: digest_param_vectors(&[&policy.flat_params()]),
    })
}

/// Trains an imitation policy against expert trajectories; the tail term is
/// active exactly when the configured weight is positive.
pub fn train_imitation(
    config: &ResolvedConfig,
    expert_trajs: &[Trajectory],
    hooks: &mut dyn TrainHooks,
) -> Result<ImitationOutcome> {
    if config.mode == Mode::Expert {
        return Err(Error::config("train_imitation called with expert mode"));
    }
    if expert_trajs.is_empty() {
        return Err(Error::config("imitation needs expert trajectories"));
    }
    let env = &config.env;
    for t in expert_trajs {
        if t.transitions.iter().any(|tr| tr.state.len() != env.obs_dim()) {
            return Err(Error::config("expert trajectories do not match env dims"));
        }
    }
    let rail = config.effective_mode == Mode::Rail;

    let mut policy = GaussianPolicy::new(
        env.obs_dim(),
        env.action_dim(),
        crate::numerics::DEFAULT_HIDDEN.to_vec(),
        &mut stream_rng(config.seed, Stream::PolicyInit),
    )?;
    // Input normalization frozen from the expert dataset.
    let expert_rows: Vec<Vec<f64>> = expert_trajs
        .iter()
        .flat_map(|t| t.transitions.iter())
        .map(|tr| {
            let mut row = tr.state.clone();
            row.extend_from_slice(&tr.action);
            row
        })
        .collect();
    let normalizer = Normalizer::fit(&expert_rows)?;
    let mut disc = Discriminator::new(
        env.obs_dim(),
        env.action_dim(),
        crate::numerics::DEFAULT_HIDDEN.to_vec(),
        normalizer,
        &mut stream_rng(config.seed, Stream::DiscInit),
    )?;
    let mut disc_adam = AdamState::new(
        disc.param_count(),
        AdamConfig::with_learning_rate(config.disc_learning_rate),
    );
    let mut baseline = ValueBaseline::new(
        env.obs_dim(),
        crate::numerics::DEFAULT_HIDDEN.to_vec(),
        config.baseline_lr,
        config.baseline_epochs,
        &mut stream_rng(config.seed, Stream::BaselineInit),
    )?;
    let mut risk_state = RiskState::new(config.alpha, config.lambda_cvar, config.nu_lr, config.nu_init)?;
    let mut logs = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let policy_snapshot = policy.clone();
        let disc_snapshot = disc.clone();
        match imitation_iteration(
            config,
            iteration,
            expert_trajs,
            &mut policy,
            &mut disc,
            &mut disc_adam,
            &mut baseline,
            &mut risk_state,
            rail,
            hooks,
        ) {
            Ok(log) => logs.push(log),
            Err(Error::Divergence(msg)) => {
                return Ok(ImitationOutcome {
                    policy: policy_snapshot,
                    disc: disc_snapshot,
                    logs,
                    diverged: Some(msg),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ImitationOutcome { policy, disc, logs, diverged: None })
}

#[allow(clippy::too_many_arguments)]
fn imitation_iteration(
    config: &ResolvedConfig,
    iteration: usize,
    expert_trajs: &[Trajectory],
    policy: &mut GaussianPolicy,
    disc: &mut Discriminator,
    disc_adam: &mut AdamState,
    baseline: &mut ValueBaseline,
    risk_state: &mut RiskState,
    rail: bool,
    hooks: &mut dyn TrainHooks,
) -> Result<IterationLog> {
    let env = &config.env;
    let gamma = env.gamma;
    let lambda = config.lambda_cvar;

    // Line "sample trajectories".
    let seeds = rollout_seeds(config, iteration, config.traj_per_iter);
    let trajs = rollout_batch(env, policy, &seeds)?;
    hooks.on_event(&TrainEvent::RolloutsSampled { iteration, n: trajs.len() });

    // Pre-update surrogate costs and tail estimate (the discriminator's own
    // tail term sees a self-consistent pair).
    let stale_costs = disc.batch_trajectory_costs(&trajs, gamma)?;
    if rail {
        risk_state.observe_first_batch(&stale_costs)?;
        let h = risk::h_alpha(&stale_costs, risk_state.nu, risk_state.alpha)?;
        hooks.on_event(&TrainEvent::HAlphaEstimated {
            iteration,
            fresh: false,
            h_alpha: h,
            nu: risk_state.nu,
        });
    }

    // Discriminator ascent.
    let batch = DiscBatch::from_trajectories(&trajs, expert_trajs)?;
    for _ in 0..config.disc_steps_per_iter {
        let mut grad = disc.gail_gradient(&batch)?;
        if lambda > 0.0 {
            let costs = match config.cvar_costs {
                CvarCostRefresh::BothFresh => disc.batch_trajectory_costs(&trajs, gamma)?,
                _ => stale_costs.clone(),
            };
            let tail_grad = disc.cvar_gradient(
                &trajs,
                &costs,
                risk_state.nu,
                risk_state.alpha,
                gamma,
                config.disc_cvar_variant,
            )?;
            grad.axpy(lambda, &tail_grad);
        }
        let mut params = disc.flat_params();
        disc_adam.step(&mut params, &grad, Direction::Ascent)?;
        disc.set_flat_params(&params)?;
    }
    let disc_digest = digest_param_vectors(&[&disc.flat_params()]);
    hooks.on_event(&TrainEvent::DiscriminatorUpdated {
        iteration,
        digest: disc_digest.clone(),
    });

    // Costs the policy and threshold updates consume.
    let consumer_costs = match config.cvar_costs {
        CvarCostRefresh::BothStale => stale_costs.clone(),
        _ => disc.batch_trajectory_costs(&trajs, gamma)?,
    };
    if rail {
        let h = risk::h_alpha(&consumer_costs, risk_state.nu, risk_state.alpha)?;
        hooks.on_event(&TrainEvent::HAlphaEstimated {
            iteration,
            fresh: true,
            h_alpha: h,
            nu: risk_state.nu,
        });
    }

    // Cost-to-go under the updated discriminator.
    let q_per_traj = estimate_q(&trajs, disc, gamma)?;
    hooks.on_event(&TrainEvent::QComputed { iteration, disc_digest: disc_digest.clone() });

    let step_batch = StepBatch::from_q(&trajs, &q_per_traj);
    let values = baseline.predict_batch(&step_batch.states)?;
    let advantages =
        standardized(&step_batch.q.iter().zip(&values).map(|(q, v)| q - v).collect::<Vec<_>>());

    let tail = if lambda > 0.0 {
        let excess: Vec<f64> = consumer_costs
            .iter()
            .map(|&r| (r - risk_state.nu).max(0.0))
            .collect();
        let mut coeffs: Vec<f64> = consumer_costs
            .iter()
            .map(|&r| risk::policy_cvar_coeff(r, risk_state.nu, risk_state.alpha))
            .collect();
        if config.policy_coeff_baseline {
            let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
            for c in &mut coeffs {
                *c -= mean;
            }
        }
        Some(TailTerm { coeffs, excess })
    } else {
        None
    };

    let report = policy_step(
        policy,
        &PolicyStepInputs {
            batch: &step_batch,
            advantages,
            lambda,
            alpha: risk_state.alpha,
            entropy_coeff: config.entropy_coeff,
            tail,
        },
        config,
    )?;
    hooks.on_event(&TrainEvent::PolicyUpdated {
        iteration,
        kl: report.kl,
        accepted: report.accepted,
    });

    // Threshold descent on the same batch's costs.
    if rail {
        risk_state.update_nu(&consumer_costs)?;
        hooks.on_event(&TrainEvent::NuUpdated { iteration, nu: risk_state.nu });
    }

    // Baseline fit on the iteration's discounted surrogate returns.
    baseline.fit(&step_batch.states, &step_batch.q)?;

    let true_costs = batch_true_costs(&trajs);
    Ok(IterationLog {
        iteration,
        mean_true_cost: true_costs.iter().sum::<f64>() / true_costs.len() as f64,
        mean_surrogate_cost: consumer_costs.iter().sum::<f64>() / consumer_costs.len() as f64,
        nu: if rail { risk_state.nu } else { 0.0 },
        disc_objective: disc.gail_objective(&batch)?,
        kl: report.kl,
        accepted: report.accepted,
        cvar_true: risk::empirical_cvar(&true_costs, config.alpha)?,
        param_digest: digest_param_vectors(&[&policy.flat_params(), &disc.flat_params()]),
    })
}

/// Rolls out `n` evaluation episodes with the stochastic policy and returns
/// their undiscounted true trajectory costs, in seed order.
pub fn evaluate(
    policy: &GaussianPolicy,
    env: &ToyEnv,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let seeds: Vec<u64> = (0..n)
        .map(|i| derive_seed(seed, Stream::Evaluation { index: i as u64 }))
        .collect();
    let trajs = rollout_batch(env, policy, &seeds)?;
    Ok(batch_true_costs(&trajs))
}

/// Mean undiscounted cost of a scripted reference policy; the cheap
/// yardstick expert training is measured against.
pub fn reference_mean_cost(
    env: &ToyEnv,
    policy: &dyn ActionSampler,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let seeds: Vec<u64> = (0..n)
        .map(|i| derive_seed(seed, Stream::Evaluation { index: i as u64 }))
        .collect();
    let mut total = 0.0;
    for s in seeds {
        let traj = crate::envs::rollout(env, policy, s)?;
        total += traj.true_costs().iter().sum::<f64>();
    }
    Ok(total / n as f64)
}
