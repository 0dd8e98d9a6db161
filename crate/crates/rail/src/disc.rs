//! The adversarial binary classifier over state-action pairs, its
//! classification gradient, and the order-preserving surrogate cost that
//! turns scores into per-step costs.
//!
//! Scores live strictly inside (0, 1): the pre-sigmoid logit is clamped to
//! `[-10, 10]`, which keeps `ln D` and `ln(1 - D)` finite no matter how
//! confident the network gets. Inputs are normalized by mean/std statistics
//! frozen from the expert dataset at load time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{discounted_sum, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{MlpSpec, ParamVector};
use crate::parallel;
use crate::risk;

pub const LOGIT_CLAMP: f64 = 10.0;

/// Order-preserving per-step cost: `ln(score)`. Strictly increasing in the
/// score, so ordering by surrogate trajectory cost matches ordering by
/// "how agent-like the discriminator finds the trajectory".
pub fn cost_surrogate(score: f64) -> f64 {
    score.ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-dimension input normalization, frozen from the expert dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Mean/std over rows, with a floor on std so constant dimensions do
    /// not blow up.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().ok_or_else(|| Error::shape("normalizer needs rows"))?.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::shape("inconsistent row width"));
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(1e-6)).collect();
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn apply_into(&self, state: &[f64], action: &[f64], out: &mut [f64]) {
        for (i, x) in state.iter().chain(action.iter()).enumerate() {
            out[i] = (x - self.mean[i]) / self.std[i];
        }
    }
}

/// Batch of agent and expert pairs for one classifier update. The range map
/// records which agent pairs belong to which sampled trajectory, which the
/// tail-gradient's per-trajectory indicator needs.
#[derive(Debug, Clone)]
pub struct DiscBatch {
    pub agent_states: Vec<Vec<f64>>,
    pub agent_actions: Vec<Vec<f64>>,
    pub expert_states: Vec<Vec<f64>>,
    pub expert_actions: Vec<Vec<f64>>,
    pub agent_traj_ranges: Vec<std::ops::Range<usize>>,
}

impl DiscBatch {
    pub fn from_trajectories(agent: &[Trajectory], expert: &[Trajectory]) -> Result<Self> {
        let mut agent_states = Vec::new();
        let mut agent_actions = Vec::new();
        let mut agent_traj_ranges = Vec::with_capacity(agent.len());
        for traj in agent {
            let start = agent_states.len();
            for tr in &traj.transitions {
                agent_states.push(tr.state.clone());
                agent_actions.push(tr.action.clone());
            }
            agent_traj_ranges.push(start..agent_states.len());
        }
        let mut expert_states = Vec::new();
        let mut expert_actions = Vec::new();
        for traj in expert {
            for tr in &traj.transitions {
                expert_states.push(tr.state.clone());
                expert_actions.push(tr.action.clone());
            }
        }
        let batch = DiscBatch {
            agent_states,
            agent_actions,
            expert_states,
            expert_actions,
            agent_traj_ranges,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agent_states.is_empty() || self.expert_states.is_empty() {
            return Err(Error::shape("discriminator batch needs agent and expert pairs"));
        }
        if self.agent_states.len() != self.agent_actions.len()
            || self.expert_states.len() != self.expert_actions.len()
        {
            return Err(Error::shape("states and actions must be parallel"));
        }
        // Ranges partition the agent pairs exactly.
        let mut cursor = 0;
        for r in &self.agent_traj_ranges {
            if r.start != cursor {
                return Err(Error::shape("trajectory ranges must partition agent pairs"));
            }
            cursor = r.end;
        }
        if cursor != self.agent_states.len() {
            return Err(Error::shape("trajectory ranges must cover all agent pairs"));
        }
        Ok(())
    }

    pub fn n_agent(&self) -> usize {
        self.agent_states.len()
    }

    pub fn n_expert(&self) -> usize {
        self.expert_states.len()
    }
}

/// Which chain rule the discriminator-side tail gradient applies through
/// the trajectory cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscCvarVariant {
    /// Shared `(1 - gamma^L)/(1 - gamma)` factor per trajectory, distributed
    /// uniformly over its steps. The canonical form.
    SharedFactor,
    /// Exact per-step chain rule: `gamma^t` weight on each step's gradient.
    PerStep,
}

impl Default for DiscCvarVariant {
    fn default() -> Self {
        DiscCvarVariant::SharedFactor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    spec: MlpSpec,
    params: ParamVector,
    normalizer: Normalizer,
}

impl Discriminator {
    pub fn new<R: Rng>(
        obs_dim: usize,
        action_dim: usize,
        hidden: Vec<usize>,
        normalizer: Normalizer,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim + action_dim, hidden, 1)?;
        if normalizer.dim() != obs_dim + action_dim {
            return Err(Error::shape("normalizer dimension mismatch"));
        }
        let params = spec.init_params(rng);
        Ok(Discriminator { spec, params, normalizer })
    }

    pub fn from_parts(spec: MlpSpec, params: ParamVector, normalizer: Normalizer) -> Result<Self> {
        if spec.output_dim != 1 {
            return Err(Error::shape("discriminator net must have one output"));
        }
        if params.len() != spec.param_count() {
            return Err(Error::shape("parameter count mismatch"));
        }
        if normalizer.dim() != spec.input_dim {
            return Err(Error::shape("normalizer dimension mismatch"));
        }
        Ok(Discriminator { spec, params, normalizer })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn flat_params(&self) -> ParamVector {
        self.params.clone()
    }

    pub fn set_flat_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.spec.param_count() {
            return Err(Error::shape("parameter count mismatch"));
        }
        self.params = params.clone();
        Ok(())
    }

    fn raw_logit(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mut input = vec![0.0; self.spec.input_dim];
        if state.len() + action.len() != input.len() {
            return Err(Error::shape(format!(
                "pair dims {}+{} do not match discriminator input {}",
                state.len(),
                action.len(),
                input.len()
            )));
        }
        self.normalizer.apply_into(state, action, &mut input);
        Ok(self.spec.forward(&self.params, &input)?[0])
    }

    /// Clamped pre-sigmoid logit.
    pub fn logit(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.raw_logit(state, action)?.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
    }

    /// Score in (0, 1): the likelihood the pair came from the agent.
    pub fn score(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(state, action)?))
    }

    /// Per-step surrogate costs `ln D(s_t, a_t)` along a trajectory.
    pub fn surrogate_costs(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        traj.transitions
            .iter()
            .map(|tr| Ok(cost_surrogate(self.score(&tr.state, &tr.action)?)))
            .collect()
    }

    /// Discounted surrogate trajectory cost.
    pub fn trajectory_cost(&self, traj: &Trajectory, gamma: f64) -> Result<f64> {
        Ok(discounted_sum(&self.surrogate_costs(traj)?, gamma))
    }

    /// Surrogate costs for a whole batch, in trajectory order.
    pub fn batch_trajectory_costs(&self, trajs: &[Trajectory], gamma: f64) -> Result<Vec<f64>> {
        parallel::indexed_map(trajs.len(), |i| self.trajectory_cost(&trajs[i], gamma))
            .into_iter()
            .collect()
    }

    /// Adds `scale * d(ln D)/d(params)` (or `ln(1 - D)` for `expert_side`)
    /// into the accumulator.
    fn log_score_grad_into(
        &self,
        state: &[f64],
        action: &[f64],
        expert_side: bool,
        scale: f64,
        acc: &mut [f64],
    ) -> Result<()> {
        let mut input = vec![0.0; self.spec.input_dim];
        self.normalizer.apply_into(state, action, &mut input);
        let z = self.spec.forward(&self.params, &input)?[0];
        if z.abs() > LOGIT_CLAMP {
            // Clamp active: score is constant in the parameters.
            return Ok(());
        }
        let d = sigmoid(z);
        // d ln D / dz = 1 - D; d ln(1 - D) / dz = -D.
        let dz = if expert_side { -d } else { 1.0 - d };
        self.spec.backward_into(&self.params, &input, &[dz], scale, acc)
    }

    /// Classification objective: `mean_agent ln D + mean_expert ln(1 - D)`.
    /// The discriminator ascends this.
    pub fn gail_objective(&self, batch: &DiscBatch) -> Result<f64> {
        batch.validate()?;
        let na = batch.n_agent() as f64;
        let ne = batch.n_expert() as f64;
        let agent = parallel::chunked_scalar_sum(batch.n_agent(), |i| {
            cost_surrogate(self.score(&batch.agent_states[i], &batch.agent_actions[i]).unwrap())
        });
        let expert = parallel::chunked_scalar_sum(batch.n_expert(), |i| {
            (1.0 - self.score(&batch.expert_states[i], &batch.expert_actions[i]).unwrap()).ln()
        });
        Ok(agent / na + expert / ne)
    }

    /// Gradient of [`Self::gail_objective`] with respect to the parameters
    /// (the ascent direction). Tail terms are added by the trainer.
    pub fn gail_gradient(&self, batch: &DiscBatch) -> Result<ParamVector> {
        batch.validate()?;
        let dim = self.param_count();
        let na = batch.n_agent() as f64;
        let ne = batch.n_expert() as f64;
        let agent = parallel::chunked_vector_sum(batch.n_agent(), dim, |i, acc| {
            self.log_score_grad_into(
                &batch.agent_states[i],
                &batch.agent_actions[i],
                false,
                1.0 / na,
                acc,
            )
            .expect("validated batch");
        });
        let expert = parallel::chunked_vector_sum(batch.n_expert(), dim, |i, acc| {
            self.log_score_grad_into(
                &batch.expert_states[i],
                &batch.expert_actions[i],
                true,
                1.0 / ne,
                acc,
            )
            .expect("validated batch");
        });
        let mut grad = ParamVector::from_vec(agent);
        grad.axpy(1.0, &ParamVector::from_vec(expert));
        if !grad.all_finite() {
            return Err(Error::divergence("non-finite discriminator gradient"));
        }
        Ok(grad)
    }

    /// Gradient of the empirical tail surrogate with respect to the
    /// parameters, averaged over trajectories. `costs[i]` must be the
    /// discounted surrogate cost of `trajs[i]` under the current parameters.
    pub fn cvar_gradient(
        &self,
        trajs: &[Trajectory],
        costs: &[f64],
        nu: f64,
        alpha: f64,
        gamma: f64,
        variant: DiscCvarVariant,
    ) -> Result<ParamVector> {
        if trajs.len() != costs.len() {
            return Err(Error::shape("trajectory/cost length mismatch"));
        }
        let dim = self.param_count();
        let n = trajs.len() as f64;
        let grad = parallel::chunked_vector_sum(trajs.len(), dim, |i, acc| {
            let traj = &trajs[i];
            let len = traj.len();
            match variant {
                DiscCvarVariant::SharedFactor => {
                    let w = risk::disc_cvar_weight(costs[i], nu, alpha, gamma, len);
                    if w == 0.0 {
                        return;
                    }
                    let per_step = w / (len as f64 * n);
                    for tr in &traj.transitions {
                        self.log_score_grad_into(&tr.state, &tr.action, false, per_step, acc)
                            .expect("shapes fixed by trajectory");
                    }
                }
                DiscCvarVariant::PerStep => {
                    if costs[i] < nu {
                        return;
                    }
                    let base = 1.0 / ((1.0 - alpha) * n);
                    let mut discount = 1.0;
                    for tr in &traj.transitions {
                        self.log_score_grad_into(
                            &tr.state,
                            &tr.action,
                            false,
                            base * discount,
                            acc,
                        )
                        .expect("shapes fixed by trajectory");
                        discount *= gamma;
                    }
                }
            }
        });
        let grad = ParamVector::from_vec(grad);
        if !grad.all_finite() {
            return Err(Error::divergence("non-finite tail gradient"));
        }
        Ok(grad)
    }
}
