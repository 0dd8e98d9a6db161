//! Toy continuous-control MDPs with known true cost functions, plus
//! trajectory rollout.
//!
//! Two environments ship. `PointGoal` is a 2D point mass steering to a
//! random goal; its trajectory-cost distribution is well-behaved.
//! `HazardCorridor` runs the point mass along a corridor past a hazard
//! strip while random gusts shove it toward the strip; entering the strip
//! costs a large penalty, which makes the trajectory-cost distribution
//! heavy-tailed under ordinary goal-seeking behavior.
//!
//! Observations are `(pos, goal)` in R^4 and actions are velocities in R^2
//! for both environments. Episodes run to a fixed horizon with no early
//! termination so every trajectory in a batch has the same length.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::seeded_rng;

pub const OBS_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;

/// One environment step: `(state, action) -> (next_state, cost)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub true_cost: f64,
}

/// A fixed-horizon episode. The unit of sampling, cost evaluation, and risk
/// estimation. `seed` records the generator that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.transitions.iter().map(|t| t.state.as_slice())
    }

    pub fn true_costs(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.true_cost).collect()
    }

    pub fn discounted_true_cost(&self, gamma: f64) -> f64 {
        discounted_sum(&self.true_costs(), gamma)
    }

    /// Consecutive states chain: `next_state` of step t equals `state` of
    /// step t+1.
    pub fn check_chain(&self) -> bool {
        self.transitions
            .windows(2)
            .all(|w| w[0].next_state == w[1].state)
    }
}

/// Discounted sum of per-step costs used by both true and surrogate
/// trajectory costs. At `gamma == 1` this is the plain sum.
pub fn discounted_sum(costs: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut weight = 1.0;
    for c in costs {
        acc += weight * c;
        weight *= gamma;
    }
    acc
}

/// Discounted cost of a trajectory under externally supplied per-step costs
/// (surrogate costs from a discriminator, or true costs).
pub fn discounted_cost(trajectory: &Trajectory, gamma: f64, per_step_costs: &[f64]) -> Result<f64> {
    if per_step_costs.len() != trajectory.len() {
        return Err(Error::shape(format!(
            "per-step cost length {} does not match trajectory length {}",
            per_step_costs.len(),
            trajectory.len()
        )));
    }
    Ok(discounted_sum(per_step_costs, gamma))
}

/// `(1 - gamma^len)/(1 - gamma)`, the discounted length of an episode;
/// equals `len` in the `gamma == 1` limit.
pub fn discounted_horizon(gamma: f64, len: usize) -> f64 {
    if gamma == 1.0 {
        len as f64
    } else {
        (1.0 - gamma.powi(len as i32)) / (1.0 - gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointGoalParams {
    /// Velocity-to-displacement scale per step.
    pub step_scale: f64,
    /// Std of the Gaussian dynamics noise.
    pub noise_std: f64,
    /// Weight of the squared-action cost term.
    pub action_cost_weight: f64,
    /// Start position and goal are uniform in `[-init_range, init_range]^2`.
    pub init_range: f64,
}

impl Default for PointGoalParams {
    fn default() -> Self {
        PointGoalParams {
            step_scale: 0.1,
            noise_std: 0.01,
            action_cost_weight: 0.1,
            init_range: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardCorridorParams {
    pub step_scale: f64,
    pub noise_std: f64,
    pub action_cost_weight: f64,
    /// Start position (jittered by `start_jitter`).
    pub start: [f64; 2],
    pub start_jitter: f64,
    /// Fixed goal at the far end of the corridor.
    pub goal: [f64; 2],
    /// The hazard strip is the half-plane `y >= hazard_y`.
    pub hazard_y: f64,
    /// Per-step probability that a gust fires.
    pub gust_probability: f64,
    /// Gust displacement toward the hazard (+y).
    pub gust_dy: f64,
    /// Cost added for every step spent inside the hazard strip.
    pub hazard_penalty: f64,
}

impl Default for HazardCorridorParams {
    fn default() -> Self {
        HazardCorridorParams {
            step_scale: 0.1,
            noise_std: 0.01,
            action_cost_weight: 0.1,
            start: [0.0, 0.0],
            start_jitter: 0.05,
            goal: [1.0, 0.0],
            hazard_y: 0.42,
            gust_probability: 0.02,
            gust_dy: 0.3,
            hazard_penalty: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvKind {
    PointGoal(PointGoalParams),
    HazardCorridor(HazardCorridorParams),
}

/// An environment spec: immutable, cheap to clone, safe to share across
/// rollout threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEnv {
    pub kind: EnvKind,
    pub gamma: f64,
    pub max_steps: usize,
}

/// Result of a single environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub next_state: Vec<f64>,
    pub true_cost: f64,
    pub done: bool,
    /// Diagnostic: whether a gust fired this step (always false for
    /// `PointGoal`).
    pub gust_fired: bool,
}

pub const POINT_GOAL_ID: &str = "point_goal";
pub const HAZARD_CORRIDOR_ID: &str = "hazard_corridor";

impl ToyEnv {
    pub fn point_goal() -> Self {
        ToyEnv {
            kind: EnvKind::PointGoal(PointGoalParams::default()),
            gamma: 0.995,
            max_steps: 50,
        }
    }

    pub fn hazard_corridor() -> Self {
        ToyEnv {
            kind: EnvKind::HazardCorridor(HazardCorridorParams::default()),
            gamma: 0.995,
            max_steps: 100,
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            POINT_GOAL_ID => Ok(ToyEnv::point_goal()),
            HAZARD_CORRIDOR_ID => Ok(ToyEnv::hazard_corridor()),
            other => Err(Error::config(format!("unknown environment id `{other}`"))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self.kind {
            EnvKind::PointGoal(_) => POINT_GOAL_ID,
            EnvKind::HazardCorridor(_) => HAZARD_CORRIDOR_ID,
        }
    }

    pub fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    pub fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    /// Draws an initial state. PointGoal: position and goal uniform in the
    /// init square (4 uniform draws). HazardCorridor: start plus Gaussian
    /// jitter, fixed goal (2 normal draws).
    pub fn init_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.kind {
            EnvKind::PointGoal(p) => {
                let r = p.init_range;
                vec![
                    rng.gen_range(-r..r),
                    rng.gen_range(-r..r),
                    rng.gen_range(-r..r),
                    rng.gen_range(-r..r),
                ]
            }
            EnvKind::HazardCorridor(p) => {
                let jx: f64 = rng.sample(StandardNormal);
                let jy: f64 = rng.sample(StandardNormal);
                vec![
                    p.start[0] + p.start_jitter * jx,
                    p.start[1] + p.start_jitter * jy,
                    p.goal[0],
                    p.goal[1],
                ]
            }
        }
    }

    /// True cost `c(state, action)`; deterministic.
    pub fn true_cost(&self, state: &[f64], action: &[f64]) -> f64 {
        let dist = ((state[0] - state[2]).powi(2) + (state[1] - state[3]).powi(2)).sqrt();
        let act_sq = action[0] * action[0] + action[1] * action[1];
        match &self.kind {
            EnvKind::PointGoal(p) => dist + p.action_cost_weight * act_sq,
            EnvKind::HazardCorridor(p) => {
                let hazard = if state[1] >= p.hazard_y { p.hazard_penalty } else { 0.0 };
                dist + p.action_cost_weight * act_sq + hazard
            }
        }
    }

    /// Samples the transition distribution. `t` is the zero-based step
    /// index; `done` is set on the final step of the horizon.
    ///
    /// Draw order per step is fixed (two noise normals, then for
    /// HazardCorridor one gust uniform) so trajectories replay exactly.
    pub fn step(
        &self,
        state: &[f64],
        action: &[f64],
        t: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EnvStep> {
        if state.len() != OBS_DIM {
            return Err(Error::shape(format!("state length {} != {OBS_DIM}", state.len())));
        }
        if action.len() != ACTION_DIM {
            return Err(Error::shape(format!(
                "action length {} != {ACTION_DIM}",
                action.len()
            )));
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::divergence("non-finite action"));
        }
        let true_cost = self.true_cost(state, action);
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let (step_scale, noise_std) = match &self.kind {
            EnvKind::PointGoal(p) => (p.step_scale, p.noise_std),
            EnvKind::HazardCorridor(p) => (p.step_scale, p.noise_std),
        };
        let mut pos = [
            state[0] + step_scale * action[0] + noise_std * nx,
            state[1] + step_scale * action[1] + noise_std * ny,
        ];
        let mut gust_fired = false;
        if let EnvKind::HazardCorridor(p) = &self.kind {
            let u: f64 = rng.gen_range(0.0..1.0);
            if u < p.gust_probability {
                pos[1] += p.gust_dy;
                gust_fired = true;
            }
        }
        let next_state = vec![pos[0], pos[1], state[2], state[3]];
        Ok(EnvStep {
            next_state,
            true_cost,
            done: t + 1 >= self.max_steps,
            gust_fired,
        })
    }
}

/// Anything that can act in an environment. Implemented by the Gaussian
/// policy and by the scripted reference policies below.
pub trait ActionSampler: Sync {
    fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
}

/// Scripted policy heading straight for the goal at fixed speed. Used as a
/// reference behavior in tests and tail diagnostics.
#[derive(Debug, Clone)]
pub struct GreedyGoalPolicy {
    pub speed: f64,
}

impl Default for GreedyGoalPolicy {
    fn default() -> Self {
        GreedyGoalPolicy { speed: 1.0 }
    }
}

impl ActionSampler for GreedyGoalPolicy {
    fn sample_action(&self, obs: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let dx = obs[2] - obs[0];
        let dy = obs[3] - obs[1];
        let dist = (dx * dx + dy * dy).sqrt();
        if dist < 1e-9 {
            return Ok(vec![0.0, 0.0]);
        }
        // Slow down on final approach instead of orbiting the goal.
        let speed = self.speed.min(dist / 0.1);
        Ok(vec![speed * dx / dist, speed * dy / dist])
    }
}

/// Always emits the same action; the zero-action baseline.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    pub action: Vec<f64>,
}

impl ActionSampler for ConstantPolicy {
    fn sample_action(&self, _obs: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(self.action.clone())
    }
}

/// Rolls out one fixed-horizon episode. Fully reproducible given the policy
/// parameters and the seed.
pub fn rollout(env: &ToyEnv, policy: &dyn ActionSampler, seed: u64) -> Result<Trajectory> {
    let mut rng = seeded_rng(seed);
    let mut state = env.init_state(&mut rng);
    let mut transitions = Vec::with_capacity(env.max_steps);
    for t in 0..env.max_steps {
        let action = policy.sample_action(&state, &mut rng)?;
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::divergence(format!("policy emitted non-finite action at step {t}")));
        }
        let step = env.step(&state, &action, t, &mut rng)?;
        transitions.push(Transition {
            state: state.clone(),
            action,
            next_state: step.next_state.clone(),
            true_cost: step.true_cost,
        });
        state = step.next_state;
        if step.done {
            break;
        }
    }
    Ok(Trajectory { transitions, seed })
}

/// Rolls out one trajectory per seed, in parallel when the `parallel`
/// feature is enabled. Results are merged in seed order, so the output is
/// independent of scheduling.
pub fn rollout_batch<P: ActionSampler>(
    env: &ToyEnv,
    policy: &P,
    seeds: &[u64],
) -> Result<Vec<Trajectory>> {
    parallel::indexed_map(seeds.len(), |i| rollout(env, policy, seeds[i]))
        .into_iter()
        .collect()
}

/// Sequential rollout batch regardless of features (bench comparison).
pub fn rollout_batch_sequential<P: ActionSampler>(
    env: &ToyEnv,
    policy: &P,
    seeds: &[u64],
) -> Result<Vec<Trajectory>> {
    parallel::indexed_map_sequential(seeds.len(), |i| rollout(env, policy, seeds[i]))
        .into_iter()
        .collect()
}
