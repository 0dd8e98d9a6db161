//! Run configuration: the TOML schema, defaults, and resolution into the
//! concrete objects the training loop consumes.
//!
//! Unknown keys are rejected everywhere. A run's fully resolved config is
//! echoed into its output directory so every artifact is reproducible from
//! the echo and the seed alone.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disc::DiscCvarVariant;
use crate::envs::{EnvKind, ToyEnv, HAZARD_CORRIDOR_ID, POINT_GOAL_ID};
use crate::error::{Error, Result};
use crate::risk::NuInit;
use crate::trpo::TrpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Expert,
    Gail,
    Rail,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Expert => "expert",
            Mode::Gail => "gail",
            Mode::Rail => "rail",
        };
        f.write_str(s)
    }
}

/// Which (surrogate-cost, threshold) pair each tail-term consumer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvarCostRefresh {
    /// Default: the discriminator's own tail term uses costs under the
    /// pre-update parameters; the policy and threshold updates use costs
    /// recomputed under the post-update parameters.
    TwoPhase,
    /// All three updates consume the pre-update costs.
    BothStale,
    /// The discriminator's tail term refreshes after every inner optimizer
    /// step; policy and threshold use post-update costs.
    BothFresh,
}

impl Default for CvarCostRefresh {
    fn default() -> Self {
        CvarCostRefresh::TwoPhase
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub id: String,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Environment-specific dynamics overrides; keys depend on the env id.
    #[serde(default)]
    pub dynamics: Option<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub mode: Mode,
    pub iterations: usize,
    pub traj_per_iter: usize,
    pub seed: u64,
    /// Number of expert trajectories the `sample` command writes.
    pub expert_trajectories: usize,
    pub cvar_costs: CvarCostRefresh,
    pub entropy_coeff: f64,
    pub baseline_epochs: usize,
    pub baseline_lr: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            mode: Mode::Rail,
            iterations: 300,
            traj_per_iter: 20,
            seed: 0,
            expert_trajectories: 25,
            cvar_costs: CvarCostRefresh::default(),
            entropy_coeff: 0.0,
            baseline_epochs: 5,
            baseline_lr: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscSection {
    pub learning_rate: f64,
    pub steps_per_iter: usize,
    pub cvar_grad: DiscCvarVariant,
}

impl Default for DiscSection {
    fn default() -> Self {
        DiscSection {
            learning_rate: 1e-3,
            steps_per_iter: 1,
            cvar_grad: DiscCvarVariant::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskSection {
    pub alpha: f64,
    /// Tail-term weight; defaults per environment when absent.
    pub lambda_cvar: Option<f64>,
    pub nu_lr: f64,
    pub nu_init: NuInit,
    /// Center the policy-side tail coefficients on their batch mean
    /// (variance reduction for the score-function estimator).
    pub policy_coeff_baseline: bool,
}

impl Default for RiskSection {
    fn default() -> Self {
        RiskSection {
            alpha: 0.9,
            lambda_cvar: None,
            nu_lr: 0.01,
            nu_init: NuInit::default(),
            policy_coeff_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Root directory for run outputs; the `RAIL_OUT_ROOT` environment
    /// variable overrides it.
    pub out_root: Option<String>,
    pub run_name: Option<String>,
}

/// The on-disk config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub trpo: TrpoConfig,
    #[serde(default)]
    pub disc: DiscSection,
    #[serde(default)]
    pub risk: RiskSection,
    #[serde(default)]
    pub io: IoSection,
}

/// Per-environment default tail-term weight.
pub fn default_lambda(env_id: &str) -> f64 {
    match env_id {
        POINT_GOAL_ID => 0.25,
        HAZARD_CORRIDOR_ID => 0.5,
        _ => 0.5,
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))
    }

    pub fn for_env(id: &str) -> Self {
        RunConfig {
            env: EnvSection { id: id.to_string(), gamma: None, max_steps: None, dynamics: None },
            train: TrainSection::default(),
            trpo: TrpoConfig::default(),
            disc: DiscSection::default(),
            risk: RiskSection::default(),
            io: IoSection::default(),
        }
    }

    /// Validates, fills per-env defaults, and builds the runtime objects.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut env = ToyEnv::from_id(&self.env.id)?;
        if let Some(g) = self.env.gamma {
            if !(0.0 < g && g <= 1.0) {
                return Err(Error::config(format!("gamma must be in (0, 1], got {g}")));
            }
            env.gamma = g;
        }
        if let Some(ms) = self.env.max_steps {
            if ms == 0 {
                return Err(Error::config("max_steps must be >= 1"));
            }
            env.max_steps = ms;
        }
        if let Some(overrides) = &self.env.dynamics {
            env.kind = match env.kind {
                EnvKind::PointGoal(_) => EnvKind::PointGoal(
                    overrides
                        .clone()
                        .try_into()
                        .map_err(|e| Error::config(format!("bad dynamics overrides: {e}")))?,
                ),
                EnvKind::HazardCorridor(_) => EnvKind::HazardCorridor(
                    overrides
                        .clone()
                        .try_into()
                        .map_err(|e| Error::config(format!("bad dynamics overrides: {e}")))?,
                ),
            };
        }
        self.trpo.validate()?;
        if self.train.iterations == 0 && self.train.mode != Mode::Expert {
            return Err(Error::config("imitation runs need iterations >= 1"));
        }
        if self.train.traj_per_iter == 0 {
            return Err(Error::config("traj_per_iter must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.risk.alpha) {
            return Err(Error::config("alpha must be in [0, 1)"));
        }
        let lambda = self.risk.lambda_cvar.unwrap_or_else(|| match self.train.mode {
            Mode::Gail => 0.0,
            _ => default_lambda(env.id()),
        });
        if lambda < 0.0 {
            return Err(Error::config("lambda_cvar must be >= 0"));
        }
        if self.train.mode == Mode::Gail && lambda != 0.0 {
            return Err(Error::config("gail mode requires lambda_cvar = 0"));
        }
        // A risk-averse run with a zero weight degenerates to the
        // risk-neutral mode and is labeled as such.
        let effective_mode = match self.train.mode {
            Mode::Rail if lambda == 0.0 => Mode::Gail,
            m => m,
        };
        Ok(ResolvedConfig {
            env,
            mode: self.train.mode,
            effective_mode,
            iterations: self.train.iterations,
            traj_per_iter: self.train.traj_per_iter,
            seed: self.train.seed,
            expert_trajectories: self.train.expert_trajectories,
            cvar_costs: self.train.cvar_costs,
            entropy_coeff: self.train.entropy_coeff,
            baseline_epochs: self.train.baseline_epochs,
            baseline_lr: self.train.baseline_lr,
            trpo: self.trpo,
            disc_learning_rate: self.disc.learning_rate,
            disc_steps_per_iter: self.disc.steps_per_iter,
            disc_cvar_variant: self.disc.cvar_grad,
            alpha: self.risk.alpha,
            lambda_cvar: lambda,
            nu_lr: self.risk.nu_lr,
            nu_init: self.risk.nu_init,
            policy_coeff_baseline: self.risk.policy_coeff_baseline,
            source: self.clone(),
        })
    }
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub env: ToyEnv,
    pub mode: Mode,
    /// `rail` with a zero tail weight is labeled `gail`.
    pub effective_mode: Mode,
    pub iterations: usize,
    pub traj_per_iter: usize,
    pub seed: u64,
    pub expert_trajectories: usize,
    pub cvar_costs: CvarCostRefresh,
    pub entropy_coeff: f64,
    pub baseline_epochs: usize,
    pub baseline_lr: f64,
    pub trpo: TrpoConfig,
    pub disc_learning_rate: f64,
    pub disc_steps_per_iter: usize,
    pub disc_cvar_variant: DiscCvarVariant,
    pub alpha: f64,
    pub lambda_cvar: f64,
    pub nu_lr: f64,
    pub nu_init: NuInit,
    pub policy_coeff_baseline: bool,
    source: RunConfig,
}

impl ResolvedConfig {
    /// The echo written into the run directory: the source document with
    /// resolved values substituted.
    pub fn echo_toml(&self) -> String {
        let mut doc = self.source.clone();
        doc.risk.lambda_cvar = Some(self.lambda_cvar);
        doc.env.gamma = Some(self.env.gamma);
        doc.env.max_steps = Some(self.env.max_steps);
        toml::to_string_pretty(&doc).expect("config serializes")
    }

    /// Digest of the resolved config; stamped into checkpoint manifests.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.echo_toml().as_bytes());
        hex_string(&hasher.finalize())
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
