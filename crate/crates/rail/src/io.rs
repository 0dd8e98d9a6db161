//! Persistence formats: binary trajectory and checkpoint files (exact f64
//! payloads, SHA-256 integrity), CSV convergence logs, and the
//! human-readable cost-summary and report documents.
//!
//! All formats are versioned; unknown versions are rejected rather than
//! misparsed. Nothing embeds timestamps or absolute paths, so identical
//! runs produce byte-identical artifacts.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex_string, IoSection};
use crate::disc::{Discriminator, Normalizer};
use crate::envs::{Trajectory, Transition};
use crate::error::{Error, Result};
use crate::metrics::{AgentStats, HistogramData, TailRiskReport};
use crate::numerics::{MlpSpec, ParamVector};
use crate::policy::GaussianPolicy;
use crate::trainer::IterationLog;

const TRAJECTORY_MAGIC: &[u8; 8] = b"RAILTRJ\0";
const CHECKPOINT_MAGIC: &[u8; 8] = b"RAILCKP\0";
const FORMAT_VERSION: u32 = 1;

/// Metadata heading a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub env_id: String,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    pub generator_seed: u64,
    /// Digest of the checkpoint that generated these trajectories (empty
    /// for hand-made files).
    pub policy_checkpoint_hash: String,
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64s(buf: &mut Vec<u8>, xs: impl IntoIterator<Item = f64>) {
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format("truncated file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn finalize_file(path: &Path, magic: &[u8; 8], body: Vec<u8>) -> Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(&body);
    let checksum = hasher.finalize();
    let mut f = fs::File::create(path)?;
    f.write_all(magic)?;
    f.write_all(&body)?;
    f.write_all(&checksum)?;
    Ok(())
}

fn open_file(path: &Path, magic: &[u8; 8]) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 + 32 || &bytes[..8] != magic {
        return Err(Error::format(format!("{} is not a recognized file", path.display())));
    }
    let body = &bytes[8..bytes.len() - 32];
    let stored = &bytes[bytes.len() - 32..];
    let mut hasher = Sha256::new();
    hasher.update(body);
    if hasher.finalize().as_slice() != stored {
        return Err(Error::format(format!("checksum failure in {}", path.display())));
    }
    Ok(body.to_vec())
}

/// Writes trajectories with their header. Each record stores the seed, the
/// length, the `length + 1` chained observations, the actions, and the
/// per-step true costs, all as little-endian f64.
pub fn write_trajectories(
    path: &Path,
    header: &TrajectoryHeader,
    trajs: &[Trajectory],
) -> Result<()> {
    for (i, t) in trajs.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::shape(format!("trajectory {i} is empty")));
        }
        if !t.check_chain() {
            return Err(Error::shape(format!("trajectory {i} does not chain")));
        }
        for tr in &t.transitions {
            if tr.state.len() != header.obs_dim || tr.action.len() != header.action_dim {
                return Err(Error::shape(format!("trajectory {i} does not match header dims")));
            }
        }
    }
    let mut body = Vec::new();
    push_u32(&mut body, FORMAT_VERSION);
    let header_json =
        serde_json::to_vec(header).map_err(|e| Error::format(format!("header: {e}")))?;
    push_u32(&mut body, header_json.len() as u32);
    body.extend_from_slice(&header_json);
    push_u64(&mut body, trajs.len() as u64);
    for t in trajs {
        push_u64(&mut body, t.seed);
        push_u32(&mut body, t.len() as u32);
        // Observations s_0..s_L (the chain invariant makes next states
        // recoverable).
        for tr in &t.transitions {
            push_f64s(&mut body, tr.state.iter().copied());
        }
        push_f64s(&mut body, t.transitions.last().unwrap().next_state.iter().copied());
        for tr in &t.transitions {
            push_f64s(&mut body, tr.action.iter().copied());
        }
        push_f64s(&mut body, t.transitions.iter().map(|tr| tr.true_cost));
    }
    finalize_file(path, TRAJECTORY_MAGIC, body)
}

pub fn read_trajectories(path: &Path) -> Result<(TrajectoryHeader, Vec<Trajectory>)> {
    let body = open_file(path, TRAJECTORY_MAGIC)?;
    let mut r = Reader::new(&body);
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported trajectory format version {version}")));
    }
    let header_len = r.u32()? as usize;
    let header: TrajectoryHeader = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::format(format!("bad header: {e}")))?;
    let n = r.u64()? as usize;
    let mut trajs = Vec::with_capacity(n);
    for _ in 0..n {
        let seed = r.u64()?;
        let len = r.u32()? as usize;
        if len == 0 {
            return Err(Error::format("zero-length trajectory record"));
        }
        let obs = r.f64s((len + 1) * header.obs_dim)?;
        let acts = r.f64s(len * header.action_dim)?;
        let costs = r.f64s(len)?;
        let transitions = (0..len)
            .map(|t| Transition {
                state: obs[t * header.obs_dim..(t + 1) * header.obs_dim].to_vec(),
                action: acts[t * header.action_dim..(t + 1) * header.action_dim].to_vec(),
                next_state: obs[(t + 1) * header.obs_dim..(t + 2) * header.obs_dim].to_vec(),
                true_cost: costs[t],
            })
            .collect();
        trajs.push(Trajectory { transitions, seed });
    }
    if !r.done() {
        return Err(Error::format("trailing bytes in trajectory file"));
    }
    Ok((header, trajs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Policy,
    Discriminator,
    Baseline,
}

/// Checkpoint manifest: everything needed to rebuild the model and verify
/// it belongs to the run that wrote it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: ModelKind,
    pub env_id: String,
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Architecture of the underlying network.
    pub net: MlpSpec,
    pub param_count: usize,
    pub config_digest: String,
    pub seed: u64,
    /// Input normalization (discriminator checkpoints only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<Normalizer>,
}

fn write_checkpoint_raw(
    path: &Path,
    manifest: &CheckpointManifest,
    params: &ParamVector,
) -> Result<()> {
    if manifest.param_count != params.len() {
        return Err(Error::shape("manifest parameter count does not match payload"));
    }
    let mut body = Vec::new();
    push_u32(&mut body, FORMAT_VERSION);
    let manifest_json =
        serde_json::to_vec(manifest).map_err(|e| Error::format(format!("manifest: {e}")))?;
    push_u32(&mut body, manifest_json.len() as u32);
    body.extend_from_slice(&manifest_json);
    push_f64s(&mut body, params.iter().copied());
    finalize_file(path, CHECKPOINT_MAGIC, body)
}

fn read_checkpoint_raw(path: &Path) -> Result<(CheckpointManifest, ParamVector)> {
    let body = open_file(path, CHECKPOINT_MAGIC)?;
    let mut r = Reader::new(&body);
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint format version {version}")));
    }
    let manifest_len = r.u32()? as usize;
    let manifest: CheckpointManifest = serde_json::from_slice(r.take(manifest_len)?)
        .map_err(|e| Error::format(format!("bad manifest: {e}")))?;
    let params = ParamVector::from_vec(r.f64s(manifest.param_count)?);
    if !r.done() {
        return Err(Error::format("trailing bytes in checkpoint"));
    }
    if manifest.param_count != manifest.net.param_count() + extra_params(&manifest) {
        return Err(Error::format("manifest parameter count inconsistent with architecture"));
    }
    Ok((manifest, params))
}

fn extra_params(manifest: &CheckpointManifest) -> usize {
    match manifest.kind {
        ModelKind::Policy => manifest.action_dim, // log-std vector
        _ => 0,
    }
}

pub fn write_policy_checkpoint(
    path: &Path,
    policy: &GaussianPolicy,
    env_id: &str,
    config_digest: &str,
    seed: u64,
) -> Result<()> {
    let manifest = CheckpointManifest {
        kind: ModelKind::Policy,
        env_id: env_id.to_string(),
        obs_dim: policy.obs_dim(),
        action_dim: policy.action_dim(),
        net: policy.mean_spec().clone(),
        param_count: policy.param_count(),
        config_digest: config_digest.to_string(),
        seed,
        normalizer: None,
    };
    write_checkpoint_raw(path, &manifest, &policy.flat_params())
}

pub fn load_policy_checkpoint(path: &Path) -> Result<(GaussianPolicy, CheckpointManifest)> {
    let (manifest, params) = read_checkpoint_raw(path)?;
    if manifest.kind != ModelKind::Policy {
        return Err(Error::format("checkpoint is not a policy"));
    }
    let split = manifest.net.param_count();
    let mean = ParamVector::from_vec(params.as_slice()[..split].to_vec());
    let log_std = params.as_slice()[split..].to_vec();
    let policy = GaussianPolicy::from_parts(manifest.net.clone(), mean, log_std)?;
    Ok((policy, manifest))
}

pub fn write_disc_checkpoint(
    path: &Path,
    disc: &Discriminator,
    env_id: &str,
    config_digest: &str,
    seed: u64,
    obs_dim: usize,
    action_dim: usize,
) -> Result<()> {
    let manifest = CheckpointManifest {
        kind: ModelKind::Discriminator,
        env_id: env_id.to_string(),
        obs_dim,
        action_dim,
        net: disc.spec().clone(),
        param_count: disc.param_count(),
        config_digest: config_digest.to_string(),
        seed,
        normalizer: Some(disc.normalizer().clone()),
    };
    write_checkpoint_raw(path, &manifest, &disc.flat_params())
}

pub fn load_disc_checkpoint(path: &Path) -> Result<(Discriminator, CheckpointManifest)> {
    let (manifest, params) = read_checkpoint_raw(path)?;
    if manifest.kind != ModelKind::Discriminator {
        return Err(Error::format("checkpoint is not a discriminator"));
    }
    let normalizer = manifest
        .normalizer
        .clone()
        .ok_or_else(|| Error::format("discriminator checkpoint lacks normalizer"))?;
    let disc = Discriminator::from_parts(manifest.net.clone(), params, normalizer)?;
    Ok((disc, manifest))
}

/// Digest of a file's raw bytes; ties trajectory files to checkpoints.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

const LOG_COLUMNS: &str =
    "iteration,mean_true_cost,mean_surrogate_cost,nu,disc_objective,kl,accepted,cvar_true,param_digest";

pub fn write_logs_csv(path: &Path, logs: &[IterationLog]) -> Result<()> {
    let mut out = String::with_capacity(logs.len() * 96 + 64);
    out.push_str(LOG_COLUMNS);
    out.push('\n');
    for l in logs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            l.iteration,
            l.mean_true_cost,
            l.mean_surrogate_cost,
            l.nu,
            l.disc_objective,
            l.kl,
            l.accepted,
            l.cvar_true,
            l.param_digest
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_logs_csv(path: &Path) -> Result<Vec<IterationLog>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == LOG_COLUMNS => {}
        _ => return Err(Error::format("unrecognized log header")),
    }
    let mut logs = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::format(format!("log line {} malformed", i + 2)));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::format(format!("bad float `{s}` on line {}", i + 2)))
        };
        logs.push(IterationLog {
            iteration: fields[0]
                .parse()
                .map_err(|_| Error::format(format!("bad iteration on line {}", i + 2)))?,
            mean_true_cost: parse(fields[1])?,
            mean_surrogate_cost: parse(fields[2])?,
            nu: parse(fields[3])?,
            disc_objective: parse(fields[4])?,
            kl: parse(fields[5])?,
            accepted: fields[6] == "true",
            cvar_true: parse(fields[7])?,
            param_digest: fields[8].to_string(),
        });
    }
    Ok(logs)
}

/// One agent's evaluation output, and the hand-writable input to `report`.
/// Either raw costs or precomputed absolutes must be present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSummary {
    pub label: Option<String>,
    pub env_id: Option<String>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub checkpoint_digest: Option<String>,
    pub costs: Option<Vec<f64>>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub var: Option<f64>,
    pub cvar: Option<f64>,
}

impl CostSummary {
    pub fn from_costs(costs: Vec<f64>, alpha: f64) -> Result<Self> {
        let stats = AgentStats::from_costs(&costs, alpha)?;
        Ok(CostSummary {
            label: None,
            env_id: None,
            alpha: Some(alpha),
            seed: None,
            checkpoint_digest: None,
            costs: Some(costs),
            mean: Some(stats.mean),
            std: Some(stats.std),
            var: Some(stats.var),
            cvar: Some(stats.cvar),
        })
    }

    /// Stats at the requested level: recomputed from raw costs when
    /// present, otherwise taken from the stored absolutes.
    pub fn stats(&self, alpha: f64) -> Result<AgentStats> {
        if let Some(costs) = &self.costs {
            return AgentStats::from_costs(costs, alpha);
        }
        match (self.var, self.cvar) {
            (Some(var), Some(cvar)) => {
                let mut s = AgentStats::from_absolutes(var, cvar);
                if let Some(m) = self.mean {
                    s.mean = m;
                }
                if let Some(sd) = self.std {
                    s.std = sd;
                }
                if let Some(n) = self.costs.as_ref().map(|c| c.len()) {
                    s.n = n;
                }
                Ok(s)
            }
            _ => Err(Error::format(
                "cost summary needs either raw costs or var/cvar absolutes",
            )),
        }
    }

    pub fn write_toml(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::format(format!("summary: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_toml(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::format(format!("bad cost summary: {e}")))
    }
}

pub fn write_report_json(path: &Path, report: &TailRiskReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::format(format!("report: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, hist: &HistogramData) -> Result<()> {
    let mut out = String::new();
    out.push_str("bin_lo,bin_hi");
    for s in &hist.series {
        out.push(',');
        out.push_str(&s.label);
    }
    out.push('\n');
    out.push_str(&format!("# tail_marker={}\n", hist.tail_marker));
    for b in 0..hist.edges.len() - 1 {
        out.push_str(&format!("{},{}", hist.edges[b], hist.edges[b + 1]));
        for s in &hist.series {
            out.push_str(&format!(",{}", s.counts[b]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Smoothed convergence curves for external plotting: per run, the raw and
/// smoothed mean true cost per iteration.
pub fn write_convergence_csv(
    path: &Path,
    labeled_logs: &[(&str, &[IterationLog])],
    window: usize,
) -> Result<()> {
    let mut out = String::from("label,iteration,mean_true_cost,smoothed\n");
    for (label, logs) in labeled_logs {
        let raw: Vec<f64> = logs.iter().map(|l| l.mean_true_cost).collect();
        let smoothed = crate::metrics::smooth_series(&raw, window)?;
        for (l, s) in logs.iter().zip(&smoothed) {
            out.push_str(&format!("{label},{},{},{s}\n", l.iteration, l.mean_true_cost));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Output root: environment override, then config, then `runs`.
pub fn out_root(io: &IoSection) -> PathBuf {
    if let Ok(v) = std::env::var("RAIL_OUT_ROOT") {
        if !v.is_empty() {
            return PathBuf::from(v);
        }
    }
    PathBuf::from(io.out_root.clone().unwrap_or_else(|| "runs".to_string()))
}

/// Creates `root/name` and its `checkpoints/` subdirectory.
pub fn prepare_run_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let dir = root.join(name);
    fs::create_dir_all(dir.join("checkpoints"))?;
    Ok(dir)
}
