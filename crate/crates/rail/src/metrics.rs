//! Tail-risk evaluation arithmetic: expert-relative percentages, gain in
//! reliability, convergence-curve smoothing, and histogram emission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{empirical_cvar, empirical_var};

/// Percentage improvement of an agent over the expert on a tail-risk
/// absolute: `100 * (expert - agent) / |expert|`. Positive means the agent
/// carries less tail risk than the expert.
pub fn relative_risk(expert_value: f64, agent_value: f64) -> Result<f64> {
    if expert_value == 0.0 {
        return Err(Error::config("relative risk undefined for a zero expert value"));
    }
    Ok(100.0 * (expert_value - agent_value) / expert_value.abs())
}

/// Gain in reliability: the risk-averse agent's expert-relative percentage
/// minus the risk-neutral agent's.
pub fn gain_reliability(rail_relative: f64, gail_relative: f64) -> f64 {
    rail_relative - gail_relative
}

/// Centered moving average with truncated windows at the edges. Output
/// length equals input length; `window` must be odd.
pub fn smooth_series(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 || window == 0 {
        return Err(Error::config(format!("smoothing window must be odd, got {window}")));
    }
    let half = window / 2;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let sum: f64 = values[lo..hi].iter().sum();
        out.push(sum / (hi - lo) as f64);
    }
    Ok(out)
}

/// Summary statistics of one agent's true-trajectory-cost sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub var: f64,
    pub cvar: f64,
}

impl AgentStats {
    pub fn from_costs(costs: &[f64], alpha: f64) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::EmptySample("agent stats need costs".into()));
        }
        let n = costs.len();
        let mean = costs.iter().sum::<f64>() / n as f64;
        let var_stat = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n as f64;
        Ok(AgentStats {
            n,
            mean,
            std: var_stat.sqrt(),
            var: empirical_var(costs, alpha)?,
            cvar: empirical_cvar(costs, alpha)?,
        })
    }

    pub fn from_absolutes(var: f64, cvar: f64) -> Self {
        AgentStats { n: 0, mean: f64::NAN, std: f64::NAN, var, cvar }
    }
}

/// The full comparison of expert, risk-neutral, and risk-averse agents.
/// Relative percentages and gains are recomputable from the absolutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRiskReport {
    pub alpha: f64,
    pub expert: AgentStats,
    pub gail: AgentStats,
    pub rail: AgentStats,
    pub gail_relative_var: f64,
    pub rail_relative_var: f64,
    pub gail_relative_cvar: f64,
    pub rail_relative_cvar: f64,
    pub gr_var: f64,
    pub gr_cvar: f64,
}

impl TailRiskReport {
    pub fn from_stats(
        alpha: f64,
        expert: AgentStats,
        gail: AgentStats,
        rail: AgentStats,
    ) -> Result<Self> {
        let gail_relative_var = relative_risk(expert.var, gail.var)?;
        let rail_relative_var = relative_risk(expert.var, rail.var)?;
        let gail_relative_cvar = relative_risk(expert.cvar, gail.cvar)?;
        let rail_relative_cvar = relative_risk(expert.cvar, rail.cvar)?;
        Ok(TailRiskReport {
            alpha,
            expert,
            gail,
            rail,
            gail_relative_var,
            rail_relative_var,
            gail_relative_cvar,
            rail_relative_cvar,
            gr_var: gain_reliability(rail_relative_var, gail_relative_var),
            gr_cvar: gain_reliability(rail_relative_cvar, gail_relative_cvar),
        })
    }
}

/// Histogram of pooled cost samples: 40 equal-width bins over the pooled
/// range, one count series per agent, and a marker at pooled mean + 2*std
/// (the start of the far tail region).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    pub edges: Vec<f64>,
    pub series: Vec<HistogramSeries>,
    pub tail_marker: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSeries {
    pub label: String,
    pub counts: Vec<u64>,
}

pub const HISTOGRAM_BINS: usize = 40;

pub fn histogram(samples: &[(&str, &[f64])]) -> Result<HistogramData> {
    let pooled: Vec<f64> = samples.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    if pooled.is_empty() {
        return Err(Error::EmptySample("histogram needs samples".into()));
    }
    let min = pooled.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = pooled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if max > min { (max - min) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| min + width * i as f64).collect();
    let series = samples
        .iter()
        .map(|(label, s)| {
            let mut counts = vec![0u64; HISTOGRAM_BINS];
            for &x in *s {
                let mut bin = ((x - min) / width) as usize;
                if bin >= HISTOGRAM_BINS {
                    bin = HISTOGRAM_BINS - 1;
                }
                counts[bin] += 1;
            }
            HistogramSeries { label: (*label).to_string(), counts }
        })
        .collect();
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let sd =
        (pooled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / pooled.len() as f64).sqrt();
    Ok(HistogramData { edges, series, tail_marker: mean + 2.0 * sd })
}

/// Published tail-risk absolutes for five benchmark continuous-control
/// tasks, with the printed relative/gain values derived from them. Used by
/// the `report --paper-table3` fixture and the reproduction tests.
pub mod reference {
    /// `[expert, gail, rail]` absolutes and the printed derived values.
    pub struct ReferenceRow {
        pub task: &'static str,
        pub var: [f64; 3],
        pub cvar: [f64; 3],
        /// Printed: gail relative VaR, rail relative VaR, GR-VaR.
        pub printed_var: [f64; 3],
        /// Printed: gail relative CVaR, rail relative CVaR, GR-CVaR.
        pub printed_cvar: [f64; 3],
    }

    pub const ROWS: [ReferenceRow; 5] = [
        ReferenceRow {
            task: "Reacher-v1",
            var: [5.88, 9.55, 7.28],
            cvar: [6.34, 13.25, 9.41],
            printed_var: [-62.41, -23.81, 38.61],
            printed_cvar: [-108.99, -48.42, 60.57],
        },
        ReferenceRow {
            task: "Hopper-v1",
            var: [-3754.71, -1758.19, -3745.90],
            cvar: [-2674.65, -1347.60, -3727.94],
            printed_var: [-53.17, -0.23, 52.94],
            printed_cvar: [-49.62, 39.38, 89.00],
        },
        ReferenceRow {
            task: "HalfCheetah-v1",
            var: [-3431.59, -2688.34, -3150.31],
            cvar: [-3356.67, -2220.64, -2945.76],
            printed_var: [-21.66, -8.20, 13.46],
            printed_cvar: [-33.84, -12.24, 21.60],
        },
        ReferenceRow {
            task: "Walker-v1",
            var: [-5402.52, -5314.05, -5404.00],
            cvar: [-2310.54, -3359.29, -3939.99],
            printed_var: [-1.64, 0.03, 1.66],
            printed_cvar: [45.39, 70.52, 25.13],
        },
        ReferenceRow {
            task: "Humanoid-v1",
            var: [-9839.79, -2641.14, -9252.29],
            cvar: [-4591.43, -1298.80, -4640.42],
            printed_var: [-73.16, -5.97, 67.19],
            printed_cvar: [-71.71, 1.07, 72.78],
        },
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_risk_examples() {
        let r = relative_risk(5.88, 9.55).unwrap();
        assert!((r - -62.41).abs() < 0.01);
        let r = relative_risk(-3754.71, -3745.90).unwrap();
        assert!((r - -0.23).abs() < 0.01);
        assert_eq!(relative_risk(7.0, 7.0).unwrap(), 0.0);
        assert!(relative_risk(0.0, 1.0).is_err());
    }

    #[test]
    fn relative_risk_rewards_improvement() {
        // Lower agent cost than the expert gives a positive percentage,
        // for either sign of the expert value.
        assert!(relative_risk(10.0, 5.0).unwrap() > 0.0);
        assert!(relative_risk(-10.0, -15.0).unwrap() > 0.0);
        assert!(relative_risk(10.0, 15.0).unwrap() < 0.0);
    }

    #[test]
    fn gain_reliability_examples() {
        let g = gain_reliability(-23.81, -62.41);
        assert!((g - 38.60).abs() < 1e-9);
        let g = gain_reliability(-5.97, -73.16);
        assert!((g - 67.19).abs() < 1e-9);
        assert_eq!(gain_reliability(4.5, 4.5), 0.0);
    }

    #[test]
    fn reference_rows_reproduce_printed_values() {
        for row in &reference::ROWS {
            for (absolutes, printed) in
                [(&row.var, &row.printed_var), (&row.cvar, &row.printed_cvar)]
            {
                let gail = relative_risk(absolutes[0], absolutes[1]).unwrap();
                let rail = relative_risk(absolutes[0], absolutes[2]).unwrap();
                let gr = gain_reliability(rail, gail);
                assert!((gail - printed[0]).abs() <= 0.02, "{}: gail {gail} vs {}", row.task, printed[0]);
                assert!((rail - printed[1]).abs() <= 0.02, "{}: rail {rail} vs {}", row.task, printed[1]);
                assert!((gr - printed[2]).abs() <= 0.02, "{}: gr {gr} vs {}", row.task, printed[2]);
            }
        }
    }

    #[test]
    fn smoothing_examples() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(smooth_series(&xs, 1).unwrap(), xs.to_vec());
        let smoothed = smooth_series(&xs, 3).unwrap();
        assert_eq!(smoothed, vec![0.5, 1.0, 2.0, 3.0, 3.5]);
        let constant = vec![2.5; 30];
        assert_eq!(smooth_series(&constant, 21).unwrap(), constant);
        assert!(smooth_series(&xs, 2).is_err());
    }

    #[test]
    fn smoothing_stays_in_envelope() {
        let xs: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).sin() * 5.0).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for w in [1, 3, 21] {
            let s = smooth_series(&xs, w).unwrap();
            assert_eq!(s.len(), xs.len());
            assert!(s.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn report_recomputable_from_absolutes() {
        let expert = AgentStats::from_absolutes(5.88, 6.34);
        let gail = AgentStats::from_absolutes(9.55, 13.25);
        let rail = AgentStats::from_absolutes(7.28, 9.41);
        let report = TailRiskReport::from_stats(0.9, expert, gail, rail).unwrap();
        assert!((report.gr_var - 38.61).abs() <= 0.02);
        assert!((report.gr_cvar - 60.57).abs() <= 0.02);
        assert!(
            (report.gr_var - gain_reliability(report.rail_relative_var, report.gail_relative_var))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn histogram_bins_and_marker() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| 2.0 * i as f64).collect();
        let h = histogram(&[("a", &a), ("b", &b)]).unwrap();
        assert_eq!(h.edges.len(), HISTOGRAM_BINS + 1);
        assert_eq!(h.series.len(), 2);
        assert_eq!(h.series[0].counts.iter().sum::<u64>(), 100);
        assert_eq!(h.series[1].counts.iter().sum::<u64>(), 50);
        assert!(h.tail_marker > 0.0);
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(*h.edges.last().unwrap(), 99.0);
    }

    #[test]
    fn agent_stats_from_costs() {
        let costs: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let s = AgentStats::from_costs(&costs, 0.9).unwrap();
        assert_eq!(s.n, 10);
        assert!((s.mean - 5.5).abs() < 1e-12);
        assert_eq!(s.var, 9.0);
        assert_eq!(s.cvar, 10.0);
        assert!(AgentStats::from_costs(&[], 0.9).is_err());
    }
}
