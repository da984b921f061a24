//! Parameter sweeps: re-run one base scenario across an axis of values with
//! several derived seeds per point and tabulate the summary statistics.

use serde::{Deserialize, Serialize};

use crate::harness::config::{ConfigError, ScenarioConfig};
use crate::harness::metrics::RunSummary;
use crate::harness::runner::{run_scenario_with_seed, RunError};
use crate::seeds::sweep_run_seed;

/// Sweepable scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Misclassification block probability.
    P,
    /// Misclassification block count.
    NBlocks,
    /// Spurious box count.
    B,
    /// Corner perturbation magnitude.
    Q,
    /// Master seed itself.
    Seed,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p" | "misclass_p" => Ok(Self::P),
            "n_blocks" | "misclass_n_blocks" => Ok(Self::NBlocks),
            "b" | "misloc_b" => Ok(Self::B),
            "q" | "misloc_q" => Ok(Self::Q),
            "seed" => Ok(Self::Seed),
            other => Err(format!(
                "unknown sweep axis '{other}' (expected p, n_blocks, b, q, or seed)"
            )),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::P => "p",
            Self::NBlocks => "n_blocks",
            Self::B => "b",
            Self::Q => "q",
            Self::Seed => "seed",
        };
        f.write_str(name)
    }
}

/// Applies one axis value to a copy of the base configuration.
fn apply_axis(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = cfg.clone();
    match axis {
        SweepAxis::Seed => {
            cfg.seed = value as u64;
            return Ok(cfg);
        }
        SweepAxis::P | SweepAxis::NBlocks => {
            let attack = cfg
                .attacks
                .iter_mut()
                .find(|a| a.misclass.is_some())
                .ok_or_else(|| {
                    ConfigError::Invalid(
                        "sweep axis needs a misclassification attack in the base scenario".into(),
                    )
                })?;
            let mc = attack.misclass.as_mut().expect("filtered above");
            match axis {
                SweepAxis::P => mc.p = value,
                SweepAxis::NBlocks => mc.n_blocks = value as usize,
                _ => unreachable!(),
            }
        }
        SweepAxis::B | SweepAxis::Q => {
            let attack = cfg
                .attacks
                .iter_mut()
                .find(|a| a.misloc.is_some())
                .ok_or_else(|| {
                    ConfigError::Invalid(
                        "sweep axis needs a mislocalization attack in the base scenario".into(),
                    )
                })?;
            let ml = attack.misloc.as_mut().expect("filtered above");
            match axis {
                SweepAxis::B => ml.b = value as usize,
                SweepAxis::Q => ml.q = value,
                _ => unreachable!(),
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Mean/min/max of one metric across the seeds of a sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricStats {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        Self {
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Aggregated results at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub runs: usize,
    pub rms_pair_xy: Option<MetricStats>,
    pub sup_cov_norm: MetricStats,
    pub sum_cov_norm: MetricStats,
    pub missed_fraction: MetricStats,
    pub mean_latency: MetricStats,
    pub summaries: Vec<RunSummary>,
}

/// Whole sweep result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: String,
    pub axis: SweepAxis,
    pub seeds_per_point: usize,
    pub points: Vec<SweepPoint>,
}

/// Runs `seeds_per_point` derived-seed repetitions of the base scenario at
/// every axis value.
pub fn sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds_per_point: usize,
) -> Result<SweepReport, RunError> {
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let cfg = apply_axis(base, axis, value)?;
        let mut summaries = Vec::with_capacity(seeds_per_point);
        for run in 0..seeds_per_point.max(1) {
            let seed = if axis == SweepAxis::Seed {
                cfg.seed
            } else {
                sweep_run_seed(cfg.seed, run as u64)
            };
            summaries.push(run_scenario_with_seed(&cfg, seed)?.summary);
        }
        let collect = |f: &dyn Fn(&RunSummary) -> f64| -> Vec<f64> {
            summaries.iter().map(f).collect()
        };
        let rms_values: Vec<f64> = summaries
            .iter()
            .filter_map(|s| s.rms_pair_xy)
            .collect();
        points.push(SweepPoint {
            value,
            runs: summaries.len(),
            rms_pair_xy: if rms_values.is_empty() {
                None
            } else {
                Some(MetricStats::from_values(&rms_values))
            },
            sup_cov_norm: MetricStats::from_values(&collect(&|s| s.sup_cov_norm)),
            sum_cov_norm: MetricStats::from_values(&collect(&|s| s.sum_cov_norm)),
            missed_fraction: MetricStats::from_values(&collect(&|s| s.missed_fraction)),
            mean_latency: MetricStats::from_values(&collect(&|s| s.mean_latency)),
            summaries,
        });
    }
    Ok(SweepReport {
        scenario: base.name.clone(),
        axis,
        seeds_per_point,
        points,
    })
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    /// Fixed-width text table in the shape of the experiment tables.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "sweep of '{}' over {} ({} seed(s) per point)\n",
            self.scenario, self.axis, self.seeds_per_point
        ));
        out.push_str(&format!(
            "{:>10}  {:>10}  {:>12}  {:>12}  {:>10}  {:>10}\n",
            self.axis.to_string(),
            "rms_xy",
            "sup||P||",
            "sum||P||",
            "missed",
            "latency"
        ));
        for p in &self.points {
            out.push_str(&format!(
                "{:>10.4}  {:>10}  {:>12.4}  {:>12.2}  {:>10.4}  {:>10.4}\n",
                p.value,
                p.rms_pair_xy
                    .map(|m| format!("{:.4}", m.mean))
                    .unwrap_or_else(|| "n/a".into()),
                p.sup_cov_norm.mean,
                p.sum_cov_norm.mean,
                p.missed_fraction.mean,
                p.mean_latency.mean,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_round_trips() {
        for (s, axis) in [
            ("p", SweepAxis::P),
            ("n_blocks", SweepAxis::NBlocks),
            ("b", SweepAxis::B),
            ("q", SweepAxis::Q),
            ("seed", SweepAxis::Seed),
        ] {
            assert_eq!(s.parse::<SweepAxis>().unwrap(), axis);
            assert_eq!(axis.to_string(), s);
        }
        assert!("frobnicate".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn empty_value_list_gives_empty_table() {
        let cfg =
            ScenarioConfig::from_toml_str(crate::harness::config::tests::MINIMAL).unwrap();
        let report = sweep(&cfg, SweepAxis::Seed, &[], 1).unwrap();
        assert!(report.points.is_empty());
        assert!(report.to_table().contains("sweep of"));
    }

    #[test]
    fn attack_axis_without_attack_is_a_config_error() {
        let cfg =
            ScenarioConfig::from_toml_str(crate::harness::config::tests::MINIMAL).unwrap();
        let err = sweep(&cfg, SweepAxis::P, &[0.2], 1);
        assert!(matches!(err, Err(RunError::Config(_))));
    }
}
