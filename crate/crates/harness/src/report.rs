//! Run reports: a JSON document plus an aligned text table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simcmc::oracle::KernelVerification;

use crate::error::Result;
use crate::stats::SignTest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// `kalman` or `smc-reference`.
    pub source: String,
    pub log_likelihood: f64,
}

/// One (arm, sample size) entry of an experiment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub arm: String,
    pub samples: usize,
    pub rmse: f64,
    pub mean_estimate: f64,
    pub estimates: Vec<f64>,
    /// Per-level acceptance rates averaged over replications (SIMCMC arms).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignMassReport {
    pub arm: String,
    pub samples: usize,
    /// Posterior mass on positive states at each time, from the reference.
    pub reference_positive: Vec<f64>,
    /// The same, from the arm, averaged over replications.
    pub arm_positive: Vec<f64>,
    /// One-based times where the reference is bimodal in sign.
    pub bimodal_times: Vec<usize>,
    /// Smallest mass the arm keeps on either sign over those times.
    pub worst_minority_mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingArmSummary {
    pub arm: String,
    pub average_rmse: f64,
    /// Per-realization RMSE against the reference filtering means.
    pub rmse: Vec<f64>,
    pub average_truth_rmse: f64,
    /// Per-realization RMSE against the simulated states.
    pub truth_rmse: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingComparison {
    pub against: String,
    pub test: SignTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub arms: Vec<TrackingArmSummary>,
    pub comparisons: Vec<TrackingComparison>,
    /// Mean number of SIMCMC samples per arrival level.
    pub mean_samples_per_level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    #[serde(default)]
    pub skipped: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_arm_seconds: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<Cell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_mass: Option<SignMassReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelVerification>,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn new(name: &str, command: &str, config_hash: String) -> Self {
        RunReport {
            name: name.to_string(),
            command: command.to_string(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            truth: None,
            cells: Vec::new(),
            sign_mass: None,
            tracking: None,
            kernel: None,
            checks: Vec::new(),
            timing: None,
        }
    }

    pub fn cell(&self, arm: &str, samples: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.arm == arm && c.samples == samples)
    }

    /// True when no check failed (skipped checks do not count).
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.skipped)
    }

    pub fn without_timing(&self) -> Self {
        RunReport {
            timing: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} ({})", self.name, self.command).unwrap();
        if let Some(t) = &self.truth {
            writeln!(out, "truth: {} log-likelihood {:.4}", t.source, t.log_likelihood).unwrap();
        }
        if !self.cells.is_empty() {
            let mut sizes: Vec<usize> = self.cells.iter().map(|c| c.samples).collect();
            sizes.sort_unstable();
            sizes.dedup();
            let mut arms: Vec<&str> = Vec::new();
            for c in &self.cells {
                if !arms.contains(&c.arm.as_str()) {
                    arms.push(&c.arm);
                }
            }
            let width = arms.iter().map(|a| a.len()).max().unwrap_or(0).max(4);
            write!(out, "{:<width$}", "RMSE").unwrap();
            for n in &sizes {
                write!(out, "  {:>10}", format!("N={n}")).unwrap();
            }
            out.push('\n');
            for arm in arms {
                write!(out, "{arm:<width$}").unwrap();
                for n in &sizes {
                    match self.cell(arm, *n) {
                        Some(c) => write!(out, "  {:>10.4}", c.rmse).unwrap(),
                        None => write!(out, "  {:>10}", "-").unwrap(),
                    }
                }
                out.push('\n');
            }
        }
        if let Some(s) = &self.sign_mass {
            writeln!(
                out,
                "sign mass ({} at N={}): {} bimodal times, worst minority mass {}",
                s.arm,
                s.samples,
                s.bimodal_times.len(),
                s.worst_minority_mass.map_or("-".to_string(), |m| format!("{m:.3}"))
            )
            .unwrap();
        }
        if let Some(t) = &self.tracking {
            let width = t.arms.iter().map(|a| a.arm.len()).max().unwrap_or(0).max(9);
            writeln!(
                out,
                "{:<width$}  {:>12}  {:>12}",
                "algorithm", "average RMSE", "vs states"
            )
            .unwrap();
            for a in &t.arms {
                writeln!(
                    out,
                    "{:<width$}  {:>12.4}  {:>12.4}",
                    a.arm, a.average_rmse, a.average_truth_rmse
                )
                .unwrap();
            }
            for c in &t.comparisons {
                writeln!(
                    out,
                    "simcmc-adaptive vs {}: {} wins, {} losses, {} ties, p = {}",
                    c.against,
                    c.test.wins,
                    c.test.losses,
                    c.test.ties,
                    c.test.p_value.map_or("-".to_string(), |p| format!("{p:.4}"))
                )
                .unwrap();
            }
        }
        if let Some(k) = &self.kernel {
            let rows = [
                ("instances", k.instances as f64),
                ("kernels checked", k.kernels_checked as f64),
                ("max row-sum error", k.max_row_sum_error),
                ("max stationarity residual", k.max_stationarity_residual),
                ("max fixed-point residual", k.max_fixed_point_residual),
                ("max identity residual", k.max_identity_residual),
                ("max fitted rho", k.max_rho_fit),
                ("max envelope rho", k.max_rho_envelope),
                ("max excess over rate bound", k.max_bound_excess),
            ];
            for (name, v) in rows {
                writeln!(out, "{name:<28}{v:>12.3e}").unwrap();
            }
        }
        for c in &self.checks {
            let tag = if c.skipped {
                "SKIP"
            } else if c.passed {
                "PASS"
            } else {
                "FAIL"
            };
            writeln!(out, "[{tag}] {}: {}", c.name, c.detail).unwrap();
        }
        out
    }

    /// Writes `<name>.json` and `<name>.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.name));
        let txt = dir.join(format!("{}.txt", self.name));
        fs::write(&json, self.to_json())?;
        fs::write(&txt, self.table())?;
        Ok((json, txt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lines_up() {
        let mut r = RunReport::new("demo", "run-experiment", "ab".into());
        for (arm, n, rmse) in [
            ("smc/prior", 10, 1.5),
            ("simcmc/prior", 10, 2.0),
            ("simcmc/prior", 20, 1.0),
        ] {
            r.cells.push(Cell {
                arm: arm.into(),
                samples: n,
                rmse,
                mean_estimate: 0.0,
                estimates: vec![],
                acceptance: None,
            });
        }
        let t = r.table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[1].len(), lines[2].len());
        assert_eq!(lines[2].len(), lines[3].len());
        assert!(lines[2].trim_end().ends_with('-'));
        assert!(r.all_passed());
        r.checks.push(CheckOutcome {
            name: "x".into(),
            passed: false,
            skipped: false,
            detail: String::new(),
        });
        assert!(!r.all_passed());
        assert!(r.table().contains("[FAIL] x"));
    }

    #[test]
    fn json_round_trips() {
        let mut r = RunReport::new("demo", "tracking", "cd".into());
        r.timing = Some(Timing {
            total_seconds: 1.0,
            per_arm_seconds: vec![("a".into(), 0.5)],
        });
        let back: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.without_timing().timing, None);
    }
}
