//! Report types written as `report.json`, and merging of several reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::cover::{CoverParams, FormulaVariant};
use crate::error::{Error, Result};
use crate::metrics::TransportMethod;
use crate::persistence::{CouplingReport, VR_CONVENTION};
use crate::spectral::HEAT_CONVENTION;

pub const REPORT_SCHEMA: &str = "wordcover.report/1";
pub const MERGE_SCHEMA: &str = "wordcover.merge/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// A measured value with the threshold it is judged against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Measured {
    pub fn at_most(value: f64, threshold: f64) -> Self {
        Measured {
            value,
            threshold,
            comparison: Comparison::AtMost,
            pass: value <= threshold,
        }
    }

    pub fn at_least(value: f64, threshold: f64) -> Self {
        Measured {
            value,
            threshold,
            comparison: Comparison::AtLeast,
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub heat: String,
    pub vietoris_rips: String,
    pub coefficients: String,
    /// The uniform measure is replaced by an iid sample of this many points.
    pub uniform_reference: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            heat: HEAT_CONVENTION.into(),
            vietoris_rips: VR_CONVENTION.into(),
            coefficients: "Z/2".into(),
            uniform_reference: "iid uniform sample".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudSummary {
    pub points: usize,
    pub capped: bool,
    pub words_visited: u64,
    pub dedup_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverOutcome {
    pub covering_radius: Measured,
    pub r_target: f64,
    pub reference_size: usize,
    /// Covering radius of half the reference by the other half.
    pub reference_self_coverage: f64,
    pub separation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Outcome {
    /// Against `2 sqrt(d eps) + 2 / sqrt(m)`.
    pub w1: Measured,
    /// Against the tighter `2 sqrt(d) eps + 2 / sqrt(m)`.
    pub w1_tight: Measured,
    pub method: TransportMethod,
    pub gap_bound: f64,
    pub lower_bound: f64,
    pub reference_size: usize,
    pub sampling_slack: f64,
    pub lipschitz_gaps: Vec<(usize, f64)>,
    /// Largest gap against the W1 upper estimate.
    pub duality: Measured,
    /// Set when Sinkhorn stopped before reaching its tolerance.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignOutcome {
    pub worst: Measured,
    /// The same value against `3 upsilon`.
    pub worst_relaxed: Measured,
    pub lambda_r: f64,
    pub per_block: Vec<(f64, f64)>,
    pub total_dim: usize,
    pub convention: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSeed {
    pub seed: u64,
    pub min_eig: f64,
    pub max_eig: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOutcome {
    pub k: usize,
    pub lambda_max: f64,
    pub total_dim: usize,
    pub seeds: Vec<GapSeed>,
    /// Fraction of passing seeds against `1 - 2 delta`.
    pub pass_fraction: Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistOutcome {
    /// Frequency of `d_B >= n eps_q` against `n eps_q`.
    pub violation_frequency: Measured,
    pub w1_estimate: f64,
    pub coupling: CouplingReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<W1Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persist: Option<PersistOutcome>,
}

impl CheckResults {
    /// `(name, pass)` for every check that produced a result.
    pub fn verdicts(&self) -> Vec<(&'static str, bool)> {
        let mut out = Vec::new();
        if let Some(c) = &self.cover {
            out.push(("cover", c.covering_radius.pass));
        }
        if let Some(c) = &self.w1 {
            out.push(("w1", c.w1.pass && c.duality.pass));
        }
        if let Some(c) = &self.design {
            out.push(("design", c.worst.pass));
        }
        if let Some(c) = &self.gap {
            out.push(("gap", c.pass_fraction.pass));
        }
        if let Some(c) = &self.persist {
            out.push(("persist", c.violation_frequency.pass));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Partial,
    BudgetExceeded,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail | Status::Partial => 2,
            Status::BudgetExceeded => 3,
        }
    }

    pub fn worst(self, other: Status) -> Status {
        fn rank(s: Status) -> u8 {
            match s {
                Status::Pass => 0,
                Status::Fail => 1,
                Status::Partial => 2,
                Status::BudgetExceeded => 3,
            }
        }
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
    pub budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
    pub conventions: Conventions,
    pub variant: FormulaVariant,
    pub config: RunConfig,
    pub params: CoverParams,
    pub cloud: CloudSummary,
    pub checks: CheckResults,
    pub errors: Vec<StageError>,
    pub status: Status,
    pub exit_code: i32,
}

impl Report {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path)?;
        let report: Report = serde_json::from_str(&text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::Format(format!(
                "{}: unsupported schema `{}`",
                path.display(),
                report.schema
            )));
        }
        Ok(report)
    }
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedEntry {
    pub path: PathBuf,
    pub space: String,
    pub seed: u64,
    pub epsilon: f64,
    pub k: usize,
    pub ell: usize,
    pub status: Status,
    pub verdicts: Vec<(String, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub check: String,
    pub runs: usize,
    pub passed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub schema: String,
    pub reports: usize,
    pub tallies: Vec<CheckTally>,
    pub entries: Vec<MergedEntry>,
    pub status: Status,
    pub exit_code: i32,
}

impl MergedReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,space,seed,epsilon,k,ell,status");
        for t in &self.tallies {
            let _ = write!(out, ",{}", t.check);
        }
        out.push('\n');
        for e in &self.entries {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                e.path.display(),
                e.space,
                e.seed,
                e.epsilon,
                e.k,
                e.ell,
                serde_json::to_value(e.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            );
            for t in &self.tallies {
                let cell = e
                    .verdicts
                    .iter()
                    .find(|(name, _)| *name == t.check)
                    .map_or("", |(_, p)| if *p { "pass" } else { "fail" });
                let _ = write!(out, ",{cell}");
            }
            out.push('\n');
        }
        out
    }
}

/// Combines reports, tallying passes per check in first-seen order.
pub fn merge_reports(paths: &[PathBuf]) -> Result<MergedReport> {
    let mut entries = Vec::with_capacity(paths.len());
    let mut tallies: Vec<CheckTally> = Vec::new();
    let mut status = Status::Pass;
    for path in paths {
        let report = Report::read(path)?;
        status = status.worst(report.status);
        let verdicts: Vec<(String, bool)> = report
            .checks
            .verdicts()
            .into_iter()
            .map(|(n, p)| (n.to_string(), p))
            .collect();
        for (name, pass) in &verdicts {
            let tally = match tallies.iter_mut().position(|t| &t.check == name) {
                Some(i) => &mut tallies[i],
                None => {
                    tallies.push(CheckTally {
                        check: name.clone(),
                        runs: 0,
                        passed: 0,
                    });
                    tallies.last_mut().unwrap()
                }
            };
            tally.runs += 1;
            tally.passed += usize::from(*pass);
        }
        entries.push(MergedEntry {
            path: path.clone(),
            space: report.config.space.to_string(),
            seed: report.config.seed,
            epsilon: report.config.epsilon,
            k: report.params.k,
            ell: report.params.ell,
            status: report.status,
            verdicts,
        });
    }
    Ok(MergedReport {
        schema: MERGE_SCHEMA.into(),
        reports: entries.len(),
        tallies,
        entries,
        status,
        exit_code: status.exit_code(),
    })
}
