//! Generate-then-verify orchestration: configuration, checks against their
//! thresholds, JSON reports and CSV series for sweeps.

pub mod config;
pub mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::cover::{enumerate_cloud, generate_alphabet, Alphabet, CoverParams, EnumerateOptions};
use crate::error::{Error, Result};
use crate::metrics::{
    covering_radius, lipschitz_gap, reference_self_coverage, separation, wasserstein1_exact,
    wasserstein1_sinkhorn, SinkhornOptions, EXACT_SIZE_LIMIT,
};
use crate::persistence::coupled_diagram_experiment;
use crate::rng::{stream, ANCHOR_STREAM, REFERENCE_STREAM};
use crate::spaces::{Point, SpaceSpec};
use crate::spectral::{build_basis, design_discrepancy, spectral_gap_check, HEAT_CONVENTION};

pub use config::{
    emit_config, parse_config, Budgets, Checks, ConfigError, CoverCheck, DesignCheck, FieldError,
    GapCheck, Overrides, PersistCheck, RunConfig, Sweep, W1Check, W1Method,
};
pub use report::{
    merge_reports, CheckResults, CloudSummary, Conventions, CoverOutcome, DesignOutcome, GapOutcome,
    GapSeed, Measured, MergedReport, PersistOutcome, Report, StageError, Status, W1Outcome,
    REPORT_SCHEMA,
};

/// Largest cost matrix the Sinkhorn solver is asked to hold.
pub const SINKHORN_ENTRY_BUDGET: usize = 50_000_000;
/// Distance functions used as 1-Lipschitz probes.
pub const LIPSCHITZ_ANCHORS: usize = 32;

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 1;

/// Budget-type failures map to exit code 3, everything else to 2.
pub fn is_budget_error(e: &Error) -> bool {
    matches!(
        e,
        Error::BudgetExceeded { .. }
            | Error::DimensionBudgetExceeded { .. }
            | Error::SizeLimitExceeded { .. }
            | Error::OverflowGuard { .. }
    )
}

pub fn error_exit_code(e: &Error) -> i32 {
    if is_budget_error(e) {
        3
    } else {
        2
    }
}

/// Calculator parameters with the explicit `k` and `ell` overrides applied.
pub fn resolve_params(config: &RunConfig) -> Result<CoverParams> {
    let spec = config.space_spec()?;
    let mut params = CoverParams::compute(&spec, config.epsilon, config.delta, config.domain, config.variant)?;
    if let Some(k) = config.overrides.k {
        params.k = k;
    }
    if let Some(ell) = config.overrides.ell {
        params.ell = ell;
    }
    Ok(params)
}

pub struct CoverRun {
    pub params: CoverParams,
    pub alphabet: Alphabet,
    pub cloud: PointCloud,
}

fn enumerate_options(budgets: &Budgets) -> EnumerateOptions {
    EnumerateOptions {
        cap: Some(budgets.cap),
        dedup_tol: budgets.dedup,
    }
}

pub fn generate_cover(config: &RunConfig) -> Result<CoverRun> {
    let params = resolve_params(config)?;
    let alphabet = generate_alphabet(&params.space, params.k, config.seed);
    let cloud = enumerate_cloud(
        &alphabet,
        params.ell,
        &params.space.base_point(),
        enumerate_options(&config.budgets),
    )?;
    Ok(CoverRun {
        params,
        alphabet,
        cloud,
    })
}

/// The iid stand-in for the uniform measure, drawn from the reference stream.
pub fn uniform_reference(spec: &SpaceSpec, size: usize, seed: u64) -> PointCloud {
    PointCloud::uniform(*spec, size, seed, REFERENCE_STREAM)
}

pub fn verify_cover(cloud: &PointCloud, r_target: f64, reference_size: usize, seed: u64) -> Result<CoverOutcome> {
    let reference = uniform_reference(cloud.space(), reference_size, seed);
    let radius = covering_radius(cloud, &reference)?;
    Ok(CoverOutcome {
        covering_radius: Measured::at_most(radius, r_target),
        r_target,
        reference_size,
        reference_self_coverage: reference_self_coverage(&reference)?,
        separation: if cloud.len() >= 2 { Some(separation(cloud)?) } else { None },
    })
}

fn anchors(spec: &SpaceSpec, seed: u64) -> Vec<Point> {
    let mut rng = stream(seed, ANCHOR_STREAM);
    (0..LIPSCHITZ_ANCHORS).map(|_| spec.uniform_sample(&mut rng)).collect()
}

/// W1 of the cloud against a uniform reference, with both threshold forms
/// and the Lipschitz-gap lower bounds.
pub fn verify_w1(cloud: &PointCloud, epsilon: f64, check: &W1Check, seed: u64) -> Result<W1Outcome> {
    let spec = *cloud.space();
    let reference = uniform_reference(&spec, check.reference_size, seed);
    let (n, m) = (cloud.len(), reference.len());
    let exact = match check.method {
        W1Method::Exact => true,
        W1Method::Sinkhorn => false,
        W1Method::Auto => n <= EXACT_SIZE_LIMIT && m <= EXACT_SIZE_LIMIT,
    };
    let (result, converged) = if exact {
        (wasserstein1_exact(cloud, &reference)?, true)
    } else {
        if n.saturating_mul(m) > SINKHORN_ENTRY_BUDGET {
            return Err(Error::BudgetExceeded {
                what: "transport cost entries",
                estimate: n.saturating_mul(m),
                budget: SINKHORN_ENTRY_BUDGET,
            });
        }
        match wasserstein1_sinkhorn(cloud, &reference, &SinkhornOptions::with_reg(check.reg)) {
            Ok(r) => (r, true),
            Err(Error::NoConvergence { best, .. }) => (*best, false),
            Err(e) => return Err(e),
        }
    };
    let result = result.without_certificate();
    let d = spec.dim_m as f64;
    let slack = 2.0 / (m as f64).sqrt();
    let gaps = lipschitz_gap(cloud, &anchors(&spec, seed), &reference)?;
    let max_gap = gaps.iter().fold(0.0f64, |a, &(_, g)| a.max(g));
    Ok(W1Outcome {
        w1: Measured::at_most(result.value, 2.0 * (d * epsilon).sqrt() + slack),
        w1_tight: Measured::at_most(result.value, 2.0 * d.sqrt() * epsilon + slack),
        method: result.method,
        gap_bound: result.gap_bound,
        lower_bound: result.lower_bound(),
        reference_size: m,
        sampling_slack: slack,
        lipschitz_gaps: gaps,
        duality: Measured::at_most(max_gap, result.value + 1e-9),
        converged,
    })
}

pub fn verify_design(cloud: &PointCloud, lambda_r: f64, upsilon: f64) -> Result<DesignOutcome> {
    let basis = build_basis(cloud.space(), lambda_r)?;
    let disc = design_discrepancy(cloud, &basis, lambda_r)?;
    Ok(DesignOutcome {
        worst: Measured::at_most(disc.worst, upsilon),
        worst_relaxed: Measured::at_most(disc.worst, 3.0 * upsilon),
        lambda_r,
        per_block: disc.per_block,
        total_dim: basis.total_dim(),
        convention: HEAT_CONVENTION.into(),
    })
}

/// Gap check for the alphabets of seeds `seed, seed + 1, ...`; passes when
/// the fraction of passing alphabets is at least `1 - 2 delta`.
pub fn verify_gap(spec: &SpaceSpec, k: usize, lambda_max: f64, seed: u64, seeds: usize, delta: f64) -> Result<GapOutcome> {
    let basis = build_basis(spec, lambda_max)?;
    let per_seed: Vec<Result<GapSeed>> = (0..seeds as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let r = spectral_gap_check(&generate_alphabet(spec, k, s), &basis)?;
            Ok(GapSeed {
                seed: s,
                min_eig: r.min_eig,
                max_eig: r.max_eig,
                pass: r.pass,
            })
        })
        .collect();
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>>>()?;
    let passed = per_seed.iter().filter(|s| s.pass).count();
    Ok(GapOutcome {
        k,
        lambda_max,
        total_dim: basis.total_dim(),
        pass_fraction: Measured::at_least(passed as f64 / seeds as f64, 1.0 - 2.0 * delta),
        seeds: per_seed,
    })
}

pub fn verify_persist(cloud: &PointCloud, check: &PersistCheck, seed: u64, w1_estimate: f64) -> Result<PersistOutcome> {
    let coupling = coupled_diagram_experiment(cloud, check.n, check.q, check.trials, seed, w1_estimate)?;
    Ok(PersistOutcome {
        violation_frequency: Measured::at_most(coupling.violation_frequency, coupling.bound),
        w1_estimate,
        coupling,
    })
}

/// Files written by one pipeline run.
#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: Option<Report>,
    pub sweep: Option<SweepSummary>,
    pub replicas: Vec<ReportBundle>,
    pub exit_code: i32,
}

fn stage_error(stage: &str, e: &Error) -> StageError {
    StageError {
        stage: stage.into(),
        message: e.to_string(),
        budget: is_budget_error(e),
    }
}

fn status_of(checks: &CheckResults, errors: &[StageError]) -> Status {
    if errors.iter().any(|e| e.budget) {
        Status::BudgetExceeded
    } else if !errors.is_empty() {
        Status::Partial
    } else if checks.verdicts().iter().all(|(_, p)| *p) {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn run_checks(config: &RunConfig, run: &CoverRun) -> (CheckResults, Vec<StageError>) {
    let mut results = CheckResults::default();
    let mut errors = Vec::new();
    let checks = &config.checks;
    let cloud = &run.cloud;
    if checks.cover.is_some() {
        match verify_cover(cloud, run.params.r_target, config.budgets.reference_size, config.seed) {
            Ok(o) => results.cover = Some(o),
            Err(e) => errors.push(stage_error("cover", &e)),
        }
    }
    if let Some(w1) = &checks.w1 {
        match verify_w1(cloud, config.epsilon, w1, config.seed) {
            Ok(o) => results.w1 = Some(o),
            Err(e) => errors.push(stage_error("w1", &e)),
        }
    }
    if let Some(design) = &checks.design {
        match verify_design(cloud, design.lambda_r, design.upsilon) {
            Ok(o) => results.design = Some(o),
            Err(e) => errors.push(stage_error("design", &e)),
        }
    }
    if let Some(gap) = &checks.gap {
        match verify_gap(&run.params.space, run.params.k, gap.lambda_max, config.seed, gap.seeds, config.delta) {
            Ok(o) => results.gap = Some(o),
            Err(e) => errors.push(stage_error("gap", &e)),
        }
    }
    if let Some(persist) = &checks.persist {
        // reuse the W1 check when it ran, otherwise estimate with its defaults
        let estimate = match &results.w1 {
            Some(w) => Ok(w.w1.value),
            None => verify_w1(cloud, config.epsilon, &W1Check::default(), config.seed).map(|w| w.w1.value),
        };
        match estimate.and_then(|w| verify_persist(cloud, persist, config.seed, w)) {
            Ok(o) => results.persist = Some(o),
            Err(e) => errors.push(stage_error("persist", &e)),
        }
    }
    (results, errors)
}

/// Runs the configured pipeline and writes its outputs under `output_dir`.
///
/// With `sweep.seeds` set, every seed runs as an isolated replica in
/// `output_dir/seed-<seed>`, in parallel.
pub fn run_pipeline(config: &RunConfig) -> Result<ReportBundle> {
    match &config.sweep {
        Some(sweep) if !sweep.seeds.is_empty() => run_seed_sweep(config, &sweep.seeds),
        _ => run_single(config),
    }
}

fn run_single(config: &RunConfig) -> Result<ReportBundle> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let run = generate_cover(config)?;
    let mut files = Vec::new();
    let csv = dir.join("cloud.csv");
    run.cloud.write_csv(&csv)?;
    let header = dir.join("cloud.json");
    run.cloud.write_header(&header)?;
    files.extend([csv, header]);

    let mut exit_code = 0;
    let mut report = None;
    if config.checks.any() {
        let (checks, errors) = run_checks(config, &run);
        let status = status_of(&checks, &errors);
        let provenance = &run.cloud.provenance;
        let r = Report {
            schema: REPORT_SCHEMA.into(),
            timestamp: report::unix_timestamp(),
            conventions: Conventions::default(),
            variant: config.variant,
            config: RunConfig {
                // outputs are addressed relative to the report
                output_dir: PathBuf::from("."),
                ..config.clone()
            },
            params: run.params,
            cloud: CloudSummary {
                points: run.cloud.len(),
                capped: provenance.capped,
                words_visited: provenance.words_visited,
                dedup_tolerance: provenance.dedup_tolerance,
            },
            checks,
            errors,
            status,
            exit_code: status.exit_code(),
        };
        let path = dir.join("report.json");
        r.write(&path)?;
        files.push(path);
        exit_code = r.exit_code;
        report = Some(r);
    }

    let mut sweep = None;
    if let Some(s) = config.sweep.as_ref().filter(|s| !s.ells.is_empty()) {
        let summary = ell_sweep(config, &run, &s.ells);
        files.extend(summary.write(&dir)?);
        exit_code = exit_code.max(summary.status.exit_code());
        sweep = Some(summary);
    }

    Ok(ReportBundle {
        dir,
        files,
        report,
        sweep,
        replicas: Vec::new(),
        exit_code,
    })
}

fn run_seed_sweep(config: &RunConfig, seeds: &[u64]) -> Result<ReportBundle> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let replicas: Vec<Result<ReportBundle>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut replica = config.clone();
            replica.seed = seed;
            replica.output_dir = dir.join(format!("seed-{seed}"));
            if let Some(s) = replica.sweep.as_mut() {
                s.seeds.clear();
            }
            run_single(&replica)
        })
        .collect();

    let mut table = String::from("seed,exit_code,status\n");
    let mut bundles = Vec::with_capacity(seeds.len());
    let mut exit_code = 0;
    for (seed, r) in seeds.iter().zip(replicas) {
        match r {
            Ok(b) => {
                let status = b.report.as_ref().map_or("none", |r| status_label(r.status));
                let _ = writeln!(table, "{seed},{},{status}", b.exit_code);
                exit_code = exit_code.max(b.exit_code);
                bundles.push(b);
            }
            Err(e) => {
                let code = error_exit_code(&e);
                let _ = writeln!(table, "{seed},{code},error");
                exit_code = exit_code.max(code);
            }
        }
    }
    let mut files = Vec::new();
    let table_path = dir.join("seeds.csv");
    fs::write(&table_path, table)?;
    files.push(table_path);
    let reports: Vec<PathBuf> = bundles
        .iter()
        .filter(|b| b.report.is_some())
        .map(|b| b.dir.join("report.json"))
        .collect();
    if !reports.is_empty() {
        let merged = merge_reports(&reports)?;
        let path = dir.join("merged.json");
        fs::write(&path, serde_json::to_string_pretty(&merged)? + "\n")?;
        files.push(path);
    }
    Ok(ReportBundle {
        dir,
        files,
        report: None,
        sweep: None,
        replicas: bundles,
        exit_code,
    })
}

fn status_label(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Partial => "partial",
        Status::BudgetExceeded => "budget_exceeded",
    }
}

/// One measured quantity across the swept word lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<Option<f64>>,
    /// Every consecutive pair of available values is nonincreasing.
    pub nonincreasing: bool,
    /// First available value over the last one.
    pub first_to_last_ratio: Option<f64>,
}

impl Series {
    fn new(name: &str, values: Vec<Option<f64>>) -> Self {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        let nonincreasing = present.windows(2).all(|w| w[1] <= w[0]);
        let first_to_last_ratio = match (present.first(), present.last()) {
            (Some(a), Some(b)) if present.len() >= 2 && *b > 0.0 => Some(a / b),
            _ => None,
        };
        Series {
            name: name.into(),
            values,
            nonincreasing,
            first_to_last_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ell: usize,
    pub points: usize,
    pub capped: bool,
    pub covering_radius: Option<f64>,
    pub w1: Option<f64>,
    pub design: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema: String,
    pub k: usize,
    pub seed: u64,
    pub r_target: f64,
    pub reference_size: usize,
    pub rows: Vec<SweepRow>,
    pub series: Vec<Series>,
    pub errors: Vec<StageError>,
    pub status: Status,
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

impl SweepSummary {
    fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        let mut cover = String::from("ell,points,capped,covering_radius,r_target\n");
        let mut w1 = String::from("ell,points,w1\n");
        let mut design = String::from("ell,points,discrepancy\n");
        for r in &self.rows {
            let _ = writeln!(cover, "{},{},{},{},{}", r.ell, r.points, r.capped, opt(r.covering_radius), self.r_target);
            let _ = writeln!(w1, "{},{},{}", r.ell, r.points, opt(r.w1));
            let _ = writeln!(design, "{},{},{}", r.ell, r.points, opt(r.design));
        }
        let has = |f: fn(&SweepRow) -> Option<f64>| self.rows.iter().any(|r| f(r).is_some());
        let mut emit = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text)?;
            files.push(path);
            Ok(())
        };
        emit("sweep_cover.csv", cover)?;
        if has(|r| r.w1) {
            emit("sweep_w1.csv", w1)?;
        }
        if has(|r| r.design) {
            emit("sweep_design.csv", design)?;
        }
        emit("sweep_summary.json", serde_json::to_string_pretty(self)? + "\n")?;
        Ok(files)
    }

    /// Plain-text trend table.
    pub fn table(&self) -> String {
        let mut out = format!("{:>4} {:>9} {:>16} {:>14} {:>14}\n", "ell", "points", "covering_radius", "w1", "design");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
            let _ = writeln!(
                out,
                "{:>4} {:>9} {:>16} {:>14} {:>14}",
                r.ell,
                r.points,
                cell(r.covering_radius),
                cell(r.w1),
                cell(r.design)
            );
        }
        for s in &self.series {
            let _ = writeln!(
                out,
                "{}: nonincreasing={} first/last={}",
                s.name,
                s.nonincreasing,
                s.first_to_last_ratio.map_or("-".to_string(), |x| format!("{x:.4}"))
            );
        }
        out
    }
}

/// Covering radius (and W1, design discrepancy when those checks are on)
/// of the orbit clouds of one alphabet at each word length.
fn ell_sweep(config: &RunConfig, run: &CoverRun, ells: &[usize]) -> SweepSummary {
    let spec = run.params.space;
    let reference = uniform_reference(&spec, config.budgets.reference_size, config.seed);
    let base = spec.base_point();
    let mut rows = Vec::with_capacity(ells.len());
    let mut errors = Vec::new();
    for &ell in ells {
        let stage = format!("sweep ell={ell}");
        let cloud = match enumerate_cloud(&run.alphabet, ell, &base, enumerate_options(&config.budgets)) {
            Ok(c) => c,
            Err(e) => {
                errors.push(stage_error(&stage, &e));
                continue;
            }
        };
        let mut row = SweepRow {
            ell,
            points: cloud.len(),
            capped: cloud.provenance.capped,
            covering_radius: None,
            w1: None,
            design: None,
        };
        match covering_radius(&cloud, &reference) {
            Ok(r) => row.covering_radius = Some(r),
            Err(e) => errors.push(stage_error(&stage, &e)),
        }
        if let Some(w1) = &config.checks.w1 {
            match verify_w1(&cloud, config.epsilon, w1, config.seed) {
                Ok(o) => row.w1 = Some(o.w1.value),
                Err(e) => errors.push(stage_error(&stage, &e)),
            }
        }
        if let Some(d) = &config.checks.design {
            match verify_design(&cloud, d.lambda_r, d.upsilon) {
                Ok(o) => row.design = Some(o.worst.value),
                Err(e) => errors.push(stage_error(&stage, &e)),
            }
        }
        rows.push(row);
    }
    let mut series = vec![Series::new("covering_radius", rows.iter().map(|r| r.covering_radius).collect())];
    if config.checks.w1.is_some() {
        series.push(Series::new("w1", rows.iter().map(|r| r.w1).collect()));
    }
    if config.checks.design.is_some() {
        series.push(Series::new("design", rows.iter().map(|r| r.design).collect()));
    }
    let status = status_of(&CheckResults::default(), &errors);
    SweepSummary {
        schema: "wordcover.sweep/1".into(),
        k: run.params.k,
        seed: config.seed,
        r_target: run.params.r_target,
        reference_size: config.budgets.reference_size,
        rows,
        series,
        errors,
        status,
    }
}
