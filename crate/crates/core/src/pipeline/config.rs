//! TOML run configuration.
//!
//! ```toml
//! space = "sphere2"
//! epsilon = 0.05
//! delta = 0.1
//! seed = 1
//! # optional
//! domain = "strict"          # or "exploratory"
//! variant = "main"           # or "overview"
//! output_dir = "out"
//!
//! [overrides]                # k, ell, c_m, v_m, antipodal_dim
//! [budgets]                  # cap, reference_size, dedup
//! [checks.cover]
//! [checks.w1]                # method = "auto" | "exact" | "sinkhorn", reg
//! [checks.design]            # lambda_r, upsilon
//! [checks.gap]               # lambda_max, seeds
//! [checks.persist]           # n, q, trials
//! [sweep]                    # ells = [..], seeds = [..]
//! ```
//!
//! A check runs when its table is present.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cover::{Domain, FormulaVariant, DEFAULT_CAP};
use crate::spaces::{make_space, ConstantOverrides, SpaceId, SpaceSpec};
use crate::spectral::DIMENSION_BUDGET;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceId,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub variant: FormulaVariant,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("wordcover-out")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antipodal_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    #[serde(default)]
    pub dedup: f64,
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

fn default_reference_size() -> usize {
    20_000
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            cap: default_cap(),
            reference_size: default_reference_size(),
            dedup: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<W1Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persist: Option<PersistCheck>,
}

impl Checks {
    pub fn any(&self) -> bool {
        self.cover.is_some()
            || self.w1.is_some()
            || self.design.is_some()
            || self.gap.is_some()
            || self.persist.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverCheck {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum W1Method {
    /// Exact flow when both sides fit the exact solver, Sinkhorn otherwise.
    #[default]
    Auto,
    Exact,
    Sinkhorn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1Check {
    #[serde(default)]
    pub method: W1Method,
    #[serde(default = "default_reg")]
    pub reg: f64,
    #[serde(default = "default_w1_reference")]
    pub reference_size: usize,
}

fn default_reg() -> f64 {
    0.02
}

fn default_w1_reference() -> usize {
    5000
}

impl Default for W1Check {
    fn default() -> Self {
        W1Check {
            method: W1Method::Auto,
            reg: default_reg(),
            reference_size: default_w1_reference(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCheck {
    pub lambda_r: f64,
    #[serde(default = "default_upsilon")]
    pub upsilon: f64,
}

fn default_upsilon() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapCheck {
    pub lambda_max: f64,
    /// Number of independent alphabets drawn from consecutive seeds.
    #[serde(default = "default_gap_seeds")]
    pub seeds: usize,
}

fn default_gap_seeds() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistCheck {
    pub n: usize,
    #[serde(default)]
    pub q: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ells: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    Validation(Vec<FieldError>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "config parse error at {line}:{column}: {message}")
            }
            ConfigError::Validation(errors) => {
                writeln!(f, "invalid config:")?;
                for e in errors {
                    writeln!(f, "  {}: {}", e.field, e.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

/// Parses and validates a configuration, reporting every invalid field.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let errors = config.validate();
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Validation(errors))
    }
}

/// Serializes a configuration back to TOML.
pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("configuration is always representable")
}

impl RunConfig {
    /// A configuration with every optional section at its default.
    pub fn minimal(space: SpaceId, epsilon: f64, delta: f64, seed: u64) -> Self {
        RunConfig {
            space,
            epsilon,
            delta,
            seed,
            domain: Domain::default(),
            variant: FormulaVariant::default(),
            output_dir: default_output_dir(),
            overrides: Overrides::default(),
            budgets: Budgets::default(),
            checks: Checks::default(),
            sweep: None,
        }
    }

    pub fn constant_overrides(&self) -> ConstantOverrides {
        ConstantOverrides {
            c_m: self.overrides.c_m,
            v_m: self.overrides.v_m,
            antipodal_dim: self.overrides.antipodal_dim,
        }
    }

    pub fn space_spec(&self) -> crate::error::Result<SpaceSpec> {
        make_space(self.space, &self.constant_overrides())
    }

    pub fn validate(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut bad = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        if let Err(e) = self.domain.check_epsilon(self.epsilon) {
            bad("epsilon", e.to_string());
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            bad("delta", format!("must lie in (0, 1/2), got {}", self.delta));
        }
        if let Err(e) = self.space_spec() {
            bad("overrides", e.to_string());
        }
        if self.overrides.k == Some(0) {
            bad("overrides.k", "must be at least 1".into());
        }
        if self.overrides.ell == Some(0) {
            bad("overrides.ell", "must be at least 1".into());
        }
        if self.budgets.cap == 0 {
            bad("budgets.cap", "must be at least 1".into());
        }
        if self.budgets.reference_size == 0 {
            bad("budgets.reference_size", "must be at least 1".into());
        }
        if !(self.budgets.dedup >= 0.0 && self.budgets.dedup.is_finite()) {
            bad("budgets.dedup", format!("must be finite and nonnegative, got {}", self.budgets.dedup));
        }
        if let Some(w1) = &self.checks.w1 {
            if !(w1.reg > 0.0 && w1.reg.is_finite()) {
                bad("checks.w1.reg", format!("must be positive, got {}", w1.reg));
            }
            if w1.reference_size == 0 {
                bad("checks.w1.reference_size", "must be at least 1".into());
            }
        }
        if let Some(design) = &self.checks.design {
            if !(design.lambda_r >= 0.0 && design.lambda_r.is_finite()) {
                bad("checks.design.lambda_r", format!("must be nonnegative, got {}", design.lambda_r));
            } else if let Ok(spec) = self.space_spec() {
                let dim = crate::spaces::multiplicity_count(&spec, design.lambda_r);
                if dim > DIMENSION_BUDGET {
                    bad(
                        "checks.design.lambda_r",
                        format!("basis dimension {dim} exceeds {DIMENSION_BUDGET}"),
                    );
                }
            }
            if !(design.upsilon > 0.0) {
                bad("checks.design.upsilon", format!("must be positive, got {}", design.upsilon));
            }
        }
        if let Some(gap) = &self.checks.gap {
            if !(gap.lambda_max > 0.0 && gap.lambda_max.is_finite()) {
                bad("checks.gap.lambda_max", format!("must be positive, got {}", gap.lambda_max));
            }
            if gap.seeds == 0 {
                bad("checks.gap.seeds", "must be at least 1".into());
            }
        }
        if let Some(p) = &self.checks.persist {
            if p.n == 0 {
                bad("checks.persist.n", "must be at least 1".into());
            }
            if p.q > 1 {
                bad("checks.persist.q", format!("must be 0 or 1, got {}", p.q));
            }
            if p.q == 1 && p.n > 60 {
                bad("checks.persist.n", format!("at most 60 points in degree 1, got {}", p.n));
            }
            if p.trials == 0 {
                bad("checks.persist.trials", "must be at least 1".into());
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.ells.is_empty() && sweep.seeds.is_empty() {
                bad("sweep", "needs ells or seeds".into());
            }
            if sweep.ells.contains(&0) {
                bad("sweep.ells", "word lengths must be at least 1".into());
            }
        }
        errors
    }
}
