//! Run configuration: parsing, validation and hashing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trimtree::model::{Field, Measure, MotionCtmc, StateSpace};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// State count or state labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum States {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub states: States,
    /// Rate matrix, row-major.
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<Vec<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: Format::Csv,
        }
    }
}

/// Scenario-specific settings; every field has a default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Second test function for covariance checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    /// Number of random instances for the semigroup scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas_2n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_state: Option<usize>,
    /// Evaluation points for the flow example.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    /// Replicas whose full event log `simulate` writes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genealogy_replicas: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub params: Params,
}

/// A validated model.
#[derive(Debug, Clone)]
pub struct Model {
    pub space: StateSpace,
    pub motion: MotionCtmc,
    pub alpha: Field,
    pub beta: Field,
    pub h: Option<Field>,
    pub mu: Option<Measure>,
    pub f: Option<Field>,
}

impl Model {
    pub fn n(&self) -> usize {
        self.space.len()
    }

    pub fn mu(&self) -> Result<&Measure, CliError> {
        self.mu.as_ref().ok_or_else(|| CliError::config("model.mu", "required by this command"))
    }

    pub fn h(&self) -> Result<&Field, CliError> {
        self.h.as_ref().ok_or_else(|| CliError::config("model.h", "required by this command"))
    }

    /// `f`, or the constant 1 when absent.
    pub fn f_or_one(&self) -> Field {
        self.f.clone().unwrap_or_else(|| Field::constant(self.n(), 1.0))
    }
}

const ROW_SUM_TOL: f64 = 1e-9;

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| CliError::Config {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form. The output directory is left out:
    /// where results are written does not change them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir.clear();
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let r = &self.run;
        positive_opt("run.T", r.t)?;
        positive_opt("run.dt", r.dt)?;
        if r.n == Some(0) {
            return Err(CliError::config("run.N", "must be at least 1"));
        }
        if matches!(r.replicas, Some(k) if k < 2) {
            return Err(CliError::config("run.replicas", "must be at least 2"));
        }
        if let Some(g) = &r.time_grid {
            if g.is_empty() {
                return Err(CliError::config("run.time_grid", "must not be empty"));
            }
            if let Some(i) = g.iter().position(|t| !t.is_finite() || *t < 0.0) {
                return Err(CliError::config(format!("run.time_grid[{i}]"), "must be finite and nonnegative"));
            }
            if let Some(i) = g.windows(2).position(|w| w[1] <= w[0]) {
                return Err(CliError::config(format!("run.time_grid[{}]", i + 1), "grid must be increasing"));
            }
        }
        positive_opt("run.R", r.r)?;
        if let Some(level) = self.params.level {
            if !(level > 0.0 && level < 1.0) {
                return Err(CliError::config("params.level", "must lie in (0, 1)"));
            }
        }
        if let Some(m) = &self.model {
            check_model(m)?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let m = self.model.as_ref().ok_or_else(|| CliError::config("model", "required by this command"))?;
        build_model(m)
    }

    pub fn seed(&self) -> u64 {
        self.run.seed
    }

    pub fn level(&self) -> f64 {
        self.params.level.unwrap_or(0.01)
    }

    pub fn t(&self) -> Result<f64, CliError> {
        self.run.t.ok_or_else(|| CliError::config("run.T", "required by this command"))
    }

    pub fn n(&self) -> u32 {
        self.run.n.unwrap_or(500)
    }

    pub fn replicas(&self) -> usize {
        self.run.replicas.unwrap_or(1000)
    }

    /// `run.time_grid`, or `[run.T]`.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        match &self.run.time_grid {
            Some(g) => Ok(g.clone()),
            None => Ok(vec![self.t()?]),
        }
    }
}

fn positive_opt(field: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(CliError::config(field, format!("must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn state_count(states: &States) -> Result<usize, CliError> {
    let n = match states {
        States::Count(n) => *n,
        States::Labels(l) => l.len(),
    };
    if n == 0 {
        return Err(CliError::config("model.states", "must name at least one state"));
    }
    Ok(n)
}

fn check_len(field: &str, v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() != n {
        return Err(CliError::config(field, format!("has {} entries, expected {n}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(CliError::config(format!("{field}[{i}]"), "must be finite"));
    }
    Ok(())
}

fn check_nonneg(field: &str, v: &[f64]) -> Result<(), CliError> {
    match v.iter().position(|&x| x < 0.0) {
        Some(i) => Err(CliError::config(format!("{field}[{i}]"), format!("must be nonnegative, got {}", v[i]))),
        None => Ok(()),
    }
}

fn check_model(m: &ModelBlock) -> Result<(), CliError> {
    let n = state_count(&m.states)?;
    check_len("model.Q", &m.q, n * n)?;
    for x in 0..n {
        let row = &m.q[x * n..(x + 1) * n];
        for (y, &r) in row.iter().enumerate() {
            if y != x && r < 0.0 {
                return Err(CliError::config(format!("model.Q row {x}"), format!("off-diagonal rate to {y} is negative ({r})")));
            }
        }
        let sum: f64 = row.iter().sum();
        let scale = row.iter().map(|r| r.abs()).sum::<f64>().max(1.0);
        if sum.abs() > ROW_SUM_TOL * scale {
            return Err(CliError::config(format!("model.Q row {x}"), format!("sums to {sum}, must sum to 0")));
        }
    }
    check_len("model.alpha", &m.alpha, n)?;
    check_nonneg("model.alpha", &m.alpha)?;
    check_len("model.beta", &m.beta, n)?;
    if let Some(h) = &m.h {
        check_len("model.h", h, n)?;
        if let Some(i) = h.iter().position(|&x| x <= 0.0) {
            return Err(CliError::config(format!("model.h[{i}]"), "must be positive"));
        }
    }
    if let Some(mu) = &m.mu {
        check_len("model.mu", mu, n)?;
        check_nonneg("model.mu", mu)?;
    }
    if let Some(f) = &m.f {
        check_len("model.f", f, n)?;
        check_nonneg("model.f", f)?;
    }
    Ok(())
}

fn build_model(m: &ModelBlock) -> Result<Model, CliError> {
    check_model(m)?;
    let space = match &m.states {
        States::Count(n) => StateSpace::indexed(*n),
        States::Labels(l) => StateSpace::new(l.clone()),
    }
    .map_err(|e| CliError::config("model.states", e.to_string()))?;
    let n = space.len();
    let motion = MotionCtmc::from_row_major(n, &m.q).map_err(|e| CliError::config("model.Q", e.to_string()))?;
    let field = |name: &str, v: &[f64]| Field::new(v.to_vec()).map_err(|e| CliError::config(name, e.to_string()));
    Ok(Model {
        motion,
        alpha: field("model.alpha", &m.alpha)?,
        beta: field("model.beta", &m.beta)?,
        h: m.h.as_ref().map(|h| field("model.h", h)).transpose()?,
        mu: m
            .mu
            .as_ref()
            .map(|mu| Measure::new(mu.clone()).map_err(|e| CliError::config("model.mu", e.to_string())))
            .transpose()?,
        f: m.f.as_ref().map(|f| field("model.f", f)).transpose()?,
        space,
    })
}
