use serde::{Deserialize, Serialize};

use crate::stats::{Estimate, TestResult};

/// One named check of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub se: Option<f64>,
    pub reference: Option<f64>,
    /// Test level, or the tolerance the statistic is compared against.
    pub threshold: f64,
    pub passed: bool,
    pub seed: u64,
    pub replicas: usize,
}

/// Every check of one verification run, in the order performed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub name: String,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl CouplingReport {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            seed,
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn push_test(&mut self, r: &TestResult, replicas: usize) {
        self.checks.push(Check {
            name: r.name.clone(),
            statistic: r.statistic,
            p_value: Some(r.p_value),
            se: None,
            reference: None,
            threshold: r.level,
            passed: r.passed,
            seed: self.seed,
            replicas,
        });
    }

    /// Passes when `value <= tolerance`.
    pub fn push_bound(&mut self, name: impl Into<String>, value: f64, tolerance: f64, replicas: usize) {
        self.checks.push(Check {
            name: name.into(),
            statistic: value,
            p_value: None,
            se: None,
            reference: None,
            threshold: tolerance,
            passed: value <= tolerance,
            seed: self.seed,
            replicas,
        });
    }

    /// Passes when the estimate lies within `n_se` standard errors of `reference`.
    pub fn push_estimate(&mut self, name: impl Into<String>, e: &Estimate, reference: f64, n_se: f64) {
        let z = e.z_score(reference);
        self.checks.push(Check {
            name: name.into(),
            statistic: e.mean,
            p_value: None,
            se: Some(e.se),
            reference: Some(reference),
            threshold: n_se,
            passed: z <= n_se,
            seed: self.seed,
            replicas: e.n,
        });
    }

    pub fn extend(&mut self, other: CouplingReport) {
        self.checks.extend(other.checks);
    }
}
