//! Finite state spaces, fields, measures, point measures and the motions on them.

mod flow;
mod motion;
mod point;

pub use flow::MotionFlow1D;
pub use motion::{
    apply_generator, girsanov_weight, h_transform, sample_ctmc_path, JumpPath, MotionCtmc,
};
pub(crate) use motion::choose_target as motion_choose_target;
pub(crate) use point::poisson_count;
pub use point::{pois_sample, thin, IdSource, Particle, ParticleId, PointMeasure};

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of labelled states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("state space", "needs at least one state"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::invalid("state space", format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// States labelled `0, 1, ..., n-1`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// A real function on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("field", format!("entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        check_dim(self.len(), other.len())?;
        Ok(Field(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Supremum-norm distance.
    pub fn dist_inf(&self, other: &Field) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub(crate) fn ensure_nonnegative(&self, what: &str) -> Result<()> {
        match self.0.iter().position(|&v| v < 0.0) {
            Some(i) => Err(Error::invalid(what, format!("entry {i} is negative ({})", self.0[i]))),
            None => Ok(()),
        }
    }

    pub(crate) fn ensure_positive(&self, what: &str) -> Result<()> {
        match self.0.iter().position(|&v| v <= 0.0) {
            Some(i) => Err(Error::invalid(what, format!("entry {i} is not positive ({})", self.0[i]))),
            None => Ok(()),
        }
    }

    pub(crate) fn ensure_unit_interval(&self, what: &str) -> Result<()> {
        match self.0.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            Some(i) => Err(Error::invalid(what, format!("entry {i} = {} outside [0, 1]", self.0[i]))),
            None => Ok(()),
        }
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A finite nonnegative measure on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Measure(Vec<f64>);

impl Measure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if let Some(i) = masses.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid(
                "measure",
                format!("mass at state {i} is {} (must be finite and nonnegative)", masses[i]),
            ));
        }
        Ok(Self(masses))
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `mass` units at a single state.
    pub fn dirac(n: usize, state: usize, mass: f64) -> Result<Self> {
        let mut v = vec![0.0; n];
        v[state] = mass;
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `<mu, f>`.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        check_dim(self.len(), f.len())?;
        Ok(self.0.iter().zip(f.iter()).map(|(m, v)| m * v).sum())
    }

    /// The measure `f mu` for a nonnegative density `f`.
    pub fn weighted(&self, f: &Field) -> Result<Measure> {
        check_dim(self.len(), f.len())?;
        f.ensure_nonnegative("density")?;
        Ok(Measure(self.0.iter().zip(f.iter()).map(|(m, v)| m * v).collect()))
    }

    pub fn scaled(&self, c: f64) -> Result<Measure> {
        Measure::new(self.0.iter().map(|m| m * c).collect())
    }
}

impl Index<usize> for Measure {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A value in `[0, +inf]`, with infinity carried as a flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }
}

/// A field whose entries may be `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedField(pub Vec<Extended>);

impl ExtendedField {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Extended {
        self.0[i]
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| !v.is_infinite())
    }

    /// The finite field, or an error naming the first infinite state.
    pub fn to_field(&self) -> Result<Field> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, v)| v.finite().ok_or(Error::InfiniteValue { state: i }))
            .collect::<Result<Vec<_>>>()
            .map(Field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_space_rejects_duplicates_and_empty() {
        assert!(StateSpace::new(vec![]).is_err());
        assert!(StateSpace::new(vec!["a".into(), "a".into()]).is_err());
        let s = StateSpace::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(s.index_of("b"), Some(1));
    }

    #[test]
    fn measure_validation_and_pairing() {
        assert!(Measure::new(vec![1.0, -0.1]).is_err());
        assert!(Measure::new(vec![f64::NAN]).is_err());
        let m = Measure::new(vec![1.0, 2.0]).unwrap();
        let f = Field::new(vec![3.0, 0.5]).unwrap();
        assert_eq!(m.integrate(&f).unwrap(), 4.0);
        assert_eq!(m.total(), 3.0);
        assert!(m.integrate(&Field::zeros(3)).is_err());
    }

    #[test]
    fn extended_field_reports_infinite_state() {
        let e = ExtendedField(vec![Extended::Finite(1.0), Extended::Infinite]);
        assert!(matches!(e.to_field(), Err(Error::InfiniteValue { state: 1 })));
    }
}
