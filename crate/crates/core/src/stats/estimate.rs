use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Field, Measure, PointMeasure};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 samples, got {}", xs.len())));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            se: (var / n).sqrt(),
            n: xs.len(),
        })
    }

    /// `|mean - reference|` in units of the standard error (0 when both agree exactly).
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.mean - reference).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, reference: f64, n_se: f64) -> bool {
        self.z_score(reference) <= n_se
    }
}

/// Mean and SE of `exp(-<X, f>)` over sampled measures.
pub fn laplace_estimate(samples: &[Measure], f: &Field) -> Result<Estimate> {
    let xs = samples
        .iter()
        .map(|m| m.integrate(f).map(|v| (-v).exp()))
        .collect::<Result<Vec<_>>>()?;
    Estimate::from_samples(&xs)
}

/// Mean and SE of `(1 - f)^X` over sampled point measures.
pub fn generating_estimate(samples: &[PointMeasure], f: &Field) -> Result<Estimate> {
    f.ensure_unit_interval("generating function argument")?;
    let xs: Vec<f64> = samples.iter().map(|p| p.generating_product(f)).collect();
    Estimate::from_samples(&xs)
}

/// Sample covariance of paired observations, with the SE of the mean centred product.
pub fn covariance_estimate(a: &[f64], b: &[f64]) -> Result<Estimate> {
    if a.len() != b.len() {
        return Err(Error::invalid("covariance", "paired samples differ in length"));
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData("covariance needs at least 3 pairs".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let e = Estimate::from_samples(&prods)?;
    Ok(Estimate {
        mean: e.mean * n / (n - 1.0),
        se: e.se * n / (n - 1.0),
        n: a.len(),
    })
}
