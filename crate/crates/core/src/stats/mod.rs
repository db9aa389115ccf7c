//! Monte Carlo estimators and the hypothesis tests used by the verifiers.

mod estimate;
mod tests_impl;

pub use estimate::{covariance_estimate, generating_estimate, laplace_estimate, Estimate};
pub use tests_impl::{
    bonferroni, chi_square_gof, ks_uniform, poisson_gof, proportion_two_sample, two_sample_chi_square,
    two_sample_count_vectors, two_sample_counts, z_test, TestResult,
};

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(statistic: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).map(|d| d.sf(statistic)).unwrap_or(f64::NAN).clamp(0.0, 1.0)
}

/// Two-sided normal p-value of a z statistic.
pub fn normal_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return 0.0;
    }
    let n = Normal::standard();
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    Poisson::new(mean).map(|d| d.pmf(k)).unwrap_or(0.0)
}
