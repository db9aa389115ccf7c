use serde::{Deserialize, Serialize};

use super::{chi_square_sf, normal_two_sided, poisson_pmf, Estimate};
use crate::error::{Error, Result};
use crate::model::PointMeasure;

/// Minimum expected count per bin after merging.
const MIN_EXPECTED: f64 = 5.0;

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub passed: bool,
}

impl TestResult {
    fn new(name: impl Into<String>, statistic: f64, p_value: f64, level: f64) -> Self {
        let p_value = if p_value.is_nan() { 0.0 } else { p_value.clamp(0.0, 1.0) };
        Self {
            name: name.into(),
            statistic,
            p_value,
            level,
            passed: p_value >= level,
        }
    }
}

/// Family-wise combination: the smallest p-value times the family size.
pub fn bonferroni(name: impl Into<String>, parts: &[TestResult], level: f64) -> TestResult {
    if parts.is_empty() {
        return TestResult::new(name, 0.0, 1.0, level);
    }
    let (stat, p_min) = parts
        .iter()
        .map(|r| (r.statistic, r.p_value))
        .fold((0.0, 1.0), |acc, (s, p)| if p < acc.1 { (s, p) } else { acc });
    TestResult::new(name, stat, (p_min * parts.len() as f64).min(1.0), level)
}

/// Merges adjacent bins left to right until every bin has expected count at
/// least `MIN_EXPECTED` under every row; a short remainder joins the last bin.
fn merge_bins(rows: &[Vec<f64>], expected: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = rows[0].len();
    let mut out_obs: Vec<Vec<f64>> = vec![Vec::new(); rows.len()];
    let mut out_exp: Vec<Vec<f64>> = vec![Vec::new(); rows.len()];
    let mut acc_o = vec![0.0; rows.len()];
    let mut acc_e = vec![0.0; rows.len()];
    for j in 0..k {
        for r in 0..rows.len() {
            acc_o[r] += rows[r][j];
            acc_e[r] += expected[r][j];
        }
        if acc_e.iter().all(|&e| e >= MIN_EXPECTED) {
            for r in 0..rows.len() {
                out_obs[r].push(acc_o[r]);
                out_exp[r].push(acc_e[r]);
                acc_o[r] = 0.0;
                acc_e[r] = 0.0;
            }
        }
    }
    if acc_e.iter().any(|&e| e > 0.0) || acc_o.iter().any(|&o| o > 0.0) {
        for r in 0..rows.len() {
            match out_obs[r].last_mut() {
                Some(last) => {
                    *last += acc_o[r];
                    *out_exp[r].last_mut().unwrap() += acc_e[r];
                }
                None => {
                    out_obs[r].push(acc_o[r]);
                    out_exp[r].push(acc_e[r]);
                }
            }
        }
    }
    (out_obs, out_exp)
}

fn pearson(obs: &[Vec<f64>], exp: &[Vec<f64>]) -> f64 {
    obs.iter()
        .zip(exp)
        .flat_map(|(o, e)| o.iter().zip(e))
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o - e).powi(2) / e)
        .sum()
}

/// Chi-square goodness of fit of category counts against probabilities.
pub fn chi_square_gof(name: &str, observed: &[u64], probs: &[f64], level: f64) -> Result<TestResult> {
    if observed.len() != probs.len() {
        return Err(Error::invalid("chi-square", "observed and probabilities differ in length"));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let total_p: f64 = probs.iter().sum();
    let obs = vec![observed.iter().map(|&o| o as f64).collect::<Vec<_>>()];
    let exp = vec![probs.iter().map(|p| p / total_p * n as f64).collect::<Vec<_>>()];
    let (o, e) = merge_bins(&obs, &exp);
    let stat = pearson(&o, &e);
    let df = o[0].len() as f64 - 1.0;
    Ok(TestResult::new(name, stat, chi_square_sf(stat, df), level))
}

/// Goodness of fit of integer counts to Poisson(`mean`): a dispersion z-test
/// and a binned chi-square test, combined by Bonferroni.
pub fn poisson_gof(name: &str, counts: &[u64], mean: f64, level: f64) -> Result<TestResult> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid("Poisson mean", format!("{mean} must be finite and nonnegative")));
    }
    if counts.len() < 2 {
        return Err(Error::InsufficientData("Poisson fit needs at least 2 counts".into()));
    }
    if mean == 0.0 {
        let all_zero = counts.iter().all(|&c| c == 0);
        let (stat, p) = if all_zero { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
        return Ok(TestResult::new(name, stat, p, level));
    }
    let n = counts.len() as f64;
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let m = xs.iter().sum::<f64>() / n;
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let var_s2 = mean / n + 2.0 * mean * mean / (n - 1.0);
    let z = (s2 - mean) / var_s2.sqrt();
    let dispersion = TestResult::new(format!("{name}/dispersion"), z, normal_two_sided(z), level);

    let kmax = counts.iter().copied().max().unwrap_or(0);
    let mut probs = Vec::new();
    let mut cdf = 0.0;
    let mut k = 0u64;
    // bins 0..K plus an upper tail, extending past both the data and the bulk of the law
    while k <= kmax || (1.0 - cdf) * n >= MIN_EXPECTED {
        let p = poisson_pmf(k, mean);
        probs.push(p);
        cdf += p;
        k += 1;
        if k > kmax && cdf >= 1.0 {
            break;
        }
    }
    probs.push((1.0 - cdf).max(0.0));
    let mut observed = vec![0u64; probs.len()];
    for &c in counts {
        observed[(c as usize).min(probs.len() - 2)] += 1;
    }
    let binned = chi_square_gof(&format!("{name}/bins"), &observed, &probs, level)?;
    let mut res = bonferroni(name, &[dispersion, binned], level);
    res.statistic = m;
    Ok(res)
}

/// Two-sample chi-square homogeneity test on integer-valued samples.
pub fn two_sample_chi_square(name: &str, a: &[u64], b: &[u64], level: f64) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("both samples must be nonempty".into()));
    }
    let kmax = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ha = vec![0.0; kmax + 1];
    let mut hb = vec![0.0; kmax + 1];
    for &x in a {
        ha[x as usize] += 1.0;
    }
    for &x in b {
        hb[x as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ea: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| (x + y) * na / (na + nb)).collect();
    let eb: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| (x + y) * nb / (na + nb)).collect();
    let (o, e) = merge_bins(&[ha, hb], &[ea, eb]);
    let bins = o[0].len();
    if bins < 2 {
        return Ok(TestResult::new(name, 0.0, 1.0, level));
    }
    let stat = pearson(&o, &e);
    Ok(TestResult::new(name, stat, chi_square_sf(stat, (bins - 1) as f64), level))
}

/// Compares two samples of point measures: per-state count histograms and the
/// total count, Bonferroni-combined.
pub fn two_sample_counts(
    name: &str,
    a: &[PointMeasure],
    b: &[PointMeasure],
    n_states: usize,
    level: f64,
) -> Result<TestResult> {
    let ca: Vec<Vec<u64>> = a.iter().map(|p| p.counts(n_states)).collect();
    let cb: Vec<Vec<u64>> = b.iter().map(|p| p.counts(n_states)).collect();
    two_sample_count_vectors(name, &ca, &cb, level)
}

/// [`two_sample_counts`] on per-state count vectors.
pub fn two_sample_count_vectors(
    name: &str,
    a: &[Vec<u64>],
    b: &[Vec<u64>],
    level: f64,
) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("both samples must be nonempty".into()));
    }
    if a.iter().chain(b).all(|c| c.iter().all(|&v| v == 0)) {
        return Err(Error::InsufficientData("all-empty joint support".into()));
    }
    let n_states = a[0].len();
    let mut parts = Vec::with_capacity(n_states + 1);
    for x in 0..n_states {
        let sa: Vec<u64> = a.iter().map(|c| c[x]).collect();
        let sb: Vec<u64> = b.iter().map(|c| c[x]).collect();
        parts.push(two_sample_chi_square(&format!("{name}/state{x}"), &sa, &sb, level)?);
    }
    if n_states > 1 {
        let ta: Vec<u64> = a.iter().map(|c| c.iter().sum()).collect();
        let tb: Vec<u64> = b.iter().map(|c| c.iter().sum()).collect();
        parts.push(two_sample_chi_square(&format!("{name}/total"), &ta, &tb, level)?);
    }
    Ok(bonferroni(name, &parts, level))
}

/// Two-sided z-test of an estimate against a reference value.
pub fn z_test(name: &str, estimate: &Estimate, reference: f64, level: f64) -> TestResult {
    let z = estimate.z_score(reference);
    TestResult::new(name, z, normal_two_sided(z), level)
}

/// Pooled two-proportion z-test (e.g. for void probabilities).
pub fn proportion_two_sample(name: &str, hits_a: usize, n_a: usize, hits_b: usize, n_b: usize, level: f64) -> TestResult {
    let (pa, pb) = (hits_a as f64 / n_a as f64, hits_b as f64 / n_b as f64);
    let pool = (hits_a + hits_b) as f64 / (n_a + n_b) as f64;
    let se = (pool * (1.0 - pool) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    let z = if se == 0.0 { 0.0 } else { (pa - pb) / se };
    TestResult::new(name, z, normal_two_sided(z), level)
}

/// Kolmogorov-Smirnov test of samples against Uniform(0, 1).
pub fn ks_uniform(name: &str, samples: &[f64], level: f64) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KS test needs samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(TestResult::new(name, d, kolmogorov_sf(lambda), level))
}

fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
