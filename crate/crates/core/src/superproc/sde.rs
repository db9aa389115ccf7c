use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{check_dim, Field, Measure, MotionCtmc};

/// Euler-Maruyama for `dX = (Q^T X + beta X) dt + sqrt(2 alpha X) dW` with full
/// truncation: drift and diffusion are evaluated at `max(X, 0)`. Returns `max(X, 0)`
/// at each grid time.
pub fn simulate_super_sde<R: Rng + ?Sized>(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    dt: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<Measure>> {
    let n = motion.n_states();
    check_dim(n, alpha.len())?;
    check_dim(n, beta.len())?;
    check_dim(n, mu.len())?;
    alpha.ensure_nonnegative("alpha")?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&t| t < 0.0) {
        return Err(Error::invalid("time grid", "must be sorted and nonnegative"));
    }
    let q = motion.matrix();
    let mut x = mu.masses().to_vec();
    let mut plus = vec![0.0; n];
    let mut out = Vec::with_capacity(grid.len());
    let mut t = 0.0;
    for &target in grid {
        while t < target {
            let h = dt.min(target - t);
            if h <= 1e-15 * target.max(1.0) {
                t = target;
                break;
            }
            for i in 0..n {
                plus[i] = x[i].max(0.0);
            }
            let sq = h.sqrt();
            for i in 0..n {
                let mut drift = beta[i] * plus[i];
                for j in 0..n {
                    drift += q[(j, i)] * plus[j];
                }
                let z: f64 = StandardNormal.sample(rng);
                x[i] += drift * h + (2.0 * alpha[i] * plus[i]).sqrt() * sq * z;
            }
            t += h;
        }
        out.push(Measure::new(x.iter().map(|v| v.max(0.0)).collect())?);
    }
    Ok(out)
}
