//! Adaptive Dormand-Prince 5(4) integration of autonomous systems `y' = F(y)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}


const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = rhs(y, dy)` from 0 to `t` in place.
pub(crate) fn integrate<F>(rhs: F, y: &mut [f64], t: f64, opts: &OdeOptions) -> Result<OdeStats>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut stats = OdeStats::default();
    if t <= 0.0 || n == 0 {
        return Ok(stats);
    }
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    rhs(y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = initial_step(&rhs, y, &k[0], t, opts, &mut stats);
    let mut s = 0.0;
    let mut fail_streak = 0;
    while s < t {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Solver {
                t: s,
                reason: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        let last = s + h >= t * (1.0 - 1e-14);
        if last {
            h = t - s;
        }
        stage(&mut tmp, y, h, &[(A21, &k[0])]);
        rhs(&tmp, &mut k[1]);
        stage(&mut tmp, y, h, &[(A31, &k[0]), (A32, &k[1])]);
        rhs(&tmp, &mut k[2]);
        stage(&mut tmp, y, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        rhs(&tmp, &mut k[3]);
        stage(&mut tmp, y, h, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
        rhs(&tmp, &mut k[4]);
        stage(&mut tmp, y, h, &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])]);
        rhs(&tmp, &mut k[5]);
        stage(&mut y_new, y, h, &[(B1, &k[0]), (B3, &k[2]), (B4, &k[3]), (B5, &k[4]), (B6, &k[5])]);
        rhs(&y_new, &mut k[6]);
        stats.evaluations += 6;

        let mut err = 0.0f64;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            stats.accepted += 1;
            fail_streak = 0;
            s = if last { t } else { s + h };
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.max_step);
        } else {
            stats.rejected += 1;
            fail_streak += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= if fail_streak > 3 { 0.1 } else { fac };
            if s + h <= s || h < 1e-300 {
                return Err(Error::Solver {
                    t: s,
                    reason: "step size underflow".into(),
                });
            }
        }
    }
    Ok(stats)
}

fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Starting step from the usual two-evaluation heuristic, so stiff initial
/// transients (e.g. very large data for a Riccati term) get a tiny first step.
fn initial_step<F>(rhs: &F, y: &[f64], f0: &[f64], t: f64, opts: &OdeOptions, stats: &mut OdeStats) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..n).map(|i| (v(i) / sc[i]).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(&|i| y[i]);
    let d1 = rms(&|i| f0[i]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * t.min(1.0) } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t).min(opts.max_step);
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(&y1, &mut f1);
    stats.evaluations += 1;
    let d2 = rms(&|i| f1[i] - f0[i]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t).min(opts.max_step)
}
