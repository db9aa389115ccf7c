//! Log-Laplace and generating semigroups on a finite state space, `U_t inf`,
//! the survival field `p`, and moment references.

mod flow;

pub use flow::{flow_u_infinity, FlowParams};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{apply_generator, check_dim, h_transform, Extended, ExtendedField, Field, Measure, MotionCtmc};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Starting cap `C` for `U_t inf`.
    pub cap: f64,
    pub max_doublings: usize,
    /// Sup-norm tolerance for `U_t p = p`.
    pub fixed_point_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
            newton_tol: 1e-11,
            newton_max_iter: 100,
            cap: 1e6,
            max_doublings: 64,
            fixed_point_tol: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("max_step", self.max_step),
            ("newton_tol", self.newton_tol),
            ("cap", self.cap),
            ("fixed_point_tol", self.fixed_point_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid("solver options", format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

/// A solved field with integrator diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupResult {
    pub u: Field,
    pub stats: OdeStats,
}

fn dense_rows(motion: &MotionCtmc) -> Vec<f64> {
    let n = motion.n_states();
    let q = motion.matrix();
    let mut out = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            out.push(q[(x, y)]);
        }
    }
    out
}

/// `u' = Qu + lin*u - quad*u^2`, the common shape of both semigroups.
fn solve_reaction(
    motion: &MotionCtmc,
    lin: &[f64],
    quad: &[f64],
    init: Vec<f64>,
    t: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, OdeStats)> {
    let n = motion.n_states();
    let q = dense_rows(motion);
    let mut y = init;
    let stats = ode::integrate(
        |u, du| {
            for x in 0..n {
                let row = &q[x * n..(x + 1) * n];
                let mut acc = 0.0;
                for (r, v) in row.iter().zip(u) {
                    acc += r * v;
                }
                du[x] = acc + lin[x] * u[x] - quad[x] * u[x] * u[x];
            }
        },
        &mut y,
        t,
        &opts.ode(),
    )?;
    Ok((y, stats))
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("time", format!("{t} must be finite and nonnegative")));
    }
    Ok(())
}

/// `U_t f` for the `(Q, alpha, beta)` log-Laplace equation `u' = Qu + beta u - alpha u^2`.
pub fn solve_loglaplace(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    f: &Field,
    t: f64,
    opts: &SolverOptions,
) -> Result<SemigroupResult> {
    let n = motion.n_states();
    check_dim(n, alpha.len())?;
    check_dim(n, beta.len())?;
    check_dim(n, f.len())?;
    alpha.ensure_nonnegative("alpha")?;
    f.ensure_nonnegative("initial field")?;
    check_time(t)?;
    let (u, stats) = solve_reaction(motion, beta.values(), alpha.values(), f.values().to_vec(), t, opts)?;
    // nonnegativity is preserved by the flow; clear round-off only
    let u = u.into_iter().map(|v| v.max(0.0)).collect();
    Ok(SemigroupResult { u: Field::new(u)?, stats })
}

/// `U_t f` for the generating equation `u' = Qu + b u (1 - u) - d u` on `[0, 1]`-valued data.
pub fn solve_generating(
    motion: &MotionCtmc,
    b: &Field,
    d: &Field,
    f: &Field,
    t: f64,
    opts: &SolverOptions,
) -> Result<SemigroupResult> {
    let n = motion.n_states();
    check_dim(n, b.len())?;
    check_dim(n, d.len())?;
    check_dim(n, f.len())?;
    b.ensure_nonnegative("branching rate")?;
    d.ensure_nonnegative("death rate")?;
    f.ensure_unit_interval("initial field")?;
    check_time(t)?;
    let lin: Vec<f64> = b.iter().zip(d.iter()).map(|(b, d)| b - d).collect();
    let (u, stats) = solve_reaction(motion, &lin, b.values(), f.values().to_vec(), t, opts)?;
    let slack = 1e3 * opts.rtol + opts.atol;
    if let Some(x) = u.iter().position(|&v| v < -slack || v > 1.0 + slack) {
        return Err(Error::Solver {
            t,
            reason: format!("generating solution left [0, 1] at state {x}: {}", u[x]),
        });
    }
    let u = u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(SemigroupResult { u: Field::new(u)?, stats })
}

/// `U_t inf`: `U_t C` for `C, 2C, 4C, ...` until every entry either changes by
/// less than `rtol` (relative) under doubling, or keeps growing at a steady
/// relative rate, in which case it is flagged infinite.
///
/// For a finite entry the error of `U_t C` is `O(1/C)`, so its relative change
/// halves with every doubling. An unbounded entry grows like a power of `C`,
/// so its relative change per doubling stays put.
pub fn u_infinity(motion: &MotionCtmc, alpha: &Field, beta: &Field, t: f64, opts: &SolverOptions) -> Result<ExtendedField> {
    if !(t > 0.0) {
        return Err(Error::invalid("time", format!("U_t inf needs t > 0, got {t}")));
    }
    let n = motion.n_states();
    let mut cap = opts.cap;
    let mut prev = solve_loglaplace(motion, alpha, beta, &Field::constant(n, cap), t, opts)?.u;
    let mut last_change = vec![f64::INFINITY; n];
    let mut steady = vec![0usize; n];
    for _ in 0..opts.max_doublings {
        cap *= 2.0;
        let cur = solve_loglaplace(motion, alpha, beta, &Field::constant(n, cap), t, opts)?.u;
        let mut settled = true;
        for x in 0..n {
            let change = (cur[x] - prev[x]).abs() / cur[x].abs().max(f64::MIN_POSITIVE);
            if change > 1e-4 && change > 0.8 * last_change[x] {
                steady[x] += 1;
            } else {
                steady[x] = 0;
            }
            last_change[x] = change;
            let saturated = (cur[x] - prev[x]).abs() <= opts.rtol * cur[x].abs() + opts.atol;
            if !saturated && steady[x] < 3 {
                settled = false;
            }
        }
        prev = cur;
        if settled {
            let out = (0..n)
                .map(|x| if steady[x] >= 3 { Extended::Infinite } else { Extended::Finite(prev[x]) })
                .collect();
            return Ok(ExtendedField(out));
        }
    }
    let x = (0..n).find(|&x| steady[x] < 3).unwrap_or(0);
    Err(Error::NotSaturated { state: x })
}

/// `U_t inf` required to be finite everywhere.
pub fn u_infinity_finite(motion: &MotionCtmc, alpha: &Field, beta: &Field, t: f64, opts: &SolverOptions) -> Result<Field> {
    u_infinity(motion, alpha, beta, t, opts)?.to_field()
}

/// Upper bound `sup beta / (inf alpha (1 - e^{-t sup beta}))` on `U_t inf`
/// (`1/(t inf alpha)` when `sup beta = 0`); infinite when `inf alpha = 0`.
pub fn ancestry_bound(alpha: &Field, beta: &Field, t: f64) -> f64 {
    let a = alpha.min();
    let b = beta.max();
    if a <= 0.0 {
        return f64::INFINITY;
    }
    if b == 0.0 {
        1.0 / (a * t)
    } else {
        b / (a * -(-b * t).exp_m1())
    }
}

/// The survival field with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalField {
    pub p: Field,
    /// `sup |Qp + beta p - alpha p^2|`.
    pub residual: f64,
    pub iterations: usize,
    /// `max over t of sup |U_t p - p|`.
    pub fixed_point_deviation: f64,
    /// Horizon of the long-time warm start.
    pub warm_start_time: f64,
}

/// `Qp + beta p - alpha p^2`.
pub fn stationary_residual(motion: &MotionCtmc, alpha: &Field, beta: &Field, p: &Field) -> Result<Field> {
    let qp = apply_generator(motion, p)?;
    Field::new((0..p.len()).map(|x| qp[x] + beta[x] * p[x] - alpha[x] * p[x] * p[x]).collect())
}

/// Times at which `U_t p = p` is checked.
pub const FIXED_POINT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

/// The survival field `p = lim U_t inf`: long-horizon warm start, damped Newton on
/// `Qp + beta p - alpha p^2 = 0`, then verification of `U_t p = p`.
pub fn survival_p(motion: &MotionCtmc, alpha: &Field, beta: &Field, opts: &SolverOptions) -> Result<SurvivalField> {
    let n = motion.n_states();
    check_dim(n, alpha.len())?;
    check_dim(n, beta.len())?;
    alpha.ensure_positive("alpha")?;
    let scale = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let mut warm = if scale > 0.0 { (50.0 / scale).clamp(5.0, 500.0) } else { 500.0 };
    let mut last_err = None;
    for _ in 0..4 {
        let start = solve_loglaplace(motion, alpha, beta, &Field::constant(n, opts.cap), warm, opts)?.u;
        match newton(motion, alpha, beta, start, opts) {
            Ok((p, residual, iterations)) => {
                let mut dev = 0.0f64;
                for &t in &FIXED_POINT_TIMES {
                    let u = solve_loglaplace(motion, alpha, beta, &p, t, opts)?.u;
                    let d = u.dist_inf(&p)?;
                    if d > opts.fixed_point_tol {
                        return Err(Error::FixedPoint {
                            t,
                            deviation: d,
                            tolerance: opts.fixed_point_tol,
                        });
                    }
                    dev = dev.max(d);
                }
                return Ok(SurvivalField {
                    p,
                    residual,
                    iterations,
                    fixed_point_deviation: dev,
                    warm_start_time: warm,
                });
            }
            Err(e) => {
                last_err = Some(e);
                warm *= 4.0;
            }
        }
    }
    Err(last_err.unwrap())
}

fn newton(motion: &MotionCtmc, alpha: &Field, beta: &Field, start: Field, opts: &SolverOptions) -> Result<(Field, f64, usize)> {
    let n = motion.n_states();
    let q = motion.matrix();
    let mut p = start;
    let res_norm = |p: &Field| -> Result<(Field, f64)> {
        let r = stationary_residual(motion, alpha, beta, p)?;
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((r, norm))
    };
    let (mut r, mut norm) = res_norm(&p)?;
    for it in 0..opts.newton_max_iter {
        if norm < opts.newton_tol {
            let p = p.map(|v| v.max(0.0));
            let norm = res_norm(&p)?.1;
            return Ok((p, norm, it));
        }
        let mut jac: DMatrix<f64> = q.clone();
        for x in 0..n {
            jac[(x, x)] += beta[x] - 2.0 * alpha[x] * p[x];
        }
        let rhs = -DVector::from_column_slice(r.values());
        let step = jac.lu().solve(&rhs).ok_or(Error::NewtonDiverged {
            iterations: it,
            residual: norm,
        })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = Field::new((0..n).map(|x| p[x] + lambda * step[x]).collect())?;
            let (rc, nc) = res_norm(&cand)?;
            if nc < norm || nc < opts.newton_tol {
                p = cand;
                r = rc;
                norm = nc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm < opts.newton_tol {
        let p = p.map(|v| v.max(0.0));
        let norm = res_norm(&p)?.1;
        return Ok((p, norm, opts.newton_max_iter));
    }
    Err(Error::NewtonDiverged {
        iterations: opts.newton_max_iter,
        residual: norm,
    })
}

/// `exp(t (Q + diag beta))`.
fn linear_propagator(motion: &MotionCtmc, beta: &Field, t: f64) -> DMatrix<f64> {
    let mut a = motion.matrix().clone();
    for x in 0..a.nrows() {
        a[(x, x)] += beta[x];
    }
    (a * t).exp()
}

/// First moment `V_t f = exp(t (Q + diag beta)) f`.
pub fn linear_moment(motion: &MotionCtmc, beta: &Field, f: &Field, t: f64) -> Result<Field> {
    let n = motion.n_states();
    check_dim(n, beta.len())?;
    check_dim(n, f.len())?;
    check_time(t)?;
    let v = linear_propagator(motion, beta, t) * DVector::from_column_slice(f.values());
    Field::new(v.as_slice().to_vec())
}

/// `2 int_0^t <mu, V_s(alpha V_{t-s}f V_{t-s}g)> ds`, the covariance of `<X_t, f>` and `<X_t, g>`.
#[allow(clippy::too_many_arguments)]
pub fn covariance_ref(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    f: &Field,
    g: &Field,
    t: f64,
) -> Result<f64> {
    let n = motion.n_states();
    for len in [alpha.len(), beta.len(), mu.len(), f.len(), g.len()] {
        check_dim(n, len)?;
    }
    alpha.ensure_nonnegative("alpha")?;
    check_time(t)?;
    if alpha.iter().all(|&a| a == 0.0) || t == 0.0 {
        return Ok(0.0);
    }
    let fv = DVector::from_column_slice(f.values());
    let gv = DVector::from_column_slice(g.values());
    let muv = DVector::from_column_slice(mu.masses());
    let integrand = |s: f64| -> Result<f64> {
        let late = linear_propagator(motion, beta, t - s);
        let vf = &late * &fv;
        let vg = &late * &gv;
        let inner = DVector::from_fn(n, |x, _| alpha[x] * vf[x] * vg[x]);
        let outer = linear_propagator(motion, beta, s) * inner;
        Ok(muv.dot(&outer))
    };
    let scale = {
        let v0 = integrand(0.0)?.abs() + integrand(t)?.abs();
        (v0 * t).max(1e-300)
    };
    let tol = 1e-8;
    let v = quad::integrate(integrand, 0.0, t, tol * scale, tol, 2000)?;
    Ok(2.0 * v)
}

/// Weighted triple `(Q^h, h alpha, beta + Qh/h)`.
pub fn weighted_model(motion: &MotionCtmc, alpha: &Field, beta: &Field, h: &Field) -> Result<(MotionCtmc, Field, Field)> {
    let n = motion.n_states();
    check_dim(n, alpha.len())?;
    check_dim(n, beta.len())?;
    check_dim(n, h.len())?;
    h.ensure_positive("weight h")?;
    let qh = h_transform(motion, h)?;
    let gh = apply_generator(motion, h)?;
    let a = Field::new((0..n).map(|x| h[x] * alpha[x]).collect())?;
    let b = Field::new((0..n).map(|x| beta[x] + gh[x] / h[x]).collect())?;
    Ok((qh, a, b))
}

/// `sup |U^h_t f - U_t(hf)/h|`, where `U^h` is the log-Laplace semigroup of the weighted triple.
pub fn verify_weighted_identity(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    h: &Field,
    f: &Field,
    t: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let (qh, ah, bh) = weighted_model(motion, alpha, beta, h)?;
    check_time(t)?;
    if t == 0.0 {
        // both sides are f
        return Ok(0.0);
    }
    let lhs = solve_loglaplace(&qh, &ah, &bh, f, t, opts)?.u;
    let hf = h.zip_with(f, |a, b| a * b)?;
    let rhs = solve_loglaplace(motion, alpha, beta, &hf, t, opts)?.u;
    let rhs = rhs.zip_with(h, |u, h| u / h)?;
    lhs.dist_inf(&rhs)
}

/// `gamma = -(Qh + beta h - alpha h^2)/h`; fails when some entry is below `-tol`.
pub fn gamma_from_h(motion: &MotionCtmc, alpha: &Field, beta: &Field, h: &Field, tol: f64) -> Result<Field> {
    let n = motion.n_states();
    check_dim(n, alpha.len())?;
    check_dim(n, beta.len())?;
    check_dim(n, h.len())?;
    h.ensure_positive("weight h")?;
    let r = stationary_residual(motion, alpha, beta, h)?;
    let mut gamma = Vec::with_capacity(n);
    for x in 0..n {
        let g = -r[x] / h[x];
        if g < -tol {
            return Err(Error::Inadmissible { state: x, gamma: g });
        }
        gamma.push(g.max(0.0));
    }
    Field::new(gamma)
}
