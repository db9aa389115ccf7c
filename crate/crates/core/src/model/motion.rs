use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{check_dim, Field};
use crate::error::{Error, Result};

/// Absolute tolerance on generator row sums, relative to the row's largest rate.
const ROW_SUM_TOL: f64 = 1e-10;

/// A conservative rate matrix: the generator of a finite continuous-time Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCtmc {
    q: DMatrix<f64>,
}

impl MotionCtmc {
    /// Validates off-diagonal nonnegativity and zero row sums.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::invalid(
                "rate matrix",
                format!("must be square and nonempty, got {}x{}", q.nrows(), q.ncols()),
            ));
        }
        let n = q.nrows();
        for x in 0..n {
            let mut scale: f64 = 0.0;
            let mut sum = 0.0;
            for y in 0..n {
                let r = q[(x, y)];
                if !r.is_finite() {
                    return Err(Error::invalid("rate matrix", format!("entry ({x}, {y}) is not finite")));
                }
                if x != y && r < 0.0 {
                    return Err(Error::invalid(
                        "rate matrix",
                        format!("off-diagonal entry ({x}, {y}) = {r} is negative"),
                    ));
                }
                scale = scale.max(r.abs());
                sum += r;
            }
            if sum.abs() > ROW_SUM_TOL * scale.max(1.0) {
                return Err(Error::invalid("rate matrix", format!("row {x} sums to {sum}, expected 0")));
            }
        }
        Ok(Self { q })
    }

    pub fn from_row_major(n: usize, rates: &[f64]) -> Result<Self> {
        if rates.len() != n * n {
            return Err(Error::invalid(
                "rate matrix",
                format!("expected {} entries for {n} states, got {}", n * n, rates.len()),
            ));
        }
        Self::new(DMatrix::from_row_slice(n, n, rates))
    }

    /// Builds the generator from off-diagonal rates; the diagonal is filled in.
    pub fn from_off_diagonal(n: usize, rates: &[f64]) -> Result<Self> {
        if rates.len() != n * n {
            return Err(Error::invalid("rate matrix", "wrong number of entries"));
        }
        let mut q = DMatrix::from_row_slice(n, n, rates);
        for x in 0..n {
            q[(x, x)] = 0.0;
            let out: f64 = (0..n).filter(|&y| y != x).map(|y| q[(x, y)]).sum();
            q[(x, x)] = -out;
        }
        Self::new(q)
    }

    /// A generator with independent Uniform(0, max_rate) off-diagonal rates.
    pub fn random<R: Rng + ?Sized>(n: usize, max_rate: f64, rng: &mut R) -> Self {
        let mut q = DMatrix::zeros(n, n);
        for x in 0..n {
            let mut out = 0.0;
            for y in 0..n {
                if x != y {
                    let r = rng.random::<f64>() * max_rate;
                    q[(x, y)] = r;
                    out += r;
                }
            }
            q[(x, x)] = -out;
        }
        Self { q }
    }

    /// The motion that never moves.
    pub fn still(n: usize) -> Self {
        Self { q: DMatrix::zeros(n, n) }
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.q[(x, y)]
    }

    /// Total jump rate out of `x`.
    pub fn exit_rate(&self, x: usize) -> f64 {
        -self.q[(x, x)]
    }

    /// `exp(t Q) f`.
    pub fn transition_apply(&self, t: f64, f: &Field) -> Result<Field> {
        check_dim(self.n_states(), f.len())?;
        let p = (&self.q * t).exp();
        Field::new((p * DVector::from_column_slice(f.values())).as_slice().to_vec())
    }

    /// Row `x` of `exp(t Q)`: the law of the chain at time `t` started from `x`.
    pub fn marginal(&self, x: usize, t: f64) -> Vec<f64> {
        let p = (&self.q * t).exp();
        p.row(x).iter().map(|v| v.max(0.0)).collect()
    }
}

/// `(Qf)(x) = sum_y Q_xy f(y)`.
pub fn apply_generator(motion: &MotionCtmc, f: &Field) -> Result<Field> {
    check_dim(motion.n_states(), f.len())?;
    let v = motion.matrix() * DVector::from_column_slice(f.values());
    Field::new(v.as_slice().to_vec())
}

/// Compensated h-transform: `Q^h_xy = Q_xy h(y) / h(x)` off the diagonal, rows summing to zero.
pub fn h_transform(motion: &MotionCtmc, h: &Field) -> Result<MotionCtmc> {
    check_dim(motion.n_states(), h.len())?;
    h.ensure_positive("weight h")?;
    let n = motion.n_states();
    let mut q = DMatrix::zeros(n, n);
    for x in 0..n {
        let mut out = 0.0;
        for y in 0..n {
            if y != x {
                let r = motion.rate(x, y) * h[y] / h[x];
                q[(x, y)] = r;
                out += r;
            }
        }
        q[(x, x)] = -out;
    }
    Ok(MotionCtmc { q })
}

/// A piecewise-constant, right-continuous path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    start: usize,
    jumps: Vec<(f64, usize)>,
    horizon: f64,
}

impl JumpPath {
    pub fn new(start: usize, jumps: Vec<(f64, usize)>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("path", format!("horizon {horizon} must be finite and nonnegative")));
        }
        let mut last = 0.0;
        for &(t, _) in &jumps {
            if !(t > last) || t > horizon {
                return Err(Error::invalid("path", format!("jump time {t} not strictly increasing in (0, {horizon}]")));
            }
            last = t;
        }
        Ok(Self { start, jumps, horizon })
    }

    pub fn constant(state: usize, horizon: f64) -> Self {
        Self { start: state, jumps: Vec::new(), horizon }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn end_state(&self) -> usize {
        self.jumps.last().map_or(self.start, |j| j.1)
    }

    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|j| j.0 <= t);
        if k == 0 {
            self.start
        } else {
            self.jumps[k - 1].1
        }
    }

    /// `(state, from, to)` for every constant piece.
    pub fn segments(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let mut state = self.start;
        let mut from = 0.0;
        self.jumps
            .iter()
            .map(Some)
            .chain(std::iter::once(None))
            .map(move |j| match j {
                Some(&(t, next)) => {
                    let seg = (state, from, t);
                    state = next;
                    from = t;
                    seg
                }
                None => (state, from, self.horizon),
            })
    }

    /// The path restricted to `[0, t]`.
    pub fn truncate(&self, t: f64) -> JumpPath {
        let t = t.min(self.horizon);
        JumpPath {
            start: self.start,
            jumps: self.jumps.iter().copied().filter(|j| j.0 <= t).collect(),
            horizon: t,
        }
    }

    /// Time spent in each state.
    pub fn occupation(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for (x, a, b) in self.segments() {
            occ[x] += b - a;
        }
        occ
    }

    pub(crate) fn push_jump(&mut self, t: f64, state: usize) {
        self.jumps.push((t, state));
    }

    pub(crate) fn set_horizon(&mut self, t: f64) {
        self.horizon = t;
    }
}

/// Likelihood ratio of the h-transformed chain against the original on `path`:
/// `h(w_T)/h(w_0) * exp(-int_0^T (Qh/h)(w_s) ds)`, integrated piece by piece.
pub fn girsanov_weight(motion: &MotionCtmc, h: &Field, path: &JumpPath) -> Result<f64> {
    check_dim(motion.n_states(), h.len())?;
    h.ensure_positive("weight h")?;
    if path.start >= h.len() || path.jumps.iter().any(|j| j.1 >= h.len()) {
        return Err(Error::invalid("path", "visits a state outside the motion's state space"));
    }
    let qh = apply_generator(motion, h)?;
    let integral: f64 = path.segments().map(|(x, a, b)| qh[x] / h[x] * (b - a)).sum();
    Ok(h[path.end_state()] / h[path.start] * (-integral).exp())
}

/// Exponential-clock simulation of the chain from `x` over `[0, horizon]`.
pub fn sample_ctmc_path<R: Rng + ?Sized>(
    motion: &MotionCtmc,
    x: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<JumpPath> {
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon", format!("{horizon} is negative")));
    }
    if x >= motion.n_states() {
        return Err(Error::invalid("start state", format!("{x} out of range")));
    }
    let mut path = JumpPath::constant(x, horizon);
    let mut state = x;
    let mut t = 0.0;
    loop {
        let rate = motion.exit_rate(state);
        if rate <= 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(rng);
        t += e / rate;
        if t > horizon {
            break;
        }
        state = choose_target(motion, state, rng.random::<f64>() * rate);
        path.push_jump(t, state);
    }
    path.set_horizon(horizon);
    Ok(path)
}

/// Picks `y != x` with probability `Q_xy / q_x` given `u` uniform on `[0, q_x)`.
pub(crate) fn choose_target(motion: &MotionCtmc, x: usize, mut u: f64) -> usize {
    let n = motion.n_states();
    let mut last = x;
    for y in 0..n {
        if y == x {
            continue;
        }
        let r = motion.rate(x, y);
        if r > 0.0 {
            last = y;
            if u < r {
                return y;
            }
            u -= r;
        }
    }
    last
}
