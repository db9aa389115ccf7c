use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Extended, MotionFlow1D};
use crate::ode::{self, OdeOptions};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Branching and drift rates of a superprocess over a one-dimensional flow.
#[derive(Clone)]
pub struct FlowParams {
    pub alpha: RealFn,
    pub beta: RealFn,
}

impl FlowParams {
    pub fn new(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            alpha: Arc::new(alpha),
            beta: Arc::new(beta),
        }
    }
}

impl std::fmt::Debug for FlowParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FlowParams")
    }
}

/// `U_t inf (x)` over a deterministic flow.
///
/// Along the trajectory `xi` from `x`, `w = 1/U_{t-s} inf (xi_s)` solves the
/// linear equation `w' = beta(xi) w - alpha(xi)` with `w(t) = 0`, so
/// `1/U_t inf (x) = int_0^t alpha(xi_r) exp(-int_0^r beta(xi)) dr`. The integral is
/// accumulated forward together with the trajectory. A result whose reciprocal
/// is at most the flow tolerance is flagged infinite.
pub fn flow_u_infinity(motion: &MotionFlow1D, params: &FlowParams, x: f64, t: f64) -> Result<Extended> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("time", format!("U_t inf needs finite t > 0, got {t}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::invalid("flow start", format!("{x} is outside [-1, 1]")));
    }
    let tol = motion.tolerance();
    let opts = OdeOptions {
        rtol: tol.min(1e-10),
        atol: 1e-14,
        max_step: f64::INFINITY,
        max_steps: 1_000_000,
    };
    // state: (xi, B = int beta(xi), W = int alpha(xi) e^{-B})
    let mut y = vec![x, 0.0, 0.0];
    ode::integrate(
        |y, d| {
            let xi = y[0].clamp(-1.0, 1.0);
            d[0] = motion.velocity(xi);
            d[1] = (params.beta)(xi);
            d[2] = (params.alpha)(xi) * (-y[1]).exp();
        },
        &mut y,
        t,
        &opts,
    )?;
    let w = y[2];
    if !w.is_finite() {
        return Err(Error::Solver {
            t,
            reason: "reciprocal integral overflowed".into(),
        });
    }
    if w <= tol {
        Ok(Extended::Infinite)
    } else {
        Ok(Extended::Finite(1.0 / w))
    }
}
