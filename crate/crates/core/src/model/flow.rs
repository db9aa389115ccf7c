use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A deterministic motion on `[-1, 1]` driven by `x' = v(x)`.
#[derive(Clone)]
pub struct MotionFlow1D {
    velocity: RealFn,
    tolerance: f64,
}

impl MotionFlow1D {
    /// `velocity` must be locally Lipschitz on `[-1, 1]` and must not push the
    /// flow out of the interval.
    pub fn new(velocity: impl Fn(f64) -> f64 + Send + Sync + 'static, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::invalid("flow tolerance", "must be positive"));
        }
        Ok(Self {
            velocity: Arc::new(velocity),
            tolerance,
        })
    }

    /// The motion that stays put.
    pub fn frozen(tolerance: f64) -> Result<Self> {
        Self::new(|_| 0.0, tolerance)
    }

    pub fn velocity(&self, x: f64) -> f64 {
        (self.velocity)(x)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

impl fmt::Debug for MotionFlow1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MotionFlow1D").field("tolerance", &self.tolerance).finish_non_exhaustive()
    }
}
