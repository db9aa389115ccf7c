//! Verifiers for the particle-system representations of a superprocess:
//! Poissonized embeddings, surviving-line (trimmed) trees, ancestor counts
//! and domination of the survival field.

mod report;
mod verify;

pub use report::{Check, CouplingReport};
pub use verify::{
    verify_ancestor_poisson, verify_dichotomy, verify_domination, verify_embedding, verify_h_transform, verify_moments,
    verify_poissonization, verify_trimmed_identity, AncestorSpec, DichotomySpec, MonteCarlo,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Field, MotionCtmc, PointMeasure};
use crate::semigroup::{u_infinity_finite, SolverOptions};
use crate::superproc::{ancestors, ancestors_beyond, project_ancestors, SuperTrajectory, TailSurvival};

/// Surviving lines: for each grid time `t`, the time-`t` particles with
/// descendants alive at the extraction horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimmedTree {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub sets: Vec<PointMeasure>,
}

impl TrimmedTree {
    pub fn counts(&self, k: usize, n_states: usize) -> Vec<u64> {
        self.sets[k].counts(n_states)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(|s| s.len()).collect()
    }

    /// Whether projecting each later set to each earlier grid time lands inside the earlier set.
    pub fn is_nested(&self, traj: &SuperTrajectory) -> Result<bool> {
        for j in 1..self.times.len() {
            for k in 0..j {
                let p = project_ancestors(traj, &self.sets[j], self.times[j], self.times[k])?;
                if !p.is_subset_of(&self.sets[k]) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Surviving lines with respect to a horizon `r` inside the simulated range.
pub fn extract_trimmed_tree(traj: &SuperTrajectory, t_grid: &[f64], r: f64) -> Result<TrimmedTree> {
    if let Some(&t) = t_grid.iter().find(|&&t| t > r) {
        return Err(Error::HorizonMargin { t, r, ratio: f64::INFINITY });
    }
    let sets = t_grid.iter().map(|&t| ancestors(traj, t, r)).collect::<Result<_>>()?;
    Ok(TrimmedTree {
        horizon: r,
        times: t_grid.to_vec(),
        sets,
    })
}

/// Surviving lines with respect to `traj.horizon + tail.extra_time`, using one
/// survival mark per particle alive at the end of the run.
pub fn extract_completed_tree(
    traj: &SuperTrajectory,
    t_grid: &[f64],
    tail: &TailSurvival,
    marks: &[f64],
) -> Result<TrimmedTree> {
    let sets = t_grid.iter().map(|&t| ancestors_beyond(traj, t, tail, marks)).collect::<Result<_>>()?;
    Ok(TrimmedTree {
        horizon: traj.horizon + tail.extra_time,
        times: t_grid.to_vec(),
        sets,
    })
}

/// `max |U_{r-t} inf - p| / min p`.
pub fn horizon_margin(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    p: &Field,
    t: f64,
    r: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    if r <= t {
        return Ok(f64::INFINITY);
    }
    let u = u_infinity_finite(motion, alpha, beta, r - t, opts)?;
    Ok(u.dist_inf(p)? / p.min())
}

/// Smallest `t + s`, `s` a power of two, whose margin is below `ratio`.
pub fn choose_horizon(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    p: &Field,
    t: f64,
    ratio: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let mut s = 1.0;
    for _ in 0..20 {
        if horizon_margin(motion, alpha, beta, p, t, t + s, opts)? < ratio {
            return Ok(t + s);
        }
        s *= 2.0;
    }
    Err(Error::HorizonMargin {
        t,
        r: t + s,
        ratio: horizon_margin(motion, alpha, beta, p, t, t + s, opts)?,
    })
}
