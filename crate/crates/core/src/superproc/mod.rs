//! Superprocess approximation by particles of mass `1/N`, a square-root
//! diffusion cross-check, reweighting, and ancestor sets.

mod sde;

pub use sde::simulate_super_sde;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dim, poisson_count, Field, IdSource, Measure, MotionCtmc, Particle, PointMeasure};
use crate::particles::{
    simulate_counts, simulate_genealogy, simulate_lineage, BranchingSystem, CheckpointLineage, Genealogy, RunLimits,
};
use crate::semigroup::{solve_generating, SolverOptions};

/// How much of the genealogy a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracking {
    /// Per-state counts on the grid.
    Counts,
    /// Ancestry between grid times.
    Checkpoints,
    /// Every event.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperConfig {
    /// Particles per unit mass.
    pub n: u32,
    pub horizon: f64,
    /// Observation times in `[0, horizon]`, sorted.
    pub grid: Vec<f64>,
    pub tracking: Tracking,
    pub limits: RunLimits,
    /// End a run early once its total mass exceeds this value.
    pub stop_mass: Option<f64>,
}

impl SuperConfig {
    pub fn new(n: u32, horizon: f64, grid: Vec<f64>) -> Self {
        Self {
            n,
            horizon,
            grid,
            tracking: Tracking::Counts,
            limits: RunLimits::default(),
            stop_mass: None,
        }
    }

    pub fn with_tracking(mut self, tracking: Tracking) -> Self {
        self.tracking = tracking;
        self
    }

    pub fn with_stop_mass(mut self, mass: f64) -> Self {
        self.stop_mass = Some(mass);
        self
    }

    pub fn with_limits(mut self, limits: RunLimits) -> Self {
        self.limits = limits;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        if self.grid.windows(2).any(|w| w[1] < w[0]) || self.grid.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(Error::invalid("time grid", "must be sorted and inside [0, horizon]"));
        }
        Ok(())
    }
}

/// The particle system whose mass-`1/N` empirical measure approximates the
/// `(Q, alpha, beta)`-superprocess: split rate `N alpha + beta+`, death rate `N alpha + beta-`.
pub fn approximating_system(motion: &MotionCtmc, alpha: &Field, beta: &Field, n: u32) -> Result<BranchingSystem> {
    check_dim(motion.n_states(), alpha.len())?;
    check_dim(motion.n_states(), beta.len())?;
    alpha.ensure_nonnegative("alpha")?;
    let nf = n as f64;
    let b = Field::new(alpha.iter().zip(beta.iter()).map(|(a, b)| nf * a + b.max(0.0)).collect())?;
    let d = Field::new(alpha.iter().zip(beta.iter()).map(|(a, b)| nf * a + (-b).max(0.0)).collect())?;
    BranchingSystem::new(motion.clone(), b, d)
}

/// One simulated superprocess path.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperTrajectory {
    pub n: u32,
    pub horizon: f64,
    pub grid: Vec<f64>,
    /// Per-state particle counts at each grid time reached.
    pub counts: Vec<Vec<u64>>,
    pub initial_counts: Vec<u64>,
    pub final_counts: Vec<u64>,
    pub events: u64,
    /// Time at which the stop mass was exceeded.
    pub stopped: Option<f64>,
    pub lineage: Option<CheckpointLineage>,
    pub genealogy: Option<Genealogy>,
}

impl SuperTrajectory {
    /// `X` at grid index `k`.
    pub fn mass_at(&self, k: usize) -> Result<Measure> {
        let c = self.counts.get(k).ok_or_else(|| Error::invalid("grid index", format!("{k} not observed")))?;
        Measure::new(c.iter().map(|&c| c as f64 / self.n as f64).collect())
    }

    /// Total count over N, exact for any split of the count across states.
    pub fn total_mass_at(&self, k: usize) -> Result<f64> {
        let c = self.counts.get(k).ok_or_else(|| Error::invalid("grid index", format!("{k} not observed")))?;
        Ok(c.iter().sum::<u64>() as f64 / self.n as f64)
    }

    pub fn final_mass(&self) -> f64 {
        self.final_counts.iter().sum::<u64>() as f64 / self.n as f64
    }

    pub fn is_extinct(&self) -> bool {
        self.stopped.is_none() && self.final_counts.iter().all(|&c| c == 0)
    }
}

/// Simulates the mass-`1/N` approximation from `Pois(N mu)` initial particles.
pub fn simulate_super<R: Rng + ?Sized>(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    cfg: &SuperConfig,
    rng: &mut R,
) -> Result<SuperTrajectory> {
    cfg.validate()?;
    check_dim(motion.n_states(), mu.len())?;
    let sys = approximating_system(motion, alpha, beta, cfg.n)?;
    let initial: Vec<u64> = mu.masses().iter().map(|&m| poisson_count(cfg.n as f64 * m, rng)).collect();
    simulate_from_counts(&sys, cfg, initial, rng)
}

/// Runs an approximating system from given initial counts.
pub fn simulate_from_counts<R: Rng + ?Sized>(
    sys: &BranchingSystem,
    cfg: &SuperConfig,
    initial: Vec<u64>,
    rng: &mut R,
) -> Result<SuperTrajectory> {
    cfg.validate()?;
    let mut limits = cfg.limits;
    if let Some(m) = cfg.stop_mass {
        limits.stop_population = Some((m * cfg.n as f64).floor() as usize);
    }
    let mut traj = SuperTrajectory {
        n: cfg.n,
        horizon: cfg.horizon,
        grid: cfg.grid.clone(),
        counts: Vec::new(),
        initial_counts: initial.clone(),
        final_counts: Vec::new(),
        events: 0,
        stopped: None,
        lineage: None,
        genealogy: None,
    };
    match cfg.tracking {
        Tracking::Counts => {
            let p = simulate_counts(sys, &initial, cfg.horizon, &cfg.grid, &limits, rng)?;
            traj.counts = p.counts;
            traj.final_counts = p.final_counts;
            traj.events = p.events;
            traj.stopped = p.stopped;
        }
        Tracking::Checkpoints => {
            let (p, lin) = simulate_lineage(sys, &initial, cfg.horizon, &cfg.grid, &limits, rng)?;
            traj.counts = p.counts;
            traj.final_counts = p.final_counts;
            traj.events = p.events;
            traj.stopped = p.stopped;
            traj.lineage = Some(lin);
        }
        Tracking::Full => {
            let nu0 = PointMeasure::from_counts(&initial, &mut IdSource::new());
            let g = simulate_genealogy(sys, &nu0, cfg.horizon, &limits, rng)?;
            let n = sys.n_states();
            traj.counts = cfg.grid.iter().map(|&t| g.alive_at(t).map(|a| a.counts(n))).collect::<Result<_>>()?;
            traj.final_counts = g.alive_at(cfg.horizon)?.counts(n);
            traj.events = g.events().len() as u64;
            traj.genealogy = Some(g);
        }
    }
    Ok(traj)
}

/// `hX`: the measure with masses `h(x) X(x)`.
pub fn reweight(x: &Measure, h: &Field) -> Result<Measure> {
    h.ensure_positive("weight h")?;
    x.weighted(h)
}

fn grid_index(traj: &SuperTrajectory, t: f64) -> Result<usize> {
    traj.grid
        .iter()
        .position(|&g| g == t)
        .ok_or_else(|| Error::invalid("time", format!("{t} is not a grid time of this trajectory")))
}

/// The distinct time-`t` ancestors of the time-`r` population, each once, as
/// particles `(state at t, id)`. With checkpoint tracking both times must be
/// grid times; ids are then checkpoint node indices.
pub fn ancestors(traj: &SuperTrajectory, t: f64, r: f64) -> Result<PointMeasure> {
    if !(0.0 <= t && t <= r && r <= traj.horizon) {
        return Err(Error::TimeOutOfRange { t: r, horizon: traj.horizon });
    }
    if let Some(g) = &traj.genealogy {
        let alive_t = g.alive_at(t)?;
        let mut ids: Vec<u64> = g.alive_at(r)?.ids().map(|id| g.ancestor_at(id, t)).collect::<Result<_>>()?;
        ids.sort_unstable();
        ids.dedup();
        let particles = ids
            .into_iter()
            .map(|id| {
                let i = alive_t
                    .particles()
                    .binary_search_by_key(&id, |p| p.id)
                    .map_err(|_| Error::UnknownParticle(id))?;
                Ok(alive_t.particles()[i])
            })
            .collect::<Result<_>>()?;
        return PointMeasure::from_particles(particles);
    }
    let lin = traj
        .lineage
        .as_ref()
        .ok_or_else(|| Error::invalid("trajectory", "ancestry was not tracked"))?;
    let k = grid_index(traj, t)?;
    let j = grid_index(traj, r)?;
    if j >= lin.n_levels() {
        return Err(Error::invalid("trajectory", format!("run stopped before {r}")));
    }
    node_measure(lin, lin.ancestors_of(lin.level_range(j), j, k))
}

/// Maps a set of time-`from` particles (as returned by [`ancestors`]) to
/// their distinct time-`to` ancestors, `to <= from`.
pub fn project_ancestors(traj: &SuperTrajectory, set: &PointMeasure, from: f64, to: f64) -> Result<PointMeasure> {
    if !(0.0 <= to && to <= from && from <= traj.horizon) {
        return Err(Error::TimeOutOfRange { t: to, horizon: traj.horizon });
    }
    if let Some(g) = &traj.genealogy {
        let alive = g.alive_at(to)?;
        let mut ids: Vec<u64> = set.ids().map(|id| g.ancestor_at(id, to)).collect::<Result<_>>()?;
        ids.sort_unstable();
        ids.dedup();
        let particles = ids
            .into_iter()
            .map(|id| {
                let i = alive.particles().binary_search_by_key(&id, |p| p.id).map_err(|_| Error::UnknownParticle(id))?;
                Ok(alive.particles()[i])
            })
            .collect::<Result<_>>()?;
        return PointMeasure::from_particles(particles);
    }
    let lin = traj
        .lineage
        .as_ref()
        .ok_or_else(|| Error::invalid("trajectory", "ancestry was not tracked"))?;
    let j = grid_index(traj, from)?;
    let k = grid_index(traj, to)?;
    if set.ids().any(|id| !lin.level_range(j).contains(&(id as usize))) {
        return Err(Error::invalid("ancestor set", format!("contains nodes not alive at {from}")));
    }
    node_measure(lin, lin.ancestors_of(set.ids().map(|id| id as usize), j, k))
}

fn node_measure(lin: &CheckpointLineage, nodes: Vec<usize>) -> Result<PointMeasure> {
    PointMeasure::from_particles(
        nodes
            .into_iter()
            .map(|n| Particle {
                state: lin.state(n),
                id: n as u64,
            })
            .collect(),
    )
}

/// Survival of lines past the simulated horizon.
///
/// A particle alive at the horizon `T` has descendants alive at `R > T` with
/// probability `q(x) = U_{R-T} 1 (x)` for the generating semigroup of the
/// approximating system, independently of all other particles. Marking each
/// particle with one uniform and keeping it when the mark is below `q` extends
/// ancestor sets to `R` exactly in law; using the same marks for several `R`
/// keeps the extended sets nested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSurvival {
    pub extra_time: f64,
    pub q: Field,
}

impl TailSurvival {
    pub fn new(motion: &MotionCtmc, alpha: &Field, beta: &Field, n: u32, extra_time: f64, opts: &SolverOptions) -> Result<Self> {
        let sys = approximating_system(motion, alpha, beta, n)?;
        let one = Field::constant(motion.n_states(), 1.0);
        let q = solve_generating(sys.motion(), sys.birth(), sys.death(), &one, extra_time, opts)?.u;
        Ok(Self { extra_time, q })
    }
}

/// One uniform mark per particle alive at the last checkpoint.
pub fn tail_marks<R: Rng + ?Sized>(traj: &SuperTrajectory, rng: &mut R) -> Result<Vec<f64>> {
    let lin = traj
        .lineage
        .as_ref()
        .ok_or_else(|| Error::invalid("trajectory", "ancestry was not tracked"))?;
    let last = lin.n_levels().checked_sub(1).ok_or_else(|| Error::invalid("trajectory", "no checkpoints"))?;
    Ok((0..lin.level_len(last)).map(|_| rng.random::<f64>()).collect())
}

/// Time-`t` ancestors of the population at `T + tail.extra_time`, where `T` is
/// the last checkpoint, which must equal the horizon.
pub fn ancestors_beyond(traj: &SuperTrajectory, t: f64, tail: &TailSurvival, marks: &[f64]) -> Result<PointMeasure> {
    let lin = traj
        .lineage
        .as_ref()
        .ok_or_else(|| Error::invalid("trajectory", "ancestry was not tracked"))?;
    let last = lin.n_levels().checked_sub(1).ok_or_else(|| Error::invalid("trajectory", "no checkpoints"))?;
    if traj.stopped.is_some() || lin.times()[last] != traj.horizon {
        return Err(Error::invalid("trajectory", "the last checkpoint must be the horizon"));
    }
    let range = lin.level_range(last);
    if marks.len() != range.len() {
        return Err(Error::invalid("tail marks", format!("expected {}, got {}", range.len(), marks.len())));
    }
    let k = grid_index(traj, t)?;
    let survivors = range.zip(marks).filter(|(node, &u)| u < tail.q[lin.state(*node)]).map(|(node, _)| node);
    node_measure(lin, lin.ancestors_of(survivors, last, k))
}

#[cfg(test)]
mod tests;
