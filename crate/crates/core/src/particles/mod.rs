//! Binary branching Markov particle systems `(Q, b, d)` with genealogy.

mod engine;
mod genealogy;
mod lineage;

pub use engine::RunLimits;
pub use genealogy::{EventKind, Genealogy, GenealogyEvent};
pub use lineage::CheckpointLineage;

pub(crate) use engine::{run, NoRecord};
pub(crate) use lineage::LineageRecorder;

use rand::Rng;

use crate::error::Result;
use crate::model::{check_dim, Field, IdSource, JumpPath, MotionCtmc, ParticleId, PointMeasure};
use genealogy::FullRecorder;

/// A particle system: motion `Q`, split rate `b`, death rate `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingSystem {
    motion: MotionCtmc,
    birth: Field,
    death: Field,
}

impl BranchingSystem {
    pub fn new(motion: MotionCtmc, birth: Field, death: Field) -> Result<Self> {
        check_dim(motion.n_states(), birth.len())?;
        check_dim(motion.n_states(), death.len())?;
        birth.ensure_nonnegative("split rate")?;
        death.ensure_nonnegative("death rate")?;
        Ok(Self { motion, birth, death })
    }

    pub fn n_states(&self) -> usize {
        self.motion.n_states()
    }

    pub fn motion(&self) -> &MotionCtmc {
        &self.motion
    }

    pub fn birth(&self) -> &Field {
        &self.birth
    }

    pub fn death(&self) -> &Field {
        &self.death
    }
}

/// Per-state counts of a run observed on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPath {
    pub times: Vec<f64>,
    /// `counts[k][x]` at `times[k]`; shorter than `times` when the run stopped early.
    pub counts: Vec<Vec<u64>>,
    pub events: u64,
    /// Time at which the population exceeded the stop threshold.
    pub stopped: Option<f64>,
    pub final_counts: Vec<u64>,
}

fn states_of(counts: &[u64]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(x, &c)| std::iter::repeat_n(x, c as usize))
        .collect()
}

/// Runs the system from per-state initial counts, recording only counts.
pub fn simulate_counts<R: Rng + ?Sized>(
    sys: &BranchingSystem,
    initial: &[u64],
    horizon: f64,
    obs_times: &[f64],
    limits: &RunLimits,
    rng: &mut R,
) -> Result<CountPath> {
    check_dim(sys.n_states(), initial.len())?;
    let s = run(sys, &states_of(initial), horizon, obs_times, limits, &mut NoRecord, rng)?;
    Ok(CountPath {
        times: obs_times.to_vec(),
        counts: s.counts,
        events: s.events,
        stopped: s.stopped,
        final_counts: s.final_counts,
    })
}

/// Runs the system recording ancestry at the observation times.
pub fn simulate_lineage<R: Rng + ?Sized>(
    sys: &BranchingSystem,
    initial: &[u64],
    horizon: f64,
    checkpoints: &[f64],
    limits: &RunLimits,
    rng: &mut R,
) -> Result<(CountPath, CheckpointLineage)> {
    check_dim(sys.n_states(), initial.len())?;
    let mut rec = LineageRecorder::new();
    let s = run(sys, &states_of(initial), horizon, checkpoints, limits, &mut rec, rng)?;
    let path = CountPath {
        times: checkpoints.to_vec(),
        counts: s.counts,
        events: s.events,
        stopped: s.stopped,
        final_counts: s.final_counts,
    };
    Ok((path, rec.lineage))
}

/// Runs the system from `nu0` on `[0, horizon]`, recording the full genealogy.
pub fn simulate_bbps<R: Rng + ?Sized>(
    motion: &MotionCtmc,
    b: &Field,
    d: &Field,
    nu0: &PointMeasure,
    horizon: f64,
    limits: &RunLimits,
    rng: &mut R,
) -> Result<Genealogy> {
    let sys = BranchingSystem::new(motion.clone(), b.clone(), d.clone())?;
    simulate_genealogy(&sys, nu0, horizon, limits, rng)
}

pub fn simulate_genealogy<R: Rng + ?Sized>(
    sys: &BranchingSystem,
    nu0: &PointMeasure,
    horizon: f64,
    limits: &RunLimits,
    rng: &mut R,
) -> Result<Genealogy> {
    let n = sys.n_states();
    if let Some(p) = nu0.particles().iter().find(|p| p.state >= n) {
        check_dim(n, p.state + 1)?;
    }
    let next = nu0.ids().max().map_or(0, |m| m + 1);
    let mut rec = FullRecorder {
        ids: IdSource::starting_at(next),
        events: Vec::new(),
        initial_ids: nu0.ids().collect::<Vec<_>>().into_iter(),
    };
    let states: Vec<usize> = nu0.particles().iter().map(|p| p.state).collect();
    run(sys, &states, horizon, &[], limits, &mut rec, rng)?;
    Genealogy::from_events(n, horizon, rec.events)
}

/// The particles alive at `t`.
pub fn alive_at(g: &Genealogy, t: f64) -> Result<PointMeasure> {
    g.alive_at(t)
}

/// The ancestral path of particle `id` on `[0, t]`.
pub fn lineage_prefix(g: &Genealogy, id: ParticleId, t: f64) -> Result<JumpPath> {
    g.lineage_prefix(id, t)
}

#[cfg(test)]
mod tests;
