//! Exact simulation of binary branching Markov particle systems.
//!
//! Particles are grouped by state. Every particle at `x` carries independent
//! exponential clocks for jumping (rate `q_x`), splitting (`b(x)`) and dying
//! (`d(x)`), so the next event time is exponential with the total rate and the
//! acting particle is chosen proportionally to its rate. One uniform draw picks
//! the state, the particle within the state, the kind of event and, for jumps,
//! the target.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::BranchingSystem;
use crate::error::{Error, Result};
use crate::model::motion_choose_target;

/// Event and population budgets for one run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunLimits {
    pub max_events: u64,
    pub max_population: usize,
    /// Stop early, without error, once the population exceeds this size.
    pub stop_population: Option<usize>,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            max_events: 2_000_000_000,
            max_population: 1_000_000,
            stop_population: None,
        }
    }
}

/// Hooks that give particles a payload and see every event.
pub(crate) trait Recorder {
    type Payload: Copy;
    fn initial(&mut self, state: usize) -> Self::Payload;
    fn jump(&mut self, _t: f64, _p: &mut Self::Payload, _to: usize) {}
    fn split(&mut self, t: f64, parent: Self::Payload, state: usize) -> (Self::Payload, Self::Payload);
    fn death(&mut self, _t: f64, _p: Self::Payload, _state: usize) {}
    fn observe(&mut self, _k: usize, _t: f64, _population: &mut [Vec<Self::Payload>]) {}
}

/// Counts-only recording.
pub(crate) struct NoRecord;

impl Recorder for NoRecord {
    type Payload = ();
    fn initial(&mut self, _state: usize) {}
    fn split(&mut self, _t: f64, _p: (), _state: usize) -> ((), ()) {
        ((), ())
    }
}

/// What a run produced besides the recorder's own data.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RunSummary {
    /// Per-state counts at each observation time reached.
    pub counts: Vec<Vec<u64>>,
    pub events: u64,
    /// Time at which the stop population was exceeded.
    pub stopped: Option<f64>,
    pub final_counts: Vec<u64>,
}

pub(crate) fn run<Rec: Recorder, R: Rng + ?Sized>(
    sys: &BranchingSystem,
    initial: &[usize],
    horizon: f64,
    obs_times: &[f64],
    limits: &RunLimits,
    rec: &mut Rec,
    rng: &mut R,
) -> Result<RunSummary> {
    let n = sys.n_states();
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon", format!("{horizon} must be finite and nonnegative")));
    }
    if obs_times.windows(2).any(|w| w[1] < w[0]) || obs_times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::invalid("observation times", "must be sorted and inside [0, horizon]"));
    }
    let q: Vec<f64> = (0..n).map(|x| sys.motion().exit_rate(x)).collect();
    let b = sys.birth().values();
    let d = sys.death().values();
    let rate: Vec<f64> = (0..n).map(|x| q[x] + b[x] + d[x]).collect();

    let mut pop: Vec<Vec<Rec::Payload>> = vec![Vec::new(); n];
    for &x in initial {
        if x >= n {
            return Err(Error::invalid("initial particle", format!("state {x} out of range")));
        }
        pop[x].push(rec.initial(x));
    }
    let mut total: usize = initial.len();
    let mut summary = RunSummary {
        counts: Vec::with_capacity(obs_times.len()),
        events: 0,
        stopped: None,
        final_counts: Vec::new(),
    };
    let mut next_obs = 0;
    let mut t = 0.0;
    let observe_until = |until: f64, pop: &mut [Vec<Rec::Payload>], rec: &mut Rec, summary: &mut RunSummary, next_obs: &mut usize| {
        while *next_obs < obs_times.len() && obs_times[*next_obs] <= until {
            summary.counts.push(pop.iter().map(|v| v.len() as u64).collect());
            rec.observe(*next_obs, obs_times[*next_obs], pop);
            *next_obs += 1;
        }
    };
    if total > limits.max_population {
        return Err(Error::PopulationCap { cap: limits.max_population, t });
    }
    loop {
        if let Some(stop) = limits.stop_population {
            if total > stop {
                observe_until(t, &mut pop, rec, &mut summary, &mut next_obs);
                summary.stopped = Some(t);
                break;
            }
        }
        let total_rate: f64 = (0..n).map(|x| pop[x].len() as f64 * rate[x]).sum();
        if total_rate <= 0.0 {
            observe_until(horizon, &mut pop, rec, &mut summary, &mut next_obs);
            break;
        }
        let e: f64 = Exp1.sample(rng);
        let t_next = t + e / total_rate;
        if t_next > horizon {
            observe_until(horizon, &mut pop, rec, &mut summary, &mut next_obs);
            break;
        }
        observe_until(t_next, &mut pop, rec, &mut summary, &mut next_obs);
        t = t_next;
        if summary.events >= limits.max_events {
            return Err(Error::EventCap { cap: limits.max_events, t });
        }
        summary.events += 1;

        let mut u = rng.random::<f64>() * total_rate;
        let mut x = n;
        for y in 0..n {
            let w = pop[y].len() as f64 * rate[y];
            if w > 0.0 {
                x = y;
                if u < w {
                    break;
                }
                u -= w;
            }
        }
        let len = pop[x].len();
        let slot = ((u / rate[x]) as usize).min(len - 1);
        let v = (u - slot as f64 * rate[x]).clamp(0.0, rate[x]);
        if v < q[x] {
            let to = motion_choose_target(sys.motion(), x, v);
            let mut p = pop[x].swap_remove(slot);
            rec.jump(t, &mut p, to);
            pop[to].push(p);
        } else if v < q[x] + b[x] {
            let p = pop[x].swap_remove(slot);
            let (c1, c2) = rec.split(t, p, x);
            pop[x].push(c1);
            pop[x].push(c2);
            total += 1;
            if total > limits.max_population {
                return Err(Error::PopulationCap { cap: limits.max_population, t });
            }
        } else {
            let p = pop[x].swap_remove(slot);
            rec.death(t, p, x);
            total -= 1;
        }
    }
    summary.final_counts = pop.iter().map(|v| v.len() as u64).collect();
    Ok(summary)
}
