use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::engine::Recorder;
use crate::error::{Error, Result};
use crate::model::{IdSource, JumpPath, Particle, ParticleId, PointMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Birth,
    Jump,
    Split,
    Death,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Birth => "birth",
            EventKind::Jump => "jump",
            EventKind::Split => "split",
            EventKind::Death => "death",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "birth" => EventKind::Birth,
            "jump" => EventKind::Jump,
            "split" => EventKind::Split,
            "death" => EventKind::Death,
            _ => return None,
        })
    }
}

/// One line of the genealogy log.
///
/// Births carry the splitting parent (none for initial particles); a split
/// ends the particle `id` at `state` and is followed by the two child births.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenealogyEvent {
    pub time: f64,
    pub kind: EventKind,
    pub id: ParticleId,
    pub parent: Option<ParticleId>,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Life {
    parent: Option<ParticleId>,
    birth: f64,
    birth_state: usize,
    jumps: Vec<(f64, usize)>,
    end: Option<f64>,
}

/// The complete history of a particle system run.
#[derive(Debug, Clone, PartialEq)]
pub struct Genealogy {
    initial: PointMeasure,
    events: Vec<GenealogyEvent>,
    horizon: f64,
    n_states: usize,
    lives: HashMap<ParticleId, Life>,
}

impl Genealogy {
    /// Rebuilds a genealogy from its event log, checking consistency.
    pub fn from_events(n_states: usize, horizon: f64, events: Vec<GenealogyEvent>) -> Result<Self> {
        let mut lives: HashMap<ParticleId, Life> = HashMap::new();
        let mut initial = Vec::new();
        let mut last = 0.0;
        let bad = |msg: String| Error::invalid("genealogy", msg);
        for e in &events {
            if e.time < last {
                return Err(bad(format!("event times decrease at id {}", e.id)));
            }
            last = e.time;
            if e.state >= n_states {
                return Err(bad(format!("state {} out of range", e.state)));
            }
            match e.kind {
                EventKind::Birth => {
                    if lives.contains_key(&e.id) {
                        return Err(bad(format!("id {} born twice", e.id)));
                    }
                    match e.parent {
                        None if e.time == 0.0 => initial.push(Particle { state: e.state, id: e.id }),
                        None => return Err(bad(format!("non-initial particle {} has no parent", e.id))),
                        Some(p) => {
                            let pl = lives.get(&p).ok_or_else(|| bad(format!("unknown parent {p}")))?;
                            if pl.end != Some(e.time) {
                                return Err(bad(format!("parent {p} did not split at {}", e.time)));
                            }
                        }
                    }
                    lives.insert(
                        e.id,
                        Life {
                            parent: e.parent,
                            birth: e.time,
                            birth_state: e.state,
                            jumps: Vec::new(),
                            end: None,
                        },
                    );
                }
                EventKind::Jump | EventKind::Split | EventKind::Death => {
                    let life = lives.get_mut(&e.id).ok_or(Error::UnknownParticle(e.id))?;
                    if life.end.is_some() {
                        return Err(bad(format!("particle {} acts after its end", e.id)));
                    }
                    if e.kind == EventKind::Jump {
                        life.jumps.push((e.time, e.state));
                    } else {
                        life.end = Some(e.time);
                    }
                }
            }
        }
        if last > horizon {
            return Err(bad(format!("event at {last} beyond horizon {horizon}")));
        }
        Ok(Self {
            initial: PointMeasure::from_particles(initial)?,
            events,
            horizon,
            n_states,
            lives,
        })
    }

    pub fn initial(&self) -> &PointMeasure {
        &self.initial
    }

    pub fn events(&self) -> &[GenealogyEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of particles that ever lived.
    pub fn n_particles(&self) -> usize {
        self.lives.len()
    }

    fn state_of(life: &Life, t: f64) -> usize {
        let k = life.jumps.partition_point(|j| j.0 <= t);
        if k == 0 {
            life.birth_state
        } else {
            life.jumps[k - 1].1
        }
    }

    /// Parent id and birth time of a particle.
    pub fn birth_of(&self, id: ParticleId) -> Result<(Option<ParticleId>, f64)> {
        let l = self.lives.get(&id).ok_or(Error::UnknownParticle(id))?;
        Ok((l.parent, l.birth))
    }

    /// Particles alive at `t` with their states.
    pub fn alive_at(&self, t: f64) -> Result<PointMeasure> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let particles = self
            .lives
            .iter()
            .filter(|(_, l)| l.birth <= t && l.end.is_none_or(|e| e > t))
            .map(|(&id, l)| Particle { state: Self::state_of(l, t), id })
            .collect();
        PointMeasure::from_particles(particles)
    }

    /// The ancestor of `id` that was alive at time `t`.
    pub fn ancestor_at(&self, id: ParticleId, t: f64) -> Result<ParticleId> {
        let mut cur = id;
        loop {
            let l = self.lives.get(&cur).ok_or(Error::UnknownParticle(cur))?;
            if l.birth <= t {
                if l.end.is_some_and(|e| e <= t) {
                    return Err(Error::invalid("lineage", format!("particle {id} has no ancestor alive at {t}")));
                }
                return Ok(cur);
            }
            cur = l.parent.ok_or_else(|| Error::invalid("lineage", format!("particle {id} was not yet founded at {t}")))?;
        }
    }

    /// The ancestral trajectory of `id` on `[0, t]`: the founding ancestor's path
    /// followed by each descendant's moves down to the line's member at `t`.
    pub fn lineage_prefix(&self, id: ParticleId, t: f64) -> Result<JumpPath> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let mut chain = Vec::new();
        let mut cur = Some(self.ancestor_at(id, t)?);
        while let Some(c) = cur {
            let l = &self.lives[&c];
            chain.push(l);
            cur = l.parent;
        }
        let root = chain.last().unwrap();
        let mut jumps = Vec::new();
        for l in chain.iter().rev() {
            jumps.extend(l.jumps.iter().copied().filter(|j| j.0 <= t));
        }
        JumpPath::new(root.birth_state, jumps, t)
    }

    /// The event log as CSV text with a header row.
    pub fn to_log(&self) -> String {
        let mut out = String::from("time,kind,id,parent,state\n");
        for e in &self.events {
            let parent = e.parent.map_or_else(|| "-".to_string(), |p| p.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", e.time, e.kind.as_str(), e.id, parent, e.state);
        }
        out
    }

    /// Parses a log produced by [`Genealogy::to_log`].
    pub fn from_log(text: &str, n_states: usize, horizon: f64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        match lines.next() {
            Some("time,kind,id,parent,state") => {}
            other => return Err(Error::invalid("event log", format!("unexpected header {other:?}"))),
        }
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = || Error::invalid("event log", format!("malformed record {}: {line:?}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            events.push(GenealogyEvent {
                time: f[0].parse().map_err(|_| bad())?,
                kind: EventKind::parse(f[1]).ok_or_else(bad)?,
                id: f[2].parse().map_err(|_| bad())?,
                parent: if f[3] == "-" { None } else { Some(f[3].parse().map_err(|_| bad())?) },
                state: f[4].parse().map_err(|_| bad())?,
            });
        }
        Self::from_events(n_states, horizon, events)
    }
}

/// Records every event with particle ids.
pub(crate) struct FullRecorder {
    pub ids: IdSource,
    pub events: Vec<GenealogyEvent>,
    /// States of the initial particles, consumed in order by `initial`.
    pub initial_ids: std::vec::IntoIter<ParticleId>,
}

impl Recorder for FullRecorder {
    type Payload = ParticleId;

    fn initial(&mut self, state: usize) -> ParticleId {
        let id = self.initial_ids.next().unwrap_or_else(|| self.ids.fresh());
        self.events.push(GenealogyEvent {
            time: 0.0,
            kind: EventKind::Birth,
            id,
            parent: None,
            state,
        });
        id
    }

    fn jump(&mut self, t: f64, p: &mut ParticleId, to: usize) {
        self.events.push(GenealogyEvent {
            time: t,
            kind: EventKind::Jump,
            id: *p,
            parent: None,
            state: to,
        });
    }

    fn split(&mut self, t: f64, parent: ParticleId, state: usize) -> (ParticleId, ParticleId) {
        self.events.push(GenealogyEvent {
            time: t,
            kind: EventKind::Split,
            id: parent,
            parent: None,
            state,
        });
        let a = self.ids.fresh();
        let b = self.ids.fresh();
        for id in [a, b] {
            self.events.push(GenealogyEvent {
                time: t,
                kind: EventKind::Birth,
                id,
                parent: Some(parent),
                state,
            });
        }
        (a, b)
    }

    fn death(&mut self, t: f64, p: ParticleId, state: usize) {
        self.events.push(GenealogyEvent {
            time: t,
            kind: EventKind::Death,
            id: p,
            parent: None,
            state,
        });
    }
}
