use serde::{Deserialize, Serialize};

use super::engine::Recorder;

/// No ancestor recorded.
pub(crate) const ROOT: u32 = u32::MAX;

/// Genealogy compressed to checkpoint times.
///
/// At checkpoint `k` every alive particle becomes a node whose parent is the
/// node of its ancestor at checkpoint `k - 1`. Nodes of one level are exactly
/// the particles alive at that checkpoint, so the distinct time-`t_k`
/// ancestors of the time-`t_j` population are found by walking up `j - k`
/// levels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLineage {
    times: Vec<f64>,
    level_start: Vec<usize>,
    parent: Vec<u32>,
    state: Vec<u16>,
}

impl CheckpointLineage {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    pub fn level_len(&self, k: usize) -> usize {
        self.level_range(k).len()
    }

    pub(crate) fn level_range(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.level_start.get(k + 1).copied().unwrap_or(self.parent.len());
        self.level_start[k]..end
    }

    pub fn state(&self, node: usize) -> usize {
        self.state[node] as usize
    }

    /// Ancestor node at level `k` of `node`, which lives on level `j >= k`.
    pub(crate) fn ancestor(&self, mut node: usize, j: usize, k: usize) -> Option<usize> {
        for _ in k..j {
            let p = self.parent[node];
            if p == ROOT {
                return None;
            }
            node = p as usize;
        }
        Some(node)
    }

    /// Distinct level-`k` ancestors of the given level-`j` nodes, sorted.
    pub(crate) fn ancestors_of(&self, nodes: impl Iterator<Item = usize>, j: usize, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = nodes.filter_map(|n| self.ancestor(n, j, k)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Builds a [`CheckpointLineage`] during a run; checkpoints are the observation times.
pub(crate) struct LineageRecorder {
    pub lineage: CheckpointLineage,
}

impl LineageRecorder {
    pub fn new() -> Self {
        Self {
            lineage: CheckpointLineage::default(),
        }
    }
}

impl Recorder for LineageRecorder {
    type Payload = u32;

    fn initial(&mut self, _state: usize) -> u32 {
        ROOT
    }

    fn split(&mut self, _t: f64, parent: u32, _state: usize) -> (u32, u32) {
        (parent, parent)
    }

    fn observe(&mut self, _k: usize, t: f64, population: &mut [Vec<u32>]) {
        let l = &mut self.lineage;
        l.times.push(t);
        l.level_start.push(l.parent.len());
        for (x, group) in population.iter_mut().enumerate() {
            for p in group.iter_mut() {
                l.parent.push(*p);
                l.state.push(x as u16);
                *p = (l.parent.len() - 1) as u32;
            }
        }
    }
}
