use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{check_dim, Field, Measure};
use crate::error::Result;

pub type ParticleId = u64;

/// One located particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Particle {
    pub state: usize,
    pub id: ParticleId,
}

/// Hands out fresh particle ids within one run.
#[derive(Debug, Clone, Default)]
pub struct IdSource {
    next: ParticleId,
}

impl IdSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: ParticleId) -> Self {
        Self { next }
    }

    pub fn fresh(&mut self) -> ParticleId {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> ParticleId {
        self.next
    }
}

/// A finite point measure whose particles carry distinct ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointMeasure {
    particles: Vec<Particle>,
}

impl PointMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a point measure; ids must be pairwise distinct.
    pub fn from_particles(mut particles: Vec<Particle>) -> Result<Self> {
        particles.sort_by_key(|p| p.id);
        if let Some(w) = particles.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(crate::Error::invalid("point measure", format!("duplicate id {}", w[0].id)));
        }
        Ok(Self { particles })
    }

    /// Particles at the given per-state counts, with fresh ids.
    pub fn from_counts(counts: &[u64], ids: &mut IdSource) -> Self {
        let mut particles = Vec::with_capacity(counts.iter().sum::<u64>() as usize);
        for (state, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                particles.push(Particle { state, id: ids.fresh() });
            }
        }
        Self { particles }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn counts(&self, n_states: usize) -> Vec<u64> {
        let mut c = vec![0u64; n_states];
        for p in &self.particles {
            c[p.state] += 1;
        }
        c
    }

    pub fn contains_id(&self, id: ParticleId) -> bool {
        self.particles.binary_search_by_key(&id, |p| p.id).is_ok()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParticleId> + '_ {
        self.particles.iter().map(|p| p.id)
    }

    /// `(1 - f)^nu`, the product of `1 - f(x_i)` over particles.
    pub fn generating_product(&self, f: &Field) -> f64 {
        self.particles.iter().map(|p| 1.0 - f[p.state]).product()
    }

    /// Superposition; ids of the two measures must not collide.
    pub fn union(&self, other: &PointMeasure) -> Result<PointMeasure> {
        let mut all = self.particles.clone();
        all.extend_from_slice(&other.particles);
        Self::from_particles(all)
    }

    /// Whether every id of `self` also occurs in `other`.
    pub fn is_subset_of(&self, other: &PointMeasure) -> bool {
        self.particles.iter().all(|p| other.contains_id(p.id))
    }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// A Poisson point measure with intensity `mu`: independent Poisson counts per
/// state, fresh ids.
pub fn pois_sample<R: Rng + ?Sized>(mu: &Measure, ids: &mut IdSource, rng: &mut R) -> PointMeasure {
    let counts: Vec<u64> = mu.masses().iter().map(|&m| poisson_count(m, rng)).collect();
    PointMeasure::from_counts(&counts, ids)
}

/// Keeps each particle at `x` independently with probability `f(x)`.
pub fn thin<R: Rng + ?Sized>(nu: &PointMeasure, f: &Field, rng: &mut R) -> Result<PointMeasure> {
    f.ensure_unit_interval("thinning function")?;
    if let Some(p) = nu.particles.iter().find(|p| p.state >= f.len()) {
        check_dim(p.state + 1, f.len())?;
    }
    let particles = nu
        .particles
        .iter()
        .filter(|p| {
            let keep = f[p.state];
            keep >= 1.0 || (keep > 0.0 && rng.random::<f64>() < keep)
        })
        .copied()
        .collect();
    Ok(PointMeasure { particles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStreams};
    use crate::stats::{chi_square_sf, poisson_pmf};

    #[test]
    fn zero_intensity_is_empty() {
        let mut rng = RngStreams::new(1).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        for _ in 0..100 {
            assert!(pois_sample(&Measure::zero(3), &mut ids, &mut rng).is_empty());
        }
    }

    #[test]
    fn void_probability_matches_exponential() {
        // mu = 3 delta_x, P[empty] = e^{-3}
        let mut rng = RngStreams::new(2).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        let mu = Measure::dirac(2, 0, 3.0).unwrap();
        let n = 100_000;
        let voids = (0..n).filter(|_| pois_sample(&mu, &mut ids, &mut rng).is_empty()).count();
        let p_hat = voids as f64 / n as f64;
        let p = (-3.0f64).exp();
        assert!((p - 0.0498).abs() < 1e-4);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 4.0 * se, "{p_hat} vs {p}");
    }

    #[test]
    fn per_state_means() {
        let mut rng = RngStreams::new(3).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        let mu = Measure::new(vec![1.0, 2.0]).unwrap();
        let n = 100_000;
        let mut sums = [0u64; 2];
        for _ in 0..n {
            let c = pois_sample(&mu, &mut ids, &mut rng).counts(2);
            sums[0] += c[0];
            sums[1] += c[1];
        }
        for (s, m) in sums.iter().zip([1.0, 2.0]) {
            let mean = *s as f64 / n as f64;
            assert!((mean - m).abs() < 4.0 * (m / n as f64).sqrt());
        }
    }

    #[test]
    fn ids_are_unique_across_draws() {
        let mut rng = RngStreams::new(4).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        let mu = Measure::new(vec![5.0, 5.0]).unwrap();
        let a = pois_sample(&mu, &mut ids, &mut rng);
        let b = pois_sample(&mu, &mut ids, &mut rng);
        assert!(a.union(&b).is_ok());
    }

    #[test]
    fn thinning_extremes_and_validation() {
        let mut rng = RngStreams::new(5).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        let nu = PointMeasure::from_counts(&[3, 4], &mut ids);
        assert_eq!(thin(&nu, &Field::constant(2, 1.0), &mut rng).unwrap(), nu);
        assert!(thin(&nu, &Field::zeros(2), &mut rng).unwrap().is_empty());
        assert!(thin(&nu, &Field::new(vec![0.5, 1.5]).unwrap(), &mut rng).is_err());
    }

    fn histogram_chi_square(counts: &[u64], mean: f64) -> f64 {
        // bins 0..K-1 and a tail bin, with K chosen so the tail has expected >= 5
        let n = counts.len() as f64;
        let mut k = 0usize;
        let mut cdf = 0.0;
        while n * (1.0 - cdf - poisson_pmf(k as u64, mean)) >= 5.0 {
            cdf += poisson_pmf(k as u64, mean);
            k += 1;
        }
        let mut stat = 0.0;
        let mut tail_obs = counts.len() as f64;
        for j in 0..k {
            let obs = counts.iter().filter(|&&c| c == j as u64).count() as f64;
            tail_obs -= obs;
            let e = n * poisson_pmf(j as u64, mean);
            stat += (obs - e).powi(2) / e;
        }
        let e_tail = n * (1.0 - cdf);
        stat += (tail_obs - e_tail).powi(2) / e_tail;
        chi_square_sf(stat, k as f64)
    }

    #[test]
    fn thinned_poisson_is_poisson_with_thinned_intensity() {
        let mut rng = RngStreams::new(6).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        let mu = Measure::new(vec![2.0, 3.0]).unwrap();
        let f = Field::new(vec![0.25, 0.6]).unwrap();
        let n = 100_000;
        let mut per_state = vec![Vec::with_capacity(n); 2];
        for _ in 0..n {
            let c = thin(&pois_sample(&mu, &mut ids, &mut rng), &f, &mut rng).unwrap().counts(2);
            per_state[0].push(c[0]);
            per_state[1].push(c[1]);
        }
        for x in 0..2 {
            let p = histogram_chi_square(&per_state[x], mu[x] * f[x]);
            // two states, Bonferroni at family level 0.01
            assert!(p > 0.005, "state {x}: p = {p}");
        }
    }

    #[test]
    fn thinning_composes() {
        // Thin_f(Thin_g(nu)) and Thin_{fg}(nu) from a fixed nu: compare kept-count histograms.
        let mut rng = RngStreams::new(7).stream(0, Purpose::Synthetic);
        let mut ids = IdSource::new();
        let nu = PointMeasure::from_counts(&[10], &mut ids);
        let f = Field::new(vec![0.5]).unwrap();
        let g = Field::new(vec![0.6]).unwrap();
        let fg = Field::new(vec![0.3]).unwrap();
        let n = 20_000;
        let a: Vec<u64> = (0..n)
            .map(|_| thin(&thin(&nu, &g, &mut rng).unwrap(), &f, &mut rng).unwrap().len() as u64)
            .collect();
        let b: Vec<u64> = (0..n).map(|_| thin(&nu, &fg, &mut rng).unwrap().len() as u64).collect();
        let res = crate::stats::two_sample_chi_square("compose", &a, &b, 0.01).unwrap();
        assert!(res.passed, "{res:?}");
    }
}
