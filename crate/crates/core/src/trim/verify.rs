use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{choose_horizon, extract_completed_tree, horizon_margin, CouplingReport};
use crate::error::{Error, Result};
use crate::model::{
    apply_generator, check_dim, girsanov_weight, h_transform, poisson_count, sample_ctmc_path, Extended, Field, Measure,
    MotionCtmc,
};
use crate::particles::{simulate_counts, BranchingSystem, RunLimits};
use crate::rng::{Purpose, RngStreams};
use crate::semigroup::{
    covariance_ref, gamma_from_h, linear_moment, solve_loglaplace, survival_p, u_infinity, SolverOptions,
};
use crate::stats::{
    bonferroni, covariance_estimate, poisson_gof, proportion_two_sample, two_sample_count_vectors, z_test, Estimate,
    TestResult,
};
use crate::superproc::{ancestors, simulate_super, tail_marks, SuperConfig, TailSurvival, Tracking};

/// Replica budget and approximation scale shared by the verifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    /// Particles per unit mass.
    pub n: u32,
    pub replicas: usize,
    pub seed: u64,
    /// Family-wise test level.
    pub level: f64,
    pub limits: RunLimits,
    pub opts: SolverOptions,
}

impl MonteCarlo {
    pub fn new(n: u32, replicas: usize, seed: u64) -> Self {
        Self {
            n,
            replicas,
            seed,
            level: 0.01,
            limits: RunLimits::default(),
            opts: SolverOptions::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::InsufficientData(format!("{} replicas", self.replicas)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("level", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn replicate<T: Send>(reps: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps as u64).into_par_iter().map(f).collect()
}

fn check_grid(grid: &[f64]) -> Result<f64> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::invalid("time grid", "must be nonempty, increasing and nonnegative"));
    }
    Ok(*grid.last().unwrap())
}

fn label(t: f64) -> String {
    format!("t={t}")
}

/// Adds a Bonferroni family: each member is judged at `level / size`.
fn push_family(report: &mut CouplingReport, name: &str, parts: Vec<TestResult>, level: f64, replicas: usize) {
    let family = bonferroni(name, &parts, level);
    let m = parts.len().max(1) as f64;
    for mut p in parts {
        p.level = level / m;
        p.passed = p.p_value >= p.level;
        report.push_test(&p, replicas);
    }
    report.push_test(&family, replicas);
}

/// Two-sample comparison of count vectors, or an exact check when both samples are empty.
fn compare_counts(name: &str, a: &[Vec<u64>], b: &[Vec<u64>], level: f64) -> Result<Option<TestResult>> {
    let empty = |s: &[Vec<u64>]| s.iter().all(|c| c.iter().all(|&v| v == 0));
    if empty(a) && empty(b) {
        return Ok(None);
    }
    two_sample_count_vectors(name, a, b, level).map(Some)
}

fn state_subsets<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<usize>> {
    if n <= 4 {
        return (1u32..(1 << n)).map(|m| (0..n).filter(|x| m >> x & 1 == 1).collect()).collect();
    }
    let mut out: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
    while out.len() < n + 6 {
        let s: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn gen_product(counts: &[u64], f: &Field) -> f64 {
    counts.iter().zip(f.iter()).map(|(&c, &v)| (1.0 - v).powi(c as i32)).product()
}

/// `samples[k][r]`: counts of replica `r` at grid time `k`.
type GridSamples = Vec<Vec<Vec<u64>>>;

fn transpose(by_replica: Vec<Vec<Vec<u64>>>, n_times: usize) -> GridSamples {
    let mut out = vec![Vec::with_capacity(by_replica.len()); n_times];
    for rep in by_replica {
        for (k, c) in rep.into_iter().enumerate() {
            out[k].push(c);
        }
    }
    out
}

struct Embedding {
    report: CouplingReport,
    poissonized: GridSamples,
    direct: GridSamples,
}

#[allow(clippy::too_many_arguments)]
fn embedding(
    name: &str,
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    h: &Field,
    mu: &Measure,
    grid: &[f64],
    mc: &MonteCarlo,
) -> Result<Embedding> {
    mc.check()?;
    let horizon = check_grid(grid)?;
    let n = motion.n_states();
    check_dim(n, mu.len())?;
    let gamma = gamma_from_h(motion, alpha, beta, h, 1e-9)?;
    let alpha_h = h.zip_with(alpha, |a, b| a * b)?;
    let direct_sys = BranchingSystem::new(h_transform(motion, h)?, alpha_h, gamma)?;
    let cfg = SuperConfig::new(mc.n, horizon, grid.to_vec()).with_limits(mc.limits);
    let streams = RngStreams::new(mc.seed);
    let nf = mc.n as f64;

    let poissonized = replicate(mc.replicas, |r| {
        let traj = simulate_super(motion, alpha, beta, mu, &cfg, &mut streams.stream(r, Purpose::Dynamics))?;
        let mut rng = streams.stream(r, Purpose::Poissonize);
        Ok(traj
            .counts
            .iter()
            .map(|c| (0..n).map(|x| poisson_count(h[x] * c[x] as f64 / nf, &mut rng)).collect())
            .collect::<Vec<Vec<u64>>>())
    })?;
    let direct = replicate(mc.replicas, |r| {
        let mut rng = streams.stream(r, Purpose::Comparison);
        let initial: Vec<u64> = (0..n).map(|x| poisson_count(h[x] * mu.masses()[x], &mut rng)).collect();
        Ok(simulate_counts(&direct_sys, &initial, horizon, grid, &mc.limits, &mut rng)?.counts)
    })?;
    let poissonized = transpose(poissonized, grid.len());
    let direct = transpose(direct, grid.len());

    let subsets = state_subsets(n, &mut streams.stream(0, Purpose::Custom(0)));
    let mut report = CouplingReport::new(name, mc.seed);
    let mut parts = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        let (a, b) = (&poissonized[k], &direct[k]);
        match compare_counts(&format!("counts {}", label(t)), a, b, mc.level)? {
            Some(r) => parts.push(r),
            None => report.push_bound(format!("both empty {}", label(t)), 0.0, 0.0, mc.replicas),
        }
        for s in &subsets {
            let void = |xs: &[Vec<u64>]| xs.iter().filter(|c| s.iter().all(|&x| c[x] == 0)).count();
            parts.push(proportion_two_sample(
                &format!("void {s:?} {}", label(t)),
                void(a),
                a.len(),
                void(b),
                b.len(),
                mc.level,
            ));
        }
    }
    push_family(&mut report, name, parts, mc.level, mc.replicas);
    Ok(Embedding {
        report,
        poissonized,
        direct,
    })
}

/// Compares `Pois(hX_t)` for the superprocess `X` with the `(Q^h, h alpha, gamma)`
/// particle system started from `Pois(h mu)` at each grid time: count
/// histograms per state and in total, and void probabilities of state subsets.
#[allow(clippy::too_many_arguments)]
pub fn verify_embedding(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    h: &Field,
    mu: &Measure,
    grid: &[f64],
    mc: &MonteCarlo,
) -> Result<CouplingReport> {
    Ok(embedding("embedding", motion, alpha, beta, h, mu, grid, mc)?.report)
}

/// The `h = 1` embedding, plus generating functionals of both samples against
/// `exp(-<mu, U_t f>)` for each `f` (values in `[0, 1]`), within 4 SE.
pub fn verify_poissonization(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    grid: &[f64],
    fs: &[Field],
    mc: &MonteCarlo,
) -> Result<CouplingReport> {
    let one = Field::constant(motion.n_states(), 1.0);
    let e = embedding("poissonization", motion, alpha, beta, &one, mu, grid, mc)?;
    let mut report = e.report;
    for f in fs {
        f.ensure_unit_interval("generating function argument")?;
        for (k, &t) in grid.iter().enumerate() {
            let u = solve_loglaplace(motion, alpha, beta, f, t, &mc.opts)?.u;
            let reference = (-mu.integrate(&u)?).exp();
            for (which, s) in [("superprocess", &e.poissonized[k]), ("particles", &e.direct[k])] {
                let xs: Vec<f64> = s.iter().map(|c| gen_product(c, f)).collect();
                let est = Estimate::from_samples(&xs)?;
                report.push_estimate(format!("generating {which} f={:?} {}", f.values(), label(t)), &est, reference, 4.0);
            }
        }
    }
    Ok(report)
}

struct TreeReplica {
    counts: Vec<Vec<u64>>,
    nested: bool,
    stable: bool,
    persistent: bool,
}

/// Surviving lines of the superprocess against the `(Q^p, p alpha, 0)` system
/// started from `Pois(p mu)`, where `p` is the survival field.
///
/// Lines are extracted with respect to the horizon `r` (chosen from the
/// survival field when absent) by completing each run beyond the last grid
/// time with independent survival marks. Also checks, per replica, that the
/// sets are nested across the grid, that a surviving tree is nonempty at every
/// grid time, and that the sets do not change when the horizon is pushed out
/// by the same margin again.
pub fn verify_trimmed_identity(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    grid: &[f64],
    r: Option<f64>,
    mc: &MonteCarlo,
) -> Result<CouplingReport> {
    mc.check()?;
    let t_max = check_grid(grid)?;
    let n = motion.n_states();
    check_dim(n, mu.len())?;
    let p = survival_p(motion, alpha, beta, &mc.opts)?.p;
    if !(p.min() > 0.0) {
        return Err(Error::invalid("survival field", "must be positive everywhere"));
    }
    let r = match r {
        Some(r) => r,
        None => choose_horizon(motion, alpha, beta, &p, t_max, 1e-3, &mc.opts)?,
    };
    let margin = horizon_margin(motion, alpha, beta, &p, t_max, r, &mc.opts)?;
    if margin >= 0.01 {
        return Err(Error::HorizonMargin { t: t_max, r, ratio: margin });
    }
    let r2 = 2.0 * r - t_max;
    let tail = TailSurvival::new(motion, alpha, beta, mc.n, r - t_max, &mc.opts)?;
    let tail2 = TailSurvival::new(motion, alpha, beta, mc.n, r2 - t_max, &mc.opts)?;
    let cfg = SuperConfig::new(mc.n, t_max, grid.to_vec())
        .with_tracking(Tracking::Checkpoints)
        .with_limits(mc.limits);
    let streams = RngStreams::new(mc.seed);

    let trees = replicate(mc.replicas, |rep| {
        let traj = simulate_super(motion, alpha, beta, mu, &cfg, &mut streams.stream(rep, Purpose::Dynamics))?;
        let marks = tail_marks(&traj, &mut streams.stream(rep, Purpose::Completion))?;
        let tree = extract_completed_tree(&traj, grid, &tail, &marks)?;
        let later = extract_completed_tree(&traj, grid, &tail2, &marks)?;
        let sizes = tree.sizes();
        Ok(TreeReplica {
            counts: (0..grid.len()).map(|k| tree.counts(k, n)).collect(),
            nested: tree.is_nested(&traj)? && later.sets.iter().zip(&tree.sets).all(|(b, a)| b.is_subset_of(a)),
            stable: later.sets == tree.sets,
            persistent: *sizes.last().unwrap() == 0 || sizes.iter().all(|&s| s >= 1),
        })
    })?;

    let p_alpha = p.zip_with(alpha, |a, b| a * b)?;
    let qp = h_transform(motion, &p)?;
    let direct_sys = BranchingSystem::new(qp.clone(), p_alpha.clone(), Field::zeros(n))?;
    let direct = replicate(mc.replicas, |rep| {
        let mut rng = streams.stream(rep, Purpose::Comparison);
        let initial: Vec<u64> = (0..n).map(|x| poisson_count(p[x] * mu.masses()[x], &mut rng)).collect();
        Ok(simulate_counts(&direct_sys, &initial, t_max, grid, &mc.limits, &mut rng)?.counts)
    })?;
    let direct = transpose(direct, grid.len());

    let mut report = CouplingReport::new("trimmed tree", mc.seed);
    report.push_bound("horizon margin", margin, 0.01, 0);
    let reps = mc.replicas;
    let mut parts = Vec::new();
    let one = Field::constant(n, 1.0);
    let pmu = mu.weighted(&p)?;
    for (k, &t) in grid.iter().enumerate() {
        let a: Vec<Vec<u64>> = trees.iter().map(|tr| tr.counts[k].clone()).collect();
        match compare_counts(&format!("occupancy {}", label(t)), &a, &direct[k], mc.level)? {
            Some(res) => parts.push(res),
            None => report.push_bound(format!("both empty {}", label(t)), 0.0, 0.0, reps),
        }
        let sizes: Vec<f64> = a.iter().map(|c| c.iter().sum::<u64>() as f64).collect();
        let mean = pmu.integrate(&linear_moment(&qp, &p_alpha, &one, t)?)?;
        let est = Estimate::from_samples(&sizes)?;
        if est.se > 0.0 || est.mean != mean {
            report.push_estimate(format!("lineage mean {}", label(t)), &est, mean, 6.0);
        }
    }
    push_family(&mut report, "trimmed tree", parts, mc.level, reps);
    let count = |f: fn(&TreeReplica) -> bool| trees.iter().filter(|t| !f(t)).count();
    report.push_bound("replicas not nested", count(|t| t.nested) as f64, 0.0, reps);
    report.push_bound("surviving trees with an empty level", count(|t| t.persistent) as f64, 0.0, reps);
    report.push_bound("fraction changed at doubled margin", count(|t| t.stable) as f64 / reps as f64, 0.01, reps);
    Ok(report)
}

/// Sizes of the two samples in [`verify_ancestor_poisson`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncestorSpec {
    pub t: f64,
    /// Replicas at twice the particle density, for the bias check; 0 skips it.
    pub replicas_2n: usize,
}

fn ancestor_counts(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    t: f64,
    n: u32,
    reps: usize,
    mc: &MonteCarlo,
    purpose: Purpose,
) -> Result<Vec<Vec<u64>>> {
    let cfg = SuperConfig::new(n, t, vec![0.0, t])
        .with_tracking(Tracking::Checkpoints)
        .with_limits(mc.limits);
    let streams = RngStreams::new(mc.seed);
    let k = motion.n_states();
    replicate(reps, |r| {
        let traj = simulate_super(motion, alpha, beta, mu, &cfg, &mut streams.stream(r, purpose))?;
        Ok(ancestors(&traj, 0.0, t)?.counts(k))
    })
}

/// Per-state counts of time-0 ancestors of the time-`t` population against
/// independent Poisson laws with means `mu(x) U_t inf(x)`; pairwise
/// covariances against 0; and, optionally, the per-state means at `N` against
/// those at `2N` within 4 combined standard errors.
pub fn verify_ancestor_poisson(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    spec: &AncestorSpec,
    mc: &MonteCarlo,
) -> Result<CouplingReport> {
    mc.check()?;
    let n = motion.n_states();
    check_dim(n, mu.len())?;
    let t = spec.t;
    if !(t > 0.0) {
        return Err(Error::invalid("t", "must be positive"));
    }
    let u = u_infinity(motion, alpha, beta, t, &mc.opts)?;
    let mut means = Vec::with_capacity(n);
    for x in 0..n {
        match u.get(x) {
            Extended::Finite(v) => means.push(mu.masses()[x] * v),
            Extended::Infinite => return Err(Error::InfiniteValue { state: x }),
        }
    }
    let a = ancestor_counts(motion, alpha, beta, mu, t, mc.n, mc.replicas, mc, Purpose::Dynamics)?;
    let column = |s: &[Vec<u64>], x: usize| -> Vec<u64> { s.iter().map(|c| c[x]).collect() };
    let as_f64 = |v: Vec<u64>| -> Vec<f64> { v.into_iter().map(|c| c as f64).collect() };

    let mut report = CouplingReport::new("ancestor counts", mc.seed);
    let mut parts = Vec::new();
    for x in 0..n {
        parts.push(poisson_gof(&format!("poisson state {x}"), &column(&a, x), means[x], mc.level)?);
    }
    for x in 0..n {
        for y in x + 1..n {
            let c = covariance_estimate(&as_f64(column(&a, x)), &as_f64(column(&a, y)))?;
            if c.se > 0.0 {
                parts.push(z_test(&format!("covariance states {x},{y}"), &c, 0.0, mc.level));
            }
        }
    }
    push_family(&mut report, "ancestor counts", parts, mc.level, mc.replicas);

    if spec.replicas_2n > 0 {
        let b = ancestor_counts(motion, alpha, beta, mu, t, 2 * mc.n, spec.replicas_2n, mc, Purpose::Comparison)?;
        for x in 0..n {
            let ea = Estimate::from_samples(&as_f64(column(&a, x)))?;
            let eb = Estimate::from_samples(&as_f64(column(&b, x)))?;
            let tol = 4.0 * (ea.se.powi(2) + eb.se.powi(2)).sqrt();
            report.push_bound(format!("N vs 2N mean difference state {x}"), (ea.mean - eb.mean).abs(), tol, spec.replicas_2n);
        }
    }
    Ok(report)
}

/// Checks `p <= h + tol` entrywise for an admissible `h`.
pub fn verify_domination(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    h: &Field,
    tol: f64,
    opts: &SolverOptions,
) -> Result<CouplingReport> {
    gamma_from_h(motion, alpha, beta, h, 1e-9)?;
    let p = survival_p(motion, alpha, beta, opts)?.p;
    let mut report = CouplingReport::new("domination", 0);
    for x in 0..motion.n_states() {
        report.push_bound(format!("p - h at state {x}"), p[x] - h[x], tol, 0);
    }
    Ok(report)
}

/// Mean of `<X_t, f>` and `<X_t, g>` within 4 SE of the linear semigroup and
/// their covariance within 6 SE of the reference value.
#[allow(clippy::too_many_arguments)]
pub fn verify_moments(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    f: &Field,
    g: &Field,
    t: f64,
    mc: &MonteCarlo,
) -> Result<CouplingReport> {
    mc.check()?;
    let cfg = SuperConfig::new(mc.n, t, vec![t]).with_limits(mc.limits);
    let streams = RngStreams::new(mc.seed);
    let pairs = replicate(mc.replicas, |r| {
        let traj = simulate_super(motion, alpha, beta, mu, &cfg, &mut streams.stream(r, Purpose::Dynamics))?;
        let x = traj.mass_at(0)?;
        Ok((x.integrate(f)?, x.integrate(g)?))
    })?;
    let (xf, xg): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mut report = CouplingReport::new("moments", mc.seed);
    for (name, xs, h) in [("mean <X,f>", &xf, f), ("mean <X,g>", &xg, g)] {
        let reference = mu.integrate(&linear_moment(motion, beta, h, t)?)?;
        report.push_estimate(name, &Estimate::from_samples(xs)?, reference, 4.0);
    }
    let reference = covariance_ref(motion, alpha, beta, mu, f, g, t)?;
    report.push_estimate("covariance <X,f>,<X,g>", &covariance_estimate(&xf, &xg)?, reference, 6.0);
    Ok(report)
}

/// Grid and thresholds for [`verify_dichotomy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomySpec {
    pub times: Vec<f64>,
    /// Upper end of the "small but alive" band `(0, upper]`.
    pub upper: f64,
    /// Runs are stopped once their mass exceeds this and count as large afterwards.
    pub stop_mass: f64,
    /// Bound on the band fraction at the last time.
    pub max_fraction: f64,
}

/// Fraction of replicas with total mass in `(0, upper]` at each grid time:
/// must not increase along the grid and must end below `max_fraction`.
pub fn verify_dichotomy(
    motion: &MotionCtmc,
    alpha: &Field,
    beta: &Field,
    mu: &Measure,
    spec: &DichotomySpec,
    mc: &MonteCarlo,
) -> Result<CouplingReport> {
    mc.check()?;
    let horizon = check_grid(&spec.times)?;
    if !(spec.stop_mass > spec.upper) {
        return Err(Error::invalid("stop mass", "must exceed the band's upper end"));
    }
    let cfg = SuperConfig::new(mc.n, horizon, spec.times.clone())
        .with_limits(mc.limits)
        .with_stop_mass(spec.stop_mass);
    let streams = RngStreams::new(mc.seed);
    let flags = replicate(mc.replicas, |r| {
        let traj = simulate_super(motion, alpha, beta, mu, &cfg, &mut streams.stream(r, Purpose::Dynamics))?;
        (0..spec.times.len())
            .map(|k| {
                if k >= traj.counts.len() {
                    return Ok(false);
                }
                let m = traj.total_mass_at(k)?;
                Ok(m > 0.0 && m <= spec.upper)
            })
            .collect::<Result<Vec<bool>>>()
    })?;
    let reps = mc.replicas;
    let fractions: Vec<f64> = (0..spec.times.len())
        .map(|k| flags.iter().filter(|f| f[k]).count() as f64 / reps as f64)
        .collect();
    let mut report = CouplingReport::new("dichotomy", mc.seed);
    for (k, w) in fractions.windows(2).enumerate() {
        report.push_bound(
            format!("band fraction change {} to {}", label(spec.times[k]), label(spec.times[k + 1])),
            w[1] - w[0],
            0.0,
            reps,
        );
    }
    let last = *fractions.last().unwrap();
    report.push_bound(format!("band fraction {}", label(horizon)), last, spec.max_fraction, reps);
    for (k, &t) in spec.times.iter().enumerate() {
        report.push_bound(format!("band fraction {} (recorded)", label(t)), fractions[k], 1.0, reps);
    }
    Ok(report)
}

/// The compensated h-transform: its generator against `(Q(hf) - (Qh) f)/h` on
/// random test functions, and `E_x f(xi_t)` under `Q^h` estimated both from
/// `Q^h` paths and from reweighted `Q` paths, each within 4 SE of the exact value.
pub fn verify_h_transform(
    motion: &MotionCtmc,
    h: &Field,
    f: &Field,
    x: usize,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<CouplingReport> {
    let n = motion.n_states();
    check_dim(n, f.len())?;
    if x >= n {
        return Err(Error::invalid("start state", format!("{x} out of range")));
    }
    let qh = h_transform(motion, h)?;
    let gh = apply_generator(motion, h)?;
    let streams = RngStreams::new(seed);
    let mut rng = streams.stream(0, Purpose::Instances);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let g = Field::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect())?;
        let lhs = apply_generator(&qh, &g)?;
        let ghg = apply_generator(motion, &h.zip_with(&g, |a, b| a * b)?)?;
        for y in 0..n {
            worst = worst.max((lhs[y] - (ghg[y] - gh[y] * g[y]) / h[y]).abs());
        }
    }
    let mut report = CouplingReport::new("h-transform", seed);
    report.push_bound("generator identity", worst, 1e-12, 0);

    let exact = qh.transition_apply(t, f)?[x];
    let direct = replicate(paths, |r| {
        let path = sample_ctmc_path(&qh, x, t, &mut streams.stream(r, Purpose::Paths))?;
        Ok(f[path.end_state()])
    })?;
    let weighted = replicate(paths, |r| {
        let path = sample_ctmc_path(motion, x, t, &mut streams.stream(r, Purpose::Comparison))?;
        Ok(f[path.end_state()] * girsanov_weight(motion, h, &path)?)
    })?;
    report.push_estimate("h-transformed paths", &Estimate::from_samples(&direct)?, exact, 4.0);
    report.push_estimate("reweighted paths", &Estimate::from_samples(&weighted)?, exact, 4.0);
    Ok(report)
}
