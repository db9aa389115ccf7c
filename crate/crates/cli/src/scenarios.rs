//! Named verification scenarios.

use rand::Rng;
use trimtree::model::{Extended, Field, MotionCtmc, MotionFlow1D};
use trimtree::rng::{Purpose, RngStreams, StreamRng};
use trimtree::semigroup::{
    ancestry_bound, flow_u_infinity, solve_loglaplace, survival_p, u_infinity_finite, verify_weighted_identity,
    FlowParams, SolverOptions,
};
use trimtree::trim::{
    verify_ancestor_poisson, verify_dichotomy, verify_domination, verify_embedding, verify_h_transform, verify_moments,
    verify_poissonization, verify_trimmed_identity, AncestorSpec, CouplingReport, DichotomySpec, MonteCarlo,
};

use crate::commands::limits;
use crate::config::Config;
use crate::CliError;

pub const SCENARIOS: [&str; 12] = [
    "lemma1-poissonization",
    "girsanov-htransform",
    "weighted-identity",
    "lemma12-bound",
    "prop7-fixed-point",
    "example32-flow",
    "corollary37-ancestors",
    "theorem6-embedding",
    "theorem8-domination",
    "theorem9-trimmed-tree",
    "lemma31-dichotomy",
    "moments-check",
];

pub fn run(name: &str, cfg: &Config) -> Result<CouplingReport, CliError> {
    match name {
        "lemma1-poissonization" => poissonization(cfg),
        "girsanov-htransform" => h_transform(cfg),
        "weighted-identity" => weighted_identity(cfg),
        "lemma12-bound" => ancestry_bound_check(cfg),
        "prop7-fixed-point" => fixed_point(cfg),
        "example32-flow" => flow_example(cfg),
        "corollary37-ancestors" => ancestor_counts(cfg),
        "theorem6-embedding" => embedding(cfg),
        "theorem8-domination" => domination(cfg),
        "theorem9-trimmed-tree" => trimmed_tree(cfg),
        "lemma31-dichotomy" => dichotomy(cfg),
        "moments-check" => moments(cfg),
        other => Err(CliError::config(
            "scenario",
            format!("unknown scenario {other:?}; expected one of {}", SCENARIOS.join(", ")),
        )),
    }
}

fn monte_carlo(cfg: &Config) -> MonteCarlo {
    let mut mc = MonteCarlo::new(cfg.n(), cfg.replicas(), cfg.seed());
    mc.level = cfg.level();
    mc.limits = limits(cfg);
    mc
}

fn rename(report: &mut CouplingReport, prefix: &str, other: CouplingReport) {
    for mut c in other.checks {
        c.name = format!("{prefix}: {}", c.name);
        report.checks.push(c);
    }
}

struct Instance {
    motion: MotionCtmc,
    alpha: Field,
    beta: Field,
}

fn uniform_field<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Field {
    Field::new((0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("finite values")
}

/// Random instance `i`: up to `max_states` states, rates below 3,
/// `alpha` in `[alpha_min, alpha_min + 2)`, `beta` in `beta_range`.
fn random_instance<R: Rng>(max_states: usize, alpha_min: f64, beta_range: (f64, f64), rng: &mut R) -> Instance {
    let n = rng.random_range(1..=max_states);
    Instance {
        motion: MotionCtmc::random(n, 3.0, rng),
        alpha: uniform_field(n, alpha_min, alpha_min + 2.0, rng),
        beta: uniform_field(n, beta_range.0, beta_range.1, rng),
    }
}

fn instances(cfg: &Config, default: usize) -> impl Iterator<Item = StreamRng> {
    let streams = RngStreams::new(cfg.seed());
    (0..cfg.params.instances.unwrap_or(default) as u64).map(move |i| streams.stream(i, Purpose::Instances))
}

fn poissonization(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let f = m.f.clone().unwrap_or_else(|| Field::constant(m.n(), 0.5));
    if f.iter().any(|&v| v > 1.0) {
        return Err(CliError::config("model.f", "generating functionals need values in [0, 1]"));
    }
    Ok(verify_poissonization(&m.motion, &m.alpha, &m.beta, m.mu()?, &cfg.grid()?, &[f], &monte_carlo(cfg))?)
}

fn h_transform(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let x = cfg.params.start_state.unwrap_or(0);
    let paths = cfg.run.replicas.unwrap_or(100_000);
    Ok(verify_h_transform(&m.motion, m.h()?, &m.f_or_one(), x, cfg.t()?, paths, cfg.seed())?)
}

fn weighted_identity(cfg: &Config) -> Result<CouplingReport, CliError> {
    let opts = SolverOptions::default();
    let mut report = CouplingReport::new("weighted identity", cfg.seed());
    let max_states = cfg.params.max_states.unwrap_or(6);
    for (i, mut rng) in instances(cfg, 20).enumerate() {
        let inst = random_instance(max_states, 0.2, (-1.0, 2.0), &mut rng);
        let n = inst.alpha.len();
        let h = uniform_field(n, 0.2, 3.0, &mut rng);
        let f = uniform_field(n, 0.0, 2.0, &mut rng);
        let t = rng.random_range(0.1..2.0);
        let r = verify_weighted_identity(&inst.motion, &inst.alpha, &inst.beta, &h, &f, t, &opts)?;
        report.push_bound(format!("instance {i} ({n} states, t={t:.3}) residual"), r, 1e-6, 0);
    }
    if cfg.model.is_some() {
        let m = cfg.model()?;
        let r = verify_weighted_identity(&m.motion, &m.alpha, &m.beta, m.h()?, &m.f_or_one(), cfg.t()?, &opts)?;
        report.push_bound("configured model residual", r, 1e-6, 0);
    }
    Ok(report)
}

fn ancestry_bound_check(cfg: &Config) -> Result<CouplingReport, CliError> {
    let opts = SolverOptions::default();
    let times = cfg.run.time_grid.clone().unwrap_or_else(|| vec![0.5, 2.0]);
    let alpha_min = cfg.params.alpha_min.unwrap_or(0.2);
    if !(alpha_min > 0.0) {
        return Err(CliError::config("params.alpha_min", "must be positive"));
    }
    let max_states = cfg.params.max_states.unwrap_or(6);
    let mut report = CouplingReport::new("ancestry bound", cfg.seed());
    for (i, mut rng) in instances(cfg, 100).enumerate() {
        let inst = random_instance(max_states, alpha_min, (-1.0, 2.0), &mut rng);
        for &t in &times {
            let u = u_infinity_finite(&inst.motion, &inst.alpha, &inst.beta, t, &opts)?;
            let bound = ancestry_bound(&inst.alpha, &inst.beta, t);
            let excess = u.iter().map(|&v| (v - bound) / bound).fold(f64::NEG_INFINITY, f64::max);
            report.push_bound(format!("instance {i} ({} states) t={t} relative excess", inst.alpha.len()), excess, 1e-6, 0);
        }
    }
    Ok(report)
}

fn fixed_point(cfg: &Config) -> Result<CouplingReport, CliError> {
    let opts = SolverOptions::default();
    let long_time = cfg.run.t.unwrap_or(200.0);
    let max_states = cfg.params.max_states.unwrap_or(6);
    let mut report = CouplingReport::new("fixed point", cfg.seed());
    let mut models: Vec<(String, Instance)> = Vec::new();
    if cfg.model.is_some() {
        let m = cfg.model()?;
        models.push((
            "configured model".into(),
            Instance {
                motion: m.motion,
                alpha: m.alpha,
                beta: m.beta,
            },
        ));
    }
    for (i, mut rng) in instances(cfg, 20).enumerate() {
        models.push((format!("instance {i}"), random_instance(max_states, 0.2, (0.1, 2.0), &mut rng)));
    }
    for (name, inst) in models {
        let s = survival_p(&inst.motion, &inst.alpha, &inst.beta, &opts)?;
        report.push_bound(format!("{name} residual"), s.residual, 1e-8, 0);
        report.push_bound(format!("{name} fixed-point deviation"), s.fixed_point_deviation, 1e-7, 0);
        let one = Field::constant(inst.alpha.len(), 1.0);
        let ode = solve_loglaplace(&inst.motion, &inst.alpha, &inst.beta, &one, long_time, &opts)?.u;
        report.push_bound(format!("{name} Newton vs ODE at t={long_time}"), ode.dist_inf(&s.p)?, 1e-6, 0);
    }
    Ok(report)
}

fn flow_example(cfg: &Config) -> Result<CouplingReport, CliError> {
    let t = cfg.run.t.unwrap_or(200.0);
    let points = cfg.params.points.clone().unwrap_or_else(|| vec![-0.5, 0.0, 0.5, 1.0]);
    if let Some(i) = points.iter().position(|x| !(-1.0 < *x && *x <= 1.0)) {
        return Err(CliError::config(format!("params.points[{i}]"), "interior points lie in (-1, 1]"));
    }
    let flow = MotionFlow1D::new(|x| 1.0 - x * x, 1e-9)?;
    let x_proc = FlowParams::new(|_| 1.0, |x| -x);
    let y_proc = FlowParams::new(|x: f64| x.max(0.0), |x: f64| x.max(0.0));
    let mut report = CouplingReport::new("flow example", cfg.seed());
    let value = |e: Extended| match e {
        Extended::Finite(v) => v,
        Extended::Infinite => f64::INFINITY,
    };
    let px = value(flow_u_infinity(&flow, &x_proc, -1.0, t)?);
    report.push_bound("X: |p(-1) - 1|", (px - 1.0).abs(), 1e-3, 0);
    for &x in &points {
        report.push_bound(format!("X: p({x})"), value(flow_u_infinity(&flow, &x_proc, x, t)?), 1e-3, 0);
    }
    let py = flow_u_infinity(&flow, &y_proc, -1.0, t)?;
    report.push_bound("Y: p(-1) not flagged infinite", if py.is_infinite() { 0.0 } else { 1.0 }, 0.0, 0);
    for &x in &points {
        let v = value(flow_u_infinity(&flow, &y_proc, x, t)?);
        report.push_bound(format!("Y: |p({x}) - 1|"), (v - 1.0).abs(), 1e-2, 0);
    }
    Ok(report)
}

fn ancestor_counts(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let spec = AncestorSpec {
        t: cfg.t()?,
        replicas_2n: cfg.params.replicas_2n.unwrap_or(0),
    };
    Ok(verify_ancestor_poisson(&m.motion, &m.alpha, &m.beta, m.mu()?, &spec, &monte_carlo(cfg))?)
}

fn embedding(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let h = m.h.clone().unwrap_or_else(|| Field::constant(m.n(), 1.0));
    Ok(verify_embedding(&m.motion, &m.alpha, &m.beta, &h, m.mu()?, &cfg.grid()?, &monte_carlo(cfg))?)
}

fn domination(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let opts = SolverOptions::default();
    let mut report = CouplingReport::new("domination", cfg.seed());
    if let Some(h) = &m.h {
        rename(&mut report, "configured h", verify_domination(&m.motion, &m.alpha, &m.beta, h, 1e-8, &opts)?);
    }
    let p = survival_p(&m.motion, &m.alpha, &m.beta, &opts)?.p;
    rename(&mut report, "h = p", verify_domination(&m.motion, &m.alpha, &m.beta, &p, 1e-8, &opts)?);
    let above = p.map(|v| 1.5 * v);
    rename(&mut report, "h = 1.5 p", verify_domination(&m.motion, &m.alpha, &m.beta, &above, 0.0, &opts)?);
    Ok(report)
}

fn trimmed_tree(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    Ok(verify_trimmed_identity(&m.motion, &m.alpha, &m.beta, m.mu()?, &cfg.grid()?, cfg.run.r, &monte_carlo(cfg))?)
}

fn dichotomy(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let upper = cfg.params.upper.unwrap_or(5.0);
    let spec = DichotomySpec {
        times: cfg.run.time_grid.clone().unwrap_or_else(|| vec![5.0, 10.0, 20.0]),
        upper,
        stop_mass: cfg.params.stop_mass.unwrap_or(2.0 * upper),
        max_fraction: cfg.params.max_fraction.unwrap_or(0.02),
    };
    Ok(verify_dichotomy(&m.motion, &m.alpha, &m.beta, m.mu()?, &spec, &monte_carlo(cfg))?)
}

fn moments(cfg: &Config) -> Result<CouplingReport, CliError> {
    let m = cfg.model()?;
    let f = m.f_or_one();
    let g = match &cfg.params.g {
        Some(g) => Field::new(g.clone()).map_err(|e| CliError::config("params.g", e.to_string()))?,
        None => f.clone(),
    };
    if g.len() != m.n() {
        return Err(CliError::config("params.g", format!("has {} entries, expected {}", g.len(), m.n())));
    }
    Ok(verify_moments(&m.motion, &m.alpha, &m.beta, m.mu()?, &f, &g, cfg.t()?, &monte_carlo(cfg))?)
}
