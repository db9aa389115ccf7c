use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use trimtree::model::{Extended, Field};
use trimtree::particles::RunLimits;
use trimtree::rng::{Purpose, RngStreams};
use trimtree::semigroup::{gamma_from_h, linear_moment, solve_loglaplace, survival_p, u_infinity, SolverOptions};
use trimtree::stats::Estimate;
use trimtree::superproc::{simulate_super, SuperConfig, Tracking};

use crate::config::Config;
use crate::output::{num, report_text, Writer};
use crate::{scenarios, CliError};

/// What a command wrote and whether its checks passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub summary: Option<String>,
}

pub(crate) fn limits(cfg: &Config) -> RunLimits {
    let mut l = RunLimits::default();
    if let Some(m) = cfg.params.max_events {
        l.max_events = m;
    }
    l
}

pub fn cmd_solve(cfg: &Config) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let m = cfg.model()?;
    let t = cfg.t()?;
    let opts = SolverOptions::default();
    let f = m.f_or_one();
    let u = solve_loglaplace(&m.motion, &m.alpha, &m.beta, &f, t, &opts)?.u;
    let u_inf = u_infinity(&m.motion, &m.alpha, &m.beta, t, &opts)?;
    let p = if m.alpha.min() > 0.0 {
        Some(survival_p(&m.motion, &m.alpha, &m.beta, &opts)?.p)
    } else {
        None
    };
    let gamma = match &m.h {
        Some(h) => Some(gamma_from_h(&m.motion, &m.alpha, &m.beta, h, 1e-9)?),
        None => None,
    };
    let solved = start.elapsed().as_secs_f64();

    let mut header = vec!["state", "label", "U_t_f", "U_t_inf", "p"];
    if gamma.is_some() {
        header.push("gamma");
    }
    let rows: Vec<Vec<String>> = (0..m.n())
        .map(|x| {
            let mut r = vec![
                x.to_string(),
                m.space.labels()[x].clone(),
                num(u[x]),
                match u_inf.get(x) {
                    Extended::Finite(v) => num(v),
                    Extended::Infinite => "inf".into(),
                },
                p.as_ref().map_or("NA".into(), |p| num(p[x])),
            ];
            if let Some(g) = &gamma {
                r.push(num(g[x]));
            }
            r
        })
        .collect();
    let mut w = Writer::new(cfg)?;
    w.table("solve", &header, &rows)?;
    w.manifest("solve", None)?;
    w.timings(&[("solve", solved), ("total", start.elapsed().as_secs_f64())])?;
    Ok(Outcome {
        files: w.files,
        passed: true,
        summary: None,
    })
}

pub fn cmd_simulate(cfg: &Config) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let m = cfg.model()?;
    let mu = m.mu()?.clone();
    let grid = cfg.grid()?;
    let horizon = cfg.run.t.unwrap_or(*grid.last().unwrap());
    if grid.iter().any(|&t| t > horizon) {
        return Err(CliError::config("run.time_grid", format!("extends beyond run.T = {horizon}")));
    }
    let n = cfg.n();
    let reps = cfg.replicas();
    let logs = cfg.params.genealogy_replicas.unwrap_or(0).min(reps);
    let base = SuperConfig::new(n, horizon, grid.clone()).with_limits(limits(cfg));
    let streams = RngStreams::new(cfg.seed());
    let runs = (0..reps)
        .into_par_iter()
        .map(|r| {
            let c = if r < logs { base.clone().with_tracking(Tracking::Full) } else { base.clone() };
            simulate_super(&m.motion, &m.alpha, &m.beta, &mu, &c, &mut streams.stream(r as u64, Purpose::Dynamics))
                .map_err(|source| CliError::Replica { replica: r, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let simulated = start.elapsed().as_secs_f64();

    let k = m.n();
    let labels = m.space.labels();
    let mut w = Writer::new(cfg)?;
    let mut header: Vec<&str> = vec!["replica", "time"];
    header.extend(labels.iter().map(|s| s.as_str()));
    header.push("total");
    let mut rows = Vec::with_capacity(reps * grid.len());
    for (r, tr) in runs.iter().enumerate() {
        for (i, &t) in grid.iter().enumerate() {
            let x = tr.mass_at(i)?;
            let mut row = vec![r.to_string(), num(t)];
            row.extend(x.masses().iter().map(|&v| num(v)));
            row.push(num(tr.total_mass_at(i)?));
            rows.push(row);
        }
    }
    w.table("masses", &header, &rows)?;

    let mut summary = Vec::new();
    for (i, &t) in grid.iter().enumerate() {
        for x in 0..k {
            let xs: Vec<f64> = runs.iter().map(|tr| tr.counts[i][x] as f64 / n as f64).collect();
            let e = Estimate::from_samples(&xs)?;
            let ind = Field::new((0..k).map(|y| if y == x { 1.0 } else { 0.0 }).collect())?;
            let reference = mu.integrate(&linear_moment(&m.motion, &m.beta, &ind, t)?)?;
            summary.push(vec![num(t), labels[x].clone(), num(e.mean), num(e.se), num(reference)]);
        }
    }
    w.table("summary", &["time", "state", "mean", "se", "reference"], &summary)?;
    for (r, tr) in runs.iter().enumerate().take(logs) {
        if let Some(g) = &tr.genealogy {
            w.text(&format!("genealogy_{r}.csv"), &g.to_log())?;
        }
    }
    w.manifest("simulate", None)?;
    w.timings(&[("simulate", simulated), ("total", start.elapsed().as_secs_f64())])?;
    Ok(Outcome {
        files: w.files,
        passed: true,
        summary: None,
    })
}

pub fn cmd_verify(cfg: &Config) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let name = cfg
        .scenario
        .clone()
        .ok_or_else(|| CliError::config("scenario", "no scenario given (config key or --scenario)"))?;
    let report = scenarios::run(&name, cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut w = Writer::new(cfg)?;
    w.report(&name, &report)?;
    w.manifest("verify", Some(&name))?;
    w.timings(&[(name.as_str(), elapsed)])?;
    Ok(Outcome {
        files: w.files,
        passed: report.passed(),
        summary: Some(report_text(&name, &report)),
    })
}
