//! Acceptance run: one PASS/FAIL line per criterion, then a nonzero exit if any
//! criterion failed. Built with `harness = false` so the lines always print.
//!
//! Monte Carlo criteria run the shipped configs in `configs/` through the same
//! code path as `trimtree verify`. Wall-clock budgets are part of each verdict.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use trimtree::model::{Extended, Field, MotionCtmc};
use trimtree::rng::{Purpose, RngStreams};
use trimtree::semigroup::{u_infinity, SolverOptions};
use trimtree::stats::{
    chi_square_gof, ks_uniform, poisson_gof, proportion_two_sample, two_sample_chi_square, two_sample_count_vectors,
    z_test, Estimate, TestResult,
};
use trimtree::trim::CouplingReport;
use trimtree_cli::{cmd_simulate, cmd_solve, cmd_verify, scenarios, Config};

struct Verdict {
    passed: bool,
    detail: String,
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("trimtree-acceptance-{}", std::process::id())).join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn load(name: &str) -> Config {
    let mut cfg = Config::load(&configs_dir().join(format!("{name}.json"))).expect("shipped config loads");
    cfg.output.dir = scratch(name).to_string_lossy().into_owned();
    cfg
}

fn failures(r: &CouplingReport) -> String {
    r.failures()
        .map(|c| format!("{} = {:.4e} vs {:.4e}", c.name, c.statistic, c.threshold))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Runs scenario configs and requires every report to pass.
fn scenario_configs(configs: &[&str]) -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in configs {
        let cfg = load(name);
        let scenario = cfg.scenario.clone().expect("config names its scenario");
        match scenarios::run(&scenario, &cfg) {
            Ok(r) => {
                let ok = r.passed();
                passed &= ok;
                if ok {
                    parts.push(format!("{name}: {} checks ok", r.checks.len()));
                } else {
                    parts.push(format!("{name}: {}", failures(&r)));
                }
            }
            Err(e) => {
                passed = false;
                parts.push(format!("{name}: error {e}"));
            }
        }
    }
    Verdict {
        passed,
        detail: parts.join(", "),
    }
}

fn closed_form() -> Verdict {
    let opts = SolverOptions::default();
    let still = MotionCtmc::still(1);
    let grid = [0.5_f64, 1.0, 2.0];
    let times = [0.1_f64, 1.0, 10.0];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut value = |a: f64, b: f64, t: f64| -> Option<f64> {
        cases += 1;
        let u = u_infinity(&still, &Field::constant(1, a), &Field::constant(1, b), t, &opts).ok()?;
        match u.get(0) {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    };
    let mut ok = true;
    for &a in &grid {
        for &t in &times {
            for &b in &grid {
                let exact = b / (a * (1.0 - (-b * t).exp()));
                match value(a, b, t) {
                    Some(v) => worst = worst.max((v - exact).abs() / exact),
                    None => ok = false,
                }
            }
            let exact = 1.0 / (a * t);
            match value(a, 0.0, t) {
                Some(v) => worst = worst.max((v - exact).abs() / exact),
                None => ok = false,
            }
        }
    }
    Verdict {
        passed: ok && worst <= 1e-6,
        detail: format!("{cases} cases, max relative error {worst:.2e} (tolerance 1e-6)"),
    }
}

/// Null rejection rate of every test at level 0.01 over 1000 synthetic repetitions.
fn calibration() -> Verdict {
    const REPS: u64 = 1000;
    const LEVEL: f64 = 0.01;
    let streams = RngStreams::new(20_260_101);
    type Case = (&'static str, Box<dyn Fn(&mut trimtree::rng::StreamRng) -> TestResult>);
    let pois = |m: f64| Poisson::new(m).expect("positive mean");
    let cases: Vec<Case> = vec![
        (
            "chi_square_gof",
            Box::new(|rng| {
                let probs = [0.1, 0.2, 0.3, 0.4];
                let mut obs = [0u64; 4];
                for _ in 0..500 {
                    let u: f64 = rng.random();
                    let k = if u < 0.1 {
                        0
                    } else if u < 0.3 {
                        1
                    } else if u < 0.6 {
                        2
                    } else {
                        3
                    };
                    obs[k] += 1;
                }
                chi_square_gof("null", &obs, &probs, LEVEL).unwrap()
            }),
        ),
        (
            "poisson_gof",
            Box::new(move |rng| {
                let d = pois(2.5);
                let xs: Vec<u64> = (0..500).map(|_| d.sample(rng) as u64).collect();
                poisson_gof("null", &xs, 2.5, LEVEL).unwrap()
            }),
        ),
        (
            "two_sample_chi_square",
            Box::new(move |rng| {
                let d = pois(3.0);
                let a: Vec<u64> = (0..500).map(|_| d.sample(rng) as u64).collect();
                let b: Vec<u64> = (0..500).map(|_| d.sample(rng) as u64).collect();
                two_sample_chi_square("null", &a, &b, LEVEL).unwrap()
            }),
        ),
        (
            "two_sample_count_vectors",
            Box::new(move |rng| {
                let (d0, d1) = (pois(1.5), pois(0.7));
                let draw = |rng: &mut trimtree::rng::StreamRng| -> Vec<Vec<u64>> {
                    (0..500).map(|_| vec![d0.sample(rng) as u64, d1.sample(rng) as u64]).collect()
                };
                let a = draw(rng);
                let b = draw(rng);
                two_sample_count_vectors("null", &a, &b, LEVEL).unwrap()
            }),
        ),
        (
            "z_test",
            Box::new(|rng| {
                let xs: Vec<f64> = (0..200).map(|_| 1.0 + 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
                z_test("null", &Estimate::from_samples(&xs).unwrap(), 1.0, LEVEL)
            }),
        ),
        (
            "proportion_two_sample",
            Box::new(|rng| {
                let mut hits = || (0..500).filter(|_| rng.random::<f64>() < 0.3).count();
                let (a, b) = (hits(), hits());
                proportion_two_sample("null", a, 500, b, 500, LEVEL)
            }),
        ),
        (
            "ks_uniform",
            Box::new(|rng| {
                let xs: Vec<f64> = (0..500).map(|_| rng.random()).collect();
                ks_uniform("null", &xs, LEVEL).unwrap()
            }),
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, test)) in cases.iter().enumerate() {
        let s = streams.derive(i as u64);
        let rejected = (0..REPS)
            .filter(|&r| !test(&mut s.stream(r, Purpose::Synthetic)).passed)
            .count();
        let rate = rejected as f64 / REPS as f64;
        ok &= (0.002..=0.03).contains(&rate);
        parts.push(format!("{name} {rate:.3}"));
    }
    Verdict {
        passed: ok,
        detail: format!("rejection rates in [0.002, 0.03]: {}", parts.join(", ")),
    }
}

/// Every file except the wall-clock timings must be byte-identical across re-runs.
fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .filter(|n| n != "timings.json")
        .collect();
    names.sort();
    for n in &names {
        let x = std::fs::read(a.join(n)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(n)).map_err(|e| format!("{}: {e}", n.to_string_lossy()))?;
        if x != y {
            return Err(format!("{} differs", n.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn determinism() -> Verdict {
    type Cmd = fn(&Config) -> Result<trimtree_cli::Outcome, trimtree_cli::CliError>;
    let runs: [(&str, Cmd, Option<usize>); 5] = [
        ("weighted-identity", cmd_verify, None),
        ("girsanov-htransform", cmd_verify, Some(5000)),
        ("theorem9-trimmed-tree-two-state", cmd_verify, Some(60)),
        ("prop7-fixed-point", cmd_solve, None),
        ("moments-check-a", cmd_simulate, Some(50)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, cmd, reps) in runs {
        let mut dirs = Vec::new();
        for k in 0..2 {
            let mut cfg = load(name);
            if reps.is_some() {
                cfg.run.replicas = reps;
            }
            let d = scratch(&format!("{name}-det{k}"));
            cfg.output.dir = d.to_string_lossy().into_owned();
            if let Err(e) = cmd(&cfg) {
                ok = false;
                parts.push(format!("{name}: error {e}"));
            }
            dirs.push(d);
        }
        match same_outputs(&dirs[0], &dirs[1]) {
            Ok(n) => parts.push(format!("{name}: {n} files identical")),
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Verdict {
        passed: ok,
        detail: parts.join(", "),
    }
}

fn main() {
    // Accept and ignore libtest-style arguments (`cargo test -- --nocapture` etc.).
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Criterion = (u32, &'static str, Option<u64>, Box<dyn Fn() -> Verdict>);
    let criteria: Vec<Criterion> = vec![
        (1, "closed-form U_t inf", Some(1), Box::new(closed_form)),
        (2, "lemma12-bound", Some(10), Box::new(|| scenario_configs(&["lemma12-bound"]))),
        (3, "prop7-fixed-point", Some(10), Box::new(|| scenario_configs(&["prop7-fixed-point"]))),
        (4, "weighted-identity", Some(10), Box::new(|| scenario_configs(&["weighted-identity"]))),
        (5, "girsanov-htransform", Some(30), Box::new(|| scenario_configs(&["girsanov-htransform"]))),
        (
            6,
            "moments-check",
            Some(120),
            Box::new(|| scenario_configs(&["moments-check-a", "moments-check-b", "moments-check-c"])),
        ),
        (
            7,
            "lemma1-poissonization",
            Some(120),
            Box::new(|| scenario_configs(&["lemma1-poissonization-a", "lemma1-poissonization-b"])),
        ),
        (8, "corollary37-ancestors", Some(120), Box::new(|| scenario_configs(&["corollary37-ancestors"]))),
        (
            9,
            "theorem6-embedding",
            Some(180),
            Box::new(|| scenario_configs(&["theorem6-embedding-identity", "theorem6-embedding-weighted"])),
        ),
        (
            10,
            "theorem9-trimmed-tree",
            Some(300),
            Box::new(|| scenario_configs(&["theorem9-trimmed-tree-yule", "theorem9-trimmed-tree-two-state"])),
        ),
        (11, "example32-flow", Some(10), Box::new(|| scenario_configs(&["example32-flow"]))),
        (12, "lemma31-dichotomy", Some(120), Box::new(|| scenario_configs(&["lemma31-dichotomy"]))),
        (13, "statistical calibration", Some(60), Box::new(calibration)),
        (14, "determinism", None, Box::new(determinism)),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, budget, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || id.to_string() == *f) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= Duration::from_secs(b));
        let passed = v.passed && in_time;
        failed += usize::from(!passed);
        let budget_text = budget.map_or(String::new(), |b| format!(", budget {b} s"));
        let late = if in_time { "" } else { " OVER BUDGET" };
        println!(
            "{} criterion {id:>2} {name}: {} ({:.1} s{budget_text}){late}",
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
        );
    }
    let _ = std::fs::remove_dir_all(std::env::temp_dir().join(format!("trimtree-acceptance-{}", std::process::id())));
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
