use super::*;
use crate::rng::{Purpose, RngStreams};
use crate::semigroup::{linear_moment, solve_loglaplace, u_infinity_finite};
use crate::stats::{laplace_estimate, two_sample_chi_square, Estimate};
use nalgebra::DMatrix;

fn q2() -> MotionCtmc {
    MotionCtmc::from_row_major(2, &[-1.0, 1.0, 0.5, -0.5]).unwrap()
}

fn f(v: &[f64]) -> Field {
    Field::new(v.to_vec()).unwrap()
}

fn m(v: &[f64]) -> Measure {
    Measure::new(v.to_vec()).unwrap()
}

#[test]
fn no_branching_conserves_mass() {
    let cfg = SuperConfig::new(50, 2.0, vec![0.0, 1.0, 2.0]);
    let mut rng = RngStreams::new(1).stream(0, Purpose::Dynamics);
    let tr = simulate_super(&q2(), &f(&[0.0, 0.0]), &f(&[0.0, 0.0]), &m(&[1.0, 1.0]), &cfg, &mut rng).unwrap();
    let m0 = tr.total_mass_at(0).unwrap();
    assert!(m0 > 0.0);
    for k in 0..3 {
        assert_eq!(tr.total_mass_at(k).unwrap(), m0);
    }
    assert_eq!(tr.final_mass(), m0);
}

#[test]
fn mean_matches_linear_semigroup() {
    let (alpha, beta) = (f(&[0.2, 0.1]), f(&[0.3, -0.2]));
    let mu = m(&[1.0, 0.5]);
    let ff = f(&[1.0, 2.0]);
    let t = 1.0;
    let cfg = SuperConfig::new(100, t, vec![t]);
    let streams = RngStreams::new(2);
    let xs: Vec<f64> = (0..4000)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            let tr = simulate_super(&q2(), &alpha, &beta, &mu, &cfg, &mut rng).unwrap();
            tr.mass_at(0).unwrap().integrate(&ff).unwrap()
        })
        .collect();
    let e = Estimate::from_samples(&xs).unwrap();
    let exact = mu.integrate(&linear_moment(&q2(), &beta, &ff, t).unwrap()).unwrap();
    assert!(e.within(exact, 4.0), "{e:?} vs {exact}");
}

#[test]
fn extinction_matches_u_infinity() {
    let (alpha, beta) = (f(&[0.02, 0.03]), f(&[0.05, 0.02]));
    let mu = m(&[0.03, 0.02]);
    let t = 2.0;
    let cfg = SuperConfig::new(500, t, vec![t]);
    let streams = RngStreams::new(3);
    let n = 6000;
    let dead = (0..n)
        .filter(|&r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            simulate_super(&q2(), &alpha, &beta, &mu, &cfg, &mut rng).unwrap().is_extinct()
        })
        .count();
    let u = u_infinity_finite(&q2(), &alpha, &beta, t, &SolverOptions::default()).unwrap();
    let p = (-mu.integrate(&u).unwrap()).exp();
    let ph = dead as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((ph - p).abs() < 4.0 * se, "{ph} vs {p}");
}

#[test]
fn sde_laplace_matches_semigroup() {
    let (alpha, beta) = (f(&[0.5, 0.3]), f(&[0.2, -0.1]));
    let mu = m(&[1.0, 0.8]);
    let ff = f(&[0.7, 0.4]);
    let t = 1.0;
    let streams = RngStreams::new(4);
    let xs: Vec<Measure> = (0..4000)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            simulate_super_sde(&q2(), &alpha, &beta, &mu, 2e-3, &[t], &mut rng).unwrap().pop().unwrap()
        })
        .collect();
    let e = laplace_estimate(&xs, &ff).unwrap();
    let u = solve_loglaplace(&q2(), &alpha, &beta, &ff, t, &SolverOptions::default()).unwrap().u;
    let exact = (-mu.integrate(&u).unwrap()).exp();
    assert!(e.within(exact, 4.0), "{e:?} vs {exact}");
}

#[test]
fn sde_without_noise_is_linear_flow() {
    let beta = f(&[0.4, -0.3]);
    let mu = m(&[1.0, 2.0]);
    let mut rng = RngStreams::new(5).stream(0, Purpose::Dynamics);
    let out = simulate_super_sde(&q2(), &Field::zeros(2), &beta, &mu, 1e-4, &[1.0], &mut rng).unwrap();
    for x in 0..2 {
        let ind = Field::new((0..2).map(|y| if y == x { 1.0 } else { 0.0 }).collect()).unwrap();
        let exact = mu.integrate(&linear_moment(&q2(), &beta, &ind, 1.0).unwrap()).unwrap();
        assert!((out[0].masses()[x] - exact).abs() < 1e-3 * exact);
    }
}

#[test]
fn lumped_states_match_merged_model() {
    // States 1 and 2 share alpha, beta and their exit rates to 0.
    let q3 = MotionCtmc::from_row_major(3, &[-1.5, 1.0, 0.5, 2.0, -2.7, 0.7, 2.0, 0.3, -2.3]).unwrap();
    let qm = MotionCtmc::from_row_major(2, &[-1.5, 1.5, 2.0, -2.0]).unwrap();
    let (a3, b3) = (f(&[0.1, 0.05, 0.05]), f(&[0.2, -0.1, -0.1]));
    let (am, bm) = (f(&[0.1, 0.05]), f(&[0.2, -0.1]));
    let t = 1.0;
    let cfg = SuperConfig::new(20, t, vec![t]);
    let streams = RngStreams::new(6);
    let (mut a0, mut a1, mut b0, mut b1) = (vec![], vec![], vec![], vec![]);
    for r in 0..3000 {
        let mut rng = streams.stream(r, Purpose::Dynamics);
        let tr = simulate_super(&q3, &a3, &b3, &m(&[1.0, 0.5, 0.5]), &cfg, &mut rng).unwrap();
        a0.push(tr.counts[0][0]);
        a1.push(tr.counts[0][1] + tr.counts[0][2]);
        let mut rng = streams.stream(r, Purpose::Comparison);
        let tr = simulate_super(&qm, &am, &bm, &m(&[1.0, 1.0]), &cfg, &mut rng).unwrap();
        b0.push(tr.counts[0][0]);
        b1.push(tr.counts[0][1]);
    }
    for (a, b) in [(a0, b0), (a1, b1)] {
        let r = two_sample_chi_square("lumped", &hist(&a), &hist(&b), 1e-3).unwrap();
        assert!(r.passed, "{r:?}");
    }
}

fn hist(xs: &[u64]) -> Vec<u64> {
    let top = *xs.iter().max().unwrap() as usize;
    let mut h = vec![0; top + 1];
    for &x in xs {
        h[x as usize] += 1;
    }
    h
}

#[test]
fn historical_mean_without_branching_noise() {
    // E sum over alive particles of time spent in state 0 equals the
    // derivative of exp(t(Q + diag(beta + l e_0))) 1 in l at l = 0.
    let beta = f(&[0.3, -0.4]);
    let q = q2();
    let t = 1.5;
    let n = 40;
    let mut cfg = SuperConfig::new(n, t, vec![t]).with_tracking(Tracking::Full);
    cfg.limits = RunLimits::default();
    let streams = RngStreams::new(7);
    let mu = m(&[1.0, 0.0]);
    let xs: Vec<f64> = (0..1500)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            let tr = simulate_super(&q, &Field::zeros(2), &beta, &mu, &cfg, &mut rng).unwrap();
            let g = tr.genealogy.unwrap();
            let alive = g.alive_at(t).unwrap();
            alive.ids().map(|id| g.lineage_prefix(id, t).unwrap().occupation(2)[0]).sum::<f64>() / n as f64
        })
        .collect();
    let e = Estimate::from_samples(&xs).unwrap();
    let value = |l: f64| {
        let mut a = q.matrix().clone();
        a[(0, 0)] += beta[0] + l;
        a[(1, 1)] += beta[1];
        (a * t).exp() * DMatrix::from_element(2, 1, 1.0)
    };
    let h = 1e-5;
    let exact = (value(h)[(0, 0)] - value(-h)[(0, 0)]) / (2.0 * h);
    assert!(e.within(exact, 4.0), "{e:?} vs {exact}");
}

#[test]
fn ancestors_are_nested_and_consistent() {
    let (alpha, beta) = (f(&[0.3, 0.2]), f(&[0.4, 0.1]));
    let grid = vec![0.0, 0.5, 1.0, 1.5, 2.0];
    let streams = RngStreams::new(8);
    for r in 0..30 {
        let cfg = SuperConfig::new(10, 2.0, grid.clone()).with_tracking(Tracking::Checkpoints);
        let mut rng = streams.stream(r, Purpose::Dynamics);
        let tr = simulate_super(&q2(), &alpha, &beta, &m(&[1.0, 1.0]), &cfg, &mut rng).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            let own = ancestors(&tr, t, t).unwrap();
            assert_eq!(own.counts(2), tr.counts[k]);
            let mut prev = own;
            for &s in &grid[k + 1..] {
                let a = ancestors(&tr, t, s).unwrap();
                assert!(a.is_subset_of(&prev));
                prev = a;
            }
        }
        let tail = TailSurvival::new(&q2(), &alpha, &beta, 10, 1.0, &SolverOptions::default()).unwrap();
        let longer = TailSurvival::new(&q2(), &alpha, &beta, 10, 3.0, &SolverOptions::default()).unwrap();
        let marks = tail_marks(&tr, &mut streams.stream(r, Purpose::Completion)).unwrap();
        for &t in &grid {
            let a = ancestors_beyond(&tr, t, &tail, &marks).unwrap();
            let b = ancestors_beyond(&tr, t, &longer, &marks).unwrap();
            assert!(b.is_subset_of(&a));
            assert!(a.is_subset_of(&ancestors(&tr, t, 2.0).unwrap()));
        }
    }
}

#[test]
fn full_and_checkpoint_ancestors_agree_in_law() {
    let (alpha, beta) = (f(&[0.3, 0.2]), f(&[0.4, 0.1]));
    let grid = vec![0.5, 1.5];
    let streams = RngStreams::new(9);
    let (mut a, mut b) = (vec![], vec![]);
    for r in 0..2000 {
        let cfg = SuperConfig::new(5, 1.5, grid.clone()).with_tracking(Tracking::Checkpoints);
        let mut rng = streams.stream(r, Purpose::Dynamics);
        let tr = simulate_super(&q2(), &alpha, &beta, &m(&[1.0, 1.0]), &cfg, &mut rng).unwrap();
        a.push(ancestors(&tr, 0.5, 1.5).unwrap().len() as u64);
        let cfg = cfg.with_tracking(Tracking::Full);
        let mut rng = streams.stream(r, Purpose::Comparison);
        let tr = simulate_super(&q2(), &alpha, &beta, &m(&[1.0, 1.0]), &cfg, &mut rng).unwrap();
        b.push(ancestors(&tr, 0.5, 1.5).unwrap().len() as u64);
    }
    let r = two_sample_chi_square("ancestors", &hist(&a), &hist(&b), 1e-3).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn reweight_scales_masses() {
    let x = m(&[1.0, 2.0]);
    let y = reweight(&x, &f(&[0.5, 3.0])).unwrap();
    assert_eq!(y.masses(), &[0.5, 6.0]);
    assert!(reweight(&x, &f(&[0.0, 1.0])).is_err());
}

#[test]
fn stop_mass_ends_run() {
    let cfg = SuperConfig::new(20, 50.0, vec![50.0]).with_stop_mass(5.0);
    let mut rng = RngStreams::new(10).stream(0, Purpose::Dynamics);
    let tr = simulate_super(&MotionCtmc::still(1), &f(&[0.01]), &f(&[2.0]), &m(&[1.0]), &cfg, &mut rng).unwrap();
    assert!(tr.stopped.is_some());
    assert!(tr.counts.is_empty());
    assert!(!tr.is_extinct());
}
