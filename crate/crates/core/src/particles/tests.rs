use super::*;
use crate::model::{Measure, Particle};
use crate::rng::{Purpose, RngStreams};
use crate::semigroup::{solve_generating, SolverOptions};
use crate::stats::{generating_estimate, ks_uniform, two_sample_chi_square, Estimate};
use std::collections::BTreeSet;

fn two_state(b: f64, d: f64) -> BranchingSystem {
    BranchingSystem::new(
        MotionCtmc::from_row_major(2, &[-1.0, 1.0, 2.0, -2.0]).unwrap(),
        Field::constant(2, b),
        Field::constant(2, d),
    )
    .unwrap()
}

fn nu(counts: &[u64]) -> PointMeasure {
    PointMeasure::from_counts(counts, &mut IdSource::new())
}

#[test]
fn no_branching_keeps_population() {
    let sys = two_state(0.0, 0.0);
    let mut rng = RngStreams::new(1).stream(0, Purpose::Dynamics);
    let g = simulate_genealogy(&sys, &nu(&[3, 2]), 5.0, &RunLimits::default(), &mut rng).unwrap();
    for t in [0.0, 1.0, 2.5, 5.0] {
        assert_eq!(alive_at(&g, t).unwrap().len(), 5);
    }
    assert!(g.events().iter().all(|e| matches!(e.kind, EventKind::Birth | EventKind::Jump)));
}

#[test]
fn yule_mean() {
    let sys = BranchingSystem::new(MotionCtmc::still(1), Field::constant(1, 1.0), Field::zeros(1)).unwrap();
    let streams = RngStreams::new(2);
    let xs: Vec<f64> = (0..10_000)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            let p = simulate_counts(&sys, &[1], 1.5, &[1.5], &RunLimits::default(), &mut rng).unwrap();
            p.counts[0][0] as f64
        })
        .collect();
    let e = Estimate::from_samples(&xs).unwrap();
    assert!(e.within(1.5f64.exp(), 4.0), "{e:?}");
}

#[test]
fn generating_functional_matches_semigroup() {
    let sys = two_state(1.2, 0.7);
    let nu0 = nu(&[2, 1]);
    let t = 1.0;
    let streams = RngStreams::new(3);
    let samples: Vec<PointMeasure> = (0..100_000)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            let g = simulate_genealogy(&sys, &nu0, t, &RunLimits::default(), &mut rng).unwrap();
            alive_at(&g, t).unwrap()
        })
        .collect();
    let fs = [[0.1, 0.5], [0.9, 0.2], [0.3, 0.3], [1.0, 0.0], [0.6, 0.8]];
    for f in fs {
        let f = Field::new(f.to_vec()).unwrap();
        let u = solve_generating(sys.motion(), sys.birth(), sys.death(), &f, t, &SolverOptions::default()).unwrap().u;
        let exact = (1.0 - u[0]).powi(2) * (1.0 - u[1]);
        let e = generating_estimate(&samples, &f).unwrap();
        assert!(e.within(exact, 4.0), "{f:?}: {e:?} vs {exact}");
    }
}

#[test]
fn alive_set_basics_and_replay() {
    let sys = two_state(1.0, 0.5);
    let nu0 = nu(&[2, 2]);
    let mut rng = RngStreams::new(4).stream(0, Purpose::Dynamics);
    let g = simulate_genealogy(&sys, &nu0, 2.0, &RunLimits::default(), &mut rng).unwrap();
    assert_eq!(alive_at(&g, 0.0).unwrap(), nu0);
    assert!(alive_at(&g, 2.5).is_err());

    // replay the log from scratch and compare alive sets on a grid
    for k in 0..=20 {
        let t = 0.1 * k as f64;
        let mut alive: std::collections::BTreeMap<u64, usize> = Default::default();
        for e in g.events().iter().filter(|e| e.time <= t) {
            match e.kind {
                EventKind::Birth | EventKind::Jump => {
                    alive.insert(e.id, e.state);
                }
                EventKind::Split | EventKind::Death => {
                    alive.remove(&e.id);
                }
            }
        }
        let replay = PointMeasure::from_particles(alive.into_iter().map(|(id, state)| Particle { state, id }).collect()).unwrap();
        assert_eq!(replay, alive_at(&g, t).unwrap(), "t = {t}");
    }

    // each split raises the count by exactly one
    if let Some(s) = g.events().iter().find(|e| e.kind == EventKind::Split) {
        let before = alive_at(&g, s.time - 1e-12).unwrap().len();
        let after = alive_at(&g, s.time).unwrap().len();
        assert_eq!(after, before + 1);
    }
}

#[test]
fn event_log_round_trip_and_determinism() {
    let sys = two_state(1.0, 0.5);
    let nu0 = nu(&[3, 1]);
    let run = |seed| {
        let mut rng = RngStreams::new(seed).stream(0, Purpose::Dynamics);
        simulate_genealogy(&sys, &nu0, 2.0, &RunLimits::default(), &mut rng).unwrap()
    };
    let a = run(5);
    let b = run(5);
    assert_eq!(a.to_log(), b.to_log());
    assert_ne!(a.to_log(), run(6).to_log());
    let parsed = Genealogy::from_log(&a.to_log(), 2, 2.0).unwrap();
    assert_eq!(parsed, a);
    assert!(Genealogy::from_log("time,kind\n", 2, 2.0).is_err());
    assert!(Genealogy::from_log("time,kind,id,parent,state\n0,birth,0,-,5\n", 2, 2.0).is_err());
}

#[test]
fn prefix_of_unmoved_particle_and_time_zero() {
    let sys = BranchingSystem::new(MotionCtmc::still(3), Field::zeros(3), Field::zeros(3)).unwrap();
    let nu0 = nu(&[0, 1, 0]);
    let mut rng = RngStreams::new(7).stream(0, Purpose::Dynamics);
    let g = simulate_genealogy(&sys, &nu0, 1.0, &RunLimits::default(), &mut rng).unwrap();
    let p = lineage_prefix(&g, 0, 1.0).unwrap();
    assert_eq!((p.start(), p.jumps().len(), p.horizon()), (1, 0, 1.0));
    assert!(lineage_prefix(&g, 99, 1.0).is_err());

    let sys = two_state(1.0, 0.0);
    let g = simulate_genealogy(&sys, &nu(&[1, 0]), 2.0, &RunLimits::default(), &mut rng).unwrap();
    let last = alive_at(&g, 2.0).unwrap().ids().last().unwrap();
    let p0 = lineage_prefix(&g, last, 0.0).unwrap();
    assert_eq!((p0.start(), p0.jumps().len()), (0, 0));
}

#[test]
fn siblings_share_prefix_and_prefix_is_a_motion_path() {
    let q = 3.0;
    let sys = BranchingSystem::new(
        MotionCtmc::from_row_major(2, &[-q, q, q, -q]).unwrap(),
        Field::constant(2, 1.0),
        Field::constant(2, 0.3),
    )
    .unwrap();
    let horizon = 4.0;
    let streams = RngStreams::new(8);
    let mut us = Vec::new();
    for r in 0..3000 {
        let mut rng = streams.stream(r, Purpose::Dynamics);
        let g = simulate_genealogy(&sys, &nu(&[1, 0]), horizon, &RunLimits::default(), &mut rng).unwrap();
        let alive = alive_at(&g, horizon).unwrap();
        let Some(first) = alive.ids().next() else { continue };
        let path = lineage_prefix(&g, first, horizon).unwrap();
        if let Some(&(tau, _)) = path.jumps().first() {
            us.push(-(-q * tau).exp_m1() / -(-q * horizon).exp_m1());
        }
        // siblings from the first split agree on [0, split time]
        if let Some(s) = g.events().iter().find(|e| e.kind == EventKind::Split) {
            let kids: Vec<u64> = g
                .events()
                .iter()
                .filter(|e| e.kind == EventKind::Birth && e.parent == Some(s.id))
                .map(|e| e.id)
                .collect();
            let a = lineage_prefix(&g, kids[0], s.time).unwrap();
            let b = lineage_prefix(&g, kids[1], s.time).unwrap();
            assert_eq!(a, b);
        }
    }
    assert!(us.len() > 1000);
    assert!(ks_uniform("holding", &us, 0.01).unwrap().passed);
}

#[test]
fn branching_property_superposition() {
    let sys = two_state(1.0, 0.8);
    let streams = RngStreams::new(9);
    let limits = RunLimits::default();
    let joint: Vec<u64> = (0..20_000)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Dynamics);
            simulate_counts(&sys, &[2, 1], 1.0, &[1.0], &limits, &mut rng).unwrap().counts[0].iter().sum()
        })
        .collect();
    let split: Vec<u64> = (0..20_000)
        .map(|r| {
            let mut rng = streams.stream(r, Purpose::Comparison);
            let a: u64 = simulate_counts(&sys, &[2, 0], 1.0, &[1.0], &limits, &mut rng).unwrap().counts[0].iter().sum();
            let b: u64 = simulate_counts(&sys, &[0, 1], 1.0, &[1.0], &limits, &mut rng).unwrap().counts[0].iter().sum();
            a + b
        })
        .collect();
    assert!(two_sample_chi_square("superposition", &joint, &split, 0.01).unwrap().passed);
}

#[test]
fn sibling_subtrees_are_exchangeable() {
    let sys = two_state(1.0, 0.4);
    let streams = RngStreams::new(10);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for r in 0..5000 {
        let mut rng = streams.stream(r, Purpose::Dynamics);
        let g = simulate_genealogy(&sys, &nu(&[1, 0]), 2.0, &RunLimits::default(), &mut rng).unwrap();
        let Some(s) = g.events().iter().find(|e| e.kind == EventKind::Split) else { continue };
        let kids: Vec<u64> = g
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Birth && e.parent == Some(s.id))
            .map(|e| e.id)
            .collect();
        let alive = alive_at(&g, 2.0).unwrap();
        let count = |k| alive.ids().filter(|&id| g.ancestor_at(id, s.time).ok() == Some(k)).count() as u64;
        left.push(count(kids[0]));
        right.push(count(kids[1]));
    }
    assert!(two_sample_chi_square("siblings", &left, &right, 0.01).unwrap().passed);
}

#[test]
fn without_deaths_prefixes_cover_the_past() {
    let sys = two_state(1.0, 0.0);
    let mut rng = RngStreams::new(11).stream(0, Purpose::Dynamics);
    let g = simulate_genealogy(&sys, &nu(&[2, 1]), 2.0, &RunLimits::default(), &mut rng).unwrap();
    let now = alive_at(&g, 2.0).unwrap();
    for s in [0.0, 0.5, 1.0, 1.7, 2.0] {
        let anc: BTreeSet<u64> = now.ids().map(|id| g.ancestor_at(id, s).unwrap()).collect();
        let past: BTreeSet<u64> = alive_at(&g, s).unwrap().ids().collect();
        assert_eq!(anc, past, "s = {s}");
        for id in now.ids() {
            let a = g.ancestor_at(id, s).unwrap();
            let state_then = alive_at(&g, s).unwrap().particles().iter().find(|p| p.id == a).unwrap().state;
            assert_eq!(lineage_prefix(&g, id, 2.0).unwrap().state_at(s), state_then);
        }
    }
}

#[test]
fn checkpoint_lineage_agrees_with_full_genealogy() {
    let sys = two_state(1.0, 0.6);
    let grid = [0.0, 0.5, 1.0, 1.5];
    for r in 0..50 {
        let nu0 = nu(&[3, 2]);
        let mut rng = RngStreams::new(12).stream(r, Purpose::Dynamics);
        let g = simulate_genealogy(&sys, &nu0, 1.5, &RunLimits::default(), &mut rng).unwrap();
        let mut rng = RngStreams::new(12).stream(r, Purpose::Dynamics);
        let (path, lin) = simulate_lineage(&sys, &[3, 2], 1.5, &grid, &RunLimits::default(), &mut rng).unwrap();
        for (j, &tj) in grid.iter().enumerate() {
            assert_eq!(path.counts[j], alive_at(&g, tj).unwrap().counts(2));
            for (k, &tk) in grid.iter().enumerate().take(j + 1) {
                let full: BTreeSet<u64> = alive_at(&g, tj).unwrap().ids().map(|id| g.ancestor_at(id, tk).unwrap()).collect();
                let compressed = lin.ancestors_of(lin.level_range(j), j, k);
                assert_eq!(full.len(), compressed.len(), "r={r} j={j} k={k}");
            }
        }
    }
}

#[test]
fn caps_are_errors_and_stop_is_not() {
    let sys = BranchingSystem::new(MotionCtmc::still(1), Field::constant(1, 2.0), Field::zeros(1)).unwrap();
    let mut rng = RngStreams::new(13).stream(0, Purpose::Dynamics);
    let tight = RunLimits {
        max_population: 50,
        ..RunLimits::default()
    };
    assert!(matches!(
        simulate_counts(&sys, &[1], 10.0, &[], &tight, &mut rng),
        Err(crate::Error::PopulationCap { .. })
    ));
    let few = RunLimits {
        max_events: 10,
        ..RunLimits::default()
    };
    assert!(matches!(simulate_counts(&sys, &[1], 10.0, &[], &few, &mut rng), Err(crate::Error::EventCap { .. })));
    let stop = RunLimits {
        stop_population: Some(100),
        ..RunLimits::default()
    };
    let p = simulate_counts(&sys, &[1], 10.0, &[1.0, 10.0], &stop, &mut rng).unwrap();
    assert!(p.stopped.is_some() && p.counts.len() < 2);
}

#[test]
fn poisson_start_zero_intensity() {
    let mut rng = RngStreams::new(14).stream(0, Purpose::Initial);
    let nu0 = crate::model::pois_sample(&Measure::zero(2), &mut IdSource::new(), &mut rng);
    let g = simulate_genealogy(&two_state(1.0, 1.0), &nu0, 1.0, &RunLimits::default(), &mut rng).unwrap();
    assert!(g.events().is_empty());
}
