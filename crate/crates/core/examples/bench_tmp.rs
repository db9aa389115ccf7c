use trimtree::model::*;
use trimtree::rng::*;
use trimtree::superproc::*;
fn main() {
    let q = MotionCtmc::from_row_major(2, &[-1.0, 1.0, 1.0, -1.0]).unwrap();
    let a = Field::new(vec![1.0, 1.0]).unwrap();
    let b = Field::new(vec![2.0, 0.5]).unwrap();
    let mu = Measure::new(vec![0.5, 0.5]).unwrap();
    for tr in [Tracking::Counts, Tracking::Checkpoints] {
        let cfg = SuperConfig::new(500, 1.0, vec![0.0, 0.5, 1.0]).with_tracking(tr);
        let s = RngStreams::new(1);
        let t0 = std::time::Instant::now();
        let mut ev = 0;
        for r in 0..50 {
            let mut rng = s.stream(r, Purpose::Dynamics);
            ev += simulate_super(&q, &a, &b, &mu, &cfg, &mut rng).unwrap().events;
        }
        let dt = t0.elapsed().as_secs_f64();
        println!("{tr:?}: {ev} events {dt:.2}s  {:.2e}/s", ev as f64 / dt);
    }
}
