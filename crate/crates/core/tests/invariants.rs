use std::sync::Arc;

use barycenter::oracles::{Quadratic, Rosenbrock, Sphere};
use barycenter::strategies::run_parallel_with;
use barycenter::{
    batch_barycenter, run_search, Accumulator, CuriosityDistribution, EvalRecord, Execution,
    Exponent, Oracle, Point, RunRecord, SearchBox, SearchConfig, ZeroOrderOracle,
};
use proptest::prelude::*;

fn records() -> impl Strategy<Value = (Vec<(Vec<f64>, f64)>, f64)> {
    (1usize..4).prop_flat_map(|d| {
        (
            prop::collection::vec(
                (prop::collection::vec(-1e3f64..1e3, d), -50.0f64..50.0),
                1..120,
            ),
            0.01f64..20.0,
        )
    })
}

fn bounding_box(pts: &[(Vec<f64>, f64)]) -> (Vec<f64>, Vec<f64>) {
    let d = pts[0].0.len();
    let lo = (0..d).map(|a| pts.iter().map(|p| p.0[a]).fold(f64::INFINITY, f64::min)).collect();
    let hi = (0..d).map(|a| pts.iter().map(|p| p.0[a]).fold(f64::NEG_INFINITY, f64::max)).collect();
    (lo, hi)
}

fn inside(x: &[f64], (lo, hi): &(Vec<f64>, Vec<f64>)) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h)
}

fn stream(pts: &[(Vec<f64>, f64)], nu: Exponent) -> Accumulator {
    pts.iter().fold(Accumulator::new(nu, pts[0].0.len()), |acc, (x, f)| {
        acc.absorb(&Point::new(x.clone()).unwrap(), *f).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn real_estimates_never_leave_the_hull((pts, nu) in records(), cut in 0.0f64..1.0) {
        let nu = Exponent::real(nu).unwrap();
        let bbox = bounding_box(&pts);
        let recs: Vec<EvalRecord> = pts
            .iter()
            .map(|(x, f)| EvalRecord::new(Point::new(x.clone()).unwrap(), *f, nu).unwrap())
            .collect();
        prop_assert!(inside(&batch_barycenter(&recs, nu).unwrap(), &bbox));
        prop_assert!(inside(&stream(&pts, nu).readout().unwrap(), &bbox));
        let k = ((pts.len() as f64 * cut) as usize).clamp(1, pts.len());
        if k < pts.len() {
            let merged = stream(&pts[k..], nu).merge(&stream(&pts[..k], nu)).unwrap();
            prop_assert!(inside(&merged.readout().unwrap(), &bbox));
        }
    }

    #[test]
    fn every_prefix_stays_in_its_own_hull((pts, nu) in records()) {
        let nu = Exponent::real(nu).unwrap();
        let mut acc = Accumulator::new(nu, pts[0].0.len());
        for n in 0..pts.len() {
            acc = acc.absorb(&Point::new(pts[n].0.clone()).unwrap(), pts[n].1).unwrap();
            prop_assert!(inside(&acc.readout().unwrap(), &bounding_box(&pts[..=n])));
        }
    }

    #[test]
    fn bounded_runs_stay_in_the_box(seed in any::<u64>(), nu in 0.1f64..5.0, var in 0.01f64..4.0) {
        let oracle = Oracle::new("rosenbrock", Arc::new(Rosenbrock));
        let bounds = SearchBox::new(
            Point::new(vec![-1.5, -0.5]).unwrap(),
            Point::new(vec![1.5, 2.0]).unwrap(),
        )
        .unwrap();
        let cfg = SearchConfig::new(
            Exponent::real(nu).unwrap(),
            CuriosityDistribution::isotropic(Point::zeros(2), var).unwrap(),
            Point::new(vec![-1.0, 1.0]).unwrap(),
            60,
            seed,
        )
        .with_momentum(0.4)
        .with_bounds(bounds.clone());
        let run = run_search(&cfg, &oracle).unwrap();
        prop_assert_eq!(run.rows.len(), 60);
        prop_assert_eq!(oracle.query_count(), 60);
        for row in &run.rows {
            prop_assert!(bounds.contains(&row.query));
            prop_assert!(bounds.contains(&row.readout));
        }
        prop_assert!(run.rows.iter().all(|r| run.summary.best_value <= r.value));
    }
}

fn sphere_run(exec: Execution, workers: usize) -> RunRecord {
    let oracle = Oracle::new("sphere", Arc::new(Sphere { center: vec![1.0, -2.0, 0.5] }));
    let dist = CuriosityDistribution::isotropic(Point::zeros(3), 0.2).unwrap();
    let configs: Vec<SearchConfig> = (0..workers)
        .map(|_| {
            SearchConfig::new(Exponent::real(3.0).unwrap(), dist.clone(), Point::zeros(3), 150, 42)
                .with_forgetting(0.99)
        })
        .collect();
    run_parallel_with(&configs, &oracle, exec).unwrap()
}

#[test]
fn worker_runs_are_reproducible_across_modes() {
    let seq = sphere_run(Execution::Sequential, 4);
    let par = sphere_run(Execution::Parallel, 4);
    assert_eq!(seq.accumulator, par.accumulator);
    for (a, b) in seq.workers.iter().zip(&par.workers) {
        assert_eq!(a.rows, b.rows);
    }
    assert_eq!(seq.summary.total_queries, 600);
    assert!(seq.summary.final_readout.distance(&Point::new(vec![1.0, -2.0, 0.5]).unwrap()) < 0.5);
}

#[test]
fn run_record_round_trips_through_json() {
    let oracle = Oracle::new("quadratic", Arc::new(Quadratic::diagonal(&[4.0, 1.0])));
    let cfg = SearchConfig::new(
        Exponent::real(1.0).unwrap(),
        CuriosityDistribution::isotropic(Point::zeros(2), 0.1).unwrap(),
        Point::new(vec![1.0, 1.0]).unwrap(),
        40,
        9,
    );
    let run = run_search(&cfg, &oracle).unwrap();
    let text = serde_json::to_string(&run).unwrap();
    let back: RunRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back.rows, run.rows);
    assert_eq!(back.config, cfg);
}
