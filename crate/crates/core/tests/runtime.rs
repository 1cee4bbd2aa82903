use std::collections::BTreeSet;

use polycodes::blockmat::{Matrix, PartitionScheme};
use polycodes::ffield::PrimeModulus;
use polycodes::runtime::{run_job, Assignment, DelayModel, JobError, JobSpec};
use polycodes::schemes::{Scheme, SchemeKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn operands(p: PartitionScheme, seed: u64) -> (Matrix, Matrix) {
    let q = PrimeModulus::default_field();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        Matrix::random(p.p0 * 3, p.p1 * 2, q, &mut rng),
        Matrix::random(p.p1 * 2, p.p2 * 3, q, &mut rng),
    )
}

fn delayed(kind: SchemeKind, p: PartitionScheme, workers: usize) -> JobSpec {
    let (a, b) = operands(p, workers as u64);
    let mut spec = JobSpec::new(kind, p, a, b);
    spec.workers = workers;
    spec.delay = DelayModel {
        t0_ms: 4.0,
        lambda_inv_ms: 8.0,
        slowdown: Vec::new(),
    };
    spec.seed = 3;
    spec
}

#[test]
fn exact_under_random_delays_and_trace_is_complete() {
    let p = PartitionScheme::new(2, 2, 2).unwrap();
    let q = PrimeModulus::default_field();
    for kind in SchemeKind::ALL {
        for workers in [1, 3, 8] {
            let spec = delayed(kind, p, workers);
            let (c, trace) = run_job(&spec).unwrap();
            assert_eq!(c, spec.m0.multiply(&spec.m1).unwrap(), "{kind} W={workers}");

            let scheme = Scheme::new(kind, p);
            let grid = scheme.evaluation_grid(q).unwrap();
            let ids: BTreeSet<usize> = trace.records.iter().map(|r| r.task_id).collect();
            assert_eq!(ids, (0..scheme.recovery_threshold()).collect());
            for r in &trace.records {
                assert_eq!(r.point, grid.task_point(r.task_id));
                assert!(r.start_ms <= r.end_ms && r.end_ms <= trace.wall_ms);
            }
            assert_eq!(trace.per_worker.iter().sum::<usize>(), trace.records.len());
            assert_eq!(trace.encoded, scheme.upload_counts());
        }
    }
}

#[test]
fn workers_stay_busy_and_run_one_task_at_a_time() {
    let spec = delayed(SchemeKind::Tri, PartitionScheme::new(2, 2, 2).unwrap(), 4);
    let (_, trace) = run_job(&spec).unwrap();
    for w in 0..spec.workers {
        let mut mine: Vec<_> = trace.records.iter().filter(|r| r.worker == w).collect();
        mine.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
        for pair in mine.windows(2) {
            let gap = pair[1].start_ms - pair[0].end_ms;
            assert!(gap >= 0.0, "worker {w} overlapped");
            // Dispatch happens on the report, so the only gap is the round trip.
            assert!(gap < 50.0, "worker {w} idled {gap} ms");
        }
    }
}

#[test]
fn dynamic_assignment_routes_around_a_slow_worker() {
    let p = PartitionScheme::new(2, 2, 2).unwrap();
    let mut wins = 0;
    let repeats = 5;
    for seed in 0..repeats {
        let mut spec = delayed(SchemeKind::Tri, p, 4);
        spec.seed = seed;
        spec.delay.slowdown = vec![(0, 10.0)];
        let (_, dynamic) = run_job(&spec).unwrap();
        spec.assignment = Assignment::Static;
        let (c, fixed) = run_job(&spec).unwrap();
        assert_eq!(c, spec.m0.multiply(&spec.m1).unwrap());
        // Static mode pins tasks 0, 4, 8 on the slow worker.
        assert_eq!(fixed.per_worker[0], 3);
        if dynamic.wall_ms < fixed.wall_ms {
            wins += 1;
        }
        assert!(dynamic.per_worker[0] <= fixed.per_worker[0]);
    }
    assert!(wins >= 4, "dynamic won {wins}/{repeats}");
}

#[test]
fn injected_fault_surfaces_with_partial_trace() {
    let mut spec = delayed(SchemeKind::Bi0, PartitionScheme::new(2, 2, 2).unwrap(), 2);
    spec.fail_task = Some(5);
    match run_job(&spec) {
        Err(JobError::Failed { message, trace }) => {
            assert!(message.contains("task 5"), "{message}");
            assert!(trace.records.iter().all(|r| r.task_id != 5));
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn larger_partitions_and_many_workers() {
    let p = PartitionScheme::new(3, 2, 4).unwrap();
    for kind in SchemeKind::ALL {
        let (a, b) = operands(p, 21);
        let mut spec = JobSpec::new(kind, p, a, b);
        spec.workers = 16;
        let (c, trace) = run_job(&spec).unwrap();
        assert_eq!(c, spec.m0.multiply(&spec.m1).unwrap());
        assert_eq!(trace.encoded, kind.upload_counts(p));
    }
}
