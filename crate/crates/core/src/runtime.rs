//! In-process master/worker execution of a coded multiplication.
//!
//! The coordinator (the calling thread) owns all job state: the task queue,
//! the share cache and the collected results. Workers are scoped threads that
//! receive immutable coded shares over a channel, multiply them, optionally
//! sleep an injected straggler delay, and send the product back. A worker is
//! handed its next task the moment it reports a result.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::blockmat::{Matrix, PartitionScheme};
use crate::schemes::{Operand, Scheme, SchemeError, SchemeKind, ShareCache, TaskResult};
use crate::straggler::{sample_subtask_time, trial_rng, SimError, StragglerModel};

#[derive(Debug, Error)]
pub enum JobError {
    #[error("job failed: {message}")]
    Failed {
        message: String,
        trace: Box<JobTrace>,
    },
    #[error("invalid job: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// How grid tasks reach workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assignment {
    /// One shared queue; idle workers take the next task.
    #[default]
    Dynamic,
    /// Task `i` is pinned to worker `i mod W` up front.
    Static,
}

/// Injected per-subtask sleep, in milliseconds, drawn from the shifted
/// exponential model at the job's partition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    pub t0_ms: f64,
    pub lambda_inv_ms: f64,
    /// Multiplier on every delay drawn by a given worker.
    pub slowdown: Vec<(usize, f64)>,
}

impl DelayModel {
    pub fn none() -> Self {
        Self {
            t0_ms: 0.0,
            lambda_inv_ms: 0.0,
            slowdown: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.t0_ms == 0.0 && self.lambda_inv_ms == 0.0
    }

    fn factor(&self, worker: usize) -> f64 {
        self.slowdown
            .iter()
            .filter(|(w, _)| *w == worker)
            .map(|(_, f)| *f)
            .product()
    }
}

#[derive(Debug, Clone)]
pub struct JobSpec {
    pub kind: SchemeKind,
    pub partition: PartitionScheme,
    pub m0: Matrix,
    pub m1: Matrix,
    pub workers: usize,
    pub delay: DelayModel,
    pub seed: u64,
    pub assignment: Assignment,
    /// Fault injection: the worker that draws this task id reports a failure.
    pub fail_task: Option<usize>,
}

impl JobSpec {
    pub fn new(kind: SchemeKind, partition: PartitionScheme, m0: Matrix, m1: Matrix) -> Self {
        Self {
            kind,
            partition,
            m0,
            m1,
            workers: 1,
            delay: DelayModel::none(),
            seed: 0,
            assignment: Assignment::Dynamic,
            fail_task: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task_id: usize,
    pub point: Vec<u64>,
    pub worker: usize,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JobTrace {
    /// Completed tasks in completion order.
    pub records: Vec<TaskRecord>,
    pub wall_ms: f64,
    pub per_worker: Vec<usize>,
    /// Distinct coded shares encoded for `(M0, M1)`.
    pub encoded: (usize, usize),
    /// Grid axis labels, used to lay out the CSV export.
    pub axis_labels: Vec<char>,
}

pub const TRACE_CSV_HEADER: &str = "task_id,x,y,z,worker,start_ms,end_ms";

impl JobTrace {
    /// Writes `task_id,x,y,z,worker,start_ms,end_ms` rows sorted by task id.
    /// Axes the scheme does not use are left blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        let mut records: Vec<&TaskRecord> = self.records.iter().collect();
        records.sort_by_key(|r| r.task_id);
        for r in records {
            let mut coords = [String::new(), String::new(), String::new()];
            for (label, v) in self.axis_labels.iter().zip(&r.point) {
                let slot = match label {
                    'x' => 0,
                    'y' => 1,
                    _ => 2,
                };
                coords[slot] = v.to_string();
            }
            writeln!(
                w,
                "{},{},{},{},{},{:.3},{:.3}",
                r.task_id, coords[0], coords[1], coords[2], r.worker, r.start_ms, r.end_ms
            )?;
        }
        Ok(())
    }
}

struct Work {
    task_id: usize,
    point: Vec<u64>,
    left: Arc<Matrix>,
    right: Arc<Matrix>,
}

enum Report {
    Done {
        worker: usize,
        task_id: usize,
        point: Vec<u64>,
        block: Matrix,
        start_ms: f64,
        end_ms: f64,
    },
    Failed {
        worker: usize,
        task_id: usize,
        message: String,
    },
}

fn worker_loop(
    id: usize,
    epoch: Instant,
    inbox: mpsc::Receiver<Work>,
    outbox: mpsc::Sender<Report>,
    delay: Option<(StragglerModel, f64)>,
    seed: u64,
    fail_task: Option<usize>,
) {
    let mut rng = trial_rng(seed, id as u64);
    for work in inbox {
        let start_ms = epoch.elapsed().as_secs_f64() * 1e3;
        if let Some((model, factor)) = &delay {
            let ms = factor * sample_subtask_time(model, &mut rng);
            thread::sleep(Duration::from_secs_f64(ms / 1e3));
        }
        let report = if fail_task == Some(work.task_id) {
            Report::Failed {
                worker: id,
                task_id: work.task_id,
                message: "injected fault".into(),
            }
        } else {
            match work.left.multiply(&work.right) {
                Ok(block) => Report::Done {
                    worker: id,
                    task_id: work.task_id,
                    point: work.point,
                    block,
                    start_ms,
                    end_ms: epoch.elapsed().as_secs_f64() * 1e3,
                },
                Err(e) => Report::Failed {
                    worker: id,
                    task_id: work.task_id,
                    message: e.to_string(),
                },
            }
        };
        if outbox.send(report).is_err() {
            return;
        }
    }
}

/// Runs the whole job and returns the decoded product with its trace.
pub fn run_job(spec: &JobSpec) -> Result<(Matrix, JobTrace), JobError> {
    if spec.workers == 0 {
        return Err(JobError::InvalidSpec("need at least one worker".into()));
    }
    let scheme = Scheme::new(spec.kind, spec.partition);
    let grid = scheme.evaluation_grid(spec.m0.modulus())?;
    let mut shares = ShareCache::new(scheme, &spec.m0, &spec.m1)?;
    let delay = if spec.delay.is_zero() {
        None
    } else {
        Some(StragglerModel::with_mean_exponential(
            spec.delay.t0_ms,
            spec.delay.lambda_inv_ms,
            spec.partition.level() as u64,
        )?)
    };

    let tasks = grid.task_count();
    let workers = spec.workers;
    // Dynamic mode uses queues[0] for everyone.
    let mut queues: Vec<VecDeque<usize>> = match spec.assignment {
        Assignment::Dynamic => vec![(0..tasks).collect()],
        Assignment::Static => (0..workers)
            .map(|w| (w..tasks).step_by(workers).collect())
            .collect(),
    };
    let queue_of = |w: usize| match spec.assignment {
        Assignment::Dynamic => 0,
        Assignment::Static => w,
    };

    let mut trace = JobTrace {
        per_worker: vec![0; workers],
        axis_labels: scheme.axis_labels().to_vec(),
        ..JobTrace::default()
    };
    let mut results: Vec<TaskResult> = Vec::with_capacity(tasks);
    let epoch = Instant::now();

    let outcome: Result<(), String> = thread::scope(|scope| {
        let (report_tx, report_rx) = mpsc::channel::<Report>();
        let mut inboxes = Vec::with_capacity(workers);
        for id in 0..workers {
            let (tx, rx) = mpsc::channel::<Work>();
            inboxes.push(tx);
            let outbox = report_tx.clone();
            let delay = delay.map(|m| (m, spec.delay.factor(id)));
            let (seed, fail) = (spec.seed, spec.fail_task);
            scope.spawn(move || worker_loop(id, epoch, rx, outbox, delay, seed, fail));
        }
        drop(report_tx);

        let mut dispatch = |w: usize, queues: &mut Vec<VecDeque<usize>>| -> Result<bool, String> {
            let Some(task_id) = queues[queue_of(w)].pop_front() else {
                return Ok(false);
            };
            let point = grid.task_point(task_id);
            let left = shares
                .share(Operand::Left, &point)
                .map_err(|e| e.to_string())?;
            let right = shares
                .share(Operand::Right, &point)
                .map_err(|e| e.to_string())?;
            inboxes[w]
                .send(Work {
                    task_id,
                    point,
                    left,
                    right,
                })
                .map_err(|_| format!("worker {w} hung up"))?;
            Ok(true)
        };

        for w in 0..workers {
            dispatch(w, &mut queues)?;
        }
        while results.len() < tasks {
            match report_rx.recv() {
                Ok(Report::Done {
                    worker,
                    task_id,
                    point,
                    block,
                    start_ms,
                    end_ms,
                }) => {
                    trace.records.push(TaskRecord {
                        task_id,
                        point: point.clone(),
                        worker,
                        start_ms,
                        end_ms,
                    });
                    trace.per_worker[worker] += 1;
                    results.push(TaskResult { point, block });
                    dispatch(worker, &mut queues)?;
                }
                Ok(Report::Failed {
                    worker,
                    task_id,
                    message,
                }) => {
                    return Err(format!(
                        "worker {worker} failed on task {task_id}: {message}"
                    ));
                }
                Err(_) => return Err("all workers exited before the job completed".into()),
            }
        }
        // Dropping the inboxes lets idle workers exit; the scope joins them.
        Ok(())
    });

    trace.wall_ms = epoch.elapsed().as_secs_f64() * 1e3;
    trace.encoded = shares.encoded_counts();
    if let Err(message) = outcome {
        return Err(JobError::Failed {
            message,
            trace: Box::new(trace),
        });
    }
    let product = scheme.decode(&grid, &results)?;
    trace.wall_ms = epoch.elapsed().as_secs_f64() * 1e3;
    Ok((product, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::PrimeModulus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn job(kind: SchemeKind, workers: usize) -> JobSpec {
        let q = PrimeModulus::default_field();
        let mut rng = ChaCha8Rng::seed_from_u64(workers as u64);
        let m0 = Matrix::random(8, 8, q, &mut rng);
        let m1 = Matrix::random(8, 8, q, &mut rng);
        let mut spec = JobSpec::new(kind, PartitionScheme::new(2, 2, 2).unwrap(), m0, m1);
        spec.workers = workers;
        spec
    }

    #[test]
    fn tri_with_eight_workers_is_exact() {
        let spec = job(SchemeKind::Tri, 8);
        let (out, trace) = run_job(&spec).unwrap();
        assert_eq!(out, spec.m0.multiply(&spec.m1).unwrap());
        assert_eq!(trace.records.len(), 12);
        assert_eq!(trace.per_worker.iter().sum::<usize>(), 12);
        assert_eq!(trace.encoded, (6, 6));
    }

    #[test]
    fn single_worker_runs_serially() {
        for kind in SchemeKind::ALL {
            let spec = job(kind, 1);
            let (out, trace) = run_job(&spec).unwrap();
            assert_eq!(out, spec.m0.multiply(&spec.m1).unwrap());
            let mut records = trace.records.clone();
            records.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
            for pair in records.windows(2) {
                assert!(pair[0].end_ms <= pair[1].start_ms);
            }
        }
    }

    #[test]
    fn more_workers_than_tasks() {
        let spec = job(SchemeKind::Epc, 32);
        let (out, trace) = run_job(&spec).unwrap();
        assert_eq!(out, spec.m0.multiply(&spec.m1).unwrap());
        assert_eq!(trace.per_worker.iter().filter(|&&c| c > 0).count(), 9);
    }

    #[test]
    fn injected_fault_is_reported_with_partial_trace() {
        let mut spec = job(SchemeKind::Bi0, 2);
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
    fn bad_dimensions_propagate() {
        let mut spec = job(SchemeKind::Tri, 2);
        spec.partition = PartitionScheme::new(3, 2, 2).unwrap();
        assert!(matches!(run_job(&spec), Err(JobError::Scheme(_))));
        spec.workers = 0;
        assert!(matches!(run_job(&spec), Err(JobError::InvalidSpec(_))));
    }

    #[test]
    fn trace_csv_leaves_unused_axes_blank() {
        let spec = job(SchemeKind::Bi2, 3);
        let (_, trace) = run_job(&spec).unwrap();
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&first[..4], &["0", "", "1", "1"]);
        assert_eq!(text.lines().count(), 11);
    }
}
