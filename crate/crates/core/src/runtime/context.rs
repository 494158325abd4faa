//! Driver and executor pool.
//!
//! The driver is the thread calling [`ExecContext::execute_stage`]. It hands
//! out one task per partition, serially, to a pool of long-lived slot
//! threads, and processes completion messages on the same loop. Results are
//! combined on the driver in a fixed tree order keyed by partition index.

use std::any::Any;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};

use super::config::RunConfig;
use super::dist::{DistMatrix, RowBlock};
use super::metrics::{StageMetrics, TaskRecord};
use crate::error::{Error, Result};
use crate::rng::{keyed_uniform, stream};

type Work = Box<dyn FnOnce() -> Box<dyn Any + Send> + Send>;

struct Job {
    stage_id: usize,
    task_id: usize,
    partition_id: usize,
    t_stage_start: u64,
    t_task_sent: u64,
    transit_ns: u64,
    straggle_ns: u64,
    work: Work,
}

struct Completion {
    record: TaskRecord,
    outcome: std::result::Result<Box<dyn Any + Send>, String>,
}

/// Monotonic nanosecond clock shared by the driver and all slots.
#[derive(Clone, Copy, Debug)]
pub struct Clock {
    epoch: Instant,
}

impl Clock {
    fn new() -> Self {
        Clock {
            epoch: Instant::now(),
        }
    }

    pub fn now(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }
}

struct DriverChannels {
    jobs: Option<Sender<Job>>,
    done: Receiver<Completion>,
}

pub struct ExecContext {
    config: RunConfig,
    clock: Clock,
    driver: Mutex<DriverChannels>,
    workers: Vec<JoinHandle<()>>,
    next_stage: AtomicUsize,
    log: Mutex<Vec<StageMetrics>>,
}

impl ExecContext {
    /// Validates `config` and starts `executors × slots_per_executor` slot threads.
    pub fn new(config: RunConfig) -> Result<ExecContext> {
        config.validate()?;
        let clock = Clock::new();
        let (job_tx, job_rx) = crossbeam_channel::unbounded::<Job>();
        let (done_tx, done_rx) = crossbeam_channel::unbounded::<Completion>();

        let mut workers = Vec::with_capacity(config.total_slots());
        for executor in 0..config.executors {
            for slot in 0..config.slots_per_executor {
                let rx = job_rx.clone();
                let tx = done_tx.clone();
                let handle = thread::Builder::new()
                    .name(format!("executor-{executor}-slot-{slot}"))
                    .spawn(move || slot_loop(executor, clock, rx, tx))
                    .map_err(|e| Error::Resource(format!("cannot start executor slot: {e}")))?;
                workers.push(handle);
            }
        }

        Ok(ExecContext {
            config,
            clock,
            driver: Mutex::new(DriverChannels {
                jobs: Some(job_tx),
                done: done_rx,
            }),
            workers,
            next_stage: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn concurrency(&self) -> usize {
        self.config.total_slots()
    }

    /// Number of stages run so far. Every stage reads each block of its input
    /// exactly once, so this doubles as a pass counter.
    pub fn stages_executed(&self) -> usize {
        self.next_stage.load(Ordering::SeqCst)
    }

    /// Copy of the metrics of every stage run so far.
    pub fn stage_log(&self) -> Vec<StageMetrics> {
        self.log.lock().expect("stage log poisoned").clone()
    }

    /// Drains the stage log.
    pub fn take_stage_log(&self) -> Vec<StageMetrics> {
        std::mem::take(&mut *self.log.lock().expect("stage log poisoned"))
    }

    fn injected_delays(&self, stage_id: usize, partition: usize) -> (u64, u64) {
        let Some(d) = &self.config.delay_injection else {
            return (0, 0);
        };
        let key = ((stage_id as u64) << 32) ^ partition as u64;
        let forced = d.forced_stragglers.contains(&partition);
        let drawn = d.straggler_probability > 0.0
            && keyed_uniform(self.config.seed, stream::DELAY_INJECTION, key) < d.straggler_probability;
        let straggle = if forced || drawn { d.straggler_ns } else { 0 };
        (d.dispatch_latency_ns, straggle)
    }

    /// Runs `map` over every block of `a` (one task per partition) and folds
    /// the results with `combine` in a fixed tree of the configured fan-out.
    pub fn execute_stage<T, F, C>(
        &self,
        label: &str,
        a: &DistMatrix,
        map: F,
        combine: C,
    ) -> Result<(T, StageMetrics)>
    where
        T: Send + 'static,
        F: Fn(&RowBlock) -> T + Send + Sync + 'static,
        C: Fn(T, T) -> T,
    {
        let (parts, metrics) = self.run_tasks(label, a, map)?;
        let value = tree_reduce(parts, self.config.tree_fanout, combine);
        Ok((value, metrics))
    }

    /// Like [`execute_stage`](Self::execute_stage) but returns the per-partition
    /// results in partition order instead of combining them.
    pub fn collect_stage<T, F>(&self, label: &str, a: &DistMatrix, map: F) -> Result<(Vec<T>, StageMetrics)>
    where
        T: Send + 'static,
        F: Fn(&RowBlock) -> T + Send + Sync + 'static,
    {
        self.run_tasks(label, a, map)
    }

    fn run_tasks<T, F>(&self, label: &str, a: &DistMatrix, map: F) -> Result<(Vec<T>, StageMetrics)>
    where
        T: Send + 'static,
        F: Fn(&RowBlock) -> T + Send + Sync + 'static,
    {
        let driver = self.driver.lock().expect("driver poisoned");
        let jobs = driver.jobs.as_ref().expect("context running");
        let stage_id = self.next_stage.fetch_add(1, Ordering::SeqCst);
        let map = Arc::new(map);
        let partitions = a.num_partitions();
        let slots = self.config.total_slots();
        let tick_ns = self.config.tasks_per_second.map(|r| 1e9 / r);

        let t_stage_start = self.clock.now();
        let mut results: Vec<Option<T>> = (0..partitions).map(|_| None).collect();
        let mut records: Vec<Option<TaskRecord>> = vec![None; partitions];
        let mut failure: Option<(usize, String)> = None;
        let mut next = 0usize;
        let mut in_flight = 0usize;
        let mut received = 0usize;
        let mut last_ack = t_stage_start;

        let mut handle = |c: Completion, results: &mut Vec<Option<T>>, failure: &mut Option<(usize, String)>| {
            let mut record = c.record;
            record.t_driver_ack = self.clock.now().max(record.t_result_ser_done);
            last_ack = last_ack.max(record.t_driver_ack);
            let p = record.partition_id;
            match c.outcome {
                Ok(v) => {
                    results[p] = Some(*v.downcast::<T>().expect("task result type"));
                }
                Err(msg) => {
                    if failure.is_none() {
                        *failure = Some((p, msg));
                    }
                }
            }
            records[p] = Some(record);
        };

        while received < partitions {
            let can_dispatch = failure.is_none() && next < partitions && in_flight < slots;
            if can_dispatch {
                if let Some(tick) = tick_ns {
                    let due = t_stage_start + (next as f64 * tick) as u64;
                    let now = self.clock.now();
                    if now < due {
                        match driver.done.recv_timeout(Duration::from_nanos(due - now)) {
                            Ok(c) => {
                                handle(c, &mut results, &mut failure);
                                in_flight -= 1;
                                received += 1;
                            }
                            Err(RecvTimeoutError::Timeout) => {}
                            Err(RecvTimeoutError::Disconnected) => {
                                return Err(Error::Resource("executor pool disconnected".into()))
                            }
                        }
                        continue;
                    }
                }
                let block = Arc::clone(&a.blocks()[next]);
                let f = Arc::clone(&map);
                let (transit_ns, straggle_ns) = self.injected_delays(stage_id, next);
                let job = Job {
                    stage_id,
                    task_id: next,
                    partition_id: next,
                    t_stage_start,
                    t_task_sent: self.clock.now(),
                    transit_ns,
                    straggle_ns,
                    work: Box::new(move || Box::new(f(&block)) as Box<dyn Any + Send>),
                };
                jobs.send(job)
                    .map_err(|_| Error::Resource("executor pool disconnected".into()))?;
                next += 1;
                in_flight += 1;
            } else if in_flight > 0 {
                let c = driver
                    .done
                    .recv()
                    .map_err(|_| Error::Resource("executor pool disconnected".into()))?;
                handle(c, &mut results, &mut failure);
                in_flight -= 1;
                received += 1;
            } else {
                // a failure stopped dispatch and everything in flight is back
                break;
            }
        }

        if let Some((partition_id, message)) = failure {
            return Err(Error::StageFailed {
                stage_id,
                partition_id,
                message,
            });
        }

        let stage_end = last_ack;
        let records: Vec<TaskRecord> = records.into_iter().map(|r| r.expect("every task acked")).collect();
        let metrics = StageMetrics::from_records(stage_id, label, t_stage_start, stage_end, records)?;
        self.log.lock().expect("stage log poisoned").push(metrics.clone());
        let values = results.into_iter().map(|r| r.expect("every task produced a value")).collect();
        Ok((values, metrics))
    }
}

impl Drop for ExecContext {
    fn drop(&mut self) {
        if let Ok(mut d) = self.driver.lock() {
            d.jobs.take();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn sleep_ns(ns: u64) {
    if ns > 0 {
        thread::sleep(Duration::from_nanos(ns));
    }
}

fn slot_loop(executor_id: usize, clock: Clock, jobs: Receiver<Job>, done: Sender<Completion>) {
    while let Ok(job) = jobs.recv() {
        sleep_ns(job.transit_ns);
        let t_exec_received = clock.now();
        let Job {
            stage_id,
            task_id,
            partition_id,
            t_stage_start,
            t_task_sent,
            straggle_ns,
            work,
            ..
        } = job;
        let t_deser_done = clock.now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(work)).map_err(|p| panic_message(&p));
        sleep_ns(straggle_ns);
        let t_compute_done = clock.now();
        let record = TaskRecord {
            stage_id,
            task_id,
            partition_id,
            executor_id,
            t_stage_start,
            t_task_sent,
            t_exec_received: t_exec_received.max(t_task_sent),
            t_deser_done,
            t_compute_done,
            t_result_ser_done: clock.now(),
            t_driver_ack: 0,
        };
        if done.send(Completion { record, outcome }).is_err() {
            break;
        }
    }
}

fn panic_message(p: &Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "task panicked".to_string()
    }
}

/// Folds `items` level by level: consecutive groups of `fanout` are folded
/// left to right, then the group results are grouped again, until one
/// value remains. The order depends only on the item count and fan-out.
pub fn tree_reduce<T>(items: Vec<T>, fanout: usize, combine: impl Fn(T, T) -> T) -> T {
    assert!(!items.is_empty(), "tree_reduce of an empty list");
    let fanout = fanout.max(2);
    let mut level = items;
    while level.len() > 1 {
        let mut nextl = Vec::with_capacity(level.len().div_ceil(fanout));
        let mut it = level.into_iter();
        while let Some(first) = it.next() {
            let mut acc = first;
            for _ in 1..fanout {
                match it.next() {
                    Some(x) => acc = combine(acc, x),
                    None => break,
                }
            }
            nextl.push(acc);
        }
        level = nextl;
    }
    level.pop().expect("one value remains")
}
