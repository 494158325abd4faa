//! Per-task timestamps and the overhead bins derived from them.
//!
//! A task's life inside a stage is cut into five consecutive intervals:
//!
//! ```text
//! stage start ─ sent ─ received ─ deserialized ─ computed ─ serialized ─ acked ─ stage end
//!   start delay   │  scheduler   │   overhead    │ compute │  overhead   │ sched │  wait
//! ```
//!
//! so the bins of every task sum exactly to the stage's wall interval.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub stage_id: usize,
    pub task_id: usize,
    pub partition_id: usize,
    pub executor_id: usize,
    pub t_stage_start: u64,
    pub t_task_sent: u64,
    pub t_exec_received: u64,
    pub t_deser_done: u64,
    pub t_compute_done: u64,
    pub t_result_ser_done: u64,
    pub t_driver_ack: u64,
}

impl TaskRecord {
    fn timeline(&self) -> [u64; 7] {
        [
            self.t_stage_start,
            self.t_task_sent,
            self.t_exec_received,
            self.t_deser_done,
            self.t_compute_done,
            self.t_result_ser_done,
            self.t_driver_ack,
        ]
    }
}

/// Durations in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskBins {
    pub task_start_delay: u64,
    pub scheduler_delay: u64,
    pub task_overhead: u64,
    pub compute_time: u64,
    pub wait_until_stage_end: u64,
}

impl TaskBins {
    pub fn total(&self) -> u64 {
        self.task_start_delay
            + self.scheduler_delay
            + self.task_overhead
            + self.compute_time
            + self.wait_until_stage_end
    }
}

const TIMESTAMP_NAMES: [&str; 7] = [
    "t_stage_start",
    "t_task_sent",
    "t_exec_received",
    "t_deser_done",
    "t_compute_done",
    "t_result_ser_done",
    "t_driver_ack",
];

/// Splits one task's timeline into its overhead bins.
pub fn bin_task(rec: &TaskRecord, stage_end: u64) -> Result<TaskBins> {
    let t = rec.timeline();
    for i in 1..t.len() {
        if t[i] < t[i - 1] {
            return Err(Error::Data(format!(
                "task {} of stage {}: {} ({}) precedes {} ({})",
                rec.task_id, rec.stage_id, TIMESTAMP_NAMES[i], t[i], TIMESTAMP_NAMES[i - 1], t[i - 1]
            )));
        }
    }
    if stage_end < rec.t_driver_ack {
        return Err(Error::Data(format!(
            "task {} of stage {}: stage end {} precedes driver ack {}",
            rec.task_id, rec.stage_id, stage_end, rec.t_driver_ack
        )));
    }
    Ok(TaskBins {
        task_start_delay: rec.t_task_sent - rec.t_stage_start,
        scheduler_delay: (rec.t_exec_received - rec.t_task_sent)
            + (rec.t_driver_ack - rec.t_result_ser_done),
        task_overhead: (rec.t_deser_done - rec.t_exec_received)
            + (rec.t_result_ser_done - rec.t_compute_done),
        compute_time: rec.t_compute_done - rec.t_deser_done,
        wait_until_stage_end: stage_end - rec.t_driver_ack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub record: TaskRecord,
    pub bins: TaskBins,
}

/// Timing of one stage: one entry per partition, in partition order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage_id: usize,
    pub label: String,
    pub t_stage_start: u64,
    pub stage_end: u64,
    pub tasks: Vec<TaskMetrics>,
}

/// Bin averages over the tasks of one stage, in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanBins {
    pub task_start_delay: f64,
    pub scheduler_delay: f64,
    pub task_overhead: f64,
    pub compute_time: f64,
    pub wait_until_stage_end: f64,
}

impl MeanBins {
    pub fn total(&self) -> f64 {
        self.task_start_delay
            + self.scheduler_delay
            + self.task_overhead
            + self.compute_time
            + self.wait_until_stage_end
    }

    pub fn accumulate(&mut self, other: &MeanBins) {
        self.task_start_delay += other.task_start_delay;
        self.scheduler_delay += other.scheduler_delay;
        self.task_overhead += other.task_overhead;
        self.compute_time += other.compute_time;
        self.wait_until_stage_end += other.wait_until_stage_end;
    }
}

impl StageMetrics {
    /// Builds stage metrics from raw records, binning each one.
    pub fn from_records(
        stage_id: usize,
        label: impl Into<String>,
        t_stage_start: u64,
        stage_end: u64,
        records: Vec<TaskRecord>,
    ) -> Result<StageMetrics> {
        let tasks = records
            .into_iter()
            .map(|record| {
                let bins = bin_task(&record, stage_end)?;
                Ok(TaskMetrics { record, bins })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StageMetrics {
            stage_id,
            label: label.into(),
            t_stage_start,
            stage_end,
            tasks,
        })
    }

    pub fn wall_ns(&self) -> u64 {
        self.stage_end - self.t_stage_start
    }

    /// Arithmetic mean of each bin over the stage's tasks.
    pub fn mean_bins(&self) -> MeanBins {
        let n = self.tasks.len();
        if n == 0 {
            return MeanBins::default();
        }
        let mut sum = [0u128; 5];
        for t in &self.tasks {
            let b = &t.bins;
            sum[0] += b.task_start_delay as u128;
            sum[1] += b.scheduler_delay as u128;
            sum[2] += b.task_overhead as u128;
            sum[3] += b.compute_time as u128;
            sum[4] += b.wait_until_stage_end as u128;
        }
        let n = n as f64;
        MeanBins {
            task_start_delay: sum[0] as f64 / n,
            scheduler_delay: sum[1] as f64 / n,
            task_overhead: sum[2] as f64 / n,
            compute_time: sum[3] as f64 / n,
            wait_until_stage_end: sum[4] as f64 / n,
        }
    }

    /// Largest task start delay in the stage.
    pub fn max_task_start_delay(&self) -> u64 {
        self.tasks.iter().map(|t| t.bins.task_start_delay).max().unwrap_or(0)
    }

    fn rows(&self) -> impl Iterator<Item = TaskRow> + '_ {
        self.tasks.iter().map(move |t| TaskRow {
            stage_id: self.stage_id,
            label: self.label.clone(),
            task_id: t.record.task_id,
            partition_id: t.record.partition_id,
            executor_id: t.record.executor_id,
            task_start_delay_ns: t.bins.task_start_delay,
            scheduler_delay_ns: t.bins.scheduler_delay,
            task_overhead_ns: t.bins.task_overhead,
            compute_time_ns: t.bins.compute_time,
            wait_until_stage_end_ns: t.bins.wait_until_stage_end,
        })
    }
}

/// Flat per-task row used by the JSON-lines and CSV exports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRow {
    pub stage_id: usize,
    pub label: String,
    pub task_id: usize,
    pub partition_id: usize,
    pub executor_id: usize,
    pub task_start_delay_ns: u64,
    pub scheduler_delay_ns: u64,
    pub task_overhead_ns: u64,
    pub compute_time_ns: u64,
    pub wait_until_stage_end_ns: u64,
}

/// Writes one JSON object per task per line.
pub fn write_task_jsonl<W: Write>(stages: &[StageMetrics], mut out: W) -> Result<()> {
    for s in stages {
        for row in s.rows() {
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
        }
    }
    Ok(())
}

/// Writes one CSV row per task with a header line.
pub fn write_task_csv<W: Write>(stages: &[StageMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in stages {
        for row in s.rows() {
            w.serialize(row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_task_jsonl<R: Read>(input: R) -> Result<Vec<TaskRow>> {
    let mut text = String::new();
    let mut input = input;
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<jsonl>", e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn read_task_csv<R: Read>(input: R) -> Result<Vec<TaskRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: "<csv>".into(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ts: [u64; 7]) -> TaskRecord {
        TaskRecord {
            stage_id: 0,
            task_id: 0,
            partition_id: 0,
            executor_id: 0,
            t_stage_start: ts[0],
            t_task_sent: ts[1],
            t_exec_received: ts[2],
            t_deser_done: ts[3],
            t_compute_done: ts[4],
            t_result_ser_done: ts[5],
            t_driver_ack: ts[6],
        }
    }

    #[test]
    fn worked_example() {
        // (0, 2, 3, 3.5, 8, 9, 10), stage end 12, in half-units
        let rec = record([0, 4, 6, 7, 16, 18, 20]);
        let bins = bin_task(&rec, 24).unwrap();
        assert_eq!(bins.task_start_delay, 4);
        assert_eq!(bins.scheduler_delay, 2 + 2);
        assert_eq!(bins.task_overhead, 1 + 2);
        assert_eq!(bins.compute_time, 9);
        assert_eq!(bins.wait_until_stage_end, 4);
        assert_eq!(bins.total(), 24);
    }

    #[test]
    fn equal_timestamps_give_zero_bins() {
        let bins = bin_task(&record([5; 7]), 5).unwrap();
        assert_eq!(bins, TaskBins::default());
    }

    #[test]
    fn last_task_in_single_task_stage_waits_zero() {
        let rec = record([0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(bin_task(&rec, 6).unwrap().wait_until_stage_end, 0);
    }

    #[test]
    fn non_monotone_is_data_error() {
        let rec = record([0, 4, 3, 5, 6, 7, 8]);
        assert!(matches!(bin_task(&rec, 9), Err(Error::Data(_))));
        let rec = record([0, 1, 2, 3, 4, 5, 6]);
        assert!(matches!(bin_task(&rec, 5), Err(Error::Data(_))));
    }

    #[test]
    fn exports_roundtrip() {
        let recs = vec![record([0, 1, 2, 3, 4, 5, 6]), {
            let mut r = record([0, 2, 3, 4, 9, 9, 10]);
            r.task_id = 1;
            r.partition_id = 1;
            r
        }];
        let stage = StageMetrics::from_records(3, "gram", 0, 10, recs).unwrap();
        let mut buf = Vec::new();
        write_task_jsonl(std::slice::from_ref(&stage), &mut buf).unwrap();
        let rows = read_task_jsonl(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].compute_time_ns, 5);

        let mut buf = Vec::new();
        write_task_csv(std::slice::from_ref(&stage), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("stage_id,label,task_id,partition_id,executor_id,task_start_delay_ns"));
        assert_eq!(read_task_csv(buf.as_slice()).unwrap(), rows);
    }
}
