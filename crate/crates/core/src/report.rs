//! Post-processing of run timings: scheduling model, scaling efficiency,
//! framework gaps, and the per-run report document.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{MeanBins, RunConfig, StageMetrics, TaskBins};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Seconds spent launching `partitions × iterations` tasks at a serial
/// dispatch rate of `rate` tasks per second.
pub fn predict_scheduler_delay(partitions: u64, iterations: u64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Config(format!("dispatch rate must be positive, got {rate}")));
    }
    let tasks = partitions
        .checked_mul(iterations)
        .ok_or_else(|| Error::Config("task count overflows".into()))?;
    Ok(tasks as f64 / rate)
}

/// `E(nᵢ) = T₀·n₀ / (Tᵢ·nᵢ)`, relative to the smallest node count.
pub fn parallel_efficiency(times: &[f64], nodes: &[u64]) -> Result<Vec<f64>> {
    if times.len() != nodes.len() || times.is_empty() {
        return Err(Error::Config(format!(
            "need equal, nonzero numbers of times and node counts, got {} and {}",
            times.len(),
            nodes.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::Config(format!("times must be positive, got {t}")));
    }
    if nodes.contains(&0) {
        return Err(Error::Config("node counts must be positive".into()));
    }
    let base = (0..nodes.len()).min_by_key(|&i| nodes[i]).expect("non-empty");
    let work = times[base] * nodes[base] as f64;
    Ok(times
        .iter()
        .zip(nodes)
        .enumerate()
        .map(|(i, (&t, &n))| if i == base { 1.0 } else { work / (t * n as f64) })
        .collect())
}

/// Slowdown of `time_a` relative to `time_b`.
pub fn gap(time_a: f64, time_b: f64) -> Result<f64> {
    if !(time_b > 0.0) {
        return Err(Error::Config(format!("reference time must be positive, got {time_b}")));
    }
    Ok(time_a / time_b)
}

/// Two significant figures, e.g. `4.6`, `2.3`, `10`, `0.37`.
pub fn two_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = 1 - mag;
    if decimals >= 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{}", (x / unit).round() * unit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}, expected json or csv"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage_id: usize,
    pub label: String,
    pub tasks: usize,
    pub wall_ns: u64,
    /// Per-bin sums over the stage's tasks.
    pub bin_totals: TaskBins,
    /// Per-bin means over the stage's tasks.
    pub mean_bins: MeanBins,
}

impl StageSummary {
    pub fn from_metrics(s: &StageMetrics) -> StageSummary {
        let mut totals = TaskBins::default();
        for t in &s.tasks {
            totals.task_start_delay += t.bins.task_start_delay;
            totals.scheduler_delay += t.bins.scheduler_delay;
            totals.task_overhead += t.bins.task_overhead;
            totals.compute_time += t.bins.compute_time;
            totals.wait_until_stage_end += t.bins.wait_until_stage_end;
        }
        StageSummary {
            stage_id: s.stage_id,
            label: s.label.clone(),
            tasks: s.tasks.len(),
            wall_ns: s.wall_ns(),
            bin_totals: totals,
            mean_bins: s.mean_bins(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub algo: String,
    pub rows: usize,
    pub cols: usize,
    pub config: RunConfig,
    pub stages: Vec<StageSummary>,
    /// Sum over stages of each stage's mean-task bins.
    pub summed_bins: MeanBins,
    pub wall_ns: u64,
}

impl RunReport {
    pub fn new(
        algo: impl Into<String>,
        shape: (usize, usize),
        config: &RunConfig,
        stages: &[StageMetrics],
        wall_ns: u64,
    ) -> RunReport {
        let stages: Vec<StageSummary> = stages.iter().map(StageSummary::from_metrics).collect();
        let mut summed = MeanBins::default();
        for s in &stages {
            summed.accumulate(&s.mean_bins);
        }
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            algo: algo.into(),
            rows: shape.0,
            cols: shape.1,
            config: config.clone(),
            stages,
            summed_bins: summed,
            wall_ns,
        }
    }

    /// Busy-plus-idle time attributed to tasks never exceeds what the slots
    /// could have spent in total.
    pub fn is_consistent(&self) -> bool {
        let capacity = self.wall_ns as f64 * self.config.total_slots().max(1) as f64;
        let stage_wall: u64 = self.stages.iter().map(|s| s.wall_ns).sum();
        self.summed_bins.total() <= capacity * (1.0 + 1e-12) && stage_wall <= self.wall_ns
    }
}

pub const STAGE_CSV_HEADER: [&str; 14] = [
    "stage_id",
    "label",
    "tasks",
    "wall_ns",
    "task_start_delay_ns",
    "scheduler_delay_ns",
    "task_overhead_ns",
    "compute_time_ns",
    "wait_until_stage_end_ns",
    "mean_task_start_delay_ns",
    "mean_scheduler_delay_ns",
    "mean_task_overhead_ns",
    "mean_compute_time_ns",
    "mean_wait_until_stage_end_ns",
];

#[derive(Serialize, Deserialize)]
struct StageCsvRow {
    stage_id: usize,
    label: String,
    tasks: usize,
    wall_ns: u64,
    task_start_delay_ns: u64,
    scheduler_delay_ns: u64,
    task_overhead_ns: u64,
    compute_time_ns: u64,
    wait_until_stage_end_ns: u64,
    mean_task_start_delay_ns: f64,
    mean_scheduler_delay_ns: f64,
    mean_task_overhead_ns: f64,
    mean_compute_time_ns: f64,
    mean_wait_until_stage_end_ns: f64,
}

impl From<&StageSummary> for StageCsvRow {
    fn from(s: &StageSummary) -> Self {
        StageCsvRow {
            stage_id: s.stage_id,
            label: s.label.clone(),
            tasks: s.tasks,
            wall_ns: s.wall_ns,
            task_start_delay_ns: s.bin_totals.task_start_delay,
            scheduler_delay_ns: s.bin_totals.scheduler_delay,
            task_overhead_ns: s.bin_totals.task_overhead,
            compute_time_ns: s.bin_totals.compute_time,
            wait_until_stage_end_ns: s.bin_totals.wait_until_stage_end,
            mean_task_start_delay_ns: s.mean_bins.task_start_delay,
            mean_scheduler_delay_ns: s.mean_bins.scheduler_delay,
            mean_task_overhead_ns: s.mean_bins.task_overhead,
            mean_compute_time_ns: s.mean_bins.compute_time,
            mean_wait_until_stage_end_ns: s.mean_bins.wait_until_stage_end,
        }
    }
}

impl From<StageCsvRow> for StageSummary {
    fn from(r: StageCsvRow) -> Self {
        StageSummary {
            stage_id: r.stage_id,
            label: r.label,
            tasks: r.tasks,
            wall_ns: r.wall_ns,
            bin_totals: TaskBins {
                task_start_delay: r.task_start_delay_ns,
                scheduler_delay: r.scheduler_delay_ns,
                task_overhead: r.task_overhead_ns,
                compute_time: r.compute_time_ns,
                wait_until_stage_end: r.wait_until_stage_end_ns,
            },
            mean_bins: MeanBins {
                task_start_delay: r.mean_task_start_delay_ns,
                scheduler_delay: r.mean_scheduler_delay_ns,
                task_overhead: r.mean_task_overhead_ns,
                compute_time: r.mean_compute_time_ns,
                wait_until_stage_end: r.mean_wait_until_stage_end_ns,
            },
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        path: "<report csv>".into(),
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// JSON: the full report, pretty-printed with a trailing newline.
/// CSV: one row per stage under [`STAGE_CSV_HEADER`].
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(STAGE_CSV_HEADER).map_err(csv_error)?;
            for s in &report.stages {
                w.serialize(StageCsvRow::from(s)).map_err(csv_error)?;
            }
            w.into_inner().map_err(|e| Error::Data(e.to_string()))
        }
    }
}

pub fn parse_report(bytes: &[u8]) -> Result<RunReport> {
    let r: RunReport = serde_json::from_slice(bytes)?;
    if r.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "unsupported report schema version {}",
            r.schema_version
        )));
    }
    Ok(r)
}

pub fn parse_stage_csv(bytes: &[u8]) -> Result<Vec<StageSummary>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(STAGE_CSV_HEADER) {
        return Err(Error::Data(format!("unexpected stage CSV header {header:?}")));
    }
    r.deserialize::<StageCsvRow>()
        .map(|row| row.map(StageSummary::from).map_err(csv_error))
        .collect()
}
