//! Bulk-synchronous driver/executor runtime over row-partitioned matrices.

mod config;
mod context;
mod dist;
mod metrics;

pub use config::{DelayInjection, RunConfig, DEFAULT_SEED};
pub use context::{tree_reduce, Clock, ExecContext};
pub use dist::{block_sizes, partition, DistMatrix, RowBlock};
pub use metrics::{
    bin_task, read_task_csv, read_task_jsonl, write_task_csv, write_task_jsonl, MeanBins, StageMetrics,
    TaskBins, TaskMetrics, TaskRecord, TaskRow,
};

use crate::error::Result;

/// Starts a worker pool for `config`.
pub fn create_context(config: RunConfig) -> Result<ExecContext> {
    ExecContext::new(config)
}
