use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Artificial delays injected into the task path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayInjection {
    /// Latency added between the driver sending a task and the executor
    /// receiving it.
    pub dispatch_latency_ns: u64,
    /// Per-task probability of straggling.
    pub straggler_probability: f64,
    /// Extra compute time of a straggling task.
    pub straggler_ns: u64,
    /// Partitions that straggle in every stage regardless of the probability.
    #[serde(default)]
    pub forced_stragglers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub executors: usize,
    pub slots_per_executor: usize,
    pub partitions: usize,
    pub tree_fanout: usize,
    pub seed: u64,
    /// Serial dispatch rate cap at the driver; `None` dispatches as fast as
    /// the driver loop runs.
    pub tasks_per_second: Option<f64>,
    pub delay_injection: Option<DelayInjection>,
}

pub const DEFAULT_SEED: u64 = 20160505;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            executors: 1,
            slots_per_executor: 4,
            partitions: 8,
            tree_fanout: 2,
            seed: DEFAULT_SEED,
            tasks_per_second: None,
            delay_injection: None,
        }
    }
}

impl RunConfig {
    pub fn total_slots(&self) -> usize {
        self.executors * self.slots_per_executor
    }

    pub fn validate(&self) -> Result<()> {
        if self.executors == 0 {
            return Err(Error::Config("executors must be at least 1".into()));
        }
        if self.slots_per_executor == 0 {
            return Err(Error::Config("slots per executor must be at least 1".into()));
        }
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be at least 1".into()));
        }
        if self.tree_fanout < 2 {
            return Err(Error::Config("tree fan-out must be at least 2".into()));
        }
        if let Some(rate) = self.tasks_per_second {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::Config(format!(
                    "tasks per second must be positive, got {rate}"
                )));
            }
        }
        if let Some(d) = &self.delay_injection {
            if !(0.0..=1.0).contains(&d.straggler_probability) {
                return Err(Error::Config(format!(
                    "straggler probability must lie in [0, 1], got {}",
                    d.straggler_probability
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_values() {
        for cfg in [
            RunConfig { partitions: 0, ..RunConfig::default() },
            RunConfig { executors: 0, ..RunConfig::default() },
            RunConfig { slots_per_executor: 0, ..RunConfig::default() },
            RunConfig { tree_fanout: 1, ..RunConfig::default() },
            RunConfig { tasks_per_second: Some(0.0), ..RunConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
        assert!(RunConfig::default().validate().is_ok());
    }
}
