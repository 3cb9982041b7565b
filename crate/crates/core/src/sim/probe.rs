use serde::{Deserialize, Serialize};

use super::{run_with_config, EpisodeError, RunContext};
use crate::metrics::{aggregate_metrics, MetricsError};
use crate::policy::prompt::MAX_FIXED_DEPTH;
use crate::trajectory::Dataset;

pub const PROBE_CSV_HEADER: &str = "depth,em,osr,f1,sd,n";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub depth: usize,
    pub em: f64,
    pub osr: f64,
    pub f1: f64,
    pub sd: f64,
    pub n: usize,
}

impl ProbeRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.depth, self.em, self.osr, self.f1, self.sd, self.n)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("probe depth {depth} outside 0..={max}")]
    Depth { depth: usize, max: usize },
}

/// Runs every question at each forced depth and aggregates EM and OSR.
pub fn probe_fixed_depth(ctx: &RunContext<'_>, dataset: &Dataset, depths: &[usize]) -> Result<Vec<ProbeRow>, ProbeError> {
    let max = ctx.config.max_turns.min(MAX_FIXED_DEPTH);
    if let Some(&depth) = depths.iter().find(|&&d| d > max) {
        return Err(ProbeError::Depth { depth, max });
    }
    depths
        .iter()
        .map(|&depth| {
            let config = super::EpisodeConfig { fixed_depth: Some(depth), ..ctx.config.clone() };
            let trajs = run_with_config(ctx, dataset.records(), &config)?;
            let m = aggregate_metrics(&trajs, dataset)?;
            Ok(ProbeRow { depth, em: m.em, osr: m.osr, f1: m.f1, sd: m.sd, n: m.n })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{PolicyBackend, PromptSet, ScriptedCapability};
    use crate::sim::{generate_tasks, EpisodeConfig, RetrieverSource, TaskGenConfig};

    #[test]
    fn perfect_policy_on_depth_two() {
        let tasks = generate_tasks(&TaskGenConfig { count: 20, depths: vec![2], ..Default::default() }, 5).unwrap();
        let backend = PolicyBackend::Scripted(ScriptedCapability::default());
        let prompts = PromptSet::builtin();
        let config = EpisodeConfig::default();
        let ctx = RunContext { backend: &backend, retriever: RetrieverSource::Oracle(&tasks), prompts: &prompts, config: &config, seed: 1, jobs: 1 };
        let rows = probe_fixed_depth(&ctx, &tasks.dataset(), &[0, 1, 2, 3, 4]).unwrap();
        let em: Vec<f64> = rows.iter().map(|r| r.em).collect();
        let osr: Vec<f64> = rows.iter().map(|r| r.osr).collect();
        let sd: Vec<f64> = rows.iter().map(|r| r.sd).collect();
        assert_eq!(em, [0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(osr, [0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(sd, [0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn depth_beyond_turns_is_rejected() {
        let tasks = generate_tasks(&TaskGenConfig { count: 1, depths: vec![1], ..Default::default() }, 5).unwrap();
        let backend = PolicyBackend::Scripted(ScriptedCapability::default());
        let prompts = PromptSet::builtin();
        let config = EpisodeConfig { max_turns: 2, ..Default::default() };
        let ctx = RunContext { backend: &backend, retriever: RetrieverSource::Oracle(&tasks), prompts: &prompts, config: &config, seed: 1, jobs: 1 };
        assert!(matches!(probe_fixed_depth(&ctx, &tasks.dataset(), &[3]), Err(ProbeError::Depth { depth: 3, max: 2 })));
    }
}
