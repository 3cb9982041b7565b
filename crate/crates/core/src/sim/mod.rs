//! Synthetic multi-hop tasks, the episode loop and the fixed-depth probe.

mod episode;
mod probe;
mod task;

pub use episode::{run_episode, EpisodeConfig, EpisodeError};
pub use probe::{probe_fixed_depth, ProbeError, ProbeRow, PROBE_CSV_HEADER};
pub use task::{fact_sentence, generate_tasks, load_tasks, SyntheticTask, TaskGenConfig, TaskGenError, TaskSet, DEFAULT_DISTRACTORS};

use rayon::prelude::*;

use crate::policy::{PolicyBackend, PromptSet};
use crate::retrieval::{Document, OracleRetriever, RetrievalIndex, Retriever};
use crate::trajectory::{QuestionRecord, Trajectory};

/// Where an episode's documents come from.
#[derive(Debug, Clone, Copy)]
pub enum RetrieverSource<'a> {
    Index(&'a RetrievalIndex),
    /// Per-question oracle over generated tasks.
    Oracle(&'a TaskSet),
}

enum QuestionRetriever<'a> {
    Index(&'a RetrievalIndex),
    Oracle(OracleRetriever<'a>),
    Empty,
}

impl Retriever for QuestionRetriever<'_> {
    fn retrieve(&self, query: &str, k: usize) -> Vec<&Document> {
        match self {
            QuestionRetriever::Index(i) => i.retrieve(query, k),
            QuestionRetriever::Oracle(o) => o.retrieve(query, k),
            QuestionRetriever::Empty => Vec::new(),
        }
    }
}

impl<'a> RetrieverSource<'a> {
    fn for_question(&self, id: &str) -> QuestionRetriever<'a> {
        match *self {
            RetrieverSource::Index(i) => QuestionRetriever::Index(i),
            RetrieverSource::Oracle(tasks) => match tasks.get(id) {
                Some(t) => QuestionRetriever::Oracle(OracleRetriever::new(t)),
                None => QuestionRetriever::Empty,
            },
        }
    }
}

/// Settings shared by every episode of a dataset run.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub backend: &'a PolicyBackend,
    pub retriever: RetrieverSource<'a>,
    pub prompts: &'a PromptSet,
    pub config: &'a EpisodeConfig,
    pub seed: u64,
    /// Worker threads; 1 runs in the calling thread.
    pub jobs: usize,
}

fn run_one(ctx: &RunContext<'_>, record: &QuestionRecord, config: &EpisodeConfig) -> Result<Trajectory, EpisodeError> {
    let key = crate::seed::episode_key(ctx.seed, &record.id);
    let mut session = ctx.backend.session(key).map_err(|source| EpisodeError::Backend {
        question_id: record.id.clone(),
        completed_steps: 0,
        source,
    })?;
    let retriever = ctx.retriever.for_question(&record.id);
    run_episode(session.as_mut(), &retriever, record, ctx.prompts, config)
}

/// Runs every record once. Output order follows input order, and each
/// episode is seeded by its question id, so results do not depend on `jobs`.
pub fn run_dataset(ctx: &RunContext<'_>, records: &[QuestionRecord]) -> Result<Vec<Trajectory>, EpisodeError> {
    run_with_config(ctx, records, ctx.config)
}

pub(crate) fn run_with_config(
    ctx: &RunContext<'_>,
    records: &[QuestionRecord],
    config: &EpisodeConfig,
) -> Result<Vec<Trajectory>, EpisodeError> {
    config.validate()?;
    if ctx.jobs <= 1 {
        return records.iter().map(|r| run_one(ctx, r, config)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.jobs)
        .build()
        .map_err(|e| EpisodeError::Config(format!("thread pool: {e}")))?;
    pool.install(|| records.par_iter().map(|r| run_one(ctx, r, config)).collect())
}
