use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::normalize_answer;
use crate::retrieval::Document;
use crate::trajectory::{from_json_str, read_jsonl_lines, write_jsonl, Dataset, JsonlError, QuestionRecord};

pub const DEFAULT_DISTRACTORS: usize = 8;

const RELATIONS: [&str; 10] = [
    "mentor", "founder", "rival", "patron", "successor", "sponsor", "guardian", "architect", "neighbor", "partner",
];
const ATTRIBUTES: [&str; 8] = ["emblem", "motto", "anthem", "mascot", "currency", "heirloom", "banner", "signature"];
const KINDS: [&str; 8] = ["scholar", "guild", "city", "vessel", "river", "order", "workshop", "archive"];
const SYLLABLES: [&str; 30] = [
    "ka", "ve", "lo", "ri", "tsu", "mar", "den", "qua", "zor", "bel", "nix", "tha", "pol", "ven", "dra", "mi", "sor",
    "lek", "ru", "fen", "gal", "ith", "mon", "pel", "ska", "tor", "ul", "vy", "wen", "yor",
];

/// "The {relation} of {subject} is {object}."
pub fn fact_sentence(relation: &str, subject: &str, object: &str) -> String {
    format!("The {relation} of {subject} is {object}.")
}

fn intro_sentence(entity: &str, kind: &str) -> String {
    format!("{entity} is a {kind}.")
}

/// One multi-hop question over a private entity chain.
///
/// `entities[j]` is the subject of `hop_docs[j]`. For `j + 1 < depth` that
/// document names `entities[j + 1]` under `relations[j]`; the last hop
/// document states `attribute` of the last entity, which is the answer.
/// A depth-0 task states its answer inside the question itself and still
/// ships the answer document for its only entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub id: String,
    pub depth: usize,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub attribute: String,
    pub answer: String,
    pub aliases: Vec<String>,
    pub hop_docs: Vec<Document>,
    pub distractors: Vec<Document>,
    pub question: String,
    pub seed: u64,
}

impl SyntheticTask {
    pub fn record(&self) -> QuestionRecord {
        QuestionRecord {
            id: self.id.clone(),
            question: self.question.clone(),
            gold_answers: self.aliases.clone(),
        }
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.hop_docs.iter().chain(&self.distractors)
    }

    pub fn answer_doc(&self) -> &Document {
        self.hop_docs.last().expect("every task has an answer document")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskGenConfig {
    pub count: usize,
    /// Depths are drawn uniformly from this list.
    pub depths: Vec<usize>,
    pub distractors: usize,
}

impl Default for TaskGenConfig {
    fn default() -> Self {
        Self { count: 600, depths: vec![1, 2, 3], distractors: DEFAULT_DISTRACTORS }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskGenError {
    #[error("task count must be at least 1")]
    NoTasks,
    #[error("depth list is empty")]
    NoDepths,
    #[error("at least 5 distractors per task are required, got {0}")]
    TooFewDistractors(usize),
}

struct NameGen {
    used: HashSet<String>,
}

impl NameGen {
    fn new() -> Self {
        let mut used: HashSet<String> = HashSet::new();
        used.extend(RELATIONS.iter().chain(&ATTRIBUTES).chain(&KINDS).map(|w| w.to_string()));
        used.extend(crate::policy::WRONG_ANSWERS.iter().flat_map(|w| normalize_answer(w)));
        Self { used }
    }

    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let n = rng.random_range(3..=4);
            let word: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
            if self.used.insert(word.clone()) {
                let mut chars = word.chars();
                let first = chars.next().expect("non-empty").to_ascii_uppercase();
                return std::iter::once(first).chain(chars).collect();
            }
        }
    }
}

fn doc(id: String, subject: &str, kind: &str, fact: String) -> Document {
    Document::new(id, subject, format!("{} {fact}", intro_sentence(subject, kind)))
}

fn build_task(index: usize, depth: usize, distractors: usize, seed: u64, names: &mut NameGen, rng: &mut ChaCha8Rng) -> SyntheticTask {
    let id = format!("t{index:05}");
    let n_entities = depth.max(1);
    let entities: Vec<String> = (0..n_entities).map(|_| names.fresh(rng)).collect();
    let relations: Vec<String> = (0..n_entities - 1)
        .map(|_| RELATIONS.choose(rng).expect("non-empty").to_string())
        .collect();
    let attribute = ATTRIBUTES.choose(rng).expect("non-empty").to_string();
    let answer = names.fresh(rng);
    let aliases = vec![answer.clone(), format!("{answer} {attribute}")];

    let hop_docs: Vec<Document> = (0..n_entities)
        .map(|j| {
            let kind = KINDS.choose(rng).expect("non-empty");
            let fact = if j + 1 < n_entities {
                fact_sentence(&relations[j], &entities[j], &entities[j + 1])
            } else {
                fact_sentence(&attribute, &entities[j], &answer)
            };
            doc(format!("{id}-h{j}"), &entities[j], kind, fact)
        })
        .collect();

    let distractors = (0..distractors)
        .map(|j| {
            let subject = names.fresh(rng);
            let object = names.fresh(rng);
            let kind = KINDS.choose(rng).expect("non-empty");
            // Half of them share the task's attribute word to make lexical
            // retrieval work for its ranking.
            let relation = if j % 2 == 0 { attribute.clone() } else { RELATIONS.choose(rng).expect("non-empty").to_string() };
            doc(format!("{id}-x{j}"), &subject, kind, fact_sentence(&relation, &subject, &object))
        })
        .collect();

    let question = if depth == 0 {
        format!(
            "{} What is the {attribute} of {}?",
            fact_sentence(&attribute, &entities[0], &answer),
            entities[0]
        )
    } else {
        let mut q = format!("What is the {attribute} of ");
        for rel in relations.iter().rev() {
            q.push_str(&format!("the {rel} of "));
        }
        q.push_str(&entities[0]);
        q.push('?');
        q
    };

    SyntheticTask { id, depth, entities, relations, attribute, answer, aliases, hop_docs, distractors, question, seed }
}

/// A generated task family with its corpus and dataset views.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub tasks: Vec<SyntheticTask>,
    by_id: HashMap<String, usize>,
}

impl TaskSet {
    pub fn new(tasks: Vec<SyntheticTask>) -> Self {
        let by_id = tasks.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect();
        Self { tasks, by_id }
    }

    pub fn get(&self, id: &str) -> Option<&SyntheticTask> {
        self.by_id.get(id).map(|&i| &self.tasks[i])
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn corpus(&self) -> Vec<Document> {
        let mut docs: Vec<Document> = self.tasks.iter().flat_map(|t| t.documents().cloned()).collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        docs
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::new(self.tasks.iter().map(SyntheticTask::record).collect()).expect("generated ids are unique")
    }

    /// Writes `dataset.jsonl`, `corpus.jsonl` and `tasks.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), JsonlError> {
        let dataset = dir.join("dataset.jsonl");
        let corpus = dir.join("corpus.jsonl");
        self.dataset().write(&dataset)?;
        write_jsonl(&corpus, &self.corpus())?;
        write_jsonl(&dir.join("tasks.jsonl"), &self.tasks)?;
        Ok((dataset, corpus))
    }
}

/// Reads a `tasks.jsonl` written by [`TaskSet::write`].
pub fn load_tasks(path: &Path) -> Result<TaskSet, JsonlError> {
    let mut tasks = Vec::new();
    for (n, line) in read_jsonl_lines(path)? {
        tasks.push(from_json_str::<SyntheticTask>(&line).map_err(|e| e.at_line(n))?);
    }
    Ok(TaskSet::new(tasks))
}

pub fn generate_tasks(config: &TaskGenConfig, seed: u64) -> Result<TaskSet, TaskGenError> {
    if config.count == 0 {
        return Err(TaskGenError::NoTasks);
    }
    if config.depths.is_empty() {
        return Err(TaskGenError::NoDepths);
    }
    if config.distractors < 5 {
        return Err(TaskGenError::TooFewDistractors(config.distractors));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, "tasks", 0));
    let mut names = NameGen::new();
    let tasks = (0..config.count)
        .map(|i| {
            let depth = *config.depths.choose(&mut rng).expect("non-empty");
            build_task(i, depth, config.distractors, seed, &mut names, &mut rng)
        })
        .collect();
    Ok(TaskSet::new(tasks))
}
