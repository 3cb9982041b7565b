//! Reads a rendered prompt back into what a simulated agent "knows": the
//! question's relation path, the searches made so far, and which facts the
//! observations revealed.

use crate::metrics::normalize_answer;

const QUESTION_MARKER: &str = "Question: ";
const NUMBER_WORDS: [&str; 5] = ["zero", "one", "two", "three", "four"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub relation: String,
    pub subject: String,
    pub object: String,
}

/// Parses "The {relation} of {subject} is {object}".
pub fn parse_fact(sentence: &str) -> Option<Fact> {
    let rest = sentence.trim().trim_end_matches('.').strip_prefix("The ")?;
    let (relation, rest) = rest.split_once(" of ")?;
    let (subject, object) = rest.split_once(" is ")?;
    Some(Fact { relation: relation.into(), subject: subject.into(), object: object.into() })
}

/// Fact sentences of one observation block, in order.
pub fn facts_in(text: &str) -> Vec<Fact> {
    text.lines()
        .flat_map(|line| {
            // Drop the "Doc n (Title: x) " banner.
            let body = match (line.starts_with("Doc "), line.find(") ")) {
                (true, Some(p)) => &line[p + 2..],
                _ => line,
            };
            body.split(". ").filter_map(parse_fact).collect::<Vec<_>>()
        })
        .collect()
}

/// The relation path a question asks to follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionChain {
    pub start: String,
    /// Relations to follow in order; the last element is the attribute.
    pub path: Vec<String>,
    /// Facts stated inside the question itself.
    pub context: Vec<Fact>,
}

pub fn parse_question(question: &str) -> Option<QuestionChain> {
    let q = question.trim();
    let p = q.rfind("What is the ")?;
    let (context, ask) = (&q[..p], &q[p + "What is the ".len()..]);
    let ask = ask.trim_end_matches('?');
    let parts: Vec<&str> = ask.split(" of ").collect();
    if parts.len() < 2 {
        return None;
    }
    let attribute = parts[0].to_string();
    let start = parts[parts.len() - 1].to_string();
    let mut path: Vec<String> = parts[1..parts.len() - 1]
        .iter()
        .rev()
        .map(|p| p.strip_prefix("the ").unwrap_or(p).to_string())
        .collect();
    path.push(attribute);
    Some(QuestionChain { start, path, context: facts_in(context) })
}

/// What a prompt tells an agent about its own situation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromptView {
    pub question: String,
    /// Search payload of every earlier step (empty for malformed steps).
    pub queries: Vec<String>,
    pub observations: Vec<String>,
    /// Required number of searches when the prompt demands an exact count.
    pub quota: Option<usize>,
    pub search_allowed: bool,
    pub intermediate: bool,
}

impl PromptView {
    pub fn steps(&self) -> usize {
        self.observations.len()
    }
}

fn spans(text: &str, open: &str, close: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(p) = rest.find(open) {
        let body = &rest[p + open.len()..];
        let Some(c) = body.find(close) else { break };
        out.push(body[..c].trim().to_string());
        rest = &body[c + close.len()..];
    }
    out
}

pub fn read_prompt(prompt: &str) -> PromptView {
    let Some(qpos) = prompt.find(QUESTION_MARKER) else {
        return PromptView::default();
    };
    let head = &prompt[..qpos];
    let after = &prompt[qpos + QUESTION_MARKER.len()..];
    let qend = after.find('?').map_or(after.len(), |p| p + 1);
    let question = after[..qend].to_string();
    let region = &after[qend..];

    let queries = spans(region, "<search>", "</search>");
    let observations = spans(region, "<information>", "</information>");
    let quota = head.find("search exactly ").and_then(|p| {
        let word = head[p + "search exactly ".len()..].split_whitespace().next()?;
        NUMBER_WORDS.iter().position(|w| *w == word)
    });
    PromptView {
        question,
        queries,
        observations,
        quota,
        search_allowed: head.contains("<search> query </search>"),
        intermediate: head.contains("according to search trajectories"),
    }
}

/// How far the observations got along the question's relation path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainProgress {
    pub resolved: usize,
    /// Entity whose next relation is still unknown (or the bearer of the
    /// attribute once complete).
    pub current: String,
    pub answer: Option<String>,
    /// Observation indices (1-based; 0 stands for the question) that stated
    /// the answer fact.
    pub answer_steps: Vec<usize>,
    /// Whether each observation advanced the chain or restated the answer.
    pub useful: Vec<bool>,
}

impl ChainProgress {
    pub fn complete(&self) -> bool {
        self.answer.is_some()
    }

    pub fn next_relation<'a>(&self, chain: &'a QuestionChain) -> Option<&'a str> {
        chain.path.get(self.resolved).map(String::as_str)
    }
}

pub fn follow_chain(chain: &QuestionChain, observations: &[String]) -> ChainProgress {
    let mut p = ChainProgress {
        resolved: 0,
        current: chain.start.clone(),
        answer: None,
        answer_steps: Vec::new(),
        useful: Vec::with_capacity(observations.len()),
    };
    let same = |a: &str, b: &str| normalize_answer(a) == normalize_answer(b);
    let sources = std::iter::once(chain.context.clone()).chain(observations.iter().map(|o| facts_in(o)));
    for (i, facts) in sources.enumerate() {
        let mut useful = false;
        for fact in &facts {
            let Some(rel) = chain.path.get(p.resolved) else {
                // Chain resolved: only restatements of the answer matter.
                let last = chain.path.last().expect("path is non-empty");
                if same(&fact.relation, last) && same(&fact.subject, &p.current) {
                    useful = true;
                    if p.answer_steps.last() != Some(&i) {
                        p.answer_steps.push(i);
                    }
                }
                continue;
            };
            if same(&fact.relation, rel) && same(&fact.subject, &p.current) {
                useful = true;
                p.resolved += 1;
                if p.resolved == chain.path.len() {
                    p.answer = Some(fact.object.clone());
                    p.answer_steps.push(i);
                } else {
                    p.current = fact.object.clone();
                }
            }
        }
        if i > 0 {
            p.useful.push(useful);
        }
    }
    p
}
