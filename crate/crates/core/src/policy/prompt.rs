use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trajectory::Step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Rollout,
    IntermediateAnswer,
    FixedDepth(u8),
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateName::Rollout => f.write_str("rollout"),
            TemplateName::IntermediateAnswer => f.write_str("intermediate_answer"),
            TemplateName::FixedDepth(n) => write!(f, "fixed_depth_{n}"),
        }
    }
}

impl FromStr for TemplateName {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rollout" => Ok(TemplateName::Rollout),
            "intermediate_answer" => Ok(TemplateName::IntermediateAnswer),
            _ => s
                .strip_prefix("fixed_depth_")
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|&n| usize::from(n) <= MAX_FIXED_DEPTH)
                .map(TemplateName::FixedDepth)
                .ok_or_else(|| PromptError::UnknownTemplate(s.to_string())),
        }
    }
}

pub const MAX_FIXED_DEPTH: usize = 4;

const PLACEHOLDERS: [&str; 2] = ["question", "trajectory"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template {template}: unresolved placeholder {{{name}}}")]
    Unresolved { template: String, name: String },
    #[error("template {template}: missing placeholder {{{name}}}")]
    Missing { template: String, name: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("no fixed-depth template for {0} searches")]
    NoFixedDepth(usize),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(usize),
}

/// A prompt with `{question}` and `{trajectory}` slots, checked at load time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    text: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn new(name: TemplateName, text: impl Into<String>) -> Result<Self, PromptError> {
        let text = text.into();
        let mut pieces = Vec::new();
        let mut rest = text.as_str();
        let mut seen = [false; PLACEHOLDERS.len()];
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let close = after.find('}');
            let ident = close.map(|c| &after[..c]).filter(|id| {
                !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            });
            let Some(ident) = ident else {
                // A lone brace is literal text.
                pieces.push(Piece::Text(rest[..=open].to_string()));
                rest = after;
                continue;
            };
            let slot = PLACEHOLDERS.iter().position(|p| *p == ident).ok_or_else(|| PromptError::Unresolved {
                template: name.to_string(),
                name: ident.to_string(),
            })?;
            seen[slot] = true;
            pieces.push(Piece::Text(rest[..open].to_string()));
            pieces.push(Piece::Slot(slot));
            rest = &after[ident.len() + 1..];
        }
        pieces.push(Piece::Text(rest.to_string()));
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(PromptError::Missing { template: name.to_string(), name: PLACEHOLDERS[i].to_string() });
        }
        pieces.retain(|p| !matches!(p, Piece::Text(t) if t.is_empty()));
        Ok(Self { name, text, pieces })
    }

    pub fn from_file(name: TemplateName, path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::new(name, text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Substitutes both slots in one pass, so placeholder-like text inside
    /// the question is never expanded again.
    pub fn render(&self, question: &str, trajectory: &str) -> String {
        let mut out = String::with_capacity(self.text.len() + question.len() + trajectory.len());
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(0) => out.push_str(question),
                Piece::Slot(_) => out.push_str(trajectory),
            }
        }
        out
    }
}

/// Serialises a trajectory prefix as interleaved think/search/information
/// spans. Every step renders all three spans, so each step contributes
/// exactly one `<information>` block.
pub fn serialize_prefix(steps: &[Step]) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str("<think>");
        out.push_str(&step.think_text);
        out.push_str("</think>\n<search>");
        out.push_str(&step.search_query);
        out.push_str("</search>\n<information>");
        out.push_str(&step.observation_text);
        out.push_str("</information>\n");
    }
    out
}

pub fn render_prompt(template: &PromptTemplate, question: &str, prefix: &[Step]) -> String {
    template.render(question, &serialize_prefix(prefix))
}

/// The full template family used by one rollout session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub rollout: PromptTemplate,
    pub intermediate: PromptTemplate,
    pub fixed: Vec<PromptTemplate>,
}

const BUILTIN_FIXED: [&str; MAX_FIXED_DEPTH + 1] = [
    include_str!("../../templates/fixed_depth_0.txt"),
    include_str!("../../templates/fixed_depth_1.txt"),
    include_str!("../../templates/fixed_depth_2.txt"),
    include_str!("../../templates/fixed_depth_3.txt"),
    include_str!("../../templates/fixed_depth_4.txt"),
];

impl PromptSet {
    pub fn builtin() -> Self {
        let load = |name, text: &str| PromptTemplate::new(name, text).expect("bundled template is valid");
        Self {
            rollout: load(TemplateName::Rollout, include_str!("../../templates/rollout.txt")),
            intermediate: load(TemplateName::IntermediateAnswer, include_str!("../../templates/intermediate_answer.txt")),
            fixed: BUILTIN_FIXED
                .iter()
                .enumerate()
                .map(|(n, text)| load(TemplateName::FixedDepth(n as u8), text))
                .collect(),
        }
    }

    /// Replaces bundled templates with `<name>.txt` files found in `dir`.
    pub fn with_overrides(mut self, dir: &Path) -> Result<Self, PromptError> {
        let mut names = vec![TemplateName::Rollout, TemplateName::IntermediateAnswer];
        names.extend((0..=MAX_FIXED_DEPTH as u8).map(TemplateName::FixedDepth));
        for name in names {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let template = PromptTemplate::from_file(name, &path)?;
            match name {
                TemplateName::Rollout => self.rollout = template,
                TemplateName::IntermediateAnswer => self.intermediate = template,
                TemplateName::FixedDepth(n) => self.fixed[usize::from(n)] = template,
            }
        }
        Ok(self)
    }

    pub fn get(&self, name: TemplateName) -> Result<&PromptTemplate, PromptError> {
        match name {
            TemplateName::Rollout => Ok(&self.rollout),
            TemplateName::IntermediateAnswer => Ok(&self.intermediate),
            TemplateName::FixedDepth(n) => self.fixed.get(usize::from(n)).ok_or(PromptError::NoFixedDepth(n.into())),
        }
    }

    pub fn for_episode(&self, fixed_depth: Option<usize>) -> Result<&PromptTemplate, PromptError> {
        match fixed_depth {
            None => Ok(&self.rollout),
            Some(n) => self.fixed.get(n).ok_or(PromptError::NoFixedDepth(n)),
        }
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}
