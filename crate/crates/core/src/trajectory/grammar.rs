use super::{ActionKind, AgentAction};

/// Result of parsing one completed generation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedTurn {
    pub actions: Vec<AgentAction>,
    /// Contents of environment-injected `<information>` spans.
    pub observations: Vec<String>,
    pub well_formed: bool,
}

impl ParsedTurn {
    /// The single search or answer action of an agent turn, if there is
    /// exactly one.
    pub fn decision(&self) -> Option<&AgentAction> {
        let mut decisions = self.actions.iter().filter(|a| a.kind != ActionKind::Think);
        let first = decisions.next()?;
        decisions.next().is_none().then_some(first)
    }

    pub fn think_text(&self) -> String {
        self.actions
            .iter()
            .filter(|a| a.kind == ActionKind::Think)
            .map(|a| a.payload.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Action(ActionKind),
    Information,
}

const TAGS: [(Tag, &str, &str); 4] = [
    (Tag::Action(ActionKind::Think), "<think>", "</think>"),
    (Tag::Action(ActionKind::Search), "<search>", "</search>"),
    (Tag::Action(ActionKind::Answer), "<answer>", "</answer>"),
    (Tag::Information, "<information>", "</information>"),
];

fn next_open(raw: &str, from: usize) -> Option<(usize, usize)> {
    TAGS.iter()
        .enumerate()
        .filter_map(|(i, (_, open, _))| raw[from..].find(open).map(|p| (from + p, i)))
        .min()
}

/// Extracts `<think>`, `<search>` and `<answer>` spans in document order.
///
/// A turn is well formed when every opened tag closes, no tag nests inside
/// another, nothing but whitespace sits outside tags, search and answer
/// payloads are non-empty, at least one search or answer exists, and an
/// answer (if any) is the single last action. Malformed input still yields
/// every span that could be recovered.
pub fn parse_tagged_text(raw: &str) -> ParsedTurn {
    let mut turn = ParsedTurn { well_formed: true, ..Default::default() };
    let mut pos = 0;

    while pos < raw.len() {
        let Some((start, tag_idx)) = next_open(raw, pos) else {
            if !raw[pos..].trim().is_empty() {
                turn.well_formed = false;
            }
            break;
        };
        if !raw[pos..start].trim().is_empty() {
            turn.well_formed = false;
        }
        let (tag, open, close) = TAGS[tag_idx];
        let body_start = start + open.len();
        let close_at = raw[body_start..].find(close).map(|p| body_start + p);
        let inner_open = next_open(raw, body_start);

        match (close_at, inner_open) {
            (Some(c), inner) if inner.is_none_or(|(o, _)| o > c) => {
                let body = raw[body_start..c].trim();
                match tag {
                    Tag::Information => turn.observations.push(body.to_string()),
                    Tag::Action(kind) => {
                        if kind != ActionKind::Think && body.is_empty() {
                            turn.well_formed = false;
                        } else {
                            turn.actions.push(AgentAction { kind, payload: body.to_string() });
                        }
                    }
                }
                pos = c + close.len();
            }
            // Unclosed or nested: drop the outer tag and resume at the inner one.
            (_, Some((o, _))) => {
                turn.well_formed = false;
                pos = o;
            }
            (_, None) => {
                turn.well_formed = false;
                break;
            }
        }
    }

    let answers: Vec<usize> = turn
        .actions
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind == ActionKind::Answer)
        .map(|(i, _)| i)
        .collect();
    let has_decision = turn.actions.iter().any(|a| a.kind != ActionKind::Think);
    if !has_decision || answers.len() > 1 || answers.first().is_some_and(|&i| i + 1 != turn.actions.len()) {
        turn.well_formed = false;
    }
    turn
}

/// Inverse of [`parse_tagged_text`] for well-formed action lists.
pub fn render_actions(actions: &[AgentAction]) -> String {
    let mut out = String::new();
    for action in actions {
        let tag = action.kind.tag();
        out.push_str(&format!("<{tag}>{}</{tag}>", action.payload));
    }
    out
}
