//! Step-wise rewards: format and outcome (the base reward), search
//! efficiency driven by the capability-aware optimal depth `t_c`, and search
//! quality as the F1 gain over earlier intermediate answers.

use serde::{Deserialize, Serialize};

use crate::metrics::{exact_match, token_f1};
use crate::trajectory::{QuestionRecord, StepRewards, Trajectory, NO_CAPABILITY_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConstants {
    pub format_valid_mid: f64,
    pub format_invalid_mid: f64,
    pub format_valid_terminal: f64,
    pub format_invalid_terminal: f64,
    pub undersearch: f64,
    pub efficiency_numerator: f64,
    pub efficiency_offset: f64,
    pub oversearch_penalty: f64,
    pub epsilon: f64,
    /// Scale of the terminal exact-match reward.
    pub outcome_weight: f64,
    /// Scale of the F1-gain reward.
    pub quality_weight: f64,
    /// Clip negative F1 gains at zero.
    pub clip_quality: bool,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            format_valid_mid: 0.0,
            format_invalid_mid: -0.05,
            format_valid_terminal: 0.1,
            format_invalid_terminal: -0.5,
            undersearch: 0.025,
            efficiency_numerator: 0.4,
            efficiency_offset: -0.05,
            oversearch_penalty: -0.1,
            epsilon: 1e-6,
            outcome_weight: 1.0,
            quality_weight: 1.0,
            clip_quality: false,
        }
    }
}

/// Reward component removed in an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Efficiency,
    Quality,
    Base,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "efficiency" => Ok(Self::Efficiency),
            "quality" => Ok(Self::Quality),
            "base" => Ok(Self::Base),
            other => Err(format!("unknown ablation {other:?} (expected efficiency, quality or base)")),
        }
    }
}

impl RewardConstants {
    pub fn ablate(mut self, component: Ablation) -> Self {
        match component {
            Ablation::Efficiency => {
                self.undersearch = 0.0;
                self.efficiency_numerator = 0.0;
                self.efficiency_offset = 0.0;
                self.oversearch_penalty = 0.0;
            }
            Ablation::Quality => self.quality_weight = 0.0,
            Ablation::Base => {
                self.format_valid_mid = 0.0;
                self.format_invalid_mid = 0.0;
                self.format_valid_terminal = 0.0;
                self.format_invalid_terminal = 0.0;
                self.outcome_weight = 0.0;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let values = [
            self.format_valid_mid,
            self.format_invalid_mid,
            self.format_valid_terminal,
            self.format_invalid_terminal,
            self.undersearch,
            self.efficiency_numerator,
            self.efficiency_offset,
            self.oversearch_penalty,
            self.outcome_weight,
            self.quality_weight,
        ];
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(RewardError::Contract("reward constants must be finite and epsilon > 0".into()));
        }
        Ok(())
    }

    /// Reward of one step at or before `t_c`.
    pub fn effective_step_reward(&self, t_c: i64) -> f64 {
        self.efficiency_numerator / (t_c as f64 + self.epsilon) + self.efficiency_offset
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("step {step} has no intermediate answer; efficiency and quality rewards need one per search step")]
    MissingIntermediate { step: usize },
    #[error(transparent)]
    Schema(#[from] crate::trajectory::SchemaError),
}

/// Per-position rewards; `S` search steps followed by the answering turn.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format: Vec<f64>,
    pub outcome: Vec<f64>,
    pub efficiency: Vec<f64>,
    pub quality: Vec<f64>,
    pub overall: Vec<f64>,
}

impl RewardBreakdown {
    pub fn len(&self) -> usize {
        self.overall.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overall.is_empty()
    }

    pub fn at(&self, t: usize) -> StepRewards {
        StepRewards {
            format: self.format[t],
            outcome: self.outcome[t],
            efficiency: self.efficiency[t],
            quality: self.quality[t],
            overall: self.overall[t],
        }
    }

    pub fn total(&self) -> f64 {
        self.overall.iter().sum()
    }
}

pub fn format_reward(valid: bool, is_terminal: bool, c: &RewardConstants) -> f64 {
    match (valid, is_terminal) {
        (true, false) => c.format_valid_mid,
        (false, false) => c.format_invalid_mid,
        (true, true) => c.format_valid_terminal,
        (false, true) => c.format_invalid_terminal,
    }
}

/// Exact match of the final answer, paid only at the terminal position.
pub fn outcome_reward<S: AsRef<str>>(final_answer: Option<&str>, golds: &[S], is_terminal: bool) -> f64 {
    match (is_terminal, final_answer) {
        (true, Some(answer)) => f64::from(exact_match(answer, golds)),
        _ => 0.0,
    }
}

/// Earliest 1-based step whose intermediate answer exactly matches a gold
/// alias, or `-1`.
pub fn find_capability_depth<A, S>(intermediate_answers: &[Option<A>], golds: &[S]) -> i64
where
    A: AsRef<str>,
    S: AsRef<str>,
{
    intermediate_answers
        .iter()
        .position(|a| a.as_ref().is_some_and(|a| exact_match(a.as_ref(), golds) == 1))
        .map_or(NO_CAPABILITY_DEPTH, |i| i as i64 + 1)
}

/// Efficiency reward of search step `t` (1-based) out of `depth` steps.
pub fn efficiency_reward(t: usize, t_c: i64, depth: usize, c: &RewardConstants) -> Result<f64, RewardError> {
    if t == 0 || t > depth {
        return Err(RewardError::Contract(format!("step {t} outside 1..={depth}")));
    }
    if t_c == NO_CAPABILITY_DEPTH {
        return Ok(c.undersearch);
    }
    if t_c < 1 || t_c as usize > depth {
        return Err(RewardError::Contract(format!("t_c {t_c} outside 1..={depth}")));
    }
    Ok(if t as i64 <= t_c { c.effective_step_reward(t_c) } else { c.oversearch_penalty })
}

/// F1 gain of step `t` (1-based) over the best earlier step; the best of an
/// empty prefix is 0.
pub fn quality_reward(f1_by_step: &[f64], t: usize) -> Result<f64, RewardError> {
    if t == 0 || t > f1_by_step.len() {
        return Err(RewardError::Contract(format!("step {t} outside 1..={}", f1_by_step.len())));
    }
    let best_before = f1_by_step[..t - 1].iter().copied().fold(0.0, f64::max);
    Ok(f1_by_step[t - 1] - best_before)
}

/// Scores every position of `traj`, fills its `t_c`, per-step rewards and
/// terminal rewards, and returns the breakdown.
pub fn score_trajectory(
    traj: &mut Trajectory,
    record: &QuestionRecord,
    c: &RewardConstants,
) -> Result<RewardBreakdown, RewardError> {
    traj.validate()?;
    let golds = &record.gold_answers;
    let depth = traj.steps.len();
    let mut answers = Vec::with_capacity(depth);
    for step in &traj.steps {
        match &step.intermediate_answer {
            Some(a) => answers.push(a.as_str()),
            None => return Err(RewardError::MissingIntermediate { step: step.index }),
        }
    }
    let t_c = find_capability_depth(
        &answers.iter().map(Some).collect::<Vec<_>>(),
        golds,
    );
    let f1s: Vec<f64> = answers.iter().map(|a| token_f1(a, golds)).collect();

    let mut out = RewardBreakdown::default();
    for (i, step) in traj.steps.iter().enumerate() {
        let t = i + 1;
        let mut quality = quality_reward(&f1s, t)?;
        if c.clip_quality {
            quality = quality.max(0.0);
        }
        out.format.push(format_reward(step.valid, false, c));
        out.outcome.push(0.0);
        out.efficiency.push(efficiency_reward(t, t_c, depth, c)?);
        out.quality.push(c.quality_weight * quality);
    }
    let answered = traj.final_answer.is_some();
    out.format.push(format_reward(answered, true, c));
    out.outcome.push(c.outcome_weight * outcome_reward(traj.final_answer.as_deref(), golds, true));
    out.efficiency.push(0.0);
    out.quality.push(0.0);
    out.overall = (0..=depth)
        .map(|t| out.format[t] + out.outcome[t] + out.efficiency[t] + out.quality[t])
        .collect();

    traj.t_c = t_c;
    for (i, step) in traj.steps.iter_mut().enumerate() {
        step.rewards = Some(out.at(i));
    }
    traj.terminal_rewards = Some(out.at(depth));
    Ok(out)
}

/// Which efficiency branch a search step fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    UnderSearch,
    Effective,
    OverSearch,
}

pub fn classify_step(t: usize, t_c: i64) -> StepClass {
    if t_c == NO_CAPABILITY_DEPTH {
        StepClass::UnderSearch
    } else if t as i64 <= t_c {
        StepClass::Effective
    } else {
        StepClass::OverSearch
    }
}

/// Total reward of an idealised trajectory that stops after `d` searches,
/// for every `d` in `1..=max_depth`, when the agent first answers correctly
/// at step `t_c`.
pub fn cumulative_reward_curve(
    t_c: usize,
    max_depth: usize,
    c: &RewardConstants,
    include_outcome: bool,
) -> Result<Vec<(usize, f64)>, RewardError> {
    if t_c == 0 || t_c > max_depth {
        return Err(RewardError::Contract(format!("t_c {t_c} outside 1..={max_depth}")));
    }
    let terminal_format = if include_outcome { c.format_valid_terminal } else { 0.0 };
    Ok((1..=max_depth)
        .map(|d| {
            let total = if d < t_c {
                d as f64 * c.undersearch + terminal_format
            } else {
                let effective = t_c as f64 * c.effective_step_reward(t_c as i64);
                let over = (d - t_c) as f64 * c.oversearch_penalty;
                let outcome = if include_outcome { c.outcome_weight } else { 0.0 };
                effective + over + outcome + terminal_format
            };
            (d, total)
        })
        .collect())
}
