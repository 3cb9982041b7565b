//! Answer normalisation, Exact Match, token F1 and dataset-level metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::trajectory::{Dataset, Trajectory};

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercases, strips punctuation, drops the articles "a", "an", "the" and
/// splits on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped
        .split_whitespace()
        .filter(|tok| !ARTICLES.contains(tok))
        .map(str::to_string)
        .collect()
}

/// 1 when the normalised prediction equals the normalised form of any alias.
pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> u8 {
    let pred = normalize_answer(pred);
    golds
        .iter()
        .any(|g| normalize_answer(g.as_ref()) == pred)
        .into()
}

fn f1_tokens(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tok in gold {
        *counts.entry(tok).or_default() += 1;
    }
    let mut overlap = 0usize;
    for tok in pred {
        if let Some(c) = counts.get_mut(tok.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    2.0 * overlap as f64 / (pred.len() + gold.len()) as f64
}

/// Token-multiset F1, `2·IN / (PN + RN)`, maximised over aliases.
pub fn token_f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    let pred = normalize_answer(pred);
    golds
        .iter()
        .map(|g| f1_tokens(&pred, &normalize_answer(g.as_ref())))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub em: f64,
    pub f1: f64,
    /// Mean number of search steps.
    pub sd: f64,
    /// `em / sd`; equals `em` when no searches were made at all.
    pub se: f64,
    /// Fraction of samples answered correctly by an intermediate answer
    /// before the last search step.
    pub osr: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "n,em,f1,sd,se,osr";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.n, self.em, self.f1, self.sd, self.se, self.osr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty evaluation set")]
    Empty,
    #[error("question id {0:?} not found in dataset")]
    UnknownQuestion(String),
}

/// Whether some step before the last one already carried a correct
/// intermediate answer.
pub fn over_searched<S: AsRef<str>>(traj: &Trajectory, golds: &[S]) -> bool {
    let last = traj.steps.len();
    traj.steps.iter().any(|s| {
        s.index < last
            && s.intermediate_answer
                .as_deref()
                .is_some_and(|a| exact_match(a, golds) == 1)
    })
}

pub fn aggregate_metrics(trajectories: &[Trajectory], dataset: &Dataset) -> Result<MetricsReport, MetricsError> {
    if trajectories.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut em, mut f1, mut steps, mut osr) = (0.0, 0.0, 0usize, 0usize);
    for traj in trajectories {
        let record = dataset
            .get(&traj.question_id)
            .ok_or_else(|| MetricsError::UnknownQuestion(traj.question_id.clone()))?;
        if let Some(answer) = &traj.final_answer {
            em += f64::from(exact_match(answer, &record.gold_answers));
            f1 += token_f1(answer, &record.gold_answers);
        }
        steps += traj.steps.len();
        osr += usize::from(over_searched(traj, &record.gold_answers));
    }
    let n = trajectories.len();
    let nf = n as f64;
    let (em, f1, sd) = (em / nf, f1 / nf, steps as f64 / nf);
    Ok(MetricsReport {
        n,
        em,
        f1,
        sd,
        se: if sd > 0.0 { em / sd } else { em },
        osr: osr as f64 / nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{QuestionRecord, Step};
    use proptest::prelude::*;

    #[test]
    fn normalisation_examples() {
        assert_eq!(normalize_answer("The Mesopotamia."), vec!["mesopotamia"]);
        assert!(normalize_answer("").is_empty());
        assert_eq!(normalize_answer("legal drama"), vec!["legal", "drama"]);
        assert_eq!(normalize_answer("  An   Apple, a day!"), vec!["apple", "day"]);
        // articles only drop as whole tokens
        assert_eq!(normalize_answer("theatre"), vec!["theatre"]);
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match("legal drama", &["legal drama", "courtroom drama"]), 1);
        assert_eq!(exact_match("Courtroom Drama.", &["legal drama", "courtroom drama"]), 1);
        assert_eq!(exact_match("Beijing", &["Beijing"]), 1);
        assert_eq!(exact_match("drama", &["legal drama"]), 0);
    }

    #[test]
    fn f1_examples() {
        assert!((token_f1("drama", &["legal drama"]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1("legal drama", &["legal drama"]), 1.0);
        assert_eq!(token_f1("x y", &["a b"]), 0.0);
        assert_eq!(token_f1("", &["a b"]), 0.0);
        // multiset overlap: only one "a" is shared
        assert!((token_f1("x x y", &["x z"]) - 0.4).abs() < 1e-12);
    }

    fn dataset() -> Dataset {
        Dataset::new(vec![
            QuestionRecord::new("q1", "?", vec!["paris".into()]).unwrap(),
            QuestionRecord::new("q2", "?", vec!["rome".into()]).unwrap(),
        ])
        .unwrap()
    }

    fn steps(answers: &[&str]) -> Vec<Step> {
        answers
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut s = Step::new(i + 1, format!("q{i}"));
                s.intermediate_answer = Some(a.to_string());
                s
            })
            .collect()
    }

    #[test]
    fn single_trajectory_report() {
        let t = Trajectory::answered("q1", steps(&["x", "paris"]), "Paris");
        let r = aggregate_metrics(&[t], &dataset()).unwrap();
        assert_eq!((r.n, r.em, r.sd, r.se, r.osr), (1, 1.0, 2.0, 0.5, 0.0));
    }

    #[test]
    fn empty_set_errors() {
        assert_eq!(aggregate_metrics(&[], &dataset()), Err(MetricsError::Empty));
    }

    #[test]
    fn unknown_id_is_named() {
        let t = Trajectory::answered("zz", vec![], "a");
        assert_eq!(
            aggregate_metrics(&[t], &dataset()),
            Err(MetricsError::UnknownQuestion("zz".into()))
        );
    }

    #[test]
    fn over_search_ratio_counts_all_samples() {
        let early = Trajectory::answered("q1", steps(&["paris", "paris", "paris"]), "paris");
        let never = Trajectory::answered("q2", steps(&["x", "y"]), "z");
        let r = aggregate_metrics(&[early, never], &dataset()).unwrap();
        assert_eq!(r.osr, 0.5);
        assert_eq!(r.em, 0.5);
        assert_eq!(r.sd, 2.5);
    }

    #[test]
    fn zero_depth_efficiency_falls_back_to_em() {
        let t = Trajectory::answered("q1", vec![], "paris");
        let r = aggregate_metrics(&[t], &dataset()).unwrap();
        assert_eq!((r.sd, r.se), (0.0, 1.0));
    }

    fn words() -> impl Strategy<Value = String> {
        prop::collection::vec(prop_oneof!["[a-d]{1,3}", Just("the".to_string()), Just("A".to_string())], 0..5)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn em_implies_full_f1(p in words(), g in words()) {
            if !normalize_answer(&g).is_empty() && exact_match(&p, &[&g]) == 1 {
                prop_assert_eq!(token_f1(&p, &[&g]), 1.0);
            }
        }

        #[test]
        fn f1_is_symmetric(p in words(), g in words()) {
            prop_assert_eq!(token_f1(&p, &[&g]), token_f1(&g, &[&p]));
        }

        #[test]
        fn f1_in_unit_interval(p in words(), g in words()) {
            let f = token_f1(&p, &[&g]);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn normalisation_idempotent(s in ".{0,30}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once.join(" ")), once);
        }
    }
}
