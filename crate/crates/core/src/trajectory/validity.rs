use std::collections::BTreeSet;

use super::Step;
use crate::metrics::normalize_answer;

/// A step is invalid when its turn was malformed, when its normalised query
/// repeats an earlier query, or when it retrieved exactly the same
/// (non-empty) document set as an earlier step.
pub fn check_step_validity(step: &Step, turn_well_formed: bool, history: &[Step]) -> bool {
    if !turn_well_formed {
        return false;
    }
    let query = normalize_answer(&step.search_query);
    let docs: BTreeSet<&str> = step.retrieved_doc_ids.iter().map(String::as_str).collect();
    !history.iter().any(|earlier| {
        if normalize_answer(&earlier.search_query) == query {
            return true;
        }
        if docs.is_empty() {
            return false;
        }
        let earlier_docs: BTreeSet<&str> =
            earlier.retrieved_doc_ids.iter().map(String::as_str).collect();
        earlier_docs == docs
    })
}
