//! Smell-introducing transformations. Each generator finds candidates in a
//! resolved model and rewrites source text, recording the inverse
//! refactoring as ground truth.

pub mod feature_envy;
pub mod large_class;
pub mod long_method;
pub mod text;
pub mod verify;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::MetricVector;
use crate::model::ProjectModel;
use crate::sample::{Provenance, RefactoringAction, Smell};

pub use feature_envy::{find_move_candidates_feature_envy, move_method, FePattern, MoveCandidateFE};
pub use large_class::{find_merge_candidates_large_class, merge_classes, LcPattern, MergeCandidateLC};
pub use long_method::{find_merge_candidates_long_method, merge_methods, LmPattern, MergeCandidateLM};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub smell: Smell,
    pub pattern: String,
    pub new_source: String,
    #[serde(default)]
    pub context_sources: BTreeMap<String, String>,
    pub ground_truth: RefactoringAction,
    pub metrics: MetricVector,
    pub provenance: Provenance,
}

/// A candidate that did not produce a sample, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discard {
    pub smell: Smell,
    pub pattern: String,
    pub entity: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub samples: Vec<GeneratedSample>,
    pub discards: Vec<Discard>,
}

impl GenerationReport {
    fn absorb(&mut self, results: Vec<Result<GeneratedSample, Discard>>) {
        for r in results {
            match r {
                Ok(s) => self.samples.push(s),
                Err(d) => self.discards.push(d),
            }
        }
    }
}

/// Runs every generator over `model`, in a fixed order: long method, large
/// class, feature envy; within each, candidate discovery order.
pub fn generate_all(model: &ProjectModel) -> GenerationReport {
    let mut report = GenerationReport::default();

    let lm = find_merge_candidates_long_method(model);
    report.absorb(lm.par_iter().map(|c| gate(model, merge_methods(model, c))).collect());

    let lc = find_merge_candidates_large_class(model);
    report.absorb(lc.par_iter().map(|c| gate(model, merge_classes(model, c))).collect());

    let fe = find_move_candidates_feature_envy(model);
    report.absorb(fe.par_iter().map(|c| gate(model, move_method(model, c))).collect());

    tracing::info!(
        project = %model.project_id,
        samples = report.samples.len(),
        discards = report.discards.len(),
        "generation finished"
    );
    report
}

/// Well-formedness gate: re-parse and symbol sweep. Fills in metrics of
/// the rewritten entity.
fn gate(model: &ProjectModel, r: Result<GeneratedSample, Discard>) -> Result<GeneratedSample, Discard> {
    let mut s = r?;
    let discard = |s: &GeneratedSample, reason: String| Discard {
        smell: s.smell,
        pattern: s.pattern.clone(),
        entity: s.provenance.entity.clone(),
        reason,
    };
    if let Err(e) = verify::reparse(&s) {
        return Err(discard(&s, e));
    }
    match verify::analyze(model, &s) {
        Ok(a) if a.introduced.is_empty() => {
            s.metrics = a.metrics;
            Ok(s)
        }
        Ok(a) => Err(discard(
            &s,
            format!("unresolved identifiers: {}", a.introduced.into_iter().collect::<Vec<_>>().join(", ")),
        )),
        Err(e) => Err(discard(&s, e)),
    }
}

/// `pkg.Class#name/arity`
pub fn method_key(class: &str, name: &str, arity: usize) -> String {
    format!("{class}#{name}/{arity}")
}
