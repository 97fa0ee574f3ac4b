//! Routes candidates into the auto-accepted group, the manual-review group
//! or the discard pile.
//!
//! Rule ids are `<smell>.T<n>.<row>` for table rows and `<smell>.D-G<n>` for
//! the two routing decisions the tables leave open:
//!
//! | id         | origin    | likelihood | advisor  | outcome        |
//! |------------|-----------|------------|----------|----------------|
//! | `LM.T1.A1` | generated | high       |          | A / positive   |
//! | `LM.T1.A2` | original  | low        | negative | A / negative   |
//! | `LM.T1.M1` | original  | high       | any      | M              |
//! | `LM.T1.M2` | generated | moderate   |          | M              |
//! | `LM.T1.M3` | original  | moderate   | negative | M              |
//! | `LM.D-G1`  | generated | low        |          | discard        |
//! | `LM.D-G2`  | original  | low, mod.  | positive | M              |
//! | `LC.T2.A1` | generated | high       |          | A / positive   |
//! | `LC.T2.A2` | original  | low        |          | A / negative   |
//! | `LC.T2.M1` | generated | moderate   |          | M              |
//! | `LC.T2.M2` | original  | moderate   |          | M              |
//! | `LC.T2.M3` | original  | high       |          | M              |
//! | `LC.D-G1`  | generated | low        |          | discard        |
//! | `FE.T3.*`  | as for LC |            |          |                |
//! | `FE.D-G1`  | generated | low        |          | discard        |
//!
//! Feature envy uses the large-class shape: a moved method in the moderate
//! band goes to review, as does any original method that is not clearly
//! below the bounds.

use std::collections::BTreeMap;

use crate::error::GroupingError;
use crate::generators::GeneratedSample;
use crate::metrics::{self, Advisor, Likelihood, MetricVector, Thresholds};
use crate::model::{ClassEntity, MethodEntity, ProjectModel};
use crate::sample::*;

fn a(label: Label, rule: String) -> GroupAssignment {
    GroupAssignment { group: Group::AGroup, auto_label: Some(label), rule_id: rule }
}

fn m(rule: String) -> GroupAssignment {
    GroupAssignment { group: Group::MGroup, auto_label: None, rule_id: rule }
}

fn d(rule: String) -> GroupAssignment {
    GroupAssignment { group: Group::Discard, auto_label: None, rule_id: rule }
}

/// Checks the candidate's shape: ground truth on generated samples, an
/// advisor verdict exactly on original long-method candidates, and the
/// metric fields of its smell.
pub fn check_candidate(c: &CandidateSample) -> Result<(), GroupingError> {
    if c.origin == Origin::Generated && c.ground_truth.is_none() {
        return Err(GroupingError::MissingGroundTruth);
    }
    let wants_advisor = c.smell == Smell::LongMethod && c.origin == Origin::Original;
    match (wants_advisor, c.advisor.is_some()) {
        (true, false) => return Err(GroupingError::MissingAdvisor),
        (false, true) => return Err(GroupingError::UnexpectedAdvisor),
        _ => {}
    }
    let v = &c.metrics;
    let ok = match c.smell {
        Smell::LongMethod => true,
        Smell::FeatureEnvy => v.nfdi.is_some(),
        Smell::LargeClass => v.nom.is_some() && v.noa.is_some(),
    };
    if !ok {
        return Err(GroupingError::Metrics(format!("{} candidate lacks its metrics", c.smell.code())));
    }
    Ok(())
}

/// Applies the decision table of the candidate's smell to its origin,
/// likelihood and advisor verdict.
pub fn assign_group(c: &CandidateSample) -> Result<GroupAssignment, GroupingError> {
    use Likelihood::*;
    use Origin::*;
    check_candidate(c)?;
    let code = c.smell.code();
    let t = |row: &str| format!("{code}.T{}.{row}", match c.smell {
        Smell::LongMethod => 1,
        Smell::LargeClass => 2,
        Smell::FeatureEnvy => 3,
    });
    let dg = |n: u8| format!("{code}.D-G{n}");

    Ok(match c.smell {
        Smell::LongMethod => match (c.origin, c.likelihood, c.advisor) {
            (Generated, High, _) => a(Label::Positive, t("A1")),
            (Generated, Moderate, _) => m(t("M2")),
            (Generated, Low, _) => d(dg(1)),
            (Original, High, _) => m(t("M1")),
            (Original, _, Some(Label::Positive)) => m(dg(2)),
            (Original, Low, _) => a(Label::Negative, t("A2")),
            (Original, Moderate, _) => m(t("M3")),
        },
        Smell::LargeClass | Smell::FeatureEnvy => match (c.origin, c.likelihood) {
            (Generated, High) => a(Label::Positive, t("A1")),
            (Generated, Moderate) => m(t("M1")),
            (Generated, Low) => d(dg(1)),
            (Original, Low) => a(Label::Negative, t("A2")),
            (Original, Moderate) => m(t("M2")),
            (Original, High) => m(t("M3")),
        },
    })
}

pub fn likelihood(smell: Smell, v: &MetricVector, t: &Thresholds) -> Likelihood {
    match smell {
        Smell::LongMethod => metrics::likelihood_long_method(v, t),
        Smell::LargeClass => metrics::likelihood_large_class(v, t),
        Smell::FeatureEnvy => metrics::likelihood_feature_envy(v, t),
    }
}

fn method_entity(cls: &ClassEntity, mth: &MethodEntity) -> String {
    format!("{}#{}/{}", cls.qualified_name, mth.name, mth.arity())
}

fn provenance(model: &ProjectModel, entity: String, spans: Vec<SourceSpan>) -> Provenance {
    Provenance {
        project: model.project_id.clone(),
        entity,
        spans,
        pipeline_version: PIPELINE_VERSION.to_string(),
        ..Default::default()
    }
}

/// The enclosing class, so a reviewer can see what the method works with.
fn owner_context(cls: &ClassEntity) -> BTreeMap<String, String> {
    BTreeMap::from([("owner_class".to_string(), cls.source_text.clone())])
}

/// Original-code candidates: one long-method and one feature-envy candidate
/// per method with a body, one large-class candidate per class. Interfaces,
/// annotation types and local or anonymous classes contribute nothing.
pub fn collect_original_candidates(
    model: &ProjectModel,
    thresholds: &Thresholds,
    advisor: &dyn Advisor,
) -> Vec<CandidateSample> {
    let mut out = Vec::new();
    for cls in model.classes.iter().filter(|c| c.kind.is_candidate_kind()) {
        let lineage = model.lineage(cls);
        for mth in cls.methods.iter().filter(|m| m.has_body()) {
            let entity = method_entity(cls, mth);
            let span = SourceSpan { file: cls.file.clone(), start: mth.span.start, end: mth.span.end };
            let loc = metrics::loc(&mth.source_text);
            let nfdi = metrics::nfdi_with_lineage(mth, &lineage);

            let lm = MetricVector { loc, nom: None, noa: None, nfdi: None };
            let mut prov = provenance(model, entity.clone(), vec![span.clone()]);
            prov.advisor = Some(advisor.name().to_string());
            out.push(CandidateSample {
                smell: Smell::LongMethod,
                origin: Origin::Original,
                entity_source: mth.source_text.clone(),
                context_sources: BTreeMap::new(),
                likelihood: likelihood(Smell::LongMethod, &lm, thresholds),
                metrics: lm,
                advisor: Some(advisor.long_method(mth, model)),
                ground_truth: None,
                provenance: prov,
            });

            let fe = MetricVector::method(loc, nfdi);
            out.push(CandidateSample {
                smell: Smell::FeatureEnvy,
                origin: Origin::Original,
                entity_source: mth.source_text.clone(),
                context_sources: owner_context(cls),
                likelihood: likelihood(Smell::FeatureEnvy, &fe, thresholds),
                metrics: fe,
                advisor: None,
                ground_truth: None,
                provenance: {
                    let mut p = provenance(model, entity, vec![span]);
                    let mut targets = metrics::foreign_classes(mth, &lineage);
                    targets.insert(cls.qualified_name.clone());
                    p.details.insert("candidate_targets".into(), serde_json::json!(targets));
                    p
                },
            });
        }
        let v = metrics::class_metrics(cls);
        out.push(CandidateSample {
            smell: Smell::LargeClass,
            origin: Origin::Original,
            entity_source: cls.source_text.clone(),
            context_sources: BTreeMap::new(),
            likelihood: likelihood(Smell::LargeClass, &v, thresholds),
            metrics: v,
            advisor: None,
            ground_truth: None,
            provenance: provenance(
                model,
                cls.qualified_name.clone(),
                vec![SourceSpan { file: cls.file.clone(), start: cls.span.start, end: cls.span.end }],
            ),
        });
    }
    out
}

/// Wraps a generated sample as a candidate. Long-method samples keep only
/// the LOC metric, matching the original long-method candidates.
pub fn generated_candidate(s: &GeneratedSample, thresholds: &Thresholds) -> CandidateSample {
    let mut metrics = s.metrics;
    if s.smell == Smell::LongMethod {
        metrics.nfdi = None;
    }
    let mut provenance = s.provenance.clone();
    provenance.pattern = Some(s.pattern.clone());
    CandidateSample {
        smell: s.smell,
        origin: Origin::Generated,
        entity_source: s.new_source.clone(),
        context_sources: s.context_sources.clone(),
        likelihood: likelihood(s.smell, &metrics, thresholds),
        metrics,
        advisor: None,
        ground_truth: Some(s.ground_truth.clone()),
        provenance,
    }
}

/// Re-derives every candidate's likelihood under `thresholds`, so a stored
/// candidate pool can be regrouped with different bounds.
pub fn relabel_likelihoods(candidates: &mut [CandidateSample], thresholds: &Thresholds) {
    for c in candidates {
        c.likelihood = likelihood(c.smell, &c.metrics, thresholds);
    }
}
