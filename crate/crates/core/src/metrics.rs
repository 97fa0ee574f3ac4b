//! Baseline metrics, possibility ranges and the long-method advisor.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lexer;
use crate::model::{ClassEntity, MethodEntity, ProjectModel, TypeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricVector {
    pub loc: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nom: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noa: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nfdi: Option<usize>,
}

impl MetricVector {
    pub fn method(loc: usize, nfdi: usize) -> Self {
        MetricVector { loc, nom: None, noa: None, nfdi: Some(nfdi) }
    }

    pub fn class(loc: usize, nom: usize, noa: usize) -> Self {
        MetricVector { loc, nom: Some(nom), noa: Some(noa), nfdi: None }
    }
}

/// How [`loc`] counts, recorded with every exported dataset.
pub const LOC_DEFINITION: &str = "lines holding at least one token that is not whitespace or comment";

/// Lines carrying at least one token that is neither whitespace nor comment.
pub fn loc(source_text: &str) -> usize {
    lexer::effective_lines(source_text).len()
}

/// Declared methods, constructors included.
pub fn nom(cls: &ClassEntity) -> usize {
    cls.methods.len()
}

pub fn noa(cls: &ClassEntity) -> usize {
    cls.fields.len()
}

/// Occurrences of accesses whose target is internal and outside `lineage`
/// (the owner and its internal ancestors).
pub fn nfdi_with_lineage(m: &MethodEntity, lineage: &BTreeSet<String>) -> usize {
    m.field_accesses
        .iter()
        .filter(|s| matches!(&s.target_class, TypeRef::Internal(q) if !lineage.contains(q)))
        .count()
}

pub fn nfdi(m: &MethodEntity, model: &ProjectModel) -> usize {
    let lineage = match model.lookup_class(&m.owner) {
        Some(owner) => model.lineage(owner),
        None => BTreeSet::from([m.owner.clone()]),
    };
    nfdi_with_lineage(m, &lineage)
}

/// Distinct internal foreign classes touched by `m`.
pub fn foreign_classes(m: &MethodEntity, lineage: &BTreeSet<String>) -> BTreeSet<String> {
    m.field_accesses
        .iter()
        .filter_map(|s| s.target_class.internal())
        .filter(|q| !lineage.contains(*q))
        .map(str::to_string)
        .collect()
}

pub fn method_metrics(m: &MethodEntity, model: &ProjectModel) -> MetricVector {
    MetricVector::method(loc(&m.source_text), nfdi(m, model))
}

pub fn class_metrics(c: &ClassEntity) -> MetricVector {
    MetricVector::class(loc(&c.source_text), nom(c), noa(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBound {
    pub loc: usize,
    pub nom: usize,
    pub noa: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub lm_min: usize,
    pub lm_max: usize,
    pub lc_min: ClassBound,
    pub lc_max: ClassBound,
    pub fe_min: usize,
    pub fe_max: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            lm_min: 15,
            lm_max: 30,
            lc_min: ClassBound { loc: 70, nom: 7, noa: 5 },
            lc_max: ClassBound { loc: 130, nom: 10, noa: 10 },
            fe_min: 2,
            fe_max: 5,
        }
    }
}

impl Thresholds {
    /// Each minimum must lie strictly below its maximum.
    pub fn validate(&self) -> Result<(), String> {
        let pairs = [
            ("lm", self.lm_min, self.lm_max),
            ("lc.loc", self.lc_min.loc, self.lc_max.loc),
            ("lc.nom", self.lc_min.nom, self.lc_max.nom),
            ("lc.noa", self.lc_min.noa, self.lc_max.noa),
            ("fe", self.fe_min, self.fe_max),
        ];
        for (name, lo, hi) in pairs {
            if lo >= hi {
                return Err(format!("{name}: min {lo} must be below max {hi}"));
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override such as `lm_max=20` or `lc_min.nom=5`.
    pub fn set(&mut self, key: &str, value: usize) -> Result<(), String> {
        let slot = match key {
            "lm_min" => &mut self.lm_min,
            "lm_max" => &mut self.lm_max,
            "fe_min" => &mut self.fe_min,
            "fe_max" => &mut self.fe_max,
            "lc_min.loc" => &mut self.lc_min.loc,
            "lc_min.nom" => &mut self.lc_min.nom,
            "lc_min.noa" => &mut self.lc_min.noa,
            "lc_max.loc" => &mut self.lc_max.loc,
            "lc_max.nom" => &mut self.lc_max.nom,
            "lc_max.noa" => &mut self.lc_max.noa,
            _ => return Err(format!("unknown threshold {key:?}")),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Likelihood {
    Low,
    Moderate,
    High,
}

impl Likelihood {
    pub const ALL: [Likelihood; 3] = [Likelihood::Low, Likelihood::Moderate, Likelihood::High];
}

fn band(v: usize, min: usize, max: usize) -> Likelihood {
    if v < min {
        Likelihood::Low
    } else if v <= max {
        Likelihood::Moderate
    } else {
        Likelihood::High
    }
}

pub fn likelihood_long_method(v: &MetricVector, t: &Thresholds) -> Likelihood {
    band(v.loc, t.lm_min, t.lm_max)
}

pub fn likelihood_large_class(v: &MetricVector, t: &Thresholds) -> Likelihood {
    let (nom, noa) = (v.nom.unwrap_or(0), v.noa.unwrap_or(0));
    if v.loc > t.lc_max.loc && nom > t.lc_max.nom && noa > t.lc_max.noa {
        Likelihood::High
    } else if v.loc < t.lc_min.loc && nom < t.lc_min.nom && noa < t.lc_min.noa {
        Likelihood::Low
    } else {
        Likelihood::Moderate
    }
}

pub fn likelihood_feature_envy(v: &MetricVector, t: &Thresholds) -> Likelihood {
    band(v.nfdi.unwrap_or(0), t.fe_min, t.fe_max)
}

/// Advisor verdicts share the label vocabulary.
pub type Verdict = crate::sample::Label;

/// Pre-screens original methods for the long-method grouping rules.
pub trait Advisor: Send + Sync {
    fn name(&self) -> &str;
    fn long_method(&self, m: &MethodEntity, model: &ProjectModel) -> Verdict;
}

/// Default stand-in advisor: deep nesting, long parameter lists or wide
/// foreign coupling.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAdvisor;

impl HeuristicAdvisor {
    pub const MAX_NESTING: usize = 3;
    pub const MAX_PARAMS: usize = 4;
    pub const MAX_FOREIGN: usize = 3;
}

impl Advisor for HeuristicAdvisor {
    fn name(&self) -> &str {
        "heuristic-v1"
    }

    fn long_method(&self, m: &MethodEntity, model: &ProjectModel) -> Verdict {
        let lineage = match model.lookup_class(&m.owner) {
            Some(c) => model.lineage(c),
            None => BTreeSet::from([m.owner.clone()]),
        };
        if m.max_nesting > Self::MAX_NESTING
            || m.parameters.len() > Self::MAX_PARAMS
            || foreign_classes(m, &lineage).len() > Self::MAX_FOREIGN
        {
            Verdict::Positive
        } else {
            Verdict::Negative
        }
    }
}
