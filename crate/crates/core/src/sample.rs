//! Types shared by generation, grouping, persistence and review.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{Likelihood, MetricVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Smell {
    LongMethod,
    LargeClass,
    FeatureEnvy,
}

impl Smell {
    pub const ALL: [Smell; 3] = [Smell::LongMethod, Smell::LargeClass, Smell::FeatureEnvy];

    pub fn code(self) -> &'static str {
        match self {
            Smell::LongMethod => "LM",
            Smell::LargeClass => "LC",
            Smell::FeatureEnvy => "FE",
        }
    }

    pub fn from_code(s: &str) -> Option<Smell> {
        match s.to_ascii_uppercase().as_str() {
            "LM" | "LONG_METHOD" => Some(Smell::LongMethod),
            "LC" | "LARGE_CLASS" => Some(Smell::LargeClass),
            "FE" | "FEATURE_ENVY" => Some(Smell::FeatureEnvy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Generated,
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Group {
    AGroup,
    MGroup,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    ExtractLines,
    ExtractMembers,
    MoveMethod,
}

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        LineRange { start, end }
    }

    pub fn contains(&self, line: usize) -> bool {
        (self.start..=self.end).contains(&line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefactoringAction {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract_lines: Option<Vec<LineRange>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract_members: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_target: Option<String>,
}

impl RefactoringAction {
    pub fn extract_lines(ranges: Vec<LineRange>) -> Self {
        RefactoringAction { kind: ActionKind::ExtractLines, extract_lines: Some(ranges), extract_members: None, move_target: None }
    }

    pub fn extract_members(names: Vec<String>) -> Self {
        RefactoringAction { kind: ActionKind::ExtractMembers, extract_lines: None, extract_members: Some(names), move_target: None }
    }

    pub fn move_method(target: impl Into<String>) -> Self {
        RefactoringAction {
            kind: ActionKind::MoveMethod,
            extract_lines: None,
            extract_members: None,
            move_target: Some(target.into()),
        }
    }

    /// Exactly the field matching `kind` is populated and non-empty.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            ActionKind::ExtractLines => {
                self.extract_members.is_none()
                    && self.move_target.is_none()
                    && self
                        .extract_lines
                        .as_ref()
                        .is_some_and(|r| !r.is_empty() && r.iter().all(|l| l.start >= 1 && l.start <= l.end))
            }
            ActionKind::ExtractMembers => {
                self.extract_lines.is_none()
                    && self.move_target.is_none()
                    && self.extract_members.as_ref().is_some_and(|m| !m.is_empty())
            }
            ActionKind::MoveMethod => {
                self.extract_lines.is_none()
                    && self.extract_members.is_none()
                    && self.move_target.as_ref().is_some_and(|t| !t.is_empty())
            }
        }
    }

    pub fn expected_for(smell: Smell) -> ActionKind {
        match smell {
            Smell::LongMethod => ActionKind::ExtractLines,
            Smell::LargeClass => ActionKind::ExtractMembers,
            Smell::FeatureEnvy => ActionKind::MoveMethod,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub start: usize,
    pub end: usize,
}

/// Where a sample came from and why it was labeled the way it was.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub project: String,
    /// `pkg.Class` or `pkg.Class#method/arity`.
    pub entity: String,
    pub spans: Vec<SourceSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisor: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub pipeline_version: String,
}

pub const PIPELINE_VERSION: &str = concat!("smelldata-", env!("CARGO_PKG_VERSION"));

impl Provenance {
    pub fn detail_str(&self, key: &str) -> Option<&str> {
        self.details.get(key).and_then(|v| v.as_str())
    }

    pub fn candidate_targets(&self) -> Vec<String> {
        self.details
            .get("candidate_targets")
            .and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    }
}

/// One generated-or-original entity awaiting grouping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSample {
    pub smell: Smell,
    pub origin: Origin,
    pub entity_source: String,
    #[serde(default)]
    pub context_sources: BTreeMap<String, String>,
    pub metrics: MetricVector,
    pub likelihood: Likelihood,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisor: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<RefactoringAction>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub group: Group,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_label: Option<Label>,
    pub rule_id: String,
}
