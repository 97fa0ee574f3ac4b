//! Manual-review queue: guideline checklists, leases, annotation validation,
//! the append-only annotation log and the final export.
//!
//! [`ReviewQueue`] holds no clock; callers pass `now` so lease expiry is
//! testable.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::java::parse_file;
use crate::sample::*;
use crate::store::SampleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnswerKind {
    YesNo,
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub kind: AnswerKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelineChecklist {
    pub smell: Smell,
    pub questions: Vec<Question>,
}

const LM_QUESTIONS: [&str; 4] = [
    "Is the target method hard to read?",
    "Is the target method accessing too many attributes or other methods that may reduce the maintainability?",
    "Does the target method have multiple functions or too many parameters, which may reduce the reusability?",
    "If the target method is a long method, which lines should be extracted from this method?",
];

const LC_QUESTIONS: [&str; 6] = [
    "Does the class have too many lines of code?",
    "Does the class have too many fields?",
    "Does the class have too many complex methods?",
    "Does the class have class extraction opportunities that may reduce the reusability of the target class?",
    "Does the class have too many responsibilities, which may reduce the maintainability of the target class?",
    "If the target class is a large class, which method should be extracted from the target class?",
];

const FE_QUESTIONS: [&str; 5] = [
    "Does the method frequently call from another class?",
    "Does the method frequently access another class?",
    "Does the method rarely use attributes in its own class?",
    "Does the method seem more cohesive with another class semantically?",
    "If the target method is identified as feature envy, which class should it be moved to?",
];

/// The reviewer checklist for `smell`; the last question is answered by the
/// refactoring action, the others yes/no.
pub fn checklist(smell: Smell) -> GuidelineChecklist {
    let texts: &[&str] = match smell {
        Smell::LongMethod => &LM_QUESTIONS,
        Smell::LargeClass => &LC_QUESTIONS,
        Smell::FeatureEnvy => &FE_QUESTIONS,
    };
    let questions = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Question {
            id: format!("{}-Q{}", smell.code(), i + 1),
            text: t.to_string(),
            kind: if i + 1 == texts.len() { AnswerKind::Action } else { AnswerKind::YesNo },
        })
        .collect();
    GuidelineChecklist { smell, questions }
}

/// One reviewer's verdict on one manual-review sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sample_id: String,
    pub reviewer_id: String,
    pub verdict: Label,
    #[serde(default)]
    pub answers: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<RefactoringAction>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectionKind {
    /// The sample id is unknown.
    NotFound,
    /// Already annotated, or leased to someone else.
    Conflict,
    /// The payload itself is wrong.
    Invalid,
}

/// Why a submission was refused. `field` names the offending part of the
/// payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub kind: RejectionKind,
    pub field: String,
    pub reason: String,
}

impl Rejection {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        Rejection { kind: RejectionKind::Invalid, field: field.to_string(), reason: reason.into() }
    }

    fn with_kind(mut self, kind: RejectionKind) -> Self {
        self.kind = kind;
        self
    }
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub reviewer_id: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmellQueueStats {
    pub pending: usize,
    pub annotated: usize,
    pub leased: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    pub m_group: usize,
    pub a_group: usize,
    pub pending: usize,
    pub annotated: usize,
    pub leased: usize,
    pub by_smell: BTreeMap<String, SmellQueueStats>,
}

pub const DEFAULT_LEASE_MINUTES: i64 = 30;

pub struct ReviewQueue {
    records: Vec<SampleRecord>,
    index: HashMap<String, usize>,
    annotations: BTreeMap<String, Annotation>,
    leases: HashMap<String, Lease>,
    lease_ttl: Duration,
}

impl ReviewQueue {
    /// Builds the queue and replays `log` in order. A log entry that would be
    /// rejected today is an error: the log is only ever appended with
    /// accepted annotations.
    pub fn new(records: Vec<SampleRecord>, log: Vec<Annotation>, lease_ttl: Duration) -> Result<Self, Rejection> {
        let index = records.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let mut q = ReviewQueue { records, index, annotations: BTreeMap::new(), leases: HashMap::new(), lease_ttl };
        for a in log {
            q.validate(&a)?;
            q.apply(a);
        }
        Ok(q)
    }

    pub fn record(&self, id: &str) -> Option<&SampleRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.values()
    }

    pub fn annotation(&self, id: &str) -> Option<&Annotation> {
        self.annotations.get(id)
    }

    fn live_lease(&self, id: &str, now: DateTime<Utc>) -> Option<&Lease> {
        self.leases.get(id).filter(|l| l.expires_at > now)
    }

    fn pending(&self, r: &SampleRecord) -> bool {
        r.group == Group::MGroup && !self.annotations.contains_key(&r.id)
    }

    /// The oldest pending sample (in store order) that nobody else holds,
    /// leased to `reviewer`. A reviewer asking again gets the sample they
    /// already hold, with the lease renewed.
    pub fn next(
        &mut self,
        reviewer: &str,
        smell: Option<Smell>,
        now: DateTime<Utc>,
    ) -> Option<(SampleRecord, GuidelineChecklist, Lease)> {
        self.leases.retain(|_, l| l.expires_at > now);
        let wanted = |r: &SampleRecord| smell.is_none_or(|s| r.smell == s);
        let held = self.records.iter().position(|r| {
            wanted(r) && self.pending(r) && self.leases.get(&r.id).is_some_and(|l| l.reviewer_id == reviewer)
        });
        let i = held.or_else(|| {
            self.records.iter().position(|r| wanted(r) && self.pending(r) && !self.leases.contains_key(&r.id))
        })?;
        let r = self.records[i].clone();
        let lease = Lease { reviewer_id: reviewer.to_string(), expires_at: now + self.lease_ttl };
        self.leases.insert(r.id.clone(), lease.clone());
        let cl = checklist(r.smell);
        Some((r, cl, lease))
    }

    /// Full check of a submission, including leases held at `now`.
    pub fn check(&self, a: &Annotation, now: DateTime<Utc>) -> Result<(), Rejection> {
        self.validate(a)?;
        if let Some(l) = self.live_lease(&a.sample_id, now) {
            if l.reviewer_id != a.reviewer_id {
                return Err(Rejection::new("sample_id", format!("sample is leased to {}", l.reviewer_id))
                    .with_kind(RejectionKind::Conflict));
            }
        }
        Ok(())
    }

    /// Checks that do not depend on time: the sample, the answers and the
    /// action.
    pub fn validate(&self, a: &Annotation) -> Result<(), Rejection> {
        if a.reviewer_id.trim().is_empty() {
            return Err(Rejection::new("reviewer_id", "reviewer id is empty"));
        }
        let r = self.record(&a.sample_id).ok_or_else(|| Rejection::new("sample_id", "no such sample").with_kind(RejectionKind::NotFound))?;
        if r.group != Group::MGroup {
            return Err(Rejection::new("sample_id", "sample is not in the manual-review group"));
        }
        if let Some(prev) = self.annotations.get(&a.sample_id) {
            return Err(Rejection::new("sample_id", format!("sample already annotated by {}", prev.reviewer_id))
                .with_kind(RejectionKind::Conflict));
        }
        let cl = checklist(r.smell);
        for q in cl.questions.iter().filter(|q| q.kind == AnswerKind::YesNo) {
            if !a.answers.contains_key(&q.id) {
                return Err(Rejection::new(&format!("answers.{}", q.id), "question not answered"));
            }
        }
        for k in a.answers.keys() {
            if !cl.questions.iter().any(|q| &q.id == k && q.kind == AnswerKind::YesNo) {
                return Err(Rejection::new(&format!("answers.{k}"), "not a yes/no question of this checklist"));
            }
        }
        match (a.verdict, &a.action) {
            (Label::Negative, Some(_)) => Err(Rejection::new("action", "a negative verdict takes no action")),
            (Label::Positive, None) => Err(Rejection::new("action", "a positive verdict needs a refactoring action")),
            (Label::Positive, Some(act)) => check_action(r, act),
            (Label::Negative, None) => Ok(()),
        }
    }

    /// Records an accepted annotation and releases its lease.
    pub fn apply(&mut self, a: Annotation) {
        self.leases.remove(&a.sample_id);
        self.annotations.insert(a.sample_id.clone(), a);
    }

    pub fn submit(&mut self, a: Annotation, now: DateTime<Utc>) -> Result<(), Rejection> {
        self.check(&a, now)?;
        self.apply(a);
        Ok(())
    }

    pub fn stats(&self, now: DateTime<Utc>) -> QueueStats {
        let mut st = QueueStats::default();
        for r in &self.records {
            match r.group {
                Group::AGroup => st.a_group += 1,
                Group::MGroup => {
                    st.m_group += 1;
                    let e = st.by_smell.entry(r.smell.code().to_string()).or_default();
                    if self.annotations.contains_key(&r.id) {
                        st.annotated += 1;
                        e.annotated += 1;
                    } else {
                        st.pending += 1;
                        e.pending += 1;
                        if self.live_lease(&r.id, now).is_some() {
                            st.leased += 1;
                            e.leased += 1;
                        }
                    }
                }
                Group::Discard => {}
            }
        }
        st
    }

    /// Auto-labeled records plus reviewed ones, in store order. Pending
    /// manual-review samples are left out.
    pub fn export_final(&self) -> Vec<SampleRecord> {
        self.records
            .iter()
            .filter_map(|r| match r.group {
                Group::AGroup => Some(r.clone()),
                Group::MGroup => self.annotations.get(&r.id).map(|a| annotated_record(r, a)),
                Group::Discard => None,
            })
            .collect()
    }
}

pub fn label_source(a: &Annotation) -> String {
    format!("annotation:{}", a.reviewer_id)
}

fn annotated_record(r: &SampleRecord, a: &Annotation) -> SampleRecord {
    let mut out = r.clone();
    out.label = Some(a.verdict);
    out.provenance.label_source = Some(label_source(a));
    out.provenance.details.insert(
        "annotation".into(),
        serde_json::json!({
            "reviewer_id": a.reviewer_id,
            "answers": a.answers,
            "timestamp": a.timestamp,
        }),
    );
    if let Some(g) = r.ground_truth.as_ref() {
        out.provenance.details.insert("generated_ground_truth".into(), serde_json::json!(g));
    }
    out.ground_truth = a.action.clone();
    out
}

fn check_action(r: &SampleRecord, act: &RefactoringAction) -> Result<(), Rejection> {
    let want = RefactoringAction::expected_for(r.smell);
    if act.kind != want || !act.is_well_formed() {
        return Err(Rejection::new("action.kind", format!("expected a well-formed {want:?} action")));
    }
    match r.smell {
        Smell::LongMethod => {
            let n = r.code.lines().count();
            for (i, lr) in act.extract_lines.iter().flatten().enumerate() {
                if lr.start == 0 || lr.start > lr.end || lr.end > n {
                    return Err(Rejection::new(
                        &format!("action.extract_lines[{i}]"),
                        format!("lines {}-{} are not within the {n}-line method", lr.start, lr.end),
                    ));
                }
            }
        }
        Smell::LargeClass => {
            let parsed = parse_file(&r.code, "sample.java")
                .map_err(|e| Rejection::new("sample_id", format!("class text does not parse: {e}")))?;
            let cls = parsed.classes.first().ok_or_else(|| Rejection::new("sample_id", "no class in sample"))?;
            let names = cls.member_names();
            for (i, m) in act.extract_members.iter().flatten().enumerate() {
                if !names.contains(m.as_str()) {
                    return Err(Rejection::new(&format!("action.extract_members[{i}]"), format!("{m} is not a member of the class")));
                }
            }
        }
        Smell::FeatureEnvy => {
            let target = act.move_target.as_deref().unwrap_or("");
            if !r.provenance.candidate_targets().iter().any(|t| t == target) {
                return Err(Rejection::new("action.move_target", format!("{target} is not a candidate class of this sample")));
            }
        }
    }
    Ok(())
}
