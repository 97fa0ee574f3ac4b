//! Dataset records, line-delimited JSON persistence, statistics and
//! negative down-sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::StoreError;
use crate::metrics::{MetricVector, Thresholds};
use crate::model::Split;
use crate::sample::*;

/// One row of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub smell: Smell,
    pub origin: Origin,
    pub group: Group,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub code: String,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    pub metrics: MetricVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<RefactoringAction>,
    pub split: Split,
    pub provenance: Provenance,
}

/// Stable id of a sample: the first 16 hex digits of a SHA-256 over the
/// project, the spans, smell and origin. Generated samples also hash their
/// pattern and call-site line, because one caller/callee pair can be merged
/// at several sites.
pub fn sample_id(smell: Smell, origin: Origin, p: &Provenance) -> String {
    let mut h = Sha256::new();
    h.update(p.project.as_bytes());
    for s in &p.spans {
        h.update(format!("\x1f{}:{}-{}", s.file, s.start, s.end).as_bytes());
    }
    h.update(format!("\x1e{}\x1e{:?}", smell.code(), origin).as_bytes());
    if origin == Origin::Generated {
        h.update(p.pattern.as_deref().unwrap_or("").as_bytes());
        if let Some(v) = p.details.get("site_line") {
            h.update(v.to_string().as_bytes());
        }
    }
    hex::encode(&h.finalize()[..8])
}

pub const RULE_LABEL_SOURCE: &str = "rule";

/// Builds the stored record for a grouped candidate. A-group records carry
/// their rule's label.
pub fn make_record(c: &CandidateSample, g: &GroupAssignment, split: Split) -> SampleRecord {
    let mut provenance = c.provenance.clone();
    provenance.rule_id = Some(g.rule_id.clone());
    if g.auto_label.is_some() {
        provenance.label_source = Some(RULE_LABEL_SOURCE.to_string());
    }
    SampleRecord {
        id: sample_id(c.smell, c.origin, &c.provenance),
        smell: c.smell,
        origin: c.origin,
        group: g.group,
        label: g.auto_label,
        code: c.entity_source.clone(),
        context: c.context_sources.clone(),
        metrics: c.metrics,
        ground_truth: c.ground_truth.clone(),
        split,
        provenance,
    }
}

// ---------------------------------------------------------------------------
// Line-delimited JSON
// ---------------------------------------------------------------------------

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Writes one JSON object per line, atomically: the data goes to a temporary
/// file in the same directory, which then replaces `path`.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Reads a file written by [`write_jsonl`]. Blank lines are skipped; a line
/// that fails to parse is reported with its 1-based number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| StoreError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<(), StoreError> {
    write_jsonl(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>, StoreError> {
    read_jsonl(path)
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// `(smell, label, split)` → count, over labeled records.
    pub labeled: BTreeMap<String, usize>,
    /// `(smell, group, split)` → count, over all records.
    pub groups: BTreeMap<String, usize>,
    pub unlabeled: usize,
    pub total: usize,
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "TRAIN",
        Split::Eval => "EVAL",
    }
}

fn label_name(l: Label) -> &'static str {
    match l {
        Label::Positive => "POSITIVE",
        Label::Negative => "NEGATIVE",
    }
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::AGroup => "A_GROUP",
        Group::MGroup => "M_GROUP",
        Group::Discard => "DISCARD",
    }
}

impl DatasetStats {
    pub fn count(&self, smell: Smell, label: Label, split: Split) -> usize {
        self.labeled
            .get(&format!("{}/{}/{}", smell.code(), label_name(label), split_name(split)))
            .copied()
            .unwrap_or(0)
    }

    pub fn group_count(&self, smell: Smell, group: Group, split: Split) -> usize {
        self.groups
            .get(&format!("{}/{}/{}", smell.code(), group_name(group), split_name(split)))
            .copied()
            .unwrap_or(0)
    }

    /// Plain-text table: one row per smell and split.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<6} {:>9} {:>9} {:>8} {:>8} {:>8}", "smell", "split", "positive", "negative", "a_group", "m_group", "discard");
        for smell in Smell::ALL {
            for split in [Split::Train, Split::Eval] {
                let (p, n) = (self.count(smell, Label::Positive, split), self.count(smell, Label::Negative, split));
                let a = self.group_count(smell, Group::AGroup, split);
                let m = self.group_count(smell, Group::MGroup, split);
                let d = self.group_count(smell, Group::Discard, split);
                if p + n + a + m + d == 0 && split == Split::Eval {
                    continue;
                }
                let _ = writeln!(
                    s,
                    "{:<6} {:<6} {:>9} {:>9} {:>8} {:>8} {:>8}",
                    smell.code(),
                    split_name(split),
                    p,
                    n,
                    a,
                    m,
                    d,
                );
            }
        }
        let _ = writeln!(s, "labeled {} / unlabeled {} / total {}", self.total - self.unlabeled, self.unlabeled, self.total);
        s
    }
}

pub fn compute_stats(records: &[SampleRecord]) -> DatasetStats {
    let mut st = DatasetStats { total: records.len(), ..Default::default() };
    for r in records {
        *st.groups
            .entry(format!("{}/{}/{}", r.smell.code(), group_name(r.group), split_name(r.split)))
            .or_default() += 1;
        match r.label {
            Some(l) => {
                *st.labeled
                    .entry(format!("{}/{}/{}", r.smell.code(), label_name(l), split_name(r.split)))
                    .or_default() += 1
            }
            None => st.unlabeled += 1,
        }
    }
    st
}

// ---------------------------------------------------------------------------
// Balancing
// ---------------------------------------------------------------------------

/// Down-samples the negatives of one `(smell, TRAIN)` cell to the number of
/// positives, uniformly with a ChaCha8 generator seeded by `seed`. Kept
/// records stay in their original order. Eval cells and cells with fewer
/// negatives than positives are returned unchanged.
pub fn balance_negatives(records: Vec<SampleRecord>, smell: Smell, split: Split, seed: u64) -> Vec<SampleRecord> {
    if split != Split::Train {
        return records;
    }
    let in_cell = |r: &SampleRecord, l: Label| r.smell == smell && r.split == split && r.label == Some(l);
    let positives = records.iter().filter(|r| in_cell(r, Label::Positive)).count();
    let negatives: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| in_cell(r, Label::Negative))
        .map(|(i, _)| i)
        .collect();
    if negatives.len() < positives {
        tracing::warn!(smell = smell.code(), positives, negatives = negatives.len(), "too few negatives to balance");
        return records;
    }
    if negatives.len() == positives {
        return records;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: BTreeSet<usize> = index::sample(&mut rng, negatives.len(), positives).into_iter().map(|k| negatives[k]).collect();
    let drop: BTreeSet<usize> = negatives.into_iter().filter(|i| !keep.contains(i)).collect();
    records.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, r)| r).collect()
}

/// Balances every smell's TRAIN cell; each smell draws from its own stream.
pub fn balance_all(mut records: Vec<SampleRecord>, seed: u64) -> Vec<SampleRecord> {
    for (k, smell) in Smell::ALL.into_iter().enumerate() {
        records = balance_negatives(records, smell, Split::Train, seed.wrapping_add(k as u64));
    }
    records
}

/// Written next to an exported dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub pipeline_version: String,
    pub seed: u64,
    pub balanced: bool,
    pub thresholds: Thresholds,
    pub loc_definition: String,
    pub projects: BTreeMap<String, Split>,
    pub records: usize,
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Dataset-level invariants. Returns one message per violation.
pub fn validate_records(records: &[SampleRecord], t: &Thresholds) -> Vec<String> {
    let mut errs = Vec::new();
    let mut ids = BTreeSet::new();
    let mut splits: BTreeMap<&str, Split> = BTreeMap::new();
    for r in records {
        let who = format!("{} ({})", r.id, r.provenance.entity);
        if !ids.insert(r.id.as_str()) {
            errs.push(format!("{who}: duplicate id"));
        }
        if sample_id(r.smell, r.origin, &r.provenance) != r.id {
            errs.push(format!("{who}: id does not match its provenance"));
        }
        match splits.insert(&r.provenance.project, r.split) {
            Some(prev) if prev != r.split => errs.push(format!("{who}: project {} appears in both splits", r.provenance.project)),
            _ => {}
        }
        if r.group == Group::Discard {
            errs.push(format!("{who}: discarded record in dataset"));
        }
        let annotated = r.provenance.label_source.as_deref().is_some_and(|s| s != RULE_LABEL_SOURCE);
        match (r.group, r.label) {
            (Group::AGroup, None) => errs.push(format!("{who}: A_GROUP record without label")),
            (Group::MGroup, Some(_)) if !annotated => errs.push(format!("{who}: M_GROUP label without an annotation")),
            (Group::MGroup, None) if annotated => errs.push(format!("{who}: annotation reference without label")),
            _ => {}
        }
        if r.label.is_some() && r.provenance.rule_id.is_none() && !annotated {
            errs.push(format!("{who}: label without rule or annotation"));
        }
        let needs_action = r.label == Some(Label::Positive) || (r.label.is_none() && r.origin == Origin::Generated);
        if needs_action && !r.ground_truth.as_ref().is_some_and(|g| g.is_well_formed()) {
            errs.push(format!("{who}: positive or generated record without well-formed ground truth"));
        }
        if r.label == Some(Label::Negative) && r.ground_truth.is_some() {
            errs.push(format!("{who}: negative record with a refactoring action"));
        }
        if let Some(g) = &r.ground_truth {
            if g.kind != RefactoringAction::expected_for(r.smell) {
                errs.push(format!("{who}: ground truth kind does not fit the smell"));
            }
        }
        if r.group == Group::AGroup {
            if let Some(msg) = a_group_bound_violation(r, t) {
                errs.push(format!("{who}: {msg}"));
            }
        }
    }
    errs
}

/// Metric bounds an auto-labeled record must respect.
pub fn a_group_bound_violation(r: &SampleRecord, t: &Thresholds) -> Option<String> {
    let m = &r.metrics;
    let (nom, noa, nfdi) = (m.nom.unwrap_or(0), m.noa.unwrap_or(0), m.nfdi.unwrap_or(0));
    let ok = match (r.smell, r.label?) {
        (Smell::LongMethod, Label::Positive) => m.loc > t.lm_max,
        (Smell::LongMethod, Label::Negative) => m.loc < t.lm_min,
        (Smell::FeatureEnvy, Label::Positive) => nfdi > t.fe_max,
        (Smell::FeatureEnvy, Label::Negative) => nfdi < t.fe_min,
        (Smell::LargeClass, Label::Positive) => m.loc > t.lc_max.loc && nom > t.lc_max.nom && noa > t.lc_max.noa,
        (Smell::LargeClass, Label::Negative) => m.loc < t.lc_min.loc && nom < t.lc_min.nom && noa < t.lc_min.noa,
    };
    (!ok).then(|| format!("{:?} auto label outside the threshold band ({m:?})", r.label))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, smell: Smell, label: Option<Label>, split: Split) -> SampleRecord {
        let provenance = Provenance {
            project: "p".into(),
            entity: format!("E{n}"),
            spans: vec![SourceSpan { file: "A.java".into(), start: n, end: n }],
            ..Default::default()
        };
        SampleRecord {
            id: sample_id(smell, Origin::Original, &provenance),
            smell,
            origin: Origin::Original,
            group: if label.is_some() { Group::AGroup } else { Group::MGroup },
            label,
            code: format!("void m{n}() {{}}"),
            context: BTreeMap::new(),
            metrics: MetricVector::method(1, 0),
            ground_truth: None,
            split,
            provenance,
        }
    }

    #[test]
    fn round_trip_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let rs: Vec<_> = (0..3).map(|i| rec(i, Smell::LongMethod, Some(Label::Negative), Split::Train)).collect();
        write_records(&p, &rs).unwrap();
        assert_eq!(read_records(&p).unwrap(), rs);
        write_records(&p, &[]).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 0);
        assert!(read_records(&p).unwrap().is_empty());
    }

    #[test]
    fn truncated_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(&p, "{\"id\": \"ab\", \"smell\":").unwrap();
        match read_records(&p) {
            Err(StoreError::Malformed { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_tally() {
        let mut rs: Vec<_> = (0..2).map(|i| rec(i, Smell::LongMethod, Some(Label::Positive), Split::Train)).collect();
        rs.extend((2..5).map(|i| rec(i, Smell::LongMethod, Some(Label::Negative), Split::Train)));
        let st = compute_stats(&rs);
        assert_eq!(st.count(Smell::LongMethod, Label::Positive, Split::Train), 2);
        assert_eq!(st.count(Smell::LongMethod, Label::Negative, Split::Train), 3);
        assert_eq!(st.total, 5);
    }

    #[test]
    fn balancing_is_seeded_and_train_only() {
        let mut rs: Vec<_> = (0..10).map(|i| rec(i, Smell::FeatureEnvy, Some(Label::Positive), Split::Train)).collect();
        rs.extend((10..50).map(|i| rec(i, Smell::FeatureEnvy, Some(Label::Negative), Split::Train)));
        let a = balance_negatives(rs.clone(), Smell::FeatureEnvy, Split::Train, 7);
        let b = balance_negatives(rs.clone(), Smell::FeatureEnvy, Split::Train, 7);
        assert_eq!(a, b);
        let st = compute_stats(&a);
        assert_eq!(st.count(Smell::FeatureEnvy, Label::Negative, Split::Train), 10);
        assert_eq!(st.count(Smell::FeatureEnvy, Label::Positive, Split::Train), 10);
        assert_eq!(balance_negatives(rs.clone(), Smell::FeatureEnvy, Split::Eval, 7), rs);
        let balanced = a.clone();
        assert_eq!(balance_negatives(a, Smell::FeatureEnvy, Split::Train, 9), balanced);
    }

    #[test]
    fn ids_are_stable_and_distinct() {
        let a = rec(1, Smell::LongMethod, None, Split::Train);
        assert_eq!(a.id, rec(1, Smell::LongMethod, None, Split::Train).id);
        assert_ne!(a.id, rec(1, Smell::FeatureEnvy, None, Split::Train).id);
        assert_eq!(a.id.len(), 16);
    }
}
