#![allow(dead_code)]

use std::collections::BTreeMap;

use smelldata_core::metrics::MetricVector;
use smelldata_core::model::Split;
use smelldata_core::sample::*;
use smelldata_core::store::{sample_id, SampleRecord};

pub const LM_CODE: &str = "void work() {\n    int a = 1;\n    int b = 2;\n    int c = a + b;\n    print(c);\n}";

/// A synthetic record. Generated ones carry a matching ground truth; auto
/// labels come with the rule label source.
pub fn record(n: usize, smell: Smell, origin: Origin, group: Group, label: Option<Label>, split: Split) -> SampleRecord {
    let mut provenance = Provenance {
        project: if split == Split::Train { "train-p".into() } else { "eval-p".into() },
        entity: format!("p.C{n}#m/0"),
        spans: vec![SourceSpan { file: format!("p/C{n}.java"), start: n + 1, end: n + 5 }],
        rule_id: Some(format!("{}.test", smell.code())),
        ..Default::default()
    };
    if label.is_some() {
        provenance.label_source = Some("rule".into());
    }
    if origin == Origin::Generated {
        provenance.pattern = Some("P1".into());
    }
    if smell == Smell::FeatureEnvy {
        provenance.details.insert("candidate_targets".into(), serde_json::json!(["p.Owner", "p.Other"]));
    }
    let (code, metrics) = match smell {
        Smell::LongMethod => (LM_CODE.to_string(), MetricVector { loc: 6, nom: None, noa: None, nfdi: None }),
        Smell::LargeClass => ("class C { int f; void g() {} }".to_string(), MetricVector::class(1, 1, 1)),
        Smell::FeatureEnvy => ("void m() { o.x = 1; }".to_string(), MetricVector::method(1, 1)),
    };
    let metrics = match (label, smell) {
        (Some(Label::Positive), Smell::LongMethod) => MetricVector { loc: 40, ..metrics },
        (Some(Label::Positive), Smell::LargeClass) => MetricVector::class(200, 20, 20),
        (Some(Label::Positive), Smell::FeatureEnvy) => MetricVector::method(10, 8),
        (Some(Label::Negative), Smell::FeatureEnvy) => MetricVector::method(1, 0),
        _ => metrics,
    };
    let ground_truth = (origin == Origin::Generated || label == Some(Label::Positive)).then(|| match smell {
        Smell::LongMethod => RefactoringAction::extract_lines(vec![LineRange::new(2, 3)]),
        Smell::LargeClass => RefactoringAction::extract_members(vec!["g".into()]),
        Smell::FeatureEnvy => RefactoringAction::move_method("p.Other"),
    });
    SampleRecord {
        id: sample_id(smell, origin, &provenance),
        smell,
        origin,
        group,
        label,
        code,
        context: BTreeMap::new(),
        metrics,
        ground_truth,
        split,
        provenance,
    }
}
