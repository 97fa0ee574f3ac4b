//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs the JPype corpus end to end several times, so it is the
//! slowest test target.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smelldata_core::generators::{generate_all, verify, GenerationReport};
use smelldata_core::grouping::{assign_group, likelihood};
use smelldata_core::java::ingest::{build_project_model, CorpusConfig};
use smelldata_core::metrics::{self, Likelihood, MetricVector, Thresholds};
use smelldata_core::model::{ProjectModel, Split};
use smelldata_core::pipeline;
use smelldata_core::sample::*;
use smelldata_core::store::{compute_stats, SampleRecord};

type Outcome = Result<String, String>;

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn jpype_root() -> PathBuf {
    workspace().join("corpus/jpype-1.7.1")
}

fn demo_root() -> PathBuf {
    workspace().join("corpus/demo/src")
}

fn model(id: &str, root: PathBuf) -> ProjectModel {
    build_project_model(&CorpusConfig { project_id: id.into(), root_dirs: vec![root], exclude_globs: vec![], role: Split::Train })
        .unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// 1. metrics against hand-counted answers
// ---------------------------------------------------------------------------

fn metric_oracle() -> Outcome {
    let t0 = Instant::now();
    let root = workspace().join("crates/core/tests/fixtures/metrics");
    let m = model("fx", root.clone());
    let expected: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("expected.json")).unwrap()).unwrap();
    let mut got = BTreeMap::new();
    for c in &m.classes {
        let v = metrics::class_metrics(c);
        got.insert(("classes", c.qualified_name.clone()), serde_json::json!({"loc": v.loc, "nom": v.nom, "noa": v.noa}));
        for mt in &c.methods {
            let v = metrics::method_metrics(mt, &m);
            let key = format!("{}#{}/{}", c.qualified_name, mt.name, mt.arity());
            got.insert(("methods", key), serde_json::json!({"loc": v.loc, "nfdi": v.nfdi}));
        }
    }
    let elapsed = t0.elapsed();
    let mut n = 0;
    let mut bad = Vec::new();
    for kind in ["classes", "methods"] {
        for (k, v) in expected[kind].as_object().unwrap() {
            n += 1;
            if got.remove(&(kind, k.clone())).as_ref() != Some(v) {
                bad.push(k.clone());
            }
        }
    }
    bad.extend(got.into_keys().map(|(_, k)| format!("{k} (unexpected)")));
    ensure(bad.is_empty(), format!("mismatches: {bad:?}"))?;
    ensure(n >= 25, format!("only {n} entities"))?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("{n} entities match exactly in {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// 2. invocation patterns against hand labels
// ---------------------------------------------------------------------------

fn pattern_classification() -> Outcome {
    let m = model("pt", workspace().join("crates/core/tests/fixtures/patterns"));
    let mut expected: BTreeMap<(String, usize), Vec<String>> = BTreeMap::new();
    for (file, text) in &m.files {
        for (i, l) in text.lines().enumerate() {
            if let Some((_, tail)) = l.split_once("// expect:") {
                let mut v: Vec<String> = tail.split_whitespace().map(str::to_string).collect();
                v.sort();
                expected.insert((file.clone(), i + 1), v);
            }
        }
    }
    let mut got: BTreeMap<(String, usize), Vec<String>> = BTreeMap::new();
    for (c, mt) in m.all_methods() {
        for s in &mt.invocations {
            let p = serde_json::to_value(s.pattern).unwrap();
            got.entry((c.file.clone(), s.line)).or_default().push(format!("{}={}", s.name, p.as_str().unwrap()));
        }
    }
    got.values_mut().for_each(|v| v.sort());
    let total: usize = expected.values().map(Vec::len).sum();
    let agree: usize = expected.iter().filter(|(k, v)| got.get(*k) == Some(*v)).map(|(_, v)| v.len()).sum();
    ensure(expected == got, format!("{agree}/{total} agree"))?;
    Ok(format!("{total}/{total} invocation sites agree (100%)"))
}

// ---------------------------------------------------------------------------
// 3 and 4. generated samples
// ---------------------------------------------------------------------------

struct Generated {
    models: Vec<ProjectModel>,
    reports: Vec<GenerationReport>,
}

fn generated() -> Generated {
    let models = vec![model("demo", demo_root()), model("jpype", jpype_root())];
    let reports = models.iter().map(generate_all).collect();
    Generated { models, reports }
}

fn well_formedness(g: &Generated) -> Outcome {
    let mut n = 0;
    let mut bad = Vec::new();
    for (m, r) in g.models.iter().zip(&g.reports) {
        for s in &r.samples {
            n += 1;
            if let Err(e) = verify::reparse(s) {
                bad.push(format!("{}: {e}", s.provenance.entity));
            }
            match verify::analyze(m, s) {
                Ok(a) if a.introduced.is_empty() => {}
                Ok(a) => bad.push(format!("{}: unresolved {:?}", s.provenance.entity, a.introduced)),
                Err(e) => bad.push(format!("{}: {e}", s.provenance.entity)),
            }
        }
    }
    ensure(n > 0, "no samples generated")?;
    ensure(bad.is_empty(), format!("{} of {n} fail: {:?}", bad.len(), &bad[..bad.len().min(5)]))?;
    Ok(format!("{n}/{n} samples re-parse, 0 unresolved identifiers"))
}

fn inverse_property(g: &Generated) -> Outcome {
    let mut per: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bad = Vec::new();
    for (m, r) in g.models.iter().zip(&g.reports) {
        for s in r.samples.iter().filter(|s| s.smell != Smell::FeatureEnvy) {
            *per.entry(s.smell.code()).or_default() += 1;
            if let Err(e) = verify::check_inverse(m, s) {
                bad.push(format!("{}: {e}", s.provenance.entity));
            }
        }
    }
    ensure(per.get("LM").is_some_and(|&n| n > 0) && per.get("LC").is_some_and(|&n| n > 0), format!("too few samples {per:?}"))?;
    ensure(bad.is_empty(), format!("{} failures: {:?}", bad.len(), &bad[..bad.len().min(5)]))?;
    Ok(format!("EXTRACT_LINES restores {} LM callees, EXTRACT_MEMBERS restores {} LC absorbers", per["LM"], per["LC"]))
}

// ---------------------------------------------------------------------------
// 5. grouping
// ---------------------------------------------------------------------------

/// (rule, smell code, origin, likelihoods, advisor, group, label) written
/// out by hand.
type Rule = (&'static str, Origin, Vec<Likelihood>, Vec<Option<Label>>, Group, Option<Label>);

fn brute_force_rules() -> Vec<Rule> {
    use Group::*;
    use Likelihood::*;
    use Origin::*;
    let (p, n) = (Some(Label::Positive), Some(Label::Negative));
    vec![
        ("LM.T1.A1", Generated, vec![High], vec![None], AGroup, p),
        ("LM.T1.A2", Original, vec![Low], vec![n], AGroup, n),
        ("LM.T1.M1", Original, vec![High], vec![p, n], MGroup, None),
        ("LM.T1.M2", Generated, vec![Moderate], vec![None], MGroup, None),
        ("LM.T1.M3", Original, vec![Moderate], vec![n], MGroup, None),
        ("LM.D-G1", Generated, vec![Low], vec![None], Discard, None),
        ("LM.D-G2", Original, vec![Low, Moderate], vec![p], MGroup, None),
        ("LC.T2.A1", Generated, vec![High], vec![None], AGroup, p),
        ("LC.T2.A2", Original, vec![Low], vec![None], AGroup, n),
        ("LC.T2.M1", Generated, vec![Moderate], vec![None], MGroup, None),
        ("LC.T2.M2", Original, vec![Moderate], vec![None], MGroup, None),
        ("LC.T2.M3", Original, vec![High], vec![None], MGroup, None),
        ("LC.D-G1", Generated, vec![Low], vec![None], Discard, None),
        ("FE.T3.A1", Generated, vec![High], vec![None], AGroup, p),
        ("FE.T3.A2", Original, vec![Low], vec![None], AGroup, n),
        ("FE.T3.M1", Generated, vec![Moderate], vec![None], MGroup, None),
        ("FE.T3.M2", Original, vec![Moderate], vec![None], MGroup, None),
        ("FE.T3.M3", Original, vec![High], vec![None], MGroup, None),
        ("FE.D-G1", Generated, vec![Low], vec![None], Discard, None),
    ]
}

fn candidate(smell: Smell, origin: Origin, metrics: MetricVector, lh: Likelihood, advisor: Option<Label>) -> CandidateSample {
    CandidateSample {
        smell,
        origin,
        entity_source: String::new(),
        context_sources: BTreeMap::new(),
        metrics,
        likelihood: lh,
        advisor,
        ground_truth: (origin == Origin::Generated).then(|| match smell {
            Smell::LongMethod => RefactoringAction::extract_lines(vec![LineRange::new(1, 2)]),
            Smell::LargeClass => RefactoringAction::extract_members(vec!["m".into()]),
            Smell::FeatureEnvy => RefactoringAction::move_method("p.A"),
        }),
        provenance: Provenance::default(),
    }
}

fn grouping_oracle() -> Outcome {
    let rules = brute_force_rules();
    let lookup = |s: Smell, o: Origin, l: Likelihood, a: Option<Label>| {
        rules.iter().filter(|r| r.0.starts_with(s.code()) && r.1 == o && r.2.contains(&l) && r.3.contains(&a)).collect::<Vec<_>>()
    };
    let advisors = |s: Smell, o: Origin| {
        if s == Smell::LongMethod && o == Origin::Original {
            vec![Some(Label::Positive), Some(Label::Negative)]
        } else {
            vec![None]
        }
    };
    // exhaustive origin x likelihood x advisor
    let mut cells = 0;
    let mut used = BTreeSet::new();
    for s in Smell::ALL {
        for o in [Origin::Generated, Origin::Original] {
            for l in Likelihood::ALL {
                for a in advisors(s, o) {
                    cells += 1;
                    let hits = lookup(s, o, l, a);
                    ensure(hits.len() == 1, format!("{s:?} {o:?} {l:?} {a:?}: {} rules", hits.len()))?;
                    let v = match s {
                        Smell::LargeClass => MetricVector::class(1, 1, 1),
                        _ => MetricVector::method(1, 1),
                    };
                    let g = assign_group(&candidate(s, o, v, l, a)).map_err(|e| e.to_string())?;
                    ensure(
                        (g.rule_id.as_str(), g.group, g.auto_label) == (hits[0].0, hits[0].4, hits[0].5),
                        format!("{s:?} {o:?} {l:?} {a:?}: got {}", g.rule_id),
                    )?;
                    used.insert(hits[0].0);
                }
            }
        }
    }
    ensure(used.len() == rules.len(), "unreachable rule")?;
    // random candidates with metric-derived likelihoods
    let t = Thresholds::default();
    let band = |x: usize, lo: usize, hi: usize| if x < lo { Likelihood::Low } else if x > hi { Likelihood::High } else { Likelihood::Moderate };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..10_000 {
        let s = Smell::ALL[rng.gen_range(0..3)];
        let o = if rng.gen_bool(0.5) { Origin::Generated } else { Origin::Original };
        let (loc, nom, noa, nfdi) = (rng.gen_range(0..220), rng.gen_range(0..20), rng.gen_range(0..20), rng.gen_range(0..10));
        let (v, l) = match s {
            Smell::LongMethod => (MetricVector { loc, nom: None, noa: None, nfdi: None }, band(loc, 15, 30)),
            Smell::FeatureEnvy => (MetricVector::method(loc, nfdi), band(nfdi, 2, 5)),
            Smell::LargeClass => (
                MetricVector::class(loc, nom, noa),
                if loc > 130 && nom > 10 && noa > 10 {
                    Likelihood::High
                } else if loc < 70 && nom < 7 && noa < 5 {
                    Likelihood::Low
                } else {
                    Likelihood::Moderate
                },
            ),
        };
        ensure(likelihood(s, &v, &t) == l, format!("#{i}: likelihood of {v:?}"))?;
        let ad = advisors(s, o);
        let a = ad[rng.gen_range(0..ad.len())];
        let hit = lookup(s, o, l, a)[0];
        let g = assign_group(&candidate(s, o, v, l, a)).map_err(|e| e.to_string())?;
        ensure((g.rule_id.as_str(), g.group, g.auto_label) == (hit.0, hit.4, hit.5), format!("#{i}: {} vs {}", g.rule_id, hit.0))?;
    }
    Ok(format!("10000/10000 random candidates agree; {cells} cells, one rule each"))
}

// ---------------------------------------------------------------------------
// 6 - 9. end-to-end runs through the binary
// ---------------------------------------------------------------------------

fn config(dir: &Path, balance: bool, with_eval: bool) -> PathBuf {
    let mut text = format!(
        "seed = 42\nbalance = {balance}\n\n[output]\ndir = {:?}\n\n[[corpus]]\nproject_id = \"jpype-1.7.1\"\nroot_dirs = [{:?}]\nrole = \"TRAIN\"\n",
        dir.join("out").display().to_string(),
        jpype_root().display().to_string(),
    );
    if with_eval {
        text.push_str(&format!("\n[[corpus]]\nproject_id = \"demo\"\nroot_dirs = [{:?}]\nrole = \"EVAL\"\n", demo_root().display().to_string()));
    }
    std::fs::create_dir_all(dir).unwrap();
    let p = dir.join("smelldata.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn smelldata(cfg: &Path, args: &[&str]) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_smelldata")).arg("-c").arg(cfg).args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("{args:?} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

fn read(dir: &Path, name: &str) -> Vec<SampleRecord> {
    pipeline::read_dataset(&dir.join("out").join(name)).unwrap()
}

fn threshold_conformance(dir: &Path) -> Outcome {
    let t = Thresholds::default();
    let ds = read(dir, "dataset.jsonl");
    let mut bad = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &ds {
        let m = &r.metrics;
        let Some(label) = r.label else { continue };
        *counts.entry(format!("{} {:?}", r.smell.code(), label)).or_default() += 1;
        let ok = match (r.smell, label) {
            (Smell::LongMethod, Label::Positive) => m.loc > 30,
            (Smell::FeatureEnvy, Label::Positive) => m.nfdi.is_some_and(|n| n > 5),
            (Smell::LargeClass, Label::Positive) => m.loc > 130 && m.nom.is_some_and(|n| n > 10) && m.noa.is_some_and(|n| n > 10),
            (Smell::LongMethod, Label::Negative) => m.loc < t.lm_min,
            (Smell::FeatureEnvy, Label::Negative) => m.nfdi.is_some_and(|n| n < t.fe_min),
            (Smell::LargeClass, Label::Negative) => {
                m.loc < t.lc_min.loc && m.nom.is_some_and(|n| n < t.lc_min.nom) && m.noa.is_some_and(|n| n < t.lc_min.noa)
            }
        };
        if !ok {
            bad.push(r.id.clone());
        }
    }
    ensure(bad.is_empty(), format!("{} violations, e.g. {:?}", bad.len(), &bad[..bad.len().min(5)]))?;
    Ok(format!("0 violations over {} labeled records {counts:?}", ds.len()))
}

fn balance(dir: &Path) -> Outcome {
    let plain = dir.join("plain");
    let bal = dir.join("balanced");
    smelldata(&config(&plain, false, true), &["run"])?;
    smelldata(&config(&bal, true, true), &["--balance", "--seed", "42", "run"])?;
    let (p, b) = (compute_stats(&read(&plain, "dataset.jsonl")), compute_stats(&read(&bal, "dataset.jsonl")));
    let mut parts = Vec::new();
    for s in Smell::ALL {
        let (pos, neg) = (b.count(s, Label::Positive, Split::Train), b.count(s, Label::Negative, Split::Train));
        ensure(pos == neg, format!("{s:?} TRAIN {pos} positives vs {neg} negatives"))?;
        ensure(pos == p.count(s, Label::Positive, Split::Train), format!("{s:?} TRAIN positives changed"))?;
        for l in [Label::Positive, Label::Negative] {
            ensure(b.count(s, l, Split::Eval) == p.count(s, l, Split::Eval), format!("{s:?} EVAL {l:?} changed"))?;
        }
        parts.push(format!("{} {pos}/{neg}", s.code()));
    }
    let eval: usize = Smell::ALL.iter().map(|&s| p.count(s, Label::Positive, Split::Eval) + p.count(s, Label::Negative, Split::Eval)).sum();
    Ok(format!("TRAIN balanced ({}), {eval} EVAL records unchanged", parts.join(", ")))
}

fn end_to_end(dir: &Path) -> Outcome {
    let kloc: usize = walk_java(&jpype_root()).iter().map(|p| metrics::loc(&std::fs::read_to_string(p).unwrap())).sum();
    ensure(kloc <= 15_000, format!("corpus has {kloc} LOC"))?;
    let cfg = config(dir, false, false);
    let t0 = Instant::now();
    smelldata(&cfg, &["run"])?;
    let elapsed = t0.elapsed();
    ensure(elapsed < Duration::from_secs(300), format!("run took {elapsed:?}"))?;
    let grouped = compute_stats(&read(dir, "samples.jsonl"));
    let mut parts = Vec::new();
    for s in Smell::ALL {
        let a_pos = grouped.count(s, Label::Positive, Split::Train);
        let m = grouped.group_count(s, Group::MGroup, Split::Train);
        ensure(a_pos > 0 && m > 0, format!("{s:?}: {a_pos} A_GROUP positives, {m} M_GROUP samples"))?;
        parts.push(format!("{} A+{a_pos} M{m}", s.code()));
    }
    smelldata(&cfg, &["validate"])?;
    Ok(format!("{kloc} LOC in {elapsed:.1?}; {}; validate ok", parts.join(", ")))
}

fn walk_java(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "java") {
                out.push(p);
            }
        }
    }
    out
}

fn determinism(first: &Path, dir: &Path) -> Outcome {
    smelldata(&config(dir, false, false), &["run"])?;
    let files = ["model.json", "candidates.jsonl", "discards.jsonl", "samples.jsonl", "dataset.jsonl", "dataset.meta.json", "stats.txt", "stats.json"];
    let mut bytes = 0;
    for f in files {
        let (a, b) = (std::fs::read(first.join("out").join(f)), std::fs::read(dir.join("out").join(f)));
        let (a, b) = (a.map_err(|e| format!("{f}: {e}"))?, b.map_err(|e| format!("{f}: {e}"))?);
        ensure(a == b, format!("{f} differs between runs"))?;
        bytes += a.len();
    }
    Ok(format!("{} artifacts byte-identical across two runs ({bytes} bytes)", files.len()))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let e2e = tmp.path().join("e2e");
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("metric oracle", metric_oracle()));
    results.push(("pattern classification", pattern_classification()));
    let g = generated();
    results.push(("generation well-formedness", well_formedness(&g)));
    results.push(("inverse property", inverse_property(&g)));
    drop(g);
    results.push(("grouping oracle", grouping_oracle()));
    let e2e_result = end_to_end(&e2e);
    let conformance = match &e2e_result {
        Ok(_) => threshold_conformance(&e2e),
        Err(e) => Err(format!("end-to-end run failed: {e}")),
    };
    results.push(("threshold conformance", conformance));
    results.push(("balance", balance(&tmp.path().join("balance"))));
    results.push(("scaled end-to-end", e2e_result));
    results.push(("determinism", determinism(&e2e, &tmp.path().join("again"))));

    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(m) => println!("PASS criterion {}: {name}: {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {m}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
