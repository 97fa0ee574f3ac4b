//! Checks on generated samples: re-parse, symbol sweep and the inverse
//! refactoring property.
//!
//! The inverse checks work on the independent lexer's token stream rather
//! than on the syntax trees the generators edit.

use std::collections::{BTreeMap, BTreeSet};

use super::GeneratedSample;
use crate::java::ingest::{find_field_in_scope, has_method_named_in_scope};
use crate::java::{parse_file, reanalyze_class, syntax};
use crate::lexer::{self, Token, TokenKind};
use crate::metrics::{self, MetricVector};
use crate::model::*;
use crate::sample::Smell;

/// Every text in the sample parses without syntax errors.
pub fn reparse(s: &GeneratedSample) -> Result<(), String> {
    let ok = match s.smell {
        Smell::LargeClass => syntax::parses_cleanly(&s.new_source),
        _ => syntax::member_parses_cleanly(&s.new_source),
    };
    if !ok {
        return Err("new_source does not parse".into());
    }
    for (role, text) in &s.context_sources {
        if !syntax::parses_cleanly(text) {
            return Err(format!("context {role} does not parse"));
        }
    }
    Ok(())
}

fn type_like(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_uppercase())
        && (name.len() == 1 || name.chars().any(|c| c.is_lowercase()))
}

/// Unqualified names used in `m` that resolve to nothing visible from
/// `owner`: no local, no field or method in scope, no type, no static
/// import.
pub fn unresolved(model: &ProjectModel, owner: &ClassEntity, m: &MethodEntity) -> BTreeSet<String> {
    let statics: BTreeSet<&str> = model
        .file_context(&owner.file)
        .map(|c| c.static_imports.iter().map(String::as_str).collect())
        .unwrap_or_default();
    let mut out = BTreeSet::new();
    for r in &m.member_refs {
        if r.receiver != Receiver::Implicit || statics.contains(r.name.as_str()) {
            continue;
        }
        let ok = match r.kind {
            RefKind::Call => has_method_named_in_scope(model, owner, &r.name),
            RefKind::Read | RefKind::Write => {
                find_field_in_scope(model, owner, &r.name).is_some()
                    || type_like(&r.name)
                    || model.classes.iter().any(|c| c.simple_name == r.name)
            }
        };
        if !ok {
            out.insert(r.name.clone());
        }
    }
    out
}

fn unresolved_all(model: &ProjectModel, owner: &ClassEntity) -> BTreeSet<String> {
    owner.methods.iter().flat_map(|m| unresolved(model, owner, m)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub metrics: MetricVector,
    /// Unresolved names the transformation introduced.
    pub introduced: BTreeSet<String>,
}

fn class_of_entity(entity: &str) -> &str {
    entity.split('#').next().unwrap_or(entity)
}

fn callee_of<'m>(model: &'m ProjectModel, key: &str) -> Option<(&'m ClassEntity, &'m MethodEntity)> {
    let (cls, rest) = key.split_once('#')?;
    let (name, arity) = rest.rsplit_once('/')?;
    let r = MethodRef { class: cls.to_string(), name: name.to_string(), arity: arity.parse().ok()? };
    Some((model.lookup_class(cls)?, model.lookup_method(&r)?))
}

/// Re-analyzes the rewritten entity in the context of the model.
pub fn analyze(model: &ProjectModel, s: &GeneratedSample) -> Result<Analysis, String> {
    let err = |e: crate::error::IngestError| e.to_string();
    match s.smell {
        Smell::LongMethod => {
            let cls = model.lookup_class(class_of_entity(&s.provenance.entity)).ok_or("caller class missing")?;
            let idx = s.provenance.details.get("caller_index").and_then(|v| v.as_u64()).ok_or("no caller index")? as usize;
            let caller = cls.methods.get(idx).ok_or("caller index out of range")?;
            let at = caller.text_offset - cls.text_offset;
            let class_text = format!(
                "{}{}{}",
                &cls.source_text[..at],
                s.new_source,
                &cls.source_text[at + caller.source_text.len()..]
            );
            let overlay = reanalyze_class(model, cls, &class_text).map_err(err)?;
            let merged = overlay.methods.get(idx).filter(|m| m.name == caller.name).ok_or("merged method not found")?;
            let mut baseline = unresolved(model, cls, caller);
            if let Some((ccls, callee)) = s.provenance.detail_str("callee").and_then(|k| callee_of(model, k)) {
                baseline.extend(unresolved(model, ccls, callee));
            }
            let introduced = unresolved(model, &overlay, merged).difference(&baseline).cloned().collect();
            let lineage = model.lineage(&overlay);
            Ok(Analysis {
                metrics: MetricVector::method(metrics::loc(&s.new_source), metrics::nfdi_with_lineage(merged, &lineage)),
                introduced,
            })
        }
        Smell::LargeClass => {
            let absorber = model.lookup_class(&s.provenance.entity).ok_or("absorber missing")?;
            let overlay = reanalyze_class(model, absorber, &s.new_source).map_err(err)?;
            let mut baseline = unresolved_all(model, absorber);
            if let Some(a) = s.provenance.detail_str("absorbed").and_then(|a| model.lookup_class(a)) {
                baseline.extend(unresolved_all(model, a));
            }
            let introduced = unresolved_all(model, &overlay).difference(&baseline).cloned().collect();
            Ok(Analysis {
                metrics: MetricVector::class(
                    metrics::loc(&s.new_source),
                    metrics::nom(&overlay),
                    metrics::noa(&overlay),
                ),
                introduced,
            })
        }
        Smell::FeatureEnvy => {
            let target_name = s.provenance.detail_str("generation_target").ok_or("no generation target")?;
            let target = model.lookup_class(target_name).ok_or("target class missing")?;
            let text = s.context_sources.get("target_class").ok_or("no target context")?;
            let overlay = reanalyze_class(model, target, text).map_err(err)?;
            let name = s.provenance.detail_str("method").ok_or("no method name")?;
            let arity = s.provenance.details.get("arity").and_then(|v| v.as_u64()).ok_or("no arity")? as usize;
            let moved = overlay
                .methods
                .iter()
                .rev()
                .find(|m| m.name == name && m.arity() == arity)
                .ok_or("moved method not found in target")?;
            let (scls, orig) = callee_of(model, &s.provenance.entity)
                .or_else(|| {
                    let cls = model.lookup_class(class_of_entity(&s.provenance.entity))?;
                    cls.methods.iter().find(|m| m.name == name && m.arity() == arity).map(|m| (cls, m))
                })
                .ok_or("original method missing")?;
            let baseline = unresolved(model, scls, orig);
            let introduced = unresolved(model, &overlay, moved).difference(&baseline).cloned().collect();
            let lineage = model.lineage(&overlay);
            Ok(Analysis {
                metrics: MetricVector::method(metrics::loc(&s.new_source), metrics::nfdi_with_lineage(moved, &lineage)),
                introduced,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Inverse property
// ---------------------------------------------------------------------------

fn texts(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.text.clone()).collect()
}

/// Tokens of a method body, between the first top-level `{` and the final `}`.
fn body_tokens(method_text: &str) -> Vec<Token> {
    let toks = lexer::tokenize(method_text);
    let mut depth = 0i32;
    let mut open = None;
    for (i, t) in toks.iter().enumerate() {
        match t.text.as_str() {
            "(" => depth += 1,
            ")" => depth -= 1,
            "{" if depth == 0 => {
                open = Some(i);
                break;
            }
            _ => {}
        }
    }
    let Some(open) = open else { return vec![] };
    let close = toks.iter().rposition(|t| t.text == "}").unwrap_or(toks.len());
    toks[open + 1..close].to_vec()
}

/// Drops a final top-level `return ...;` statement.
fn strip_trailing_return(body: Vec<Token>) -> Vec<Token> {
    let mut depth = 0i32;
    let mut last_return = None;
    for (i, t) in body.iter().enumerate() {
        match t.text.as_str() {
            "{" | "(" | "[" => depth += 1,
            "}" | ")" | "]" => depth -= 1,
            "return" if depth == 0 && t.kind == TokenKind::Ident => last_return = Some(i),
            _ => {}
        }
    }
    match last_return {
        Some(i) => {
            let tail = &body[i..];
            let semis = tail.iter().filter(|t| t.text == ";").count();
            if tail.last().is_some_and(|t| t.text == ";") && semis >= 1 {
                body[..i].to_vec()
            } else {
                body
            }
        }
        None => body,
    }
}

fn substitute(tokens: &[Token], renames: &BTreeMap<String, String>, subs: &BTreeMap<String, String>) -> Vec<String> {
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let after_dot = i > 0 && tokens[i - 1].text == ".";
        let before_paren = tokens.get(i + 1).is_some_and(|n| n.text == "(");
        if t.kind == TokenKind::Ident && !after_dot && !before_paren {
            if let Some(r) = renames.get(&t.text) {
                out.push(r.clone());
                continue;
            }
            if let Some(s) = subs.get(&t.text) {
                out.extend(lexer::tokenize(s).into_iter().map(|x| x.text));
                continue;
            }
        }
        out.push(t.text.clone());
    }
    out
}

fn string_map(v: Option<&serde_json::Value>) -> BTreeMap<String, String> {
    v.and_then(|v| v.as_object())
        .map(|o| o.iter().filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string()))).collect())
        .unwrap_or_default()
}

fn check_long_method(model: &ProjectModel, s: &GeneratedSample) -> Result<(), String> {
    let ranges = s.ground_truth.extract_lines.as_ref().ok_or("no EXTRACT_LINES")?;
    let lines: Vec<&str> = s.new_source.split('\n').collect();
    if ranges.iter().any(|r| r.start == 0 || r.end > lines.len() || r.start > r.end) {
        return Err("extract range outside new_source".into());
    }
    let inside = |i: usize| ranges.iter().any(|r| r.contains(i + 1));
    let extracted: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| inside(*i)).map(|x| *x.1).collect();
    let residual: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| !inside(*i)).map(|x| *x.1).collect();

    let (_, callee) = s
        .provenance
        .detail_str("callee")
        .and_then(|k| callee_of(model, k))
        .ok_or("callee not in model")?;
    let renames = string_map(s.provenance.details.get("renames"));
    let subs = string_map(s.provenance.details.get("substitutions"));
    let expected = substitute(&strip_trailing_return(body_tokens(&callee.source_text)), &renames, &subs);
    let got = texts(&lexer::tokenize(&extracted.join("\n")));
    if expected != got {
        return Err(format!(
            "extracted statements differ from the callee body\n  expected: {}\n  got:      {}",
            expected.join(" "),
            got.join(" ")
        ));
    }

    let cls = model.lookup_class(class_of_entity(&s.provenance.entity)).ok_or("caller class missing")?;
    let idx = s.provenance.details.get("caller_index").and_then(|v| v.as_u64()).ok_or("no caller index")? as usize;
    let caller = cls.methods.get(idx).ok_or("caller missing")?;
    let host = s.provenance.details.get("host_range").and_then(|v| v.as_array()).ok_or("no host range")?;
    let (hs, he) = (
        host.first().and_then(|v| v.as_u64()).ok_or("bad host range")? as usize,
        host.get(1).and_then(|v| v.as_u64()).ok_or("bad host range")? as usize,
    );
    let before = texts(&lexer::tokenize(&caller.source_text[..hs]));
    let after = texts(&lexer::tokenize(&caller.source_text[he..]));
    let rest = texts(&lexer::tokenize(&residual.join("\n")));
    if rest.len() < before.len() + after.len() || !rest.starts_with(&before) || !rest.ends_with(&after) {
        return Err("residual caller differs from the original outside the call site".into());
    }
    Ok(())
}

/// (kind, name, arity) of every member; constructors use kind `C`.
fn member_multiset(cls: &ClassEntity) -> Vec<(char, String, usize)> {
    let mut v: Vec<(char, String, usize)> = cls
        .fields
        .iter()
        .map(|f| ('F', f.name.clone(), 0))
        .chain(cls.methods.iter().map(|m| (if m.is_constructor { 'C' } else { 'M' }, m.name.clone(), m.arity())))
        .collect();
    v.sort();
    v
}

fn check_large_class(model: &ProjectModel, s: &GeneratedSample) -> Result<(), String> {
    let names: BTreeSet<&str> = s
        .ground_truth
        .extract_members
        .as_ref()
        .ok_or("no EXTRACT_MEMBERS")?
        .iter()
        .map(String::as_str)
        .collect();
    let parsed = parse_file(&s.new_source, "merged.java").map_err(|e| e.to_string())?;
    let merged = parsed.classes.first().ok_or("merged class missing")?;
    let mut restored: Vec<_> = member_multiset(merged)
        .into_iter()
        .filter(|(k, n, _)| *k == 'C' || !names.contains(n.as_str()))
        .collect();
    restored.sort();
    let absorber = model.lookup_class(&s.provenance.entity).ok_or("absorber missing")?;
    let removed = s.provenance.detail_str("removed_field");
    let expected: Vec<_> = member_multiset(absorber)
        .into_iter()
        .filter(|(k, n, _)| !(*k == 'F' && Some(n.as_str()) == removed))
        .collect();
    if restored != expected {
        return Err(format!("member set after extraction {restored:?} differs from the absorber's {expected:?}"));
    }
    Ok(())
}

fn check_feature_envy(model: &ProjectModel, s: &GeneratedSample) -> Result<(), String> {
    let target = s.ground_truth.move_target.as_deref().ok_or("no MOVE_METHOD target")?;
    if Some(target) != s.provenance.detail_str("original_owner") {
        return Err("move target is not the original owner".into());
    }
    if model.lookup_class(target).is_none() {
        return Err("move target not in model".into());
    }
    if !s.provenance.candidate_targets().iter().any(|t| t == target) {
        return Err("move target missing from candidate targets".into());
    }
    Ok(())
}

/// Applying the ground truth undoes the transformation.
pub fn check_inverse(model: &ProjectModel, s: &GeneratedSample) -> Result<(), String> {
    match s.smell {
        Smell::LongMethod => check_long_method(model, s),
        Smell::LargeClass => check_large_class(model, s),
        Smell::FeatureEnvy => check_feature_envy(model, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_tokens_skip_annotation_braces() {
        let t = body_tokens("@A({1})\nvoid f(int a) { g(a); return; }");
        assert_eq!(texts(&t), vec!["g", "(", "a", ")", ";", "return", ";"]);
        assert_eq!(texts(&strip_trailing_return(t)), vec!["g", "(", "a", ")", ";"]);
    }

    #[test]
    fn substitution_skips_members_and_calls() {
        let toks = lexer::tokenize("a.length + a + size(a) + x.a");
        let subs = BTreeMap::from([("a".to_string(), "(p + q)".to_string()), ("size".to_string(), "n".to_string())]);
        let out = substitute(&toks, &BTreeMap::new(), &subs).join(" ");
        assert_eq!(out, "( p + q ) . length + ( p + q ) + size ( ( p + q ) ) + x . a");
    }
}
