//! Long method: inline a callee into its caller at one invocation site.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;
use tree_sitter::Node;

use super::text::{self, Edit, ParsedMember};
use super::{method_key, Discard, GeneratedSample};
use crate::java::ingest::{find_field_in_scope, host_statement};
use crate::java::syntax::{self, IdentRole};
use crate::metrics::MetricVector;
use crate::model::*;
use crate::sample::{LineRange, Provenance, RefactoringAction, Smell, SourceSpan, PIPELINE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LmPattern {
    P1Statement,
    P2Assigned,
    P3Expression,
}

impl LmPattern {
    pub fn from_invocation(p: InvocationPattern) -> Self {
        match p {
            InvocationPattern::StatementCall => LmPattern::P1Statement,
            InvocationPattern::AssignedReturn => LmPattern::P2Assigned,
            InvocationPattern::ExpressionCall => LmPattern::P3Expression,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LmPattern::P1Statement => "P1_STATEMENT",
            LmPattern::P2Assigned => "P2_ASSIGNED",
            LmPattern::P3Expression => "P3_EXPRESSION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCandidateLM {
    pub caller_class: String,
    /// Index of the caller within its class's method list.
    pub caller_index: usize,
    pub callee: MethodRef,
    /// Index of the site within the caller's invocations.
    pub site_index: usize,
    pub pattern: LmPattern,
}

type Key = (usize, usize);

struct CallGraph {
    edges: HashMap<Key, BTreeSet<Key>>,
}

impl CallGraph {
    fn build(model: &ProjectModel) -> (Self, HashMap<MethodRef, Key>) {
        let mut by_ref: HashMap<MethodRef, Key> = HashMap::new();
        for (ci, c) in model.classes.iter().enumerate() {
            for (mi, m) in c.methods.iter().enumerate() {
                if model.lookup_method(&m.method_ref()).is_some_and(|x| std::ptr::eq(x, m)) {
                    by_ref.insert(m.method_ref(), (ci, mi));
                }
            }
        }
        let mut edges: HashMap<Key, BTreeSet<Key>> = HashMap::new();
        for (ci, c) in model.classes.iter().enumerate() {
            for (mi, m) in c.methods.iter().enumerate() {
                let out: BTreeSet<Key> = m
                    .invocations
                    .iter()
                    .filter_map(|s| s.callee.internal())
                    .filter_map(|r| by_ref.get(r).copied())
                    .collect();
                edges.insert((ci, mi), out);
            }
        }
        (CallGraph { edges }, by_ref)
    }

    fn reaches(&self, from: Key, to: Key) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([from]);
        while let Some(k) = queue.pop_front() {
            if k == to {
                return true;
            }
            if !seen.insert(k) {
                continue;
            }
            if let Some(next) = self.edges.get(&k) {
                queue.extend(next.iter().copied());
            }
        }
        false
    }
}

/// Whether `m` touches members of its own class (or `this`), which would
/// not mean the same thing once its body lives in another class or in a
/// static context.
fn references_own_members(model: &ProjectModel, owner: &ClassEntity, m: &MethodEntity) -> bool {
    let refs = m.member_refs.iter().any(|r| match (&r.receiver, r.kind) {
        (Receiver::This | Receiver::Super | Receiver::ThisField(_), _) => true,
        (Receiver::Implicit, RefKind::Call) => true,
        (Receiver::Implicit, _) => find_field_in_scope(model, owner, &r.name).is_some(),
        _ => false,
    });
    refs || text::identifiers(&m.source_text).contains("this")
}

fn return_shape_ok(m: &MethodEntity) -> bool {
    m.return_count == 0 || (m.return_count == 1 && m.trailing_return)
}

/// Every (caller, callee, site) triple that can be inlined.
pub fn find_merge_candidates_long_method(model: &ProjectModel) -> Vec<MergeCandidateLM> {
    let (graph, by_ref) = CallGraph::build(model);
    let mut reach_cache: HashMap<(Key, Key), bool> = HashMap::new();
    let mut out = Vec::new();
    for (ci, cls) in model.classes.iter().enumerate() {
        if !cls.kind.is_candidate_kind() {
            continue;
        }
        for (mi, caller) in cls.methods.iter().enumerate() {
            if !caller.has_body() {
                continue;
            }
            for (si, site) in caller.invocations.iter().enumerate() {
                let Some(r) = site.callee.internal() else { continue };
                let Some(&ck) = by_ref.get(r) else { continue };
                if ck == (ci, mi) || site.inline_blocker.is_some() {
                    continue;
                }
                if matches!(site.receiver, Receiver::Other) {
                    continue;
                }
                let callee_cls = &model.classes[ck.0];
                let callee = &callee_cls.methods[ck.1];
                if !callee.has_body()
                    || callee.is_constructor
                    || callee.is_generic
                    || callee.is_varargs
                    || callee.uses_super
                    || !return_shape_ok(callee)
                {
                    continue;
                }
                let pattern = LmPattern::from_invocation(site.pattern);
                if pattern != LmPattern::P1Statement && callee.return_count != 1 {
                    continue;
                }
                let foreign_owner = callee.owner != caller.owner;
                if (foreign_owner && callee_cls.is_generic)
                    || ((foreign_owner || (caller.is_static && !callee.is_static))
                        && references_own_members(model, callee_cls, callee))
                {
                    continue;
                }
                let recursive = *reach_cache.entry((ck, (ci, mi))).or_insert_with(|| graph.reaches(ck, (ci, mi)));
                if recursive {
                    continue;
                }
                out.push(MergeCandidateLM {
                    caller_class: cls.qualified_name.clone(),
                    caller_index: mi,
                    callee: r.clone(),
                    site_index: si,
                    pattern,
                });
            }
        }
    }
    out
}

fn is_expression_statement_kind(kind: &str) -> bool {
    matches!(
        kind,
        "method_invocation" | "assignment_expression" | "update_expression" | "object_creation_expression"
    )
}

/// The inlined callee, after renaming and parameter substitution.
struct InlinedBody {
    /// Statements before the trailing return, as one fragment.
    statements: String,
    /// Indentation of the callee's statements.
    base_indent: String,
    return_expr: Option<(String, String)>,
}

fn rewrite_callee(
    callee: &MethodEntity,
    substitutions: &BTreeMap<String, String>,
    renames: &BTreeMap<String, String>,
) -> Result<InlinedBody, String> {
    let pm = ParsedMember::new(&callee.source_text);
    let src = pm.source.as_str();
    let method = pm.method().ok_or("callee does not parse as a method")?;
    let body = method.child_by_field_name("body").ok_or("callee has no body")?;
    let stmts: Vec<Node> = syntax::named_children(body).into_iter().filter(|n| !syntax::is_comment(*n)).collect();
    let (inlined, ret) = match stmts.last() {
        Some(last) if last.kind() == "return_statement" => (&stmts[..stmts.len() - 1], Some(*last)),
        _ => (&stmts[..], None),
    };
    if inlined.is_empty() {
        return Err("callee body has no statements to inline".into());
    }

    let mut edits = Vec::new();
    let mut stack = vec![body];
    while let Some(n) = stack.pop() {
        if n.kind() == "identifier" {
            let name = syntax::text(n, src);
            let value = syntax::ident_role(n) == IdentRole::Value;
            if let Some(new) = renames.get(name) {
                if value || text::is_declaration_name(n) {
                    edits.push(Edit::new(n.start_byte(), n.end_byte(), new.clone()));
                }
            } else if let Some(sub) = substitutions.get(name) {
                if value {
                    edits.push(Edit::new(n.start_byte(), n.end_byte(), sub.clone()));
                }
            }
        }
        stack.extend(syntax::children(n));
    }

    let first = inlined[0];
    let last = inlined[inlined.len() - 1];
    let statements = text::apply_edits(src, first.start_byte(), last.end_byte(), &edits)?;
    let (base_indent, _) = syntax::line_indent(src, first.start_byte());
    let return_expr = match ret {
        Some(r) => match syntax::named_children(r).into_iter().find(|c| !syntax::is_comment(*c)) {
            Some(e) => Some((text::apply_edits(src, e.start_byte(), e.end_byte(), &edits)?, e.kind().to_string())),
            None => None,
        },
        None => None,
    };
    Ok(InlinedBody { statements, base_indent, return_expr })
}

fn discard(c: &MergeCandidateLM, entity: String, reason: impl Into<String>) -> Discard {
    Discard { smell: Smell::LongMethod, pattern: c.pattern.name().into(), entity, reason: reason.into() }
}

/// Inlines the callee at the candidate's site.
pub fn merge_methods(model: &ProjectModel, c: &MergeCandidateLM) -> Result<GeneratedSample, Discard> {
    let cls = model.lookup_class(&c.caller_class).expect("candidate class exists");
    let caller = &cls.methods[c.caller_index];
    let entity = method_key(&cls.qualified_name, &caller.name, caller.arity());
    let fail = |reason: &str| discard(c, entity.clone(), reason);
    let callee = model.lookup_method(&c.callee).ok_or_else(|| fail("callee vanished"))?;
    let site = &caller.invocations[c.site_index];
    let caller_text = caller.source_text.as_str();

    // Locate the call in a fresh parse of the caller to recover argument
    // shapes and the host statement.
    let pm = ParsedMember::new(caller_text);
    let off = pm.offset;
    let call = text::node_at(
        pm.tree.root_node(),
        site.call_range.start + off,
        site.call_range.end + off,
        "method_invocation",
    )
    .ok_or_else(|| fail("call site not found on re-parse"))?;
    let (host, blocker, needs_braces) = host_statement(call);
    if let Some(b) = blocker {
        return Err(fail(&format!("inline blocked: {b}")));
    }
    let host = host.ok_or_else(|| fail("no host statement"))?;
    let host_start = host.start_byte() - off;
    let host_end = host.end_byte() - off;
    let args = syntax::argument_nodes(call);
    if args.len() != callee.parameters.len() {
        return Err(fail("argument count mismatch"));
    }

    // Parameters the callee assigns to become locals.
    let callee_pm = ParsedMember::new(&callee.source_text);
    let mut assigned: BTreeSet<String> = BTreeSet::new();
    if let Some(body) = callee_pm.method().and_then(|m| m.child_by_field_name("body")) {
        let mut stack = vec![body];
        while let Some(n) = stack.pop() {
            if n.kind() == "identifier" && syntax::is_write_target(n) {
                assigned.insert(syntax::text(n, &callee_pm.source).to_string());
            }
            stack.extend(syntax::children(n));
        }
    }

    let caller_idents = text::identifiers(caller_text);
    let mut taken: BTreeSet<String> = caller_idents.union(&text::identifiers(&callee.source_text)).cloned().collect();
    let mut renames: BTreeMap<String, String> = BTreeMap::new();
    let mut rename = |name: &str, taken: &mut BTreeSet<String>| {
        if caller_idents.contains(name) && !renames.contains_key(name) {
            let fresh = text::fresh_name(name, "__m", taken);
            taken.insert(fresh.clone());
            renames.insert(name.to_string(), fresh);
        }
    };
    for l in &callee.locals {
        rename(&l.name, &mut taken);
    }
    let mut substitutions = BTreeMap::new();
    let mut param_lines = Vec::new();
    for (p, a) in callee.parameters.iter().zip(&args) {
        let arg_text = syntax::text(*a, &pm.source).to_string();
        if assigned.contains(&p.name) {
            rename(&p.name, &mut taken);
            param_lines.push((p.type_text.clone(), p.name.clone(), arg_text));
        } else if syntax::is_atomic_expression(a.kind()) {
            substitutions.insert(p.name.clone(), arg_text);
        } else {
            substitutions.insert(p.name.clone(), format!("({arg_text})"));
        }
    }
    let param_lines: Vec<String> = param_lines
        .into_iter()
        .map(|(ty, name, arg)| format!("{ty} {} = {arg};", renames.get(&name).unwrap_or(&name)))
        .collect();

    let inlined = rewrite_callee(callee, &substitutions, &renames).map_err(|e| fail(&e))?;

    let (host_indent, clean) = syntax::line_indent(caller_text, host_start);
    if !clean && !needs_braces {
        return Err(fail("host statement shares its line"));
    }
    let inner = if needs_braces { format!("{host_indent}    ") } else { host_indent.clone() };

    let host_text = &caller_text[host_start..host_end];
    let call_in_host = (site.call_range.start - host_start, site.call_range.end - host_start);
    let with_call = |replacement: &str| {
        format!("{inner}{}{replacement}{}", &host_text[..call_in_host.0], &host_text[call_in_host.1..])
    };
    let mut temp = None;
    let tail: Vec<String> = match (c.pattern, &inlined.return_expr) {
        (LmPattern::P1Statement, Some((e, kind))) if is_expression_statement_kind(kind) => {
            vec![format!("{inner}{e};")]
        }
        (LmPattern::P1Statement, _) => vec![],
        (LmPattern::P2Assigned, Some((e, _))) => vec![with_call(e)],
        (LmPattern::P3Expression, Some((e, _))) => {
            if callee.return_type.is_empty() || callee.return_type == "void" {
                return Err(fail("expression call of a void method"));
            }
            let base = format!("{}Result", callee.name);
            let name = if taken.contains(&base) { text::fresh_name(&base, "", &taken) } else { base };
            let lines = vec![format!("{inner}{} {name} = {e};", callee.return_type), with_call(&name)];
            temp = Some(name);
            lines
        }
        _ => return Err(fail("callee has no return value")),
    };

    let body_lines = text::reindent(&inlined.statements, &inlined.base_indent, &inner);
    let params_indented: Vec<String> = param_lines.iter().map(|l| format!("{inner}{l}")).collect();
    let mut all: Vec<String> = params_indented.clone();
    all.extend(body_lines.iter().cloned());
    all.extend(tail);
    let replacement = if needs_braces {
        format!("{{\n{}\n{host_indent}}}", all.join("\n"))
    } else {
        let joined = all.join("\n");
        joined[inner.len()..].to_string()
    };
    let new_source = format!("{}{replacement}{}", &caller_text[..host_start], &caller_text[host_end..]);

    let host_line = syntax::line_of(caller_text, host_start);
    let first = host_line + usize::from(needs_braces) + params_indented.len();
    let extract = LineRange::new(first, first + body_lines.len() - 1);

    let mut details = BTreeMap::new();
    details.insert("caller".into(), json!(entity));
    details.insert("caller_index".into(), json!(c.caller_index));
    details.insert("callee".into(), json!(method_key(&c.callee.class, &c.callee.name, c.callee.arity)));
    details.insert("host_range".into(), json!([host_start, host_end]));
    details.insert("site_line".into(), json!(site.line));
    details.insert("substitutions".into(), json!(substitutions));
    details.insert("renames".into(), json!(renames));
    if let Some(t) = temp {
        details.insert("temp".into(), json!(t));
    }
    let callee_cls = model.lookup_class(&c.callee.class).expect("callee class exists");
    let spans = vec![
        SourceSpan { file: cls.file.clone(), start: caller.span.start, end: caller.span.end },
        SourceSpan { file: callee_cls.file.clone(), start: callee.span.start, end: callee.span.end },
    ];
    Ok(GeneratedSample {
        smell: Smell::LongMethod,
        pattern: c.pattern.name().into(),
        new_source,
        context_sources: BTreeMap::new(),
        ground_truth: RefactoringAction::extract_lines(vec![extract]),
        metrics: MetricVector::method(0, 0),
        provenance: Provenance {
            project: model.project_id.clone(),
            entity,
            spans,
            pattern: Some(format!("LM.{}", c.pattern.name())),
            details,
            pipeline_version: PIPELINE_VERSION.into(),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::build_model_from_sources;

    fn model(src: &str) -> ProjectModel {
        build_model_from_sources("t", Split::Train, &[("A.java", src)]).unwrap()
    }

    const DEMO: &str = r#"
class Demo {
    void main() {
        int[] result = {1, 2, 3};
        print_ary(result);
        int s = sum(1, 2);
        if (twice(s) > 2) {
            s++;
        }
    }

    void print_ary(int[] a) {
        for (int i = 0; i < a.length; i++) {
            System.out.println(a[i]);
        }
    }

    int sum(int x, int y) {
        int s = x * 2;
        return s + y;
    }

    int twice(int v) {
        int w = v + v;
        return w;
    }
}
"#;

    #[test]
    fn finds_one_candidate_per_pattern() {
        let m = model(DEMO);
        let cands = find_merge_candidates_long_method(&m);
        let pats: Vec<_> = cands.iter().map(|c| (c.callee.name.as_str(), c.pattern)).collect();
        assert_eq!(
            pats,
            vec![
                ("print_ary", LmPattern::P1Statement),
                ("sum", LmPattern::P2Assigned),
                ("twice", LmPattern::P3Expression)
            ]
        );
    }

    #[test]
    fn p1_substitutes_parameter() {
        let m = model(DEMO);
        let c = &find_merge_candidates_long_method(&m)[0];
        let s = merge_methods(&m, c).unwrap();
        assert!(s.new_source.contains("for (int i = 0; i < result.length; i++) {"), "{}", s.new_source);
        assert!(s.new_source.contains("System.out.println(result[i]);"));
        assert!(!s.new_source.contains("print_ary(result)"));
        let r = s.ground_truth.extract_lines.as_ref().unwrap()[0];
        let lines: Vec<_> = s.new_source.lines().collect();
        assert!(lines[r.start - 1].trim_start().starts_with("for"));
        assert_eq!(lines[r.end - 1].trim(), "}");
        assert!(syntax::member_parses_cleanly(&s.new_source));
    }

    #[test]
    fn p2_renames_colliding_locals() {
        let m = model(DEMO);
        let c = &find_merge_candidates_long_method(&m)[1];
        let s = merge_methods(&m, c).unwrap();
        assert!(s.new_source.contains("int s__m1 = 1 * 2;"), "{}", s.new_source);
        assert!(s.new_source.contains("int s = s__m1 + 2;"), "{}", s.new_source);
    }

    #[test]
    fn p3_introduces_temporary() {
        let m = model(DEMO);
        let c = &find_merge_candidates_long_method(&m)[2];
        let s = merge_methods(&m, c).unwrap();
        assert!(s.new_source.contains("int w = s + s;"), "{}", s.new_source);
        assert!(s.new_source.contains("int twiceResult = w;"));
        assert!(s.new_source.contains("if (twiceResult > 2) {"));
    }

    #[test]
    fn recursion_and_mid_returns_are_excluded() {
        let src = r#"
class R {
    void a() { b(); }
    void b() { a(); }
    int c(int x) { if (x > 0) { return 1; } return 2; }
    void d() { int y = c(1); }
    void e() { }
    void f() { e(); }
}"#;
        let m = model(src);
        assert!(find_merge_candidates_long_method(&m).iter().all(|c| c.callee.name == "e"));
        let c = find_merge_candidates_long_method(&m).into_iter().find(|c| c.callee.name == "e").unwrap();
        let d = merge_methods(&m, &c).unwrap_err();
        assert!(d.reason.contains("no statements"), "{}", d.reason);
    }

    #[test]
    fn unbraced_host_gets_braces() {
        let src = r#"
class B {
    void f(boolean c) {
        if (c) g(1);
    }
    void g(int k) {
        int z = k;
        System.out.println(z);
    }
}"#;
        let m = model(src);
        let c = &find_merge_candidates_long_method(&m)[0];
        let s = merge_methods(&m, c).unwrap();
        assert!(syntax::member_parses_cleanly(&s.new_source), "{}", s.new_source);
        assert!(s.new_source.contains("if (c) {\n            int z = 1;"), "{}", s.new_source);
    }
}
