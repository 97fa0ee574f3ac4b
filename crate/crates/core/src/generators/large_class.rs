//! Large class: merge a superclass (P1) or a field's class (P2) into the
//! class that uses it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use tree_sitter::Node;

use super::text::{self, Edit};
use super::{Discard, GeneratedSample};
use crate::java::syntax::{self, IdentRole};
use crate::metrics::MetricVector;
use crate::model::*;
use crate::sample::{Provenance, RefactoringAction, Smell, SourceSpan, PIPELINE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LcPattern {
    P1Inheritance,
    P2Usage,
}

impl LcPattern {
    pub fn name(self) -> &'static str {
        match self {
            LcPattern::P1Inheritance => "P1_INHERITANCE",
            LcPattern::P2Usage => "P2_USAGE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCandidateLC {
    pub absorber: String,
    pub absorbed: String,
    pub pattern: LcPattern,
    /// The absorber's field whose type is the absorbed class (P2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

fn has_nested_classes(model: &ProjectModel, cls: &ClassEntity) -> bool {
    model
        .classes
        .iter()
        .any(|c| c.outer.as_deref() == Some(cls.qualified_name.as_str()) && c.kind != ClassKind::Local)
}

fn mergeable(model: &ProjectModel, absorber: &ClassEntity, absorbed: &ClassEntity) -> bool {
    if absorber.kind != ClassKind::Class || absorbed.kind != ClassKind::Class || absorbed.is_generic {
        return false;
    }
    if absorber.qualified_name == absorbed.qualified_name || has_nested_classes(model, absorbed) {
        return false;
    }
    if absorbed.methods.iter().any(|m| !m.has_body()) && !absorber.is_abstract {
        return false;
    }
    let a = absorber.member_names();
    absorbed.member_names().is_disjoint(&a)
}

pub fn find_merge_candidates_large_class(model: &ProjectModel) -> Vec<MergeCandidateLC> {
    let mut out = Vec::new();
    for cls in &model.classes {
        if cls.kind != ClassKind::Class {
            continue;
        }
        if let Some(parent) = cls.superclass.as_ref().and_then(|s| s.internal()).and_then(|p| model.lookup_class(p)) {
            if mergeable(model, cls, parent) {
                out.push(MergeCandidateLC {
                    absorber: cls.qualified_name.clone(),
                    absorbed: parent.qualified_name.clone(),
                    pattern: LcPattern::P1Inheritance,
                    field: None,
                });
            }
        }
        let lineage = model.lineage(cls);
        let mut seen = BTreeSet::new();
        for f in &cls.fields {
            let Some(t) = f.declared_type.internal() else { continue };
            if f.is_static || f.shared_declaration || lineage.contains(t) || !seen.insert(t.to_string()) {
                continue;
            }
            if cls.fields.iter().filter(|g| g.declared_type.internal() == Some(t)).count() != 1 {
                continue;
            }
            let Some(absorbed) = model.lookup_class(t) else { continue };
            // nested in one another: the texts overlap
            if t.starts_with(&format!("{}$", cls.qualified_name)) || cls.qualified_name.starts_with(&format!("{t}$")) {
                continue;
            }
            if mergeable(model, cls, absorbed) {
                out.push(MergeCandidateLC {
                    absorber: cls.qualified_name.clone(),
                    absorbed: t.to_string(),
                    pattern: LcPattern::P2Usage,
                    field: Some(f.name.clone()),
                });
            }
        }
    }
    out
}

fn class_node<'t>(root: Node<'t>) -> Option<Node<'t>> {
    syntax::named_children(root).into_iter().find(|n| syntax::is_class_like(n.kind()))
}

/// Field and method declarations of a class (constructors, initializers
/// and nested types are not copied).
fn copyable_members<'t>(class: Node<'t>) -> Vec<Node<'t>> {
    class
        .child_by_field_name("body")
        .map(syntax::named_children)
        .unwrap_or_default()
        .into_iter()
        .filter(|n| matches!(n.kind(), "field_declaration" | "method_declaration"))
        .collect()
}

fn member_names_of(node: Node, src: &str) -> Vec<String> {
    match node.kind() {
        "method_declaration" => node.child_by_field_name("name").map(|n| vec![syntax::text(n, src).to_string()]).unwrap_or_default(),
        _ => syntax::named_children(node)
            .into_iter()
            .filter(|d| d.kind() == "variable_declarator")
            .filter_map(|d| d.child_by_field_name("name"))
            .map(|n| syntax::text(n, src).to_string())
            .collect(),
    }
}

/// Names declared in the method or lambda enclosing `n`.
fn enclosing_declared(n: Node, src: &str) -> BTreeSet<String> {
    let mut cur = n.parent();
    while let Some(c) = cur {
        if matches!(c.kind(), "method_declaration" | "constructor_declaration") {
            let mut names: BTreeSet<String> = BTreeSet::new();
            if let Some(b) = c.child_by_field_name("body") {
                names.extend(syntax::declared_locals(b, src).into_iter().map(|x| x.0));
            }
            if let Some(ps) = c.child_by_field_name("parameters") {
                names.extend(syntax::declared_locals(ps, src).into_iter().map(|x| x.0));
            }
            return names;
        }
        if c.kind() == "class_body" {
            break;
        }
        cur = c.parent();
    }
    BTreeSet::new()
}

/// True when `n` lies inside a class body nested in `outer_body`.
fn in_nested_class(n: Node, outer_body: Node) -> bool {
    let mut cur = n.parent();
    while let Some(c) = cur {
        if c.id() == outer_body.id() {
            return false;
        }
        if c.kind() == "class_body" || c.kind() == "enum_body" || c.kind() == "interface_body" {
            return true;
        }
        cur = c.parent();
    }
    false
}

fn member_ref_text(name: &str, n: Node, src: &str) -> String {
    if enclosing_declared(n, src).contains(name) {
        format!("this.{name}")
    } else {
        name.to_string()
    }
}

fn discard(c: &MergeCandidateLC, reason: impl Into<String>) -> Discard {
    Discard { smell: Smell::LargeClass, pattern: c.pattern.name().into(), entity: c.absorber.clone(), reason: reason.into() }
}

pub fn merge_classes(model: &ProjectModel, c: &MergeCandidateLC) -> Result<GeneratedSample, Discard> {
    let absorber = model.lookup_class(&c.absorber).expect("candidate absorber exists");
    let absorbed = model.lookup_class(&c.absorbed).expect("candidate absorbed exists");
    let fail = |r: &str| discard(c, r);

    // Absorbed members, verbatim.
    let ab_src = absorbed.source_text.as_str();
    let ab_tree = syntax::parse(ab_src);
    let ab_class = class_node(ab_tree.root_node()).ok_or_else(|| fail("absorbed class text does not parse"))?;
    let members = copyable_members(ab_class);
    if members.is_empty() {
        return Err(fail("absorbed class has no members to copy"));
    }
    if c.pattern == LcPattern::P2Usage {
        // `this` would now denote the absorber
        let mut bare_this = false;
        let mut stack = members.clone();
        while let Some(n) = stack.pop() {
            if n.kind() == "this" {
                let recv = n.parent().is_some_and(|p| {
                    matches!(p.kind(), "field_access" | "method_invocation")
                        && syntax::field_name_of(n) == Some("object")
                });
                bare_this |= !recv;
            }
            stack.extend(syntax::children(n));
        }
        if bare_this {
            return Err(fail("absorbed members use `this` as a value"));
        }
    }
    let mut extracted: Vec<String> = Vec::new();
    let mut member_texts: Vec<(String, String)> = Vec::new();
    for m in &members {
        for name in member_names_of(*m, ab_src) {
            if !extracted.contains(&name) {
                extracted.push(name);
            }
        }
        let (_, clean) = syntax::line_indent(ab_src, m.start_byte());
        if !clean {
            return Err(fail("absorbed member shares its line"));
        }
        let (indent, _) = syntax::line_indent(ab_src, m.start_byte());
        member_texts.push((syntax::text(*m, ab_src).to_string(), indent));
    }

    // Rewrite the absorber.
    let src = absorber.source_text.as_str();
    let tree = syntax::parse(src);
    let class = class_node(tree.root_node()).ok_or_else(|| fail("absorber text does not parse"))?;
    let body = class.child_by_field_name("body").ok_or_else(|| fail("absorber has no body"))?;
    let absorbed_names: BTreeSet<&str> = extracted.iter().map(String::as_str).collect();
    let absorbed_methods: BTreeSet<&str> = absorbed.methods.iter().map(|m| m.name.as_str()).collect();
    let mut edits: Vec<Edit> = Vec::new();
    let mut details = BTreeMap::new();

    match c.pattern {
        LcPattern::P1Inheritance => {
            let sc = class.child_by_field_name("superclass").ok_or_else(|| fail("absorber has no extends clause"))?;
            let grandparent = class_node(ab_tree.root_node())
                .and_then(|n| n.child_by_field_name("superclass"))
                .and_then(|s| syntax::named_children(s).into_iter().next())
                .map(|t| syntax::text(t, ab_src).to_string());
            match &grandparent {
                Some(gp) => edits.push(Edit::new(sc.start_byte(), sc.end_byte(), format!("extends {gp}"))),
                None => {
                    let start = src[..sc.start_byte()].trim_end().len();
                    edits.push(Edit::new(start, sc.end_byte(), ""));
                }
            }
            details.insert("new_superclass".into(), json!(grandparent));
            let mut stack = vec![body];
            while let Some(n) = stack.pop() {
                match n.kind() {
                    "field_access" => {
                        let obj = n.child_by_field_name("object");
                        let field = n.child_by_field_name("field");
                        if let (Some(o), Some(f)) = (obj, field) {
                            let name = syntax::text(f, src);
                            if o.kind() == "super" && absorbed_names.contains(name) {
                                edits.push(Edit::new(n.start_byte(), n.end_byte(), member_ref_text(name, n, src)));
                                continue;
                            }
                        }
                    }
                    "method_invocation" => {
                        let obj = n.child_by_field_name("object");
                        let name = n.child_by_field_name("name");
                        if let (Some(o), Some(nm)) = (obj, name) {
                            if o.kind() == "super" && absorbed_methods.contains(syntax::text(nm, src)) {
                                edits.push(Edit::new(o.start_byte(), nm.start_byte(), ""));
                            }
                        }
                    }
                    "explicit_constructor_invocation" => {
                        let is_super = n.child_by_field_name("constructor").is_some_and(|k| k.kind() == "super");
                        if is_super && !in_nested_class(n, body) {
                            let (ls, le) = text::line_extent(src, n.start_byte(), n.end_byte());
                            if src[ls..n.start_byte()].trim().is_empty() && src[n.end_byte()..le].trim().is_empty() {
                                edits.push(Edit::new(ls, le, ""));
                            } else {
                                edits.push(Edit::new(n.start_byte(), n.end_byte(), ""));
                            }
                            continue;
                        }
                    }
                    _ => {}
                }
                stack.extend(syntax::children(n));
            }
        }
        LcPattern::P2Usage => {
            let field = c.field.as_deref().ok_or_else(|| fail("usage merge without a field"))?;
            details.insert("removed_field".into(), json!(field));
            // the declaration
            let decl = syntax::named_children(body)
                .into_iter()
                .find(|d| d.kind() == "field_declaration" && member_names_of(*d, src) == [field])
                .ok_or_else(|| fail("field declaration not found"))?;
            let (ls, le) = text::line_extent(src, decl.start_byte(), decl.end_byte());
            if !src[ls..decl.start_byte()].trim().is_empty() || !src[decl.end_byte()..le].trim().is_empty() {
                return Err(fail("field declaration shares its line"));
            }
            edits.push(Edit::new(ls, le, ""));

            let mut refs: Vec<Node> = Vec::new();
            let mut stack = vec![body];
            while let Some(n) = stack.pop() {
                if n.id() == decl.id() {
                    continue;
                }
                let is_ref = match n.kind() {
                    "identifier" => {
                        syntax::text(n, src) == field
                            && syntax::ident_role(n) == IdentRole::Value
                            && !enclosing_declared(n, src).contains(field)
                    }
                    "field_access" => {
                        n.child_by_field_name("object").is_some_and(|o| o.kind() == "this")
                            && n.child_by_field_name("field").is_some_and(|f| syntax::text(f, src) == field)
                    }
                    _ => false,
                };
                if is_ref {
                    if in_nested_class(n, body) {
                        return Err(fail("field used inside a nested class"));
                    }
                    refs.push(n);
                    continue;
                }
                stack.extend(syntax::children(n));
            }
            for r in refs {
                let parent = r.parent().ok_or_else(|| fail("dangling field reference"))?;
                let role = syntax::field_name_of(r);
                match (parent.kind(), role) {
                    ("field_access", Some("object")) => {
                        let member = parent.child_by_field_name("field").map(|f| syntax::text(f, src)).unwrap_or("");
                        if !absorbed_names.contains(member) {
                            return Err(fail(&format!("access to {member} which is not copied")));
                        }
                        edits.push(Edit::new(parent.start_byte(), parent.end_byte(), member_ref_text(member, parent, src)));
                    }
                    ("method_invocation", Some("object")) => {
                        let name = parent.child_by_field_name("name").ok_or_else(|| fail("call without name"))?;
                        if !absorbed_methods.contains(syntax::text(name, src)) {
                            return Err(fail("call to a method that is not copied"));
                        }
                        edits.push(Edit::new(r.start_byte(), name.start_byte(), ""));
                    }
                    ("assignment_expression", Some("left"))
                        if parent.parent().is_some_and(|s| s.kind() == "expression_statement") =>
                    {
                        let stmt = parent.parent().expect("checked above");
                        if !stmt.parent().is_some_and(|b| syntax::BLOCK_LIKE.contains(&b.kind())) {
                            return Err(fail("field assignment outside a block"));
                        }
                        let (ls, le) = text::line_extent(src, stmt.start_byte(), stmt.end_byte());
                        if src[ls..stmt.start_byte()].trim().is_empty() && src[stmt.end_byte()..le].trim().is_empty() {
                            edits.push(Edit::new(ls, le, ""));
                        } else {
                            edits.push(Edit::new(stmt.start_byte(), stmt.end_byte(), ""));
                        }
                    }
                    _ => return Err(fail("field used as a value")),
                }
            }
        }
    }

    let rewritten = text::apply_edits(src, 0, src.len(), &edits).map_err(|e| fail(&e))?;
    let (class_indent, _) = syntax::line_indent(src, class.start_byte());
    let re_tree = syntax::parse(&rewritten);
    let open = class_node(re_tree.root_node())
        .and_then(|n| n.child_by_field_name("body"))
        .map(|b| b.start_byte())
        .ok_or_else(|| fail("rewritten absorber does not parse"))?;
    let indent = text::member_indent(&rewritten, open, &class_indent);
    let blocks: Vec<String> = member_texts
        .iter()
        .map(|(t, base)| text::reindent(t, base, &indent).join("\n"))
        .collect();
    let new_source = text::append_members(&rewritten, &blocks).ok_or_else(|| fail("absorber has no closing brace"))?;

    details.insert("absorber".into(), json!(c.absorber));
    details.insert("absorbed".into(), json!(c.absorbed));
    Ok(GeneratedSample {
        smell: Smell::LargeClass,
        pattern: c.pattern.name().into(),
        new_source,
        context_sources: BTreeMap::new(),
        ground_truth: RefactoringAction::extract_members(extracted),
        metrics: MetricVector::class(0, 0, 0),
        provenance: Provenance {
            project: model.project_id.clone(),
            entity: c.absorber.clone(),
            spans: vec![
                SourceSpan { file: absorber.file.clone(), start: absorber.span.start, end: absorber.span.end },
                SourceSpan { file: absorbed.file.clone(), start: absorbed.span.start, end: absorbed.span.end },
            ],
            pattern: Some(format!("LC.{}", c.pattern.name())),
            details,
            pipeline_version: PIPELINE_VERSION.into(),
            ..Default::default()
        },
    })
}
