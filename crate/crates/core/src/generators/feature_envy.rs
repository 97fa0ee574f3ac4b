//! Feature envy: move a method into a related class, routing its accesses
//! to the original owner through a new field or parameter.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use tree_sitter::Node;

use super::text::{self, Edit, ParsedMember};
use super::{method_key, Discard, GeneratedSample};
use crate::java::ingest::find_field_in_scope;
use crate::java::syntax::{self, IdentRole};
use crate::metrics::MetricVector;
use crate::model::*;
use crate::sample::{Provenance, RefactoringAction, Smell, SourceSpan, PIPELINE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FePattern {
    P1Parent,
    P2Property,
    P3Parameter,
}

impl FePattern {
    pub fn name(self) -> &'static str {
        match self {
            FePattern::P1Parent => "P1_PARENT",
            FePattern::P2Property => "P2_PROPERTY",
            FePattern::P3Parameter => "P3_PARAMETER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCandidateFE {
    pub source_class: String,
    pub method_index: usize,
    pub target_class: String,
    pub pattern: FePattern,
    /// Field (P2) or parameter (P3) through which the target is reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<String>,
    /// Every class the method could plausibly move to, plus its owner.
    pub candidate_targets: Vec<String>,
}

fn movable_target(model: &ProjectModel, source: &ClassEntity, t: &str) -> bool {
    let Some(tc) = model.lookup_class(t) else { return false };
    tc.kind == ClassKind::Class
        && !tc.is_generic
        && t != source.qualified_name
        && !model.lineage(source).contains(t)
        && !t.starts_with(&format!("{}$", source.qualified_name))
        && !source.qualified_name.starts_with(&format!("{t}$"))
}

fn uses_bare_this(m: &MethodEntity) -> bool {
    let pm = ParsedMember::new(&m.source_text);
    let mut found = false;
    let mut stack = vec![pm.tree.root_node()];
    while let Some(n) = stack.pop() {
        if n.kind() == "this" {
            let recv = n.parent().is_some_and(|p| {
                matches!(p.kind(), "field_access" | "method_invocation") && syntax::field_name_of(n) == Some("object")
            });
            found |= !recv;
        }
        stack.extend(syntax::children(n));
    }
    found
}

/// Own-class methods whose name+arity no internal ancestor declares.
fn unique_methods(model: &ProjectModel, cls: &ClassEntity) -> BTreeSet<(String, usize)> {
    let inherited: BTreeSet<(String, usize)> = model
        .ancestors(cls)
        .unwrap_or_default()
        .into_iter()
        .flat_map(|a| a.methods.iter().map(|m| (m.name.clone(), m.arity())))
        .collect();
    cls.methods
        .iter()
        .filter(|m| !m.is_constructor)
        .map(|m| (m.name.clone(), m.arity()))
        .filter(|k| !inherited.contains(k))
        .collect()
}

fn p1_eligible(model: &ProjectModel, cls: &ClassEntity, m: &MethodEntity) -> bool {
    let Ok(unique_fields) = model.unique_fields_of(cls) else { return false };
    let unique_methods = unique_methods(model, cls);
    let lineage = model.lineage(cls);
    for r in &m.member_refs {
        let own = matches!(r.receiver, Receiver::Implicit | Receiver::This | Receiver::ThisField(_));
        if !own {
            continue;
        }
        let name = match &r.receiver {
            Receiver::ThisField(f) => f.as_str(),
            _ => r.name.as_str(),
        };
        match r.kind {
            RefKind::Read | RefKind::Write => {
                if unique_fields.contains(name) {
                    return false;
                }
                // fields reached through an enclosing class stay behind
                if let Some(f) = find_field_in_scope(model, cls, name) {
                    if !lineage.contains(&f.owner) {
                        return false;
                    }
                }
            }
            RefKind::Call => {
                if unique_methods.contains(&(r.name.clone(), r.arity)) {
                    return false;
                }
            }
        }
    }
    !uses_bare_this(m)
}

pub fn find_move_candidates_feature_envy(model: &ProjectModel) -> Vec<MoveCandidateFE> {
    let mut out = Vec::new();
    for cls in &model.classes {
        if cls.kind != ClassKind::Class || cls.is_generic {
            continue;
        }
        let lineage = model.lineage(cls);
        for (mi, m) in cls.methods.iter().enumerate() {
            if m.is_constructor || !m.has_body() || m.uses_super {
                continue;
            }
            let mut found: Vec<(FePattern, String, Option<String>)> = Vec::new();
            if let Some(parent) = cls.superclass.as_ref().and_then(|s| s.internal()) {
                if model.lookup_class(parent).is_some_and(|p| p.kind == ClassKind::Class && !p.is_generic)
                    && p1_eligible(model, cls, m)
                {
                    found.push((FePattern::P1Parent, parent.to_string(), None));
                }
            }
            if !m.is_static {
                let mut fields: Vec<&str> = Vec::new();
                for r in &m.member_refs {
                    let name = match (&r.receiver, r.kind) {
                        (Receiver::Implicit | Receiver::This, RefKind::Read | RefKind::Write) => r.name.as_str(),
                        _ => continue,
                    };
                    if !fields.contains(&name) {
                        fields.push(name);
                    }
                }
                for f in fields {
                    let Some(fe) = cls.field(f) else { continue };
                    if fe.is_static {
                        continue;
                    }
                    if let Some(t) = fe.declared_type.internal() {
                        if movable_target(model, cls, t) {
                            found.push((FePattern::P2Property, t.to_string(), Some(f.to_string())));
                        }
                    }
                }
                for p in &m.parameters {
                    if let Some(t) = p.ty.internal() {
                        if movable_target(model, cls, t) {
                            found.push((FePattern::P3Parameter, t.to_string(), Some(p.name.clone())));
                        }
                    }
                }
            }
            if found.is_empty() {
                continue;
            }
            let mut targets: BTreeSet<String> = found.iter().map(|f| f.1.clone()).collect();
            targets.insert(cls.qualified_name.clone());
            targets.extend(
                m.field_accesses
                    .iter()
                    .filter_map(|s| s.target_class.internal())
                    .filter(|t| !lineage.contains(*t))
                    .map(str::to_string),
            );
            let targets: Vec<String> = targets.into_iter().collect();
            for (pattern, target, via) in found {
                out.push(MoveCandidateFE {
                    source_class: cls.qualified_name.clone(),
                    method_index: mi,
                    target_class: target,
                    pattern,
                    via,
                    candidate_targets: targets.clone(),
                });
            }
        }
    }
    out
}

/// How a class is spelled from another class in the same project.
fn type_spelling(cls: &ClassEntity) -> String {
    let pkg = cls.package();
    let local = if pkg.is_empty() { cls.qualified_name.as_str() } else { &cls.qualified_name[pkg.len() + 1..] };
    local.replace('$', ".")
}

struct Rewriter<'a> {
    model: &'a ProjectModel,
    source: &'a ClassEntity,
    src: &'a str,
    locals: BTreeSet<String>,
    via: Option<&'a str>,
    via_is_param: bool,
    source_ref: String,
    source_type: String,
    edits: Vec<Edit>,
}

impl<'a> Rewriter<'a> {
    fn member_text(&self, name: &str) -> String {
        if self.locals.contains(name) {
            format!("this.{name}")
        } else {
            name.to_string()
        }
    }

    fn routed(&self, name: &str, is_static: bool) -> String {
        if is_static {
            format!("{}.{name}", self.source_type)
        } else {
            format!("{}.{name}", self.source_ref)
        }
    }

    /// A reference to the via field/parameter: `node` is either the bare
    /// identifier or `this.via`.
    fn via_ref(&mut self, node: Node) -> Result<(), String> {
        let parent = node.parent().ok_or("dangling reference")?;
        let role = syntax::field_name_of(node);
        match (parent.kind(), role) {
            ("field_access", Some("object")) => {
                let f = parent.child_by_field_name("field").ok_or("field access without a field")?;
                let name = syntax::text(f, self.src);
                let text = self.member_text(name);
                self.edits.push(Edit::new(parent.start_byte(), parent.end_byte(), text));
            }
            ("method_invocation", Some("object")) => {
                let name = parent.child_by_field_name("name").ok_or("call without a name")?;
                self.edits.push(Edit::new(node.start_byte(), name.start_byte(), ""));
            }
            _ if syntax::is_write_target(node) => return Err("the target reference is reassigned".into()),
            _ => self.edits.push(Edit::new(node.start_byte(), node.end_byte(), "this")),
        }
        Ok(())
    }

    fn visit(&mut self, n: Node) -> Result<(), String> {
        match n.kind() {
            "class_body" => return Err("moved method declares an anonymous class".into()),
            "identifier" if syntax::ident_role(n) == IdentRole::Value => {
                let name = syntax::text(n, self.src);
                if Some(name) == self.via && (self.via_is_param || !self.locals.contains(name)) {
                    return self.via_ref(n);
                }
                if self.locals.contains(name) {
                    return Ok(());
                }
                if let Some(f) = find_field_in_scope(self.model, self.source, name) {
                    if !self.model.lineage(self.source).contains(&f.owner) {
                        return Err(format!("{name} belongs to an enclosing class"));
                    }
                    let t = self.routed(name, f.is_static);
                    self.edits.push(Edit::new(n.start_byte(), n.end_byte(), t));
                }
                return Ok(());
            }
            "field_access" => {
                let obj = n.child_by_field_name("object");
                let field = n.child_by_field_name("field");
                if let (Some(o), Some(f)) = (obj, field) {
                    if o.kind() == "this" {
                        let name = syntax::text(f, self.src);
                        if Some(name) == self.via && !self.via_is_param {
                            return self.via_ref(n);
                        }
                        let is_static = self.model.find_field(self.source, name).is_some_and(|x| x.is_static);
                        let t = if is_static { self.source_type.clone() } else { self.source_ref.clone() };
                        self.edits.push(Edit::new(o.start_byte(), o.end_byte(), t));
                        return Ok(());
                    }
                }
            }
            "method_invocation" => {
                let obj = n.child_by_field_name("object");
                let name = n.child_by_field_name("name");
                let arity = syntax::argument_nodes(n).len();
                match (obj, name) {
                    (None, Some(nm)) => {
                        let mname = syntax::text(nm, self.src);
                        if let Some(target) = self.model.find_method(self.source, mname, arity) {
                            let prefix = if target.is_static { &self.source_type } else { &self.source_ref };
                            self.edits.push(Edit::new(nm.start_byte(), nm.start_byte(), format!("{prefix}.")));
                        } else if crate::java::ingest::find_method_in_scope(self.model, self.source, mname, arity).is_some() {
                            return Err(format!("{mname} belongs to an enclosing class"));
                        }
                    }
                    (Some(o), Some(_)) if o.kind() == "this" => {
                        self.edits.push(Edit::new(o.start_byte(), o.end_byte(), self.source_ref.clone()));
                        if let Some(args) = n.child_by_field_name("arguments") {
                            return self.visit(args);
                        }
                        return Ok(());
                    }
                    _ => {}
                }
            }
            "this" => {
                self.edits.push(Edit::new(n.start_byte(), n.end_byte(), self.source_ref.clone()));
                return Ok(());
            }
            _ => {}
        }
        for ch in syntax::children(n) {
            self.visit(ch)?;
        }
        Ok(())
    }
}

fn discard(c: &MoveCandidateFE, entity: String, reason: impl Into<String>) -> Discard {
    Discard { smell: Smell::FeatureEnvy, pattern: c.pattern.name().into(), entity, reason: reason.into() }
}

pub fn move_method(model: &ProjectModel, c: &MoveCandidateFE) -> Result<GeneratedSample, Discard> {
    let source = model.lookup_class(&c.source_class).expect("candidate source exists");
    let target = model.lookup_class(&c.target_class).expect("candidate target exists");
    let m = &source.methods[c.method_index];
    let entity = method_key(&source.qualified_name, &m.name, m.arity());
    let fail = |r: &str| discard(c, entity.clone(), r);

    if target.methods.iter().any(|t| !t.is_constructor && t.name == m.name && t.arity() == m.arity()) {
        return Err(fail("target already declares a method with that signature"));
    }

    let pm = ParsedMember::new(&m.source_text);
    let src = pm.source.as_str();
    let method = pm.method().ok_or_else(|| fail("method does not re-parse"))?;
    let body = method.child_by_field_name("body").ok_or_else(|| fail("method has no body"))?;

    let target_members: BTreeSet<String> = target.member_names().into_iter().map(str::to_string).collect();
    let mut taken = text::identifiers(&m.source_text);
    taken.extend(target_members.iter().cloned());
    let base = text::lower_camel(&source.simple_name);
    let source_ref = if taken.contains(&base) { text::fresh_name(&base, "", &taken) } else { base };
    let source_type = type_spelling(source);

    let mut edits = Vec::new();
    let mut details = BTreeMap::new();
    if c.pattern != FePattern::P1Parent {
        let params = method.child_by_field_name("parameters").ok_or_else(|| fail("no parameter list"))?;
        let mut locals: BTreeSet<String> = syntax::declared_locals(body, src).into_iter().map(|x| x.0).collect();
        locals.extend(m.parameters.iter().map(|p| p.name.clone()));
        let via_is_param = c.pattern == FePattern::P3Parameter;
        if via_is_param {
            let via = c.via.as_deref().unwrap_or("");
            let decl = syntax::named_children(params)
                .into_iter()
                .find(|p| p.child_by_field_name("name").is_some_and(|n| syntax::text(n, src) == via))
                .ok_or_else(|| fail("parameter not found"))?;
            edits.push(Edit::new(decl.start_byte(), decl.end_byte(), format!("{source_type} {source_ref}")));
            locals.remove(via);
        }
        let mut rw = Rewriter {
            model,
            source,
            src,
            locals,
            via: c.via.as_deref(),
            via_is_param,
            source_ref: source_ref.clone(),
            source_type: source_type.clone(),
            edits: Vec::new(),
        };
        rw.visit(body).map_err(|e| fail(&e))?;
        edits.extend(rw.edits);
        details.insert("source_ref".into(), json!(source_ref));
        details.insert("via".into(), json!(c.via));
    }

    let from = pm.offset;
    let moved = text::apply_edits(src, from, from + m.source_text.len(), &edits).map_err(|e| fail(&e))?;
    let (m_indent, _) = syntax::line_indent(&m.source_text, m.source_text.len() - m.source_text.trim_start().len());

    // Target class with the method (and, for P2, the back-reference field).
    let t_src = target.source_text.as_str();
    let t_tree = syntax::parse(t_src);
    let t_class = syntax::named_children(t_tree.root_node())
        .into_iter()
        .find(|n| syntax::is_class_like(n.kind()))
        .ok_or_else(|| fail("target does not parse"))?;
    let t_body = t_class.child_by_field_name("body").ok_or_else(|| fail("target has no body"))?;
    let (t_indent, _) = syntax::line_indent(t_src, t_class.start_byte());
    let indent = text::member_indent(t_src, t_body.start_byte(), &t_indent);
    let mut t_text = t_src.to_string();
    if c.pattern == FePattern::P2Property {
        let at = t_body.start_byte() + 1;
        t_text.insert_str(at, &format!("\n{indent}private {source_type} {source_ref};"));
    }
    let moved_lines = text::reindent(moved.trim_start(), &m_indent, &indent);
    let new_source = moved_lines.join("\n");
    let t_text = text::append_members(&t_text, std::slice::from_ref(&new_source)).ok_or_else(|| fail("target has no closing brace"))?;

    // Source class without the method.
    let s_src = source.source_text.as_str();
    let start = m.text_offset - source.text_offset;
    let (ls, le) = text::line_extent(s_src, start, start + m.source_text.len());
    let source_without = format!("{}{}", &s_src[..ls], &s_src[le..]);

    let mut context = BTreeMap::new();
    context.insert("target_class".to_string(), t_text);
    context.insert("source_class".to_string(), source_without);

    details.insert("method".into(), json!(m.name));
    details.insert("arity".into(), json!(m.arity()));
    details.insert("original_owner".into(), json!(source.qualified_name));
    details.insert("generation_target".into(), json!(target.qualified_name));
    details.insert("candidate_targets".into(), json!(c.candidate_targets));
    Ok(GeneratedSample {
        smell: Smell::FeatureEnvy,
        pattern: c.pattern.name().into(),
        new_source,
        context_sources: context,
        ground_truth: RefactoringAction::move_method(source.qualified_name.clone()),
        metrics: MetricVector::method(0, 0),
        provenance: Provenance {
            project: model.project_id.clone(),
            entity,
            spans: vec![
                SourceSpan { file: source.file.clone(), start: m.span.start, end: m.span.end },
                SourceSpan { file: target.file.clone(), start: target.span.start, end: target.span.end },
            ],
            pattern: Some(format!("FE.{}", c.pattern.name())),
            details,
            pipeline_version: PIPELINE_VERSION.into(),
            ..Default::default()
        },
    })
}
