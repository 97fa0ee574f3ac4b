//! Java source ingestion: parse files into class entities, then resolve
//! inheritance, invocations and member accesses against the project.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};
use tree_sitter::Node;

use super::syntax::{self, text};
use crate::error::IngestError;
use crate::model::*;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub project_id: String,
    pub root_dirs: Vec<PathBuf>,
    #[serde(default)]
    pub exclude_globs: Vec<String>,
    pub role: Split,
}

#[derive(Debug, Clone)]
pub struct ParsedFile {
    pub path: String,
    pub context: FileContext,
    pub classes: Vec<ClassEntity>,
}

/// Parses one compilation unit. Sites come back unresolved: every type is
/// `External` and every callee is `External` until `resolve` runs.
pub fn parse_file(source: &str, path: &str) -> Result<ParsedFile, IngestError> {
    let tree = syntax::parse(source);
    if let Some((line, column)) = syntax::first_error(&tree) {
        return Err(IngestError::Syntax { path: path.to_string(), line, column });
    }
    let root = tree.root_node();
    let context = file_context(root, source);
    let mut classes = Vec::new();
    for n in syntax::named_children(root) {
        if syntax::is_class_like(n.kind()) {
            let mut cx = ClassCollector { src: source, file: path, package: &context.package, out: &mut classes };
            cx.class_decl(n, None);
        }
    }
    classes.sort_by_key(|c| c.text_offset);
    Ok(ParsedFile { path: path.to_string(), context, classes })
}

fn file_context(root: Node, src: &str) -> FileContext {
    let mut ctx = FileContext::default();
    for n in syntax::named_children(root) {
        match n.kind() {
            "package_declaration" => {
                if let Some(id) = syntax::named_children(n)
                    .into_iter()
                    .find(|c| matches!(c.kind(), "identifier" | "scoped_identifier"))
                {
                    ctx.package = text(id, src).to_string();
                }
            }
            "import_declaration" => {
                let raw = text(n, src);
                let is_static = syntax::children(n).iter().any(|c| c.kind() == "static");
                let wildcard = syntax::children(n).iter().any(|c| c.kind() == "asterisk");
                let Some(path) = syntax::named_children(n)
                    .into_iter()
                    .find(|c| matches!(c.kind(), "identifier" | "scoped_identifier"))
                    .map(|c| text(c, src).to_string())
                else {
                    debug!("odd import {raw}");
                    continue;
                };
                let simple = path.rsplit('.').next().unwrap_or(&path).to_string();
                match (is_static, wildcard) {
                    (true, false) => ctx.static_imports.push(simple),
                    (true, true) => {}
                    (false, true) => ctx.wildcard_imports.push(path),
                    (false, false) => {
                        ctx.imports.insert(simple, path);
                    }
                }
            }
            _ => {}
        }
    }
    ctx
}

struct ClassCollector<'a> {
    src: &'a str,
    file: &'a str,
    package: &'a str,
    out: &'a mut Vec<ClassEntity>,
}

/// Source text of `node` widened to the start of its line when only
/// whitespace precedes it.
fn entity_text(node: Node, src: &str) -> (String, usize) {
    let start = node.start_byte();
    let (_, clean) = syntax::line_indent(src, start);
    let from = if clean { src[..start].rfind('\n').map(|i| i + 1).unwrap_or(0) } else { start };
    (src[from..node.end_byte()].to_string(), from)
}

fn span_of(node: Node) -> Span {
    Span::new(node.start_position().row + 1, node.end_position().row + 1)
}

fn has_modifier(node: Node, src: &str, m: &str) -> bool {
    syntax::named_children(node)
        .into_iter()
        .find(|c| c.kind() == "modifiers")
        .is_some_and(|mods| syntax::children(mods).iter().any(|c| text(*c, src) == m))
}

impl<'a> ClassCollector<'a> {
    fn qualify(&self, outer: Option<&str>, name: &str) -> String {
        match outer {
            Some(o) => format!("{o}${name}"),
            None if self.package.is_empty() => name.to_string(),
            None => format!("{}.{}", self.package, name),
        }
    }

    fn class_decl(&mut self, node: Node, outer: Option<&str>) {
        let name = node.child_by_field_name("name").map(|n| text(n, self.src)).unwrap_or("?");
        let qn = self.qualify(outer, name);
        let kind = match node.kind() {
            "interface_declaration" => ClassKind::Interface,
            "enum_declaration" => ClassKind::Enum,
            "record_declaration" => ClassKind::Record,
            "annotation_type_declaration" => ClassKind::Annotation,
            _ => ClassKind::Class,
        };
        let superclass = node.child_by_field_name("superclass").and_then(|s| {
            syntax::named_children(s)
                .into_iter()
                .next()
                .map(|t| TypeRef::External(text(t, self.src).to_string()))
        });
        let (source_text, text_offset) = entity_text(node, self.src);
        let mut entity = ClassEntity {
            qualified_name: qn.clone(),
            simple_name: name.to_string(),
            kind,
            file: self.file.to_string(),
            span: span_of(node),
            superclass,
            outer: outer.map(str::to_string),
            is_abstract: kind == ClassKind::Interface || has_modifier(node, self.src, "abstract"),
            is_generic: node.child_by_field_name("type_parameters").is_some(),
            fields: vec![],
            methods: vec![],
            source_text,
            text_offset,
        };
        if kind == ClassKind::Record {
            if let Some(params) = node.child_by_field_name("parameters") {
                for p in syntax::named_children(params) {
                    if p.kind() != "formal_parameter" {
                        continue;
                    }
                    let (Some(n), Some(t)) = (p.child_by_field_name("name"), p.child_by_field_name("type")) else {
                        continue;
                    };
                    entity.fields.push(FieldEntity {
                        name: text(n, self.src).to_string(),
                        type_text: text(t, self.src).to_string(),
                        declared_type: TypeRef::External(text(t, self.src).to_string()),
                        owner: qn.clone(),
                        is_static: false,
                        shared_declaration: false,
                        line: p.start_position().row + 1,
                    });
                }
            }
        }
        let slot = self.out.len();
        self.out.push(entity);
        let mut counter = 0usize;
        if let Some(body) = node.child_by_field_name("body") {
            self.members(body, slot, &qn, &mut counter);
        }
    }

    fn members(&mut self, body: Node, slot: usize, qn: &str, counter: &mut usize) {
        for m in syntax::named_children(body) {
            match m.kind() {
                "enum_body_declarations" => self.members(m, slot, qn, counter),
                "enum_constant" => {
                    if let Some(cb) = m.child_by_field_name("body") {
                        self.local_class(cb, qn, None, counter);
                    }
                }
                "field_declaration" | "constant_declaration" => {
                    let ty = m.child_by_field_name("type").map(|t| text(t, self.src)).unwrap_or("");
                    let is_static = has_modifier(m, self.src, "static") || self.out[slot].kind == ClassKind::Interface;
                    let declarators: Vec<_> = syntax::named_children(m)
                        .into_iter()
                        .filter(|d| d.kind() == "variable_declarator")
                        .collect();
                    let shared = declarators.len() > 1;
                    for d in &declarators {
                        let Some(n) = d.child_by_field_name("name") else { continue };
                        let mut type_text = ty.to_string();
                        if let Some(dims) = d.child_by_field_name("dimensions") {
                            type_text.push_str(text(dims, self.src));
                        }
                        self.out[slot].fields.push(FieldEntity {
                            name: text(n, self.src).to_string(),
                            declared_type: TypeRef::External(type_text.clone()),
                            type_text,
                            owner: qn.to_string(),
                            is_static,
                            shared_declaration: shared,
                            line: d.start_position().row + 1,
                        });
                    }
                    self.anonymous_in(m, qn, counter);
                }
                "method_declaration" | "constructor_declaration" | "compact_constructor_declaration" => {
                    let method = self.method(m, qn);
                    self.out[slot].methods.push(method);
                    if let Some(b) = m.child_by_field_name("body") {
                        self.anonymous_in(b, qn, counter);
                    }
                }
                "static_initializer" | "block" => self.anonymous_in(m, qn, counter),
                k if syntax::is_class_like(k) => self.class_decl(m, Some(qn)),
                _ => {}
            }
        }
    }

    /// Indexes anonymous and local classes found under `node`.
    fn anonymous_in(&mut self, node: Node, owner: &str, counter: &mut usize) {
        let mut stack = syntax::named_children(node);
        stack.reverse();
        while let Some(n) = stack.pop() {
            if n.kind() == "class_body" {
                self.local_class(n, owner, None, counter);
                continue;
            }
            if syntax::is_class_like(n.kind()) {
                let name = n.child_by_field_name("name").map(|x| text(x, self.src).to_string());
                *counter += 1;
                let qn = format!("{owner}${}{}", counter, name.clone().unwrap_or_default());
                let before = self.out.len();
                self.class_decl(n, Some(owner));
                // class_decl names it Outer$Name; rename to the local form.
                let old = self.out[before].qualified_name.clone();
                rename_class_tree(&mut self.out[before..], &old, &qn);
                self.out[before].kind = ClassKind::Local;
                continue;
            }
            let mut kids = syntax::named_children(n);
            kids.reverse();
            stack.extend(kids);
        }
    }

    fn local_class(&mut self, class_body: Node, owner: &str, name: Option<&str>, counter: &mut usize) {
        *counter += 1;
        let qn = format!("{owner}${}{}", counter, name.unwrap_or(""));
        let (source_text, text_offset) = entity_text(class_body, self.src);
        let slot = self.out.len();
        self.out.push(ClassEntity {
            qualified_name: qn.clone(),
            simple_name: format!("{}", counter),
            kind: ClassKind::Local,
            file: self.file.to_string(),
            span: span_of(class_body),
            superclass: None,
            outer: Some(owner.to_string()),
            is_abstract: false,
            is_generic: false,
            fields: vec![],
            methods: vec![],
            source_text,
            text_offset,
        });
        let mut inner = 0usize;
        self.members(class_body, slot, &qn, &mut inner);
    }

    fn method(&mut self, node: Node, owner: &str) -> MethodEntity {
        let src = self.src;
        let is_constructor = node.kind() != "method_declaration";
        let name = node.child_by_field_name("name").map(|n| text(n, src)).unwrap_or("?").to_string();
        let mut parameters = Vec::new();
        let mut is_varargs = false;
        if let Some(ps) = node.child_by_field_name("parameters") {
            for p in syntax::named_children(ps) {
                match p.kind() {
                    "formal_parameter" => {
                        let pname = p.child_by_field_name("name").map(|n| text(n, src)).unwrap_or("");
                        let mut ty = p.child_by_field_name("type").map(|n| text(n, src)).unwrap_or("").to_string();
                        if let Some(d) = p.child_by_field_name("dimensions") {
                            ty.push_str(text(d, src));
                        }
                        parameters.push(Parameter {
                            name: pname.to_string(),
                            ty: TypeRef::External(ty.clone()),
                            type_text: ty,
                        });
                    }
                    "spread_parameter" => {
                        is_varargs = true;
                        let ty = syntax::named_children(p)
                            .into_iter()
                            .find(|c| c.kind() != "variable_declarator" && c.kind() != "modifiers")
                            .map(|c| format!("{}...", text(c, src)))
                            .unwrap_or_default();
                        let pname = syntax::named_children(p)
                            .into_iter()
                            .find(|c| c.kind() == "variable_declarator")
                            .and_then(|d| d.child_by_field_name("name"))
                            .map(|n| text(n, src))
                            .unwrap_or("");
                        parameters.push(Parameter {
                            name: pname.to_string(),
                            ty: TypeRef::External(ty.clone()),
                            type_text: ty,
                        });
                    }
                    _ => {}
                }
            }
        }
        let return_type = node
            .child_by_field_name("type")
            .map(|t| text(t, src).to_string())
            .unwrap_or_default();
        let (source_text, text_offset) = entity_text(node, src);
        let body = node.child_by_field_name("body");
        let mut m = MethodEntity {
            name,
            owner: owner.to_string(),
            parameters,
            return_type,
            span: span_of(node),
            is_constructor,
            is_static: has_modifier(node, src, "static"),
            is_abstract: body.is_none(),
            is_generic: node.child_by_field_name("type_parameters").is_some(),
            is_varargs,
            body_statements: vec![],
            invocations: vec![],
            field_accesses: vec![],
            member_refs: vec![],
            locals: vec![],
            max_nesting: 0,
            return_count: 0,
            trailing_return: false,
            uses_super: false,
            source_text,
            text_offset,
        };
        if let Some(body) = body {
            analyze_body(&mut m, body, src);
        }
        m
    }
}

fn rename_class_tree(classes: &mut [ClassEntity], old: &str, new: &str) {
    let fix = |s: &str| -> String {
        if s == old {
            new.to_string()
        } else if let Some(rest) = s.strip_prefix(&format!("{old}$")) {
            format!("{new}${rest}")
        } else {
            s.to_string()
        }
    };
    for c in classes {
        c.qualified_name = fix(&c.qualified_name);
        c.outer = c.outer.as_deref().map(fix);
        for f in &mut c.fields {
            f.owner = fix(&f.owner);
        }
        for m in &mut c.methods {
            m.owner = fix(&m.owner);
        }
    }
}

/// Fills statements, sites, locals and shape facts of a method from its body.
fn analyze_body(m: &mut MethodEntity, body: Node, src: &str) {
    let base = m.text_offset;
    let rel = |n: Node| ByteRange::new(n.start_byte() - base, n.end_byte() - base);

    for top in syntax::named_children(body) {
        if syntax::is_comment(top) {
            continue;
        }
        m.body_statements.push(Statement { kind: top.kind().into(), span: span_of(top), depth: 0, range: rel(top) });
        for inner in syntax::nested_statements(top) {
            m.body_statements.push(Statement {
                kind: inner.kind().into(),
                span: span_of(inner),
                depth: 1,
                range: rel(inner),
            });
        }
    }
    m.trailing_return = m.body_statements.iter().rfind(|s| s.depth == 0).map(|s| s.kind.as_str())
        == Some("return_statement");

    m.locals = syntax::declared_locals(body, src)
        .into_iter()
        .map(|(name, type_text)| LocalVar { name, type_text })
        .collect();
    let declared: BTreeSet<String> = m
        .parameters
        .iter()
        .map(|p| p.name.clone())
        .chain(m.locals.iter().map(|l| l.name.clone()))
        .collect();

    let statements = m.body_statements.clone();
    let stmt_index = |r: ByteRange| -> usize {
        let mut best: Option<(usize, u8)> = None;
        for (i, s) in statements.iter().enumerate() {
            if s.range.contains(&r) && best.is_none_or(|(_, d)| s.depth >= d) {
                best = Some((i, s.depth));
            }
        }
        best.map(|b| b.0).unwrap_or(0)
    };

    let mut invocations = Vec::new();
    let mut refs = Vec::new();
    let mut returns = 0usize;
    let mut uses_super = false;
    walk_body(body, &mut |n| {
        match n.kind() {
            "return_statement" => returns += 1,
            "super" => {
                if n.parent().is_some_and(|p| p.kind() != "explicit_constructor_invocation") {
                    uses_super = true;
                }
            }
            "method_invocation" => {
                let name = n.child_by_field_name("name").map(|x| text(x, src)).unwrap_or("").to_string();
                let receiver = receiver_of(n.child_by_field_name("object"), src);
                let args = syntax::argument_nodes(n);
                let r = rel(n);
                let (host, blocker, _) = host_statement(n);
                let line = n.start_position().row + 1;
                refs.push(MemberRef {
                    statement_index: stmt_index(r),
                    receiver: receiver.clone(),
                    name: name.clone(),
                    kind: RefKind::Call,
                    arity: args.len(),
                    line,
                });
                invocations.push(InvocationSite {
                    statement_index: stmt_index(r),
                    name,
                    receiver,
                    callee: Callee::External,
                    pattern: classify_pattern(n, src),
                    argument_texts: args.iter().map(|a| text(*a, src).to_string()).collect(),
                    line,
                    call_range: r,
                    host_range: host.map(rel).unwrap_or(r),
                    host_kind: host.map(|h| h.kind().to_string()).unwrap_or_default(),
                    inline_blocker: blocker,
                });
            }
            "field_access" => {
                let Some(field) = n.child_by_field_name("field") else { return };
                if field.kind() != "identifier" {
                    return;
                }
                let receiver = receiver_of(n.child_by_field_name("object"), src);
                // `this.x.y`: the inner `this.x` is recorded on its own visit.
                let r = rel(n);
                refs.push(MemberRef {
                    statement_index: stmt_index(r),
                    receiver,
                    name: text(field, src).to_string(),
                    kind: if syntax::is_write_target(n) { RefKind::Write } else { RefKind::Read },
                    arity: 0,
                    line: n.start_position().row + 1,
                });
            }
            "identifier" => {
                if syntax::ident_role(n) != syntax::IdentRole::Value {
                    return;
                }
                let name = text(n, src);
                if declared.contains(name) {
                    return;
                }
                let r = rel(n);
                refs.push(MemberRef {
                    statement_index: stmt_index(r),
                    receiver: Receiver::Implicit,
                    name: name.to_string(),
                    kind: if syntax::is_write_target(n) { RefKind::Write } else { RefKind::Read },
                    arity: 0,
                    line: n.start_position().row + 1,
                });
            }
            _ => {}
        }
    });
    m.invocations = invocations;
    m.member_refs = refs;
    m.return_count = returns;
    m.uses_super = uses_super;
    m.max_nesting = nesting_depth(body);
}

/// Pre-order walk that skips class bodies and lambda bodies' returns are
/// still visited (returns inside lambdas are excluded by `walk_body`).
fn walk_body<'t>(body: Node<'t>, f: &mut dyn FnMut(Node<'t>)) {
    let mut stack = vec![(body, false)];
    while let Some((n, in_lambda)) = stack.pop() {
        if !(in_lambda && n.kind() == "return_statement") {
            f(n);
        }
        let lam = in_lambda || n.kind() == "lambda_expression";
        let mut kids: Vec<_> = syntax::children(n)
            .into_iter()
            .filter(|k| !(k.kind() == "class_body" || syntax::is_class_like(k.kind())))
            .map(|k| (k, lam))
            .collect();
        kids.reverse();
        stack.extend(kids);
    }
}

pub(crate) fn receiver_of(object: Option<Node>, src: &str) -> Receiver {
    let Some(o) = object else { return Receiver::Implicit };
    match o.kind() {
        "this" => Receiver::This,
        "super" => Receiver::Super,
        "identifier" => Receiver::Name(text(o, src).to_string()),
        "field_access" => {
            let obj = o.child_by_field_name("object");
            let field = o.child_by_field_name("field");
            match (obj, field) {
                (Some(ob), Some(fi)) if ob.kind() == "this" && fi.kind() == "identifier" => {
                    Receiver::ThisField(text(fi, src).to_string())
                }
                _ => name_chain(o, src).map(Receiver::Chain).unwrap_or(Receiver::Other),
            }
        }
        _ => Receiver::Other,
    }
}

/// `a.b.c` or `this.a.b` as its segments; None for anything else.
fn name_chain(n: Node, src: &str) -> Option<Vec<String>> {
    match n.kind() {
        "identifier" | "this" => Some(vec![text(n, src).to_string()]),
        "field_access" => {
            let mut v = name_chain(n.child_by_field_name("object")?, src)?;
            let f = n.child_by_field_name("field")?;
            (f.kind() == "identifier").then_some(())?;
            v.push(text(f, src).to_string());
            Some(v)
        }
        _ => None,
    }
}

pub(crate) fn classify_pattern(call: Node, src: &str) -> InvocationPattern {
    let Some(parent) = call.parent() else { return InvocationPattern::ExpressionCall };
    match parent.kind() {
        "expression_statement" => InvocationPattern::StatementCall,
        "variable_declarator" if syntax::field_name_of(call) == Some("value") => InvocationPattern::AssignedReturn,
        "assignment_expression" if syntax::field_name_of(call) == Some("right") => {
            let op = parent.child_by_field_name("operator").map(|o| text(o, src)).unwrap_or("");
            if op == "=" {
                InvocationPattern::AssignedReturn
            } else {
                InvocationPattern::ExpressionCall
            }
        }
        _ => InvocationPattern::ExpressionCall,
    }
}

/// Nearest enclosing statement of `node`, a reason why inlining before it
/// would be unsafe, and whether the statement must be wrapped in braces to
/// receive extra statements.
pub(crate) fn host_statement(node: Node) -> (Option<Node>, Option<String>, bool) {
    let mut blocker: Option<String> = None;
    let mut prev = node;
    let mut cur = node.parent();
    while let Some(a) = cur {
        if syntax::is_statement(a) {
            break;
        }
        let field = syntax::field_name_of(prev);
        match a.kind() {
            "lambda_expression" => blocker = blocker.or(Some("inside lambda".into())),
            "class_body" => blocker = blocker.or(Some("inside class body".into())),
            "ternary_expression" if field != Some("condition") => {
                blocker = blocker.or(Some("conditional branch".into()))
            }
            "binary_expression" if field == Some("right") => {
                let op = a.child_by_field_name("operator").map(|o| o.kind()).unwrap_or("");
                if op == "&&" || op == "||" {
                    blocker = blocker.or(Some("short-circuit operand".into()));
                }
            }
            "switch_rule" => blocker = blocker.or(Some("switch rule".into())),
            _ => {}
        }
        prev = a;
        cur = a.parent();
    }
    let Some(host) = cur else {
        return (None, Some("no enclosing statement".into()), false);
    };
    match host.kind() {
        "while_statement" | "do_statement" | "for_statement" => blocker = blocker.or(Some("loop header".into())),
        "try_with_resources_statement" => blocker = blocker.or(Some("resource specification".into())),
        "explicit_constructor_invocation" => blocker = blocker.or(Some("constructor invocation".into())),
        "assert_statement" => blocker = blocker.or(Some("assert".into())),
        "labeled_statement" => blocker = blocker.or(Some("labeled statement".into())),
        _ => {}
    }
    let mut needs_braces = false;
    match host.parent() {
        Some(p) if syntax::BLOCK_LIKE.contains(&p.kind()) => {}
        Some(p)
            if matches!(
                p.kind(),
                "if_statement" | "while_statement" | "for_statement" | "enhanced_for_statement" | "do_statement"
            ) && matches!(syntax::field_name_of(host), Some("body" | "consequence" | "alternative")) =>
        {
            needs_braces = true
        }
        _ => blocker = blocker.or(Some("statement header position".into())),
    }
    (Some(host), blocker, needs_braces)
}

fn nesting_depth(body: Node) -> usize {
    fn go(n: Node, depth: usize) -> usize {
        let mut best = depth;
        for ch in syntax::children(n) {
            if ch.kind() == "class_body" || syntax::is_class_like(ch.kind()) {
                continue;
            }
            let is_control = matches!(
                ch.kind(),
                "if_statement"
                    | "for_statement"
                    | "enhanced_for_statement"
                    | "while_statement"
                    | "do_statement"
                    | "switch_expression"
                    | "try_statement"
                    | "try_with_resources_statement"
                    | "synchronized_statement"
            );
            let else_if = ch.kind() == "if_statement"
                && n.kind() == "if_statement"
                && syntax::field_name_of(ch) == Some("alternative");
            let d = if is_control && !else_if { depth + 1 } else { depth };
            best = best.max(go(ch, d));
        }
        best
    }
    go(body, 0)
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

const PRIMITIVES: &[&str] = &["int", "long", "short", "byte", "char", "boolean", "float", "double", "void", "var"];

struct TypeResolver<'m> {
    model: &'m ProjectModel,
}

impl<'m> TypeResolver<'m> {
    fn resolve(&self, type_text: &str, ctx: Option<&FileContext>, from: &ClassEntity) -> TypeRef {
        let external = || TypeRef::External(type_text.to_string());
        let base = type_text.split('<').next().unwrap_or("").trim();
        let base = base.rsplit(' ').next().unwrap_or(base).trim();
        if base.is_empty() || base.contains('[') || base.ends_with("...") || PRIMITIVES.contains(&base) {
            return external();
        }
        if base.contains('.') {
            if self.model.lookup_class(base).is_some() {
                return TypeRef::Internal(base.to_string());
            }
            let mut parts = base.split('.');
            let head = parts.next().unwrap_or("");
            if let TypeRef::Internal(mut q) = self.resolve(head, ctx, from) {
                for p in parts {
                    q = format!("{q}${p}");
                }
                if self.model.lookup_class(&q).is_some() {
                    return TypeRef::Internal(q);
                }
            }
            return external();
        }
        self.resolve_simple(base, ctx, from).map(TypeRef::Internal).unwrap_or_else(external)
    }

    fn resolve_simple(&self, name: &str, ctx: Option<&FileContext>, from: &ClassEntity) -> Option<String> {
        // member classes of the enclosing chain and its ancestors
        let mut chain: Vec<&ClassEntity> = vec![from];
        let mut cur = from.outer.as_deref().and_then(|o| self.model.lookup_class(o));
        while let Some(c) = cur {
            chain.push(c);
            cur = c.outer.as_deref().and_then(|o| self.model.lookup_class(o));
        }
        for c in &chain {
            if c.simple_name == name && c.kind != ClassKind::Local {
                return Some(c.qualified_name.clone());
            }
            let mut scope = vec![*c];
            scope.extend(self.model.ancestors(c).unwrap_or_default());
            for s in scope {
                let q = format!("{}${}", s.qualified_name, name);
                if self.model.lookup_class(&q).is_some() {
                    return Some(q);
                }
            }
        }
        let ctx = ctx?;
        if let Some(q) = ctx.imports.get(name) {
            if self.model.lookup_class(q).is_some() {
                return Some(q.clone());
            }
            let nested = nested_form(q);
            if self.model.lookup_class(&nested).is_some() {
                return Some(nested);
            }
            return None;
        }
        let same_pkg = if ctx.package.is_empty() { name.to_string() } else { format!("{}.{}", ctx.package, name) };
        if self.model.lookup_class(&same_pkg).is_some() {
            return Some(same_pkg);
        }
        let mut hits: Vec<String> = Vec::new();
        for w in &ctx.wildcard_imports {
            for q in [format!("{w}.{name}"), format!("{}${name}", nested_form(w))] {
                if self.model.lookup_class(&q).is_some() && !hits.contains(&q) {
                    hits.push(q);
                }
            }
        }
        if hits.len() == 1 {
            return hits.pop();
        }
        None
    }
}

/// `a.b.Outer.Inner` → `a.b.Outer$Inner` when a capitalized segment is
/// followed by more segments.
fn nested_form(q: &str) -> String {
    let mut out = String::new();
    let mut in_class = false;
    for (i, seg) in q.split('.').enumerate() {
        if i > 0 {
            out.push(if in_class { '$' } else { '.' });
        }
        out.push_str(seg);
        if seg.chars().next().is_some_and(|c| c.is_uppercase()) {
            in_class = true;
        }
    }
    out
}

/// First pass: superclass, field and parameter types.
fn resolve_types(model: &ProjectModel, cls: &ClassEntity) -> ClassEntity {
    let r = TypeResolver { model };
    let ctx = model.file_context(&cls.file);
    let mut out = cls.clone();
    if let Some(TypeRef::External(s)) = &cls.superclass {
        let resolved = r.resolve(s, ctx, cls);
        // a class cannot extend itself
        out.superclass = Some(match resolved {
            TypeRef::Internal(q) if q == cls.qualified_name => TypeRef::External(s.clone()),
            other => other,
        });
    }
    for f in &mut out.fields {
        f.declared_type = r.resolve(&f.type_text, ctx, cls);
    }
    for m in &mut out.methods {
        for p in &mut m.parameters {
            p.ty = r.resolve(&p.type_text, ctx, cls);
        }
    }
    out
}

/// Static type of a receiver as seen from `method` in `owner`.
pub(crate) fn receiver_type(model: &ProjectModel, owner: &ClassEntity, method: &MethodEntity, recv: &Receiver) -> Option<TypeRef> {
    let r = TypeResolver { model };
    let ctx = model.file_context(&owner.file);
    match recv {
        Receiver::Implicit | Receiver::This => Some(TypeRef::Internal(owner.qualified_name.clone())),
        Receiver::Super => owner.superclass.clone(),
        Receiver::Name(x) => {
            if let Some(t) = method.local_type(x) {
                if t.is_empty() {
                    return None;
                }
                return Some(r.resolve(t, ctx, owner));
            }
            if let Some(f) = find_field_in_scope(model, owner, x) {
                return Some(f.declared_type.clone());
            }
            if x.chars().next().is_some_and(|c| c.is_uppercase()) {
                return Some(r.resolve(x, ctx, owner));
            }
            None
        }
        Receiver::ThisField(x) => model.find_field(owner, x).map(|f| f.declared_type.clone()),
        Receiver::Chain(segs) => {
            let (first, rest) = segs.split_first()?;
            let mut t = if first == "this" {
                Some(TypeRef::Internal(owner.qualified_name.clone()))
            } else {
                receiver_type(model, owner, method, &Receiver::Name(first.clone()))
            };
            for seg in rest {
                let cls = model.lookup_class(t?.internal()?)?;
                t = Some(model.find_field(cls, seg)?.declared_type.clone());
            }
            t
        }
        Receiver::Other => None,
    }
}

/// Field lookup through the owner's hierarchy, then enclosing classes.
pub(crate) fn find_field_in_scope<'a>(model: &'a ProjectModel, owner: &'a ClassEntity, name: &str) -> Option<&'a FieldEntity> {
    if let Some(f) = model.find_field(owner, name) {
        return Some(f);
    }
    let mut cur = owner.outer.as_deref().and_then(|o| model.lookup_class(o));
    while let Some(c) = cur {
        if let Some(f) = model.find_field(c, name) {
            return Some(f);
        }
        cur = c.outer.as_deref().and_then(|o| model.lookup_class(o));
    }
    None
}

pub(crate) fn find_method_in_scope<'a>(
    model: &'a ProjectModel,
    owner: &'a ClassEntity,
    name: &str,
    arity: usize,
) -> Option<&'a MethodEntity> {
    if let Some(m) = model.find_method(owner, name, arity) {
        return Some(m);
    }
    let mut cur = owner.outer.as_deref().and_then(|o| model.lookup_class(o));
    while let Some(c) = cur {
        if let Some(m) = model.find_method(c, name, arity) {
            return Some(m);
        }
        cur = c.outer.as_deref().and_then(|o| model.lookup_class(o));
    }
    None
}

/// True when some method named `name` (any arity) is visible from `owner`
/// through its hierarchy or enclosing classes.
pub(crate) fn has_method_named_in_scope(model: &ProjectModel, owner: &ClassEntity, name: &str) -> bool {
    let mut scope: Vec<&ClassEntity> = vec![owner];
    let mut cur = owner.outer.as_deref().and_then(|o| model.lookup_class(o));
    while let Some(c) = cur {
        scope.push(c);
        cur = c.outer.as_deref().and_then(|o| model.lookup_class(o));
    }
    scope.into_iter().any(|c| {
        std::iter::once(c)
            .chain(model.ancestors(c).unwrap_or_default())
            .any(|k| k.methods.iter().any(|m| m.name == name))
    })
}

/// Second pass: callees and field access sites of every method of `owner`.
pub(crate) fn resolve_sites(model: &ProjectModel, owner: &ClassEntity) -> ClassEntity {
    let mut out = owner.clone();
    let lineage = model.lineage(owner);
    for (mi, m) in owner.methods.iter().enumerate() {
        let mut invs = m.invocations.clone();
        for inv in &mut invs {
            let arity = inv.argument_texts.len();
            let target = match &inv.receiver {
                Receiver::Implicit => find_method_in_scope(model, owner, &inv.name, arity),
                Receiver::This => model.find_method(owner, &inv.name, arity),
                Receiver::Super => owner
                    .superclass
                    .as_ref()
                    .and_then(|s| s.internal())
                    .and_then(|p| model.lookup_class(p))
                    .and_then(|p| model.find_method(p, &inv.name, arity)),
                recv @ (Receiver::Name(_) | Receiver::ThisField(_) | Receiver::Chain(_)) => receiver_type(model, owner, m, recv)
                    .and_then(|t| t.internal().map(str::to_string))
                    .and_then(|q| model.lookup_class(&q))
                    .and_then(|c| model.find_method(c, &inv.name, arity)),
                Receiver::Other => None,
            };
            inv.callee = match target {
                Some(t) => Callee::Internal(t.method_ref()),
                None => Callee::External,
            };
        }
        let mut accesses = Vec::new();
        for r in &m.member_refs {
            let site = |target: TypeRef, kind: AccessKind| FieldAccessSite {
                statement_index: r.statement_index,
                target_class: target,
                member_name: r.name.clone(),
                kind,
                line: r.line,
            };
            match r.kind {
                RefKind::Read | RefKind::Write => {
                    let kind = if r.kind == RefKind::Write { AccessKind::FieldWrite } else { AccessKind::FieldRead };
                    match &r.receiver {
                        Receiver::Implicit => {
                            if let Some(f) = find_field_in_scope(model, owner, &r.name) {
                                accesses.push(site(TypeRef::Internal(f.owner.clone()), kind));
                            }
                        }
                        Receiver::This => {
                            let target = model
                                .find_field(owner, &r.name)
                                .map(|f| f.owner.clone())
                                .unwrap_or_else(|| owner.qualified_name.clone());
                            accesses.push(site(TypeRef::Internal(target), kind));
                        }
                        Receiver::Super => {
                            let found = owner
                                .superclass
                                .as_ref()
                                .and_then(|s| s.internal())
                                .and_then(|p| model.lookup_class(p))
                                .and_then(|p| model.find_field(p, &r.name));
                            if let Some(f) = found {
                                accesses.push(site(TypeRef::Internal(f.owner.clone()), kind));
                            }
                        }
                        recv => match receiver_type(model, owner, m, recv) {
                            Some(TypeRef::Internal(q)) => {
                                let target = model
                                    .lookup_class(&q)
                                    .and_then(|c| model.find_field(c, &r.name))
                                    .map(|f| f.owner.clone())
                                    .unwrap_or(q);
                                accesses.push(site(TypeRef::Internal(target), kind));
                            }
                            Some(ext @ TypeRef::External(_)) => accesses.push(site(ext, kind)),
                            None => {}
                        },
                    }
                }
                RefKind::Call => {
                    let target = match &r.receiver {
                        Receiver::Implicit => {
                            if model.find_method(owner, &r.name, r.arity).is_some() {
                                None
                            } else {
                                find_method_in_scope(model, owner, &r.name, r.arity)
                                    .map(|mm| TypeRef::Internal(mm.owner.clone()))
                            }
                        }
                        Receiver::This | Receiver::Super => None,
                        recv => match receiver_type(model, owner, m, recv) {
                            Some(TypeRef::Internal(q)) => {
                                let decl = model
                                    .lookup_class(&q)
                                    .and_then(|c| model.find_method(c, &r.name, r.arity))
                                    .map(|mm| mm.owner.clone())
                                    .unwrap_or(q);
                                Some(TypeRef::Internal(decl))
                            }
                            other => other,
                        },
                    };
                    if let Some(t) = target {
                        let foreign = match &t {
                            TypeRef::Internal(q) => !lineage.contains(q),
                            TypeRef::External(_) => true,
                        };
                        if foreign {
                            accesses.push(site(t, AccessKind::MethodCallOnForeign));
                        }
                    }
                }
            }
        }
        out.methods[mi].invocations = invs;
        out.methods[mi].field_accesses = accesses;
    }
    out
}

fn resolve_all(project_id: &str, split: Split, parsed: Vec<ParsedFile>) -> ProjectModel {
    let mut files = BTreeMap::new();
    let mut contexts = BTreeMap::new();
    let mut classes = Vec::new();
    let mut seen = BTreeSet::new();
    for pf in parsed {
        contexts.insert(pf.path.clone(), pf.context);
        for c in pf.classes {
            if !seen.insert(c.qualified_name.clone()) {
                warn!(class = %c.qualified_name, file = %c.file, "duplicate class name; keeping the first");
                continue;
            }
            classes.push(c);
        }
        files.insert(pf.path, String::new());
    }
    let unresolved = ProjectModel::new(project_id, split, classes, BTreeMap::new(), contexts.clone());
    let typed: Vec<ClassEntity> = unresolved.classes.iter().map(|c| resolve_types(&unresolved, c)).collect();
    let typed_model = ProjectModel::new(project_id, split, typed, BTreeMap::new(), contexts.clone());
    let resolved: Vec<ClassEntity> = typed_model.classes.iter().map(|c| resolve_sites(&typed_model, c)).collect();
    ProjectModel::new(project_id, split, resolved, files, contexts)
}

/// Builds the resolved model of one in-memory project, e.g. for tests.
pub fn build_model_from_sources(
    project_id: &str,
    split: Split,
    sources: &[(&str, &str)],
) -> Result<ProjectModel, IngestError> {
    let mut parsed = Vec::new();
    let mut texts = BTreeMap::new();
    let mut sorted: Vec<_> = sources.to_vec();
    sorted.sort();
    for (path, src) in sorted {
        match parse_file(src, path) {
            Ok(p) => {
                texts.insert(path.to_string(), src.to_string());
                parsed.push(p);
            }
            Err(e) => warn!("skipping {path}: {e}"),
        }
    }
    if parsed.is_empty() {
        return Err(IngestError::NoParseableFiles { project: project_id.into(), roots: vec![] });
    }
    let mut model = resolve_all(project_id, split, parsed);
    model.files = texts;
    Ok(model)
}

fn build_globset(globs: &[String]) -> Result<GlobSet, IngestError> {
    let mut b = GlobSetBuilder::new();
    for g in globs {
        b.add(Glob::new(g).map_err(|e| IngestError::BadGlob { glob: g.clone(), message: e.to_string() })?);
    }
    b.build().map_err(|e| IngestError::BadGlob { glob: globs.join(","), message: e.to_string() })
}

/// Java files under the configured roots, as (model path, disk path), sorted.
pub fn discover_files(config: &CorpusConfig) -> Result<Vec<(String, PathBuf)>, IngestError> {
    let excludes = build_globset(&config.exclude_globs)?;
    let multi = config.root_dirs.len() > 1;
    let mut out = Vec::new();
    for root in &config.root_dirs {
        if !root.is_dir() {
            return Err(IngestError::MissingRoot(root.clone()));
        }
        let prefix = root.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| IngestError::Io {
                path: root.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
            let p = entry.path();
            if !entry.file_type().is_file() || p.extension().and_then(|e| e.to_str()) != Some("java") {
                continue;
            }
            let rel = p.strip_prefix(root).unwrap_or(p);
            let rel_str = rel.to_string_lossy().replace('\\', "/");
            if excludes.is_match(rel) || excludes.is_match(&rel_str) {
                continue;
            }
            let key = if multi { format!("{prefix}/{rel_str}") } else { rel_str };
            out.push((key, p.to_path_buf()));
        }
    }
    out.sort();
    Ok(out)
}

pub fn build_project_model(config: &CorpusConfig) -> Result<ProjectModel, IngestError> {
    let files = discover_files(config)?;
    let results: Vec<Result<(ParsedFile, String), (String, IngestError)>> = files
        .par_iter()
        .map(|(key, path)| {
            let bytes = std::fs::read(path).map_err(|e| (key.clone(), IngestError::Io { path: path.clone(), source: e }))?;
            let src = String::from_utf8_lossy(&bytes).into_owned();
            parse_file(&src, key).map(|p| (p, src)).map_err(|e| (key.clone(), e))
        })
        .collect();
    let mut parsed = Vec::new();
    let mut texts = BTreeMap::new();
    for r in results {
        match r {
            Ok((p, src)) => {
                texts.insert(p.path.clone(), src);
                parsed.push(p);
            }
            Err((key, e)) => warn!(file = %key, "skipping unparseable file: {e}"),
        }
    }
    if parsed.is_empty() {
        return Err(IngestError::NoParseableFiles {
            project: config.project_id.clone(),
            roots: config.root_dirs.clone(),
        });
    }
    let mut model = resolve_all(&config.project_id, config.role, parsed);
    model.files = texts;
    Ok(model)
}

/// Parses rewritten class text in the context of an existing model, keeping
/// the qualified name and file of `original`. Line numbers are relative to
/// `new_text`.
pub fn reanalyze_class(model: &ProjectModel, original: &ClassEntity, new_text: &str) -> Result<ClassEntity, IngestError> {
    let parsed = parse_file(new_text, &original.file)?;
    let mut classes = parsed.classes;
    if classes.is_empty() {
        return Err(IngestError::Syntax { path: original.file.clone(), line: 1, column: 1 });
    }
    let old = classes[0].qualified_name.clone();
    rename_class_tree(&mut classes, &old, &original.qualified_name);
    let mut top = classes.swap_remove(0);
    top.outer = original.outer.clone();
    top.file = original.file.clone();
    let typed = resolve_types(model, &top);
    Ok(resolve_sites(model, &typed))
}

pub fn project_root_relative(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}
