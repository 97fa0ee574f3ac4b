//! Thin helpers over the tree-sitter Java grammar.

use std::cell::RefCell;

use tree_sitter::{Node, Parser, Tree};

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut p = Parser::new();
        p.set_language(&tree_sitter_java::LANGUAGE.into())
            .expect("java grammar is compatible with the linked tree-sitter");
        p
    });
}

pub fn parse(src: &str) -> Tree {
    PARSER.with(|p| p.borrow_mut().parse(src, None).expect("parser has a language and no timeout"))
}

/// First ERROR or MISSING node as a 1-based (line, column).
pub fn first_error(tree: &Tree) -> Option<(usize, usize)> {
    let root = tree.root_node();
    if !root.has_error() {
        return None;
    }
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if n.is_error() || n.is_missing() {
            let p = n.start_position();
            return Some((p.row + 1, p.column + 1));
        }
        if n.has_error() {
            let mut c = n.walk();
            let mut kids: Vec<_> = n.children(&mut c).collect();
            kids.reverse();
            stack.extend(kids);
        }
    }
    Some((1, 1))
}

pub fn parses_cleanly(src: &str) -> bool {
    first_error(&parse(src)).is_none()
}

/// Wraps a member declaration so it can be parsed on its own.
pub const MEMBER_SHELL_PREFIX: &str = "class __Shell {\n";
pub const MEMBER_SHELL_SUFFIX: &str = "\n}\n";

pub fn member_parses_cleanly(member: &str) -> bool {
    parses_cleanly(&format!("{MEMBER_SHELL_PREFIX}{member}{MEMBER_SHELL_SUFFIX}"))
}

pub fn text<'a>(node: Node, src: &'a str) -> &'a str {
    &src[node.byte_range()]
}

pub fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut c = node.walk();
    node.named_children(&mut c).collect()
}

pub fn children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut c = node.walk();
    node.children(&mut c).collect()
}

pub fn is_comment(node: Node) -> bool {
    matches!(node.kind(), "line_comment" | "block_comment")
}

pub const BLOCK_LIKE: &[&str] = &["block", "constructor_body", "switch_block_statement_group"];

pub fn is_class_like(kind: &str) -> bool {
    matches!(
        kind,
        "class_declaration" | "interface_declaration" | "enum_declaration" | "record_declaration" | "annotation_type_declaration"
    )
}

pub fn is_statement(node: Node) -> bool {
    let kind = node.kind();
    if kind.ends_with("_statement")
        || matches!(kind, "local_variable_declaration" | "explicit_constructor_invocation")
        || is_class_like(kind)
    {
        return true;
    }
    if matches!(kind, "block" | "switch_expression") {
        return node.parent().is_some_and(|p| BLOCK_LIKE.contains(&p.kind()));
    }
    false
}

/// Nodes walked through when collecting the nested statements of a statement.
pub fn is_statement_container(kind: &str) -> bool {
    matches!(
        kind,
        "block" | "switch_block" | "switch_block_statement_group" | "switch_rule" | "catch_clause" | "finally_clause"
    )
}

/// Direct statements one level below `stmt`.
pub fn nested_statements<'t>(stmt: Node<'t>) -> Vec<Node<'t>> {
    fn go<'t>(n: Node<'t>, out: &mut Vec<Node<'t>>) {
        for ch in named_children(n) {
            if is_comment(ch) {
                continue;
            }
            if is_statement(ch) {
                out.push(ch);
            } else if is_statement_container(ch.kind()) {
                go(ch, out);
            }
        }
    }
    let mut out = Vec::new();
    if is_class_like(stmt.kind()) {
        return out;
    }
    go(stmt, &mut out);
    out
}

/// Role of an `identifier` node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentRole {
    /// A variable, field or (for `object` positions) possibly a type name.
    Value,
    /// Declaration, member name after a dot, label, annotation, etc.
    NotValue,
}

pub fn ident_role(node: Node) -> IdentRole {
    let Some(parent) = node.parent() else { return IdentRole::NotValue };
    let field = field_name_of(node);
    use IdentRole::*;
    match parent.kind() {
        "method_invocation" => {
            if field == Some("object") {
                Value
            } else if field == Some("name") {
                NotValue
            } else {
                Value
            }
        }
        "field_access" => {
            if field == Some("field") {
                NotValue
            } else {
                Value
            }
        }
        "variable_declarator" | "formal_parameter" | "catch_formal_parameter" | "resource" | "enhanced_for_statement"
        | "instanceof_expression" | "type_pattern" | "record_pattern_component" => {
            if field == Some("name") {
                NotValue
            } else {
                Value
            }
        }
        "lambda_expression" => {
            if field == Some("parameters") {
                NotValue
            } else {
                Value
            }
        }
        "inferred_parameters" | "labeled_statement" | "break_statement" | "continue_statement" | "scoped_identifier"
        | "package_declaration" | "import_declaration" | "marker_annotation" | "annotation" | "element_value_pair"
        | "enum_constant" | "switch_label" | "method_declaration" | "constructor_declaration" | "class_declaration"
        | "interface_declaration" | "enum_declaration" | "record_declaration" | "annotation_type_declaration"
        | "annotation_type_element_declaration" | "type_parameter" | "module_declaration" => NotValue,
        "method_reference" => {
            let first = parent.named_child(0);
            if first.map(|f| f.id()) == Some(node.id()) {
                Value
            } else {
                NotValue
            }
        }
        _ => Value,
    }
}

pub fn field_name_of(node: Node) -> Option<&'static str> {
    let parent = node.parent()?;
    let mut c = parent.walk();
    for (i, ch) in parent.children(&mut c).enumerate() {
        if ch.id() == node.id() {
            return parent.field_name_for_child(i as u32);
        }
    }
    None
}

/// True when `node` is assigned to or incremented.
pub fn is_write_target(node: Node) -> bool {
    let Some(parent) = node.parent() else { return false };
    match parent.kind() {
        "assignment_expression" => field_name_of(node) == Some("left"),
        "update_expression" => true,
        _ => false,
    }
}

pub fn argument_nodes<'t>(call: Node<'t>) -> Vec<Node<'t>> {
    call.child_by_field_name("arguments")
        .map(|a| named_children(a).into_iter().filter(|n| !is_comment(*n)).collect())
        .unwrap_or_default()
}

/// Expressions that need no parentheses when substituted into another
/// expression.
pub fn is_atomic_expression(kind: &str) -> bool {
    matches!(
        kind,
        "identifier"
            | "this"
            | "field_access"
            | "method_invocation"
            | "array_access"
            | "parenthesized_expression"
            | "decimal_integer_literal"
            | "hex_integer_literal"
            | "octal_integer_literal"
            | "binary_integer_literal"
            | "decimal_floating_point_literal"
            | "hex_floating_point_literal"
            | "string_literal"
            | "character_literal"
            | "true"
            | "false"
            | "null_literal"
            | "class_literal"
            | "object_creation_expression"
            | "array_creation_expression"
    )
}

/// Visits every node under `root` in document order, skipping the subtrees of
/// anonymous or local class bodies.
pub fn walk_skipping_classes<'t>(root: Node<'t>, f: &mut dyn FnMut(Node<'t>)) {
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        f(n);
        let mut kids: Vec<_> = children(n)
            .into_iter()
            .filter(|k| !(k.kind() == "class_body" || is_class_like(k.kind())))
            .collect();
        kids.reverse();
        stack.extend(kids);
    }
}

/// Names declared anywhere inside `body` along with their type text (empty
/// when inferred, e.g. lambda parameters).
pub fn declared_locals(body: Node, src: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    walk_skipping_classes(body, &mut |n| match n.kind() {
        "local_variable_declaration" => {
            let ty = n.child_by_field_name("type").map(|t| text(t, src).to_string()).unwrap_or_default();
            for d in named_children(n) {
                if d.kind() == "variable_declarator" {
                    if let Some(name) = d.child_by_field_name("name") {
                        out.push((text(name, src).to_string(), ty.clone()));
                    }
                }
            }
        }
        "formal_parameter" | "catch_formal_parameter" | "resource" | "enhanced_for_statement" | "instanceof_expression"
        | "type_pattern" => {
            if let Some(name) = n.child_by_field_name("name") {
                let ty = n
                    .child_by_field_name("type")
                    .map(|t| text(t, src).to_string())
                    .or_else(|| {
                        named_children(n)
                            .into_iter()
                            .find(|c| c.kind() == "catch_type")
                            .map(|c| text(c, src).to_string())
                    })
                    .or_else(|| {
                        if n.kind() == "instanceof_expression" {
                            n.child_by_field_name("right").map(|t| text(t, src).to_string())
                        } else {
                            None
                        }
                    })
                    .unwrap_or_default();
                out.push((text(name, src).to_string(), ty));
            }
        }
        "lambda_expression" => {
            if let Some(p) = n.child_by_field_name("parameters") {
                if p.kind() == "identifier" {
                    out.push((text(p, src).to_string(), String::new()));
                }
            }
        }
        "inferred_parameters" => {
            for c in named_children(n) {
                if c.kind() == "identifier" {
                    out.push((text(c, src).to_string(), String::new()));
                }
            }
        }
        "spread_parameter" => {
            for c in named_children(n) {
                if c.kind() == "variable_declarator" {
                    if let Some(name) = c.child_by_field_name("name") {
                        out.push((text(name, src).to_string(), String::new()));
                    }
                }
            }
        }
        _ => {}
    });
    out
}

/// 1-based line of a byte offset.
pub fn line_of(src: &str, byte: usize) -> usize {
    src[..byte.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Leading whitespace of the line containing `byte`, and whether only
/// whitespace precedes `byte` on that line.
pub fn line_indent(src: &str, byte: usize) -> (String, bool) {
    let line_start = src[..byte].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let prefix = &src[line_start..byte];
    let indent: String = src[line_start..].chars().take_while(|c| *c == ' ' || *c == '\t').collect();
    (indent, prefix.trim().is_empty())
}
