//! Text-level editing helpers shared by the generators.

use std::collections::BTreeSet;

use tree_sitter::{Node, Tree};

use crate::java::syntax::{self, MEMBER_SHELL_PREFIX, MEMBER_SHELL_SUFFIX};
use crate::lexer::{self, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Edit {
    pub fn new(start: usize, end: usize, text: impl Into<String>) -> Self {
        Edit { start, end, text: text.into() }
    }
}

/// Applies non-overlapping edits to `src[from..to]`; edit offsets are
/// absolute within `src`.
pub fn apply_edits(src: &str, from: usize, to: usize, edits: &[Edit]) -> Result<String, String> {
    let mut sorted: Vec<&Edit> = edits.iter().filter(|e| e.start >= from && e.end <= to).collect();
    sorted.sort_by_key(|e| (e.start, e.end));
    let mut out = String::new();
    let mut pos = from;
    for e in sorted {
        if e.start < pos {
            return Err(format!("overlapping edits at byte {}", e.start));
        }
        out.push_str(&src[pos..e.start]);
        out.push_str(&e.text);
        pos = e.end;
    }
    out.push_str(&src[pos..to]);
    Ok(out)
}

/// Re-indents a multi-line fragment whose first line starts mid-line:
/// the first line gets `to`, the rest swap the `from` prefix for `to`.
pub fn reindent(fragment: &str, from: &str, to: &str) -> Vec<String> {
    fragment
        .split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.trim_end_matches('\r');
            if i == 0 {
                format!("{to}{line}")
            } else if line.trim().is_empty() {
                String::new()
            } else if let Some(rest) = line.strip_prefix(from) {
                format!("{to}{rest}")
            } else {
                format!("{to}{}", line.trim_start())
            }
        })
        .collect()
}

/// A member declaration parsed inside a shell class. Offsets of nodes are
/// shifted by `offset` relative to the member text.
pub struct ParsedMember {
    pub tree: Tree,
    pub source: String,
    pub offset: usize,
}

impl ParsedMember {
    pub fn new(member: &str) -> Self {
        let source = format!("{MEMBER_SHELL_PREFIX}{member}{MEMBER_SHELL_SUFFIX}");
        let tree = syntax::parse(&source);
        ParsedMember { tree, source, offset: MEMBER_SHELL_PREFIX.len() }
    }

    /// The first method or constructor declaration in the shell.
    pub fn method(&self) -> Option<Node<'_>> {
        let class = syntax::named_children(self.tree.root_node()).into_iter().find(|n| n.kind() == "class_declaration")?;
        let body = class.child_by_field_name("body")?;
        syntax::named_children(body)
            .into_iter()
            .find(|n| matches!(n.kind(), "method_declaration" | "constructor_declaration"))
    }
}

/// The innermost node exactly covering `[start, end)`.
pub fn node_at<'t>(root: Node<'t>, start: usize, end: usize, kind: &str) -> Option<Node<'t>> {
    let mut n = root.descendant_for_byte_range(start, end)?;
    loop {
        if n.kind() == kind && n.start_byte() == start && n.end_byte() == end {
            return Some(n);
        }
        n = n.parent()?;
        if n.start_byte() < start || n.end_byte() > end {
            return None;
        }
    }
}

/// Identifier tokens appearing anywhere in `src`.
pub fn identifiers(src: &str) -> BTreeSet<String> {
    lexer::tokenize(src).into_iter().filter(|t| t.kind == TokenKind::Ident).map(|t| t.text).collect()
}

/// Name of the form `{base}{sep}{k}` not present in `taken`, k ≥ 1.
pub fn fresh_name(base: &str, sep: &str, taken: &BTreeSet<String>) -> String {
    (1..).map(|k| format!("{base}{sep}{k}")).find(|n| !taken.contains(n)).expect("unbounded range")
}

/// Whether `n` is the declaring occurrence of a variable name.
pub fn is_declaration_name(n: Node) -> bool {
    let Some(p) = n.parent() else { return false };
    let field = syntax::field_name_of(n);
    match p.kind() {
        "variable_declarator" | "formal_parameter" | "catch_formal_parameter" | "resource" | "enhanced_for_statement"
        | "instanceof_expression" | "type_pattern" => field == Some("name"),
        "lambda_expression" => field == Some("parameters"),
        "inferred_parameters" => true,
        _ => false,
    }
}

/// `Book` → `book`, `URLPart` → `uRLPart`.
pub fn lower_camel(simple: &str) -> String {
    let mut c = simple.chars();
    match c.next() {
        Some(f) => f.to_lowercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Leading whitespace of the first non-blank line after the opening brace
/// of a class body, or `class_indent` plus four spaces.
pub fn member_indent(class_text: &str, body_open: usize, class_indent: &str) -> String {
    let after = &class_text[body_open + 1..];
    for line in after.lines().skip(1) {
        if line.trim().is_empty() || line.trim() == "}" {
            continue;
        }
        return line.chars().take_while(|c| *c == ' ' || *c == '\t').collect();
    }
    format!("{class_indent}    ")
}

/// Inserts `members` (already indented lines) before the final `}` of a
/// class text.
pub fn append_members(class_text: &str, members: &[String]) -> Option<String> {
    let close = class_text.rfind('}')?;
    let head = class_text[..close].trim_end_matches([' ', '\t']);
    let head = head.strip_suffix('\n').unwrap_or(head);
    let (close_indent, _) = syntax::line_indent(class_text, close);
    let mut out = String::from(head);
    for m in members {
        out.push('\n');
        out.push('\n');
        out.push_str(m);
    }
    out.push('\n');
    out.push_str(&close_indent);
    out.push_str(&class_text[close..]);
    Some(out)
}

/// Byte range of whole lines covering `[start, end)`, including the
/// trailing newline.
pub fn line_extent(src: &str, start: usize, end: usize) -> (usize, usize) {
    let ls = src[..start].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let le = src[end..].find('\n').map(|i| end + i + 1).unwrap_or(src.len());
    (ls, le)
}
