//! A small Java lexer.
//!
//! It is deliberately independent of the tree-sitter grammar: LOC counting and
//! the inverse-refactoring checks run on its token stream so that they do not
//! share a code path with the transformations they verify.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: usize,
    /// 1-based line of the last character (differs from `line` for text blocks).
    pub end_line: usize,
}

pub fn tokenize(src: &str) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let n = chars.len();

    while i < n {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // comments
        if c == '/' && i + 1 < n && chars[i + 1] == '/' {
            while i < n && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '*' {
            i += 2;
            while i < n && !(chars[i] == '*' && i + 1 < n && chars[i + 1] == '/') {
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i = (i + 2).min(n);
            continue;
        }
        let start = i;
        let start_line = line;
        let kind;
        if c == '"' && i + 2 < n && chars[i + 1] == '"' && chars[i + 2] == '"' {
            // text block
            i += 3;
            while i < n && !(chars[i] == '"' && i + 2 < n && chars[i + 1] == '"' && chars[i + 2] == '"') {
                if chars[i] == '\\' {
                    i += 1;
                }
                if i < n && chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i = (i + 3).min(n);
            kind = TokenKind::Str;
        } else if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            while i < n && chars[i] != quote && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(n);
            kind = if quote == '"' { TokenKind::Str } else { TokenKind::Char };
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            while i < n && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            kind = TokenKind::Ident;
        } else if c.is_ascii_digit() || (c == '.' && i + 1 < n && chars[i + 1].is_ascii_digit()) {
            let hex = c == '0' && i + 1 < n && matches!(chars[i + 1], 'x' | 'X');
            i += 1;
            while i < n {
                let d = chars[i];
                // a sign continues the literal only after an exponent marker
                let exponent = if hex { matches!(chars[i - 1], 'p' | 'P') } else { matches!(chars[i - 1], 'e' | 'E') };
                if d.is_ascii_alphanumeric() || d == '_' || d == '.' || ((d == '+' || d == '-') && exponent) {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else {
            i += 1;
            kind = TokenKind::Punct;
        }
        out.push(Token {
            kind,
            text: chars[start..i].iter().collect(),
            line: start_line,
            end_line: line,
        });
    }
    out
}

/// Lines (1-based) that carry at least one non-comment token.
pub fn effective_lines(src: &str) -> Vec<usize> {
    let mut lines: Vec<usize> = Vec::new();
    for t in tokenize(src) {
        for l in t.line..=t.end_line {
            if lines.last() != Some(&l) {
                lines.push(l);
            }
        }
    }
    lines.dedup();
    lines
}

/// Token texts joined by single spaces; a formatting-insensitive fingerprint.
pub fn normalized(src: &str) -> String {
    tokenize(src)
        .into_iter()
        .map(|t| t.text)
        .collect::<Vec<_>>()
        .join(" ")
}
