//! In-memory program model of a parsed Java project.
//!
//! Every other stage reads this model; the generators rewrite the source text
//! it carries. A model is immutable once `java::build_project_model` returns.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Inclusive 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn extent(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Byte range relative to the `source_text` of the owning entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ByteRange {
    pub start: usize,
    pub end: usize,
}

impl ByteRange {
    pub fn new(start: usize, end: usize) -> Self {
        ByteRange { start, end }
    }

    pub fn contains(&self, other: &ByteRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

/// A type name tagged by whether it resolves inside the project.
///
/// `Internal` carries the qualified name of the project class, `External` the
/// type text as written in the source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "scope", content = "name", rename_all = "snake_case")]
pub enum TypeRef {
    Internal(String),
    External(String),
}

impl TypeRef {
    pub fn internal(&self) -> Option<&str> {
        match self {
            TypeRef::Internal(q) => Some(q),
            TypeRef::External(_) => None,
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, TypeRef::Internal(_))
    }

    pub fn name(&self) -> &str {
        match self {
            TypeRef::Internal(n) | TypeRef::External(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
    /// Anonymous class bodies and classes declared inside method bodies.
    Local,
}

impl ClassKind {
    /// Kinds whose entities take part in dataset candidates at all.
    pub fn is_candidate_kind(self) -> bool {
        matches!(self, ClassKind::Class | ClassKind::Enum | ClassKind::Record)
    }
}

/// How a member reference names its receiver, before resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Receiver {
    /// No receiver: `m()` or a bare field name.
    Implicit,
    This,
    Super,
    /// A simple name: a local, parameter, field or type.
    Name(String),
    /// `this.name`
    ThisField(String),
    /// A longer chain of plain names, `a.b` or `this.a.b`; `this` is kept
    /// as the first segment.
    Chain(Vec<String>),
    /// Anything else (call chains, array elements, casts, ...).
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InvocationPattern {
    /// The call is the whole statement.
    StatementCall,
    /// The call's value initializes or is assigned to a variable.
    AssignedReturn,
    /// The call sits inside a larger expression.
    ExpressionCall,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodRef {
    pub class: String,
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum Callee {
    Internal(MethodRef),
    External,
}

impl Callee {
    pub fn internal(&self) -> Option<&MethodRef> {
        match self {
            Callee::Internal(m) => Some(m),
            Callee::External => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationSite {
    /// Innermost modeled statement containing the call.
    pub statement_index: usize,
    pub name: String,
    pub receiver: Receiver,
    pub callee: Callee,
    pub pattern: InvocationPattern,
    pub argument_texts: Vec<String>,
    /// 1-based line within the file.
    pub line: usize,
    /// The call expression, relative to the method source text.
    pub call_range: ByteRange,
    /// The nearest enclosing statement of the call (at any depth).
    pub host_range: ByteRange,
    pub host_kind: String,
    /// Set when inlining at this site would be unsafe (lambda body, short
    /// circuit operand, loop header, ...).
    pub inline_blocker: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccessKind {
    FieldRead,
    FieldWrite,
    MethodCallOnForeign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldAccessSite {
    pub statement_index: usize,
    /// Class declaring the member when it can be found, else the receiver's
    /// static type.
    pub target_class: TypeRef,
    pub member_name: String,
    pub kind: AccessKind,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    Read,
    Write,
    Call,
}

/// Raw member reference recorded by the parser; resolution turns these into
/// `FieldAccessSite`s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRef {
    pub statement_index: usize,
    pub receiver: Receiver,
    pub name: String,
    pub kind: RefKind,
    pub arity: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: String,
    pub span: Span,
    /// 0 for direct children of the method body, 1 for their block contents.
    pub depth: u8,
    pub range: ByteRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub type_text: String,
    pub ty: TypeRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalVar {
    pub name: String,
    pub type_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodEntity {
    pub name: String,
    pub owner: String,
    pub parameters: Vec<Parameter>,
    pub return_type: String,
    pub span: Span,
    pub is_constructor: bool,
    pub is_static: bool,
    pub is_abstract: bool,
    pub is_generic: bool,
    pub is_varargs: bool,
    pub body_statements: Vec<Statement>,
    pub invocations: Vec<InvocationSite>,
    pub field_accesses: Vec<FieldAccessSite>,
    pub member_refs: Vec<MemberRef>,
    /// Every name declared inside the method (locals, loop variables, catch
    /// parameters, lambda parameters, pattern bindings).
    pub locals: Vec<LocalVar>,
    pub max_nesting: usize,
    pub return_count: usize,
    /// True when the last top-level statement is a `return`.
    pub trailing_return: bool,
    pub uses_super: bool,
    pub source_text: String,
    /// Byte offset of `source_text` within the file.
    pub text_offset: usize,
}

impl MethodEntity {
    pub fn arity(&self) -> usize {
        self.parameters.len()
    }

    pub fn has_body(&self) -> bool {
        !self.is_abstract
    }

    pub fn method_ref(&self) -> MethodRef {
        MethodRef {
            class: self.owner.clone(),
            name: self.name.clone(),
            arity: self.arity(),
        }
    }

    /// Parameter and local names, used to tell locals from fields.
    pub fn declared_names(&self) -> BTreeSet<&str> {
        self.parameters
            .iter()
            .map(|p| p.name.as_str())
            .chain(self.locals.iter().map(|l| l.name.as_str()))
            .collect()
    }

    pub fn local_type(&self, name: &str) -> Option<&str> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.type_text.as_str())
            .or_else(|| self.locals.iter().find(|l| l.name == name).map(|l| l.type_text.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEntity {
    pub name: String,
    pub type_text: String,
    pub declared_type: TypeRef,
    pub owner: String,
    pub is_static: bool,
    /// The declaration declares more than one variable (`int a, b;`).
    pub shared_declaration: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntity {
    pub qualified_name: String,
    pub simple_name: String,
    pub kind: ClassKind,
    pub file: String,
    pub span: Span,
    pub superclass: Option<TypeRef>,
    /// Enclosing class for nested, local and anonymous classes.
    pub outer: Option<String>,
    pub is_abstract: bool,
    pub is_generic: bool,
    pub fields: Vec<FieldEntity>,
    pub methods: Vec<MethodEntity>,
    pub source_text: String,
    pub text_offset: usize,
}

impl ClassEntity {
    pub fn field(&self, name: &str) -> Option<&FieldEntity> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Non-constructor methods matching `name` and `arity`.
    pub fn methods_named(&self, name: &str, arity: usize) -> Vec<&MethodEntity> {
        self.methods
            .iter()
            .filter(|m| !m.is_constructor && m.name == name && m.arity() == arity)
            .collect()
    }

    pub fn member_names(&self) -> BTreeSet<&str> {
        self.fields
            .iter()
            .map(|f| f.name.as_str())
            .chain(self.methods.iter().filter(|m| !m.is_constructor).map(|m| m.name.as_str()))
            .collect()
    }

    pub fn package(&self) -> &str {
        let top = self.qualified_name.split('$').next().unwrap_or("");
        top.rsplit_once('.').map(|(p, _)| p).unwrap_or("")
    }
}

/// Package and import declarations of one source file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileContext {
    pub package: String,
    /// Single-type imports: simple name → qualified name.
    pub imports: BTreeMap<String, String>,
    pub wildcard_imports: Vec<String>,
    /// Simple names brought in by static imports.
    pub static_imports: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectModel {
    pub project_id: String,
    pub split: Split,
    pub classes: Vec<ClassEntity>,
    pub files: BTreeMap<String, String>,
    pub file_contexts: BTreeMap<String, FileContext>,
    pub class_index: BTreeMap<String, usize>,
}

impl ProjectModel {
    pub fn new(
        project_id: impl Into<String>,
        split: Split,
        classes: Vec<ClassEntity>,
        files: BTreeMap<String, String>,
        file_contexts: BTreeMap<String, FileContext>,
    ) -> Self {
        let class_index = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.qualified_name.clone(), i))
            .collect();
        ProjectModel {
            project_id: project_id.into(),
            split,
            classes,
            files,
            file_contexts,
            class_index,
        }
    }

    /// Exact-match lookup; externals are never indexed.
    pub fn lookup_class(&self, name: &str) -> Option<&ClassEntity> {
        self.class_index.get(name).map(|&i| &self.classes[i])
    }

    pub fn lookup_method(&self, r: &MethodRef) -> Option<&MethodEntity> {
        let c = self.lookup_class(&r.class)?;
        match c.methods_named(&r.name, r.arity).as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    pub fn file_context(&self, file: &str) -> Option<&FileContext> {
        self.file_contexts.get(file)
    }

    /// Internal ancestors of `cls`, nearest first.
    pub fn ancestors(&self, cls: &ClassEntity) -> Result<Vec<&ClassEntity>, ModelError> {
        let mut out: Vec<&ClassEntity> = Vec::new();
        let mut seen = BTreeSet::new();
        seen.insert(cls.qualified_name.as_str());
        let mut cur = cls;
        while let Some(parent) = cur.superclass.as_ref().and_then(|s| s.internal()) {
            if !seen.insert(parent) {
                return Err(ModelError::InheritanceCycle(cls.qualified_name.clone()));
            }
            match self.lookup_class(parent) {
                Some(p) => {
                    out.push(p);
                    cur = p;
                }
                None => break,
            }
        }
        Ok(out)
    }

    /// Qualified names of `cls` and its internal ancestors; empty on a cycle.
    pub fn lineage(&self, cls: &ClassEntity) -> BTreeSet<String> {
        let mut set = BTreeSet::new();
        set.insert(cls.qualified_name.clone());
        if let Ok(anc) = self.ancestors(cls) {
            set.extend(anc.into_iter().map(|c| c.qualified_name.clone()));
        }
        set
    }

    /// Fields declared on `cls` whose names no internal ancestor declares.
    pub fn unique_fields_of(&self, cls: &ClassEntity) -> Result<BTreeSet<String>, ModelError> {
        let inherited: BTreeSet<&str> = self
            .ancestors(cls)?
            .into_iter()
            .flat_map(|a| a.fields.iter().map(|f| f.name.as_str()))
            .collect();
        Ok(cls
            .fields
            .iter()
            .filter(|f| !inherited.contains(f.name.as_str()))
            .map(|f| f.name.clone())
            .collect())
    }

    /// Finds a field visible from `cls` through its internal hierarchy.
    pub fn find_field<'a>(&'a self, cls: &'a ClassEntity, name: &str) -> Option<&'a FieldEntity> {
        if let Some(f) = cls.field(name) {
            return Some(f);
        }
        self.ancestors(cls).ok()?.into_iter().find_map(|a| a.field(name))
    }

    /// Name + arity method lookup through `cls` and its ancestors. The first
    /// level declaring a match wins; two matches on that level are ambiguous.
    pub fn find_method<'a>(&'a self, cls: &'a ClassEntity, name: &str, arity: usize) -> Option<&'a MethodEntity> {
        let mut chain = vec![cls];
        chain.extend(self.ancestors(cls).ok()?);
        for c in chain {
            match c.methods_named(name, arity).as_slice() {
                [] => {}
                [only] => return Some(*only),
                _ => return None,
            }
        }
        None
    }

    /// Iterates `(class, method)` for every method in the model.
    pub fn all_methods(&self) -> impl Iterator<Item = (&ClassEntity, &MethodEntity)> {
        self.classes.iter().flat_map(|c| c.methods.iter().map(move |m| (c, m)))
    }

    /// Checks the structural invariants of the model.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        if self.class_index.len() != self.classes.len() {
            return Err(ModelError::Invariant("class_index is not a bijection".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.class_index.get(&c.qualified_name) != Some(&i) {
                return Err(ModelError::Invariant(format!("{} missing from class_index", c.qualified_name)));
            }
            for m in &c.methods {
                if !c.span.contains(&m.span) {
                    return Err(ModelError::Invariant(format!("{}.{} outside class span", c.qualified_name, m.name)));
                }
                let n = m.body_statements.len();
                let bad_inv = m.invocations.iter().any(|s| s.statement_index >= n);
                let bad_acc = m.field_accesses.iter().any(|s| s.statement_index >= n);
                if (bad_inv || bad_acc) && n > 0 {
                    return Err(ModelError::Invariant(format!(
                        "{}.{} has a site outside its statements",
                        c.qualified_name, m.name
                    )));
                }
                if m.source_text.lines().count() != m.span.extent() {
                    return Err(ModelError::Invariant(format!(
                        "{}.{} text does not match its span",
                        c.qualified_name, m.name
                    )));
                }
                if let Some(r) = m.invocations.iter().find_map(|s| s.callee.internal()) {
                    if self.lookup_method(r).is_none() {
                        return Err(ModelError::Invariant(format!("dangling callee {r:?}")));
                    }
                }
            }
            for f in &c.fields {
                if let TypeRef::Internal(q) = &f.declared_type {
                    if self.lookup_class(q).is_none() {
                        return Err(ModelError::Invariant(format!("field type {q} not indexed")));
                    }
                }
            }
        }
        Ok(())
    }
}
