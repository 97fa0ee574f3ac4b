//! Java front end: tree-sitter parsing and project-level resolution.

pub mod ingest;
pub mod syntax;

pub use ingest::{
    build_model_from_sources, build_project_model, discover_files, parse_file, reanalyze_class, CorpusConfig,
    ParsedFile,
};
