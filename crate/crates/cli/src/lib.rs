//! Pipelines behind the `ringtag` command-line tool.
//!
//! Each stage reads and writes plain files (JSON, JSONL, CSV) so that it can
//! be run on its own or chained by `pipeline`.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
