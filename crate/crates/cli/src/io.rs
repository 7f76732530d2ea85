//! Reading inputs and writing canonical JSON.
//!
//! An `--alg` or `--in` argument that names no existing file is looked up in the bundled corpus,
//! with or without a `.json` suffix.

use std::path::Path;

use kwidth::algebra::Algebra;
use kwidth::corpus::{self, Kind};
use kwidth::instance::Instance;
use kwidth::relation::{Relation, Tuple};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Relation file: `{"domains": [2, 2], "tuples": [[0, 1], [1, 0]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationFile {
    pub domains: Vec<usize>,
    pub tuples: Vec<Tuple>,
}

/// Parses JSON, reporting syntax and shape errors with line and column.
pub fn parse_json<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::usage(format!("{origin}:{}:{}: {e}", e.line(), e.column())))
}

fn read_source(arg: &str, kind: Kind) -> Result<(String, String), CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{arg}: {e}")))?;
        return Ok((arg.to_string(), text));
    }
    let name = arg.strip_suffix(".json").unwrap_or(arg);
    match corpus::entry(name) {
        Some(e) if e.kind == kind => Ok((format!("bundled:{name}"), e.text.to_string())),
        _ => Err(CliError::usage(format!("{arg}: no such file or bundled entry"))),
    }
}

pub fn load_algebra(arg: &str) -> Result<Algebra, CliError> {
    let (origin, text) = read_source(arg, Kind::Algebra)?;
    parse_json(&origin, &text)
}

pub fn load_instance(arg: &str) -> Result<Instance, CliError> {
    let (origin, text) = read_source(arg, Kind::Instance)?;
    parse_json(&origin, &text)
}

pub fn load_relation(arg: &str) -> Result<Relation, CliError> {
    let text = std::fs::read_to_string(arg).map_err(|e| CliError::usage(format!("{arg}: {e}")))?;
    let file: RelationFile = parse_json(arg, &text)?;
    Relation::new(file.domains, file.tuples).map_err(|e| CliError::usage(format!("{arg}: {e}")))
}

pub fn relation_file(r: &Relation) -> RelationFile {
    RelationFile { domains: r.domains().to_vec(), tuples: r.iter().cloned().collect() }
}

pub fn write_json<T: Serialize>(path: &str, value: &T) -> Result<(), CliError> {
    std::fs::write(path, corpus::to_canonical_json(value)).map_err(|e| CliError::usage(format!("{path}: {e}")))
}
