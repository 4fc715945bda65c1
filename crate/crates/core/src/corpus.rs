//! Evidence facts and the JSONL corpus format.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::amr::{parse_penman, AmrGraph};
use crate::error::DataError;

/// Identifier of an evidence fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactId(pub String);

impl FactId {
    pub fn new(id: impl Into<String>) -> Self {
        FactId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FactId {
    fn from(s: &str) -> Self {
        FactId(s.to_string())
    }
}

/// One corpus record: `{"id": str, "text": str, "amr": optional str}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub id: FactId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amr: Option<String>,
}

/// Corpus facts plus their parsed AMRs. Facts without an AMR stay retrievable
/// but never contribute nodes to a semantic graph.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    facts: Vec<Fact>,
    by_id: HashMap<FactId, usize>,
    amrs: HashMap<FactId, AmrGraph>,
}

impl Corpus {
    pub fn new(facts: Vec<Fact>) -> Result<Self, DataError> {
        let mut by_id = HashMap::with_capacity(facts.len());
        let mut amrs = HashMap::new();
        for (i, f) in facts.iter().enumerate() {
            if by_id.insert(f.id.clone(), i).is_some() {
                return Err(DataError::Invalid(format!("duplicate fact id {}", f.id)));
            }
            if let Some(text) = &f.amr {
                let g = parse_penman(text).map_err(|source| DataError::Amr {
                    context: format!("fact {}", f.id),
                    source,
                })?;
                amrs.insert(f.id.clone(), g);
            }
        }
        Ok(Corpus { facts, by_id, amrs })
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, DataError> {
        Corpus::new(read_jsonl(reader)?)
    }

    pub fn write_jsonl<W: Write>(&self, writer: W) -> Result<(), DataError> {
        write_jsonl(writer, &self.facts)
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, id: &FactId) -> Option<&Fact> {
        self.by_id.get(id).map(|&i| &self.facts[i])
    }

    pub fn contains(&self, id: &FactId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn text(&self, id: &FactId) -> Option<&str> {
        self.get(id).map(|f| f.text.as_str())
    }

    pub fn amr(&self, id: &FactId) -> Option<&AmrGraph> {
        self.amrs.get(id)
    }
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>, DataError>
where
    T: serde::de::DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| DataError::Json {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<(), DataError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| DataError::Invalid(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
