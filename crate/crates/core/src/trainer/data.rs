use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::amr::{parse_penman, AmrGraph};
use crate::corpus::{read_jsonl, Corpus, FactId};
use crate::error::{DataError, Error, Result};

/// One multiple-choice question. `hyp_amrs[j]` is the AMR of the hypothesis
/// built from choice `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub gold_idx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_chain: Option<Vec<FactId>>,
    #[serde(rename = "hyp_amrs")]
    pub hypothesis_amrs: Vec<String>,
}

impl QaInstance {
    fn check(&self, corpus: &Corpus) -> std::result::Result<(), DataError> {
        let j = self.choices.len();
        if j < 2 {
            return Err(DataError::Invalid(format!("{j} choices, need at least 2")));
        }
        if self.gold_idx >= j {
            return Err(DataError::Invalid(format!("gold_idx {} out of range", self.gold_idx)));
        }
        if self.hypothesis_amrs.len() != j {
            return Err(DataError::Invalid(format!(
                "{} hypothesis AMRs for {j} choices",
                self.hypothesis_amrs.len()
            )));
        }
        if let Some(chain) = &self.gold_chain {
            if let Some(f) = chain.iter().find(|f| !corpus.contains(f)) {
                return Err(DataError::Invalid(format!("gold chain fact {f} not in corpus")));
            }
        }
        Ok(())
    }
}

/// A validated instance with its hypothesis AMRs parsed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub inst: QaInstance,
    pub hyps: Vec<AmrGraph>,
}

pub fn prepare(inst: QaInstance, corpus: &Corpus) -> Result<Prepared> {
    let id = inst.id.clone();
    let run = || -> Result<Prepared> {
        inst.check(corpus)?;
        let hyps = inst
            .hypothesis_amrs
            .iter()
            .enumerate()
            .map(|(j, s)| {
                parse_penman(s).map_err(|source| DataError::Amr {
                    context: format!("hypothesis {j}"),
                    source,
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Prepared { inst, hyps })
    };
    run().map_err(|e: Error| e.in_instance(&id))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<QaInstance>> {
    Ok(read_jsonl(reader)?)
}
