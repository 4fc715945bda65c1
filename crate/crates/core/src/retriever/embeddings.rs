//! The `CGRV` embedding file: little-endian, magic `CGRV`, version `u32 = 1`,
//! `dim: u32`, `count: u64`, then `count` records of
//! `(id_len: u32, id: UTF-8 bytes, dim × f32)`.

use std::io::{Read, Write};

use crate::corpus::{Corpus, FactId};
use crate::error::DataError;

use super::{HashingEncoder, VectorIndex};

pub const MAGIC: &[u8; 4] = b"CGRV";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub records: Vec<(String, Vec<f32>)>,
}

impl Embeddings {
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        let dim = u32::try_from(self.dim).map_err(|_| DataError::Embeddings("dimension too large".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for (id, v) in &self.records {
            if v.len() != self.dim {
                return Err(DataError::Embeddings(format!(
                    "record {id} has {} values, expected {}",
                    v.len(),
                    self.dim
                )));
            }
            let len = u32::try_from(id.len()).map_err(|_| DataError::Embeddings("id too long".into()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, DataError> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(DataError::Embeddings("bad magic".into()));
        }
        let version = read_u32(&mut r, "version")?;
        if version != VERSION {
            return Err(DataError::Embeddings(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r, "dim")? as usize;
        let mut count_bytes = [0u8; 8];
        read_exact(&mut r, &mut count_bytes, "count")?;
        let count = u64::from_le_bytes(count_bytes);
        let mut records = Vec::new();
        for n in 0..count {
            let len = read_u32(&mut r, "id length")? as usize;
            let mut id = vec![0u8; len];
            read_exact(&mut r, &mut id, "id")?;
            let id = String::from_utf8(id)
                .map_err(|_| DataError::Embeddings(format!("record {n}: id is not UTF-8")))?;
            let mut raw = vec![0u8; dim * 4];
            read_exact(&mut r, &mut raw, "vector")?;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            records.push((id, v));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(DataError::Embeddings("trailing bytes after last record".into()));
        }
        Ok(Embeddings { dim, records })
    }
}

impl Embeddings {
    /// Embeds every corpus fact's text with a fixed encoder.
    pub fn from_corpus(corpus: &Corpus, encoder: &HashingEncoder) -> Self {
        let records = corpus
            .facts()
            .iter()
            .map(|f| {
                let v = encoder.embed_text(&f.text).into_iter().map(|x| x as f32).collect();
                (f.id.as_str().to_string(), v)
            })
            .collect();
        Embeddings {
            dim: encoder.weights().len() / encoder.buckets().max(1),
            records,
        }
    }

    /// Index over the embedded facts, texts taken from the corpus. Every
    /// record must name a corpus fact; facts without a record are not
    /// searchable.
    pub fn to_index(&self, corpus: &Corpus) -> Result<VectorIndex, DataError> {
        let mut entries = Vec::with_capacity(self.records.len());
        for (id, v) in &self.records {
            let id = FactId::new(id.as_str());
            let text = corpus
                .text(&id)
                .ok_or_else(|| DataError::Embeddings(format!("record {id} is not in the corpus")))?;
            entries.push((id, v.iter().map(|&x| f64::from(x)).collect(), text.to_string()));
        }
        VectorIndex::build(self.dim, entries).map_err(|e| DataError::Embeddings(e.to_string()))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), DataError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => DataError::Embeddings(format!("truncated file reading {what}")),
        _ => DataError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, DataError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}
