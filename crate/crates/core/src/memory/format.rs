//! Binary bank file and its JSON export.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "AVEM" | version u32 | fingerprint len u32 + bytes | embedding dim u32
//! | param len u64 | entry count u32
//! per entry: embedding dim x f32 | param len x f32
//!            | meta len u32 + [instruction len u32 + bytes | success_rate f32
//!              | training_iterations u32 | task_complexity u32 | created_at i64]
//! crc32 u32 over every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntryMeta, InstructionEmbedding, MemoryBank, MemoryEntry, MemoryError};
use crate::policy::PolicyParams;

pub const MAGIC: &[u8; 4] = b"AVEM";
pub const FORMAT_VERSION: u32 = 1;

/// Feature dimension implied by a version tag of the form `.../d=<n>/...`,
/// falling back to the whole parameter length.
fn dim_from_tag(tag: &str, param_len: usize) -> usize {
    tag.split('/')
        .find_map(|part| part.strip_prefix("d=").and_then(|d| d.parse().ok()))
        .filter(|d: &usize| *d > 0 && param_len % d == 0)
        .unwrap_or(param_len.max(1))
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    put_u32(
        buf,
        u32::try_from(b.len()).expect("field shorter than 4 GiB"),
    );
    buf.extend_from_slice(b);
}

pub(super) fn encode(bank: &MemoryBank) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_bytes(&mut buf, bank.version_tag.as_bytes());
    put_u32(&mut buf, bank.embedding_dim as u32);
    buf.extend_from_slice(&(bank.param_len as u64).to_le_bytes());
    put_u32(&mut buf, bank.entries.len() as u32);
    for e in &bank.entries {
        for v in &e.embedding.values {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        for v in &e.params.theta {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        let mut meta = Vec::new();
        put_bytes(&mut meta, e.meta.instruction.as_bytes());
        meta.extend_from_slice(&(e.meta.success_rate as f32).to_le_bytes());
        put_u32(&mut meta, e.meta.training_iterations);
        put_u32(&mut meta, e.meta.task_complexity);
        meta.extend_from_slice(&e.meta.created_at.to_le_bytes());
        put_bytes(&mut buf, &meta);
    }
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MemoryError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| {
                MemoryError::CorruptBank(format!("unexpected end of data at byte {}", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MemoryError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, MemoryError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn i64(&mut self) -> Result<i64, MemoryError> {
        Ok(i64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f32(&mut self) -> Result<f64, MemoryError> {
        Ok(f64::from(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        )))
    }

    fn bytes(&mut self) -> Result<&'a [u8], MemoryError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, MemoryError> {
        String::from_utf8(self.bytes()?.to_vec())
            .map_err(|_| MemoryError::CorruptBank("invalid UTF-8".into()))
    }
}

pub(super) fn decode(data: &[u8], capacity: usize) -> Result<MemoryBank, MemoryError> {
    if data.len() < 8 {
        return Err(MemoryError::CorruptBank("file too short".into()));
    }
    let (body, trailer) = data.split_at(data.len() - 4);
    if &body[..4.min(body.len())] != MAGIC {
        return Err(MemoryError::CorruptBank("bad magic".into()));
    }
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(MemoryError::CorruptBank("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(MemoryError::CorruptBank(format!(
            "unsupported format version {version}"
        )));
    }
    let tag = r.string()?;
    let embedding_dim = r.u32()? as usize;
    let param_len = usize::try_from(r.u64()?)
        .map_err(|_| MemoryError::CorruptBank("parameter length".into()))?;
    let count = r.u32()? as usize;
    let dim = dim_from_tag(&tag, param_len);
    let mut bank = MemoryBank::with_dim(capacity.max(count).max(1), &tag, embedding_dim, param_len);
    bank.capacity = capacity.max(count).max(1);
    for _ in 0..count {
        let values = (0..embedding_dim)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()?;
        let theta = (0..param_len)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()?;
        let meta = r.bytes()?;
        let mut m = Reader { buf: meta, pos: 0 };
        let instruction = m.string()?;
        let success_rate = m.f32()?;
        let training_iterations = m.u32()?;
        let task_complexity = m.u32()?;
        let created_at = m.i64()?;
        if m.pos != meta.len() {
            return Err(MemoryError::CorruptBank(
                "trailing bytes in metadata".into(),
            ));
        }
        let entry = MemoryEntry {
            embedding: InstructionEmbedding { values },
            params: PolicyParams {
                theta,
                dim,
                version_tag: tag.clone(),
            },
            meta: EntryMeta {
                instruction,
                success_rate,
                training_iterations,
                task_complexity,
                created_at,
            },
        };
        entry
            .validate()
            .map_err(|e| MemoryError::CorruptBank(format!("entry {}: {e}", bank.entries.len())))?;
        bank.entries.push(entry);
    }
    if r.pos != body.len() {
        return Err(MemoryError::CorruptBank("trailing bytes".into()));
    }
    Ok(bank)
}

impl MemoryBank {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self)
    }

    pub fn from_bytes(data: &[u8], capacity: usize) -> Result<Self, MemoryError> {
        decode(data, capacity)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, encode(self))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a bank, keeping `capacity` (raised to the stored entry count if
    /// smaller).
    pub fn load(path: &Path, capacity: usize) -> Result<Self, MemoryError> {
        decode(&std::fs::read(path)?, capacity)
    }

    /// Loads a bank and requires its fingerprint to equal `expected_tag`.
    pub fn load_expecting(
        path: &Path,
        capacity: usize,
        expected_tag: &str,
    ) -> Result<Self, MemoryError> {
        let bank = Self::load(path, capacity)?;
        if bank.version_tag != expected_tag {
            return Err(MemoryError::VersionMismatch {
                expected: expected_tag.to_owned(),
                found: bank.version_tag,
            });
        }
        Ok(bank)
    }

    pub fn export(&self) -> BankExport {
        BankExport {
            format_version: FORMAT_VERSION,
            version_tag: self.version_tag.clone(),
            embedding_dim: self.embedding_dim,
            param_len: self.param_len,
            capacity: self.capacity,
            entries: self
                .entries
                .iter()
                .map(|e| ExportEntry {
                    meta: e.meta.clone(),
                    embedding: e.embedding.values.clone(),
                    theta: e.params.theta.clone(),
                })
                .collect(),
        }
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("bank serializes")
    }

    pub fn import_json(text: &str) -> Result<Self, MemoryError> {
        let ex: BankExport =
            serde_json::from_str(text).map_err(|e| MemoryError::CorruptBank(e.to_string()))?;
        let dim = dim_from_tag(&ex.version_tag, ex.param_len);
        let mut bank = MemoryBank::with_dim(
            ex.capacity.max(1),
            &ex.version_tag,
            ex.embedding_dim,
            ex.param_len,
        );
        for e in ex.entries {
            let entry = MemoryEntry {
                embedding: InstructionEmbedding {
                    values: e.embedding,
                },
                params: PolicyParams {
                    theta: e.theta,
                    dim,
                    version_tag: ex.version_tag.clone(),
                },
                meta: e.meta,
            };
            bank.check_entry(&entry)?;
            bank.entries.push(entry);
        }
        if bank.entries.len() > bank.capacity {
            return Err(MemoryError::CorruptBank(
                "more entries than capacity".into(),
            ));
        }
        Ok(bank)
    }
}

/// Lossless structured-text view of a bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankExport {
    pub format_version: u32,
    pub version_tag: String,
    pub embedding_dim: usize,
    pub param_len: usize,
    pub capacity: usize,
    pub entries: Vec<ExportEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEntry {
    #[serde(flatten)]
    pub meta: EntryMeta,
    pub embedding: Vec<f64>,
    pub theta: Vec<f64>,
}
