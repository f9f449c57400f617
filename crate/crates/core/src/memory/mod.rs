//! Experience memory: hashed instruction embeddings, similarity retrieval,
//! softmax-weighted parameter interpolation and a capacity-bounded bank.

mod format;

pub use format::{BankExport, ExportEntry, FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};

use crate::policy::{PolicyError, PolicyParams};

pub const EMBEDDING_DIM: usize = 768;
pub const DEFAULT_CAPACITY: usize = 100;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_TAU: f64 = 0.1;
/// Weight of the diversity term in the eviction score.
pub const DIVERSITY_WEIGHT: f64 = 0.5;

const HASH_SEED: u64 = 0x5eed_000b;

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("instruction has no tokens")]
    EmptyInstruction,
    #[error("architecture fingerprint mismatch: expected '{expected}', found '{found}'")]
    VersionMismatch { expected: String, found: String },
    #[error("no neighbors to interpolate")]
    EmptyNeighborSet,
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("corrupt memory bank: {0}")]
    CorruptBank(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Seeded 64-bit FNV-1a.
pub fn feature_hash(key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ HASH_SEED;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Token (+1) and adjacent-bigram (+0.5) counts hashed into `dim` buckets,
/// L2-normalized. `None` when the text has no tokens.
pub fn hashed_features(text: &str, dim: usize) -> Option<Vec<f64>> {
    let tokens = tokenize(text);
    if tokens.is_empty() || dim == 0 {
        return None;
    }
    let mut v = vec![0.0; dim];
    for t in &tokens {
        v[(feature_hash(t) % dim as u64) as usize] += 1.0;
    }
    for pair in tokens.windows(2) {
        let key = format!("{} {}", pair[0], pair[1]);
        v[(feature_hash(&key) % dim as u64) as usize] += 0.5;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Unit-norm instruction embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionEmbedding {
    pub values: Vec<f64>,
}

impl InstructionEmbedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &InstructionEmbedding) -> f64 {
        cosine(&self.values, &other.values)
    }

    fn to_f32_precision(&self) -> Self {
        InstructionEmbedding {
            values: self.values.iter().map(|v| f64::from(*v as f32)).collect(),
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn embed(instruction: &str) -> Result<InstructionEmbedding, MemoryError> {
    embed_dim(instruction, EMBEDDING_DIM)
}

pub fn embed_dim(instruction: &str, dim: usize) -> Result<InstructionEmbedding, MemoryError> {
    hashed_features(instruction, dim)
        .map(|values| InstructionEmbedding { values })
        .ok_or(MemoryError::EmptyInstruction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub instruction: String,
    pub success_rate: f64,
    pub training_iterations: u32,
    pub task_complexity: u32,
    /// Logical insertion stamp; smaller is older.
    pub created_at: i64,
}

/// A stored adaptation result. Embedding, parameters and success rate are
/// kept at f32 precision so the bank file reproduces them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub embedding: InstructionEmbedding,
    pub params: PolicyParams,
    pub meta: EntryMeta,
}

impl MemoryEntry {
    pub fn new(embedding: InstructionEmbedding, params: &PolicyParams, meta: EntryMeta) -> Self {
        let mut params = params.clone();
        params
            .theta
            .iter_mut()
            .for_each(|t| *t = f64::from(*t as f32));
        MemoryEntry {
            embedding: embedding.to_f32_precision(),
            params,
            meta: EntryMeta {
                success_rate: f64::from(meta.success_rate as f32),
                ..meta
            },
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if !(0.0..=1.0).contains(&self.meta.success_rate) {
            return Err(MemoryError::InvalidEntry(format!(
                "success rate {} outside [0, 1]",
                self.meta.success_rate
            )));
        }
        let norm = self
            .embedding
            .values
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(MemoryError::InvalidEntry(format!("embedding norm {norm}")));
        }
        self.params.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    pub entries: Vec<MemoryEntry>,
    pub capacity: usize,
    pub version_tag: String,
    pub embedding_dim: usize,
    pub param_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertOutcome {
    Added,
    Replaced,
    /// An entry for the same instruction with a higher success rate exists.
    Dropped,
    /// The named instruction was evicted to make room.
    Evicted(String),
}

impl MemoryBank {
    pub fn new(capacity: usize, version_tag: &str, param_len: usize) -> Self {
        Self::with_dim(capacity, version_tag, EMBEDDING_DIM, param_len)
    }

    pub fn with_dim(
        capacity: usize,
        version_tag: &str,
        embedding_dim: usize,
        param_len: usize,
    ) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        MemoryBank {
            entries: Vec::new(),
            capacity,
            version_tag: version_tag.to_owned(),
            embedding_dim,
            param_len,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stamp for the next inserted entry.
    pub fn next_timestamp(&self) -> i64 {
        self.entries
            .iter()
            .map(|e| e.meta.created_at + 1)
            .max()
            .unwrap_or(0)
    }

    fn check_entry(&self, entry: &MemoryEntry) -> Result<(), MemoryError> {
        if entry.params.version_tag != self.version_tag {
            return Err(MemoryError::VersionMismatch {
                expected: self.version_tag.clone(),
                found: entry.params.version_tag.clone(),
            });
        }
        if entry.embedding.dim() != self.embedding_dim || entry.params.theta.len() != self.param_len
        {
            return Err(MemoryError::InvalidEntry(format!(
                "entry shape ({}, {}) does not match bank ({}, {})",
                entry.embedding.dim(),
                entry.params.theta.len(),
                self.embedding_dim,
                self.param_len
            )));
        }
        entry.validate()
    }

    pub fn insert(&mut self, entry: MemoryEntry) -> Result<InsertOutcome, MemoryError> {
        insert(self, entry)
    }

    /// Eviction score: quality plus weighted distance to the nearest other entry.
    pub fn eviction_scores(&self) -> Vec<f64> {
        let n = self.entries.len();
        (0..n)
            .map(|i| {
                let diversity = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| 1.0 - self.entries[i].embedding.cosine(&self.entries[j].embedding))
                    .fold(f64::INFINITY, f64::min);
                let diversity = if diversity.is_finite() {
                    diversity
                } else {
                    1.0
                };
                self.entries[i].meta.success_rate + DIVERSITY_WEIGHT * diversity
            })
            .collect()
    }
}

pub fn insert(bank: &mut MemoryBank, entry: MemoryEntry) -> Result<InsertOutcome, MemoryError> {
    bank.check_entry(&entry)?;
    if let Some(i) = bank
        .entries
        .iter()
        .position(|e| e.meta.instruction == entry.meta.instruction)
    {
        if entry.meta.success_rate >= bank.entries[i].meta.success_rate {
            bank.entries[i] = entry;
            return Ok(InsertOutcome::Replaced);
        }
        return Ok(InsertOutcome::Dropped);
    }
    let mut outcome = InsertOutcome::Added;
    if bank.entries.len() >= bank.capacity {
        let scores = bank.eviction_scores();
        let mut worst = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s < scores[worst] {
                worst = i;
            }
        }
        let gone = bank.entries.remove(worst);
        tracing::debug!(instruction = %gone.meta.instruction, score = scores[worst], "evicted memory entry");
        outcome = InsertOutcome::Evicted(gone.meta.instruction);
    }
    bank.entries.push(entry);
    Ok(outcome)
}

/// Top-`k` entries by cosine similarity, descending. Ties go to the older
/// entry, then to the lexicographically smaller instruction.
pub fn retrieve<'a>(
    bank: &'a MemoryBank,
    query: &InstructionEmbedding,
    k: usize,
) -> Vec<(&'a MemoryEntry, f64)> {
    let mut scored: Vec<(&MemoryEntry, f64)> = bank
        .entries
        .iter()
        .map(|e| (e, e.embedding.cosine(query)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.0.meta.created_at.cmp(&b.0.meta.created_at))
            .then_with(|| a.0.meta.instruction.cmp(&b.0.meta.instruction))
    });
    scored.truncate(k);
    scored
}

/// `exp(c_j / tau)` normalized, computed after subtracting the maximum.
pub fn softmax_weights(cosines: &[f64], tau: f64) -> Vec<f64> {
    let max = cosines.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = cosines.iter().map(|c| ((c - max) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn interpolate(
    neighbors: &[(&MemoryEntry, f64)],
    tau: f64,
) -> Result<PolicyParams, MemoryError> {
    assert!(tau > 0.0, "tau must be positive");
    let (first, _) = neighbors.first().ok_or(MemoryError::EmptyNeighborSet)?;
    let tag = &first.params.version_tag;
    for (e, _) in neighbors {
        if &e.params.version_tag != tag || e.params.theta.len() != first.params.theta.len() {
            return Err(MemoryError::VersionMismatch {
                expected: tag.clone(),
                found: e.params.version_tag.clone(),
            });
        }
    }
    let cosines: Vec<f64> = neighbors.iter().map(|(_, c)| *c).collect();
    let weights = softmax_weights(&cosines, tau);
    let mut theta = vec![0.0; first.params.theta.len()];
    for ((e, _), w) in neighbors.iter().zip(&weights) {
        for (t, x) in theta.iter_mut().zip(&e.params.theta) {
            *t += w * x;
        }
    }
    // a convex combination of identical values must reproduce them exactly
    if neighbors.len() == 1 {
        theta.clone_from(&first.params.theta);
    }
    Ok(PolicyParams {
        theta,
        dim: first.params.dim,
        version_tag: tag.clone(),
    })
}

/// Interpolated warm start from the `k` nearest stored tasks, or `base`
/// unchanged when the bank is empty.
pub fn warm_start(
    bank: &MemoryBank,
    instruction: &str,
    base: &PolicyParams,
    k: usize,
    tau: f64,
) -> Result<PolicyParams, MemoryError> {
    if base.version_tag != bank.version_tag {
        return Err(MemoryError::VersionMismatch {
            expected: bank.version_tag.clone(),
            found: base.version_tag.clone(),
        });
    }
    if bank.is_empty() {
        return Ok(base.clone());
    }
    let query = embed_dim(instruction, bank.embedding_dim)?;
    interpolate(&retrieve(bank, &query, k), tau)
}
