//! Text embedding providers and the embedding TSV format.
//!
//! The TSV starts with a `#dim=D` header, followed by one row per text:
//! `text<TAB>v1,v2,...,vD`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EmbedError;

/// Maps text to a dense vector of fixed dimension.
pub trait TextEmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Empty text maps to the zero vector.
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Deterministic bag-of-tokens embedding.
///
/// Text is lowercased and split on non-alphanumeric characters. Each token is
/// hashed (together with the seed) to a pseudo-random `±1/sqrt(D)` vector; the
/// token vectors are summed and the sum is scaled to unit length. Texts that
/// share tokens therefore land close together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashStubProvider {
    dimension: usize,
    seed: u64,
}

pub fn hash_stub_provider(dimension: usize, seed: u64) -> Result<HashStubProvider, EmbedError> {
    if dimension == 0 {
        return Err(EmbedError::InvalidDimension(0));
    }
    Ok(HashStubProvider { dimension, seed })
}

fn fnv1a(seed: u64, token: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

impl HashStubProvider {
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl TextEmbeddingProvider for HashStubProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut acc = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        let scale = 1.0 / (self.dimension as f64).sqrt();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(self.seed, token));
            for slot in acc.iter_mut() {
                *slot += if rng.random_bool(0.5) { scale } else { -scale };
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            acc.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(acc)
    }
}

/// Text vectors read from (or destined for) an embedding TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension == 0 {
            return Err(EmbedError::InvalidDimension(0));
        }
        Ok(Self {
            dimension,
            vectors: BTreeMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&[f64]> {
        self.vectors.get(text).map(Vec::as_slice)
    }

    pub fn insert(&mut self, text: String, vector: Vec<f64>) -> Result<(), EmbedError> {
        if text.is_empty() || text.contains(['\t', '\n', '\r']) {
            return Err(EmbedError::UnwritableText(text));
        }
        if vector.len() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                got: vector.len(),
                context: format!("vector for {text:?}"),
            });
        }
        self.vectors.insert(text, vector);
        Ok(())
    }

    /// Embed every text with `provider`.
    pub fn from_provider<'a>(
        provider: &dyn TextEmbeddingProvider,
        texts: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, EmbedError> {
        let mut table = Self::new(provider.dimension())?;
        for t in texts {
            if !t.is_empty() {
                table.insert(t.to_string(), provider.embed(t)?)?;
            }
        }
        Ok(table)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Read an embedding TSV.
pub fn load_embedding_file(path: &Path) -> Result<EmbeddingTable, EmbedError> {
    let text = fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embedding_tsv(&text)
}

pub fn parse_embedding_tsv(text: &str) -> Result<EmbeddingTable, EmbedError> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: String| EmbedError::Parse { line, message };
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `#dim=D` header".into()))?;
    let dim: usize = header
        .trim()
        .strip_prefix("#dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| parse_err(1, format!("bad header {header:?}, expected `#dim=D`")))?;
    let mut table = EmbeddingTable::new(dim)?;
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (key, values) = line
            .rsplit_once('\t')
            .ok_or_else(|| parse_err(idx + 1, "expected `text<TAB>v1,...,vD`".into()))?;
        let vector = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if vector.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                got: vector.len(),
                context: format!("line {}", idx + 1),
            });
        }
        if table.vectors.insert(key.to_string(), vector).is_some() {
            return Err(parse_err(idx + 1, format!("duplicate text {key:?}")));
        }
    }
    Ok(table)
}

/// Serialize a table: header, then rows sorted by text.
pub fn format_embedding_tsv(table: &EmbeddingTable) -> String {
    let mut out = format!("#dim={}\n", table.dimension);
    for (text, v) in &table.vectors {
        out.push_str(text);
        out.push('\t');
        for (k, x) in v.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

pub fn write_embedding_file(path: &Path, table: &EmbeddingTable) -> Result<(), EmbedError> {
    fs::write(path, format_embedding_tsv(table)).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Serves vectors from an [`EmbeddingTable`]. Unknown texts are an error in
/// strict mode, otherwise they go to the fallback stub.
pub struct FileProvider {
    table: HashMap<String, Vec<f64>>,
    dimension: usize,
    fallback: Option<HashStubProvider>,
}

impl FileProvider {
    pub fn strict(table: EmbeddingTable) -> Self {
        Self {
            dimension: table.dimension,
            table: table.vectors.into_iter().collect(),
            fallback: None,
        }
    }

    /// Fall back to a hash stub of the table's dimension for unknown texts.
    pub fn with_fallback(table: EmbeddingTable, stub_seed: u64) -> Self {
        let fallback = HashStubProvider {
            dimension: table.dimension,
            seed: stub_seed,
        };
        Self {
            fallback: Some(fallback),
            ..Self::strict(table)
        }
    }
}

impl TextEmbeddingProvider for FileProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        if text.is_empty() {
            return Ok(vec![0.0; self.dimension]);
        }
        match (self.table.get(text), &self.fallback) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(stub)) => stub.embed(text),
            (None, None) => Err(EmbedError::UnknownText(text.to_string())),
        }
    }
}
