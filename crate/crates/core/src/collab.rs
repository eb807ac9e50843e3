//! Truncated SVD of the training link matrix and latent investor similarity.
//!
//! `factorize` takes the 0/1 matrix as is (no centering or weighting) and
//! returns `u` (investor rows), `s` and `d` (company rows) truncated to rank
//! `k`. Singular vectors are sign-normalized so the largest-magnitude entry of
//! every column of `u` is positive, which makes the output reproducible.
//!
//! Latent similarity only uses directions with a nonzero singular value. The
//! remaining columns of `u` span the null space of the matrix and would
//! otherwise give investors without any training links a nonzero row.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::config::{parse_bool, ConfigError, KvConfig};
use crate::corpus::LinkMatrix;

/// Singular values at or below `RANK_TOL * s_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Latent rows with a norm at or below this are treated as zero rows.
pub const ZERO_ROW_TOL: f64 = 1e-9;

const MAGIC: &[u8; 8] = b"LATFACT1";

#[derive(Debug, thiserror::Error)]
pub enum CollabError {
    #[error("rank {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("cannot factorize a matrix without links")]
    EmptyMatrix,
    #[error("investor index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("factors do not match the link matrix: {0}")]
    Mismatch(String),
    #[error("bad factors file: {0}")]
    BadFormat(String),
    #[error("cannot access {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollabConfig {
    /// `None` means `min(64, n, m)`.
    pub rank: Option<usize>,
    /// Multiply latent rows by the singular values before taking cosines.
    pub scale_by_s: bool,
}

impl CollabConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut c = Self {
            rank: kv.get("collab.rank")?,
            ..Self::default()
        };
        if let Some(v) = kv.raw("collab.scale_by_s") {
            c.scale_by_s = parse_bool("collab.scale_by_s", v)?;
        }
        Ok(c)
    }

    pub fn rank_for(&self, matrix: &LinkMatrix) -> usize {
        self.rank
            .unwrap_or_else(|| default_rank(matrix.n_investors(), matrix.n_companies()))
    }
}

pub fn default_rank(n: usize, m: usize) -> usize {
    64.min(n.min(m))
}

/// SVD factors of an `n x m` link matrix truncated to rank `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    /// `n x k`, orthonormal columns.
    u: DMatrix<f64>,
    /// `k` values, nonincreasing.
    s: Vec<f64>,
    /// `m x k`, orthonormal columns.
    d: DMatrix<f64>,
}

impl LatentFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn n_investors(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_companies(&self) -> usize {
        self.d.nrows()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Number of leading singular values treated as nonzero.
    pub fn effective_rank(&self) -> usize {
        let max = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().take_while(|&&v| v > RANK_TOL * max).count()
    }

    /// `u * diag(s) * d^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (c, sv) in self.s.iter().enumerate() {
            us.column_mut(c).scale_mut(*sv);
        }
        us * self.d.transpose()
    }

    /// Row `i` of `u` restricted to the effective rank, optionally scaled by `s`.
    pub fn investor_row(&self, i: usize, scale_by_s: bool) -> Result<Vec<f64>, CollabError> {
        if i >= self.n_investors() {
            return Err(CollabError::IndexOutOfRange(i));
        }
        Ok((0..self.effective_rank())
            .map(|c| {
                let x = self.u[(i, c)];
                if scale_by_s {
                    x * self.s[c]
                } else {
                    x
                }
            })
            .collect())
    }

    pub fn check_matches(&self, matrix: &LinkMatrix) -> Result<(), CollabError> {
        if self.n_investors() != matrix.n_investors() || self.n_companies() != matrix.n_companies() {
            return Err(CollabError::Mismatch(format!(
                "factors are {}x{}, matrix is {}x{}",
                self.n_investors(),
                self.n_companies(),
                matrix.n_investors(),
                matrix.n_companies()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (k, n, m) = (self.rank(), self.n_investors(), self.n_companies());
        let mut out = Vec::with_capacity(32 + 8 * k * (1 + n + m));
        out.extend_from_slice(MAGIC);
        for dim in [k, n, m] {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in &self.s {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for mat in [&self.u, &self.d] {
            for r in 0..mat.nrows() {
                for c in 0..k {
                    out.extend_from_slice(&mat[(r, c)].to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CollabError> {
        let bad = |m: &str| CollabError::BadFormat(m.to_string());
        if bytes.len() < 32 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic header"));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let (k, n, m) = (word(8) as usize, word(16) as usize, word(24) as usize);
        let expected = k
            .checked_add(n.checked_mul(k).ok_or_else(|| bad("size overflow"))?)
            .and_then(|x| x.checked_add(m.checked_mul(k)?))
            .and_then(|x| x.checked_mul(8))
            .and_then(|x| x.checked_add(32))
            .ok_or_else(|| bad("size overflow"))?;
        if bytes.len() != expected {
            return Err(CollabError::BadFormat(format!(
                "expected {expected} bytes for k={k}, n={n}, m={m}, found {}",
                bytes.len()
            )));
        }
        let mut floats = bytes[32..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let s: Vec<f64> = floats.by_ref().take(k).collect();
        let u = DMatrix::from_row_iterator(n, k, floats.by_ref().take(n * k));
        let d = DMatrix::from_row_iterator(m, k, floats.by_ref().take(m * k));
        Ok(Self { u, s, d })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, CollabError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|source| CollabError::Io {
            path: "<reader>".into(),
            source,
        })?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<(), CollabError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CollabError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CollabError> {
        let bytes = std::fs::read(path).map_err(|source| CollabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// Dense 0/1 copy of the link matrix.
pub fn dense_links(matrix: &LinkMatrix) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(matrix.n_investors(), matrix.n_companies());
    for (i, j) in matrix.links() {
        a[(i, j)] = 1.0;
    }
    a
}

pub fn factorize(train: &LinkMatrix, k: usize) -> Result<LatentFactors, CollabError> {
    let max = train.n_investors().min(train.n_companies());
    if train.is_empty() {
        return Err(CollabError::EmptyMatrix);
    }
    if k == 0 || k > max {
        return Err(CollabError::RankOutOfRange { k, max });
    }
    let svd = dense_links(train).svd(true, true);
    let u_full = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    let values = svd.singular_values;

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);

    let mut u = DMatrix::zeros(train.n_investors(), k);
    let mut d = DMatrix::zeros(train.n_companies(), k);
    let mut s = Vec::with_capacity(k);
    for (c, &src) in order.iter().enumerate() {
        u.set_column(c, &u_full.column(src));
        d.set_column(c, &v_t.row(src).transpose());
        s.push(values[src].max(0.0));
    }
    for c in 0..k {
        let col = u.column(c);
        let mut pivot = 0;
        for r in 1..col.len() {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            u.column_mut(c).neg_mut();
            d.column_mut(c).neg_mut();
        }
    }
    Ok(LatentFactors { u, s, d })
}

/// Precomputed latent rows and norms for repeated similarity queries.
#[derive(Debug, Clone)]
pub struct LatentIndex {
    rows: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl LatentIndex {
    pub fn new(factors: &LatentFactors, scale_by_s: bool) -> Self {
        let rows: Vec<Vec<f64>> = (0..factors.n_investors())
            .map(|i| factors.investor_row(i, scale_by_s).expect("index in range"))
            .collect();
        let norms = rows
            .iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Self { rows, norms }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cosine of two latent rows; 0 when either row is (numerically) zero.
    pub fn similarity(&self, i: usize, inv: usize) -> Result<f64, CollabError> {
        for idx in [i, inv] {
            if idx >= self.rows.len() {
                return Err(CollabError::IndexOutOfRange(idx));
            }
        }
        let (na, nb) = (self.norms[i], self.norms[inv]);
        if na <= ZERO_ROW_TOL || nb <= ZERO_ROW_TOL {
            return Ok(0.0);
        }
        let dot: f64 = self.rows[i].iter().zip(&self.rows[inv]).map(|(a, b)| a * b).sum();
        Ok(dot / (na * nb))
    }
}

/// Cosine between the latent rows `u[i]` and `u[inv]`.
pub fn latent_similarity(factors: &LatentFactors, i: usize, inv: usize) -> Result<f64, CollabError> {
    let a = factors.investor_row(i, false)?;
    let b = factors.investor_row(inv, false)?;
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na <= ZERO_ROW_TOL || nb <= ZERO_ROW_TOL {
        return Ok(0.0);
    }
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}
