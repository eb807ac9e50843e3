//! Naive reference implementations shared by the integration tests.
//!
//! Nothing in here calls into the scoring or factorization code of the
//! library: latent factors come from a cyclic Jacobi eigendecomposition of
//! the Gram matrix `A A^T`, and every score is an exhaustive loop over plain
//! `Vec<f64>` data.

#![allow(dead_code)]

use invmatch::{
    factorize, generate_synthetic, split_links, CollabConfig, Corpus, CorpusVectors,
    EmbedConfig, HybridScorer, LatentFactors, LinkMatrix, PipelineConfig, Providers,
    ScoreConfig, Split, SyntheticConfig,
};

pub type Matrix = Vec<Vec<f64>>;

pub fn dense(train: &LinkMatrix) -> Matrix {
    let mut a = vec![vec![0.0; train.n_companies()]; train.n_investors()];
    for (i, j) in train.links() {
        a[i][j] = 1.0;
    }
    a
}

pub fn gram(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut g = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            g[r][c] = a[r].iter().zip(&a[c]).map(|(x, y)| x * y).sum();
        }
    }
    g
}

/// Cyclic Jacobi for a symmetric matrix. Returns eigenvalues sorted
/// descending and the matching eigenvectors as columns (`vecs[row][col]`).
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(sym: &Matrix) -> (Vec<f64>, Matrix) {
    let n = sym.len();
    let mut a = sym.clone();
    let mut v = vec![vec![0.0; n]; n];
    for (k, row) in v.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        let scale: f64 = (0..n).map(|p| a[p][p] * a[p][p]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vecs = (0..n)
        .map(|r| order.iter().map(|&k| v[r][k]).collect())
        .collect();
    (values, vecs)
}

/// Singular values of `a` (descending) from the Gram eigenvalues.
pub fn naive_singular_values(a: &Matrix) -> Vec<f64> {
    let (values, _) = jacobi_eigen(&gram(a));
    values.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Investor latent rows: eigenvectors of `A A^T` for the eigenvalues that
/// are numerically nonzero, optionally scaled by the singular value.
pub fn naive_latent_rows(a: &Matrix, scale_by_s: bool) -> Matrix {
    let (values, vecs) = jacobi_eigen(&gram(a));
    let top = values.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] > 1e-10 * top)
        .collect();
    (0..a.len())
        .map(|r| {
            keep.iter()
                .map(|&k| {
                    let s = if scale_by_s { values[k].sqrt() } else { 1.0 };
                    vecs[r][k] * s
                })
                .collect()
        })
        .collect()
}

pub fn naive_cosine(a: &[f64], b: &[f64], zero_tol: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na <= zero_tol || nb <= zero_tol {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBreakdown {
    pub cbs: f64,
    pub cc: Option<usize>,
    pub cb: f64,
    pub ci: Option<usize>,
    pub fs: f64,
}

/// Exhaustive-loop scorer over plain vectors.
pub struct NaiveScorer {
    pub train: Matrix,
    pub company_vecs: Matrix,
    pub investor_vecs: Matrix,
    pub latent: Matrix,
    pub company_ids: Vec<String>,
    pub investor_ids: Vec<String>,
    pub config: ScoreConfig,
}

impl NaiveScorer {
    pub fn new(
        train: &LinkMatrix,
        vectors: &CorpusVectors,
        scale_by_s: bool,
        config: ScoreConfig,
    ) -> Self {
        let a = dense(train);
        Self {
            latent: naive_latent_rows(&a, scale_by_s),
            train: a,
            company_vecs: vectors.companies.iter().map(|v| v.flat().to_vec()).collect(),
            investor_vecs: vectors.investors.iter().map(|v| v.flat().to_vec()).collect(),
            company_ids: train.company_ids().to_vec(),
            investor_ids: train.investor_ids().to_vec(),
            config,
        }
    }

    fn by_id(ids: &[String]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&x, &y| ids[x].cmp(&ids[y]));
        order
    }

    pub fn score(&self, i: usize, j: usize) -> NaiveBreakdown {
        let mut cbs = 0.0;
        let mut cc = None;
        for k in Self::by_id(&self.company_ids) {
            if k == j || self.train[i][k] == 0.0 {
                continue;
            }
            let cos = naive_cosine(&self.company_vecs[j], &self.company_vecs[k], 0.0);
            if cos > cbs {
                cbs = cos;
                cc = Some(k);
            }
        }
        let mut cb = 0.0;
        let mut ci = None;
        for v in Self::by_id(&self.investor_ids) {
            if v == i || self.train[v][j] == 0.0 {
                continue;
            }
            let sim1 = naive_cosine(&self.latent[i], &self.latent[v], 1e-9);
            let sim2 = naive_cosine(&self.investor_vecs[i], &self.investor_vecs[v], 0.0);
            let sim = self.config.w1 * sim1 + self.config.w2 * sim2;
            if sim > cb {
                cb = sim;
                ci = Some(v);
            }
        }
        let fs = if cb > self.config.cb_thresh {
            self.config.w_cbs * cbs + self.config.w_cb * cb
        } else {
            cbs
        };
        NaiveBreakdown { cbs, cc, cb, ci, fs }
    }
}

/// A seeded synthetic corpus with its split, stub vectors and factors.
pub struct Fixture {
    pub corpus: Corpus,
    pub split: Split,
    pub vectors: CorpusVectors,
    pub factors: LatentFactors,
    pub config: PipelineConfig,
}

impl Fixture {
    pub fn new(investors: usize, companies: usize, seed: u64, scale_by_s: bool) -> Self {
        let mut config = PipelineConfig::default().with_seed(seed);
        config.synthetic = SyntheticConfig {
            investors,
            companies,
            seed,
            ..SyntheticConfig::default()
        };
        config.collab.scale_by_s = scale_by_s;
        Self::from_config(config)
    }

    pub fn from_config(config: PipelineConfig) -> Self {
        let corpus = generate_synthetic(&config.synthetic, &config.rounds)
            .expect("synthetic config is valid")
            .corpus;
        let split = split_links(&corpus.links, &config.split).expect("split");
        let vectors = CorpusVectors::build(&corpus, &Providers::stub(&config.embed), &config.embed)
            .expect("stub vectors");
        let factors = factorize(&split.train, config.collab.rank_for(&split.train)).expect("svd");
        Self {
            corpus,
            split,
            vectors,
            factors,
            config,
        }
    }

    pub fn scorer(&self) -> HybridScorer {
        HybridScorer::new(
            &self.corpus,
            &self.split.train,
            &self.vectors,
            &self.factors,
            &self.config.collab,
            self.config.score.clone(),
        )
        .expect("scorer")
    }

    pub fn naive(&self) -> NaiveScorer {
        NaiveScorer::new(
            &self.split.train,
            &self.vectors,
            self.config.collab.scale_by_s,
            self.config.score.clone(),
        )
    }
}

/// Stub vectors for a corpus under the default embedding config.
pub fn stub_vectors(corpus: &Corpus) -> CorpusVectors {
    let embed = EmbedConfig::default();
    CorpusVectors::build(corpus, &Providers::stub(&embed), &embed).expect("stub vectors")
}

pub fn default_collab() -> CollabConfig {
    CollabConfig::default()
}

/// Random 0/1 matrix with the given density.
pub fn random_binary(rows: usize, cols: usize, density: f64, rng: &mut impl rand::Rng) -> Matrix {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random_bool(density) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}
