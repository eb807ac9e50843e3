//! Hybrid investor/company scoring.
//!
//! For a pair `(i, j)`:
//!
//! * content score `CBS`: the best cosine between company `j` and the
//!   companies in investor `i`'s training portfolio (`CC` is the argmax,
//!   `CCB` the first sentence of its description);
//! * collaborative score `CB`: the best `w1 * sim1 + w2 * sim2` over the
//!   training investors of `j`, where `sim1` is the latent (SVD) cosine and
//!   `sim2` the feature-vector cosine (`CI` is the argmax);
//! * final score `FS = w_CBS * CBS + w_CB * CB` when `CB > CBthresh`, else `CBS`.
//!
//! Both maxima start at 0 and only move on a strictly larger value, scanning
//! candidates in id order, so ties go to the smallest id and `CC`/`CI` stay
//! empty when nothing beats 0.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::collab::{CollabConfig, CollabError, LatentFactors, LatentIndex};
use crate::config::{ConfigError, KvConfig};
use crate::corpus::{Corpus, LinkMatrix, Pair};
use crate::embed::{CorpusVectors, EntityVector};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("unknown investor id {0:?}")]
    UnknownInvestor(String),
    #[error("unknown company id {0:?}")]
    UnknownCompany(String),
    #[error("vector dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("scoring artifacts are inconsistent: {0}")]
    Mismatch(String),
    #[error("top_n must be >= 1")]
    ZeroTopN,
    #[error("invalid score config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Collab(#[from] CollabError),
    #[error("breakdown TSV line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreConfig {
    /// Weight of the latent (interaction) similarity inside `CB`.
    pub w1: f64,
    /// Weight of the feature similarity inside `CB`.
    pub w2: f64,
    pub w_cbs: f64,
    pub w_cb: f64,
    /// `CB` must exceed this for the blend to apply.
    pub cb_thresh: f64,
    /// `FS` above this predicts a link.
    pub link_threshold: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.5,
            w_cbs: 0.5,
            w_cb: 0.5,
            cb_thresh: 0.5,
            link_threshold: 0.75,
        }
    }
}

impl ScoreConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        kv.set("w1", &mut c.w1)?;
        kv.set("w2", &mut c.w2)?;
        kv.set("w_cbs", &mut c.w_cbs)?;
        kv.set("w_cb", &mut c.w_cb)?;
        kv.set("cb_thresh", &mut c.cb_thresh)?;
        kv.set("link_threshold", &mut c.link_threshold)?;
        c.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let weights = [self.w1, self.w2, self.w_cbs, self.w_cb];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ScoreError::InvalidConfig("weights must be finite and >= 0".into()));
        }
        if (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return Err(ScoreError::InvalidConfig(format!(
                "w1 + w2 must equal 1, got {}",
                self.w1 + self.w2
            )));
        }
        if (self.w_cbs + self.w_cb - 1.0).abs() > 1e-9 {
            return Err(ScoreError::InvalidConfig(format!(
                "w_cbs + w_cb must equal 1, got {}",
                self.w_cbs + self.w_cb
            )));
        }
        if !self.cb_thresh.is_finite() || !self.link_threshold.is_finite() {
            return Err(ScoreError::InvalidConfig("thresholds must be finite".into()));
        }
        Ok(())
    }
}

/// `a.b / (|a| |b|)`, or 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, ScoreError> {
    if a.len() != b.len() {
        return Err(ScoreError::DimensionMismatch(a.len(), b.len()));
    }
    let na = norm(a);
    let nb = norm(b);
    Ok(cosine_with_norms(a, na, b, nb))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

/// Gated blend of the content and collaborative scores.
pub fn final_score(cbs: f64, cb: f64, config: &ScoreConfig) -> f64 {
    if cb > config.cb_thresh {
        config.w_cbs * cbs + config.w_cb * cb
    } else {
        cbs
    }
}

/// Text up to the first `.`, `?` or `!` that is followed by whitespace or the
/// end of the text. The terminator is dropped; no terminator keeps everything.
pub fn first_sentence(text: &str) -> &str {
    let mut chars = text.char_indices().peekable();
    while let Some((idx, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            match chars.peek() {
                None => return text[..idx].trim(),
                Some((_, next)) if next.is_whitespace() => return text[..idx].trim(),
                _ => {}
            }
        }
    }
    text.trim()
}

/// Everything computed for one `(investor, company)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBreakdown {
    pub investor_id: String,
    pub company_id: String,
    /// Content-based score.
    pub cbs: f64,
    /// Closest company in the investor's portfolio, or empty.
    pub cc: String,
    /// First sentence of the closest company's description.
    pub ccb: String,
    /// Collaborative score.
    pub cb: f64,
    /// Closest previous investor of the company, or empty.
    pub ci: String,
    pub sim1: f64,
    pub sim2: f64,
    pub fs: f64,
    pub link_predicted: bool,
    pub gate_open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentScore {
    pub cbs: f64,
    pub closest_company: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollaborativeScore {
    pub cb: f64,
    pub closest_investor: Option<usize>,
    pub sim1: f64,
    pub sim2: f64,
}

#[derive(Debug, Clone)]
struct VectorTable {
    rows: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl VectorTable {
    fn new(vectors: &[EntityVector]) -> Result<Self, ScoreError> {
        let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.flat().to_vec()).collect();
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(ScoreError::DimensionMismatch(first.len(), bad.len()));
            }
        }
        let norms = rows.iter().map(|r| norm(r)).collect();
        Ok(Self { rows, norms })
    }

    fn cosine(&self, a: usize, b: usize) -> f64 {
        cosine_with_norms(&self.rows[a], self.norms[a], &self.rows[b], self.norms[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    CompaniesForInvestor,
    InvestorsForCompany,
}

/// Scores pairs from a training matrix, entity vectors and latent factors.
#[derive(Debug, Clone)]
pub struct HybridScorer {
    train: LinkMatrix,
    config: ScoreConfig,
    company_first_sentences: Vec<String>,
    companies: VectorTable,
    investors: VectorTable,
    latent: LatentIndex,
    /// Per investor: training portfolio sorted by company id.
    portfolios: Vec<Vec<usize>>,
    /// Per company: training investors sorted by investor id.
    backers: Vec<Vec<usize>>,
    investor_lookup: HashMap<String, usize>,
    company_lookup: HashMap<String, usize>,
    investors_by_id: Vec<usize>,
    companies_by_id: Vec<usize>,
}

impl HybridScorer {
    /// `corpus` supplies records (its own links are ignored); `train` must
    /// share its axes, and `factors` must come from `train`.
    pub fn new(
        corpus: &Corpus,
        train: &LinkMatrix,
        vectors: &CorpusVectors,
        factors: &LatentFactors,
        collab: &CollabConfig,
        config: ScoreConfig,
    ) -> Result<Self, ScoreError> {
        config.validate()?;
        if !train.same_axes(&corpus.links) {
            return Err(ScoreError::Mismatch(
                "training matrix axes differ from the corpus records".into(),
            ));
        }
        factors.check_matches(train)?;
        let ids_match = |vs: &[EntityVector], ids: &[String]| {
            vs.len() == ids.len() && vs.iter().zip(ids).all(|(v, id)| &v.entity_id == id)
        };
        if !ids_match(&vectors.companies, train.company_ids())
            || !ids_match(&vectors.investors, train.investor_ids())
        {
            return Err(ScoreError::Mismatch(
                "entity vectors are not in corpus record order".into(),
            ));
        }

        let investors_by_id = sorted_by_id(train.investor_ids());
        let companies_by_id = sorted_by_id(train.company_ids());
        let investor_rank = rank_of(&investors_by_id);
        let company_rank = rank_of(&companies_by_id);
        let portfolios = (0..train.n_investors())
            .map(|i| {
                let mut p = train.companies_of(i).to_vec();
                p.sort_by_key(|&j| company_rank[j]);
                p
            })
            .collect();
        let backers = (0..train.n_companies())
            .map(|j| {
                let mut b = train.investors_of(j).to_vec();
                b.sort_by_key(|&i| investor_rank[i]);
                b
            })
            .collect();

        Ok(Self {
            train: train.clone(),
            config,
            company_first_sentences: corpus
                .companies
                .iter()
                .map(|c| first_sentence(&c.description).to_string())
                .collect(),
            companies: VectorTable::new(&vectors.companies)?,
            investors: VectorTable::new(&vectors.investors)?,
            latent: LatentIndex::new(factors, collab.scale_by_s),
            portfolios,
            backers,
            investor_lookup: index_map(train.investor_ids()),
            company_lookup: index_map(train.company_ids()),
            investors_by_id,
            companies_by_id,
        })
    }

    pub fn config(&self) -> &ScoreConfig {
        &self.config
    }

    pub fn train(&self) -> &LinkMatrix {
        &self.train
    }

    pub fn investor_index(&self, id: &str) -> Result<usize, ScoreError> {
        self.investor_lookup
            .get(id)
            .copied()
            .ok_or_else(|| ScoreError::UnknownInvestor(id.to_string()))
    }

    pub fn company_index(&self, id: &str) -> Result<usize, ScoreError> {
        self.company_lookup
            .get(id)
            .copied()
            .ok_or_else(|| ScoreError::UnknownCompany(id.to_string()))
    }

    fn check(&self, i: usize, j: usize) -> Result<(), ScoreError> {
        if i >= self.train.n_investors() {
            return Err(ScoreError::UnknownInvestor(format!("#{i}")));
        }
        if j >= self.train.n_companies() {
            return Err(ScoreError::UnknownCompany(format!("#{j}")));
        }
        Ok(())
    }

    /// Best cosine between company `j` and investor `i`'s portfolio
    /// (excluding `j` itself).
    pub fn content_score(&self, i: usize, j: usize) -> Result<ContentScore, ScoreError> {
        self.check(i, j)?;
        let mut best = ContentScore {
            cbs: 0.0,
            closest_company: None,
        };
        for &comp in &self.portfolios[i] {
            if comp == j {
                continue;
            }
            let cos = self.companies.cosine(j, comp);
            if cos > best.cbs {
                best = ContentScore {
                    cbs: cos,
                    closest_company: Some(comp),
                };
            }
        }
        Ok(best)
    }

    /// Best blended similarity between investor `i` and the training
    /// investors of company `j` (excluding `i` itself).
    pub fn collaborative_score(&self, i: usize, j: usize) -> Result<CollaborativeScore, ScoreError> {
        self.check(i, j)?;
        let mut best = CollaborativeScore {
            cb: 0.0,
            closest_investor: None,
            sim1: 0.0,
            sim2: 0.0,
        };
        for &inv in &self.backers[j] {
            if inv == i {
                continue;
            }
            let sim1 = self.latent.similarity(i, inv)?;
            let sim2 = self.investors.cosine(i, inv);
            let sim = self.config.w1 * sim1 + self.config.w2 * sim2;
            if sim > best.cb {
                best = CollaborativeScore {
                    cb: sim,
                    closest_investor: Some(inv),
                    sim1,
                    sim2,
                };
            }
        }
        Ok(best)
    }

    /// Full breakdown for a pair of indices.
    pub fn score_indices(&self, i: usize, j: usize) -> Result<ScoreBreakdown, ScoreError> {
        let content = self.content_score(i, j)?;
        let collab = self.collaborative_score(i, j)?;
        let fs = final_score(content.cbs, collab.cb, &self.config);
        let (cc, ccb) = match content.closest_company {
            Some(c) => (
                self.train.company_ids()[c].clone(),
                self.company_first_sentences[c].clone(),
            ),
            None => (String::new(), String::new()),
        };
        Ok(ScoreBreakdown {
            investor_id: self.train.investor_ids()[i].clone(),
            company_id: self.train.company_ids()[j].clone(),
            cbs: content.cbs,
            cc,
            ccb,
            cb: collab.cb,
            ci: collab
                .closest_investor
                .map(|c| self.train.investor_ids()[c].clone())
                .unwrap_or_default(),
            sim1: collab.sim1,
            sim2: collab.sim2,
            fs,
            link_predicted: fs > self.config.link_threshold,
            gate_open: collab.cb > self.config.cb_thresh,
        })
    }

    pub fn score_pair(&self, investor: &str, company: &str) -> Result<ScoreBreakdown, ScoreError> {
        self.score_indices(self.investor_index(investor)?, self.company_index(company)?)
    }

    /// Final score only.
    pub fn final_score_indices(&self, i: usize, j: usize) -> Result<f64, ScoreError> {
        let content = self.content_score(i, j)?;
        let collab = self.collaborative_score(i, j)?;
        Ok(final_score(content.cbs, collab.cb, &self.config))
    }

    /// Breakdowns for `pairs`, in input order. Runs on the current rayon pool.
    pub fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<ScoreBreakdown>, ScoreError> {
        pairs
            .par_iter()
            .map(|&(i, j)| self.score_indices(i, j))
            .collect()
    }

    /// Every pair, investor-major, both axes in id order. Lazy.
    pub fn score_all(&self) -> impl Iterator<Item = ScoreBreakdown> + '_ {
        self.investors_by_id.iter().flat_map(move |&i| {
            self.companies_by_id
                .iter()
                .map(move |&j| self.score_indices(i, j).expect("indices in range"))
        })
    }

    /// Same order as [`score_all`](Self::score_all), computed a block of
    /// investors at a time on the current rayon pool and handed to `sink`
    /// in order.
    pub fn score_all_chunked<E>(
        &self,
        investors_per_chunk: usize,
        mut sink: impl FnMut(&ScoreBreakdown) -> Result<(), E>,
    ) -> Result<(), E> {
        for chunk in self.investors_by_id.chunks(investors_per_chunk.max(1)) {
            let rows: Vec<Vec<ScoreBreakdown>> = chunk
                .par_iter()
                .map(|&i| {
                    self.companies_by_id
                        .iter()
                        .map(|&j| self.score_indices(i, j).expect("indices in range"))
                        .collect()
                })
                .collect();
            for b in rows.iter().flatten() {
                sink(b)?;
            }
        }
        Ok(())
    }

    /// Top `top_n` counterparts by final score (ties by id), skipping
    /// counterparts already linked in training.
    pub fn recommend(
        &self,
        entity: &str,
        direction: Direction,
        top_n: usize,
    ) -> Result<Vec<(String, f64)>, ScoreError> {
        if top_n == 0 {
            return Err(ScoreError::ZeroTopN);
        }
        let mut ranked: Vec<(String, f64)> = match direction {
            Direction::CompaniesForInvestor => {
                let i = self.investor_index(entity)?;
                self.companies_by_id
                    .par_iter()
                    .filter(|&&j| !self.train.contains(i, j))
                    .map(|&j| {
                        Ok((
                            self.train.company_ids()[j].clone(),
                            self.final_score_indices(i, j)?,
                        ))
                    })
                    .collect::<Result<_, ScoreError>>()?
            }
            Direction::InvestorsForCompany => {
                let j = self.company_index(entity)?;
                self.investors_by_id
                    .par_iter()
                    .filter(|&&i| !self.train.contains(i, j))
                    .map(|&i| {
                        Ok((
                            self.train.investor_ids()[i].clone(),
                            self.final_score_indices(i, j)?,
                        ))
                    })
                    .collect::<Result<_, ScoreError>>()?
            }
        };
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(top_n);
        Ok(ranked)
    }
}

fn sorted_by_id(ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    order
}

fn rank_of(order: &[usize]) -> Vec<usize> {
    let mut rank = vec![0; order.len()];
    for (r, &idx) in order.iter().enumerate() {
        rank[idx] = r;
    }
    rank
}

fn index_map(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

pub const BREAKDOWN_HEADER: &str =
    "investor_id\tcompany_id\tCBS\tCC\tCB\tCI\tsim1\tsim2\tFS\tlink_predicted";

pub fn format_breakdown_row(b: &ScoreBreakdown) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
        b.investor_id,
        b.company_id,
        b.cbs,
        b.cc,
        b.cb,
        b.ci,
        b.sim1,
        b.sim2,
        b.fs,
        u8::from(b.link_predicted)
    );
    s
}

/// Write the header and one row per breakdown.
pub fn write_breakdowns<'a>(
    mut w: impl Write,
    rows: impl IntoIterator<Item = &'a ScoreBreakdown>,
) -> std::io::Result<()> {
    writeln!(w, "{BREAKDOWN_HEADER}")?;
    for b in rows {
        writeln!(w, "{}", format_breakdown_row(b))?;
    }
    Ok(())
}

/// One parsed row of a breakdown TSV (values at the file's 6-decimal precision).
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub investor_id: String,
    pub company_id: String,
    pub cbs: f64,
    pub cc: String,
    pub cb: f64,
    pub ci: String,
    pub sim1: f64,
    pub sim2: f64,
    pub fs: f64,
    pub link_predicted: bool,
}

pub fn parse_breakdown_tsv(text: &str) -> Result<Vec<BreakdownRow>, ScoreError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == BREAKDOWN_HEADER => {}
        _ => {
            return Err(ScoreError::Parse {
                line: 1,
                message: "missing breakdown header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ScoreError::Parse {
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
        out.push(BreakdownRow {
            investor_id: f[0].to_string(),
            company_id: f[1].to_string(),
            cbs: num(f[2])?,
            cc: f[3].to_string(),
            cb: num(f[4])?,
            ci: f[5].to_string(),
            sim1: num(f[6])?,
            sim2: num(f[7])?,
            fs: num(f[8])?,
            link_predicted: match f[9] {
                "1" => true,
                "0" => false,
                other => return Err(err(format!("bad link_predicted {other:?}"))),
            },
        });
    }
    Ok(out)
}
