//! Company/investor records, the binary link matrix, and corpus file I/O.
//!
//! A corpus directory holds three UTF-8 files:
//!
//! * `companies.jsonl`: one [`CompanyRecord`] object per line
//! * `investors.jsonl`: one [`InvestorRecord`] object per line
//! * `links.tsv`: one `investor_id<TAB>company_id` pair per line

mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use split::{split_links, Split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticCorpus};

pub const COMPANIES_FILE: &str = "companies.jsonl";
pub const INVESTORS_FILE: &str = "investors.jsonl";
pub const LINKS_FILE: &str = "links.tsv";

/// `(investor_index, company_index)` into a [`LinkMatrix`].
pub type Pair = (usize, usize);

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: link references unknown {kind} id {id:?}")]
    DanglingLink {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("duplicate link ({investor:?}, {company:?})")]
    DuplicateLink { investor: String, company: String },
    #[error("invalid id {0:?}: ids must be nonempty and free of tabs and newlines")]
    InvalidId(String),
    #[error("round label {0:?} is not in the round vocabulary")]
    UnknownRound(String),
    #[error("round vocabulary must be nonempty with unique labels")]
    BadVocabulary,
    #[error("link index ({0}, {1}) out of range")]
    IndexOutOfRange(usize, usize),
    #[error("link matrix has no links")]
    NoLinks,
    #[error("cannot draw {wanted} negative pairs: only {available} unlinked pairs exist")]
    InsufficientNegatives { wanted: usize, available: usize },
    #[error("invalid synthetic config: {0}")]
    Synthetic(String),
    #[error("invalid split spec: {0}")]
    Split(String),
    #[error("cannot access {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Ordered list of funding-round labels shared by the whole corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundVocabulary(Vec<String>);

impl Default for RoundVocabulary {
    fn default() -> Self {
        Self(
            ["Seed", "Series A", "Series B", "Series C", "Later"]
                .map(String::from)
                .to_vec(),
        )
    }
}

impl RoundVocabulary {
    pub fn new(labels: Vec<String>) -> Result<Self, CorpusError> {
        let unique: BTreeSet<&String> = labels.iter().collect();
        if labels.is_empty() || unique.len() != labels.len() {
            return Err(CorpusError::BadVocabulary);
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanyRecord {
    pub id: String,
    pub description: String,
    pub industry_focus: Vec<String>,
    pub year_founded: i32,
    /// `"city, state, country"`.
    pub location: String,
    pub funding_rounds: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestorRecord {
    pub id: String,
    pub round_deal_counts: BTreeMap<String, u64>,
    pub industry_deal_counts: BTreeMap<String, u64>,
    pub location: String,
}

/// Sparse binary investor x company matrix. A set cell means the investor
/// historically invested in the company.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkMatrix {
    investor_ids: Vec<String>,
    company_ids: Vec<String>,
    links: BTreeSet<Pair>,
    by_investor: Vec<Vec<usize>>,
    by_company: Vec<Vec<usize>>,
}

impl LinkMatrix {
    pub fn new(
        investor_ids: Vec<String>,
        company_ids: Vec<String>,
        links: impl IntoIterator<Item = Pair>,
    ) -> Result<Self, CorpusError> {
        check_ids("investor", &investor_ids)?;
        check_ids("company", &company_ids)?;
        Self::from_parts(investor_ids, company_ids, links)
    }

    fn from_parts(
        investor_ids: Vec<String>,
        company_ids: Vec<String>,
        links: impl IntoIterator<Item = Pair>,
    ) -> Result<Self, CorpusError> {
        let (n, m) = (investor_ids.len(), company_ids.len());
        let mut set = BTreeSet::new();
        for (i, j) in links {
            if i >= n || j >= m {
                return Err(CorpusError::IndexOutOfRange(i, j));
            }
            if !set.insert((i, j)) {
                return Err(CorpusError::DuplicateLink {
                    investor: investor_ids[i].clone(),
                    company: company_ids[j].clone(),
                });
            }
        }
        let mut by_investor = vec![Vec::new(); n];
        let mut by_company = vec![Vec::new(); m];
        for &(i, j) in &set {
            by_investor[i].push(j);
            by_company[j].push(i);
        }
        Ok(Self {
            investor_ids,
            company_ids,
            links: set,
            by_investor,
            by_company,
        })
    }

    /// A matrix over the same investors and companies with a different link set.
    pub fn with_links(&self, links: impl IntoIterator<Item = Pair>) -> Result<Self, CorpusError> {
        Self::from_parts(self.investor_ids.clone(), self.company_ids.clone(), links)
    }

    pub fn n_investors(&self) -> usize {
        self.investor_ids.len()
    }

    pub fn n_companies(&self) -> usize {
        self.company_ids.len()
    }

    /// Number of set cells.
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, investor: usize, company: usize) -> bool {
        self.links.contains(&(investor, company))
    }

    /// Links in `(investor, company)` index order.
    pub fn links(&self) -> impl Iterator<Item = Pair> + '_ {
        self.links.iter().copied()
    }

    pub fn investor_ids(&self) -> &[String] {
        &self.investor_ids
    }

    pub fn company_ids(&self) -> &[String] {
        &self.company_ids
    }

    pub fn investor_index(&self, id: &str) -> Option<usize> {
        self.investor_ids.iter().position(|x| x == id)
    }

    pub fn company_index(&self, id: &str) -> Option<usize> {
        self.company_ids.iter().position(|x| x == id)
    }

    /// Companies linked to `investor`, in index order.
    pub fn companies_of(&self, investor: usize) -> &[usize] {
        &self.by_investor[investor]
    }

    /// Investors linked to `company`, in index order.
    pub fn investors_of(&self, company: usize) -> &[usize] {
        &self.by_company[company]
    }

    /// Same links and axes check; used to make sure artifacts were built
    /// against the matrix they are being combined with.
    pub fn same_axes(&self, other: &LinkMatrix) -> bool {
        self.investor_ids == other.investor_ids && self.company_ids == other.company_ids
    }
}

fn check_ids(kind: &'static str, ids: &[String]) -> Result<(), CorpusError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() || id.contains(['\t', '\n', '\r']) {
            return Err(CorpusError::InvalidId(id.clone()));
        }
        if !seen.insert(id.as_str()) {
            return Err(CorpusError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// `companies.jsonl` + `investors.jsonl` + `links.tsv`.
    #[default]
    JsonLines,
}

/// Records plus their link matrix. Matrix axes follow record order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub rounds: RoundVocabulary,
    pub companies: Vec<CompanyRecord>,
    pub investors: Vec<InvestorRecord>,
    pub links: LinkMatrix,
}

impl Corpus {
    /// Validate records against the vocabulary and assemble the corpus.
    pub fn new(
        rounds: RoundVocabulary,
        companies: Vec<CompanyRecord>,
        investors: Vec<InvestorRecord>,
        links: impl IntoIterator<Item = Pair>,
    ) -> Result<Self, CorpusError> {
        for c in &companies {
            if let Some(r) = c.funding_rounds.iter().find(|r| rounds.position(r).is_none()) {
                return Err(CorpusError::UnknownRound(r.clone()));
            }
        }
        for inv in &investors {
            if let Some(r) = inv
                .round_deal_counts
                .keys()
                .find(|r| rounds.position(r).is_none())
            {
                return Err(CorpusError::UnknownRound(r.clone()));
            }
        }
        let links = LinkMatrix::new(
            investors.iter().map(|r| r.id.clone()).collect(),
            companies.iter().map(|r| r.id.clone()).collect(),
            links,
        )?;
        Ok(Self {
            rounds,
            companies,
            investors,
            links,
        })
    }

    /// The same records with a different link set (e.g. a training split).
    pub fn with_links(&self, links: LinkMatrix) -> Self {
        debug_assert!(links.same_axes(&self.links));
        Self {
            rounds: self.rounds.clone(),
            companies: self.companies.clone(),
            investors: self.investors.clone(),
            links,
        }
    }

    /// Keep only the given investors (by index, in the given order) and their links.
    pub fn subset_investors(&self, keep: &[usize]) -> Result<Self, CorpusError> {
        let investors: Vec<InvestorRecord> =
            keep.iter().map(|&i| self.investors[i].clone()).collect();
        let mut links = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            links.extend(self.links.companies_of(old_i).iter().map(|&j| (new_i, j)));
        }
        Self::new(self.rounds.clone(), self.companies.clone(), investors, links)
    }
}

/// Load a corpus directory.
pub fn load_corpus(
    dir: &Path,
    format: CorpusFormat,
    rounds: &RoundVocabulary,
) -> Result<Corpus, CorpusError> {
    let CorpusFormat::JsonLines = format;
    let companies: Vec<CompanyRecord> = read_jsonl(&dir.join(COMPANIES_FILE))?;
    let investors: Vec<InvestorRecord> = read_jsonl(&dir.join(INVESTORS_FILE))?;
    check_ids("company", &companies.iter().map(|c| c.id.clone()).collect::<Vec<_>>())?;
    check_ids("investor", &investors.iter().map(|c| c.id.clone()).collect::<Vec<_>>())?;
    let investor_index: HashMap<&str, usize> = investors
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let company_index: HashMap<&str, usize> = companies
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let links = read_pairs_with(&dir.join(LINKS_FILE), &investor_index, &company_index)?;
    Corpus::new(rounds.clone(), companies, investors, links)
}

/// Write a corpus directory. The output is byte-stable for a given corpus.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_jsonl(&dir.join(COMPANIES_FILE), &corpus.companies)?;
    write_jsonl(&dir.join(INVESTORS_FILE), &corpus.investors)?;
    write_pairs(&dir.join(LINKS_FILE), &corpus.links, corpus.links.links())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            file: file.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Read a pair file (`investor_id<TAB>company_id` per line) against the axes of `matrix`.
pub fn read_pairs(path: &Path, matrix: &LinkMatrix) -> Result<Vec<Pair>, CorpusError> {
    let investor_index: HashMap<&str, usize> = matrix
        .investor_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let company_index: HashMap<&str, usize> = matrix
        .company_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    read_pairs_with(path, &investor_index, &company_index)
}

fn read_pairs_with(
    path: &Path,
    investor_index: &HashMap<&str, usize>,
    company_index: &HashMap<&str, usize>,
) -> Result<Vec<Pair>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file = path.display().to_string();
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((inv, comp)) = line.split_once('\t') else {
            return Err(CorpusError::Parse {
                file,
                line: idx + 1,
                message: "expected `investor_id<TAB>company_id`".to_string(),
            });
        };
        let i = *investor_index
            .get(inv)
            .ok_or_else(|| CorpusError::DanglingLink {
                file: file.clone(),
                line: idx + 1,
                kind: "investor",
                id: inv.to_string(),
            })?;
        let j = *company_index
            .get(comp)
            .ok_or_else(|| CorpusError::DanglingLink {
                file: file.clone(),
                line: idx + 1,
                kind: "company",
                id: comp.to_string(),
            })?;
        pairs.push((i, j));
    }
    Ok(pairs)
}

/// Write pairs as `investor_id<TAB>company_id` lines using the ids of `matrix`.
pub fn write_pairs(
    path: &Path,
    matrix: &LinkMatrix,
    pairs: impl IntoIterator<Item = Pair>,
) -> Result<(), CorpusError> {
    let mut text = String::new();
    for (i, j) in pairs {
        let _ = writeln!(
            text,
            "{}\t{}",
            matrix.investor_ids()[i],
            matrix.company_ids()[j]
        );
    }
    fs::write(path, text).map_err(io_err(path))
}
