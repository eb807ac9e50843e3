//! Entity vectors built from attribute encoders.
//!
//! A company vector is the concatenation of four blocks: funding status
//! (multi-label binarizer over the round vocabulary), description, industry
//! focus and location. An investor vector concatenates funding style (deal
//! share per round), industry preference (deal-weighted average of industry
//! embeddings) and location.

mod provider;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{parse_bool, ConfigError, KvConfig};
use crate::corpus::{CompanyRecord, Corpus, InvestorRecord, RoundVocabulary};

pub use provider::{
    format_embedding_tsv, hash_stub_provider, load_embedding_file, parse_embedding_tsv,
    write_embedding_file, EmbeddingTable, FileProvider, HashStubProvider, TextEmbeddingProvider,
};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("round label {0:?} is not in the round vocabulary")]
    UnknownRound(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },
    #[error("no embedding for text {0:?}")]
    UnknownText(String),
    #[error("embedding dimension must be >= 1, got {0}")]
    InvalidDimension(usize),
    #[error("text {0:?} cannot be stored in an embedding file")]
    UnwritableText(String),
    #[error("embedding file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot access {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Named segment of an entity vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    FundingStatus,
    Description,
    IndustryFocus,
    Location,
    YearFounded,
    FundingStyle,
    IndustryPreference,
}

impl Block {
    pub const ALL: [Block; 7] = [
        Block::FundingStatus,
        Block::Description,
        Block::IndustryFocus,
        Block::Location,
        Block::YearFounded,
        Block::FundingStyle,
        Block::IndustryPreference,
    ];

    /// The four company feature blocks, in vector order.
    pub const COMPANY_FEATURES: [Block; 4] = [
        Block::FundingStatus,
        Block::Description,
        Block::IndustryFocus,
        Block::Location,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::FundingStatus => "funding_status",
            Block::Description => "description",
            Block::IndustryFocus => "industry_focus",
            Block::Location => "location",
            Block::YearFounded => "year_founded",
            Block::FundingStyle => "funding_style",
            Block::IndustryPreference => "industry_preference",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Block::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown block {s:?}"))
    }
}

/// Concatenated representation of one company or investor.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityVector {
    pub entity_id: String,
    blocks: Vec<(Block, Vec<f64>)>,
    flat: Vec<f64>,
}

impl EntityVector {
    pub fn new(entity_id: impl Into<String>, blocks: Vec<(Block, Vec<f64>)>) -> Self {
        let flat = blocks.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        Self {
            entity_id: entity_id.into(),
            blocks,
            flat,
        }
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn dimension(&self) -> usize {
        self.flat.len()
    }

    pub fn blocks(&self) -> &[(Block, Vec<f64>)] {
        &self.blocks
    }

    pub fn block(&self, name: Block) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|(b, _)| *b == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Copy with the named blocks set to zero. Dimensions are unchanged.
    pub fn with_blocks_zeroed(&self, zeroed: &[Block]) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|(b, v)| {
                if zeroed.contains(b) {
                    (*b, vec![0.0; v.len()])
                } else {
                    (*b, v.clone())
                }
            })
            .collect();
        Self::new(self.entity_id.clone(), blocks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockNormalization {
    None,
    /// Scale every nonzero block to unit Euclidean norm.
    #[default]
    PerBlockUnit,
}

impl FromStr for BlockNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "per_block_unit" => Ok(Self::PerBlockUnit),
            _ => Err(format!("expected `none` or `per_block_unit`, got {s:?}")),
        }
    }
}

/// Which provider slot encodes a text block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderSlot {
    /// Word order matters (company descriptions).
    Sequence,
    /// Bag-like short texts (industries, locations).
    Bag,
}

impl FromStr for ProviderSlot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequence" => Ok(Self::Sequence),
            "bag" => Ok(Self::Bag),
            _ => Err(format!("expected `sequence` or `bag`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub block_normalization: BlockNormalization,
    /// Multiplier applied after normalization; missing blocks weigh 1.0.
    pub block_weights: BTreeMap<Block, f64>,
    pub provider_binding: BTreeMap<Block, ProviderSlot>,
    /// Append a one-slot `year_founded` block to company vectors.
    pub include_year: bool,
    /// Zero the location block of every entity.
    pub exclude_location: bool,
    /// Dimension of the hash stub providers.
    pub stub_dimension: usize,
    pub stub_seed: u64,
    /// With an embedding file, fail on texts the file does not contain
    /// instead of falling back to the stub.
    pub strict: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            block_normalization: BlockNormalization::PerBlockUnit,
            block_weights: BTreeMap::new(),
            provider_binding: [
                (Block::Description, ProviderSlot::Sequence),
                (Block::IndustryFocus, ProviderSlot::Bag),
                (Block::IndustryPreference, ProviderSlot::Bag),
                (Block::Location, ProviderSlot::Bag),
            ]
            .into(),
            include_year: false,
            exclude_location: false,
            stub_dimension: 256,
            stub_seed: 0,
            strict: true,
        }
    }
}

impl EmbedConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        kv.set("embed.normalization", &mut c.block_normalization)?;
        kv.set("embed.stub_dimension", &mut c.stub_dimension)?;
        kv.set("embed.stub_seed", &mut c.stub_seed)?;
        for (key, slot) in [
            ("embed.include_year", &mut c.include_year),
            ("embed.exclude_location", &mut c.exclude_location),
            ("embed.strict", &mut c.strict),
        ] {
            if let Some(v) = kv.raw(key) {
                *slot = parse_bool(key, v)?;
            }
        }
        for key in kv.keys_with_prefix("embed.weight.") {
            let block = parse_block_key(&key, "embed.weight.")?;
            let w: f64 = kv.get(&key)?.expect("key exists");
            if !(w >= 0.0 && w.is_finite()) {
                return Err(ConfigError::Invalid(format!("{key} must be >= 0")));
            }
            c.block_weights.insert(block, w);
        }
        for key in kv.keys_with_prefix("embed.provider.") {
            let block = parse_block_key(&key, "embed.provider.")?;
            c.provider_binding.insert(block, kv.get(&key)?.expect("key exists"));
        }
        if c.stub_dimension == 0 {
            return Err(ConfigError::Invalid("embed.stub_dimension must be >= 1".into()));
        }
        Ok(c)
    }

    pub fn weight(&self, block: Block) -> f64 {
        if self.exclude_location && block == Block::Location {
            return 0.0;
        }
        self.block_weights.get(&block).copied().unwrap_or(1.0)
    }

    fn slot(&self, block: Block) -> ProviderSlot {
        self.provider_binding
            .get(&block)
            .copied()
            .unwrap_or(ProviderSlot::Bag)
    }
}

fn parse_block_key(key: &str, prefix: &str) -> Result<Block, ConfigError> {
    key[prefix.len()..]
        .parse()
        .map_err(|reason| ConfigError::BadValue {
            key: key.to_string(),
            value: key[prefix.len()..].to_string(),
            reason,
        })
}

/// The two provider slots. Both may point at the same implementation.
#[derive(Clone)]
pub struct Providers {
    pub sequence: Arc<dyn TextEmbeddingProvider>,
    pub bag: Arc<dyn TextEmbeddingProvider>,
}

impl Providers {
    pub fn single(provider: Arc<dyn TextEmbeddingProvider>) -> Self {
        Self {
            sequence: provider.clone(),
            bag: provider,
        }
    }

    /// Hash stubs in both slots, sized from the config.
    pub fn stub(config: &EmbedConfig) -> Self {
        Self::single(Arc::new(
            hash_stub_provider(config.stub_dimension, config.stub_seed)
                .expect("config validated stub dimension"),
        ))
    }

    fn get(&self, slot: ProviderSlot) -> &dyn TextEmbeddingProvider {
        match slot {
            ProviderSlot::Sequence => self.sequence.as_ref(),
            ProviderSlot::Bag => self.bag.as_ref(),
        }
    }
}

impl fmt::Debug for Providers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Providers")
            .field("sequence_dim", &self.sequence.dimension())
            .field("bag_dim", &self.bag.dimension())
            .finish()
    }
}

/// Multi-label binarizer: slot `v` is 1 iff round `v` is in `rounds`.
pub fn encode_funding_status(
    rounds: &BTreeSet<String>,
    vocab: &RoundVocabulary,
) -> Result<Vec<f64>, EmbedError> {
    let mut out = vec![0.0; vocab.len()];
    for r in rounds {
        let slot = vocab
            .position(r)
            .ok_or_else(|| EmbedError::UnknownRound(r.clone()))?;
        out[slot] = 1.0;
    }
    Ok(out)
}

/// Share of deals per round. All zeros when the investor has no deals.
pub fn encode_funding_style(
    round_deal_counts: &BTreeMap<String, u64>,
    vocab: &RoundVocabulary,
) -> Result<Vec<f64>, EmbedError> {
    let mut out = vec![0.0; vocab.len()];
    for (r, &count) in round_deal_counts {
        let slot = vocab
            .position(r)
            .ok_or_else(|| EmbedError::UnknownRound(r.clone()))?;
        out[slot] += count as f64;
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    }
    Ok(out)
}

/// Deal-count weighted average of industry embeddings.
pub fn encode_industry_preference(
    industry_deal_counts: &BTreeMap<String, u64>,
    provider: &dyn TextEmbeddingProvider,
) -> Result<Vec<f64>, EmbedError> {
    let total: u64 = industry_deal_counts.values().sum();
    let mut out = vec![0.0; provider.dimension()];
    if total == 0 {
        return Ok(out);
    }
    for (industry, &count) in industry_deal_counts {
        if count == 0 {
            continue;
        }
        let w = count as f64 / total as f64;
        let v = embed_checked(provider, industry)?;
        out.iter_mut().zip(&v).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

fn embed_checked(provider: &dyn TextEmbeddingProvider, text: &str) -> Result<Vec<f64>, EmbedError> {
    let v = provider.embed(text)?;
    if v.len() != provider.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: provider.dimension(),
            got: v.len(),
            context: format!("provider output for {text:?}"),
        });
    }
    Ok(v)
}

fn mean_embedding(texts: &[String], provider: &dyn TextEmbeddingProvider) -> Result<Vec<f64>, EmbedError> {
    let mut out = vec![0.0; provider.dimension()];
    let texts: Vec<&String> = texts.iter().filter(|t| !t.is_empty()).collect();
    if texts.is_empty() {
        return Ok(out);
    }
    let w = 1.0 / texts.len() as f64;
    for t in texts {
        let v = embed_checked(provider, t)?;
        out.iter_mut().zip(&v).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

fn finish_blocks(raw: Vec<(Block, Vec<f64>)>, config: &EmbedConfig) -> Vec<(Block, Vec<f64>)> {
    raw.into_iter()
        .map(|(block, mut v)| {
            if config.block_normalization == BlockNormalization::PerBlockUnit {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
            }
            let w = config.weight(block);
            if w != 1.0 {
                v.iter_mut().for_each(|x| *x *= w);
            }
            (block, v)
        })
        .collect()
}

/// Blocks: funding_status, description, industry_focus, location
/// (then year_founded when enabled).
pub fn build_company_vector(
    record: &CompanyRecord,
    vocab: &RoundVocabulary,
    providers: &Providers,
    config: &EmbedConfig,
) -> Result<EntityVector, EmbedError> {
    let text_block = |block: Block, text: &str| -> Result<(Block, Vec<f64>), EmbedError> {
        let p = providers.get(config.slot(block));
        Ok((block, embed_checked(p, text)?))
    };
    let mut raw = vec![
        (
            Block::FundingStatus,
            encode_funding_status(&record.funding_rounds, vocab)?,
        ),
        text_block(Block::Description, &record.description)?,
        (
            Block::IndustryFocus,
            mean_embedding(&record.industry_focus, providers.get(config.slot(Block::IndustryFocus)))?,
        ),
        text_block(Block::Location, &record.location)?,
    ];
    if config.include_year {
        raw.push((
            Block::YearFounded,
            vec![(f64::from(record.year_founded) - 1900.0) / 100.0],
        ));
    }
    Ok(EntityVector::new(record.id.clone(), finish_blocks(raw, config)))
}

/// Blocks: funding_style, industry_preference, location.
pub fn build_investor_vector(
    record: &InvestorRecord,
    vocab: &RoundVocabulary,
    providers: &Providers,
    config: &EmbedConfig,
) -> Result<EntityVector, EmbedError> {
    let raw = vec![
        (
            Block::FundingStyle,
            encode_funding_style(&record.round_deal_counts, vocab)?,
        ),
        (
            Block::IndustryPreference,
            encode_industry_preference(
                &record.industry_deal_counts,
                providers.get(config.slot(Block::IndustryPreference)),
            )?,
        ),
        (
            Block::Location,
            embed_checked(providers.get(config.slot(Block::Location)), &record.location)?,
        ),
    ];
    Ok(EntityVector::new(record.id.clone(), finish_blocks(raw, config)))
}

fn check_uniform(vectors: &[EntityVector], kind: &str) -> Result<(), EmbedError> {
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.dimension() != first.dimension() {
                return Err(EmbedError::DimensionMismatch {
                    expected: first.dimension(),
                    got: v.dimension(),
                    context: format!("{kind} vector {:?}", v.entity_id),
                });
            }
        }
    }
    Ok(())
}

/// Vectors for every company and investor of a corpus, in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusVectors {
    pub companies: Vec<EntityVector>,
    pub investors: Vec<EntityVector>,
}

impl CorpusVectors {
    pub fn build(corpus: &Corpus, providers: &Providers, config: &EmbedConfig) -> Result<Self, EmbedError> {
        let companies = corpus
            .companies
            .par_iter()
            .map(|c| build_company_vector(c, &corpus.rounds, providers, config))
            .collect::<Result<Vec<_>, _>>()?;
        let investors = corpus
            .investors
            .par_iter()
            .map(|r| build_investor_vector(r, &corpus.rounds, providers, config))
            .collect::<Result<Vec<_>, _>>()?;
        check_uniform(&companies, "company")?;
        check_uniform(&investors, "investor")?;
        Ok(Self {
            companies,
            investors,
        })
    }

    /// Copy with the given company blocks zeroed.
    pub fn with_company_blocks_zeroed(&self, zeroed: &[Block]) -> Self {
        Self {
            companies: self
                .companies
                .iter()
                .map(|v| v.with_blocks_zeroed(zeroed))
                .collect(),
            investors: self.investors.clone(),
        }
    }
}

/// Every distinct nonempty text the embed stage would look up.
pub fn corpus_texts(corpus: &Corpus) -> BTreeSet<String> {
    let mut texts = BTreeSet::new();
    for c in &corpus.companies {
        texts.insert(c.description.clone());
        texts.extend(c.industry_focus.iter().cloned());
        texts.insert(c.location.clone());
    }
    for i in &corpus.investors {
        texts.extend(i.industry_deal_counts.keys().cloned());
        texts.insert(i.location.clone());
    }
    texts.remove("");
    texts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab4() -> RoundVocabulary {
        RoundVocabulary::new(
            ["Seed", "Series A", "Series B", "Series C"]
                .map(String::from)
                .to_vec(),
        )
        .unwrap()
    }

    fn set(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Provider with hand-set vectors, for checking weighted averages by hand.
    struct TableStub;

    impl TextEmbeddingProvider for TableStub {
        fn dimension(&self) -> usize {
            3
        }
        fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
            Ok(match text {
                "A" => vec![1.0, 0.0, 2.0],
                "B" => vec![0.0, 4.0, -2.0],
                _ => vec![0.0; 3],
            })
        }
    }

    #[test]
    fn funding_status_worked_example() {
        let v = encode_funding_status(&set(&["Seed", "Series A"]), &vocab4()).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn funding_status_empty_and_full() {
        assert_eq!(encode_funding_status(&set(&[]), &vocab4()).unwrap(), vec![0.0; 4]);
        let all = set(&["Seed", "Series A", "Series B", "Series C"]);
        assert_eq!(encode_funding_status(&all, &vocab4()).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn funding_status_unknown_label() {
        assert!(matches!(
            encode_funding_status(&set(&["Series Q"]), &vocab4()),
            Err(EmbedError::UnknownRound(_))
        ));
    }

    #[test]
    fn funding_style_worked_example() {
        let v = encode_funding_style(
            &counts(&[("Seed", 80), ("Series A", 10), ("Series B", 10), ("Series C", 0)]),
            &vocab4(),
        )
        .unwrap();
        assert_eq!(v, vec![0.8, 0.1, 0.1, 0.0]);
    }

    #[test]
    fn funding_style_one_hot_and_cold_start() {
        assert_eq!(
            encode_funding_style(&counts(&[("Series B", 7)]), &vocab4()).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            encode_funding_style(&counts(&[("Seed", 0)]), &vocab4()).unwrap(),
            vec![0.0; 4]
        );
        assert_eq!(encode_funding_style(&counts(&[]), &vocab4()).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn industry_preference_single_and_equal() {
        let p = hash_stub_provider(8, 2).unwrap();
        let only = encode_industry_preference(&counts(&[("Software", 5)]), &p).unwrap();
        assert_eq!(only, p.embed("Software").unwrap());
        let both = encode_industry_preference(&counts(&[("Software", 2), ("Energy", 2)]), &p).unwrap();
        let a = p.embed("Software").unwrap();
        let b = p.embed("Energy").unwrap();
        for k in 0..8 {
            assert!((both[k] - (a[k] + b[k]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn industry_preference_three_to_one() {
        // 0.75 * [1, 0, 2] + 0.25 * [0, 4, -2] = [0.75, 1.0, 1.0]
        let v = encode_industry_preference(&counts(&[("A", 3), ("B", 1)]), &TableStub).unwrap();
        let expected = [0.75, 1.0, 1.0];
        for k in 0..3 {
            assert!((v[k] - expected[k]).abs() < 1e-15, "{v:?}");
        }
    }

    fn company() -> CompanyRecord {
        CompanyRecord {
            id: "Platform, LLC".into(),
            description: "Develops mobility technology platform. Founded in 2018.".into(),
            industry_focus: vec!["Transportation/Automotive".into(), "Information Technology".into()],
            year_founded: 2018,
            location: "Atlanta, Georgia, United States".into(),
            funding_rounds: set(&["Seed", "Series A"]),
        }
    }

    fn investor() -> InvestorRecord {
        InvestorRecord {
            id: "Software Capital".into(),
            round_deal_counts: counts(&[("Seed", 27), ("Series A", 23), ("Series B", 20)]),
            industry_deal_counts: counts(&[("Healthcare", 56), ("Consumer Products and Services", 20)]),
            location: "New York, NY, United States".into(),
        }
    }

    fn stub8() -> (Providers, EmbedConfig) {
        let config = EmbedConfig {
            stub_dimension: 8,
            ..Default::default()
        };
        (Providers::stub(&config), config)
    }

    #[test]
    fn company_vector_layout() {
        let (p, cfg) = stub8();
        let v = build_company_vector(&company(), &vocab4(), &p, &cfg).unwrap();
        assert_eq!(v.dimension(), 4 + 3 * 8);
        let order: Vec<Block> = v.blocks().iter().map(|(b, _)| *b).collect();
        assert_eq!(order, Block::COMPANY_FEATURES.to_vec());
        for (_, block) in v.blocks() {
            assert!((norm(block) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_description_gives_zero_block_only() {
        let (p, cfg) = stub8();
        let full = build_company_vector(&company(), &vocab4(), &p, &cfg).unwrap();
        let mut rec = company();
        rec.description.clear();
        let v = build_company_vector(&rec, &vocab4(), &p, &cfg).unwrap();
        assert_eq!(v.block(Block::Description).unwrap(), &[0.0; 8]);
        for b in [Block::FundingStatus, Block::IndustryFocus, Block::Location] {
            assert_eq!(v.block(b), full.block(b));
        }
    }

    #[test]
    fn investor_vector_layout_and_cold_start() {
        let (p, cfg) = stub8();
        let v = build_investor_vector(&investor(), &vocab4(), &p, &cfg).unwrap();
        assert_eq!(v.dimension(), 4 + 2 * 8);
        let mut cold = investor();
        cold.round_deal_counts.clear();
        cold.industry_deal_counts.clear();
        let c = build_investor_vector(&cold, &vocab4(), &p, &cfg).unwrap();
        assert_eq!(c.block(Block::FundingStyle).unwrap(), &[0.0; 4]);
        assert_eq!(c.block(Block::IndustryPreference).unwrap(), &[0.0; 8]);
        assert_eq!(build_investor_vector(&investor(), &vocab4(), &p, &cfg).unwrap(), v);
    }

    #[test]
    fn normalization_none_keeps_raw_values() {
        let (p, mut cfg) = stub8();
        cfg.block_normalization = BlockNormalization::None;
        let v = build_company_vector(&company(), &vocab4(), &p, &cfg).unwrap();
        assert_eq!(v.block(Block::FundingStatus).unwrap(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn weights_and_location_exclusion() {
        let (p, mut cfg) = stub8();
        cfg.block_weights.insert(Block::Description, 2.0);
        cfg.exclude_location = true;
        let v = build_company_vector(&company(), &vocab4(), &p, &cfg).unwrap();
        assert!((norm(v.block(Block::Description).unwrap()) - 2.0).abs() < 1e-12);
        assert_eq!(v.block(Block::Location).unwrap(), &[0.0; 8]);
    }

    #[test]
    fn year_block_is_optional() {
        let (p, mut cfg) = stub8();
        cfg.include_year = true;
        cfg.block_normalization = BlockNormalization::None;
        let v = build_company_vector(&company(), &vocab4(), &p, &cfg).unwrap();
        assert_eq!(v.dimension(), 29);
        assert!((v.block(Block::YearFounded).unwrap()[0] - 1.18).abs() < 1e-12);
    }

    struct BrokenProvider;

    impl TextEmbeddingProvider for BrokenProvider {
        fn dimension(&self) -> usize {
            4
        }
        fn embed(&self, _: &str) -> Result<Vec<f64>, EmbedError> {
            Ok(vec![1.0; 3])
        }
    }

    #[test]
    fn provider_returning_wrong_length_is_rejected() {
        let p = Providers::single(Arc::new(BrokenProvider));
        let err = build_company_vector(&company(), &vocab4(), &p, &EmbedConfig::default()).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { expected: 4, got: 3, .. }));
    }

    #[test]
    fn config_keys_parse() {
        let kv = KvConfig::parse(
            "embed.normalization = none\nembed.weight.location = 0.5\nembed.provider.location = sequence\nembed.include_year = true\nembed.stub_dimension = 16\n",
        )
        .unwrap();
        let c = EmbedConfig::from_kv(&kv).unwrap();
        assert_eq!(c.block_normalization, BlockNormalization::None);
        assert_eq!(c.weight(Block::Location), 0.5);
        assert_eq!(c.slot(Block::Location), ProviderSlot::Sequence);
        assert!(c.include_year);
        assert_eq!(c.stub_dimension, 16);
        let bad = KvConfig::parse("embed.weight.nonsense = 1").unwrap();
        assert!(EmbedConfig::from_kv(&bad).is_err());
    }

    proptest! {
        #[test]
        fn funding_style_is_a_distribution(c in proptest::collection::vec(0u64..1000, 4)) {
            let map: BTreeMap<String, u64> = vocab4().labels().iter().cloned().zip(c.iter().copied()).collect();
            let v = encode_funding_style(&map, &vocab4()).unwrap();
            let total: u64 = c.iter().sum();
            prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
            if total > 0 {
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            } else {
                prop_assert!(v.iter().all(|&x| x == 0.0));
            }
        }

        #[test]
        fn funding_status_popcount(mask in 0u8..16) {
            let vocab = vocab4();
            let rounds: BTreeSet<String> = (0..4).filter(|k| mask & (1 << k) != 0).map(|k| vocab.labels()[k].clone()).collect();
            let v = encode_funding_status(&rounds, &vocab).unwrap();
            prop_assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
            prop_assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), rounds.len());
        }

        #[test]
        fn industry_preference_scale_invariant(a in 1u64..50, b in 0u64..50, k in 1u64..20) {
            let p = hash_stub_provider(8, 5).unwrap();
            let base = encode_industry_preference(&counts(&[("Software", a), ("Energy", b)]), &p).unwrap();
            let scaled = encode_industry_preference(&counts(&[("Software", a * k), ("Energy", b * k)]), &p).unwrap();
            for (x, y) in base.iter().zip(&scaled) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
