//! Explainable investor/company matching.
//!
//! Companies and investors are embedded into block-structured vectors
//! ([`embed`]), the training link matrix is factorized ([`collab`]), and every
//! pair gets a hybrid content + collaborative score ([`score`]) that the
//! [`explain`] module turns into a templated sentence. [`eval`] runs the
//! held-out evaluation, stability and ablation protocols.

pub mod collab;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod explain;
pub mod score;

pub use collab::{factorize, CollabConfig, CollabError, LatentFactors};
pub use config::{ConfigError, KvConfig, PipelineConfig};
pub use corpus::{
    generate_synthetic, load_corpus, split_links, CompanyRecord, Corpus, CorpusError,
    CorpusFormat, InvestorRecord, LinkMatrix, RoundVocabulary, Split, SplitSpec, SyntheticConfig,
};
pub use embed::{Block, CorpusVectors, EmbedConfig, EmbedError, EntityVector, Providers};
pub use eval::{
    ablation_run, evaluate, fit_scorer, stability_run, AblationReport, EvalError, EvalReport,
    StabilityReport, StabilitySpec,
};
pub use explain::{explain_breakdown, explain_pair, ExplainError, Explanation, ExplanationParams, Variant};
pub use score::{Direction, HybridScorer, ScoreBreakdown, ScoreConfig, ScoreError};
