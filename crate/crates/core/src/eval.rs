//! Evaluation protocol: link rates on held-out positives and sampled
//! negatives, score histograms, stability over investor subsamples and the
//! company feature-ablation grid.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collab::{factorize, CollabConfig, CollabError, LatentFactors};
use crate::config::PipelineConfig;
use crate::corpus::{split_links, Corpus, CorpusError, LinkMatrix, Pair, Split};
use crate::embed::{Block, CorpusVectors, EmbedConfig, EmbedError, Providers};
use crate::score::{HybridScorer, ScoreConfig, ScoreError};

pub const HISTOGRAM_BINS: usize = 20;
pub const BIN_WIDTH: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test pair ({investor:?}, {company:?}) is present in the training matrix")]
    Leakage { investor: String, company: String },
    #[error("the {0} test set is empty")]
    EmptyTestSet(&'static str),
    #[error("sample of {requested} investors requested from a population of {population}")]
    SampleTooLarge { requested: usize, population: usize },
    #[error("invalid protocol parameters: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Collab(#[from] CollabError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Link rates and score histograms for one scored test split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub link_threshold: f64,
    pub positive_link_rate: f64,
    pub negative_link_rate: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub histogram_positive: Vec<u64>,
    pub histogram_negative: Vec<u64>,
    #[serde(skip)]
    pub positive_scores: Vec<f64>,
    #[serde(skip)]
    pub negative_scores: Vec<f64>,
}

impl EvalReport {
    /// Build a report from raw final scores.
    pub fn from_scores(
        positive_scores: Vec<f64>,
        negative_scores: Vec<f64>,
        link_threshold: f64,
    ) -> Result<Self, EvalError> {
        if positive_scores.is_empty() {
            return Err(EvalError::EmptyTestSet("positive"));
        }
        if negative_scores.is_empty() {
            return Err(EvalError::EmptyTestSet("negative"));
        }
        Ok(Self {
            link_threshold,
            positive_link_rate: link_rate(&positive_scores, link_threshold),
            negative_link_rate: link_rate(&negative_scores, link_threshold),
            n_positive: positive_scores.len(),
            n_negative: negative_scores.len(),
            histogram_positive: histogram(&positive_scores),
            histogram_negative: histogram(&negative_scores),
            positive_scores,
            negative_scores,
        })
    }

    /// The same scores judged at another threshold.
    pub fn at_threshold(&self, link_threshold: f64) -> Self {
        Self::from_scores(
            self.positive_scores.clone(),
            self.negative_scores.clone(),
            link_threshold,
        )
        .expect("scores were nonempty")
    }

    /// Tab-separated rendering of the histograms, one line per bin.
    pub fn histogram_tsv(&self) -> String {
        let mut out = String::from("bin_low\tbin_high\tpositive\tnegative\n");
        for b in 0..HISTOGRAM_BINS {
            out.push_str(&format!(
                "{:.2}\t{:.2}\t{}\t{}\n",
                b as f64 * BIN_WIDTH,
                (b + 1) as f64 * BIN_WIDTH,
                self.histogram_positive[b],
                self.histogram_negative[b]
            ));
        }
        out
    }
}

/// Fraction of scores strictly above `threshold`.
pub fn link_rate(scores: &[f64], threshold: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| s > threshold).count() as f64 / scores.len() as f64
}

/// Counts over `[0, 1]` in bins of width 0.05. Scores outside the range go
/// to the nearest end bin.
pub fn histogram(scores: &[f64]) -> Vec<u64> {
    let mut bins = vec![0u64; HISTOGRAM_BINS];
    for &s in scores {
        let b = (s / BIN_WIDTH).floor();
        let b = if b.is_nan() { 0.0 } else { b.clamp(0.0, (HISTOGRAM_BINS - 1) as f64) };
        bins[b as usize] += 1;
    }
    bins
}

/// Fail if any held-out positive is also a training link.
pub fn check_no_leakage(train: &LinkMatrix, test_positive: &[Pair]) -> Result<(), EvalError> {
    match test_positive.iter().find(|&&(i, j)| train.contains(i, j)) {
        Some(&(i, j)) => Err(EvalError::Leakage {
            investor: train.investor_ids()[i].clone(),
            company: train.company_ids()[j].clone(),
        }),
        None => Ok(()),
    }
}

/// Score the test pairs of `split` with an arbitrary pair scorer.
pub fn evaluate_with(
    split: &Split,
    link_threshold: f64,
    score: impl Fn(usize, usize) -> Result<f64, EvalError> + Sync,
) -> Result<EvalReport, EvalError> {
    let run = |pairs: &[Pair]| -> Result<Vec<f64>, EvalError> {
        pairs.par_iter().map(|&(i, j)| score(i, j)).collect()
    };
    EvalReport::from_scores(
        run(&split.test_positive)?,
        run(&split.test_negative)?,
        link_threshold,
    )
}

/// Evaluate a fitted scorer on the held-out pairs of `split`.
pub fn evaluate(scorer: &HybridScorer, split: &Split) -> Result<EvalReport, EvalError> {
    check_no_leakage(scorer.train(), &split.test_positive)?;
    evaluate_with(split, scorer.config().link_threshold, |i, j| {
        Ok(scorer.final_score_indices(i, j)?)
    })
}

/// Factorize `train` and assemble a scorer.
pub fn fit_scorer(
    corpus: &Corpus,
    train: &LinkMatrix,
    vectors: &CorpusVectors,
    collab: &CollabConfig,
    score: &ScoreConfig,
) -> Result<HybridScorer, EvalError> {
    let factors = factorize(train, collab.rank_for(train))?;
    Ok(HybridScorer::new(
        corpus,
        train,
        vectors,
        &factors,
        collab,
        score.clone(),
    )?)
}

/// Split, embed, fit and evaluate in one go.
pub fn run_pipeline(
    corpus: &Corpus,
    providers: &Providers,
    config: &PipelineConfig,
) -> Result<EvalReport, EvalError> {
    let split = split_links(&corpus.links, &config.split)?;
    let vectors = CorpusVectors::build(corpus, providers, &config.embed)?;
    let scorer = fit_scorer(corpus, &split.train, &vectors, &config.collab, &config.score)?;
    evaluate(&scorer, &split)
}

/// The same split evaluated with and without the location blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationComparison {
    pub with_location: EvalReport,
    pub without_location: EvalReport,
}

pub fn location_comparison(
    corpus: &Corpus,
    split: &Split,
    providers: &Providers,
    config: &PipelineConfig,
) -> Result<LocationComparison, EvalError> {
    let run = |embed: &EmbedConfig| -> Result<EvalReport, EvalError> {
        let vectors = CorpusVectors::build(corpus, providers, embed)?;
        let scorer = fit_scorer(corpus, &split.train, &vectors, &config.collab, &config.score)?;
        evaluate(&scorer, split)
    };
    let mut without = config.embed.clone();
    without.exclude_location = true;
    let mut with = config.embed.clone();
    with.exclude_location = false;
    Ok(LocationComparison {
        with_location: run(&with)?,
        without_location: run(&without)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilitySpec {
    pub n_samples: usize,
    pub investors_per_sample: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub sample: usize,
    pub n_investors: usize,
    pub n_links: usize,
    pub mean_companies_per_investor: f64,
    pub positive_link_rate: f64,
    pub negative_link_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub samples: Vec<SampleResult>,
    pub mean_positive_rate: f64,
    pub mean_negative_rate: f64,
    /// Sample standard deviation; absent for fewer than two samples.
    pub std_positive_rate: Option<f64>,
    pub std_negative_rate: Option<f64>,
    /// Spearman correlation between mean companies-per-investor and the
    /// positive rate; absent when either side is constant.
    pub spearman_activity_vs_positive: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && xs[order[end + 1]] == xs[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &k in &order[start..=end] {
            ranks[k] = avg;
        }
        start = end + 1;
    }
    ranks
}

/// Pearson correlation of average ranks. `None` if a side has no spread.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "spearman inputs differ in length");
    if xs.len() < 2 {
        return None;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Seed for the investor draw of sample `k`.
fn sample_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Draw `n_samples` investor subsamples and run the whole pipeline on each.
///
/// Each sample keeps every company and the drawn investors' links, then is
/// split with `config.split` and evaluated. Vectors are built once for the
/// full corpus since they do not depend on links.
pub fn stability_run(
    corpus: &Corpus,
    providers: &Providers,
    config: &PipelineConfig,
    spec: &StabilitySpec,
) -> Result<StabilityReport, EvalError> {
    if spec.n_samples == 0 || spec.investors_per_sample == 0 {
        return Err(EvalError::InvalidSpec(
            "n_samples and investors_per_sample must be >= 1".into(),
        ));
    }
    let population = corpus.investors.len();
    if spec.investors_per_sample > population {
        return Err(EvalError::SampleTooLarge {
            requested: spec.investors_per_sample,
            population,
        });
    }
    let vectors = CorpusVectors::build(corpus, providers, &config.embed)?;

    let samples = (0..spec.n_samples)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(spec.seed, k));
            let mut keep = index::sample(&mut rng, population, spec.investors_per_sample).into_vec();
            keep.sort_unstable();
            let sub = corpus.subset_investors(&keep)?;
            let sub_vectors = CorpusVectors {
                companies: vectors.companies.clone(),
                investors: keep.iter().map(|&i| vectors.investors[i].clone()).collect(),
            };
            let split = split_links(&sub.links, &config.split)?;
            let scorer = fit_scorer(&sub, &split.train, &sub_vectors, &config.collab, &config.score)?;
            let report = evaluate(&scorer, &split)?;
            Ok(SampleResult {
                sample: k,
                n_investors: keep.len(),
                n_links: sub.links.len(),
                mean_companies_per_investor: sub.links.len() as f64 / keep.len() as f64,
                positive_link_rate: report.positive_link_rate,
                negative_link_rate: report.negative_link_rate,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let pos: Vec<f64> = samples.iter().map(|s| s.positive_link_rate).collect();
    let neg: Vec<f64> = samples.iter().map(|s| s.negative_link_rate).collect();
    let activity: Vec<f64> = samples.iter().map(|s| s.mean_companies_per_investor).collect();
    Ok(StabilityReport {
        mean_positive_rate: mean(&pos),
        mean_negative_rate: mean(&neg),
        std_positive_rate: sample_std(&pos),
        std_negative_rate: sample_std(&neg),
        spearman_activity_vs_positive: spearman(&activity, &pos),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    #[serde(skip)]
    pub blocks: Vec<Block>,
    pub positive_link_rate: f64,
    pub negative_link_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("features\tpositive_link_rate\tnegative_link_rate\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\n",
                r.label, r.positive_link_rate, r.negative_link_rate
            ));
        }
        out
    }
}

/// All nonempty subsets, by size and then lexicographically by position in
/// `blocks`.
pub fn feature_subsets(blocks: &[Block]) -> Vec<Vec<Block>> {
    let f = blocks.len();
    let mut masks: Vec<Vec<usize>> = (1u32..(1 << f))
        .map(|mask| (0..f).filter(|b| mask & (1 << b) != 0).collect())
        .collect();
    masks.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    masks
        .into_iter()
        .map(|idx| idx.into_iter().map(|k| blocks[k]).collect())
        .collect()
}

pub fn subset_label(blocks: &[Block]) -> String {
    blocks.iter().map(|b| b.name()).collect::<Vec<_>>().join("+")
}

/// One evaluation per nonempty subset of `blocks`, with the company blocks
/// outside the subset zeroed.
#[allow(clippy::too_many_arguments)]
pub fn ablation_run(
    corpus: &Corpus,
    split: &Split,
    vectors: &CorpusVectors,
    factors: &LatentFactors,
    collab: &CollabConfig,
    score: &ScoreConfig,
    blocks: &[Block],
) -> Result<AblationReport, EvalError> {
    if blocks.is_empty() {
        return Err(EvalError::InvalidSpec("no feature blocks to ablate".into()));
    }
    if blocks.len() > 16 {
        return Err(EvalError::InvalidSpec("too many feature blocks".into()));
    }
    let rows = feature_subsets(blocks)
        .into_iter()
        .map(|subset| {
            let zeroed: Vec<Block> = blocks
                .iter()
                .copied()
                .filter(|b| !subset.contains(b))
                .collect();
            let v = vectors.with_company_blocks_zeroed(&zeroed);
            let scorer = HybridScorer::new(corpus, &split.train, &v, factors, collab, score.clone())?;
            let report = evaluate(&scorer, split)?;
            Ok(AblationRow {
                label: subset_label(&subset),
                blocks: subset,
                positive_link_rate: report.positive_link_rate,
                negative_link_rate: report.negative_link_rate,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(AblationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split_of(pos: Vec<Pair>, neg: Vec<Pair>) -> Split {
        let train = LinkMatrix::new(
            vec!["i0".into(), "i1".into()],
            vec!["c0".into(), "c1".into(), "c2".into()],
            [(0, 0)],
        )
        .unwrap();
        Split {
            train,
            test_positive: pos,
            test_negative: neg,
        }
    }

    #[test]
    fn constant_models() {
        let split = split_of(vec![(0, 1), (1, 2)], vec![(1, 0), (0, 2)]);
        let ones = evaluate_with(&split, 0.75, |_, _| Ok(1.0)).unwrap();
        assert_eq!((ones.positive_link_rate, ones.negative_link_rate), (1.0, 1.0));
        let zeros = evaluate_with(&split, 0.75, |_, _| Ok(0.0)).unwrap();
        assert_eq!((zeros.positive_link_rate, zeros.negative_link_rate), (0.0, 0.0));
        assert_eq!(ones.histogram_positive[19], 2);
        assert_eq!(zeros.histogram_negative[0], 2);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let split = split_of(vec![], vec![(1, 0)]);
        assert!(matches!(
            evaluate_with(&split, 0.5, |_, _| Ok(0.0)),
            Err(EvalError::EmptyTestSet("positive"))
        ));
    }

    #[test]
    fn leakage_detected() {
        let split = split_of(vec![(0, 0)], vec![(1, 0)]);
        let err = check_no_leakage(&split.train, &split.test_positive).unwrap_err();
        assert!(matches!(err, EvalError::Leakage { ref investor, ref company } if investor == "i0" && company == "c0"));
    }

    #[test]
    fn histogram_bin_edges() {
        let h = histogram(&[0.0, 0.049, 0.05, 0.75, 0.999, 1.0, -0.2, 1.3]);
        assert_eq!(h[0], 3);
        assert_eq!(h[1], 1);
        assert_eq!(h[15], 1);
        assert_eq!(h[19], 3);
        assert_eq!(h.iter().sum::<u64>(), 8);
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(link_rate(&[0.75, 0.76], 0.75), 0.5);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_known_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // d = [0,0,1,-1,0]; 1 - 6*2/(5*24) = 0.9
        assert!((spearman(&x, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 5]), None);
        assert_eq!(spearman(&[1.0], &[2.0]), None);
    }

    #[test]
    fn subsets_of_four() {
        let subsets = feature_subsets(&Block::COMPANY_FEATURES);
        assert_eq!(subsets.len(), 15);
        let sizes: Vec<usize> = subsets.iter().map(Vec::len).collect();
        assert_eq!(sizes, [1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 4]);
        assert_eq!(subset_label(&subsets[4]), "funding_status+description");
        assert_eq!(subset_label(&subsets[9]), "industry_focus+location");
        assert_eq!(
            subset_label(&subsets[14]),
            "funding_status+description+industry_focus+location"
        );
    }

    proptest! {
        #[test]
        fn histogram_conserves_mass(scores in prop::collection::vec(-0.5f64..1.5, 1..200)) {
            let h = histogram(&scores);
            prop_assert_eq!(h.iter().sum::<u64>(), scores.len() as u64);
        }

        #[test]
        fn raising_threshold_never_raises_rates(
            pos in prop::collection::vec(0.0f64..1.0, 1..50),
            neg in prop::collection::vec(0.0f64..1.0, 1..50),
            t1 in 0.0f64..1.0,
            dt in 0.0f64..0.5,
        ) {
            let lo = EvalReport::from_scores(pos.clone(), neg.clone(), t1).unwrap();
            let hi = lo.at_threshold(t1 + dt);
            prop_assert!(hi.positive_link_rate <= lo.positive_link_rate);
            prop_assert!(hi.negative_link_rate <= lo.negative_link_rate);
        }

        #[test]
        fn spearman_bounded(xs in prop::collection::vec(0.0f64..10.0, 2..30)) {
            let ys: Vec<f64> = xs.iter().map(|x| (x * 7.3).sin()).collect();
            if let Some(r) = spearman(&xs, &ys) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            }
        }
    }
}
