//! `invmatch` command-line interface.
//!
//! Stages talk to each other through files: a corpus directory
//! (`companies.jsonl`, `investors.jsonl`, `links.tsv`), pair files
//! (`investor_id<TAB>company_id`), an embedding TSV, a binary factor file and
//! a breakdown TSV.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use invmatch::corpus::{read_pairs, write_corpus, write_pairs, Pair};
use invmatch::embed::{corpus_texts, load_embedding_file, write_embedding_file, EmbeddingTable, FileProvider};
use invmatch::explain::{format_params_row, PARAMS_HEADER};
use invmatch::score::{write_breakdowns, BREAKDOWN_HEADER};
use invmatch::{
    ablation_run, evaluate, explain_breakdown, factorize, generate_synthetic, load_corpus,
    split_links, stability_run, Block, Corpus, CorpusFormat,
    CorpusVectors, Direction, HybridScorer, LatentFactors, PipelineConfig, Providers, Split,
    StabilitySpec,
};

/// Flag values that parse but make no sense together. Exits with 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const TRAIN_FILE: &str = "train.tsv";
const TEST_POSITIVE_FILE: &str = "test_positive.tsv";
const TEST_NEGATIVE_FILE: &str = "test_negative.tsv";

#[derive(Debug, Parser)]
#[command(name = "invmatch", version, about = "Explainable investor-company matching")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for synthesis, splitting and subsampling (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for pair scoring; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-cluster synthetic corpus.
    Synth(SynthArgs),
    /// Validate a corpus and write its train/test split.
    Ingest(IngestArgs),
    /// Write stub embeddings for every corpus text in the embedding TSV format.
    Embed(EmbedArgs),
    /// Factorize the training links into a binary factor file.
    Train(TrainArgs),
    /// Score pairs and write the breakdown TSV.
    Score(ScoreArgs),
    /// Top counterparts for one investor or company.
    Recommend(RecommendArgs),
    /// Explain scored pairs in plain text.
    Explain(ExplainArgs),
    /// Link rates on the held-out positives and sampled negatives.
    Evaluate(EvaluateArgs),
    /// Repeat the evaluation on investor subsamples.
    Stability(StabilityArgs),
    /// Evaluate every nonempty subset of company feature blocks.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    investors: Option<usize>,
    #[arg(long)]
    companies: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
}

#[derive(Debug, Args)]
struct CorpusArg {
    /// Corpus directory.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    /// Directory for `train.tsv`, `test_positive.tsv` and `test_negative.tsv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    /// Output embedding TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainingArgs {
    /// Training pair file; defaults to every link of the corpus.
    #[arg(long, value_name = "PATH")]
    train: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[command(flatten)]
    training: TrainingArgs,
    /// Factor file written by `train`; factorized on the fly when absent.
    #[arg(long, value_name = "PATH")]
    factors: Option<PathBuf>,
    #[command(flatten)]
    embeddings: EmbeddingArg,
    #[command(flatten)]
    score: ScoreFlags,
}

#[derive(Debug, Args)]
struct EmbeddingArg {
    /// Embedding TSV; hash stub embeddings when absent.
    #[arg(long, value_name = "PATH")]
    embeddings: Option<PathBuf>,
}

/// Score overrides. Unset flags keep the config file value.
#[derive(Debug, Args)]
struct ScoreFlags {
    /// Weight of the latent similarity inside CB [default: 0.5]
    #[arg(long)]
    w1: Option<f64>,
    /// Weight of the feature similarity inside CB [default: 0.5]
    #[arg(long)]
    w2: Option<f64>,
    /// Weight of CBS in the blended final score [default: 0.5]
    #[arg(long)]
    w_cbs: Option<f64>,
    /// Weight of CB in the blended final score [default: 0.5]
    #[arg(long)]
    w_cb: Option<f64>,
    /// CB must exceed this for the blend to apply (CBthresh) [default: 0.5]
    #[arg(long)]
    cb_thresh: Option<f64>,
    /// FS above this predicts a link [default: 0.75]
    #[arg(long)]
    link_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[command(flatten)]
    training: TrainingArgs,
    /// Output factor file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Pair file to score; every investor-company pair when absent.
    #[arg(long, value_name = "PATH")]
    pairs: Option<PathBuf>,
    /// Output breakdown TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "target", required = true, multiple = false)]
struct RecommendTarget {
    /// Rank investors for this company.
    #[arg(long, value_name = "COMPANY_ID", group = "target")]
    for_company: Option<String>,
    /// Rank companies for this investor.
    #[arg(long, value_name = "INVESTOR_ID", group = "target")]
    for_investor: Option<String>,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    target: RecommendTarget,
    #[arg(long, default_value_t = 25)]
    top: usize,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, requires = "company", conflicts_with = "pairs")]
    investor: Option<String>,
    #[arg(long, requires = "investor")]
    company: Option<String>,
    /// Pair file to explain.
    #[arg(long, value_name = "PATH", required_unless_present = "investor")]
    pairs: Option<PathBuf>,
    /// Also write the explanation params as TSV.
    #[arg(long, value_name = "PATH")]
    params_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArg {
    /// Directory written by `ingest`; split from the config when absent.
    #[arg(long, value_name = "DIR")]
    split: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[command(flatten)]
    split: SplitArg,
    #[command(flatten)]
    embeddings: EmbeddingArg,
    #[command(flatten)]
    score: ScoreFlags,
    /// Write the report as JSON.
    #[arg(long, value_name = "PATH")]
    report_out: Option<PathBuf>,
    /// Write the score histograms as TSV.
    #[arg(long, value_name = "PATH")]
    histogram_out: Option<PathBuf>,
    /// Also evaluate with location blocks zeroed and print both rates.
    #[arg(long)]
    compare_location: bool,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[command(flatten)]
    embeddings: EmbeddingArg,
    #[command(flatten)]
    score: ScoreFlags,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    investors_per_sample: usize,
    /// Write the report as JSON.
    #[arg(long, value_name = "PATH")]
    report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[command(flatten)]
    split: SplitArg,
    #[command(flatten)]
    embeddings: EmbeddingArg,
    #[command(flatten)]
    score: ScoreFlags,
    /// Company blocks to ablate, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "funding_status,description,industry_focus,location"
    )]
    blocks: Vec<Block>,
    /// Write the rows as TSV.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(UsageError("--jobs must be >= 1".into()).into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| dispatch(cli.command, config))
}

fn dispatch(command: Command, mut config: PipelineConfig) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, config),
        Command::Ingest(a) => ingest(a, &config),
        Command::Embed(a) => embed(a, &config),
        Command::Train(a) => train(a, &config),
        Command::Score(a) => {
            apply_score_flags(&mut config, &a.model.score)?;
            score(a, &config)
        }
        Command::Recommend(a) => {
            apply_score_flags(&mut config, &a.model.score)?;
            recommend(a, &config)
        }
        Command::Explain(a) => {
            apply_score_flags(&mut config, &a.model.score)?;
            explain(a, &config)
        }
        Command::Evaluate(a) => {
            apply_score_flags(&mut config, &a.score)?;
            evaluate_cmd(a, &config)
        }
        Command::Stability(a) => {
            apply_score_flags(&mut config, &a.score)?;
            stability(a, &config)
        }
        Command::Ablate(a) => {
            apply_score_flags(&mut config, &a.score)?;
            ablate(a, &config)
        }
    }
}

fn apply_score_flags(config: &mut PipelineConfig, flags: &ScoreFlags) -> Result<()> {
    let s = &mut config.score;
    for (flag, slot) in [
        (flags.w1, &mut s.w1),
        (flags.w2, &mut s.w2),
        (flags.w_cbs, &mut s.w_cbs),
        (flags.w_cb, &mut s.w_cb),
        (flags.cb_thresh, &mut s.cb_thresh),
        (flags.link_threshold, &mut s.link_threshold),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    s.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(())
}

fn load(arg: &CorpusArg, config: &PipelineConfig) -> Result<Corpus> {
    load_corpus(&arg.corpus, CorpusFormat::JsonLines, &config.rounds)
        .with_context(|| format!("loading corpus {}", arg.corpus.display()))
}

fn providers(arg: &EmbeddingArg, config: &PipelineConfig) -> Result<Providers> {
    let Some(path) = &arg.embeddings else {
        return Ok(Providers::stub(&config.embed));
    };
    let table = load_embedding_file(path)
        .with_context(|| format!("loading embeddings {}", path.display()))?;
    let provider = if config.embed.strict {
        FileProvider::strict(table)
    } else {
        FileProvider::with_fallback(table, config.embed.stub_seed)
    };
    Ok(Providers::single(Arc::new(provider)))
}

fn training_links(corpus: &Corpus, arg: &TrainingArgs) -> Result<invmatch::LinkMatrix> {
    match &arg.train {
        Some(path) => Ok(corpus.links.with_links(read_pairs(path, &corpus.links)?)?),
        None => Ok(corpus.links.clone()),
    }
}

fn read_split(corpus: &Corpus, arg: &SplitArg, config: &PipelineConfig) -> Result<Split> {
    let Some(dir) = &arg.split else {
        return Ok(split_links(&corpus.links, &config.split)?);
    };
    let pairs = |name: &str| -> Result<Vec<Pair>> {
        let path = dir.join(name);
        read_pairs(&path, &corpus.links).with_context(|| format!("reading {}", path.display()))
    };
    Ok(Split {
        train: corpus.links.with_links(pairs(TRAIN_FILE)?)?,
        test_positive: pairs(TEST_POSITIVE_FILE)?,
        test_negative: pairs(TEST_NEGATIVE_FILE)?,
    })
}

fn build_scorer(model: &ModelArgs, config: &PipelineConfig) -> Result<HybridScorer> {
    let corpus = load(&model.corpus, config)?;
    let train = training_links(&corpus, &model.training)?;
    let factors = match &model.factors {
        Some(path) => LatentFactors::load(path)
            .with_context(|| format!("loading factors {}", path.display()))?,
        None => factorize(&train, config.collab.rank_for(&train))?,
    };
    let vectors = CorpusVectors::build(&corpus, &providers(&model.embeddings, config)?, &config.embed)?;
    Ok(HybridScorer::new(
        &corpus,
        &train,
        &vectors,
        &factors,
        &config.collab,
        config.score.clone(),
    )?)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn synth(a: SynthArgs, config: PipelineConfig) -> Result<()> {
    let mut synthetic = config.synthetic;
    if let Some(n) = a.investors {
        synthetic.investors = n;
    }
    if let Some(m) = a.companies {
        synthetic.companies = m;
    }
    if let Some(c) = a.clusters {
        synthetic.clusters = c;
    }
    let generated = generate_synthetic(&synthetic, &config.rounds)?;
    write_corpus(&a.out, &generated.corpus)?;
    println!(
        "wrote {} investors, {} companies, {} links to {}",
        generated.corpus.investors.len(),
        generated.corpus.companies.len(),
        generated.corpus.links.len(),
        a.out.display()
    );
    Ok(())
}

fn ingest(a: IngestArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = load(&a.corpus, config)?;
    println!(
        "{} investors, {} companies, {} links",
        corpus.investors.len(),
        corpus.companies.len(),
        corpus.links.len()
    );
    if let Some(dir) = &a.out {
        let split = split_links(&corpus.links, &config.split)?;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_pairs(&dir.join(TRAIN_FILE), &corpus.links, split.train.links())?;
        write_pairs(&dir.join(TEST_POSITIVE_FILE), &corpus.links, split.test_positive.iter().copied())?;
        write_pairs(&dir.join(TEST_NEGATIVE_FILE), &corpus.links, split.test_negative.iter().copied())?;
        println!(
            "split: {} train, {} test positive, {} test negative",
            split.train.len(),
            split.test_positive.len(),
            split.test_negative.len()
        );
    }
    Ok(())
}

fn embed(a: EmbedArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = load(&a.corpus, config)?;
    let stub = Providers::stub(&config.embed);
    let texts = corpus_texts(&corpus);
    let table = EmbeddingTable::from_provider(stub.bag.as_ref(), texts.iter().map(String::as_str))?;
    write_embedding_file(&a.out, &table)?;
    println!("wrote {} texts of dimension {} to {}", table.len(), table.dimension(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = load(&a.corpus, config)?;
    let links = training_links(&corpus, &a.training)?;
    let factors = factorize(&links, config.collab.rank_for(&links))?;
    factors.save(&a.out)?;
    println!(
        "rank {} ({} effective) over {} links, wrote {}",
        factors.rank(),
        factors.effective_rank(),
        links.len(),
        a.out.display()
    );
    Ok(())
}

fn score(a: ScoreArgs, config: &PipelineConfig) -> Result<()> {
    let scorer = build_scorer(&a.model, config)?;
    let mut w = create(&a.out)?;
    match &a.pairs {
        Some(path) => {
            let pairs = read_pairs(path, scorer.train())?;
            write_breakdowns(&mut w, &scorer.score_pairs(&pairs)?)?;
        }
        None => {
            writeln!(w, "{BREAKDOWN_HEADER}")?;
            scorer.score_all_chunked(64, |b| {
                writeln!(w, "{}", invmatch::score::format_breakdown_row(b))
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn recommend(a: RecommendArgs, config: &PipelineConfig) -> Result<()> {
    let scorer = build_scorer(&a.model, config)?;
    let (entity, direction) = match (&a.target.for_company, &a.target.for_investor) {
        (Some(c), _) => (c, Direction::InvestorsForCompany),
        (None, Some(i)) => (i, Direction::CompaniesForInvestor),
        (None, None) => unreachable!("clap requires one target"),
    };
    let ranked = scorer.recommend(entity, direction, a.top)?;
    let out = io::stdout();
    let mut out = out.lock();
    writeln!(out, "rank\tid\tFS")?;
    for (k, (id, fs)) in ranked.iter().enumerate() {
        writeln!(out, "{}\t{id}\t{fs:.6}", k + 1)?;
    }
    Ok(())
}

fn explain(a: ExplainArgs, config: &PipelineConfig) -> Result<()> {
    let scorer = build_scorer(&a.model, config)?;
    let breakdowns = match (&a.investor, &a.company, &a.pairs) {
        (Some(i), Some(c), _) => vec![scorer.score_pair(i, c)?],
        (_, _, Some(path)) => scorer.score_pairs(&read_pairs(path, scorer.train())?)?,
        _ => unreachable!("clap requires a pair or a pair file"),
    };
    let explanations = breakdowns
        .iter()
        .map(explain_breakdown)
        .collect::<Result<Vec<_>, _>>()?;
    let out = io::stdout();
    let mut out = out.lock();
    for (k, e) in explanations.iter().enumerate() {
        if k > 0 {
            writeln!(out)?;
        }
        writeln!(out, "{}", e.text)?;
    }
    if let Some(path) = &a.params_out {
        let mut w = create(path)?;
        writeln!(w, "{PARAMS_HEADER}")?;
        for e in &explanations {
            writeln!(w, "{}", format_params_row(e))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = load(&a.corpus, config)?;
    let split = read_split(&corpus, &a.split, config)?;
    let providers = providers(&a.embeddings, config)?;
    let vectors = CorpusVectors::build(&corpus, &providers, &config.embed)?;
    let scorer = invmatch::fit_scorer(&corpus, &split.train, &vectors, &config.collab, &config.score)?;
    let report = evaluate(&scorer, &split)?;
    println!(
        "positive_link_rate\t{:.6}\nnegative_link_rate\t{:.6}\nn_positive\t{}\nn_negative\t{}",
        report.positive_link_rate, report.negative_link_rate, report.n_positive, report.n_negative
    );
    if a.compare_location {
        let cmp = invmatch::eval::location_comparison(&corpus, &split, &providers, config)?;
        println!(
            "without_location_positive\t{:.6}\nwithout_location_negative\t{:.6}",
            cmp.without_location.positive_link_rate, cmp.without_location.negative_link_rate
        );
    }
    if let Some(path) = &a.report_out {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.histogram_out {
        fs::write(path, report.histogram_tsv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn stability(a: StabilityArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = load(&a.corpus, config)?;
    let spec = StabilitySpec {
        n_samples: a.samples,
        investors_per_sample: a.investors_per_sample,
        seed: config.seed,
    };
    let report = stability_run(&corpus, &providers(&a.embeddings, config)?, config, &spec)?;
    println!("sample\tinvestors\tlinks\tcompanies_per_investor\tpositive_link_rate\tnegative_link_rate");
    for s in &report.samples {
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.6}\t{:.6}",
            s.sample, s.n_investors, s.n_links, s.mean_companies_per_investor,
            s.positive_link_rate, s.negative_link_rate
        );
    }
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
    println!(
        "mean_positive_rate\t{:.6}\nstd_positive_rate\t{}\nmean_negative_rate\t{:.6}\nstd_negative_rate\t{}\nspearman_activity_vs_positive\t{}",
        report.mean_positive_rate,
        opt(report.std_positive_rate),
        report.mean_negative_rate,
        opt(report.std_negative_rate),
        opt(report.spearman_activity_vs_positive)
    );
    if let Some(path) = &a.report_out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn ablate(a: AblateArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = load(&a.corpus, config)?;
    let split = read_split(&corpus, &a.split, config)?;
    let vectors = CorpusVectors::build(&corpus, &providers(&a.embeddings, config)?, &config.embed)?;
    let factors = factorize(&split.train, config.collab.rank_for(&split.train))?;
    let report = ablation_run(
        &corpus,
        &split,
        &vectors,
        &factors,
        &config.collab,
        &config.score,
        &a.blocks,
    )?;
    let tsv = report.to_tsv();
    print!("{tsv}");
    if let Some(path) = &a.out {
        fs::write(path, tsv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
