use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;

use snax_core::algebra::{apply_selection, EntitySet, FilterReport, FilterSelection};
use snax_core::corpus::{
    compose_training_set, distribution_report, format_audit, format_corpus, format_scope_records,
    load_bio_predictions, load_corpus, load_predictions, write_file, CorpusPartition,
    PartitionName, PredictionFile,
};
use snax_core::extractor::AdeExtractor;
use snax_core::metrics::{evaluate_corpus, render_table};
use snax_core::scope::{prefilter, Phenomenon, ScopeDetector, ScopeSet};
use snax_core::text::LabeledSample;

use crate::config::{require_file, usage, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhenomenonArg {
    Neg,
    Spec,
    Both,
}

impl PhenomenonArg {
    fn phenomena(self) -> &'static [Phenomenon] {
        match self {
            PhenomenonArg::Neg => &[Phenomenon::Negation],
            PhenomenonArg::Spec => &[Phenomenon::Speculation],
            PhenomenonArg::Both => &[Phenomenon::Negation, Phenomenon::Speculation],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum PredictionFormat {
    /// `id<TAB>start:end;...` lines
    #[default]
    Spans,
    /// `id<TAB>tag tag ...` lines, one BIO tag per token
    Bio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Which scopes to detect
    #[arg(long, value_enum, default_value_t = PhenomenonArg::Both)]
    pub phenomenon: PhenomenonArg,
}

#[derive(Debug, Args)]
pub struct PredictionArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = PredictionFormat::Spans)]
    pub predictions_format: PredictionFormat,
    /// Externally predicted negation scopes, in prediction file layout
    #[arg(long, value_name = "FILE")]
    pub neg_scopes: Option<PathBuf>,
    /// Externally predicted speculation scopes, in prediction file layout
    #[arg(long, value_name = "FILE")]
    pub spec_scopes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: PredictionArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub report: ReportFormat,
    /// Include per-sample match outcomes in the JSON report
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// A/X base partition
    #[arg(long, value_name = "FILE")]
    pub base: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub n_pool: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub s_pool: Option<PathBuf>,
    /// Append the N pool
    #[arg(long)]
    pub add_n: bool,
    /// Append the S pool
    #[arg(long)]
    pub add_s: bool,
}

#[derive(Debug, Args)]
pub struct PrefilterArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Which lexicons must fire for a sample to be kept
    #[arg(long, value_enum, default_value_t = PhenomenonArg::Both)]
    pub phenomenon: PhenomenonArg,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
}

/// Maps `f` over `items` on `jobs` threads; the result keeps input order.
fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker threads")?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn read_corpus(config: &PipelineConfig, flag: &str, path: &Path) -> Result<CorpusPartition> {
    require_file(flag, path)?;
    Ok(load_corpus(path, config.format)?)
}

fn read_predictions(
    config: &PipelineConfig,
    args: &PredictionArgs,
    corpus: &CorpusPartition,
) -> Result<PredictionFile> {
    require_file("--predictions", &args.predictions)?;
    Ok(match args.predictions_format {
        PredictionFormat::Spans => load_predictions(&args.predictions)?,
        PredictionFormat::Bio => load_bio_predictions(&args.predictions, corpus, config.bio_mode)?,
    })
}

/// Scopes for one phenomenon: read from an external file when given,
/// otherwise detected by the rule engine.
enum ScopeSource {
    External(Vec<ScopeSet>),
    Rules(ScopeDetector),
}

impl ScopeSource {
    fn new(
        config: &PipelineConfig,
        phenomenon: Phenomenon,
        flag: &str,
        external: Option<&PathBuf>,
        corpus: &CorpusPartition,
    ) -> Result<Self> {
        match external {
            Some(path) => {
                require_file(flag, path)?;
                Ok(ScopeSource::External(
                    load_predictions(path)?.bind_scopes(corpus, phenomenon)?,
                ))
            }
            None => Ok(ScopeSource::Rules(config.detector(phenomenon)?)),
        }
    }

    fn scopes(&self, index: usize, sample: &LabeledSample) -> ScopeSet {
        match self {
            ScopeSource::External(sets) => sets[index].clone(),
            ScopeSource::Rules(detector) => detector.detect(sample.text()),
        }
    }
}

/// Binds the predictions and applies the configured filter selection.
fn filter_predictions(
    config: &PipelineConfig,
    args: &PredictionArgs,
    corpus: &CorpusPartition,
    predictions: &PredictionFile,
) -> Result<Vec<FilterReport>> {
    let selection = config.filters;
    let ades = predictions.bind(corpus)?;
    let neg = selection
        .uses_negation()
        .then(|| {
            ScopeSource::new(
                config,
                Phenomenon::Negation,
                "--neg-scopes",
                args.neg_scopes.as_ref(),
                corpus,
            )
        })
        .transpose()?;
    let spec = selection
        .uses_speculation()
        .then(|| {
            ScopeSource::new(
                config,
                Phenomenon::Speculation,
                "--spec-scopes",
                args.spec_scopes.as_ref(),
                corpus,
            )
        })
        .transpose()?;

    let work: Vec<(usize, &LabeledSample, &EntitySet)> = corpus
        .samples()
        .iter()
        .zip(&ades)
        .enumerate()
        .map(|(i, (sample, set))| (i, sample, set))
        .collect();
    par_map(config.jobs, &work, |&(i, sample, set)| {
        let n = neg.as_ref().map(|src| src.scopes(i, sample));
        let s = spec.as_ref().map(|src| src.scopes(i, sample));
        apply_selection(set, selection, n.as_ref(), s.as_ref())
    })?
    .into_iter()
    .map(|r| r.map_err(anyhow::Error::from))
    .collect()
}

pub fn detect(config: &PipelineConfig, args: &DetectArgs) -> Result<()> {
    let corpus = read_corpus(config, "--corpus", &args.corpus)?;
    let detectors = args
        .phenomenon
        .phenomena()
        .iter()
        .map(|&p| config.detector(p))
        .collect::<Result<Vec<_>>>()?;
    let sets: Vec<ScopeSet> = par_map(config.jobs, corpus.samples(), |sample| {
        detectors
            .iter()
            .map(|d| d.detect(sample.text()))
            .collect::<Vec<_>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    log::info!(
        "{} scopes in {} samples",
        sets.iter().map(|s| s.scopes.len()).sum::<usize>(),
        corpus.len()
    );
    config.emit(&format_scope_records(&sets))
}

pub fn filter(config: &PipelineConfig, args: &PredictionArgs) -> Result<()> {
    let corpus = read_corpus(config, "--corpus", &args.corpus)?;
    let predictions = read_predictions(config, args, &corpus)?;
    let reports = filter_predictions(config, args, &corpus, &predictions)?;

    // Only ids present in the input are written back, so the `none`
    // selection reproduces the input mapping.
    let mut filtered = predictions.clone();
    for report in &reports {
        if let Some(spans) = filtered.spans.get_mut(&report.kept.text_id) {
            *spans = report.kept.spans.clone();
        }
    }
    if let Some(path) = &config.audit {
        write_file(path, &format_audit(&reports))?;
    }
    log::info!(
        "{} spans discarded by {} filters",
        reports.iter().map(|r| r.discarded.len()).sum::<usize>(),
        config.filters
    );
    config.emit(&filtered.to_file_string()?)
}

pub fn evaluate(config: &PipelineConfig, args: &EvaluateArgs) -> Result<()> {
    let corpus = read_corpus(config, "--corpus", &args.input.corpus)?;
    let predictions = read_predictions(config, &args.input, &corpus)?;
    let kept: Vec<EntitySet> = filter_predictions(config, &args.input, &corpus, &predictions)?
        .into_iter()
        .map(|r| r.kept)
        .collect();
    let report = evaluate_corpus(corpus.samples(), &kept)?;
    match args.report {
        ReportFormat::Json => config.emit(&report.to_json(args.verbose)),
        ReportFormat::Table => {
            let model = predictions.model().unwrap_or("predictions");
            let label = match config.filters {
                FilterSelection::None => model.to_string(),
                selection => format!("{model} [{selection}]"),
            };
            config.emit(&render_table(&[(&label, &report)]))
        }
    }
}

pub fn compose(config: &PipelineConfig, args: &ComposeArgs) -> Result<()> {
    let base = read_corpus(config, "--base", &args.base)?;
    let pool = |flag: &str, needed: bool, path: &Option<PathBuf>| -> Result<CorpusPartition> {
        match path {
            Some(path) => read_corpus(config, flag, path),
            None if needed => Err(usage(format!(
                "{flag} is required with --add-{}",
                &flag[2..3]
            ))),
            None => Ok(CorpusPartition::new(
                PartitionName::Custom("empty".into()),
                Vec::new(),
            )?),
        }
    };
    let n_pool = pool("--n-pool", args.add_n, &args.n_pool)?;
    let s_pool = pool("--s-pool", args.add_s, &args.s_pool)?;
    let composed = compose_training_set(&base, args.add_n, args.add_s, &n_pool, &s_pool)?;
    log::info!("composed {} samples", composed.len());
    config.emit(&format_corpus(&composed, config.format)?)
}

pub fn prefilter_corpus(config: &PipelineConfig, args: &PrefilterArgs) -> Result<()> {
    let corpus = read_corpus(config, "--corpus", &args.corpus)?;
    let lexicons = args
        .phenomenon
        .phenomena()
        .iter()
        .map(|&p| config.lexicon(p))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = lexicons.iter().collect();
    let kept = par_map(config.jobs, corpus.samples(), |sample| {
        prefilter(std::slice::from_ref(sample), &refs)
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?
    .into_iter()
    .flatten()
    .collect();
    let kept = CorpusPartition::new(corpus.name.clone(), kept)?;
    log::info!("kept {} of {} samples", kept.len(), corpus.len());
    config.emit(&format_corpus(&kept, config.format)?)
}

pub fn extract(config: &PipelineConfig, args: &CorpusArgs) -> Result<()> {
    let corpus = read_corpus(config, "--corpus", &args.corpus)?;
    let extractor = config.extractor()?;
    let sets = par_map(config.jobs, corpus.samples(), |sample| {
        extractor.extract(sample.text())
    })?;
    let mut file = PredictionFile::from_entity_sets(&sets);
    file.metadata.insert("model".into(), "lexicon".into());
    config.emit(&file.to_file_string()?)
}

pub fn distribution(config: &PipelineConfig, args: &CorpusArgs) -> Result<()> {
    let corpus = read_corpus(config, "--corpus", &args.corpus)?;
    config.emit(&distribution_report(&corpus).to_json())
}
