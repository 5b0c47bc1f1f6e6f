//! Run configuration. A JSON file supplies defaults; every field can be
//! overridden on the command line.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use snax_core::corpus::{write_file, CorpusFormat};
use snax_core::extractor::{AdeLexicon, LexiconExtractor};
use snax_core::scope::{CueLexicon, Phenomenon, ScopeConfig, ScopeDetector, DEFAULT_WINDOW};
use snax_core::text::BioMode;
use snax_core::FilterSelection;

/// Bad flags, bad config values or missing input files. Exits with 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Fails with a usage error naming `flag` when `path` is not a file.
pub fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{flag}: no such file: {}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BioModeArg {
    Lenient,
    Strict,
}

impl From<BioModeArg> for BioMode {
    fn from(mode: BioModeArg) -> Self {
        match mode {
            BioModeArg::Lenient => BioMode::Lenient,
            BioModeArg::Strict => BioMode::Strict,
        }
    }
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON configuration file; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output file (standard output when absent)
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Worker threads for per-sample work
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Scope window in tokens
    #[arg(long, global = true, value_name = "TOKENS")]
    pub window: Option<usize>,

    /// Scope filters applied to predictions: none, neg, spec or neg+spec
    #[arg(long, global = true, value_name = "SELECTION")]
    pub filters: Option<FilterSelection>,

    /// Negation cue lexicon (bundled lexicon when absent)
    #[arg(long, global = true, value_name = "FILE")]
    pub negation_lexicon: Option<PathBuf>,

    /// Speculation cue lexicon (bundled lexicon when absent)
    #[arg(long, global = true, value_name = "FILE")]
    pub speculation_lexicon: Option<PathBuf>,

    /// ADE term lexicon for the baseline extractor (bundled when absent)
    #[arg(long, global = true, value_name = "FILE")]
    pub ade_lexicon: Option<PathBuf>,

    /// How stray I tags in BIO predictions are handled
    #[arg(long, global = true, value_enum)]
    pub bio_mode: Option<BioModeArg>,

    /// Corpus file format: tsv or jsonl
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<CorpusFormat>,

    /// Audit file listing every discarded span (filter only)
    #[arg(long, global = true, value_name = "FILE")]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    out: Option<PathBuf>,
    jobs: Option<usize>,
    window: Option<usize>,
    filters: Option<FilterSelection>,
    negation_lexicon: Option<PathBuf>,
    speculation_lexicon: Option<PathBuf>,
    ade_lexicon: Option<PathBuf>,
    bio_mode: Option<BioModeArg>,
    format: Option<CorpusFormat>,
    audit: Option<PathBuf>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self> {
        require_file("--config", path)?;
        let source =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: ConfigFile = serde_json::from_str(&source)
            .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
        // Relative paths in the file are taken relative to the file itself.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.out,
            &mut config.negation_lexicon,
            &mut config.speculation_lexicon,
            &mut config.ade_lexicon,
            &mut config.audit,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub window: usize,
    pub filters: FilterSelection,
    pub negation_lexicon: Option<PathBuf>,
    pub speculation_lexicon: Option<PathBuf>,
    pub ade_lexicon: Option<PathBuf>,
    pub bio_mode: BioMode,
    pub format: CorpusFormat,
    pub audit: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let config = Self {
            out: args.out.clone().or(file.out),
            jobs: args.jobs.or(file.jobs).unwrap_or(1),
            window: args.window.or(file.window).unwrap_or(DEFAULT_WINDOW),
            filters: args.filters.or(file.filters).unwrap_or_default(),
            negation_lexicon: args.negation_lexicon.clone().or(file.negation_lexicon),
            speculation_lexicon: args
                .speculation_lexicon
                .clone()
                .or(file.speculation_lexicon),
            ade_lexicon: args.ade_lexicon.clone().or(file.ade_lexicon),
            bio_mode: args
                .bio_mode
                .or(file.bio_mode)
                .map(BioMode::from)
                .unwrap_or_default(),
            format: args.format.or(file.format).unwrap_or_default(),
            audit: args.audit.clone().or(file.audit),
        };
        if config.window == 0 {
            return Err(usage("--window: must be at least 1"));
        }
        if config.jobs == 0 {
            return Err(usage("--jobs: must be at least 1"));
        }
        for (flag, path) in [
            ("--negation-lexicon", &config.negation_lexicon),
            ("--speculation-lexicon", &config.speculation_lexicon),
            ("--ade-lexicon", &config.ade_lexicon),
        ] {
            if let Some(path) = path {
                require_file(flag, path)?;
            }
        }
        Ok(config)
    }

    pub fn lexicon(&self, phenomenon: Phenomenon) -> Result<CueLexicon> {
        let path = match phenomenon {
            Phenomenon::Negation => &self.negation_lexicon,
            Phenomenon::Speculation => &self.speculation_lexicon,
        };
        match path {
            Some(path) => Ok(CueLexicon::load(path, phenomenon)?),
            None => Ok(CueLexicon::default_for(phenomenon)),
        }
    }

    pub fn detector(&self, phenomenon: Phenomenon) -> Result<ScopeDetector> {
        let config = ScopeConfig {
            window: self.window,
        };
        Ok(ScopeDetector::for_phenomenon(
            phenomenon,
            self.lexicon(phenomenon)?,
            config,
        )?)
    }

    pub fn extractor(&self) -> Result<LexiconExtractor> {
        let lexicon = match &self.ade_lexicon {
            Some(path) => AdeLexicon::load(path)?,
            None => AdeLexicon::default_lexicon(),
        };
        Ok(LexiconExtractor::new(lexicon))
    }

    /// Writes the main output to `--out` or standard output.
    pub fn emit(&self, contents: &str) -> Result<()> {
        match &self.out {
            Some(path) => Ok(write_file(path, contents)?),
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(contents.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}
