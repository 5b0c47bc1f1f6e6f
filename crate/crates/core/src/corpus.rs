//! Corpus and prediction file formats, training-set composition and class
//! distribution reports.
//!
//! Corpus TSV: a header `id<TAB>text<TAB>class<TAB>spans`, then one sample
//! per line. Spans are `start:end` character offsets joined by `;`, empty for
//! samples without ADEs. Inside the text field tab, newline, carriage return
//! and backslash are written as `\t`, `\n`, `\r` and `\\`.
//!
//! Prediction files: optional `# key: value` metadata lines, then one
//! `id<TAB>spans` line per text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::algebra::{EntitySet, FilterReport};
use crate::metrics::{serialize_fixed, PerClass};
use crate::scope::{Phenomenon, ScopeSet, ScopeSpan};
use crate::text::{
    bio_to_spans, format_span_list, parse_span_list, BioMode, LabeledSample, RawText, SampleClass,
    Span, TagSequence,
};

pub const CORPUS_HEADER: &str = "id\ttext\tclass\tspans";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line 1: expected header {CORPUS_HEADER:?}, found {0:?}")]
    Header(String),
    #[error("line {line}{}: {message}", id.as_ref().map(|i| format!(" (id {i})")).unwrap_or_default())]
    Row {
        line: usize,
        id: Option<String>,
        message: String,
    },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("duplicate id {0}")]
    IdCollision(String),
    #[error("{pool} pool: sample {id} has class {class}")]
    ClassMismatch {
        pool: &'static str,
        id: String,
        class: SampleClass,
    },
    #[error("unknown text ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("{id}: span {span} exceeds text length {len}")]
    SpanOutOfBounds { id: String, span: Span, len: usize },
    #[error("id {0:?} cannot be written (tab, newline or leading '#')")]
    UnwritableId(String),
}

fn row_error(line: usize, id: Option<&str>, message: impl fmt::Display) -> CorpusError {
    CorpusError::Row {
        line,
        id: id.map(str::to_string),
        message: message.to_string(),
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, contents).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("invalid escape \\{other}")),
            None => return Err("dangling backslash".to_string()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PartitionName {
    Train,
    Test,
    Custom(String),
}

impl PartitionName {
    /// Guesses the partition from a file name.
    pub fn from_path(path: &Path) -> Self {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let lower = stem.to_lowercase();
        if lower.contains("train") {
            PartitionName::Train
        } else if lower.contains("test") {
            PartitionName::Test
        } else {
            PartitionName::Custom(stem)
        }
    }
}

impl fmt::Display for PartitionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionName::Train => f.write_str("train"),
            PartitionName::Test => f.write_str("test"),
            PartitionName::Custom(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPartition {
    pub name: PartitionName,
    samples: Vec<LabeledSample>,
}

impl CorpusPartition {
    pub fn new(name: PartitionName, samples: Vec<LabeledSample>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id()) {
                return Err(CorpusError::IdCollision(s.id().to_string()));
            }
        }
        Ok(Self { name, samples })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledSample> {
        self.samples.iter().find(|s| s.id() == id)
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// The tab-separated layout described in the module docs.
    #[default]
    Tsv,
    /// One JSON object per line: `{"id", "text", "class", "spans": [[s, e], ...]}`.
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            _ => Err(format!(
                "unknown corpus format {s:?} (expected tsv or jsonl)"
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    id: String,
    text: String,
    class: SampleClass,
    #[serde(default)]
    spans: Vec<Span>,
}

fn push_unique(
    samples: &mut Vec<LabeledSample>,
    seen: &mut HashSet<String>,
    sample: LabeledSample,
    line: usize,
) -> Result<(), CorpusError> {
    if !seen.insert(sample.id().to_string()) {
        return Err(CorpusError::DuplicateId {
            line,
            id: sample.id().to_string(),
        });
    }
    samples.push(sample);
    Ok(())
}

fn build_sample(
    line: usize,
    id: &str,
    text: String,
    class: SampleClass,
    spans: BTreeSet<Span>,
) -> Result<LabeledSample, CorpusError> {
    let raw = RawText::new(id, text).map_err(|e| row_error(line, Some(id), e))?;
    LabeledSample::new(raw, spans, class).map_err(|e| row_error(line, Some(id), e))
}

pub fn parse_corpus(
    source: &str,
    format: CorpusFormat,
    name: PartitionName,
) -> Result<CorpusPartition, CorpusError> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    match format {
        CorpusFormat::Tsv => {
            let mut lines = source.lines().enumerate();
            match lines.next() {
                None => {}
                Some((_, header)) if header == CORPUS_HEADER => {}
                Some((_, header)) => return Err(CorpusError::Header(header.to_string())),
            }
            for (i, row) in lines {
                let line = i + 1;
                let fields: Vec<&str> = row.split('\t').collect();
                if fields.len() != 4 {
                    return Err(row_error(
                        line,
                        None,
                        format!("expected 4 tab-separated fields, found {}", fields.len()),
                    ));
                }
                let id = fields[0];
                let text = unescape_field(fields[1]).map_err(|e| row_error(line, Some(id), e))?;
                let class: SampleClass = fields[2]
                    .parse()
                    .map_err(|e| row_error(line, Some(id), e))?;
                let spans = parse_span_list(fields[3]).map_err(|e| row_error(line, Some(id), e))?;
                let sample = build_sample(line, id, text, class, spans)?;
                push_unique(&mut samples, &mut seen, sample, line)?;
            }
        }
        CorpusFormat::Jsonl => {
            for (i, row) in source.lines().enumerate() {
                let line = i + 1;
                if row.trim().is_empty() {
                    continue;
                }
                let parsed: JsonRow =
                    serde_json::from_str(row).map_err(|e| row_error(line, None, e))?;
                let spans: BTreeSet<Span> = parsed.spans.into_iter().collect();
                let sample = build_sample(line, &parsed.id, parsed.text, parsed.class, spans)?;
                push_unique(&mut samples, &mut seen, sample, line)?;
            }
        }
    }
    if samples.is_empty() {
        log::warn!("corpus {name} is empty");
    }
    Ok(CorpusPartition { name, samples })
}

pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<CorpusPartition, CorpusError> {
    let path = path.as_ref();
    parse_corpus(&read(path)?, format, PartitionName::from_path(path))
}

fn check_id(id: &str) -> Result<(), CorpusError> {
    if id.contains(['\t', '\n', '\r']) || id.starts_with('#') {
        return Err(CorpusError::UnwritableId(id.to_string()));
    }
    Ok(())
}

pub fn format_corpus(
    partition: &CorpusPartition,
    format: CorpusFormat,
) -> Result<String, CorpusError> {
    let mut out = String::new();
    match format {
        CorpusFormat::Tsv => {
            out.push_str(CORPUS_HEADER);
            out.push('\n');
            for s in partition.samples() {
                check_id(s.id())?;
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    s.id(),
                    escape_field(s.text().content()),
                    s.class(),
                    format_span_list(s.gold())
                ));
            }
        }
        CorpusFormat::Jsonl => {
            for s in partition.samples() {
                let row = JsonRow {
                    id: s.id().to_string(),
                    text: s.text().content().to_string(),
                    class: s.class(),
                    spans: s.gold().iter().copied().collect(),
                };
                out.push_str(&serde_json::to_string(&row).expect("row serializes"));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn write_corpus(
    partition: &CorpusPartition,
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    write_file(path, &format_corpus(partition, format)?)
}

/// Training-set composition: the A/X base, optionally followed by the N pool
/// and then the S pool.
pub fn compose_training_set(
    base: &CorpusPartition,
    add_n: bool,
    add_s: bool,
    n_pool: &CorpusPartition,
    s_pool: &CorpusPartition,
) -> Result<CorpusPartition, CorpusError> {
    let check = |pool: &'static str, part: &CorpusPartition, allowed: &[SampleClass]| match part
        .samples()
        .iter()
        .find(|s| !allowed.contains(&s.class()))
    {
        Some(s) => Err(CorpusError::ClassMismatch {
            pool,
            id: s.id().to_string(),
            class: s.class(),
        }),
        None => Ok(()),
    };
    check("base", base, &[SampleClass::A, SampleClass::X])?;
    check("N", n_pool, &[SampleClass::N])?;
    check("S", s_pool, &[SampleClass::S])?;

    let mut samples = base.samples().to_vec();
    if add_n {
        samples.extend_from_slice(n_pool.samples());
    }
    if add_s {
        samples.extend_from_slice(s_pool.samples());
    }
    CorpusPartition::new(base.name.clone(), samples)
}

/// A percentage printed with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Percent(pub f64);

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_fixed(self.0, 2, serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub partition: String,
    pub counts: PerClass<usize>,
    pub total: usize,
    pub percentages: PerClass<Percent>,
}

impl DistributionReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Per-class sample counts and percentages (rounded to two decimals).
pub fn distribution_report(partition: &CorpusPartition) -> DistributionReport {
    let mut counts = PerClass::<usize>::default();
    for s in partition.samples() {
        counts[s.class()] += 1;
    }
    let total = counts.total();
    let mut percentages = PerClass::<Percent>::default();
    if total > 0 {
        for class in SampleClass::TABLE_ORDER {
            percentages[class] = Percent(round2(counts[class] as f64 * 100.0 / total as f64));
        }
    }
    DistributionReport {
        partition: partition.name.to_string(),
        counts,
        total,
        percentages,
    }
}

/// Spans keyed by text id, plus producer metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionFile {
    pub metadata: BTreeMap<String, String>,
    pub spans: BTreeMap<String, BTreeSet<Span>>,
}

impl PredictionFile {
    pub fn model(&self) -> Option<&str> {
        self.metadata.get("model").map(String::as_str)
    }

    pub fn run(&self) -> Option<&str> {
        self.metadata.get("run").map(String::as_str)
    }

    pub fn from_entity_sets<'a>(sets: impl IntoIterator<Item = &'a EntitySet>) -> Self {
        Self {
            metadata: BTreeMap::new(),
            spans: sets
                .into_iter()
                .map(|s| (s.text_id.clone(), s.spans.clone()))
                .collect(),
        }
    }

    pub fn parse(source: &str) -> Result<Self, CorpusError> {
        let mut file = PredictionFile::default();
        for (i, row) in source.lines().enumerate() {
            let line = i + 1;
            if let Some(comment) = row.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once(':') {
                    file.metadata
                        .insert(key.trim().to_string(), value.trim().to_string());
                }
                continue;
            }
            if row.trim().is_empty() {
                continue;
            }
            let (id, spans) = row
                .split_once('\t')
                .ok_or_else(|| row_error(line, None, "expected `id<TAB>spans`"))?;
            let spans = parse_span_list(spans).map_err(|e| row_error(line, Some(id), e))?;
            if file.spans.insert(id.to_string(), spans).is_some() {
                return Err(CorpusError::DuplicateId {
                    line,
                    id: id.to_string(),
                });
            }
        }
        Ok(file)
    }

    pub fn to_file_string(&self) -> Result<String, CorpusError> {
        let mut out = String::new();
        for (key, value) in &self.metadata {
            out.push_str(&format!("# {key}: {value}\n"));
        }
        for (id, spans) in &self.spans {
            check_id(id)?;
            out.push_str(&format!("{id}\t{}\n", format_span_list(spans)));
        }
        Ok(out)
    }

    /// One entity set per corpus sample, in corpus order; ids absent from the
    /// file get an empty set. Fails on ids the corpus does not contain and on
    /// spans beyond the text.
    pub fn bind(&self, corpus: &CorpusPartition) -> Result<Vec<EntitySet>, CorpusError> {
        let known: HashSet<&str> = corpus.samples().iter().map(LabeledSample::id).collect();
        let unknown: Vec<String> = self
            .spans
            .keys()
            .filter(|id| !known.contains(id.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(CorpusError::UnknownIds(unknown));
        }
        corpus
            .samples()
            .iter()
            .map(|s| {
                let spans = self.spans.get(s.id()).cloned().unwrap_or_default();
                let len = s.text().char_len();
                if let Some(span) = spans.iter().find(|sp| sp.end() > len) {
                    return Err(CorpusError::SpanOutOfBounds {
                        id: s.id().to_string(),
                        span: *span,
                        len,
                    });
                }
                Ok(EntitySet {
                    text_id: s.id().to_string(),
                    spans,
                })
            })
            .collect()
    }

    /// Reads externally predicted scopes (one phenomenon) as scope sets
    /// aligned with the corpus.
    pub fn bind_scopes(
        &self,
        corpus: &CorpusPartition,
        phenomenon: Phenomenon,
    ) -> Result<Vec<ScopeSet>, CorpusError> {
        Ok(self
            .bind(corpus)?
            .into_iter()
            .map(|set| ScopeSet {
                text_id: set.text_id,
                phenomenon,
                scopes: set
                    .spans
                    .into_iter()
                    .map(|span| ScopeSpan {
                        span,
                        phenomenon,
                        trigger: None,
                    })
                    .collect(),
            })
            .collect())
    }
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionFile, CorpusError> {
    PredictionFile::parse(&read(path.as_ref())?)
}

pub fn write_predictions(
    predictions: &PredictionFile,
    path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    write_file(path, &predictions.to_file_string()?)
}

/// Reads token-level BIO predictions (`id<TAB>tag tag ...`, one tag per token
/// of the corpus text) and converts them to spans.
pub fn parse_bio_predictions(
    source: &str,
    corpus: &CorpusPartition,
    mode: BioMode,
) -> Result<PredictionFile, CorpusError> {
    let mut file = PredictionFile::default();
    for (i, row) in source.lines().enumerate() {
        let line = i + 1;
        if let Some(comment) = row.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                file.metadata
                    .insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        if row.trim().is_empty() {
            continue;
        }
        let (id, tags) = row
            .split_once('\t')
            .ok_or_else(|| row_error(line, None, "expected `id<TAB>tags`"))?;
        let sample = corpus
            .get(id)
            .ok_or_else(|| row_error(line, Some(id), "id not in corpus"))?;
        let tags: TagSequence = tags.parse().map_err(|e| row_error(line, Some(id), e))?;
        let spans = bio_to_spans(&sample.text().tokens(), &tags, mode)
            .map_err(|e| row_error(line, Some(id), e))?;
        if file.spans.insert(id.to_string(), spans).is_some() {
            return Err(CorpusError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
    }
    Ok(file)
}

pub fn load_bio_predictions(
    path: impl AsRef<Path>,
    corpus: &CorpusPartition,
    mode: BioMode,
) -> Result<PredictionFile, CorpusError> {
    parse_bio_predictions(&read(path.as_ref())?, corpus, mode)
}

pub const SCOPE_HEADER: &str = "id\tphenomenon\tscope\ttrigger\tcue\tcategory";

fn trigger_fields(scope: &ScopeSpan) -> (String, String, String) {
    match &scope.trigger {
        Some(t) => (
            t.span.to_string(),
            t.cue.pattern.clone(),
            t.cue.category.to_string(),
        ),
        None => ("-".into(), "-".into(), "-".into()),
    }
}

/// Scope records, one line per scope, ordered by id then scope start.
pub fn format_scope_records(sets: &[ScopeSet]) -> String {
    let mut rows: Vec<(&str, &ScopeSpan)> = sets
        .iter()
        .flat_map(|set| set.scopes.iter().map(move |s| (set.text_id.as_str(), s)))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(b.0).then_with(|| a.1.cmp(b.1)));
    let mut out = String::from(SCOPE_HEADER);
    out.push('\n');
    for (id, scope) in rows {
        let (trigger, cue, category) = trigger_fields(scope);
        out.push_str(&format!(
            "{id}\t{}\t{}\t{trigger}\t{cue}\t{category}\n",
            scope.phenomenon, scope.span
        ));
    }
    out
}

pub const AUDIT_HEADER: &str = "id\tspan\tphenomenon\tscope\ttrigger\tcue";

/// One line per discarded span with the scope that caused the discard.
pub fn format_audit(reports: &[FilterReport]) -> String {
    let mut rows: Vec<(&str, &crate::algebra::Discard)> = reports
        .iter()
        .flat_map(|r| {
            r.discarded
                .iter()
                .map(move |d| (r.kept.text_id.as_str(), d))
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.span.cmp(&b.1.span)));
    let mut out = String::from(AUDIT_HEADER);
    out.push('\n');
    for (id, d) in rows {
        let (trigger, cue, _) = trigger_fields(&d.witness);
        out.push_str(&format!(
            "{id}\t{}\t{}\t{}\t{trigger}\t{cue}\n",
            d.span, d.witness.phenomenon, d.witness.span
        ));
    }
    out
}
