//! ADE extractors: a lexicon matcher that needs no trained model, and a
//! pass-through over an external prediction file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algebra::EntitySet;
use crate::corpus::{CorpusError, CorpusPartition, PredictionFile};
use crate::phrase::{phrase_key, PhraseTable};
use crate::text::RawText;

const DEFAULT_ADE_LEXICON: &str = include_str!("../data/ade_lexicon.txt");

#[derive(Debug, Error)]
pub enum ExtractorError {
    #[error("line {line}: duplicate ADE term {term:?}")]
    Duplicate { line: usize, term: String },
    #[error("ADE lexicon contains no terms")]
    Empty,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Binding(#[from] CorpusError),
}

/// Produces the predicted ADE spans for a text.
pub trait AdeExtractor {
    fn extract(&self, text: &RawText) -> EntitySet;
}

/// Lowercased ADE surface forms.
#[derive(Debug, Clone)]
pub struct AdeLexicon {
    terms: Vec<String>,
    table: PhraseTable<()>,
}

impl AdeLexicon {
    /// One term per line; `#` starts a comment line, blank lines are skipped.
    pub fn parse(source: &str) -> Result<Self, ExtractorError> {
        let mut terms = Vec::new();
        let mut table = PhraseTable::default();
        for (i, line) in source.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let term = trimmed
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_lowercase();
            let key = phrase_key(&term);
            if table.get_mut(&key).is_some() {
                return Err(ExtractorError::Duplicate {
                    line: line_no,
                    term,
                });
            }
            table.insert(key, ());
            terms.push(term);
        }
        if terms.is_empty() {
            return Err(ExtractorError::Empty);
        }
        Ok(Self { terms, table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExtractorError> {
        let path = path.as_ref();
        let source = fs::read_to_string(path).map_err(|source| ExtractorError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&source)
    }

    /// The small shipped lexicon of common ADE expressions.
    pub fn default_lexicon() -> Self {
        Self::parse(DEFAULT_ADE_LEXICON).expect("bundled ADE lexicon")
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Leftmost-longest, case-insensitive, token-aligned term matching.
#[derive(Debug, Clone)]
pub struct LexiconExtractor {
    lexicon: AdeLexicon,
}

impl LexiconExtractor {
    pub fn new(lexicon: AdeLexicon) -> Self {
        Self { lexicon }
    }
}

impl AdeExtractor for LexiconExtractor {
    fn extract(&self, text: &RawText) -> EntitySet {
        let tokens = text.tokens();
        let spans = self
            .lexicon
            .table
            .find(&tokens)
            .into_iter()
            .map(|(first, n, _)| tokens[first].span.cover(&tokens[first + n - 1].span));
        EntitySet::new(text.id(), spans)
    }
}

/// Replays the spans of a prediction file that has been validated against a
/// corpus.
#[derive(Debug, Clone)]
pub struct PredictionExtractor {
    by_id: BTreeMap<String, EntitySet>,
}

impl PredictionExtractor {
    pub fn from_predictions(
        predictions: &PredictionFile,
        corpus: &CorpusPartition,
    ) -> Result<Self, ExtractorError> {
        let by_id = predictions
            .bind(corpus)?
            .into_iter()
            .map(|set| (set.text_id.clone(), set))
            .collect();
        Ok(Self { by_id })
    }
}

impl AdeExtractor for PredictionExtractor {
    fn extract(&self, text: &RawText) -> EntitySet {
        self.by_id
            .get(text.id())
            .cloned()
            .unwrap_or_else(|| EntitySet::new(text.id(), []))
    }
}

/// Runs an extractor over every sample of a corpus, in corpus order.
pub fn extract_corpus(extractor: &impl AdeExtractor, corpus: &CorpusPartition) -> Vec<EntitySet> {
    corpus
        .samples()
        .iter()
        .map(|s| extractor.extract(s.text()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PartitionName;
    use crate::text::{LabeledSample, SampleClass, Span};

    fn text(content: &str) -> RawText {
        RawText::new("t", content).unwrap()
    }

    fn found(extractor: &LexiconExtractor, t: &RawText) -> Vec<String> {
        extractor
            .extract(t)
            .spans
            .iter()
            .map(|s| t.slice(*s).unwrap().to_string())
            .collect()
    }

    #[test]
    fn metoprolol_hypokalemia() {
        let ex = LexiconExtractor::new(AdeLexicon::parse("hypokalemia").unwrap());
        let t = text("Metoprolol is NOT known to cause hypokalemia");
        let set = ex.extract(&t);
        assert_eq!(set.spans, [Span::new(33, 44).unwrap()].into());
        assert!(ex.extract(&text("I love this drug")).is_empty());
    }

    #[test]
    fn longest_match_wins() {
        let ex = LexiconExtractor::new(AdeLexicon::parse("pain\nno pain\ninflammation").unwrap());
        let t = text("No pain no inflammation");
        assert_eq!(found(&ex, &t), ["No pain", "inflammation"]);
    }

    #[test]
    fn token_aligned_only() {
        let ex = LexiconExtractor::new(AdeLexicon::parse("pain").unwrap());
        assert!(ex.extract(&text("painkillers work")).is_empty());
        let t = text("#pain, PAIN!");
        assert_eq!(found(&ex, &t), ["#pain", "PAIN"]);
    }

    #[test]
    fn default_lexicon_covers_example_terms() {
        let ex = LexiconExtractor::new(AdeLexicon::default_lexicon());
        let t = text("#restlesslegs and heart failure, not sleeping, shivering and aches");
        assert_eq!(
            found(&ex, &t),
            [
                "#restlesslegs",
                "heart failure",
                "not sleeping",
                "shivering",
                "aches"
            ]
        );
        assert!(AdeLexicon::default_lexicon().terms().len() >= 40);
    }

    #[test]
    fn lexicon_errors() {
        assert!(matches!(
            AdeLexicon::parse("# none\n\n"),
            Err(ExtractorError::Empty)
        ));
        assert!(matches!(
            AdeLexicon::parse("rash\nRash\n"),
            Err(ExtractorError::Duplicate { line: 2, .. })
        ));
    }

    #[test]
    fn pass_through_predictions() {
        let corpus = CorpusPartition::new(
            PartitionName::Test,
            vec![
                LabeledSample::new(
                    RawText::new("m", "Metoprolol is NOT known to cause hypokalemia").unwrap(),
                    Default::default(),
                    SampleClass::N,
                )
                .unwrap(),
                LabeledSample::new(
                    RawText::new("x", "fine").unwrap(),
                    Default::default(),
                    SampleClass::X,
                )
                .unwrap(),
            ],
        )
        .unwrap();
        let file = PredictionFile::parse("# model: ext\nm\t33:44\n").unwrap();
        let ex = PredictionExtractor::from_predictions(&file, &corpus).unwrap();
        let sets = extract_corpus(&ex, &corpus);
        assert_eq!(sets[0].spans, [Span::new(33, 44).unwrap()].into());
        assert!(sets[1].is_empty());
        assert!(ex.extract(&RawText::new("other", "x").unwrap()).is_empty());

        let bad = PredictionFile::parse("zz\t1:2\n").unwrap();
        assert!(matches!(
            PredictionExtractor::from_predictions(&bad, &corpus),
            Err(ExtractorError::Binding(CorpusError::UnknownIds(_)))
        ));
    }
}
