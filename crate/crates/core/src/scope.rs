//! Rule-based negation and speculation scope detection.
//!
//! The engine works in two phases over the token sequence of a text. Cue
//! matching finds lexicon triggers leftmost-longest, so a pseudo-trigger such
//! as `not only` swallows the `not` it contains. Scope resolution then opens
//! a forward window after every pre-trigger and a backward window before
//! every post-trigger. A window closes early at sentence punctuation, at a
//! newline, or at any other cue (terminators included).
//!
//! The same engine serves both phenomena; only the lexicon differs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phrase::{phrase_key, PhraseTable};
use crate::text::{LabeledSample, RawText, Span, Token};

const DEFAULT_NEGATION: &str = include_str!("../data/negation_cues.txt");
const DEFAULT_SPECULATION: &str = include_str!("../data/speculation_cues.txt");

/// Classic NegEx window, in tokens.
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: expected `pattern|category`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown cue category {category:?}")]
    UnknownCategory { line: usize, category: String },
    #[error("line {line}: duplicate cue {pattern:?} ({category})")]
    Duplicate {
        line: usize,
        pattern: String,
        category: CueCategory,
    },
    #[error("lexicon contains no cues")]
    Empty,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ScopeError {
    #[error("scope window must be at least 1 token")]
    InvalidWindow,
    #[error("at least one cue lexicon is required")]
    NoLexicon,
    #[error("expected a {expected} lexicon, got {found}")]
    WrongPhenomenon {
        expected: Phenomenon,
        found: Phenomenon,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phenomenon {
    Negation,
    Speculation,
}

impl fmt::Display for Phenomenon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phenomenon::Negation => "negation",
            Phenomenon::Speculation => "speculation",
        })
    }
}

impl FromStr for Phenomenon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neg" | "negation" => Ok(Phenomenon::Negation),
            "spec" | "speculation" => Ok(Phenomenon::Speculation),
            _ => Err(format!("unknown phenomenon {s:?} (expected neg or spec)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueCategory {
    /// Opens a scope over the following tokens.
    PreTrigger,
    /// Opens a scope over the preceding tokens.
    PostTrigger,
    /// Looks like a trigger but opens nothing.
    PseudoTrigger,
    /// Closes any open scope.
    Terminator,
}

impl CueCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            CueCategory::PreTrigger => "pre_trigger",
            CueCategory::PostTrigger => "post_trigger",
            CueCategory::PseudoTrigger => "pseudo_trigger",
            CueCategory::Terminator => "terminator",
        }
    }

    pub fn opens_scope(&self) -> bool {
        matches!(self, CueCategory::PreTrigger | CueCategory::PostTrigger)
    }

    // When one pattern is listed under several categories.
    fn precedence(&self) -> u8 {
        match self {
            CueCategory::PseudoTrigger => 0,
            CueCategory::PreTrigger => 1,
            CueCategory::PostTrigger => 2,
            CueCategory::Terminator => 3,
        }
    }
}

impl fmt::Display for CueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CueCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pre_trigger" => Ok(CueCategory::PreTrigger),
            "post_trigger" => Ok(CueCategory::PostTrigger),
            "pseudo_trigger" => Ok(CueCategory::PseudoTrigger),
            "terminator" => Ok(CueCategory::Terminator),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cue {
    pub pattern: String,
    pub category: CueCategory,
    pub phenomenon: Phenomenon,
}

/// The cue inventory for one phenomenon.
///
/// Keeps the source layout (comments, blank lines, original spelling of each
/// cue line) so that saving a loaded lexicon reproduces the file byte for byte.
#[derive(Debug, Clone)]
pub struct CueLexicon {
    phenomenon: Phenomenon,
    cues: Vec<Cue>,
    // Source lines, verbatim.
    layout: Vec<String>,
    trailing_newline: bool,
    table: PhraseTable<Vec<usize>>,
}

fn normalize_pattern(pattern: &str) -> String {
    pattern
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl CueLexicon {
    pub fn new(phenomenon: Phenomenon) -> Self {
        Self {
            phenomenon,
            cues: Vec::new(),
            layout: Vec::new(),
            trailing_newline: true,
            table: PhraseTable::default(),
        }
    }

    /// Parses the `pattern|category` line format; `#` starts a comment line.
    pub fn parse(source: &str, phenomenon: Phenomenon) -> Result<Self, LexiconError> {
        let mut lexicon = Self::new(phenomenon);
        let body = source.strip_suffix('\n');
        lexicon.trailing_newline = body.is_some();
        let body = body.unwrap_or(source);
        if source.is_empty() {
            return Err(LexiconError::Empty);
        }
        for (i, raw) in body.split('\n').enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                lexicon.layout.push(raw.to_string());
                continue;
            }
            let malformed = || LexiconError::Malformed {
                line,
                text: raw.to_string(),
            };
            let (pattern, category) = trimmed.split_once('|').ok_or_else(malformed)?;
            let (pattern, category) = (pattern.trim(), category.trim());
            if pattern.is_empty() || category.is_empty() || phrase_key(pattern).is_empty() {
                return Err(malformed());
            }
            let category: CueCategory = category
                .parse()
                .map_err(|category| LexiconError::UnknownCategory { line, category })?;
            lexicon.insert_cue(pattern, category, line)?;
            lexicon.layout.push(raw.to_string());
        }
        if lexicon.cues.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(lexicon)
    }

    pub fn load(path: impl AsRef<Path>, phenomenon: Phenomenon) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let source = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&source, phenomenon)
    }

    /// The shipped negation lexicon.
    pub fn default_negation() -> Self {
        Self::parse(DEFAULT_NEGATION, Phenomenon::Negation).expect("bundled negation lexicon")
    }

    /// The shipped speculation lexicon.
    pub fn default_speculation() -> Self {
        Self::parse(DEFAULT_SPECULATION, Phenomenon::Speculation)
            .expect("bundled speculation lexicon")
    }

    pub fn default_for(phenomenon: Phenomenon) -> Self {
        match phenomenon {
            Phenomenon::Negation => Self::default_negation(),
            Phenomenon::Speculation => Self::default_speculation(),
        }
    }

    fn insert_cue(
        &mut self,
        pattern: &str,
        category: CueCategory,
        line: usize,
    ) -> Result<usize, LexiconError> {
        let pattern = normalize_pattern(pattern);
        if self
            .cues
            .iter()
            .any(|c| c.pattern == pattern && c.category == category)
        {
            return Err(LexiconError::Duplicate {
                line,
                pattern,
                category,
            });
        }
        let index = self.cues.len();
        let key = phrase_key(&pattern);
        match self.table.get_mut(&key) {
            Some(indices) => indices.push(index),
            None => self.table.insert(key, vec![index]),
        }
        self.cues.push(Cue {
            pattern,
            category,
            phenomenon: self.phenomenon,
        });
        Ok(index)
    }

    /// Appends a cue, written in canonical form on save.
    pub fn add_cue(&mut self, pattern: &str, category: CueCategory) -> Result<(), LexiconError> {
        let line = self.layout.len() + 1;
        if phrase_key(pattern).is_empty() {
            return Err(LexiconError::Malformed {
                line,
                text: pattern.to_string(),
            });
        }
        let index = self.insert_cue(pattern, category, line)?;
        self.layout
            .push(format!("{}|{}", self.cues[index].pattern, category));
        self.trailing_newline = true;
        Ok(())
    }

    pub fn phenomenon(&self) -> Phenomenon {
        self.phenomenon
    }

    pub fn cues(&self) -> &[Cue] {
        &self.cues
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    /// Longest cue, in tokens.
    pub fn max_pattern_tokens(&self) -> usize {
        self.table.max_tokens()
    }

    /// Serialized file contents.
    pub fn to_file_string(&self) -> String {
        let mut out = self.layout.join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let path = path.as_ref();
        fs::write(path, self.to_file_string()).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// A lexicon cue found in a text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CueMatch {
    pub span: Span,
    pub first_token: usize,
    pub last_token: usize,
    pub cue: Cue,
}

impl CueMatch {
    pub fn is_pseudo(&self) -> bool {
        self.cue.category == CueCategory::PseudoTrigger
    }
}

/// Leftmost-longest, case-insensitive, non-overlapping cue matches.
pub fn find_cues(tokens: &[Token], lexicon: &CueLexicon) -> Vec<CueMatch> {
    lexicon
        .table
        .find(tokens)
        .into_iter()
        .map(|(first, n, indices)| {
            let cue = indices
                .iter()
                .map(|&i| &lexicon.cues[i])
                .min_by_key(|c| c.category.precedence())
                .expect("phrase table entries are non-empty")
                .clone();
            let last = first + n - 1;
            CueMatch {
                span: tokens[first].span.cover(&tokens[last].span),
                first_token: first,
                last_token: last,
                cue,
            }
        })
        .collect()
}

/// A negation or speculation scope. Scopes read from external prediction
/// files have no trigger.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ScopeSpan {
    pub span: Span,
    pub phenomenon: Phenomenon,
    pub trigger: Option<CueMatch>,
}

/// Every scope of one phenomenon detected in one text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeSet {
    pub text_id: String,
    pub phenomenon: Phenomenon,
    pub scopes: Vec<ScopeSpan>,
}

impl ScopeSet {
    pub fn empty(text_id: impl Into<String>, phenomenon: Phenomenon) -> Self {
        Self {
            text_id: text_id.into(),
            phenomenon,
            scopes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }
}

fn is_sentence_end(token: &Token) -> bool {
    matches!(token.surface.as_str(), "." | "!" | "?" | "\u{2026}")
}

/// Expands cue matches into scopes.
///
/// `content` is the text the tokens came from; it is needed to see newlines
/// between tokens.
pub fn resolve_scopes(
    content: &str,
    tokens: &[Token],
    matches: &[CueMatch],
    window: usize,
    phenomenon: Phenomenon,
) -> Vec<ScopeSpan> {
    let chars: Vec<char> = content.chars().collect();
    let break_before: Vec<bool> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| i > 0 && chars[tokens[i - 1].span.end()..t.span.start()].contains(&'\n'))
        .collect();
    let mut is_cue = vec![false; tokens.len()];
    for m in matches {
        is_cue[m.first_token..=m.last_token].fill(true);
    }
    let blocked = |j: usize| is_cue[j] || is_sentence_end(&tokens[j]);

    let mut scopes = Vec::new();
    for m in matches {
        let range = match m.cue.category {
            CueCategory::PreTrigger => {
                let first = m.last_token + 1;
                let mut last = None;
                let mut j = first;
                while j < tokens.len() && j - first < window && !break_before[j] && !blocked(j) {
                    last = Some(j);
                    j += 1;
                }
                last.map(|l| (first, l))
            }
            CueCategory::PostTrigger => {
                let last = m.first_token.checked_sub(1);
                let mut first = None;
                if let Some(last) = last {
                    let mut j = last;
                    loop {
                        if last - j >= window || break_before[j + 1] || blocked(j) {
                            break;
                        }
                        first = Some(j);
                        if j == 0 {
                            break;
                        }
                        j -= 1;
                    }
                }
                first.zip(last)
            }
            CueCategory::PseudoTrigger | CueCategory::Terminator => None,
        };
        if let Some((first, last)) = range {
            scopes.push(ScopeSpan {
                span: tokens[first].span.cover(&tokens[last].span),
                phenomenon,
                trigger: Some(m.clone()),
            });
        }
    }
    scopes.sort();
    scopes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeConfig {
    /// Maximum scope length in tokens.
    pub window: usize,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
        }
    }
}

/// A lexicon plus window: computes the scope set of a text for one phenomenon.
#[derive(Debug, Clone)]
pub struct ScopeDetector {
    lexicon: CueLexicon,
    config: ScopeConfig,
}

impl ScopeDetector {
    pub fn new(lexicon: CueLexicon, config: ScopeConfig) -> Result<Self, ScopeError> {
        if config.window == 0 {
            return Err(ScopeError::InvalidWindow);
        }
        Ok(Self { lexicon, config })
    }

    /// A detector that must receive a lexicon of the given phenomenon.
    pub fn for_phenomenon(
        phenomenon: Phenomenon,
        lexicon: CueLexicon,
        config: ScopeConfig,
    ) -> Result<Self, ScopeError> {
        if lexicon.phenomenon() != phenomenon {
            return Err(ScopeError::WrongPhenomenon {
                expected: phenomenon,
                found: lexicon.phenomenon(),
            });
        }
        Self::new(lexicon, config)
    }

    pub fn default_negation() -> Self {
        Self::new(CueLexicon::default_negation(), ScopeConfig::default()).unwrap()
    }

    pub fn default_speculation() -> Self {
        Self::new(CueLexicon::default_speculation(), ScopeConfig::default()).unwrap()
    }

    pub fn phenomenon(&self) -> Phenomenon {
        self.lexicon.phenomenon()
    }

    pub fn lexicon(&self) -> &CueLexicon {
        &self.lexicon
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    pub fn detect(&self, text: &RawText) -> ScopeSet {
        let tokens = text.tokens();
        let matches = find_cues(&tokens, &self.lexicon);
        ScopeSet {
            text_id: text.id().to_string(),
            phenomenon: self.phenomenon(),
            scopes: resolve_scopes(
                text.content(),
                &tokens,
                &matches,
                self.config.window,
                self.phenomenon(),
            ),
        }
    }
}

/// Keeps the samples whose text contains at least one scope-opening cue from
/// any of the lexicons. Order is preserved.
pub fn prefilter(
    samples: &[LabeledSample],
    lexicons: &[&CueLexicon],
) -> Result<Vec<LabeledSample>, ScopeError> {
    if lexicons.is_empty() {
        return Err(ScopeError::NoLexicon);
    }
    Ok(samples
        .iter()
        .filter(|sample| {
            let tokens = sample.text().tokens();
            lexicons.iter().any(|lex| {
                find_cues(&tokens, lex)
                    .iter()
                    .any(|m| m.cue.category.opens_scope())
            })
        })
        .cloned()
        .collect())
}
