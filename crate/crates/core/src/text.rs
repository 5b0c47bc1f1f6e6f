//! Text, span, token and BIO tag types shared by every other module.
//!
//! All offsets are counted in Unicode scalar values (Rust `char`s), never in
//! bytes. Spans are half-open: `[start, end)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("sample id must be non-empty and free of control characters: {0:?}")]
    InvalidId(String),
    #[error("sample {0}: text is empty")]
    EmptyContent(String),
    #[error("invalid span {start}:{end} (start must be < end)")]
    InvalidSpan { start: usize, end: usize },
    #[error("span {span} exceeds text length {len}")]
    SpanOutOfBounds { span: Span, len: usize },
    #[error("spans {0} and {1} overlap")]
    OverlappingSpans(Span, Span),
    #[error("class {class} {reason}")]
    ClassSpanMismatch {
        class: SampleClass,
        reason: &'static str,
    },
    #[error("{tags} tags for {tokens} tokens")]
    LengthMismatch { tags: usize, tokens: usize },
    #[error("ill-formed BIO sequence: I at position {0} does not continue an entity")]
    IllFormedBio(usize),
    #[error("cannot parse span {0:?} (expected start:end)")]
    ParseSpan(String),
    #[error("unknown sample class {0:?} (expected one of A, X, N, S)")]
    ParseClass(String),
    #[error("unknown BIO tag {0:?}")]
    ParseTag(String),
}

/// A half-open character interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    start: usize,
    end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self, TextError> {
        if start < end {
            Ok(Self { start, end })
        } else {
            Err(TextError::InvalidSpan { start, end })
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    /// Always false; present for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of characters shared with `other` (0 when disjoint or touching).
    pub fn overlap_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Smallest span covering both.
    pub fn cover(&self, other: &Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    pub fn check_bounds(&self, len: usize) -> Result<(), TextError> {
        if self.end > len {
            Err(TextError::SpanOutOfBounds { span: *self, len })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for Span {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TextError::ParseSpan(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let start = a.parse::<usize>().map_err(|_| bad())?;
        let end = b.parse::<usize>().map_err(|_| bad())?;
        Span::new(start, end)
    }
}

impl TryFrom<(usize, usize)> for Span {
    type Error = TextError;

    fn try_from((start, end): (usize, usize)) -> Result<Self, Self::Error> {
        Span::new(start, end)
    }
}

impl From<Span> for (usize, usize) {
    fn from(span: Span) -> Self {
        (span.start, span.end)
    }
}

/// Parses a `;`-joined list of `start:end` pairs. The empty string is the empty set.
pub fn parse_span_list(field: &str) -> Result<BTreeSet<Span>, TextError> {
    if field.is_empty() {
        return Ok(BTreeSet::new());
    }
    field.split(';').map(str::parse).collect()
}

pub fn format_span_list<'a>(spans: impl IntoIterator<Item = &'a Span>) -> String {
    spans
        .into_iter()
        .map(Span::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// Fails on the first pair of overlapping spans in a sorted set.
pub fn check_disjoint(spans: &BTreeSet<Span>) -> Result<(), TextError> {
    let mut prev: Option<&Span> = None;
    for span in spans {
        if let Some(p) = prev {
            if p.end > span.start {
                return Err(TextError::OverlappingSpans(*p, *span));
            }
        }
        prev = Some(span);
    }
    Ok(())
}

/// One social-media post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawText {
    id: String,
    content: String,
    char_len: usize,
}

impl RawText {
    pub fn new(id: impl Into<String>, content: impl Into<String>) -> Result<Self, TextError> {
        let id = id.into();
        let content = content.into();
        if id.is_empty() || id.chars().any(char::is_control) {
            return Err(TextError::InvalidId(id));
        }
        if content.trim().is_empty() {
            return Err(TextError::EmptyContent(id));
        }
        let char_len = content.chars().count();
        Ok(Self {
            id,
            content,
            char_len,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    /// Length in characters.
    pub fn char_len(&self) -> usize {
        self.char_len
    }

    /// The substring located by `span`, or `None` when out of bounds.
    pub fn slice(&self, span: Span) -> Option<&str> {
        char_slice(&self.content, span)
    }

    pub fn tokens(&self) -> Vec<Token> {
        tokenize(&self.content)
    }
}

pub(crate) fn char_slice(s: &str, span: Span) -> Option<&str> {
    let mut byte_start = None;
    for (ci, (bi, _)) in s.char_indices().enumerate() {
        if ci == span.start {
            byte_start = Some(bi);
        }
        if ci == span.end {
            return byte_start.map(|b| &s[b..bi]);
        }
    }
    if s.chars().count() == span.end {
        return byte_start.map(|b| &s[b..]);
    }
    None
}

/// SNAX sample class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SampleClass {
    /// Contains an ADE.
    A,
    /// No ADE.
    X,
    /// Explicitly negated ADE.
    N,
    /// Speculated or questioned ADE.
    S,
}

impl SampleClass {
    /// Column order used by the reporting tables.
    pub const TABLE_ORDER: [SampleClass; 4] = [
        SampleClass::S,
        SampleClass::N,
        SampleClass::A,
        SampleClass::X,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SampleClass::A => "A",
            SampleClass::X => "X",
            SampleClass::N => "N",
            SampleClass::S => "S",
        }
    }
}

impl fmt::Display for SampleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleClass {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(SampleClass::A),
            "X" | "x" => Ok(SampleClass::X),
            "N" | "n" => Ok(SampleClass::N),
            "S" | "s" => Ok(SampleClass::S),
            _ => Err(TextError::ParseClass(s.to_string())),
        }
    }
}

/// A text with its gold ADE spans and class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    text: RawText,
    gold: BTreeSet<Span>,
    class: SampleClass,
}

impl LabeledSample {
    pub fn new(text: RawText, gold: BTreeSet<Span>, class: SampleClass) -> Result<Self, TextError> {
        match class {
            SampleClass::A if gold.is_empty() => {
                return Err(TextError::ClassSpanMismatch {
                    class,
                    reason: "requires at least one gold ADE span",
                })
            }
            SampleClass::X | SampleClass::N | SampleClass::S if !gold.is_empty() => {
                return Err(TextError::ClassSpanMismatch {
                    class,
                    reason: "must not carry gold ADE spans",
                })
            }
            _ => {}
        }
        for span in &gold {
            span.check_bounds(text.char_len())?;
        }
        check_disjoint(&gold)?;
        Ok(Self { text, gold, class })
    }

    pub fn text(&self) -> &RawText {
        &self.text
    }

    pub fn id(&self) -> &str {
        self.text.id()
    }

    pub fn gold(&self) -> &BTreeSet<Span> {
        &self.gold
    }

    pub fn class(&self) -> SampleClass {
        self.class
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub span: Span,
    pub index: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits text into word and punctuation tokens.
///
/// Word tokens are runs of alphanumerics. A leading `#` or `@` stays attached
/// to the following word, and an apostrophe between two word characters is
/// kept inside the word (`I'm`, `there's`). Every other non-space character
/// becomes a one-character token. Whitespace is skipped.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let starts_word = is_word_char(c)
            || ((c == '#' || c == '@') && chars.get(i + 1).copied().is_some_and(is_word_char));
        if starts_word {
            i += 1;
            while i < chars.len() {
                let ch = chars[i];
                if is_word_char(ch)
                    || (is_apostrophe(ch)
                        && is_word_char(chars[i - 1])
                        && chars.get(i + 1).copied().is_some_and(is_word_char))
                {
                    i += 1;
                } else {
                    break;
                }
            }
        } else {
            i += 1;
        }
        tokens.push(Token {
            surface: chars[start..i].iter().collect(),
            span: Span { start, end: i },
            index: tokens.len(),
        });
    }
    tokens
}

/// Matching key for a token surface: lowercased, typographic apostrophes
/// folded to ASCII, leading hashtag marker dropped.
pub fn match_key(surface: &str) -> String {
    let folded: String = surface
        .chars()
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect::<String>()
        .to_lowercase();
    match folded.strip_prefix('#') {
        Some(rest) if !rest.is_empty() => rest.to_string(),
        _ => folded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    B,
    I,
    O,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::O => "O",
        })
    }
}

impl FromStr for Tag {
    type Err = TextError;

    /// Accepts typed labels such as `B-ADE` as well as bare tags.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split('-').next().unwrap_or_default() {
            "B" | "b" => Ok(Tag::B),
            "I" | "i" => Ok(Tag::I),
            "O" | "o" => Ok(Tag::O),
            _ => Err(TextError::ParseTag(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagSequence(pub Vec<Tag>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tags(&self) -> &[Tag] {
        &self.0
    }

    /// No `I` at the start or directly after an `O`.
    pub fn is_well_formed(&self) -> bool {
        self.first_ill_formed().is_none()
    }

    fn first_ill_formed(&self) -> Option<usize> {
        let mut prev = Tag::O;
        for (i, &tag) in self.0.iter().enumerate() {
            if tag == Tag::I && prev == Tag::O {
                return Some(i);
            }
            prev = tag;
        }
        None
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tag) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{tag}")?;
        }
        Ok(())
    }
}

impl FromStr for TagSequence {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(TagSequence)
    }
}

/// How `bio_to_spans` treats an `I` that does not continue an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BioMode {
    /// Treat the stray `I` as `B`.
    #[default]
    Lenient,
    /// Reject the sequence.
    Strict,
}

/// Tags every token that intersects a span: `B` for the first token of the
/// span, `I` for the rest, `O` elsewhere. A token straddling two spans is
/// assigned to the earlier one.
pub fn spans_to_bio(tokens: &[Token], spans: &BTreeSet<Span>) -> Result<TagSequence, TextError> {
    check_disjoint(spans)?;
    let spans: Vec<Span> = spans.iter().copied().collect();
    let mut tags = Vec::with_capacity(tokens.len());
    let mut p = 0;
    let mut prev_owner: Option<usize> = None;
    for token in tokens {
        while p < spans.len() && spans[p].end <= token.span.start {
            p += 1;
        }
        let owner = (p < spans.len() && spans[p].start < token.span.end).then_some(p);
        tags.push(match owner {
            None => Tag::O,
            Some(k) if prev_owner == Some(k) => Tag::I,
            Some(_) => Tag::B,
        });
        prev_owner = owner;
    }
    Ok(TagSequence(tags))
}

/// One span per maximal `B I*` run, from the first token's start to the last
/// token's end.
pub fn bio_to_spans(
    tokens: &[Token],
    tags: &TagSequence,
    mode: BioMode,
) -> Result<BTreeSet<Span>, TextError> {
    if tokens.len() != tags.len() {
        return Err(TextError::LengthMismatch {
            tags: tags.len(),
            tokens: tokens.len(),
        });
    }
    if mode == BioMode::Strict {
        if let Some(pos) = tags.first_ill_formed() {
            return Err(TextError::IllFormedBio(pos));
        }
    }
    let mut spans = BTreeSet::new();
    let mut open: Option<Span> = None;
    for (token, &tag) in tokens.iter().zip(tags.tags()) {
        match (tag, open.as_mut()) {
            (Tag::I, Some(current)) => current.end = token.span.end,
            (Tag::B, _) | (Tag::I, None) => {
                spans.extend(open.replace(token.span));
            }
            (Tag::O, _) => spans.extend(open.take()),
        }
    }
    spans.extend(open);
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    fn sp(a: usize, b: usize) -> Span {
        Span::new(a, b).unwrap()
    }

    const METOPROLOL: &str = "Metoprolol is NOT known to cause hypokalemia";

    #[test]
    fn tokenize_offsets() {
        let tokens = tokenize("no pain no inflammation");
        assert_eq!(surfaces(&tokens), ["no", "pain", "no", "inflammation"]);
        let spans: Vec<_> = tokens
            .iter()
            .map(|t| (t.span.start(), t.span.end()))
            .collect();
        assert_eq!(spans, [(0, 2), (3, 7), (8, 10), (11, 23)]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_hashtags_mentions_contractions() {
        let tokens = tokenize("#restlesslegs #quetiapine");
        assert_eq!(surfaces(&tokens), ["#restlesslegs", "#quetiapine"]);

        let tokens = tokenize("@UKingsbrook That's correct! I'm done, 'ok'");
        assert_eq!(
            surfaces(&tokens),
            [
                "@UKingsbrook",
                "That's",
                "correct",
                "!",
                "I'm",
                "done",
                ",",
                "'",
                "ok",
                "'"
            ]
        );
        let tokens = tokenize("# alone and (Onglyza).");
        assert_eq!(
            surfaces(&tokens),
            ["#", "alone", "and", "(", "Onglyza", ")", "."]
        );
    }

    #[test]
    fn tokenize_counts_chars_not_bytes() {
        let tokens = tokenize("café €50 ok");
        assert_eq!(surfaces(&tokens), ["café", "€", "50", "ok"]);
        assert_eq!(tokens[3].span, sp(9, 11));
    }

    #[test]
    fn slices_match_surfaces() {
        let text = RawText::new("t", "naïve #tag, l’été?").unwrap();
        for token in text.tokens() {
            assert_eq!(text.slice(token.span), Some(token.surface.as_str()));
        }
        assert_eq!(text.slice(sp(0, 100)), None);
    }

    #[test]
    fn bio_metoprolol() {
        let tokens = tokenize(METOPROLOL);
        let gold: BTreeSet<_> = [sp(33, 44)].into();
        let tags = spans_to_bio(&tokens, &gold).unwrap();
        assert_eq!(tags.to_string(), "O O O O O O B");
        assert_eq!(
            bio_to_spans(&tokens, &tags, BioMode::Lenient).unwrap(),
            gold
        );
    }

    #[test]
    fn bio_empty_and_adjacent() {
        let tokens = tokenize("a b c");
        let tags = spans_to_bio(&tokens, &BTreeSet::new()).unwrap();
        assert_eq!(tags.to_string(), "O O O");
        assert!(bio_to_spans(&tokens, &tags, BioMode::Strict)
            .unwrap()
            .is_empty());

        let two: BTreeSet<_> = [sp(0, 1), sp(2, 3)].into();
        assert_eq!(spans_to_bio(&tokens, &two).unwrap().to_string(), "B B O");
    }

    #[test]
    fn bio_partial_token_coverage_counts_inside() {
        let tokens = tokenize("severe nausea today");
        let spans: BTreeSet<_> = [sp(3, 10)].into();
        assert_eq!(spans_to_bio(&tokens, &spans).unwrap().to_string(), "B I O");
    }

    #[test]
    fn bio_rejects_overlapping_spans() {
        let tokens = tokenize("a b c");
        let spans: BTreeSet<_> = [sp(0, 3), sp(2, 5)].into();
        assert!(matches!(
            spans_to_bio(&tokens, &spans),
            Err(TextError::OverlappingSpans(..))
        ));
    }

    #[test]
    fn bio_decode_runs() {
        let tokens = tokenize("w x y z");
        let tags: TagSequence = "B I O B".parse().unwrap();
        let spans = bio_to_spans(&tokens, &tags, BioMode::Strict).unwrap();
        assert_eq!(spans, [sp(0, 3), sp(6, 7)].into());
    }

    #[test]
    fn bio_lenient_repairs_strict_rejects() {
        let tokens = tokenize("w x y z");
        let tags: TagSequence = "I I O I".parse().unwrap();
        assert!(!tags.is_well_formed());
        let spans = bio_to_spans(&tokens, &tags, BioMode::Lenient).unwrap();
        assert_eq!(spans, [sp(0, 3), sp(6, 7)].into());
        assert_eq!(
            bio_to_spans(&tokens, &tags, BioMode::Strict),
            Err(TextError::IllFormedBio(0))
        );
        let short: TagSequence = "O".parse().unwrap();
        assert!(matches!(
            bio_to_spans(&tokens, &short, BioMode::Lenient),
            Err(TextError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn typed_tags_parse() {
        let tags: TagSequence = "B-ADE I-ADE O".parse().unwrap();
        assert_eq!(tags.to_string(), "B I O");
        assert!("B X".parse::<TagSequence>().is_err());
    }

    #[test]
    fn span_parsing() {
        assert_eq!("33:44".parse::<Span>().unwrap(), sp(33, 44));
        assert!("44:33".parse::<Span>().is_err());
        assert!("5:5".parse::<Span>().is_err());
        assert!("5".parse::<Span>().is_err());
        assert_eq!(parse_span_list("").unwrap(), BTreeSet::new());
        let list = parse_span_list("10:15;0:4").unwrap();
        assert_eq!(format_span_list(&list), "0:4;10:15");
    }

    #[test]
    fn sample_invariants() {
        let text = RawText::new("1", METOPROLOL).unwrap();
        let gold: BTreeSet<_> = [sp(33, 44)].into();
        assert!(LabeledSample::new(text.clone(), gold.clone(), SampleClass::A).is_ok());
        assert!(LabeledSample::new(text.clone(), gold, SampleClass::N).is_err());
        assert!(LabeledSample::new(text.clone(), BTreeSet::new(), SampleClass::A).is_err());
        let oob: BTreeSet<_> = [sp(40, 45)].into();
        assert!(matches!(
            LabeledSample::new(text.clone(), oob, SampleClass::A),
            Err(TextError::SpanOutOfBounds { .. })
        ));
        let overlapping: BTreeSet<_> = [sp(0, 5), sp(4, 8)].into();
        assert!(LabeledSample::new(text, overlapping, SampleClass::A).is_err());
        assert!(RawText::new("1", "   ").is_err());
        assert!(RawText::new("a\tb", "x").is_err());
    }

    #[test]
    fn match_keys() {
        assert_eq!(match_key("#RestlessLegs"), "restlesslegs");
        assert_eq!(match_key("Don’t"), "don't");
        assert_eq!(match_key("#"), "#");
        assert_eq!(match_key("@Doc"), "@doc");
    }
}
