//! Relaxed precision/recall/F1 with partial-match credit, and the per-class
//! false-positive breakdown.
//!
//! Matching is one-to-one. Exact span equality pairs first (TP); remaining
//! predictions pair greedily with remaining gold spans by descending overlap
//! length (Partial). Unpaired predictions are FP, unpaired gold spans FN.
//! A partial match is worth half a true positive:
//!
//! ```text
//! P = (TP + 0.5 Par) / (TP + Par + FP)
//! R = (TP + 0.5 Par) / (TP + Par + FN)
//! ```

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::{AddAssign, Index, IndexMut};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::algebra::EntitySet;
use crate::text::{check_disjoint, LabeledSample, SampleClass, Span, TextError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("gold spans: {0}")]
    Gold(TextError),
    #[error("predictions reference unknown text ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("more than one prediction set for text id {0}")]
    DuplicatePrediction(String),
    #[error("prediction for {id}: {source}")]
    OutOfBounds { id: String, source: TextError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MatchKind {
    #[serde(rename = "TP")]
    Tp,
    Partial,
    #[serde(rename = "FP")]
    Fp,
    #[serde(rename = "FN")]
    Fn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatchOutcome {
    pub kind: MatchKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Span>,
}

impl MatchOutcome {
    fn pair(kind: MatchKind, gold: Span, predicted: Span) -> Self {
        Self {
            kind,
            gold: Some(gold),
            predicted: Some(predicted),
        }
    }
}

/// Pairs predictions with gold spans. Outcomes are ordered TP, Partial (by
/// gold), FP (by prediction), FN (by gold).
pub fn match_spans(
    gold: &BTreeSet<Span>,
    predicted: &BTreeSet<Span>,
) -> Result<Vec<MatchOutcome>, MetricsError> {
    check_disjoint(gold).map_err(MetricsError::Gold)?;

    let mut outcomes = Vec::new();
    let mut free_gold: BTreeSet<Span> = gold.clone();
    let mut free_pred: BTreeSet<Span> = predicted.clone();

    for span in gold.intersection(predicted) {
        outcomes.push(MatchOutcome::pair(MatchKind::Tp, *span, *span));
        free_gold.remove(span);
        free_pred.remove(span);
    }

    let mut candidates: Vec<(usize, Span, Span)> = free_gold
        .iter()
        .flat_map(|g| {
            free_pred
                .iter()
                .map(move |p| (g.overlap_len(p), *g, *p))
                .filter(|(n, _, _)| *n > 0)
        })
        .collect();
    candidates.sort_by_key(|&(n, g, p)| (Reverse(n), g, p));
    let mut partials = Vec::new();
    for (_, g, p) in candidates {
        if free_gold.contains(&g) && free_pred.contains(&p) {
            free_gold.remove(&g);
            free_pred.remove(&p);
            partials.push(MatchOutcome::pair(MatchKind::Partial, g, p));
        }
    }
    partials.sort_by_key(|o| o.gold);
    outcomes.extend(partials);

    outcomes.extend(free_pred.into_iter().map(|p| MatchOutcome {
        kind: MatchKind::Fp,
        gold: None,
        predicted: Some(p),
    }));
    outcomes.extend(free_gold.into_iter().map(|g| MatchOutcome {
        kind: MatchKind::Fn,
        gold: Some(g),
        predicted: None,
    }));
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub partial: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn from_outcomes(outcomes: &[MatchOutcome]) -> Self {
        let mut counts = Counts::default();
        for o in outcomes {
            match o.kind {
                MatchKind::Tp => counts.tp += 1,
                MatchKind::Partial => counts.partial += 1,
                MatchKind::Fp => counts.fp += 1,
                MatchKind::Fn => counts.fn_ += 1,
            }
        }
        counts
    }

    pub fn scores(&self) -> Scores {
        relaxed_scores(self.tp, self.partial, self.fp, self.fn_)
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.partial += rhs.partial;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// One value per sample class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PerClass<T> {
    #[serde(rename = "S")]
    pub s: T,
    #[serde(rename = "N")]
    pub n: T,
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "X")]
    pub x: T,
}

impl<T> Index<SampleClass> for PerClass<T> {
    type Output = T;

    fn index(&self, class: SampleClass) -> &T {
        match class {
            SampleClass::S => &self.s,
            SampleClass::N => &self.n,
            SampleClass::A => &self.a,
            SampleClass::X => &self.x,
        }
    }
}

impl<T> IndexMut<SampleClass> for PerClass<T> {
    fn index_mut(&mut self, class: SampleClass) -> &mut T {
        match class {
            SampleClass::S => &mut self.s,
            SampleClass::N => &mut self.n,
            SampleClass::A => &mut self.a,
            SampleClass::X => &mut self.x,
        }
    }
}

impl PerClass<usize> {
    pub fn total(&self) -> usize {
        self.s + self.n + self.a + self.x
    }
}

pub(crate) fn serialize_4dp<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    serialize_fixed(*value, 4, serializer)
}

pub(crate) fn serialize_fixed<S: Serializer>(
    value: f64,
    places: usize,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    let raw = serde_json::value::RawValue::from_string(format!("{value:.places$}"))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(serializer)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    #[serde(serialize_with = "serialize_4dp")]
    pub precision: f64,
    #[serde(serialize_with = "serialize_4dp")]
    pub recall: f64,
    #[serde(serialize_with = "serialize_4dp")]
    pub f1: f64,
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

/// Relaxed scores; any 0/0 evaluates to 0.
pub fn relaxed_scores(tp: usize, par: usize, fp: usize, fn_: usize) -> Scores {
    let credit = tp as f64 + 0.5 * par as f64;
    let precision = ratio(credit, tp + par + fp);
    let recall = ratio(credit, tp + par + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub id: String,
    pub class: SampleClass,
    pub outcomes: Vec<MatchOutcome>,
}

impl SampleOutcome {
    pub fn counts(&self) -> Counts {
        Counts::from_outcomes(&self.outcomes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub samples: Vec<SampleOutcome>,
    pub counts: Counts,
    pub fp_by_class: PerClass<usize>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    counts: Counts,
    fp_by_class: PerClass<usize>,
    scores: Scores,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<&'a [SampleOutcome]>,
}

impl MatchReport {
    pub fn scores(&self) -> Scores {
        self.counts.scores()
    }

    /// JSON report; per-sample outcomes only when `verbose`.
    pub fn to_json(&self, verbose: bool) -> String {
        let json = ReportJson {
            counts: self.counts,
            fp_by_class: self.fp_by_class,
            scores: self.scores(),
            samples: verbose.then_some(self.samples.as_slice()),
        };
        let mut out = serde_json::to_string_pretty(&json).expect("report serializes");
        out.push('\n');
        out
    }
}

/// Matches every sample against its predictions. Samples without a
/// prediction set are scored against the empty set.
pub fn evaluate_corpus(
    samples: &[LabeledSample],
    predictions: &[EntitySet],
) -> Result<MatchReport, MetricsError> {
    let mut by_id: HashMap<&str, &EntitySet> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.text_id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicatePrediction(p.text_id.clone()));
        }
    }
    let known: HashSet<&str> = samples.iter().map(LabeledSample::id).collect();
    let mut unknown: Vec<String> = by_id
        .keys()
        .filter(|id| !known.contains(*id))
        .map(|id| id.to_string())
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(MetricsError::UnknownIds(unknown));
    }

    let empty = BTreeSet::new();
    let mut report = MatchReport {
        samples: Vec::with_capacity(samples.len()),
        counts: Counts::default(),
        fp_by_class: PerClass::default(),
    };
    for sample in samples {
        let predicted = by_id.get(sample.id()).map_or(&empty, |p| &p.spans);
        for span in predicted {
            span.check_bounds(sample.text().char_len())
                .map_err(|source| MetricsError::OutOfBounds {
                    id: sample.id().to_string(),
                    source,
                })?;
        }
        let outcomes = match_spans(sample.gold(), predicted)?;
        let counts = Counts::from_outcomes(&outcomes);
        report.counts += counts;
        report.fp_by_class[sample.class()] += counts.fp;
        report.samples.push(SampleOutcome {
            id: sample.id().to_string(),
            class: sample.class(),
            outcomes,
        });
    }
    Ok(report)
}

/// Mean counts and scores over several runs of the same configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedReport {
    pub runs: usize,
    #[serde(serialize_with = "serialize_1dp")]
    pub tp: f64,
    #[serde(serialize_with = "serialize_1dp")]
    pub partial: f64,
    #[serde(serialize_with = "serialize_1dp")]
    pub fp: f64,
    #[serde(rename = "fn", serialize_with = "serialize_1dp")]
    pub fn_: f64,
    pub fp_by_class: PerClass<Mean>,
    pub scores: Scores,
}

/// A mean value printed with one decimal, as in the reporting tables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mean(pub f64);

impl Serialize for Mean {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_fixed(self.0, 1, serializer)
    }
}

fn serialize_1dp<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    serialize_fixed(*value, 1, serializer)
}

/// Averages reports over runs. Scores are the mean of per-run scores.
/// Returns `None` for an empty slice.
pub fn average_runs(reports: &[MatchReport]) -> Option<AveragedReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&MatchReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mut fp_by_class = PerClass::<Mean>::default();
    for class in SampleClass::TABLE_ORDER {
        fp_by_class[class] = Mean(mean(&|r| r.fp_by_class[class] as f64));
    }
    Some(AveragedReport {
        runs: reports.len(),
        tp: mean(&|r| r.counts.tp as f64),
        partial: mean(&|r| r.counts.partial as f64),
        fp: mean(&|r| r.counts.fp as f64),
        fn_: mean(&|r| r.counts.fn_ as f64),
        fp_by_class,
        scores: Scores {
            precision: mean(&|r| r.scores().precision),
            recall: mean(&|r| r.scores().recall),
            f1: mean(&|r| r.scores().f1),
        },
    })
}

/// Plain-text table in the `FP Total S N A X | P R F1` layout, scores in
/// percent.
pub fn render_table(rows: &[(&str, &MatchReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>6} {:>5} {:>5} {:>5} {:>5}  {:>6} {:>6} {:>6}",
        "model", "FP", "S", "N", "A", "X", "P", "R", "F1"
    );
    for (label, report) in rows {
        let s = report.scores();
        let fp = &report.fp_by_class;
        let _ = writeln!(
            out,
            "{:<width$}  {:>6} {:>5} {:>5} {:>5} {:>5}  {:>6.2} {:>6.2} {:>6.2}",
            label,
            report.counts.fp,
            fp.s,
            fp.n,
            fp.a,
            fp.x,
            s.precision * 100.0,
            s.recall * 100.0,
            s.f1 * 100.0
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::RawText;

    fn sp(a: usize, b: usize) -> Span {
        Span::new(a, b).unwrap()
    }

    fn set(spans: &[(usize, usize)]) -> BTreeSet<Span> {
        spans.iter().map(|&(a, b)| sp(a, b)).collect()
    }

    fn kinds(outcomes: &[MatchOutcome]) -> Vec<MatchKind> {
        outcomes.iter().map(|o| o.kind).collect()
    }

    #[test]
    fn exact_partial_and_leftovers() {
        let o = match_spans(&set(&[(3, 10)]), &set(&[(3, 10)])).unwrap();
        assert_eq!(kinds(&o), [MatchKind::Tp]);
        let o = match_spans(&set(&[(3, 10)]), &set(&[(5, 12)])).unwrap();
        assert_eq!(kinds(&o), [MatchKind::Partial]);
        assert_eq!(o[0].gold, Some(sp(3, 10)));
        assert_eq!(o[0].predicted, Some(sp(5, 12)));
        let o = match_spans(&set(&[(0, 4), (10, 15)]), &set(&[(0, 4), (20, 25)])).unwrap();
        assert_eq!(kinds(&o), [MatchKind::Tp, MatchKind::Fp, MatchKind::Fn]);
        assert_eq!(o[1].predicted, Some(sp(20, 25)));
        assert_eq!(o[2].gold, Some(sp(10, 15)));
    }

    #[test]
    fn partial_pairing_is_one_to_one_by_overlap() {
        // Both predictions overlap the single gold span; the larger overlap wins.
        let o = match_spans(&set(&[(0, 10)]), &set(&[(0, 3), (2, 9)])).unwrap();
        assert_eq!(kinds(&o), [MatchKind::Partial, MatchKind::Fp]);
        assert_eq!(o[0].predicted, Some(sp(2, 9)));
        // One prediction covering two gold spans takes the one it overlaps most.
        let o = match_spans(&set(&[(0, 2), (4, 10)]), &set(&[(1, 8)])).unwrap();
        assert_eq!(kinds(&o), [MatchKind::Partial, MatchKind::Fn]);
        assert_eq!(o[0].gold, Some(sp(4, 10)));
        // Equal overlaps: earliest gold start.
        let o = match_spans(&set(&[(0, 4), (6, 10)]), &set(&[(2, 8)])).unwrap();
        assert_eq!(o[0].gold, Some(sp(0, 4)));
        // An exact match is never displaced by a partial one.
        let o = match_spans(&set(&[(0, 10)]), &set(&[(0, 10), (0, 9)])).unwrap();
        assert_eq!(kinds(&o), [MatchKind::Tp, MatchKind::Fp]);
    }

    #[test]
    fn overlapping_gold_rejected() {
        assert!(matches!(
            match_spans(&set(&[(0, 5), (3, 8)]), &set(&[])),
            Err(MetricsError::Gold(_))
        ));
    }

    #[test]
    fn relaxed_score_cases() {
        let s = relaxed_scores(1, 0, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = relaxed_scores(1, 1, 1, 1);
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
        let s = relaxed_scores(0, 0, 0, 5);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = relaxed_scores(0, 0, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = relaxed_scores(0, 2, 0, 0);
        assert_eq!((s.precision, s.recall), (0.5, 0.5));
    }

    fn sample(
        id: &str,
        content: &str,
        gold: &[(usize, usize)],
        class: SampleClass,
    ) -> LabeledSample {
        LabeledSample::new(RawText::new(id, content).unwrap(), set(gold), class).unwrap()
    }

    #[test]
    fn empty_predictions() {
        let samples = vec![
            sample("a", "headache today", &[(0, 8)], SampleClass::A),
            sample("x", "nothing here", &[], SampleClass::X),
        ];
        let report = evaluate_corpus(&samples, &[]).unwrap();
        assert_eq!(
            report.counts,
            Counts {
                tp: 0,
                partial: 0,
                fp: 0,
                fn_: 1
            }
        );
        assert_eq!(report.fp_by_class, PerClass::default());
        assert_eq!(report.scores().recall, 0.0);
    }

    #[test]
    fn negated_prediction_counts_against_class_n() {
        let samples = vec![sample(
            "m",
            "Metoprolol is NOT known to cause hypokalemia",
            &[],
            SampleClass::N,
        )];
        let preds = vec![EntitySet::new("m", [sp(33, 44)])];
        let report = evaluate_corpus(&samples, &preds).unwrap();
        assert_eq!(
            report.fp_by_class,
            PerClass {
                s: 0,
                n: 1,
                a: 0,
                x: 0
            }
        );
        assert_eq!(report.counts.fp, 1);
    }

    #[test]
    fn eight_sample_hand_tally() {
        // Two samples per class; expected outcomes tallied by hand:
        // a1 TP, a2 Partial + FP, x1 FP, x2 -, n1 FP FP, n2 -, s1 FP, s2 -,
        // plus one FN on a1's second gold span.
        let samples = vec![
            sample(
                "a1",
                "rash and headache",
                &[(0, 4), (9, 17)],
                SampleClass::A,
            ),
            sample("a2", "severe nausea and pain", &[(0, 13)], SampleClass::A),
            sample("x1", "pain killers on sale", &[], SampleClass::X),
            sample("x2", "good day", &[], SampleClass::X),
            sample("n1", "no rash no pain", &[], SampleClass::N),
            sample("n2", "never had cramps", &[], SampleClass::N),
            sample("s1", "may cause dizziness", &[], SampleClass::S),
            sample("s2", "maybe insomnia", &[], SampleClass::S),
        ];
        let preds = vec![
            EntitySet::new("a1", [sp(0, 4)]),
            EntitySet::new("a2", [sp(7, 13), sp(18, 22)]),
            EntitySet::new("x1", [sp(0, 4)]),
            EntitySet::new("n1", [sp(3, 7), sp(11, 15)]),
            EntitySet::new("s1", [sp(10, 19)]),
        ];
        let report = evaluate_corpus(&samples, &preds).unwrap();
        assert_eq!(
            report.counts,
            Counts {
                tp: 1,
                partial: 1,
                fp: 5,
                fn_: 1
            }
        );
        assert_eq!(
            report.fp_by_class,
            PerClass {
                s: 1,
                n: 2,
                a: 1,
                x: 1
            }
        );
        let s = report.scores();
        assert!((s.precision - 1.5 / 7.0).abs() < 1e-12);
        assert!((s.recall - 1.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_duplicate_and_out_of_bounds_predictions() {
        let samples = vec![sample("a", "headache", &[(0, 8)], SampleClass::A)];
        let err = evaluate_corpus(
            &samples,
            &[EntitySet::new("zz", [sp(0, 1)]), EntitySet::new("b", [])],
        )
        .unwrap_err();
        assert_eq!(err, MetricsError::UnknownIds(vec!["b".into(), "zz".into()]));
        let dup = [EntitySet::new("a", [sp(0, 1)]), EntitySet::new("a", [])];
        assert!(matches!(
            evaluate_corpus(&samples, &dup),
            Err(MetricsError::DuplicatePrediction(_))
        ));
        let oob = [EntitySet::new("a", [sp(0, 9)])];
        assert!(matches!(
            evaluate_corpus(&samples, &oob),
            Err(MetricsError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn json_report_layout() {
        let samples = vec![sample("a", "headache", &[(0, 8)], SampleClass::A)];
        let preds = [EntitySet::new("a", [sp(0, 8)])];
        let report = evaluate_corpus(&samples, &preds).unwrap();
        let json = report.to_json(false);
        assert!(json.contains("\"precision\": 1.0000"), "{json}");
        assert!(json.contains("\"fn\": 0"));
        assert!(!json.contains("samples"));
        let value: serde_json::Value = serde_json::from_str(&report.to_json(true)).unwrap();
        assert_eq!(value["samples"][0]["outcomes"][0]["kind"], "TP");
        assert_eq!(value["fp_by_class"]["N"], 0);
    }

    #[test]
    fn run_averaging() {
        let samples = vec![
            sample("a", "headache", &[(0, 8)], SampleClass::A),
            sample("n", "no rash", &[], SampleClass::N),
        ];
        let r1 = evaluate_corpus(&samples, &[EntitySet::new("a", [sp(0, 8)])]).unwrap();
        let r2 = evaluate_corpus(
            &samples,
            &[
                EntitySet::new("a", [sp(0, 8)]),
                EntitySet::new("n", [sp(3, 7)]),
            ],
        )
        .unwrap();
        let avg = average_runs(&[r1, r2]).unwrap();
        assert_eq!(avg.runs, 2);
        assert_eq!(avg.fp, 0.5);
        assert_eq!(avg.fp_by_class.n, Mean(0.5));
        assert!((avg.scores.precision - 0.75).abs() < 1e-12);
        assert!(average_runs(&[]).is_none());
        let json = serde_json::to_string(&avg).unwrap();
        assert!(json.contains("\"fp\":0.5"), "{json}");
    }

    #[test]
    fn table_rendering() {
        let samples = vec![sample("a", "headache", &[(0, 8)], SampleClass::A)];
        let report = evaluate_corpus(&samples, &[EntitySet::new("a", [sp(0, 8)])]).unwrap();
        let table = render_table(&[("base", &report)]);
        assert!(table
            .lines()
            .nth(1)
            .unwrap()
            .ends_with("100.00 100.00 100.00"));
    }
}
