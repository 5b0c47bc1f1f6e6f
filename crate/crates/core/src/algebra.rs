//! Model combination: discarding extracted ADE spans that fall inside a
//! negation or speculation scope.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::scope::{ScopeSet, ScopeSpan};
use crate::text::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("entity set for {ades:?} combined with scopes for {scopes:?}")]
    TextMismatch { ades: String, scopes: String },
}

/// True iff the half-open intervals share at least one character.
pub fn overlaps(a: &Span, b: &Span) -> bool {
    a.start() < b.end() && b.start() < a.end()
}

/// The ADE spans predicted for one text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct EntitySet {
    pub text_id: String,
    pub spans: BTreeSet<Span>,
}

impl EntitySet {
    pub fn new(text_id: impl Into<String>, spans: impl IntoIterator<Item = Span>) -> Self {
        Self {
            text_id: text_id.into(),
            spans: spans.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discard {
    pub span: Span,
    pub witness: ScopeSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub kept: EntitySet,
    pub discarded: Vec<Discard>,
}

/// Which scope phenomena to filter by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, Serialize)]
pub enum FilterSelection {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "neg")]
    Negation,
    #[serde(rename = "spec")]
    Speculation,
    #[serde(rename = "neg+spec")]
    Both,
}

impl FilterSelection {
    pub fn uses_negation(&self) -> bool {
        matches!(self, FilterSelection::Negation | FilterSelection::Both)
    }

    pub fn uses_speculation(&self) -> bool {
        matches!(self, FilterSelection::Speculation | FilterSelection::Both)
    }
}

impl std::str::FromStr for FilterSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(FilterSelection::None),
            "neg" => Ok(FilterSelection::Negation),
            "spec" => Ok(FilterSelection::Speculation),
            "neg+spec" | "spec+neg" => Ok(FilterSelection::Both),
            _ => Err(format!(
                "unknown filter selection {s:?} (expected none, neg, spec or neg+spec)"
            )),
        }
    }
}

impl std::fmt::Display for FilterSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterSelection::None => "none",
            FilterSelection::Negation => "neg",
            FilterSelection::Speculation => "spec",
            FilterSelection::Both => "neg+spec",
        })
    }
}

fn check_ids(ades: &EntitySet, scopes: &ScopeSet) -> Result<(), AlgebraError> {
    if ades.text_id != scopes.text_id {
        return Err(AlgebraError::TextMismatch {
            ades: ades.text_id.clone(),
            scopes: scopes.text_id.clone(),
        });
    }
    Ok(())
}

// Earliest start, then longest; remaining ties fall back to the total order
// on ScopeSpan so the choice never depends on input order.
fn witness_order(a: &ScopeSpan, b: &ScopeSpan) -> std::cmp::Ordering {
    a.span
        .start()
        .cmp(&b.span.start())
        .then(b.span.end().cmp(&a.span.end()))
        .then_with(|| a.cmp(b))
}

fn filter_spans<'a>(
    text_id: &str,
    spans: &BTreeSet<Span>,
    scopes: impl Iterator<Item = &'a ScopeSpan> + Clone,
) -> FilterReport {
    let mut kept = BTreeSet::new();
    let mut discarded = Vec::new();
    for span in spans {
        let witness = scopes
            .clone()
            .filter(|s| overlaps(span, &s.span))
            .min_by(|a, b| witness_order(a, b));
        match witness {
            Some(w) => discarded.push(Discard {
                span: *span,
                witness: w.clone(),
            }),
            None => {
                kept.insert(*span);
            }
        }
    }
    FilterReport {
        kept: EntitySet {
            text_id: text_id.to_string(),
            spans: kept,
        },
        discarded,
    }
}

/// Keeps the ADE spans that intersect no scope. Each discarded span records
/// the earliest-starting scope it intersects (ties: longest).
pub fn filter_by_scopes(ades: &EntitySet, scopes: &ScopeSet) -> Result<FilterReport, AlgebraError> {
    check_ids(ades, scopes)?;
    Ok(filter_spans(
        &ades.text_id,
        &ades.spans,
        scopes.scopes.iter(),
    ))
}

/// Filters by negation and speculation scopes at once. The kept set equals
/// the intersection of the two single-phenomenon filters.
pub fn combine(
    ades: &EntitySet,
    negations: &ScopeSet,
    speculations: &ScopeSet,
) -> Result<FilterReport, AlgebraError> {
    check_ids(ades, negations)?;
    check_ids(ades, speculations)?;
    Ok(filter_spans(
        &ades.text_id,
        &ades.spans,
        negations.scopes.iter().chain(speculations.scopes.iter()),
    ))
}

/// Applies a filter selection. Scope sets for phenomena outside the
/// selection are ignored and may be `None`.
pub fn apply_selection(
    ades: &EntitySet,
    selection: FilterSelection,
    negations: Option<&ScopeSet>,
    speculations: Option<&ScopeSet>,
) -> Result<FilterReport, AlgebraError> {
    let neg = negations.filter(|_| selection.uses_negation());
    let spec = speculations.filter(|_| selection.uses_speculation());
    for set in neg.iter().chain(spec.iter()) {
        check_ids(ades, set)?;
    }
    let scopes = neg
        .into_iter()
        .chain(spec)
        .flat_map(|set| set.scopes.iter());
    Ok(filter_spans(&ades.text_id, &ades.spans, scopes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scope::{Phenomenon, ScopeDetector};
    use crate::text::RawText;

    fn sp(a: usize, b: usize) -> Span {
        Span::new(a, b).unwrap()
    }

    fn scope(a: usize, b: usize, phenomenon: Phenomenon) -> ScopeSpan {
        ScopeSpan {
            span: sp(a, b),
            phenomenon,
            trigger: None,
        }
    }

    fn set(id: &str, phenomenon: Phenomenon, scopes: Vec<ScopeSpan>) -> ScopeSet {
        ScopeSet {
            text_id: id.into(),
            phenomenon,
            scopes,
        }
    }

    #[test]
    fn overlap_is_half_open() {
        assert!(!overlaps(&sp(0, 5), &sp(5, 9)));
        assert!(overlaps(&sp(0, 5), &sp(4, 9)));
        assert!(overlaps(&sp(2, 3), &sp(0, 9)));
        assert!(!overlaps(&sp(5, 9), &sp(0, 5)));
    }

    #[test]
    fn metoprolol_is_discarded() {
        let text = RawText::new("m", "Metoprolol is NOT known to cause hypokalemia").unwrap();
        let neg = ScopeDetector::default_negation().detect(&text);
        let hypo = sp(33, 44);
        assert!(overlaps(&hypo, &neg.scopes[0].span));
        let ades = EntitySet::new("m", [hypo]);
        let report = filter_by_scopes(&ades, &neg).unwrap();
        assert!(report.kept.is_empty());
        assert_eq!(report.discarded.len(), 1);
        let trigger = report.discarded[0].witness.trigger.as_ref().unwrap();
        assert_eq!(text.slice(trigger.span), Some("NOT"));

        let spec = ScopeDetector::default_speculation().detect(&text);
        let both = combine(&ades, &neg, &spec).unwrap();
        assert_eq!(both, report);
        assert_eq!(filter_by_scopes(&ades, &spec).unwrap().kept, ades);
    }

    #[test]
    fn empty_scopes_are_identity() {
        let ades = EntitySet::new("t", [sp(0, 3), sp(5, 8)]);
        let empty = ScopeSet::empty("t", Phenomenon::Negation);
        let report = filter_by_scopes(&ades, &empty).unwrap();
        assert_eq!(report.kept, ades);
        assert!(report.discarded.is_empty());
        let spec = ScopeSet::empty("t", Phenomenon::Speculation);
        assert_eq!(combine(&ades, &empty, &spec).unwrap().kept, ades);
    }

    #[test]
    fn mismatched_ids_rejected() {
        let ades = EntitySet::new("a", [sp(0, 3)]);
        let scopes = ScopeSet::empty("b", Phenomenon::Negation);
        assert!(filter_by_scopes(&ades, &scopes).is_err());
        let ok = ScopeSet::empty("a", Phenomenon::Speculation);
        assert!(combine(&ades, &ok, &scopes).is_err());
    }

    #[test]
    fn witness_is_earliest_then_longest() {
        let ades = EntitySet::new("t", [sp(10, 12)]);
        let neg = set(
            "t",
            Phenomenon::Negation,
            vec![
                scope(8, 12, Phenomenon::Negation),
                scope(11, 20, Phenomenon::Negation),
            ],
        );
        let spec = set(
            "t",
            Phenomenon::Speculation,
            vec![scope(8, 15, Phenomenon::Speculation)],
        );
        let report = combine(&ades, &neg, &spec).unwrap();
        assert_eq!(report.discarded.len(), 1);
        assert_eq!(report.discarded[0].witness.span, sp(8, 15));
        assert_eq!(
            report.discarded[0].witness.phenomenon,
            Phenomenon::Speculation
        );
    }

    #[test]
    fn selection_routes_phenomena() {
        let ades = EntitySet::new("t", [sp(0, 2), sp(10, 12)]);
        let neg = set(
            "t",
            Phenomenon::Negation,
            vec![scope(0, 5, Phenomenon::Negation)],
        );
        let spec = set(
            "t",
            Phenomenon::Speculation,
            vec![scope(9, 11, Phenomenon::Speculation)],
        );
        let kept = |sel| {
            apply_selection(&ades, sel, Some(&neg), Some(&spec))
                .unwrap()
                .kept
                .spans
                .into_iter()
                .collect::<Vec<_>>()
        };
        assert_eq!(kept(FilterSelection::None), [sp(0, 2), sp(10, 12)]);
        assert_eq!(kept(FilterSelection::Negation), [sp(10, 12)]);
        assert_eq!(kept(FilterSelection::Speculation), [sp(0, 2)]);
        assert!(kept(FilterSelection::Both).is_empty());
        assert_eq!(
            apply_selection(&ades, FilterSelection::Negation, Some(&neg), None)
                .unwrap()
                .kept
                .len(),
            1
        );
        assert_eq!(
            "neg+spec".parse::<FilterSelection>(),
            Ok(FilterSelection::Both)
        );
        assert!("both".parse::<FilterSelection>().is_err());
    }
}
