use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::records::{SpanLabel, SpanRecord};
use crate::span::{slice_chars, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSpan {
    pub span: Span,
    pub text: String,
    pub label: Option<SpanLabel>,
}

/// Toponym spans of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanSet {
    pub doc_id: String,
    pub spans: Vec<TaggedSpan>,
}

impl SpanSet {
    pub fn new(doc_id: impl Into<String>) -> Self {
        SpanSet {
            doc_id: doc_id.into(),
            spans: Vec::new(),
        }
    }

    pub fn push(&mut self, start: usize, end: usize, text: &str) -> Result<()> {
        self.spans.push(TaggedSpan {
            span: Span::new(start, end)?,
            text: text.to_string(),
            label: None,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Keep only spans carrying `label`.
    pub fn restrict(&self, label: SpanLabel) -> SpanSet {
        SpanSet {
            doc_id: self.doc_id.clone(),
            spans: self.spans.iter().filter(|s| s.label == Some(label)).cloned().collect(),
        }
    }

    pub fn to_records(&self) -> Vec<SpanRecord> {
        self.spans
            .iter()
            .map(|s| SpanRecord {
                doc_id: self.doc_id.clone(),
                start: s.span.start,
                end: s.span.end,
                text: s.text.clone(),
                label: s.label,
            })
            .collect()
    }
}

/// Group records by document, validating every span. Documents come out in
/// id order, spans in input order.
pub fn group_span_records(records: &[SpanRecord]) -> Result<BTreeMap<String, SpanSet>> {
    let mut out: BTreeMap<String, SpanSet> = BTreeMap::new();
    for r in records {
        let span = r.span()?;
        out.entry(r.doc_id.clone())
            .or_insert_with(|| SpanSet::new(r.doc_id.clone()))
            .spans
            .push(TaggedSpan {
                span,
                text: r.text.clone(),
                label: r.label,
            });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    /// Identical character ranges.
    Exact,
    /// Any shared character.
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeotagScores {
    pub matched: f64,
    pub gold: usize,
    pub predicted: usize,
    pub agreement: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl GeotagScores {
    /// Scores from a matched mass and set sizes. Two empty sets agree fully.
    pub fn from_counts(matched: f64, gold: usize, predicted: usize) -> Self {
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        if gold == 0 && predicted == 0 {
            return GeotagScores {
                matched,
                gold,
                predicted,
                agreement: 1.0,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let precision = ratio(matched, predicted as f64);
        let recall = ratio(matched, gold as f64);
        GeotagScores {
            matched,
            gold,
            predicted,
            agreement: ratio(matched, gold as f64 + predicted as f64 - matched),
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
        }
    }
}

/// Size of a maximum matching between gold and predicted spans, where an
/// edge joins spans that agree under `mode`. Every span is matched at most
/// once, so one long gold span covering several predictions counts once.
pub fn matched_mass(gold: &[Span], pred: &[Span], mode: MatchMode) -> usize {
    let agree = |g: &Span, p: &Span| match mode {
        MatchMode::Exact => g == p,
        MatchMode::Partial => g.overlaps(p),
    };
    let adj: Vec<Vec<usize>> = gold
        .iter()
        .map(|g| (0..pred.len()).filter(|&j| agree(g, &pred[j])).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; pred.len()];

    fn augment(g: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &p in &adj[g] {
            if seen[p] {
                continue;
            }
            seen[p] = true;
            if owner[p].is_none_or(|o| augment(o, adj, owner, seen)) {
                owner[p] = Some(g);
                return true;
            }
        }
        false
    }

    let mut size = 0;
    for g in 0..gold.len() {
        let mut seen = vec![false; pred.len()];
        if augment(g, &adj, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

pub fn score_geotagging(gold: &SpanSet, pred: &SpanSet, mode: MatchMode) -> GeotagScores {
    let g: Vec<Span> = gold.spans.iter().map(|s| s.span).collect();
    let p: Vec<Span> = pred.spans.iter().map(|s| s.span).collect();
    GeotagScores::from_counts(matched_mass(&g, &p, mode) as f64, g.len(), p.len())
}

/// Corpus-level scores: matched mass and set sizes are summed over documents
/// before the ratios are taken. Documents missing from one side count as empty.
pub fn score_corpus(
    gold: &BTreeMap<String, SpanSet>,
    pred: &BTreeMap<String, SpanSet>,
    mode: MatchMode,
) -> GeotagScores {
    let empty = |id: &str| SpanSet::new(id);
    let mut docs: Vec<&String> = gold.keys().chain(pred.keys()).collect();
    docs.sort();
    docs.dedup();
    let (mut m, mut ng, mut np) = (0.0, 0, 0);
    for id in docs {
        let g = gold.get(id).cloned().unwrap_or_else(|| empty(id));
        let p = pred.get(id).cloned().unwrap_or_else(|| empty(id));
        let s = score_geotagging(&g, &p, mode);
        m += s.matched;
        ng += s.gold;
        np += s.predicted;
    }
    GeotagScores::from_counts(m, ng, np)
}

/// Union of two span sets where every group of overlapping spans collapses
/// to the span covering the group. Text comes from `document` when given,
/// otherwise it is stitched from the members' own texts.
pub fn merge_spans(a: &SpanSet, b: &SpanSet, document: Option<&str>) -> SpanSet {
    let mut all: Vec<&TaggedSpan> = a.spans.iter().chain(&b.spans).collect();
    all.sort_by(|x, y| {
        (x.span, &x.text, x.label).cmp(&(y.span, &y.text, y.label))
    });
    all.dedup_by(|x, y| x.span == y.span && x.text == y.text && x.label == y.label);

    let mut groups: Vec<Vec<&TaggedSpan>> = Vec::new();
    let mut reach = 0;
    for s in all {
        match groups.last_mut() {
            Some(g) if s.span.start < reach => g.push(s),
            _ => groups.push(vec![s]),
        }
        reach = if groups.last().map_or(0, Vec::len) == 1 {
            s.span.end
        } else {
            reach.max(s.span.end)
        };
    }

    let spans = groups
        .into_iter()
        .map(|members| {
            let cover = members.iter().skip(1).fold(members[0].span, |c, m| c.cover(&m.span));
            let text = match document {
                Some(doc) => slice_chars(doc, cover),
                None => stitch(cover, &members),
            };
            let first = members[0].label;
            let label = members.iter().all(|m| m.label == first).then_some(first).flatten();
            TaggedSpan {
                span: cover,
                text,
                label,
            }
        })
        .collect();
    SpanSet {
        doc_id: a.doc_id.clone(),
        spans,
    }
}

fn stitch(cover: Span, members: &[&TaggedSpan]) -> String {
    let mut chars: Vec<Option<char>> = vec![None; cover.len()];
    for m in members {
        for (k, c) in m.text.chars().take(m.span.len()).enumerate() {
            let slot = &mut chars[m.span.start - cover.start + k];
            if slot.is_none() {
                *slot = Some(c);
            }
        }
    }
    chars.into_iter().map(|c| c.unwrap_or(' ')).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(spans: &[(usize, usize, &str)]) -> SpanSet {
        let mut s = SpanSet::new("d");
        for &(a, b, t) in spans {
            s.push(a, b, t).unwrap();
        }
        s
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn hand_computed_exact_scores() {
        let gold = set(&[(0, 5, "Syria"), (20, 24, "Aden")]);
        let pred = set(&[(0, 5, "Syria")]);
        let s = score_geotagging(&gold, &pred, MatchMode::Exact);
        assert!(close(s.agreement, 0.5));
        assert!(close(s.precision, 1.0));
        assert!(close(s.recall, 0.5));
        assert!(close(s.f1, 2.0 / 3.0));
        let s = score_geotagging(&gold, &gold, MatchMode::Exact);
        assert_eq!((s.agreement, s.precision, s.recall, s.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn one_gold_span_over_two_predictions_counts_once() {
        let gold = set(&[(0, 30, "At Tuhayat and Zabid districts")]);
        let pred = set(&[(0, 10, "At Tuhayat"), (15, 30, "Zabid districts")]);
        let s = score_geotagging(&gold, &pred, MatchMode::Partial);
        assert!(close(s.matched, 1.0));
        assert!(close(s.precision, 0.5));
        assert!(close(s.recall, 1.0));
        assert!(close(s.agreement, 0.5));
        assert!(close(score_geotagging(&gold, &pred, MatchMode::Exact).matched, 0.0));
    }

    #[test]
    fn nested_spans_do_not_inflate_partial() {
        let both = set(&[(0, 10, "a"), (0, 5, "b"), (5, 10, "c")]);
        let e = score_geotagging(&both, &both, MatchMode::Exact);
        let p = score_geotagging(&both, &both, MatchMode::Partial);
        assert_eq!(e.matched, 3.0);
        assert_eq!(p.matched, 3.0);
    }

    #[test]
    fn corpus_scores_pool_documents() {
        let mut g = BTreeMap::new();
        g.insert("d".to_string(), set(&[(0, 5, "Syria"), (20, 24, "Aden")]));
        let mut p = BTreeMap::new();
        p.insert("d".to_string(), set(&[(0, 5, "Syria")]));
        let mut other = SpanSet::new("e");
        other.push(0, 4, "Homs").unwrap();
        p.insert("e".to_string(), other);
        let s = score_corpus(&g, &p, MatchMode::Exact);
        assert_eq!((s.matched, s.gold, s.predicted), (1.0, 2, 2));
    }

    #[test]
    fn merge_examples() {
        let doc = "the Mediterranean sea is calm";
        let a = set(&[(0, 17, "the Mediterranean")]);
        let b = set(&[(4, 21, "Mediterranean sea")]);
        let m = merge_spans(&a, &b, Some(doc));
        assert_eq!(m.spans.len(), 1);
        assert_eq!(m.spans[0].span, Span::new(0, 21).unwrap());
        assert_eq!(m.spans[0].text, "the Mediterranean sea");
        assert_eq!(merge_spans(&a, &b, None).spans[0].text, "the Mediterranean sea");

        let c = set(&[(22, 24, "is")]);
        assert_eq!(merge_spans(&a, &c, None).spans.len(), 2);
        assert_eq!(merge_spans(&a, &a, None), a);
        // touching spans stay apart
        let d = set(&[(17, 21, " sea")]);
        assert_eq!(merge_spans(&a, &d, None).spans.len(), 2);
    }

    fn arb_set() -> impl Strategy<Value = SpanSet> {
        proptest::collection::vec((0usize..40, 1usize..8), 0..8).prop_map(|v| {
            let text: String = ('a'..='z').cycle().take(60).collect();
            let mut s = SpanSet::new("d");
            for (start, len) in v {
                let sp = Span::new(start, start + len).unwrap();
                s.push(sp.start, sp.end, &slice_chars(&text, sp)).unwrap();
            }
            s
        })
    }

    proptest! {
        #[test]
        fn exact_never_beats_partial(g in arb_set(), p in arb_set()) {
            let e = score_geotagging(&g, &p, MatchMode::Exact);
            let q = score_geotagging(&g, &p, MatchMode::Partial);
            prop_assert!(e.agreement <= q.agreement + 1e-12);
            prop_assert!(e.precision <= q.precision + 1e-12);
            prop_assert!(e.recall <= q.recall + 1e-12);
            prop_assert!(e.f1 <= q.f1 + 1e-12);
            for mode in [MatchMode::Exact, MatchMode::Partial] {
                let ab = score_geotagging(&g, &p, mode);
                let ba = score_geotagging(&p, &g, mode);
                prop_assert!((ab.agreement - ba.agreement).abs() < 1e-12);
                prop_assert!(ab.matched <= g.len().min(p.len()) as f64);
            }
        }

        #[test]
        fn merge_is_commutative_and_idempotent(a in arb_set(), b in arb_set()) {
            let ab = merge_spans(&a, &b, None);
            prop_assert_eq!(&ab, &merge_spans(&b, &a, None));
            prop_assert_eq!(&ab, &merge_spans(&ab, &ab, None));
            for w in ab.spans.windows(2) {
                prop_assert!(!w[0].span.overlaps(&w[1].span));
            }
        }
    }
}
