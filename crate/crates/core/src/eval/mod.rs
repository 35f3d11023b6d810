//! Scoring of geocoding runs and geotagging span files, span merging and
//! the per-country audit.

mod audit;
mod geocoding;
mod spans;

pub use audit::{country_audit, render_audit, AuditReport, CountryDiff, HdiBand, HdiTable, ModelCounts, PairDiff, TOP_COUNTRIES};
pub use geocoding::{
    classify_outcome, gold_key, load_gold, median, render_geocoding_table, score_geocoding, EvalOutcome,
    GeocodingReport, GoldGeoRecord, OutcomeBlock, OutcomeKind,
};
pub use spans::{
    group_span_records, matched_mass, merge_spans, score_corpus, score_geotagging, GeotagScores, MatchMode, SpanSet,
    TaggedSpan,
};
