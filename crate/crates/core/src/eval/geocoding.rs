use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gazetteer::{haversine_km, GazetteerStore};
use crate::normalizer::standardize_text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldGeoRecord {
    pub doc_id: String,
    pub toponym: String,
    /// `None` when the annotated answer is "none".
    pub gold_geoname_id: Option<u64>,
    /// False for mentions that were wrongly extracted as toponyms.
    pub is_location: bool,
}

impl GoldGeoRecord {
    pub fn key(&self) -> (String, String) {
        gold_key(&self.doc_id, &self.toponym)
    }
}

/// Join key between gold rows and predictions.
pub fn gold_key(doc_id: &str, toponym: &str) -> (String, String) {
    (doc_id.trim().to_string(), standardize_text(toponym))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    TruePositive,
    TrueNegative,
    FalsePositiveNew,
    FalseNegative,
    FalsePositiveWrong,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 5] = [
        OutcomeKind::TruePositive,
        OutcomeKind::TrueNegative,
        OutcomeKind::FalsePositiveNew,
        OutcomeKind::FalseNegative,
        OutcomeKind::FalsePositiveWrong,
    ];

    pub fn is_correct(self) -> bool {
        matches!(self, OutcomeKind::TruePositive | OutcomeKind::TrueNegative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub kind: OutcomeKind,
    /// Set only for `FalsePositiveWrong`.
    pub error_km: Option<f64>,
}

pub fn classify_outcome(gold: Option<u64>, pred: Option<u64>, store: &GazetteerStore) -> Result<EvalOutcome> {
    let lookup = |id: u64| store.get(id).ok_or(Error::UnknownGeonameId(id));
    let (kind, error_km) = match (gold, pred) {
        (None, None) => (OutcomeKind::TrueNegative, None),
        (None, Some(p)) => {
            lookup(p)?;
            (OutcomeKind::FalsePositiveNew, None)
        }
        (Some(_), None) => (OutcomeKind::FalseNegative, None),
        (Some(g), Some(p)) if g == p => {
            lookup(p)?;
            (OutcomeKind::TruePositive, None)
        }
        (Some(g), Some(p)) => {
            let km = haversine_km(lookup(g)?.point(), lookup(p)?.point());
            (OutcomeKind::FalsePositiveWrong, Some(km))
        }
    };
    Ok(EvalOutcome { kind, error_km })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBlock {
    pub count: usize,
    pub true_positive: f64,
    pub true_negative: f64,
    pub correct: f64,
    pub false_positive_new: f64,
    pub false_negative: f64,
    pub false_positive_wrong: f64,
    pub incorrect: f64,
    pub median_error_km: Option<f64>,
    pub mean_error_km: Option<f64>,
}

impl OutcomeBlock {
    fn from_outcomes(outcomes: &[EvalOutcome]) -> Self {
        let n = outcomes.len();
        let share = |k: OutcomeKind| {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().filter(|o| o.kind == k).count() as f64 / n as f64
            }
        };
        let tp = share(OutcomeKind::TruePositive);
        let tn = share(OutcomeKind::TrueNegative);
        let fpn = share(OutcomeKind::FalsePositiveNew);
        let fneg = share(OutcomeKind::FalseNegative);
        let fpw = share(OutcomeKind::FalsePositiveWrong);
        let mut errors: Vec<f64> = outcomes.iter().filter_map(|o| o.error_km).collect();
        errors.sort_by(f64::total_cmp);
        OutcomeBlock {
            count: n,
            true_positive: tp,
            true_negative: tn,
            correct: tp + tn,
            false_positive_new: fpn,
            false_negative: fneg,
            false_positive_wrong: fpw,
            incorrect: fpn + fneg + fpw,
            median_error_km: median(&errors),
            mean_error_km: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        }
    }
}

/// Median of sorted values; `None` when empty.
pub fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodingReport {
    pub locations: OutcomeBlock,
    pub non_locations: usize,
    /// Share of non-locations left unmatched.
    pub non_location_correct: Option<f64>,
    /// Gold rows without a prediction, scored as no-match.
    pub missing_predictions: usize,
    /// Per gold row, in input order.
    pub outcomes: Vec<EvalOutcome>,
}

fn check_unique(golds: &[GoldGeoRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for g in golds {
        if !seen.insert(g.key()) {
            return Err(Error::DuplicateGoldKey {
                doc_id: g.doc_id.clone(),
                toponym: g.toponym.clone(),
            });
        }
    }
    Ok(())
}

/// Score predictions keyed by [`gold_key`]. Gold rows without a prediction
/// count as no-match.
pub fn score_geocoding(
    golds: &[GoldGeoRecord],
    preds: &BTreeMap<(String, String), Option<u64>>,
    store: &GazetteerStore,
) -> Result<GeocodingReport> {
    check_unique(golds)?;
    let mut outcomes = Vec::with_capacity(golds.len());
    let mut missing = 0;
    for g in golds {
        let pred = match preds.get(&g.key()) {
            Some(p) => *p,
            None => {
                missing += 1;
                None
            }
        };
        let gold = if g.is_location { g.gold_geoname_id } else { None };
        outcomes.push(classify_outcome(gold, pred, store)?);
    }
    let loc: Vec<EvalOutcome> = golds
        .iter()
        .zip(&outcomes)
        .filter(|(g, _)| g.is_location)
        .map(|(_, o)| *o)
        .collect();
    let non: Vec<&EvalOutcome> = golds
        .iter()
        .zip(&outcomes)
        .filter(|(g, _)| !g.is_location)
        .map(|(_, o)| o)
        .collect();
    let non_location_correct = (!non.is_empty())
        .then(|| non.iter().filter(|o| o.kind == OutcomeKind::TrueNegative).count() as f64 / non.len() as f64);
    Ok(GeocodingReport {
        locations: OutcomeBlock::from_outcomes(&loc),
        non_locations: non.len(),
        non_location_correct,
        missing_predictions: missing,
        outcomes,
    })
}

fn fmt_share(x: f64) -> String {
    format!("{x:.2}")
}

fn fmt_km(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Plain-text table with one column per labelled report.
pub fn render_geocoding_table(reports: &[(&str, &GeocodingReport)]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let mut row = |name: &str, f: &dyn Fn(&GeocodingReport) -> String| {
        rows.push((name.to_string(), reports.iter().map(|(_, r)| f(r)).collect()));
    };
    row("Locations (count)", &|r| r.locations.count.to_string());
    row("True Positive", &|r| fmt_share(r.locations.true_positive));
    row("True Negative", &|r| fmt_share(r.locations.true_negative));
    row("Correct", &|r| fmt_share(r.locations.correct));
    row("False Positive (new selection)", &|r| fmt_share(r.locations.false_positive_new));
    row("False Negative", &|r| fmt_share(r.locations.false_negative));
    row("False Positive (wrong selection)", &|r| fmt_share(r.locations.false_positive_wrong));
    row("Incorrect", &|r| fmt_share(r.locations.incorrect));
    row("Median dist. (km)", &|r| fmt_km(r.locations.median_error_km));
    row("Mean dist. (km)", &|r| fmt_km(r.locations.mean_error_km));
    row("Non-locations (count)", &|r| r.non_locations.to_string());
    row("Non-locations correct", &|r| {
        r.non_location_correct.map_or_else(|| "n/a".to_string(), fmt_share)
    });

    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let col = reports.iter().map(|(l, _)| l.len().max(8)).collect::<Vec<_>>();
    let mut out = format!("{:width$}", "");
    for ((label, _), w) in reports.iter().zip(&col) {
        out.push_str(&format!("  {label:>w$}"));
    }
    out.push('\n');
    for (name, cells) in rows {
        out.push_str(&format!("{name:width$}"));
        for (cell, w) in cells.iter().zip(&col) {
            out.push_str(&format!("  {cell:>w$}"));
        }
        out.push('\n');
    }
    out
}

fn parse_flag(value: &str) -> Option<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Load a gold geocoding table. Columns are found by header name:
/// `lead_id`, `toponym`, `geonames_id` and an optional `is_location`.
/// Tab-separated when the extension is `.tsv`, comma-separated otherwise.
/// An empty or `none` id means no match.
pub fn load_gold(path: &Path) -> Result<Vec<GoldGeoRecord>> {
    let origin = path.display().to_string();
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(&origin, e))?;
    let headers = reader.headers().map_err(|e| csv_error(&origin, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let missing = |name: &str| Error::Parse {
        origin: origin.clone(),
        line: 1,
        message: format!("missing column {name:?}"),
    };
    let doc_col = column("lead_id").ok_or_else(|| missing("lead_id"))?;
    let top_col = column("toponym").ok_or_else(|| missing("toponym"))?;
    let id_col = column("geonames_id").ok_or_else(|| missing("geonames_id"))?;
    let loc_col = column("is_location");

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(&origin, e))?;
        let line = i + 2;
        let bad = |message: String| Error::Parse {
            origin: origin.clone(),
            line,
            message,
        };
        let raw_id = row.get(id_col).unwrap_or("").trim();
        let gold_geoname_id = match raw_id {
            "" => None,
            s if s.eq_ignore_ascii_case("none") => None,
            s => Some(
                s.trim_end_matches(".0")
                    .parse::<u64>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| bad(format!("bad geonames_id {s:?}")))?,
            ),
        };
        let is_location = match loc_col {
            Some(c) => {
                let v = row.get(c).unwrap_or("");
                parse_flag(v).ok_or_else(|| bad(format!("bad is_location {v:?}")))?
            }
            None => true,
        };
        if !is_location && gold_geoname_id.is_some() {
            return Err(bad("non-location row carries a geonames_id".into()));
        }
        out.push(GoldGeoRecord {
            doc_id: row.get(doc_col).unwrap_or("").trim().to_string(),
            toponym: row.get(top_col).unwrap_or("").to_string(),
            gold_geoname_id,
            is_location,
        });
    }
    check_unique(&out)?;
    Ok(out)
}

fn csv_error(origin: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        origin: origin.to_string(),
        line,
        message: e.to_string(),
    }
}
