use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::ResolutionRecord;

pub const TOP_COUNTRIES: usize = 15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HdiBand {
    Low,
    Medium,
    High,
    VeryHigh,
    #[default]
    Unclassified,
}

impl HdiBand {
    pub fn as_str(self) -> &'static str {
        match self {
            HdiBand::Low => "low",
            HdiBand::Medium => "medium",
            HdiBand::High => "high",
            HdiBand::VeryHigh => "very_high",
            HdiBand::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for HdiBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HdiBand {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "low" => Ok(HdiBand::Low),
            "medium" => Ok(HdiBand::Medium),
            "high" => Ok(HdiBand::High),
            "very_high" => Ok(HdiBand::VeryHigh),
            other => Err(format!("unknown HDI band {other:?}")),
        }
    }
}

/// Country code to HDI band.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HdiTable {
    bands: BTreeMap<String, HdiBand>,
}

impl HdiTable {
    /// Tab-separated `country_code band [source]` with a header row; `#`
    /// lines are comments.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut bands = BTreeMap::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                if line.to_ascii_lowercase().starts_with("country_code") {
                    continue;
                }
            }
            let mut cols = line.split('\t');
            let (Some(code), Some(band)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse {
                    origin: origin.to_string(),
                    line: i + 1,
                    message: "expected country_code and band".into(),
                });
            };
            let band = band.parse().map_err(|message| Error::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message,
            })?;
            bands.insert(code.trim().to_ascii_uppercase(), band);
        }
        Ok(HdiTable { bands })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The snapshot shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../../data/hdi_bands.tsv"), "hdi_bands.tsv").expect("bundled HDI table parses")
    }

    pub fn band(&self, country_code: &str) -> HdiBand {
        self.bands.get(country_code).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

impl FromIterator<(String, HdiBand)> for HdiTable {
    fn from_iter<I: IntoIterator<Item = (String, HdiBand)>>(iter: I) -> Self {
        HdiTable {
            bands: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub label: String,
    /// Resolved toponyms; records without a choice are not counted.
    pub resolved: usize,
    /// Keyed by country code; the empty code collects entries without a country.
    pub per_country: BTreeMap<String, usize>,
    pub per_band: BTreeMap<HdiBand, usize>,
    pub top: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryDiff {
    pub country: String,
    pub baseline: usize,
    pub other: usize,
    /// `other - baseline`.
    pub absolute: i64,
    /// `(other - baseline) / baseline`; absent when the baseline is zero.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiff {
    pub baseline: String,
    pub other: String,
    /// Largest absolute difference first.
    pub rows: Vec<CountryDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub models: Vec<ModelCounts>,
    pub diffs: Vec<PairDiff>,
}

fn count_model(label: &str, records: &[ResolutionRecord], hdi: &HdiTable) -> ModelCounts {
    let mut per_country: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_band: BTreeMap<HdiBand, usize> = BTreeMap::new();
    let mut resolved = 0;
    for r in records.iter().filter(|r| r.chosen.is_some()) {
        resolved += 1;
        let cc = r.country_code.clone().unwrap_or_default();
        *per_band.entry(hdi.band(&cc)).or_insert(0) += 1;
        *per_country.entry(cc).or_insert(0) += 1;
    }
    let mut top: Vec<(String, usize)> = per_country.iter().map(|(c, n)| (c.clone(), *n)).collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(TOP_COUNTRIES);
    ModelCounts {
        label: label.to_string(),
        resolved,
        per_country,
        per_band,
        top,
    }
}

fn diff(baseline: &ModelCounts, other: &ModelCounts) -> PairDiff {
    let mut countries: Vec<&String> = baseline.per_country.keys().chain(other.per_country.keys()).collect();
    countries.sort();
    countries.dedup();
    let mut rows: Vec<CountryDiff> = countries
        .into_iter()
        .map(|c| {
            let b = baseline.per_country.get(c).copied().unwrap_or(0);
            let o = other.per_country.get(c).copied().unwrap_or(0);
            let absolute = o as i64 - b as i64;
            CountryDiff {
                country: c.clone(),
                baseline: b,
                other: o,
                absolute,
                relative: (b > 0).then(|| absolute as f64 / b as f64),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.absolute
            .unsigned_abs()
            .cmp(&a.absolute.unsigned_abs())
            .then_with(|| a.country.cmp(&b.country))
    });
    PairDiff {
        baseline: baseline.label.clone(),
        other: other.label.clone(),
        rows,
    }
}

/// Per-model country and HDI-band counts, plus a difference table for every
/// ordered pair of runs (earlier run as the baseline).
pub fn country_audit(runs: &[(String, Vec<ResolutionRecord>)], hdi: &HdiTable) -> AuditReport {
    let models: Vec<ModelCounts> = runs.iter().map(|(l, r)| count_model(l, r, hdi)).collect();
    let mut diffs = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            diffs.push(diff(&models[i], &models[j]));
        }
    }
    AuditReport { models, diffs }
}

fn country_label(code: &str) -> &str {
    if code.is_empty() {
        "(none)"
    } else {
        code
    }
}

pub fn render_audit(report: &AuditReport) -> String {
    let mut out = String::new();
    for m in &report.models {
        out.push_str(&format!("== {} ({} resolved)\n", m.label, m.resolved));
        out.push_str(&format!("top {} countries\n", TOP_COUNTRIES));
        for (c, n) in &m.top {
            out.push_str(&format!("  {:<8}{n:>8}\n", country_label(c)));
        }
        out.push_str("HDI bands\n");
        for (b, n) in &m.per_band {
            out.push_str(&format!("  {:<14}{n:>8}\n", b.as_str()));
        }
    }
    for d in &report.diffs {
        out.push_str(&format!("== {} vs {}\n", d.other, d.baseline));
        out.push_str(&format!("  {:<8}{:>8}{:>8}{:>8}{:>10}\n", "country", "base", "other", "diff", "relative"));
        for r in &d.rows {
            let rel = r.relative.map_or_else(|| "n/a".to_string(), |x| format!("{x:+.2}"));
            out.push_str(&format!(
                "  {:<8}{:>8}{:>8}{:>+8}{rel:>10}\n",
                country_label(&r.country),
                r.baseline,
                r.other,
                r.absolute
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolution::Method;

    fn rec(cc: Option<&str>, chosen: bool) -> ResolutionRecord {
        ResolutionRecord {
            schema_version: 1,
            doc_id: "d".into(),
            raw: "x".into(),
            start: 0,
            end: 1,
            normalized: vec!["x".into()],
            method: Method::FeatureRank,
            chosen: chosen.then_some(1),
            name: None,
            latitude: None,
            longitude: None,
            country_code: cc.map(str::to_string),
            feature_code: None,
            rank_trace: Vec::new(),
        }
    }

    fn many(cc: &str, n: usize) -> Vec<ResolutionRecord> {
        (0..n).map(|_| rec(Some(cc), true)).collect()
    }

    fn hdi() -> HdiTable {
        HdiTable::parse(
            "# comment\ncountry_code\tband\tsource\nUS\tvery_high\tx\nYE\tlow\tx\nSY\tmedium\tx\n",
            "mem",
        )
        .unwrap()
    }

    #[test]
    fn shipped_table_parses() {
        let t = HdiTable::bundled();
        assert!(t.len() > 150);
        assert_eq!(t.band("YE"), HdiBand::Low);
        assert_eq!(t.band("NO"), HdiBand::VeryHigh);
        assert_eq!(t.band("XK"), HdiBand::Unclassified);
    }

    #[test]
    fn relative_drop() {
        let a: Vec<_> = many("US", 100).into_iter().chain(many("YE", 10)).collect();
        let b: Vec<_> = many("US", 45).into_iter().chain(many("YE", 10)).collect();
        let r = country_audit(&[("base".into(), a), ("tuned".into(), b)], &hdi());
        let us = &r.diffs[0].rows[0];
        assert_eq!(us.country, "US");
        assert!((us.relative.unwrap() + 0.55).abs() < 1e-12);
        assert_eq!(r.diffs[0].rows[1].absolute, 0);
    }

    #[test]
    fn identical_runs_have_zero_diffs() {
        let a: Vec<_> = many("US", 3).into_iter().chain(many("SY", 2)).collect();
        let r = country_audit(&[("a".into(), a.clone()), ("b".into(), a)], &hdi());
        assert!(r.diffs[0].rows.iter().all(|d| d.absolute == 0 && d.relative == Some(0.0)));
    }

    #[test]
    fn single_run_counts_only() {
        let mut run = many("YE", 4);
        run.push(rec(Some("YE"), false));
        run.push(rec(Some(""), true));
        run.push(rec(Some("ZZ"), true));
        let r = country_audit(&[("only".into(), run)], &hdi());
        assert!(r.diffs.is_empty());
        let m = &r.models[0];
        assert_eq!(m.resolved, 6);
        assert_eq!(m.per_country["YE"], 4);
        assert_eq!(m.per_band[&HdiBand::Low], 4);
        assert_eq!(m.per_band[&HdiBand::Unclassified], 2);
        assert!(render_audit(&r).contains("(none)"));
    }

    #[test]
    fn top_list_is_capped() {
        let codes = ["AA", "AB", "AC", "AD", "AE", "AF", "AG", "AH", "AI", "AJ", "AK", "AL", "AM", "AN", "AO", "AP", "AQ"];
        let run: Vec<_> = codes.iter().enumerate().flat_map(|(i, c)| many(c, i + 1)).collect();
        let r = country_audit(&[("m".into(), run)], &HdiTable::default());
        assert_eq!(r.models[0].top.len(), TOP_COUNTRIES);
        assert_eq!(r.models[0].top[0], ("AQ".to_string(), 17));
        assert_eq!(r.models[0].per_country.len(), 17);
    }
}
