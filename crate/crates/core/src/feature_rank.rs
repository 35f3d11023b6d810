//! FeatureRank and SearchFeatureRank.
//!
//! Each candidate gets six features; candidates are ordered
//! lexicographically by
//!
//! | key               | direction  |
//! |-------------------|------------|
//! | `is_capital`      | descending |
//! | `is_country`      | descending |
//! | `doc_country_match` | descending |
//! | `admin_level`     | ascending  |
//! | `is_city`         | descending |
//! | `population`      | descending |
//!
//! with ascending geoname id as the final tie-break. The first candidate in
//! that order that is not discarded by the threshold rule (admin level above
//! 5 outside the document's top country) is chosen.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::candidates::{
    Candidate, CandidateGenerator, CandidateOptions, CandidateSet, MatchOrigin, TrivialTokens,
};
use crate::gazetteer::GazetteerStore;
use crate::normalizer::Toponym;
use crate::resolution::{Geocoder, Method, RankEntry, Resolution};

pub const NO_ADMIN_LEVEL: u8 = 6;
pub const DEFAULT_TRACE_CAP: usize = 50;

/// Tolerance when comparing a weight against the distribution maximum.
const TOP_COUNTRY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub is_capital: u8,
    pub is_country: u8,
    /// 0 for capitals and countries, 1–5 for coded ADM/PPLA levels, 6 otherwise.
    pub admin_level: u8,
    pub is_city: u8,
    pub population: u64,
    pub doc_country_match: f64,
}

/// Document-wide distribution over candidate country codes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountryDistribution {
    weights: BTreeMap<String, f64>,
}

impl CountryDistribution {
    pub fn from_weights(weights: BTreeMap<String, f64>) -> Self {
        CountryDistribution { weights }
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, country_code: &str) -> f64 {
        self.weights.get(country_code).copied().unwrap_or(0.0)
    }

    pub fn max_weight(&self) -> Option<f64> {
        self.weights.values().copied().max_by(f64::total_cmp)
    }

    /// Highest-weight country; ties go to the alphabetically first code.
    pub fn argmax(&self) -> Option<&str> {
        let max = self.max_weight()?;
        self.weights
            .iter()
            .find(|(_, w)| **w >= max - TOP_COUNTRY_EPS)
            .map(|(c, _)| c.as_str())
    }

    /// Whether `country_code` attains the maximum weight. Always false for
    /// an empty distribution or an empty code.
    pub fn is_top_country(&self, country_code: &str) -> bool {
        match self.max_weight() {
            Some(max) if !country_code.is_empty() => self.weight(country_code) >= max - TOP_COUNTRY_EPS,
            _ => false,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Average, over the document's toponyms, of each toponym's uniform
/// distribution over its candidates' countries. Candidates without a country
/// carry no mass; toponyms left with no mass are skipped.
pub fn doc_country_distribution(sets: &[CandidateSet<'_>]) -> CountryDistribution {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut contributing = 0usize;
    for set in sets {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &set.candidates {
            if !c.entry.country_code.is_empty() {
                *counts.entry(c.entry.country_code.as_str()).or_insert(0) += 1;
            }
        }
        let total: usize = counts.values().sum();
        if total == 0 {
            continue;
        }
        contributing += 1;
        for (country, n) in counts {
            *sums.entry(country.to_string()).or_insert(0.0) += n as f64 / total as f64;
        }
    }
    if contributing > 0 {
        for w in sums.values_mut() {
            *w /= contributing as f64;
        }
    }
    CountryDistribution { weights: sums }
}

/// Numeric level of an ADM1–ADM5 or PPLA/PPLA2–PPLA5 code, else 6.
pub fn admin_level(feature_code: &str) -> u8 {
    let code = feature_code.trim();
    let level = if let Some(rest) = code.strip_prefix("ADM") {
        rest.parse::<u8>().ok()
    } else if let Some(rest) = code.strip_prefix("PPLA") {
        if rest.is_empty() {
            Some(1)
        } else {
            rest.parse::<u8>().ok()
        }
    } else {
        None
    };
    match level {
        Some(n @ 1..=5) => n,
        _ => NO_ADMIN_LEVEL,
    }
}

pub fn compute_features(candidate: &Candidate<'_>, dist: &CountryDistribution) -> FeatureVector {
    let entry = candidate.entry;
    let code = entry.feature_code.as_str();
    let exact = candidate.origin == MatchOrigin::ExactMatch;
    let is_capital = exact && code == "PPLC";
    let is_country = exact && matches!(code, "PCLI" | "PCLS");
    let admin_level = if is_capital || is_country {
        0
    } else {
        admin_level(code)
    };
    let doc_country_match = if entry.country_code.is_empty() {
        0.0
    } else {
        dist.weight(&entry.country_code)
    };
    FeatureVector {
        is_capital: is_capital as u8,
        is_country: is_country as u8,
        admin_level,
        is_city: code.starts_with("PPL") as u8,
        population: entry.population,
        doc_country_match,
    }
}

/// FeatureRank order between two feature vectors, geoname id last.
pub fn compare_features(a: &FeatureVector, a_id: u64, b: &FeatureVector, b_id: u64) -> Ordering {
    b.is_capital
        .cmp(&a.is_capital)
        .then(b.is_country.cmp(&a.is_country))
        .then(b.doc_country_match.total_cmp(&a.doc_country_match))
        .then(a.admin_level.cmp(&b.admin_level))
        .then(b.is_city.cmp(&a.is_city))
        .then(b.population.cmp(&a.population))
        .then(a_id.cmp(&b_id))
}

pub fn rank_candidates<'a, 's>(
    set: &'a CandidateSet<'s>,
    dist: &CountryDistribution,
) -> Vec<(&'a Candidate<'s>, FeatureVector)> {
    let mut ranked: Vec<(&Candidate<'s>, FeatureVector)> = set
        .candidates
        .iter()
        .map(|c| (c, compute_features(c, dist)))
        .collect();
    ranked.sort_by(|(a, fa), (b, fb)| compare_features(fa, a.geoname_id(), fb, b.geoname_id()));
    ranked
}

/// True when the threshold rule discards the candidate: no admin level and
/// not in the document's top country. An empty distribution has no top
/// country, so every level-6 candidate is discarded.
pub fn is_discarded(candidate: &Candidate<'_>, features: &FeatureVector, dist: &CountryDistribution) -> bool {
    features.admin_level > 5 && !dist.is_top_country(&candidate.entry.country_code)
}

/// Position of the first ranked candidate that survives the threshold rule.
pub fn first_surviving(ranked: &[(&Candidate<'_>, FeatureVector)], dist: &CountryDistribution) -> Option<usize> {
    ranked
        .iter()
        .position(|(c, f)| !is_discarded(c, f, dist))
}

pub fn apply_threshold<'a, 's>(
    ranked: &[(&'a Candidate<'s>, FeatureVector)],
    dist: &CountryDistribution,
) -> Option<&'a Candidate<'s>> {
    first_surviving(ranked, dist).map(|i| ranked[i].0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMode {
    /// Exact-match candidates only.
    FeatureRank,
    /// Exact-match plus search candidates.
    SearchFeatureRank,
}

impl RankMode {
    pub fn method(self) -> Method {
        match self {
            RankMode::FeatureRank => Method::FeatureRank,
            RankMode::SearchFeatureRank => Method::SearchFeatureRank,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureRank<'s> {
    generator: CandidateGenerator<'s>,
    mode: RankMode,
    trace_cap: usize,
}

impl<'s> FeatureRank<'s> {
    /// `options.use_search` is overridden by `mode`.
    pub fn new(
        store: &'s GazetteerStore,
        trivial: TrivialTokens,
        mode: RankMode,
        options: CandidateOptions,
    ) -> Self {
        let options = CandidateOptions {
            use_search: mode == RankMode::SearchFeatureRank,
            ..options
        };
        FeatureRank {
            generator: CandidateGenerator::new(store, trivial, options),
            mode,
            trace_cap: DEFAULT_TRACE_CAP,
        }
    }

    pub fn with_trace_cap(mut self, cap: usize) -> Self {
        self.trace_cap = cap;
        self
    }

    pub fn generator(&self) -> &CandidateGenerator<'s> {
        &self.generator
    }

    pub fn resolve(&self, set: &CandidateSet<'_>, dist: &CountryDistribution) -> Resolution {
        let ranked = rank_candidates(set, dist);
        let chosen_at = first_surviving(&ranked, dist);
        let keep = chosen_at.map_or(self.trace_cap, |i| self.trace_cap.max(i + 1));
        Resolution {
            toponym: set.toponym.clone(),
            chosen: chosen_at.map(|i| ranked[i].0.geoname_id()),
            rank_trace: ranked
                .iter()
                .take(keep)
                .map(|(c, f)| RankEntry {
                    geoname_id: c.geoname_id(),
                    features: *f,
                })
                .collect(),
        }
    }
}

impl Geocoder for FeatureRank<'_> {
    fn method(&self) -> Method {
        self.mode.method()
    }

    fn geocode_document(&self, toponyms: &[Toponym]) -> Vec<Resolution> {
        let sets: Vec<CandidateSet<'_>> = toponyms.iter().map(|t| self.generator.generate(t)).collect();
        let dist = doc_country_distribution(&sets);
        sets.iter().map(|set| self.resolve(set, &dist)).collect()
    }
}
