use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateGenerator, CandidateOptions, CandidateSet, TrivialTokens};
use crate::gazetteer::{haversine_km, GazetteerStore, GeoPoint};
use crate::normalizer::Toponym;
use crate::resolution::{Geocoder, Method, Resolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BmStepKind {
    /// A country named in the document.
    Country,
    /// Single candidate inside one of the document's countries.
    Unambiguous,
    /// Closest on average to the references resolved so far.
    Nearest,
    /// No references to measure against; lowest geoname id.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmStep {
    /// 0 for seeds, then one per resolved toponym.
    pub iteration: usize,
    pub toponym_index: usize,
    pub kind: BmStepKind,
    pub chosen: u64,
    pub references: usize,
    /// Mean distance of every candidate to the reference set, for `Nearest`.
    pub candidate_means: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BmTrace {
    pub steps: Vec<BmStep>,
}

fn is_country_code(code: &str) -> bool {
    matches!(code, "PCLI" | "PCLS")
}

/// Country codes of the country entries named by the document's toponyms.
pub fn doc_countries(sets: &[CandidateSet<'_>]) -> BTreeSet<String> {
    sets.iter()
        .flat_map(|s| s.candidates.iter())
        .filter(|c| is_country_code(&c.entry.feature_code) && !c.entry.country_code.is_empty())
        .map(|c| c.entry.country_code.clone())
        .collect()
}

/// Iterative resolution: seed with countries and unambiguous toponyms, then
/// repeatedly resolve the toponym whose best candidate is nearest on average
/// to everything already resolved.
pub fn bm_geocode(sets: &[CandidateSet<'_>], doc_countries: &BTreeSet<String>) -> (Vec<Resolution>, BmTrace) {
    let n = sets.len();
    let mut chosen: Vec<Option<u64>> = vec![None; n];
    let mut references: Vec<GeoPoint> = Vec::new();
    let mut trace = BmTrace::default();

    for (i, set) in sets.iter().enumerate() {
        let country = set
            .candidates
            .iter()
            .filter(|c| is_country_code(&c.entry.feature_code))
            .min_by_key(|c| c.geoname_id());
        let (pick, kind) = match (country, set.candidates.as_slice()) {
            (Some(c), _) => (c, BmStepKind::Country),
            (None, [only]) if doc_countries.contains(&only.entry.country_code) => (only, BmStepKind::Unambiguous),
            _ => continue,
        };
        chosen[i] = Some(pick.geoname_id());
        references.push(pick.entry.point());
        trace.steps.push(BmStep {
            iteration: 0,
            toponym_index: i,
            kind,
            chosen: pick.geoname_id(),
            references: 0,
            candidate_means: Vec::new(),
        });
    }

    // Running distance sums from each pending candidate to the reference set.
    let mut pending: Vec<(usize, Vec<f64>)> = (0..n)
        .filter(|&i| chosen[i].is_none() && !sets[i].is_empty())
        .map(|i| {
            let sums = sets[i]
                .candidates
                .iter()
                .map(|c| references.iter().map(|r| haversine_km(c.entry.point(), *r)).sum())
                .collect();
            (i, sums)
        })
        .collect();

    if references.is_empty() {
        for (i, _) in pending.drain(..) {
            let id = sets[i].candidates.iter().map(|c| c.geoname_id()).min().expect("non-empty");
            chosen[i] = Some(id);
            trace.steps.push(BmStep {
                iteration: 0,
                toponym_index: i,
                kind: BmStepKind::Fallback,
                chosen: id,
                references: 0,
                candidate_means: Vec::new(),
            });
        }
    }

    let mut iteration = 0;
    while !pending.is_empty() {
        iteration += 1;
        let count = references.len() as f64;
        // (mean, toponym index, geoname id) of the best candidate overall
        let mut best: Option<(f64, usize, u64, usize)> = None;
        for (slot, (i, sums)) in pending.iter().enumerate() {
            for (c, sum) in sets[*i].candidates.iter().zip(sums) {
                let key = (sum / count, *i, c.geoname_id(), slot);
                let better = match best {
                    None => true,
                    Some(b) => key.0.total_cmp(&b.0).then(key.1.cmp(&b.1)).then(key.2.cmp(&b.2)).is_lt(),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (_, i, id, slot) = best.expect("pending toponyms have candidates");
        let (_, sums) = pending.swap_remove(slot);
        let candidate_means = sets[i]
            .candidates
            .iter()
            .zip(&sums)
            .map(|(c, s)| (c.geoname_id(), s / count))
            .collect();
        trace.steps.push(BmStep {
            iteration,
            toponym_index: i,
            kind: BmStepKind::Nearest,
            chosen: id,
            references: references.len(),
            candidate_means,
        });
        chosen[i] = Some(id);
        let point = sets[i]
            .candidates
            .iter()
            .find(|c| c.geoname_id() == id)
            .expect("chosen candidate")
            .entry
            .point();
        references.push(point);
        for (j, sums) in pending.iter_mut() {
            for (c, sum) in sets[*j].candidates.iter().zip(sums.iter_mut()) {
                *sum += haversine_km(c.entry.point(), point);
            }
        }
    }

    let resolutions = sets
        .iter()
        .zip(chosen)
        .map(|(set, chosen)| Resolution {
            toponym: set.toponym.clone(),
            chosen,
            rank_trace: Vec::new(),
        })
        .collect();
    (resolutions, trace)
}

#[derive(Debug, Clone)]
pub struct BmGeocoder<'s> {
    generator: CandidateGenerator<'s>,
}

impl<'s> BmGeocoder<'s> {
    /// Search retrieval is always off for this baseline.
    pub fn new(store: &'s GazetteerStore, trivial: TrivialTokens, options: CandidateOptions) -> Self {
        let options = CandidateOptions {
            use_search: false,
            ..options
        };
        BmGeocoder {
            generator: CandidateGenerator::new(store, trivial, options),
        }
    }

    pub fn geocode_with_trace(&self, toponyms: &[Toponym]) -> (Vec<Resolution>, BmTrace) {
        let sets: Vec<CandidateSet<'_>> = toponyms.iter().map(|t| self.generator.generate(t)).collect();
        bm_geocode(&sets, &doc_countries(&sets))
    }
}

impl Geocoder for BmGeocoder<'_> {
    fn method(&self) -> Method {
        Method::Bm
    }

    fn geocode_document(&self, toponyms: &[Toponym]) -> Vec<Resolution> {
        self.geocode_with_trace(toponyms).0
    }
}
