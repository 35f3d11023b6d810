//! In-memory GeoNames store and its two retrieval indexes.
//!
//! [`load_gazetteer`] reads an `allCountries`-style dump plus an optional
//! `alternateNames` dump, keeps the rows whose feature code maps into the
//! allowlist, and builds:
//!
//! * an [`ExactIndex`] from standardized name to geoname ids, with token
//!   postings for consecutive-word lookups;
//! * a [`TextIndex`] scoring entries with BM25F over a name field and an
//!   alternate-name field.
//!
//! The store is immutable once built and can be shared between threads.

mod bm25;
mod cache;
mod codes;
mod exact;
mod geo;
mod load;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use bm25::{tokenize, Bm25Params, TextIndex};
pub use cache::{dump_checksum, CacheKey, CACHE_VERSION};
pub use codes::{map_code_class, CodeClass, CodeClassMap};
pub use exact::ExactIndex;
pub use geo::{haversine_km, GeoPoint, EARTH_RADIUS_KM};
pub use load::{load_gazetteer, LoadReport, PSEUDO_LANGUAGES};

use crate::normalizer::standardize_text;

/// One GeoNames record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub geoname_id: u64,
    pub name: String,
    pub ascii_name: String,
    pub alternate_names: Vec<String>,
    pub latitude: f64,
    pub longitude: f64,
    pub feature_class: char,
    pub feature_code: String,
    /// ISO 3166-1 alpha-2, empty for features outside any country.
    pub country_code: String,
    pub population: u64,
}

impl GazetteerEntry {
    pub fn point(&self) -> GeoPoint {
        GeoPoint {
            latitude: self.latitude,
            longitude: self.longitude,
        }
    }

    /// Standardized, de-duplicated forms of the primary, ASCII and alternate
    /// names. Names that standardize to nothing are left out.
    pub fn index_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = [&self.name, &self.ascii_name]
            .into_iter()
            .chain(self.alternate_names.iter());
        for raw in all {
            let form = standardize_text(raw);
            if !form.is_empty() && !out.contains(&form) {
                out.push(form);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GazetteerStore {
    entries: BTreeMap<u64, GazetteerEntry>,
    exact: ExactIndex,
    text: TextIndex,
    allowlist: BTreeSet<CodeClass>,
}

impl GazetteerStore {
    /// Build a store from already-filtered entries. Later duplicates of a
    /// geoname id are ignored.
    pub fn from_entries(
        entries: impl IntoIterator<Item = GazetteerEntry>,
        allowlist: BTreeSet<CodeClass>,
    ) -> Self {
        Self::with_params(entries, allowlist, Bm25Params::default())
    }

    pub fn with_params(
        entries: impl IntoIterator<Item = GazetteerEntry>,
        allowlist: BTreeSet<CodeClass>,
        params: Bm25Params,
    ) -> Self {
        let mut map = BTreeMap::new();
        for entry in entries {
            map.entry(entry.geoname_id).or_insert(entry);
        }
        let exact = ExactIndex::build(map.values());
        let text = TextIndex::build(map.values(), params);
        GazetteerStore {
            entries: map,
            exact,
            text,
            allowlist,
        }
    }

    pub fn get(&self, geoname_id: u64) -> Option<&GazetteerEntry> {
        self.entries.get(&geoname_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &GazetteerEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn exact_index(&self) -> &ExactIndex {
        &self.exact
    }

    pub fn text_index(&self) -> &TextIndex {
        &self.text
    }

    pub fn allowlist(&self) -> &BTreeSet<CodeClass> {
        &self.allowlist
    }

    /// Entry counts per code class under `codes`.
    pub fn class_counts(&self, codes: &CodeClassMap) -> BTreeMap<CodeClass, usize> {
        let mut counts = BTreeMap::new();
        for entry in self.entries.values() {
            if let Some(class) = codes.classify(&entry.feature_code) {
                *counts.entry(class).or_insert(0) += 1;
            }
        }
        counts
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn index_names_standardize_and_dedupe() {
        let e = entry(1, "Ṣan‘ā’", &["Sanaa", "Sana'a", "", "—"], 15.35, 44.2, "PPLC", "YE", 1);
        assert_eq!(e.index_names(), vec!["sana", "sanaa"]);
    }

    #[test]
    fn every_entry_is_found_under_its_primary_name() {
        let s = store(vec![
            entry(3, "Aden", &["Adan"], 12.78, 45.04, "PPLA", "YE", 550602),
            entry(1, "Gulf of Aden", &[], 12.0, 48.0, "GULF", "", 0),
            entry(2, "Aden", &[], 38.3, -77.6, "PPL", "US", 0),
        ]);
        for e in s.entries() {
            let key = standardize_text(&e.name);
            assert!(s.exact_index().get(&key).unwrap().contains(&e.geoname_id));
        }
        assert_eq!(s.exact_index().get("aden").unwrap(), &[2, 3]);
    }

    #[test]
    fn first_duplicate_wins() {
        let s = store(vec![
            entry(1, "A", &[], 0.0, 0.0, "PPL", "YE", 1),
            entry(1, "B", &[], 0.0, 0.0, "PPL", "YE", 1),
        ]);
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(1).unwrap().name, "A");
    }
}
