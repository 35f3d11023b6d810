//! Candidate generation: exact consecutive-word matching against indexed
//! names, plus BM25F search over the same name fields.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gazetteer::{GazetteerEntry, GazetteerStore};
use crate::normalizer::{standardize_text, Toponym};

const DEFAULT_TRIVIAL: &str = include_str!("../data/trivial_tokens.txt");

pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchOrigin {
    ExactMatch,
    SearchMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<'s> {
    pub entry: &'s GazetteerEntry,
    pub origin: MatchOrigin,
    /// BM25F score, present iff `origin` is `SearchMatch`.
    pub search_score: Option<f64>,
    /// The standardized text that produced the match.
    pub matched: String,
}

impl Candidate<'_> {
    pub fn geoname_id(&self) -> u64 {
        self.entry.geoname_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<'s> {
    pub toponym: Toponym,
    /// Unique by geoname id.
    pub candidates: Vec<Candidate<'s>>,
}

impl<'s> CandidateSet<'s> {
    pub fn new(toponym: Toponym) -> Self {
        CandidateSet {
            toponym,
            candidates: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Add candidates, keeping one per geoname id. An exact match replaces a
    /// search match for the same entry in place.
    pub fn merge(&mut self, incoming: impl IntoIterator<Item = Candidate<'s>>) {
        let mut position: HashMap<u64, usize> = self
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.geoname_id(), i))
            .collect();
        for candidate in incoming {
            match position.get(&candidate.geoname_id()) {
                Some(&i) => {
                    let existing = &mut self.candidates[i];
                    if existing.origin == MatchOrigin::SearchMatch
                        && candidate.origin == MatchOrigin::ExactMatch
                    {
                        *existing = candidate;
                    }
                }
                None => {
                    position.insert(candidate.geoname_id(), self.candidates.len());
                    self.candidates.push(candidate);
                }
            }
        }
    }
}

/// Matched strings that never count as a hit on their own: lone cardinal
/// directions, generic place words, stop-words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrivialTokens {
    entries: HashSet<String>,
}

impl Default for TrivialTokens {
    fn default() -> Self {
        TrivialTokens::parse(DEFAULT_TRIVIAL)
    }
}

impl TrivialTokens {
    /// One entry per line, `#` starts a comment. Entries are standardized.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .map(standardize_text)
            .filter(|l| !l.is_empty())
            .collect();
        TrivialTokens { entries }
    }

    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| Error::io(path, e))
    }

    pub fn is_trivial(&self, matched_text: &str) -> bool {
        self.entries.contains(matched_text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `true` keeps the match, `false` drops it.
pub fn filter_trivial_tokens(list: &TrivialTokens, matched_text: &str) -> bool {
    !list.is_trivial(matched_text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateOptions {
    pub top_k: usize,
    /// Add BM25F search hits to the exact matches.
    pub use_search: bool,
    /// Only search for forms that produced no exact match.
    pub search_fallback_only: bool,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            top_k: DEFAULT_TOP_K,
            use_search: false,
            search_fallback_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CandidateGenerator<'s> {
    store: &'s GazetteerStore,
    trivial: TrivialTokens,
    options: CandidateOptions,
}

impl<'s> CandidateGenerator<'s> {
    pub fn new(store: &'s GazetteerStore, trivial: TrivialTokens, options: CandidateOptions) -> Self {
        CandidateGenerator {
            store,
            trivial,
            options,
        }
    }

    pub fn store(&self) -> &'s GazetteerStore {
        self.store
    }

    pub fn options(&self) -> &CandidateOptions {
        &self.options
    }

    /// Entries whose indexed names share the longest run of consecutive
    /// words with `text`. Runs that are trivial on their own are never
    /// counted as matches. Results are ordered by geoname id.
    pub fn exact_match_candidates(&self, text: &str) -> Vec<Candidate<'s>> {
        let words: Vec<&str> = text.split(' ').filter(|w| !w.is_empty()).collect();
        let index = self.store.exact_index();
        for len in (1..=words.len()).rev() {
            let mut hits: Vec<Candidate<'s>> = Vec::new();
            let mut seen = HashSet::new();
            for window in words.windows(len) {
                let matched = window.join(" ");
                if !filter_trivial_tokens(&self.trivial, &matched) {
                    continue;
                }
                for (_, ids) in index.names_containing(window) {
                    for &id in ids {
                        if seen.insert(id) {
                            let entry = self.store.get(id).expect("index ids exist in store");
                            hits.push(Candidate {
                                entry,
                                origin: MatchOrigin::ExactMatch,
                                search_score: None,
                                matched: matched.clone(),
                            });
                        }
                    }
                }
            }
            if !hits.is_empty() {
                hits.sort_by_key(|c| c.geoname_id());
                return hits;
            }
        }
        Vec::new()
    }

    /// Up to `top_k` BM25F hits for `text`, best first.
    pub fn search_candidates(&self, text: &str, top_k: usize) -> Vec<Candidate<'s>> {
        let text = text.trim();
        if text.is_empty() || self.trivial.is_trivial(text) {
            return Vec::new();
        }
        self.store
            .text_index()
            .search(text, top_k)
            .into_iter()
            .map(|(id, score)| Candidate {
                entry: self.store.get(id).expect("index ids exist in store"),
                origin: MatchOrigin::SearchMatch,
                search_score: Some(score),
                matched: text.to_string(),
            })
            .collect()
    }

    pub fn generate(&self, toponym: &Toponym) -> CandidateSet<'s> {
        let mut set = CandidateSet::new(toponym.clone());
        let mut searched = Vec::new();
        for form in &toponym.normalized {
            let exact = self.exact_match_candidates(form);
            let want_search =
                self.options.use_search && !(self.options.search_fallback_only && !exact.is_empty());
            set.merge(exact);
            if want_search {
                searched.push(self.search_candidates(form, self.options.top_k));
            }
        }
        for hits in searched {
            set.merge(hits);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::test_support::{entry, store};
    use crate::normalizer::Normalizer;
    use crate::span::Span;

    fn fixture() -> GazetteerStore {
        store(vec![
            entry(415189, "Aden", &["Adan"], 12.77944, 45.03667, "PPLA", "YE", 550602),
            entry(350217, "Gulf of Aden", &[], 12.0, 48.0, "GULF", "", 0),
            entry(2210247, "Tripoli", &["Tarabulus"], 32.88743, 13.18733, "PPLC", "LY", 1_150_989),
            entry(266826, "Tripoli", &[], 34.43667, 35.84972, "PPLA", "LB", 229_398),
            entry(6297236, "Tripoli International Airport", &[], 32.6635, 13.159, "AIRP", "LY", 0),
            entry(170063, "Aleppo", &["Halab"], 36.20124, 37.16117, "PPLA", "SY", 1_602_264),
            entry(2335196, "Kwara", &["Kwara State"], 8.5, 4.55, "ADM1", "NG", 2_371_089),
            entry(7, "North Darfur", &[], 15.5, 25.0, "ADM1", "SD", 2_000_000),
            entry(8, "North", &[], 10.0, 10.0, "PPL", "XX", 0),
            entry(9, "City", &[], 11.0, 11.0, "PPL", "XX", 0),
        ])
    }

    fn ids(c: &[Candidate<'_>]) -> Vec<u64> {
        c.iter().map(|c| c.geoname_id()).collect()
    }

    fn toponym(raw: &str) -> Toponym {
        Normalizer::default().normalize_toponym("d1", raw, Span::new(0, 1).unwrap())
    }

    #[test]
    fn exact_examples() {
        let s = fixture();
        let g = CandidateGenerator::new(&s, TrivialTokens::default(), CandidateOptions::default());
        assert_eq!(ids(&g.exact_match_candidates("aden")), vec![350217, 415189]);
        assert!(g.exact_match_candidates("north").is_empty());
        assert!(g.exact_match_candidates("city").is_empty());
        assert!(g.exact_match_candidates("xyzzy nowhere").is_empty());
        assert_eq!(ids(&g.exact_match_candidates("north darfur")), vec![7]);
        // longest run wins over the shorter "tripoli"
        assert_eq!(
            ids(&g.exact_match_candidates("tripoli international airport")),
            vec![6297236]
        );
        let hits = g.exact_match_candidates("aden port");
        assert!(hits.iter().all(|c| c.matched == "aden" && c.origin == MatchOrigin::ExactMatch));
    }

    #[test]
    fn trivial_filter_examples() {
        let t = TrivialTokens::default();
        assert!(!filter_trivial_tokens(&t, "north"));
        assert!(!filter_trivial_tokens(&t, "city"));
        assert!(filter_trivial_tokens(&t, "north darfur"));
        assert!((55..=80).contains(&t.len()), "{}", t.len());
    }

    #[test]
    fn search_examples() {
        let s = fixture();
        let g = CandidateGenerator::new(&s, TrivialTokens::default(), CandidateOptions::default());
        let hits = g.search_candidates("tripoli airport", 5);
        assert_eq!(hits[0].geoname_id(), 6297236);
        assert!(hits.iter().all(|c| c.search_score.unwrap() > 0.0));

        let hits = g.search_candidates("aleppo", 5);
        assert_eq!(ids(&hits), vec![170063]);

        let hits = g.search_candidates("tripoli", 2);
        assert!(hits.len() <= 2);
        assert!(hits.windows(2).all(|w| w[0].search_score >= w[1].search_score));
        assert!(g.search_candidates("", 5).is_empty());
        assert!(g.search_candidates("north", 5).is_empty());
    }

    #[test]
    fn generate_dedups_with_exact_winning() {
        let s = fixture();
        let options = CandidateOptions {
            use_search: true,
            ..Default::default()
        };
        let g = CandidateGenerator::new(&s, TrivialTokens::default(), options);
        let set = g.generate(&toponym("Aleppo"));
        assert_eq!(set.len(), 1);
        assert_eq!(set.candidates[0].origin, MatchOrigin::ExactMatch);
        assert_eq!(set.candidates[0].search_score, None);

        let set = g.generate(&toponym("Kwara"));
        assert_eq!(ids(&set.candidates), vec![2335196]);

        let empty = g.generate(&toponym("—"));
        assert!(empty.is_empty());
    }

    #[test]
    fn search_catches_punctuated_forms() {
        let s = fixture();
        let exact_only = CandidateGenerator::new(&s, TrivialTokens::default(), CandidateOptions::default());
        assert!(exact_only.generate(&toponym("Kwara(1")).is_empty());
        let with_search = CandidateGenerator::new(
            &s,
            TrivialTokens::default(),
            CandidateOptions {
                use_search: true,
                ..Default::default()
            },
        );
        let set = with_search.generate(&toponym("Kwara(1"));
        assert_eq!(ids(&set.candidates), vec![2335196]);
        assert_eq!(set.candidates[0].origin, MatchOrigin::SearchMatch);
    }

    #[test]
    fn fallback_only_skips_search_after_exact_hit() {
        let s = fixture();
        let options = CandidateOptions {
            use_search: true,
            search_fallback_only: true,
            ..Default::default()
        };
        let g = CandidateGenerator::new(&s, TrivialTokens::default(), options);
        let set = g.generate(&toponym("Tripoli"));
        assert!(set.candidates.iter().all(|c| c.origin == MatchOrigin::ExactMatch));
    }

    #[test]
    fn merging_twice_is_idempotent_and_deterministic() {
        let s = fixture();
        let options = CandidateOptions {
            use_search: true,
            ..Default::default()
        };
        let g = CandidateGenerator::new(&s, TrivialTokens::default(), options);
        let t = toponym("Tripoli airport");
        let once = g.generate(&t);
        let mut twice = g.generate(&t);
        twice.merge(g.generate(&t).candidates);
        assert_eq!(once, twice);
        assert_eq!(once, g.generate(&t));
    }

    /// Brute force: enumerate every consecutive run of the query, every
    /// indexed name, and check that the returned runs are exactly the
    /// longest non-trivial runs that occur in some name.
    #[test]
    fn longest_match_is_maximal() {
        let s = fixture();
        let trivial = TrivialTokens::default();
        let g = CandidateGenerator::new(&s, trivial.clone(), CandidateOptions::default());
        let names: Vec<(u64, Vec<String>)> = s
            .entries()
            .flat_map(|e| {
                e.index_names()
                    .into_iter()
                    .map(move |n| (e.geoname_id, n.split(' ').map(str::to_string).collect()))
            })
            .collect();
        let queries = [
            "aden", "gulf of aden", "north darfur state", "tripoli airport", "aleppo city",
            "tripoli international airport road", "north", "kwara state", "the gulf",
        ];
        for q in queries {
            let words: Vec<&str> = q.split(' ').collect();
            let mut possible: Vec<(usize, String, u64)> = Vec::new();
            for i in 0..words.len() {
                for j in i + 1..=words.len() {
                    let run = &words[i..j];
                    let text = run.join(" ");
                    if trivial.is_trivial(&text) {
                        continue;
                    }
                    for (id, name) in &names {
                        if name.windows(run.len()).any(|w| w.iter().zip(run).all(|(a, b)| a == b)) {
                            possible.push((run.len(), text.clone(), *id));
                        }
                    }
                }
            }
            let best = possible.iter().map(|p| p.0).max().unwrap_or(0);
            let mut expected: Vec<u64> =
                possible.iter().filter(|p| p.0 == best).map(|p| p.2).collect();
            expected.sort();
            expected.dedup();
            let got = g.exact_match_candidates(q);
            assert_eq!(ids(&got), expected, "query {q}");
            for c in &got {
                assert!(!possible
                    .iter()
                    .any(|p| p.0 > c.matched.split(' ').count() && p.1.contains(&c.matched)));
            }
        }
    }
}
