//! Toponym preprocessing.
//!
//! Raw toponym strings are split into individual locations, coordinated
//! modifiers are distributed over their shared head, "X of Y" possessives are
//! rephrased, and finally every piece is standardized into the form used by
//! the gazetteer indexes.
//!
//! The rule vocabularies (place-kind words, distributable head nouns,
//! modifiers, irregular plurals, names that contain a literal "and") are data,
//! loaded from a TOML file. [`NormalizerConfig::default`] embeds the shipped
//! `data/normalizer.toml`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::span::Span;

const DEFAULT_CONFIG: &str = include_str!("../data/normalizer.toml");

/// A toponym mention and its geocodable forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toponym {
    pub doc_id: String,
    pub raw: String,
    pub span: Span,
    /// One standardized string per split-out location. Empty when nothing
    /// survived standardization.
    pub normalized: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizerConfig {
    pub place_kinds: Vec<String>,
    pub head_nouns: Vec<String>,
    pub modifiers: Vec<String>,
    #[serde(default)]
    pub unsplittable: Vec<String>,
    #[serde(default)]
    pub irregular_plurals: BTreeMap<String, String>,
}

impl NormalizerConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG, "data/normalizer.toml")
            .expect("embedded normalizer config is valid")
    }
}

/// Standardize text for matching: compatibility decomposition with
/// diacritics folded away, lowercase, dashes turned into spaces, apostrophes
/// dropped, whitespace collapsed and trimmed.
///
/// The result is a fixed point: `standardize_text(&standardize_text(s)) ==
/// standardize_text(s)`.
pub fn standardize_text(s: &str) -> String {
    let mut current = standardize_pass(s);
    // Lowercasing can reintroduce decomposable characters (e.g. U+0130), so
    // iterate until stable.
    for _ in 0..8 {
        let next = standardize_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn standardize_pass(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.nfkd() {
        if is_combining_mark(c) {
            continue;
        }
        for lc in c.to_lowercase() {
            if is_apostrophe(lc) || lc == '\u{00AD}' {
                continue;
            }
            if is_dash(lc) || lc.is_whitespace() || lc.is_control() {
                out.push(' ');
            } else {
                out.push(lc);
            }
        }
    }
    let mut collapsed = String::with_capacity(out.len());
    for word in out.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    collapsed
}

fn is_dash(c: char) -> bool {
    matches!(
        c,
        '-' | '\u{058A}'
            | '\u{05BE}'
            | '\u{1400}'
            | '\u{1806}'
            | '\u{2010}'..='\u{2015}'
            | '\u{2043}'
            | '\u{2212}'
            | '\u{2E17}'
            | '\u{2E1A}'
            | '\u{2E3A}'
            | '\u{2E3B}'
            | '\u{2E40}'
            | '\u{301C}'
            | '\u{3030}'
            | '\u{30A0}'
            | '\u{FE31}'
            | '\u{FE32}'
            | '\u{FE58}'
            | '\u{FE63}'
            | '\u{FF0D}'
    )
}

fn is_apostrophe(c: char) -> bool {
    matches!(
        c,
        '\'' | '`'
            | '\u{02B9}'
            | '\u{02BB}'
            | '\u{02BC}'
            | '\u{02BD}'
            | '\u{02BE}'
            | '\u{02BF}'
            | '\u{2018}'
            | '\u{2019}'
            | '\u{201B}'
            | '\u{2032}'
            | '\u{FF07}'
    )
}

/// Lowercased word with surrounding punctuation stripped, used for all
/// vocabulary lookups.
fn word_key(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric() && c != '-')
        .to_lowercase()
}

/// Re-apply the capitalization of `original` to `replacement`.
fn recase(original: &str, replacement: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return replacement.to_uppercase();
    }
    match original.chars().next() {
        Some(first) if first.is_uppercase() => {
            let mut chars = replacement.chars();
            match chars.next() {
                Some(head) => head.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
        _ => replacement.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Normalizer {
    place_kinds: HashSet<String>,
    head_nouns: HashSet<String>,
    modifiers: HashSet<String>,
    unsplittable: Vec<Vec<String>>,
    irregular_plurals: HashMap<String, String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::new(&NormalizerConfig::default())
    }
}

impl Normalizer {
    pub fn new(config: &NormalizerConfig) -> Self {
        let lower = |v: &[String]| v.iter().map(|s| s.to_lowercase()).collect::<HashSet<_>>();
        Normalizer {
            place_kinds: lower(&config.place_kinds),
            head_nouns: lower(&config.head_nouns),
            modifiers: lower(&config.modifiers),
            unsplittable: config
                .unsplittable
                .iter()
                .map(|p| p.split_whitespace().map(word_key).collect())
                .collect(),
            irregular_plurals: config
                .irregular_plurals
                .iter()
                .map(|(k, v)| (k.to_lowercase(), v.to_lowercase()))
                .collect(),
        }
    }

    /// Singular form of a lowercase word. Words that are not plural come back
    /// unchanged.
    pub fn singularize(&self, word: &str) -> String {
        if let Some(s) = self.irregular_plurals.get(word) {
            return s.clone();
        }
        let n = word.chars().count();
        if n > 4 && word.ends_with("ies") {
            return format!("{}y", &word[..word.len() - 3]);
        }
        for suffix in ["ches", "shes", "sses", "xes", "zes"] {
            if n > suffix.len() + 1 && word.ends_with(suffix) {
                return word[..word.len() - 2].to_string();
            }
        }
        if n > 3 && word.ends_with('s') && !word.ends_with("ss") {
            return word[..word.len() - 1].to_string();
        }
        word.to_string()
    }

    fn is_modifier(&self, word: &str) -> bool {
        self.modifiers.contains(&word_key(word))
    }

    /// Singular, recased form of `word` if it is the plural of a
    /// distributable head noun.
    fn plural_head(&self, word: &str) -> Option<String> {
        let key = word_key(word);
        let singular = self.singularize(&key);
        if singular != key && self.head_nouns.contains(&singular) {
            Some(recase(word, &singular))
        } else {
            None
        }
    }

    /// Break `raw` into list members: split on commas/semicolons and on the
    /// conjunctions "and" / "&", except where the conjunction belongs to a
    /// configured unsplittable name.
    fn conjuncts<'a>(&self, raw: &'a str) -> Vec<Vec<&'a str>> {
        let mut groups = Vec::new();
        for part in raw.split([',', ';']) {
            let words: Vec<&str> = part.split_whitespace().collect();
            let keys: Vec<String> = words.iter().map(|w| word_key(w)).collect();
            let mut protected = vec![false; words.len()];
            for phrase in &self.unsplittable {
                if phrase.is_empty() || phrase.len() > keys.len() {
                    continue;
                }
                for start in 0..=keys.len() - phrase.len() {
                    if keys[start..start + phrase.len()] == phrase[..] {
                        protected[start..start + phrase.len()].fill(true);
                    }
                }
            }
            let mut current = Vec::new();
            for (i, word) in words.iter().enumerate() {
                let conj = !protected[i] && (*word == "&" || keys[i] == "and");
                if conj {
                    if !current.is_empty() {
                        groups.push(std::mem::take(&mut current));
                    }
                } else {
                    current.push(*word);
                }
            }
            if !current.is_empty() {
                groups.push(current);
            }
        }
        groups
    }

    /// `North and South Italy`: every member but the last is a lone modifier,
    /// and the last is a modifier followed by the shared head.
    fn is_modifier_coordination(&self, groups: &[Vec<&str>]) -> bool {
        let Some((last, init)) = groups.split_last() else {
            return false;
        };
        !init.is_empty()
            && init.iter().all(|g| g.len() == 1 && self.is_modifier(g[0]))
            && last.len() >= 2
            && self.is_modifier(last[0])
    }

    /// Split a coordinated list of locations into its members, distributing a
    /// trailing plural head noun ("Al Hudaydah and Taizz governorates") in
    /// singular form to every member.
    ///
    /// Coordinated modifiers over one head ("North and South Italy") are left
    /// intact for [`Normalizer::distribute_modifiers`].
    pub fn split_toponym_list(&self, raw: &str) -> Vec<String> {
        let trimmed = raw.trim();
        let groups = self.conjuncts(trimmed);
        if groups.len() < 2 || self.is_modifier_coordination(&groups) {
            return vec![trimmed.to_string()];
        }
        let mut pieces: Vec<Vec<String>> = groups
            .iter()
            .map(|g| g.iter().map(|w| w.to_string()).collect())
            .collect();

        let last = pieces.last().expect("at least two groups");
        let head = if last.len() >= 2 {
            self.plural_head(last.last().expect("non-empty group"))
        } else {
            None
        };
        if let Some(head) = head {
            let head_key = word_key(&head);
            let n = pieces.len();
            for (i, piece) in pieces.iter_mut().enumerate() {
                if i == n - 1 {
                    *piece.last_mut().expect("non-empty group") = head.clone();
                } else {
                    let has_head = piece
                        .last()
                        .map(|w| self.singularize(&word_key(w)) == head_key)
                        .unwrap_or(false);
                    if !has_head {
                        piece.push(head.clone());
                    }
                }
            }
        }
        pieces.into_iter().map(|p| p.join(" ")).collect()
    }

    /// Distribute coordinated modifiers over their shared head:
    /// "East, West and Central Darfur" becomes one string per modifier.
    pub fn distribute_modifiers(&self, raw: &str) -> Vec<String> {
        let trimmed = raw.trim();
        let groups = self.conjuncts(trimmed);
        if groups.len() < 2 || !self.is_modifier_coordination(&groups) {
            return vec![trimmed.to_string()];
        }
        let (last, init) = groups.split_last().expect("checked above");
        let mut head: Vec<String> = last[1..].iter().map(|w| w.to_string()).collect();
        if head.len() >= 2 {
            if let Some(singular) = self.plural_head(head.last().expect("non-empty")) {
                *head.last_mut().expect("non-empty") = singular;
            }
        }
        let head = head.join(" ");
        init.iter()
            .map(|g| g[0])
            .chain(std::iter::once(last[0]))
            .map(|modifier| format!("{modifier} {head}"))
            .collect()
    }

    /// Rewrite "X of Y" as "Y X" when X is a generic place-kind word
    /// ("City of New York" → "New York City"). Anything else is returned
    /// unchanged.
    pub fn rephrase_possessive(&self, raw: &str) -> String {
        let trimmed = raw.trim();
        let mut words: Vec<&str> = trimmed.split_whitespace().collect();
        if words.first().map(|w| word_key(w) == "the").unwrap_or(false) {
            words.remove(0);
        }
        if words.len() < 3
            || !self.place_kinds.contains(&word_key(words[0]))
            || word_key(words[1]) != "of"
        {
            return trimmed.to_string();
        }
        let mut rest = &words[2..];
        if rest.len() > 1 && word_key(rest[0]) == "the" {
            rest = &rest[1..];
        }
        format!("{} {}", rest.join(" "), words[0])
    }

    /// Full preprocessing: split, distribute, rephrase, standardize. Pieces
    /// that standardize to nothing are dropped, duplicates collapsed.
    pub fn normalize_toponym(&self, doc_id: &str, raw: &str, span: Span) -> Toponym {
        let mut normalized: Vec<String> = Vec::new();
        for piece in self.split_toponym_list(raw) {
            for member in self.distribute_modifiers(&piece) {
                let clean = standardize_text(&self.rephrase_possessive(&member));
                if !clean.is_empty() && !normalized.contains(&clean) {
                    normalized.push(clean);
                }
            }
        }
        Toponym {
            doc_id: doc_id.to_string(),
            raw: raw.to_string(),
            span,
            normalized,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm() -> Normalizer {
        Normalizer::default()
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize_text("Al-Hudaydah"), "al hudaydah");
        assert_eq!(standardize_text("N'Djamena"), "ndjamena");
        assert_eq!(standardize_text("paris"), "paris");
        assert_eq!(standardize_text("  Ḩaḑramawt\tGovernorate "), "hadramawt governorate");
        assert_eq!(standardize_text("Sana’a"), "sanaa");
        assert_eq!(standardize_text("—"), "");
        assert_eq!(standardize_text("İzmir"), "izmir");
    }

    #[test]
    fn split_examples() {
        let n = norm();
        assert_eq!(
            n.split_toponym_list("Al Hudaydah and Taizz governorates"),
            vec!["Al Hudaydah governorate", "Taizz governorate"]
        );
        assert_eq!(n.split_toponym_list("Aleppo"), vec!["Aleppo"]);
        assert_eq!(
            n.split_toponym_list("Plateau, Taraba, Gombe"),
            vec!["Plateau", "Taraba", "Gombe"]
        );
        assert_eq!(
            n.split_toponym_list("At Tuhayat and Zabid districts"),
            vec!["At Tuhayat district", "Zabid district"]
        );
        assert_eq!(
            n.split_toponym_list("Trinidad and Tobago"),
            vec!["Trinidad and Tobago"]
        );
        assert_eq!(
            n.split_toponym_list("North and South Italy"),
            vec!["North and South Italy"]
        );
    }

    #[test]
    fn split_keeps_existing_head() {
        assert_eq!(
            norm().split_toponym_list("Aden governorate and Lahj governorates"),
            vec!["Aden governorate", "Lahj governorate"]
        );
    }

    #[test]
    fn distribute_examples() {
        let n = norm();
        assert_eq!(
            n.distribute_modifiers("North and South Italy"),
            vec!["North Italy", "South Italy"]
        );
        assert_eq!(n.distribute_modifiers("Western Yemen"), vec!["Western Yemen"]);
        assert_eq!(
            n.distribute_modifiers("East, West and Central Darfur"),
            vec!["East Darfur", "West Darfur", "Central Darfur"]
        );
        assert_eq!(
            n.distribute_modifiers("North and South Kordofan states"),
            vec!["North Kordofan state", "South Kordofan state"]
        );
    }

    #[test]
    fn possessive_examples() {
        let n = norm();
        assert_eq!(n.rephrase_possessive("City of New York"), "New York City");
        assert_eq!(n.rephrase_possessive("Republic of Korea"), "Korea Republic");
        assert_eq!(n.rephrase_possessive("Horn of Africa"), "Horn of Africa");
        assert_eq!(n.rephrase_possessive("Republic of the Sudan"), "Sudan Republic");
        assert_eq!(
            n.rephrase_possessive("Democratic Republic of the Congo"),
            "Democratic Republic of the Congo"
        );
    }

    #[test]
    fn normalize_examples() {
        let n = norm();
        let span = Span::new(10, 30).unwrap();
        let t = n.normalize_toponym("d1", "North and South Italy", span);
        assert_eq!(t.normalized, vec!["north italy", "south italy"]);
        assert_eq!(t.span, span);
        assert_eq!(t.doc_id, "d1");

        let t = n.normalize_toponym("d1", "Aden", Span::new(0, 4).unwrap());
        assert_eq!(t.normalized, vec!["aden"]);

        let t = n.normalize_toponym("d1", "—", Span::new(0, 1).unwrap());
        assert!(t.normalized.is_empty());

        let t = n.normalize_toponym("d1", "City of New York", Span::new(0, 16).unwrap());
        assert_eq!(t.normalized, vec!["new york city"]);
    }

    #[test]
    fn singular_rules() {
        let n = norm();
        assert_eq!(n.singularize("governorates"), "governorate");
        assert_eq!(n.singularize("cities"), "city");
        assert_eq!(n.singularize("marshes"), "marsh");
        assert_eq!(n.singularize("provinces"), "province");
        assert_eq!(n.singularize("wilayat"), "wilaya");
        assert_eq!(n.singularize("pass"), "pass");
    }

    #[test]
    fn config_loads_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.toml");
        std::fs::write(
            &path,
            "place_kinds=[\"fort\"]\nhead_nouns=[]\nmodifiers=[]\n",
        )
        .unwrap();
        let n = Normalizer::new(&NormalizerConfig::load(&path).unwrap());
        assert_eq!(n.rephrase_possessive("Fort of Ghazni"), "Ghazni Fort");
        assert_eq!(n.rephrase_possessive("City of Ghazni"), "City of Ghazni");
        assert!(NormalizerConfig::from_toml_str("place_kinds = 3", "x").is_err());
    }

    fn content_words(n: &Normalizer, pieces: &[String]) -> std::collections::BTreeSet<String> {
        pieces
            .iter()
            .flat_map(|p| p.split_whitespace())
            .map(word_key)
            .filter(|w| !w.is_empty() && w != "and")
            .map(|w| n.singularize(&w))
            .collect()
    }

    const NAMES: &[&str] = &["Taizz", "Aden", "Lahj", "Marib", "Abyan", "Hajjah", "Ibb", "Sool"];
    const HEADS: &[&str] = &["districts", "governorates", "provinces", "regions", "cities"];
    const MODS: &[&str] = &["North", "South", "East", "West", "Central", "Upper"];

    proptest! {
        #[test]
        fn standardize_is_idempotent(s in any::<String>()) {
            let once = standardize_text(&s);
            prop_assert_eq!(standardize_text(&once), once);
        }

        #[test]
        fn list_split_preserves_content_words(
            names in proptest::sample::subsequence(NAMES.to_vec(), 2..6),
            head in proptest::option::of(proptest::sample::select(HEADS.to_vec())),
            commas in any::<bool>(),
        ) {
            let n = norm();
            let mut raw = if commas {
                let (last, init) = names.split_last().unwrap();
                format!("{} and {}", init.join(", "), last)
            } else {
                names.join(" and ")
            };
            if let Some(h) = head {
                raw.push(' ');
                raw.push_str(h);
            }
            let pieces = n.split_toponym_list(&raw);
            prop_assert_eq!(pieces.len(), names.len());
            prop_assert_eq!(content_words(&n, &pieces), content_words(&n, std::slice::from_ref(&raw)));
            let t = n.normalize_toponym("d", &raw, Span::new(0, 1).unwrap());
            prop_assert!(t.normalized.len() >= names.len());
        }

        #[test]
        fn modifier_distribution_preserves_content_words(
            mods in proptest::sample::subsequence(MODS.to_vec(), 2..5),
            name in proptest::sample::select(NAMES.to_vec()),
        ) {
            let n = norm();
            let (last, init) = mods.split_last().unwrap();
            let raw = format!("{} and {} {}", init.join(", "), last, name);
            let pieces: Vec<String> = n
                .split_toponym_list(&raw)
                .iter()
                .flat_map(|p| n.distribute_modifiers(p))
                .collect();
            prop_assert_eq!(pieces.len(), mods.len());
            prop_assert_eq!(content_words(&n, &pieces), content_words(&n, std::slice::from_ref(&raw)));
        }
    }
}
