use std::collections::HashMap;

use super::GazetteerEntry;

/// Standardized name → geoname ids, plus word postings so that names
/// containing a given run of words can be found without a scan.
#[derive(Debug, Clone, Default)]
pub struct ExactIndex {
    /// Sorted, distinct standardized names.
    keys: Vec<String>,
    /// Word sequence of each key.
    key_words: Vec<Vec<String>>,
    /// Ascending geoname ids per key.
    ids: Vec<Vec<u64>>,
    /// Word → ascending key positions.
    postings: HashMap<String, Vec<u32>>,
}

impl ExactIndex {
    pub fn build<'a>(entries: impl IntoIterator<Item = &'a GazetteerEntry>) -> Self {
        let mut by_name: std::collections::BTreeMap<String, Vec<u64>> = Default::default();
        for entry in entries {
            for form in entry.index_names() {
                by_name.entry(form).or_default().push(entry.geoname_id);
            }
        }
        let mut index = ExactIndex::default();
        for (pos, (key, mut ids)) in by_name.into_iter().enumerate() {
            ids.sort_unstable();
            ids.dedup();
            let words: Vec<String> = key.split(' ').map(str::to_string).collect();
            for word in &words {
                let list = index.postings.entry(word.clone()).or_default();
                if list.last() != Some(&(pos as u32)) {
                    list.push(pos as u32);
                }
            }
            index.keys.push(key);
            index.key_words.push(words);
            index.ids.push(ids);
        }
        index
    }

    /// Ids indexed under exactly this standardized name.
    pub fn get(&self, name: &str) -> Option<&[u64]> {
        self.keys
            .binary_search_by(|k| k.as_str().cmp(name))
            .ok()
            .map(|pos| self.ids[pos].as_slice())
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.postings.contains_key(word)
    }

    /// Indexed names containing `words` as a consecutive run, with their ids,
    /// in name order.
    pub fn names_containing<'s>(&'s self, words: &[&str]) -> Vec<(&'s str, &'s [u64])> {
        if words.is_empty() {
            return Vec::new();
        }
        let mut rarest: Option<&Vec<u32>> = None;
        for word in words {
            match self.postings.get(*word) {
                None => return Vec::new(),
                Some(list) => {
                    if rarest.is_none_or(|r| list.len() < r.len()) {
                        rarest = Some(list);
                    }
                }
            }
        }
        rarest
            .into_iter()
            .flatten()
            .map(|&pos| pos as usize)
            .filter(|&pos| {
                self.key_words[pos]
                    .windows(words.len())
                    .any(|w| w.iter().zip(words).all(|(a, b)| a == b))
            })
            .map(|pos| (self.keys[pos].as_str(), self.ids[pos].as_slice()))
            .collect()
    }
}
