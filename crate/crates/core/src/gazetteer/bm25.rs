//! BM25F over two fields: the primary/ASCII name and the alternate names.
//!
//! ```text
//! tf~(t, d)   = Σ_f  w_f · tf_f(t, d) / ((1 - b) + b · len_f(d) / avglen_f)
//! score(q, d) = Σ_t  idf(t) · tf~(t, d) · (k1 + 1) / (k1 + tf~(t, d))
//! idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::GazetteerEntry;
use crate::normalizer::standardize_text;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub name_weight: f64,
    pub alternate_weight: f64,
    /// Require every known query term to occur in a hit. Terms absent from
    /// the whole index are ignored either way.
    pub match_all_terms: bool,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            name_weight: 1.0,
            alternate_weight: 1.0,
            match_all_terms: true,
        }
    }
}

/// Search tokens: standardized text split on anything not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    standardize_text(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Posting {
    doc: u32,
    name_tf: u32,
    alternate_tf: u32,
}

#[derive(Debug, Clone, Default)]
pub struct TextIndex {
    params: Bm25Params,
    /// Dense doc number → geoname id, ascending.
    doc_ids: Vec<u64>,
    name_len: Vec<u32>,
    alternate_len: Vec<u32>,
    avg_name_len: f64,
    avg_alternate_len: f64,
    postings: HashMap<String, Vec<Posting>>,
}

impl TextIndex {
    pub fn build<'a>(entries: impl IntoIterator<Item = &'a GazetteerEntry>, params: Bm25Params) -> Self {
        let mut index = TextIndex {
            params,
            ..Default::default()
        };
        let mut tfs: HashMap<String, (u32, u32)> = HashMap::new();
        for entry in entries {
            let doc = index.doc_ids.len() as u32;
            index.doc_ids.push(entry.geoname_id);

            let name_forms: Vec<String> = [&entry.name, &entry.ascii_name]
                .into_iter()
                .map(|s| standardize_text(s))
                .filter(|s| !s.is_empty())
                .fold(Vec::new(), |mut acc, s| {
                    if !acc.contains(&s) {
                        acc.push(s);
                    }
                    acc
                });
            let mut alternate_forms: Vec<String> = Vec::new();
            for alt in &entry.alternate_names {
                let form = standardize_text(alt);
                if !form.is_empty() && !name_forms.contains(&form) && !alternate_forms.contains(&form) {
                    alternate_forms.push(form);
                }
            }

            tfs.clear();
            let mut name_len = 0u32;
            for token in name_forms.iter().flat_map(|f| tokenize(f)) {
                tfs.entry(token).or_default().0 += 1;
                name_len += 1;
            }
            let mut alternate_len = 0u32;
            for token in alternate_forms.iter().flat_map(|f| tokenize(f)) {
                tfs.entry(token).or_default().1 += 1;
                alternate_len += 1;
            }
            index.name_len.push(name_len);
            index.alternate_len.push(alternate_len);
            for (token, (name_tf, alternate_tf)) in tfs.drain() {
                index.postings.entry(token).or_default().push(Posting {
                    doc,
                    name_tf,
                    alternate_tf,
                });
            }
        }
        let n = index.doc_ids.len().max(1) as f64;
        index.avg_name_len = index.name_len.iter().map(|&l| l as f64).sum::<f64>() / n;
        index.avg_alternate_len = index.alternate_len.iter().map(|&l| l as f64).sum::<f64>() / n;
        for list in index.postings.values_mut() {
            list.sort_unstable_by_key(|p| p.doc);
        }
        index
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_ids.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn length_norm(&self, len: u32, avg: f64) -> f64 {
        if avg <= 0.0 {
            return 1.0;
        }
        (1.0 - self.params.b) + self.params.b * len as f64 / avg
    }

    /// Top `top_k` entries for `query` as `(geoname_id, score)`, best first.
    /// Equal scores are ordered by ascending geoname id.
    pub fn search(&self, query: &str, top_k: usize) -> Vec<(u64, f64)> {
        if top_k == 0 {
            return Vec::new();
        }
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        let lists: Vec<&Vec<Posting>> = terms.iter().filter_map(|t| self.postings.get(t)).collect();
        if lists.is_empty() {
            return Vec::new();
        }

        let p = &self.params;
        let mut scores: HashMap<u32, (f64, usize)> = HashMap::new();
        for list in &lists {
            let idf = self.idf(list.len());
            for posting in list.iter() {
                let d = posting.doc as usize;
                let tf = p.name_weight * posting.name_tf as f64
                    / self.length_norm(self.name_len[d], self.avg_name_len)
                    + p.alternate_weight * posting.alternate_tf as f64
                        / self.length_norm(self.alternate_len[d], self.avg_alternate_len);
                let slot = scores.entry(posting.doc).or_insert((0.0, 0));
                slot.0 += idf * tf * (p.k1 + 1.0) / (p.k1 + tf);
                slot.1 += 1;
            }
        }

        let mut hits: Vec<(u64, f64)> = scores
            .into_iter()
            .filter(|(_, (score, matched))| {
                *score > 0.0 && (!p.match_all_terms || *matched == lists.len())
            })
            .map(|(doc, (score, _))| (self.doc_ids[doc as usize], score))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(top_k);
        hits
    }
}
