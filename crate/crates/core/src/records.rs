//! Line-delimited JSON records exchanged between commands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gazetteer::GazetteerStore;
use crate::resolution::{Method, RankEntry, Resolution};
use crate::span::Span;

pub const SCHEMA_VERSION: u32 = 1;

/// One geocoded toponym mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub schema_version: u32,
    pub doc_id: String,
    pub raw: String,
    pub start: usize,
    pub end: usize,
    pub normalized: Vec<String>,
    pub method: Method,
    pub chosen: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_code: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rank_trace: Vec<RankEntry>,
}

impl ResolutionRecord {
    pub fn new(resolution: &Resolution, method: Method, store: &GazetteerStore) -> Result<Self> {
        let entry = match resolution.chosen {
            Some(id) => Some(store.get(id).ok_or(Error::UnknownGeonameId(id))?),
            None => None,
        };
        let t = &resolution.toponym;
        Ok(ResolutionRecord {
            schema_version: SCHEMA_VERSION,
            doc_id: t.doc_id.clone(),
            raw: t.raw.clone(),
            start: t.span.start,
            end: t.span.end,
            normalized: t.normalized.clone(),
            method,
            chosen: resolution.chosen,
            name: entry.map(|e| e.name.clone()),
            latitude: entry.map(|e| e.latitude),
            longitude: entry.map(|e| e.longitude),
            country_code: entry.map(|e| e.country_code.clone()),
            feature_code: entry.map(|e| e.feature_code.clone()),
            rank_trace: resolution.rank_trace.clone(),
        })
    }

    pub fn span(&self) -> Result<Span> {
        Span::new(self.start, self.end)
    }
}

/// Toponym annotation produced by a geotagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanLabel {
    Literal,
    Associative,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanRecord {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SpanLabel>,
}

impl SpanRecord {
    pub fn span(&self) -> Result<Span> {
        Span::new(self.start, self.end)
    }
}

/// A document body, for inputs that carry text alongside spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub text: String,
}

/// Parse JSON lines from `reader`. Blank lines are skipped; the first bad
/// line is an error.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead, origin: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn write_jsonl<T: Serialize>(writer: impl Write, records: &[T]) -> std::io::Result<()> {
    let mut out = BufWriter::new(writer);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(file, records).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::test_support::{entry, store};
    use crate::normalizer::Normalizer;

    #[test]
    fn resolution_record_round_trip() {
        let s = store(vec![entry(71137, "Sanaa", &[], 15.35472, 44.20667, "PPLC", "YE", 1)]);
        let t = Normalizer::default().normalize_toponym("d1", "Sana'a", Span::new(3, 9).unwrap());
        let res = Resolution {
            toponym: t.clone(),
            chosen: Some(71137),
            rank_trace: Vec::new(),
        };
        let rec = ResolutionRecord::new(&res, Method::FeatureRank, &s).unwrap();
        assert_eq!(rec.country_code.as_deref(), Some("YE"));
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.starts_with("{\"schema_version\":1,"));
        assert!(line.contains("\"method\":\"FeatureRank\""));
        let back: Vec<ResolutionRecord> = read_jsonl(&buf[..], "mem").unwrap();
        assert_eq!(back, vec![rec]);

        let none = ResolutionRecord::new(&Resolution::no_match(t.clone()), Method::Chen, &s).unwrap();
        assert_eq!(none.latitude, None);
        let bad = Resolution {
            toponym: t,
            chosen: Some(5),
            rank_trace: Vec::new(),
        };
        assert!(matches!(
            ResolutionRecord::new(&bad, Method::Bm, &s),
            Err(Error::UnknownGeonameId(5))
        ));
    }

    #[test]
    fn span_records_parse_with_and_without_label() {
        let input = "{\"doc_id\":\"a\",\"start\":0,\"end\":5,\"text\":\"Syria\",\"label\":\"literal\"}\n\n{\"doc_id\":\"a\",\"start\":7,\"end\":11,\"text\":\"Aden\"}\n";
        let recs: Vec<SpanRecord> = read_jsonl(input.as_bytes(), "mem").unwrap();
        assert_eq!(recs[0].label, Some(SpanLabel::Literal));
        assert_eq!(recs[1].label, None);
        let err = read_jsonl::<SpanRecord>("{\"doc_id\":1}".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
