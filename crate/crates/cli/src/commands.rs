use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use humgeo::baselines::{BmGeocoder, ChenGeocoder};
use humgeo::eval::{
    country_audit, gold_key, load_gold, merge_spans as merge_span_sets, render_audit, render_geocoding_table,
    score_corpus, score_geocoding, GeocodingReport, HdiTable, MatchMode, SpanSet,
};
use humgeo::feature_rank::{FeatureRank, RankMode};
use humgeo::gazetteer::{dump_checksum, load_gazetteer, Bm25Params, CacheKey, GazetteerStore};
use humgeo::records::{
    read_jsonl_file, write_jsonl_file, DocumentRecord, ResolutionRecord, SpanLabel, SpanRecord, SCHEMA_VERSION,
};
use humgeo::{Geocoder, Method, Span, Toponym};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::EngineConfig;

/// Highest character offset kept by `--truncate-4000`.
const TRUNCATE_CHARS: usize = 4000;

/// A required input file is missing; reported with exit code 2.
#[derive(Debug)]
pub struct MissingInput(pub String);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for MissingInput {}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(MissingInput(format!("{what} {} not found", path.display())).into())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

fn labelled(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let label = path
                .file_stem()
                .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            (label, path)
        }
    }
}

fn load_store(cfg: &EngineConfig) -> Result<GazetteerStore> {
    let path = cfg.cache_path()?;
    require(path, "store cache")?;
    let (store, key) = GazetteerStore::read_cache(path, None, Bm25Params::default())
        .with_context(|| format!("cannot load {}", path.display()))?;
    if key.allowlist != cfg.allowlist()? {
        bail!(
            "cache {} was built with a different allowlist; run build-index again",
            path.display()
        );
    }
    Ok(store)
}

#[derive(Serialize)]
struct BuildSummary<'a> {
    schema_version: u32,
    entries: usize,
    checksum: &'a str,
    report: &'a humgeo::gazetteer::LoadReport,
}

pub fn build_index(cfg: &EngineConfig, output: Option<PathBuf>, report_path: Option<PathBuf>) -> Result<()> {
    let main = cfg
        .gazetteer
        .main_dump
        .as_deref()
        .ok_or_else(|| MissingInput("no gazetteer.main_dump configured".into()))?;
    require(main, "gazetteer dump")?;
    let alt = cfg.gazetteer.alternate_names.as_deref();
    if let Some(alt) = alt {
        require(alt, "alternate-names dump")?;
    }
    let out = match output {
        Some(p) => p,
        None => cfg.cache_path()?.to_path_buf(),
    };
    let codes = cfg.code_classes()?;
    let allowlist = cfg.allowlist()?;
    let (store, report) = load_gazetteer(main, alt, &allowlist, &codes, Bm25Params::default())?;
    let key = CacheKey {
        allowlist,
        checksum: dump_checksum(main, alt, &codes)?,
    };
    store.write_cache(&out, &key)?;

    println!("entries\t{}", store.len());
    for (class, n) in &report.per_class {
        println!("{class}\t{n}");
    }
    println!("filtered\t{}", report.filtered);
    println!("malformed\t{}", report.malformed);
    if let Some(path) = report_path {
        write_json(
            &path,
            &BuildSummary {
                schema_version: SCHEMA_VERSION,
                entries: store.len(),
                checksum: &key.checksum,
                report: &report,
            },
        )?;
    }
    info!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Default, Serialize)]
struct GeocodeSummary {
    schema_version: u32,
    method: String,
    documents: usize,
    toponyms: usize,
    matched: usize,
    unmatched: usize,
    truncated_spans: usize,
    skipped_lines: usize,
    skipped_documents: Vec<String>,
}

/// Documents in id order, each with its spans in input order.
type Docs = BTreeMap<String, Vec<(Span, String)>>;

fn read_span_input(path: &Path, summary: &mut GeocodeSummary) -> Result<Docs> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("cannot read {}", path.display()))?);
    let mut docs: Docs = BTreeMap::new();
    let mut failed: BTreeSet<String> = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<SpanRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.span().map(|s| (s, r)).map_err(|e| e.to_string()));
        match parsed {
            Ok((span, record)) => docs.entry(record.doc_id).or_default().push((span, record.text)),
            Err(message) => {
                let doc = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("doc_id").and_then(|d| d.as_str()).map(str::to_string));
                warn!("{}:{}: {message}", path.display(), i + 1);
                match doc {
                    Some(doc) => {
                        failed.insert(doc);
                    }
                    None => summary.skipped_lines += 1,
                }
            }
        }
    }
    for doc in &failed {
        docs.remove(doc);
    }
    summary.skipped_documents = failed.into_iter().collect();
    Ok(docs)
}

fn read_toponym_list(path: &Path) -> Result<Docs> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut docs: Docs = BTreeMap::new();
    let mut offsets: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines() {
        let (doc, name) = match line.split_once('\t') {
            Some((d, n)) => (d.trim(), n.trim()),
            None => ("0", line.trim()),
        };
        if name.is_empty() {
            continue;
        }
        let offset = offsets.entry(doc.to_string()).or_insert(0);
        let len = name.chars().count();
        let span = Span::new(*offset, *offset + len)?;
        *offset += len + 1;
        docs.entry(doc.to_string()).or_default().push((span, name.to_string()));
    }
    Ok(docs)
}

fn make_geocoder<'s>(cfg: &EngineConfig, store: &'s GazetteerStore) -> Result<Box<dyn Geocoder + 's>> {
    let trivial = cfg.trivial()?;
    let options = cfg.candidate_options();
    Ok(match cfg.method()? {
        Method::FeatureRank => Box::new(FeatureRank::new(store, trivial, RankMode::FeatureRank, options)),
        Method::SearchFeatureRank => {
            Box::new(FeatureRank::new(store, trivial, RankMode::SearchFeatureRank, options))
        }
        Method::Bm => Box::new(BmGeocoder::new(store, trivial, options)),
        Method::Chen => Box::new(ChenGeocoder::new(store, trivial, options, cfg.cluster_params()?)?),
    })
}

pub fn geocode(
    cfg: &EngineConfig,
    input: &Path,
    output: &Path,
    toponym_list: bool,
    truncate: bool,
    summary_path: Option<PathBuf>,
) -> Result<()> {
    require(input, "input")?;
    let store = load_store(cfg)?;
    let geocoder = make_geocoder(cfg, &store)?;
    let normalizer = cfg.normalizer()?;
    let method = geocoder.method();
    let mut summary = GeocodeSummary {
        schema_version: SCHEMA_VERSION,
        method: method.to_string(),
        ..GeocodeSummary::default()
    };

    let mut docs = if toponym_list {
        read_toponym_list(input)?
    } else {
        read_span_input(input, &mut summary)?
    };
    if truncate {
        for spans in docs.values_mut() {
            let before = spans.len();
            spans.retain(|(s, _)| s.end <= TRUNCATE_CHARS);
            summary.truncated_spans += before - spans.len();
        }
    }

    let docs: Vec<(String, Vec<Toponym>)> = docs
        .into_iter()
        .map(|(doc, spans)| {
            let toponyms = spans
                .iter()
                .map(|(span, raw)| normalizer.normalize_toponym(&doc, raw, *span))
                .collect();
            (doc, toponyms)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers()).build()?;
    let results: Vec<Result<Vec<ResolutionRecord>>> = pool.install(|| {
        docs.par_iter()
            .map(|(_, toponyms)| {
                geocoder
                    .geocode_document(toponyms)
                    .iter()
                    .map(|r| ResolutionRecord::new(r, method, &store).map_err(Into::into))
                    .collect()
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }

    summary.documents = docs.len();
    summary.toponyms = records.len();
    summary.matched = records.iter().filter(|r| r.chosen.is_some()).count();
    summary.unmatched = summary.toponyms - summary.matched;
    write_jsonl_file(output, &records)?;
    eprintln!(
        "{}: {} documents, {} toponyms, {} matched, {} unmatched, {} skipped documents, {} skipped lines",
        summary.method,
        summary.documents,
        summary.toponyms,
        summary.matched,
        summary.unmatched,
        summary.skipped_documents.len(),
        summary.skipped_lines
    );
    if let Some(path) = summary_path {
        write_json(&path, &summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluatedRun {
    label: String,
    key_mismatch: f64,
    report: GeocodingReport,
}

#[derive(Serialize)]
struct EvaluateOutput {
    schema_version: u32,
    runs: Vec<EvaluatedRun>,
}

pub fn evaluate(
    cfg: &EngineConfig,
    gold_path: &Path,
    predictions: &[String],
    output: Option<PathBuf>,
    max_key_mismatch: Option<f64>,
) -> Result<()> {
    require(gold_path, "gold file")?;
    let golds = load_gold(gold_path)?;
    let gold_keys: BTreeSet<(String, String)> = golds.iter().map(|g| g.key()).collect();
    let store = load_store(cfg)?;
    let limit = max_key_mismatch.unwrap_or(cfg.max_key_mismatch);

    let mut runs = Vec::new();
    for arg in predictions {
        let (label, path) = labelled(arg);
        require(&path, "predictions file")?;
        let records: Vec<ResolutionRecord> = read_jsonl_file(&path)?;
        let mut preds: BTreeMap<(String, String), Option<u64>> = BTreeMap::new();
        for r in &records {
            preds.entry(gold_key(&r.doc_id, &r.raw)).or_insert(r.chosen);
        }
        let unknown = preds.keys().filter(|k| !gold_keys.contains(*k)).count();
        let key_mismatch = if preds.is_empty() {
            0.0
        } else {
            unknown as f64 / preds.len() as f64
        };
        if key_mismatch > limit {
            bail!(
                "{label}: {unknown} of {} prediction keys are not in the gold file ({key_mismatch:.2} > {limit:.2})",
                preds.len()
            );
        }
        let report = score_geocoding(&golds, &preds, &store)?;
        runs.push(EvaluatedRun {
            label,
            key_mismatch,
            report,
        });
    }

    let table: Vec<(&str, &GeocodingReport)> = runs.iter().map(|r| (r.label.as_str(), &r.report)).collect();
    print!("{}", render_geocoding_table(&table));
    if let Some(path) = output {
        write_json(
            &path,
            &EvaluateOutput {
                schema_version: SCHEMA_VERSION,
                runs,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AuditOutput {
    schema_version: u32,
    #[serde(flatten)]
    report: humgeo::eval::AuditReport,
}

pub fn audit(run_args: &[String], hdi: Option<PathBuf>, output: Option<PathBuf>) -> Result<()> {
    let table = match hdi {
        Some(p) => {
            require(&p, "HDI table")?;
            HdiTable::load(&p)?
        }
        None => HdiTable::bundled(),
    };
    let mut runs = Vec::new();
    for arg in run_args {
        let (label, path) = labelled(arg);
        require(&path, "run file")?;
        runs.push((label, read_jsonl_file::<ResolutionRecord>(&path)?));
    }
    let report = country_audit(&runs, &table);
    print!("{}", render_audit(&report));
    if let Some(path) = output {
        write_json(
            &path,
            &AuditOutput {
                schema_version: SCHEMA_VERSION,
                report,
            },
        )?;
    }
    Ok(())
}

fn load_spans(path: &Path, label: Option<SpanLabel>) -> Result<BTreeMap<String, SpanSet>> {
    require(path, "span file")?;
    let records: Vec<SpanRecord> = read_jsonl_file(path)?;
    let mut sets = humgeo::eval::group_span_records(&records)?;
    if let Some(label) = label {
        for set in sets.values_mut() {
            *set = set.restrict(label);
        }
    }
    Ok(sets)
}

#[derive(Serialize)]
struct SpanScoresOutput {
    schema_version: u32,
    exact: humgeo::eval::GeotagScores,
    partial: humgeo::eval::GeotagScores,
}

pub fn score_spans(gold: &Path, pred: &Path, label: Option<SpanLabel>, output: Option<PathBuf>) -> Result<()> {
    let g = load_spans(gold, label)?;
    let p = load_spans(pred, label)?;
    let exact = score_corpus(&g, &p, MatchMode::Exact);
    let partial = score_corpus(&g, &p, MatchMode::Partial);
    println!("{:<8}{:>10}{:>10}{:>10}{:>10}", "mode", "agreement", "precision", "recall", "f1");
    for (name, s) in [("exact", &exact), ("partial", &partial)] {
        println!(
            "{name:<8}{:>10.3}{:>10.3}{:>10.3}{:>10.3}",
            s.agreement, s.precision, s.recall, s.f1
        );
    }
    if let Some(path) = output {
        write_json(
            &path,
            &SpanScoresOutput {
                schema_version: SCHEMA_VERSION,
                exact,
                partial,
            },
        )?;
    }
    Ok(())
}

pub fn merge_spans(a: &Path, b: &Path, documents: Option<PathBuf>, output: &Path) -> Result<()> {
    let sa = load_spans(a, None)?;
    let sb = load_spans(b, None)?;
    let texts: BTreeMap<String, String> = match documents {
        Some(path) => {
            require(&path, "documents file")?;
            read_jsonl_file::<DocumentRecord>(&path)?
                .into_iter()
                .map(|d| (d.doc_id, d.text))
                .collect()
        }
        None => BTreeMap::new(),
    };
    let mut ids: Vec<&String> = sa.keys().chain(sb.keys()).collect();
    ids.sort();
    ids.dedup();
    let mut records = Vec::new();
    for id in ids {
        let empty = SpanSet::new(id.clone());
        let merged = merge_span_sets(
            sa.get(id).unwrap_or(&empty),
            sb.get(id).unwrap_or(&empty),
            texts.get(id).map(String::as_str),
        );
        records.extend(merged.to_records());
    }
    write_jsonl_file(output, &records)?;
    Ok(())
}
