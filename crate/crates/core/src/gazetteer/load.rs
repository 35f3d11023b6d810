use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::Serialize;

use super::{Bm25Params, CodeClass, CodeClassMap, GazetteerEntry, GazetteerStore};
use crate::error::{Error, Result};

/// `isolanguage` values in the alternate-names dump that carry links or
/// codes rather than names.
pub const PSEUDO_LANGUAGES: [&str; 7] = ["link", "post", "iata", "icao", "faac", "unlc", "wkdt"];

const MAIN_COLUMNS: usize = 19;

/// Row accounting for one load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub retained: usize,
    pub filtered: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub alternate_rows: usize,
    pub alternate_merged: usize,
    pub alternate_skipped: usize,
    pub alternate_malformed: usize,
    pub per_class: BTreeMap<CodeClass, usize>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_row(line: &str) -> std::result::Result<GazetteerEntry, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != MAIN_COLUMNS {
        return Err(format!("expected {MAIN_COLUMNS} columns, found {}", cols.len()));
    }
    let geoname_id: u64 = cols[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad geonameid {:?}", cols[0]))?;
    if geoname_id == 0 {
        return Err("geonameid must be positive".into());
    }
    let latitude: f64 = cols[4]
        .trim()
        .parse()
        .map_err(|_| format!("bad latitude {:?}", cols[4]))?;
    let longitude: f64 = cols[5]
        .trim()
        .parse()
        .map_err(|_| format!("bad longitude {:?}", cols[5]))?;
    if super::GeoPoint::new(latitude, longitude).is_none() {
        return Err(format!("coordinates out of range ({latitude}, {longitude})"));
    }
    let mut class_chars = cols[6].trim().chars();
    let feature_class = match (class_chars.next(), class_chars.next()) {
        (Some(c), None) => c,
        (None, _) => ' ',
        _ => return Err(format!("bad feature class {:?}", cols[6])),
    };
    let population: u64 = match cols[14].trim() {
        "" => 0,
        p => p.parse().map_err(|_| format!("bad population {p:?}"))?,
    };
    let alternate_names = cols[3]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    Ok(GazetteerEntry {
        geoname_id,
        name: cols[1].to_string(),
        ascii_name: cols[2].to_string(),
        alternate_names,
        latitude,
        longitude,
        feature_class,
        feature_code: cols[7].trim().to_string(),
        country_code: cols[8].trim().to_string(),
        population,
    })
}

/// Read a GeoNames main dump (and optionally an alternate-names dump) into a
/// store holding only the rows whose feature code maps into `allowlist`.
///
/// Malformed rows are skipped and counted; only an unreadable file is fatal.
pub fn load_gazetteer(
    main_dump: &Path,
    alternate_names_dump: Option<&Path>,
    allowlist: &BTreeSet<CodeClass>,
    codes: &CodeClassMap,
    params: Bm25Params,
) -> Result<(GazetteerStore, LoadReport)> {
    let mut report = LoadReport::default();
    let mut entries: BTreeMap<u64, GazetteerEntry> = BTreeMap::new();

    for (i, line) in open(main_dump)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(main_dump, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        report.rows += 1;
        let entry = match parse_row(line) {
            Ok(entry) => entry,
            Err(message) => {
                warn!("{}:{}: skipping row: {message}", main_dump.display(), i + 1);
                report.malformed += 1;
                continue;
            }
        };
        let class = codes.classify(&entry.feature_code);
        match class.filter(|c| allowlist.contains(c)) {
            None => report.filtered += 1,
            Some(class) => {
                if entries.contains_key(&entry.geoname_id) {
                    warn!(
                        "{}:{}: duplicate geonameid {}",
                        main_dump.display(),
                        i + 1,
                        entry.geoname_id
                    );
                    report.duplicates += 1;
                    continue;
                }
                *report.per_class.entry(class).or_insert(0) += 1;
                report.retained += 1;
                entries.insert(entry.geoname_id, entry);
            }
        }
    }

    if let Some(path) = alternate_names_dump {
        let mut seen: HashSet<(u64, String)> = HashSet::new();
        for (i, line) in open(path)?.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            report.alternate_rows += 1;
            let cols: Vec<&str> = line.split('\t').collect();
            let id = cols.get(1).and_then(|c| c.trim().parse::<u64>().ok());
            let (Some(id), Some(lang), Some(name)) = (id, cols.get(2), cols.get(3)) else {
                warn!("{}:{}: skipping alternate-name row", path.display(), i + 1);
                report.alternate_malformed += 1;
                continue;
            };
            let name = name.trim();
            if name.is_empty() || PSEUDO_LANGUAGES.contains(&lang.trim()) {
                report.alternate_skipped += 1;
                continue;
            }
            let Some(entry) = entries.get_mut(&id) else {
                report.alternate_skipped += 1;
                continue;
            };
            if entry.name == name
                || entry.ascii_name == name
                || !seen.insert((id, name.to_string()))
                || entry.alternate_names.iter().any(|a| a == name)
            {
                continue;
            }
            entry.alternate_names.push(name.to_string());
            report.alternate_merged += 1;
        }
    }

    let store = GazetteerStore::with_params(entries.into_values(), allowlist.clone(), params);
    Ok((store, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn row(id: u64, name: &str, alts: &str, code: &str, cc: &str, pop: &str) -> String {
        let class = if code.starts_with("PPL") { "P" } else { "A" };
        format!(
            "{id}\t{name}\t{name}\t{alts}\t15.0\t44.0\t{class}\t{code}\t{cc}\t\t01\t\t\t\t{pop}\t\t2000\tAsia/Aden\t2020-01-01"
        )
    }

    fn write(dir: &Path, name: &str, lines: &[String]) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    fn load(main: &Path, alt: Option<&Path>, allow: &[CodeClass]) -> (GazetteerStore, LoadReport) {
        load_gazetteer(
            main,
            alt,
            &allow.iter().copied().collect(),
            &CodeClassMap::default(),
            Bm25Params::default(),
        )
        .unwrap()
    }

    #[test]
    fn filters_by_class_and_merges_alternates() {
        let dir = tempfile::tempdir().unwrap();
        let main = write(
            dir.path(),
            "main.txt",
            &[
                row(71137, "Sanaa", "Sana'a,Sana", "PPLC", "YE", "1937451"),
                row(2, "Arabian Peninsula", "", "RGN", "", "0"),
                row(3, "Hadramawt", "", "ADM1", "YE", "1000"),
                "not\ta\trow".to_string(),
                row(4, "Bad", "", "PPL", "YE", "-5"),
            ],
        );
        let alt = write(
            dir.path(),
            "alt.txt",
            &[
                "1\t71137\ten\tSan'a\t\t\t\t".to_string(),
                "2\t71137\tlink\thttps://en.wikipedia.org/wiki/Sanaa".to_string(),
                "3\t71137\tiata\tSAH".to_string(),
                "4\t2\ten\tArabia".to_string(),
                "5\t3\t\tHadhramaut".to_string(),
                "broken".to_string(),
            ],
        );
        let (store, report) = load(&main, Some(&alt), &[CodeClass::PPL, CodeClass::AD]);
        assert_eq!(store.len(), 2);
        assert_eq!(report.rows, 5);
        assert_eq!(report.retained, 2);
        assert_eq!(report.filtered, 1);
        assert_eq!(report.malformed, 2);
        assert_eq!(report.alternate_merged, 2);
        assert_eq!(report.alternate_malformed, 1);
        let sanaa = store.get(71137).unwrap();
        assert_eq!(sanaa.alternate_names, vec!["Sana'a", "Sana", "San'a"]);
        assert_eq!(sanaa.population, 1_937_451);
        assert_eq!(sanaa.feature_class, 'P');
        assert!(store.exact_index().get("sana").unwrap().contains(&71137));
        assert!(store.exact_index().get("sah").is_none());
        assert_eq!(store.get(3).unwrap().alternate_names, vec!["Hadhramaut"]);
    }

    #[test]
    fn empty_alternate_field_indexes_primary_names_only() {
        let dir = tempfile::tempdir().unwrap();
        let main = write(dir.path(), "m.txt", &[row(9, "Marib", "", "PPLA", "YE", "0")]);
        let (store, _) = load(&main, None, &CodeClass::ALL);
        assert_eq!(store.exact_index().len(), 1);
        assert_eq!(store.exact_index().get("marib").unwrap(), &[9]);
    }

    #[test]
    fn shrinking_allowlist_never_adds_entries() {
        let dir = tempfile::tempdir().unwrap();
        let main = write(
            dir.path(),
            "m.txt",
            &[
                row(1, "A", "", "PPL", "YE", "0"),
                row(2, "B", "", "ADM2", "YE", "0"),
                row(3, "C", "", "AIRP", "YE", "0"),
                row(4, "D", "", "MT", "YE", "0"),
                row(5, "E", "", "STM", "YE", "0"),
            ],
        );
        let all = CodeClass::ALL;
        let (full, _) = load(&main, None, &all);
        for skip in 0..all.len() {
            let subset: Vec<CodeClass> =
                all.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, c)| *c).collect();
            let (smaller, _) = load(&main, None, &subset);
            assert!(smaller.len() <= full.len());
            assert!(smaller.entries().all(|e| full.get(e.geoname_id).is_some()));
        }
        assert_eq!(full.len(), 4);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_gazetteer(
            Path::new("/nonexistent/allCountries.txt"),
            None,
            &CodeClass::full_allowlist(),
            &CodeClassMap::default(),
            Bm25Params::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
