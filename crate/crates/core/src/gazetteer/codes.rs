//! Feature-code classes used to filter the gazetteer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_MAP: &str = include_str!("../../data/code_classes.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CodeClass {
    /// Administrative division, countries included.
    AD,
    /// Populated place.
    PPL,
    MT,
    SEA,
    LK,
    ISL,
    AIR,
}

impl CodeClass {
    pub const ALL: [CodeClass; 7] = [
        CodeClass::AD,
        CodeClass::PPL,
        CodeClass::MT,
        CodeClass::SEA,
        CodeClass::LK,
        CodeClass::ISL,
        CodeClass::AIR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CodeClass::AD => "AD",
            CodeClass::PPL => "PPL",
            CodeClass::MT => "MT",
            CodeClass::SEA => "SEA",
            CodeClass::LK => "LK",
            CodeClass::ISL => "ISL",
            CodeClass::AIR => "AIR",
        }
    }

    pub fn full_allowlist() -> BTreeSet<CodeClass> {
        Self::ALL.into_iter().collect()
    }
}

impl fmt::Display for CodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CodeClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownCodeClass(s.to_string()))
    }
}

/// Feature code to class table, read from a line-oriented data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeClassMap {
    exact: BTreeMap<String, CodeClass>,
    /// Sorted longest prefix first.
    prefixes: Vec<(String, CodeClass)>,
    source: String,
}

impl Default for CodeClassMap {
    fn default() -> Self {
        CodeClassMap::parse(DEFAULT_MAP, "data/code_classes.txt")
            .expect("embedded code-class map is valid")
    }
}

impl CodeClassMap {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut exact = BTreeMap::new();
        let mut prefixes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(code), Some(tag), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::Parse {
                    origin: origin.to_string(),
                    line: i + 1,
                    message: format!("expected `<code> <tag>`, got {line:?}"),
                });
            };
            let class: CodeClass = tag.parse().map_err(|_| Error::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message: format!("unknown tag {tag:?}"),
            })?;
            match code.strip_suffix('*') {
                Some(prefix) => prefixes.push((prefix.to_uppercase(), class)),
                None => {
                    exact.insert(code.to_uppercase(), class);
                }
            }
        }
        prefixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(CodeClassMap {
            exact,
            prefixes,
            source: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn classify(&self, feature_code: &str) -> Option<CodeClass> {
        let code = feature_code.trim().to_uppercase();
        if code.is_empty() {
            return None;
        }
        if let Some(class) = self.exact.get(&code) {
            return Some(*class);
        }
        self.prefixes
            .iter()
            .find(|(prefix, _)| code.starts_with(prefix.as_str()))
            .map(|(_, class)| *class)
    }

    /// Raw text of the table, folded into cache checksums.
    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Class of `feature_code` under the shipped table.
pub fn map_code_class(feature_code: &str) -> Option<CodeClass> {
    thread_local! {
        static DEFAULT: CodeClassMap = CodeClassMap::default();
    }
    DEFAULT.with(|m| m.classify(feature_code))
}
