use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::feature_rank::FeatureVector;
use crate::normalizer::Toponym;

/// Geocoding algorithm that produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    FeatureRank,
    SearchFeatureRank,
    #[serde(rename = "BM")]
    Bm,
    Chen,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::FeatureRank,
        Method::SearchFeatureRank,
        Method::Bm,
        Method::Chen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::FeatureRank => "FeatureRank",
            Method::SearchFeatureRank => "SearchFeatureRank",
            Method::Bm => "BM",
            Method::Chen => "Chen",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect();
        match key.to_lowercase().as_str() {
            "featurerank" | "fr" => Ok(Method::FeatureRank),
            "searchfeaturerank" | "sfr" => Ok(Method::SearchFeatureRank),
            "bm" => Ok(Method::Bm),
            "chen" => Ok(Method::Chen),
            _ => Err(Error::Config {
                origin: "mode".into(),
                message: format!("unknown geocoding method {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub geoname_id: u64,
    pub features: FeatureVector,
}

/// Verdict for one toponym.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub toponym: Toponym,
    /// `None` is an explicit no-match.
    pub chosen: Option<u64>,
    /// Ranked candidates for explainability; empty for methods that do not
    /// rank by features.
    pub rank_trace: Vec<RankEntry>,
}

impl Resolution {
    pub fn no_match(toponym: Toponym) -> Self {
        Resolution {
            toponym,
            chosen: None,
            rank_trace: Vec::new(),
        }
    }
}

/// A document-level geocoder. Documents are independent units; all
/// toponyms passed in one call belong to the same document.
pub trait Geocoder: Sync {
    fn method(&self) -> Method;

    /// One resolution per input toponym, in input order.
    fn geocode_document(&self, toponyms: &[Toponym]) -> Vec<Resolution>;
}
