pub mod baselines;
pub mod candidates;
pub mod error;
pub mod eval;
pub mod feature_rank;
pub mod gazetteer;
pub mod normalizer;
pub mod records;
pub mod resolution;
pub mod span;

pub use error::{Error, Result};
pub use gazetteer::{haversine_km, CodeClass, GazetteerEntry, GazetteerStore, GeoPoint};
pub use normalizer::{standardize_text, Normalizer, NormalizerConfig, Toponym};
pub use resolution::{Geocoder, Method, Resolution};
pub use span::Span;
