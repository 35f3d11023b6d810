//! Literature baselines behind the common [`Geocoder`](crate::resolution::Geocoder)
//! interface. Both use exact-match candidate generation.

mod bm;
mod chen;

pub use bm::{bm_geocode, doc_countries, BmGeocoder, BmStep, BmStepKind, BmTrace};
pub use chen::{chen_geocode, dbscan, document_rng, ChenGeocoder, ChenTrace, ClusterParams};
