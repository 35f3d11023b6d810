use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::candidates::{CandidateGenerator, CandidateOptions, CandidateSet, TrivialTokens};
use crate::error::{Error, Result};
use crate::gazetteer::{haversine_km, GazetteerStore, GeoPoint};
use crate::normalizer::Toponym;
use crate::resolution::{Geocoder, Method, Resolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Candidate clustering radii in km, strictly increasing.
    pub radius_grid: Vec<f64>,
    /// Minimum neighbourhood size (including the point itself) of a core point.
    pub min_cluster_size: usize,
    pub rng_seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            radius_grid: vec![10.0, 25.0, 50.0, 100.0, 250.0, 500.0, 1000.0],
            min_cluster_size: 1,
            rng_seed: 0,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius_grid.is_empty() {
            return Err(Error::ClusterParams("radius grid is empty".into()));
        }
        if self.radius_grid.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::ClusterParams("radii must be positive".into()));
        }
        if self.radius_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ClusterParams("radius grid must be strictly increasing".into()));
        }
        if self.min_cluster_size == 0 {
            return Err(Error::ClusterParams("min_cluster_size must be positive".into()));
        }
        Ok(())
    }
}

/// Generator for one document, derived from the run seed and the document id.
pub fn document_rng(seed: u64, doc_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(doc_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// DBSCAN over great-circle distance. Returns a cluster label per point,
/// `None` for noise. Labels are assigned in order of first core point.
pub fn dbscan(points: &[GeoPoint], radius_km: f64, min_points: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| haversine_km(points[i], points[j]) <= radius_km)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_points).collect();
    let mut labels = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        labels[start] = Some(next);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            if !core[p] {
                continue;
            }
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(next);
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenTrace {
    /// (radius, largest cluster size, clustered points) per grid radius.
    pub grid: Vec<(f64, usize, usize)>,
    pub radius_km: Option<f64>,
    /// Geoname ids in the selected cluster.
    pub cluster: Vec<u64>,
}

/// Cluster every candidate of the document and resolve each toponym inside
/// the biggest cluster at the best radius. Ties, both between equally large
/// clusters and between a toponym's candidates, are broken with `rng`.
pub fn chen_geocode(
    sets: &[CandidateSet<'_>],
    params: &ClusterParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<Resolution>, ChenTrace) {
    let owners: Vec<(usize, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.len()).map(move |j| (i, j)))
        .collect();
    let points: Vec<GeoPoint> = owners
        .iter()
        .map(|&(i, j)| sets[i].candidates[j].entry.point())
        .collect();

    let mut trace = ChenTrace {
        grid: Vec::new(),
        radius_km: None,
        cluster: Vec::new(),
    };
    // (dominance, labels, radius); ties keep the smaller radius
    let mut best: Option<(f64, Vec<Option<usize>>, f64)> = None;
    for &radius in &params.radius_grid {
        let labels = dbscan(&points, radius, params.min_cluster_size);
        let sizes = cluster_sizes(&labels);
        let clustered: usize = sizes.iter().sum();
        let largest = sizes.iter().copied().max().unwrap_or(0);
        trace.grid.push((radius, largest, clustered));
        if clustered == 0 {
            continue;
        }
        let dominance = largest as f64 / clustered as f64;
        if best.as_ref().is_none_or(|b| dominance > b.0) {
            best = Some((dominance, labels, radius));
        }
    }

    let mut chosen: Vec<Option<u64>> = vec![None; sets.len()];
    if let Some((_, labels, radius)) = best {
        let sizes = cluster_sizes(&labels);
        let largest = sizes.iter().copied().max().unwrap_or(0);
        let tied: Vec<usize> = (0..sizes.len()).filter(|&c| sizes[c] == largest).collect();
        let cluster = *tied.choose(rng).expect("at least one cluster");
        trace.radius_km = Some(radius);
        let mut members: Vec<Vec<u64>> = vec![Vec::new(); sets.len()];
        for (p, &(i, j)) in owners.iter().enumerate() {
            if labels[p] == Some(cluster) {
                let id = sets[i].candidates[j].geoname_id();
                members[i].push(id);
                trace.cluster.push(id);
            }
        }
        for (slot, mut ids) in chosen.iter_mut().zip(members) {
            ids.sort_unstable();
            ids.dedup();
            *slot = ids.choose(rng).copied();
        }
        trace.cluster.sort_unstable();
    }

    let resolutions = sets
        .iter()
        .zip(chosen)
        .map(|(set, chosen)| Resolution {
            toponym: set.toponym.clone(),
            chosen,
            rank_trace: Vec::new(),
        })
        .collect();
    (resolutions, trace)
}

fn cluster_sizes(labels: &[Option<usize>]) -> Vec<usize> {
    let mut sizes = Vec::new();
    for &l in labels.iter().flatten() {
        if sizes.len() <= l {
            sizes.resize(l + 1, 0);
        }
        sizes[l] += 1;
    }
    sizes
}

#[derive(Debug, Clone)]
pub struct ChenGeocoder<'s> {
    generator: CandidateGenerator<'s>,
    params: ClusterParams,
}

impl<'s> ChenGeocoder<'s> {
    pub fn new(
        store: &'s GazetteerStore,
        trivial: TrivialTokens,
        options: CandidateOptions,
        params: ClusterParams,
    ) -> Result<Self> {
        params.validate()?;
        let options = CandidateOptions {
            use_search: false,
            ..options
        };
        Ok(ChenGeocoder {
            generator: CandidateGenerator::new(store, trivial, options),
            params,
        })
    }

    pub fn geocode_with_trace(&self, toponyms: &[Toponym]) -> (Vec<Resolution>, ChenTrace) {
        let sets: Vec<CandidateSet<'_>> = toponyms.iter().map(|t| self.generator.generate(t)).collect();
        let doc_id = toponyms.first().map_or("", |t| t.doc_id.as_str());
        let mut rng = document_rng(self.params.rng_seed, doc_id);
        chen_geocode(&sets, &self.params, &mut rng)
    }
}

impl Geocoder for ChenGeocoder<'_> {
    fn method(&self) -> Method {
        Method::Chen
    }

    fn geocode_document(&self, toponyms: &[Toponym]) -> Vec<Resolution> {
        self.geocode_with_trace(toponyms).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::test_support::{entry, store};
    use crate::normalizer::Normalizer;
    use crate::span::Span;
    use proptest::prelude::*;

    fn toponyms(doc: &str, names: &[&str]) -> Vec<Toponym> {
        let norm = Normalizer::default();
        names
            .iter()
            .map(|n| norm.normalize_toponym(doc, n, Span::new(0, 1).unwrap()))
            .collect()
    }

    fn geocoder(s: &GazetteerStore, seed: u64) -> ChenGeocoder<'_> {
        let params = ClusterParams {
            rng_seed: seed,
            ..ClusterParams::default()
        };
        ChenGeocoder::new(s, TrivialTokens::default(), CandidateOptions::default(), params).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ClusterParams::default().validate().is_ok());
        for grid in [vec![], vec![10.0, 10.0], vec![50.0, 10.0], vec![-1.0, 5.0]] {
            let p = ClusterParams {
                radius_grid: grid,
                ..ClusterParams::default()
            };
            assert!(matches!(p.validate(), Err(Error::ClusterParams(_))));
        }
        let p = ClusterParams {
            min_cluster_size: 0,
            ..ClusterParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn dbscan_links_within_radius() {
        let pts: Vec<GeoPoint> = [(0.0, 0.0), (0.0, 0.1), (0.0, 0.2), (10.0, 10.0)]
            .iter()
            .map(|&(a, b)| GeoPoint::new(a, b).unwrap())
            .collect();
        // 0.1 degree of longitude at the equator is about 11.1 km
        assert_eq!(dbscan(&pts, 12.0, 1), vec![Some(0), Some(0), Some(0), Some(1)]);
        assert_eq!(dbscan(&pts, 5.0, 1), vec![Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(dbscan(&pts, 12.0, 3), vec![Some(0), Some(0), Some(0), None]);
    }

    #[test]
    fn nearby_referents_win_over_distant_homonyms() {
        let s = store(vec![
            entry(1, "Sanaa", &[], 15.35, 44.21, "PPLC", "YE", 0),
            entry(2, "Sanaa", &[], -12.0, -77.0, "PPL", "PE", 0),
            entry(3, "Arhab", &[], 15.58, 44.22, "ADM2", "YE", 0),
            entry(4, "Arhab", &[], 40.0, -100.0, "PPL", "US", 0),
            entry(5, "Bani Hushaysh", &[], 15.4, 44.45, "ADM2", "YE", 0),
            entry(6, "Bani Hushaysh", &[], 50.0, 10.0, "PPL", "DE", 0),
        ]);
        let (res, trace) = geocoder(&s, 7).geocode_with_trace(&toponyms("d", &["Sanaa", "Arhab", "Bani Hushaysh"]));
        let chosen: Vec<_> = res.iter().map(|r| r.chosen).collect();
        assert_eq!(chosen, vec![Some(1), Some(3), Some(5)]);
        assert!(trace.radius_km.unwrap() <= 100.0);
        assert_eq!(trace.cluster, vec![1, 3, 5]);
    }

    #[test]
    fn single_candidate_is_chosen() {
        let s = store(vec![entry(1, "Marib", &[], 15.4, 45.3, "PPLA", "YE", 0)]);
        let res = geocoder(&s, 0).geocode_document(&toponyms("d", &["Marib", "Nowhere"]));
        assert_eq!(res[0].chosen, Some(1));
        assert_eq!(res[1].chosen, None);
    }

    #[test]
    fn toponyms_outside_the_cluster_are_unmatched() {
        let s = store(vec![
            entry(1, "A", &[], 15.0, 44.0, "PPL", "YE", 0),
            entry(2, "B", &[], 15.01, 44.01, "PPL", "YE", 0),
            entry(3, "C", &[], -30.0, 150.0, "PPL", "AU", 0),
        ]);
        let res = geocoder(&s, 0).geocode_document(&toponyms("d", &["A", "B", "C"]));
        let chosen: Vec<_> = res.iter().map(|r| r.chosen).collect();
        assert_eq!(chosen, vec![Some(1), Some(2), None]);
    }

    proptest! {
        #[test]
        fn seeded_runs_are_deterministic_and_inside_cluster(
            coords in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0usize..3), 1..10),
            seed in any::<u64>(),
        ) {
            let names = ["a", "b", "c"];
            let s = store(
                coords
                    .iter()
                    .enumerate()
                    .map(|(i, (lat, lon, n))| entry(i as u64 + 1, names[*n], &[], *lat, *lon, "PPL", "YE", 0))
                    .collect(),
            );
            let g = geocoder(&s, seed);
            let doc = toponyms("doc-1", &names);
            let (a, ta) = g.geocode_with_trace(&doc);
            let (b, tb) = g.geocode_with_trace(&doc);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&ta, &tb);
            for r in &a {
                if let Some(id) = r.chosen {
                    prop_assert!(ta.cluster.contains(&id));
                }
            }
        }
    }
}
