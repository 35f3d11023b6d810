use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use humgeo::baselines::ClusterParams;
use humgeo::candidates::{CandidateOptions, TrivialTokens, DEFAULT_TOP_K};
use humgeo::gazetteer::{CodeClass, CodeClassMap};
use humgeo::{Method, Normalizer, NormalizerConfig};
use serde::Deserialize;

/// Engine settings, read from TOML. Relative paths are taken relative to the
/// config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub gazetteer: GazetteerPaths,
    /// Code-class tags to keep; empty means all.
    pub allowlist: Vec<String>,
    pub trivial_tokens: Option<PathBuf>,
    pub normalizer: Option<PathBuf>,
    pub mode: String,
    pub top_k: usize,
    pub search_fallback_only: bool,
    pub cluster: ClusterSection,
    pub seed: u64,
    /// Defaults to the available parallelism.
    pub workers: Option<usize>,
    /// Fraction of prediction keys allowed to be absent from the gold file.
    pub max_key_mismatch: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazetteerPaths {
    pub main_dump: Option<PathBuf>,
    pub alternate_names: Option<PathBuf>,
    pub code_classes: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub radius_grid: Vec<f64>,
    pub min_cluster_size: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let p = ClusterParams::default();
        ClusterSection {
            radius_grid: p.radius_grid,
            min_cluster_size: p.min_cluster_size,
        }
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            gazetteer: GazetteerPaths::default(),
            allowlist: Vec::new(),
            trivial_tokens: None,
            normalizer: None,
            mode: Method::FeatureRank.as_str().to_string(),
            top_k: DEFAULT_TOP_K,
            search_fallback_only: false,
            cluster: ClusterSection::default(),
            seed: 0,
            workers: None,
            max_key_mismatch: 0.5,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: EngineConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.gazetteer.main_dump);
        rebase(base, &mut cfg.gazetteer.alternate_names);
        rebase(base, &mut cfg.gazetteer.code_classes);
        rebase(base, &mut cfg.gazetteer.cache);
        rebase(base, &mut cfg.trivial_tokens);
        rebase(base, &mut cfg.normalizer);
        Ok(cfg)
    }

    /// Fails when a referenced auxiliary file is missing or a value is out of range.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.trivial_tokens, &self.normalizer, &self.gazetteer.code_classes]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                bail!("configured path {} does not exist", p.display());
            }
        }
        self.method()?;
        self.allowlist()?;
        self.cluster_params()?.validate()?;
        if self.top_k == 0 {
            bail!("top_k must be positive");
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        if !(0.0..=1.0).contains(&self.max_key_mismatch) {
            bail!("max_key_mismatch must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn method(&self) -> Result<Method> {
        Ok(self.mode.parse()?)
    }

    pub fn allowlist(&self) -> Result<BTreeSet<CodeClass>> {
        if self.allowlist.is_empty() {
            return Ok(CodeClass::full_allowlist());
        }
        self.allowlist
            .iter()
            .map(|t| t.parse::<CodeClass>().map_err(Into::into))
            .collect()
    }

    pub fn code_classes(&self) -> Result<CodeClassMap> {
        match &self.gazetteer.code_classes {
            Some(p) => Ok(CodeClassMap::load(p)?),
            None => Ok(CodeClassMap::default()),
        }
    }

    pub fn trivial(&self) -> Result<TrivialTokens> {
        match &self.trivial_tokens {
            Some(p) => Ok(TrivialTokens::load(p)?),
            None => Ok(TrivialTokens::default()),
        }
    }

    pub fn normalizer(&self) -> Result<Normalizer> {
        let cfg = match &self.normalizer {
            Some(p) => NormalizerConfig::load(p)?,
            None => NormalizerConfig::default(),
        };
        Ok(Normalizer::new(&cfg))
    }

    pub fn candidate_options(&self) -> CandidateOptions {
        CandidateOptions {
            top_k: self.top_k,
            search_fallback_only: self.search_fallback_only,
            ..CandidateOptions::default()
        }
    }

    pub fn cluster_params(&self) -> Result<ClusterParams> {
        Ok(ClusterParams {
            radius_grid: self.cluster.radius_grid.clone(),
            min_cluster_size: self.cluster.min_cluster_size,
            rng_seed: self.seed,
        })
    }

    pub fn cache_path(&self) -> Result<&Path> {
        self.gazetteer
            .cache
            .as_deref()
            .context("no gazetteer.cache path configured")
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rebases() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("engine.toml");
        std::fs::write(
            &path,
            "mode = \"sfr\"\nallowlist = [\"PPL\", \"ad\"]\nseed = 9\n[gazetteer]\nmain_dump = \"dump.txt\"\ncache = \"/abs/store.bin\"\n[cluster]\nradius_grid = [5.0, 50.0]\n",
        )
        .unwrap();
        let cfg = EngineConfig::load(&path).unwrap();
        assert_eq!(cfg.method().unwrap(), Method::SearchFeatureRank);
        assert_eq!(cfg.allowlist().unwrap().len(), 2);
        assert_eq!(cfg.gazetteer.main_dump.as_deref(), Some(dir.path().join("dump.txt").as_path()));
        assert_eq!(cfg.cache_path().unwrap(), Path::new("/abs/store.bin"));
        let p = cfg.cluster_params().unwrap();
        assert_eq!((p.radius_grid.len(), p.rng_seed, p.min_cluster_size), (2, 9, 1));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = EngineConfig::default();
        cfg.validate().unwrap();
        cfg.mode = "kmeans".into();
        assert!(cfg.validate().is_err());
        let mut cfg = EngineConfig::default();
        cfg.cluster.radius_grid = vec![10.0, 5.0];
        assert!(cfg.validate().is_err());
        let cfg = EngineConfig {
            trivial_tokens: Some("/nonexistent/trivial.txt".into()),
            ..EngineConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<EngineConfig>("bogus = 1").is_err());
    }
}
