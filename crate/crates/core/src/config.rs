//! Pipeline configuration file (TOML). Command-line flags override it.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! root = "data"
//! clusters = "data/clusters.ndjson"
//! embeddings = ["data/csd.ndjson", "data/clip.ndjson"]
//! captions = "data/captions.ndjson"
//! labels = "work/labels.ndjson"
//! out = "work"
//!
//! [stage]
//! r_high = 0.8
//! r_syn = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curriculum::StageConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::triplets::MatchConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub root: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
    pub captions: Option<PathBuf>,
    pub assets: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub manifests: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub head: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Applied to both matching and stage composition when set.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub stage: StageConfig,
    pub metrics: MetricConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].bytes().filter(|b| *b == b'\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if let Some(seed) = cfg.seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.matching.seed = seed;
        self.stage.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        self.stage.validate()?;
        self.metrics.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::parse("", Path::new("c.toml")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.stage.r_high, 0.8);
        assert_eq!(cfg.metrics.cpc_threshold, 0.5);
    }

    #[test]
    fn seed_propagates() {
        let cfg = PipelineConfig::parse("seed = 9\n[stage]\nr_syn = 0.2\n", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.matching.seed, 9);
        assert_eq!(cfg.stage.seed, 9);
        assert_eq!(cfg.stage.r_syn, 0.2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::parse("[paths]\nroot = \"a\"\nrooot = \"b\"\n", Path::new("c.toml")).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("rooot"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(PipelineConfig::parse("[metric]\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn values_are_validated_after_parsing() {
        let err = PipelineConfig::parse("[stage]\nr_high = 1.5\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let err = PipelineConfig::parse("[metrics]\nrange_step = 0.25\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
