//! Run configuration shared by every command, and the distributed-tree file
//! format. One configuration fixes the lexicon, the permutations and γ, so
//! vectors written under equal configs (equal hashes) are comparable.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtk::{
    check_lambda, distributed_tree_by_enumeration, DtkError, Encoder, WeightConvention, DEFAULT_FRAGMENT_CAP,
    DEFAULT_LAMBDA,
};
use crate::embedding::{fnv1a64, CompositionKind, DenseVector, DEFAULT_DIM, HASH_ALGO};
use crate::tree::Tree;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("lambda must lie in (0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("unsupported format version {0}")]
    FormatVersion(u32),
    #[error("config hash mismatch: file has {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("malformed distributed-tree file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    pub lambda: f64,
    pub composition: CompositionKind,
    pub seed: u64,
    pub weights: WeightConvention,
    /// Report λ·DTK so values sit on the exact kernel's scale.
    pub cd_compatible: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: DEFAULT_DIM,
            lambda: DEFAULT_LAMBDA,
            composition: CompositionKind::ShuffledConvolution,
            seed: DEFAULT_SEED,
            weights: WeightConvention::Recursion,
            cd_compatible: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim == 0 {
            return Err(ConfigError::ZeroDimension);
        }
        if check_lambda(self.lambda).is_err() {
            return Err(ConfigError::InvalidLambda(self.lambda));
        }
        Ok(())
    }

    pub fn uses_fast_convolution(&self) -> bool {
        self.dim.is_power_of_two()
    }

    /// Every field that changes the vectors, in a fixed textual form.
    /// `cd_compatible` only rescales reported kernel values and is excluded.
    pub fn canonical(&self) -> String {
        format!(
            "format={FORMAT_VERSION};hash={HASH_ALGO};dim={};lambda={:?};composition={};seed={};weights={}",
            self.dim,
            self.lambda,
            self.composition.short_name(),
            self.seed,
            self.weights
        )
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(&self.canonical()))
    }

    pub fn encoder(&self) -> Result<Encoder, DtkError> {
        Encoder::new(self.composition, self.dim, self.seed, self.lambda)
    }

    /// Factor applied to DTK values before they are reported.
    pub fn dtk_scale(&self) -> f64 {
        if self.cd_compatible {
            self.lambda
        } else {
            1.0
        }
    }

    /// Distributed-tree vector of `t` under this config. The node-count
    /// convention has no linear-time recursion and goes through explicit
    /// fragment enumeration, which is capped.
    pub fn encode(&self, encoder: &Encoder, t: &Tree) -> Result<DenseVector, DtkError> {
        match self.weights {
            WeightConvention::Recursion => Ok(encoder.encode(t)?.vector),
            WeightConvention::NodeCount => distributed_tree_by_enumeration(
                &encoder.spec,
                &encoder.lexicon,
                t,
                self.lambda,
                WeightConvention::NodeCount,
                DEFAULT_FRAGMENT_CAP,
            ),
        }
    }

    /// Vectors for a whole corpus, in input order.
    pub fn encode_corpus(&self, encoder: &Encoder, trees: &[Tree]) -> Result<Vec<DenseVector>, DtkError> {
        trees.par_iter().map(|t| self.encode(encoder, t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtHeader {
    pub format_version: u32,
    pub dim: usize,
    pub lambda: f64,
    pub composition: CompositionKind,
    pub seed: u64,
    pub weight_convention: WeightConvention,
    pub config_hash: String,
}

impl DtHeader {
    pub fn new(config: &RunConfig) -> Self {
        DtHeader {
            format_version: FORMAT_VERSION,
            dim: config.dim,
            lambda: config.lambda,
            composition: config.composition,
            seed: config.seed,
            weight_convention: config.weights,
            config_hash: config.config_hash(),
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            dim: self.dim,
            lambda: self.lambda,
            composition: self.composition,
            seed: self.seed,
            weights: self.weight_convention,
            cd_compatible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtRecord {
    /// Position in the input corpus, from 0.
    pub index: usize,
    /// 1-based line of the tree in the input file.
    pub line: usize,
    pub vector: DenseVector,
}

/// JSON-lines file: the header on the first line, then one record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct DtFile {
    pub header: DtHeader,
    pub records: Vec<DtRecord>,
}

impl DtFile {
    pub fn to_json_lines(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses a file and checks its hash against its own header and, when
    /// given, against the caller's config.
    pub fn parse(text: &str, expected: Option<&RunConfig>) -> Result<DtFile, ConfigError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| ConfigError::Malformed("missing header".into()))?;
        let header: DtHeader = serde_json::from_str(first).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(ConfigError::FormatVersion(header.format_version));
        }
        let own = header.run_config().config_hash();
        if own != header.config_hash {
            return Err(ConfigError::HashMismatch { expected: own, found: header.config_hash });
        }
        if let Some(cfg) = expected {
            let want = cfg.config_hash();
            if want != header.config_hash {
                return Err(ConfigError::HashMismatch { expected: want, found: header.config_hash });
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let r: DtRecord = serde_json::from_str(line)
                .map_err(|e| ConfigError::Malformed(format!("record {}: {e}", i + 1)))?;
            if r.vector.dim() != header.dim {
                let mut msg = String::new();
                let _ = write!(msg, "record {} has dimension {}, header says {}", r.index, r.vector.dim(), header.dim);
                return Err(ConfigError::Malformed(msg));
            }
            records.push(r);
        }
        Ok(DtFile { header, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_tree;

    #[test]
    fn defaults_and_validation() {
        let c = RunConfig::default();
        assert_eq!((c.dim, c.lambda, c.seed), (8192, 0.4, 42));
        assert!(c.validate().is_ok() && c.uses_fast_convolution());
        assert_eq!(RunConfig { dim: 0, ..c.clone() }.validate(), Err(ConfigError::ZeroDimension));
        assert_eq!(RunConfig { lambda: 1.5, ..c.clone() }.validate(), Err(ConfigError::InvalidLambda(1.5)));
        assert!(RunConfig { lambda: 1.0, ..c }.validate().is_ok());
    }

    #[test]
    fn hash_tracks_vector_relevant_fields() {
        let c = RunConfig::default();
        assert_eq!(c.config_hash(), RunConfig::default().config_hash());
        assert_eq!(c.config_hash().len(), 16);
        assert_eq!(c.config_hash(), RunConfig { cd_compatible: true, ..c.clone() }.config_hash());
        for other in [
            RunConfig { dim: 4096, ..c.clone() },
            RunConfig { lambda: 0.2, ..c.clone() },
            RunConfig { seed: 1, ..c.clone() },
            RunConfig { composition: CompositionKind::ShuffledProduct, ..c.clone() },
            RunConfig { weights: WeightConvention::NodeCount, ..c.clone() },
        ] {
            assert_ne!(other.config_hash(), c.config_hash());
        }
    }

    fn sample_file(cfg: &RunConfig) -> DtFile {
        let enc = cfg.encoder().unwrap();
        let trees = vec![parse_tree("(A a)").unwrap(), parse_tree("(S (A a) (B b))").unwrap()];
        let records = cfg
            .encode_corpus(&enc, &trees)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(index, vector)| DtRecord { index, line: index + 1, vector })
            .collect();
        DtFile { header: DtHeader::new(cfg), records }
    }

    #[test]
    fn file_round_trip_is_exact() {
        let cfg = RunConfig { dim: 64, ..RunConfig::default() };
        let file = sample_file(&cfg);
        let text = file.to_json_lines();
        assert_eq!(text.lines().count(), 3);
        let back = DtFile::parse(&text, Some(&cfg)).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json_lines(), text);
    }

    #[test]
    fn file_hash_is_checked() {
        let cfg = RunConfig { dim: 64, ..RunConfig::default() };
        let text = sample_file(&cfg).to_json_lines();
        let other = RunConfig { seed: 7, ..cfg.clone() };
        assert!(matches!(DtFile::parse(&text, Some(&other)), Err(ConfigError::HashMismatch { .. })));
        let tampered = text.replacen("\"seed\":42", "\"seed\":43", 1);
        assert!(matches!(DtFile::parse(&tampered, None), Err(ConfigError::HashMismatch { .. })));
        assert!(matches!(DtFile::parse("", None), Err(ConfigError::Malformed(_))));
    }

    #[test]
    fn node_count_weights_use_enumeration() {
        let cfg = RunConfig { dim: 256, weights: WeightConvention::NodeCount, lambda: 0.5, ..RunConfig::default() };
        let enc = cfg.encoder().unwrap();
        let t = parse_tree("(S (A a) (B b))").unwrap();
        let v = cfg.encode(&enc, &t).unwrap();
        let rec = RunConfig { weights: WeightConvention::Recursion, ..cfg.clone() }.encode(&enc, &t).unwrap();
        assert!(v.sub(&rec).unwrap().norm() > 1e-6);
    }
}
