use serde::{Deserialize, Serialize};

use crate::chains::ChainConfig;
use crate::error::{Error, Result};
use crate::retriever::{BeamRanking, RetrieveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Annotated chains where present plus chain-derived supervision.
    #[default]
    #[serde(rename = "supervised+distant")]
    SupervisedDistant,
    /// Chain-derived supervision only; annotations are never read.
    DistantOnly,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised+distant" => Ok(Mode::SupervisedDistant),
            "distant-only" => Ok(Mode::DistantOnly),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Training and inference settings. Every field may be given in a TOML file;
/// missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Beam width (explored range 5..=20).
    pub k_beam: usize,
    /// Retrieval iterations (explored range 1..=3).
    pub t_max: usize,
    pub ranking: BeamRanking,
    /// Chains sampled per question for the local losses.
    pub n_chains: usize,
    /// Reader context cap (15 or 20).
    pub max_evidence: usize,
    pub batch_size: usize,
    /// Query-encoder step size.
    pub learning_rate: f64,
    pub reader_learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub mode: Mode,
    pub use_mle: bool,
    pub use_rl: bool,
    pub use_global: bool,
    /// Minimum in-batch negatives per step; short lists are padded from the
    /// question's own pool.
    pub negatives_floor: usize,
    pub max_path_len: usize,
    pub max_expansions: usize,
    /// Hashing buckets and width of the query encoder. Must match the
    /// encoder that produced the evidence vectors.
    pub buckets: usize,
    pub dim: usize,
    pub encoder_seed: u64,
    /// Standard deviation of noise added to the initial query encoder.
    pub init_noise: f64,
    pub reader_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_beam: 10,
            t_max: 2,
            ranking: BeamRanking::Cumulative,
            n_chains: 1,
            max_evidence: 15,
            batch_size: 8,
            learning_rate: 0.3,
            reader_learning_rate: 0.5,
            epochs: 8,
            seed: 7,
            mode: Mode::SupervisedDistant,
            use_mle: true,
            use_rl: true,
            use_global: true,
            negatives_floor: 8,
            max_path_len: 8,
            max_expansions: 4,
            buckets: 8192,
            dim: 256,
            encoder_seed: 0,
            init_noise: 0.0,
            reader_dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k_beam", self.k_beam),
            ("t_max", self.t_max),
            ("n_chains", self.n_chains),
            ("max_evidence", self.max_evidence),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_path_len", self.max_path_len),
            ("max_expansions", self.max_expansions),
            ("buckets", self.buckets),
            ("dim", self.dim),
            ("reader_dim", self.reader_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("reader_learning_rate", self.reader_learning_rate),
            ("init_noise", self.init_noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn retrieve_config(&self) -> RetrieveConfig {
        RetrieveConfig {
            k_beam: self.k_beam,
            t_max: self.t_max,
            ranking: self.ranking,
        }
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            max_path_len: self.max_path_len,
            max_expansions: self.max_expansions,
        }
    }
}
