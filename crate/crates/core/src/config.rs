//! Run configuration, read from TOML.
//!
//! Every key is optional; missing keys take the defaults below.
//!
//! ```toml
//! method = "pinn"            # pinn | nn | naive
//! epochs = 50000
//! learning_rate = 0.001
//! l2_coefficient = 1e-5
//! w_ode = 0.1
//! equation_weights = [1, 1, 1, 1, 1, 1, 1, 1, 1]
//! channel_weights = [1, 1, 1, 1, 1]
//! collocation_per_week = 5
//! horizons = [1, 2, 3, 4]
//! first_origin = 17          # default: scaled to the dataset length
//! last_origin = 89
//! window_length = 16         # default: all history
//! workers = 1
//! seed = 0                   # window at origin o trains with seed + o
//!
//! [rates]                    # all nine fields, if given
//! population = 39512223
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backtest::{scaled_origins, BacktestConfig};
use crate::compartment::{RateParams, N_COMPARTMENTS};
use crate::neural::{MlpConfig, TrainConfig};
use crate::pinn::{LossWeights, PinnConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: String,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_coefficient: f64,
    pub w_ode: f64,
    pub equation_weights: [f64; N_COMPARTMENTS],
    pub channel_weights: [f64; 5],
    pub collocation_per_week: usize,
    pub horizons: Vec<u32>,
    pub first_origin: Option<u32>,
    pub last_origin: Option<u32>,
    pub window_length: Option<u32>,
    pub workers: usize,
    pub seed: u64,
    pub rates: RateParams,
    pub state_net: MlpConfig,
    pub factor_net: MlpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let loss = LossWeights::default();
        Self {
            method: "pinn".into(),
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            l2_coefficient: train.l2_coefficient,
            w_ode: loss.w_ode,
            equation_weights: loss.equation,
            channel_weights: loss.channel,
            collocation_per_week: 5,
            horizons: vec![1, 2, 3, 4],
            first_origin: None,
            last_origin: None,
            window_length: None,
            workers: 1,
            seed: train.seed,
            rates: RateParams::default(),
            state_net: MlpConfig::state_net(),
            factor_net: MlpConfig::factor_net(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: shown.clone(),
            source,
        })?;
        Self::from_toml(&text, &shown)
    }

    pub fn pinn_config(&self) -> PinnConfig {
        PinnConfig {
            state_net: self.state_net,
            factor_net: self.factor_net,
            rates: self.rates,
            weights: LossWeights {
                w_ode: self.w_ode,
                equation: self.equation_weights,
                channel: self.channel_weights,
            },
            collocation_per_week: self.collocation_per_week,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2_coefficient: self.l2_coefficient,
            seed: self.seed,
        }
    }

    /// Backtest settings for a dataset of `weeks` weeks; unset origins are
    /// scaled from the 110-week layout.
    pub fn backtest_config(&self, weeks: u32) -> BacktestConfig {
        let (a, b) = scaled_origins(weeks);
        BacktestConfig {
            first_origin: self.first_origin.unwrap_or(a),
            last_origin: self.last_origin.unwrap_or(b),
            horizons: self.horizons.clone(),
            window_length: self.window_length,
            workers: self.workers,
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("", "x").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.pinn_config(), PinnConfig::default());
        assert_eq!(c.train_config(), TrainConfig::default());
    }

    #[test]
    fn keys_override_and_typos_fail() {
        let c = RunConfig::from_toml("epochs = 10\nw_ode = 0\nwindow_length = 8\n", "x").unwrap();
        assert_eq!(c.epochs, 10);
        assert_eq!(c.pinn_config().weights.w_ode, 0.0);
        let b = c.backtest_config(110);
        assert_eq!((b.first_origin, b.last_origin, b.window_length), (17, 89, Some(8)));
        assert!(RunConfig::from_toml("epoch = 10\n", "x").is_err());
    }

    #[test]
    fn round_trip_and_digest() {
        let c = RunConfig {
            seed: 9,
            first_origin: Some(20),
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml(&c.to_toml(), "x").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        assert_ne!(c.digest(), RunConfig::default().digest());
        assert_eq!(c.digest().len(), 64);
    }
}
