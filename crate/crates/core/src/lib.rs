//! Deep SVDD and AI-SVDD anomaly detection on fixed embedding vectors.

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod fsutil;
pub mod network;
pub mod metrics;
pub mod objectives;
pub mod optimizer;
pub mod oracle;
pub mod checkpoint;
pub mod rng;

pub use checkpoint::Checkpoint;
pub use dataset::{EmbeddingDataset, EmbeddingFormat, ANOMALY, NORMAL};
pub use error::{Result, SvddError};
pub use network::{AutoencoderNetwork, EncoderNetwork, GradientSet, NetworkOptions};
pub use metrics::{MetricSummary, ScoreReport};
pub use objectives::{Center, CenterKind, LossValue};
pub use optimizer::{Objective, TrainConfig};
pub use rng::SeededRng;
