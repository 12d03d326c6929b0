//! Training classifiers that minimise risk disparity between sensitive groups
//! without doing unnecessary harm to any of them.

// Negated float comparisons deliberately treat NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod kv;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod report;
pub mod risk;
pub mod train;

pub use dataset::GroupedDataset;
pub use error::{Error, Result};
pub use model::{Activation, Model};
pub use risk::{Loss, ParetoArchive, RiskVector};
pub use train::TrainConfig;
