//! Federated-learning simulation over a device graph.
//!
//! The aggregation server stacks per-device gradient updates into a matrix,
//! projects it onto the eigenbasis of the device graph's Laplacian, scales
//! each graph frequency with a tunable low-pass response, and broadcasts the
//! filtered rows back. Large smoothing collapses to FedAvg; zero smoothing
//! keeps every device on its own trajectory; intermediate values mix
//! information along the graph, clustering devices by connectivity.
//!
//! The companion scheduler removes stragglers: given per-device hardware and
//! channel specs it sets a round deadline from the slowest device's minimal
//! latency, then tunes each device's local epochs, training-data fraction,
//! and gradient sparsity so everyone reports in at the deadline without
//! blowing its energy budget.
//!
//! Start with the `examples/` directory:
//!
//! ```bash
//! cargo run -p graphfed --example graph_spectrum
//! cargo run -p graphfed --example filter_bank
//! cargo run -p graphfed --example aggregation_rules
//! cargo run -p graphfed --example training_comparison
//! cargo run -p graphfed --example round_scheduling
//! cargo run -p graphfed --example mnist_federated
//! ```
//!
//! or the `graphfed` binary (`run`, `sweep`, `verify` subcommands).

pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod filter;
pub mod graph;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod runner;
pub mod schedule;
pub mod seed;
pub mod spectral;
pub mod sysmodel;

pub use config::{AggregatorKind, ExperimentConfig};
pub use engine::{run_experiment, Aggregator, Engine, EngineParts};
pub use error::{Error, Result};
pub use filter::{
    aggregate, build_filter_matrix, fedavg, AggregationWeights, FilterSpec, GradientMatrix,
};
pub use graph::{DeviceId, Graph};
pub use learner::{
    client_update, forward, loss_and_gradient, predict, Batch, ModelConfig, Weights,
};
pub use linalg::Mat;
pub use metrics::MetricsLog;
pub use schedule::{
    compute_t_opt, payload_size, samples_used, solve_round_plan, sparsify, RoundPlan,
    ScheduleBounds, SparseGradient,
};
pub use spectral::{eigendecompose, Spectrum};
pub use sysmodel::{heterogeneity_indicator, DeviceSpec};

pub use data::{
    load_mnist_idx, partition, synth_gaussian_pool, DeviceData, LabeledPool, PartitionSpec, Setup,
};
