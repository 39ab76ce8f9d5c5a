//! Federated training on real MNIST IDX files. Pass the directory holding
//! the unpacked `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` pair:
//!
//! ```bash
//! cargo run -p graphfed --example mnist_federated -- /path/to/mnist
//! ```
//!
//! Creates the two-labels-per-device heterogeneous split and compares
//! FedAvg with moderate graph filtering over a short run.

use std::path::PathBuf;

use graphfed::config::{AggregatorKind, DataSource, ExperimentConfig};
use graphfed::engine::run_experiment;

fn main() -> graphfed::Result<()> {
    let Some(dir) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!(
            "usage: mnist_federated <DIR>\n\
             <DIR> must contain train-images-idx3-ubyte and train-labels-idx1-ubyte\n\
             (the standard IDX files, downloadable from the usual MNIST mirrors)."
        );
        return Ok(());
    };
    if !dir.join("train-images-idx3-ubyte").exists() {
        eprintln!(
            "no train-images-idx3-ubyte under {}; download and unpack the IDX files first",
            dir.display()
        );
        return Ok(());
    }

    let mut cfg = ExperimentConfig::default();
    cfg.data.source = DataSource::Mnist(dir);
    cfg.data.labels_per_device = 2;
    cfg.run.rounds = 30; // short demo; raise for the full curves
    cfg.run.seed = 1;
    cfg.model.eta = 0.1;

    for (name, kind, mu) in [
        ("fedavg", AggregatorKind::FedAvg, 0.0),
        ("gfedfilt mu=1", AggregatorKind::GFedfilt, 1.0),
    ] {
        let mut arm = cfg.clone();
        arm.run.aggregator = kind;
        arm.run.mu_s = mu;
        let log = run_experiment(&arm)?;
        let last = log.last().expect("rounds ran");
        println!(
            "{name:>14}: local {:.4} +- {:.4}, global {:.4} +- {:.4} after {} rounds",
            last.acc_local_mean,
            last.acc_local_std,
            last.acc_global_mean,
            last.acc_global_std,
            log.rounds.len()
        );
    }
    Ok(())
}
