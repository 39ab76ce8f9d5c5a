//! Train the same federation under FedAvg and under graph filtering at
//! several smoothing strengths, then compare personalization (local-test
//! accuracy) against generalization (global-test accuracy).

use graphfed::config::{AggregatorKind, ExperimentConfig};
use graphfed::engine::run_experiment;

fn main() -> graphfed::Result<()> {
    // Desk-scale setup: 12 devices in 3 rooms, two labels per device.
    let mut cfg = ExperimentConfig::default();
    cfg.run.rounds = 60;
    cfg.run.seed = 17;
    cfg.model.hidden = vec![24];
    cfg.model.eta = 0.1;
    cfg.graph.devices = 12;
    cfg.graph.rooms = 3;
    cfg.graph.d_max = 14.0;
    cfg.data.feature_dim = 16;
    cfg.data.per_class = 600;
    cfg.data.labels_per_device = 2;
    cfg.data.train_per_device = 120;
    cfg.data.local_test_per_device = 40;

    println!(
        "{:>16} {:>12} {:>12} {:>12} {:>12}",
        "aggregator", "local mean", "local std", "global mean", "global std"
    );
    let mut arms: Vec<(String, ExperimentConfig)> = Vec::new();
    {
        let mut fedavg = cfg.clone();
        fedavg.run.aggregator = AggregatorKind::FedAvg;
        arms.push(("fedavg".into(), fedavg));
    }
    for mu in [0.1, 1.0, 10.0, 100.0] {
        let mut filtered = cfg.clone();
        filtered.run.aggregator = AggregatorKind::GFedfilt;
        filtered.run.mu_s = mu;
        arms.push((format!("gfedfilt mu={mu}"), filtered));
    }
    for (name, arm) in arms {
        let log = run_experiment(&arm)?;
        let last = log.last().expect("at least one round");
        println!(
            "{name:>16} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            last.acc_local_mean, last.acc_local_std, last.acc_global_mean, last.acc_global_std
        );
    }
    println!(
        "\nsmall mu_s personalizes (local accuracy up, global down); large mu_s\n\
         approaches the FedAvg row from below."
    );
    Ok(())
}
