//! Straggler mitigation: sample a heterogeneous device pool, measure its
//! heterogeneity indicator, solve the per-round plan, and compare latency
//! and desynchronization against the unoptimized cost model.

use graphfed::config::{sample_device_specs, ExperimentConfig};
use graphfed::learner::ModelConfig;
use graphfed::schedule::{payload_size, solve_round_plan, ScheduleBounds};
use graphfed::sysmodel::{heterogeneity_indicator, round_costs};

fn main() -> graphfed::Result<()> {
    let system = ExperimentConfig::default().system;
    let k = 20;
    let specs = sample_device_specs(42, k, &system)?;
    let noise = system.noise_dbm_per_hz;
    let alpha_default = 3;
    let h = heterogeneity_indicator(&specs, alpha_default, noise)?;
    println!("sampled {k} devices, heterogeneity indicator H = {h:.3}");

    let model = ModelConfig::new(vec![784, 128, 10], 0)?;
    let b = model.param_count();
    let sizes = vec![450usize; k];
    let bounds = ScheduleBounds::new(1, 5, 0.3, 0.1, 0.4, 0.4, 0.2)?;

    // Unoptimized: every device runs alpha = 3 over its full data and ships
    // the dense gradient.
    let dense_bits = payload_size(b, 1.0)?;
    let unopt: Vec<f64> = specs
        .iter()
        .map(|s| Ok(round_costs(s, alpha_default, 450, dense_bits, noise)?.tau_total()))
        .collect::<graphfed::Result<_>>()?;
    let unopt_max = unopt.iter().cloned().fold(f64::MIN, f64::max);
    let unopt_min = unopt.iter().cloned().fold(f64::MAX, f64::min);

    let plan = solve_round_plan(&specs, &sizes, b, &bounds, noise)?;
    println!("round deadline T_opt = {:.4} s (unoptimized round: {unopt_max:.4} s)", plan.t_opt);
    println!(
        "\n{:>6} {:>6} {:>8} {:>8} {:>12} {:>12}",
        "device", "alpha", "q", "z", "latency s", "energy J"
    );
    for (i, d) in plan.devices.iter().enumerate() {
        println!(
            "{i:>6} {:>6} {:>8.3} {:>8.3} {:>12.5} {:>12.5}",
            d.alpha, d.q, d.z, d.predicted_tau, d.predicted_energy
        );
    }

    let opt_max = plan.devices.iter().map(|d| d.predicted_tau).fold(f64::MIN, f64::max);
    let opt_min = plan.devices.iter().map(|d| d.predicted_tau).fold(f64::MAX, f64::min);
    println!("\nper-round desynchronization:");
    println!("  unoptimized: {:.5} s", unopt_max - unopt_min);
    println!(
        "  optimized:   {:.3e} s ({:.2}% lower)",
        opt_max - opt_min,
        (1.0 - (opt_max - opt_min) / (unopt_max - unopt_min)) * 100.0
    );
    println!(
        "per-round latency: {:.4} s -> {:.4} s ({:.2}% lower)",
        unopt_max,
        opt_max,
        (1.0 - opt_max / unopt_max) * 100.0
    );
    Ok(())
}
