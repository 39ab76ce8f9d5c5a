//! Aggregating a toy gradient matrix: the all-pass and averaging limits of
//! the graph-filtered rule, its agreement with FedAvg, and the intrinsic
//! clustering on a disconnected graph.

use graphfed::filter::{
    aggregate, build_filter_matrix, fedavg, AggregationWeights, FilterSpec, GradientMatrix,
};
use graphfed::graph::Graph;
use graphfed::linalg::Mat;
use graphfed::spectral::eigendecompose;

fn print_rows(label: &str, rows: &GradientMatrix) {
    println!("{label}");
    for i in 0..rows.device_count() {
        let vals: Vec<String> = rows.row(i).iter().map(|v| format!("{v:+.3}")).collect();
        println!("  device {i}: [{}]", vals.join(", "));
    }
}

fn main() -> graphfed::Result<()> {
    // Two rooms of three devices, one bridge between them.
    let mut adj = Mat::zeros(6, 6);
    for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)] {
        adj[(i, j)] = 1.0;
        adj[(j, i)] = 1.0;
    }
    let graph = Graph::from_adjacency_unclustered(adj)?;
    let spectrum = eigendecompose(&graph.laplacian())?;

    // Each device reports a two-entry update; room 1 pulls positive, room 2
    // negative, with per-device offsets.
    let gradients = GradientMatrix::new(Mat::from_fn(6, 2, |i, j| {
        let room = if i < 3 { 1.0 } else { -1.0 };
        room * (1.0 + 0.2 * (i % 3) as f64) + j as f64 * 0.1
    }))?;
    let kappa = AggregationWeights::uniform(6);
    print_rows("raw updates:", &gradients);

    for mu in [0.0, 1.0, 1e12] {
        let h = build_filter_matrix(&spectrum, &FilterSpec::new(mu)?)?;
        let out = aggregate(&h, &kappa, &gradients)?;
        print_rows(&format!("\nfiltered broadcast at mu_s = {mu}:"), &out);
    }

    let mean = fedavg(&[1.0 / 6.0; 6], &gradients)?;
    println!(
        "\nfedavg mean: [{}] (matches every row of the mu_s = 1e12 broadcast)",
        mean.iter().map(|v| format!("{v:+.3}")).collect::<Vec<_>>().join(", ")
    );

    // Disconnect the rooms: the averaging limit now averages per component.
    let mut adj = Mat::zeros(6, 6);
    for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
        adj[(i, j)] = 1.0;
        adj[(j, i)] = 1.0;
    }
    let split = Graph::from_adjacency_unclustered(adj)?;
    let spectrum = eigendecompose(&split.laplacian())?;
    let h = build_filter_matrix(&spectrum, &FilterSpec::new(1e12)?)?;
    let out = aggregate(&h, &kappa, &gradients)?;
    print_rows("\nsame updates, rooms disconnected, mu_s = 1e12 (per-room means):", &out);
    Ok(())
}
