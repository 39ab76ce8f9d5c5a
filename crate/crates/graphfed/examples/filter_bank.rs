//! The tunable low-pass filter on a real spectrum: frequency responses for a
//! range of smoothing parameters and the filter matrix in its two limits
//! (identity at mu_s = 0, row-averaging as mu_s grows).

use graphfed::engine::sample_graph;
use graphfed::filter::{build_filter_matrix, FilterSpec};
use graphfed::spectral::eigendecompose;

fn main() -> graphfed::Result<()> {
    let graph = sample_graph(3, 4, 20, 12.0)?;
    let spectrum = eigendecompose(&graph.laplacian())?;

    println!("graph frequencies and filter responses h(lambda) = 1/(1 + mu_s * lambda):");
    let mus = [0.0, 0.1, 1.0, 5.0, 10.0, 100.0];
    print!("{:>10}", "lambda");
    for mu in mus {
        print!("  mu={mu:<7}");
    }
    println!();
    for &lambda in &spectrum.eigenvalues {
        print!("{lambda:>10.4}");
        for mu in mus {
            let h = FilterSpec::new(mu)?.response(lambda)?;
            print!("  {h:<10.5}");
        }
        println!();
    }

    let k = graph.len();
    let identity_like = build_filter_matrix(&spectrum, &FilterSpec::new(0.0)?)?;
    let averaging = build_filter_matrix(&spectrum, &FilterSpec::new(1e12)?)?;
    println!("\nfilter matrix row 0 at mu_s = 0 (all-pass, ~ identity):");
    println!(
        "  {:?}",
        identity_like.row(0).iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    println!("filter matrix row 0 at mu_s = 1e12 (averaging, ~ 1/K = {:.4}):", 1.0 / k as f64);
    println!(
        "  {:?}",
        averaging.row(0).iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    Ok(())
}
