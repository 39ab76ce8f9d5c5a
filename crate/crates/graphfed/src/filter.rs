//! Tunable low-pass graph filter and the graph-filtered aggregation rule.
//!
//! The filter operator h(lambda) = 1 / (1 + mu_s * lambda) has unit DC gain
//! and attenuates higher graph frequencies; mu_s trades domain-agnostic
//! (large mu_s, FedAvg-like) against domain-specific (small mu_s,
//! personalized) aggregation. The aggregation itself is
//! `G_hat = H * diag(kappa) * G` with H = V h(Lambda) V^T.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::spectral::Spectrum;

/// Filter configuration: the smoothing parameter mu_s >= 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    mu_s: f64,
}

impl FilterSpec {
    pub fn new(mu_s: f64) -> Result<FilterSpec> {
        if !mu_s.is_finite() || mu_s < 0.0 {
            return Err(Error::input(format!(
                "filter parameter must be finite and nonnegative, got {mu_s}"
            )));
        }
        Ok(FilterSpec { mu_s })
    }

    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }

    /// Frequency response 1 / (1 + mu_s * lambda). Equals 1 at lambda = 0 and
    /// is strictly decreasing in lambda when mu_s > 0.
    pub fn response(&self, lambda: f64) -> Result<f64> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::input(format!(
                "graph frequency must be nonnegative, got {lambda}"
            )));
        }
        Ok(1.0 / (1.0 + self.mu_s * lambda))
    }
}

/// Build the dense filter matrix H = V h(Lambda) V^T. Symmetric, with
/// eigenvalues h(lambda_i) on the spectrum's eigenvectors.
pub fn build_filter_matrix(spectrum: &Spectrum, spec: &FilterSpec) -> Result<Mat> {
    let k = spectrum.len();
    let responses: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        // Jacobi round-off can leave eigenvalues a hair below zero; clamp.
        .map(|&l| spec.response(l.max(0.0)))
        .collect::<Result<_>>()?;
    let v = &spectrum.eigenvectors;
    let mut h = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut sum = 0.0;
            for (m, &r) in responses.iter().enumerate() {
                sum += v[(i, m)] * r * v[(j, m)];
            }
            h[(i, j)] = sum;
        }
    }
    Ok(h)
}

/// Per-device aggregation weights kappa. Scaled so they sum to K: with an
/// orthonormal eigenbasis this makes the DC-only limit of the filtered
/// aggregation reproduce the data-size-weighted FedAvg mean exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    kappa: Vec<f64>,
}

impl AggregationWeights {
    pub fn new(kappa: Vec<f64>) -> Result<AggregationWeights> {
        let k = kappa.len();
        if k == 0 {
            return Err(Error::input("weights must not be empty"));
        }
        if kappa.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        let sum: f64 = kappa.iter().sum();
        if (sum - k as f64).abs() > 1e-6 * k as f64 {
            return Err(Error::input(format!(
                "weights must sum to K = {k}, got {sum}"
            )));
        }
        Ok(AggregationWeights { kappa })
    }

    /// kappa_i = K * |D_i| / sum |D_j|.
    pub fn from_data_sizes(sizes: &[usize]) -> Result<AggregationWeights> {
        let k = sizes.len();
        let total: usize = sizes.iter().sum();
        if k == 0 || total == 0 {
            return Err(Error::input("data sizes must be nonempty and positive"));
        }
        let kappa = sizes
            .iter()
            .map(|&s| k as f64 * s as f64 / total as f64)
            .collect();
        AggregationWeights::new(kappa)
    }

    /// Uniform weights kappa_i = 1.
    pub fn uniform(k: usize) -> AggregationWeights {
        AggregationWeights { kappa: vec![1.0; k] }
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }
}

/// Stacked client updates: row i is the flattened gradient of device i.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    values: Mat,
}

impl GradientMatrix {
    pub fn new(values: Mat) -> Result<GradientMatrix> {
        for i in 0..values.rows() {
            if values.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "device {i}: gradient contains non-finite entries"
                )));
            }
        }
        Ok(GradientMatrix { values })
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn device_count(&self) -> usize {
        self.values.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }
}

/// Graph-filtered aggregation `G_hat = H * diag(kappa) * G`. Row i of the
/// result is the update broadcast back to device i.
pub fn aggregate(
    h: &Mat,
    weights: &AggregationWeights,
    gradients: &GradientMatrix,
) -> Result<GradientMatrix> {
    let k = gradients.device_count();
    if h.rows() != k || h.cols() != k {
        return Err(Error::input(format!(
            "filter matrix is {}x{}, expected {k}x{k}",
            h.rows(),
            h.cols()
        )));
    }
    if weights.len() != k {
        return Err(Error::input(format!(
            "{} weights for {k} devices",
            weights.len()
        )));
    }
    let weighted = gradients.values.scale_rows(weights.kappa());
    GradientMatrix::new(h.matmul(&weighted))
}

/// Baseline aggregator: the weighted mean `sum_i w_i g_i` with normalized
/// weights summing to 1. This is the DC-only limit of the filtered rule.
pub fn fedavg(weights_normalized: &[f64], gradients: &GradientMatrix) -> Result<Vec<f64>> {
    let k = gradients.device_count();
    if weights_normalized.len() != k {
        return Err(Error::input(format!(
            "{} weights for {k} devices",
            weights_normalized.len()
        )));
    }
    let sum: f64 = weights_normalized.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("weights must sum to 1, got {sum}")));
    }
    let b = gradients.values.cols();
    let mut mean = vec![0.0; b];
    for (i, &w) in weights_normalized.iter().enumerate() {
        for (m, g) in mean.iter_mut().zip(gradients.row(i)) {
            *m += w * g;
        }
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::spectral::eigendecompose;

    fn spectrum_of(adj: Mat) -> Spectrum {
        let g = Graph::from_adjacency_unclustered(adj).unwrap();
        eigendecompose(&g.laplacian()).unwrap()
    }

    fn complete(k: usize) -> Mat {
        Mat::from_fn(k, k, |i, j| if i == j { 0.0 } else { 1.0 })
    }

    #[test]
    fn response_dc_gain_is_unity() {
        for mu in [0.0, 0.5, 5.0, 1e12] {
            let f = FilterSpec::new(mu).unwrap();
            assert_eq!(f.response(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn response_at_high_frequency() {
        // At the largest frequency of the 20-node reference topology (8.06),
        // mu_s = 5 attenuates to 1/(1 + 40.3).
        let f = FilterSpec::new(5.0).unwrap();
        let r = f.response(8.06).unwrap();
        assert!((r - 1.0 / 41.3).abs() < 1e-12);
        assert!((r - 0.02421).abs() < 1e-5);
    }

    #[test]
    fn zero_smoothing_is_all_pass() {
        let f = FilterSpec::new(0.0).unwrap();
        for l in [0.0, 0.3, 2.0, 8.06, 1e6] {
            assert_eq!(f.response(l).unwrap(), 1.0);
        }
    }

    #[test]
    fn response_rejects_negative_frequency() {
        let f = FilterSpec::new(1.0).unwrap();
        assert!(f.response(-0.1).is_err());
    }

    #[test]
    fn response_strictly_decreasing() {
        let f = FilterSpec::new(2.0).unwrap();
        let mut prev = f.response(0.0).unwrap();
        for i in 1..50 {
            let r = f.response(i as f64 * 0.25).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn filter_matrix_identity_at_zero_smoothing() {
        let s = spectrum_of(complete(4));
        let h = build_filter_matrix(&s, &FilterSpec::new(0.0).unwrap()).unwrap();
        assert!(h.max_abs_diff(&Mat::identity(4)) < 1e-10);
    }

    #[test]
    fn filter_matrix_dc_limit_is_averaging() {
        // Only the DC term v0 v0^T survives; v0 = 1/sqrt(K) on a connected
        // graph. Holds from 1e10 up.
        let k = 5;
        let s = spectrum_of(complete(k));
        let avg = Mat::from_fn(k, k, |_, _| 1.0 / k as f64);
        for mu in [1e10, 1e12] {
            let h = build_filter_matrix(&s, &FilterSpec::new(mu).unwrap()).unwrap();
            assert!(h.max_abs_diff(&avg) < 1e-6);
        }
    }

    #[test]
    fn filter_matrix_two_node_hand_assembled() {
        // h(0) = 1, h(2) = 1/3; V h V^T assembled by hand gives
        // [[2/3, 1/3], [1/3, 2/3]].
        let s = spectrum_of(Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let h = build_filter_matrix(&s, &FilterSpec::new(1.0).unwrap()).unwrap();
        let expected =
            Mat::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        assert!(h.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn aggregate_dc_limit_averages_rows() {
        let k = 3;
        let s = spectrum_of(complete(k));
        let h = build_filter_matrix(&s, &FilterSpec::new(1e12).unwrap()).unwrap();
        let g = GradientMatrix::new(
            Mat::from_rows(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap(),
        )
        .unwrap();
        let out = aggregate(&h, &AggregationWeights::uniform(k), &g).unwrap();
        for i in 0..k {
            assert!((out.row(i)[0] - 2.0).abs() < 1e-6);
            assert!((out.row(i)[1] - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn aggregate_all_pass_scales_by_kappa() {
        let s = spectrum_of(complete(3));
        let h = build_filter_matrix(&s, &FilterSpec::new(0.0).unwrap()).unwrap();
        let g = GradientMatrix::new(
            Mat::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0], vec![-3.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let kappa = AggregationWeights::new(vec![0.6, 1.2, 1.2]).unwrap();
        let out = aggregate(&h, &kappa, &g).unwrap();
        let expected = g.values().scale_rows(kappa.kappa());
        assert!(out.values().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn aggregate_two_components_average_independently() {
        // Components {0,1} and {2,3}; in the DC limit each row equals its own
        // component's mean. Oracle: component means computed directly.
        let mut a = Mat::zeros(4, 4);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(2, 3)] = 1.0;
        a[(3, 2)] = 1.0;
        let s = spectrum_of(a);
        let h = build_filter_matrix(&s, &FilterSpec::new(1e12).unwrap()).unwrap();
        let rows = [
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![10.0, 20.0],
            vec![30.0, 40.0],
        ];
        let g = GradientMatrix::new(Mat::from_rows(&rows).unwrap()).unwrap();
        let out = aggregate(&h, &AggregationWeights::uniform(4), &g).unwrap();
        let mean01 = [(rows[0][0] + rows[1][0]) / 2.0, (rows[0][1] + rows[1][1]) / 2.0];
        let mean23 = [(rows[2][0] + rows[3][0]) / 2.0, (rows[2][1] + rows[3][1]) / 2.0];
        for i in [0, 1] {
            assert!((out.row(i)[0] - mean01[0]).abs() < 1e-6);
            assert!((out.row(i)[1] - mean01[1]).abs() < 1e-6);
        }
        for i in [2, 3] {
            assert!((out.row(i)[0] - mean23[0]).abs() < 1e-6);
            assert!((out.row(i)[1] - mean23[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn aggregate_rejects_non_finite_gradient() {
        let bad = Mat::from_rows(&[vec![1.0, 2.0], vec![f64::NAN, 0.0]]).unwrap();
        let err = GradientMatrix::new(bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("device 1"), "{msg}");
    }

    #[test]
    fn fedavg_uniform_identical_rows() {
        let g = GradientMatrix::new(
            Mat::from_rows(&[vec![2.0, -1.0], vec![2.0, -1.0], vec![2.0, -1.0]]).unwrap(),
        )
        .unwrap();
        let mean = fedavg(&[1.0 / 3.0; 3], &g).unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-12);
        assert!((mean[1] + 1.0).abs() < 1e-12);
        assert_eq!(mean.len(), 2);
    }

    #[test]
    fn fedavg_two_device_mean() {
        let g = GradientMatrix::new(
            Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let mean = fedavg(&[0.5, 0.5], &g).unwrap();
        assert_eq!(mean, vec![0.5, 0.5]);
    }

    #[test]
    fn fedavg_matches_dc_limit_of_filter() {
        // Equivalence oracle: FedAvg with weights w equals row 0 of the
        // filtered aggregation with kappa = K * w in the DC limit.
        let k = 5;
        let s = spectrum_of(complete(k));
        let h = build_filter_matrix(&s, &FilterSpec::new(1e12).unwrap()).unwrap();
        let raw = [0.1, 0.3, 0.2, 0.15, 0.25];
        let g = GradientMatrix::new(Mat::from_fn(k, 4, |i, j| {
            ((i * 31 + j * 17) % 11) as f64 * 0.37 - 1.5
        }))
        .unwrap();
        let mean = fedavg(&raw, &g).unwrap();
        let kappa = AggregationWeights::new(raw.iter().map(|w| w * k as f64).collect()).unwrap();
        let filtered = aggregate(&h, &kappa, &g).unwrap();
        for (got, want) in filtered.row(0).iter().zip(&mean) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn fedavg_rejects_unnormalized_weights() {
        let g = GradientMatrix::new(Mat::zeros(2, 1)).unwrap();
        assert!(fedavg(&[0.5, 0.6], &g).is_err());
    }

    #[test]
    fn constant_gradient_is_fixed_point_for_any_smoothing() {
        // DC preservation with uniform kappa on a connected graph.
        let k = 4;
        let s = spectrum_of(complete(k));
        let row = [0.7, -0.2, 1.5];
        let g = GradientMatrix::new(Mat::from_fn(k, 3, |_, j| row[j])).unwrap();
        for mu in [0.0, 0.1, 1.0, 10.0, 1e4] {
            let h = build_filter_matrix(&s, &FilterSpec::new(mu).unwrap()).unwrap();
            let out = aggregate(&h, &AggregationWeights::uniform(k), &g).unwrap();
            for i in 0..k {
                for (got, want) in out.row(i).iter().zip(&row) {
                    assert!((got - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn weights_from_data_sizes_sum_to_k() {
        let w = AggregationWeights::from_data_sizes(&[100, 300, 200, 400]).unwrap();
        let sum: f64 = w.kappa().iter().sum();
        assert!((sum - 4.0).abs() < 1e-12);
        assert!((w.kappa()[1] - 4.0 * 0.3).abs() < 1e-12);
    }
}
