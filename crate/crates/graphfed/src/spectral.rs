//! Spectral decomposition of the graph Laplacian and the graph Fourier
//! transform pair. Eigenvalues are the graph frequencies, ordered ascending
//! (low to high frequency); eigenvectors are the orthonormal Fourier basis.

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, Mat};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues this close to zero are the structural (per-component) zeros
/// of a Laplacian up to round-off; they snap to exactly 0 so that filter
/// responses keep unit DC gain even for extreme smoothing parameters.
const ZERO_SNAP: f64 = 1e-9;

/// Eigendecomposition L = V diag(lambda) V^T of a graph Laplacian.
///
/// Column i of `eigenvectors` pairs with `eigenvalues[i]`. Columns are unit
/// 2-norm and sign-fixed so the largest-magnitude entry of each is positive,
/// making the decomposition deterministic.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

/// Decompose a symmetric positive-semidefinite matrix with cyclic Jacobi
/// rotations, then sort ascending by eigenvalue (stable in the solver's
/// output order on ties).
pub fn eigendecompose(l: &Mat) -> Result<Spectrum> {
    if !l.is_square() {
        return Err(Error::input("matrix must be square"));
    }
    if !l.all_finite() {
        return Err(Error::input("matrix contains non-finite entries"));
    }
    if !l.is_symmetric(0.0) {
        return Err(Error::input("matrix must be symmetric"));
    }
    let (values, vectors) = jacobi_eigen(l, JACOBI_TOL, JACOBI_MAX_SWEEPS)?;

    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Mat::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        let value = values[src];
        eigenvalues.push(if value.abs() < ZERO_SNAP { 0.0 } else { value });
        // Sign convention: largest-magnitude entry positive.
        let mut best = 0;
        for r in 1..k {
            if vectors[(r, src)].abs() > vectors[(best, src)].abs() {
                best = r;
            }
        }
        let flip = if vectors[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..k {
            eigenvectors[(r, dst)] = flip * vectors[(r, src)];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

impl Spectrum {
    /// Number of graph frequencies (= number of devices K).
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Graph Fourier transform: project a K x B node signal onto the
    /// eigenbasis, `V^T g`.
    pub fn gft(&self, signal: &Mat) -> Result<Mat> {
        if signal.rows() != self.len() {
            return Err(Error::input(format!(
                "signal has {} rows, spectrum order is {}",
                signal.rows(),
                self.len()
            )));
        }
        Ok(self.eigenvectors.transpose().matmul(signal))
    }

    /// Inverse graph Fourier transform, `V g_f`.
    pub fn igft(&self, coefficients: &Mat) -> Result<Mat> {
        if coefficients.rows() != self.len() {
            return Err(Error::input(format!(
                "coefficients have {} rows, spectrum order is {}",
                coefficients.rows(),
                self.len()
            )));
        }
        Ok(self.eigenvectors.matmul(coefficients))
    }

    /// Count of eigenvalues equal to zero within `tol`. For a valid Laplacian
    /// this equals the number of connected components.
    pub fn zero_eigenvalue_count(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|v| v.abs() < tol).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn path2_spectrum() -> Spectrum {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = Graph::from_adjacency_unclustered(a).unwrap();
        eigendecompose(&g.laplacian()).unwrap()
    }

    // Independent oracle for K <= 2: characteristic polynomial roots.
    fn eig2_oracle(m: &Mat) -> [f64; 2] {
        let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        [(tr - disc) / 2.0, (tr + disc) / 2.0]
    }

    // Independent oracle for K = 3: trigonometric solution of the
    // characteristic cubic of a symmetric matrix.
    fn eig3_oracle(m: &Mat) -> [f64; 3] {
        let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
        if p1 == 0.0 {
            let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return d;
        }
        let q = (m[(0, 0)] + m[(1, 1)] + m[(2, 2)]) / 3.0;
        let p2 = (m[(0, 0)] - q).powi(2)
            + (m[(1, 1)] - q).powi(2)
            + (m[(2, 2)] - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = Mat::from_fn(3, 3, |i, j| {
            (m[(i, j)] - if i == j { q } else { 0.0 }) / p
        });
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let mut eigs = [lo, 3.0 * q - hi - lo, hi];
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eigs
    }

    #[test]
    fn three_by_three_matches_characteristic_polynomial() {
        let cases = [
            // Complete graph on 3 nodes.
            Mat::from_rows(&[vec![2.0, -1.0, -1.0], vec![-1.0, 2.0, -1.0], vec![-1.0, -1.0, 2.0]])
                .unwrap(),
            // Path graph.
            Mat::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]])
                .unwrap(),
            // Generic symmetric PSD-ish matrix.
            Mat::from_rows(&[vec![4.0, 1.0, -0.5], vec![1.0, 3.0, 0.7], vec![-0.5, 0.7, 2.0]])
                .unwrap(),
        ];
        for m in cases {
            let s = eigendecompose(&m).unwrap();
            let oracle = eig3_oracle(&m);
            for (got, want) in s.eigenvalues.iter().zip(oracle) {
                assert!((got - want).abs() < 1e-8, "{got} vs oracle {want}");
            }
        }
    }

    #[test]
    fn two_node_path_closed_form() {
        let s = path2_spectrum();
        assert!((s.eigenvalues[0] - 0.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 2.0).abs() < 1e-12);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        // Sign convention: first largest-magnitude entry positive.
        assert!((s.eigenvectors[(0, 0)] - inv_sqrt2).abs() < 1e-12);
        assert!((s.eigenvectors[(1, 0)] - inv_sqrt2).abs() < 1e-12);
        assert!((s.eigenvectors[(0, 1)] - inv_sqrt2).abs() < 1e-12);
        assert!((s.eigenvectors[(1, 1)] + inv_sqrt2).abs() < 1e-12);

        let l = Mat::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let oracle = eig2_oracle(&l);
        assert!((s.eigenvalues[0] - oracle[0]).abs() < 1e-8);
        assert!((s.eigenvalues[1] - oracle[1]).abs() < 1e-8);
    }

    #[test]
    fn zero_laplacian_gives_zero_spectrum() {
        let s = eigendecompose(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0, 0.0, 0.0]);
        let vtv = s.eigenvectors.transpose().matmul(&s.eigenvectors);
        assert!(vtv.max_abs_diff(&Mat::identity(3)) < 1e-12);
    }

    #[test]
    fn complete_three_spectrum() {
        // Complete graph on K nodes: eigenvalue 0 once, K with multiplicity K-1.
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = Graph::from_adjacency_unclustered(a).unwrap();
        let s = eigendecompose(&g.laplacian()).unwrap();
        assert!((s.eigenvalues[0]).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 3.0).abs() < 1e-10);
        assert!((s.eigenvalues[2] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn dc_eigenvector_is_constant_on_connected_graph() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = Graph::from_adjacency_unclustered(a).unwrap();
        let s = eigendecompose(&g.laplacian()).unwrap();
        let expected = 1.0 / 2.0;
        for r in 0..4 {
            assert!((s.eigenvectors[(r, 0)] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn gft_of_zero_is_zero() {
        let s = path2_spectrum();
        let z = Mat::zeros(2, 3);
        assert_eq!(s.gft(&z).unwrap(), Mat::zeros(2, 3));
        assert_eq!(s.igft(&z).unwrap(), Mat::zeros(2, 3));
    }

    #[test]
    fn gft_projects_constant_signal_onto_dc() {
        let s = path2_spectrum();
        let g = Mat::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let gf = s.gft(&g).unwrap();
        assert!((gf[(0, 0)] - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!(gf[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn igft_of_scaled_dc_indicator_is_ones() {
        // Connected K=4 complete graph; sqrt(K) times the DC indicator maps
        // back to the all-ones signal.
        let a = Mat::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = Graph::from_adjacency_unclustered(a).unwrap();
        let s = eigendecompose(&g.laplacian()).unwrap();
        let mut gf = Mat::zeros(4, 2);
        gf[(0, 0)] = 2.0; // sqrt(4)
        gf[(0, 1)] = 2.0;
        let back = s.igft(&gf).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                assert!((back[(i, j)] - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gft_igft_round_trip() {
        let mut a = Mat::zeros(4, 4);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        let g = Graph::from_adjacency_unclustered(a).unwrap();
        let s = eigendecompose(&g.laplacian()).unwrap();
        let signal = Mat::from_fn(4, 3, |i, j| (i as f64 + 1.0) * 0.7 - (j as f64) * 1.3);
        let round = s.igft(&s.gft(&signal).unwrap()).unwrap();
        assert!(round.max_abs_diff(&signal) < 1e-10);
        let round2 = s.gft(&s.igft(&signal).unwrap()).unwrap();
        assert!(round2.max_abs_diff(&signal) < 1e-10);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = path2_spectrum();
        assert!(s.gft(&Mat::zeros(3, 1)).is_err());
        assert!(s.igft(&Mat::zeros(3, 1)).is_err());
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut a = Mat::zeros(5, 5);
        for (i, j) in [(0, 1), (1, 2), (3, 4), (0, 2)] {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        let g = Graph::from_adjacency_unclustered(a).unwrap();
        let l = g.laplacian();
        let s = eigendecompose(&l).unwrap();

        let mut lam = Mat::zeros(5, 5);
        for (i, &v) in s.eigenvalues.iter().enumerate() {
            lam[(i, i)] = v;
        }
        let rec = s.eigenvectors.matmul(&lam).matmul(&s.eigenvectors.transpose());
        assert!(rec.max_abs_diff(&l) < 1e-8);
        let vtv = s.eigenvectors.transpose().matmul(&s.eigenvectors);
        assert!(vtv.max_abs_diff(&Mat::identity(5)) < 1e-8);
        // Two components => two zero eigenvalues.
        assert_eq!(s.zero_eigenvalue_count(1e-8), 2);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(eigendecompose(&m).is_err());
    }
}
