//! Device topology: adjacency construction from positions or explicit edge
//! weights, the combinatorial Laplacian, and connected components.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Identifies a device by its room (cluster) and its index within the room.
/// The flattened global index over all rooms is the row/column index used in
/// every matrix of the framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeviceId {
    pub cluster: usize,
    pub local: usize,
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cluster, self.local)
    }
}

/// Undirected device graph with binary or nonnegative edge weights.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Mat,
    positions: Option<Vec<[f64; 3]>>,
    device_ids: Vec<DeviceId>,
}

impl Graph {
    /// Distance-thresholded adjacency: devices i != j are connected iff their
    /// Euclidean distance is strictly below `d_max`.
    pub fn from_positions(
        positions: &[[f64; 3]],
        device_ids: Vec<DeviceId>,
        d_max: f64,
    ) -> Result<Graph> {
        let k = positions.len();
        if k == 0 {
            return Err(Error::input("graph needs at least one device"));
        }
        if d_max.is_nan() || d_max <= 0.0 {
            return Err(Error::input(format!("d_max must be positive, got {d_max}")));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite device coordinates"));
        }
        let adjacency = Mat::from_fn(k, k, |i, j| {
            if i == j {
                return 0.0;
            }
            let d2: f64 = (0..3)
                .map(|c| (positions[i][c] - positions[j][c]).powi(2))
                .sum();
            if d2.sqrt() < d_max {
                1.0
            } else {
                0.0
            }
        });
        Self::build(adjacency, Some(positions.to_vec()), device_ids)
    }

    /// Wrap an explicit adjacency matrix. Must be square, symmetric, with a
    /// zero diagonal and nonnegative finite entries.
    pub fn from_adjacency(adjacency: Mat, device_ids: Vec<DeviceId>) -> Result<Graph> {
        Self::build(adjacency, None, device_ids)
    }

    /// Adjacency-only construction; all devices are placed in cluster 0.
    pub fn from_adjacency_unclustered(adjacency: Mat) -> Result<Graph> {
        let ids = (0..adjacency.rows())
            .map(|i| DeviceId { cluster: 0, local: i })
            .collect();
        Self::build(adjacency, None, ids)
    }

    fn build(
        adjacency: Mat,
        positions: Option<Vec<[f64; 3]>>,
        device_ids: Vec<DeviceId>,
    ) -> Result<Graph> {
        let k = adjacency.rows();
        if k == 0 {
            return Err(Error::input("graph needs at least one device"));
        }
        if !adjacency.is_square() {
            return Err(Error::input("adjacency matrix must be square"));
        }
        if device_ids.len() != k {
            return Err(Error::input(format!(
                "{} device ids for a {k}-node graph",
                device_ids.len()
            )));
        }
        if !adjacency.all_finite() {
            return Err(Error::input("adjacency contains non-finite entries"));
        }
        for i in 0..k {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::input(format!("adjacency diagonal must be zero (row {i})")));
            }
            for j in 0..k {
                if adjacency[(i, j)] < 0.0 {
                    return Err(Error::input(format!("negative edge weight at ({i},{j})")));
                }
                if adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(Error::input(format!("asymmetric adjacency at ({i},{j})")));
                }
            }
        }
        validate_device_ids(&device_ids)?;
        Ok(Graph {
            adjacency,
            positions,
            device_ids,
        })
    }

    /// Number of devices K.
    pub fn len(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires K >= 1
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    pub fn device_ids(&self) -> &[DeviceId] {
        &self.device_ids
    }

    /// Number of clusters (rooms).
    pub fn cluster_count(&self) -> usize {
        self.device_ids.iter().map(|d| d.cluster).max().unwrap_or(0) + 1
    }

    /// Combinatorial Laplacian L = D - A, with D the diagonal degree matrix.
    /// Rows sum to zero; positive semidefinite for any valid adjacency.
    pub fn laplacian(&self) -> Mat {
        let k = self.len();
        let mut l = Mat::zeros(k, k);
        for i in 0..k {
            let degree: f64 = self.adjacency.row(i).iter().sum();
            for j in 0..k {
                l[(i, j)] = if i == j {
                    degree - self.adjacency[(i, j)]
                } else {
                    -self.adjacency[(i, j)]
                };
            }
        }
        l
    }

    /// Partition of the device indices into connected components, each sorted,
    /// ordered by their smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let k = self.len();
        let mut seen = vec![false; k];
        let mut components = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(node) = stack.pop() {
                comp.push(node);
                for (j, &weight) in self.adjacency.row(node).iter().enumerate() {
                    if !seen[j] && weight > 0.0 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Adjacency file: first line `K`, then K lines of K space-separated
    /// weights. Devices are assigned to a single cluster.
    pub fn load_adjacency_file(path: impl AsRef<Path>) -> Result<Graph> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let k: usize = lines
            .next()
            .ok_or_else(|| Error::input("adjacency file is empty"))?
            .trim()
            .parse()
            .map_err(|e| Error::input(format!("adjacency file: bad device count: {e}")))?;
        let mut rows = Vec::with_capacity(k);
        for i in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| Error::input(format!("adjacency file: missing row {i}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::input(format!("adjacency file row {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != k {
                return Err(Error::input(format!(
                    "adjacency file row {i}: expected {k} entries, got {}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        Graph::from_adjacency_unclustered(Mat::from_rows(&rows)?)
    }

    /// Positions file: K lines of `cluster_index x y z`.
    pub fn load_positions_file(path: impl AsRef<Path>, d_max: f64) -> Result<Graph> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut positions = Vec::new();
        let mut clusters = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(Error::input(format!(
                    "positions file line {}: expected `cluster x y z`",
                    lineno + 1
                )));
            }
            let cluster: usize = toks[0]
                .parse()
                .map_err(|e| Error::input(format!("positions file line {}: {e}", lineno + 1)))?;
            let mut xyz = [0.0; 3];
            for (slot, tok) in xyz.iter_mut().zip(&toks[1..]) {
                *slot = tok
                    .parse()
                    .map_err(|e| Error::input(format!("positions file line {}: {e}", lineno + 1)))?;
            }
            clusters.push(cluster);
            positions.push(xyz);
        }
        let ids = device_ids_from_clusters(&clusters)?;
        Graph::from_positions(&positions, ids, d_max)
    }
}

/// Derive per-cluster local indices from a flat cluster assignment, in order
/// of appearance.
pub fn device_ids_from_clusters(clusters: &[usize]) -> Result<Vec<DeviceId>> {
    let n = clusters.iter().max().map_or(0, |m| m + 1);
    let mut counters = vec![0usize; n];
    let ids = clusters
        .iter()
        .map(|&c| {
            let local = counters[c];
            counters[c] += 1;
            DeviceId { cluster: c, local }
        })
        .collect();
    Ok(ids)
}

fn validate_device_ids(ids: &[DeviceId]) -> Result<()> {
    let n = ids.iter().map(|d| d.cluster).max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; n];
    for id in ids {
        counts[id.cluster] += 1;
    }
    let mut seen = vec![0usize; n];
    for id in ids {
        if id.local >= counts[id.cluster] {
            return Err(Error::input(format!(
                "device {id} has local index beyond its cluster size {}",
                counts[id.cluster]
            )));
        }
        seen[id.cluster] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::input("cluster indices must be contiguous from 0"));
    }
    Ok(())
}
