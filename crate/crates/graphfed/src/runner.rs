//! Experiment execution entry points shared by the CLI and library users:
//! single runs with manifest/CSV/summary persistence, parameter sweeps, and
//! the self-check suites.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{AggregatorKind, ExperimentConfig};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::metrics::sig6;

/// Written before the first round; everything needed to reproduce the run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunManifest {
    pub version: String,
    pub master_seed: u64,
    /// Canonical config text; `ExperimentConfig::parse_str` restores it.
    pub config: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, serde::Serialize)]
struct RunSummary {
    version: String,
    master_seed: u64,
    rounds: usize,
    heterogeneity: f64,
    final_acc_local_mean: f64,
    final_acc_local_std: f64,
    final_acc_global_mean: f64,
    final_acc_global_std: f64,
    final_i1: f64,
    final_i2: f64,
    final_i3: f64,
    final_i4: f64,
    total_flops: u64,
    total_latency_s: f64,
    total_desync_s: f64,
    last_round_plans: Vec<crate::metrics::PlanTriple>,
}

/// Paths produced by a run.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub manifest: PathBuf,
    pub csv: PathBuf,
    pub summary: PathBuf,
}

fn file_stem(cfg: &ExperimentConfig) -> String {
    match cfg.run.aggregator {
        AggregatorKind::FedAvg => "fedavg".to_string(),
        AggregatorKind::GFedfilt => format!("gfedfilt_mu{}", sig6(cfg.run.mu_s)),
    }
}

/// Execute one experiment, writing `manifest.json`, `metrics.csv`, and
/// `summary.json` into `out_dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutputs> {
    run_named(cfg, out_dir, "metrics")
}

fn run_named(cfg: &ExperimentConfig, out_dir: &Path, stem: &str) -> Result<RunOutputs> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let outputs = RunOutputs {
        manifest: out_dir.join(format!("{stem}_manifest.json")),
        csv: out_dir.join(format!("{stem}.csv")),
        summary: out_dir.join(format!("{stem}_summary.json")),
    };

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.run.seed,
        config: cfg.write_string(),
        outputs: vec![
            outputs.csv.display().to_string(),
            outputs.summary.display().to_string(),
        ],
    };
    std::fs::write(
        &outputs.manifest,
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.into()))?,
    )?;

    let mut engine = Engine::from_config(cfg)?;
    let log = engine.run()?;
    log.write_csv(&outputs.csv)?;

    let last = log
        .last()
        .ok_or_else(|| Error::input("run produced no rounds"))?;
    let summary = RunSummary {
        version: manifest.version.clone(),
        master_seed: cfg.run.seed,
        rounds: log.rounds.len(),
        heterogeneity: last.heterogeneity,
        final_acc_local_mean: last.acc_local_mean,
        final_acc_local_std: last.acc_local_std,
        final_acc_global_mean: last.acc_global_mean,
        final_acc_global_std: last.acc_global_std,
        final_i1: last.i1,
        final_i2: last.i2,
        final_i3: last.i3,
        final_i4: last.i4,
        total_flops: last.i5_flops,
        total_latency_s: last.i6_latency_s,
        total_desync_s: last.i7_desync_s,
        last_round_plans: last.plans.clone(),
    };
    std::fs::write(
        &outputs.summary,
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.into()))?,
    )?;
    Ok(outputs)
}

/// Grid sweep over aggregators: one FedAvg cell plus one G-Fedfilt cell per
/// mu_s value, each in its own CSV. Cells run in parallel with isolated
/// state and files.
pub fn sweep_to_dir(base: &ExperimentConfig, out_dir: &Path, mu_grid: &[f64]) -> Result<Vec<RunOutputs>> {
    base.validate()?;
    if mu_grid.is_empty() {
        return Err(Error::input("sweep needs at least one mu_s value"));
    }
    let mut cells = Vec::new();
    {
        let mut cfg = base.clone();
        cfg.run.aggregator = AggregatorKind::FedAvg;
        cells.push(cfg);
    }
    for &mu in mu_grid {
        let mut cfg = base.clone();
        cfg.run.aggregator = AggregatorKind::GFedfilt;
        cfg.run.mu_s = mu;
        cells.push(cfg);
    }
    cells
        .par_iter()
        .map(|cfg| run_named(cfg, out_dir, &file_stem(cfg)))
        .collect()
}

/// One self-check outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Runtime verification suites: spectral correctness on random graphs, the
/// round-plan solver against a brute-force grid, and analytic gradients
/// against finite differences.
pub fn verify_suites() -> Vec<CheckResult> {
    vec![verify_spectral(), verify_optimizer(), verify_gradient()]
}

fn verify_spectral() -> CheckResult {
    use crate::graph::Graph;
    use crate::linalg::Mat;
    use crate::spectral::eigendecompose;
    use rand::Rng;

    let mut worst = 0.0_f64;
    let mut component_mismatch = None;
    for seed in 0..20u64 {
        let mut rng = crate::seed::stream(seed, 77);
        let k = rng.random_range(2..=32);
        let mut adj = Mat::zeros(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                if rng.random_range(0.0..1.0) < 0.3 {
                    adj[(i, j)] = 1.0;
                    adj[(j, i)] = 1.0;
                }
            }
        }
        let graph = Graph::from_adjacency_unclustered(adj).unwrap();
        let l = graph.laplacian();
        let s = match eigendecompose(&l) {
            Ok(s) => s,
            Err(e) => {
                return CheckResult {
                    name: "spectral".into(),
                    passed: false,
                    detail: format!("seed {seed}: {e}"),
                }
            }
        };
        let v = &s.eigenvectors;
        let mut lam = Mat::zeros(k, k);
        for (i, &e) in s.eigenvalues.iter().enumerate() {
            lam[(i, i)] = e;
        }
        let lv = l.matmul(v);
        let vl = v.matmul(&lam);
        worst = worst.max(lv.max_abs_diff(&vl));
        let vtv = v.transpose().matmul(v);
        worst = worst.max(vtv.max_abs_diff(&Mat::identity(k)));
        let zeros = s.zero_eigenvalue_count(1e-8);
        let components = graph.connected_components().len();
        if zeros != components {
            component_mismatch = Some((seed, zeros, components));
        }
    }
    let passed = worst < 1e-8 && component_mismatch.is_none();
    CheckResult {
        name: "spectral".into(),
        passed,
        detail: match component_mismatch {
            Some((seed, z, c)) => format!("seed {seed}: {z} zero eigenvalues vs {c} components"),
            None => format!("max residual {worst:.3e} over 20 graphs"),
        },
    }
}

fn verify_optimizer() -> CheckResult {
    match crate::schedule::oracle::compare_on_random_instances(50, 1e-3, 1e-2) {
        Ok(worst_gap) => CheckResult {
            name: "optimizer-oracle".into(),
            passed: true,
            detail: format!("worst objective gap {worst_gap:.3e} over 50 instances"),
        },
        Err(detail) => CheckResult {
            name: "optimizer-oracle".into(),
            passed: false,
            detail,
        },
    }
}

fn verify_gradient() -> CheckResult {
    use crate::learner::{loss_and_gradient, Batch, ModelConfig, Weights};
    use crate::linalg::Mat;
    use rand::Rng;

    let mut worst = 0.0_f64;
    for seed in 0..5u64 {
        let cfg = ModelConfig::new(vec![4, 7, 3], seed).unwrap();
        let mut rng = crate::seed::stream(seed, 99);
        let w = Weights::init(&cfg, &mut rng);
        let inputs = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
        let batch = Batch::new(inputs, labels).unwrap();
        let (_, grad) = loss_and_gradient(&w, &batch).unwrap();
        let eps = 1e-5;
        for t in 0..20 {
            let idx = (t * 13 + seed as usize * 7) % w.len();
            let mut plus = w.clone();
            plus.flat_mut()[idx] += eps;
            let mut minus = w.clone();
            minus.flat_mut()[idx] -= eps;
            let (lp, _) = loss_and_gradient(&plus, &batch).unwrap();
            let (lm, _) = loss_and_gradient(&minus, &batch).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let denom = fd.abs().max(grad[idx].abs()).max(1e-8);
            worst = worst.max((fd - grad[idx]).abs() / denom);
        }
    }
    CheckResult {
        name: "gradient".into(),
        passed: worst < 1e-4,
        detail: format!("worst relative error {worst:.3e}"),
    }
}
