//! Communication-round orchestration: local updates in parallel, gradient
//! stacking, filtered (or FedAvg) aggregation, broadcast, and metric
//! accounting. Simulated time comes from the cost model, never wall clock.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    AggregatorKind, DataSource, ExperimentConfig, GraphSource, SpecSource,
};
use crate::data::{partition, synth_gaussian_pool, DeviceData, LabeledPool, PartitionSpec};
use crate::error::{Error, Result};
use crate::filter::{aggregate, build_filter_matrix, fedavg, AggregationWeights, FilterSpec, GradientMatrix};
use crate::graph::{device_ids_from_clusters, Graph};
use crate::learner::{client_update, predict, ModelConfig, Weights};
use crate::linalg::Mat;
use crate::metrics::{MetricsLog, PlanTriple, RoundMetrics};
use crate::schedule::{payload_size, solve_round_plan, sparsify, RoundPlan, ScheduleBounds};
use crate::seed::{self, DOMAIN_DATA, DOMAIN_GRAPH, DOMAIN_INIT, DOMAIN_SPECS};
use crate::spectral::eigendecompose;
use crate::sysmodel::{heterogeneity_indicator, round_costs, DeviceSpec};

/// Aggregation rule applied at the server each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregator {
    /// Spectral graph filtering with the given smoothing parameter.
    GFedfilt { mu_s: f64 },
    /// Data-size-weighted mean broadcast identically to every device.
    FedAvg,
}

/// Everything a simulation needs, assembled either from an
/// `ExperimentConfig` or directly by library users and tests.
pub struct EngineParts {
    pub graph: Graph,
    pub device_data: Vec<DeviceData>,
    pub global_test: LabeledPool,
    pub specs: Vec<DeviceSpec>,
    pub model: ModelConfig,
    pub aggregator: Aggregator,
    pub optimize: bool,
    pub eta: f64,
    pub batch_size: usize,
    pub alpha_default: u32,
    pub bounds: ScheduleBounds,
    pub noise_dbm_per_hz: f64,
    pub master_seed: u64,
    pub rounds: usize,
}

struct ClientState {
    weights: Weights,
    rng: ChaCha8Rng,
}

pub struct Engine {
    parts: EngineParts,
    clients: Vec<ClientState>,
    /// Cached filter matrix; the graph and mu_s are fixed for a run.
    h_matrix: Option<Mat>,
    kappa: AggregationWeights,
    fedavg_weights: Vec<f64>,
    flops_per_sample: u64,
    param_count: usize,
    heterogeneity: f64,
    round_index: usize,
    i5_flops: u64,
    i6_latency_s: f64,
    i7_desync_s: f64,
}

impl Engine {
    pub fn new(parts: EngineParts) -> Result<Engine> {
        let k = parts.graph.len();
        if parts.device_data.len() != k {
            return Err(Error::input(format!(
                "{} device datasets for a {k}-device graph",
                parts.device_data.len()
            )));
        }
        if parts.specs.len() != k {
            return Err(Error::input(format!(
                "{} device specs for a {k}-device graph",
                parts.specs.len()
            )));
        }
        for (i, d) in parts.device_data.iter().enumerate() {
            if d.train.dim() != parts.model.input_dim() {
                return Err(Error::input(format!(
                    "device {i}: {}-dimensional data for a {}-input model",
                    d.train.dim(),
                    parts.model.input_dim()
                )));
            }
        }
        if parts.rounds == 0 {
            return Err(Error::input("round count must be at least 1"));
        }

        let h_matrix = match parts.aggregator {
            Aggregator::GFedfilt { mu_s } => {
                let spectrum = eigendecompose(&parts.graph.laplacian())?;
                Some(build_filter_matrix(&spectrum, &FilterSpec::new(mu_s)?)?)
            }
            Aggregator::FedAvg => None,
        };

        let sizes: Vec<usize> = parts.device_data.iter().map(|d| d.train.len()).collect();
        let kappa = AggregationWeights::from_data_sizes(&sizes)?;
        let total: usize = sizes.iter().sum();
        let fedavg_weights: Vec<f64> = sizes.iter().map(|&s| s as f64 / total as f64).collect();

        // Identical initial weights on every device, per-device round streams.
        let mut init_rng = seed::stream(parts.master_seed, DOMAIN_INIT);
        let initial = Weights::init(&parts.model, &mut init_rng);
        let clients = (0..k)
            .map(|i| ClientState {
                weights: initial.clone(),
                rng: seed::device_stream(parts.master_seed, i),
            })
            .collect();

        let heterogeneity = heterogeneity_indicator(
            &parts.specs,
            parts.alpha_default,
            parts.noise_dbm_per_hz,
        )?;
        let flops_per_sample = parts.model.flops_per_sample();
        let param_count = parts.model.param_count();
        Ok(Engine {
            parts,
            clients,
            h_matrix,
            kappa,
            fedavg_weights,
            flops_per_sample,
            param_count,
            heterogeneity,
            round_index: 0,
            i5_flops: 0,
            i6_latency_s: 0.0,
            i7_desync_s: 0.0,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Engine> {
        cfg.validate()?;
        let parts = assemble(cfg)?;
        Engine::new(parts)
    }

    pub fn device_count(&self) -> usize {
        self.parts.graph.len()
    }

    pub fn graph(&self) -> &Graph {
        &self.parts.graph
    }

    pub fn heterogeneity(&self) -> f64 {
        self.heterogeneity
    }

    pub fn client_weights(&self, device: usize) -> &Weights {
        &self.clients[device].weights
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// The plan the optimizer would issue for the next round.
    pub fn plan(&self) -> Result<RoundPlan> {
        let sizes: Vec<usize> = self.parts.device_data.iter().map(|d| d.train.len()).collect();
        solve_round_plan(
            &self.parts.specs,
            &sizes,
            self.param_count,
            &self.parts.bounds,
            self.parts.noise_dbm_per_hz,
        )
    }

    /// Execute one communication round and return its metrics row.
    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        self.round_index += 1;
        let round = self.round_index;
        let plan = if self.parts.optimize { Some(self.plan()?) } else { None };

        let parts = &self.parts;
        let eta = parts.eta;
        let batch_size = parts.batch_size;
        let param_count = self.param_count;
        let plan_ref = plan.as_ref();

        struct DeviceOutcome {
            update: Vec<f64>,
            alpha: u32,
            q: f64,
            z: f64,
            samples: usize,
            payload_bits: u64,
        }

        let outcomes: Result<Vec<DeviceOutcome>> = self
            .clients
            .par_iter_mut()
            .enumerate()
            .map(|(i, client)| {
                let data = &parts.device_data[i];
                let (alpha, q, z, samples, payload_bits) = match plan_ref {
                    Some(p) => {
                        let d = &p.devices[i];
                        (d.alpha, d.q, d.z, d.samples, d.payload_bits)
                    }
                    None => (
                        parts.alpha_default,
                        1.0,
                        1.0,
                        data.train.len(),
                        payload_size(param_count, 1.0)?,
                    ),
                };
                let updated = client_update(
                    &client.weights,
                    &data.train,
                    alpha,
                    q,
                    batch_size,
                    eta,
                    &mut client.rng,
                )
                .map_err(|e| {
                    Error::numeric(format!(
                        "round {round}: device {} failed: {e}",
                        parts.graph.device_ids()[i]
                    ))
                })?;
                let mut update: Vec<f64> = updated
                    .flat()
                    .iter()
                    .zip(client.weights.flat())
                    .map(|(new, old)| new - old)
                    .collect();
                if update.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numeric(format!(
                        "round {round}: non-finite gradient from device {}",
                        parts.graph.device_ids()[i]
                    )));
                }
                if z < 1.0 {
                    update = sparsify(&update, z)?.densify();
                }
                Ok(DeviceOutcome {
                    update,
                    alpha,
                    q,
                    z,
                    samples,
                    payload_bits,
                })
            })
            .collect();
        let outcomes = outcomes?;

        // Stack and aggregate.
        let k = self.device_count();
        let mut stacked = Mat::zeros(k, param_count);
        for (i, o) in outcomes.iter().enumerate() {
            stacked.row_mut(i).copy_from_slice(&o.update);
        }
        let gradients = GradientMatrix::new(stacked)?;
        let broadcast: Mat = match (&self.parts.aggregator, &self.h_matrix) {
            (Aggregator::GFedfilt { .. }, Some(h)) => {
                aggregate(h, &self.kappa, &gradients)?.values().clone()
            }
            (Aggregator::FedAvg, _) => {
                let mean = fedavg(&self.fedavg_weights, &gradients)?;
                Mat::from_fn(k, param_count, |_, j| mean[j])
            }
            (Aggregator::GFedfilt { .. }, None) => unreachable!("filter matrix built in new()"),
        };
        for (i, client) in self.clients.iter_mut().enumerate() {
            client.weights.add_assign(broadcast.row(i));
        }

        // Cost accounting from the actual per-device assignments.
        let mut t_round = f64::NEG_INFINITY;
        let mut t_min = f64::INFINITY;
        for (o, spec) in outcomes.iter().zip(&self.parts.specs) {
            let costs = round_costs(
                spec,
                o.alpha,
                o.samples,
                o.payload_bits,
                self.parts.noise_dbm_per_hz,
            )?;
            let tau = costs.tau_total();
            t_round = t_round.max(tau);
            t_min = t_min.min(tau);
            self.i5_flops += o.alpha as u64 * self.flops_per_sample * o.samples as u64;
        }
        self.i6_latency_s += t_round;
        self.i7_desync_s += t_round - t_min;

        let eval = self.evaluate_now()?;
        Ok(RoundMetrics {
            round,
            acc_local_mean: mean(&eval.local_accuracies),
            acc_local_std: std_dev(&eval.local_accuracies),
            acc_global_mean: mean(&eval.global_accuracies),
            acc_global_std: std_dev(&eval.global_accuracies),
            i1: eval.i1,
            i2: eval.i2,
            i3: eval.i3,
            i4: eval.i4,
            i5_flops: self.i5_flops,
            i6_latency_s: self.i6_latency_s,
            i7_desync_s: self.i7_desync_s,
            t_round_s: t_round,
            heterogeneity: self.heterogeneity,
            plans: outcomes
                .iter()
                .map(|o| PlanTriple {
                    alpha: o.alpha,
                    q: o.q,
                    z: o.z,
                })
                .collect(),
        })
    }

    /// Evaluate the current client models.
    pub fn evaluate_now(&self) -> Result<Evaluation> {
        let weights: Vec<&Weights> = self.clients.iter().map(|c| &c.weights).collect();
        let locals: Vec<&LabeledPool> =
            self.parts.device_data.iter().map(|d| &d.local_test).collect();
        evaluate(&weights, &locals, &self.parts.global_test)
    }

    /// Run all configured rounds.
    pub fn run(&mut self) -> Result<MetricsLog> {
        let mut log = MetricsLog::default();
        for _ in 0..self.parts.rounds {
            log.rounds.push(self.run_round()?);
        }
        Ok(log)
    }
}

/// Run a full experiment from a configuration; deterministic under its seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsLog> {
    Engine::from_config(cfg)?.run()
}

/// Pooled and per-device evaluation results.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub local_accuracies: Vec<f64>,
    pub global_accuracies: Vec<f64>,
    /// Pooled local-test confusion matrix, rows = true class.
    pub confusion_total: Vec<Vec<u64>>,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
}

/// Per-device confusion matrices on the local tests, summed into one pooled
/// matrix for I1-I4; per-device accuracy on both local and global tests.
pub fn evaluate(
    weights: &[&Weights],
    local_tests: &[&LabeledPool],
    global_test: &LabeledPool,
) -> Result<Evaluation> {
    if weights.len() != local_tests.len() {
        return Err(Error::input("one local test set per device required"));
    }
    if global_test.is_empty() {
        return Err(Error::input("global test set is empty"));
    }
    if local_tests.iter().any(|t| t.is_empty()) {
        return Err(Error::input("local test set is empty"));
    }
    let n_classes = global_test.classes();

    type DeviceEval = (Vec<Vec<u64>>, f64, f64);
    let per_device: Result<Vec<DeviceEval>> = weights
        .par_iter()
        .zip(local_tests.par_iter())
        .map(|(w, local)| {
            let cm = confusion_matrix(w, local, n_classes)?;
            let local_acc = accuracy_of(&cm);
            let preds = predict(w, global_test.inputs())?;
            let correct = preds
                .iter()
                .zip(global_test.labels())
                .filter(|(p, y)| p == y)
                .count();
            let global_acc = correct as f64 / global_test.len() as f64;
            Ok((cm, local_acc, global_acc))
        })
        .collect();
    let per_device = per_device?;

    let mut total = vec![vec![0u64; n_classes]; n_classes];
    let mut local_accuracies = Vec::with_capacity(weights.len());
    let mut global_accuracies = Vec::with_capacity(weights.len());
    for (cm, local_acc, global_acc) in per_device {
        for (trow, row) in total.iter_mut().zip(cm) {
            for (t, v) in trow.iter_mut().zip(row) {
                *t += v;
            }
        }
        local_accuracies.push(local_acc);
        global_accuracies.push(global_acc);
    }

    let (i1, i2, i3, i4) = pooled_indices(&total);
    Ok(Evaluation {
        local_accuracies,
        global_accuracies,
        confusion_total: total,
        i1,
        i2,
        i3,
        i4,
    })
}

/// Confusion matrix of one model on one pool; rows are true classes,
/// columns predictions.
pub fn confusion_matrix(
    weights: &Weights,
    pool: &LabeledPool,
    n_classes: usize,
) -> Result<Vec<Vec<u64>>> {
    let preds = predict(weights, pool.inputs())?;
    let mut cm = vec![vec![0u64; n_classes]; n_classes];
    for (&pred, &truth) in preds.iter().zip(pool.labels()) {
        cm[truth][pred] += 1;
    }
    Ok(cm)
}

fn accuracy_of(cm: &[Vec<u64>]) -> f64 {
    let total: u64 = cm.iter().flatten().sum();
    let correct: u64 = (0..cm.len()).map(|i| cm[i][i]).sum();
    correct as f64 / total as f64
}

/// Accuracy, macro precision, macro recall, and their harmonic mean from a
/// pooled confusion matrix. Classes with no predicted (or true) positives
/// contribute zero to the macro averages.
pub fn pooled_indices(cm: &[Vec<u64>]) -> (f64, f64, f64, f64) {
    let n = cm.len();
    let total: u64 = cm.iter().flatten().sum();
    let correct: u64 = (0..n).map(|i| cm[i][i]).sum();
    let i1 = correct as f64 / total as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    for (c, row) in cm.iter().enumerate() {
        let tp = row[c] as f64;
        let predicted: u64 = cm.iter().map(|r| r[c]).sum();
        let actual: u64 = row.iter().sum();
        if predicted > 0 {
            precision += tp / predicted as f64;
        }
        if actual > 0 {
            recall += tp / actual as f64;
        }
    }
    let i2 = precision / n as f64;
    let i3 = recall / n as f64;
    let i4 = if i2 + i3 > 0.0 {
        2.0 * i2 * i3 / (i2 + i3)
    } else {
        0.0
    };
    (i1, i2, i3, i4)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Build all simulation inputs from a configuration.
pub fn assemble(cfg: &ExperimentConfig) -> Result<EngineParts> {
    let master = cfg.run.seed;
    let graph = match &cfg.graph.source {
        GraphSource::Sample => sample_graph(
            seed::split(master, DOMAIN_GRAPH),
            cfg.graph.rooms,
            cfg.graph.devices,
            cfg.graph.d_max,
        )?,
        GraphSource::Positions(path) => Graph::load_positions_file(path, cfg.graph.d_max)?,
        GraphSource::Adjacency(path) => Graph::load_adjacency_file(path)?,
    };
    let k = graph.len();

    let mut data_rng = seed::stream(master, DOMAIN_DATA);
    let pool = match &cfg.data.source {
        DataSource::Synthetic => synth_gaussian_pool(
            cfg.data.classes,
            cfg.data.feature_dim,
            cfg.data.per_class,
            cfg.data.separation,
            &mut data_rng,
        )?,
        DataSource::Mnist(dir) => crate::data::load_mnist_idx(
            dir.join("train-images-idx3-ubyte"),
            dir.join("train-labels-idx1-ubyte"),
        )?,
    };
    let partition_spec = PartitionSpec {
        labels_per_device: cfg.data.labels_per_device,
        train_per_device: cfg.data.train_per_device,
        local_test_per_device: cfg.data.local_test_per_device,
        global_test_size: cfg.data.global_test_size,
        setup: cfg.data.setup,
    };
    let (device_data, global_test) = partition(&pool, &partition_spec, &graph, &mut data_rng)?;

    let specs = match &cfg.system.source {
        SpecSource::Sample => crate::config::sample_device_specs(
            seed::split(master, DOMAIN_SPECS),
            k,
            &cfg.system,
        )?,
        SpecSource::File(path) => {
            let specs = crate::config::load_device_specs(path)?;
            if specs.len() != k {
                return Err(Error::input(format!(
                    "spec file holds {} devices, graph has {k}",
                    specs.len()
                )));
            }
            specs
        }
    };

    let mut layer_sizes = Vec::with_capacity(cfg.model.hidden.len() + 2);
    layer_sizes.push(pool.dim());
    layer_sizes.extend(&cfg.model.hidden);
    layer_sizes.push(pool.classes());
    let model = ModelConfig::new(layer_sizes, seed::split(master, DOMAIN_INIT))?;

    Ok(EngineParts {
        graph,
        device_data,
        global_test,
        specs,
        model,
        aggregator: match cfg.run.aggregator {
            AggregatorKind::FedAvg => Aggregator::FedAvg,
            AggregatorKind::GFedfilt => Aggregator::GFedfilt { mu_s: cfg.run.mu_s },
        },
        optimize: cfg.run.optimize,
        eta: cfg.model.eta,
        batch_size: cfg.model.batch_size,
        alpha_default: cfg.model.alpha,
        bounds: cfg.schedule.bounds()?,
        noise_dbm_per_hz: cfg.system.noise_dbm_per_hz,
        master_seed: master,
        rounds: cfg.run.rounds,
    })
}

/// Sample a building layout: rooms on a grid of 10 m cubes, room occupancies
/// uniform in [4, 7] when they can sum to the device count (near-even split
/// otherwise), device positions uniform inside their room.
pub fn sample_graph(seed: u64, rooms: usize, devices: usize, d_max: f64) -> Result<Graph> {
    let mut rng = seed::stream(seed, 0);
    let sizes = sample_room_sizes(&mut rng, rooms, devices);
    let side = (rooms as f64).sqrt().ceil() as usize;
    let mut positions = Vec::with_capacity(devices);
    let mut clusters = Vec::with_capacity(devices);
    for (room, &count) in sizes.iter().enumerate() {
        let x0 = 10.0 * (room % side) as f64;
        let y0 = 10.0 * (room / side) as f64;
        for _ in 0..count {
            positions.push([
                x0 + rng.random_range(0.0..10.0),
                y0 + rng.random_range(0.0..10.0),
                rng.random_range(0.0..10.0),
            ]);
            clusters.push(room);
        }
    }
    Graph::from_positions(&positions, device_ids_from_clusters(&clusters)?, d_max)
}

fn sample_room_sizes(rng: &mut ChaCha8Rng, rooms: usize, devices: usize) -> Vec<usize> {
    if devices >= 4 * rooms && devices <= 7 * rooms {
        for _ in 0..10_000 {
            let draw: Vec<usize> = (0..rooms).map(|_| rng.random_range(4..=7)).collect();
            if draw.iter().sum::<usize>() == devices {
                return draw;
            }
        }
    }
    let base = devices / rooms;
    let extra = devices % rooms;
    (0..rooms).map(|i| base + usize::from(i < extra)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Setup;

    fn desk_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.run.rounds = 2;
        cfg.run.seed = 5;
        cfg.model.hidden = vec![8];
        cfg.model.eta = 0.05;
        cfg.data.feature_dim = 6;
        cfg.data.classes = 4;
        cfg.data.per_class = 400;
        cfg.data.labels_per_device = 2;
        cfg.data.train_per_device = 30;
        cfg.data.local_test_per_device = 10;
        cfg.data.global_test_size = 20;
        cfg.graph.devices = 8;
        cfg.graph.rooms = 2;
        cfg
    }

    #[test]
    fn sampled_graph_respects_room_occupancy() {
        let g = sample_graph(3, 4, 20, 10.0).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.cluster_count(), 4);
        let mut counts = [0usize; 4];
        for id in g.device_ids() {
            counts[id.cluster] += 1;
        }
        assert!(counts.iter().all(|&c| (4..=7).contains(&c)));
        assert_eq!(counts.iter().sum::<usize>(), 20);
    }

    #[test]
    fn engine_runs_and_is_deterministic() {
        let cfg = desk_config();
        let log1 = run_experiment(&cfg).unwrap();
        let log2 = run_experiment(&cfg).unwrap();
        assert_eq!(log1, log2);
        assert_eq!(log1.rounds.len(), 2);
        assert_eq!(log1.to_csv(), log2.to_csv());
    }

    #[test]
    fn zero_learning_rate_keeps_baseline_accuracy_but_counts_flops() {
        let mut cfg = desk_config();
        cfg.run.rounds = 1;
        cfg.model.eta = 0.0;
        let engine = Engine::from_config(&cfg).unwrap();
        let baseline = engine.evaluate_now().unwrap();
        let log = run_experiment(&cfg).unwrap();
        let row = &log.rounds[0];
        assert!((row.acc_local_mean - mean(&baseline.local_accuracies)).abs() < 1e-12);
        assert!(row.i5_flops > 0);
    }

    #[test]
    fn fedavg_regime_keeps_weights_synchronized() {
        let mut cfg = desk_config();
        cfg.run.aggregator = AggregatorKind::GFedfilt;
        cfg.run.mu_s = 1e12;
        cfg.run.rounds = 1;
        // A single room gives a connected sampled graph.
        cfg.graph.rooms = 1;
        cfg.graph.devices = 5;
        cfg.graph.d_max = 30.0;
        cfg.data.labels_per_device = 4;
        let mut engine = Engine::from_config(&cfg).unwrap();
        assert_eq!(engine.graph().connected_components().len(), 1);
        for _ in 0..2 {
            engine.run_round().unwrap();
            let w0 = engine.client_weights(0).flat().to_vec();
            for d in 1..engine.device_count() {
                let wd = engine.client_weights(d).flat();
                let max_diff = w0
                    .iter()
                    .zip(wd)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(max_diff < 1e-5, "device {d} drifted by {max_diff}");
            }
        }
    }

    #[test]
    fn all_pass_aggregation_keeps_local_updates() {
        let mut cfg = desk_config();
        cfg.run.mu_s = 0.0;
        cfg.run.rounds = 1;
        let mut engine = Engine::from_config(&cfg).unwrap();

        // Replay the same local updates with an identical engine to know the
        // locally updated weights.
        let mut replica = Engine::from_config(&cfg).unwrap();
        let mut expected = Vec::new();
        for i in 0..replica.device_count() {
            let weights = replica.clients[i].weights.clone();
            let updated = client_update(
                &weights,
                &replica.parts.device_data[i].train,
                replica.parts.alpha_default,
                1.0,
                replica.parts.batch_size,
                replica.parts.eta,
                &mut replica.clients[i].rng,
            )
            .unwrap();
            expected.push(updated);
        }

        engine.run_round().unwrap();
        for (i, exp) in expected.iter().enumerate() {
            let got = engine.client_weights(i).flat();
            let max_diff = got
                .iter()
                .zip(exp.flat())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(max_diff < 1e-9, "device {i} deviates by {max_diff}");
        }
    }

    #[test]
    fn optimizer_keeps_desync_within_a_quantization_step() {
        let mut cfg = desk_config();
        cfg.run.optimize = true;
        cfg.run.rounds = 1;
        // Moderate heterogeneity so no device saturates its boxes.
        cfg.system.cpu_hz.min = 1.5e9;
        cfg.system.cpu_hz.max = 2.5e9;
        cfg.system.cycles_per_sample.min = 2e4;
        cfg.system.cycles_per_sample.max = 3e4;
        let engine = Engine::from_config(&cfg).unwrap();
        let plan = engine.plan().unwrap();
        let slowest_step = plan
            .devices
            .iter()
            .zip(&engine.parts.specs)
            .map(|(d, s)| crate::sysmodel::comp_delay(s, 1, d.samples))
            .fold(0.0_f64, f64::max);
        for d in &plan.devices {
            assert!(d.predicted_tau <= plan.t_opt);
            assert!(plan.t_opt - d.predicted_tau <= slowest_step + 1e-12);
        }
    }

    #[test]
    fn disabled_optimizer_uses_default_cost_model() {
        let mut cfg = desk_config();
        cfg.run.rounds = 1;
        let mut engine = Engine::from_config(&cfg).unwrap();
        let row = engine.run_round().unwrap();
        // Recompute the expected latency directly.
        let b = engine.param_count();
        let mut expected_max = f64::NEG_INFINITY;
        let mut expected_min = f64::INFINITY;
        for (spec, data) in engine.parts.specs.iter().zip(&engine.parts.device_data) {
            let costs = round_costs(
                spec,
                cfg.model.alpha,
                data.train.len(),
                payload_size(b, 1.0).unwrap(),
                cfg.system.noise_dbm_per_hz,
            )
            .unwrap();
            expected_max = expected_max.max(costs.tau_total());
            expected_min = expected_min.min(costs.tau_total());
        }
        assert!((row.t_round_s - expected_max).abs() < 1e-15);
        assert!((row.i7_desync_s - (expected_max - expected_min)).abs() < 1e-15);
    }

    #[test]
    fn evaluation_count_conservation() {
        let cfg = desk_config();
        let engine = Engine::from_config(&cfg).unwrap();
        let eval = engine.evaluate_now().unwrap();
        let total: u64 = eval.confusion_total.iter().flatten().sum();
        assert_eq!(
            total,
            (engine.device_count() * cfg.data.local_test_per_device) as u64
        );
    }

    #[test]
    fn perfect_and_constant_classifier_indices() {
        // Perfect classifier: identity confusion.
        let cm_perfect = [vec![10, 0], vec![0, 10]];
        let (i1, i2, i3, i4) = pooled_indices(&cm_perfect);
        assert_eq!((i1, i2, i3, i4), (1.0, 1.0, 1.0, 1.0));

        // Constant classifier predicting class 0 on a balanced 2-class set.
        let cm_constant = [vec![10, 0], vec![10, 0]];
        let (i1, i2, i3, i4) = pooled_indices(&cm_constant);
        assert_eq!(i1, 0.5);
        assert_eq!(i2, 0.25);
        assert_eq!(i3, 0.5);
        assert!((i4 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_accuracy_is_sample_weighted_mean() {
        let cfg = desk_config();
        let engine = Engine::from_config(&cfg).unwrap();
        let eval = engine.evaluate_now().unwrap();
        // Equal-size local tests: pooled accuracy equals the plain mean.
        assert!((eval.i1 - mean(&eval.local_accuracies)).abs() < 1e-12);
    }

    #[test]
    fn desync_strictly_below_latency_when_devices_differ() {
        let mut cfg = desk_config();
        cfg.run.rounds = 1;
        let log = run_experiment(&cfg).unwrap();
        let row = &log.rounds[0];
        assert!(row.i6_latency_s > row.i7_desync_s);
        assert!(row.i7_desync_s >= 0.0);
    }

    #[test]
    fn setup_values_affect_partition() {
        let mut c1 = desk_config();
        c1.data.setup = Setup::ClusterAligned;
        let mut c2 = desk_config();
        c2.data.setup = Setup::Random;
        let e1 = Engine::from_config(&c1).unwrap();
        let e2 = Engine::from_config(&c2).unwrap();
        let sets1: Vec<_> = e1.parts.device_data.iter().map(|d| d.allowed_labels.clone()).collect();
        let sets2: Vec<_> = e2.parts.device_data.iter().map(|d| d.allowed_labels.clone()).collect();
        assert_ne!(sets1, sets2);
    }
}
