//! Per-round communication scheduling: the top-k gradient sparsifier, its
//! wire-size model, the round deadline, and the per-device plan solver that
//! equalizes device latencies at that deadline.
//!
//! Given the deadline, the per-device problem is separable. For each integer
//! epoch count the solver walks the feasible sample counts and picks the
//! largest payload the latency and energy budgets admit, so the returned plan
//! is exact under the integer quantization of samples and kept coefficients
//! (a continuous relaxation plus rounding can overshoot the deadline).

use crate::error::{Error, Result};
use crate::sysmodel::{comp_delay, comp_energy, tran_rate, DeviceSpec};

const VALUE_BITS: u64 = 32;
const INDEX_BITS: u64 = 32;

/// Box constraints and objective weights of the per-round plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleBounds {
    pub alpha_min: u32,
    pub alpha_max: u32,
    pub q_min: f64,
    pub z_min: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl ScheduleBounds {
    pub fn new(
        alpha_min: u32,
        alpha_max: u32,
        q_min: f64,
        z_min: f64,
        mu1: f64,
        mu2: f64,
        mu3: f64,
    ) -> Result<ScheduleBounds> {
        if alpha_min < 1 || alpha_min > alpha_max {
            return Err(Error::input(format!(
                "epoch bounds must satisfy 1 <= alpha_min <= alpha_max, got [{alpha_min}, {alpha_max}]"
            )));
        }
        if !(q_min > 0.0 && q_min <= 1.0) {
            return Err(Error::input(format!("q_min must be in (0, 1], got {q_min}")));
        }
        if !(z_min > 0.0 && z_min <= 1.0) {
            return Err(Error::input(format!("z_min must be in (0, 1], got {z_min}")));
        }
        for (name, v) in [("mu1", mu1), ("mu2", mu2), ("mu3", mu3)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::input(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if (mu1 + mu2 + mu3 - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "objective weights must sum to 1, got {}",
                mu1 + mu2 + mu3
            )));
        }
        Ok(ScheduleBounds {
            alpha_min,
            alpha_max,
            q_min,
            z_min,
            mu1,
            mu2,
            mu3,
        })
    }
}

/// Integer count with a guard against float noise: values within 1e-9 of an
/// integer round to it instead of being ceiled past it.
fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Number of training samples used at fraction q: ceil(q * |D|).
/// Rejects fractions selecting less than one sample.
pub fn samples_used(dataset_size: usize, q: f64) -> Result<usize> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::input(format!("q must be in (0, 1], got {q}")));
    }
    let product = q * dataset_size as f64;
    if product < 1.0 - 1e-9 {
        return Err(Error::input(format!(
            "q * |D| = {product:.3} selects less than one sample"
        )));
    }
    Ok(ceil_count(product).max(1))
}

/// Top-k magnitude sparsification of a flat gradient. Keeps the
/// ceil(z * B) entries of largest absolute value; ties break toward the
/// lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dense_len: usize,
}

impl SparseGradient {
    /// Expand back to a dense vector with zeros in the dropped positions.
    pub fn densify(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dense_len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

pub fn sparsify(gradient: &[f64], z: f64) -> Result<SparseGradient> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::input(format!("z must be in (0, 1], got {z}")));
    }
    let b = gradient.len();
    let keep = ceil_count(z * b as f64).clamp(1, b.max(1));
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| {
        gradient[j]
            .abs()
            .partial_cmp(&gradient[i].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    Ok(SparseGradient {
        values: kept.iter().map(|&i| gradient[i]).collect(),
        indices: kept,
        dense_len: b,
    })
}

/// Wire size in bits of a gradient with `dense_len` parameters sparsified to
/// fraction z. Sparse entries travel as (index, value) pairs; a dense
/// transmission (z = 1) needs no indices.
pub fn payload_size(dense_len: usize, z: f64) -> Result<u64> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::input(format!("z must be in (0, 1], got {z}")));
    }
    if z == 1.0 {
        Ok(dense_len as u64 * VALUE_BITS)
    } else {
        let kept = ceil_count(z * dense_len as f64) as u64;
        Ok(kept * (VALUE_BITS + INDEX_BITS))
    }
}

/// Per-device assignment for one communication round.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DevicePlan {
    pub alpha: u32,
    pub q: f64,
    pub z: f64,
    pub samples: usize,
    pub payload_bits: u64,
    pub predicted_tau: f64,
    pub predicted_energy: f64,
}

/// Round deadline plus every device's assignment.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RoundPlan {
    pub t_opt: f64,
    pub devices: Vec<DevicePlan>,
}

/// Round deadline: each device's lower-bound latency is evaluated at the
/// lowest admissible (alpha, q, z); the deadline is the slowest device's.
pub fn compute_t_opt(
    specs: &[DeviceSpec],
    dataset_sizes: &[usize],
    param_count: usize,
    bounds: &ScheduleBounds,
    noise_dbm_per_hz: f64,
) -> Result<f64> {
    if specs.is_empty() || specs.len() != dataset_sizes.len() {
        return Err(Error::input("specs and dataset sizes must align and be nonempty"));
    }
    let payload = payload_size(param_count, bounds.z_min)? as f64;
    let mut t_opt = 0.0_f64;
    for (spec, &d) in specs.iter().zip(dataset_sizes) {
        let n_min = samples_used(d, bounds.q_min)?;
        let rate = tran_rate(spec, noise_dbm_per_hz)?;
        let tau = comp_delay(spec, bounds.alpha_min, n_min) + payload / rate;
        t_opt = t_opt.max(tau);
    }
    Ok(t_opt)
}

struct DeviceBudget {
    rate: f64,
    dataset: usize,
    n_min: usize,
    /// Smallest admissible kept-coefficient count (z_min), capped for the
    /// sparse wire format.
    k_min: usize,
}

/// Solve the per-round plan: maximize
/// `mu1 * alpha/alpha_max + mu2 * q + mu3 * kept_fraction(z)` per device,
/// subject to the latency deadline, the energy budget, and the boxes.
/// The latency constraint is treated as "at the deadline" and the plan never
/// exceeds it; devices whose boxes saturate finish strictly earlier.
pub fn solve_round_plan(
    specs: &[DeviceSpec],
    dataset_sizes: &[usize],
    param_count: usize,
    bounds: &ScheduleBounds,
    noise_dbm_per_hz: f64,
) -> Result<RoundPlan> {
    let t_opt = compute_t_opt(specs, dataset_sizes, param_count, bounds, noise_dbm_per_hz)?;
    let mut devices = Vec::with_capacity(specs.len());
    for (i, (spec, &d)) in specs.iter().zip(dataset_sizes).enumerate() {
        let plan = solve_device(spec, d, param_count, bounds, t_opt, noise_dbm_per_hz)
            .map_err(|e| Error::solver(format!("device {i}: {e}")))?;
        devices.push(plan);
    }
    Ok(RoundPlan { t_opt, devices })
}

fn solve_device(
    spec: &DeviceSpec,
    dataset: usize,
    param_count: usize,
    bounds: &ScheduleBounds,
    t_opt: f64,
    noise: f64,
) -> Result<DevicePlan> {
    let rate = tran_rate(spec, noise)?;
    let b = param_count;
    let budget = DeviceBudget {
        rate,
        dataset,
        n_min: samples_used(dataset, bounds.q_min)?,
        k_min: if bounds.z_min == 1.0 {
            b
        } else {
            ceil_count(bounds.z_min * b as f64).clamp(1, b.saturating_sub(1).max(1))
        },
    };

    // Feasibility at the lower corner; cannot fail on latency by the
    // deadline's construction.
    let corner_payload = payload_size(b, bounds.z_min)?;
    let corner = evaluate(spec, bounds.alpha_min, budget.n_min, corner_payload, rate);
    if corner.0 > t_opt * (1.0 + 1e-12) {
        return Err(Error::solver(format!(
            "latency {:.6e}s at the lower corner exceeds the deadline {t_opt:.6e}s",
            corner.0
        )));
    }
    if corner.1 > spec.energy_budget_j {
        return Err(Error::solver(format!(
            "energy {:.6e}J at the lower corner exceeds the budget {:.6e}J",
            corner.1, spec.energy_budget_j
        )));
    }

    let mut best: Option<(f64, DevicePlan)> = None;
    for alpha in bounds.alpha_min..=bounds.alpha_max {
        // Dense candidate: z = 1, take the largest feasible sample count.
        if let Some(n) = max_samples(spec, alpha, b as u64 * VALUE_BITS, &budget, t_opt) {
            consider(
                &mut best,
                make_plan(spec, alpha, n, b, None, &budget, bounds, dataset),
            );
        }
        // Sparse candidates: for each sample count take the largest feasible
        // kept-coefficient count. Larger n can only shrink the best k, and
        // the objective gain per sample is fixed, so the scan is exhaustive.
        if budget.k_min < b {
            let k_min_bits = budget.k_min as u64 * (VALUE_BITS + INDEX_BITS);
            let Some(n_cap) = max_samples(spec, alpha, k_min_bits, &budget, t_opt) else {
                continue;
            };
            for n in budget.n_min..=n_cap {
                let Some(k) = max_kept(spec, alpha, n, &budget, bounds, t_opt, b) else {
                    break;
                };
                consider(
                    &mut best,
                    make_plan(spec, alpha, n, b, Some(k), &budget, bounds, dataset),
                );
            }
        }
    }

    best.map(|(_, plan)| plan).ok_or_else(|| {
        Error::solver("no feasible assignment found despite a feasible lower corner")
    })
}

/// Latency and energy of a candidate assignment.
fn evaluate(spec: &DeviceSpec, alpha: u32, n: usize, payload_bits: u64, rate: f64) -> (f64, f64) {
    let tau_comp = comp_delay(spec, alpha, n);
    let tau_tran = payload_bits as f64 / rate;
    let energy = comp_energy(spec, alpha, n) + spec.tx_power_w * tau_tran;
    (tau_comp + tau_tran, energy)
}

/// Largest sample count in [n_min, dataset] feasible with a fixed payload.
fn max_samples(
    spec: &DeviceSpec,
    alpha: u32,
    payload_bits: u64,
    budget: &DeviceBudget,
    t_opt: f64,
) -> Option<usize> {
    let tau_tran = payload_bits as f64 / budget.rate;
    let e_tran = spec.tx_power_w * tau_tran;
    let per_sample_t = comp_delay(spec, alpha, 1);
    let per_sample_e = comp_energy(spec, alpha, 1);
    let by_time = ((t_opt - tau_tran) / per_sample_t + 1e-9).floor();
    let by_energy = ((spec.energy_budget_j - e_tran) / per_sample_e + 1e-9).floor();
    let n = by_time.min(by_energy).min(budget.dataset as f64);
    if n < budget.n_min as f64 {
        return None;
    }
    let mut count = n as usize;
    // Guard against the float slack: never exceed either budget.
    loop {
        let (tau, e) = evaluate(spec, alpha, count, payload_bits, budget.rate);
        if (tau <= t_opt && e <= spec.energy_budget_j) || count == budget.n_min {
            break;
        }
        count -= 1;
    }
    let (tau, e) = evaluate(spec, alpha, count, payload_bits, budget.rate);
    if tau <= t_opt && e <= spec.energy_budget_j {
        Some(count)
    } else {
        None
    }
}

/// Largest kept-coefficient count in [k_min, B-1] feasible at (alpha, n).
fn max_kept(
    spec: &DeviceSpec,
    alpha: u32,
    n: usize,
    budget: &DeviceBudget,
    _bounds: &ScheduleBounds,
    t_opt: f64,
    b: usize,
) -> Option<usize> {
    let pair_bits = (VALUE_BITS + INDEX_BITS) as f64;
    let t_rem = t_opt - comp_delay(spec, alpha, n);
    let e_rem = spec.energy_budget_j - comp_energy(spec, alpha, n);
    let by_time = (t_rem * budget.rate / pair_bits + 1e-9).floor();
    let by_energy = (e_rem * budget.rate / (pair_bits * spec.tx_power_w) + 1e-9).floor();
    let cap = (b - 1) as f64;
    let k = by_time.min(by_energy).min(cap);
    if k < budget.k_min as f64 {
        return None;
    }
    let mut count = k as usize;
    loop {
        let bits = count as u64 * (VALUE_BITS + INDEX_BITS);
        let (tau, e) = evaluate(spec, alpha, n, bits, budget.rate);
        if (tau <= t_opt && e <= spec.energy_budget_j) || count == budget.k_min {
            break;
        }
        count -= 1;
    }
    let bits = count as u64 * (VALUE_BITS + INDEX_BITS);
    let (tau, e) = evaluate(spec, alpha, n, bits, budget.rate);
    if tau <= t_opt && e <= spec.energy_budget_j {
        Some(count)
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn make_plan(
    spec: &DeviceSpec,
    alpha: u32,
    n: usize,
    b: usize,
    kept: Option<usize>,
    budget: &DeviceBudget,
    bounds: &ScheduleBounds,
    dataset: usize,
) -> (f64, DevicePlan) {
    let (z, payload_bits, kept_fraction) = match kept {
        None => (1.0, b as u64 * VALUE_BITS, 1.0),
        Some(k) => (
            k as f64 / b as f64,
            k as u64 * (VALUE_BITS + INDEX_BITS),
            k as f64 / b as f64,
        ),
    };
    let q = n as f64 / dataset as f64;
    let (tau, energy) = evaluate(spec, alpha, n, payload_bits, budget.rate);
    let objective = bounds.mu1 * alpha as f64 / bounds.alpha_max as f64
        + bounds.mu2 * q
        + bounds.mu3 * kept_fraction;
    (
        objective,
        DevicePlan {
            alpha,
            q,
            z,
            samples: n,
            payload_bits,
            predicted_tau: tau,
            predicted_energy: energy,
        },
    )
}

fn consider(best: &mut Option<(f64, DevicePlan)>, candidate: (f64, DevicePlan)) {
    match best {
        None => *best = Some(candidate),
        Some((obj, _)) if candidate.0 > *obj + 1e-12 => *best = Some(candidate),
        _ => {}
    }
}

pub mod oracle {
    //! Brute-force verification of the round-plan solver: exhaustive grid
    //! search over (alpha, q, z) with the same cost model and objective.

    use super::*;
    use rand::Rng;

    /// Best grid objective for one device given the deadline, or None when
    /// no grid point is feasible.
    pub fn grid_best_objective(
        spec: &DeviceSpec,
        dataset: usize,
        param_count: usize,
        bounds: &ScheduleBounds,
        t_opt: f64,
        noise: f64,
        grid_step: f64,
    ) -> Result<Option<f64>> {
        let rate = tran_rate(spec, noise)?;
        let slack = t_opt * 1e-12;

        let mut q_points = Vec::new();
        let mut q = bounds.q_min;
        while q < 1.0 {
            q_points.push(q);
            q += grid_step;
        }
        q_points.push(1.0);
        let mut z_points = Vec::new();
        let mut z = bounds.z_min;
        while z < 1.0 {
            z_points.push(z);
            z += grid_step;
        }
        z_points.push(1.0);

        // Precompute the z-dependent pieces once.
        let z_cost: Vec<(f64, f64, f64)> = z_points
            .iter()
            .map(|&z| {
                let bits = payload_size(param_count, z).unwrap() as f64;
                let kept = if z == 1.0 {
                    1.0
                } else {
                    ceil_count(z * param_count as f64) as f64 / param_count as f64
                };
                (bits / rate, spec.tx_power_w * bits / rate, kept)
            })
            .collect();

        let mut best: Option<f64> = None;
        for alpha in bounds.alpha_min..=bounds.alpha_max {
            let per_sample_t = comp_delay(spec, alpha, 1);
            let per_sample_e = comp_energy(spec, alpha, 1);
            let alpha_term = bounds.mu1 * alpha as f64 / bounds.alpha_max as f64;
            for &q in &q_points {
                let n = samples_used(dataset, q)? as f64;
                let t_comp = n * per_sample_t;
                let e_comp = n * per_sample_e;
                if t_comp > t_opt + slack {
                    continue;
                }
                let base = alpha_term + bounds.mu2 * q;
                for &(t_tran, e_tran, kept) in &z_cost {
                    if t_comp + t_tran > t_opt + slack
                        || e_comp + e_tran > spec.energy_budget_j
                    {
                        continue;
                    }
                    let objective = base + bounds.mu3 * kept;
                    if best.is_none_or(|b| objective > b) {
                        best = Some(objective);
                    }
                }
            }
        }
        Ok(best)
    }

    /// Objective value of a solved device plan under the same normalization.
    pub fn plan_objective(plan: &DevicePlan, bounds: &ScheduleBounds) -> f64 {
        bounds.mu1 * plan.alpha as f64 / bounds.alpha_max as f64
            + bounds.mu2 * plan.q
            + bounds.mu3 * plan.z
    }

    /// Random small instance generator shared by the verification suite and
    /// the acceptance tests.
    pub fn random_instance(seed: u64) -> (Vec<DeviceSpec>, Vec<usize>, usize, ScheduleBounds) {
        let mut rng = crate::seed::stream(seed, 4242);
        let k = rng.random_range(1..=3);
        let param_count = rng.random_range(50..=400);
        let alpha_max = rng.random_range(2..=5);
        let mu_raw: [f64; 3] = [
            rng.random_range(0.05..1.0),
            rng.random_range(0.05..1.0),
            rng.random_range(0.05..1.0),
        ];
        let mu_sum: f64 = mu_raw.iter().sum();
        let bounds = ScheduleBounds::new(
            1,
            alpha_max,
            rng.random_range(0.1..0.6),
            rng.random_range(0.05..0.5),
            mu_raw[0] / mu_sum,
            mu_raw[1] / mu_sum,
            1.0 - mu_raw[0] / mu_sum - mu_raw[1] / mu_sum,
        )
        .unwrap();
        let mut specs = Vec::with_capacity(k);
        let mut sizes = Vec::with_capacity(k);
        for _ in 0..k {
            let dataset = rng.random_range(20..=60);
            let rho = rng.random_range(1e3..1e5);
            let f = rng.random_range(1e8..3e9);
            let p = rng.random_range(0.1..1.0);
            let gain = rng.random_range(0.0..3.0);
            let b = rng.random_range(1e5..2e6);
            // Keep the lower corner feasible but let energy sometimes bind.
            let probe = DeviceSpec::new(rho, f, p, gain, b, 1e-28, 1.0).unwrap();
            let n_min = samples_used(dataset, bounds.q_min).unwrap();
            let rate = tran_rate(&probe, -174.0).unwrap();
            let corner_payload = payload_size(param_count, bounds.z_min).unwrap() as f64;
            let corner_energy =
                comp_energy(&probe, 1, n_min) + p * corner_payload / rate;
            let budget = corner_energy * rng.random_range(1.05..50.0);
            specs.push(DeviceSpec::new(rho, f, p, gain, b, 1e-28, budget).unwrap());
            sizes.push(dataset);
        }
        (specs, sizes, param_count, bounds)
    }

    /// Run the solver against the grid oracle on random instances. Returns
    /// the worst (oracle - solver) gap seen, or a failure description when
    /// the solver falls short of the oracle by more than `tolerance`.
    pub fn compare_on_random_instances(
        instances: u64,
        grid_step: f64,
        tolerance: f64,
    ) -> std::result::Result<f64, String> {
        let mut worst_gap = f64::NEG_INFINITY;
        for seed in 0..instances {
            let (specs, sizes, param_count, bounds) = random_instance(seed);
            let plan = solve_round_plan(&specs, &sizes, param_count, &bounds, -174.0)
                .map_err(|e| format!("instance {seed}: solver failed: {e}"))?;
            for (i, (spec, &dataset)) in specs.iter().zip(&sizes).enumerate() {
                let oracle_best = grid_best_objective(
                    spec,
                    dataset,
                    param_count,
                    &bounds,
                    plan.t_opt,
                    -174.0,
                    grid_step,
                )
                .map_err(|e| format!("instance {seed}: oracle failed: {e}"))?;
                let Some(oracle_best) = oracle_best else {
                    return Err(format!("instance {seed} device {i}: oracle found nothing"));
                };
                let solver = plan_objective(&plan.devices[i], &bounds);
                let gap = oracle_best - solver;
                worst_gap = worst_gap.max(gap);
                if gap > tolerance {
                    return Err(format!(
                        "instance {seed} device {i}: solver {solver:.6} vs oracle {oracle_best:.6}"
                    ));
                }
            }
        }
        Ok(worst_gap)
    }
}
