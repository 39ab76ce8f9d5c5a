//! Hardware and wireless cost model: per-round computation and transmission
//! delays and energies, the OFDMA uplink rate, and the population
//! heterogeneity indicator.

use crate::error::{Error, Result};

/// Static per-device hardware and channel parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DeviceSpec {
    /// CPU cycles needed per training sample.
    pub cycles_per_sample: f64,
    /// CPU speed in cycles per second.
    pub cpu_hz: f64,
    /// Average uplink transmit power in watts.
    pub tx_power_w: f64,
    /// Channel gain to the edge server in dB (0 dB = unit gain).
    pub gain_db: f64,
    /// Allocated uplink bandwidth in hertz.
    pub bandwidth_hz: f64,
    /// Effective switched capacitance of the chip.
    pub switched_capacitance: f64,
    /// Per-round energy budget in joules.
    pub energy_budget_j: f64,
}

impl DeviceSpec {
    pub fn new(
        cycles_per_sample: f64,
        cpu_hz: f64,
        tx_power_w: f64,
        gain_db: f64,
        bandwidth_hz: f64,
        switched_capacitance: f64,
        energy_budget_j: f64,
    ) -> Result<DeviceSpec> {
        for (name, v) in [
            ("cycles_per_sample", cycles_per_sample),
            ("cpu_hz", cpu_hz),
            ("tx_power_w", tx_power_w),
            ("bandwidth_hz", bandwidth_hz),
            ("switched_capacitance", switched_capacitance),
            ("energy_budget_j", energy_budget_j),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        if !gain_db.is_finite() {
            return Err(Error::input("gain_db must be finite"));
        }
        Ok(DeviceSpec {
            cycles_per_sample,
            cpu_hz,
            tx_power_w,
            gain_db,
            bandwidth_hz,
            switched_capacitance,
            energy_budget_j,
        })
    }
}

/// Delay of `alpha` local epochs over `n_samples` points:
/// alpha * n * cycles_per_sample / cpu_hz.
pub fn comp_delay(spec: &DeviceSpec, alpha: u32, n_samples: usize) -> f64 {
    alpha as f64 * n_samples as f64 * spec.cycles_per_sample / spec.cpu_hz
}

/// Computation energy: capacitance * alpha * n * cycles_per_sample * f^2.
pub fn comp_energy(spec: &DeviceSpec, alpha: u32, n_samples: usize) -> f64 {
    spec.switched_capacitance
        * alpha as f64
        * n_samples as f64
        * spec.cycles_per_sample
        * spec.cpu_hz
        * spec.cpu_hz
}

/// Achievable OFDMA uplink rate in bits per second:
/// b * log2(1 + xi * p / (n0 * b)), with the channel gain converted from dB
/// and the noise density from its dBm/Hz figure.
pub fn tran_rate(spec: &DeviceSpec, noise_dbm_per_hz: f64) -> Result<f64> {
    let gain = 10f64.powf(spec.gain_db / 10.0);
    let n0 = 10f64.powf(noise_dbm_per_hz / 10.0);
    let snr = gain * spec.tx_power_w / (n0 * spec.bandwidth_hz);
    if !snr.is_finite() || 1.0 + snr <= 0.0 {
        return Err(Error::numeric(format!("non-positive SNR argument: {snr}")));
    }
    Ok(spec.bandwidth_hz * (1.0 + snr).log2())
}

/// Transmission delay of a payload at a given rate.
pub fn tran_delay(payload_bits: f64, rate_bps: f64) -> f64 {
    payload_bits / rate_bps
}

/// Transmission energy: transmit power times air time.
pub fn tran_energy(spec: &DeviceSpec, tau_tran: f64) -> f64 {
    spec.tx_power_w * tau_tran
}

/// All per-round cost components of one device.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RoundCosts {
    pub tau_comp: f64,
    pub tau_tran: f64,
    pub e_comp: f64,
    pub e_tran: f64,
}

impl RoundCosts {
    pub fn tau_total(&self) -> f64 {
        self.tau_comp + self.tau_tran
    }

    pub fn energy_total(&self) -> f64 {
        self.e_comp + self.e_tran
    }
}

/// Full round cost of one device for a given assignment.
pub fn round_costs(
    spec: &DeviceSpec,
    alpha: u32,
    n_samples: usize,
    payload_bits: u64,
    noise_dbm_per_hz: f64,
) -> Result<RoundCosts> {
    let rate = tran_rate(spec, noise_dbm_per_hz)?;
    let tau_tran = tran_delay(payload_bits as f64, rate);
    Ok(RoundCosts {
        tau_comp: comp_delay(spec, alpha, n_samples),
        tau_tran,
        e_comp: comp_energy(spec, alpha, n_samples),
        e_tran: tran_energy(spec, tau_tran),
    })
}

/// Population heterogeneity indicator in [0, 1 - 1/K]:
/// `H = 1 - (1/K) * sum_i min(tau_hat) / tau_hat_i`, where tau_hat_i is the
/// device's round time for a single training sample and a unit (one-bit)
/// payload. Zero means all devices are equally fast.
pub fn heterogeneity_indicator(
    specs: &[DeviceSpec],
    alpha: u32,
    noise_dbm_per_hz: f64,
) -> Result<f64> {
    if specs.is_empty() {
        return Err(Error::input("device population must be nonempty"));
    }
    let taus: Vec<f64> = specs
        .iter()
        .map(|s| Ok(comp_delay(s, alpha, 1) + tran_delay(1.0, tran_rate(s, noise_dbm_per_hz)?)))
        .collect::<Result<_>>()?;
    let min = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = specs.len() as f64;
    Ok(1.0 - taus.iter().map(|t| min / t).sum::<f64>() / k)
}
