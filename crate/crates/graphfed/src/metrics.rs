//! Per-round metrics and their CSV serialization. The CSV column order is a
//! public contract:
//! `round,acc_local_mean,acc_local_std,acc_global_mean,acc_global_std,I1,I2,I3,I4,I5,I6,I7,T,H`.
//! I1-I4 come from the round's pooled local-test confusion matrix; I5-I7 are
//! cumulative FLOPs, latency, and desynchronization. Floats print with six
//! significant digits.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PlanTriple {
    pub alpha: u32,
    pub q: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub acc_local_mean: f64,
    pub acc_local_std: f64,
    pub acc_global_mean: f64,
    pub acc_global_std: f64,
    /// Pooled local-test accuracy.
    pub i1: f64,
    /// Macro-averaged precision.
    pub i2: f64,
    /// Macro-averaged recall.
    pub i3: f64,
    /// Harmonic mean of I2 and I3.
    pub i4: f64,
    /// Cumulative training FLOPs across all devices.
    pub i5_flops: u64,
    /// Cumulative round latency in seconds.
    pub i6_latency_s: f64,
    /// Cumulative server idle-wait in seconds.
    pub i7_desync_s: f64,
    /// This round's deadline (slowest device's latency).
    pub t_round_s: f64,
    /// Population heterogeneity indicator of the device pool.
    pub heterogeneity: f64,
    /// Per-device (alpha, q, z) assignments used this round.
    pub plans: Vec<PlanTriple>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct MetricsLog {
    pub rounds: Vec<RoundMetrics>,
}

pub const CSV_HEADER: &str =
    "round,acc_local_mean,acc_local_std,acc_global_mean,acc_global_std,I1,I2,I3,I4,I5,I6,I7,T,H";

impl MetricsLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rounds.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.round,
                sig6(r.acc_local_mean),
                sig6(r.acc_local_std),
                sig6(r.acc_global_mean),
                sig6(r.acc_global_std),
                sig6(r.i1),
                sig6(r.i2),
                sig6(r.i3),
                sig6(r.i4),
                r.i5_flops,
                sig6(r.i6_latency_s),
                sig6(r.i7_desync_s),
                sig6(r.t_round_s),
                sig6(r.heterogeneity),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv())?;
        Ok(())
    }

    pub fn last(&self) -> Option<&RoundMetrics> {
        self.rounds.last()
    }
}

/// Format with six significant digits, manual `%g`-style: fixed notation in
/// a readable exponent window, scientific outside it, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Decimal exponent from the scientific rendering (exact, unlike log10).
    let sci = format!("{:e}", x.abs());
    let exp: i32 = sci.split('e').nth(1).unwrap().parse().unwrap();
    if !(-5..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        let (mantissa, e) = s.split_once('e').unwrap();
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formats() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(123456.0), "123456");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0001), "0.0001");
        assert_eq!(sig6(1e-6), "1e-6");
        assert_eq!(sig6(-0.0135), "-0.0135");
        assert_eq!(sig6(3.686990e7), "3.68699e7");
    }

    fn sample_round(round: usize) -> RoundMetrics {
        RoundMetrics {
            round,
            acc_local_mean: 0.825,
            acc_local_std: 0.04,
            acc_global_mean: 0.71,
            acc_global_std: 0.02,
            i1: 0.825,
            i2: 0.8,
            i3: 0.81,
            i4: 0.804969,
            i5_flops: 123456789,
            i6_latency_s: 0.25,
            i7_desync_s: 0.1,
            t_round_s: 0.125,
            heterogeneity: 0.31,
            plans: vec![PlanTriple { alpha: 3, q: 1.0, z: 1.0 }],
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_round() {
        let log = MetricsLog {
            rounds: (1..=3).map(sample_round).collect(),
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("1,0.825,"));
    }

    #[test]
    fn empty_log_is_header_only() {
        let log = MetricsLog::default();
        assert_eq!(log.to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_serialization_is_deterministic() {
        let log = MetricsLog {
            rounds: (1..=5).map(sample_round).collect(),
        };
        assert_eq!(log.to_csv(), log.to_csv());
    }
}
