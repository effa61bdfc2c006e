//! Monte-Carlo discrete-event simulation of the node.
//!
//! Three independent exponential-interarrival streams (data packets, energy
//! packets, connections) are superposed by keeping one next-event timestamp
//! per stream and always advancing the earliest. On an energy arrival the
//! battery increments unless full (the arrival is then blocked and counted);
//! on a data arrival the unbounded data buffer increments; on a connection,
//! if both buffers are non-empty one packet leaves each (a transfer),
//! otherwise the connection passes with no effect.
//!
//! Every replication is a pure function of `(base_seed, replication_index)`;
//! the RNG is ChaCha8 (`rand_chacha`), with the per-replication stream seed
//! derived by a SplitMix64-style mix. Replications may run in parallel; the
//! aggregation is an ordered reduction, so parallelism never changes output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Name of the RNG algorithm, echoed in reports so a reimplementation can
/// reproduce the stream structure.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {reason}")]
    InvalidConfig { reason: String },
}

/// One simulation setup. Rates may be zero here (degenerate regimes are
/// legitimate simulation inputs even though the analytic model needs
/// strictly positive rates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub lambda_d: f64,
    pub lambda_e: f64,
    pub lambda_c: f64,
    pub capacity: u32,
    /// Simulated seconds per replication.
    pub horizon: f64,
    /// Fraction of the horizon discarded as warm-up, in `[0, 0.5]`.
    pub warmup_fraction: f64,
    pub replications: u32,
    pub base_seed: u64,
}

impl SimulationConfig {
    pub fn from_rates(
        rates: &crate::queue_analytics::NodeRates,
        capacity: u32,
        horizon: f64,
        replications: u32,
        base_seed: u64,
    ) -> Self {
        Self {
            lambda_d: rates.lambda_d(),
            lambda_e: rates.lambda_e(),
            lambda_c: rates.lambda_c(),
            capacity,
            horizon,
            warmup_fraction: 0.1,
            replications,
            base_seed,
        }
    }

    /// Validates the config; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, SimError> {
        let err = |reason: String| Err(SimError::InvalidConfig { reason });
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_e", self.lambda_e),
            ("lambda_c", self.lambda_c),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.lambda_d + self.lambda_e + self.lambda_c <= 0.0 {
            return err("at least one rate must be positive".into());
        }
        if self.capacity < 1 {
            return err("capacity must be >= 1".into());
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return err(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(0.0..=0.5).contains(&self.warmup_fraction) {
            return err(format!(
                "warmup_fraction must be in [0, 0.5], got {}",
                self.warmup_fraction
            ));
        }
        if self.replications < 1 {
            return err("replications must be >= 1".into());
        }

        let mut warnings = Vec::new();
        let min_rate = [self.lambda_d, self.lambda_e, self.lambda_c]
            .into_iter()
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min);
        let post_warmup = self.horizon * (1.0 - self.warmup_fraction);
        if post_warmup * min_rate < 1e4 {
            warnings.push(format!(
                "expected post-warmup event count {:.0} for the slowest stream is below 1e4; \
                 estimates may be noisy",
                post_warmup * min_rate
            ));
        }
        if self.replications == 1 {
            warnings.push("single replication: confidence intervals are undefined".into());
        }
        Ok(warnings)
    }
}

/// Time-weighted statistics of one replication's post-warmup window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub time_fraction_energy_empty: f64,
    pub time_fraction_energy_full: f64,
    pub time_fraction_data_empty: f64,
    pub ep_arrivals_blocked_fraction: f64,
    pub transfers_completed: u64,
    pub mean_data_queue_length: f64,
    // Raw counters, kept for conservation checks.
    pub ep_arrivals: u64,
    pub ep_blocked: u64,
    pub dp_arrivals: u64,
    pub energy_net_change: i64,
    pub data_net_change: i64,
}

/// Point estimate with spread across replications. `std_error` and the CI
/// are absent when only one replication was run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std_error: Option<f64>,
    pub ci99_low: Option<f64>,
    pub ci99_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub rng_algorithm: &'static str,
    pub seeds: Vec<u64>,
    pub p_e0: MetricSummary,
    pub p_ek: MetricSummary,
    pub p_d0: MetricSummary,
    pub ep_blocked_fraction: MetricSummary,
    pub mean_data_queue_length: MetricSummary,
    pub transfers_total: u64,
    pub warnings: Vec<String>,
    pub replications: Vec<ReplicationStats>,
}

/// SplitMix64 finalizer over the base seed and replication index.
pub fn replication_seed(base_seed: u64, replication_index: u32) -> u64 {
    let mut z = base_seed ^ (replication_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one replication; deterministic in `(config, replication_index)`.
pub fn run_replication(config: &SimulationConfig, replication_index: u32) -> ReplicationStats {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(config.base_seed, replication_index));
    let exp_d = (config.lambda_d > 0.0).then(|| Exp::new(config.lambda_d).unwrap());
    let exp_e = (config.lambda_e > 0.0).then(|| Exp::new(config.lambda_e).unwrap());
    let exp_c = (config.lambda_c > 0.0).then(|| Exp::new(config.lambda_c).unwrap());
    let draw = |dist: &Option<Exp<f64>>, rng: &mut ChaCha8Rng| -> f64 {
        dist.as_ref()
            .map_or(f64::INFINITY, |d| d.sample(rng))
    };

    let horizon = config.horizon;
    let warm = horizon * config.warmup_fraction;
    let k = config.capacity as u64;

    let mut next_d = draw(&exp_d, &mut rng);
    let mut next_e = draw(&exp_e, &mut rng);
    let mut next_c = draw(&exp_c, &mut rng);

    let mut data: u64 = 0;
    let mut energy: u64 = 0;
    let mut t = 0.0_f64;

    let mut time_empty = 0.0;
    let mut time_full = 0.0;
    let mut time_data_empty = 0.0;
    let mut data_area = 0.0;
    let mut ep_arrivals: u64 = 0;
    let mut ep_blocked: u64 = 0;
    let mut dp_arrivals: u64 = 0;
    let mut transfers: u64 = 0;
    let mut snapshot: Option<(u64, u64)> = None;

    loop {
        let te = next_d.min(next_e).min(next_c);
        // Accumulate occupancy over [t, min(te, horizon)] clipped to the
        // measurement window [warm, horizon].
        let a = t.max(warm);
        let b = te.min(horizon);
        if b > a {
            let dt = b - a;
            if energy == 0 {
                time_empty += dt;
            }
            if energy == k {
                time_full += dt;
            }
            if data == 0 {
                time_data_empty += dt;
            }
            data_area += data as f64 * dt;
        }
        if te >= horizon {
            break;
        }
        if snapshot.is_none() && te >= warm {
            snapshot = Some((data, energy));
        }
        let counted = te >= warm;
        if next_d <= next_e && next_d <= next_c {
            data += 1;
            if counted {
                dp_arrivals += 1;
            }
            next_d = te + draw(&exp_d, &mut rng);
        } else if next_e <= next_c {
            if counted {
                ep_arrivals += 1;
            }
            if energy < k {
                energy += 1;
            } else if counted {
                ep_blocked += 1;
            }
            next_e = te + draw(&exp_e, &mut rng);
        } else {
            if data >= 1 && energy >= 1 {
                data -= 1;
                energy -= 1;
                if counted {
                    transfers += 1;
                }
            }
            next_c = te + draw(&exp_c, &mut rng);
        }
        t = te;
    }
    let (data_at_warm, energy_at_warm) = snapshot.unwrap_or((data, energy));

    let window = horizon - warm;
    ReplicationStats {
        time_fraction_energy_empty: time_empty / window,
        time_fraction_energy_full: time_full / window,
        time_fraction_data_empty: time_data_empty / window,
        ep_arrivals_blocked_fraction: if ep_arrivals > 0 {
            ep_blocked as f64 / ep_arrivals as f64
        } else {
            0.0
        },
        transfers_completed: transfers,
        mean_data_queue_length: data_area / window,
        ep_arrivals,
        ep_blocked,
        dp_arrivals,
        energy_net_change: energy as i64 - energy_at_warm as i64,
        data_net_change: data as i64 - data_at_warm as i64,
    }
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MetricSummary {
            mean,
            std_error: None,
            ci99_low: None,
            ci99_high: None,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
        .expect("valid t distribution")
        .inverse_cdf(0.995);
    MetricSummary {
        mean,
        std_error: Some(se),
        ci99_low: Some(mean - t * se),
        ci99_high: Some(mean + t * se),
    }
}

/// Runs all replications (in parallel) and aggregates point estimates with
/// 99% confidence intervals from the replication variance.
pub fn run_experiment(config: &SimulationConfig) -> Result<SimulationReport, SimError> {
    let warnings = config.validate()?;
    let stats: Vec<ReplicationStats> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(config, i))
        .collect();
    let col = |f: fn(&ReplicationStats) -> f64| -> Vec<f64> { stats.iter().map(f).collect() };
    Ok(SimulationReport {
        config: *config,
        rng_algorithm: RNG_ALGORITHM,
        seeds: (0..config.replications)
            .map(|i| replication_seed(config.base_seed, i))
            .collect(),
        p_e0: summarize(&col(|s| s.time_fraction_energy_empty)),
        p_ek: summarize(&col(|s| s.time_fraction_energy_full)),
        p_d0: summarize(&col(|s| s.time_fraction_data_empty)),
        ep_blocked_fraction: summarize(&col(|s| s.ep_arrivals_blocked_fraction)),
        mean_data_queue_length: summarize(&col(|s| s.mean_data_queue_length)),
        transfers_total: stats.iter().map(|s| s.transfers_completed).sum(),
        warnings,
        replications: stats,
    })
}
