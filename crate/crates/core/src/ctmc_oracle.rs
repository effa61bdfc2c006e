//! Exact stationary analysis of the joint (data, energy) Markov chain.
//!
//! The true process is a CTMC on `{0..Dmax} x {0..K}` with transitions
//!
//! - `(d, e) -> (d+1, e)` at rate `lambda_D` for `d < Dmax`,
//! - `(d, e) -> (d, e+1)` at rate `lambda_E` for `e < K`,
//! - `(d, e) -> (d-1, e-1)` at rate `lambda_C` for `d >= 1` and `e >= 1`
//!   (a transfer consumes one data packet and one energy packet together).
//!
//! The data buffer is really unbounded; `Dmax` is an artificial cap with
//! arrivals blocked there, and the stationary mass sitting at `d = Dmax`
//! bounds the induced error. The solver runs Gauss-Seidel sweeps on the
//! global balance equations (in-place, then renormalized), which is the
//! power iteration on the uniformized chain with latest-value updates.
//!
//! This module is the ground truth the decoupled closed form and the
//! simulator are checked against; it shares no code path with either.

use crate::format::fmt_sig;
use crate::queue_analytics::{AnalyticsError, NodeRates};
use thiserror::Error;

pub const DEFAULT_MASS_BUDGET: f64 = 1e-9;
pub const DEFAULT_DMAX_CAP: u32 = 100_000;
/// Successive-iterate max-norm tolerance for the sweep solver.
pub const SOLVER_TOL: f64 = 1e-12;
/// Balance-equation residual required of a returned distribution.
pub const BALANCE_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(
        "data truncation would exceed the cap of {cap} levels \
         (tail mass {tail_mass} at Dmax={dmax} is above budget {budget})"
    )]
    TruncationLimitExceeded {
        cap: u32,
        dmax: u32,
        tail_mass: f64,
        budget: f64,
    },
    #[error("stationary solver did not converge after {sweeps} sweeps (residual {residual})")]
    SolverNotConverged { sweeps: usize, residual: f64 },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// A fully specified joint chain: rates, battery capacity, and the data
/// truncation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointChainSpec {
    pub rates: NodeRates,
    pub capacity: u32,
    pub dmax: u32,
}

impl JointChainSpec {
    pub fn new(rates: NodeRates, capacity: u32, dmax: u32) -> Self {
        assert!(capacity >= 1, "capacity must be >= 1");
        assert!(dmax >= 1, "dmax must be >= 1");
        Self {
            rates,
            capacity,
            dmax,
        }
    }

    pub fn state_count(&self) -> usize {
        (self.dmax as usize + 1) * (self.capacity as usize + 1)
    }
}

/// Stationary probabilities over `(d, e)`, stored row-major by `d` then `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStationaryDistribution {
    probs: Vec<f64>,
    dmax: u32,
    capacity: u32,
    /// Max-norm balance residual at the returned distribution.
    pub residual_norm: f64,
    /// Stationary mass at `d = Dmax`.
    pub truncation_mass: f64,
}

/// Exact marginals extracted from the joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OracleSolution {
    pub p_e0_exact: f64,
    pub p_ek_exact: f64,
    pub p_d0_exact: f64,
}

impl JointStationaryDistribution {
    #[inline]
    fn index(&self, d: u32, e: u32) -> usize {
        d as usize * (self.capacity as usize + 1) + e as usize
    }

    pub fn prob(&self, d: u32, e: u32) -> f64 {
        self.probs[self.index(d, e)]
    }

    pub fn dmax(&self) -> u32 {
        self.dmax
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// CSV dump (columns: d, e, probability) in row-major state order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,e,probability\n");
        for d in 0..=self.dmax {
            for e in 0..=self.capacity {
                out.push_str(&format!("{d},{e},{}\n", fmt_sig(self.prob(d, e))));
            }
        }
        out
    }
}

#[inline]
fn out_rate(rates: &NodeRates, dmax: u32, k: u32, d: u32, e: u32) -> f64 {
    let mut r = 0.0;
    if d < dmax {
        r += rates.lambda_d();
    }
    if e < k {
        r += rates.lambda_e();
    }
    if d >= 1 && e >= 1 {
        r += rates.lambda_c();
    }
    r
}

/// Solves the global balance equations of the chain defined by `spec`.
pub fn stationary_distribution(
    spec: &JointChainSpec,
) -> Result<JointStationaryDistribution, OracleError> {
    let dmax = spec.dmax;
    let k = spec.capacity;
    let rates = &spec.rates;
    let n = spec.state_count();
    let width = k as usize + 1;
    let idx = |d: u32, e: u32| d as usize * width + e as usize;

    let mut pi = vec![1.0 / n as f64; n];
    let mut prev = pi.clone();

    let inflow = |pi: &[f64], d: u32, e: u32| {
        let mut f = 0.0;
        if d >= 1 {
            f += rates.lambda_d() * pi[idx(d - 1, e)];
        }
        if e >= 1 {
            f += rates.lambda_e() * pi[idx(d, e - 1)];
        }
        if d < dmax && e < k {
            f += rates.lambda_c() * pi[idx(d + 1, e + 1)];
        }
        f
    };

    let residual_norm = |pi: &[f64]| {
        let mut worst = 0.0_f64;
        for d in 0..=dmax {
            for e in 0..=k {
                let r = (inflow(pi, d, e) - pi[idx(d, e)] * out_rate(rates, dmax, k, d, e)).abs();
                worst = worst.max(r);
            }
        }
        worst
    };

    let mut sweeps = 0usize;
    let mut last_residual = f64::INFINITY;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        // In-place sweep: each state takes inflow/out-rate using the newest
        // neighbour values.
        for d in 0..=dmax {
            for e in 0..=k {
                pi[idx(d, e)] = inflow(&pi, d, e) / out_rate(rates, dmax, k, d, e);
            }
        }
        let sum: f64 = pi.iter().sum();
        for p in pi.iter_mut() {
            *p /= sum;
        }
        let mut delta = 0.0_f64;
        for (a, b) in pi.iter().zip(prev.iter()) {
            delta = delta.max((a - b).abs());
        }
        prev.copy_from_slice(&pi);
        if delta < SOLVER_TOL {
            last_residual = residual_norm(&pi);
            if last_residual < BALANCE_TOL {
                break;
            }
            // Successive iterates stalled before the balance equations are
            // satisfied; keep sweeping until the residual itself is small.
        }
    }
    if !(last_residual < BALANCE_TOL) {
        last_residual = residual_norm(&pi);
        if !(last_residual < BALANCE_TOL) {
            return Err(OracleError::SolverNotConverged {
                sweeps,
                residual: last_residual,
            });
        }
    }

    let truncation_mass: f64 = (0..=k).map(|e| pi[idx(dmax, e)]).sum();
    Ok(JointStationaryDistribution {
        probs: pi,
        dmax,
        capacity: k,
        residual_norm: last_residual,
        truncation_mass,
    })
}

/// Marginal depletion/overflow/data-empty probabilities.
pub fn oracle_marginals(dist: &JointStationaryDistribution) -> OracleSolution {
    let k = dist.capacity();
    let dmax = dist.dmax();
    let mut p_e0 = 0.0;
    let mut p_ek = 0.0;
    for d in 0..=dmax {
        p_e0 += dist.prob(d, 0);
        p_ek += dist.prob(d, k);
    }
    let mut p_d0 = 0.0;
    for e in 0..=k {
        p_d0 += dist.prob(0, e);
    }
    OracleSolution {
        p_e0_exact: p_e0,
        p_ek_exact: p_ek,
        p_d0_exact: p_d0,
    }
}

/// Smallest data truncation level (grown geometrically from 32) whose tail
/// mass is below `mass_budget`, subject to `cap`.
pub fn choose_truncation_with_cap(
    rates: &NodeRates,
    capacity: u32,
    mass_budget: f64,
    cap: u32,
) -> Result<u32, OracleError> {
    assert!(mass_budget > 0.0);
    // Stability precondition: the decoupled fixed point must admit rho_D < 1,
    // otherwise the tail never decays and no truncation is adequate.
    crate::queue_analytics::validate_rates(rates, capacity)?;
    let mut dmax = 32u32.min(cap);
    loop {
        let spec = JointChainSpec::new(*rates, capacity, dmax);
        let dist = stationary_distribution(&spec)?;
        if dist.truncation_mass < mass_budget {
            return Ok(dmax);
        }
        if dmax >= cap {
            return Err(OracleError::TruncationLimitExceeded {
                cap,
                dmax,
                tail_mass: dist.truncation_mass,
                budget: mass_budget,
            });
        }
        dmax = (dmax * 2).min(cap);
    }
}

/// [`choose_truncation_with_cap`] at the default cap of 100000 levels.
pub fn choose_truncation(
    rates: &NodeRates,
    capacity: u32,
    mass_budget: f64,
) -> Result<u32, OracleError> {
    choose_truncation_with_cap(rates, capacity, mass_budget, DEFAULT_DMAX_CAP)
}

/// Convenience: pick a truncation, solve, and return distribution + marginals.
pub fn solve_exact(
    rates: &NodeRates,
    capacity: u32,
    mass_budget: f64,
) -> Result<(JointStationaryDistribution, OracleSolution), OracleError> {
    let dmax = choose_truncation(rates, capacity, mass_budget)?;
    let dist = stationary_distribution(&JointChainSpec::new(*rates, capacity, dmax))?;
    let marginals = oracle_marginals(&dist);
    Ok((dist, marginals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(ld: f64, le: f64, lc: f64) -> NodeRates {
        NodeRates::new(ld, le, lc).unwrap()
    }

    #[test]
    fn distribution_normalizes_and_balances() {
        let spec = JointChainSpec::new(rates(0.5, 1.0, 2.0), 5, 64);
        let dist = stationary_distribution(&spec).unwrap();
        assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        assert!(dist.residual_norm < BALANCE_TOL);
        assert!(dist.probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn choose_truncation_meets_budget() {
        let r = rates(0.5, 1.0, 2.0);
        let dmax = choose_truncation(&r, 5, 1e-9).unwrap();
        let dist = stationary_distribution(&JointChainSpec::new(r, 5, dmax)).unwrap();
        assert!(dist.truncation_mass < 1e-9);
    }

    #[test]
    fn looser_budget_never_needs_more_levels() {
        let r = rates(0.6, 1.0, 1.5);
        let tight = choose_truncation(&r, 4, 1e-10).unwrap();
        let loose = choose_truncation(&r, 4, 2e-10).unwrap();
        assert!(loose <= tight);
    }

    #[test]
    fn heavy_traffic_hits_truncation_cap() {
        // rho_D close to 1: the tail decays too slowly for a small cap.
        let r = rates(0.97, 10.0, 1.0);
        let err = choose_truncation_with_cap(&r, 8, 1e-9, 128).unwrap_err();
        assert!(matches!(err, OracleError::TruncationLimitExceeded { .. }));
    }

    #[test]
    fn unstable_rates_rejected_before_truncation_search() {
        let r = rates(0.99, 1.0, 1.0);
        assert!(matches!(
            choose_truncation(&r, 2, 1e-9),
            Err(OracleError::Analytics(AnalyticsError::Unstable { .. }))
        ));
    }

    #[test]
    fn marginals_are_probabilities_and_consistent() {
        let r = rates(0.72, 0.8, 0.9);
        let dmax = choose_truncation(&r, 13, 1e-9).unwrap();
        let dist = stationary_distribution(&JointChainSpec::new(r, 13, dmax)).unwrap();
        let m = oracle_marginals(&dist);
        for p in [m.p_e0_exact, m.p_ek_exact, m.p_d0_exact] {
            assert!((0.0..=1.0).contains(&p));
        }
        // Marginal over e sums to total mass.
        let mut per_e_sum = 0.0;
        for e in 0..=13 {
            for d in 0..=dist.dmax() {
                per_e_sum += dist.prob(d, e);
            }
        }
        assert!((per_e_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fast_connections_approach_decoupled_prediction() {
        // With connections arriving much faster than packets, any queued
        // data is drained almost immediately; the decoupled model should be
        // in the right neighbourhood (sanity bracket, not equality).
        let r = rates(0.2, 0.4, 50.0);
        let (_, m) = solve_exact(&r, 1, 1e-9).unwrap();
        let analytic = crate::queue_analytics::analyze_node(&r, 1).unwrap();
        assert!(
            (m.p_e0_exact - analytic.p_e0).abs() < 0.1,
            "exact {} vs analytic {}",
            m.p_e0_exact,
            analytic.p_e0
        );
    }

    #[test]
    fn rare_data_leaves_battery_full() {
        // Almost no data means almost no energy consumption: the battery
        // sits at K nearly all the time.
        let r = rates(0.01, 1.0, 1.0);
        let (_, m) = solve_exact(&r, 3, 1e-9).unwrap();
        assert!(m.p_ek_exact > 0.8, "p_ek = {}", m.p_ek_exact);
        assert!(m.p_e0_exact < 0.05, "p_e0 = {}", m.p_e0_exact);
    }

    #[test]
    fn csv_dump_shape() {
        let spec = JointChainSpec::new(rates(0.3, 0.8, 1.0), 2, 8);
        let dist = stationary_distribution(&spec).unwrap();
        let csv = dist.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "d,e,probability");
        assert_eq!(lines.len(), 1 + 9 * 3);
        assert!(lines[1].starts_with("0,0,"));
        // Byte-identical across calls.
        assert_eq!(csv, dist.to_csv());
    }
}
