//! Seeded Monte Carlo experiment runner: grid sweeps over one deployment
//! dimension, counter-based substream derivation, and interval estimates.
//!
//! Substream layout: grid point `i` hands `i << 48` to the rate engine as
//! the high stream bits, which composes `trial | attempt << 40` below them.
//! Every trial's stream is a pure function of (root seed, grid index,
//! trial index), so results do not depend on scheduling or worker count.

use std::time::{Duration, Instant};

use crate::error::{Result, RisError};
use crate::geometry::{aggregate_gain, RisPanel, Scenario};
use crate::precoding::{waterfill, LinkBudget};
use crate::rates::{
    capacity_limit, capacity_upper_bound, epsilon_hat_from_gains, mc_rates, RateReport, Synthesis,
};
use crate::stats;

const GRID_SHIFT: u32 = 48;
const MAX_GRID_POINTS: usize = 1 << 16;

pub const DEFAULT_TRIALS: u64 = 100;

/// Which deployment dimension a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    None,
    /// Panel element count; values must be positive integers.
    Elements,
    /// Transmit power in watts; values must be positive.
    Power,
    /// BS antenna count; values must be integers at or above the user count.
    Antennas,
    /// Rate-to-capacity target. Not runnable as an experiment: no estimator
    /// depends on it. Requests are rejected toward the dimensioning solver.
    TargetRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    SumRate,
    DpcCapacity,
    UpperBound,
    CapacityLimit,
    RatioFloor,
}

/// How per-user transmit fractions are chosen at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationPolicy {
    /// Use the budget's allocation vector as given.
    Fixed,
    /// Water-fill against the expected post-precoding gains of the grid
    /// point, `aggregate_k gamma^2 (M - K + 1)`, once per point.
    Waterfill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: u64,
    pub root_seed: u64,
    pub synthesis: Synthesis,
    pub allocation: AllocationPolicy,
    pub sweep: SweepVariable,
    pub grid: Vec<f64>,
    pub outputs: Vec<Estimator>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Swept value at this grid point; absent for a no-sweep run.
    pub value: Option<f64>,
    pub report: RateReport,
}

#[derive(Debug, Clone)]
pub struct SweepMetadata {
    pub config: ExperimentConfig,
    pub wall: Duration,
    pub discarded: u64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

/// 95% interval: (mean, 1.96 standard errors).
pub fn confidence_interval(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(RisError::DegenerateInterval(samples.len()));
    }
    let halfwidth = 1.96 * stats::sample_std(samples) / (samples.len() as f64).sqrt();
    Ok((stats::mean(samples), halfwidth))
}

fn validate(config: &ExperimentConfig, scenario: &Scenario) -> Result<()> {
    if config.trials == 0 {
        return Err(RisError::InvalidConfig("need at least one trial".into()));
    }
    if config.outputs.is_empty() {
        return Err(RisError::InvalidConfig("no estimators requested".into()));
    }
    match config.sweep {
        SweepVariable::None => {
            if !config.grid.is_empty() {
                return Err(RisError::InvalidConfig(
                    "sweep grid given without a sweep variable".into(),
                ));
            }
        }
        SweepVariable::TargetRatio => {
            return Err(RisError::InvalidConfig(
                "target-ratio sweeps are a dimensioning question; solve them with the element-count planner".into(),
            ));
        }
        _ => {
            if config.grid.is_empty() {
                return Err(RisError::InvalidConfig("sweep grid is empty".into()));
            }
            if config.grid.len() > MAX_GRID_POINTS {
                return Err(RisError::InvalidConfig(format!(
                    "grid has {} points; the substream layout admits {}",
                    config.grid.len(),
                    MAX_GRID_POINTS
                )));
            }
        }
    }
    for (i, v) in config.grid.iter().enumerate() {
        let ok = match config.sweep {
            SweepVariable::Elements => {
                v.is_finite() && *v >= 1.0 && v.fract() == 0.0 && *v <= (1u64 << 53) as f64
            }
            SweepVariable::Power => v.is_finite() && *v > 0.0,
            SweepVariable::Antennas => {
                v.is_finite() && v.fract() == 0.0 && *v >= scenario.num_users as f64
            }
            _ => true,
        };
        if !ok {
            return Err(RisError::InvalidConfig(format!(
                "grid point {i} ({v}) is not valid for the swept variable"
            )));
        }
    }
    Ok(())
}

fn zero_report(k: usize, trials: u64) -> RateReport {
    RateReport {
        per_user_rate: vec![0.0; k],
        sum_rate: 0.0,
        sum_rate_ci: 0.0,
        dpc_capacity: 0.0,
        dpc_capacity_ci: 0.0,
        upper_bound: 0.0,
        capacity_limit: 0.0,
        epsilon: 0.0,
        epsilon_hat: 0.0,
        trials,
        discarded: 0,
    }
}

/// Runs the configured estimators at every grid point. The whole grid is
/// validated before the first trial runs. Unrequested estimator fields come
/// back as NaN.
pub fn run_experiment(
    config: &ExperimentConfig,
    scenario: &Scenario,
    panel: &RisPanel,
    budget: &LinkBudget,
) -> Result<SweepResult> {
    validate(config, scenario)?;
    if budget.allocation.len() != scenario.num_users {
        return Err(RisError::InvalidConfig(
            "allocation length does not match the user count".into(),
        ));
    }
    let start = Instant::now();

    let points: Vec<Option<f64>> = if config.sweep == SweepVariable::None {
        vec![None]
    } else {
        config.grid.iter().copied().map(Some).collect()
    };

    let wants = |e: Estimator| config.outputs.contains(&e);
    let needs_mc = wants(Estimator::SumRate) || wants(Estimator::DpcCapacity);

    let mut rows = Vec::with_capacity(points.len());
    let mut discarded_total = 0u64;
    for (gi, value) in points.iter().enumerate() {
        let mut scen = scenario.clone();
        let mut pan = panel.clone();
        let mut power = budget.transmit_power;
        if let Some(v) = value {
            match config.sweep {
                SweepVariable::Elements => {
                    pan = RisPanel::new(
                        *v as u64,
                        panel.element_width,
                        panel.element_height,
                        panel.reflection_amplitude,
                        panel.phase_config.clone(),
                    )?;
                }
                SweepVariable::Power => power = *v,
                SweepVariable::Antennas => scen.num_antennas = *v as usize,
                _ => unreachable!("validated above"),
            }
        }
        let gamma = pan.reflection_amplitude;
        let gains = aggregate_gain(&scen, &pan)?;

        let budget_eff = match config.allocation {
            AllocationPolicy::Fixed => {
                LinkBudget::new(power, budget.noise_power, budget.allocation.clone())?
            }
            AllocationPolicy::Waterfill => {
                let headroom = (scen.num_antennas - scen.num_users + 1) as f64;
                let expected: Vec<f64> = gains
                    .per_user_aggregate
                    .iter()
                    .map(|a| a * gamma * gamma * headroom)
                    .collect();
                let lambda = waterfill(&expected, power, budget.noise_power);
                LinkBudget::new(power, budget.noise_power, lambda)?
            }
        };

        let report = if gamma == 0.0 {
            // A perfectly absorbing panel carries no signal; every trial
            // would evaluate to zero rate, so none are run.
            zero_report(scen.num_users, config.trials)
        } else {
            let mc = if needs_mc {
                Some(mc_rates(
                    &scen,
                    &pan,
                    &budget_eff,
                    config.synthesis,
                    config.trials,
                    config.root_seed,
                    (gi as u64) << GRID_SHIFT,
                )?)
            } else {
                None
            };

            let upper_bound = if wants(Estimator::UpperBound) {
                capacity_upper_bound(&gains, &budget_eff, scen.num_antennas, gamma)
            } else {
                f64::NAN
            };
            let limit = if wants(Estimator::CapacityLimit) {
                capacity_limit(&scen, &budget_eff, gamma)?
            } else {
                f64::NAN
            };
            let ratio_floor = if wants(Estimator::RatioFloor) {
                epsilon_hat_from_gains(
                    &gains.per_user_aggregate,
                    &gains.asymptotic_limit,
                    &budget_eff,
                    scen.num_antennas,
                    scen.num_users,
                    gamma,
                )?
            } else {
                f64::NAN
            };

            let (per_user, sum_rate, sum_ci) = match (&mc, wants(Estimator::SumRate)) {
                (Some(m), true) => (m.per_user_rate.clone(), m.sum_rate, m.sum_rate_ci),
                _ => (Vec::new(), f64::NAN, f64::NAN),
            };
            let (dpc, dpc_ci) = match (&mc, wants(Estimator::DpcCapacity)) {
                (Some(m), true) => (m.dpc_capacity, m.dpc_capacity_ci),
                _ => (f64::NAN, f64::NAN),
            };
            let epsilon = if sum_rate.is_nan() || limit.is_nan() {
                f64::NAN
            } else if limit > 0.0 {
                sum_rate / limit
            } else {
                0.0
            };
            let (trials, discarded) = match &mc {
                Some(m) => (m.trials, m.discarded),
                None => (0, 0),
            };
            RateReport {
                per_user_rate: per_user,
                sum_rate,
                sum_rate_ci: sum_ci,
                dpc_capacity: dpc,
                dpc_capacity_ci: dpc_ci,
                upper_bound,
                capacity_limit: limit,
                epsilon,
                epsilon_hat: ratio_floor,
                trials,
                discarded,
            }
        };
        discarded_total += report.discarded;
        rows.push(SweepRow { value: *value, report });
    }

    Ok(SweepResult {
        rows,
        metadata: SweepMetadata {
            config: config.clone(),
            wall: start.elapsed(),
            discarded: discarded_total,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_hand_values() {
        let (m, hw) = confidence_interval(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((hw - 1.96).abs() < 1e-12);

        let (_, hw) = confidence_interval(&[3.5; 9]).unwrap();
        assert_eq!(hw, 0.0);

        assert!(matches!(
            confidence_interval(&[1.0]),
            Err(RisError::DegenerateInterval(1))
        ));
    }
}
