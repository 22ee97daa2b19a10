//! Monte Carlo rate/capacity estimators and the closed-form bounds.
//!
//! Everything is a function of the Gram matrix `G G^H`: the zero-forcing
//! rate of user `k` uses the reciprocal diagonal of its inverse, the
//! dirty-paper capacity uses its diagonal directly. Expectations are plain
//! sample means over seeded trials with normal-approximation confidence
//! intervals.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::channel::{
    synthesize_clt_with_gains, synthesize_exact_with_gains, FadingKind, FadingModel, RngStream,
    C64,
};
use crate::error::{Result, RisError};
use crate::geometry::{aggregate_gain, asymptotic_gain, GainProfile, RisPanel, Scenario};
use crate::precoding::{LinkBudget, RANK_TOL};
use crate::stats;

/// Everything a single sweep point reports: Monte Carlo estimates, their
/// 95% confidence halfwidths, the closed-form bounds and both capacity
/// ratios.
#[derive(Debug, Clone, Default)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub sum_rate_ci: f64,
    pub dpc_capacity: f64,
    pub dpc_capacity_ci: f64,
    pub upper_bound: f64,
    pub capacity_limit: f64,
    pub epsilon: f64,
    pub epsilon_hat: f64,
    pub trials: u64,
    pub discarded: u64,
}

/// How Monte Carlo trials realize the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synthesis {
    /// Per-element summation with the given fading law.
    Exact(FadingKind),
    /// Direct Gaussian entries of variance N gamma^2.
    Clt,
}

/// Per-trial rates from one channel realization: per-user zero-forcing
/// `log2(1 + snr)` terms and the dirty-paper capacity sum.
///
/// With one user the two formulas coincide term by term, so the same
/// arithmetic is reused and the outputs are bit-identical.
pub fn trial_rates(g: &DMatrix<C64>, budget: &LinkBudget) -> Result<(Vec<f64>, f64)> {
    let k = g.nrows();
    if budget.allocation.len() != k {
        return Err(RisError::InvalidConfig(format!(
            "allocation has {} entries for {} users",
            budget.allocation.len(),
            k
        )));
    }

    let sv = g.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio <= RANK_TOL {
        return Err(RisError::RankDeficient { ratio, tol: RANK_TOL });
    }

    let gram = g * g.adjoint();
    let chol = Cholesky::new(gram.clone()).ok_or_else(|| {
        RisError::SingularMatrix("Gram matrix G G^H is not positive definite".into())
    })?;
    let inv = chol.inverse();

    let scale = budget.transmit_power / (k as f64 * budget.noise_power);
    let mut zf_terms = Vec::with_capacity(k);
    let mut dpc = 0.0;
    for kk in 0..k {
        let lk = budget.allocation[kk];
        let dpc_snr = scale * lk * gram[(kk, kk)].re;
        dpc += (1.0 + dpc_snr).log2();
        let zf_snr = if k == 1 {
            dpc_snr
        } else {
            scale * lk / inv[(kk, kk)].re
        };
        zf_terms.push((1.0 + zf_snr).log2());
    }
    Ok((zf_terms, dpc))
}

struct TrialOutcome {
    zf_terms: Vec<f64>,
    zf_sum: f64,
    dpc: f64,
    discards: u64,
}

/// Monte Carlo estimates of the zero-forcing sum rate and the dirty-paper
/// capacity on shared realizations.
#[derive(Debug, Clone)]
pub struct McEstimates {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub sum_rate_ci: f64,
    pub dpc_capacity: f64,
    pub dpc_capacity_ci: f64,
    pub trials: u64,
    pub discarded: u64,
}

const ATTEMPT_SHIFT: u32 = 40;
const MAX_ATTEMPTS: u64 = 200;

/// Runs seeded Monte Carlo trials and estimates rates and capacity together.
///
/// Trial `t` uses substream `t | attempt << 40 | stream_hi`; rank-deficient
/// draws are redrawn on the next attempt substream and counted. Results are
/// independent of worker count: trials are evaluated in fixed chunks and
/// reduced in trial order.
pub fn mc_rates(
    scenario: &Scenario,
    panel: &RisPanel,
    budget: &LinkBudget,
    synthesis: Synthesis,
    trials: u64,
    seed: u64,
    stream_hi: u64,
) -> Result<McEstimates> {
    if trials == 0 {
        return Err(RisError::InvalidConfig("need at least one trial".into()));
    }
    let k = scenario.num_users;
    if budget.allocation.len() != k {
        return Err(RisError::InvalidConfig(format!(
            "allocation has {} entries for {} users",
            budget.allocation.len(),
            k
        )));
    }
    let gains = aggregate_gain(scenario, panel)?;

    let run_trial = |t: u64| -> Result<TrialOutcome> {
        let mut discards = 0u64;
        for attempt in 0..MAX_ATTEMPTS {
            let stream = t | (attempt << ATTEMPT_SHIFT) | stream_hi;
            let real = match synthesis {
                Synthesis::Exact(kind) => synthesize_exact_with_gains(
                    scenario,
                    panel,
                    &FadingModel { kind, seed },
                    stream,
                    gains.clone(),
                )?,
                Synthesis::Clt => synthesize_clt_with_gains(
                    scenario,
                    panel,
                    RngStream { seed, stream },
                    gains.clone(),
                )?,
            };
            match trial_rates(&real.g, budget) {
                Ok((zf_terms, dpc)) => {
                    let zf_sum = zf_terms.iter().sum();
                    return Ok(TrialOutcome { zf_terms, zf_sum, dpc, discards });
                }
                Err(RisError::RankDeficient { .. }) | Err(RisError::SingularMatrix(_)) => {
                    discards += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Err(RisError::RankDeficient { ratio: 0.0, tol: RANK_TOL })
    };

    // Fixed-size chunks keep the reduction order independent of scheduling.
    const CHUNK: u64 = 32;
    let chunks = trials.div_ceil(CHUNK);
    let outcomes: Vec<Result<Vec<TrialOutcome>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let stop = (start + CHUNK).min(trials);
            (start..stop).map(run_trial).collect()
        })
        .collect();

    let mut per_user = vec![0.0f64; k];
    let mut zf_sums = Vec::with_capacity(trials as usize);
    let mut dpcs = Vec::with_capacity(trials as usize);
    let mut discarded = 0u64;
    for chunk in outcomes {
        for o in chunk? {
            for (acc, term) in per_user.iter_mut().zip(&o.zf_terms) {
                *acc += term;
            }
            zf_sums.push(o.zf_sum);
            dpcs.push(o.dpc);
            discarded += o.discards;
        }
    }
    if discarded * 100 >= trials {
        return Err(RisError::ExcessiveDiscards { discarded, trials });
    }

    let n = trials as f64;
    let ci = |xs: &[f64]| 1.96 * stats::sample_std(xs) / n.sqrt();
    Ok(McEstimates {
        per_user_rate: per_user.into_iter().map(|s| s / n).collect(),
        sum_rate: stats::mean(&zf_sums),
        sum_rate_ci: ci(&zf_sums),
        dpc_capacity: stats::mean(&dpcs),
        dpc_capacity_ci: ci(&dpcs),
        trials,
        discarded,
    })
}

/// Zero-forcing sum-rate estimate; the run seed takes precedence over the
/// fading model's own seed.
pub fn sum_rate_mc(
    scenario: &Scenario,
    panel: &RisPanel,
    budget: &LinkBudget,
    fading: &FadingModel,
    trials: u64,
    seed: u64,
) -> Result<McEstimates> {
    mc_rates(
        scenario,
        panel,
        budget,
        Synthesis::Exact(fading.kind),
        trials,
        seed,
        0,
    )
}

/// Dirty-paper capacity estimate via the Gaussian shortcut.
pub fn dpc_capacity_mc(
    scenario: &Scenario,
    panel: &RisPanel,
    budget: &LinkBudget,
    trials: u64,
    seed: u64,
) -> Result<McEstimates> {
    mc_rates(scenario, panel, budget, Synthesis::Clt, trials, seed, 0)
}

/// Finite-panel capacity upper bound:
/// `sum_k log2(1 + (P L_k / (K s2)) aggregate_k gamma^2 M)`.
pub fn capacity_upper_bound(
    gains: &GainProfile,
    budget: &LinkBudget,
    num_antennas: usize,
    gamma: f64,
) -> f64 {
    let k = gains.per_user_aggregate.len() as f64;
    let scale = budget.transmit_power / (k * budget.noise_power);
    gains
        .per_user_aggregate
        .iter()
        .zip(&budget.allocation)
        .map(|(agg, lk)| {
            (1.0 + scale * lk * agg * gamma * gamma * num_antennas as f64).log2()
        })
        .sum()
}

/// Infinite-panel capacity cap: the upper bound with the aggregate replaced
/// by its asymptotic limit.
pub fn capacity_limit(scenario: &Scenario, budget: &LinkBudget, gamma: f64) -> Result<f64> {
    let k = scenario.num_users;
    if budget.allocation.len() != k {
        return Err(RisError::InvalidConfig(format!(
            "allocation has {} entries for {} users",
            budget.allocation.len(),
            k
        )));
    }
    let z0 = scenario.bs_plane_distance();
    let m = scenario.num_antennas as f64;
    let scale = budget.transmit_power / (k as f64 * budget.noise_power);
    let mut total = 0.0;
    for (zk, lk) in scenario.user_plane_distances().iter().zip(&budget.allocation) {
        let limit = asymptotic_gain(z0, *zk, scenario.wavelength, scenario.antenna_gain)?;
        total += (1.0 + scale * lk * gamma * gamma * m * limit).log2();
    }
    Ok(total)
}

/// Closed-form floor of the rate-to-capacity ratio from per-user aggregate
/// and asymptotic gains. Exactly zero when M = K.
pub fn epsilon_hat_from_gains(
    aggregate: &[f64],
    asymptotic: &[f64],
    budget: &LinkBudget,
    num_antennas: usize,
    num_users: usize,
    gamma: f64,
) -> Result<f64> {
    if num_antennas < num_users {
        return Err(RisError::Domain(format!(
            "antenna count {num_antennas} below user count {num_users}"
        )));
    }
    let mu = num_antennas as f64 / num_users as f64;
    if mu == 1.0 {
        return Ok(0.0);
    }
    let rho = budget.transmit_power / budget.noise_power;
    let g2 = gamma * gamma;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((agg, lim), lk) in aggregate.iter().zip(asymptotic).zip(&budget.allocation) {
        num += (1.0 + rho * lk * g2 * agg * (mu - 1.0)).log2();
        den += (1.0 + rho * lk * g2 * mu * lim).log2();
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// [`epsilon_hat_from_gains`] driven by the deployment itself.
pub fn epsilon_hat(scenario: &Scenario, panel: &RisPanel, budget: &LinkBudget) -> Result<f64> {
    let gains = aggregate_gain(scenario, panel)?;
    epsilon_hat_from_gains(
        &gains.per_user_aggregate,
        &gains.asymptotic_limit,
        budget,
        scenario.num_antennas,
        scenario.num_users,
        panel.reflection_amplitude,
    )
}

/// Large-panel limit of the ratio floor: the aggregate replaced by the
/// asymptotic gain in the numerator.
pub fn epsilon_hat_limit(
    asymptotic: &[f64],
    budget: &LinkBudget,
    num_antennas: usize,
    num_users: usize,
    gamma: f64,
) -> Result<f64> {
    epsilon_hat_from_gains(asymptotic, asymptotic, budget, num_antennas, num_users, gamma)
}
