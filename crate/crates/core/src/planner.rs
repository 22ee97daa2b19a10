//! Dimensioning: the minimum element count whose rate-to-capacity ratio
//! floor reaches a target, solved two ways. The closed form drops additive
//! constants under a high-SNR assumption and needs a caller-pinned
//! per-element gain; the search evaluates the exact ratio floor with the
//! N-dependent panel aggregate and is authoritative.

use crate::error::{Result, RisError};
use crate::geometry::{aggregate_gain, most_square_factors, PhaseConfig, RisPanel, Scenario};
use crate::precoding::LinkBudget;
use crate::rates::{epsilon_hat_from_gains, epsilon_hat_limit};

/// A dimensioning problem: reach ratio `target_ratio` on this deployment.
/// Element dimensions shape the candidate panels during the search.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub target_ratio: f64,
    pub scenario: Scenario,
    pub budget: LinkBudget,
    pub gamma: f64,
    pub element_width: f64,
    pub element_height: f64,
    pub search_cap: u64,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_ratio > 0.0 && self.target_ratio < 1.0) {
            return Err(RisError::InvalidConfig(format!(
                "target ratio {} outside (0, 1)",
                self.target_ratio
            )));
        }
        if self.budget.allocation.len() != self.scenario.num_users {
            return Err(RisError::InvalidConfig(
                "allocation length does not match the user count".into(),
            ));
        }
        if self.search_cap == 0 {
            return Err(RisError::InvalidConfig("search cap must be positive".into()));
        }
        Ok(())
    }

    fn mu(&self) -> f64 {
        self.scenario.num_antennas as f64 / self.scenario.num_users as f64
    }

    fn panel(&self, n: u64) -> Result<RisPanel> {
        RisPanel::new(
            n,
            self.element_width,
            self.element_height,
            self.gamma,
            PhaseConfig::AllZero,
        )
    }

    fn ratio_at(&self, n: u64) -> Result<f64> {
        let gains = aggregate_gain(&self.scenario, &self.panel(n)?)?;
        epsilon_hat_from_gains(
            &gains.per_user_aggregate,
            &gains.asymptotic_limit,
            &self.budget,
            self.scenario.num_antennas,
            self.scenario.num_users,
            self.gamma,
        )
    }
}

pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMethod {
    ClosedForm,
    Search,
}

/// Why a plan has no element count: the target exceeds the analytic ratio
/// limit (mathematically impossible), or the search cap was hit first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasibility {
    AboveRatioLimit { limit: f64 },
    SearchCapExceeded { cap: u64 },
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub n_required: Option<u64>,
    pub infeasibility: Option<Infeasibility>,
    pub method: PlanMethod,
    /// Exact ratio floor evaluated at the returned count.
    pub epsilon_at_n: Option<f64>,
    /// High-SNR assumption of the closed form holds for every user.
    pub high_snr_valid: bool,
    pub high_snr_per_user: Vec<bool>,
    pub side_length: f64,
    pub grid: (u64, u64),
}

impl PlanResult {
    pub fn feasible(&self) -> bool {
        self.n_required.is_some()
    }

    fn infeasible(method: PlanMethod, why: Infeasibility) -> Self {
        Self {
            n_required: None,
            infeasibility: Some(why),
            method,
            epsilon_at_n: None,
            high_snr_valid: false,
            high_snr_per_user: Vec::new(),
            side_length: 0.0,
            grid: (0, 0),
        }
    }
}

/// Square-panel side length and lattice shape for an element count.
/// With square elements the side is `sqrt(N) * a` even when N is not a
/// perfect square; otherwise the larger extent of the most-square lattice.
pub fn panel_from_count(n: u64, element_width: f64, element_height: f64) -> (f64, (u64, u64)) {
    let (rows, cols) = most_square_factors(n);
    let side = if element_width == element_height {
        (n as f64).sqrt() * element_width
    } else {
        (cols as f64 * element_width).max(rows as f64 * element_height)
    };
    (side, (rows, cols))
}

/// High-SNR validity per user at element count `n`: both logarithm arguments
/// of the ratio floor exceed 10 K.
fn high_snr_flags(
    request: &PlanRequest,
    per_element_gain: &[f64],
    asymptotic: &[f64],
    n: u64,
) -> Vec<bool> {
    let k = request.scenario.num_users;
    let mu = request.mu();
    let rho = request.budget.transmit_power / request.budget.noise_power;
    let g2 = request.gamma * request.gamma;
    let threshold = 10.0 * k as f64;
    per_element_gain
        .iter()
        .zip(asymptotic)
        .zip(&request.budget.allocation)
        .map(|((avg, lim), lk)| {
            let numer = rho * lk * g2 * avg * n as f64 * (mu - 1.0);
            let denom = rho * lk * g2 * mu * lim;
            numer > threshold && denom > threshold
        })
        .collect()
}

/// Solves the dimensioning problem with the printed closed form, using the
/// caller-supplied per-element gains (the formula is circular in N, so the
/// reference gain must be pinned from outside).
pub fn min_elements_closed_form(
    request: &PlanRequest,
    per_element_gain: &[f64],
) -> Result<PlanResult> {
    request.validate()?;
    let k = request.scenario.num_users;
    if per_element_gain.len() != k {
        return Err(RisError::InvalidConfig(format!(
            "per-element gain list has {} entries for {} users",
            per_element_gain.len(),
            k
        )));
    }
    let mu = request.mu();
    if mu <= 1.0 {
        return Ok(PlanResult::infeasible(
            PlanMethod::ClosedForm,
            Infeasibility::AboveRatioLimit { limit: 0.0 },
        ));
    }
    if per_element_gain.iter().any(|g| !(*g > 0.0)) {
        return Err(RisError::Domain(
            "per-element gains must be positive".into(),
        ));
    }

    let z0 = request.scenario.bs_plane_distance();
    let asymptotic: Vec<f64> = request
        .scenario
        .user_plane_distances()
        .iter()
        .map(|zk| {
            crate::geometry::asymptotic_gain(
                z0,
                *zk,
                request.scenario.wavelength,
                request.scenario.antenna_gain,
            )
        })
        .collect::<Result<_>>()?;

    // N = ceil( (prod_k X_k^eta / Y_k)^(1/K) ), evaluated in logs:
    // X_k = rho L_k gamma^2 mu lim_k, Y_k = rho L_k gamma^2 avg_k (mu - 1).
    let rho = request.budget.transmit_power / request.budget.noise_power;
    let g2 = request.gamma * request.gamma;
    let eta = request.target_ratio;
    let mut log_n = 0.0;
    for ((avg, lim), lk) in per_element_gain.iter().zip(&asymptotic).zip(&request.budget.allocation)
    {
        let x = rho * lk * g2 * mu * lim;
        let y = rho * lk * g2 * avg * (mu - 1.0);
        log_n += eta * x.ln() - y.ln();
    }
    log_n /= k as f64;
    // The relative nudge keeps analytically exact powers (2^15 from the
    // X = 2^20, eta = 3/4 case) from ceiling one past the integer on
    // float residue; the method drops additive constants anyway.
    let v = log_n.exp();
    let n = (v * (1.0 - 1e-9)).ceil().max(1.0) as u64;

    let flags = high_snr_flags(request, per_element_gain, &asymptotic, n);
    let (side, grid) = panel_from_count(n, request.element_width, request.element_height);
    // The exact ratio floor costs O(N K) element sums; past the search cap
    // the formula result is still reported, unevaluated.
    let eps = if n <= request.search_cap {
        Some(request.ratio_at(n)?)
    } else {
        None
    };
    Ok(PlanResult {
        n_required: Some(n),
        infeasibility: None,
        method: PlanMethod::ClosedForm,
        epsilon_at_n: eps,
        high_snr_valid: flags.iter().all(|f| *f),
        high_snr_per_user: flags,
        side_length: side,
        grid,
    })
}

/// Solves the dimensioning problem by exact search: exponential doubling to
/// bracket the target, then integer bisection. The returned count carries a
/// certificate: the ratio floor meets the target there and misses it one
/// element lower.
pub fn min_elements_search(request: &PlanRequest) -> Result<PlanResult> {
    request.validate()?;
    let mu = request.mu();
    if mu <= 1.0 {
        return Ok(PlanResult::infeasible(
            PlanMethod::Search,
            Infeasibility::AboveRatioLimit { limit: 0.0 },
        ));
    }

    // Analytic feasibility first, so infeasibility is a verdict about the
    // target, never a timeout.
    let z0 = request.scenario.bs_plane_distance();
    let asymptotic: Vec<f64> = request
        .scenario
        .user_plane_distances()
        .iter()
        .map(|zk| {
            crate::geometry::asymptotic_gain(
                z0,
                *zk,
                request.scenario.wavelength,
                request.scenario.antenna_gain,
            )
        })
        .collect::<Result<_>>()?;
    let limit = epsilon_hat_limit(
        &asymptotic,
        &request.budget,
        request.scenario.num_antennas,
        request.scenario.num_users,
        request.gamma,
    )?;
    if request.target_ratio >= limit {
        return Ok(PlanResult::infeasible(
            PlanMethod::Search,
            Infeasibility::AboveRatioLimit { limit },
        ));
    }

    let eta = request.target_ratio;
    // Doubling phase on well-shaped power-of-two panels.
    let mut lo = 0u64; // ratio at 0 elements is 0 by convention
    let mut hi = 1u64;
    let (mut hi_eps, mut found) = (0.0, false);
    while hi <= request.search_cap {
        let e = request.ratio_at(hi)?;
        if e >= eta {
            hi_eps = e;
            found = true;
            break;
        }
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    if !found {
        return Ok(PlanResult::infeasible(
            PlanMethod::Search,
            Infeasibility::SearchCapExceeded { cap: request.search_cap },
        ));
    }

    // Bisection keeps the bracket invariant: ratio(lo) < eta <= ratio(hi),
    // which at exit is the minimality certificate for hi.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let e = request.ratio_at(mid)?;
        if e >= eta {
            hi = mid;
            hi_eps = e;
        } else {
            lo = mid;
        }
    }
    debug_assert!(hi_eps >= eta);

    let gains = aggregate_gain(&request.scenario, &request.panel(hi)?)?;
    let flags = high_snr_flags(request, &gains.per_user_average, &asymptotic, hi);
    let (side, grid) = panel_from_count(hi, request.element_width, request.element_height);
    Ok(PlanResult {
        n_required: Some(hi),
        infeasibility: None,
        method: PlanMethod::Search,
        epsilon_at_n: Some(hi_eps),
        high_snr_valid: flags.iter().all(|f| *f),
        high_snr_per_user: flags,
        side_length: side,
        grid,
    })
}
