//! Zero-forcing precoding and power allocation.
//!
//! The precoder columns are the normalized columns of `G^H (G G^H)^{-1}`,
//! which nulls inter-user interference. Per-user SNR is available two ways:
//! directly from `|g_k w_k|^2` and through the Gram-matrix identity
//! `|g_k w_k|^2 = 1 / [(G G^H)^{-1}]_{kk}`; the two must agree to 1e-9
//! relative on every full-rank channel. All solves go through the K x K Gram
//! matrix; no M x M inverse is ever formed.

use nalgebra::{Cholesky, DMatrix};

use crate::channel::C64;
use crate::error::{Result, RisError};

/// Relative singular-value cutoff below which a channel is treated as
/// rank-deficient rather than numerically noise-amplifying.
pub const RANK_TOL: f64 = 1e-10;

/// Zero-forcing precoder: `v` holds the raw pseudo-inverse columns,
/// `w` the unit-norm columns actually transmitted.
#[derive(Debug, Clone)]
pub struct Precoder {
    pub w: DMatrix<C64>,
    pub v: DMatrix<C64>,
}

/// Transmit power, noise power (both watts) and the per-user power split
/// `allocation`, which sums to one.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    pub transmit_power: f64,
    pub noise_power: f64,
    pub allocation: Vec<f64>,
}

impl LinkBudget {
    pub fn new(transmit_power: f64, noise_power: f64, allocation: Vec<f64>) -> Result<Self> {
        if !(transmit_power > 0.0) || !(noise_power > 0.0) {
            return Err(RisError::InvalidConfig(
                "transmit and noise power must be positive".into(),
            ));
        }
        if allocation.is_empty() || allocation.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return Err(RisError::InvalidConfig(
                "allocation entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = allocation.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(RisError::InvalidConfig(format!(
                "allocation sums to {total}, expected 1"
            )));
        }
        Ok(Self {
            transmit_power,
            noise_power,
            allocation,
        })
    }
}

fn gram_cholesky(g: &DMatrix<C64>) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let gram = g * g.adjoint();
    Cholesky::new(gram).ok_or_else(|| {
        RisError::SingularMatrix("Gram matrix G G^H is not positive definite".into())
    })
}

/// Builds the zero-forcing precoder for a full-row-rank channel.
pub fn zf_precoder(g: &DMatrix<C64>) -> Result<Precoder> {
    let k = g.nrows();
    if k == 0 || g.ncols() < k {
        return Err(RisError::InvalidConfig(format!(
            "channel must be K x M with 1 <= K <= M, got {} x {}",
            k,
            g.ncols()
        )));
    }

    // Rank check on G itself: the Gram eigenvalues square the ratio, which
    // would hide a 1e-10 cutoff below f64 resolution.
    let sv = g.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio <= RANK_TOL {
        return Err(RisError::RankDeficient { ratio, tol: RANK_TOL });
    }

    let chol = gram_cholesky(g)?;
    let gram_inv = chol.inverse();
    let v = g.adjoint() * gram_inv;
    let mut w = v.clone();
    for j in 0..k {
        let norm = w.column(j).norm();
        for i in 0..w.nrows() {
            w[(i, j)] /= norm;
        }
    }
    Ok(Precoder { w, v })
}

/// Per-user SNR from the transmitted beams: `(P L_k / (K s2)) |g_k w_k|^2`.
pub fn snr_direct(g: &DMatrix<C64>, w: &DMatrix<C64>, budget: &LinkBudget) -> Result<Vec<f64>> {
    let k = g.nrows();
    if w.nrows() != g.ncols() || w.ncols() != k || budget.allocation.len() != k {
        return Err(RisError::InvalidConfig(format!(
            "dimension mismatch: G is {} x {}, W is {} x {}, allocation has {} entries",
            k,
            g.ncols(),
            w.nrows(),
            w.ncols(),
            budget.allocation.len()
        )));
    }
    let scale = budget.transmit_power / (k as f64 * budget.noise_power);
    Ok((0..k)
        .map(|kk| {
            let beam: C64 = g.row(kk).iter().zip(w.column(kk).iter()).map(|(a, b)| a * b).sum();
            scale * budget.allocation[kk] * beam.norm_sqr()
        })
        .collect())
}

/// Per-user SNR through the Gram matrix: `P L_k / (K s2 [(G G^H)^{-1}]_{kk})`.
pub fn snr_closed(g: &DMatrix<C64>, budget: &LinkBudget) -> Result<Vec<f64>> {
    let k = g.nrows();
    if budget.allocation.len() != k {
        return Err(RisError::InvalidConfig(format!(
            "allocation has {} entries for {} users",
            budget.allocation.len(),
            k
        )));
    }
    let inv_diag = gram_inverse_diagonal(g)?;
    let scale = budget.transmit_power / (k as f64 * budget.noise_power);
    Ok((0..k)
        .map(|kk| scale * budget.allocation[kk] / inv_diag[kk])
        .collect())
}

/// Diagonal of `(G G^H)^{-1}`, the reciprocal ZF effective gains.
pub fn gram_inverse_diagonal(g: &DMatrix<C64>) -> Result<Vec<f64>> {
    let chol = gram_cholesky(g)?;
    let inv = chol.inverse();
    Ok((0..g.nrows()).map(|kk| inv[(kk, kk)].re).collect())
}

/// Water-filling allocation maximizing the sum rate
/// `sum_k log2(1 + P L_k gain_k / (K s2))` subject to `sum L_k = 1`.
///
/// Deterministic active-set computation; a user with zero gain gets zero
/// power. Degenerate all-zero gains fall back to the uniform split.
pub fn waterfill(effective_gains: &[f64], transmit_power: f64, noise_power: f64) -> Vec<f64> {
    let k = effective_gains.len();
    if k == 0 {
        return Vec::new();
    }
    // Inverse-gain levels: L_k = max(0, nu - c_k), c_k = s2 K / (P g_k).
    let c: Vec<f64> = effective_gains
        .iter()
        .map(|g| {
            if *g > 0.0 {
                noise_power * k as f64 / (transmit_power * g)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| c[*a].total_cmp(&c[*b]));

    // Largest active set t whose water level clears its highest level c.
    let mut chosen = None;
    for t in (1..=k).rev() {
        let ct = c[order[t - 1]];
        if !ct.is_finite() {
            continue;
        }
        let sum: f64 = order[..t].iter().map(|i| c[*i]).sum();
        let nu = (1.0 + sum) / t as f64;
        if nu > ct {
            chosen = Some((t, nu));
            break;
        }
    }
    let Some((t, nu)) = chosen else {
        return uniform_power(k);
    };
    let mut alloc = vec![0.0; k];
    for i in &order[..t] {
        alloc[*i] = nu - c[*i];
    }
    // Exact renormalization absorbs the last-bit rounding of the water level.
    let total: f64 = alloc.iter().sum();
    for a in &mut alloc {
        *a /= total;
    }
    alloc
}

/// Equal power split.
pub fn uniform_power(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}
