//! Fading synthesis and channel assembly.
//!
//! The reflect-sum channel entry for user `k`, antenna `m` is
//! `[H]_{km} = sum_n h_n^{km} gamma exp(-j theta_n)` with fresh unit-variance
//! fading per (element, user, antenna). For large panels the sum is itself
//! Gaussian with variance `N gamma^2` regardless of the fading law, so it can
//! be drawn directly (the CLT shortcut). The physical channel `G` scales row
//! `k` of `H` by the square root of the average per-element gain.
//!
//! Draw-order contract (frozen so seeded runs are reproducible bit-for-bit):
//! exact synthesis consumes fading element-major (`n` outer, then user `k`,
//! then antenna `m`); the shortcut consumes entries row-major (`k` outer,
//! `m` inner); complex Gaussians draw the real component first.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RisError};
use crate::geometry::{aggregate_gain, GainProfile, RisPanel, Scenario};

pub type C64 = Complex<f64>;

/// Exact synthesis refuses jobs above this many fading draws (N*K*M).
pub const DEFAULT_DRAW_BUDGET: u128 = 1_000_000_000;

/// Fading law for a single element-to-user hop. Every kind has mean 0 and
/// unit second moment, which is all the Gaussian shortcut relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingKind {
    /// Circularly symmetric complex Gaussian, variance 1/2 per component.
    ComplexGaussian,
    /// `exp(j phi)` with uniform phase.
    UniformPhaseUnitModulus,
    /// Real +1/-1 with equal probability.
    RealBernoulli,
}

#[derive(Debug, Clone, Copy)]
pub struct FadingModel {
    pub kind: FadingKind,
    pub seed: u64,
}

/// Seed plus counter-derived substream; equal streams reproduce draws
/// bit-identically, distinct streams are independent.
#[derive(Debug, Clone, Copy)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    ExactSum,
    CltShortcut,
}

/// One channel draw: the normalized reflect-sum matrix `H`, the gain profile
/// of the deployment and the scaled channel `G`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: DMatrix<C64>,
    pub gains: GainProfile,
    pub g: DMatrix<C64>,
    pub synthesis_mode: SynthesisMode,
    /// Accuracy note, e.g. shortcut use below the comfortable panel size.
    pub advisory: Option<String>,
}

/// One fading draw of the given law. Exposed so tests can replay streams.
pub fn draw_unit(kind: FadingKind, rng: &mut ChaCha8Rng) -> C64 {
    match kind {
        FadingKind::ComplexGaussian => {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
        }
        FadingKind::UniformPhaseUnitModulus => {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            C64::from_polar(1.0, phi)
        }
        FadingKind::RealBernoulli => {
            if rng.random::<bool>() {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        }
    }
}

fn scale_rows(h: &DMatrix<C64>, gains: &GainProfile) -> DMatrix<C64> {
    let mut g = h.clone();
    for (k, avg) in gains.per_user_average.iter().enumerate() {
        let s = avg.sqrt();
        for m in 0..g.ncols() {
            g[(k, m)] *= s;
        }
    }
    g
}

/// Per-element summation of the reflect channel (fading seeded from the
/// model, substream selected by `stream`). Refuses jobs above `DEFAULT_DRAW_BUDGET`.
pub fn synthesize_exact(
    scenario: &Scenario,
    panel: &RisPanel,
    fading: &FadingModel,
    stream: u64,
) -> Result<ChannelRealization> {
    let gains = aggregate_gain(scenario, panel)?;
    synthesize_exact_with_gains(scenario, panel, fading, stream, gains)
}

/// [`synthesize_exact`] with precomputed gains, for repeated trials on one
/// deployment.
pub fn synthesize_exact_with_gains(
    scenario: &Scenario,
    panel: &RisPanel,
    fading: &FadingModel,
    stream: u64,
    gains: GainProfile,
) -> Result<ChannelRealization> {
    let k = scenario.num_users;
    let m = scenario.num_antennas;
    let n = panel.num_elements;
    let required = n as u128 * k as u128 * m as u128;
    if required > DEFAULT_DRAW_BUDGET {
        return Err(RisError::BudgetExceeded {
            required,
            budget: DEFAULT_DRAW_BUDGET,
        });
    }

    let mut rng = RngStream { seed: fading.seed, stream }.rng();
    let gamma = panel.reflection_amplitude;
    let mut h = DMatrix::<C64>::zeros(k, m);
    for theta in panel.phases() {
        let factor = C64::from_polar(gamma, -theta);
        for kk in 0..k {
            for mm in 0..m {
                h[(kk, mm)] += draw_unit(fading.kind, &mut rng) * factor;
            }
        }
    }

    let g = scale_rows(&h, &gains);
    Ok(ChannelRealization {
        h,
        gains,
        g,
        synthesis_mode: SynthesisMode::ExactSum,
        advisory: None,
    })
}

/// Draws `H` entries directly as complex Gaussians of variance `N gamma^2`,
/// valid for large panels under any per-element fading law.
pub fn synthesize_clt(
    scenario: &Scenario,
    panel: &RisPanel,
    stream: RngStream,
) -> Result<ChannelRealization> {
    let gains = aggregate_gain(scenario, panel)?;
    synthesize_clt_with_gains(scenario, panel, stream, gains)
}

/// [`synthesize_clt`] with precomputed gains.
pub fn synthesize_clt_with_gains(
    scenario: &Scenario,
    panel: &RisPanel,
    stream: RngStream,
    gains: GainProfile,
) -> Result<ChannelRealization> {
    let k = scenario.num_users;
    let m = scenario.num_antennas;
    let n = panel.num_elements;
    let sd = (n as f64 * panel.reflection_amplitude * panel.reflection_amplitude / 2.0).sqrt();

    let mut rng = stream.rng();
    let mut h = DMatrix::<C64>::zeros(k, m);
    for kk in 0..k {
        for mm in 0..m {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            h[(kk, mm)] = C64::new(re * sd, im * sd);
        }
    }

    let advisory = (n < 64).then(|| {
        format!("Gaussian shortcut on a {n}-element panel; the normal approximation is loose below 64 elements")
    });
    let g = scale_rows(&h, &gains);
    Ok(ChannelRealization {
        h,
        gains,
        g,
        synthesis_mode: SynthesisMode::CltShortcut,
        advisory,
    })
}

/// Independent draws of the normalized reflect sum
/// `sum_n h_n gamma exp(-j theta_n) / (gamma sqrt(N))`, for goodness-of-fit
/// testing of the Gaussian shortcut.
pub fn normalized_sum_samples(
    fading: &FadingModel,
    panel: &RisPanel,
    count: usize,
) -> Result<Vec<C64>> {
    let gamma = panel.reflection_amplitude;
    if gamma == 0.0 {
        return Err(RisError::Domain(
            "normalized sum is degenerate at zero reflection amplitude".into(),
        ));
    }
    let n = panel.num_elements;
    let required = n as u128 * count as u128;
    if required > DEFAULT_DRAW_BUDGET {
        return Err(RisError::BudgetExceeded {
            required,
            budget: DEFAULT_DRAW_BUDGET,
        });
    }

    let mut rng = RngStream { seed: fading.seed, stream: 0 }.rng();
    let norm = 1.0 / (gamma * (n as f64).sqrt());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut s = C64::new(0.0, 0.0);
        for theta in panel.phases() {
            let factor = C64::from_polar(gamma, -theta);
            s += draw_unit(fading.kind, &mut rng) * factor;
        }
        out.push(s * norm);
    }
    Ok(out)
}
