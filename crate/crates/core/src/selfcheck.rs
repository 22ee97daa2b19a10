//! Built-in verification: recomputes the identities and statistical laws
//! the simulator rests on and reports measured against expected per check.
//! One check is informational only; see `panel-gain-asymptote-ratio`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{normalized_sum_samples, synthesize_clt_with_gains, FadingKind, FadingModel, RngStream, C64};
use crate::error::{Result, RisError};
use crate::geometry::{
    aggregate_gain, asymptotic_gain, quadrature_gain, PhaseConfig, Point3, RisPanel, Scenario,
};
use crate::precoding::{snr_closed, snr_direct, uniform_power, zf_precoder, LinkBudget};
use crate::stats::{ks_distance, normal_cdf};

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

fn judged(name: &'static str, measured: f64, expected: f64, tolerance: f64) -> CheckReport {
    CheckReport {
        name,
        measured,
        expected,
        tolerance,
        pass: (measured - expected).abs() <= tolerance,
        note: String::new(),
    }
}

fn zf_identity_checks(out: &mut Vec<CheckReport>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut worst_rel = 0.0f64;
    let mut worst_leak = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(1..=6usize);
        let m = rng.random_range(k..=10usize);
        let g = DMatrix::from_fn(k, m, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        let budget = LinkBudget::new(2.0, 0.25, uniform_power(k))?;
        let pre = zf_precoder(&g)?;
        let direct = snr_direct(&g, &pre.w, &budget)?;
        let closed = snr_closed(&g, &budget)?;
        for (d, c) in direct.iter().zip(&closed) {
            worst_rel = worst_rel.max((d - c).abs() / c);
        }
        let gnorm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for j in 0..k {
            for c in 0..k {
                if j != c {
                    let dot: C64 = (0..m).map(|mm| g[(j, mm)] * pre.w[(mm, c)]).sum();
                    worst_leak = worst_leak.max(dot.norm() / gnorm);
                }
            }
        }
    }
    out.push(judged("zf-snr-identity", worst_rel, 0.0, 1e-9));
    out.push(judged("zf-leakage", worst_leak, 0.0, 1e-9));
    Ok(())
}

fn wishart_trace_checks(out: &mut Vec<CheckReport>) -> Result<()> {
    let (k, m, n) = (4usize, 8usize, 256u64);
    let scen = Scenario::new(
        Point3::new(-2.0, 0.0, 3.0),
        (0..k).map(|i| Point3::new(1.0 + i as f64 * 0.3, 0.4 * i as f64 - 0.6, 1.5)).collect(),
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        0.05,
        1.0,
        m,
    )?;
    let panel = RisPanel::new(n, 0.02, 0.02, 1.0, PhaseConfig::AllZero)?;
    let gains = aggregate_gain(&scen, &panel)?;

    let draws = 2000u64;
    let mut direct = 0.0;
    let mut inverse = 0.0;
    for t in 0..draws {
        let real = synthesize_clt_with_gains(
            &scen,
            &panel,
            RngStream { seed: 0x715a, stream: t },
            gains.clone(),
        )?;
        direct += real.h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w = &real.h * real.h.adjoint();
        let winv = w
            .try_inverse()
            .ok_or_else(|| RisError::SingularMatrix("Gram matrix of a Gaussian draw".into()))?;
        inverse += (0..k).map(|i| winv[(i, i)].re).sum::<f64>();
    }
    let denom = (m * k) as f64 * n as f64;
    out.push(judged("wishart-trace-direct", direct / draws as f64 / denom, 1.0, 0.01));
    let scale = n as f64 * (m - k) as f64 / k as f64;
    out.push(judged("wishart-trace-inverse", inverse / draws as f64 * scale, 1.0, 0.03));
    Ok(())
}

fn normalized_sum_check(out: &mut Vec<CheckReport>) -> Result<()> {
    let panel = RisPanel::new(4096, 0.02, 0.02, 1.0, PhaseConfig::UniformRandom { seed: 11 })?;
    let sd = 0.5f64.sqrt();
    let mut worst = 0.0f64;
    for kind in [
        FadingKind::ComplexGaussian,
        FadingKind::UniformPhaseUnitModulus,
        FadingKind::RealBernoulli,
    ] {
        let fading = FadingModel { kind, seed: 0x60f ^ kind as u64 };
        let samples = normalized_sum_samples(&fading, &panel, 5000)?;
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        worst = worst
            .max(ks_distance(&re, |x| normal_cdf(x, 0.0, sd)))
            .max(ks_distance(&im, |x| normal_cdf(x, 0.0, sd)));
    }
    out.push(judged("normalized-sum-normality", worst, 0.0, 0.03));
    Ok(())
}

fn panel_gain_checks(out: &mut Vec<CheckReport>) -> Result<()> {
    let (z0, zk, x0) = (3.0, 2.0, 1.0);
    let scen = Scenario::new(
        Point3::new(-x0, 0.0, z0),
        vec![Point3::new(1.0, 0.0, zk)],
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        0.05,
        1.0,
        1,
    )?;
    let pitch = 0.1;
    let mut sums = Vec::new();
    for side in [1000u64, 2000, 4000] {
        let p = RisPanel::new(side * side, pitch, pitch, 1.0, PhaseConfig::AllZero)?;
        sums.push(aggregate_gain(&scen, &p)?.per_user_aggregate[0]);
    }
    let converged = sums[2];
    out.push(judged(
        "panel-gain-convergence",
        (converged - sums[1]).abs() / converged,
        0.0,
        0.01,
    ));

    let halfwidth = 4000.0 * pitch / 2.0;
    let q = quadrature_gain(z0, zk, x0, scen.wavelength, scen.antenna_gain, halfwidth, false)?;
    out.push(judged("panel-gain-vs-quadrature", converged / q, 1.0, 0.01));

    let asym = asymptotic_gain(z0, zk, scen.wavelength, scen.antenna_gain)?;
    out.push(CheckReport {
        name: "panel-gain-asymptote-ratio",
        measured: converged / asym,
        expected: f64::NAN,
        tolerance: f64::NAN,
        pass: true,
        note: "informational, not judged: converged plane sum over the large-panel closed form"
            .into(),
    });
    Ok(())
}

/// Runs every built-in check. A returned error means a check could not be
/// evaluated at all; failed checks come back with `pass == false`.
pub fn run_all() -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    zf_identity_checks(&mut out)?;
    wishart_trace_checks(&mut out)?;
    normalized_sum_check(&mut out)?;
    panel_gain_checks(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_and_ratio_is_informational() {
        let reports = run_all().unwrap();
        assert_eq!(reports.len(), 8);
        for r in &reports {
            assert!(r.pass, "{} failed: measured {}", r.name, r.measured);
        }
        let ratio = reports
            .iter()
            .find(|r| r.name == "panel-gain-asymptote-ratio")
            .unwrap();
        assert!(!ratio.note.is_empty());
        assert!(ratio.measured.is_finite());
    }
}
