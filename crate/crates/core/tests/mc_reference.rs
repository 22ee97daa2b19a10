//! Straight-line re-derivation of the Monte Carlo estimates.
//!
//! Everything downstream of the gain profile is recomputed here from
//! scratch: the channel draws replay the documented per-trial substream
//! and draw order, the Gram inverse is a hand-rolled Gauss-Jordan
//! elimination instead of a Cholesky factorization, and the averages and
//! intervals are written out longhand. Agreement to 1e-12 pins the whole
//! chain, not just individual pieces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ris_core::channel::{FadingKind, C64};
use ris_core::geometry::{aggregate_gain, PhaseConfig, Point3, RisPanel, Scenario};
use ris_core::precoding::{uniform_power, LinkBudget};
use ris_core::rates::{mc_rates, Synthesis};

fn scenario(users: usize, antennas: usize) -> Scenario {
    let positions = (0..users)
        .map(|k| Point3::new(1.0 + 0.4 * k as f64, 0.6 * k as f64 - 0.3, 1.5))
        .collect();
    Scenario::new(
        Point3::new(-2.0, 0.0, 3.0),
        positions,
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        0.05,
        1.0,
        antennas,
    )
    .unwrap()
}

fn panel(n: u64) -> RisPanel {
    RisPanel::new(n, 0.05, 0.05, 1.0, PhaseConfig::AllZero).unwrap()
}

fn budget(k: usize) -> LinkBudget {
    LinkBudget::new(2.0, 1e-9, uniform_power(k)).unwrap()
}

/// Gauss-Jordan inverse with partial pivoting on the augmented system.
fn invert(a: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = a.len();
    let zero = C64::new(0.0, 0.0);
    let mut aug: Vec<Vec<C64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    zero
                }
            }));
            r
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| aug[p][col].norm().total_cmp(&aug[q][col].norm()))
            .unwrap();
        assert!(aug[pivot][col].norm() > 0.0, "singular reference matrix");
        aug.swap(col, pivot);

        let inv_p = C64::new(1.0, 0.0) / aug[col][col];
        for j in 0..2 * n {
            aug[col][j] *= inv_p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = aug[row][col];
            for j in 0..2 * n {
                let sub = f * aug[col][j];
                aug[row][j] -= sub;
            }
        }
    }
    aug.into_iter().map(|mut r| r.split_off(n)).collect()
}

struct Reference {
    per_user_rate: Vec<f64>,
    sum_rate: f64,
    sum_rate_ci: f64,
    dpc_capacity: f64,
    dpc_capacity_ci: f64,
}

enum Draws {
    /// Direct Gaussian entries, row-major, real part first.
    Gaussian,
    /// Per-element complex-Gaussian sums, element-major, AllZero phases.
    ElementSum,
}

/// Replays the documented draw order for trial substream `t` and returns
/// the scaled channel as nested rows.
fn draw_channel(
    draws: &Draws,
    users: usize,
    antennas: usize,
    n: u64,
    gamma: f64,
    avg: &[f64],
    seed: u64,
    t: u64,
) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    let mut h = vec![vec![C64::new(0.0, 0.0); antennas]; users];
    match draws {
        Draws::Gaussian => {
            let sd = (n as f64 * gamma * gamma / 2.0).sqrt();
            for row in h.iter_mut() {
                for entry in row.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *entry = C64::new(re * sd, im * sd);
                }
            }
        }
        Draws::ElementSum => {
            let factor = C64::from_polar(gamma, -0.0);
            for _ in 0..n {
                for row in h.iter_mut() {
                    for entry in row.iter_mut() {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        let unit = C64::new(
                            re * std::f64::consts::FRAC_1_SQRT_2,
                            im * std::f64::consts::FRAC_1_SQRT_2,
                        );
                        *entry += unit * factor;
                    }
                }
            }
        }
    }
    for (k, row) in h.iter_mut().enumerate() {
        let s = avg[k].sqrt();
        for entry in row.iter_mut() {
            *entry *= s;
        }
    }
    h
}

fn reference_estimates(
    scen: &Scenario,
    panel: &RisPanel,
    budget: &LinkBudget,
    draws: Draws,
    trials: u64,
    seed: u64,
) -> Reference {
    let gains = aggregate_gain(scen, panel).unwrap();
    let users = scen.num_users;
    let scale = budget.transmit_power / (users as f64 * budget.noise_power);

    let mut per_user_sums = vec![0.0; users];
    let mut zf_sums = Vec::with_capacity(trials as usize);
    let mut dpcs = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let g = draw_channel(
            &draws,
            users,
            scen.num_antennas,
            panel.num_elements,
            panel.reflection_amplitude,
            &gains.per_user_average,
            seed,
            t,
        );

        let mut gram = vec![vec![C64::new(0.0, 0.0); users]; users];
        for i in 0..users {
            for j in 0..users {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..scen.num_antennas {
                    acc += g[i][m] * g[j][m].conj();
                }
                gram[i][j] = acc;
            }
        }
        let inv = invert(&gram);

        let mut zf_sum = 0.0;
        let mut dpc = 0.0;
        for k in 0..users {
            let lk = budget.allocation[k];
            let dpc_snr = scale * lk * gram[k][k].re;
            dpc += (1.0 + dpc_snr).log2();
            let zf_snr = if users == 1 {
                dpc_snr
            } else {
                scale * lk / inv[k][k].re
            };
            let term = (1.0 + zf_snr).log2();
            per_user_sums[k] += term;
            zf_sum += term;
        }
        zf_sums.push(zf_sum);
        dpcs.push(dpc);
    }

    let n = trials as f64;
    let halfwidth = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
        1.96 * (ss / (n - 1.0)).sqrt() / n.sqrt()
    };
    Reference {
        per_user_rate: per_user_sums.iter().map(|s| s / n).collect(),
        sum_rate: zf_sums.iter().sum::<f64>() / n,
        sum_rate_ci: halfwidth(&zf_sums),
        dpc_capacity: dpcs.iter().sum::<f64>() / n,
        dpc_capacity_ci: halfwidth(&dpcs),
    }
}

fn assert_close(label: &str, got: f64, want: f64) {
    let tol = 1e-12 * want.abs().max(1e-30);
    assert!(
        (got - want).abs() <= tol,
        "{label}: {got} vs reference {want}"
    );
}

fn compare(scen: &Scenario, panel: &RisPanel, synthesis: Synthesis, draws: Draws, trials: u64, seed: u64) {
    let budget = budget(scen.num_users);
    let est = mc_rates(scen, panel, &budget, synthesis, trials, seed, 0).unwrap();
    assert_eq!(est.discarded, 0, "reference replay assumes no retries");
    assert_eq!(est.trials, trials);

    let want = reference_estimates(scen, panel, &budget, draws, trials, seed);
    for k in 0..scen.num_users {
        assert_close("per-user rate", est.per_user_rate[k], want.per_user_rate[k]);
    }
    assert_close("sum rate", est.sum_rate, want.sum_rate);
    assert_close("sum rate interval", est.sum_rate_ci, want.sum_rate_ci);
    assert_close("dpc capacity", est.dpc_capacity, want.dpc_capacity);
    assert_close("dpc interval", est.dpc_capacity_ci, want.dpc_capacity_ci);
}

#[test]
fn gaussian_shortcut_chain_matches_longhand_reimplementation() {
    compare(
        &scenario(2, 4),
        &panel(256),
        Synthesis::Clt,
        Draws::Gaussian,
        300,
        0x0a11ce,
    );
}

#[test]
fn three_user_gram_inverse_agrees_with_gauss_jordan() {
    compare(
        &scenario(3, 5),
        &panel(256),
        Synthesis::Clt,
        Draws::Gaussian,
        200,
        77,
    );
}

#[test]
fn element_sum_chain_matches_longhand_reimplementation() {
    compare(
        &scenario(2, 3),
        &panel(64),
        Synthesis::Exact(FadingKind::ComplexGaussian),
        Draws::ElementSum,
        200,
        0xbead,
    );
}

#[test]
fn single_user_rates_coincide_in_both_implementations() {
    let scen = scenario(1, 4);
    let pan = panel(256);
    let bud = budget(1);
    let est = mc_rates(&scen, &pan, &bud, Synthesis::Clt, 150, 5, 0).unwrap();
    assert_eq!(est.sum_rate, est.dpc_capacity);
    assert_eq!(est.sum_rate_ci, est.dpc_capacity_ci);

    let want = reference_estimates(&scen, &pan, &bud, Draws::Gaussian, 150, 5);
    assert_close("sum rate", est.sum_rate, want.sum_rate);
    assert_close("dpc capacity", est.dpc_capacity, want.dpc_capacity);
}
