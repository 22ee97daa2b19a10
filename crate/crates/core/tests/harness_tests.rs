use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ris_core::channel::{synthesize_clt_with_gains, RngStream};
use ris_core::geometry::{aggregate_gain, PhaseConfig, Point3, RisPanel, Scenario};
use ris_core::harness::{
    confidence_interval, run_experiment, AllocationPolicy, Estimator, ExperimentConfig,
    SweepResult, SweepVariable,
};
use ris_core::precoding::{snr_closed, uniform_power, LinkBudget};
use ris_core::rates::Synthesis;
use ris_core::RisError;

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

fn all_outputs() -> Vec<Estimator> {
    vec![
        Estimator::SumRate,
        Estimator::DpcCapacity,
        Estimator::UpperBound,
        Estimator::CapacityLimit,
        Estimator::RatioFloor,
    ]
}

fn config(sweep: SweepVariable, grid: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        trials: 40,
        root_seed: 901,
        synthesis: Synthesis::Clt,
        allocation: AllocationPolicy::Fixed,
        sweep,
        grid,
        outputs: all_outputs(),
    }
}

fn assert_identical(a: &SweepResult, b: &SweepResult) {
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.value, rb.value);
        assert_eq!(ra.report.per_user_rate, rb.report.per_user_rate);
        assert_eq!(ra.report.sum_rate, rb.report.sum_rate);
        assert_eq!(ra.report.sum_rate_ci, rb.report.sum_rate_ci);
        assert_eq!(ra.report.dpc_capacity, rb.report.dpc_capacity);
        assert_eq!(ra.report.dpc_capacity_ci, rb.report.dpc_capacity_ci);
        assert_eq!(ra.report.upper_bound, rb.report.upper_bound);
        assert_eq!(ra.report.capacity_limit, rb.report.capacity_limit);
        assert_eq!(ra.report.epsilon, rb.report.epsilon);
        assert_eq!(ra.report.epsilon_hat, rb.report.epsilon_hat);
        assert_eq!(ra.report.discarded, rb.report.discarded);
    }
}

#[test]
fn single_point_bit_identical_across_runs_and_workers() {
    let scen = scenario(2, 4);
    let pan = panel(128);
    let budget = LinkBudget::new(1.0, 1e-9, uniform_power(2)).unwrap();
    let cfg = config(SweepVariable::None, vec![]);

    let first = run_experiment(&cfg, &scen, &pan, &budget).unwrap();
    let second = run_experiment(&cfg, &scen, &pan, &budget).unwrap();
    assert_eq!(first.rows.len(), 1);
    assert!(first.rows[0].value.is_none());
    assert_identical(&first, &second);

    for workers in [1usize, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap();
        let inside = pool.install(|| run_experiment(&cfg, &scen, &pan, &budget).unwrap());
        assert_identical(&first, &inside);
    }

    // The no-sweep run is exactly the rate engine at grid stream zero.
    let direct = ris_core::rates::mc_rates(
        &scen,
        &pan,
        &budget,
        Synthesis::Clt,
        cfg.trials,
        cfg.root_seed,
        0,
    )
    .unwrap();
    assert_eq!(first.rows[0].report.sum_rate, direct.sum_rate);
    assert_eq!(first.rows[0].report.dpc_capacity, direct.dpc_capacity);
}

#[test]
fn element_sweep_ordered_rows_with_monotone_capacity() {
    let scen = scenario(2, 4);
    let pan = panel(16);
    let budget = LinkBudget::new(1.0, 1e-9, uniform_power(2)).unwrap();
    let grid = vec![100.0, 10_000.0, 1_000_000.0];
    let cfg = config(SweepVariable::Elements, grid.clone());

    let result = run_experiment(&cfg, &scen, &pan, &budget).unwrap();
    assert_eq!(result.rows.len(), 3);
    let values: Vec<f64> = result.rows.iter().map(|r| r.value.unwrap()).collect();
    assert_eq!(values, grid);
    for pair in result.rows.windows(2) {
        assert!(pair[1].report.dpc_capacity >= pair[0].report.dpc_capacity);
        assert!(pair[1].report.upper_bound >= pair[0].report.upper_bound);
    }
    assert_eq!(result.metadata.config, cfg);
    let summed: u64 = result.rows.iter().map(|r| r.report.discarded).sum();
    assert_eq!(result.metadata.discarded, summed);
}

#[test]
fn grids_are_validated_before_any_trial() {
    let scen = scenario(2, 4);
    let pan = panel(64);
    let budget = LinkBudget::new(1.0, 1e-9, uniform_power(2)).unwrap();
    let run = |cfg: &ExperimentConfig| run_experiment(cfg, &scen, &pan, &budget);

    let fractional = config(SweepVariable::Elements, vec![100.0, 2.5]);
    assert!(matches!(run(&fractional), Err(RisError::InvalidConfig(_))));

    let zero_n = config(SweepVariable::Elements, vec![0.0]);
    assert!(matches!(run(&zero_n), Err(RisError::InvalidConfig(_))));

    let negative_power = config(SweepVariable::Power, vec![1.0, -2.0]);
    assert!(matches!(run(&negative_power), Err(RisError::InvalidConfig(_))));

    let too_few_antennas = config(SweepVariable::Antennas, vec![4.0, 1.0]);
    assert!(matches!(run(&too_few_antennas), Err(RisError::InvalidConfig(_))));

    let eta_sweep = config(SweepVariable::TargetRatio, vec![0.5]);
    let err = run(&eta_sweep).unwrap_err();
    assert!(err.to_string().contains("planner") || err.to_string().contains("dimensioning"));

    let stray_grid = config(SweepVariable::None, vec![1.0]);
    assert!(matches!(run(&stray_grid), Err(RisError::InvalidConfig(_))));

    let empty_grid = config(SweepVariable::Power, vec![]);
    assert!(matches!(run(&empty_grid), Err(RisError::InvalidConfig(_))));

    let mut no_trials = config(SweepVariable::None, vec![]);
    no_trials.trials = 0;
    assert!(matches!(run(&no_trials), Err(RisError::InvalidConfig(_))));

    let mut no_outputs = config(SweepVariable::None, vec![]);
    no_outputs.outputs.clear();
    assert!(matches!(run(&no_outputs), Err(RisError::InvalidConfig(_))));

    let oversized = config(SweepVariable::Power, (0..70_000).map(|i| 1.0 + i as f64).collect());
    assert!(matches!(run(&oversized), Err(RisError::InvalidConfig(_))));
}

#[test]
fn interval_on_standard_normal_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let samples: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let (mean, hw) = confidence_interval(&samples).unwrap();
    assert!(mean.abs() < 0.05);
    assert!((hw - 0.0196).abs() < 0.001, "halfwidth {hw}");
}

#[test]
fn per_trial_snr_sequences_at_distinct_grid_points_are_uncorrelated() {
    let scen = scenario(2, 4);
    let pan = panel(64);
    let budget = LinkBudget::new(1.0, 1e-9, uniform_power(2)).unwrap();
    let gains = aggregate_gain(&scen, &pan).unwrap();

    let trials = 10_000u64;
    let mut sequences = Vec::new();
    for grid_index in [0u64, 1] {
        let mut seq = Vec::with_capacity(trials as usize);
        for t in 0..trials {
            let stream = RngStream { seed: 901, stream: t | grid_index << 48 };
            let real = synthesize_clt_with_gains(&scen, &pan, stream, gains.clone()).unwrap();
            let snr = snr_closed(&real.g, &budget).unwrap();
            seq.push(snr[0]);
        }
        sequences.push(seq);
    }
    let corr = ris_core::stats::correlation(&sequences[0], &sequences[1]);
    assert!(corr.abs() < 0.05, "correlation {corr}");
}

#[test]
fn waterfill_policy_starves_the_weak_user_at_low_power() {
    let scen = Scenario::new(
        Point3::new(-2.0, 0.0, 3.0),
        vec![Point3::new(0.5, 0.0, 1.0), Point3::new(40.0, 0.0, 1.0)],
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        0.05,
        1.0,
        4,
    )
    .unwrap();
    let pan = panel(256);
    let noise = 1e-9;
    let gains = aggregate_gain(&scen, &pan).unwrap();
    let eff_weak = gains.per_user_aggregate[1] * 3.0;
    // Low enough that water-filling drops the far user entirely.
    let power = 0.1 * noise * 2.0 / eff_weak;
    let budget = LinkBudget::new(power, noise, uniform_power(2)).unwrap();

    let mut cfg = config(SweepVariable::None, vec![]);
    cfg.allocation = AllocationPolicy::Waterfill;
    let filled = run_experiment(&cfg, &scen, &pan, &budget).unwrap();
    let report = &filled.rows[0].report;
    assert!(report.per_user_rate[0] > 0.0);
    assert_eq!(report.per_user_rate[1], 0.0);

    cfg.allocation = AllocationPolicy::Fixed;
    let uniform = run_experiment(&cfg, &scen, &pan, &budget).unwrap();
    assert!(uniform.rows[0].report.per_user_rate[1] > 0.0);
}

#[test]
fn absorbing_panel_reports_zero_rates_without_trials() {
    let scen = scenario(2, 4);
    let pan = RisPanel::new(64, 0.05, 0.05, 0.0, PhaseConfig::AllZero).unwrap();
    let budget = LinkBudget::new(1.0, 1e-9, uniform_power(2)).unwrap();
    let cfg = config(SweepVariable::None, vec![]);
    let result = run_experiment(&cfg, &scen, &pan, &budget).unwrap();
    let report = &result.rows[0].report;
    assert_eq!(report.sum_rate, 0.0);
    assert_eq!(report.dpc_capacity, 0.0);
    assert_eq!(report.upper_bound, 0.0);
    assert_eq!(report.capacity_limit, 0.0);
    assert_eq!(report.epsilon, 0.0);
    assert_eq!(report.epsilon_hat, 0.0);
    assert_eq!(report.discarded, 0);
}
