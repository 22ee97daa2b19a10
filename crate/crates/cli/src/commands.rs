//! The five commands. Each renders its CSV (or the check report) from a
//! parsed configuration and never writes back to the config file.

use std::path::Path;

use ris_core::geometry::aggregate_gain;
use ris_core::harness::{run_experiment, Estimator, ExperimentConfig, SweepVariable};
use ris_core::planner::{
    min_elements_closed_form, min_elements_search, Infeasibility, PlanMethod, PlanRequest,
    DEFAULT_SEARCH_CAP,
};
use ris_core::rates::{capacity_limit, capacity_upper_bound, epsilon_hat_from_gains};
use ris_core::selfcheck::{self, CheckReport};

use crate::config::{db_to_linear, dbm_to_watts, RunConfig};
use crate::output::{self, boolean, float, header, integer, Csv};
use crate::CliError;

fn runtime(e: ris_core::RisError) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn simulate(
    cfg: &RunConfig,
    trials: Option<u64>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let trials = trials.unwrap_or(cfg.experiment.trials);
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let scen = cfg.scenario()?;
    let base = cfg.panel(cfg.reference_count())?;
    let budget = cfg.link_budget()?;
    let exp = ExperimentConfig {
        trials,
        root_seed: seed.unwrap_or(cfg.experiment.root_seed),
        synthesis: cfg.synthesis(),
        allocation: cfg.allocation_policy(),
        sweep: SweepVariable::Elements,
        grid: cfg.element_counts(),
        outputs: vec![
            Estimator::SumRate,
            Estimator::DpcCapacity,
            Estimator::UpperBound,
            Estimator::CapacityLimit,
        ],
    };
    let result = run_experiment(&exp, &scen, &base, &budget).map_err(runtime)?;

    let mut csv = Csv::new(&header(&[
        "N",
        "C_mc",
        "C_ci",
        "upper_bound",
        "C_limit",
        "R_mc",
        "R_ci",
        "epsilon",
    ]));
    for row in &result.rows {
        let r = &row.report;
        let n = row.value.expect("element sweep rows carry N") as u64;
        csv.row(&[
            integer(n),
            float(r.dpc_capacity),
            float(r.dpc_capacity_ci),
            float(r.upper_bound),
            float(r.capacity_limit),
            float(r.sum_rate),
            float(r.sum_rate_ci),
            float(r.epsilon),
        ]);
    }
    output::deliver(&csv.into_text(), out)
}

/// Per-user gain and bound table at the largest configured element count.
/// Closed-form only; runs in milliseconds at any panel size.
pub fn bounds(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let scen = cfg.scenario()?;
    let panel = cfg.panel(cfg.reference_count())?;
    let budget = cfg.link_budget()?;
    let gains = aggregate_gain(&scen, &panel).map_err(runtime)?;

    let gamma = panel.reflection_amplitude;
    let m = scen.num_antennas as f64;
    let scale = budget.transmit_power / (scen.num_users as f64 * budget.noise_power);
    let ub_total = capacity_upper_bound(&gains, &budget, scen.num_antennas, gamma);
    let cl_total = capacity_limit(&scen, &budget, gamma).map_err(runtime)?;

    let mut csv = Csv::new(&header(&[
        "k",
        "beta_bar_N",
        "beta_tilde",
        "bound_term",
        "limit_term",
        "upper_bound",
        "capacity_limit",
    ]));
    for kk in 0..scen.num_users {
        let lk = budget.allocation[kk];
        let agg = gains.per_user_aggregate[kk];
        let lim = gains.asymptotic_limit[kk];
        let bound_term = (1.0 + scale * lk * agg * gamma * gamma * m).log2();
        let limit_term = (1.0 + scale * lk * gamma * gamma * m * lim).log2();
        csv.row(&[
            integer(kk as u64),
            float(gains.per_user_average[kk]),
            float(lim),
            float(bound_term),
            float(limit_term),
            float(ub_total),
            float(cl_total),
        ]);
    }
    output::deliver(&csv.into_text(), out)
}

pub fn plan(
    cfg: &RunConfig,
    eta: f64,
    method: PlanMethod,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let scen = cfg.scenario()?;
    let mu = scen.num_antennas as f64 / scen.num_users as f64;
    let budget = cfg.link_budget()?;
    let request = PlanRequest {
        target_ratio: eta,
        scenario: scen,
        budget,
        gamma: cfg.panel.gamma,
        element_width: cfg.panel.a,
        element_height: cfg.panel.b,
        search_cap: DEFAULT_SEARCH_CAP,
    };
    request
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let result = match method {
        PlanMethod::Search => min_elements_search(&request).map_err(runtime)?,
        PlanMethod::ClosedForm => {
            // The closed form is circular in N; pin its per-element gains at
            // the configured panel. The search stays authoritative.
            let pin = cfg.panel(cfg.reference_count())?;
            let gains = aggregate_gain(&request.scenario, &pin).map_err(runtime)?;
            min_elements_closed_form(&request, &gains.per_user_average).map_err(runtime)?
        }
    };

    match result.infeasibility {
        Some(Infeasibility::AboveRatioLimit { limit }) => {
            eprintln!(
                "note: target ratio {eta} is at or above the attainable limit {limit:.6}; no panel reaches it"
            );
        }
        Some(Infeasibility::SearchCapExceeded { cap }) => {
            eprintln!("note: no crossing found below the search cap of {cap} elements");
        }
        None => {}
    }

    let mut csv = Csv::new(&header(&[
        "eta",
        "mu",
        "N_required",
        "side_length_m",
        "epsilon_at_N",
        "method",
        "high_snr_valid",
        "feasible",
    ]));
    let (n_cell, side_cell) = match result.n_required {
        Some(n) => (integer(n), float(result.side_length)),
        None => (String::new(), String::new()),
    };
    let method_name = match method {
        PlanMethod::Search => "search",
        PlanMethod::ClosedForm => "closed-form",
    };
    csv.row(&[
        float(eta),
        float(mu),
        n_cell,
        side_cell,
        result.epsilon_at_n.map(float).unwrap_or_default(),
        method_name.to_string(),
        boolean(result.high_snr_valid),
        boolean(result.feasible()),
    ]);
    output::deliver(&csv.into_text(), out)
}

fn mu_label(mu: f64) -> String {
    if mu.fract() == 0.0 {
        format!("{mu:.0}")
    } else {
        format!("{mu}")
    }
}

pub fn sweep_ratio(cfg: &RunConfig, mu_list: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    if mu_list.is_empty() {
        return Err(CliError::Config("mu list is empty".into()));
    }
    let scen = cfg.scenario()?;
    let k = scen.num_users;
    let budget = cfg.link_budget()?;
    let gamma = cfg.panel.gamma;

    let mut antenna_counts = Vec::with_capacity(mu_list.len());
    for mu in mu_list {
        if !mu.is_finite() || *mu < 1.0 {
            return Err(CliError::Config(format!("mu = {mu} must be at least 1")));
        }
        let m = mu * k as f64;
        if (m - m.round()).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "mu = {mu} with {k} users gives M = {m}; antenna counts are integers"
            )));
        }
        antenna_counts.push(m.round() as usize);
    }

    let mut names = vec!["N".to_string()];
    names.extend(mu_list.iter().map(|mu| format!("epsilon_mu_{}", mu_label(*mu))));
    let mut csv = Csv::new(&names);
    for n in cfg.element_counts() {
        let panel = cfg.panel(n as u64)?;
        let gains = aggregate_gain(&scen, &panel).map_err(runtime)?;
        let mut cells = vec![integer(n as u64)];
        for m in &antenna_counts {
            let eps = epsilon_hat_from_gains(
                &gains.per_user_aggregate,
                &gains.asymptotic_limit,
                &budget,
                *m,
                k,
                gamma,
            )
            .map_err(runtime)?;
            cells.push(float(eps));
        }
        csv.row(&cells);
    }
    output::deliver(&csv.into_text(), out)
}

fn conversion_check(
    name: &'static str,
    measured: f64,
    expected: f64,
    tolerance: f64,
) -> CheckReport {
    CheckReport {
        name,
        measured,
        expected,
        tolerance,
        pass: (measured - expected).abs() <= tolerance,
        note: String::new(),
    }
}

pub fn validate() -> Result<(), CliError> {
    let mut reports = selfcheck::run_all().map_err(runtime)?;
    reports.push(conversion_check(
        "dbm-to-watts-46",
        dbm_to_watts(46.0),
        39.8107,
        39.8107 * 1e-5,
    ));
    reports.push(conversion_check(
        "dbm-to-watts-neg96",
        dbm_to_watts(-96.0),
        2.51189e-13,
        2.51189e-13 * 1e-5,
    ));
    reports.push(conversion_check("db-gain-zero", db_to_linear(0.0), 1.0, 0.0));

    let mut failed = 0usize;
    let mut judged = 0usize;
    for r in &reports {
        if r.tolerance.is_nan() {
            println!("{:<28} measured {:>13.6e}  {}", r.name, r.measured, r.note);
            continue;
        }
        judged += 1;
        let status = if r.pass { "pass" } else { "FAIL" };
        let mut line = format!(
            "{:<28} measured {:>13.6e}  expected {:>13.6e}  tol {:>9.3e}  {status}",
            r.name, r.measured, r.expected, r.tolerance
        );
        if !r.note.is_empty() {
            line.push_str("  ");
            line.push_str(&r.note);
        }
        println!("{line}");
        if !r.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("all {judged} judged checks passed");
        Ok(())
    } else {
        println!("{failed} of {judged} judged checks failed");
        Err(CliError::ChecksFailed)
    }
}
