//! The run configuration document and its conversions into core types.
//!
//! Units are converted exactly once, here: powers arrive in dBm and leave
//! in watts, the antenna gain arrives in dB and leaves linear, the carrier
//! arrives in GHz and leaves as a wavelength through the layout builder.
//! Unknown keys are rejected with the offending key named.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ris_core::channel::FadingKind;
use ris_core::geometry::{build_layout, LayoutParams, PhaseConfig, RisPanel, Scenario};
use ris_core::harness::AllocationPolicy;
use ris_core::precoding::{uniform_power, LinkBudget};
use ris_core::rates::Synthesis;

use crate::CliError;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub layout: LayoutSection,
    pub panel: PanelSection,
    pub budget: BudgetSection,
    pub system: SystemSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    /// BS-to-RIS horizontal distance, meters.
    #[serde(rename = "D_B")]
    pub bs_ris_distance: f64,
    /// BS to user-square center, meters.
    #[serde(rename = "D")]
    pub bs_area_distance: f64,
    /// Gap between the RIS and the near side of the square, meters.
    #[serde(rename = "D_u")]
    pub ris_area_gap: f64,
    /// Side of the user square, meters.
    #[serde(rename = "L")]
    pub area_side: f64,
    pub heights: Heights,
    #[serde(rename = "K")]
    pub users: usize,
    pub user_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Heights {
    pub bs: f64,
    pub ris: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSection {
    /// Single element count; exactly one of `N` and `N_grid` must be set.
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub elements: Option<f64>,
    #[serde(rename = "N_grid", skip_serializing_if = "Option::is_none")]
    pub element_grid: Option<Vec<f64>>,
    /// Element width, meters.
    pub a: f64,
    /// Element height, meters.
    pub b: f64,
    /// Common reflection amplitude in [0, 1].
    pub gamma: f64,
    pub phases: PhaseMode,
    /// Seed for `phases = "random"`; defaults to 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(rename = "P_dBm")]
    pub power_dbm: f64,
    #[serde(rename = "noise_dBm")]
    pub noise_dbm: f64,
    pub allocation: AllocationMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    Uniform,
    Waterfill,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "f_GHz")]
    pub frequency_ghz: f64,
    #[serde(rename = "A_dB")]
    pub antenna_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: u64,
    pub root_seed: u64,
    #[serde(default)]
    pub sweep: SweepMode,
    #[serde(default)]
    pub synthesis: SynthesisMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Single-point run; requires a single `N`.
    None,
    #[default]
    Elements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisMode {
    #[default]
    Clt,
    Exact,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Valid element count for the sweep substream layout: integral, at least
/// one, exactly representable.
fn valid_count(v: f64) -> bool {
    v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= (1u64 << 53) as f64
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig = toml::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.panel.elements, &self.panel.element_grid) {
            (Some(_), Some(_)) => {
                return Err(config_err("panel sets both N and N_grid; choose one"));
            }
            (None, None) => {
                return Err(config_err("panel needs N or N_grid"));
            }
            (Some(n), None) => {
                if !valid_count(*n) {
                    return Err(config_err(format!("N = {n} is not a positive integer")));
                }
            }
            (None, Some(grid)) => {
                if grid.is_empty() {
                    return Err(config_err("N_grid is empty"));
                }
                if grid.len() > 65536 {
                    return Err(config_err(format!(
                        "N_grid has {} points; the trial substream layout admits 65536",
                        grid.len()
                    )));
                }
                for v in grid {
                    if !valid_count(*v) {
                        return Err(config_err(format!(
                            "N_grid entry {v} is not a positive integer"
                        )));
                    }
                }
            }
        }
        if self.experiment.sweep == SweepMode::None && self.panel.element_grid.is_some() {
            return Err(config_err(
                "sweep = \"none\" runs a single point; set N instead of N_grid",
            ));
        }
        if self.experiment.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.layout.users == 0 {
            return Err(config_err("K must be at least 1"));
        }
        if self.system.antennas < self.layout.users {
            return Err(config_err(format!(
                "M = {} below the user count K = {}",
                self.system.antennas, self.layout.users
            )));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let params = LayoutParams {
            bs_ris_distance: self.layout.bs_ris_distance,
            bs_area_distance: self.layout.bs_area_distance,
            ris_area_gap: self.layout.ris_area_gap,
            area_side: self.layout.area_side,
            bs_height: self.layout.heights.bs,
            ris_height: self.layout.heights.ris,
            num_users: self.layout.users,
            user_seed: self.layout.user_seed,
        };
        build_layout(
            &params,
            self.system.frequency_ghz * 1e9,
            db_to_linear(self.system.antenna_gain_db),
            self.system.antennas,
        )
        .map_err(|e| config_err(e.to_string()))
    }

    /// The element grid as validated counts; a single `N` is a one-point grid.
    pub fn element_counts(&self) -> Vec<f64> {
        match (&self.panel.elements, &self.panel.element_grid) {
            (Some(n), None) => vec![*n],
            (None, Some(grid)) => grid.clone(),
            _ => unreachable!("validated on load"),
        }
    }

    /// The single count the closed-form commands evaluate at: the largest
    /// configured one (nearest the asymptote the bounds reference).
    pub fn reference_count(&self) -> u64 {
        self.element_counts()
            .into_iter()
            .fold(1.0f64, f64::max) as u64
    }

    fn phase_config(&self) -> PhaseConfig {
        match self.panel.phases {
            PhaseMode::Zero => PhaseConfig::AllZero,
            PhaseMode::Random => PhaseConfig::UniformRandom {
                seed: self.panel.phase_seed.unwrap_or(0),
            },
        }
    }

    pub fn panel(&self, n: u64) -> Result<RisPanel, CliError> {
        RisPanel::new(
            n,
            self.panel.a,
            self.panel.b,
            self.panel.gamma,
            self.phase_config(),
        )
        .map_err(|e| config_err(e.to_string()))
    }

    /// Uniform-split budget in watts. The waterfill mode replaces the split
    /// per sweep point inside the harness; closed-form commands always
    /// evaluate the uniform split.
    pub fn link_budget(&self) -> Result<LinkBudget, CliError> {
        LinkBudget::new(
            dbm_to_watts(self.budget.power_dbm),
            dbm_to_watts(self.budget.noise_dbm),
            uniform_power(self.layout.users),
        )
        .map_err(|e| config_err(e.to_string()))
    }

    pub fn allocation_policy(&self) -> AllocationPolicy {
        match self.budget.allocation {
            AllocationMode::Uniform => AllocationPolicy::Fixed,
            AllocationMode::Waterfill => AllocationPolicy::Waterfill,
        }
    }

    pub fn synthesis(&self) -> Synthesis {
        match self.experiment.synthesis {
            SynthesisMode::Clt => Synthesis::Clt,
            SynthesisMode::Exact => Synthesis::Exact(FadingKind::ComplexGaussian),
        }
    }
}
