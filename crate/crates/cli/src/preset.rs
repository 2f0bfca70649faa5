//! Built-in experiments and the initial/reference data they use.

use std::fmt;
use std::str::FromStr;

use kdvfd_core::{
    l2_singular_init, one_soliton, two_soliton, Boundary, DtRule, GridFunction, SchemeConfig,
    TwoSolitonParams,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Courant number used by the soliton presets.
pub const PRESET_COURANT: f64 = 0.9;
/// `delta` used by the soliton presets.
pub const PRESET_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Soliton1,
    Soliton2,
    L2data,
    Custom,
}

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Soliton1 => "soliton1",
            PresetName::Soliton2 => "soliton2",
            PresetName::L2data => "l2data",
            PresetName::Custom => "custom",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soliton1" => Ok(PresetName::Soliton1),
            "soliton2" => Ok(PresetName::Soliton2),
            "l2data" => Ok(PresetName::L2data),
            "custom" => Ok(PresetName::Custom),
            other => Err(CliError::UnknownPreset(other.to_string())),
        }
    }
}

/// Initial data `u0(x)`; soliton data is evaluated at the preset's initial time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    OneSoliton,
    TwoSoliton,
    L2Singular,
    Zero,
}

/// Closed-form solution the final state is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    OneSoliton,
    TwoSoliton,
}

impl ExactSolution {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            ExactSolution::OneSoliton => one_soliton(x, t),
            ExactSolution::TwoSoliton => two_soliton(x, t, &TwoSolitonParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub config: SchemeConfig,
    pub initial: InitialData,
    /// Physical time of the initial state; the run ends at `initial_time + t_end`.
    pub initial_time: f64,
    pub exact: Option<ExactSolution>,
}

impl ExperimentPreset {
    /// `w1(., -1)` on `[-10, 10]`, evolved to `t = 1`.
    pub fn soliton1(n_cells: usize) -> Self {
        let mut config = SchemeConfig::new(-10.0, 10.0, n_cells, Boundary::TruncatedLine, 2.0);
        config.cfl_delta = PRESET_DELTA;
        config.dt_rule = DtRule::Courant(PRESET_COURANT);
        Self {
            name: PresetName::Soliton1,
            config,
            initial: InitialData::OneSoliton,
            initial_time: -1.0,
            exact: Some(ExactSolution::OneSoliton),
        }
    }

    /// `w2(., -10)` with `a = 0.5`, `b = 1` on `[-40, 60]`, evolved to `t = 20`.
    pub fn soliton2(n_cells: usize) -> Self {
        let mut config = SchemeConfig::new(-40.0, 60.0, n_cells, Boundary::TruncatedLine, 30.0);
        config.cfl_delta = PRESET_DELTA;
        config.dt_rule = DtRule::Courant(PRESET_COURANT);
        Self {
            name: PresetName::Soliton2,
            config,
            initial: InitialData::TwoSoliton,
            initial_time: -10.0,
            exact: Some(ExactSolution::TwoSoliton),
        }
    }

    /// Periodic `x^{-1/3}` bump on `[-5, 5]` up to `t = 0.5`, stepped with
    /// `dt = lambda dx^{3/2}`.
    pub fn l2data(n_cells: usize) -> Self {
        let config = SchemeConfig::new(-5.0, 5.0, n_cells, Boundary::Periodic, 0.5);
        Self {
            name: PresetName::L2data,
            config,
            initial: InitialData::L2Singular,
            initial_time: 0.0,
            exact: None,
        }
    }

    pub fn builtin(name: PresetName, n_cells: usize) -> Result<Self, CliError> {
        match name {
            PresetName::Soliton1 => Ok(Self::soliton1(n_cells)),
            PresetName::Soliton2 => Ok(Self::soliton2(n_cells)),
            PresetName::L2data => Ok(Self::l2data(n_cells)),
            PresetName::Custom => Err(CliError::CustomNeedsConfig),
        }
    }

    pub fn with_n_cells(mut self, n_cells: usize) -> Self {
        self.config.n_cells = n_cells;
        self
    }

    /// Time at which the final state is compared with the exact solution.
    pub fn final_time(&self) -> f64 {
        self.initial_time + self.config.t_end
    }

    pub fn initial_state(&self) -> kdvfd_core::Result<GridFunction> {
        let grid = self.config.grid()?;
        let t0 = self.initial_time;
        match self.initial {
            InitialData::OneSoliton => grid.sample(|x| one_soliton(x, t0)),
            InitialData::TwoSoliton => {
                let p = TwoSolitonParams::default();
                grid.sample(|x| two_soliton(x, t0, &p))
            }
            InitialData::L2Singular => grid.sample(l2_singular_init),
            InitialData::Zero => Ok(GridFunction::zeros(grid)),
        }
    }

    /// Exact solution sampled on the grid at the final time.
    pub fn exact_final_state(&self) -> Option<kdvfd_core::Result<GridFunction>> {
        let exact = self.exact?;
        let t = self.final_time();
        Some(self.config.grid().and_then(|g| g.sample(|x| exact.eval(x, t))))
    }
}
