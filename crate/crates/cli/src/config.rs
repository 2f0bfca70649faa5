//! JSON experiment configuration.
//!
//! A flat object whose keys are the [`SchemeConfig`] field names plus a few
//! experiment fields. Keys left out take the values of the named preset.
//!
//! ```json
//! { "preset": "soliton1", "n_cells": 2000, "dt_rule": "cfl", "cfl_delta": 0.5 }
//! ```

use std::path::Path;

use kdvfd_core::{Boundary, DtRule, KdvError, SchemeConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::preset::{ExactSolution, ExperimentPreset, InitialData, PresetName, PRESET_COURANT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    Periodic,
    TruncatedLine,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Periodic => Boundary::Periodic,
            BoundaryName::TruncatedLine => Boundary::TruncatedLine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtRuleName {
    Cfl,
    K2,
    Courant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactName {
    OneSoliton,
    TwoSoliton,
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<PresetName>,
    pub x_left: Option<f64>,
    pub x_right: Option<f64>,
    pub n_cells: Option<usize>,
    pub boundary: Option<BoundaryName>,
    pub t_end: Option<f64>,
    pub cfl_delta: Option<f64>,
    pub cfl_delta_tilde: Option<f64>,
    pub dt_rule: Option<DtRuleName>,
    pub k: Option<f64>,
    pub courant: Option<f64>,
    pub record_every: Option<usize>,
    pub check_inequalities: Option<bool>,
    pub initial_data: Option<InitialData>,
    pub initial_time: Option<f64>,
    pub exact_solution: Option<ExactName>,
}

/// Command-line overrides applied on top of a preset or config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n_cells: Option<usize>,
    pub dt_rule: Option<DtRuleName>,
    pub k: Option<f64>,
    pub courant: Option<f64>,
    pub delta: Option<f64>,
    pub record_every: Option<usize>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentPreset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentPreset, CliError> {
    let file: ConfigFile = serde_json::from_str(text)?;
    build_preset(&file)
}

/// Default cell count when neither the file nor the command line gives one.
pub const DEFAULT_CELLS: usize = 1000;

pub fn build_preset(file: &ConfigFile) -> Result<ExperimentPreset, CliError> {
    let name = file.preset.unwrap_or(PresetName::Custom);
    let n = file.n_cells.unwrap_or(DEFAULT_CELLS);
    let mut p = match name {
        PresetName::Custom => custom_base(file, n)?,
        other => ExperimentPreset::builtin(other, n)?,
    };
    let c = &mut p.config;
    if let Some(v) = file.x_left {
        c.x_left = v;
    }
    if let Some(v) = file.x_right {
        c.x_right = v;
    }
    if let Some(v) = file.boundary {
        c.boundary = v.into();
    }
    if let Some(v) = file.t_end {
        c.t_end = v;
    }
    if let Some(v) = file.cfl_delta_tilde {
        c.cfl_delta_tilde = v;
    }
    if let Some(v) = file.check_inequalities {
        c.check_inequalities = v;
    }
    if let Some(v) = file.initial_data {
        p.initial = v;
    }
    if let Some(v) = file.initial_time {
        p.initial_time = v;
    }
    match file.exact_solution {
        Some(ExactName::OneSoliton) => p.exact = Some(ExactSolution::OneSoliton),
        Some(ExactName::TwoSoliton) => p.exact = Some(ExactSolution::TwoSoliton),
        Some(ExactName::None) => p.exact = None,
        None => {}
    }
    apply_overrides(
        p,
        &Overrides {
            n_cells: None,
            dt_rule: file.dt_rule,
            k: file.k,
            courant: file.courant,
            delta: file.cfl_delta,
            record_every: file.record_every,
        },
    )
}

fn custom_base(file: &ConfigFile, n: usize) -> Result<ExperimentPreset, CliError> {
    let required = |field: &str, v: Option<f64>| {
        v.ok_or_else(|| CliError::config(field, "required for the custom preset"))
    };
    let config = SchemeConfig::new(
        required("x_left", file.x_left)?,
        required("x_right", file.x_right)?,
        n,
        file.boundary.map_or(Boundary::TruncatedLine, Into::into),
        required("t_end", file.t_end)?,
    );
    let initial = file
        .initial_data
        .ok_or_else(|| CliError::config("initial_data", "required for the custom preset"))?;
    Ok(ExperimentPreset {
        name: PresetName::Custom,
        config,
        initial,
        initial_time: 0.0,
        exact: None,
    })
}

/// Applies overrides and validates the result, naming the offending field on failure.
pub fn apply_overrides(mut p: ExperimentPreset, o: &Overrides) -> Result<ExperimentPreset, CliError> {
    let c = &mut p.config;
    if let Some(n) = o.n_cells {
        c.n_cells = n;
    }
    if let Some(d) = o.delta {
        c.cfl_delta = d;
    }
    if let Some(m) = o.record_every {
        c.record_every = m;
    }
    // a bare --k or --courant selects its rule
    let rule = o.dt_rule.or_else(|| {
        if o.k.is_some() {
            Some(DtRuleName::K2)
        } else if o.courant.is_some() {
            Some(DtRuleName::Courant)
        } else {
            None
        }
    });
    match rule {
        Some(DtRuleName::Cfl) => c.dt_rule = DtRule::CflLambda,
        Some(DtRuleName::K2) => {
            let k = o.k.or(match c.dt_rule {
                DtRule::QuadraticK(k) => Some(k),
                _ => None,
            });
            c.dt_rule = DtRule::QuadraticK(
                k.ok_or_else(|| CliError::config("k", "dt_rule k2 needs a value for k"))?,
            );
        }
        Some(DtRuleName::Courant) => {
            let nu = o.courant.or(match c.dt_rule {
                DtRule::Courant(nu) => Some(nu),
                _ => None,
            });
            c.dt_rule = DtRule::Courant(nu.unwrap_or(PRESET_COURANT));
        }
        None => {}
    }
    c.validate().map_err(|e| match e {
        KdvError::InvalidConfig { field, reason } => CliError::config(field, reason),
        KdvError::InvalidCflParameter { name, value } => {
            CliError::config(name, format!("{value} must lie strictly between 0 and 1"))
        }
        other => CliError::Solver(other),
    })?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_defaults_survive_empty_overrides() {
        let p = parse_config_str(r#"{"preset": "soliton1", "n_cells": 500}"#).unwrap();
        assert_eq!(p, ExperimentPreset::soliton1(500));
    }

    #[test]
    fn fields_override_preset() {
        let p = parse_config_str(
            r#"{"preset": "l2data", "n_cells": 64, "t_end": 0.1, "dt_rule": "k2", "k": 0.5, "record_every": 3}"#,
        )
        .unwrap();
        assert_eq!(p.config.n_cells, 64);
        assert_eq!(p.config.t_end, 0.1);
        assert_eq!(p.config.dt_rule, DtRule::QuadraticK(0.5));
        assert_eq!(p.config.record_every, 3);
        assert_eq!(p.config.boundary, Boundary::Periodic);
    }

    #[test]
    fn custom_requires_window_and_data() {
        let err = parse_config_str(r#"{"preset": "custom", "x_left": 0, "t_end": 1}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { ref field, .. } if field == "x_right"), "{err}");
        let ok = parse_config_str(
            r#"{"x_left": -1, "x_right": 1, "n_cells": 16, "t_end": 0, "initial_data": "zero", "boundary": "periodic"}"#,
        )
        .unwrap();
        assert_eq!(ok.name, PresetName::Custom);
        assert_eq!(ok.config.boundary, Boundary::Periodic);
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (text, field) in [
            (r#"{"preset": "soliton1", "cfl_delta": 1.5}"#, "cfl_delta"),
            (r#"{"preset": "soliton1", "n_cells": 3}"#, "n_cells"),
            (r#"{"preset": "soliton1", "courant": 2.0}"#, "courant"),
            (r#"{"preset": "soliton1", "dt_rule": "k2"}"#, "k"),
            (r#"{"preset": "l2data", "t_end": -1}"#, "t_end"),
            (r#"{"preset": "l2data", "record_every": 0}"#, "record_every"),
        ] {
            match parse_config_str(text) {
                Err(CliError::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(matches!(parse_config_str("{"), Err(CliError::Json(_))));
        assert!(matches!(parse_config_str(r#"{"nope": 1}"#), Err(CliError::Json(_))));
        assert!(matches!(parse_config_str(r#"{"preset": "soliton9"}"#), Err(CliError::Json(_))));
    }
}
