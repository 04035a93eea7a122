//! JSON scenario configuration: one document per experiment.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::simulate::{FeedbackSpec, Scenario, Solver};

/// Row-major system matrices under keys "A", "B", "C".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
}

impl SystemConfig {
    pub fn to_state_space(&self) -> Result<StateSpace> {
        StateSpace::from_rows(&self.a, &self.b, &self.c)
    }

    pub fn from_state_space(sys: &StateSpace) -> Self {
        let n = sys.dim();
        Self {
            a: (0..n).map(|i| (0..n).map(|j| sys.a()[(i, j)]).collect()).collect(),
            b: sys.b().iter().copied().collect(),
            c: sys.c().iter().copied().collect(),
        }
    }
}

fn default_solver() -> Solver {
    Solver::Rk4Fixed
}

fn default_blowup() -> f64 {
    1e9
}

fn default_tail_fraction() -> f64 {
    0.25
}

fn default_amplitude_floor() -> f64 {
    1e-6
}

/// Serializable form of [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub feedback: FeedbackSpec,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    #[serde(default = "default_blowup")]
    pub blowup: f64,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "default_amplitude_floor")]
    pub amplitude_floor: f64,
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let sys = self.system.to_state_space()?;
        let sc = Scenario {
            sys,
            feedback: self.feedback.clone(),
            x0: DVector::from_column_slice(&self.x0),
            t_end: self.t_end,
            dt: self.dt,
            solver: self.solver,
            blowup: self.blowup,
            tail_fraction: self.tail_fraction,
            amplitude_floor: self.amplitude_floor,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_scenario(sc: &Scenario) -> Self {
        Self {
            system: SystemConfig::from_state_space(&sc.sys),
            feedback: sc.feedback.clone(),
            x0: sc.x0.iter().copied().collect(),
            t_end: sc.t_end,
            dt: sc.dt,
            solver: sc.solver,
            blowup: sc.blowup,
            tail_fraction: sc.tail_fraction,
            amplitude_floor: sc.amplitude_floor,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn preset_round_trips_bit_exactly() {
        for id in [
            scenarios::PresetId::DoubleIntegrator,
            scenarios::PresetId::SecondOrder,
            scenarios::PresetId::Oscillator,
        ] {
            let sc = scenarios::build_preset(id);
            let cfg = ScenarioConfig::from_scenario(&sc);
            let text = cfg.to_json_pretty();
            let back = ScenarioConfig::from_json(&text).unwrap();
            assert_eq!(cfg, back);
            let sc2 = back.to_scenario().unwrap();
            assert_eq!(sc, sc2);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let text = r#"{
            "system": {"A": [[0.0, 1.0], [0.0, 0.0]], "B": [1.0], "C": [1.0, 0.0]},
            "feedback": {"kind": "none"},
            "x0": [0.0, 0.0], "t_end": 1.0, "dt": 0.001
        }"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        assert!(cfg.to_scenario().is_err());
    }

    #[test]
    fn rejects_empty_config() {
        assert!(ScenarioConfig::from_json("").is_err());
        assert!(ScenarioConfig::from_json("{}").is_err());
    }
}
