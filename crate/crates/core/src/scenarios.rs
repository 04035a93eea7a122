//! Built-in example systems as ready-to-run scenario builders.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::simulate::{FeedbackSpec, Scenario};

/// Default reversal slope of the stop element for the oscillator preset,
/// chosen so the element saturates within the oscillation amplitude of the
/// validated sign-hysteresis run (output swing a few units wide).
pub const DEFAULT_STOP_SLOPE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetId {
    DoubleIntegrator,
    SecondOrder,
    Oscillator,
}

impl std::str::FromStr for PresetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double_integrator" => Ok(Self::DoubleIntegrator),
            "second_order" => Ok(Self::SecondOrder),
            "oscillator" => Ok(Self::Oscillator),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

/// Sign of the auxiliary damping entry of the oscillator system matrix.
///
/// The source matrix carries +0.01 in position (4,4) while the surrounding
/// text describes a viscous damping term; `Dissipative` flips the entry to
/// −0.01. Default is the matrix as printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingSign {
    #[default]
    AsPrinted,
    Dissipative,
}

/// Sign of the hysteresis input channel B of the oscillator system.
///
/// With the feedback convention u = −ξ, the source coupling vector
/// (0,0,−1,1)ᵀ makes a rate relay ξ = h·sign(ẏ) feed energy into the
/// relative coordinate (ÿ picks up +2ξ), and trajectories diverge for any
/// K > g. `Stabilizing` flips the vector to (0,0,1,−1)ᵀ so the hysteretic
/// spring force opposes the relative motion, which reproduces the bounded
/// limit cycles of the source example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSign {
    #[default]
    AsPrinted,
    Stabilizing,
}

/// Feedback selection for the oscillator preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OscillatorFeedback {
    /// ξ = 0 (the memoryless-stiffness baseline).
    None,
    /// Sign-hysteresis of half-height h.
    Sign { h: f64 },
    /// Single stop element with slope c and saturation h.
    Stop { c: f64, h: f64 },
}

pub fn double_integrator_system() -> StateSpace {
    StateSpace::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[0.0, 1.0], &[1.0, 0.0])
        .expect("valid fixed matrices")
}

pub fn second_order_system() -> StateSpace {
    StateSpace::from_rows(&[vec![0.0, 1.0], vec![-1.0, -1.0]], &[0.0, 1.0], &[0.0, 1.0])
        .expect("valid fixed matrices")
}

/// The 4x4 double-mass oscillator closed under output feedback of gain K,
/// with internal spring stiffness g and the auxiliary damping entry.
pub fn oscillator_system(
    k: f64,
    g: f64,
    damping: f64,
    sign: DampingSign,
    coupling: CouplingSign,
) -> StateSpace {
    let d = match sign {
        DampingSign::AsPrinted => damping,
        DampingSign::Dissipative => -damping,
    };
    let s = match coupling {
        CouplingSign::AsPrinted => 1.0,
        CouplingSign::Stabilizing => -1.0,
    };
    StateSpace::from_rows(
        &[
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![-g, g - k, 0.0, 0.0],
            vec![g, -g, 0.0, d],
        ],
        &[0.0, 0.0, -s, s],
        &[1.0, -1.0, 0.0, 0.0],
    )
    .expect("valid fixed matrices")
}

/// Double integrator under unity sign-hysteresis feedback.
pub fn build_double_integrator(gamma: f64, h: f64) -> Scenario {
    let mut sc = Scenario::new(
        double_integrator_system(),
        FeedbackSpec::Sign { gamma, h, xi0: 0.0 },
        DVector::from_column_slice(&[2.0, 0.0]),
        50.0,
        1e-3,
    )
    .expect("valid preset");
    sc.set_x0_consistent(sc.x0.clone());
    sc
}

/// Second-order system under unity sign-hysteresis feedback.
pub fn build_second_order(gamma: f64, h: f64) -> Scenario {
    let mut sc = Scenario::new(
        second_order_system(),
        FeedbackSpec::Sign { gamma, h, xi0: 0.0 },
        DVector::from_column_slice(&[2.0, 0.0]),
        50.0,
        1e-3,
    )
    .expect("valid preset");
    sc.set_x0_consistent(sc.x0.clone());
    sc
}

/// Double-mass oscillator preset: g = 100, damping 0.01, x(0) = (1,0,0,0).
pub fn build_oscillator(
    k: f64,
    feedback: OscillatorFeedback,
    damping_sign: DampingSign,
    coupling: CouplingSign,
) -> Scenario {
    let fb = match feedback {
        OscillatorFeedback::None => FeedbackSpec::None,
        OscillatorFeedback::Sign { h } => FeedbackSpec::Sign { gamma: 0.0, h, xi0: 0.0 },
        OscillatorFeedback::Stop { c, h } => FeedbackSpec::Stop { c, h, xi0: 0.0 },
    };
    Scenario::new(
        oscillator_system(k, 100.0, 0.01, damping_sign, coupling),
        fb,
        DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]),
        50.0,
        1e-4,
    )
    .expect("valid preset")
}

/// Builds a preset with its default parameters. The oscillator preset uses
/// the corrected (dissipative, stabilizing) signs so that the documented
/// bounded limit cycle is what a default run produces; the as-printed
/// variants stay available through [`build_oscillator`].
pub fn build_preset(id: PresetId) -> Scenario {
    match id {
        PresetId::DoubleIntegrator => build_double_integrator(1.0, 1.0),
        PresetId::SecondOrder => build_second_order(1.0, 1.0),
        PresetId::Oscillator => build_oscillator(
            101.0,
            OscillatorFeedback::Sign { h: 50.0 },
            DampingSign::Dissipative,
            CouplingSign::Stabilizing,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{DcGain, PoleClass};

    #[test]
    fn double_integrator_matrices_and_gain() {
        let sc = build_double_integrator(1.0, 1.0);
        assert_eq!(sc.sys.dc_gain(), DcGain::Infinite);
        let rep = sc.sys.poles().unwrap();
        assert!(rep.poles.iter().all(|p| p.norm() < 1e-9));
    }

    #[test]
    fn second_order_dc_gain_zero() {
        let sc = build_second_order(1.0, 1.0);
        assert_eq!(sc.sys.dc_gain(), DcGain::Finite(0.0));
    }

    #[test]
    fn oscillator_matrix_entries_as_printed() {
        let sys = oscillator_system(101.0, 100.0, 0.01, DampingSign::AsPrinted, CouplingSign::AsPrinted);
        let a = sys.a();
        assert_eq!(a[(2, 0)], -100.0);
        assert_eq!(a[(2, 1)], -1.0); // g - K = 100 - 101
        assert_eq!(a[(3, 0)], 100.0);
        assert_eq!(a[(3, 1)], -100.0);
        assert_eq!(a[(3, 3)], 0.01);
        assert_eq!(sys.b().as_slice(), &[0.0, 0.0, -1.0, 1.0]);
        assert_eq!(sys.c().as_slice(), &[1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn oscillator_stability_crossing() {
        let stable = oscillator_system(99.0, 100.0, 0.01, DampingSign::Dissipative, CouplingSign::AsPrinted);
        assert_eq!(stable.poles().unwrap().classification, PoleClass::Hurwitz);
        let unstable = oscillator_system(101.0, 100.0, 0.01, DampingSign::Dissipative, CouplingSign::AsPrinted);
        let rep = unstable.poles().unwrap();
        assert_eq!(rep.unstable, 2);
        let marginal = oscillator_system(100.0, 100.0, 0.01, DampingSign::Dissipative, CouplingSign::AsPrinted);
        assert!(marginal.poles().unwrap().max_real_part().abs() < 1e-2);
    }
}
