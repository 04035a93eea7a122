//! Equilibrium sets and the two-loop circle-criterion analysis.
//!
//! The steady-state locus y + G(0)ξ = 0 cut with the operator's output band
//! yields the equilibrium set of the closed loop. Absolute stability is
//! tested on the transformed structure with two parallel loops: the static
//! part against its sector disk on G(jω), and the sign part against the
//! degenerate point disk at the origin on the rate-weighted locus jωG(jω).

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{DcGain, LocusKind, OmegaGrid, PoleClass, StateSpace};
use crate::simulate::FeedbackSpec;

/// Orientation of the steady-state line in the (y, ξ) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "orientation", rename_all = "snake_case")]
pub enum GammaLine {
    /// ξ = 0 (infinite DC gain).
    Horizontal,
    /// y = 0 (zero DC gain).
    Vertical,
    /// ξ = slope · y with slope = −1/G(0).
    Sloped { slope: f64 },
}

/// Equilibrium set of the closed loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub gamma_line: GammaLine,
    /// Admissible steady hysteresis outputs [ξ_lo, ξ_hi].
    pub xi0_range: (f64, f64),
    /// Boundary steady states x0 = A⁻¹Bξ0 (empty when A is singular).
    pub x0_points: Vec<DVector<f64>>,
    /// Invariant interval {x1 ∈ [lo, hi], x2 = 0} for two-state systems.
    pub invariant_interval: Option<(f64, f64)>,
}

/// Computes the steady-state line, the admissible ξ0 range, boundary x0
/// points, and (for n = 2) the invariant interval.
pub fn equilibrium(sys: &StateSpace, feedback: &FeedbackSpec) -> Result<EquilibriumReport> {
    match sys.dc_gain() {
        DcGain::Infinite => {
            // Γ rests on the y-axis: ξ0 = 0, y0 restricted to where the
            // band contains zero.
            let y_range = match *feedback {
                FeedbackSpec::Sign { gamma, h, .. } if gamma > 0.0 => Some((-h / gamma, h / gamma)),
                FeedbackSpec::Static { gamma, .. } if gamma > 0.0 => Some((0.0, 0.0)),
                _ => None,
            };
            // y maps onto x1 when the output picks the first state
            let c = sys.c();
            let y_is_x1 = sys.dim() == 2 && (c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12;
            Ok(EquilibriumReport {
                gamma_line: GammaLine::Horizontal,
                xi0_range: (0.0, 0.0),
                x0_points: Vec::new(),
                invariant_interval: if y_is_x1 { y_range } else { None },
            })
        }
        DcGain::Finite(g0) => {
            let gamma_line = if g0 == 0.0 {
                GammaLine::Vertical
            } else {
                GammaLine::Sloped { slope: -1.0 / g0 }
            };
            // on the line y0 = -g0 ξ0; intersect with the band
            let xi_range = match *feedback {
                FeedbackSpec::None => (0.0, 0.0),
                FeedbackSpec::Static { gamma, .. } => {
                    // ξ0 (1 + γ g0) = 0
                    let _ = gamma;
                    (0.0, 0.0)
                }
                FeedbackSpec::Stop { h, .. } => (-h, h),
                FeedbackSpec::Sign { gamma, h, .. } => {
                    let denom = 1.0 + gamma * g0;
                    if denom.abs() < 1e-12 {
                        (f64::NEG_INFINITY, f64::INFINITY)
                    } else {
                        let m = (h / denom).abs();
                        (-m, m)
                    }
                }
            };
            let mut x0_points = Vec::new();
            if xi_range.0.is_finite() {
                let lu = sys.a().clone().lu();
                for xi0 in [xi_range.0, xi_range.1] {
                    if let Some(x0) = lu.solve(&(sys.b() * xi0)) {
                        if !x0_points.contains(&x0) {
                            x0_points.push(x0);
                        }
                    }
                }
            }
            let invariant_interval = if sys.dim() == 2 && x0_points.len() == 2 {
                let (a, b) = (&x0_points[0], &x0_points[1]);
                if a[1].abs() < 1e-9 && b[1].abs() < 1e-9 {
                    Some((a[0].min(b[0]), a[0].max(b[0])))
                } else {
                    None
                }
            } else if sys.dim() == 2 && x0_points.len() == 1 {
                let p = &x0_points[0];
                if p[1].abs() < 1e-9 { Some((p[0], p[0])) } else { None }
            } else {
                None
            };
            Ok(EquilibriumReport {
                gamma_line,
                xi0_range: xi_range,
                x0_points,
                invariant_interval,
            })
        }
    }
}

/// Geometric image of the [α, β] sector in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticalDisk {
    Disk { center_re: f64, radius: f64 },
    /// Region Re[s] ≤ boundary_re.
    HalfPlane { boundary_re: f64 },
    Point { at_re: f64 },
}

/// Builds the critical region for the sector [alpha, beta]; either bound
/// may be infinite.
pub fn critical_disk(alpha: f64, beta: f64) -> Result<CriticalDisk> {
    if alpha < 0.0 || alpha > beta || alpha.is_nan() || beta.is_nan() {
        return Err(Error::InvalidSector { alpha, beta });
    }
    if alpha.is_infinite() {
        return Ok(CriticalDisk::Point { at_re: 0.0 });
    }
    if alpha == beta {
        return Ok(CriticalDisk::Point { at_re: -1.0 / alpha });
    }
    if alpha == 0.0 {
        let boundary = if beta == 0.0 { f64::NEG_INFINITY } else { -1.0 / beta };
        return Ok(CriticalDisk::HalfPlane { boundary_re: boundary });
    }
    let near = -1.0 / alpha;
    let far = if beta.is_infinite() { 0.0 } else { -1.0 / beta };
    Ok(CriticalDisk::Disk {
        center_re: 0.5 * (near + far),
        radius: 0.5 * (near - far).abs(),
    })
}

impl CriticalDisk {
    /// Signed distance from a locus point to the region boundary; negative
    /// means inside the critical region.
    pub fn distance(&self, z: Complex64) -> f64 {
        match *self {
            CriticalDisk::Disk { center_re, radius } => {
                (z - Complex64::new(center_re, 0.0)).norm() - radius
            }
            CriticalDisk::HalfPlane { boundary_re } => z.re - boundary_re,
            CriticalDisk::Point { at_re } => (z - Complex64::new(at_re, 0.0)).norm(),
        }
    }

    /// Reference point for the encirclement count.
    pub fn reference(&self) -> Complex64 {
        match *self {
            CriticalDisk::Disk { center_re, .. } => Complex64::new(center_re, 0.0),
            CriticalDisk::HalfPlane { boundary_re } => {
                let b = if boundary_re.is_finite() { boundary_re } else { -1e12 };
                Complex64::new(b, 0.0)
            }
            CriticalDisk::Point { at_re } => Complex64::new(at_re, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopId {
    PhiG,
    PhiH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionStatus {
    Satisfied,
    Touching,
    Violated,
    InconclusiveUnstableLinear,
}

/// Outcome of one circle-criterion locus test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub loop_id: LoopId,
    pub status: CriterionStatus,
    pub min_distance: f64,
    pub encirclements: i32,
    pub witness_omega: f64,
}

/// Relative tolerance below which a locus is classified as touching the
/// critical region.
pub const TOUCH_TOL: f64 = 1e-6;

/// Evaluates the circle criterion for `sys` against the [alpha, beta]
/// sector on the chosen locus.
pub fn circle_check(
    sys: &StateSpace,
    alpha: f64,
    beta: f64,
    grid: &OmegaGrid,
    kind: LocusKind,
    loop_id: LoopId,
) -> Result<CriterionVerdict> {
    let disk = critical_disk(alpha, beta)?;
    let omegas = grid.log_spaced();
    let locus = sys.frequency_response(&omegas, kind)?;
    let poles = sys.poles()?;

    let mut min_distance = f64::INFINITY;
    let mut witness = omegas[0];
    let mut points = Vec::with_capacity(locus.samples.len());
    for s in &locus.samples {
        if s.near_pole {
            continue;
        }
        points.push(s.value);
        let d = disk.distance(s.value);
        if d < min_distance {
            min_distance = d;
            witness = s.omega;
        }
    }
    let encirclements = winding_number(&points, disk.reference());
    let scale = locus.scale();
    let tol = TOUCH_TOL * (1.0 + scale);

    let status = if poles.unstable > 0 {
        CriterionStatus::InconclusiveUnstableLinear
    } else if min_distance < -tol {
        CriterionStatus::Violated
    } else if min_distance <= tol {
        CriterionStatus::Touching
    } else if encirclements != 0 {
        // v = 0 requires zero net encirclements of the critical region
        CriterionStatus::Violated
    } else {
        CriterionStatus::Satisfied
    };
    Ok(CriterionVerdict {
        loop_id,
        status,
        min_distance,
        encirclements,
        witness_omega: witness,
    })
}

/// Net counter-clockwise turns of the Nyquist contour around `p`. The
/// sampled half-locus is mirrored by conjugate symmetry and closed as a
/// polygon; for strictly proper G the closure at infinity is negligible.
fn winding_number(half_locus: &[Complex64], p: Complex64) -> i32 {
    if half_locus.len() < 2 {
        return 0;
    }
    let mut contour: Vec<Complex64> = half_locus.iter().rev().map(|z| z.conj()).collect();
    contour.extend_from_slice(half_locus);
    let mut total = 0.0;
    for k in 0..contour.len() {
        let a = contour[k] - p;
        let b = contour[(k + 1) % contour.len()] - p;
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return 0;
        }
        total += (b / a).arg();
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallStatus {
    AbsolutelyStable,
    BoundedOutput,
    NotEstablished,
}

/// Verdicts of both transformed loops plus the combined conclusion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoLoopReport {
    pub phi_g: CriterionVerdict,
    /// `None` when h = 0 (no sign loop): trivially satisfied.
    pub phi_h: Option<CriterionVerdict>,
    pub overall: OverallStatus,
    /// True when the rate-weighted locus meets the origin only in the
    /// stationary limit ω → 0.
    pub stationary_case_touch: bool,
}

/// Runs the circle criterion on both parallel loops of the transformed
/// structure: the static part with sector [0, gamma] on G(jω), and, for
/// h > 0, the sign part with the point disk at the origin on jωG(jω).
pub fn transformed_loop_check(
    sys: &StateSpace,
    gamma: f64,
    h: f64,
    grid: &OmegaGrid,
) -> Result<TwoLoopReport> {
    if h < 0.0 {
        return Err(Error::InvalidSector { alpha: 0.0, beta: h });
    }
    let phi_g = circle_check(sys, 0.0, gamma, grid, LocusKind::Plain, LoopId::PhiG)?;
    let phi_h = if h > 0.0 {
        Some(circle_check(
            sys,
            f64::INFINITY,
            f64::INFINITY,
            grid,
            LocusKind::RateWeighted,
            LoopId::PhiH,
        )?)
    } else {
        None
    };

    let stationary_case_touch = phi_h
        .as_ref()
        .map(|v| v.status == CriterionStatus::Touching && v.witness_omega <= grid.min * (1.0 + 1e-12))
        .unwrap_or(false);

    let hurwitz = sys.poles()?.classification == PoleClass::Hurwitz;
    let statuses: Vec<CriterionStatus> = std::iter::once(phi_g.status)
        .chain(phi_h.as_ref().map(|v| v.status))
        .collect();
    let overall = if !hurwitz {
        OverallStatus::NotEstablished
    } else if statuses.iter().all(|s| *s == CriterionStatus::Satisfied) {
        OverallStatus::AbsolutelyStable
    } else if statuses
        .iter()
        .all(|s| matches!(s, CriterionStatus::Satisfied | CriterionStatus::Touching))
    {
        OverallStatus::BoundedOutput
    } else {
        OverallStatus::NotEstablished
    };
    Ok(TwoLoopReport {
        phi_g,
        phi_h,
        overall,
        stationary_case_touch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_second_order_sign() {
        let sys = scenarios::second_order_system();
        let fb = FeedbackSpec::Sign { gamma: 1.0, h: 1.0, xi0: 0.0 };
        let rep = equilibrium(&sys, &fb).unwrap();
        assert_eq!(rep.gamma_line, GammaLine::Vertical);
        assert_relative_eq!(rep.xi0_range.0, -1.0);
        assert_relative_eq!(rep.xi0_range.1, 1.0);
        let mut x1s: Vec<f64> = rep.x0_points.iter().map(|p| p[0]).collect();
        x1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(x1s[0], -1.0, epsilon = 1e-10);
        assert_relative_eq!(x1s[1], 1.0, epsilon = 1e-10);
        assert_eq!(rep.invariant_interval, Some((-1.0, 1.0)));
        // residual of A x0 = B xi0
        for (p, xi0) in rep.x0_points.iter().zip([rep.xi0_range.0, rep.xi0_range.1]) {
            let r = (sys.a() * p - sys.b() * xi0).amax();
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn equilibrium_double_integrator_sign() {
        let sys = scenarios::double_integrator_system();
        let fb = FeedbackSpec::Sign { gamma: 1.0, h: 1.0, xi0: 0.0 };
        let rep = equilibrium(&sys, &fb).unwrap();
        assert_eq!(rep.gamma_line, GammaLine::Horizontal);
        assert!(rep.x0_points.is_empty());
        assert_eq!(rep.invariant_interval, Some((-1.0, 1.0)));
    }

    #[test]
    fn equilibrium_first_order_static_unique() {
        let sys = crate::lti::StateSpace::from_rows(&[vec![-1.0]], &[1.0], &[1.0]).unwrap();
        let fb = FeedbackSpec::Static { gamma: 1.0, xi0: 0.0 };
        let rep = equilibrium(&sys, &fb).unwrap();
        assert_eq!(rep.xi0_range, (0.0, 0.0));
        assert_eq!(rep.x0_points.len(), 1);
        assert_relative_eq!(rep.x0_points[0][0], 0.0);
    }

    #[test]
    fn critical_disk_cases() {
        match critical_disk(0.0, 2.0).unwrap() {
            CriticalDisk::HalfPlane { boundary_re } => assert_relative_eq!(boundary_re, -0.5),
            other => panic!("{other:?}"),
        }
        match critical_disk(1.0, 1.0).unwrap() {
            CriticalDisk::Point { at_re } => assert_relative_eq!(at_re, -1.0),
            other => panic!("{other:?}"),
        }
        match critical_disk(f64::INFINITY, f64::INFINITY).unwrap() {
            CriticalDisk::Point { at_re } => assert_relative_eq!(at_re, 0.0),
            other => panic!("{other:?}"),
        }
        match critical_disk(0.5, 2.0).unwrap() {
            CriticalDisk::Disk { center_re, radius } => {
                // passes through -2 and -0.5
                assert_relative_eq!(center_re - radius, -2.0, epsilon = 1e-12);
                assert_relative_eq!(center_re + radius, -0.5, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(critical_disk(2.0, 1.0).is_err());
        assert!(critical_disk(-0.5, 1.0).is_err());
    }

    #[test]
    fn circle_check_first_order_satisfied() {
        // G = 1/(s+1): Re G(jw) > 0, so any [0, beta] sector passes
        let sys = crate::lti::StateSpace::from_rows(&[vec![-1.0]], &[1.0], &[1.0]).unwrap();
        let grid = OmegaGrid::default();
        for beta in [0.5, 1.0, 10.0] {
            let v = circle_check(&sys, 0.0, beta, &grid, LocusKind::Plain, LoopId::PhiG).unwrap();
            assert_eq!(v.status, CriterionStatus::Satisfied, "beta = {beta}");
            assert!(v.min_distance > 0.0);
            assert_eq!(v.encirclements, 0);
        }
    }

    #[test]
    fn circle_check_second_order_rate_weighted_touching_at_zero() {
        let sys = scenarios::second_order_system();
        let grid = OmegaGrid::default();
        let v = circle_check(
            &sys,
            f64::INFINITY,
            f64::INFINITY,
            &grid,
            LocusKind::RateWeighted,
            LoopId::PhiH,
        )
        .unwrap();
        assert_eq!(v.status, CriterionStatus::Touching);
        assert!(v.witness_omega <= grid.min * 1.0001);
    }

    #[test]
    fn circle_check_unstable_oscillator_inconclusive() {
        let sys = scenarios::oscillator_system(101.0, 100.0, 0.01, scenarios::DampingSign::Dissipative, scenarios::CouplingSign::Stabilizing);
        let grid = OmegaGrid::default();
        let v = circle_check(
            &sys,
            f64::INFINITY,
            f64::INFINITY,
            &grid,
            LocusKind::RateWeighted,
            LoopId::PhiH,
        )
        .unwrap();
        assert_eq!(v.status, CriterionStatus::InconclusiveUnstableLinear);
    }

    #[test]
    fn transformed_loop_second_order_bounded_output() {
        let sys = scenarios::second_order_system();
        let rep = transformed_loop_check(&sys, 1.0, 1.0, &OmegaGrid::default()).unwrap();
        assert_eq!(rep.phi_g.status, CriterionStatus::Satisfied);
        assert_eq!(rep.phi_h.as_ref().unwrap().status, CriterionStatus::Touching);
        assert_eq!(rep.overall, OverallStatus::BoundedOutput);
        assert!(rep.stationary_case_touch);
    }

    #[test]
    fn transformed_loop_double_integrator_violated() {
        let sys = scenarios::double_integrator_system();
        let rep = transformed_loop_check(&sys, 1.0, 1.0, &OmegaGrid::default()).unwrap();
        assert_eq!(rep.phi_g.status, CriterionStatus::Violated);
        assert_eq!(rep.overall, OverallStatus::NotEstablished);
    }

    #[test]
    fn transformed_loop_h_zero_reduces_to_single_loop() {
        let sys = crate::lti::StateSpace::from_rows(&[vec![-1.0]], &[1.0], &[1.0]).unwrap();
        let rep = transformed_loop_check(&sys, 1.0, 0.0, &OmegaGrid::default()).unwrap();
        assert!(rep.phi_h.is_none());
        assert_eq!(rep.overall, OverallStatus::AbsolutelyStable);
    }

    #[test]
    fn verdicts_stable_under_grid_refinement() {
        let grid = OmegaGrid::default();
        let fine = grid.refined(4);
        let sys = scenarios::second_order_system();
        let a = transformed_loop_check(&sys, 1.0, 1.0, &grid).unwrap();
        let b = transformed_loop_check(&sys, 1.0, 1.0, &fine).unwrap();
        assert_eq!(a.overall, b.overall);
        assert_eq!(a.phi_h.unwrap().status, b.phi_h.unwrap().status);
        let di = scenarios::double_integrator_system();
        let a = transformed_loop_check(&di, 1.0, 1.0, &grid).unwrap();
        let b = transformed_loop_check(&di, 1.0, 1.0, &fine).unwrap();
        assert_eq!(a.phi_g.status, b.phi_g.status);
    }

    #[test]
    fn loop_gain_scaling_invariance() {
        // sector [0, beta] with G/beta matches sector [0, 1] with G
        let sys = scenarios::second_order_system();
        let grid = OmegaGrid::default();
        let beta = 4.0;
        let scaled = crate::lti::StateSpace::new(
            sys.a().clone(),
            sys.b() / beta,
            sys.c().clone(),
        )
        .unwrap();
        let a = circle_check(&scaled, 0.0, beta, &grid, LocusKind::Plain, LoopId::PhiG).unwrap();
        let b = circle_check(&sys, 0.0, 1.0, &grid, LocusKind::Plain, LoopId::PhiG).unwrap();
        assert_eq!(a.status, b.status);
    }
}
