//! Supply rate, path energy, loop area, and dissipation audits.
//!
//! The energy ledger tracks three quantities along a trajectory: the
//! supplied energy ∫w dt with w = ẏ·ξ, the recoverable storage V of the
//! operator (elastic spring energy), and their difference, the dissipated
//! energy, which must never be negative for a clockwise operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hysteresis::Operator;

/// Instantaneous power flowing into the hysteresis element.
pub fn supply_rate(y_dot: f64, xi: f64) -> f64 {
    y_dot * xi
}

/// Trapezoidal line integral ∫ ξ dy along the traversed path.
///
/// A branch jump at a reversal sample contributes nothing because dy = 0
/// across the jump.
pub fn path_energy(traj: &[(f64, f64)]) -> f64 {
    traj.windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum()
}

/// Rebuilds a sampled sign-hysteresis path with the branch jump at each
/// reversal inserted as an explicit zero-dy sample, so the trapezoid
/// quadrature never integrates across the jump with nonzero dy. The
/// result makes [`path_energy`] exact for the piecewise-affine branch
/// geometry.
pub fn sign_exact_path(gamma: f64, y: &[f64], xi: &[f64]) -> Vec<(f64, f64)> {
    assert_eq!(y.len(), xi.len());
    let mut path = Vec::with_capacity(2 * y.len());
    if y.is_empty() {
        return path;
    }
    path.push((y[0], xi[0]));
    for k in 1..y.len() {
        // offset of the branch traversed on this increment
        let off = xi[k] - gamma * y[k];
        let here = gamma * y[k - 1] + off;
        if (here - path.last().unwrap().1).abs() > 0.0 {
            path.push((y[k - 1], here));
        }
        path.push((y[k], xi[k]));
    }
    path
}

/// Enclosed loop area ∮ ξ dy of a cycle closed in y.
///
/// Positive for clockwise loops; equals the energy lost per cycle.
pub fn loop_area(cycle: &[(f64, f64)]) -> Result<f64> {
    if cycle.len() < 2 {
        return Err(Error::OpenPath { start: f64::NAN, end: f64::NAN });
    }
    let start = cycle[0].0;
    let end = cycle[cycle.len() - 1].0;
    let span = cycle
        .iter()
        .map(|p| p.0.abs())
        .fold(0.0f64, f64::max);
    if (end - start).abs() > 1e-6 * (1.0 + span) {
        return Err(Error::OpenPath { start, end });
    }
    Ok(path_energy(cycle))
}

/// Storage value ½γy₀² − dissipated: the level of the energy function
/// whose decay rate is h|ẏ| along sign-hysteresis paths.
pub fn storage_value(gamma: f64, y: f64, dissipated_so_far: f64) -> f64 {
    0.5 * gamma * y * y - dissipated_so_far
}

/// Recoverable (elastic) energy stored in the operator at output ξ and
/// input y. For the stop element ξ equals the internal state z.
pub fn recoverable_storage(op: &Operator, y: f64, xi: f64) -> f64 {
    match op {
        Operator::Sign(s) => 0.5 * s.gamma * y * y,
        Operator::Stop(s) => 0.5 * xi * xi / s.c,
        Operator::Static(s) => 0.5 * s.gamma * y * y,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LedgerSample {
    pub t: f64,
    /// Supply rate w = ẏ·ξ (backward-difference estimate).
    pub w: f64,
    /// Recoverable storage V.
    pub v: f64,
    /// Cumulative dissipated energy up to t.
    pub dissipated: f64,
}

/// Energy bookkeeping of one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// ∫ w dt over the whole run.
    pub supplied: f64,
    /// Final recoverable storage V.
    pub stored: f64,
    /// supplied − ΔV; non-negative for clockwise operators.
    pub dissipated: f64,
    pub samples: Vec<LedgerSample>,
}

impl EnergyLedger {
    pub fn empty() -> Self {
        Self { supplied: 0.0, stored: 0.0, dissipated: 0.0, samples: Vec::new() }
    }

    /// Builds the ledger for sampled (t, y, ξ) data under a given operator.
    ///
    /// Supplied increments use the trapezoid ∫ξ dy. For the sign operator
    /// the increment is taken along the branch traversed on that step
    /// (the jump at a reversal carries dy = 0), making the quadrature
    /// exact for the piecewise-affine branch geometry.
    pub fn build(op: &Operator, t: &[f64], y: &[f64], xi: &[f64]) -> Self {
        assert!(t.len() == y.len() && y.len() == xi.len());
        if t.is_empty() {
            return Self::empty();
        }
        let sign_gamma = match op {
            Operator::Sign(s) => Some(s.gamma),
            _ => None,
        };
        let v0 = recoverable_storage(op, y[0], xi[0]);
        let mut supplied = 0.0;
        let mut samples = Vec::with_capacity(t.len());
        samples.push(LedgerSample { t: t[0], w: 0.0, v: v0, dissipated: 0.0 });
        for k in 1..t.len() {
            let dy = y[k] - y[k - 1];
            let dt = t[k] - t[k - 1];
            let xi_start = match sign_gamma {
                // start of the branch traversed on this increment
                Some(g) => g * y[k - 1] + (xi[k] - g * y[k]),
                None => xi[k - 1],
            };
            supplied += 0.5 * (xi[k] + xi_start) * dy;
            let v = recoverable_storage(op, y[k], xi[k]);
            let w = if dt > 0.0 { supply_rate(dy / dt, xi[k]) } else { 0.0 };
            samples.push(LedgerSample { t: t[k], w, v, dissipated: supplied - (v - v0) });
        }
        let stored = samples.last().unwrap().v;
        Self { supplied, stored, dissipated: supplied - (stored - v0), samples }
    }
}

/// Result of a dissipation audit over one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissipationReport {
    /// Largest violation of V(t2) − V(t1) ≤ supplied(t1, t2) over all
    /// sample pairs; non-positive means the inequality holds everywhere.
    pub max_violation: f64,
    /// Total dissipated energy.
    pub dissipated: f64,
    /// For sign-hysteresis: worst mismatch between the discrete storage
    /// decay and −h|Δy|, away from reversal samples.
    pub sign_rate_mismatch: Option<f64>,
    pub dissipative: bool,
}

/// Verifies the dissipation inequality between every pair t1 < t2 and, for
/// the sign operator, the storage decay rate h|ẏ|.
pub fn verify_dissipation(op: &Operator, t: &[f64], y: &[f64], xi: &[f64]) -> DissipationReport {
    let ledger = EnergyLedger::build(op, t, y, xi);
    // V(t2) - V(t1) <= S(t2) - S(t1) for all pairs reduces to monotone
    // growth of D = S - V; track the running minimum of D.
    let mut max_violation = f64::NEG_INFINITY;
    let mut running_min = f64::INFINITY;
    for s in &ledger.samples {
        let d = s.dissipated;
        running_min = running_min.min(d);
        max_violation = max_violation.max(running_min - d);
    }
    if !max_violation.is_finite() {
        max_violation = 0.0;
    }

    let sign_rate_mismatch = match op {
        Operator::Sign(s) if s.h > 0.0 => {
            let mut worst = 0.0f64;
            for k in 2..t.len() {
                let dy_prev = y[k - 1] - y[k - 2];
                let dy = y[k] - y[k - 1];
                // skip reversal neighborhoods where the branch jumps
                if dy * dy_prev <= 0.0 {
                    continue;
                }
                let dd = ledger.samples[k].dissipated - ledger.samples[k - 1].dissipated;
                worst = worst.max((dd - s.h * dy.abs()).abs());
            }
            Some(worst)
        }
        _ => None,
    };

    let scale = 1.0 + ledger.supplied.abs();
    DissipationReport {
        max_violation,
        dissipated: ledger.dissipated,
        sign_rate_mismatch,
        dissipative: max_violation <= 1e-8 * scale && ledger.dissipated >= -1e-8 * scale,
    }
}

/// Writes the ledger as CSV with columns t, y, xi, w, V, dissipated.
pub fn write_ledger_csv<W: std::io::Write>(
    out: &mut W,
    t: &[f64],
    y: &[f64],
    xi: &[f64],
    ledger: &EnergyLedger,
) -> std::io::Result<()> {
    writeln!(out, "t,y,xi,w,V,dissipated")?;
    for (k, s) in ledger.samples.iter().enumerate() {
        writeln!(out, "{},{},{},{},{},{}", t[k], y[k], xi[k], s.w, s.v, s.dissipated)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hysteresis::{Operator, OperatorState, SignHysteresis, StaticMap, StopElement};
    use approx::assert_relative_eq;

    #[test]
    fn supply_rate_examples() {
        assert_eq!(supply_rate(0.0, 5.0), 0.0);
        assert_eq!(supply_rate(2.0, 3.0), 6.0);
        assert_eq!(supply_rate(-1.0, 4.0), -4.0);
    }

    fn run_path(st: &mut OperatorState, ys: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
        ys.map(|y| (y, st.update(y).unwrap())).collect()
    }

    fn ramp(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..=n).map(move |k| a + (b - a) * k as f64 / n as f64)
    }

    #[test]
    fn path_energy_static_ramp() {
        let mut st = OperatorState::new(Operator::Static(StaticMap::linear(1.0)), 0.0, 0.0).unwrap();
        let traj = run_path(&mut st, ramp(0.0, 1.0, 1000));
        assert_relative_eq!(path_energy(&traj), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn path_energy_static_cycle_lossless() {
        let mut st = OperatorState::new(Operator::Static(StaticMap::linear(1.0)), 0.0, 0.0).unwrap();
        let traj = run_path(&mut st, ramp(0.0, 1.0, 500).chain(ramp(1.0, 0.0, 500)));
        assert!(path_energy(&traj).abs() < 1e-10);
    }

    #[test]
    fn sign_cycle_dissipates_rectangle() {
        // analytic loop area of the boundary map over [0, 1] is 2*h*(y2-y1)
        let mut st =
            OperatorState::new(Operator::Sign(SignHysteresis::new(1.0, 1.0)), 0.0, 0.0).unwrap();
        let traj = run_path(&mut st, ramp(0.0, 1.0, 2000).chain(ramp(1.0, 0.0, 2000)));
        let y: Vec<f64> = traj.iter().map(|p| p.0).collect();
        let xi: Vec<f64> = traj.iter().map(|p| p.1).collect();
        let exact = sign_exact_path(1.0, &y, &xi);
        assert_relative_eq!(path_energy(&exact), 2.0, epsilon = 1e-9);
        assert_relative_eq!(loop_area(&exact).unwrap(), 2.0, epsilon = 1e-9);
        // raw trapezoid across the jump smears at most one step's worth
        assert_relative_eq!(path_energy(&traj), 2.0, epsilon = 1e-3);
    }

    #[test]
    fn loop_area_open_path_rejected() {
        let e = loop_area(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(e, Err(Error::OpenPath { .. })));
    }

    /// Shoelace oracle for the enclosed area of a closed polygon; for a
    /// clockwise (y, xi) loop it agrees with the contour integral.
    fn shoelace(path: &[(f64, f64)]) -> f64 {
        let n = path.len();
        let mut a = 0.0;
        for i in 0..n {
            let (y0, x0) = path[i];
            let (y1, x1) = path[(i + 1) % n];
            a += y0 * x1 - y1 * x0;
        }
        // clockwise traversal in (y, xi) makes the signed area negative
        -0.5 * a
    }

    #[test]
    fn stop_saturating_cycle_matches_shoelace() {
        let mut st = OperatorState::new(Operator::Stop(StopElement::new(1.0, 50.0)), 0.0, 0.0).unwrap();
        // wide cycle: saturates both ways
        let traj = run_path(
            &mut st,
            ramp(0.0, 150.0, 3000)
                .chain(ramp(150.0, -150.0, 6000))
                .chain(ramp(-150.0, 0.0, 3000)),
        );
        let area = loop_area(&traj).unwrap();
        let oracle = shoelace(&traj);
        assert_relative_eq!(area, oracle, epsilon = 1e-6);
        assert!(area > 0.0);
    }

    #[test]
    fn storage_value_examples() {
        assert_relative_eq!(storage_value(1.0, 2.0, 0.0), 2.0);
        assert_relative_eq!(storage_value(0.0, 7.0, 1.5), -1.5);
    }

    #[test]
    fn ledger_sign_cycle_returns_storage_and_books_loss() {
        let op = Operator::Sign(SignHysteresis::new(1.0, 1.0));
        let mut st = OperatorState::new(op.clone(), 0.0, 0.0).unwrap();
        let traj = run_path(&mut st, ramp(0.0, 1.0, 2000).chain(ramp(1.0, 0.0, 2000)));
        let t: Vec<f64> = (0..traj.len()).map(|k| k as f64 * 1e-3).collect();
        let y: Vec<f64> = traj.iter().map(|p| p.0).collect();
        let xi: Vec<f64> = traj.iter().map(|p| p.1).collect();
        let ledger = EnergyLedger::build(&op, &t, &y, &xi);
        // storage returns to its initial value over the closed cycle
        assert_relative_eq!(ledger.stored, ledger.samples[0].v, epsilon = 1e-9);
        assert_relative_eq!(ledger.dissipated, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn verify_dissipation_static_tight() {
        let op = Operator::Static(StaticMap::linear(1.0));
        let mut st = OperatorState::new(op.clone(), 0.0, 0.0).unwrap();
        let traj = run_path(&mut st, ramp(0.0, 1.0, 500).chain(ramp(1.0, -0.5, 700)));
        let t: Vec<f64> = (0..traj.len()).map(|k| k as f64 * 1e-3).collect();
        let y: Vec<f64> = traj.iter().map(|p| p.0).collect();
        let xi: Vec<f64> = traj.iter().map(|p| p.1).collect();
        let rep = verify_dissipation(&op, &t, &y, &xi);
        assert!(rep.dissipative);
        assert!(rep.dissipated.abs() < 1e-10);
    }

    #[test]
    fn verify_dissipation_sinusoid_four_h_amp() {
        let op = Operator::Sign(SignHysteresis::new(1.0, 0.8));
        let mut st = OperatorState::new(op.clone(), 0.0, 0.0).unwrap();
        let n = 40000;
        let amp = 1.7;
        let mut t = Vec::new();
        let mut y = Vec::new();
        let mut xi = Vec::new();
        for k in 0..=n {
            let tk = k as f64 / n as f64; // one period
            let yk = amp * (2.0 * std::f64::consts::PI * tk).sin();
            t.push(tk);
            y.push(yk);
            xi.push(st.update(yk).unwrap());
        }
        let rep = verify_dissipation(&op, &t, &y, &xi);
        assert!(rep.dissipative);
        let expect = 4.0 * 0.8 * amp;
        assert!((rep.dissipated - expect).abs() < 0.01 * expect);
        assert!(rep.sign_rate_mismatch.unwrap() < 1e-6);
    }

    #[test]
    fn counter_clockwise_loop_flagged() {
        // synthetic counter-clockwise loop: lower branch on the way up
        let mut t = Vec::new();
        let mut y = Vec::new();
        let mut xi = Vec::new();
        let n = 1000;
        for k in 0..=(2 * n) {
            let tk = k as f64 * 1e-3;
            let (yk, xik) = if k <= n {
                let yk = k as f64 / n as f64;
                (yk, yk - 1.0)
            } else {
                let yk = (2 * n - k) as f64 / n as f64;
                (yk, yk + 1.0)
            };
            t.push(tk);
            y.push(yk);
            xi.push(xik);
        }
        let op = Operator::Sign(SignHysteresis::new(1.0, 1.0));
        let rep = verify_dissipation(&op, &t, &y, &xi);
        assert!(!rep.dissipative);
        assert!(rep.dissipated < 0.0);
    }

    #[test]
    fn loop_area_monotone_in_h() {
        let mut last = -1.0;
        for &h in &[0.0, 0.3, 0.9, 2.0] {
            let mut st =
                OperatorState::new(Operator::Sign(SignHysteresis::new(1.0, h)), 0.0, 0.0).unwrap();
            let traj = run_path(&mut st, ramp(0.0, 1.0, 1000).chain(ramp(1.0, 0.0, 1000)));
            let y: Vec<f64> = traj.iter().map(|p| p.0).collect();
            let xi: Vec<f64> = traj.iter().map(|p| p.1).collect();
            let area = loop_area(&sign_exact_path(1.0, &y, &xi)).unwrap();
            assert_relative_eq!(area, 2.0 * h, epsilon = 1e-9);
            assert!(area >= last);
            last = area;
        }
    }
}
