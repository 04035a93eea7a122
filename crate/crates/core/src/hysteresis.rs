//! Rate-independent clockwise hysteresis operators for the feedback path.
//!
//! All operators advance on input *increments* only; no time argument ever
//! enters an update, which makes rate-independence structural. Three kinds
//! are provided:
//! - [`SignHysteresis`]: the boundary map ξ = γy + h·sign(Δy), the maximal
//!   (parallelogram) dissipation case;
//! - [`StopElement`]: a single stop-type rheological element with reversal
//!   slope c saturating at ±h;
//! - [`StaticMap`]: the memoryless lower-boundary case (no loop, lossless).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increments below this magnitude leave the sign branch untouched, so
/// rounding noise cannot flap the direction.
pub const DEAD_BAND: f64 = 1e-12;

const BAND_TOL: f64 = 1e-9;

/// Boundary sign-hysteresis ξ = γy + h·direction.
///
/// `direction` is the sign of the most recent increment larger than the
/// dead-band. Interior values in (−1, 1) describe rest states on the
/// vertical segment of the loop; they arise from interior initial outputs
/// and from the simulator's sliding resolution, and persist until the next
/// resolvable increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignHysteresis {
    pub gamma: f64,
    pub h: f64,
    pub direction: f64,
}

impl SignHysteresis {
    pub fn new(gamma: f64, h: f64) -> Self {
        Self {
            gamma,
            h,
            direction: 0.0,
        }
    }
}

/// Single stop element: internal state z follows c·Δy, clamped to ±h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopElement {
    pub c: f64,
    pub h: f64,
    pub z: f64,
}

impl StopElement {
    pub fn new(c: f64, h: f64) -> Self {
        Self { c, h, z: 0.0 }
    }
}

/// Memoryless map ξ = γy; the h → 0 degeneration of the sign operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticMap {
    pub gamma: f64,
    /// Optional tabulated nonlinear shape (y, ξ) in increasing y, validated
    /// against a sector at construction; `None` means the linear γy map.
    pub table: Option<Vec<(f64, f64)>>,
}

impl StaticMap {
    pub fn linear(gamma: f64) -> Self {
        Self { gamma, table: None }
    }

    /// Tabulated map through the origin, validated against the [alpha, beta]
    /// sector: alpha·y² ≤ ξ·y ≤ beta·y² at every node.
    pub fn tabulated(table: Vec<(f64, f64)>, alpha: f64, beta: f64) -> Result<Self> {
        if alpha < 0.0 || beta < alpha {
            return Err(Error::InvalidSector { alpha, beta });
        }
        for &(y, xi) in &table {
            let prod = xi * y;
            let y2 = y * y;
            if prod < alpha * y2 - BAND_TOL || prod > beta * y2 + BAND_TOL {
                return Err(Error::InvalidSector { alpha, beta });
            }
        }
        Ok(Self { gamma: 0.0, table: Some(table) })
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.table {
            None => self.gamma * y,
            Some(t) => interp_monotone(t, y),
        }
    }
}

fn interp_monotone(table: &[(f64, f64)], y: f64) -> f64 {
    match table {
        [] => 0.0,
        [only] => only.1,
        _ => {
            if y <= table[0].0 {
                return table[0].1;
            }
            if y >= table[table.len() - 1].0 {
                return table[table.len() - 1].1;
            }
            let i = table.partition_point(|&(yk, _)| yk <= y) - 1;
            let (y0, x0) = table[i];
            let (y1, x1) = table[i + 1];
            x0 + (x1 - x0) * (y - y0) / (y1 - y0)
        }
    }
}

/// One of the three operator kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operator {
    Sign(SignHysteresis),
    Stop(StopElement),
    Static(StaticMap),
}

/// An operator together with its increment memory.
///
/// Updates are deterministic value transitions: identical increment
/// sequences from identical states yield identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorState {
    op: Operator,
    y_prev: f64,
    xi_prev: f64,
}

impl OperatorState {
    /// Builds a state that reproduces `xi0` on a zero-increment update at
    /// `y0`, or fails when `xi0` is outside the operator's reachable band.
    pub fn new(op: Operator, y0: f64, xi0: f64) -> Result<Self> {
        if !y0.is_finite() || !xi0.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let op = match op {
            Operator::Sign(mut s) => {
                let off = xi0 - s.gamma * y0;
                if off.abs() > s.h + BAND_TOL {
                    return Err(Error::InconsistentInitialState { xi0, y0 });
                }
                s.direction = if s.h > 0.0 { (off / s.h).clamp(-1.0, 1.0) } else { 0.0 };
                Operator::Sign(s)
            }
            Operator::Stop(mut s) => {
                if xi0.abs() > s.h + BAND_TOL {
                    return Err(Error::InconsistentInitialState { xi0, y0 });
                }
                s.z = xi0.clamp(-s.h, s.h);
                Operator::Stop(s)
            }
            Operator::Static(s) => {
                if (s.eval(y0) - xi0).abs() > BAND_TOL * (1.0 + xi0.abs()) {
                    return Err(Error::InconsistentInitialState { xi0, y0 });
                }
                Operator::Static(s)
            }
        };
        let mut state = Self { op, y_prev: y0, xi_prev: 0.0 };
        state.xi_prev = state.output_at(y0);
        Ok(state)
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn y_prev(&self) -> f64 {
        self.y_prev
    }

    pub fn xi_prev(&self) -> f64 {
        self.xi_prev
    }

    fn output_at(&self, y: f64) -> f64 {
        match &self.op {
            Operator::Sign(s) => s.gamma * y + s.h * s.direction,
            Operator::Stop(s) => s.z,
            Operator::Static(s) => s.eval(y),
        }
    }

    /// Advances the memory by the increment to `y_new` and returns ξ.
    pub fn update(&mut self, y_new: f64) -> Result<f64> {
        if !y_new.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let dy = y_new - self.y_prev;
        match &mut self.op {
            Operator::Sign(s) => {
                if dy.abs() > DEAD_BAND {
                    s.direction = if dy > 0.0 { 1.0 } else { -1.0 };
                }
            }
            Operator::Stop(s) => {
                s.z = (s.z + s.c * dy).clamp(-s.h, s.h);
            }
            Operator::Static(_) => {}
        }
        self.y_prev = y_new;
        self.xi_prev = self.output_at(y_new);
        Ok(self.xi_prev)
    }

    /// Output the operator would produce for branch memory `dir` at `y`,
    /// without committing. Only meaningful for the sign kind; others ignore
    /// `dir`.
    pub fn peek_with_direction(&self, y: f64, dir: f64) -> f64 {
        match &self.op {
            Operator::Sign(s) => s.gamma * y + s.h * dir,
            _ => {
                let mut probe = self.clone();
                probe.update(y).expect("finite")
            }
        }
    }

    /// Overwrites the sign branch memory (used by the simulator's sliding
    /// resolution); no-op for other kinds.
    pub fn set_direction(&mut self, dir: f64) {
        if let Operator::Sign(s) = &mut self.op {
            s.direction = dir.clamp(-1.0, 1.0);
        }
    }

    pub fn direction(&self) -> Option<f64> {
        match &self.op {
            Operator::Sign(s) => Some(s.direction),
            _ => None,
        }
    }
}

/// Checks the clockwise orientation of a one-reversal (y, ξ) path: at every
/// common y the branch traversed with increasing y must lie on or above the
/// branch traversed with decreasing y.
pub fn is_clockwise(traj: &[(f64, f64)]) -> Result<bool> {
    is_clockwise_tol(traj, 1e-9)
}

pub fn is_clockwise_tol(traj: &[(f64, f64)], tol: f64) -> Result<bool> {
    if traj.len() < 3 {
        return Err(Error::NoOverlap);
    }
    // split at the first reversal of the y increments
    let mut split = traj.len() - 1;
    let mut first_sign = 0.0f64;
    for (i, w) in traj.windows(2).enumerate() {
        let dy = w[1].0 - w[0].0;
        if dy == 0.0 {
            continue;
        }
        let s = dy.signum();
        if first_sign == 0.0 {
            first_sign = s;
        } else if s != first_sign {
            split = i;
            break;
        }
    }
    let seg1 = &traj[..=split];
    let seg2 = &traj[split..];
    let (fwd, bwd) = if first_sign >= 0.0 { (seg1, seg2) } else { (seg2, seg1) };
    let range = |seg: &[(f64, f64)]| {
        let lo = seg.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = seg.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (flo, fhi) = range(fwd);
    let (blo, bhi) = range(bwd);
    let lo = flo.max(blo);
    let hi = fhi.min(bhi);
    let span = (fhi - flo).max(bhi - blo);
    // a degenerate overlap (no interval, just a shared point) cannot
    // order the branches
    if hi - lo < 1e-12 * (1.0 + span) {
        return Err(Error::NoOverlap);
    }
    let sorted_fwd = monotone_sorted(fwd);
    let sorted_bwd = monotone_sorted(bwd);
    let m = 256;
    for k in 0..=m {
        let y = lo + (hi - lo) * k as f64 / m as f64;
        let xf = interp_monotone(&sorted_fwd, y);
        let xb = interp_monotone(&sorted_bwd, y);
        if xf < xb - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn monotone_sorted(seg: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = seg.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v
}
