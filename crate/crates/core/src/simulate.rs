//! Fixed-step closed-loop integration of ẋ = Ax + Bu, y = Cᵀx, u = −ξ[y].
//!
//! The feedback ξ is held constant across a step's internal stages at the
//! value produced by updating the operator with the step-entry output; the
//! branch decision therefore lags the state by one step, which breaks the
//! algebraic loop between ξ and ẏ.
//!
//! The delayed branch alone leaves an O(dt) velocity chatter once a
//! sign-hysteresis trajectory reaches its rest set: both relay branches
//! push the output back towards the switching surface. The stepper detects
//! that situation (the realized output increment contradicts whichever
//! branch is applied) and resolves it by bisecting the convexified relay
//! value s ∈ [−1, 1] until the output rate at the step exit vanishes. The
//! interior s is stored as the operator direction and persists through the
//! zero increments that follow, so resolved rest states are exact.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyLedger;
use crate::error::{Error, Result};
use crate::hysteresis::{Operator, OperatorState, SignHysteresis, StaticMap, StopElement, DEAD_BAND};
use crate::lti::StateSpace;

/// Feedback nonlinearity selection for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackSpec {
    /// Open the feedback path: ξ ≡ 0.
    None,
    Sign { gamma: f64, h: f64, #[serde(default)] xi0: f64 },
    Stop { c: f64, h: f64, #[serde(default)] xi0: f64 },
    Static { gamma: f64, #[serde(default)] xi0: f64 },
}

impl FeedbackSpec {
    pub fn xi0(&self) -> f64 {
        match self {
            FeedbackSpec::None => 0.0,
            FeedbackSpec::Sign { xi0, .. }
            | FeedbackSpec::Stop { xi0, .. }
            | FeedbackSpec::Static { xi0, .. } => *xi0,
        }
    }

    /// Returns a copy with ξ₀ clamped into the band reachable at output
    /// y₀, so preset scenarios stay consistent when the initial state is
    /// replaced. Explicit in-band values are kept as given.
    pub fn with_xi0_clamped(&self, y0: f64) -> FeedbackSpec {
        let mut spec = self.clone();
        match &mut spec {
            FeedbackSpec::None => {}
            FeedbackSpec::Sign { gamma, h, xi0 } => {
                *xi0 = xi0.clamp(*gamma * y0 - *h, *gamma * y0 + *h);
            }
            FeedbackSpec::Stop { h, xi0, .. } => {
                *xi0 = xi0.clamp(-*h, *h);
            }
            FeedbackSpec::Static { gamma, xi0 } => {
                *xi0 = *gamma * y0;
            }
        }
        spec
    }

    pub fn make_operator(&self, y0: f64) -> Result<Option<OperatorState>> {
        match *self {
            FeedbackSpec::None => Ok(None),
            FeedbackSpec::Sign { gamma, h, xi0 } => Ok(Some(OperatorState::new(
                Operator::Sign(SignHysteresis::new(gamma, h)),
                y0,
                xi0,
            )?)),
            FeedbackSpec::Stop { c, h, xi0 } => Ok(Some(OperatorState::new(
                Operator::Stop(StopElement::new(c, h)),
                y0,
                xi0,
            )?)),
            FeedbackSpec::Static { gamma, xi0 } => Ok(Some(OperatorState::new(
                Operator::Static(StaticMap::linear(gamma)),
                y0,
                xi0,
            )?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Rk4Fixed,
    EulerFixed,
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sys: StateSpace,
    pub feedback: FeedbackSpec,
    pub x0: DVector<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub solver: Solver,
    /// ‖x‖∞ beyond which the run terminates as unbounded.
    pub blowup: f64,
    /// Fraction of trailing samples used for cycle diagnostics.
    pub tail_fraction: f64,
    /// Oscillation amplitudes below this report decay, not a cycle.
    pub amplitude_floor: f64,
}

impl Scenario {
    pub fn new(sys: StateSpace, feedback: FeedbackSpec, x0: DVector<f64>, t_end: f64, dt: f64) -> Result<Self> {
        let s = Self {
            sys,
            feedback,
            x0,
            t_end,
            dt,
            solver: Solver::Rk4Fixed,
            blowup: 1e9,
            tail_fraction: 0.25,
            amplitude_floor: 1e-6,
        };
        s.validate()?;
        Ok(s)
    }

    /// Replaces the initial state and clamps the feedback ξ₀ into the band
    /// reachable at the new initial output.
    pub fn set_x0_consistent(&mut self, x0: DVector<f64>) {
        self.x0 = x0;
        let y0 = self.sys.output(&self.x0);
        self.feedback = self.feedback.with_xi0_clamped(y0);
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Scenario("dt must be positive".into()));
        }
        if self.t_end < self.dt {
            return Err(Error::Scenario("t_end must be at least dt".into()));
        }
        if self.x0.len() != self.sys.dim() {
            return Err(Error::Scenario(format!(
                "x0 has {} entries for a {}-state system",
                self.x0.len(),
                self.sys.dim()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Scenario("x0 must be finite".into()));
        }
        Ok(())
    }
}

/// Time-indexed record of one run plus its energy ledger.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// State samples, one vector per time sample.
    pub x: Vec<DVector<f64>>,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub ledger: EnergyLedger,
    pub reversal_times: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.x.last().expect("nonempty trajectory")
    }

    /// CSV export with header t,x1..xn,y,xi,u,V,dissipated.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.x.first().map_or(0, |x| x.len());
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{}", i));
        }
        header.push_str(",y,xi,u,V,dissipated");
        writeln!(out, "{}", header)?;
        for k in 0..self.len() {
            let mut line = format!("{}", self.t[k]);
            for i in 0..n {
                line.push_str(&format!(",{}", self.x[k][i]));
            }
            let (v, d) = self
                .ledger
                .samples
                .get(k)
                .map_or((0.0, 0.0), |s| (s.v, s.dissipated));
            line.push_str(&format!(",{},{},{},{},{}", self.y[k], self.xi[k], self.u[k], v, d));
            writeln!(out, "{}", line)?;
        }
        Ok(())
    }
}

/// Detected oscillation in the tail window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimitCycle {
    pub period: f64,
    /// Half peak-to-peak of the reference state over the tail.
    pub amplitude: f64,
}

/// Boundedness, oscillation, and convergence diagnostics of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    pub bounded: bool,
    pub limit_cycle: Option<LimitCycle>,
    /// Exponential fit of the ‖x‖∞ envelope, per second.
    pub growth_rate: f64,
    /// Verdict of `converged_to_set` when a target set was supplied.
    pub set_verdict: Option<bool>,
}

/// One fixed-step advance of the closed loop.
///
/// Updates the operator with the current output, holds u = −ξ across the
/// integration stages, then applies the sliding resolution if the realized
/// increment contradicts both relay branches.
pub fn step(
    scenario: &Scenario,
    x: &DVector<f64>,
    op: &mut Option<OperatorState>,
) -> Result<(DVector<f64>, f64)> {
    let y = scenario.sys.output(x);
    let xi = match op {
        Some(state) => state.update(y)?,
        None => 0.0,
    };
    let x_next = advance(scenario, x, -xi);

    if let Some(state) = op {
        if let Some(dir) = state.direction() {
            if dir.abs() == 1.0 {
                let dy = scenario.sys.output(&x_next) - y;
                if dir * dy < 0.0 && dy.abs() > DEAD_BAND {
                    // applied branch contradicted; try the opposite one
                    let xi_o = state.peek_with_direction(y, -dir);
                    let x_o = advance(scenario, x, -xi_o);
                    let dy_o = scenario.sys.output(&x_o) - y;
                    if -dir * dy_o < 0.0 && dy_o.abs() > DEAD_BAND {
                        // both branches push back: sliding segment
                        let (s, x_s) = resolve_sliding(scenario, x, y, state);
                        state.set_direction(s);
                        return Ok((x_s, state.peek_with_direction(y, s)));
                    }
                    state.set_direction(-dir);
                    return Ok((x_o, xi_o));
                }
            }
        }
    }
    Ok((x_next, xi))
}

fn advance(scenario: &Scenario, x: &DVector<f64>, u: f64) -> DVector<f64> {
    let f = |x: &DVector<f64>| scenario.sys.a() * x + scenario.sys.b() * u;
    let dt = scenario.dt;
    match scenario.solver {
        Solver::EulerFixed => x + f(x) * dt,
        Solver::Rk4Fixed => {
            let k1 = f(x);
            let k2 = f(&(x + &k1 * (0.5 * dt)));
            let k3 = f(&(x + &k2 * (0.5 * dt)));
            let k4 = f(&(x + &k3 * dt));
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        }
    }
}

/// Output rate ẏ = Cᵀ(Ax + Bu) at a state under input u.
fn output_rate(sys: &StateSpace, x: &DVector<f64>, u: f64) -> f64 {
    sys.c().dot(&(sys.a() * x + sys.b() * u))
}

/// Bisects the convexified relay fraction s so that the output rate at the
/// step exit vanishes, pinning the state onto the switching surface.
fn resolve_sliding(
    scenario: &Scenario,
    x: &DVector<f64>,
    y: f64,
    state: &OperatorState,
) -> (f64, DVector<f64>) {
    let eval = |s: f64| {
        let xi = state.peek_with_direction(y, s);
        let xn = advance(scenario, x, -xi);
        let r = output_rate(&scenario.sys, &xn, -xi);
        (r, xn)
    };
    let (mut f_lo, _) = eval(-1.0);
    let (f_hi, x_hi) = eval(1.0);
    if f_lo == 0.0 {
        return (-1.0, eval(-1.0).1);
    }
    if (f_lo > 0.0) == (f_hi > 0.0) {
        // no bracket on the exit rate; fall back to the smaller-magnitude end
        return if f_lo.abs() < f_hi.abs() { (-1.0, eval(-1.0).1) } else { (1.0, x_hi) };
    }
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut best = (0.0, eval(0.0).1);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (fm, xm) = eval(mid);
        best = (mid, xm);
        if fm == 0.0 {
            break;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    best
}

/// Integrates a scenario to t_end or blow-up and computes diagnostics on
/// the tail window. Unstable runs are legitimate outputs, reported with
/// `bounded = false`.
pub fn run(scenario: &Scenario) -> Result<(Trajectory, CycleDiagnostics)> {
    scenario.validate()?;
    let n_steps = (scenario.t_end / scenario.dt).round() as usize;
    let mut x = scenario.x0.clone();
    let y0 = scenario.sys.output(&x);
    let mut op = scenario.feedback.make_operator(y0)?;

    let mut t_v = Vec::with_capacity(n_steps + 1);
    let mut x_v = Vec::with_capacity(n_steps + 1);
    let mut y_v = Vec::with_capacity(n_steps + 1);
    let mut xi_v = Vec::with_capacity(n_steps + 1);
    let mut reversal_times = Vec::new();

    let xi_init = op.as_ref().map_or(0.0, |s| s.xi_prev());
    t_v.push(0.0);
    x_v.push(x.clone());
    y_v.push(y0);
    xi_v.push(xi_init);

    let mut bounded = true;
    let mut last_dir = op.as_ref().and_then(|s| s.direction()).unwrap_or(0.0);
    for k in 0..n_steps {
        let (x_next, xi) = step(scenario, &x, &mut op)?;
        let t = (k + 1) as f64 * scenario.dt;
        if let Some(dir) = op.as_ref().and_then(|s| s.direction()) {
            if dir != last_dir && last_dir != 0.0 {
                reversal_times.push(t);
            }
            last_dir = dir;
        }
        x = x_next;
        t_v.push(t);
        y_v.push(scenario.sys.output(&x));
        xi_v.push(xi);
        x_v.push(x.clone());
        if x.iter().any(|v| !v.is_finite()) || x.amax() > scenario.blowup {
            bounded = false;
            break;
        }
    }

    let u_v: Vec<f64> = xi_v.iter().map(|&xi| -xi).collect();
    let ledger = match &op {
        Some(state) => EnergyLedger::build(state.operator(), &t_v, &y_v, &xi_v),
        None => EnergyLedger::empty(),
    };
    let traj = Trajectory {
        t: t_v,
        x: x_v,
        y: y_v,
        xi: xi_v,
        u: u_v,
        ledger,
        reversal_times,
    };

    let rate = growth_rate(&traj);
    // an envelope still growing at a clearly exponential rate is a
    // divergence caught before the blow-up threshold, not an oscillation
    if rate > 0.05 {
        bounded = false;
    }
    let limit_cycle = if bounded {
        detect_limit_cycle(&traj, scenario.tail_fraction, scenario.amplitude_floor)
    } else {
        None
    };
    let diag = CycleDiagnostics {
        bounded,
        limit_cycle,
        growth_rate: rate,
        set_verdict: None,
    };
    Ok((traj, diag))
}

/// Estimates period and amplitude from the tail window of a trajectory.
///
/// The period comes from mean-crossing intervals of the reference state
/// (x2 when the system has at least two states); returns `None` when the
/// tail has decayed below the amplitude floor or shows fewer than two full
/// oscillations.
pub fn detect_limit_cycle(traj: &Trajectory, tail_fraction: f64, floor: f64) -> Option<LimitCycle> {
    if traj.len() < 8 {
        return None;
    }
    let start = ((traj.len() as f64) * (1.0 - tail_fraction.clamp(0.05, 1.0))) as usize;
    let idx = if traj.x[0].len() >= 2 { 1 } else { 0 };
    let series: Vec<f64> = traj.x[start..].iter().map(|x| x[idx]).collect();
    let t = &traj.t[start..];
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let amplitude = 0.5 * (max - min);
    if amplitude < floor {
        return None;
    }
    // linear-interpolated up-crossings of the mean
    let mut crossings = Vec::new();
    for k in 1..series.len() {
        let (a, b) = (series[k - 1] - mean, series[k] - mean);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            crossings.push(t[k - 1] + frac * (t[k] - t[k - 1]));
        }
    }
    if crossings.len() < 3 {
        return None;
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Some(LimitCycle { period, amplitude })
}

/// Per-second exponential fit of the ‖x‖∞ envelope.
pub fn growth_rate(traj: &Trajectory) -> f64 {
    let chunks = 16usize;
    let n = traj.len();
    if n < 2 * chunks {
        return 0.0;
    }
    let mut pts = Vec::with_capacity(chunks);
    for c in 0..chunks {
        let lo = n * c / chunks;
        let hi = n * (c + 1) / chunks;
        let m = traj.x[lo..hi].iter().map(|x| x.amax()).fold(0.0f64, f64::max);
        if m > 0.0 && m.is_finite() {
            pts.push((0.5 * (traj.t[lo] + traj.t[hi - 1]), m.ln()));
        }
    }
    if pts.len() < 2 {
        return 0.0;
    }
    // least-squares slope
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    }
}

/// Target invariant set {x1 ∈ [lo, hi], x2 = 0}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TargetSet {
    pub x1_lo: f64,
    pub x1_hi: f64,
}

/// True iff |x2| < tol and x1 lies in the interval inflated by tol over the
/// last 5% of the samples.
pub fn converged_to_set(traj: &Trajectory, set: TargetSet, tol: f64) -> bool {
    if traj.is_empty() {
        return false;
    }
    let start = traj.len().saturating_sub((traj.len() / 20).max(1));
    traj.x[start..].iter().all(|x| {
        let x2_ok = x.len() < 2 || x[1].abs() < tol;
        x2_ok && x[0] >= set.x1_lo - tol && x[0] <= set.x1_hi + tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use approx::assert_relative_eq;

    fn second_order_scenario(feedback: FeedbackSpec, x0: [f64; 2]) -> Scenario {
        let sys = StateSpace::from_rows(
            &[vec![0.0, 1.0], vec![-1.0, -1.0]],
            &[0.0, 1.0],
            &[0.0, 1.0],
        )
        .unwrap();
        Scenario::new(sys, feedback, DVector::from_column_slice(&x0), 50.0, 1e-3).unwrap()
    }

    #[test]
    fn single_euler_step_hand_computed() {
        let mut sc = second_order_scenario(FeedbackSpec::Static { gamma: 1.0, xi0: 0.0 }, [1.0, 0.0]);
        sc.solver = Solver::EulerFixed;
        sc.dt = 0.01;
        let y0 = sc.sys.output(&sc.x0);
        let mut op = sc.feedback.make_operator(y0).unwrap();
        let (x1, _) = step(&sc, &sc.x0.clone(), &mut op).unwrap();
        // y = x2 = 0, xi = 0, xdot = (x2, -x1 - x2) = (0, -1)
        assert_relative_eq!(x1[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x1[1], -0.01, epsilon = 1e-12);
    }

    #[test]
    fn origin_is_equilibrium() {
        let sc = second_order_scenario(FeedbackSpec::Sign { gamma: 1.0, h: 1.0, xi0: 0.0 }, [0.0, 0.0]);
        let (traj, diag) = run(&sc).unwrap();
        assert!(diag.bounded);
        assert!(traj.final_state().amax() < 1e-12);
    }

    #[test]
    fn unstable_oscillator_diverges() {
        let mut sc = scenarios::build_oscillator(
            101.0,
            scenarios::OscillatorFeedback::None,
            scenarios::DampingSign::Dissipative,
            scenarios::CouplingSign::Stabilizing,
        );
        sc.t_end = 60.0;
        sc.dt = 1e-3; // coarser grid is fine for the linear run
        let (_, diag) = run(&sc).unwrap();
        assert!(!diag.bounded);
        assert!(diag.growth_rate > 0.0);
    }

    #[test]
    fn determinism() {
        let sc = second_order_scenario(FeedbackSpec::Sign { gamma: 1.0, h: 1.0, xi0: 0.0 }, [2.0, -1.0]);
        let (a, _) = run(&sc).unwrap();
        let (b, _) = run(&sc).unwrap();
        assert_eq!(a.final_state(), b.final_state());
        assert_eq!(a.xi, b.xi);
    }

    #[test]
    fn limit_cycle_on_synthetic_harmonic() {
        let n = 10_000;
        let dt = 1e-3;
        let mut traj = Trajectory {
            t: (0..=n).map(|k| k as f64 * dt).collect(),
            x: (0..=n)
                .map(|k| {
                    let t = k as f64 * dt;
                    DVector::from_column_slice(&[
                        (2.0 * std::f64::consts::PI * t).cos(),
                        (2.0 * std::f64::consts::PI * t).sin(),
                    ])
                })
                .collect(),
            y: vec![0.0; n + 1],
            xi: vec![0.0; n + 1],
            u: vec![0.0; n + 1],
            ledger: EnergyLedger::empty(),
            reversal_times: vec![],
        };
        let lc = detect_limit_cycle(&traj, 0.5, 1e-6).unwrap();
        assert!((lc.period - 1.0).abs() < 0.01);
        assert_relative_eq!(lc.amplitude, 1.0, epsilon = 1e-3);
        // decaying series reports none
        for (k, x) in traj.x.iter_mut().enumerate() {
            *x *= (-3.0 * k as f64 * dt).exp() * 1e-7;
        }
        assert!(detect_limit_cycle(&traj, 0.5, 1e-6).is_none());
    }

    #[test]
    fn converged_to_set_examples() {
        let sc = second_order_scenario(FeedbackSpec::Sign { gamma: 1.0, h: 1.0, xi0: 0.0 }, [0.5, 0.0]);
        let (traj, _) = run(&sc).unwrap();
        let set = TargetSet { x1_lo: -1.0, x1_hi: 1.0 };
        assert!(converged_to_set(&traj, set, 1e-3));
        let narrow = TargetSet { x1_lo: 2.0, x1_hi: 3.0 };
        assert!(!converged_to_set(&traj, narrow, 1e-3));
    }

    #[test]
    fn dt_halving_changes_final_state_little() {
        for preset in [scenarios::PresetId::DoubleIntegrator, scenarios::PresetId::SecondOrder] {
            let mut sc = scenarios::build_preset(preset);
            sc.set_x0_consistent(DVector::from_column_slice(&[2.0, 0.5]));
            sc.t_end = 30.0;
            let (a, _) = run(&sc).unwrap();
            sc.dt /= 2.0;
            let (b, _) = run(&sc).unwrap();
            let diff = (a.final_state() - b.final_state()).amax();
            assert!(diff < 1e-3, "dt-halving moved final state by {}", diff);
        }
    }
}
