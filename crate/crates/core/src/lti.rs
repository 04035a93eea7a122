//! State-space models of the linear subsystem and frequency-domain analysis.
//!
//! A [`StateSpace`] holds the (A, B, C) triple of the loop's linear dynamics
//! with transfer function G(s) = Cᵀ(sI − A)⁻¹B. The module evaluates G at
//! arbitrary complex s, classifies the pole configuration, and samples plain
//! or rate-weighted (jωG(jω)) frequency loci.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for treating a pole as lying on the imaginary axis.
pub const MARGINAL_POLE_TOL: f64 = 1e-9;

/// Relative distance from a sampled s to a pole below which the evaluation
/// is treated as singular.
const SINGULARITY_TOL: f64 = 1e-9;

/// The (A, B, C) triple of a strictly proper SISO linear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl StateSpace {
    /// Builds a model, checking dimension consistency and finiteness.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Dimension("state dimension must be at least 1".into()));
        }
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "A is {}x{}, B has {}, C has {} entries",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { a, b, c })
    }

    /// Convenience constructor from row-major data.
    pub fn from_rows(a_rows: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Self> {
        let n = a_rows.len();
        if a_rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("A must be square".into()));
        }
        let a = DMatrix::from_fn(n, n, |i, j| a_rows[i][j]);
        Self::new(a, DVector::from_column_slice(b), DVector::from_column_slice(c))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// y = Cᵀx for a state vector.
    pub fn output(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }

    /// Evaluates G(s) = Cᵀ(sI − A)⁻¹B by an LU solve of (sI − A)z = B.
    ///
    /// Returns [`Error::SingularAtS`] when s is (numerically) an eigenvalue
    /// of A.
    pub fn transfer_eval(&self, s: Complex64) -> Result<Complex64> {
        let poles = self.eigenvalues()?;
        let near = poles.iter().map(|p| (s - p).norm()).fold(f64::INFINITY, f64::min);
        if near < SINGULARITY_TOL * (1.0 + s.norm()) {
            return Err(Error::SingularAtS(s));
        }
        let n = self.dim();
        let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += s;
        }
        let rhs = DVector::from_iterator(n, self.b.iter().map(|&v| Complex::new(v, 0.0)));
        let z = m.lu().solve(&rhs).ok_or(Error::SingularAtS(s))?;
        let mut g = Complex64::new(0.0, 0.0);
        for i in 0..n {
            g += self.c[i] * z[i];
        }
        Ok(g)
    }

    /// G(0) = −CᵀA⁻¹B, or [`DcGain::Infinite`] when A is singular.
    ///
    /// Singularity of A is a legitimate outcome here (an integrating plant),
    /// not an error.
    pub fn dc_gain(&self) -> DcGain {
        match self.a.clone().lu().solve(&self.b) {
            Some(z) => {
                let g = -self.c.dot(&z);
                if g.is_finite() {
                    DcGain::Finite(g)
                } else {
                    DcGain::Infinite
                }
            }
            None => DcGain::Infinite,
        }
    }

    fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let ev = self.a.clone().complex_eigenvalues();
        let out: Vec<Complex64> = ev.iter().map(|e| Complex64::new(e.re, e.im)).collect();
        if out.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
            return Err(Error::EigFailure);
        }
        Ok(out)
    }

    /// Eigenvalues of A with half-plane classification.
    pub fn poles(&self) -> Result<PoleReport> {
        let mut poles = self.eigenvalues()?;
        poles.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        let mut unstable = 0usize;
        let mut marginal = 0usize;
        for p in &poles {
            if p.re.abs() < MARGINAL_POLE_TOL * (1.0 + p.norm()) {
                marginal += 1;
            } else if p.re > 0.0 {
                unstable += 1;
            }
        }
        let classification = if unstable > 0 {
            PoleClass::Unstable
        } else if marginal > 0 {
            PoleClass::Marginal
        } else {
            PoleClass::Hurwitz
        };
        Ok(PoleReport {
            poles,
            unstable,
            marginal,
            classification,
        })
    }

    /// Samples G(jω) or jωG(jω) on an increasing ω grid.
    ///
    /// Samples closer than the singularity tolerance to an imaginary-axis
    /// pole are flagged rather than silently returned.
    pub fn frequency_response(&self, grid: &[f64], kind: LocusKind) -> Result<FrequencyLocus> {
        if grid.is_empty() {
            return Err(Error::Dimension("empty frequency grid".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Dimension("frequency grid must be strictly increasing".into()));
        }
        let poles = self.eigenvalues()?;
        let mut samples = Vec::with_capacity(grid.len());
        for &omega in grid {
            let s = Complex64::new(0.0, omega);
            let near_pole = poles
                .iter()
                .any(|p| (s - p).norm() < SINGULARITY_TOL * (1.0 + s.norm()));
            let value = if near_pole {
                Complex64::new(f64::NAN, f64::NAN)
            } else {
                let g = self.transfer_eval(s)?;
                match kind {
                    LocusKind::Plain => g,
                    LocusKind::RateWeighted => s * g,
                }
            };
            samples.push(LocusSample {
                omega,
                value,
                near_pole,
            });
        }
        Ok(FrequencyLocus { kind, samples })
    }
}

/// DC gain G(0); the plant with a pole at the origin has infinite gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DcGain {
    Finite(f64),
    Infinite,
}

impl DcGain {
    pub fn finite(self) -> Option<f64> {
        match self {
            DcGain::Finite(g) => Some(g),
            DcGain::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleClass {
    Hurwitz,
    Marginal,
    Unstable,
}

/// Eigenvalues of A and their half-plane split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoleReport {
    pub poles: Vec<Complex64>,
    /// Count of poles strictly in the right half-plane.
    pub unstable: usize,
    /// Count of poles on the imaginary axis within tolerance.
    pub marginal: usize,
    pub classification: PoleClass,
}

impl PoleReport {
    pub fn max_real_part(&self) -> f64 {
        self.poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which locus to sample: G(jω) or the rate-weighted jωG(jω).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocusKind {
    #[serde(rename = "g")]
    Plain,
    #[serde(rename = "sg")]
    RateWeighted,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocusSample {
    pub omega: f64,
    pub value: Complex64,
    pub near_pole: bool,
}

/// Ordered frequency-response samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyLocus {
    pub kind: LocusKind,
    pub samples: Vec<LocusSample>,
}

impl FrequencyLocus {
    /// Largest finite sample magnitude, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| !s.near_pole)
            .map(|s| s.value.norm())
            .fold(0.0, f64::max)
    }
}

/// Logarithmic ω grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for OmegaGrid {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e3,
            points: 2000,
        }
    }
}

impl OmegaGrid {
    pub fn log_spaced(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        (0..self.points)
            .map(|i| (lo + (hi - lo) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }

    /// Same span with `factor` times as many points.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points: self.points * factor,
            ..*self
        }
    }
}
