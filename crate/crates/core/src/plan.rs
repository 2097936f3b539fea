//! Piecewise-polynomial motion plans in TC-space.
//!
//! A segment maps `t ∈ [0, 1]` to a TC-space configuration, one univariate
//! polynomial in [`Var::Time`] per chain variable. Plans are certified one
//! segment at a time, so knot mismatches between segments are reported as
//! warnings only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polynomial::{Polynomial, Var};

/// Knots closer than this are considered continuous.
pub const KNOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("degenerate parameter interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),
    #[error("segment polynomial for variable {index} is not univariate in t")]
    NotUnivariate { index: usize },
    #[error("plan variable `{0}` does not name a chain joint")]
    UnknownVariable(String),
    #[error("plan segment {segment} leaves chain variable `{name}` unbound")]
    MissingVariable { segment: usize, name: String },
    #[error("invalid plan document: {0}")]
    Document(String),
}

/// One polynomial piece `ρ(t)`, `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanSegment {
    coords: Vec<Polynomial>,
}

impl PlanSegment {
    /// Builds a segment from per-variable univariate polynomials in `t`.
    pub fn new(coords: Vec<Polynomial>) -> Result<Self, PlanError> {
        for (index, p) in coords.iter().enumerate() {
            if p.vars().iter().any(|&v| v != Var::Time) {
                return Err(PlanError::NotUnivariate { index });
            }
        }
        Ok(Self { coords })
    }

    /// Segment from dense ascending coefficient lists, one per variable.
    pub fn from_coeffs(coeffs: &[Vec<f64>]) -> Self {
        Self {
            coords: coeffs.iter().map(|c| Polynomial::univariate(Var::Time, c)).collect(),
        }
    }

    pub fn constant(s: &[f64]) -> Self {
        Self { coords: s.iter().map(|&x| Polynomial::constant(x)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, i: usize) -> &Polynomial {
        &self.coords[i]
    }

    pub fn coords(&self) -> &[Polynomial] {
        &self.coords
    }

    /// Dense ascending coefficients of coordinate `i`.
    pub fn coeffs(&self, i: usize) -> Vec<f64> {
        self.coords[i]
            .univariate_coeff_vector(Var::Time)
            .expect("segment coordinates are univariate in t")
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.coords[i].degree_in(Var::Time)
    }

    pub fn max_degree(&self) -> u32 {
        (0..self.dim()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.coords
            .iter()
            .map(|p| p.eval_univariate(Var::Time, t).expect("univariate in t"))
            .collect()
    }

    pub fn derivative(&self, t: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let c = self.coeffs(i);
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &a)| acc * t + k as f64 * a)
            })
            .collect()
    }
}

fn check_dims(expected: usize, got: usize) -> Result<(), PlanError> {
    if expected != got {
        Err(PlanError::Dimension { expected, got })
    } else {
        Ok(())
    }
}

/// `ρ(t) = start + t (end - start)`.
pub fn linear_segment(start: &[f64], end: &[f64]) -> Result<PlanSegment, PlanError> {
    check_dims(start.len(), end.len())?;
    Ok(PlanSegment::from_coeffs(
        &start
            .iter()
            .zip(end)
            .map(|(&a, &b)| vec![a, b - a])
            .collect::<Vec<_>>(),
    ))
}

/// Cubic Hermite segment with `ρ(0) = s0`, `ρ(1) = s1`, `ρ'(0) = v0`,
/// `ρ'(1) = v1`.
pub fn hermite_cubic_segment(
    s0: &[f64],
    s1: &[f64],
    v0: &[f64],
    v1: &[f64],
) -> Result<PlanSegment, PlanError> {
    let n = s0.len();
    check_dims(n, s1.len())?;
    check_dims(n, v0.len())?;
    check_dims(n, v1.len())?;
    let coeffs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let (p0, p1, m0, m1) = (s0[i], s1[i], v0[i], v1[i]);
            // h00 = 1 - 3t² + 2t³, h10 = t - 2t² + t³, h01 = 3t² - 2t³, h11 = -t² + t³
            vec![
                p0,
                m0,
                -3.0 * p0 - 2.0 * m0 + 3.0 * p1 - m1,
                2.0 * p0 + m0 - 2.0 * p1 + m1,
            ]
        })
        .collect();
    Ok(PlanSegment::from_coeffs(&coeffs))
}

/// Pulls a segment defined on `[t0, t1]` back to `[0, 1]` by the affine map
/// `t = t0 + u (t1 - t0)`.
pub fn reparametrize_to_unit(segment: &PlanSegment, t0: f64, t1: f64) -> Result<PlanSegment, PlanError> {
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(PlanError::DegenerateInterval(t0, t1));
    }
    let affine = Polynomial::univariate(Var::Time, &[t0, t1 - t0]);
    let bind = [(Var::Time, affine)].into();
    PlanSegment::new(segment.coords.iter().map(|p| p.compose(&bind)).collect())
}

/// A mismatch between the end of one segment and the start of the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotMismatch {
    pub knot: usize,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionPlan {
    segments: Vec<PlanSegment>,
    mismatches: Vec<KnotMismatch>,
}

impl MotionPlan {
    pub fn new(segments: Vec<PlanSegment>) -> Result<Self, PlanError> {
        if let Some(first) = segments.first() {
            for s in &segments {
                check_dims(first.dim(), s.dim())?;
            }
        }
        let mut mismatches = Vec::new();
        for (knot, w) in segments.windows(2).enumerate() {
            let gap = w[0]
                .eval(1.0)
                .iter()
                .zip(w[1].eval(0.0))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap > KNOT_TOLERANCE {
                log::warn!("plan is discontinuous at knot {knot}: gap {gap:.3e}");
                mismatches.push(KnotMismatch { knot, max_gap: gap });
            }
        }
        Ok(Self { segments, mismatches })
    }

    pub fn segments(&self) -> &[PlanSegment] {
        &self.segments
    }

    pub fn knot_mismatches(&self) -> &[KnotMismatch] {
        &self.mismatches
    }

    pub fn is_continuous(&self) -> bool {
        self.mismatches.is_empty()
    }
}
