//! Iterates `P^β(D)` applied to closed families of test functions, `L²`
//! norms on boxes, iterate semi-norms and class-membership checks.

mod classes;
mod function;
mod hdr;
mod moments;
mod norm;
mod table;

pub use classes::{
    classify_membership, seminorm, seminorm_from_table, verify_inclusion, FunctionVerdict,
    InclusionOptions, InclusionReport, LambdaResult, Membership, MembershipReport, Mode,
    SeminormReport, ShellStatus, LAMBDA_LADDER,
};
pub use function::{apply_iterate, apply_operator, CPoly, Term, TestFunction};
pub use hdr::{HdrScalar, MAX_EXPONENT};
pub use moments::MomentTable;
pub use norm::{l2_norm_on_box, l2_norm_by_tensor_quadrature, NormContext};
pub use table::{default_b_max, iterate_norm_table, IterateGrowthFit, NormTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weight::WeightError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterateError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Gaussian scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("dynamic range exhausted while computing the iterate at beta = {beta:?}")]
    Overflow { beta: Vec<u32> },
    #[error(
        "moment recurrence disagrees with quadrature for x^{k} on [{a}, {b}]: {recurrence:e} vs {quadrature:e}"
    )]
    QuadratureMismatch {
        k: usize,
        a: f64,
        b: f64,
        recurrence: f64,
        quadrature: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BoxRegion {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawBox> for BoxRegion {
    type Error = IterateError;
    fn try_from(r: RawBox) -> Result<Self, IterateError> {
        BoxRegion::new(r.lo, r.hi)
    }
}

impl From<BoxRegion> for RawBox {
    fn from(b: BoxRegion) -> Self {
        RawBox { lo: b.lo, hi: b.hi }
    }
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, IterateError> {
        if lo.len() != hi.len() {
            return Err(IterateError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(IterateError::InvalidBox("zero-dimensional box".into()));
        }
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(IterateError::InvalidBox(format!(
                    "interval {i} is [{a}, {b}]; need finite a < b"
                )));
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    /// `[a, b]^n`
    pub fn cube(n: usize, a: f64, b: f64) -> Result<Self, IterateError> {
        Self::new(vec![a; n], vec![b; n])
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Whether `self ⊆ other`.
    pub fn is_subset_of(&self, other: &BoxRegion) -> bool {
        self.dims() == other.dims()
            && (0..self.dims()).all(|i| other.lo[i] <= self.lo[i] && self.hi[i] <= other.hi[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_validation() {
        assert!(BoxRegion::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxRegion::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let b = BoxRegion::new(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(b.volume(), 6.0);
        assert!(b.contains(&[0.0, 3.0]));
        assert!(!b.contains(&[0.0, 3.5]));
        assert!(BoxRegion::cube(2, 0.0, 1.0).unwrap().is_subset_of(&b));
    }
}
