//! Interval vectors and the sign-split linear-map bound.
//!
//! Everything downstream rests on one primitive: given `M` and an interval
//! `[lo, up]`, the image `M x` of any `x` in the interval lies in
//! `[M⁺lo − M⁻up, M⁺up − M⁻lo]`, where `M⁺ = max(M, 0)` entrywise and
//! `M⁻ = M⁺ − M`. Bounds are plain `f64` vectors; no outward rounding is
//! applied, and tests absorb floating-point effects with a documented 1e-9
//! slack.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IntervalError {
    #[error("lower bound exceeds upper bound at index {index} ({lower} > {upper})")]
    BoundOrder {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty intersection at index {index} ({lower} > {upper})")]
    EmptyIntersection {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("bound contains a non-finite entry at index {index}")]
    NonFinite { index: usize },
}

/// A box `[lower, upper] ⊂ ℝⁿ`, the carrier for state and input framers.
///
/// `lower ≤ upper` holds elementwise by construction; violating inputs are
/// rejected rather than clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl IntervalVector {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, IntervalError> {
        if lower.len() != upper.len() {
            return Err(IntervalError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(IntervalError::NonFinite { index: i });
            }
            if lower[i] > upper[i] {
                return Err(IntervalError::BoundOrder {
                    index: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self, IntervalError> {
        Self::new(
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
        )
    }

    /// Degenerate interval `[x, x]`.
    pub fn point(x: DVector<f64>) -> Self {
        Self {
            lower: x.clone(),
            upper: x,
        }
    }

    /// Symmetric interval `[-radius, radius]` around zero.
    pub fn symmetric(radius: &DVector<f64>) -> Result<Self, IntervalError> {
        Self::new(-radius.clone(), radius.clone())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn width(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn midpoint(&self) -> DVector<f64> {
        (&self.upper + &self.lower) * 0.5
    }

    /// Membership test with an absolute slack on both sides.
    pub fn contains(&self, x: &DVector<f64>, slack: f64) -> bool {
        x.len() == self.dim()
            && (0..x.len()).all(|i| self.lower[i] - slack <= x[i] && x[i] <= self.upper[i] + slack)
    }

    /// Stacks intervals into one box, e.g. `[v; w; v]` noise bounds.
    pub fn concat(parts: &[&IntervalVector]) -> Self {
        let dim = parts.iter().map(|p| p.dim()).sum();
        let mut lower = DVector::zeros(dim);
        let mut upper = DVector::zeros(dim);
        let mut at = 0;
        for p in parts {
            lower.rows_mut(at, p.dim()).copy_from(&p.lower);
            upper.rows_mut(at, p.dim()).copy_from(&p.upper);
            at += p.dim();
        }
        Self { lower, upper }
    }

    /// Translates both bounds by `shift` (exact for the `Ψξ` point terms).
    pub fn shifted(&self, shift: &DVector<f64>) -> Self {
        Self {
            lower: &self.lower + shift,
            upper: &self.upper + shift,
        }
    }

    /// Minkowski sum of two boxes.
    pub fn sum(&self, other: &IntervalVector) -> Result<Self, IntervalError> {
        if self.dim() != other.dim() {
            return Err(IntervalError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            lower: &self.lower + &other.lower,
            upper: &self.upper + &other.upper,
        })
    }
}

/// The `(M⁺, M⁻, |M|)` decomposition of a real matrix.
///
/// Invariants: all blocks nonnegative, `plus − minus = M`,
/// `plus + minus = abs`, `min(plus, minus) = 0` entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    plus: DMatrix<f64>,
    minus: DMatrix<f64>,
    abs: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn plus(&self) -> &DMatrix<f64> {
        &self.plus
    }

    pub fn minus(&self) -> &DMatrix<f64> {
        &self.minus
    }

    pub fn abs(&self) -> &DMatrix<f64> {
        &self.abs
    }

    /// Reconstructs the original matrix (`plus − minus`).
    pub fn original(&self) -> DMatrix<f64> {
        &self.plus - &self.minus
    }

    pub fn nrows(&self) -> usize {
        self.plus.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.plus.ncols()
    }

    /// Interval image of `iv` under the decomposed map:
    /// `[M⁺lo − M⁻up, M⁺up − M⁻lo]`.
    pub fn apply(&self, iv: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        if iv.dim() != self.ncols() {
            return Err(IntervalError::DimensionMismatch {
                expected: self.ncols(),
                got: iv.dim(),
            });
        }
        let lower = &self.plus * iv.lower() - &self.minus * iv.upper();
        let upper = &self.plus * iv.upper() - &self.minus * iv.lower();
        // plus/minus are nonnegative, so the ordering is preserved exactly:
        // both bounds are the same two products evaluated on ordered inputs.
        Ok(IntervalVector { lower, upper })
    }
}

/// Splits `M` into `(M⁺, M⁻, |M|)` with `M⁺ᵢⱼ = max(Mᵢⱼ, 0)`.
pub fn split(m: &DMatrix<f64>) -> SplitMatrix {
    let plus = m.map(|x| x.max(0.0));
    let minus = &plus - m;
    let abs = &plus + &minus;
    SplitMatrix { plus, minus, abs }
}

/// Tight interval enclosure of `{Mx : x ∈ iv}` for a box `iv`.
pub fn bound_linear_map(
    m: &DMatrix<f64>,
    iv: &IntervalVector,
) -> Result<IntervalVector, IntervalError> {
    split(m).apply(iv)
}

/// Elementwise `[max(lowers), min(uppers)]`.
///
/// Emptiness is an error by contract: the observer guarantees nonempty
/// intersections, so an empty result signals a violated assumption upstream
/// and must surface instead of being clamped away.
pub fn intersect(a: &IntervalVector, b: &IntervalVector) -> Result<IntervalVector, IntervalError> {
    if a.dim() != b.dim() {
        return Err(IntervalError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut lower = DVector::zeros(a.dim());
    let mut upper = DVector::zeros(a.dim());
    for i in 0..a.dim() {
        lower[i] = a.lower()[i].max(b.lower()[i]);
        upper[i] = a.upper()[i].min(b.upper()[i]);
        if lower[i] > upper[i] {
            return Err(IntervalError::EmptyIntersection {
                index: i,
                lower: lower[i],
                upper: upper[i],
            });
        }
    }
    Ok(IntervalVector { lower, upper })
}
