//! Per-agent decoupling of measurements into an attack-affected channel and
//! an attack-free channel.
//!
//! Each agent observes `y = Cx + Dv + Hd` where `d` is an unknown input with
//! no bound or model. An SVD of the feedthrough `H = U1 S V1ᵀ` rotates the
//! measurement into `z1 = U1ᵀy` (hit by the input component `d1 = V1ᵀd`
//! through the invertible `S`) and `z2 = U2ᵀy` (independent of `d`). The
//! remaining input component `d2 = V2ᵀd` is recoverable one step later
//! through the dynamics provided `C2 G2` has full column rank, in which case
//! the pseudoinverse `M2 = (C2 G2)⁺` is a left inverse.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::interval::IntervalVector;

/// Default relative threshold below which singular values are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error("{context}: expected {expected} {what}, got {got}")]
    Dimension {
        context: &'static str,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(
        "attack-free channel cannot recover the input: C2*G2 has numerical rank {found} but \
         needs full column rank {required}"
    )]
    AssumptionViolated { found: usize, required: usize },
    #[error("left-inverse witness failed: max |M2*C2*G2 - I| = {residual}")]
    LeftInverseWitness { residual: f64 },
    #[error("singular value decomposition did not converge")]
    SvdFailed,
}

/// Global plant `x_{k+1} = A x_k + B w_k + G d_k` with the noise and
/// initial-state boxes known to every agent.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w_bounds: IntervalVector,
    pub x0_bounds: IntervalVector,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        g: DMatrix<f64>,
        w_bounds: IntervalVector,
        x0_bounds: IntervalVector,
    ) -> Result<Self, DecompositionError> {
        let n = a.nrows();
        check_dim("plant A", "columns", n, a.ncols())?;
        check_dim("plant B", "rows", n, b.nrows())?;
        check_dim("plant G", "rows", n, g.nrows())?;
        check_dim("plant w_bounds", "entries", b.ncols(), w_bounds.dim())?;
        check_dim("plant x0_bounds", "entries", n, x0_bounds.dim())?;
        Ok(Self {
            a,
            b,
            g,
            w_bounds,
            x0_bounds,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.g.ncols()
    }
}

/// One agent's measurement `y = C x + D v + H d`.
#[derive(Debug, Clone)]
pub struct AgentMeasurementModel {
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub v_bounds: IntervalVector,
}

impl AgentMeasurementModel {
    pub fn new(
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        h: DMatrix<f64>,
        v_bounds: IntervalVector,
    ) -> Result<Self, DecompositionError> {
        let m = c.nrows();
        check_dim("agent D", "rows", m, d.nrows())?;
        check_dim("agent H", "rows", m, h.nrows())?;
        check_dim("agent v_bounds", "entries", d.ncols(), v_bounds.dim())?;
        Ok(Self { c, d, h, v_bounds })
    }

    pub fn measurement_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.d.ncols()
    }
}

/// All SVD blocks and derived products for one agent.
///
/// Only `decompose` constructs values of this type, so holding one is a
/// witness that the full-column-rank condition on `C2 G2` held at
/// construction time.
#[derive(Debug, Clone)]
pub struct DecomposedAgentModel {
    rank: usize,
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
    s: DMatrix<f64>,
    v1: DMatrix<f64>,
    v2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    g1: DMatrix<f64>,
    g2: DMatrix<f64>,
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
    v_bounds: IntervalVector,
}

impl DecomposedAgentModel {
    /// Numerical rank of the feedthrough matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn u1(&self) -> &DMatrix<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &DMatrix<f64> {
        &self.u2
    }

    /// Diagonal `r × r` block of nonzero singular values.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn v1(&self) -> &DMatrix<f64> {
        &self.v1
    }

    pub fn v2(&self) -> &DMatrix<f64> {
        &self.v2
    }

    pub fn c1(&self) -> &DMatrix<f64> {
        &self.c1
    }

    pub fn c2(&self) -> &DMatrix<f64> {
        &self.c2
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    pub fn g1(&self) -> &DMatrix<f64> {
        &self.g1
    }

    pub fn g2(&self) -> &DMatrix<f64> {
        &self.g2
    }

    /// `S⁻¹`.
    pub fn m1(&self) -> &DMatrix<f64> {
        &self.m1
    }

    /// Left inverse of `C2 G2`.
    pub fn m2(&self) -> &DMatrix<f64> {
        &self.m2
    }

    pub fn v_bounds(&self) -> &IntervalVector {
        &self.v_bounds
    }

    pub fn measurement_dim(&self) -> usize {
        self.u1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.v1.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.d1.ncols()
    }

    /// Width of the attack-free channel, `mⁱ − rⁱ`.
    pub fn clean_dim(&self) -> usize {
        self.u2.ncols()
    }

    /// False when the feedthrough has full row rank (`r = mⁱ`): every
    /// measurement direction is compromised and the agent offers no
    /// attack-free channel. Surfaced so callers can report the condition.
    pub fn has_attack_free_channel(&self) -> bool {
        self.clean_dim() > 0
    }

    /// Rotates a raw measurement into `(z1, z2) = (U1ᵀy, U2ᵀy)`.
    pub fn transform_measurement(
        &self,
        y: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), DecompositionError> {
        check_dim("measurement", "entries", self.measurement_dim(), y.len())?;
        Ok((self.u1.transpose() * y, self.u2.transpose() * y))
    }

    /// Rebuilds the input from its channel components: `V1 d1 + V2 d2`.
    pub fn reconstruct_input(
        &self,
        d1: &DVector<f64>,
        d2: &DVector<f64>,
    ) -> Result<DVector<f64>, DecompositionError> {
        check_dim("input channel d1", "entries", self.rank, d1.len())?;
        check_dim("input channel d2", "entries", self.v2.ncols(), d2.len())?;
        Ok(&self.v1 * d1 + &self.v2 * d2)
    }
}

fn check_dim(
    context: &'static str,
    what: &'static str,
    expected: usize,
    got: usize,
) -> Result<(), DecompositionError> {
    if expected != got {
        return Err(DecompositionError::Dimension {
            context,
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Flips column signs so the largest-magnitude entry of each column is
/// positive, making the decomposition reproducible across runs. Returns the
/// applied signs.
fn canonicalize_columns(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mut best = 0usize;
        for i in 1..m.nrows() {
            if m[(i, j)].abs() > m[(best, j)].abs() {
                best = i;
            }
        }
        let sign = if m.nrows() > 0 && m[(best, j)] < 0.0 {
            -1.0
        } else {
            1.0
        };
        if sign < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
        signs.push(sign);
    }
    signs
}

/// Deterministic orthonormal completion of `basis` (orthonormal columns) to
/// all of ℝ^dim, built by Gram-Schmidt over the standard basis with one
/// re-orthogonalization pass.
fn orthonormal_complement(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let want = dim - basis.ncols();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(want);
    for e in 0..dim {
        if cols.len() == want {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[e] = 1.0;
        for _ in 0..2 {
            for j in 0..basis.ncols() {
                let b = basis.column(j);
                let proj = b.dot(&v);
                v -= DVector::from(b) * proj;
            }
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    debug_assert_eq!(cols.len(), want);
    if cols.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Splits an agent's measurement model along the SVD of its feedthrough
/// matrix and validates that the attack-free channel can recover the
/// undetected input component.
///
/// Edge cases: `r = 0` (no feedthrough) leaves `z1` empty and `z2` equal to
/// the full measurement; `r = mⁱ` leaves the agent without an attack-free
/// channel, which is fatal here whenever `n_p > r` and otherwise reported
/// through [`DecomposedAgentModel::has_attack_free_channel`].
pub fn decompose(
    plant: &PlantModel,
    agent: &AgentMeasurementModel,
    rank_tol: f64,
) -> Result<DecomposedAgentModel, DecompositionError> {
    let n = plant.state_dim();
    let n_p = plant.input_dim();
    let m = agent.measurement_dim();
    check_dim("agent C", "columns", n, agent.c.ncols())?;
    check_dim("agent H", "columns", n_p, agent.h.ncols())?;

    let svd = agent
        .h
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(DecompositionError::SvdFailed)?;
    let u_thin = svd.u.as_ref().ok_or(DecompositionError::SvdFailed)?;
    let vt_thin = svd.v_t.as_ref().ok_or(DecompositionError::SvdFailed)?;
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let rank = sigma.iter().filter(|&&s| s > rank_tol * sigma_max).count();
    let rank = if sigma_max == 0.0 { 0 } else { rank };

    let mut u1 = u_thin.columns(0, rank).into_owned();
    let mut v1 = vt_thin.rows(0, rank).transpose();
    // Keep H = U1 S V1ᵀ invariant under the sign canonicalization of U1.
    let signs = canonicalize_columns(&mut u1);
    for (j, sign) in signs.iter().enumerate() {
        if *sign < 0.0 {
            for i in 0..v1.nrows() {
                v1[(i, j)] = -v1[(i, j)];
            }
        }
    }
    let s = DMatrix::from_fn(rank, rank, |i, j| if i == j { sigma[i] } else { 0.0 });

    let mut u2 = orthonormal_complement(&u1, m);
    canonicalize_columns(&mut u2);
    let mut v2 = orthonormal_complement(&v1, n_p);
    canonicalize_columns(&mut v2);

    let c1 = u1.transpose() * &agent.c;
    let c2 = u2.transpose() * &agent.c;
    let d1 = u1.transpose() * &agent.d;
    let d2 = u2.transpose() * &agent.d;
    let g1 = &plant.g * &v1;
    let g2 = &plant.g * &v2;
    let m1 = DMatrix::from_fn(rank, rank, |i, j| if i == j { 1.0 / sigma[i] } else { 0.0 });

    // Assumption witness: C2 G2 must have full column rank so that its
    // pseudoinverse acts as a left inverse.
    let c2g2 = &c2 * &g2;
    let required = n_p - rank;
    if required > 0 {
        let rank_c2g2 = c2g2.rank(rank_tol * (1.0 + c2g2.norm()));
        if rank_c2g2 < required {
            return Err(DecompositionError::AssumptionViolated {
                found: rank_c2g2,
                required,
            });
        }
    }
    let m2 = if required == 0 || c2g2.nrows() == 0 {
        DMatrix::zeros(required, c2g2.nrows())
    } else {
        c2g2
            .clone()
            .pseudo_inverse(rank_tol * (1.0 + c2g2.norm()))
            .map_err(|_| DecompositionError::SvdFailed)?
    };
    let witness = &m2 * &c2g2 - DMatrix::<f64>::identity(required, required);
    let residual = witness.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if residual > 1e-9 {
        return Err(DecompositionError::LeftInverseWitness { residual });
    }

    Ok(DecomposedAgentModel {
        rank,
        u1,
        u2,
        s,
        v1,
        v2,
        c1,
        c2,
        d1,
        d2,
        g1,
        g2,
        m1,
        m2,
        v_bounds: agent.v_bounds.clone(),
    })
}
