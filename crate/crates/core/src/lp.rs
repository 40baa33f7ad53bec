//! Dense linear programs and the pinned solver backend.
//!
//! The synthesis layer assembles small dense LPs; this module carries them in
//! a backend-neutral form, solves them through [`LpSolver`], and can dump any
//! instance in CPLEX LP text format for external-solver cross-checks. The
//! pinned backend is `microlp`, a deterministic single-threaded simplex:
//! identical inputs produce identical solutions, which the synthesis
//! reproducibility contract relies on.

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("linear program is malformed: {0}")]
    Malformed(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

/// `min cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, and box bounds on
/// the variables. Rows are stored dense.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a free variable with objective coefficient `cost`; returns its
    /// column index.
    pub fn add_var(&mut self, cost: f64) -> usize {
        self.add_bounded_var(cost, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_bounded_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds `Σ coeffs[i]·x[vars[i]] ≤ rhs`.
    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let mut row = vec![0.0; self.num_vars()];
        for &(var, coef) in terms {
            row[var] += coef;
        }
        self.a_ub.push(row);
        self.b_ub.push(rhs);
    }

    /// Adds `Σ coeffs[i]·x[vars[i]] = rhs`.
    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let mut row = vec![0.0; self.num_vars()];
        for &(var, coef) in terms {
            row[var] += coef;
        }
        self.a_eq.push(row);
        self.b_eq.push(rhs);
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (rows, rhs, kind) in [
            (&self.a_ub, &self.b_ub, "inequality"),
            (&self.a_eq, &self.b_eq, "equality"),
        ] {
            if rows.len() != rhs.len() {
                return Err(LpError::Malformed(format!(
                    "{kind} rows and rhs lengths differ"
                )));
            }
            if let Some(bad) = rows.iter().find(|r| r.len() != n) {
                return Err(LpError::Malformed(format!(
                    "{kind} row has {} coefficients for {} variables",
                    bad.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    /// Writes the instance in CPLEX LP text format (minimization).
    pub fn write_lp_format(&self, w: &mut impl Write, name: &str) -> io::Result<()> {
        writeln!(w, "\\ {name}")?;
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                write!(w, " {c:+} x{j}")?;
            }
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for (i, (row, rhs)) in self.a_ub.iter().zip(&self.b_ub).enumerate() {
            write!(w, " le{i}:")?;
            for (j, c) in row.iter().enumerate() {
                if *c != 0.0 {
                    write!(w, " {c:+} x{j}")?;
                }
            }
            writeln!(w, " <= {rhs}")?;
        }
        for (i, (row, rhs)) in self.a_eq.iter().zip(&self.b_eq).enumerate() {
            write!(w, " eq{i}:")?;
            for (j, c) in row.iter().enumerate() {
                if *c != 0.0 {
                    write!(w, " {c:+} x{j}")?;
                }
            }
            writeln!(w, " = {rhs}")?;
        }
        writeln!(w, "Bounds")?;
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => writeln!(w, " {lo} <= x{j} <= {hi}")?,
                (true, false) => writeln!(w, " x{j} >= {lo}")?,
                (false, true) => writeln!(w, " x{j} <= {hi}")?,
                (false, false) => writeln!(w, " x{j} free")?,
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Terminal solver verdicts.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, LpError>;
}

/// The pinned backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct MicrolpSolver;

impl LpSolver for MicrolpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, LpError> {
        lp.validate()?;
        let mut problem = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
        let vars: Vec<_> = lp
            .objective
            .iter()
            .zip(&lp.bounds)
            .map(|(&c, &(lo, hi))| problem.add_var(c, (lo, hi)))
            .collect();
        let sparse = |row: &[f64]| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, &c)| (vars[j], c))
                .collect::<Vec<_>>()
        };
        for (row, rhs) in lp.a_ub.iter().zip(&lp.b_ub) {
            problem.add_constraint(sparse(row), microlp::ComparisonOp::Le, *rhs);
        }
        for (row, rhs) in lp.a_eq.iter().zip(&lp.b_eq) {
            problem.add_constraint(sparse(row), microlp::ComparisonOp::Eq, *rhs);
        }
        match problem.solve() {
            Ok(sol) => Ok(LpOutcome::Optimal(LpSolution {
                objective: sol.objective(),
                x: vars.iter().map(|v| sol[*v]).collect(),
            })),
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(LpError::Solver(e.to_string())),
        }
    }
}
