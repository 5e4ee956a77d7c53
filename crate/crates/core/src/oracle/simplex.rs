//! Dense linear programs `max cᵀx` subject to `Ax = b`, `x ≥ 0`.
//!
//! Thin adapter over `microlp`. Solutions are basic; after the solve the
//! point is cleaned of round-off negatives so callers see `x ≥ 0`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};

/// Phase-one objective below which a program is declared feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

fn check_shape(a: &[Vec<f64>], b: &[f64], n: usize) -> Result<()> {
    if a.len() != b.len() || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidSpec("constraint matrix has inconsistent shape".into()));
    }
    Ok(())
}

fn add_rows(lp: &mut Problem, vars: &[Variable], a: &[Vec<f64>], b: &[f64], extra: impl Fn(usize) -> Vec<(Variable, f64)>) {
    for (r, (row, &rhs)) in a.iter().zip(b).enumerate() {
        let mut expr: Vec<(Variable, f64)> = vars
            .iter()
            .zip(row)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&v, &c)| (v, c))
            .collect();
        expr.extend(extra(r));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs);
    }
}

fn solve(lp: &Problem) -> Result<microlp::Solution> {
    match lp.solve() {
        Ok(outcome) => outcome.into_solution().map_err(|_| Error::IterationLimit(0)),
        Err(microlp::Error::Infeasible) => Err(Error::Infeasible),
        Err(microlp::Error::Unbounded) => Err(Error::Unbounded),
        Err(e) => Err(Error::InvalidSpec(format!("linear program: {e}"))),
    }
}

fn clean(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -1e-9 {
            *v = 0.0;
        }
    }
}

/// `max cᵀx` subject to `Ax = b`, `x ≥ 0`, at an optimal basic solution.
pub fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    check_shape(a, b, n)?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = c.iter().map(|&ck| lp.add_var(ck, (0.0, f64::INFINITY))).collect();
    add_rows(&mut lp, &vars, a, b, |_| Vec::new());
    let sol = solve(&lp)?;
    let mut x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
    clean(&mut x);
    let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution { x, value })
}

/// A basic feasible point of `Ax = b`, `x ≥ 0`, together with the phase-one residual `min ‖Ax − b‖₁`.
///
/// Returns `None` when the residual exceeds `tol`.
pub fn feasible_point(a: &[Vec<f64>], b: &[f64], tol: f64) -> Result<(f64, Option<Vec<f64>>)> {
    let n = a.first().map_or(0, Vec::len);
    check_shape(a, b, n)?;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let over: Vec<Variable> = b.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let under: Vec<Variable> = b.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    add_rows(&mut lp, &vars, a, b, |r| vec![(over[r], 1.0), (under[r], -1.0)]);
    let sol = solve(&lp)?;
    let residual = sol.objective().max(0.0);
    if residual > tol {
        return Ok((residual, None));
    }
    let mut x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
    clean(&mut x);
    Ok((residual, Some(x)))
}
