use serde::Serialize;

use crate::error::{Error, Result};
use crate::gain::{GainSpec, Gamma};
use crate::measure::{discretize_conditional_mean, PieceMeasure};
use crate::Sense;

use super::{solve_finite, SolveOptions, SolveResult};

/// Slack allowed when checking that values do not increase with refinement.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: usize,
    /// Number of atoms of the discretized first marginal.
    pub n: usize,
    pub value: f64,
    pub result: SolveResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub levels: Vec<LevelResult>,
    /// False when `γ` is unbounded on the support of `μ₂`; convergence of the
    /// values to the continuous optimum then is not guaranteed.
    pub gamma_bounded: bool,
    /// Values are nonincreasing across levels within [`MONOTONE_TOL`].
    pub monotone: bool,
}

fn refines(coarse: &[f64], fine: &[f64]) -> bool {
    coarse.iter().all(|c| fine.contains(c))
}

fn gamma_bounded_on(spec: &GainSpec, mu: &PieceMeasure) -> bool {
    if spec.gamma().is_bounded() {
        return true;
    }
    match (spec.gamma(), mu.support_hull()) {
        (Gamma::VixLog { .. }, Some((lo, _))) => lo > 0.0,
        (_, hull) => hull.is_some(),
    }
}

/// Solves the finite problem for each discretization `μ₁ⁿ` of `mu1` on the nested `levels`.
pub fn approx_solve(
    mu1: &PieceMeasure,
    mu2: &PieceMeasure,
    spec: &GainSpec,
    levels: &[Vec<f64>],
    opts: &SolveOptions,
) -> Result<ApproxReport> {
    if levels.windows(2).any(|w| !refines(&w[0], &w[1])) {
        return Err(Error::NotNested);
    }
    let mut out = Vec::with_capacity(levels.len());
    for (level, cuts) in levels.iter().enumerate() {
        let disc = discretize_conditional_mean(mu1, cuts)?;
        let result = solve_finite(&disc, mu2, spec, Sense::Max, opts)?;
        out.push(LevelResult {
            level,
            n: disc.len(),
            value: result.value,
            result,
        });
    }
    let monotone = out.windows(2).all(|w| w[1].value <= w[0].value + MONOTONE_TOL);
    Ok(ApproxReport {
        levels: out,
        gamma_bounded: gamma_bounded_on(spec, mu2),
        monotone,
    })
}
