//! Static superreplication of the conditional gain `V = φ(ν[γ(X₂)|X₁] − γ(X₁))`.
//!
//! A portfolio `(u₁, u₂, Δ, Γ)` superreplicates when for every state `(s₁, s₂, v)`
//! with `v ≥ φ(0)`
//!
//! ```text
//! u₁(s₁) + u₂(s₂) + Δ (s₂ − s₁) + Γ (γ(s₂) − γ(s₁) − φ⁻¹(v)) ≥ v.
//! ```
//!
//! Its price `μ₁[u₁] + μ₂[u₂]` then bounds `J(ν)` from above for every martingale coupling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::gain::GainSpec;
use crate::measure::{Integrand, PieceMeasure};
use crate::solver::evaluate_j;

/// Search interval of [`solve_b_star`].
pub const B_BRACKET: (f64, f64) = (1e-8, 1e8);
const B_REL_TOL: f64 = 1e-12;
const B_RESIDUAL_TOL: f64 = 1e-9;
const LIFT_TOL: f64 = 1e-12;

/// A coupling together with its per-atom conditional gains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedCoupling {
    pub base: Coupling,
    /// `Vᵢ = φ(νᵢ[γ] − γ(aᵢ))`.
    pub v_values: Vec<f64>,
}

impl LiftedCoupling {
    /// `Σ pᵢ Vᵢ`.
    pub fn expectation(&self) -> f64 {
        self.base
            .first()
            .weights()
            .iter()
            .zip(&self.v_values)
            .map(|(p, v)| p * v)
            .sum()
    }

    /// Forgets the gains.
    pub fn project(&self) -> &Coupling {
        &self.base
    }
}

pub fn lift(coupling: &Coupling, spec: &GainSpec) -> Result<LiftedCoupling> {
    let gamma = spec.gamma();
    let v_values = coupling
        .row_integrals(gamma)?
        .into_iter()
        .zip(coupling.first().atoms())
        .map(|(u, &a)| spec.conditional_gain(u, gamma.eval(a)))
        .collect::<Result<Vec<f64>>>()?;
    let lifted = LiftedCoupling {
        base: coupling.clone(),
        v_values,
    };
    let j = evaluate_j(coupling, spec)?;
    debug_assert!((lifted.expectation() - j).abs() <= LIFT_TOL * (1.0 + j.abs()));
    Ok(lifted)
}

/// Root `b*` of `(φ⁻¹)*(b) = b v* − φ⁻¹(v*)`.
///
/// The left side dominates the right for every `b`, with equality exactly on
/// the subdifferential of `φ⁻¹` at `v*`; bisection runs on the sign of the
/// conjugate's right derivative minus `v*`, which is nondecreasing in `b`.
/// `φ = √·` returns `2 v*` exactly.
pub fn solve_b_star(spec: &GainSpec, v_star: f64) -> Result<f64> {
    let phi = spec.phi();
    if !phi.is_invertible() {
        return Err(Error::NotInvertible);
    }
    // Shift so the conjugate is taken over gains `w = v − φ(0) ≥ 0`.
    let w_star = v_star - phi.at_zero();
    if !(v_star > 0.0 && w_star > 0.0) {
        return Err(Error::DegenerateBound { v_star });
    }
    if matches!(phi, crate::gain::Phi::Sqrt) {
        return Ok(2.0 * v_star);
    }
    let (mut lo, mut hi) = B_BRACKET;
    let side = |b: f64| -> Result<bool> { Ok(phi.conjugate_argmax(b)? >= w_star) };
    if side(lo)? || !side(hi)? {
        return Err(Error::NoRoot { lo, hi });
    }
    while hi - lo > B_REL_TOL * hi {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if side(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let b = hi;
    let inv = phi.inverse(v_star)? - phi.inverse(phi.at_zero())?;
    let residual = phi.inverse_conjugate(b)? - b * w_star + inv;
    if !(residual.abs() <= B_RESIDUAL_TOL * (1.0 + b * w_star + inv.abs())) {
        return Err(Error::NoRoot {
            lo: B_BRACKET.0,
            hi: B_BRACKET.1,
        });
    }
    Ok(b)
}

/// `u₁ = const + gamma_coef · γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticLeg1 {
    #[serde(rename = "const")]
    pub constant: f64,
    pub gamma_coef: f64,
}

/// `u₂ = gamma_coef · γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticLeg2 {
    pub gamma_coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub a_star: f64,
    pub b_star: f64,
    pub u1: StaticLeg1,
    pub u2: StaticLeg2,
    /// Constant delta position `Δ`.
    pub delta: f64,
    /// Constant `Γ` on the forward `γ(s₂) − γ(s₁) − φ⁻¹(v)`.
    pub gamma_weight: f64,
}

impl Portfolio {
    /// `μ₁[u₁] + μ₂[u₂]`.
    pub fn price(&self, mu1: &PieceMeasure, mu2: &PieceMeasure, spec: &GainSpec) -> Result<f64> {
        let gamma = spec.gamma();
        let (g1, g2) = (gamma.integrate(mu1)?, gamma.integrate(mu2)?);
        Ok(self.u1.constant + self.u1.gamma_coef * g1 + self.u2.gamma_coef * g2)
    }

    /// Payoff minus `v` at one state; `None` when `v < φ(0)` is not a gain.
    pub fn slack(&self, spec: &GainSpec, s1: f64, s2: f64, v: f64) -> Option<f64> {
        let gamma = spec.gamma();
        let inv = spec.phi().inverse(v).ok()?;
        let (g1, g2) = (gamma.eval(s1), gamma.eval(s2));
        let u1 = self.u1.constant + self.u1.gamma_coef * g1;
        let u2 = self.u2.gamma_coef * g2;
        Some(u1 + u2 + self.delta * (s2 - s1) + self.gamma_weight * (g2 - g1 - inv) - v)
    }
}

/// The classical portfolio `a = 1/b*`, `u₁ = v* − a φ⁻¹(v*) − a γ`, `u₂ = a γ`, `Δ = 0`, `Γ = −a`.
pub fn build_portfolio(mu1: &PieceMeasure, mu2: &PieceMeasure, spec: &GainSpec) -> Result<Portfolio> {
    let gamma = spec.gamma();
    let spread = gamma.integrate(mu2)? - gamma.integrate(mu1)?;
    let v_star = spec.phi().eval(spread);
    let b_star = solve_b_star(spec, v_star)?;
    Portfolio::classical(1.0 / b_star, b_star, v_star, spec)
}

impl Portfolio {
    /// The classical portfolio for an arbitrary loading `a > 0`; valid only for `a = 1/b*`.
    pub fn with_a_star(a_star: f64, v_star: f64, spec: &GainSpec) -> Result<Self> {
        Self::classical(a_star, 1.0 / a_star, v_star, spec)
    }

    fn classical(a_star: f64, b_star: f64, v_star: f64, spec: &GainSpec) -> Result<Self> {
        Ok(Portfolio {
            a_star,
            b_star,
            u1: StaticLeg1 {
                constant: v_star - a_star * spec.phi().inverse(v_star)?,
                gamma_coef: -a_star,
            },
            u2: StaticLeg2 { gamma_coef: a_star },
            delta: 0.0,
            gamma_weight: -a_star,
        })
    }
}

/// States `(s₁, s₂, v)` on a product lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub v: Vec<f64>,
}

impl Grid {
    /// `n` equally spaced points per axis, endpoints included.
    pub fn lattice(s: (f64, f64), v: (f64, f64), n: usize) -> Self {
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            if n <= 1 {
                return vec![lo];
            }
            (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
        };
        Self {
            s1: axis(s),
            s2: axis(s),
            v: axis(v),
        }
    }
}

/// Smallest slack over the grid; `+∞` when the grid holds no valid state.
///
/// A valid portfolio has worst slack `≥ 0` up to rounding.
pub fn verify_superrep(portfolio: &Portfolio, spec: &GainSpec, grid: &Grid) -> f64 {
    let domain = spec.gamma().domain();
    grid.s1
        .par_iter()
        .filter(|&&s1| domain.contains(s1))
        .map(|&s1| {
            let mut worst = f64::INFINITY;
            for &s2 in grid.s2.iter().filter(|&&s| domain.contains(s)) {
                for &v in &grid.v {
                    if let Some(s) = portfolio.slack(spec, s1, s2, v) {
                        worst = worst.min(s);
                    }
                }
            }
            worst
        })
        .reduce(|| f64::INFINITY, f64::min)
}
