//! The non-linear problem `max Σᵢ pᵢ φ(νᵢ[γ] − γ(aᵢ))` over martingale couplings.
//!
//! The attainable vectors `(νᵢ[γ])ᵢ` form the convex hull of the vectors of the
//! curtain couplings ([`VertexSet`]); the problem becomes concave maximization
//! over that polytope.

mod approx;
mod finite;
mod two_point;

pub use approx::{approx_solve, ApproxReport, LevelResult};
pub use finite::{frank_wolfe_gap, solve_finite, SolveOptions};
pub use two_point::solve_two_point;

pub use crate::coupling::mix;

use std::collections::HashSet;

use serde::Serialize;

use crate::coupling::Coupling;
use crate::curtain::enumerate_curtains;
use crate::error::{Error, Result};
use crate::gain::GainSpec;
use crate::measure::{DiscreteMarginal, Integrand, PieceMeasure};

/// Tolerance of [`check_flat`].
pub const FLAT_TOL: f64 = 1e-8;
/// Vertex deduplication grid.
pub const VERTEX_GRID: f64 = 1e-9;
const JENSEN_TOL: f64 = 1e-10;

/// `J(ν) = Σᵢ pᵢ φ(νᵢ[γ] − γ(aᵢ))`.
pub fn evaluate_j(coupling: &Coupling, spec: &GainSpec) -> Result<f64> {
    let gamma = spec.gamma();
    let first = coupling.first();
    let integrals = coupling.row_integrals(gamma)?;
    let mut total = 0.0;
    for ((&a, &p), u) in first.atoms().iter().zip(first.weights()).zip(integrals) {
        total += p * spec.conditional_gain(u, gamma.eval(a))?;
    }
    Ok(total)
}

/// `Σᵢ pᵢ φ(xᵢ − γ(aᵢ))` with negative gains clamped to zero.
pub fn objective(x: &[f64], weights: &[f64], gamma_at_atoms: &[f64], spec: &GainSpec) -> f64 {
    let phi = spec.phi();
    x.iter()
        .zip(weights)
        .zip(gamma_at_atoms)
        .map(|((&xi, &p), &g)| p * phi.eval(xi - g))
        .sum()
}

/// `φ(μ₂[γ] − μ₁[γ])` and, for a discrete `μ₁`, the point `x₀ = (γ(aᵢ) + μ₂[γ] − μ₁[γ])ᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBound {
    pub value: f64,
    /// `μ₂[γ] − μ₁[γ]`.
    pub spread: f64,
    pub x0: Option<Vec<f64>>,
}

pub fn upper_bound(mu1: &PieceMeasure, mu2: &PieceMeasure, spec: &GainSpec) -> Result<UpperBound> {
    let gamma = spec.gamma();
    let spread = gamma.integrate(mu2)? - gamma.integrate(mu1)?;
    let x0 = mu1
        .is_discrete()
        .then(|| mu1.atoms().iter().map(|&(a, _)| gamma.eval(a) + spread).collect());
    Ok(UpperBound {
        value: spec.phi().eval(spread),
        spread,
        x0,
    })
}

/// [`upper_bound`] for a discrete first marginal.
pub fn upper_bound_discrete(mu1: &DiscreteMarginal, mu2: &PieceMeasure, spec: &GainSpec) -> Result<UpperBound> {
    let gamma = spec.gamma();
    let spread = gamma.integrate(mu2)? - gamma.integrate(&mu1.to_measure())?;
    Ok(UpperBound {
        value: spec.phi().eval(spread),
        spread,
        x0: Some(mu1.atoms().iter().map(|&a| gamma.eval(a) + spread).collect()),
    })
}

/// Whether the conditional gain `νᵢ[γ] − γ(aᵢ)` is the same for every atom.
pub fn check_flat(coupling: &Coupling, spec: &GainSpec) -> Result<bool> {
    Ok(flat_spread(coupling, spec)? <= FLAT_TOL)
}

/// `maxᵢ |(νᵢ[γ] − γ(aᵢ)) − (μ₂[γ] − μ₁[γ])|`.
pub fn flat_spread(coupling: &Coupling, spec: &GainSpec) -> Result<f64> {
    let gamma = spec.gamma();
    let first = coupling.first();
    let gains: Vec<f64> = coupling
        .row_integrals(gamma)?
        .iter()
        .zip(first.atoms())
        .map(|(u, &a)| u - gamma.eval(a))
        .collect();
    let mean: f64 = gains.iter().zip(first.weights()).map(|(g, p)| g * p).sum();
    Ok(gains.iter().map(|g| (g - mean).abs()).fold(0.0, f64::max))
}

/// The vectors `(c₁[γ], …, c_n[γ])` of all distinct curtain couplings `c`.
#[derive(Debug, Clone, Serialize)]
pub struct VertexSet {
    pub vertices: Vec<Vec<f64>>,
    pub couplings: Vec<Coupling>,
    /// First permutation (0-based, lexicographic) producing each vertex.
    pub orders: Vec<Vec<usize>>,
    pub gamma_at_atoms: Vec<f64>,
}

impl VertexSet {
    pub fn build(mu1: &DiscreteMarginal, mu2: &PieceMeasure, spec: &GainSpec, cap: usize) -> Result<Self> {
        let gamma = spec.gamma();
        let gamma_at_atoms: Vec<f64> = mu1.atoms().iter().map(|&a| gamma.eval(a)).collect();
        let mut seen = HashSet::new();
        let mut set = VertexSet {
            vertices: Vec::new(),
            couplings: Vec::new(),
            orders: Vec::new(),
            gamma_at_atoms,
        };
        for (c, order) in enumerate_curtains(mu1, mu2, cap)? {
            let v = c.row_integrals(gamma)?;
            for (&vi, &gi) in v.iter().zip(&set.gamma_at_atoms) {
                if vi < gi - JENSEN_TOL * (1.0 + gi.abs()) {
                    return Err(Error::NegativeGain(vi - gi));
                }
            }
            let key: Vec<i64> = v.iter().map(|x| (x / VERTEX_GRID).round() as i64).collect();
            if seen.insert(key) {
                set.vertices.push(v);
                set.couplings.push(c);
                set.orders.push(order);
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `Σ_c ρ_c e_c`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let n = self.gamma_at_atoms.len();
        let mut x = vec![0.0; n];
        for (v, &w) in self.vertices.iter().zip(weights) {
            if w != 0.0 {
                for i in 0..n {
                    x[i] += w * v[i];
                }
            }
        }
        x
    }

    /// Row-wise mixture of the couplings with positive weight.
    pub fn mix(&self, weights: &[f64]) -> Result<Coupling> {
        let (cs, ws): (Vec<&Coupling>, Vec<f64>) = self
            .couplings
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(c, &w)| (c, w))
            .unzip();
        let total: f64 = ws.iter().sum();
        let ws: Vec<f64> = ws.iter().map(|w| w / total).collect();
        mix(&cs, &ws)
    }
}

/// Optimum of the finite-dimensional problem.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub value: f64,
    /// Convex weights over the curtain couplings listed in `orders`.
    pub weights: Vec<f64>,
    pub orders: Vec<Vec<usize>>,
    pub x: Vec<f64>,
    pub coupling: Coupling,
    pub flat: bool,
    pub upper_bound: f64,
    /// `upper_bound − value`.
    pub gap: f64,
    /// Frank–Wolfe duality gap at the returned point, when it was iterated.
    pub fw_gap: Option<f64>,
    pub iterations: usize,
}
