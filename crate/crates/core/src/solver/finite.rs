use serde::{Deserialize, Serialize};

use crate::curtain::{ensure_convex_order, DEFAULT_ENUM_CAP};
use crate::error::Result;
use crate::gain::GainSpec;
use crate::measure::{DiscreteMarginal, PieceMeasure};
use crate::oracle::{hull_membership, HULL_TOL};
use crate::Sense;

use super::{check_flat, objective, upper_bound_discrete, SolveResult, VertexSet};

const LINE_SEARCH_STEPS: usize = 200;
const MIN_TIE_TOL: f64 = 1e-12;

/// Caps and tolerances of the finite solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub enum_cap: usize,
    pub fw_tol: f64,
    pub fw_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            enum_cap: DEFAULT_ENUM_CAP,
            fw_tol: 1e-9,
            fw_max_iter: 100_000,
        }
    }
}

/// `∇ₓ G(x) = (pᵢ φ'(xᵢ − γ(aᵢ)))ᵢ`.
fn x_gradient(x: &[f64], p: &[f64], g: &[f64], spec: &GainSpec) -> Vec<f64> {
    let phi = spec.phi();
    x.iter()
        .zip(p)
        .zip(g)
        .map(|((&xi, &pi), &gi)| pi * phi.derivative(xi - gi))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Frank–Wolfe gap `max_c ∇G(x)·(e_c − x)` at `x`.
pub fn frank_wolfe_gap(set: &VertexSet, weights_p: &[f64], x: &[f64], spec: &GainSpec) -> f64 {
    let w = x_gradient(x, weights_p, &set.gamma_at_atoms, spec);
    let base = dot(&w, x);
    set.vertices
        .iter()
        .map(|v| dot(&w, v) - base)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact line search of the concave `t ↦ G(x + t d)` on `[0, t_max]`.
fn line_search(x: &[f64], d: &[f64], t_max: f64, p: &[f64], g: &[f64], spec: &GainSpec) -> f64 {
    let at = |t: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + t * b).collect() };
    let slope = |t: f64| dot(&x_gradient(&at(t), p, g, spec), d);
    if slope(t_max) >= 0.0 {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..LINE_SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (vl, vh) = (objective(&at(lo), p, g, spec), objective(&at(hi), p, g, spec));
    if vh >= vl {
        hi
    } else {
        lo
    }
}

/// Away-step Frank–Wolfe over the simplex of vertex weights.
fn frank_wolfe(set: &VertexSet, p: &[f64], spec: &GainSpec, opts: &SolveOptions) -> (Vec<f64>, usize) {
    let g = &set.gamma_at_atoms;
    let k = set.len();
    let start = (0..k)
        .map(|c| (c, objective(&set.vertices[c], p, g, spec)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    let mut rho = vec![0.0; k];
    rho[start] = 1.0;
    let mut x = set.vertices[start].clone();
    let mut iterations = 0;
    while iterations < opts.fw_max_iter {
        iterations += 1;
        let w = x_gradient(&x, p, g, spec);
        let scores: Vec<f64> = set.vertices.iter().map(|v| dot(&w, v)).collect();
        let base = dot(&w, &x);
        let s = (0..k).fold(0, |b, c| if scores[c] > scores[b] { c } else { b });
        let fw_gap = scores[s] - base;
        let value = objective(&x, p, g, spec);
        if fw_gap <= opts.fw_tol * (1.0 + value.abs()) {
            break;
        }
        let away = (0..k)
            .filter(|&c| rho[c] > 0.0)
            .fold(None, |b: Option<usize>, c| match b {
                Some(b) if scores[b] <= scores[c] => Some(b),
                _ => Some(c),
            })
            .expect("support is never empty");
        let away_gap = base - scores[away];
        let (d, t_max, toward) = if fw_gap >= away_gap || rho[away] >= 1.0 {
            let d: Vec<f64> = set.vertices[s].iter().zip(&x).map(|(v, x)| v - x).collect();
            (d, 1.0, true)
        } else {
            let d: Vec<f64> = x.iter().zip(&set.vertices[away]).map(|(x, v)| x - v).collect();
            (d, rho[away] / (1.0 - rho[away]), false)
        };
        let t = line_search(&x, &d, t_max, p, g, spec);
        if t <= 0.0 {
            break;
        }
        if toward {
            rho.iter_mut().for_each(|r| *r *= 1.0 - t);
            rho[s] += t;
        } else {
            rho.iter_mut().for_each(|r| *r *= 1.0 + t);
            rho[away] -= t;
            if t >= t_max || rho[away] < 1e-15 {
                rho[away] = 0.0;
            }
        }
        let total: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|r| *r /= total);
        x = set.combine(&rho);
    }
    (rho, iterations)
}

/// Solves the problem over the convex hull of the curtain vectors.
///
/// `Sense::Max` returns `x₀` directly when it is attainable, and otherwise
/// runs away-step Frank–Wolfe; `Sense::Min` returns the best vertex, ties
/// going to the lexicographically first permutation.
pub fn solve_finite(
    mu1: &DiscreteMarginal,
    mu2: &PieceMeasure,
    spec: &GainSpec,
    sense: Sense,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    ensure_convex_order(mu1, mu2)?;
    let set = VertexSet::build(mu1, mu2, spec, opts.enum_cap)?;
    let p = mu1.weights();
    let g = &set.gamma_at_atoms;
    let bound = upper_bound_discrete(mu1, mu2, spec)?;

    let (weights, fw_gap, iterations) = match sense {
        Sense::Min => {
            let mut best = (0, objective(&set.vertices[0], p, g, spec));
            for c in 1..set.len() {
                let v = objective(&set.vertices[c], p, g, spec);
                if v < best.1 - MIN_TIE_TOL {
                    best = (c, v);
                }
            }
            let mut w = vec![0.0; set.len()];
            w[best.0] = 1.0;
            (w, None, 0)
        }
        Sense::Max => {
            let x0 = bound.x0.as_ref().expect("discrete first marginal");
            match hull_membership(&set.vertices, x0, HULL_TOL)? {
                Some(w) => (w, None, 0),
                None => {
                    let (w, it) = frank_wolfe(&set, p, spec, opts);
                    let x = set.combine(&w);
                    (w, Some(frank_wolfe_gap(&set, p, &x, spec)), it)
                }
            }
        }
    };
    let x = if fw_gap.is_none() && sense == Sense::Max {
        bound.x0.clone().expect("discrete first marginal")
    } else {
        set.combine(&weights)
    };
    let value = objective(&x, p, g, spec);
    let coupling = set.mix(&weights)?;
    let flat = check_flat(&coupling, spec)?;
    Ok(SolveResult {
        value,
        weights,
        orders: set.orders.clone(),
        x,
        coupling,
        flat,
        upper_bound: bound.value,
        gap: bound.value - value,
        fw_gap,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::{Gamma, Phi};
    use crate::measure::{DomainInterval, Piece};
    use crate::solver::evaluate_j;

    fn line() -> DomainInterval {
        DomainInterval::real_line()
    }

    fn example() -> (DiscreteMarginal, PieceMeasure) {
        (
            DiscreteMarginal::new(line(), vec![-1.0, 0.0, 1.0], vec![1.0 / 3.0; 3]).unwrap(),
            PieceMeasure::new(
                line(),
                vec![Piece::uniform(-2.0, -1.0, 0.5), Piece::uniform(1.0, 2.0, 0.5)],
            )
            .unwrap(),
        )
    }

    #[test]
    fn max_and_min_bracket_every_vertex() {
        let (mu1, mu2) = example();
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        let opts = SolveOptions::default();
        let max = solve_finite(&mu1, &mu2, &spec, Sense::Max, &opts).unwrap();
        let min = solve_finite(&mu1, &mu2, &spec, Sense::Min, &opts).unwrap();
        let set = VertexSet::build(&mu1, &mu2, &spec, 9).unwrap();
        for v in &set.vertices {
            let j = objective(v, mu1.weights(), &set.gamma_at_atoms, &spec);
            assert!(j <= max.value + 1e-9);
            assert!(min.value <= j + 1e-10);
        }
        assert!(max.value <= max.upper_bound + 1e-9);
        assert!((evaluate_j(&max.coupling, &spec).unwrap() - max.value).abs() < 1e-10);
        max.coupling.check_second_marginal(&mu2).unwrap();
        let w: f64 = max.weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_marginals() {
        let (mu1, _) = example();
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        let r = solve_finite(&mu1, &mu1.to_measure(), &spec, Sense::Max, &SolveOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.flat);
    }
}
