//! Linear programs over discrete martingale couplings and constrained submeasures.

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::measure::{DiscreteMarginal, PieceMeasure};

use super::simplex;

/// Largest `n·m` accepted by [`CouplingPolytope::lp_max`].
pub const LP_SIZE_CAP: usize = 10_000;

/// Martingale couplings `π ≥ 0` of two discrete marginals.
///
/// Variables are `π[i][j]`, stored row-major at `i·m + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPolytope {
    mu1: DiscreteMarginal,
    mu2: DiscreteMarginal,
}

impl CouplingPolytope {
    pub fn new(mu1: DiscreteMarginal, mu2: DiscreteMarginal) -> Self {
        Self { mu1, mu2 }
    }

    /// Requires `mu2` to be purely atomic.
    pub fn from_measures(mu1: &DiscreteMarginal, mu2: &PieceMeasure) -> Result<Self> {
        Ok(Self::new(mu1.clone(), DiscreteMarginal::from_measure(mu2)?))
    }

    pub fn first(&self) -> &DiscreteMarginal {
        &self.mu1
    }

    pub fn second(&self) -> &DiscreteMarginal {
        &self.mu2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mu1.len(), self.mu2.len())
    }

    /// Row sums, column sums and the centred martingale rows `Σ_j π_ij (b_j - a_i) = 0`.
    pub fn constraints(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (n, m) = self.shape();
        let (a1, p) = (self.mu1.atoms(), self.mu1.weights());
        let (b2, w) = (self.mu2.atoms(), self.mu2.weights());
        let mut rows = Vec::with_capacity(2 * n + m);
        let mut rhs = Vec::with_capacity(2 * n + m);
        for i in 0..n {
            let mut r = vec![0.0; n * m];
            r[i * m..(i + 1) * m].iter_mut().for_each(|v| *v = 1.0);
            rows.push(r);
            rhs.push(p[i]);
        }
        for j in 0..m {
            let mut r = vec![0.0; n * m];
            (0..n).for_each(|i| r[i * m + j] = 1.0);
            rows.push(r);
            rhs.push(w[j]);
        }
        for i in 0..n {
            let mut r = vec![0.0; n * m];
            for j in 0..m {
                r[i * m + j] = b2[j] - a1[i];
            }
            rows.push(r);
            rhs.push(0.0);
        }
        (rows, rhs)
    }

    /// Largest violation of the equality constraints at the flat plan `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let (a, b) = self.constraints();
        a.iter()
            .zip(&b)
            .map(|(row, rhs)| (row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - rhs).abs())
            .fold(0.0, f64::max)
    }

    pub fn unflatten(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.chunks(self.mu2.len()).map(<[f64]>::to_vec).collect()
    }

    /// Optimal value and plan for the linear objective `Σ cost[i][j] π[i][j]`.
    pub fn lp_max(&self, cost: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        let (n, m) = self.shape();
        if n * m > LP_SIZE_CAP {
            return Err(Error::SupportTooLarge {
                n: n * m,
                cap: LP_SIZE_CAP,
            });
        }
        if cost.len() != n || cost.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidSpec(format!("objective must be {n}×{m}")));
        }
        let (a, b) = self.constraints();
        let c: Vec<f64> = cost.iter().flatten().copied().collect();
        let sol = simplex::maximize(&a, &b, &c)?;
        Ok((sol.value, self.unflatten(&sol.x)))
    }

    pub fn to_coupling(&self, plan: &[Vec<f64>]) -> Result<Coupling> {
        Coupling::from_plan(&self.mu1, self.mu2.atoms(), plan)
    }
}

/// `Σ_j cost_j μ_j` optimized over `0 ≤ μ ≤ w` with `Σ μ_j = mass`, `Σ μ_j x_j = moment`.
///
/// Returns the maximum and a maximizer.
pub fn submeasure_lp(
    atoms: &[f64],
    weights: &[f64],
    mass: f64,
    moment: f64,
    cost: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let k = atoms.len();
    if weights.len() != k || cost.len() != k {
        return Err(Error::InvalidSpec("atoms, weights and costs differ in length".into()));
    }
    // Variables: μ_0..μ_{k-1}, then slacks s_j = w_j - μ_j.
    let mut a = Vec::with_capacity(k + 2);
    for j in 0..k {
        let mut r = vec![0.0; 2 * k];
        r[j] = 1.0;
        r[k + j] = 1.0;
        a.push(r);
    }
    let mut r = vec![0.0; 2 * k];
    r[..k].iter_mut().for_each(|v| *v = 1.0);
    a.push(r);
    let mut r = vec![0.0; 2 * k];
    r[..k].copy_from_slice(atoms);
    a.push(r);
    let mut b = weights.to_vec();
    b.push(mass);
    b.push(moment);
    let mut c = cost.to_vec();
    c.extend(std::iter::repeat(0.0).take(k));
    let sol = simplex::maximize(&a, &b, &c)?;
    Ok((sol.value, sol.x[..k].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curtain::is_curtain;
    use crate::measure::DomainInterval;

    fn disc(atoms: Vec<f64>, weights: Vec<f64>) -> DiscreteMarginal {
        DiscreteMarginal::new(DomainInterval::real_line(), atoms, weights).unwrap()
    }

    /// μ₁ on {d, u} and μ₂ on {D, U} admit exactly one martingale coupling.
    #[test]
    fn unique_coupling_regardless_of_objective() {
        let (dd, d, u, uu) = (0.5, 0.9, 1.2, 2.0);
        // Pick μ₂ weights so the means agree and each row is a D/U split.
        let p = 0.4;
        let q_d = p * (uu - d) / (uu - dd) + (1.0 - p) * (uu - u) / (uu - dd);
        let poly = CouplingPolytope::new(disc(vec![d, u], vec![p, 1.0 - p]), disc(vec![dd, uu], vec![q_d, 1.0 - q_d]));
        let mut plans = Vec::new();
        for cost in [
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![-3.0, 2.0], vec![5.0, -1.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        ] {
            let (_, plan) = poly.lp_max(&cost).unwrap();
            plans.push(plan);
        }
        for plan in &plans {
            for (r, s) in plan.iter().flatten().zip(plans[0].iter().flatten()) {
                assert!((r - s).abs() < 1e-12);
            }
        }
        let x: Vec<f64> = plans[0].iter().flatten().copied().collect();
        assert!(poly.residual(&x) <= 1e-12);
        assert!((plans[0][0][0] - p * (uu - d) / (uu - dd)).abs() < 1e-12);
    }

    #[test]
    fn zero_objective_is_feasible() {
        let poly = CouplingPolytope::new(
            disc(vec![-1.0, 1.0], vec![0.5, 0.5]),
            disc(vec![-2.0, 0.0, 2.0], vec![0.25, 0.5, 0.25]),
        );
        let (v, plan) = poly.lp_max(&vec![vec![0.0; 3]; 2]).unwrap();
        assert_eq!(v, 0.0);
        let x: Vec<f64> = plan.concat();
        assert!(poly.residual(&x) <= 1e-12, "{x:?} {}", poly.residual(&x));
    }

    #[test]
    fn not_in_convex_order_is_infeasible() {
        let poly = CouplingPolytope::new(
            disc(vec![-2.0, 2.0], vec![0.5, 0.5]),
            disc(vec![-1.0, 1.0], vec![0.5, 0.5]),
        );
        assert_eq!(poly.lp_max(&vec![vec![0.0; 2]; 2]), Err(Error::Infeasible));
    }

    #[test]
    fn tensor_objective_gives_a_curtain() {
        let poly = CouplingPolytope::new(
            disc(vec![-1.0, 0.0, 1.0], vec![0.3, 0.3, 0.4]),
            disc(vec![-3.0, -1.5, -0.5, 0.5, 2.0, 3.0], vec![0.1, 0.2, 0.2, 0.2, 0.2, 0.1]),
        );
        let g = [0.75, 0.375, 0.1875];
        let cost: Vec<Vec<f64>> = g
            .iter()
            .map(|gi| poly.second().atoms().iter().map(|b| gi * b * b).collect())
            .collect();
        let (_, plan) = poly.lp_max(&cost).unwrap();
        assert!(is_curtain(&poly.to_coupling(&plan).unwrap()));
    }

    #[test]
    fn weak_duality_on_two_by_two() {
        // Exact rational data: a dual point (α, β, h) with α_i + β_j + h_i (b_j - a_i) ≥ c_ij.
        let poly = CouplingPolytope::new(
            disc(vec![-1.0, 1.0], vec![0.5, 0.5]),
            disc(vec![-2.0, 2.0], vec![0.5, 0.5]),
        );
        let cost = vec![vec![1.0, 2.0], vec![3.0, 0.0]];
        let (v, _) = poly.lp_max(&cost).unwrap();
        // α = 0, β = (3, 2), h = 0 dominates every cost entry.
        let dual = 0.5 * 3.0 + 0.5 * 2.0;
        assert!(v <= dual + 1e-12);
        // The unique coupling: -1 -> (3/4, 1/4), 1 -> (1/4, 3/4).
        assert!((v - (0.5 * (0.75 * 1.0 + 0.25 * 2.0) + 0.5 * (0.25 * 3.0))).abs() < 1e-12);
    }

    #[test]
    fn submeasure_program() {
        // Largest ∫ x² over submeasures of mass 1/2 and moment 0 of uniform weights on {-2,-1,0,1,2}.
        let atoms = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = [0.2; 5];
        let cost: Vec<f64> = atoms.iter().map(|x| x * x).collect();
        let (v, mu) = submeasure_lp(&atoms, &w, 0.5, 0.0, &cost).unwrap();
        assert!((v - 1.7).abs() < 1e-12, "{v} {mu:?}");
        assert!(submeasure_lp(&atoms, &w, 0.5, 0.9, &cost).is_err());
    }
}
