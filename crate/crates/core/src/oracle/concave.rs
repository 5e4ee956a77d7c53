//! Direct maximization of the non-linear objective over discrete couplings.
//!
//! Projected gradient ascent on `{π ≥ 0, Aπ = b}`: directions are projected
//! onto the null space of the equality constraints plus the currently active
//! bounds. When that projection vanishes, a small LP finds the steepest
//! feasible direction, which either leaves the face or certifies a KKT point.
//! Steps use an exact line search on the concave one-dimensional restriction.
//!
//! The best restart is then polished by outer approximation: `φ` is replaced
//! by the minimum of its tangents, the resulting LP is solved, and tangents
//! at the new row gains are added until the LP bound meets the attained value.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gain::GainSpec;

use super::polytope::CouplingPolytope;
use super::simplex::{self, FEASIBILITY_TOL};

pub const DEFAULT_RESTARTS: usize = 20;
/// Stop once the projected gradient is this small.
pub const PG_TOL: f64 = 1e-10;
const MAX_ITER: usize = 20_000;
const ZERO_TOL: f64 = 1e-13;
const RANK_TOL: f64 = 1e-10;
const LINE_SEARCH_STEPS: usize = 100;
/// Stop polishing once the LP bound exceeds the attained value by at most this, relatively.
pub const POLISH_TOL: f64 = 1e-11;
const POLISH_MAX_ITER: usize = 200;
const INITIAL_TANGENTS: usize = 12;
/// Tangents closer to zero than this (relative to the gain range) are skipped; `φ'` may blow up there.
const TANGENT_FLOOR: f64 = 1e-9;

/// Largest instance accepted by [`direct_concave_max`].
pub const MAX_FIRST: usize = 4;
pub const MAX_SECOND: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcaveMax {
    pub value: f64,
    pub plan: Vec<Vec<f64>>,
    /// Restart that produced the best ascent value.
    pub restart: usize,
    /// Certified upper bound from the outer approximation.
    pub upper: f64,
}

struct Objective<'a> {
    spec: &'a GainSpec,
    p: Vec<f64>,
    gamma_a: Vec<f64>,
    gamma_b: Vec<f64>,
    m: usize,
}

impl Objective<'_> {
    fn gains(&self, x: &[f64]) -> Vec<f64> {
        (0..self.p.len())
            .map(|i| {
                let row = &x[i * self.m..(i + 1) * self.m];
                let u: f64 = row.iter().zip(&self.gamma_b).map(|(a, g)| a * g).sum::<f64>() / self.p[i];
                u - self.gamma_a[i]
            })
            .collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let phi = self.spec.phi();
        self.gains(x).iter().zip(&self.p).map(|(&u, p)| p * phi.eval(u)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.spec.phi();
        let d: Vec<f64> = self.gains(x).iter().map(|&u| phi.derivative(u)).collect();
        let mut g = vec![0.0; x.len()];
        for (i, di) in d.iter().enumerate() {
            for j in 0..self.m {
                g[i * self.m + j] = di * self.gamma_b[j];
            }
        }
        g
    }
}

/// Orthonormal basis of the null space of the rows of `m` (columns of the result).
fn null_space(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let r = rows.len();
    // Zero-padded to square so the SVD returns a full set of right singular vectors.
    let size = n.max(r);
    let mat = DMatrix::from_fn(size, n, |i, j| if i < r { rows[i][j] } else { 0.0 });
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= RANK_TOL * smax)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, k| v_t[(keep[k], i)])
}

/// Best feasible direction `max gᵀd` subject to `Ad = 0`, `d_k ≥ 0` on active bounds, `|d| ≤ 1`.
fn steepest_feasible_direction(a: &[Vec<f64>], active: &[usize], g: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = g.len();
    // d = z - offset with offset 0 on active coordinates and 1 elsewhere; z ≤ ub via slacks.
    let offset: Vec<f64> = (0..n).map(|k| if active.contains(&k) { 0.0 } else { 1.0 }).collect();
    let mut rows = Vec::with_capacity(a.len() + n);
    let mut rhs = Vec::with_capacity(a.len() + n);
    for r in a {
        let mut row = r.clone();
        row.extend(std::iter::repeat_n(0.0, n));
        rhs.push(dot(r, &offset));
        rows.push(row);
    }
    for k in 0..n {
        let mut row = vec![0.0; 2 * n];
        row[k] = 1.0;
        row[n + k] = 1.0;
        rows.push(row);
        rhs.push(1.0 + offset[k]);
    }
    let mut c = g.to_vec();
    c.extend(std::iter::repeat_n(0.0, n));
    let sol = simplex::maximize(&rows, &rhs, &c)?;
    let d: Vec<f64> = (0..n).map(|k| sol.x[k] - offset[k]).collect();
    Ok((dot(g, &d), d))
}

fn project(basis: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let gv = DVector::from_column_slice(g);
    let coeffs = basis.transpose() * &gv;
    (basis * coeffs).as_slice().to_vec()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact line search for the concave map `t ↦ f(x + t d)` on `[0, t_max]`.
fn line_search(obj: &Objective, x: &[f64], d: &[f64], t_max: f64) -> f64 {
    let slope = |t: f64| {
        let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        dot(&obj.gradient(&y), d)
    };
    if slope(t_max) >= 0.0 {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..LINE_SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * t_max {
            break;
        }
    }
    // Keep whichever end is better; the objective may be flat near the optimum.
    let at = |t: f64| {
        let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        obj.value(&y)
    };
    if at(hi) >= at(lo) {
        hi
    } else {
        lo
    }
}

fn ascend(obj: &Objective, a: &[Vec<f64>], start: Vec<f64>) -> Result<Vec<f64>> {
    let n = start.len();
    let mut x = start;
    for _ in 0..MAX_ITER {
        let active: Vec<usize> = (0..n).filter(|&k| x[k] <= ZERO_TOL).collect();
        let mut rows = a.to_vec();
        for &k in &active {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            rows.push(e);
        }
        let g = obj.gradient(&x);
        let mut d = project(&null_space(&rows, n), &g);
        if dot(&d, &d).sqrt() <= PG_TOL {
            // Stationary on the current face: leave it if some bound blocks an ascent direction.
            let (gain, dir) = steepest_feasible_direction(a, &active, &g)?;
            if gain <= PG_TOL {
                break;
            }
            d = dir;
        }
        let t_max = (0..n)
            .filter(|&k| d[k] < 0.0)
            .map(|k| x[k] / -d[k])
            .fold(f64::INFINITY, f64::min);
        let t_max = if t_max.is_finite() { t_max } else { 1.0 / dot(&d, &d).sqrt() };
        let t = line_search(obj, &x, &d, t_max);
        if t <= 0.0 {
            break;
        }
        for k in 0..n {
            x[k] += t * d[k];
            if x[k] < ZERO_TOL {
                x[k] = 0.0;
            }
        }
    }
    Ok(x)
}

/// Tangent `(slope, intercept)` of `φ` at `u`; lies above `φ` everywhere by concavity.
fn tangent(obj: &Objective, u: f64) -> (f64, f64) {
    let phi = obj.spec.phi();
    let d = phi.derivative(u);
    (d, phi.eval(u) - d * u)
}

/// Outer approximation started from tangents at `x` and on a grid of attainable gains.
///
/// Returns the best plan seen and the final LP bound, which dominates the true maximum.
fn polish(obj: &Objective, poly: &CouplingPolytope, x: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let (n, m) = (obj.p.len(), obj.m);
    let nm = n * m;
    let (a, rhs) = poly.constraints();
    let g_max = obj.gamma_b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cuts: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..n {
        let top = g_max - obj.gamma_a[i];
        if top <= 0.0 {
            cuts.push((i, 0.0, obj.spec.phi().at_zero()));
            continue;
        }
        for k in 1..=INITIAL_TANGENTS {
            let (d, c) = tangent(obj, top * k as f64 / INITIAL_TANGENTS as f64);
            cuts.push((i, d, c));
        }
    }
    let u_top: Vec<f64> = obj.gamma_a.iter().map(|ga| (g_max - ga).max(0.0)).collect();
    let add_at = |cuts: &mut Vec<(usize, f64, f64)>, x: &[f64]| {
        for (i, u) in obj.gains(x).into_iter().enumerate() {
            if u > TANGENT_FLOOR * (1.0 + u_top[i]) {
                let (d, c) = tangent(obj, u);
                cuts.push((i, d, c));
            }
        }
    };
    add_at(&mut cuts, &x);
    let mut best_value = obj.value(&x);
    let mut best = x;
    let mut upper = f64::INFINITY;
    for _ in 0..POLISH_MAX_ITER {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let plan_vars: Vec<Variable> = (0..nm).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        let s: Vec<Variable> = obj.p.iter().map(|&p| lp.add_var(p, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        for (row, &b) in a.iter().zip(&rhs) {
            let expr: Vec<(Variable, f64)> = plan_vars.iter().zip(row).filter(|(_, &c)| c != 0.0).map(|(&v, &c)| (v, c)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, b);
        }
        for &(i, d, c) in &cuts {
            // s_i <= c + d (Σⱼ πᵢⱼ γ(bⱼ)/pᵢ - γ(aᵢ))
            let mut expr: Vec<(Variable, f64)> = (0..m).map(|j| (plan_vars[i * m + j], -d * obj.gamma_b[j] / obj.p[i])).collect();
            expr.push((s[i], 1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, c - d * obj.gamma_a[i]);
        }
        let sol = match lp.solve() {
            Ok(outcome) => outcome.into_solution().map_err(|_| Error::IterationLimit(POLISH_MAX_ITER))?,
            Err(microlp::Error::Unbounded) => return Err(Error::Unbounded),
            Err(_) => return Err(Error::Infeasible),
        };
        upper = upper.min(sol.objective());
        let plan: Vec<f64> = plan_vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
        if poly.residual(&plan) <= FEASIBILITY_TOL {
            let value = obj.value(&plan);
            if value > best_value {
                best_value = value;
                best = plan.clone();
            }
        }
        if upper - best_value <= POLISH_TOL * (1.0 + best_value.abs()) {
            break;
        }
        add_at(&mut cuts, &plan);
    }
    Ok((best, upper))
}

/// Maximizes `π ↦ Σᵢ pᵢ φ(Σⱼ πᵢⱼ γ(bⱼ)/pᵢ − γ(aᵢ))` over martingale couplings.
///
/// Starts are vertices maximizing random linear objectives; the best of
/// `restarts` ascents is polished, ties going to the lowest restart index.
pub fn direct_concave_max(
    poly: &CouplingPolytope,
    spec: &GainSpec,
    restarts: usize,
    seed: u64,
) -> Result<ConcaveMax> {
    let (n, m) = poly.shape();
    if n > MAX_FIRST || m > MAX_SECOND {
        return Err(Error::SupportTooLarge {
            n: n.max(m),
            cap: if n > MAX_FIRST { MAX_FIRST } else { MAX_SECOND },
        });
    }
    let gamma = spec.gamma();
    let obj = Objective {
        spec,
        p: poly.first().weights().to_vec(),
        gamma_a: poly.first().atoms().iter().map(|&a| gamma.eval(a)).collect(),
        gamma_b: poly.second().atoms().iter().map(|&b| gamma.eval(b)).collect(),
        m,
    };
    let dom = gamma.domain();
    if let Some(x) = poly
        .first()
        .atoms()
        .iter()
        .chain(poly.second().atoms())
        .find(|&&x| !dom.contains(x))
    {
        return Err(Error::DomainViolation(format!("atom {x} outside the domain of gamma")));
    }
    let (a, _) = poly.constraints();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<Vec<Vec<f64>>> = (0..restarts.max(1))
        .map(|_| (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
        .collect();
    let starts = costs
        .iter()
        .map(|c| poly.lp_max(c).map(|(_, plan)| plan.concat()))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|s| ascend(&obj, &a, s).map(|x| (obj.value(&x), x)))
        .collect::<Result<_>>()?;
    let (restart, (_, x)) = results
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .0 > best.1 .0 { cur } else { best })
        .expect("at least one restart");
    let (x, upper) = polish(&obj, poly, x)?;
    Ok(ConcaveMax {
        value: obj.value(&x),
        plan: poly.unflatten(&x),
        restart,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::{Gamma, Phi};
    use crate::measure::{DiscreteMarginal, DomainInterval};

    fn disc(atoms: Vec<f64>, weights: Vec<f64>) -> DiscreteMarginal {
        DiscreteMarginal::new(DomainInterval::real_line(), atoms, weights).unwrap()
    }

    #[test]
    fn singleton_polytope() {
        let poly = CouplingPolytope::new(
            disc(vec![-1.0, 1.0], vec![0.5, 0.5]),
            disc(vec![-2.0, 2.0], vec![0.5, 0.5]),
        );
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        let res = direct_concave_max(&poly, &spec, 5, 1).unwrap();
        // Both rows put variance 3 on top of their atom.
        assert!((res.value - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stays_feasible_and_below_the_bound() {
        let poly = CouplingPolytope::new(
            disc(vec![-1.0, 0.0, 1.0], vec![0.3, 0.3, 0.4]),
            disc(vec![-3.0, -1.5, -0.5, 0.5, 2.0, 3.0], vec![0.1, 0.2, 0.2, 0.2, 0.2, 0.1]),
        );
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        let res = direct_concave_max(&poly, &spec, DEFAULT_RESTARTS, 7).unwrap();
        let x: Vec<f64> = res.plan.concat();
        assert!(poly.residual(&x) < 1e-9);
        assert!(x.iter().all(|&v| v >= 0.0));
        let var2: f64 = poly.second().atoms().iter().zip(poly.second().weights()).map(|(b, w)| b * b * w).sum();
        let var1: f64 = poly.first().atoms().iter().zip(poly.first().weights()).map(|(a, p)| a * a * p).sum();
        assert!(res.value <= (var2 - var1).sqrt() + 1e-9);
    }

    #[test]
    fn rejects_large_instances() {
        let poly = CouplingPolytope::new(
            disc((0..5).map(f64::from).collect(), vec![0.2; 5]),
            disc((0..5).map(f64::from).collect(), vec![0.2; 5]),
        );
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        assert!(matches!(
            direct_concave_max(&poly, &spec, 1, 0),
            Err(Error::SupportTooLarge { .. })
        ));
    }
}
