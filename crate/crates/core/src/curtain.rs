//! Curtain couplings built from iterated shadows.
//!
//! For an enumeration `J` of the atoms of `μ₁`, the row of `J(i)` is the
//! connected part of what is left of `μ₂` after the first `i - 1` shadows,
//! with mass `p_{J(i)}` and barycenter `a_{J(i)}`. Residuals are cut out in
//! quantile coordinates, so no negative mass is ever formed.

use std::collections::HashSet;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::measure::{connected_window, convex_order_violation, restrict_quantile, DiscreteMarginal, Piece, PieceMeasure};

/// Default cap on the number of atoms of `μ₁` for enumeration.
pub const DEFAULT_ENUM_CAP: usize = 9;
/// Mass left over after the last shadow must be below this.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Rounding grid of the deduplication key.
pub const DEDUP_GRID: f64 = 1e-9;
const STRADDLE_TOL: f64 = 1e-12;

/// The order used and the quantile window `(c, c + p)` cut from the residual at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurtainCertificate {
    pub order: Vec<usize>,
    pub windows: Vec<(f64, f64)>,
}

fn check_order(n: usize, order: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    let ok = order.len() == n
        && order.iter().all(|&j| j < n && !std::mem::replace(&mut seen[j], true));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "order {order:?} is not a permutation of 0..{n}"
        )))
    }
}

/// Fails with `NotConvexOrder` unless `μ₁ ≤cx μ₂`.
pub fn ensure_convex_order(mu1: &DiscreteMarginal, mu2: &PieceMeasure) -> Result<()> {
    match convex_order_violation(&mu1.to_measure(), mu2)? {
        None => Ok(()),
        Some(why) => Err(Error::NotConvexOrder(why)),
    }
}

/// Curtain coupling for the enumeration `order` (0-based atom indices).
pub fn build_curtain(
    mu1: &DiscreteMarginal,
    mu2: &PieceMeasure,
    order: &[usize],
) -> Result<(Coupling, CurtainCertificate)> {
    check_order(mu1.len(), order)?;
    ensure_convex_order(mu1, mu2)?;
    build_unchecked(mu1, mu2, order)
}

fn build_unchecked(
    mu1: &DiscreteMarginal,
    mu2: &PieceMeasure,
    order: &[usize],
) -> Result<(Coupling, CurtainCertificate)> {
    let infeasible = |e: Error| Error::ShadowInfeasible(e.to_string());
    let mut rows = vec![PieceMeasure::zero(mu2.domain()); mu1.len()];
    let mut windows = Vec::with_capacity(order.len());
    let mut residual = mu2.clone();
    for &j in order {
        let (a, p) = (mu1.atoms()[j], mu1.weights()[j]);
        let total = residual.total_mass();
        let (c, m) = connected_window(&residual, p, p * a).map_err(infeasible)?;
        let shadow = restrict_quantile(&residual, c, c + m).map_err(infeasible)?;
        let shadow_mass = shadow.total_mass();
        if !(shadow_mass > 0.0) {
            return Err(Error::ShadowInfeasible(format!("empty shadow for atom {a}")));
        }
        rows[j] = shadow.scaled(1.0 / shadow_mass);
        windows.push((c, c + m));
        let left = restrict_quantile(&residual, 0.0, c).map_err(infeasible)?;
        let right = restrict_quantile(&residual, (c + m).min(total), total).map_err(infeasible)?;
        residual = left.add(&right);
    }
    let rest = residual.total_mass();
    if rest > RESIDUAL_TOL {
        return Err(Error::ShadowInfeasible(format!(
            "mass {rest} of the second marginal left after the last shadow"
        )));
    }
    let coupling = Coupling::new(mu1.clone(), rows).map_err(infeasible)?;
    Ok((
        coupling,
        CurtainCertificate {
            order: order.to_vec(),
            windows,
        },
    ))
}

/// Left-curtain coupling (atoms embedded in increasing order).
pub fn left_curtain(mu1: &DiscreteMarginal, mu2: &PieceMeasure) -> Result<Coupling> {
    let order: Vec<usize> = (0..mu1.len()).collect();
    Ok(build_curtain(mu1, mu2, &order)?.0)
}

/// Right-curtain coupling (atoms embedded in decreasing order).
pub fn right_curtain(mu1: &DiscreteMarginal, mu2: &PieceMeasure) -> Result<Coupling> {
    let order: Vec<usize> = (0..mu1.len()).rev().collect();
    Ok(build_curtain(mu1, mu2, &order)?.0)
}

fn dedup_key(c: &Coupling) -> Vec<i64> {
    let r = |v: f64| (v / DEDUP_GRID).round() as i64;
    let mut key = Vec::new();
    for row in c.rows() {
        key.push(-1);
        for p in row.pieces() {
            match *p {
                Piece::Atom { x, mass } => key.extend([0, r(x), r(mass)]),
                Piece::Uniform { lo, hi, mass } => key.extend([1, r(lo), r(hi), r(mass)]),
            }
        }
    }
    key
}

/// Every distinct curtain coupling, each with the first permutation producing it.
///
/// Permutations are visited in lexicographic order.
pub fn enumerate_curtains(
    mu1: &DiscreteMarginal,
    mu2: &PieceMeasure,
    cap: usize,
) -> Result<Vec<(Coupling, Vec<usize>)>> {
    let n = mu1.len();
    if n > cap {
        return Err(Error::SupportTooLarge { n, cap });
    }
    ensure_convex_order(mu1, mu2)?;
    let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let built: Vec<Result<Coupling>> = orders
        .par_iter()
        .map(|order| build_unchecked(mu1, mu2, order).map(|(c, _)| c))
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (order, c) in orders.into_iter().zip(built) {
        let c = c?;
        if seen.insert(dedup_key(&c)) {
            out.push((c, order));
        }
    }
    Ok(out)
}

fn interior_meets(hull: (f64, f64), row: &PieceMeasure) -> bool {
    let tol = STRADDLE_TOL * (1.0 + hull.0.abs().max(hull.1.abs()));
    let (lo, hi) = (hull.0 + tol, hull.1 - tol);
    lo < hi
        && row.pieces().iter().any(|p| match *p {
            Piece::Atom { x, .. } => lo < x && x < hi,
            Piece::Uniform { lo: l, hi: h, .. } => l < hi && h > lo,
        })
}

/// No two rows whose supports each reach into the interior of the other's hull.
pub fn is_curtain(c: &Coupling) -> bool {
    let hulls: Vec<Option<(f64, f64)>> = c.rows().iter().map(PieceMeasure::support_hull).collect();
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            let (Some(hi), Some(hj)) = (hulls[i], hulls[j]) else {
                continue;
            };
            if interior_meets(hi, &c.rows()[j]) && interior_meets(hj, &c.rows()[i]) {
                return false;
            }
        }
    }
    true
}
