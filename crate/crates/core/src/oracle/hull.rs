//! Convex-hull membership by linear programming.

use crate::error::{Error, Result};

use super::simplex;

/// Coordinatewise slack accepted by [`hull_membership`].
pub const HULL_TOL: f64 = 1e-8;

/// Whether `x ∈ conv(vertices)`, with convex weights when it is.
///
/// Solves phase one of `{ρ ≥ 0, Σρ = 1, Vρ = x}` and accepts when the
/// recovered weights reproduce `x` within `tol` in every coordinate.
pub fn hull_membership(vertices: &[Vec<f64>], x: &[f64], tol: f64) -> Result<Option<Vec<f64>>> {
    let d = x.len();
    if vertices.is_empty() {
        return Ok(None);
    }
    if vertices.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidSpec("vertex dimension differs from the point".into()));
    }
    let k = vertices.len();
    let mut a = Vec::with_capacity(d + 1);
    for i in 0..d {
        a.push(vertices.iter().map(|v| v[i]).collect::<Vec<f64>>());
    }
    a.push(vec![1.0; k]);
    let mut b = x.to_vec();
    b.push(1.0);
    let (_, point) = simplex::feasible_point(&a, &b, tol * (d as f64 + 1.0))?;
    let Some(mut rho) = point else {
        return Ok(None);
    };
    rho.iter_mut().for_each(|r| *r = r.max(0.0));
    let total: f64 = rho.iter().sum();
    if !(total > 0.0) {
        return Ok(None);
    }
    rho.iter_mut().for_each(|r| *r /= total);
    let inside = (0..d).all(|i| {
        let xi: f64 = vertices.iter().zip(&rho).map(|(v, r)| v[i] * r).sum();
        (xi - x[i]).abs() <= tol
    });
    Ok(inside.then_some(rho))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
    }

    #[test]
    fn vertex_is_inside_with_unit_weight() {
        let w = hull_membership(&square(), &[1.0, 0.0], HULL_TOL).unwrap().unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn midpoint_of_two_vertices() {
        let v = vec![vec![0.0, 0.0], vec![2.0, 4.0]];
        let w = hull_membership(&v, &[1.0, 2.0], HULL_TOL).unwrap().unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn outside_points() {
        assert!(hull_membership(&square(), &[1.5, 0.5], HULL_TOL).unwrap().is_none());
        assert!(hull_membership(&square(), &[0.5, -1e-6], HULL_TOL).unwrap().is_none());
        let line = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert!(hull_membership(&line, &[0.5, 0.6], HULL_TOL).unwrap().is_none());
    }

    #[test]
    fn interior_weights_reproduce_the_point() {
        let x = [0.3, 0.8];
        let w = hull_membership(&square(), &x, HULL_TOL).unwrap().unwrap();
        let y0: f64 = square().iter().zip(&w).map(|(v, r)| v[0] * r).sum();
        let y1: f64 = square().iter().zip(&w).map(|(v, r)| v[1] * r).sum();
        assert!((y0 - x[0]).abs() < 1e-14 && (y1 - x[1]).abs() < 1e-14);
    }
}
