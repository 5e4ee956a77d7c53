use super::{Piece, PieceMeasure};
use crate::error::Result;

const MEAN_TOL: f64 = 1e-9;
const CALL_TOL: f64 = -1e-10;

/// `k ↦ ∫ (x - k)⁺ μ(dx)`.
pub fn call_function(mu: &PieceMeasure, k: f64) -> f64 {
    mu.pieces()
        .iter()
        .map(|p| match *p {
            Piece::Atom { x, mass } => mass * (x - k).max(0.0),
            Piece::Uniform { lo, hi, mass } => {
                if k <= lo {
                    mass * (0.5 * (lo + hi) - k)
                } else if k >= hi {
                    0.0
                } else {
                    let d = hi - k;
                    mass * 0.5 * d * d / (hi - lo)
                }
            }
        })
        .sum()
}

/// Reason why `mu ≤cx nu` fails, or `None` if it holds.
///
/// The call-function difference is quadratic between consecutive breakpoints
/// of the two measures, so it is checked at every breakpoint and at the vertex
/// of each quadratic piece.
pub fn convex_order_violation(mu: &PieceMeasure, nu: &PieceMeasure) -> Result<Option<String>> {
    mu.ensure_probability()?;
    nu.ensure_probability()?;
    let (m1, m2) = (mu.mean(), nu.mean());
    if (m1 - m2).abs() > MEAN_TOL {
        return Ok(Some(format!("means differ ({m1} vs {m2})")));
    }
    let diff = |k: f64| call_function(nu, k) - call_function(mu, k);

    let mut pts = mu.breakpoints();
    pts.extend(nu.breakpoints());
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    for &k in &pts {
        let d = diff(k);
        if d < CALL_TOL {
            return Ok(Some(format!("call function of mu exceeds nu at k = {k} by {}", -d)));
        }
    }
    for w in pts.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        let (d0, d1) = (diff(k0), diff(k1));
        let dm = diff(0.5 * (k0 + k1));
        // Quadratic through the three samples, in t ∈ [0, 1].
        let curv = 2.0 * (d0 + d1 - 2.0 * dm);
        if curv > 0.0 {
            let slope = d1 - d0 - 0.5 * curv;
            let t = -slope / curv;
            if t > 0.0 && t < 1.0 {
                let k = k0 + t * (k1 - k0);
                let d = diff(k);
                if d < CALL_TOL {
                    return Ok(Some(format!(
                        "call function of mu exceeds nu at k = {k} by {}",
                        -d
                    )));
                }
            }
        }
    }
    Ok(None)
}

/// `mu ≤cx nu` for probability measures.
pub fn convex_order_leq(mu: &PieceMeasure, nu: &PieceMeasure) -> Result<bool> {
    Ok(convex_order_violation(mu, nu)?.is_none())
}
