use super::{DiscreteMarginal, PieceMeasure};
use crate::error::{Error, Result};

/// Collapses each cell of the partition cut at `cuts` onto its conditional mean.
///
/// Cells are `(-inf, c₁], (c₁, c₂], …, (c_k, inf)`. Cells without mass are
/// skipped. The result is dominated by `mu` in convex order and has the same mean.
pub fn discretize_conditional_mean(mu: &PieceMeasure, cuts: &[f64]) -> Result<DiscreteMarginal> {
    mu.ensure_probability()?;
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::NotNested);
    }
    for &c in cuts {
        if mu.atoms().iter().any(|&(x, _)| x == c) {
            return Err(Error::CutOnAtom { cut: c });
        }
    }
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(cuts);
    edges.push(f64::INFINITY);

    let pairs: Vec<(f64, f64)> = edges
        .windows(2)
        .filter_map(|w| {
            let cell = mu.restrict_interval(w[0], w[1]);
            let mass = cell.total_mass();
            (mass > 0.0).then(|| (cell.first_moment() / mass, mass))
        })
        .collect();
    DiscreteMarginal::from_pairs(mu.domain(), pairs)
}

/// Interior cut points splitting the support hull of `mu` into `2^depth` equal cells.
pub fn dyadic_cuts(mu: &PieceMeasure, depth: u32) -> Vec<f64> {
    let Some((lo, hi)) = mu.support_hull() else {
        return Vec::new();
    };
    let n = 1usize << depth;
    (1..n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}
