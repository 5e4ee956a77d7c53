//! Martingale couplings with a finitely supported first marginal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMarginal, Integrand, Piece, PieceMeasure};

/// Rows must have unit mass within this tolerance.
pub const ROW_MASS_TOL: f64 = 1e-10;
/// Row barycenters must match their atom within this (scaled) tolerance.
pub const MARTINGALE_TOL: f64 = 1e-9;
/// Marginal comparisons use this CDF tolerance.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Disintegration `ν = Σ pᵢ δ_{aᵢ} × νᵢ` of a martingale coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupling")]
pub struct Coupling {
    first: DiscreteMarginal,
    rows: Vec<PieceMeasure>,
}

#[derive(Deserialize)]
struct RawCoupling {
    first: DiscreteMarginal,
    rows: Vec<PieceMeasure>,
}

impl TryFrom<RawCoupling> for Coupling {
    type Error = Error;

    fn try_from(raw: RawCoupling) -> Result<Self> {
        Coupling::new(raw.first, raw.rows)
    }
}

impl Coupling {
    /// Checks that every row is a probability with barycenter at its atom.
    pub fn new(first: DiscreteMarginal, rows: Vec<PieceMeasure>) -> Result<Self> {
        if rows.len() != first.len() {
            return Err(Error::MarginalMismatch(format!(
                "{} rows for {} atoms",
                rows.len(),
                first.len()
            )));
        }
        for (i, (row, &a)) in rows.iter().zip(first.atoms()).enumerate() {
            let mass = row.total_mass();
            if (mass - 1.0).abs() > ROW_MASS_TOL {
                return Err(Error::MarginalMismatch(format!("row {i} has mass {mass}")));
            }
            let mean = row.mean();
            if (mean - a).abs() > MARTINGALE_TOL * (1.0 + a.abs()) {
                return Err(Error::MarginalMismatch(format!(
                    "row {i} has mean {mean}, expected {a}"
                )));
            }
        }
        Ok(Self { first, rows })
    }

    /// `ν = Σ pᵢ δ_{aᵢ} × δ_{aᵢ}`.
    pub fn identity(first: &DiscreteMarginal) -> Self {
        let rows = first
            .atoms()
            .iter()
            .map(|&a| PieceMeasure::from_sorted_unchecked(first.domain(), vec![Piece::atom(a, 1.0)]))
            .collect();
        Self {
            first: first.clone(),
            rows,
        }
    }

    /// Coupling from a transport plan `π[i][j]` onto the atoms `targets`.
    ///
    /// Entries below zero (LP round-off) are dropped.
    pub fn from_plan(first: &DiscreteMarginal, targets: &[f64], plan: &[Vec<f64>]) -> Result<Self> {
        let domain = first.domain();
        let rows = plan
            .iter()
            .zip(first.weights())
            .map(|(row, &p)| {
                let pieces = targets
                    .iter()
                    .zip(row)
                    .filter(|(_, &m)| m > 0.0)
                    .map(|(&y, &m)| Piece::atom(y, m / p))
                    .collect();
                PieceMeasure::new(domain, pieces)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(first.clone(), rows)
    }

    pub fn first(&self) -> &DiscreteMarginal {
        &self.first
    }

    pub fn rows(&self) -> &[PieceMeasure] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `Σ pᵢ νᵢ`.
    pub fn second_marginal(&self) -> PieceMeasure {
        PieceMeasure::combination(
            self.first.domain(),
            self.first.weights().iter().copied().zip(&self.rows),
        )
    }

    /// Fails unless `Σ pᵢ νᵢ` matches `mu2` at every CDF breakpoint.
    pub fn check_second_marginal(&self, mu2: &PieceMeasure) -> Result<()> {
        let d = self.second_marginal().max_cdf_diff(mu2);
        if d > MARGINAL_TOL {
            return Err(Error::MarginalMismatch(format!(
                "second marginal off by {d} in CDF distance"
            )));
        }
        Ok(())
    }

    /// `(νᵢ[f])ᵢ`.
    pub fn row_integrals(&self, f: &dyn Integrand) -> Result<Vec<f64>> {
        self.rows.iter().map(|r| f.integrate(r)).collect()
    }
}

/// Row-wise convex combination `Σ_k w_k ν^k` of couplings with the same first marginal.
pub fn mix(couplings: &[&Coupling], weights: &[f64]) -> Result<Coupling> {
    let first = couplings
        .first()
        .ok_or_else(|| Error::MarginalMismatch("nothing to mix".into()))?
        .first
        .clone();
    if couplings.len() != weights.len() {
        return Err(Error::MarginalMismatch(format!(
            "{} couplings but {} weights",
            couplings.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::MarginalMismatch("mixture weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::MarginalMismatch(format!("mixture weights sum to {total}")));
    }
    if couplings.iter().any(|c| c.first != first) {
        return Err(Error::MarginalMismatch("first marginals differ".into()));
    }
    let rows = (0..first.len())
        .map(|i| {
            PieceMeasure::combination(
                first.domain(),
                weights.iter().map(|w| w / total).zip(couplings.iter().map(|c| &c.rows[i])),
            )
        })
        .collect();
    Coupling::new(first, rows)
}

/// Kernel product `ρ ⋆ η`: rows `∫ η_y ρᵢ(dy)`.
///
/// The second marginal of `ρ` must be discrete and equal to the first marginal of `η`.
pub fn compose(rho: &Coupling, eta: &Coupling) -> Result<Coupling> {
    let mid = rho.second_marginal();
    if !mid.is_discrete() {
        return Err(Error::MarginalMismatch(
            "composition needs a discrete intermediate marginal".into(),
        ));
    }
    let mid_atoms = mid.atoms();
    let eta_first = &eta.first;
    let matches = mid_atoms.len() == eta_first.len()
        && mid_atoms
            .iter()
            .zip(eta_first.atoms().iter().zip(eta_first.weights()))
            .all(|(&(x, m), (&y, &w))| {
                (x - y).abs() <= MARGINAL_TOL * (1.0 + x.abs()) && (m - w).abs() <= MARGINAL_TOL
            });
    if !matches {
        return Err(Error::MarginalMismatch(
            "second marginal of the left factor differs from the first marginal of the right factor"
                .into(),
        ));
    }
    let ys = eta_first.atoms();
    let index_of = |y: f64| -> Result<usize> {
        let k = ys.partition_point(|&v| v < y - MARGINAL_TOL * (1.0 + y.abs()));
        if k < ys.len() && (ys[k] - y).abs() <= MARGINAL_TOL * (1.0 + y.abs()) {
            Ok(k)
        } else {
            Err(Error::MarginalMismatch(format!("atom {y} not found")))
        }
    };
    let rows = rho
        .rows
        .iter()
        .map(|row| {
            let terms = row
                .atoms()
                .into_iter()
                .map(|(y, m)| Ok((m, &eta.rows[index_of(y)?])))
                .collect::<Result<Vec<_>>>()?;
            Ok(PieceMeasure::combination(eta.first.domain(), terms))
        })
        .collect::<Result<Vec<_>>>()?;
    Coupling::new(rho.first.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DomainInterval;

    fn line() -> DomainInterval {
        DomainInterval::real_line()
    }

    fn two_point() -> DiscreteMarginal {
        DiscreteMarginal::new(line(), vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    fn spread() -> Coupling {
        // -1 -> {-2, 0}, 1 -> {0, 2}.
        Coupling::from_plan(
            &two_point(),
            &[-2.0, 0.0, 2.0],
            &[vec![0.25, 0.25, 0.0], vec![0.0, 0.25, 0.25]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_martingale_rows() {
        let rows = vec![
            PieceMeasure::dirac(line(), -1.0).unwrap(),
            PieceMeasure::dirac(line(), 0.5).unwrap(),
        ];
        assert!(matches!(
            Coupling::new(two_point(), rows),
            Err(Error::MarginalMismatch(_))
        ));
    }

    #[test]
    fn second_marginal_of_plan() {
        let c = spread();
        let m2 = c.second_marginal();
        assert_eq!(m2.atoms(), vec![(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        c.check_second_marginal(&m2).unwrap();
        assert!(c.check_second_marginal(&two_point().to_measure()).is_err());
    }

    #[test]
    fn identity_is_neutral_for_composition() {
        let c = spread();
        let left = compose(&Coupling::identity(&two_point()), &c).unwrap();
        assert_eq!(left, c);
        let mid = DiscreteMarginal::from_measure(&c.second_marginal()).unwrap();
        let right = compose(&c, &Coupling::identity(&mid)).unwrap();
        assert_eq!(right, c);
    }

    #[test]
    fn composition_checks_marginals() {
        let c = spread();
        assert!(matches!(compose(&c, &c), Err(Error::MarginalMismatch(_))));
    }

    #[test]
    fn mixing() {
        let c = spread();
        let id = Coupling::identity(&two_point());
        assert_eq!(mix(&[&c], &[1.0]).unwrap(), c);
        let half = mix(&[&c, &id], &[0.5, 0.5]).unwrap();
        assert_eq!(
            half.rows()[0].atoms(),
            vec![(-2.0, 0.25), (-1.0, 0.5), (0.0, 0.25)]
        );
        assert!(mix(&[&c, &id], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = spread();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.starts_with(r#"{"first":"#));
        let back: Coupling = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
