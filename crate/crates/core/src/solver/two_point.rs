use crate::curtain::{build_curtain, ensure_convex_order};
use crate::error::{Error, Result};
use crate::gain::GainSpec;
use crate::measure::{DiscreteMarginal, PieceMeasure};

use super::{check_flat, mix, objective, upper_bound_discrete, SolveResult};

/// Closed-form optimum for a two-atom first marginal.
///
/// The attainable vectors form the segment between the left- and
/// right-curtain vectors `x_*` and `x^*`; the optimum is `x₀` clamped to it.
pub fn solve_two_point(mu1: &DiscreteMarginal, mu2: &PieceMeasure, spec: &GainSpec) -> Result<SolveResult> {
    if mu1.len() != 2 {
        return Err(Error::NotTwoPoint(mu1.len()));
    }
    ensure_convex_order(mu1, mu2)?;
    let gamma = spec.gamma();
    let (lower, _) = build_curtain(mu1, mu2, &[0, 1])?;
    let (upper, _) = build_curtain(mu1, mu2, &[1, 0])?;
    let x_lo = lower.row_integrals(gamma)?;
    let x_hi = upper.row_integrals(gamma)?;
    let bound = upper_bound_discrete(mu1, mu2, spec)?;
    let x0 = bound.x0.clone().expect("discrete first marginal");

    // Both endpoints share p₁x₁ + p₂x₂ = μ₂[γ], so the first coordinate parametrizes the segment.
    let (a, b) = (x_lo[0], x_hi[0]);
    let lambda = if (a - b).abs() <= f64::EPSILON * (1.0 + a.abs()) {
        1.0
    } else {
        let t = x0[0].clamp(a.min(b), a.max(b));
        ((t - b) / (a - b)).clamp(0.0, 1.0)
    };
    let x: Vec<f64> = if lambda == 1.0 {
        x_lo.clone()
    } else if lambda == 0.0 {
        x_hi.clone()
    } else if x0[0] > a.min(b) && x0[0] < a.max(b) {
        x0
    } else {
        x_lo.iter().zip(&x_hi).map(|(l, h)| lambda * l + (1.0 - lambda) * h).collect()
    };
    let g: Vec<f64> = mu1.atoms().iter().map(|&a| gamma.eval(a)).collect();
    let value = objective(&x, mu1.weights(), &g, spec);
    let coupling = mix(&[&lower, &upper], &[lambda, 1.0 - lambda])?;
    let flat = check_flat(&coupling, spec)?;
    Ok(SolveResult {
        value,
        weights: vec![lambda, 1.0 - lambda],
        orders: vec![vec![0, 1], vec![1, 0]],
        x,
        coupling,
        flat,
        upper_bound: bound.value,
        gap: bound.value - value,
        fw_gap: None,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::{Gamma, Phi};
    use crate::measure::{DomainInterval, Piece};
    use crate::solver::{evaluate_j, solve_finite, SolveOptions};
    use crate::Sense;

    fn line() -> DomainInterval {
        DomainInterval::real_line()
    }

    #[test]
    fn identical_marginals() {
        let mu1 = DiscreteMarginal::new(line(), vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        let r = solve_two_point(&mu1, &mu1.to_measure(), &spec).unwrap();
        assert_eq!(r.x, vec![1.0, 1.0]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn rejects_other_sizes() {
        let mu1 = DiscreteMarginal::new(line(), vec![0.0], vec![1.0]).unwrap();
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        assert_eq!(
            solve_two_point(&mu1, &mu1.to_measure(), &spec).unwrap_err(),
            Error::NotTwoPoint(1)
        );
    }

    #[test]
    fn matches_grid_search_and_finite_solver() {
        let mu1 = DiscreteMarginal::new(line(), vec![-0.5, 1.0], vec![0.6, 0.4]).unwrap();
        let mu2 = PieceMeasure::new(
            line(),
            vec![
                Piece::atom(-2.0, 0.2),
                Piece::atom(-0.5, 0.3),
                Piece::atom(0.5, 0.3),
                Piece::atom(2.5, 0.2),
            ],
        )
        .unwrap();
        let spec = GainSpec::new(Gamma::Quadratic, Phi::Sqrt).unwrap();
        let r = solve_two_point(&mu1, &mu2, &spec).unwrap();
        assert!((evaluate_j(&r.coupling, &spec).unwrap() - r.value).abs() < 1e-12);
        r.coupling.check_second_marginal(&mu2).unwrap();

        let (lower, _) = build_curtain(&mu1, &mu2, &[0, 1]).unwrap();
        let (upper, _) = build_curtain(&mu1, &mu2, &[1, 0]).unwrap();
        let xl = lower.row_integrals(&Gamma::Quadratic).unwrap();
        let xh = upper.row_integrals(&Gamma::Quadratic).unwrap();
        let g = [0.25, 1.0];
        let mut best = f64::NEG_INFINITY;
        for k in 0..=1_000_000 {
            let t = k as f64 / 1e6;
            let x: Vec<f64> = xl.iter().zip(&xh).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            best = best.max(objective(&x, mu1.weights(), &g, &spec));
        }
        assert!((best - r.value).abs() <= 1e-6);
        assert!(r.value >= best - 1e-12);

        let f = solve_finite(&mu1, &mu2, &spec, Sense::Max, &SolveOptions::default()).unwrap();
        assert!((f.value - r.value).abs() <= 1e-8);
    }
}
