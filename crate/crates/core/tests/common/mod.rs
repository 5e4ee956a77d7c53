//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use nlmot::gain::{Gamma, Phi};
use nlmot::{Coupling, DiscreteMarginal, DomainInterval, GainSpec, Piece, PieceMeasure};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn line() -> DomainInterval {
    DomainInterval::real_line()
}

/// Distinct sorted values rounded to a 1/64 grid inside `[lo, hi]`.
pub fn distinct_points<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    let steps = ((hi - lo) * 64.0) as i64;
    let mut all: Vec<i64> = (0..=steps).collect();
    all.shuffle(rng);
    let mut pts: Vec<f64> = all[..k].iter().map(|&s| lo + s as f64 / 64.0).collect();
    pts.sort_by(f64::total_cmp);
    pts
}

pub fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

pub fn random_first<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DiscreteMarginal {
    let atoms = distinct_points(rng, n, lo, hi);
    let weights = random_weights(rng, n);
    DiscreteMarginal::new(line(), atoms, weights).unwrap()
}

/// Random martingale kernel from `first` onto `targets`, which must strictly bracket every atom.
///
/// Each row mixes two-point splits between a target below and a target above the atom.
pub fn random_kernel<R: Rng>(rng: &mut R, first: &DiscreteMarginal, targets: &[f64]) -> Vec<Vec<f64>> {
    first
        .atoms()
        .iter()
        .map(|&a| {
            let below: Vec<usize> = (0..targets.len()).filter(|&j| targets[j] < a).collect();
            let above: Vec<usize> = (0..targets.len()).filter(|&j| targets[j] > a).collect();
            let mut row = vec![0.0; targets.len()];
            let splits = rng.gen_range(1..=3);
            let w = random_weights(rng, splits);
            for wk in w {
                let l = *below.choose(rng).unwrap();
                let r = *above.choose(rng).unwrap();
                let (bl, br) = (targets[l], targets[r]);
                row[l] += wk * (br - a) / (br - bl);
                row[r] += wk * (a - bl) / (br - bl);
            }
            row
        })
        .collect()
}

/// Discrete pair `(μ₁, μ₂)` in convex order with `n` and at most `m` atoms, plus the generating coupling.
pub fn random_discrete_pair<R: Rng>(rng: &mut R, n: usize, m: usize) -> (DiscreteMarginal, DiscreteMarginal, Coupling) {
    assert!(m >= 2);
    let mu1 = random_first(rng, n, -1.0, 1.0);
    let mut targets = vec![rng.gen_range(-3.0..-1.5), rng.gen_range(1.5..3.0)];
    targets.extend(distinct_points(rng, m - 2, -1.4, 1.4));
    targets.sort_by(f64::total_cmp);
    let plan = random_kernel(rng, &mu1, &targets);
    let weighted: Vec<Vec<f64>> = plan
        .iter()
        .zip(mu1.weights())
        .map(|(row, p)| row.iter().map(|v| v * p).collect())
        .collect();
    let nu = Coupling::from_plan(&mu1, &targets, &weighted).unwrap();
    let mu2 = DiscreteMarginal::from_measure(&nu.second_marginal()).unwrap();
    (mu1, mu2, nu)
}

/// `μ₂ = Σ pᵢ νᵢ` where each `νᵢ` mixes uniforms and atoms centred at `aᵢ`.
pub fn random_piece_pair<R: Rng>(rng: &mut R, n: usize) -> (DiscreteMarginal, PieceMeasure) {
    let mu1 = random_first(rng, n, -1.0, 1.0);
    let mut pieces = Vec::new();
    for (&a, &p) in mu1.atoms().iter().zip(mu1.weights()) {
        let k = rng.gen_range(1..=2);
        for w in random_weights(rng, k) {
            let h = rng.gen_range(0.1..1.5);
            if rng.gen_bool(0.7) {
                pieces.push(Piece::uniform(a - h, a + h, p * w));
            } else {
                pieces.push(Piece::atom(a - h, 0.5 * p * w));
                pieces.push(Piece::atom(a + h, 0.5 * p * w));
            }
        }
    }
    (mu1, PieceMeasure::new(line(), pieces).unwrap())
}

pub fn random_spec<R: Rng>(rng: &mut R) -> GainSpec {
    let gamma = match rng.gen_range(0..3) {
        0 => Gamma::Quadratic,
        1 => Gamma::Power { p: 3.0 },
        _ => Gamma::PiecewiseLinearConvex {
            breakpoints: vec![-0.5, 0.7],
            slopes: vec![-1.5, 0.2, 2.0],
            intercept: 0.1,
        },
    };
    let phi = match rng.gen_range(0..3) {
        0 => Phi::Sqrt,
        1 => Phi::PowerConcave { q: 0.3 },
        _ => Phi::PiecewiseLinearConcave {
            breakpoints: vec![0.2, 1.0],
            slopes: vec![2.0, 1.0, 0.25],
            intercept: 0.0,
        },
    };
    GainSpec::new(gamma, phi).unwrap()
}

/// `π[i][j] = pᵢ νᵢ({b_j})` for a coupling with atomic rows on `targets`.
pub fn plan_of(c: &Coupling, targets: &[f64]) -> Vec<Vec<f64>> {
    c.rows()
        .iter()
        .zip(c.first().weights())
        .map(|(row, &p)| {
            let mut r = vec![0.0; targets.len()];
            for (x, m) in row.atoms() {
                let j = targets
                    .iter()
                    .position(|&b| (b - x).abs() <= 1e-12 * (1.0 + b.abs()))
                    .expect("row atom is a target");
                r[j] += p * m;
            }
            r
        })
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
