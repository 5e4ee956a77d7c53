mod common;

use nlmot::measure::{discretize_conditional_mean, dyadic_cuts};
use nlmot::oracle::{direct_concave_max, CouplingPolytope};
use nlmot::solver::{evaluate_j, solve_finite, upper_bound_discrete, SolveOptions, VertexSet};
use nlmot::superrep::{build_portfolio, lift};
use nlmot::{GainSpec, Gamma, Phi, Sense};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn mixtures_of_curtains_keep_the_second_marginal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=4);
        let (mu1, mu2) = random_piece_pair(&mut rng, n);
        let spec = random_spec(&mut rng);
        let set = VertexSet::build(&mu1, &mu2, &spec, 9).unwrap();
        let weights = random_weights(&mut rng, set.len());
        let mixed = set.mix(&weights).unwrap();
        prop_assert!(mixed.check_second_marginal(&mu2).is_ok());
        let j = evaluate_j(&mixed, &spec).unwrap();
        let bound = upper_bound_discrete(&mu1, &mu2, &spec).unwrap().value;
        prop_assert!(j <= bound + 1e-12);
    }

    #[test]
    fn solver_brackets_every_vertex(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=4);
        let (mu1, mu2) = random_piece_pair(&mut rng, n);
        let spec = random_spec(&mut rng);
        let opts = SolveOptions::default();
        let max = solve_finite(&mu1, &mu2, &spec, Sense::Max, &opts).unwrap();
        let min = solve_finite(&mu1, &mu2, &spec, Sense::Min, &opts).unwrap();
        let set = VertexSet::build(&mu1, &mu2, &spec, opts.enum_cap).unwrap();
        for c in &set.couplings {
            let j = evaluate_j(c, &spec).unwrap();
            prop_assert!(min.value <= j + 1e-10);
            prop_assert!(j <= max.value + 1e-10);
        }
        prop_assert!(max.value <= max.upper_bound + 1e-12);
        prop_assert!((evaluate_j(&max.coupling, &spec).unwrap() - max.value).abs() <= 1e-10);
    }

    #[test]
    fn oracle_bound_brackets_the_solver(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=3);
        let (mu1, mu2, _) = random_discrete_pair(&mut rng, n, 5);
        let spec = random_spec(&mut rng);
        let solved = solve_finite(&mu1, &mu2.to_measure(), &spec, Sense::Max, &SolveOptions::default()).unwrap();
        let poly = CouplingPolytope::new(mu1, mu2);
        let oracle = direct_concave_max(&poly, &spec, 4, seed).unwrap();
        prop_assert!(oracle.value <= oracle.upper + 1e-12);
        prop_assert!(solved.value <= oracle.upper + 1e-9);
        prop_assert!(oracle.value <= solved.value + 1e-9);
    }

    #[test]
    fn lifting_keeps_the_coupling_and_the_objective(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=4);
        let (mu1, mu2) = random_piece_pair(&mut rng, n);
        let spec = random_spec(&mut rng);
        let set = VertexSet::build(&mu1, &mu2, &spec, 9).unwrap();
        let c = &set.couplings[rng.gen_range(0..set.len())];
        let lifted = lift(c, &spec).unwrap();
        prop_assert_eq!(lifted.project(), c);
        let j = evaluate_j(c, &spec).unwrap();
        prop_assert!((lifted.expectation() - j).abs() <= 1e-12 * (1.0 + j.abs()));
    }

    #[test]
    fn portfolio_prices_dominate_every_coupling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=4);
        let (mu1, mu2) = random_piece_pair(&mut rng, n);
        let phi = if rng.gen_bool(0.5) { Phi::Sqrt } else { Phi::PowerConcave { q: 0.3 } };
        let spec = GainSpec::new(Gamma::Quadratic, phi).unwrap();
        let portfolio = build_portfolio(&mu1.to_measure(), &mu2, &spec).unwrap();
        let price = portfolio.price(&mu1.to_measure(), &mu2, &spec).unwrap();
        let set = VertexSet::build(&mu1, &mu2, &spec, 9).unwrap();
        for c in &set.couplings {
            prop_assert!(evaluate_j(c, &spec).unwrap() <= price + 1e-10);
        }
    }

    #[test]
    fn discretization_keeps_mass_and_mean(seed in any::<u64>(), depth in 0u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let (_, mu) = random_piece_pair(&mut rng, n);
        let cuts = dyadic_cuts(&mu, depth);
        let disc = discretize_conditional_mean(&mu, &cuts).unwrap();
        let mass: f64 = disc.weights().iter().sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        prop_assert!((disc.mean() - mu.mean()).abs() <= 1e-12);
        prop_assert!(disc.len() <= 1 << depth);
    }
}
