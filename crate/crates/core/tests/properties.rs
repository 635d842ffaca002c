//! Property tests for the invariants shared across modules.

use fracmax_core::bellman::{bliss_functional, Piece, StepFunction};
use fracmax_core::constants::{cpq, cpq_direct, ln_gamma};
use fracmax_core::maximal::{frac_maximal, frac_maximal_by_scan, linearize};
use fracmax_core::weights::{carleson_constant, carleson_from_linearization, testing_constant};
use fracmax_core::{le_tol, SimpleFunction, TreeSpace, WeightPair};
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// A random tree with nonnegative leaf values and two positive weights on it.
fn instance() -> impl Strategy<Value = (TreeSpace, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (any::<u64>(), 1usize..=5, 2usize..=3).prop_flat_map(|(seed, depth, branch)| {
        let tree = TreeSpace::build_random_tree(seed, depth, branch).expect("valid tree");
        let n = tree.leaf_count();
        let weight = prop::collection::vec(-2.0f64..2.0, n).prop_map(|v| v.into_iter().map(f64::exp).collect::<Vec<_>>());
        let f = prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], n);
        (Just(tree), f, weight.clone(), weight)
    })
}

fn exponents() -> impl Strategy<Value = (f64, f64, f64)> {
    (1.05f64..5.0, 0.0f64..1.0, 0.0f64..0.999).prop_map(|(p, dq, alpha)| (p, p + dq * (6.0 - p), alpha))
}

fn step_function(max_pieces: usize) -> impl Strategy<Value = StepFunction> {
    prop::collection::vec((0.05f64..1.0, prop_oneof![Just(0.0), 0.01f64..20.0]), 1..=max_pieces).prop_map(|pairs| {
        StepFunction::new(pairs.into_iter().map(|(length, value)| Piece { length, value }).collect()).expect("valid pieces")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn running_max_matches_ancestor_scan((tree, f, _, _) in instance(), alpha in 0.0f64..0.999) {
        let f = SimpleFunction::new(&tree, f).unwrap();
        let fast = frac_maximal(&f, alpha).unwrap();
        let scan = frac_maximal_by_scan(&f, alpha).unwrap();
        for (a, b) in fast.values().iter().zip(scan.values()) {
            prop_assert!(rel_close(*a, *b, 1e-13));
        }
    }

    #[test]
    fn linearization_reconstructs_the_maximal_function((tree, f, _, _) in instance(), alpha in 0.0f64..0.999) {
        let f = SimpleFunction::new(&tree, f).unwrap();
        let lin = linearize(&f, alpha).unwrap();
        let m = frac_maximal(&f, alpha).unwrap();
        for (a, b) in lin.reconstruct().iter().zip(m.values()) {
            prop_assert!(rel_close(*a, *b, 1e-12));
        }
        let mut seen = vec![false; tree.leaf_count()];
        for slots in &lin.e_sets {
            for &slot in slots {
                prop_assert!(!seen[slot], "E-sets overlap");
                seen[slot] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn maximal_function_is_homogeneous_and_monotone((tree, f, g, _) in instance(), alpha in 0.0f64..0.999, c in 0.1f64..10.0) {
        let f = SimpleFunction::new(&tree, f).unwrap();
        let bigger = SimpleFunction::new(&tree, f.values().iter().zip(&g).map(|(a, b)| a + b).collect()).unwrap();
        let mf = frac_maximal(&f, alpha).unwrap();
        let mcf = frac_maximal(&f.scale(c), alpha).unwrap();
        let mg = frac_maximal(&bigger, alpha).unwrap();
        for ((a, b), d) in mf.values().iter().zip(mcf.values()).zip(mg.values()) {
            prop_assert!(rel_close(c * a, *b, 1e-12));
            prop_assert!(le_tol(*a, *d));
        }
    }

    #[test]
    fn testing_constant_scales_with_u((tree, _, u, v) in instance(), (p, q, alpha) in exponents(), c in 0.1f64..10.0) {
        let pair = WeightPair::new(SimpleFunction::new(&tree, u).unwrap(), SimpleFunction::new(&tree, v).unwrap(), p).unwrap();
        let l = testing_constant(&pair, alpha, q).unwrap().constant;
        let scaled = testing_constant(&pair.scale_u(c).unwrap(), alpha, q).unwrap().constant;
        prop_assert!(rel_close(scaled, c.powf(1.0 / q) * l, 1e-12));
    }

    #[test]
    fn linearized_sequences_are_carleson((tree, f, u, v) in instance(), (p, q, alpha) in exponents()) {
        let pair = WeightPair::new(SimpleFunction::new(&tree, u).unwrap(), SimpleFunction::new(&tree, v).unwrap(), p).unwrap();
        let l = testing_constant(&pair, alpha, q).unwrap().constant;
        let f = SimpleFunction::new(&tree, f).unwrap();
        let seq = carleson_from_linearization(&pair, &f, alpha, q).unwrap();
        let (c, _) = carleson_constant(&seq, &pair.sigma, p, q).unwrap();
        prop_assert!(le_tol(c, l), "{} > {}", c, l);
    }

    #[test]
    fn rearrangement_preserves_moments_and_sorts(phi in step_function(16), p in 1.1f64..5.0) {
        let r = phi.rearrange_decreasing();
        prop_assert!(r.is_nonincreasing());
        prop_assert!(rel_close(r.total_length(), phi.total_length(), 1e-12));
        prop_assert!(rel_close(r.integral(), phi.integral(), 1e-12) || phi.integral() == 0.0);
        prop_assert!(rel_close(r.p_integral(p), phi.p_integral(p), 1e-12) || phi.p_integral(p) == 0.0);
        prop_assert_eq!(r.rearrange_decreasing(), r.clone());
    }

    #[test]
    fn concatenation_adds_lengths_and_moments(a in step_function(8), b in step_function(8), p in 1.1f64..5.0) {
        let c = a.concat(&b);
        prop_assert!(rel_close(c.total_length(), a.total_length() + b.total_length(), 1e-12));
        let (ia, ib) = (a.integral(), b.integral());
        prop_assert!((c.integral() - ia - ib).abs() <= 1e-12 * (ia + ib).max(1.0));
        let (pa, pb) = (a.p_integral(p), b.p_integral(p));
        prop_assert!((c.p_integral(p) - pa - pb).abs() <= 1e-12 * (pa + pb).max(1.0));
    }

    #[test]
    fn rearrangement_never_lowers_the_bliss_functional(phi in step_function(10), p in 1.2f64..4.0, dq in 0.0f64..2.0, frac in 0.0f64..=1.0) {
        let q = p + dq;
        let t = frac * phi.total_length().powf(q / p);
        let plain = bliss_functional(&phi, t, p, q, 1e-10).unwrap();
        let sorted = bliss_functional(&phi.rearrange_decreasing(), t, p, q, 1e-10).unwrap();
        prop_assert!(sorted >= plain - 1e-8 * plain.max(1.0), "{} < {}", sorted, plain);
    }

    #[test]
    fn log_gamma_agrees_with_statrs(z in 0.05f64..150.0) {
        let ours = ln_gamma(z);
        let reference = statrs::function::gamma::ln_gamma(z);
        prop_assert!((ours - reference).abs() <= 1e-12 * reference.abs().max(1.0), "{} vs {}", ours, reference);
    }

    #[test]
    fn sharp_constant_is_at_least_one_and_matches_gamma_route(p in 1.05f64..8.0, dq in 1e-3f64..6.0) {
        let q = p + dq;
        let c = cpq(p, q).unwrap();
        prop_assert!(c >= 1.0 - 1e-12);
        prop_assert!(c <= p / (p - 1.0) * (1.0 + 1e-9));
        if let Some(direct) = cpq_direct(p, q).unwrap() {
            prop_assert!(rel_close(c, direct, 1e-9), "{} vs {}", c, direct);
        }
    }
}
