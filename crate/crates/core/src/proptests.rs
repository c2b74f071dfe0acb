use proptest::prelude::*;

use crate::epoched_noise::BridgeScheme;
use crate::invariants as inv;
use crate::linalg::{Mat, Vector};
use crate::permutons::{ArchimedeanFamily, Copula};
use crate::risk_models::{FeatureLaw, LinRegModel, ScalarLaw};
use crate::sgd::{Schedule, ShufflingScheme};
use crate::weak_limits::IncrementLaw;

fn archimedean() -> impl Strategy<Value = Copula> {
    prop_oneof![
        (0.05f64..8.0).prop_map(|theta| Copula::Archimedean { family: ArchimedeanFamily::Clayton, theta }),
        (1.0f64..8.0).prop_map(|theta| Copula::Archimedean { family: ArchimedeanFamily::Gumbel, theta }),
        (0.05f64..20.0).prop_map(|theta| Copula::Archimedean { family: ArchimedeanFamily::Frank, theta }),
    ]
}

fn scheme() -> impl Strategy<Value = ShufflingScheme> {
    prop_oneof![
        Just(ShufflingScheme::SingleShuffle),
        Just(ShufflingScheme::RandomReshuffle),
        Just(ShufflingScheme::FlipflopSingle),
        Just(ShufflingScheme::FlipflopRandom),
        archimedean().prop_map(|copula| ShufflingScheme::PermutonDriven { copula }),
        Just(ShufflingScheme::PermutonDriven { copula: Copula::Independence }),
    ]
}

fn bridge_scheme() -> impl Strategy<Value = BridgeScheme> {
    prop_oneof![
        Just(BridgeScheme::SingleShuffle),
        Just(BridgeScheme::RandomReshuffle),
        Just(BridgeScheme::FlipflopSingle),
        Just(BridgeScheme::FlipflopRandom),
    ]
}

fn law() -> impl Strategy<Value = IncrementLaw> {
    prop_oneof![Just(IncrementLaw::Gaussian), Just(IncrementLaw::Rademacher)]
}

fn check(r: inv::Check) -> std::result::Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn permutations_are_bijections(s in scheme(), n in 1usize..60, epochs in 1usize..8, seed in any::<u64>()) {
        check(inv::permutation_sequence(&s, n, epochs, seed))?;
    }

    #[test]
    fn archimedean_pairs_are_copulas(c in archimedean()) {
        check(inv::copula_pair(&c, 0, 1, 16))?;
    }

    #[test]
    fn named_pairs_are_copulas(i in 0usize..4, j in 0usize..4, which in 0usize..3) {
        let c = [Copula::Comonotone, Copula::Independence, Copula::FlipflopSingle][which].clone();
        check(inv::copula_pair(&c, i, j, 16))?;
        check(inv::copula_pair(&Copula::FlipflopRandom, i, j, 16))?;
    }

    #[test]
    fn walk_identities_hold(l in law(), n in 1usize..200, epochs in 1usize..5, seed in any::<u64>()) {
        check(inv::walk_identities(l, n, epochs, seed))?;
    }

    #[test]
    fn smoothing_gap_is_at_most_j_over_n(j in 2usize..6, n in 1usize..40, seed in any::<u64>()) {
        check(inv::smoothing_bound(j, n, 4, seed))?;
    }

    #[test]
    fn scalar_sqrt_multiplies_back(kappa in 0.01f64..100.0, theta in -10.0f64..10.0, sigma in 0.0f64..3.0, exp in any::<bool>()) {
        let law = if exp { FeatureLaw::ScalarIid { law: ScalarLaw::Exponential } } else { FeatureLaw::Gaussian };
        let m = LinRegModel::scalar(kappa, 0.3, sigma, law).unwrap();
        check(inv::sqrt_multiply_back(&m, &Vector::from_element(1, theta)))?;
    }

    #[test]
    fn matrix_sqrt_multiplies_back(a in 0.1f64..5.0, b in -0.9f64..0.9, c in 0.1f64..5.0, t0 in -3.0f64..3.0, t1 in -3.0f64..3.0, iso in any::<bool>()) {
        let k = if iso {
            Mat::identity(2, 2) * a
        } else {
            let off = b * (a * c).sqrt();
            Mat::from_row_slice(2, 2, &[a, off, off, c])
        };
        let m = LinRegModel::new(k, Vector::from_vec(vec![0.1, -0.2]), 0.7, FeatureLaw::Gaussian).unwrap();
        check(inv::sqrt_multiply_back(&m, &Vector::from_vec(vec![t0, t1])))?;
    }

    #[test]
    fn bridge_epochs_have_scheme_structure(s in bridge_scheme(), log_m in 1u32..7, epochs in 1usize..6, seed in any::<u64>()) {
        check(inv::bridge_structure(&s, 1 << log_m, epochs, seed))?;
    }

    #[test]
    fn regime_sign_rule_holds(a in 0.01f64..10.0, b1 in 0.0f64..50.0, b2 in 0.0f64..50.0, batch in 0.1f64..200.0) {
        check(inv::regime_sign_rule(a, b1, b2, batch))?;
    }

    #[test]
    fn linear_error_terms_have_signs(kappa in 0.1f64..10.0, theta in -3.0f64..3.0, t in 0.05f64..3.0, b_eq in 0.0f64..5.0, s in 0.0f64..2.0) {
        check(inv::linear_error_shape(kappa, theta, t, b_eq, s))?;
    }

    #[test]
    fn replica_maps_are_deterministic(seed in any::<u64>()) {
        check(inv::determinism(seed))?;
    }

    #[test]
    fn schedule_is_a_decreasing_rate(c in 0.01f64..10.0, beta in 0.01f64..0.99, t in 0.0f64..1e4) {
        let s = Schedule::polynomial(c, beta).unwrap();
        prop_assert!(s.u(t) <= 1.0 && s.u(t) > 0.0);
        prop_assert!(s.u(t + 1.0) <= s.u(t));
        let du = s.integral(t + 1e-3) - s.integral(t);
        prop_assert!((du / 1e-3 - s.u(t)).abs() <= 1e-3 * c * beta + 1e-9);
    }
}
