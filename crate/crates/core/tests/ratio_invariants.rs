use anticonc::bounds::TheoremId;
use anticonc::distributions::DistributionSpec;
use anticonc::estimators::exact_probability;
use anticonc::stress::{ratio, RatioSettings};
use anticonc::CoefficientVector;
use proptest::prelude::*;

const LIMIT: u64 = 1 << 20;

fn p(alpha: &[f64], beta: &[f64]) -> f64 {
    let a = CoefficientVector::new(alpha.to_vec()).unwrap();
    let b = CoefficientVector::new_allow_zero(beta.to_vec()).unwrap();
    exact_probability(&a, &b, &DistributionSpec::Rademacher, LIMIT).unwrap().value
}

// integer entries keep every sum exact, so equalities below are exact
fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec((-5i32..=5).prop_map(f64::from), n).prop_filter("nonzero", |v| v.iter().any(|&x| x != 0.0)),
            prop::collection::vec((-5i32..=5).prop_map(f64::from), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_is_a_probability((a, b) in pair()) {
        let v = p(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn joint_scaling_and_sign_flip_leave_p_unchanged((a, b) in pair(), k in -3i32..=3) {
        let c = 2f64.powi(k);
        let v = p(&a, &b);
        let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
        let nb: Vec<f64> = b.iter().map(|x| -x).collect();
        prop_assert_eq!(p(&sa, &sb), v);
        prop_assert_eq!(p(&a, &nb), v);
    }

    #[test]
    fn growing_beta_grows_p((a, b) in pair()) {
        let b2: Vec<f64> = b.iter().map(|x| 2.0 * x).collect();
        prop_assert!(p(&a, &b2) >= p(&a, &b));
    }

    #[test]
    fn joint_permutation_leaves_p_unchanged((a, b) in pair(), shift in 0usize..8) {
        let n = a.len();
        let ra: Vec<f64> = (0..n).map(|i| a[(i + shift) % n]).collect();
        let rb: Vec<f64> = (0..n).map(|i| b[(i + shift) % n]).collect();
        prop_assert_eq!(p(&ra, &rb), p(&a, &b));
    }

    #[test]
    fn ratio_is_estimate_over_rhs((a, b) in pair()) {
        let a = CoefficientVector::new(a).unwrap();
        let b = CoefficientVector::new_allow_zero(b).unwrap();
        let r = ratio(&a, &b, &DistributionSpec::Rademacher, TheoremId::Conjecture, &RatioSettings::default(), 1).unwrap();
        prop_assert!(r.bound.rhs > 0.0);
        prop_assert_eq!(r.ratio, r.estimate.value / r.bound.rhs);
        prop_assert!(r.ratio_lo() <= r.ratio && r.ratio <= r.ratio_hi());
    }
}
