//! Property tests over randomized inputs: exactness of the rational
//! arithmetic, combinatorial identities, and structural invariants of the
//! evaluators.

use num::{BigInt, BigRational, One, Signed, Zero};
use proptest::prelude::*;
use runprob::{
    beta_exact, binomial_exact, parse_probability, series_coefficients, z_bruteforce,
    z_closed_form, z_recurrence, BetaExpansion, RunQuery,
};

fn small_rational() -> impl Strategy<Value = BigRational> {
    (any::<i32>(), 1..=u16::MAX).prop_map(|(n, d)| {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    })
}

/// Probabilities strictly inside [0, 1] with small denominators.
fn probability() -> impl Strategy<Value = BigRational> {
    (1u32..=99, 100u32..=107)
        .prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
}

proptest! {
    #[test]
    fn rational_arithmetic_is_exact(a in small_rational(), b in small_rational()) {
        // (a + b) - b == a, exactly; floats famously fail this
        prop_assert_eq!((&a + &b) - &b, a.clone());
        if !b.is_zero() {
            prop_assert_eq!((&a * &b) / &b, a);
        }
    }

    #[test]
    fn canonical_form_is_idempotent(a in small_rational(), k in 1..=1000i64) {
        // building from scaled parts lands on the same canonical value
        let scaled = BigRational::new(a.numer() * BigInt::from(k), a.denom() * BigInt::from(k));
        prop_assert_eq!(&scaled, &a);
        prop_assert!(scaled.denom().is_positive());
        let rebuilt = BigRational::new(scaled.numer().clone(), scaled.denom().clone());
        prop_assert_eq!(rebuilt, a);
    }

    #[test]
    fn binomial_symmetry(a in 0u64..=80, b in 0u64..=80) {
        if b <= a {
            prop_assert_eq!(binomial_exact(a, b), binomial_exact(a, a - b));
        } else {
            prop_assert_eq!(binomial_exact(a, b), BigInt::zero());
        }
    }

    #[test]
    fn beta_pair_enumeration(n in 0u64..=120, r in 1u32..=10, p in probability()) {
        let expansion = BetaExpansion::new(n, r, &p).unwrap();
        prop_assert_eq!(expansion.l_max, n / (r as u64 + 1));
        for term in &expansion.terms {
            prop_assert_eq!(term.l * r as u64 + term.k, n);
            prop_assert!(term.l <= term.k);
        }
        prop_assert_eq!(expansion.value(), beta_exact(n as i64, r, &p).unwrap());
    }

    #[test]
    fn closed_form_equals_recurrence(n in 0u64..=150, r in 1u32..=9, p in probability()) {
        let query = RunQuery::new(p, r, n).unwrap();
        let a = z_closed_form(&query).unwrap();
        let b = z_recurrence(&query).unwrap();
        prop_assert_eq!(a.z.exact().unwrap(), b.z.exact().unwrap());
    }

    #[test]
    fn series_row_is_monotone_probabilities(r in 1u32..=8, p in probability()) {
        let cache = series_coefficients(&p, r, 80).unwrap();
        let cs = cache.coefficients();
        prop_assert_eq!(&cs[0], &BigRational::one());
        for m in 1..cs.len() {
            prop_assert!(cs[m] <= cs[m - 1]);
            prop_assert!(!cs[m].is_negative());
        }
    }

    #[test]
    fn brute_force_agrees_on_random_small_queries(
        n in 0u64..=12,
        r in 1u32..=12,
        p in probability(),
    ) {
        let query = RunQuery::new(p, r, n).unwrap();
        let brute = z_bruteforce(&query).unwrap();
        let closed = z_closed_form(&query).unwrap();
        prop_assert_eq!(brute.z.exact().unwrap(), closed.z.exact().unwrap());
    }

    #[test]
    fn complement_sums_to_one(n in 0u64..=60, r in 1u32..=6, p in probability()) {
        let query = RunQuery::new(p, r, n).unwrap();
        let res = z_closed_form(&query).unwrap();
        let total = res.z.exact().unwrap() + res.y.exact().unwrap();
        prop_assert_eq!(total, BigRational::one());
    }

    #[test]
    fn probability_strings_round_trip(p in probability()) {
        let s = p.to_string();
        prop_assert_eq!(parse_probability(&s).unwrap(), p);
    }
}
