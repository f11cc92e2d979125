use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;
use rumoon::gauss::GaussRat;
use rumoon::qseries::{eta_direct, theta_factored, theta_sum, EtaProduct, TwoVarSeries};

const CUT: i64 = 96;

fn coeff() -> impl Strategy<Value = GaussRat> {
    (-3i64..=3, -2i64..=2, 1i64..=3).prop_map(|(a, b, d)| {
        GaussRat::new(BigRational::new(a.into(), d.into()), BigRational::from_integer(b.into()))
    })
}

fn series() -> impl Strategy<Value = TwoVarSeries> {
    prop::collection::vec((-4i64..=4, 0i64..=CUT, coeff()), 0..8).prop_map(|t| TwoVarSeries::from_terms(t, CUT))
}

/// Equality through the precision both sides know.
fn agree(a: &TwoVarSeries, b: &TwoVarSeries) -> bool {
    let c = a.q_cutoff().min(b.q_cutoff());
    a.truncate(c) == b.truncate(c)
}

/// A unit monomial times `1 + (higher q-order terms)`.
fn invertible() -> impl Strategy<Value = TwoVarSeries> {
    (-3i64..=3, 0i64..=12, coeff().prop_filter("nonzero", |c| !c.is_zero()), series()).prop_map(|(p, q, c, rest)| {
        let lead = TwoVarSeries::monomial(c, p, q, CUT);
        let tail = TwoVarSeries::from_terms(rest.terms().filter(|t| t.1 > q).map(|(a, b, c)| (a, b, c.clone())), CUT);
        lead.add(&tail)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_is_associative(a in series(), b in series(), c in series()) {
        prop_assert!(agree(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c))));
    }

    #[test]
    fn multiplication_commutes(a in series(), b in series()) {
        prop_assert!(agree(&a.mul(&b), &b.mul(&a)));
    }

    #[test]
    fn multiplication_distributes(a in series(), b in series(), c in series()) {
        prop_assert!(agree(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c))));
    }

    #[test]
    fn addition_has_inverses(a in series()) {
        prop_assert!(a.add(&a.neg()).is_zero());
    }

    #[test]
    fn inverse_times_series_is_one(a in invertible()) {
        let inv = a.invert().unwrap();
        let prod = a.mul(&inv);
        let one = TwoVarSeries::one(prod.q_cutoff());
        prop_assert_eq!(prod, one);
    }

    #[test]
    fn triple_product(k in 1i64..=4, phase in 0i64..4, shift in any::<bool>()) {
        let a = BigRational::new(phase.into(), 4.into());
        let cut = 24 * 20;
        let f = theta_factored(k, &a, shift, cut).unwrap().expand(cut).unwrap();
        prop_assert_eq!(f, theta_sum(k, &a, shift, cut).unwrap());
    }

    #[test]
    fn eta_inversion(x in -0.5f64..0.5, y in 0.4f64..2.0) {
        let tau = Complex64::new(x, y);
        let lhs = eta_direct(-1.0 / tau).unwrap();
        let rhs = (Complex64::new(0.0, -1.0) * tau).sqrt() * eta_direct(tau).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-9);
    }

    #[test]
    fn eta_product_inverse(f in prop::collection::vec((1i64..=6, -3i64..=3), 1..4)) {
        let e = EtaProduct::new(f);
        let s = e.series(24 * 12);
        let t = e.inverse().series(24 * 12);
        let prod = s.mul(&t);
        prop_assert_eq!(prod.truncate(24 * 10), TwoVarSeries::one(24 * 10));
    }
}

#[test]
fn eta_inversion_at_five_points() {
    for (x, y) in [(0.0, 1.0), (0.3, 0.5), (-0.2, 0.8), (0.45, 1.5), (0.1, 0.35)] {
        let tau = Complex64::new(x, y);
        let lhs = eta_direct(-1.0 / tau).unwrap();
        let rhs = (Complex64::new(0.0, -1.0) * tau).sqrt() * eta_direct(tau).unwrap();
        assert!((lhs - rhs).norm() <= 1e-9, "{tau}");
    }
}
