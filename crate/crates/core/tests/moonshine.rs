use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use proptest::prelude::*;
use rumoon::data;
use rumoon::gauss::GaussRat;
use rumoon::moonshine::*;
use rumoon::qseries::EtaProduct;

fn quotient() -> impl Strategy<Value = EtaQuotient> {
    (
        prop::collection::btree_map(prop::sample::select(vec![1i64, 2, 3, 4, 6, 12]), -4i64..=4, 1..4),
        -20i64..=20,
        1i64..=5,
    )
        .prop_filter_map("nonzero", |(f, n, d)| {
            let factors: Vec<(i64, i64)> = f.into_iter().filter(|x| x.1 != 0).collect();
            (n != 0 && !factors.is_empty()).then(|| EtaQuotient {
                constant: BigRational::new(BigInt::from(n), BigInt::from(d)),
                product: EtaProduct::new(factors),
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn recognition_round_trips(q in quotient()) {
        let s = q.series(q.product.q_order() + 24 * 16);
        prop_assert_eq!(recognize_eta_quotient(&s, 12).unwrap(), q);
    }

    #[test]
    fn perturbed_series_are_rejected(q in quotient(), n in 1i64..=14) {
        let v = q.product.q_order();
        let mut s = q.series(v + 24 * 16);
        s.add_term(0, v + 24 * n, &GaussRat::from_ratio(1, 7));
        prop_assert!(recognize_eta_quotient(&s, 12).is_err());
    }
}

#[test]
fn character_matches_table_through_fifteen_halves() {
    let table = character_table().unwrap();
    let top = Ratio::new(15, 2);
    let ch = character(top).unwrap();
    assert!(table.len() > 40);
    for (d, c, v) in &table {
        for sign in [1, -1] {
            assert_eq!(ch.get(&(*d, sign * c)), Some(&GaussRat::from_bigint(v.clone())), "degree {d}, charge {c}");
        }
    }
    // the printed columns stop at charge 8
    let listed = table.len() * 2 - table.iter().filter(|t| t.1 == 0).count();
    assert_eq!(ch.keys().filter(|k| k.1.abs() <= 8).count(), listed, "no entries missing from the table");
}

#[test]
fn nonconstant_classes_are_the_ten() {
    let names: Vec<String> = class_table()
        .unwrap()
        .iter()
        .filter(|c| f_tilde(c, Side::A, 20).unwrap().quotient().is_some())
        .map(|c| c.name.clone())
        .collect();
    assert_eq!(names, ["2B", "10B", "14A", "14B", "14C", "26A", "26B", "26C", "29A", "29B"]);
}

#[test]
fn forall_leading_coefficient_is_reciprocal_trace() {
    for c in class_table().unwrap() {
        let (_, minus) = c.computed_traces().unwrap();
        match f_tilde(&c, Side::Forall, 20).unwrap() {
            FTilde::Quotient { quotient, .. } => {
                assert_eq!(GaussRat::new(quotient.constant.clone(), BigRational::from_integer(0.into())), minus.inv().unwrap());
            }
            FTilde::Infinite { .. } => assert!(minus.is_zero(), "{}", c.name),
            FTilde::Zero { .. } => panic!("{}: forall side vanishes", c.name),
        }
    }
}

#[test]
fn embedded_tables_match_manifest() {
    assert!(data::verify_manifest().is_empty());
}

#[test]
fn reports_are_deterministic() {
    let c = find_class("26B").unwrap();
    let a = serde_json::to_string(&class_report(&c, 20, 1e-9).unwrap()).unwrap();
    let b = serde_json::to_string(&class_report(&c, 20, 1e-9).unwrap()).unwrap();
    assert_eq!(a, b);
}
