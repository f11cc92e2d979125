//! Graded dimensions of the Weyl module counted two ways: the mode-by-mode
//! count in `weylvoa` against the series coefficients of `1/phi(1^N)`.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rumoon::frameshape::WeakFrameShape;
use rumoon::moonshine;
use rumoon::qseries::Q_DEN;
use rumoon::weylvoa::{graded_dims, Sector};

fn from_series(n: i64, max_degree: Ratio<i64>) -> BTreeMap<(Ratio<i64>, Ratio<i64>), u128> {
    let shape: WeakFrameShape = format!("1^{n}").parse().unwrap();
    let s = shape.phi_inverse((max_degree * Q_DEN).to_integer() + n).unwrap();
    s.terms()
        .map(|(p, q, c)| {
            let v = c.to_integer().expect("integral coefficient").to_u128().expect("positive coefficient");
            ((Ratio::new(q - n, Q_DEN), Ratio::new(p, 2)), v)
        })
        .collect()
}

#[test]
fn counts_match_series_for_small_n() {
    let top = Ratio::from_integer(4);
    for n in 1..=3 {
        let dims = graded_dims(n as u32, Sector::Untwisted, top, None).unwrap();
        let series = from_series(n, top);
        assert_eq!(dims, series, "N = {n}");
        assert!(dims.len() > 10);
    }
}

#[test]
fn rank_28_counts_match_series_and_table() {
    let top = Ratio::new(7, 2);
    let dims = graded_dims(28, Sector::Untwisted, top, None).unwrap();
    assert_eq!(dims, from_series(28, top));
    for (d, c, v) in moonshine::character_table().unwrap() {
        if d <= top {
            for sign in [1, -1] {
                let got = dims.get(&(d, Ratio::from_integer(sign * c))).copied().unwrap_or(0);
                assert_eq!(got, v.to_u128().unwrap(), "degree {d}, charge {}", sign * c);
            }
        }
    }
}
