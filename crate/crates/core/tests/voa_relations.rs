//! Mode relations on the canonically twisted module, over the same window as
//! the untwisted checks in the acceptance suite.

use num_rational::Ratio;
use rumoon::weylvoa::{graded_dims, count_basis, Sector, WeylModule};

#[test]
fn twisted_relations_hold() {
    for n in 1..=3u8 {
        let w = WeylModule::new(n, Sector::Twisted);
        let win = w.basis(Ratio::from_integer(4), Some((-2, 2))).unwrap();
        assert_eq!(count_basis(&w, &win), graded_dims(n as u32, Sector::Twisted, Ratio::from_integer(4), Some((-2, 2))).unwrap());
        let mut reports = w.check_relations(&win, 3);
        reports.push(w.check_gradings(&win));
        for r in reports {
            assert!(r.checked > 0);
            assert!(r.passed(), "N = {n}, {}: {:?}", r.relation, &r.failures[..r.failures.len().min(3)]);
        }
    }
}
