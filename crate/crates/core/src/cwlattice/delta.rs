//! The quartic invariant `delta = sum lambda^4 + (lambda*)^4` over the norm-4
//! vectors, as two blocks of coefficients on degree-4 monomials in 28 variables.

use std::sync::OnceLock;

use super::{CwVector, MonomialElement, RANK};
use crate::gauss::Gi;

/// Number of degree-4 monomials in 28 variables.
pub const MONOMIALS: usize = 31465;

/// Stored coefficients are `2^SCALE_LOG2` times the true ones (doubled coordinates).
pub const SCALE_LOG2: u32 = 4;

struct Index {
    rank: Vec<u32>,
    unrank: Vec<[u8; 4]>,
}

fn index() -> &'static Index {
    static IDX: OnceLock<Index> = OnceLock::new();
    IDX.get_or_init(|| {
        let mut rank = vec![u32::MAX; RANK.pow(4)];
        let mut unrank = Vec::with_capacity(MONOMIALS);
        for a in 0..RANK {
            for b in a..RANK {
                for c in b..RANK {
                    for d in c..RANK {
                        rank[((a * RANK + b) * RANK + c) * RANK + d] = unrank.len() as u32;
                        unrank.push([a as u8, b as u8, c as u8, d as u8]);
                    }
                }
            }
        }
        Index { rank, unrank }
    })
}

/// Position of the sorted multi-index.
pub fn monomial_rank(mut m: [usize; 4]) -> usize {
    m.sort_unstable();
    index().rank[((m[0] * RANK + m[1]) * RANK + m[2]) * RANK + m[3]] as usize
}

pub fn monomial_at(r: usize) -> [u8; 4] {
    index().unrank[r]
}

/// Multinomial coefficient `4! / prod(count!)` of a sorted multi-index.
fn multinomial(m: &[u8; 4]) -> i64 {
    let mut out = 24;
    let mut run = 1;
    for t in 1..4 {
        if m[t] == m[t - 1] {
            run += 1;
            out /= run;
        } else {
            run = 1;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuarticInvariant {
    /// Coefficients of `sum lambda^4`.
    pub lam: Vec<Gi>,
    /// Coefficients of `sum (lambda*)^4`.
    pub star: Vec<Gi>,
}

fn add_fourth_power(block: &mut [Gi], nz: &[(usize, Gi)]) {
    let k = nz.len();
    for a in 0..k {
        for b in a..k {
            let ab = nz[a].1 * nz[b].1;
            for c in b..k {
                let abc = ab * nz[c].1;
                for d in c..k {
                    let m = [nz[a].0 as u8, nz[b].0 as u8, nz[c].0 as u8, nz[d].0 as u8];
                    let v = abc * nz[d].1;
                    let w = multinomial(&m);
                    block[monomial_rank([nz[a].0, nz[b].0, nz[c].0, nz[d].0])] += Gi::new(v.re * w, v.im * w);
                }
            }
        }
    }
}

impl QuarticInvariant {
    pub fn zero() -> Self {
        QuarticInvariant { lam: vec![Gi::ZERO; MONOMIALS], star: vec![Gi::ZERO; MONOMIALS] }
    }

    /// Adds `lambda^4 + (lambda*)^4` for each vector. The input should be the
    /// complete set of norm-4 vectors.
    pub fn from_vectors(vs: &[CwVector]) -> Self {
        let mut q = QuarticInvariant::zero();
        for v in vs {
            q.add_vector(v);
        }
        q
    }

    pub fn add_vector(&mut self, v: &CwVector) {
        let nz: Vec<(usize, Gi)> = v.coords.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(j, c)| (j, *c)).collect();
        add_fourth_power(&mut self.lam, &nz);
        let nz: Vec<(usize, Gi)> = nz.into_iter().map(|(j, c)| (j, c.conj())).collect();
        add_fourth_power(&mut self.star, &nz);
    }

    /// The image under `g`, acting on coefficients directly: `g` sends
    /// coordinate `j` to `phase_j` times coordinate `perm_j`, and the
    /// starred block sees the conjugate phases.
    pub fn transform(&self, g: &MonomialElement) -> Self {
        let (perm, phase) = g.monomial();
        let mut out = QuarticInvariant::zero();
        for r in 0..MONOMIALS {
            let m = monomial_at(r);
            let total: u32 = m.iter().map(|&j| phase[j as usize] as u32).sum();
            let target = monomial_rank(m.map(|j| perm[j as usize]));
            out.lam[target] = self.lam[r] * Gi::unit(total as i64);
            out.star[target] = self.star[r] * Gi::unit(-(total as i64));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.lam.iter().chain(&self.star).all(|c| c.is_zero())
    }

    pub fn nonzero_terms(&self) -> (usize, usize) {
        (self.lam.iter().filter(|c| !c.is_zero()).count(), self.star.iter().filter(|c| !c.is_zero()).count())
    }

    /// The starred block as a polynomial function evaluated at `x` (doubled coordinates).
    pub fn evaluate_star(&self, x: &CwVector) -> Gi {
        let mut acc = Gi::ZERO;
        for (r, c) in self.star.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let m = monomial_at(r);
            let mut t = *c;
            for j in m {
                t = t * x.coords[j as usize];
            }
            acc += t;
        }
        acc
    }

    /// Sorted `(multi-index, coefficient)` pairs, first block then starred block,
    /// as JSON lines.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for (name, block) in [("lambda", &self.lam), ("star", &self.star)] {
            for (r, c) in block.iter().enumerate() {
                if !c.is_zero() {
                    let m = monomial_at(r);
                    s.push_str(&format!(
                        "{{\"block\":\"{name}\",\"index\":[{},{},{},{}],\"coeff\":[{},{}]}}\n",
                        m[0], m[1], m[2], m[3], c.re, c.im
                    ));
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_a_bijection() {
        assert_eq!(index().unrank.len(), MONOMIALS);
        for r in [0, 1, 777, MONOMIALS - 1] {
            let m = monomial_at(r).map(|x| x as usize);
            assert_eq!(monomial_rank([m[3], m[1], m[0], m[2]]), r);
        }
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&[0, 0, 0, 0]), 1);
        assert_eq!(multinomial(&[0, 0, 1, 1]), 6);
        assert_eq!(multinomial(&[0, 1, 1, 1]), 4);
        assert_eq!(multinomial(&[0, 1, 2, 2]), 12);
        assert_eq!(multinomial(&[0, 1, 2, 3]), 24);
    }

    #[test]
    fn single_axis_vector() {
        let mut v = CwVector::zero();
        v.coords[0] = Gi::new(4, 0);
        let q = QuarticInvariant::from_vectors(&[v]);
        assert_eq!(q.lam[0], Gi::new(256, 0));
        assert_eq!(q.lam[0].re, 16 << SCALE_LOG2);
        assert_eq!(q.nonzero_terms(), (1, 1));
    }

    #[test]
    fn expansion_matches_direct_power() {
        let mut v = CwVector::zero();
        v.coords[2] = Gi::new(1, 1);
        v.coords[5] = Gi::new(0, -1);
        v.coords[9] = Gi::new(2, 0);
        let q = QuarticInvariant::from_vectors(&[v]);
        let mut x = CwVector::zero();
        x.coords[2] = Gi::new(3, 0);
        x.coords[5] = Gi::new(1, 2);
        x.coords[9] = Gi::new(-1, 1);
        let lin: Gi = (0..RANK).fold(Gi::ZERO, |a, j| a + v.coords[j].conj() * x.coords[j]);
        assert_eq!(q.evaluate_star(&x), lin * lin * lin * lin);
    }
}
