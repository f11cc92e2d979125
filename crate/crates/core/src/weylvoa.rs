//! The Weyl-module vertex algebra on `u = a + a*` with `dim a = N`, and its
//! canonically twisted module, realized on explicit truncated bases.
//!
//! Modes obey `[u(r), v(s)] = -2 <<u, v>> delta_{r+s,0}` with
//! `<<a_i, a*_j>> = -<<a*_i, a_j>> = (i/2) delta_ij`. States are monomials in
//! commuting creation modes applied to the vacuum; mode indices are stored
//! doubled so both sectors use integers.
//!
//! The current `J(0)` acts by `i * (#a - #a*)` on these monomials, so the
//! integer charge is `-i J(0)`; with that sign `a_i(-1/2)` has charge `+1`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_integer::{binomial, Integer};
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::gauss::GaussRat;

type Q = Ratio<i64>;

/// Largest basis the builders will materialize.
pub const MAX_BASIS: usize = 2_000_000;
/// Largest `N` for which mode matrices are built.
pub const MAX_MATRIX_N: u8 = 4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VoaError {
    #[error("mode {0}/2 does not belong to the {1} sector")]
    SectorMismatch(i64, &'static str),
    #[error("label index {0} out of range for N = {1}")]
    Index(u8, u8),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("unsupported state: {0}")]
    Unsupported(String),
}

/// Gaussian rationals `(re + i im) / den` over `i64`, kept in lowest terms with
/// `den > 0`; one gcd pass per operation keeps the mode algebra fast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Qi {
    re: i64,
    im: i64,
    den: i64,
}

fn ck(x: Option<i64>) -> i64 {
    x.expect("Gaussian rational overflowed i64")
}

impl Qi {
    fn reduced(re: i64, im: i64, den: i64) -> Self {
        let g = re.gcd(&im).gcd(&den);
        let g = if den < 0 { -g } else { g };
        if g == 1 {
            Qi { re, im, den }
        } else {
            Qi { re: re / g, im: im / g, den: den / g }
        }
    }
    pub fn new(re: Q, im: Q) -> Self {
        let den = ck(re.denom().lcm(im.denom()).checked_mul(1));
        Qi::reduced(re.numer() * (den / re.denom()), im.numer() * (den / im.denom()), den)
    }
    pub fn zero() -> Self {
        Qi { re: 0, im: 0, den: 1 }
    }
    pub fn one() -> Self {
        Qi { re: 1, im: 0, den: 1 }
    }
    pub fn i() -> Self {
        Qi { re: 0, im: 1, den: 1 }
    }
    pub fn real(r: Q) -> Self {
        Qi::reduced(*r.numer(), 0, *r.denom())
    }
    pub fn int(n: i64) -> Self {
        Qi { re: n, im: 0, den: 1 }
    }
    pub fn re(&self) -> Q {
        Q::new(self.re, self.den)
    }
    pub fn im(&self) -> Q {
        Q::new(self.im, self.den)
    }
    pub fn is_zero(&self) -> bool {
        self.re == 0 && self.im == 0
    }
    /// `i^k`.
    pub fn unit(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Qi::one(),
            1 => Qi::i(),
            2 => -Qi::one(),
            _ => -Qi::i(),
        }
    }
    pub fn to_gauss(&self) -> GaussRat {
        let c = |r: Q| num_rational::BigRational::new((*r.numer()).into(), (*r.denom()).into());
        GaussRat::new(c(self.re()), c(self.im()))
    }
    pub fn to_json(&self) -> Value {
        let (re, im) = (self.re(), self.im());
        json!([re.numer(), re.denom(), im.numer(), im.denom()])
    }
}

impl Add for Qi {
    type Output = Qi;
    fn add(self, o: Qi) -> Qi {
        if self.den == o.den {
            return Qi::reduced(ck(self.re.checked_add(o.re)), ck(self.im.checked_add(o.im)), self.den);
        }
        let l = self.den.lcm(&o.den);
        let (a, b) = (l / self.den, l / o.den);
        Qi::reduced(
            ck(ck(self.re.checked_mul(a)).checked_add(ck(o.re.checked_mul(b)))),
            ck(ck(self.im.checked_mul(a)).checked_add(ck(o.im.checked_mul(b)))),
            l,
        )
    }
}
impl AddAssign for Qi {
    fn add_assign(&mut self, o: Qi) {
        *self = *self + o;
    }
}
impl Sub for Qi {
    type Output = Qi;
    fn sub(self, o: Qi) -> Qi {
        self + (-o)
    }
}
impl Neg for Qi {
    type Output = Qi;
    fn neg(self) -> Qi {
        Qi { re: -self.re, im: -self.im, den: self.den }
    }
}
impl Mul for Qi {
    type Output = Qi;
    fn mul(self, o: Qi) -> Qi {
        let m = |x: i64, y: i64| ck(x.checked_mul(y));
        Qi::reduced(
            ck(m(self.re, o.re).checked_sub(m(self.im, o.im))),
            ck(m(self.re, o.im).checked_add(m(self.im, o.re))),
            m(self.den, o.den),
        )
    }
}
impl Mul<Q> for Qi {
    type Output = Qi;
    fn mul(self, o: Q) -> Qi {
        self * Qi::real(o)
    }
}

impl fmt::Display for Qi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_gauss())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sector {
    Untwisted,
    Twisted,
}

impl Sector {
    fn name(self) -> &'static str {
        match self {
            Sector::Untwisted => "untwisted",
            Sector::Twisted => "twisted",
        }
    }
}

/// `a_i` (star = false) or `a*_i` (star = true); indices start at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub star: bool,
    pub index: u8,
}

impl Label {
    pub fn a(index: u8) -> Self {
        Label { star: false, index }
    }
    pub fn astar(index: u8) -> Self {
        Label { star: true, index }
    }
}

/// The mode `label(twice / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub twice: i32,
    pub label: Label,
}

/// A monomial in creation modes applied to the vacuum, modes sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GradedState {
    modes: Vec<Mode>,
}

impl GradedState {
    pub fn vacuum() -> Self {
        GradedState::default()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    fn with(&self, m: Mode) -> Self {
        let mut modes = self.modes.clone();
        let pos = modes.partition_point(|x| *x <= m);
        modes.insert(pos, m);
        GradedState { modes }
    }

    fn without(&self, pos: usize) -> Self {
        let mut modes = self.modes.clone();
        modes.remove(pos);
        GradedState { modes }
    }

    /// Twice the sum of the mode depths.
    pub fn twice_depth(&self) -> i64 {
        self.modes.iter().map(|m| -(m.twice as i64)).sum()
    }

    /// `#a - #a*`.
    pub fn raw_charge(&self) -> i64 {
        self.modes.iter().map(|m| if m.label.star { -1 } else { 1 }).sum()
    }
}

impl fmt::Display for GradedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modes {
            let star = if m.label.star { "*" } else { "" };
            write!(f, "a{star}{}({})", m.label.index + 1, Q::new(m.twice as i64, 2))?;
        }
        write!(f, "|0>")
    }
}

pub type Vector = BTreeMap<GradedState, Qi>;

fn add_into(v: &mut Vector, s: GradedState, c: Qi) {
    if c.is_zero() {
        return;
    }
    match v.entry(s) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

fn add_vec(acc: &mut Vector, v: &Vector, c: Qi) {
    for (s, x) in v {
        add_into(acc, s.clone(), *x * c);
    }
}

pub fn single(s: GradedState) -> Vector {
    BTreeMap::from([(s, Qi::one())])
}

/// A mode operator label for matrices and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    L(i64),
    J(i64),
    Raw(Label, i32),
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::L(m) => write!(f, "L({m})"),
            Operator::J(m) => write!(f, "J({m})"),
            Operator::Raw(l, t) => {
                let star = if l.star { "*" } else { "" };
                write!(f, "a{star}{}({})", l.index + 1, Q::new(*t as i64, 2))
            }
        }
    }
}

/// `W(u)` or its twisted module for `dim a = n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeylModule {
    pub n: u8,
    pub sector: Sector,
}

impl WeylModule {
    pub fn new(n: u8, sector: Sector) -> Self {
        WeylModule { n, sector }
    }

    /// `L(0)` eigenvalue of a monomial.
    pub fn degree(&self, s: &GradedState) -> Q {
        Q::new(s.twice_depth(), 2) + self.vacuum_degree()
    }

    /// `-N/8` in the twisted sector, from `Y(omega, z) 1 = -(N/8) z^-2`.
    pub fn vacuum_degree(&self) -> Q {
        match self.sector {
            Sector::Untwisted => Q::zero(),
            Sector::Twisted => Q::new(-(self.n as i64), 8),
        }
    }

    /// `-i J(0)` eigenvalue; the twisted vacuum carries `N/2`.
    pub fn charge(&self, s: &GradedState) -> Q {
        Q::from_integer(s.raw_charge()) + self.vacuum_charge()
    }

    pub fn vacuum_charge(&self) -> Q {
        match self.sector {
            Sector::Untwisted => Q::zero(),
            Sector::Twisted => Q::new(self.n as i64, 2),
        }
    }

    fn check(&self, u: Label, twice: i32) -> Result<(), VoaError> {
        if u.index >= self.n {
            return Err(VoaError::Index(u.index, self.n));
        }
        let odd = twice.rem_euclid(2) == 1;
        match (self.sector, odd) {
            (Sector::Untwisted, true) | (Sector::Twisted, false) => Ok(()),
            _ => Err(VoaError::SectorMismatch(twice as i64, self.sector.name())),
        }
    }

    fn is_creator(&self, u: Label, twice: i32) -> bool {
        twice < 0 || (twice == 0 && !u.star)
    }

    /// `[u(r), v(-r)] = -2 <<u, v>>`.
    pub fn bracket(u: Label, v: Label) -> Qi {
        if u.index != v.index || u.star == v.star {
            Qi::zero()
        } else if u.star {
            Qi::i()
        } else {
            -Qi::i()
        }
    }

    /// `u(twice/2)` applied to a vector, reduced to normal form.
    pub fn apply_mode(&self, u: Label, twice: i32, v: &Vector) -> Result<Vector, VoaError> {
        self.check(u, twice)?;
        Ok(self.apply_mode_unchecked(u, twice, v))
    }

    fn apply_mode_unchecked(&self, u: Label, twice: i32, v: &Vector) -> Vector {
        let mut out = Vector::new();
        if self.is_creator(u, twice) {
            let m = Mode { twice, label: u };
            for (s, c) in v {
                add_into(&mut out, s.with(m), *c);
            }
            return out;
        }
        for (s, c) in v {
            let mut pos = 0;
            while pos < s.modes.len() {
                let m = s.modes[pos];
                let run = s.modes[pos..].iter().take_while(|x| **x == m).count();
                if m.twice == -twice {
                    let b = Self::bracket(u, m.label);
                    if !b.is_zero() {
                        add_into(&mut out, s.without(pos), *c * b * Qi::int(run as i64));
                    }
                }
                pos += run;
            }
        }
        out
    }

    /// A linear combination of labels at one mode.
    pub fn apply_linear(&self, u: &[(Label, Qi)], twice: i32, v: &Vector) -> Result<Vector, VoaError> {
        let mut out = Vector::new();
        for (l, c) in u {
            let w = self.apply_mode(*l, twice, v)?;
            add_vec(&mut out, &w, *c);
        }
        Ok(out)
    }

    /// One mode on one monomial: creators insert, annihilators contract with the
    /// unique matching run, so the image is at most one monomial.
    fn mode_on_monomial(&self, u: Label, twice: i32, s: &GradedState) -> Option<(GradedState, Qi)> {
        if self.is_creator(u, twice) {
            return Some((s.with(Mode { twice, label: u }), Qi::one()));
        }
        let target = Mode { twice: -twice, label: Label { star: !u.star, index: u.index } };
        let pos = s.modes.iter().position(|m| *m == target)?;
        let run = s.modes[pos..].iter().take_while(|m| **m == target).count();
        Some((s.without(pos), Self::bracket(u, target.label) * Qi::int(run as i64)))
    }

    fn two_modes(&self, outer: (Label, i32), inner: (Label, i32), s: &GradedState) -> Option<(GradedState, Qi)> {
        let (s1, c1) = self.mode_on_monomial(inner.0, inner.1, s)?;
        let (s2, c2) = self.mode_on_monomial(outer.0, outer.1, &s1)?;
        Some((s2, c1 * c2))
    }

    /// `:u(r) v(s):` on a monomial, following the bosonic normal ordering: modes
    /// ascending, with a block of zero modes symmetrized.
    fn normal_pair(&self, u: Label, r: i32, v: Label, t: i32, s: &GradedState, w: Qi, out: &mut Vec<(GradedState, Qi)>) {
        if r == 0 && t == 0 {
            let half = w * Qi::real(Q::new(1, 2));
            for (outer, inner) in [((u, 0), (v, 0)), ((v, 0), (u, 0))] {
                if let Some((st, c)) = self.two_modes(outer, inner, s) {
                    out.push((st, c * half));
                }
            }
            return;
        }
        let pair = if r <= t { ((u, r), (v, t)) } else { ((v, t), (u, r)) };
        if let Some((st, c)) = self.two_modes(pair.0, pair.1, s) {
            out.push((st, c * w));
        }
    }

    /// The doubled modes `r` with `r + s = 2m` that can act nontrivially on a
    /// state of doubled depth `d`: the right-hand factor must not exceed `d`.
    fn split_range(&self, m: i64, d: i64) -> impl Iterator<Item = (i32, i32)> {
        let parity = match self.sector {
            Sector::Untwisted => 1,
            Sector::Twisted => 0,
        };
        let lo = 2 * m - d;
        (lo..=d).filter(move |r| r.rem_euclid(2) == parity).map(move |r| (r as i32, (2 * m - r) as i32))
    }

    fn on_states<F>(&self, v: &Vector, f: F) -> Vector
    where
        F: Fn(&GradedState, &mut Vec<(GradedState, Qi)>),
    {
        let mut buf = Vec::new();
        for (s, c) in v {
            let start = buf.len();
            f(s, &mut buf);
            for e in &mut buf[start..] {
                e.1 = e.1 * *c;
            }
        }
        let mut out = Vector::new();
        for (s, c) in buf {
            add_into(&mut out, s, c);
        }
        out
    }

    /// `L(m)` from `omega = (i/2) sum_i (a_i(-1/2) a*_i(-3/2) - a*_i(-1/2) a_i(-3/2)) 1`,
    /// plus the `-N/8` shift of `L(0)` on the twisted module.
    pub fn apply_l(&self, m: i64, v: &Vector) -> Vector {
        let half_i = Qi::new(Q::zero(), Q::new(1, 2));
        let mut out = self.on_states(v, |s, buf| {
            for (r, t) in self.split_range(m, s.twice_depth()) {
                // derivative weight -s - 1/2
                let w = Qi::real(Q::new(-(t as i64) - 1, 2)) * half_i;
                for i in 0..self.n {
                    self.normal_pair(Label::a(i), r, Label::astar(i), t, s, w, buf);
                    self.normal_pair(Label::astar(i), r, Label::a(i), t, s, -w, buf);
                }
            }
        });
        if m == 0 && self.sector == Sector::Twisted {
            add_vec(&mut out, v, Qi::real(self.vacuum_degree()));
        }
        out
    }

    /// `J(m)` from `j = sum_i a_i(-1/2) a*_i(-1/2) 1`.
    pub fn apply_j(&self, m: i64, v: &Vector) -> Vector {
        self.on_states(v, |s, buf| {
            for (r, t) in self.split_range(m, s.twice_depth()) {
                for i in 0..self.n {
                    self.normal_pair(Label::a(i), r, Label::astar(i), t, s, Qi::one(), buf);
                }
            }
        })
    }

    pub fn apply(&self, op: Operator, v: &Vector) -> Result<Vector, VoaError> {
        match op {
            Operator::L(m) => Ok(self.apply_l(m, v)),
            Operator::J(m) => Ok(self.apply_j(m, v)),
            Operator::Raw(l, t) => self.apply_mode(l, t, v),
        }
    }

    /// `exp(pi J(0) / 2)`, which multiplies a state of charge `c` by `e^{i pi c / 2}`;
    /// defined for integer charges.
    pub fn charge_rotation(&self, v: &Vector) -> Result<Vector, VoaError> {
        let mut out = Vector::new();
        for (s, c) in v {
            let q = self.charge(s);
            if !q.is_integer() {
                return Err(VoaError::Unsupported(format!("charge {q} is not an integer")));
            }
            add_into(&mut out, s.clone(), *c * Qi::unit(q.to_integer()));
        }
        Ok(out)
    }

    /// The parity involution: `(-1)^(number of modes)`.
    pub fn parity(&self, v: &Vector) -> Vector {
        v.iter()
            .map(|(s, c)| (s.clone(), if s.modes.len() % 2 == 0 { *c } else { -*c }))
            .collect()
    }

    /// All monomials with degree at most `max_degree`. The twisted sector needs a
    /// window on `#a - #a*` because the zero modes `a_i(0)` cost no degree.
    pub fn basis(&self, max_degree: Q, raw_charge: Option<(i64, i64)>) -> Result<Vec<GradedState>, VoaError> {
        let d2 = ((max_degree - self.vacuum_degree()) * 2).floor().to_integer();
        let mut creators = Vec::new();
        let start = match self.sector {
            Sector::Untwisted => 1,
            Sector::Twisted => 2,
        };
        let mut t = start;
        while t <= d2 {
            for i in 0..self.n {
                creators.push(Mode { twice: -(t as i32), label: Label::a(i) });
                creators.push(Mode { twice: -(t as i32), label: Label::astar(i) });
            }
            t += 2;
        }
        let mut nonzero = Vec::new();
        let mut cur = Vec::new();
        multisets(&creators, 0, d2, &mut cur, &mut nonzero)?;
        let mut out = Vec::new();
        match self.sector {
            Sector::Untwisted => {
                for s in nonzero {
                    if raw_charge.is_none_or(|(lo, hi)| (lo..=hi).contains(&s.raw_charge())) {
                        out.push(s);
                    }
                }
            }
            Sector::Twisted => {
                let (lo, hi) = raw_charge.ok_or_else(|| VoaError::Resource("twisted basis needs a charge window".into()))?;
                for s in nonzero {
                    let c0 = s.raw_charge();
                    for k in (lo - c0).max(0)..=(hi - c0) {
                        for z in zero_mode_multisets(self.n, k as usize) {
                            let mut modes = z;
                            modes.extend(s.modes.iter().copied());
                            modes.sort();
                            out.push(GradedState { modes });
                            if out.len() > MAX_BASIS {
                                return Err(VoaError::Resource(format!("more than {MAX_BASIS} states")));
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (self.degree(a), self.charge(a), a).cmp(&(self.degree(b), self.charge(b), b))
        });
        Ok(out)
    }

    /// The matrix of `op` on `domain`; rows are the states reached.
    pub fn mode_matrix(&self, op: Operator, domain: &[GradedState]) -> Result<ModeMatrix, VoaError> {
        if self.n > MAX_MATRIX_N {
            return Err(VoaError::Resource(format!("matrices are limited to N <= {MAX_MATRIX_N}")));
        }
        let cols: Vec<Vector> = domain.par_iter().map(|s| self.apply(op, &single(s.clone()))).collect::<Result<_, _>>()?;
        let mut rows: BTreeMap<GradedState, usize> = BTreeMap::new();
        for c in &cols {
            for s in c.keys() {
                let k = rows.len();
                rows.entry(s.clone()).or_insert(k);
            }
        }
        let mut entries = Vec::new();
        for (j, c) in cols.iter().enumerate() {
            for (s, x) in c {
                entries.push((rows[s], j, *x));
            }
        }
        let mut row_states = vec![GradedState::vacuum(); rows.len()];
        for (s, i) in rows {
            row_states[i] = s;
        }
        entries.sort_by_key(|e| (e.0, e.1));
        Ok(ModeMatrix { operator: op, rows: row_states, cols: domain.to_vec(), entries })
    }

    /// `Delta_z a = -(1/2) sum_i sum_{m,n >= 0} C_mn e_i'(m+1/2) e_i(n+1/2) a z^{-m-n-1}`
    /// for `a` in the untwisted module, with `e_i = a_i + a*_i`, `e_i' = i(a_i - a*_i)`.
    /// Keys are powers of `z`.
    pub fn delta_z(&self, a: &Vector) -> Result<BTreeMap<i64, Vector>, VoaError> {
        if self.sector != Sector::Untwisted {
            return Err(VoaError::Unsupported("Delta_z acts on the untwisted module".into()));
        }
        let depth = a.keys().map(|s| s.twice_depth()).max().unwrap_or(0);
        let mut out: BTreeMap<i64, Vector> = BTreeMap::new();
        for i in 0..self.n {
            let e = [(Label::a(i), Qi::one()), (Label::astar(i), Qi::one())];
            let ep = [(Label::a(i), Qi::i()), (Label::astar(i), -Qi::i())];
            let mut n = 0i64;
            while 2 * n + 1 <= depth {
                let y = self.apply_linear(&e, (2 * n + 1) as i32, a)?;
                if !y.is_empty() {
                    let mut m = 0i64;
                    while 2 * m + 1 <= depth {
                        let c = c_mn(m, n);
                        if !c.is_zero() {
                            let w = self.apply_linear(&ep, (2 * m + 1) as i32, &y)?;
                            let slot = out.entry(-m - n - 1).or_default();
                            add_vec(slot, &w, Qi::real(c * Q::new(-1, 2)));
                        }
                        m += 1;
                    }
                }
                n += 1;
            }
        }
        out.retain(|_, v| !v.is_empty());
        Ok(out)
    }

    /// `Delta_z^2 a`.
    pub fn delta_z_squared(&self, a: &Vector) -> Result<BTreeMap<i64, Vector>, VoaError> {
        let mut out: BTreeMap<i64, Vector> = BTreeMap::new();
        for (p, v) in self.delta_z(a)? {
            for (p2, w) in self.delta_z(&v)? {
                add_vec(out.entry(p + p2).or_default(), &w, Qi::one());
            }
        }
        out.retain(|_, v| !v.is_empty());
        Ok(out)
    }

    /// `omega` written in the `a`-basis.
    pub fn omega(&self) -> Vector {
        let half_i = Qi::new(Q::zero(), Q::new(1, 2));
        let mut v = Vector::new();
        for i in 0..self.n {
            let s1 = GradedState::vacuum().with(Mode { twice: -1, label: Label::a(i) }).with(Mode { twice: -3, label: Label::astar(i) });
            let s2 = GradedState::vacuum().with(Mode { twice: -1, label: Label::astar(i) }).with(Mode { twice: -3, label: Label::a(i) });
            add_into(&mut v, s1, half_i);
            add_into(&mut v, s2, -half_i);
        }
        v
    }

    /// `omega = (1/4) sum_i (e_i'(-1/2) e_i(-3/2) - e_i(-1/2) e_i'(-3/2)) 1`, built
    /// by applying the `e`-basis modes.
    pub fn omega_e_basis(&self) -> Vector {
        let mut v = Vector::new();
        let vac = single(GradedState::vacuum());
        for i in 0..self.n {
            let e = [(Label::a(i), Qi::one()), (Label::astar(i), Qi::one())];
            let ep = [(Label::a(i), Qi::i()), (Label::astar(i), -Qi::i())];
            let t1 = self.apply_linear(&ep, -1, &self.apply_linear(&e, -3, &vac).expect("creators")).expect("creators");
            let t2 = self.apply_linear(&e, -1, &self.apply_linear(&ep, -3, &vac).expect("creators")).expect("creators");
            add_vec(&mut v, &t1, Qi::real(Q::new(1, 4)));
            add_vec(&mut v, &t2, Qi::real(Q::new(-1, 4)));
        }
        v
    }

    /// `e_i'(-1/2) e_i(-3/2) 1` (`first_primed`) or `e_i(-1/2) e_i'(-3/2) 1`.
    pub fn e_pair_state(&self, i: u8, first_primed: bool) -> Vector {
        let vac = single(GradedState::vacuum());
        let e = [(Label::a(i), Qi::one()), (Label::astar(i), Qi::one())];
        let ep = [(Label::a(i), Qi::i()), (Label::astar(i), -Qi::i())];
        let (outer, inner) = if first_primed { (&ep, &e) } else { (&e, &ep) };
        let x = self.apply_linear(inner, -3, &vac).expect("creator");
        self.apply_linear(outer, -1, &x).expect("creator")
    }
}

/// `C_mn = (1/2) (m - n)/(m + n + 1) binom(-1/2, m) binom(-1/2, n)`.
pub fn c_mn(m: i64, n: i64) -> Q {
    let b = |k: i64| Q::new(if k % 2 == 0 { 1 } else { -1 } * binomial(2 * k, k), 1 << (2 * k));
    Q::new(m - n, 2 * (m + n + 1)) * b(m) * b(n)
}

fn multisets(items: &[Mode], start: usize, budget: i64, cur: &mut Vec<Mode>, out: &mut Vec<GradedState>) -> Result<(), VoaError> {
    let mut modes = cur.clone();
    modes.sort();
    out.push(GradedState { modes });
    if out.len() > MAX_BASIS {
        return Err(VoaError::Resource(format!("more than {MAX_BASIS} states")));
    }
    for k in start..items.len() {
        let cost = -(items[k].twice as i64);
        if cost <= budget {
            cur.push(items[k]);
            multisets(items, k, budget - cost, cur, out)?;
            cur.pop();
        }
    }
    Ok(())
}

fn zero_mode_multisets(n: u8, k: usize) -> Vec<Vec<Mode>> {
    fn rec(n: u8, k: usize, from: u8, cur: &mut Vec<Mode>, out: &mut Vec<Vec<Mode>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..n {
            cur.push(Mode { twice: 0, label: Label::a(i) });
            rec(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// A sparse matrix of a mode operator on a truncated basis.
#[derive(Clone, Debug)]
pub struct ModeMatrix {
    pub operator: Operator,
    pub rows: Vec<GradedState>,
    pub cols: Vec<GradedState>,
    pub entries: Vec<(usize, usize, Qi)>,
}

impl ModeMatrix {
    pub fn get(&self, r: &GradedState, c: &GradedState) -> Qi {
        let (Some(i), Some(j)) = (self.rows.iter().position(|s| s == r), self.cols.iter().position(|s| s == c)) else {
            return Qi::zero();
        };
        self.entries.iter().find(|e| e.0 == i && e.1 == j).map(|e| e.2).unwrap_or_else(Qi::zero)
    }

    /// Sparse triplets with the row and column states spelled out.
    pub fn to_json(&self) -> Value {
        json!({
            "operator": self.operator.to_string(),
            "rows": self.rows.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "cols": self.cols.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "entries": self.entries.iter().map(|(i, j, x)| json!([i, j, x.to_json()])).collect::<Vec<_>>(),
        })
    }
}

/// Outcome of one family of relation checks.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct RelationReport {
    pub relation: String,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl RelationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl WeylModule {
    /// Checks, column by column on `window` and for `|m|, |n| <= mmax`:
    /// `[L(m), L(n)] = (m - n) L(m + n) - ((m^3 - m)/12) N delta_{m+n,0}`,
    /// `[L(m), J(n)] = -n J(m + n)` and `[J(m), J(n)] = m N delta_{m+n,0}`.
    /// Operator images are computed once per state and shared by all three.
    pub fn check_relations(&self, window: &[GradedState], mmax: i64) -> Vec<RelationReport> {
        let mut index: HashMap<GradedState, usize> = HashMap::new();
        let mut states: Vec<GradedState> = Vec::new();
        let intern = |s: &GradedState, index: &mut HashMap<GradedState, usize>, states: &mut Vec<GradedState>| {
            *index.entry(s.clone()).or_insert_with(|| {
                states.push(s.clone());
                states.len() - 1
            })
        };
        for s in window {
            intern(s, &mut index, &mut states);
        }
        // images[op][k + kmax][state]: op 0 is L, op 1 is J
        type Img = Vec<(usize, Qi)>;
        let kmax = 2 * mmax;
        let width = (2 * kmax + 1) as usize;
        let mut images: [Vec<Vec<Option<Img>>>; 2] = [vec![Vec::new(); width], vec![Vec::new(); width]];
        let compute = |targets: &[usize], reach: i64, states: &mut Vec<GradedState>, index: &mut HashMap<GradedState, usize>, images: &mut [Vec<Vec<Option<Img>>>; 2]| {
            let jobs: Vec<(usize, i64, usize)> = (0..2)
                .flat_map(|op| (-reach..=reach).flat_map(move |k| targets.iter().map(move |&t| (op, k, t))))
                .collect();
            let raw: Vec<Vector> = jobs
                .par_iter()
                .map(|&(op, k, t)| {
                    let v = single(states[t].clone());
                    if op == 0 { self.apply_l(k, &v) } else { self.apply_j(k, &v) }
                })
                .collect();
            for ((op, k, t), v) in jobs.into_iter().zip(raw) {
                let img: Img = v.iter().map(|(s, c)| (intern(s, index, states), *c)).collect();
                let slot = &mut images[op][(k + kmax) as usize];
                if slot.len() <= t {
                    slot.resize(t + 1, None);
                }
                slot[t] = Some(img);
            }
        };
        let win_ids: Vec<usize> = (0..window.len()).collect();
        compute(&win_ids, mmax, &mut states, &mut index, &mut images);
        let reached: Vec<usize> = (window.len()..states.len()).collect();
        // L(m + n), J(m + n) beyond mmax are only needed on the window itself
        let outer: Vec<i64> = (-kmax..=kmax).filter(|k| k.abs() > mmax).collect();
        for &k in &outer {
            let imgs: Vec<(Vector, Vector)> = window
                .par_iter()
                .map(|s| (self.apply_l(k, &single(s.clone())), self.apply_j(k, &single(s.clone()))))
                .collect();
            for (t, (l, j)) in imgs.into_iter().enumerate() {
                for (op, v) in [(0usize, l), (1, j)] {
                    let img: Img = v.iter().map(|(s, c)| (intern(s, &mut index, &mut states), *c)).collect();
                    let slot = &mut images[op][(k + kmax) as usize];
                    if slot.len() <= t {
                        slot.resize(t + 1, None);
                    }
                    slot[t] = Some(img);
                }
            }
        }
        compute(&reached, mmax, &mut states, &mut index, &mut images);
        let get = |op: usize, k: i64, t: usize| -> &Img {
            images[op][(k + kmax) as usize][t].as_ref().expect("image computed")
        };
        let nn = self.n as i64;
        let names = ["[L,L]", "[L,J]", "[J,J]"];
        let mut reports = Vec::new();
        for (rel, name) in names.iter().enumerate() {
            let (xo, yo) = [(0, 0), (0, 1), (1, 1)][rel];
            let mut failures = Vec::new();
            let mut checked = 0;
            let mut scratch = vec![Qi::zero(); states.len()];
            let mut touched: Vec<usize> = Vec::new();
            for m in -mmax..=mmax {
                for n in -mmax..=mmax {
                    for t in 0..window.len() {
                        checked += 1;
                        let mut put = |i: usize, c: Qi| {
                            if scratch[i].is_zero() {
                                touched.push(i);
                            }
                            scratch[i] += c;
                        };
                        for &(u, c) in get(yo, n, t) {
                            for &(w, d) in get(xo, m, u) {
                                put(w, c * d);
                            }
                        }
                        for &(u, c) in get(xo, m, t) {
                            for &(w, d) in get(yo, n, u) {
                                put(w, -(c * d));
                            }
                        }
                        // subtract the right-hand side
                        match rel {
                            0 => {
                                for &(w, d) in get(0, m + n, t) {
                                    put(w, -(d * Qi::int(m - n)));
                                }
                                if m + n == 0 {
                                    put(t, Qi::real(Q::new((m * m * m - m) * nn, 12)));
                                }
                            }
                            1 => {
                                for &(w, d) in get(1, m + n, t) {
                                    put(w, d * Qi::int(n));
                                }
                            }
                            _ => {
                                if m + n == 0 {
                                    put(t, Qi::int(-m * nn));
                                }
                            }
                        }
                        let bad = touched.iter().any(|&i| !scratch[i].is_zero());
                        for &i in &touched {
                            scratch[i] = Qi::zero();
                        }
                        touched.clear();
                        if bad {
                            let op = |o: usize, k: i64| if o == 0 { Operator::L(k) } else { Operator::J(k) };
                            failures.push(format!("{} {} on {}", op(xo, m), op(yo, n), window[t]));
                        }
                    }
                }
            }
            reports.push(RelationReport { relation: name.to_string(), checked, failures });
        }
        reports
    }

    /// `[L(m), L(n)] = (m - n) L(m + n) - ((m^3 - m)/12) N delta_{m+n,0}`.
    pub fn check_virasoro(&self, window: &[GradedState], mmax: i64) -> RelationReport {
        self.check_relations(window, mmax).swap_remove(0)
    }

    /// `[L(m), J(n)] = -n J(m + n)`.
    pub fn check_lj(&self, window: &[GradedState], mmax: i64) -> RelationReport {
        self.check_relations(window, mmax).swap_remove(1)
    }

    /// `[J(m), J(n)] = m N delta_{m+n,0}`.
    pub fn check_jj(&self, window: &[GradedState], mmax: i64) -> RelationReport {
        self.check_relations(window, mmax).swap_remove(2)
    }

    /// `L(0)` is diagonal with the degree, and `-i J(0)` with the charge.
    pub fn check_gradings(&self, window: &[GradedState]) -> RelationReport {
        let failures = window
            .par_iter()
            .filter_map(|s| {
                let v = single(s.clone());
                let l0 = self.apply_l(0, &v);
                let j0 = self.apply_j(0, &v);
                let want_l = BTreeMap::from([(s.clone(), Qi::real(self.degree(s)))]);
                let c = self.charge(s);
                let want_j: Vector = if c.is_zero() { Vector::new() } else { BTreeMap::from([(s.clone(), Qi::new(Q::zero(), c))]) };
                let want_l = if self.degree(s).is_zero() { Vector::new() } else { want_l };
                (l0 != want_l || j0 != want_j).then(|| format!("grading on {s}"))
            })
            .collect();
        RelationReport { relation: "L(0), J(0) diagonal".into(), checked: window.len(), failures }
    }
}

/// Multiplicities by `(degree, charge)`.
pub type DimTable = BTreeMap<(Q, Q), u128>;

/// Graded dimensions from the product formula, one mode at a time:
/// each bosonic creator `x` multiplies the generating function by `1/(1 - x)`.
/// The twisted sector counts raw charges `#a - #a*` in `raw_charge` only.
pub fn graded_dims(n: u32, sector: Sector, max_degree: Q, raw_charge: Option<(i64, i64)>) -> Result<DimTable, VoaError> {
    let vac_deg = match sector {
        Sector::Untwisted => Q::zero(),
        Sector::Twisted => Q::new(-(n as i64), 8),
    };
    let vac_charge = match sector {
        Sector::Untwisted => Q::zero(),
        Sector::Twisted => Q::new(n as i64, 2),
    };
    let d2 = ((max_degree - vac_deg) * 2).floor().to_integer();
    if d2 < 0 {
        return Ok(DimTable::new());
    }
    // charges of partial products of nonzero modes stay within [-d2, d2]
    let (clo, chi) = match (sector, raw_charge) {
        (Sector::Untwisted, _) => (-d2, d2),
        (Sector::Twisted, Some((lo, hi))) => (lo.min(-d2), hi.max(d2)),
        (Sector::Twisted, None) => return Err(VoaError::Resource("twisted counts need a charge window".into())),
    };
    let width = (chi - clo + 1) as usize;
    let mut f = vec![vec![0u128; width]; d2 as usize + 1];
    f[0][(-clo) as usize] = 1;
    let overflow = || VoaError::Resource("count exceeds u128".into());
    let divide = |f: &mut Vec<Vec<u128>>, step: i64, dc: i64| -> Result<(), VoaError> {
        for _ in 0..n {
            for d in 0..=d2 {
                let from = d - step;
                if from < 0 {
                    continue;
                }
                for ci in 0..width as i64 {
                    let cj = ci - dc;
                    if cj < 0 || cj >= width as i64 {
                        continue;
                    }
                    let add = f[from as usize][cj as usize];
                    if add != 0 {
                        let cell = &mut f[d as usize][ci as usize];
                        *cell = cell.checked_add(add).ok_or_else(overflow)?;
                    }
                }
            }
        }
        Ok(())
    };
    let (first, stride) = match sector {
        Sector::Untwisted => (1, 2),
        Sector::Twisted => (2, 2),
    };
    let mut t = first;
    while t <= d2 {
        divide(&mut f, t, 1)?;
        divide(&mut f, t, -1)?;
        t += stride;
    }
    if sector == Sector::Twisted {
        // zero modes a_i(0): degree 0, charge +1, applied last so the upper cut is exact
        for _ in 0..n {
            for ci in 1..width {
                for d in 0..=d2 as usize {
                    let add = f[d][ci - 1];
                    f[d][ci] = f[d][ci].checked_add(add).ok_or_else(overflow)?;
                }
            }
        }
    }
    let mut out = DimTable::new();
    for (d, row) in f.iter().enumerate() {
        for (ci, &cnt) in row.iter().enumerate() {
            let c = ci as i64 + clo;
            let keep = match raw_charge {
                Some((lo, hi)) => (lo..=hi).contains(&c),
                None => true,
            };
            if cnt != 0 && keep {
                out.insert((Q::new(d as i64, 2) + vac_deg, Q::from_integer(c) + vac_charge), cnt);
            }
        }
    }
    Ok(out)
}

/// Counts by `(degree, charge)` of an explicit basis.
pub fn count_basis(module: &WeylModule, basis: &[GradedState]) -> DimTable {
    let mut out = DimTable::new();
    for s in basis {
        *out.entry((module.degree(s), module.charge(s))).or_insert(0) += 1;
    }
    out
}

/// CSV with header `degree_num,degree_den,charge,count`.
pub fn dims_csv(t: &DimTable) -> String {
    let mut s = String::from("degree_num,degree_den,charge,count\n");
    for ((d, c), n) in t {
        s.push_str(&format!("{},{},{},{}\n", d.numer(), d.denom(), c, n));
    }
    s
}

/// `Delta_z` output rendered with the vacuum coefficient of each power, or
/// `None` if some coefficient is not a multiple of the vacuum.
pub fn scalar_laurent(l: &BTreeMap<i64, Vector>) -> Option<BTreeMap<i64, Qi>> {
    let mut out = BTreeMap::new();
    for (p, v) in l {
        if v.len() != 1 {
            return None;
        }
        let (s, c) = v.iter().next()?;
        if *s != GradedState::vacuum() {
            return None;
        }
        out.insert(*p, *c);
    }
    Some(out)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn st(modes: &[(bool, u8, i32)]) -> GradedState {
        let mut s = GradedState::vacuum();
        for &(star, i, t) in modes {
            s = s.with(Mode { twice: t, label: Label { star, index: i } });
        }
        s
    }

    #[test]
    fn fundamental_relation() {
        let w = WeylModule::new(2, Sector::Untwisted);
        let v = single(st(&[(false, 1, -1)]));
        let r = w.apply_mode(Label::astar(1), 1, &v).unwrap();
        assert_eq!(r, single(GradedState::vacuum()).into_iter().map(|(s, _)| (s, Qi::i())).collect());
        assert!(w.apply_mode(Label::astar(0), 1, &v).unwrap().is_empty());
        assert!(w.apply_mode(Label::a(0), 3, &single(GradedState::vacuum())).unwrap().is_empty());
        assert_eq!(w.apply_mode(Label::a(0), 2, &v), Err(VoaError::SectorMismatch(2, "untwisted")));
    }

    #[test]
    fn twisted_zero_modes() {
        let w = WeylModule::new(1, Sector::Twisted);
        let vac = single(GradedState::vacuum());
        assert!(w.apply_mode(Label::astar(0), 0, &vac).unwrap().is_empty());
        let a0 = w.apply_mode(Label::a(0), 0, &vac).unwrap();
        let back = w.apply_mode(Label::astar(0), 0, &a0).unwrap();
        assert_eq!(back, vac.iter().map(|(s, _)| (s.clone(), Qi::i())).collect());
    }

    #[test]
    fn basis_small() {
        let w = WeylModule::new(1, Sector::Untwisted);
        let b = w.basis(Q::new(1, 2), None).unwrap();
        assert_eq!(b.len(), 3);
        let mut tail = b[1..].to_vec();
        tail.sort();
        let mut want = vec![st(&[(false, 0, -1)]), st(&[(true, 0, -1)])];
        want.sort();
        assert_eq!(tail, want);
    }

    #[test]
    fn c_mn_values() {
        assert_eq!(c_mn(1, 0), Q::new(-1, 8));
        assert_eq!(c_mn(0, 1), Q::new(1, 8));
        assert_eq!(c_mn(2, 2), Q::zero());
    }

    #[test]
    fn l0_and_translation() {
        let w = WeylModule::new(1, Sector::Untwisted);
        let v = single(st(&[(false, 0, -1)]));
        assert_eq!(w.apply_l(0, &v), v.iter().map(|(s, _)| (s.clone(), Qi::real(Q::new(1, 2)))).collect());
        let t = w.apply_l(-1, &v);
        assert_eq!(t.len(), 1);
        assert_eq!(t.keys().next().unwrap(), &st(&[(false, 0, -3)]));
    }

    #[test]
    fn central_term_on_vacuum() {
        for n in 1..=3u8 {
            let w = WeylModule::new(n, Sector::Untwisted);
            let vac = single(GradedState::vacuum());
            let r = w.apply_l(2, &w.apply_l(-2, &vac));
            assert_eq!(r, vac.iter().map(|(s, _)| (s.clone(), Qi::real(Q::new(-(n as i64), 2)))).collect());
        }
    }

    #[test]
    fn omega_agrees_in_both_bases() {
        for n in 1..=3u8 {
            let w = WeylModule::new(n, Sector::Untwisted);
            assert_eq!(w.omega(), w.omega_e_basis());
        }
    }

    #[test]
    fn delta_z_values() {
        let w = WeylModule::new(2, Sector::Untwisted);
        let a = w.e_pair_state(1, true);
        let d = scalar_laurent(&w.delta_z(&a).unwrap()).unwrap();
        assert_eq!(d, BTreeMap::from([(-2, Qi::real(Q::new(-1, 4)))]));
        assert!(w.delta_z_squared(&a).unwrap().is_empty());
        let b = w.e_pair_state(0, false);
        let d = scalar_laurent(&w.delta_z(&b).unwrap()).unwrap();
        assert_eq!(d, BTreeMap::from([(-2, Qi::real(Q::new(1, 4)))]));
        let quartic = single(st(&[(false, 0, -1), (true, 0, -1), (false, 1, -1), (true, 1, -1)]));
        assert!(w.delta_z(&quartic).unwrap().is_empty());
        let om = scalar_laurent(&w.delta_z(&w.omega()).unwrap()).unwrap();
        assert_eq!(om, BTreeMap::from([(-2, Qi::real(Q::new(-2, 8)))]));
    }

    #[test]
    fn twisted_vacuum_degree() {
        for n in 1..=3u8 {
            let w = WeylModule::new(n, Sector::Twisted);
            let vac = single(GradedState::vacuum());
            let l0 = w.apply_l(0, &vac);
            assert_eq!(l0, vac.iter().map(|(s, _)| (s.clone(), Qi::real(Q::new(-(n as i64), 8)))).collect());
        }
    }

    #[test]
    fn counts_match_basis_small() {
        for n in 1..=2u8 {
            let w = WeylModule::new(n, Sector::Untwisted);
            let b = w.basis(Q::from_integer(3), None).unwrap();
            assert_eq!(count_basis(&w, &b), graded_dims(n as u32, Sector::Untwisted, Q::from_integer(3), None).unwrap());
            let t = WeylModule::new(n, Sector::Twisted);
            let b = t.basis(Q::from_integer(2), Some((-2, 3))).unwrap();
            assert_eq!(count_basis(&t, &b), graded_dims(n as u32, Sector::Twisted, Q::from_integer(2), Some((-2, 3))).unwrap());
        }
    }

    #[test]
    fn twisted_lowest_layer_for_one_generator() {
        let d = graded_dims(1, Sector::Twisted, Q::new(-1, 8), Some((0, 6))).unwrap();
        assert_eq!(d.len(), 7);
        for c in 0..=6 {
            assert_eq!(d[&(Q::new(-1, 8), Q::from_integer(c) + Q::new(1, 2))], 1);
        }
    }

    #[test]
    fn counts_for_28() {
        let d = graded_dims(28, Sector::Untwisted, Q::from_integer(3), None).unwrap();
        let at = |deg: Q, c: i64| d[&(deg, Q::from_integer(c))];
        assert_eq!(at(Q::from_integer(1), 0), 784);
        assert_eq!(at(Q::from_integer(1), 2), 406);
        assert_eq!(at(Q::new(1, 2), 1), 28);
        assert_eq!(at(Q::new(3, 2), 3), 4060);
        assert_eq!(at(Q::from_integer(2), 0), 166404);
        assert_eq!(at(Q::from_integer(2), 4), 31465);
        assert_eq!(at(Q::from_integer(3), 0), 17122560);
        assert_eq!(at(Q::from_integer(1), -2), 406);
        let one = graded_dims(1, Sector::Untwisted, Q::from_integer(1), None).unwrap();
        assert_eq!(one[&(Q::from_integer(1), Q::zero())], 1);
    }

    #[test]
    fn charge_rotation_squares_to_parity() {
        let w = WeylModule::new(2, Sector::Untwisted);
        for s in w.basis(Q::from_integer(2), None).unwrap() {
            let v = single(s);
            let r = w.charge_rotation(&w.charge_rotation(&v).unwrap()).unwrap();
            assert_eq!(r, w.parity(&v));
        }
    }

    #[test]
    fn relations_small_window() {
        for sector in [Sector::Untwisted, Sector::Twisted] {
            let w = WeylModule::new(1, sector);
            let win = w.basis(Q::from_integer(2), Some((-1, 2))).unwrap();
            let mut reports = w.check_relations(&win, 2);
            reports.push(w.check_gradings(&win));
            for r in reports {
                assert!(r.passed(), "{:?} {}: {:?}", sector, r.relation, &r.failures[..r.failures.len().min(3)]);
            }
        }
    }

    #[test]
    fn mode_matrix_json() {
        let w = WeylModule::new(1, Sector::Untwisted);
        let b = w.basis(Q::from_integer(1), None).unwrap();
        let m = w.mode_matrix(Operator::L(0), &b).unwrap();
        assert_eq!(m.entries.len(), b.len() - 1);
        let j = m.to_json();
        assert_eq!(j["operator"], "L(0)");
        assert_eq!(m.get(&b[1], &b[1]), Qi::real(Q::new(1, 2)));
        assert!(WeylModule::new(5, Sector::Untwisted).mode_matrix(Operator::L(0), &[]).is_err());
    }
}
