//! Exact two-variable series in `p` and `q`, theta and eta building blocks,
//! the structured `p -> 1` limit, and a floating-point eta evaluator.
//!
//! Exponents live on fixed ladders: `q^(n/24)` and `p^(n/2)`. A series
//! stores numerators only.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;
use serde_json::{json, Value};

pub use crate::gauss::GaussRat;

pub const Q_DEN: i64 = 24;
pub const P_DEN: i64 = 2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SeriesError {
    #[error("ladder mismatch: expected qDen {Q_DEN} and pDen {P_DEN}, got {q}/{p}")]
    Ladder { q: i64, p: i64 },
    #[error("series is not invertible: leading layer at q^{0}/24 is not a monomial")]
    NotInvertible(i64),
    #[error("zero series has no inverse")]
    Zero,
    #[error("phase {0}/4 is not a quarter-integer root of unity")]
    UnsupportedPhase(String),
    #[error("atom (1 - zeta p^{p}/2) with exponent {e} cannot be expanded in q")]
    NotExpandable { p: i64, e: i64 },
    #[error("limit p -> 1 has a zero or pole of order {0}")]
    DivergesOrVanishes(i64),
    #[error("malformed series JSON: {0}")]
    Json(String),
    #[error("precision: {0}")]
    Precision(String),
}

/// A truncated series `sum c[p,q] p^(p/2) q^(q/24)`, exact for all `q <= q_cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoVarSeries {
    /// Keyed by `(qNum, pNum)` so iteration runs in q-layers.
    terms: BTreeMap<(i64, i64), GaussRat>,
    q_cutoff: i64,
}

impl TwoVarSeries {
    pub fn zero(q_cutoff: i64) -> Self {
        TwoVarSeries { terms: BTreeMap::new(), q_cutoff }
    }

    pub fn one(q_cutoff: i64) -> Self {
        TwoVarSeries::monomial(GaussRat::one(), 0, 0, q_cutoff)
    }

    pub fn monomial(c: GaussRat, p_num: i64, q_num: i64, q_cutoff: i64) -> Self {
        let mut s = TwoVarSeries::zero(q_cutoff);
        s.add_term(p_num, q_num, &c);
        s
    }

    /// Builds from `(pNum, qNum, coeff)` triples, dropping zeros and terms
    /// above the cutoff.
    pub fn from_terms<I: IntoIterator<Item = (i64, i64, GaussRat)>>(terms: I, q_cutoff: i64) -> Self {
        let mut s = TwoVarSeries::zero(q_cutoff);
        for (p, q, c) in terms {
            s.add_term(p, q, &c);
        }
        s
    }

    pub fn q_cutoff(&self) -> i64 {
        self.q_cutoff
    }

    /// Least q-numerator with a nonzero term.
    pub fn q_floor(&self) -> Option<i64> {
        self.terms.keys().next().map(|k| k.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, p_num: i64, q_num: i64) -> GaussRat {
        self.terms.get(&(q_num, p_num)).cloned().unwrap_or_else(GaussRat::zero)
    }

    /// Terms as `(pNum, qNum, coeff)` in q-then-p order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, i64, &GaussRat)> {
        self.terms.iter().map(|(&(q, p), c)| (p, q, c))
    }

    pub fn add_term(&mut self, p_num: i64, q_num: i64, c: &GaussRat) {
        if q_num > self.q_cutoff || c.is_zero() {
            return;
        }
        let e = self.terms.entry((q_num, p_num)).or_insert_with(GaussRat::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&(q_num, p_num));
        }
    }

    /// Lowers the cutoff, discarding terms above it.
    pub fn truncate(&self, q_cutoff: i64) -> Self {
        let c = q_cutoff.min(self.q_cutoff);
        TwoVarSeries {
            terms: self.terms.range(..=(c, i64::MAX)).map(|(k, v)| (*k, v.clone())).collect(),
            q_cutoff: c,
        }
    }

    /// The terms with a given q-numerator, as `pNum -> coeff`.
    pub fn layer(&self, q_num: i64) -> BTreeMap<i64, GaussRat> {
        self.terms
            .range((q_num, i64::MIN)..=(q_num, i64::MAX))
            .map(|(&(_, p), c)| (p, c.clone()))
            .collect()
    }

    fn layers(&self) -> BTreeMap<i64, Vec<(i64, GaussRat)>> {
        let mut out: BTreeMap<i64, Vec<(i64, GaussRat)>> = BTreeMap::new();
        for (&(q, p), c) in &self.terms {
            out.entry(q).or_default().push((p, c.clone()));
        }
        out
    }

    pub fn add(&self, o: &TwoVarSeries) -> TwoVarSeries {
        let mut s = self.truncate(o.q_cutoff);
        for (p, q, c) in o.terms() {
            s.add_term(p, q, c);
        }
        s
    }

    pub fn neg(&self) -> TwoVarSeries {
        TwoVarSeries { terms: self.terms.iter().map(|(k, v)| (*k, -v)).collect(), q_cutoff: self.q_cutoff }
    }

    pub fn sub(&self, o: &TwoVarSeries) -> TwoVarSeries {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &GaussRat) -> TwoVarSeries {
        let mut s = TwoVarSeries::zero(self.q_cutoff);
        for (p, q, v) in self.terms() {
            s.add_term(p, q, &(v * c));
        }
        s
    }

    /// Multiplies by `p^(dp/2) q^(dq/24)`; the cutoff moves with the shift.
    pub fn shift(&self, dp: i64, dq: i64) -> TwoVarSeries {
        TwoVarSeries {
            terms: self.terms.iter().map(|(&(q, p), c)| ((q + dq, p + dp), c.clone())).collect(),
            q_cutoff: self.q_cutoff + dq,
        }
    }

    /// Truncated product, exact through `min(c_a + v_b, c_b + v_a)`.
    pub fn mul(&self, o: &TwoVarSeries) -> TwoVarSeries {
        let va = self.q_floor();
        let vb = o.q_floor();
        let cutoff = match (va, vb) {
            (Some(va), Some(vb)) => (self.q_cutoff + vb).min(o.q_cutoff + va),
            (None, Some(vb)) => self.q_cutoff + vb,
            (Some(va), None) => o.q_cutoff + va,
            (None, None) => self.q_cutoff.min(o.q_cutoff),
        };
        let mut acc: BTreeMap<(i64, i64), GaussRat> = BTreeMap::new();
        let lb = o.layers();
        for (qa, la) in self.layers() {
            for (qb, lbv) in &lb {
                if qa + qb > cutoff {
                    break;
                }
                for (pa, ca) in &la {
                    for (pb, cb) in lbv {
                        let e = acc.entry((qa + qb, pa + pb)).or_insert_with(GaussRat::zero);
                        *e += &(ca * cb);
                    }
                }
            }
        }
        acc.retain(|_, v| !v.is_zero());
        TwoVarSeries { terms: acc, q_cutoff: cutoff }
    }

    /// Multiplicative inverse; the leading q-layer must be a single monomial.
    pub fn invert(&self) -> Result<TwoVarSeries, SeriesError> {
        let v = self.q_floor().ok_or(SeriesError::Zero)?;
        let lead = self.layer(v);
        if lead.len() != 1 {
            return Err(SeriesError::NotInvertible(v));
        }
        let (&lp, lc) = lead.iter().next().expect("one term");
        let lc_inv = lc.inv().ok_or(SeriesError::Zero)?;
        // u = a / (lc p^lp q^v) = 1 + (terms of positive q order)
        let rel = self.q_cutoff - v;
        let u = self.shift(-lp, -v).scale(&lc_inv);
        let ul = u.layers();
        let mut w: BTreeMap<i64, BTreeMap<i64, GaussRat>> = BTreeMap::new();
        w.insert(0, BTreeMap::from([(0, GaussRat::one())]));
        // q-numerators reachable as sums of u's positive exponents
        let steps: Vec<i64> = ul.keys().copied().filter(|&q| q > 0).collect();
        let mut frontier: Vec<i64> = vec![0];
        let mut reach: std::collections::BTreeSet<i64> = std::collections::BTreeSet::new();
        while let Some(x) = frontier.pop() {
            for &s in &steps {
                let y = x + s;
                if y <= rel && reach.insert(y) {
                    frontier.push(y);
                }
            }
        }
        for n in reach {
            let mut layer: BTreeMap<i64, GaussRat> = BTreeMap::new();
            for &s in &steps {
                if s > n {
                    break;
                }
                let Some(prev) = w.get(&(n - s)) else { continue };
                for (pu, cu) in &ul[&s] {
                    for (pw, cw) in prev {
                        let e = layer.entry(pu + pw).or_insert_with(GaussRat::zero);
                        *e -= &(cu * cw);
                    }
                }
            }
            layer.retain(|_, c| !c.is_zero());
            if !layer.is_empty() {
                w.insert(n, layer);
            }
        }
        let mut out = TwoVarSeries::zero(rel);
        for (q, layer) in w {
            for (p, c) in layer {
                out.add_term(p, q, &c);
            }
        }
        Ok(out.scale(&lc_inv).shift(-lp, -v))
    }

    /// Integer power; negative exponents go through [`invert`](Self::invert).
    pub fn pow(&self, e: i64) -> Result<TwoVarSeries, SeriesError> {
        let base = if e < 0 { self.invert()? } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc: Option<TwoVarSeries> = None;
        let mut b = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => b.clone(),
                    Some(a) => a.mul(&b),
                });
            }
            k >>= 1;
            if k > 0 {
                b = b.mul(&b);
            }
        }
        Ok(acc.unwrap_or_else(|| TwoVarSeries::one(self.q_cutoff - 2 * self.q_floor().unwrap_or(0).min(0))))
    }

    /// Substitutes `q -> q^k`.
    pub fn rescale_q(&self, k: i64) -> TwoVarSeries {
        TwoVarSeries {
            terms: self.terms.iter().map(|(&(q, p), c)| ((q * k, p), c.clone())).collect(),
            q_cutoff: self.q_cutoff * k,
        }
    }

    /// Substitutes `p = 1`.
    pub fn at_p_one(&self) -> TwoVarSeries {
        let mut s = TwoVarSeries::zero(self.q_cutoff);
        for (_, q, c) in self.terms() {
            s.add_term(0, q, c);
        }
        s
    }

    /// Coefficients of a p-free series as `qNum -> coeff`.
    pub fn q_coeffs(&self) -> BTreeMap<i64, GaussRat> {
        self.at_p_one().terms().map(|(_, q, c)| (q, c.clone())).collect()
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self.terms().map(|(p, q, c)| json!([p, q, c.to_json()])).collect();
        json!({ "pDen": P_DEN, "qDen": Q_DEN, "terms": terms, "qCutoff": self.q_cutoff })
    }

    pub fn from_json(v: &Value) -> Result<TwoVarSeries, SeriesError> {
        let bad = |m: &str| SeriesError::Json(m.to_string());
        let pd = v["pDen"].as_i64().ok_or_else(|| bad("pDen"))?;
        let qd = v["qDen"].as_i64().ok_or_else(|| bad("qDen"))?;
        if pd != P_DEN || qd != Q_DEN {
            return Err(SeriesError::Ladder { q: qd, p: pd });
        }
        let cutoff = v["qCutoff"].as_i64().ok_or_else(|| bad("qCutoff"))?;
        let mut s = TwoVarSeries::zero(cutoff);
        for t in v["terms"].as_array().ok_or_else(|| bad("terms"))? {
            let p = t[0].as_i64().ok_or_else(|| bad("pNum"))?;
            let q = t[1].as_i64().ok_or_else(|| bad("qNum"))?;
            let c = GaussRat::from_json(&t[2]).ok_or_else(|| bad("coefficient"))?;
            s.add_term(p, q, &c);
        }
        Ok(s)
    }
}

impl fmt::Display for TwoVarSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (p, q, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})p^({p}/2)q^({q}/24)")?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(q^({}/24))", self.q_cutoff + 1)
    }
}

/// An atom `(1 - i^zeta p^(p/2) q^(q/24))^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    /// The root of unity as a power of `i`.
    pub zeta: u8,
    pub p_num: i64,
    pub q_num: i64,
    pub exponent: i64,
}

impl Atom {
    pub fn zeta_value(&self) -> GaussRat {
        GaussRat::unit(self.zeta as i64)
    }

    /// Whether the atom vanishes at `p = 1`.
    pub fn vanishes_at_p_one(&self) -> bool {
        self.q_num == 0 && self.zeta == 0
    }

    /// The expansion of the atom through `q_cutoff`.
    pub fn expand(&self, q_cutoff: i64) -> Result<TwoVarSeries, SeriesError> {
        let x = TwoVarSeries::monomial(-self.zeta_value(), self.p_num, self.q_num, q_cutoff);
        let base = TwoVarSeries::one(q_cutoff).add(&x);
        if self.exponent >= 0 {
            return base.pow(self.exponent);
        }
        if self.q_num <= 0 {
            return Err(SeriesError::NotExpandable { p: self.p_num, e: self.exponent });
        }
        // (1 - x)^(-e) = sum_n binom(e+n-1, n) x^n
        let e = -self.exponent;
        let mut s = TwoVarSeries::zero(q_cutoff);
        let mut binom = num_bigint::BigInt::one();
        let z = self.zeta_value();
        let mut zp = GaussRat::one();
        let mut n = 0i64;
        while n * self.q_num <= q_cutoff {
            s.add_term(n * self.p_num, n * self.q_num, &(&zp * &GaussRat::from_bigint(binom.clone())));
            n += 1;
            binom = binom * (e + n - 1) / n;
            zp = &zp * &z;
        }
        Ok(s)
    }
}

/// A monomial prefactor times a product of atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredForm {
    pub coeff: GaussRat,
    pub p_num: i64,
    pub q_num: i64,
    pub atoms: Vec<Atom>,
}

impl FactoredForm {
    pub fn one() -> Self {
        FactoredForm { coeff: GaussRat::one(), p_num: 0, q_num: 0, atoms: Vec::new() }
    }

    /// Merges atoms with equal `(zeta, p, q)` and drops zero exponents.
    pub fn normalize(mut self) -> Self {
        let mut m: BTreeMap<(u8, i64, i64), i64> = BTreeMap::new();
        for a in &self.atoms {
            *m.entry((a.zeta, a.p_num, a.q_num)).or_insert(0) += a.exponent;
        }
        self.atoms = m
            .into_iter()
            .filter(|(_, e)| *e != 0)
            .map(|((zeta, p_num, q_num), exponent)| Atom { zeta, p_num, q_num, exponent })
            .collect();
        self
    }

    pub fn mul(&self, o: &FactoredForm) -> FactoredForm {
        let mut atoms = self.atoms.clone();
        atoms.extend(o.atoms.iter().copied());
        FactoredForm { coeff: &self.coeff * &o.coeff, p_num: self.p_num + o.p_num, q_num: self.q_num + o.q_num, atoms }
            .normalize()
    }

    pub fn pow(&self, e: i64) -> FactoredForm {
        FactoredForm {
            coeff: self.coeff.pow(e).expect("nonzero prefactor"),
            p_num: self.p_num * e,
            q_num: self.q_num * e,
            atoms: self.atoms.iter().map(|a| Atom { exponent: a.exponent * e, ..*a }).collect(),
        }
        .normalize()
    }

    /// Net exponent of atoms vanishing at `p = 1`.
    pub fn vanishing_order(&self) -> i64 {
        self.atoms.iter().filter(|a| a.vanishes_at_p_one()).map(|a| a.exponent).sum()
    }

    /// Exact expansion with all q-exponents at most `q_cutoff` known.
    pub fn expand(&self, q_cutoff: i64) -> Result<TwoVarSeries, SeriesError> {
        let rel = q_cutoff - self.q_num;
        let mut acc = TwoVarSeries::one(rel);
        for a in &self.atoms {
            if a.q_num > rel {
                continue;
            }
            acc = acc.mul(&a.expand(rel)?);
        }
        Ok(acc.scale(&self.coeff).shift(self.p_num, self.q_num))
    }
}

fn phase_quarter(a: &BigRational) -> Result<u8, SeriesError> {
    let four = a * BigRational::from_integer(4.into());
    if !four.is_integer() {
        return Err(SeriesError::UnsupportedPhase(a.to_string()));
    }
    let k: i64 = num_traits::ToPrimitive::to_i64(&four.to_integer()).ok_or_else(|| SeriesError::UnsupportedPhase(a.to_string()))?;
    Ok(k.rem_euclid(4) as u8)
}

/// `eta(k tau) = q^(k/24) prod (1 - q^(kn))` through q-numerator `cutoff`.
pub fn eta_series(k: i64, cutoff: i64) -> TwoVarSeries {
    eta_factored(k, cutoff).expand(cutoff).expect("eta atoms have positive q-order")
}

/// `eta(k tau)` as a factored form with atoms through `cutoff`.
pub fn eta_factored(k: i64, cutoff: i64) -> FactoredForm {
    let mut atoms = Vec::new();
    let mut n = 1;
    while Q_DEN * k * n <= cutoff.max(0) + Q_DEN * k {
        atoms.push(Atom { zeta: 0, p_num: 0, q_num: Q_DEN * k * n, exponent: 1 });
        n += 1;
    }
    FactoredForm { coeff: GaussRat::one(), p_num: 0, q_num: k, atoms }
}

/// Triple-product factorization of the theta function with argument
/// `k z + a` and nome `q^k`, with `e^(2 pi i a)` a fourth root of unity,
/// optionally shifted by `k tau / 2`:
///
/// `prod_{m>=0} (1 - q^{k(m+1)}) (1 - e^{2 pi i a} p^k q^{k(m+1) - s}) (1 - e^{-2 pi i a} p^{-k} q^{km + s})`
///
/// with `s = k/2` unshifted and `s = 0` shifted. Atoms run through `cutoff`.
pub fn theta_factored(k: i64, a: &BigRational, half_tau_shift: bool, cutoff: i64) -> Result<FactoredForm, SeriesError> {
    let z = phase_quarter(a)?;
    let zinv = (4 - z) % 4;
    let s = if half_tau_shift { 0 } else { Q_DEN * k / 2 };
    let step = Q_DEN * k;
    let mut atoms = Vec::new();
    let mut m = 0;
    loop {
        let q1 = step * (m + 1);
        let q2 = step * (m + 1) - s;
        let q3 = step * m + s;
        if q1.min(q2).min(q3) > cutoff.max(0) {
            break;
        }
        atoms.push(Atom { zeta: 0, p_num: 0, q_num: q1, exponent: 1 });
        atoms.push(Atom { zeta: z, p_num: P_DEN * k, q_num: q2, exponent: 1 });
        atoms.push(Atom { zeta: zinv, p_num: -P_DEN * k, q_num: q3, exponent: 1 });
        m += 1;
    }
    Ok(FactoredForm { coeff: GaussRat::one(), p_num: 0, q_num: 0, atoms }.normalize())
}

/// The defining sum `sum_m e^{2 pi i a m} p^{km} q^{k m^2 / 2}` (times the
/// shift `p^{km}... q^{k m / 2}` when shifted), through `cutoff`. This is the
/// theta function at argument `k z + a + 1/2` in the triple-product form above,
/// so the sign `(-1)^m` is included.
pub fn theta_sum(k: i64, a: &BigRational, half_tau_shift: bool, cutoff: i64) -> Result<TwoVarSeries, SeriesError> {
    let z = phase_quarter(a)? as i64;
    let mut s = TwoVarSeries::zero(cutoff);
    let bound = ((cutoff.max(0) as f64 / (Q_DEN * k) as f64 * 2.0).sqrt() as i64) + 3;
    for m in -bound..=bound {
        // phase (-1)^m e^{2 pi i a m} = i^{(2 + z) m}
        let c = GaussRat::unit((2 + z) * m);
        let q = if half_tau_shift { Q_DEN * k * (m * m + m) / 2 } else { Q_DEN * k * m * m / 2 };
        s.add_term(P_DEN * k * m, q, &c);
    }
    Ok(s)
}

/// Evaluates a factored form at `p = 1` as a one-variable q-series.
///
/// Atoms `(1 - p^e)` (in half-units of `p`) vanish at `p = 1`; each equals
/// `(1 - p^{1/2}) g_e` with `g_e(1) = e`, so their net exponent must be zero
/// and they contribute the constant `prod e^exponent`.
pub fn limit_p_to_one(f: &FactoredForm, cutoff: i64) -> Result<TwoVarSeries, SeriesError> {
    let order = f.vanishing_order();
    if order != 0 {
        return Err(SeriesError::DivergesOrVanishes(order));
    }
    let mut c = f.coeff.clone();
    let mut rest = Vec::new();
    for a in &f.atoms {
        if a.vanishes_at_p_one() {
            if a.p_num == 0 {
                return Err(SeriesError::DivergesOrVanishes(a.exponent));
            }
            c = &c * &GaussRat::from_int(a.p_num).pow(a.exponent).expect("nonzero");
        } else if a.q_num == 0 {
            let v = GaussRat::one() - a.zeta_value();
            c = &c * &v.pow(a.exponent).expect("nonvanishing atom");
        } else {
            rest.push(Atom { p_num: 0, ..*a });
        }
    }
    let g = FactoredForm { coeff: c, p_num: 0, q_num: f.q_num, atoms: rest }.normalize();
    g.expand(cutoff)
}

/// `const * prod eta(k tau)^exponent`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct EtaProduct {
    pub factors: Vec<(i64, i64)>,
}

impl EtaProduct {
    pub fn new(mut factors: Vec<(i64, i64)>) -> Self {
        factors.retain(|f| f.1 != 0);
        factors.sort();
        EtaProduct { factors }
    }

    pub fn inverse(&self) -> Self {
        EtaProduct::new(self.factors.iter().map(|&(k, e)| (k, -e)).collect())
    }

    /// `sum k e / 24`, as a q-numerator.
    pub fn q_order(&self) -> i64 {
        self.factors.iter().map(|&(k, e)| k * e).sum()
    }

    pub fn series(&self, cutoff: i64) -> TwoVarSeries {
        let mut f = FactoredForm::one();
        for &(k, e) in &self.factors {
            f = f.mul(&eta_factored(k, cutoff - self.q_order()).pow(e));
        }
        f.expand(cutoff).expect("eta products expand")
    }

    /// Direct-product evaluation.
    pub fn eval(&self, tau: Complex64) -> Result<Complex64, SeriesError> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(k, e) in &self.factors {
            acc += log_eta_direct(tau * k as f64)? * e as f64;
        }
        Ok(acc.exp())
    }

    /// Evaluation after moving each argument into the fundamental domain.
    pub fn eval_reduced(&self, tau: Complex64) -> Result<Complex64, SeriesError> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(k, e) in &self.factors {
            acc += log_eta_reduced(tau * k as f64)? * e as f64;
        }
        Ok(acc.exp())
    }
}

/// A logarithm of `eta(tau)` by the product formula.
pub fn log_eta_direct(tau: Complex64) -> Result<Complex64, SeriesError> {
    if tau.im < 0.01 {
        return Err(SeriesError::Precision(format!("Im tau = {} too small for the direct product", tau.im)));
    }
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let q = (two_pi_i * tau).exp();
    let mut acc = two_pi_i * tau / 24.0;
    let mut qn = q;
    for _ in 0..100_000 {
        if qn.norm() < 1e-18 {
            return Ok(acc);
        }
        acc += (Complex64::new(1.0, 0.0) - qn).ln();
        qn *= q;
    }
    Err(SeriesError::Precision("product did not converge".into()))
}

/// `eta` evaluated directly (not in log form).
pub fn eta_direct(tau: Complex64) -> Result<Complex64, SeriesError> {
    Ok(log_eta_direct(tau)?.exp())
}

/// A logarithm of `eta(tau)` using `eta(tau + 1) = e^{i pi / 12} eta(tau)` and
/// `eta(-1/tau) = sqrt(-i tau) eta(tau)` to reach `|tau| >= 1`, `|Re tau| <= 1/2`.
pub fn log_eta_reduced(mut tau: Complex64) -> Result<Complex64, SeriesError> {
    if tau.im <= 0.0 {
        return Err(SeriesError::Precision("tau must lie in the upper half plane".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let i_pi_12 = Complex64::new(0.0, std::f64::consts::PI / 12.0);
    for _ in 0..10_000 {
        let n = tau.re.round();
        acc += i_pi_12 * n;
        tau -= n;
        if tau.norm_sqr() >= 1.0 - 1e-12 {
            return Ok(acc + log_eta_direct(tau)?);
        }
        // eta(tau) = eta(-1/tau) / sqrt(-i tau)
        acc -= 0.5 * (Complex64::new(0.0, -1.0) * tau).ln();
        tau = -1.0 / tau;
    }
    Err(SeriesError::Precision("reduction did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn g(n: i64) -> GaussRat {
        GaussRat::from_int(n)
    }

    #[test]
    fn difference_of_squares() {
        let a = TwoVarSeries::from_terms([(0, 0, g(1)), (0, 1, g(1))], 10);
        let b = TwoVarSeries::from_terms([(0, 0, g(1)), (0, 1, g(-1))], 10);
        let c = a.mul(&b);
        assert_eq!(c, TwoVarSeries::from_terms([(0, 0, g(1)), (0, 2, g(-1))], 10));
        assert_eq!(a.mul(&TwoVarSeries::one(10)), a);
    }

    #[test]
    fn theta_square_coefficient() {
        // (sum_{|m|<=2} p^m q^{m^2/2})^2 at p^0 q^1 is 2.
        let s = TwoVarSeries::from_terms((-2..=2).map(|m| (2 * m, 12 * m * m, g(1))), 48);
        assert_eq!(s.mul(&s).coeff(0, 24), g(2));
    }

    #[test]
    fn geometric_and_monomial_inverse() {
        let a = TwoVarSeries::from_terms([(0, 0, g(1)), (0, 24, g(-1))], 24 * 5);
        let b = a.invert().unwrap();
        for n in 0..=5 {
            assert_eq!(b.coeff(0, 24 * n), g(1));
        }
        let m = TwoVarSeries::monomial(g(1), 0, 28, 100);
        let mi = m.invert().unwrap();
        assert_eq!(mi.coeff(0, -28), g(1));
        assert_eq!(mi.len(), 1);
    }

    #[test]
    fn non_monomial_layer_is_rejected() {
        let a = TwoVarSeries::from_terms([(1, 0, g(1)), (-1, 0, g(1))], 10);
        assert_eq!(a.invert(), Err(SeriesError::NotInvertible(0)));
    }

    #[test]
    fn eta_expansion() {
        let e = eta_series(1, 24 * 8 + 1);
        let expect = [1, -1, -1, 0, 0, 1, 0, 1, 0];
        for (n, c) in expect.iter().enumerate() {
            assert_eq!(e.coeff(0, 1 + 24 * n as i64), g(*c), "n = {n}");
        }
        assert!(e.coeff(0, 0).is_zero());
        assert_eq!(eta_series(2, 24 * 8 + 2), eta_series(1, 24 * 4 + 1).rescale_q(2).truncate(24 * 8 + 2));
    }

    #[test]
    fn pentagonal_sparsity() {
        let e = eta_series(1, 24 * 100 + 1);
        for (_, _, c) in e.terms() {
            let v = c.to_i64().unwrap();
            assert!(v.abs() <= 1);
        }
    }

    #[test]
    fn triple_product_matches_sum() {
        for k in 1..=4 {
            for a4 in 0..4 {
                for shift in [false, true] {
                    let a = r(a4, 4);
                    let cutoff = 24 * 20;
                    let f = theta_factored(k, &a, shift, cutoff).unwrap();
                    let lhs = f.expand(cutoff).unwrap();
                    let rhs = theta_sum(k, &a, shift, cutoff).unwrap();
                    assert_eq!(lhs, rhs, "k={k} a={a4}/4 shift={shift}");
                }
            }
        }
    }

    #[test]
    fn theta_leading_terms() {
        let f = theta_factored(1, &r(0, 1), false, 48).unwrap();
        let s = f.expand(48).unwrap();
        assert_eq!(s.coeff(2, 12), g(-1));
        assert!(theta_factored(1, &r(1, 3), false, 10).is_err());
        let sh = theta_factored(1, &r(0, 1), true, 24).unwrap();
        assert!(sh.atoms.contains(&Atom { zeta: 0, p_num: -2, q_num: 0, exponent: 1 }));
        // p -> 1 of the unshifted form gives sum (-1)^m q^{m^2/2}.
        let lim = limit_p_to_one(&f, 24 * 4).unwrap();
        for m in 0..3i64 {
            let c = if m == 0 { 1 } else { 2 * (-1i64).pow(m as u32) };
            assert_eq!(lim.coeff(0, 12 * m * m), g(c));
        }
    }

    #[test]
    fn limit_cancels_vanishing_atoms() {
        let f = FactoredForm {
            coeff: GaussRat::one(),
            p_num: 0,
            q_num: 0,
            atoms: vec![
                Atom { zeta: 0, p_num: -8, q_num: 0, exponent: 14 },
                Atom { zeta: 0, p_num: -4, q_num: 0, exponent: -14 },
            ],
        };
        let l = limit_p_to_one(&f, 10).unwrap();
        assert_eq!(l, TwoVarSeries::monomial(g(1 << 14), 0, 0, 10));
        let single = FactoredForm { atoms: vec![Atom { zeta: 0, p_num: -2, q_num: 0, exponent: 1 }], ..FactoredForm::one() };
        assert_eq!(limit_p_to_one(&single, 10), Err(SeriesError::DivergesOrVanishes(1)));
    }

    #[test]
    fn limit_agrees_with_substitution_without_vanishing_atoms() {
        let f = theta_factored(2, &r(1, 4), false, 24 * 6).unwrap();
        let a = limit_p_to_one(&f, 24 * 6).unwrap();
        let b = f.expand(24 * 6).unwrap().at_p_one();
        assert_eq!(a, b);
    }

    #[test]
    fn eta_at_i() {
        let v = eta_direct(Complex64::new(0.0, 1.0)).unwrap();
        assert!((v.re - 0.768_225_422_326_056_7).abs() < 1e-13 && v.im.abs() < 1e-15);
        let tau = Complex64::new(0.1, 0.7);
        let ratio = eta_direct(tau + 1.0).unwrap() / eta_direct(tau).unwrap();
        let want = Complex64::new(0.0, std::f64::consts::PI / 12.0).exp();
        assert!((ratio - want).norm() < 1e-12);
        let q = EtaProduct::new(vec![(2, 4), (1, -4)]).eval(Complex64::new(0.0, 1.0)).unwrap();
        assert!(q.re > 0.0 && q.im.abs() < 1e-12);
    }

    #[test]
    fn pentagonal_sum_matches_product() {
        let tau = Complex64::new(0.23, 0.41);
        let q = (Complex64::new(0.0, 2.0 * std::f64::consts::PI) * tau).exp();
        let mut s = Complex64::new(0.0, 0.0);
        for n in -40i64..=40 {
            let e = (n * (3 * n - 1) / 2) as i32;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            s += q.powi(e) * sign;
        }
        s *= (Complex64::new(0.0, 2.0 * std::f64::consts::PI / 24.0) * tau).exp();
        assert!((s - eta_direct(tau).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn reduced_evaluator_matches_direct() {
        for tau in [Complex64::new(0.3, 0.4), Complex64::new(-1.7, 0.9), Complex64::new(0.05, 0.08)] {
            let a = eta_direct(tau).unwrap();
            let b = log_eta_reduced(tau).unwrap().exp();
            assert!((a - b).norm() < 1e-10 * a.norm(), "{tau}");
        }
    }

    #[test]
    fn json_round_trip() {
        let s = theta_factored(1, &r(1, 4), false, 48).unwrap().expand(48).unwrap();
        assert_eq!(TwoVarSeries::from_json(&s.to_json()).unwrap(), s);
        let mut v = s.to_json();
        v["qDen"] = json!(12);
        assert!(matches!(TwoVarSeries::from_json(&v), Err(SeriesError::Ladder { .. })));
    }
}
