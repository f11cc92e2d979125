//! Per-class series for the double cover: two-variable traces on the Weyl and
//! fermionic sides, the `p -> 1` limits `F^A` and `F^forall`, their eta
//! quotient closed forms, modular checks, and the printed degree identities.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data;
use crate::frameshape::{FrameError, WeakFrameShape};
use crate::qseries::{self, EtaProduct, FactoredForm, GaussRat, SeriesError, TwoVarSeries, Q_DEN};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MoonError {
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("data table: {0}")]
    Data(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("no eta quotient matches: {0}")]
    Recognition(String),
}

fn parse_power(s: &str) -> Result<BigInt, MoonError> {
    let bad = || MoonError::Data(format!("bad integer {s:?}"));
    match s.split_once('^') {
        Some((b, e)) => {
            let b: BigInt = b.parse().map_err(|_| bad())?;
            let e: u32 = e.parse().map_err(|_| bad())?;
            Ok(num_traits::pow(b, e as usize))
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_rational(s: &str) -> Result<BigRational, MoonError> {
    match s.split_once('/') {
        Some((n, d)) => Ok(BigRational::new(parse_power(n)?, parse_power(d)?)),
        None => Ok(BigRational::from_integer(parse_power(s)?)),
    }
}

/// One conjugacy class with the Frame shapes of its lift.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassRecord {
    pub name: String,
    pub so56: WeakFrameShape,
    pub su28: WeakFrameShape,
    /// Lifts of `g` and `-g` with their exterior-algebra traces; one entry when
    /// the two lifts are conjugate, `None` when both traces vanish.
    pub wedge: Option<Vec<(String, BigInt)>>,
}

impl ClassRecord {
    /// Tabulated traces of `g` and `-g`.
    pub fn wedge_traces(&self) -> (BigInt, BigInt) {
        match &self.wedge {
            None => (BigInt::zero(), BigInt::zero()),
            Some(v) if v.len() == 1 => (v[0].1.clone(), v[0].1.clone()),
            Some(v) => (v[0].1.clone(), v[1].1.clone()),
        }
    }

    /// Exterior traces recomputed from the SU28 shape for `g` and `-g`.
    pub fn computed_traces(&self) -> Result<(GaussRat, GaussRat), MoonError> {
        Ok((self.su28.trace_exterior(1)?, self.su28.trace_exterior(-1)?))
    }

    /// True when both recomputed traces equal the tabulated ones.
    pub fn wedge_consistent(&self) -> Result<bool, MoonError> {
        let (p, m) = self.computed_traces()?;
        let (tp, tm) = self.wedge_traces();
        Ok(p == GaussRat::from_bigint(tp) && m == GaussRat::from_bigint(tm))
    }
}

/// All 36 classes from the embedded table.
pub fn class_table() -> Result<Vec<ClassRecord>, MoonError> {
    let mut out = Vec::new();
    for row in data::rows(data::CLASSES) {
        let cols: Vec<&str> = row.split('|').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(MoonError::Data(format!("class row {row:?}")));
        }
        let wedge = if cols[3] == "-" {
            None
        } else {
            let mut v = Vec::new();
            for item in cols[3].split_whitespace() {
                let (lift, t) = item.split_once('=').ok_or_else(|| MoonError::Data(format!("wedge entry {item:?}")))?;
                v.push((lift.to_string(), parse_power(t)?));
            }
            Some(v)
        };
        out.push(ClassRecord { name: cols[0].to_string(), so56: cols[1].parse()?, su28: cols[2].parse()?, wedge });
    }
    Ok(out)
}

pub fn find_class(name: &str) -> Result<ClassRecord, MoonError> {
    class_table()?
        .into_iter()
        .find(|c| c.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| MoonError::UnknownClass(name.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// The Weyl-module VOA: `1/phi`.
    W,
    /// Its canonically twisted module: `1/psi`.
    WTwisted,
    /// The fermionic side: `phi`.
    A,
    /// Its twisted module: `psi`.
    ATwisted,
}

impl std::str::FromStr for Space {
    type Err = MoonError;
    fn from_str(s: &str) -> Result<Self, MoonError> {
        match s {
            "W" | "w" => Ok(Space::W),
            "W_twisted" | "w_twisted" | "Wt" => Ok(Space::WTwisted),
            "A" | "a" => Ok(Space::A),
            "A_twisted" | "a_twisted" | "At" => Ok(Space::ATwisted),
            _ => Err(MoonError::Data(format!("unknown space {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MtSeries {
    Series(TwoVarSeries),
    /// Twisted traces keep the atoms that vanish at `p = 1` symbolic.
    Factored(FactoredForm),
}

/// The graded trace of the lift `g` (`sign = 1`) or `-g` (`sign = -1`).
pub fn mt_series(c: &ClassRecord, space: Space, sign: i64, cutoff: i64) -> Result<MtSeries, MoonError> {
    let shape = if sign < 0 { c.su28.negate() } else { c.su28.clone() };
    Ok(match space {
        Space::W => MtSeries::Series(shape.phi_inverse(cutoff)?),
        Space::A => MtSeries::Series(shape.phi(cutoff)?),
        Space::WTwisted => MtSeries::Factored(shape.psi(cutoff)?.pow(-1)),
        Space::ATwisted => MtSeries::Factored(shape.psi(cutoff)?),
    })
}

/// `constant * prod eta(k tau)^e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaQuotient {
    pub constant: BigRational,
    pub product: EtaProduct,
}

impl EtaQuotient {
    pub fn inverse(&self) -> EtaQuotient {
        EtaQuotient { constant: self.constant.recip(), product: self.product.inverse() }
    }

    /// Half the sum of exponents.
    pub fn weight(&self) -> Ratio<i64> {
        Ratio::new(self.product.factors.iter().map(|f| f.1).sum(), 2)
    }

    pub fn series(&self, cutoff: i64) -> TwoVarSeries {
        let c = GaussRat::new(self.constant.clone(), BigRational::zero());
        self.product.series(cutoff).scale(&c)
    }

    /// `tau -> tau / r`; every `k` must be divisible by `r`.
    pub fn rescale(&self, r: i64) -> Option<EtaQuotient> {
        let mut f = Vec::new();
        for &(k, e) in &self.product.factors {
            if k % r != 0 {
                return None;
            }
            f.push((k / r, e));
        }
        Some(EtaQuotient { constant: self.constant.clone(), product: EtaProduct::new(f) })
    }

    pub fn eval(&self, tau: Complex64) -> Result<Complex64, SeriesError> {
        let c = self.constant.to_f64().unwrap_or(f64::NAN);
        Ok(self.product.eval_reduced(tau)? * c)
    }

    /// Parses `constant | 4^28/2^28`-style text (constant then a frame-shape-like quotient).
    pub fn parse(constant: &str, quotient: &str) -> Result<EtaQuotient, MoonError> {
        let shape: WeakFrameShape = quotient.parse()?;
        let mut f = Vec::new();
        for x in shape.factors() {
            if x.quarter != 0 {
                return Err(MoonError::Data(format!("eta quotient {quotient:?} has a phase")));
            }
            f.push((x.k, x.m));
        }
        Ok(EtaQuotient { constant: parse_rational(constant)?, product: EtaProduct::new(f) })
    }
}

impl fmt::Display for EtaQuotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for &(k, e) in &self.product.factors {
            write!(f, " eta({k}t)^{e}")?;
        }
        Ok(())
    }
}

fn mobius(n: i64) -> i64 {
    let mut n = n;
    let mut mu = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

/// Matches a one-variable series with `constant * prod_{k | level} eta(k tau)^e_k`.
///
/// Writes the normalized series as `prod_n (1 - q^n)^{b_n}` (from the
/// logarithmic derivative), then recovers `e_k` by Möbius inversion of
/// `b_n = sum_{k | n} e_k`. Any exponent outside the divisors of `level`, a
/// non-integral `b_n`, or a leading power inconsistent with the exponents is a
/// failure; nothing is rounded.
pub fn recognize_eta_quotient(s: &TwoVarSeries, level: i64) -> Result<EtaQuotient, MoonError> {
    let fail = |m: String| MoonError::Recognition(m);
    if s.terms().any(|(p, _, _)| p != 0) {
        return Err(fail("series depends on p".into()));
    }
    let v = s.q_floor().ok_or_else(|| fail("zero series".into()))?;
    let c0 = s.coeff(0, v);
    let top = (s.q_cutoff() - v) / Q_DEN;
    if top < level {
        return Err(fail(format!("only {top} integral orders known; level {level} needs more")));
    }
    if s.terms().any(|(_, q, _)| (q - v) % Q_DEN != 0) {
        return Err(fail("exponents off the integral ladder".into()));
    }
    let inv0 = c0.inv().expect("nonzero leading term");
    let a: Vec<GaussRat> = (0..=top).map(|n| &s.coeff(0, v + Q_DEN * n) * &inv0).collect();
    // h = q f' / f
    let mut h = vec![GaussRat::zero(); (top + 1) as usize];
    for n in 1..=top as usize {
        let mut x = &a[n] * &GaussRat::from_int(n as i64);
        for j in 1..n {
            x = &x - &(&a[j] * &h[n - j]);
        }
        h[n] = x;
    }
    let mut b = vec![BigInt::zero(); (top + 1) as usize];
    for n in 1..=top {
        let mut x = -h[n as usize].clone();
        for d in 1..n {
            if n % d == 0 {
                x = &x - &(&GaussRat::from_bigint(b[d as usize].clone()) * &GaussRat::from_int(d));
            }
        }
        let bn = (&x * &GaussRat::from_ratio(1, n)).to_integer().ok_or_else(|| fail(format!("b_{n} = {x}/{n} is not an integer")))?;
        b[n as usize] = bn;
    }
    let mut factors = Vec::new();
    for n in 1..=top {
        let mut e = BigInt::zero();
        for d in 1..=n {
            if n % d == 0 {
                e += &b[d as usize] * mobius(n / d);
            }
        }
        if e.is_zero() {
            continue;
        }
        if level % n != 0 {
            return Err(fail(format!("exponent {e} at eta({n} tau), outside the divisors of {level}")));
        }
        factors.push((n, e.to_i64().ok_or_else(|| fail("exponent overflow".into()))?));
    }
    let product = EtaProduct::new(factors);
    if product.q_order() != v {
        return Err(fail(format!("leading power q^{v}/24 but the exponents give q^{}/24", product.q_order())));
    }
    if !c0.im.is_zero() {
        return Err(fail(format!("non-real constant {c0}")));
    }
    Ok(EtaQuotient { constant: c0.re.clone(), product })
}

/// Lcm of the cycle lengths in a shape.
pub fn shape_level(s: &WeakFrameShape) -> i64 {
    s.factors().iter().fold(1, |acc, f| acc.lcm(&f.k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `lim_{p -> 1}` of the twisted fermionic trace.
    A,
    /// `lim_{p -> 1}` of the twisted Weyl trace.
    Forall,
}

/// `F~` for one side: an eta quotient, or the zero / infinity marker with the
/// order of the zero (positive) or pole (negative) at `p = 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum FTilde {
    Quotient { quotient: EtaQuotient, series: TwoVarSeries },
    Zero { order: i64 },
    Infinite { order: i64 },
}

impl FTilde {
    pub fn quotient(&self) -> Option<&EtaQuotient> {
        match self {
            FTilde::Quotient { quotient, .. } => Some(quotient),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            FTilde::Quotient { quotient, .. } => quotient.to_string(),
            FTilde::Zero { order } => format!("0 (zero of order {order})"),
            FTilde::Infinite { order } => format!("infinity (pole of order {})", -order),
        }
    }
}

/// The limit is taken through `max(orders, level)` integral q-orders so the
/// largest eta factor is visible to the recognizer.
pub fn f_tilde(c: &ClassRecord, side: Side, orders: i64) -> Result<FTilde, MoonError> {
    let level = shape_level(&c.su28);
    let form = c.su28.psi(Q_DEN * (orders.max(level) + 4))?;
    let form = match side {
        Side::A => form,
        Side::Forall => form.pow(-1),
    };
    let lead = form.q_num.max(0);
    let cutoff = lead + Q_DEN * (orders.max(level) + 1);
    match qseries::limit_p_to_one(&form, cutoff) {
        Ok(series) => {
            let v = series.q_floor().unwrap_or(0);
            let series = series.truncate(v + Q_DEN * orders.max(level));
            let quotient = recognize_eta_quotient(&series, level)?;
            Ok(FTilde::Quotient { quotient, series })
        }
        Err(SeriesError::DivergesOrVanishes(o)) if o > 0 => Ok(FTilde::Zero { order: o }),
        Err(SeriesError::DivergesOrVanishes(o)) => Ok(FTilde::Infinite { order: o }),
        Err(e) => Err(e.into()),
    }
}

/// A printed closed form and the group data for its modular checks.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm {
    pub class: String,
    pub a_side: EtaQuotient,
    /// `tau -> tau / rescale` conjugation before the group acts.
    pub rescale: i64,
    pub level: i64,
    pub fricke: bool,
}

impl ClosedForm {
    pub fn forall_side(&self) -> EtaQuotient {
        self.a_side.inverse()
    }

    pub fn group_name(&self) -> String {
        if self.fricke {
            format!("Gamma0({})+{}", self.level, self.level)
        } else {
            format!("Gamma0({})", self.level)
        }
    }
}

pub fn closed_forms() -> Result<Vec<ClosedForm>, MoonError> {
    let mut out = Vec::new();
    for row in data::rows(data::CLOSED_FORMS) {
        let cols: Vec<&str> = row.split('|').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(MoonError::Data(format!("closed form row {row:?}")));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|_| MoonError::Data(format!("bad integer {s:?}")));
        out.push(ClosedForm {
            class: cols[0].to_string(),
            a_side: EtaQuotient::parse(cols[1], cols[2])?,
            rescale: int(cols[3])?,
            level: int(cols[4])?,
            fricke: cols[5] == "yes",
        });
    }
    Ok(out)
}

pub fn closed_form(class: &str) -> Result<Option<ClosedForm>, MoonError> {
    Ok(closed_forms()?.into_iter().find(|c| c.class.eq_ignore_ascii_case(class)))
}

/// `F^A * F^forall = 1` through the common cutoff, or `None` if either side is
/// a constant marker.
pub fn reciprocity_check(c: &ClassRecord, orders: i64) -> Result<Option<bool>, MoonError> {
    let (FTilde::Quotient { series: a, .. }, FTilde::Quotient { series: b, .. }) =
        (f_tilde(c, Side::A, orders)?, f_tilde(c, Side::Forall, orders)?)
    else {
        return Ok(None);
    };
    let prod = a.mul(&b);
    let one = prod.terms().count() == 1 && prod.coeff(0, 0).is_one();
    Ok(Some(one && prod.q_cutoff() >= Q_DEN * orders))
}

/// `[a, b, c, d]` for `(a tau + b) / (c tau + d)`.
pub type Mat2 = [i64; 4];

fn mat_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn mat_inv(x: &Mat2) -> Mat2 {
    [x[3], -x[1], -x[2], x[0]]
}

pub fn act(m: &Mat2, tau: Complex64) -> Complex64 {
    (tau * m[0] as f64 + m[1] as f64) / (tau * m[2] as f64 + m[3] as f64)
}

fn p1_normalize(c: i64, d: i64, n: i64) -> (i64, i64) {
    (1..n.max(2))
        .filter(|u| u.gcd(&n) == 1)
        .map(|u| ((u * c).rem_euclid(n), (u * d).rem_euclid(n)))
        .min()
        .unwrap_or((0, 0))
}

/// Coset representatives of `Gamma0(n)` in `SL2(Z)`, one per point of `P^1(Z/n)`.
pub fn gamma0_cosets(n: i64) -> BTreeMap<(i64, i64), Mat2> {
    let gens: [Mat2; 2] = [[0, -1, 1, 0], [1, 1, 0, 1]];
    let start = p1_normalize(0, 1, n);
    let mut reps = BTreeMap::from([(start, [1, 0, 0, 1])]);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for g in &gens {
            let y = p1_normalize(x.0 * g[0] + x.1 * g[2], x.0 * g[1] + x.1 * g[3], n);
            if !reps.contains_key(&y) {
                reps.insert(y, mat_mul(&reps[&x], g));
                queue.push_back(y);
            }
        }
    }
    reps
}

/// Schreier generators of `Gamma0(n)` from the coset action of `S` and `T`,
/// with `+-I` and repeats (up to sign) removed.
pub fn gamma0_generators(n: i64) -> Vec<Mat2> {
    let gens: [Mat2; 2] = [[0, -1, 1, 0], [1, 1, 0, 1]];
    let reps = gamma0_cosets(n);
    let mut out: Vec<Mat2> = Vec::new();
    for (x, r) in &reps {
        for g in &gens {
            let y = p1_normalize(x.0 * g[0] + x.1 * g[2], x.0 * g[1] + x.1 * g[3], n);
            let mut h = mat_mul(&mat_mul(r, g), &mat_inv(&reps[&y]));
            debug_assert_eq!(h[2].rem_euclid(n), 0);
            if h.iter().find(|v| **v != 0).is_some_and(|v| *v < 0) {
                h = h.map(|v| -v);
            }
            if h != [1, 0, 0, 1] && !out.contains(&h) {
                out.push(h);
            }
        }
    }
    out
}

/// Sample points with imaginary parts in `[0.3, 2]`.
pub const SAMPLE_POINTS: [(f64, f64); 4] = [(0.1, 0.45), (-0.27, 0.8), (0.41, 1.3), (0.05, 1.9)];

#[derive(Clone, Debug, serde::Serialize)]
pub struct GeneratorCheck {
    pub matrix: Mat2,
    /// `f(gamma tau) / f(tau)` at the first sample point.
    pub multiplier: (f64, f64),
    /// Spread of the multiplier over the sample points plus its distance from modulus one.
    pub deviation: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FrickeCheck {
    /// Predicted `lambda` in `F^A(-1/(N tau)) = lambda F^forall(tau)`.
    pub lambda: String,
    pub deviation: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GenusZeroReport {
    pub class: String,
    pub group: String,
    pub rescaled: String,
    pub generators: Vec<GeneratorCheck>,
    pub fricke: Option<FrickeCheck>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub failures: Vec<String>,
}

impl GenusZeroReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Rescales the pair, then checks numerically that each generator of
/// `Gamma0(level)` multiplies both functions by a constant of modulus one, and
/// (where stated) that the Fricke involution carries `F^A` to a predicted
/// multiple of `F^forall`.
pub fn genus_zero_check(cf: &ClosedForm, tolerance: f64) -> Result<GenusZeroReport, MoonError> {
    let fa = cf.a_side.rescale(cf.rescale).ok_or_else(|| MoonError::Data(format!("{}: rescale {} does not divide", cf.class, cf.rescale)))?;
    let ff = fa.inverse();
    let pts: Vec<Complex64> = SAMPLE_POINTS.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
    let mut generators = Vec::new();
    let mut failures = Vec::new();
    for g in gamma0_generators(cf.level) {
        let mut dev: f64 = 0.0;
        let mut mult = Complex64::new(0.0, 0.0);
        for f in [&fa, &ff] {
            let ratios: Vec<Complex64> = pts.iter().map(|t| Ok(f.eval(act(&g, *t))? / f.eval(*t)?)).collect::<Result<_, SeriesError>>()?;
            for r in &ratios {
                dev = dev.max((r - ratios[0]).norm());
            }
            dev = dev.max((ratios[0].norm() - 1.0).abs());
            if std::ptr::eq(f, &fa) {
                mult = ratios[0];
            }
        }
        if !(dev <= tolerance) {
            failures.push(format!("generator {g:?}: deviation {dev:e}"));
        }
        generators.push(GeneratorCheck { matrix: g, multiplier: (mult.re, mult.im), deviation: dev });
    }
    let fricke = if cf.fricke {
        let n = cf.level;
        let mut swapped: Vec<(i64, i64)> = fa.product.factors.iter().map(|&(k, e)| (n / k, e)).collect();
        swapped.sort();
        let recip = fa.product.inverse().factors;
        if fa.product.factors.iter().any(|&(k, _)| n % k != 0) || swapped != recip {
            failures.push("Fricke image is not the reciprocal eta quotient".into());
            None
        } else {
            // eta(-k/(N tau)) = sqrt(N tau/(k i)) eta(N tau/k); the tau powers cancel at weight 0
            let mut lambda = &fa.constant * &fa.constant;
            for &(k, e) in &fa.product.factors {
                if e % 2 != 0 {
                    return Err(MoonError::Data(format!("{}: odd exponent under Fricke", cf.class)));
                }
                let base = BigRational::new(BigInt::from(n), BigInt::from(k));
                lambda *= num_traits::pow::Pow::pow(&base, (e / 2) as i32);
            }
            let lf = lambda.to_f64().unwrap_or(f64::NAN);
            let mut dev: f64 = 0.0;
            for t in &pts {
                let w = -1.0 / (*t * n as f64);
                let lhs = fa.eval(w)?;
                let rhs = ff.eval(*t)? * lf;
                dev = dev.max((lhs - rhs).norm() / rhs.norm());
            }
            if !(dev <= tolerance) {
                failures.push(format!("Fricke: deviation {dev:e}"));
            }
            Some(FrickeCheck { lambda: lambda.to_string(), deviation: dev })
        }
    } else {
        None
    };
    let max_deviation = generators.iter().map(|g| g.deviation).chain(fricke.iter().map(|f| f.deviation)).fold(0.0, f64::max);
    Ok(GenusZeroReport {
        class: cf.class.clone(),
        group: cf.group_name(),
        rescaled: fa.to_string(),
        generators,
        fricke,
        max_deviation,
        tolerance,
        failures,
    })
}

/// A named set of irreducible degrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeTable {
    pub name: String,
    pub degrees: Vec<u64>,
}

/// A printed identity `lhs = sum mult * degree`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Identity {
    pub source: String,
    pub table: String,
    pub lhs: u64,
    pub parts: Vec<(u64, u64)>,
}

impl Identity {
    pub fn sum(&self) -> u64 {
        self.parts.iter().map(|(m, d)| m * d).sum()
    }

    /// Exact sum and membership of every part in the table.
    pub fn holds(&self, tables: &[DegreeTable]) -> bool {
        let Some(t) = tables.iter().find(|t| t.name == self.table) else {
            return false;
        };
        self.sum() == self.lhs && self.parts.iter().all(|(_, d)| t.degrees.contains(d))
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|(m, d)| if *m == 1 { d.to_string() } else { format!("({m}){d}") }).collect();
        write!(f, "{} = {}", self.lhs, parts.join("+"))
    }
}

pub fn identities() -> Result<(Vec<DegreeTable>, Vec<Identity>), MoonError> {
    let bad = |r: &str| MoonError::Data(format!("identity row {r:?}"));
    let mut tables = Vec::new();
    let mut ids = Vec::new();
    for row in data::rows(data::IDENTITIES) {
        if let Some(rest) = row.strip_prefix('@') {
            let mut it = rest.split_whitespace();
            let name = it.next().ok_or_else(|| bad(row))?.to_string();
            let mut degrees: Vec<u64> = it.map(|d| d.parse().map_err(|_| bad(row))).collect::<Result<_, _>>()?;
            degrees.sort();
            tables.push(DegreeTable { name, degrees });
            continue;
        }
        let cols: Vec<&str> = row.split('|').map(str::trim).collect();
        let [source, table, eq] = cols[..] else {
            return Err(bad(row));
        };
        let (lhs, rhs) = eq.split_once('=').ok_or_else(|| bad(row))?;
        let mut parts = Vec::new();
        for p in rhs.split('+').map(str::trim) {
            let (m, d) = match p.strip_prefix('(').and_then(|x| x.split_once(')')) {
                Some((m, d)) => (m.parse().map_err(|_| bad(row))?, d),
                None => (1, p),
            };
            parts.push((m, d.parse().map_err(|_| bad(row))?));
        }
        ids.push(Identity { source: source.into(), table: table.into(), lhs: lhs.trim().parse().map_err(|_| bad(row))?, parts });
    }
    Ok((tables, ids))
}

/// All multisets of at most `max_parts` degrees summing to `value`, largest
/// degrees first, stopping after `limit` solutions.
pub fn decompose_coefficient(value: u64, degrees: &[u64], max_parts: u32, limit: usize) -> Vec<Vec<(u64, u64)>> {
    let mut ds: Vec<u64> = degrees.iter().copied().filter(|d| *d > 0).collect();
    ds.sort_unstable_by(|a, b| b.cmp(a));
    ds.dedup();
    fn rec(ds: &[u64], i: usize, left: u64, parts: u32, cur: &mut Vec<(u64, u64)>, out: &mut Vec<Vec<(u64, u64)>>, limit: usize) {
        if out.len() >= limit {
            return;
        }
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        if i == ds.len() || parts == 0 {
            return;
        }
        let d = ds[i];
        let most = (left / d).min(parts as u64);
        for m in (0..=most).rev() {
            if m > 0 {
                cur.push((m, d));
            }
            rec(ds, i + 1, left - m * d, parts - m as u32, cur, out, limit);
            if m > 0 {
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&ds, 0, value, max_parts, &mut Vec::new(), &mut out, limit);
    for v in &mut out {
        v.reverse();
    }
    out
}

/// Tabulated character entries as `(degree, charge, coefficient)`.
pub fn character_table() -> Result<Vec<(Ratio<i64>, i64, BigInt)>, MoonError> {
    let mut out = Vec::new();
    for row in data::rows(data::CHARACTER) {
        let (deg, rest) = row.split_once('|').ok_or_else(|| MoonError::Data(row.into()))?;
        let deg: Ratio<i64> = deg.trim().parse().map_err(|_| MoonError::Data(row.into()))?;
        for item in rest.split_whitespace() {
            let (c, v) = item.split_once('=').ok_or_else(|| MoonError::Data(row.into()))?;
            out.push((deg, c.parse().map_err(|_| MoonError::Data(row.into()))?, v.parse().map_err(|_| MoonError::Data(row.into()))?));
        }
    }
    Ok(out)
}

/// The identity-class character `1/phi(1^28)` through `max_degree`, keyed by
/// `(degree, charge)` with the `q^{28/24}` offset removed.
pub fn character(max_degree: Ratio<i64>) -> Result<BTreeMap<(Ratio<i64>, i64), GaussRat>, MoonError> {
    let shape: WeakFrameShape = "1^28".parse()?;
    let offset = shape.dimension();
    let top = (max_degree * Q_DEN).to_integer() + offset;
    let s = shape.phi_inverse(top)?;
    let mut out = BTreeMap::new();
    for (p, q, c) in s.terms() {
        if p % 2 != 0 {
            return Err(MoonError::Data("half-integral charge in the character".into()));
        }
        out.insert((Ratio::new(q - offset, Q_DEN), p / 2), c.clone());
    }
    Ok(out)
}

/// CSV laid out like the printed table: one row per degree, one column per
/// charge `0..=max_charge`, blank where the coefficient vanishes.
pub fn character_csv(max_degree: Ratio<i64>, max_charge: i64) -> Result<String, MoonError> {
    let ch = character(max_degree)?;
    let mut s = String::from("degree");
    for c in 0..=max_charge {
        s.push_str(&format!(",{c}"));
    }
    s.push('\n');
    let mut d = Ratio::zero();
    while d <= max_degree {
        s.push_str(&d.to_string());
        for c in 0..=max_charge {
            s.push(',');
            if let Some(v) = ch.get(&(d, c)) {
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
        d += Ratio::new(1, 2);
    }
    Ok(s)
}

fn gauss_json(g: &GaussRat) -> Value {
    json!(g.to_string())
}

/// Everything computed for one class, in a fixed key order.
pub fn class_report(c: &ClassRecord, orders: i64, tolerance: f64) -> Result<Value, MoonError> {
    let (tp, tm) = c.computed_traces()?;
    let (wp, wm) = c.wedge_traces();
    let fa = f_tilde(c, Side::A, orders)?;
    let ff = f_tilde(c, Side::Forall, orders)?;
    let closed = closed_form(&c.name)?;
    let matches_closed = match (&closed, fa.quotient()) {
        (Some(cf), Some(q)) => Some(cf.a_side == *q),
        (None, None) => None,
        _ => Some(false),
    };
    let genus = match &closed {
        Some(cf) => Some(serde_json::to_value(genus_zero_check(cf, tolerance)?).map_err(|e| MoonError::Data(e.to_string()))?),
        None => None,
    };
    let leading = |f: &FTilde| match f {
        FTilde::Quotient { quotient, .. } => json!(quotient.constant.to_string()),
        _ => Value::Null,
    };
    Ok(json!({
        "class": c.name,
        "so56": c.so56.to_string(),
        "su28": c.su28.to_string(),
        "lifts": c.wedge.as_ref().map(|v| v.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>()),
        "trace_plus": {"table": wp.to_string(), "computed": gauss_json(&tp)},
        "trace_minus": {"table": wm.to_string(), "computed": gauss_json(&tm)},
        "f_a": fa.label(),
        "f_forall": ff.label(),
        "leading_a": leading(&fa),
        "leading_forall": leading(&ff),
        "closed_form": closed.as_ref().map(|cf| cf.a_side.to_string()),
        "closed_form_matches": matches_closed,
        "reciprocity": reciprocity_check(c, orders)?,
        "genus_zero": genus,
    }))
}

/// Reports for all classes, computed in parallel and ordered as in the table.
pub fn report(orders: i64, tolerance: f64) -> Result<Value, MoonError> {
    let classes = class_table()?;
    let rows: Vec<Value> = classes.par_iter().map(|c| class_report(c, orders, tolerance)).collect::<Result<_, _>>()?;
    Ok(json!({ "orders": orders, "tolerance": tolerance, "classes": rows }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes_have_right_dimensions() {
        let t = class_table().unwrap();
        assert_eq!(t.len(), 36);
        for c in &t {
            assert_eq!(c.su28.dimension(), 28, "{}", c.name);
            assert_eq!(c.so56.dimension(), 56, "{}", c.name);
        }
    }

    #[test]
    fn wedge_traces_match() {
        for c in class_table().unwrap() {
            assert!(c.wedge_consistent().unwrap(), "{}: {:?}", c.name, c.computed_traces());
        }
    }

    #[test]
    fn lift_orders_match_names() {
        for c in class_table().unwrap() {
            if let Some(v) = &c.wedge {
                let order = |s: &str| s.trim_end_matches(char::is_alphabetic).parse::<i64>().unwrap();
                assert_eq!(c.su28.order().unwrap(), order(&v[0].0), "{}", c.name);
                assert_eq!(c.su28.negate().order().unwrap(), order(&v[v.len() - 1].0), "{}", c.name);
            }
        }
    }

    #[test]
    fn mobius_values() {
        assert_eq!((1..=10).map(mobius).collect::<Vec<_>>(), vec![1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
    }

    #[test]
    fn recognizes_known_quotients() {
        let q = EtaQuotient::parse("4", "2^2 20^6/4^2 10^6").unwrap();
        let s = q.series(q.product.q_order() + 24 * 22);
        assert_eq!(recognize_eta_quotient(&s, 20).unwrap(), q);
        assert!(recognize_eta_quotient(&s, 10).is_err());
        let short = q.series(q.product.q_order() + 24 * 5);
        assert!(recognize_eta_quotient(&short, 20).is_err());
    }

    #[test]
    fn rejects_non_eta_series() {
        let s = TwoVarSeries::from_terms([(0, 0, GaussRat::one()), (0, 24, GaussRat::from_ratio(1, 2))], 24 * 4);
        assert!(matches!(recognize_eta_quotient(&s, 4), Err(MoonError::Recognition(_))));
    }

    #[test]
    fn f_tilde_2b_and_29a() {
        let c = find_class("2B").unwrap();
        let a = f_tilde(&c, Side::A, 20).unwrap();
        assert_eq!(a.quotient().unwrap(), &EtaQuotient::parse("2^14", "4^28/2^28").unwrap());
        let f = f_tilde(&c, Side::Forall, 20).unwrap();
        assert_eq!(f.quotient().unwrap(), &EtaQuotient::parse("1/2^14", "2^28/4^28").unwrap());
        let c = find_class("29A").unwrap();
        assert_eq!(f_tilde(&c, Side::A, 20).unwrap().quotient().unwrap(), &EtaQuotient::parse("29", "29^2/1^2").unwrap());
    }

    #[test]
    fn constant_classes() {
        let c = find_class("1A").unwrap();
        assert_eq!(f_tilde(&c, Side::A, 4).unwrap(), FTilde::Zero { order: 28 });
        assert_eq!(f_tilde(&c, Side::Forall, 4).unwrap(), FTilde::Infinite { order: -28 });
        assert_eq!(reciprocity_check(&c, 4).unwrap(), None);
    }

    #[test]
    fn coset_counts() {
        for (n, idx) in [(2, 3), (10, 18), (26, 42), (29, 30)] {
            assert_eq!(gamma0_cosets(n).len(), idx);
            for g in gamma0_generators(n) {
                assert_eq!(g[0] * g[3] - g[1] * g[2], 1);
                assert_eq!(g[2] % n, 0);
            }
        }
        assert!(gamma0_generators(2).contains(&[1, 1, 0, 1]));
    }

    #[test]
    fn decompositions() {
        let (tables, ids) = identities().unwrap();
        assert_eq!(ids.len(), 15);
        for id in &ids {
            assert!(id.holds(&tables), "{id}");
        }
        let ru = &tables.iter().find(|t| t.name == "ru").unwrap().degrees;
        let found = decompose_coefficient(31465, ru, 4, 1000);
        assert!(found.contains(&vec![(1, 1), (1, 783), (1, 3276), (1, 27405)]));
        assert_eq!(decompose_coefficient(406, ru, 1, 10), vec![vec![(1, 406)]]);
    }

    #[test]
    fn character_low_rows() {
        let ch = character(Ratio::from_integer(2)).unwrap();
        assert_eq!(ch[&(Ratio::from_integer(1), 0)], GaussRat::from_int(784));
        assert_eq!(ch[&(Ratio::from_integer(1), -2)], GaussRat::from_int(406));
        assert_eq!(ch[&(Ratio::new(1, 2), 1)], GaussRat::from_int(28));
        let csv = character_csv(Ratio::from_integer(1), 2).unwrap();
        assert_eq!(csv, "degree,0,1,2\n0,1,,\n1/2,,28,\n1,784,,406\n");
    }

    #[test]
    fn mt_series_spaces() {
        let c = find_class("2B").unwrap();
        let MtSeries::Series(w) = mt_series(&c, Space::W, 1, 72).unwrap() else { panic!() };
        let direct = "4^14/2^14".parse::<WeakFrameShape>().unwrap().phi_inverse(72).unwrap();
        assert_eq!(w, direct);
        assert!(matches!(mt_series(&c, Space::WTwisted, 1, 24).unwrap(), MtSeries::Factored(_)));
    }

    #[test]
    fn closed_forms_all_classes() {
        let forms = closed_forms().unwrap();
        for c in class_table().unwrap() {
            let a = f_tilde(&c, Side::A, 20).unwrap();
            let lead = c.computed_traces().unwrap().1;
            match forms.iter().find(|f| f.class == c.name) {
                Some(cf) => {
                    let q = a.quotient().unwrap_or_else(|| panic!("{}: {}", c.name, a.label()));
                    assert_eq!(q, &cf.a_side, "{}", c.name);
                    assert_eq!(GaussRat::new(q.constant.clone(), BigRational::zero()), lead);
                    assert_eq!(q.weight(), Ratio::zero());
                    let FTilde::Quotient { series, .. } = &a else { unreachable!() };
                    let v = series.q_floor().unwrap();
                    assert_eq!(series.truncate(v + 24 * 20), cf.a_side.series(v + 24 * 20), "{}", c.name);
                    assert_eq!(f_tilde(&c, Side::Forall, 20).unwrap().quotient().unwrap(), &cf.forall_side());
                    assert_eq!(reciprocity_check(&c, 20).unwrap(), Some(true), "{}", c.name);
                }
                None => {
                    assert!(lead.is_zero(), "{}", c.name);
                    assert!(matches!(a, FTilde::Zero { .. }), "{}: {}", c.name, a.label());
                }
            }
        }
    }

    #[test]
    fn genus_zero_all_forms() {
        for cf in closed_forms().unwrap() {
            let r = genus_zero_check(&cf, 1e-9).unwrap();
            assert!(r.passed(), "{}: {:?}", cf.class, r.failures);
            assert_eq!(r.fricke.is_some(), cf.fricke);
        }
        let r = genus_zero_check(&closed_form("2B").unwrap().unwrap(), 1e-9).unwrap();
        assert_eq!(r.fricke.unwrap().lambda, "16384");
    }

    #[test]
    fn genus_zero_rejects_wrong_group() {
        let mut cf = closed_form("10B").unwrap().unwrap();
        cf.level = 5;
        assert!(!genus_zero_check(&cf, 1e-9).unwrap().passed());
        let mut cf = closed_form("10B").unwrap().unwrap();
        cf.fricke = true;
        assert!(!genus_zero_check(&cf, 1e-9).unwrap().passed());
        let mut cf = closed_form("29A").unwrap().unwrap();
        cf.level = 1;
        assert!(!genus_zero_check(&cf, 1e-9).unwrap().passed());
    }
}
