//! Weak Frame shapes `prod (k)_a^m`, their eigenvalue multisets, and the
//! theta quotients `phi` and `psi` built from them.
//!
//! A factor `(k)_a` stands for the `k` solutions of `x^k = e^{2 pi i a}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};

use crate::qseries::{self, FactoredForm, GaussRat, SeriesError, TwoVarSeries, P_DEN, Q_DEN};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FrameError {
    #[error("cannot parse frame shape {text:?}: {reason}")]
    Parse { text: String, reason: String },
    #[error("dimension {got} does not match the expected {want}")]
    Dimension { got: i64, want: i64 },
    #[error("eigenvalue e^(2 pi i {angle}) has negative multiplicity {mult}")]
    Inconsistent { angle: Ratio<i64>, mult: i64 },
    #[error("factor vanishes in a denominator")]
    DivisionByZero,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// One factor `(k)_a^m`; `a` is a quarter-integer phase in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub k: i64,
    /// The phase in quarters, `a = quarter / 4`.
    pub quarter: u8,
    pub m: i64,
}

impl Factor {
    pub fn phase(&self) -> Ratio<i64> {
        Ratio::new(self.quarter as i64, 4)
    }

    pub fn phase_big(&self) -> BigRational {
        BigRational::new((self.quarter as i64).into(), 4.into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeakFrameShape {
    factors: Vec<Factor>,
}

impl WeakFrameShape {
    /// Canonical shape: sorted by `(k, a)` with equal keys merged.
    pub fn new<I: IntoIterator<Item = Factor>>(factors: I) -> Self {
        let mut m: BTreeMap<(i64, u8), i64> = BTreeMap::new();
        for f in factors {
            *m.entry((f.k, f.quarter % 4)).or_insert(0) += f.m;
        }
        WeakFrameShape {
            factors: m.into_iter().filter(|e| e.1 != 0).map(|((k, quarter), m)| Factor { k, quarter, m }).collect(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// `sum k m`.
    pub fn dimension(&self) -> i64 {
        self.factors.iter().map(|f| f.k * f.m).sum()
    }

    pub fn check_dimension(&self, want: i64) -> Result<(), FrameError> {
        let got = self.dimension();
        if got == want {
            Ok(())
        } else {
            Err(FrameError::Dimension { got, want })
        }
    }

    /// The shape of `-g`: for odd `k` the phase moves by one half.
    pub fn negate(&self) -> WeakFrameShape {
        WeakFrameShape::new(self.factors.iter().map(|f| Factor {
            quarter: if f.k % 2 == 1 { (f.quarter + 2) % 4 } else { f.quarter },
            ..*f
        }))
    }

    /// Least common multiple of the orders of the eigenvalues.
    pub fn order(&self) -> Result<i64, FrameError> {
        let e = self.eigenvalues()?;
        Ok(e.entries.keys().fold(1, |acc, a| num_integer::lcm(acc, *a.denom())))
    }

    pub fn eigenvalues(&self) -> Result<EigenMultiset, FrameError> {
        let mut entries: BTreeMap<Ratio<i64>, i64> = BTreeMap::new();
        for f in &self.factors {
            for j in 0..f.k {
                let angle = (f.phase() + Ratio::from_integer(j)) / f.k;
                *entries.entry(angle).or_insert(0) += f.m;
            }
        }
        entries.retain(|_, m| *m != 0);
        if let Some((a, m)) = entries.iter().find(|(_, m)| **m < 0) {
            return Err(FrameError::Inconsistent { angle: *a, mult: *m });
        }
        Ok(EigenMultiset { entries })
    }

    /// `prod_i (1 + sign xi_i)` over the eigenvalues.
    ///
    /// Each factor contributes `prod_{x^k = c} (1 + s x t) = 1 - c (-s t)^k`;
    /// the product is the value at `t = 1` of that rational function,
    /// which is zero exactly when `-sign` is an eigenvalue.
    pub fn trace_exterior(&self, sign: i64) -> Result<GaussRat, FrameError> {
        assert!(sign == 1 || sign == -1, "sign must be +1 or -1");
        let eig = self.eigenvalues()?;
        let root = if sign == 1 { Ratio::new(1, 2) } else { Ratio::zero() };
        if eig.multiplicity(root) > 0 {
            return Ok(GaussRat::zero());
        }
        let mut acc = GaussRat::one();
        let mut order = 0;
        for f in &self.factors {
            // c (-s)^k as a power of i
            let mut quarters = f.quarter as i64;
            if sign == 1 && f.k % 2 == 1 {
                quarters += 2;
            }
            if quarters % 4 == 0 {
                order += f.m;
                acc = &acc * &GaussRat::from_int(f.k).pow(f.m).expect("nonzero");
            } else {
                let v = GaussRat::one() - GaussRat::unit(quarters);
                acc = &acc * &v.pow(f.m).ok_or(FrameError::DivisionByZero)?;
            }
        }
        if order != 0 {
            return Err(FrameError::DivisionByZero);
        }
        Ok(acc)
    }

    /// `prod_j [theta(k z + 1/2 + a | k tau) / eta(k tau)]^m` as a factored form.
    pub fn phi_factored(&self, cutoff: i64) -> Result<FactoredForm, FrameError> {
        let mut acc = FactoredForm::one();
        for f in &self.factors {
            let slack = cutoff + Q_DEN * f.k * f.m.abs() + Q_DEN * f.k;
            let t = qseries::theta_factored(f.k, &f.phase_big(), false, slack)?;
            let e = qseries::eta_factored(f.k, slack);
            acc = acc.mul(&t.mul(&e.pow(-1)).pow(f.m));
        }
        Ok(acc)
    }

    /// `phi` expanded through q-numerator `cutoff`.
    pub fn phi(&self, cutoff: i64) -> Result<TwoVarSeries, FrameError> {
        Ok(self.phi_factored(cutoff)?.expand(cutoff)?)
    }

    /// `1/phi`, the graded trace on the Weyl module, through `cutoff`.
    pub fn phi_inverse(&self, cutoff: i64) -> Result<TwoVarSeries, FrameError> {
        Ok(self.phi_factored(cutoff)?.pow(-1).expand(cutoff)?)
    }

    /// `prod_j p^{km/2} q^{km/8} [theta(k z + 1/2 + a + k tau/2 | k tau) / eta(k tau)]^m`,
    /// with the atoms that vanish at `p = 1` kept symbolic.
    pub fn psi(&self, cutoff: i64) -> Result<FactoredForm, FrameError> {
        let (pn, qn) = self.psi_theta_prefactor();
        let mut acc = FactoredForm { coeff: GaussRat::one(), p_num: pn, q_num: qn, atoms: Vec::new() };
        for f in &self.factors {
            let slack = cutoff + Q_DEN * f.k * f.m.abs() + Q_DEN * f.k;
            let t = qseries::theta_factored(f.k, &f.phase_big(), true, slack)?;
            let e = qseries::eta_factored(f.k, slack);
            acc = acc.mul(&t.mul(&e.pow(-1)).pow(f.m));
        }
        Ok(acc)
    }

    /// The `p^{sum km/2} q^{sum km/8}` prefactor of `psi` as ladder numerators.
    pub fn psi_theta_prefactor(&self) -> (i64, i64) {
        let d = self.dimension();
        (d * P_DEN / 2, d * Q_DEN / 8)
    }
}

impl FromStr for WeakFrameShape {
    type Err = FrameError;

    /// Accepts `1_{1/4}^4 4^6`, `4^{14}/2^{14}`, `29/1`; braces are optional.
    fn from_str(text: &str) -> Result<Self, FrameError> {
        let err = |reason: &str| FrameError::Parse { text: text.to_string(), reason: reason.to_string() };
        let mut depth = 0i32;
        let mut cuts = Vec::new();
        for (i, ch) in text.char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => depth -= 1,
                '/' if depth == 0 => cuts.push(i),
                _ => {}
            }
        }
        if cuts.len() > 1 {
            return Err(err("more than one '/'"));
        }
        let (num, den) = match cuts.first() {
            Some(&i) => (&text[..i], Some(&text[i + 1..])),
            None => (text, None),
        };
        let mut factors = parse_part(num).map_err(|r| err(&r))?;
        if factors.is_empty() {
            return Err(err("empty numerator"));
        }
        if let Some(den) = den {
            let d = parse_part(den).map_err(|r| err(&r))?;
            if d.is_empty() {
                return Err(err("empty denominator"));
            }
            factors.extend(d.into_iter().map(|f| Factor { m: -f.m, ..f }));
        }
        Ok(WeakFrameShape::new(factors))
    }
}

fn parse_part(s: &str) -> Result<Vec<Factor>, String> {
    let mut out = Vec::new();
    for tok in s.split_whitespace() {
        let (k, rest) = leading_int(tok).ok_or_else(|| format!("expected an integer at {tok:?}"))?;
        if k <= 0 {
            return Err(format!("cycle length {k} is not positive"));
        }
        let mut rest = rest;
        let mut quarter = 0u8;
        if let Some(r) = rest.strip_prefix('_') {
            let (body, r) = group(r)?;
            let a: Ratio<i64> = body.parse().map_err(|_| format!("bad phase {body:?}"))?;
            let q = a * 4;
            if !q.is_integer() || a < Ratio::zero() || a >= Ratio::one() {
                return Err(format!("phase {a} is not a quarter in [0,1)"));
            }
            quarter = q.to_integer() as u8;
            rest = r;
        }
        let mut m = 1;
        if let Some(r) = rest.strip_prefix('^') {
            let (body, r) = group(r)?;
            m = body.parse().map_err(|_| format!("bad exponent {body:?}"))?;
            rest = r;
        }
        if !rest.is_empty() {
            return Err(format!("trailing {rest:?}"));
        }
        out.push(Factor { k, quarter, m });
    }
    Ok(out)
}

fn leading_int(s: &str) -> Option<(i64, &str)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    Some((s[..end].parse().ok()?, &s[end..]))
}

/// A `{...}` group or a bare run up to the next `_`/`^`.
fn group(s: &str) -> Result<(&str, &str), String> {
    if let Some(r) = s.strip_prefix('{') {
        let end = r.find('}').ok_or("unclosed brace")?;
        Ok((&r[..end], &r[end + 1..]))
    } else {
        let end = s.find(['_', '^']).unwrap_or(s.len());
        if end == 0 {
            return Err("empty group".into());
        }
        Ok((&s[..end], &s[end..]))
    }
}

impl fmt::Display for WeakFrameShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let write_part = |f: &mut fmt::Formatter<'_>, fs: Vec<&Factor>| -> fmt::Result {
            for (i, x) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", x.k)?;
                if x.quarter != 0 {
                    write!(f, "_{{{}}}", x.phase())?;
                }
                write!(f, "^{{{}}}", x.m.abs())?;
            }
            Ok(())
        };
        let num: Vec<&Factor> = self.factors.iter().filter(|x| x.m > 0).collect();
        let den: Vec<&Factor> = self.factors.iter().filter(|x| x.m < 0).collect();
        if num.is_empty() {
            write!(f, "1^{{0}}")?;
        } else {
            write_part(f, num)?;
        }
        if !den.is_empty() {
            write!(f, "/")?;
            write_part(f, den)?;
        }
        Ok(())
    }
}

impl serde::Serialize for WeakFrameShape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Eigenvalues `e^{2 pi i angle}` with multiplicities; angles in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigenMultiset {
    entries: BTreeMap<Ratio<i64>, i64>,
}

impl EigenMultiset {
    pub fn entries(&self) -> &BTreeMap<Ratio<i64>, i64> {
        &self.entries
    }

    pub fn total(&self) -> i64 {
        self.entries.values().sum()
    }

    pub fn multiplicity(&self, angle: Ratio<i64>) -> i64 {
        self.entries.get(&angle).copied().unwrap_or(0)
    }
}
