//! The Conway-Wales lattice: a Hermitian Z[i]-lattice of rank 28 that is
//! even and unimodular (and rootless) as a Z-lattice of rank 56.
//!
//! Vectors are seven complex quaternions `(q0, .., q6)`, each written in the
//! C-basis `i, j, k, l`, giving 28 complex coordinates. All coordinates are
//! stored doubled so that lattice members live in Z[i]^28. The Hermitian
//! pairing is `h(x, y) = (1/4) sum x_j conj(y_j)` on doubled coordinates and
//! the Z-lattice carries the real form `Re h`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::data;
use crate::gauss::Gi;

mod delta;
mod reduce;

pub use delta::{monomial_at, monomial_rank, QuarticInvariant, MONOMIALS, SCALE_LOG2};
pub use reduce::{bkz_gram, gso, lll_gram, ShortVectors};

pub const RANK: usize = 28;
pub const REAL_RANK: usize = 56;
/// Block size and tour limit for the BKZ pass before enumeration.
pub const BKZ_BLOCK: usize = 20;
pub const BKZ_TOURS: usize = 20;
/// Number of norm-4 vectors, pinned from an independent Fincke-Pohst run.
pub const MINIMAL_COUNT: usize = 16240;

#[derive(Debug, thiserror::Error)]
pub enum LatticeError {
    #[error("malformed generator table at line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("integer overflow during {0}")]
    Overflow(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A vector in doubled coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CwVector {
    pub coords: [Gi; RANK],
}

impl CwVector {
    pub fn zero() -> Self {
        CwVector { coords: [Gi::ZERO; RANK] }
    }

    /// `4 h(self, other)`, an element of Z[i].
    pub fn herm4(&self, other: &CwVector) -> Gi {
        let mut acc = Gi::ZERO;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            acc += *a * b.conj();
        }
        acc
    }

    /// `4 h(self, self)`.
    pub fn norm4(&self) -> i64 {
        self.coords.iter().map(|c| c.norm()).sum()
    }

    /// Hermitian norm `h(self, self)` as a rational `(num, 4)`; lattice
    /// vectors of type 2 have norm 4.
    pub fn norm(&self) -> f64 {
        self.norm4() as f64 / 4.0
    }

    pub fn scale(&self, s: Gi) -> CwVector {
        let mut out = *self;
        for c in out.coords.iter_mut() {
            *c = *c * s;
        }
        out
    }

    pub fn add(&self, o: &CwVector) -> CwVector {
        let mut out = *self;
        for (c, d) in out.coords.iter_mut().zip(&o.coords) {
            *c = *c + *d;
        }
        out
    }

    /// The 56 real coordinates `(re, im)` interleaved.
    pub fn to_compact(&self) -> [i8; REAL_RANK] {
        let mut out = [0i8; REAL_RANK];
        for (j, c) in self.coords.iter().enumerate() {
            out[2 * j] = c.re as i8;
            out[2 * j + 1] = c.im as i8;
        }
        out
    }

    pub fn from_compact(c: &[i8; REAL_RANK]) -> Self {
        let mut v = CwVector::zero();
        for j in 0..RANK {
            v.coords[j] = Gi::new(c[2 * j] as i64, c[2 * j + 1] as i64);
        }
        v
    }
}

/// One entry of the printed generator tables.
#[derive(Clone, Debug)]
pub struct TableVector {
    pub vector: CwVector,
    pub misprint: bool,
}

fn parse_entry(tok: &str) -> Option<Gi> {
    Some(match tok {
        "0" => Gi::ZERO,
        "1" => Gi::new(1, 0),
        "-1" => Gi::new(-1, 0),
        "2" => Gi::new(2, 0),
        "-2" => Gi::new(-2, 0),
        "i" => Gi::new(0, 1),
        "-i" => Gi::new(0, -1),
        _ => return None,
    })
}

/// Every vector printed in the two tables, in order, with misprint flags.
pub fn table_vectors() -> Result<Vec<TableVector>, LatticeError> {
    let mut out = Vec::new();
    let mut cur: Option<(i64, bool, Vec<Gi>)> = None;
    let flush = |cur: &mut Option<(i64, bool, Vec<Gi>)>, out: &mut Vec<TableVector>, line: usize| {
        if let Some((_, misprint, coords)) = cur.take() {
            if coords.len() != RANK {
                return Err(LatticeError::Table { line, msg: format!("{} coordinates", coords.len()) });
            }
            let mut v = CwVector::zero();
            v.coords.copy_from_slice(&coords);
            out.push(TableVector { vector: v, misprint });
        }
        Ok(())
    };
    for (n, raw) in data::CW_GENERATORS.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("scale") {
            flush(&mut cur, &mut out, n + 1)?;
            let mut it = rest.split_whitespace();
            let mult = match it.next() {
                Some("1") => 2,
                Some("1/2") => 1,
                other => return Err(LatticeError::Table { line: n + 1, msg: format!("scale {other:?}") }),
            };
            let misprint = it.next() == Some("misprint");
            cur = Some((mult, misprint, Vec::with_capacity(RANK)));
            continue;
        }
        let Some((mult, _, coords)) = cur.as_mut() else {
            return Err(LatticeError::Table { line: n + 1, msg: "row before scale".into() });
        };
        for tok in line.split_whitespace() {
            let g = parse_entry(tok)
                .ok_or_else(|| LatticeError::Table { line: n + 1, msg: format!("token {tok}") })?;
            coords.push(Gi::new(g.re * *mult, g.im * *mult));
        }
    }
    flush(&mut cur, &mut out, data::CW_GENERATORS.lines().count())?;
    Ok(out)
}

/// The 20 generating vectors: the printed tables without the misprint.
pub fn table_generators() -> Vec<CwVector> {
    table_vectors()
        .expect("embedded generator table parses")
        .into_iter()
        .filter(|t| !t.misprint)
        .map(|t| t.vector)
        .collect()
}

/// Right multiplication of `w + x j + y k + z l` by a unit quaternion.
/// Units are indexed `0..4` for `1, j, k, l`.
fn quat_right_mul(q: [Gi; 4], unit: u8) -> [Gi; 4] {
    let [w, x, y, z] = q;
    match unit {
        0 => [w, x, y, z],
        1 => [-x, w, z, -y],
        2 => [-y, -z, w, x],
        _ => [-z, y, -x, w],
    }
}

/// An element of the monomial group `Q8 x 2^3:7`, acting as right
/// multiplication by a quaternion unit, then sign changes, then rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonomialElement {
    /// Unit `1, j, k, l` as `0..4`.
    pub unit: u8,
    /// Whether the unit is negated.
    pub negate: bool,
    /// Bit `n` set flips the sign of component `q_n`.
    pub sign_mask: u8,
    /// Component `q_i` of the image is component `q_{i+rotation}` of the input.
    pub rotation: u8,
}

/// The sign-change masks: the group generated by flipping `q_n, q_{n+3},
/// q_{n+5}, q_{n+6}`.
pub fn sign_masks() -> Vec<u8> {
    let gens: Vec<u8> = (0..7u8)
        .map(|n| [0u8, 3, 5, 6].iter().fold(0u8, |m, d| m | 1 << ((n + d) % 7)))
        .collect();
    let mut set: Vec<u8> = vec![0];
    loop {
        let mut grew = false;
        for &g in &gens {
            for s in set.clone() {
                if !set.contains(&(s ^ g)) {
                    set.push(s ^ g);
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    set.sort_unstable();
    set
}

impl MonomialElement {
    pub fn identity() -> Self {
        MonomialElement { unit: 0, negate: false, sign_mask: 0, rotation: 0 }
    }

    pub fn apply(&self, v: &CwVector) -> CwVector {
        let mut comps = [[Gi::ZERO; 4]; 7];
        for (n, comp) in comps.iter_mut().enumerate() {
            let c = &v.coords[4 * n..4 * n + 4];
            // the first column is the coefficient of the scalar i
            let q = [c[0] * Gi::I, c[1], c[2], c[3]];
            let mut r = quat_right_mul(q, self.unit);
            let mut flip = self.negate;
            if self.sign_mask >> n & 1 == 1 {
                flip = !flip;
            }
            if flip {
                r = r.map(|x| -x);
            }
            *comp = [r[0] * Gi::new(0, -1), r[1], r[2], r[3]];
        }
        let mut out = CwVector::zero();
        for i in 0..7 {
            let src = (i + self.rotation as usize) % 7;
            out.coords[4 * i..4 * i + 4].copy_from_slice(&comps[src]);
        }
        out
    }

    /// The action as a monomial matrix: `g(e_j) = phase_j * e_{perm_j}`,
    /// with `phase_j` an exponent of `i`.
    pub fn monomial(&self) -> ([usize; RANK], [u8; RANK]) {
        let mut perm = [0usize; RANK];
        let mut phase = [0u8; RANK];
        for j in 0..RANK {
            let mut e = CwVector::zero();
            e.coords[j] = Gi::ONE;
            let img = self.apply(&e);
            let (t, c) = img
                .coords
                .iter()
                .enumerate()
                .find(|(_, c)| !c.is_zero())
                .expect("monomial image is nonzero");
            perm[j] = t;
            phase[j] = (0..4u8).find(|&k| Gi::unit(k as i64) == *c).expect("unit phase");
        }
        (perm, phase)
    }
}

/// All 448 elements of the monomial group.
pub fn monomial_group() -> Vec<MonomialElement> {
    let mut out = Vec::with_capacity(448);
    for rotation in 0..7u8 {
        for &sign_mask in &sign_masks() {
            for negate in [false, true] {
                for unit in 0..4u8 {
                    out.push(MonomialElement { unit, negate, sign_mask, rotation });
                }
            }
        }
    }
    out
}

/// A Z[i]-basis together with its Gram data.
#[derive(Clone, Debug)]
pub struct CwLattice {
    pub basis: Vec<CwVector>,
    /// `4 h(b_j, b_k)`.
    pub herm4: Vec<Vec<Gi>>,
    /// Real Gram matrix of the Z-basis `b_1, i b_1, .., b_28, i b_28`.
    pub real_gram: Vec<Vec<i64>>,
}

fn checked_row_op(r: &mut CwVector, q: Gi, b: &CwVector) -> Result<(), LatticeError> {
    for (x, y) in r.coords.iter_mut().zip(&b.coords) {
        *x = x
            .checked_sub(q.checked_mul(*y).ok_or(LatticeError::Overflow("row reduction"))?)
            .ok_or(LatticeError::Overflow("row reduction"))?;
    }
    Ok(())
}

/// Incremental echelon form over the Euclidean domain Z[i].
///
/// With a modulus `m` the module is known to contain `m Z[i]^28`, and all
/// non-pivot entries are kept reduced modulo `m`.
#[derive(Clone, Debug, Default)]
pub struct GaussianEchelon {
    rows: Vec<Option<CwVector>>,
    modulus: Option<Gi>,
}

fn reduce_mod(v: &mut CwVector, m: Gi, skip: Option<usize>) {
    for (t, c) in v.coords.iter_mut().enumerate() {
        if Some(t) != skip {
            *c = *c - c.div_round(m) * m;
        }
    }
}

impl GaussianEchelon {
    pub fn new() -> Self {
        GaussianEchelon { rows: vec![None; RANK], modulus: None }
    }

    /// An echelon seeded with `m e_j` for every coordinate `j`; valid only
    /// when the module being built contains those vectors.
    pub fn with_modulus(m: Gi) -> Self {
        let mut rows = vec![None; RANK];
        for (j, r) in rows.iter_mut().enumerate() {
            let mut v = CwVector::zero();
            v.coords[j] = m.normalizing_unit() * m;
            *r = Some(v);
        }
        GaussianEchelon { rows, modulus: Some(m) }
    }

    pub fn rank(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    /// Adds a vector to the module; returns whether the module grew.
    pub fn insert(&mut self, v: &CwVector) -> Result<bool, LatticeError> {
        let mut r = *v;
        let mut grew = false;
        for c in 0..RANK {
            if r.coords[c].is_zero() {
                continue;
            }
            match self.rows[c].as_mut() {
                None => {
                    let u = r.coords[c].normalizing_unit();
                    self.rows[c] = Some(r.scale(u));
                    self.reduce_above(c)?;
                    return Ok(true);
                }
                Some(b) => {
                    let mut b_row = *b;
                    if r.coords[c].div_exact(b_row.coords[c]).is_none() {
                        grew = true;
                    }
                    while !r.coords[c].is_zero() {
                        let q = b_row.coords[c].div_round(r.coords[c]);
                        checked_row_op(&mut b_row, q, &r)?;
                        std::mem::swap(&mut b_row, &mut r);
                    }
                    if let Some(m) = self.modulus {
                        reduce_mod(&mut r, m, None);
                        reduce_mod(&mut b_row, m, Some(c));
                    }
                    let u = b_row.coords[c].normalizing_unit();
                    self.rows[c] = Some(b_row.scale(u));
                    if grew {
                        self.reduce_above(c)?;
                    }
                }
            }
        }
        Ok(grew)
    }

    /// Size-reduces every row against the pivots at and after column `from`.
    fn reduce_above(&mut self, from: usize) -> Result<(), LatticeError> {
        for i in 0..RANK {
            let Some(mut row) = self.rows[i] else { continue };
            for c in (i + 1).max(from)..RANK {
                if let Some(p) = self.rows[c] {
                    let q = row.coords[c].div_round(p.coords[c]);
                    if !q.is_zero() {
                        checked_row_op(&mut row, q, &p)?;
                    }
                }
            }
            self.rows[i] = Some(row);
        }
        Ok(())
    }

    pub fn basis(&self) -> Vec<CwVector> {
        self.rows.iter().flatten().copied().collect()
    }

    /// Whether `v` lies in the module.
    pub fn contains(&self, v: &CwVector) -> bool {
        let mut r = *v;
        for c in 0..RANK {
            if r.coords[c].is_zero() {
                continue;
            }
            let Some(b) = &self.rows[c] else { return false };
            let Some(q) = r.coords[c].div_exact(b.coords[c]) else { return false };
            if checked_row_op(&mut r, q, b).is_err() {
                return false;
            }
        }
        true
    }

    /// Product of the pivots.
    pub fn pivot_product(&self) -> Gi {
        self.rows.iter().flatten().enumerate().fold(Gi::ONE, |acc, (_, r)| {
            let p = r.coords.iter().find(|c| !c.is_zero()).copied().unwrap_or(Gi::ZERO);
            acc * p
        })
    }
}

/// Closure of the generators under the monomial group.
pub fn generator_orbit() -> Vec<CwVector> {
    let group = monomial_group();
    let mut seen: HashSet<CwVector> = HashSet::new();
    let mut out = Vec::new();
    for v in table_generators() {
        for g in &group {
            let w = g.apply(&v);
            if seen.insert(w) {
                out.push(w);
            }
        }
    }
    out.sort();
    out
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn bareiss_det(m: &[Vec<i64>]) -> BigInt {
    let n = m.len();
    let mut a: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

impl CwLattice {
    /// Builds the lattice from the generator orbit and checks rank, integrality,
    /// evenness and unimodularity.
    pub fn build() -> Result<CwLattice, LatticeError> {
        let orbit = generator_orbit();
        // The orbit contains a unit multiple of 4 e_j for every j, so the
        // module contains 4 Z[i]^28 and elimination can run modulo 4.
        let four = Gi::new(4, 0);
        let have_scaled_units = (0..RANK).all(|j| {
            orbit.iter().any(|v| {
                v.coords[j].norm() == 16 && v.coords.iter().enumerate().all(|(t, c)| t == j || c.is_zero())
            })
        });
        let mut ech = if have_scaled_units { GaussianEchelon::with_modulus(four) } else { GaussianEchelon::new() };
        for v in &orbit {
            ech.insert(v)?;
        }
        let basis = ech.basis();
        if basis.len() != RANK {
            return Err(LatticeError::Construction(format!("rank {} instead of {RANK}", basis.len())));
        }
        let lat = CwLattice::from_basis(basis)?;
        if !lat.is_even() {
            return Err(LatticeError::Construction("real Gram matrix is not even".into()));
        }
        let det = lat.real_det();
        if !det.is_one() {
            return Err(LatticeError::Construction(format!("real determinant {det}")));
        }
        Ok(lat)
    }

    pub fn from_basis(basis: Vec<CwVector>) -> Result<CwLattice, LatticeError> {
        let n = basis.len();
        let mut herm4 = vec![vec![Gi::ZERO; n]; n];
        for j in 0..n {
            for k in 0..n {
                herm4[j][k] = basis[j].herm4(&basis[k]);
            }
        }
        let reals: Vec<CwVector> = basis.iter().flat_map(|b| [*b, b.scale(Gi::I)]).collect();
        let mut real_gram = vec![vec![0i64; 2 * n]; 2 * n];
        for a in 0..2 * n {
            for b in 0..2 * n {
                let v = reals[a].herm4(&reals[b]).re;
                if v % 4 != 0 {
                    return Err(LatticeError::Construction(format!(
                        "non-integral real pairing {v}/4 between basis vectors {a} and {b}"
                    )));
                }
                real_gram[a][b] = v / 4;
            }
        }
        Ok(CwLattice { basis, herm4, real_gram })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_even(&self) -> bool {
        self.real_gram.iter().enumerate().all(|(i, r)| r[i] % 2 == 0)
    }

    pub fn real_det(&self) -> BigInt {
        bareiss_det(&self.real_gram)
    }

    /// Z-basis vector `a` of the real lattice (`b_{a/2}` or `i b_{a/2}`).
    pub fn real_basis_vector(&self, a: usize) -> CwVector {
        let b = self.basis[a / 2];
        if a % 2 == 0 {
            b
        } else {
            b.scale(Gi::I)
        }
    }

    /// The lattice vector with real coefficients `x`.
    pub fn combine(&self, x: &[i64]) -> CwVector {
        let mut v = [Gi::ZERO; RANK];
        for (j, b) in self.basis.iter().enumerate() {
            let c = Gi::new(x[2 * j], x[2 * j + 1]);
            if c.is_zero() {
                continue;
            }
            for (t, y) in v.iter_mut().zip(&b.coords) {
                *t += c * *y;
            }
        }
        CwVector { coords: v }
    }

    pub fn contains(&self, v: &CwVector) -> bool {
        let mut ech = GaussianEchelon::new();
        for b in &self.basis {
            ech.insert(b).expect("basis reinsertion");
        }
        ech.contains(v)
    }

    /// Dual basis vectors `sum_k (H^{-1})_{jk} b_k`, returned only if they are
    /// lattice vectors (self-duality).
    pub fn dual_basis_in_lattice(&self) -> bool {
        // Unimodular real Gram: the dual basis is G^{-1} times the basis, and
        // G^{-1} integral is equivalent to |det| = 1 for an integral G.
        let inv = match integer_inverse(&self.real_gram) {
            Some(m) => m,
            None => return false,
        };
        inv.iter().all(|row| {
            let v = self.combine(row);
            self.contains(&v)
        })
    }
}

/// Inverse of an integer matrix with determinant `±1`, by exact Gauss-Jordan
/// over the rationals.
pub fn integer_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..2 * n)
                .map(|j| {
                    let v = if j < n { m[i][j] } else { (j - n == i) as i64 };
                    BigRational::from_integer(v.into())
                })
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        let inv = a[c][c].recip();
        for x in a[c].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..2 * n {
                    let d = &f * &a[c][j];
                    a[i][j] -= d;
                }
            }
        }
    }
    a.iter()
        .map(|row| {
            row[n..]
                .iter()
                .map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None })
                .collect()
        })
        .collect()
}

/// A reduced real Gram matrix of the lattice with its transform.
pub struct ReducedLattice<'a> {
    pub lattice: &'a CwLattice,
    pub gram: Vec<Vec<i64>>,
    pub transform: Vec<Vec<i64>>,
}

impl<'a> ReducedLattice<'a> {
    pub fn new(lattice: &'a CwLattice) -> Self {
        let (gram, transform) = bkz_gram(&lattice.real_gram, BKZ_BLOCK, BKZ_TOURS);
        ReducedLattice { lattice, gram, transform }
    }

    /// All vectors of real norm exactly `norm` (both signs), sorted. The search
    /// tree is split into subtrees at `depth` and walked on the rayon pool.
    pub fn vectors_of_norm(&self, norm: i64, depth: usize) -> Vec<CwVector> {
        use rayon::prelude::*;
        let sv = ShortVectors::new(&self.gram);
        let tasks = sv.prefixes(norm as f64, depth.min(sv.dim()));
        let mut out: Vec<CwVector> = tasks
            .par_iter()
            .flat_map_iter(|pre| {
                let mut batch = Vec::new();
                sv.for_each_with_prefix(norm as f64, pre, |y, n| {
                    if n == norm {
                        let v = self.vector(y);
                        batch.push(v);
                        batch.push(v.scale(Gi::new(-1, 0)));
                    }
                });
                batch
            })
            .collect();
        out.sort();
        out
    }

    /// `sum q^{norm/2}` over vectors of norm at most `max_norm`, index `n` for `q^n`.
    pub fn theta_series(&self, max_norm: i64) -> Vec<u64> {
        let mut out = vec![0u64; (max_norm / 2 + 1) as usize];
        out[0] = 1;
        for v in self.short_vectors(max_norm) {
            let n = v.norm4() / 8;
            out[n as usize] += 1;
        }
        out
    }

    /// Lattice vector from coefficients in the reduced basis.
    pub fn vector(&self, y: &[i64]) -> CwVector {
        let n = y.len();
        let x: Vec<i64> = (0..n).map(|j| (0..n).map(|k| self.transform[j][k] * y[k]).sum()).collect();
        self.lattice.combine(&x)
    }

    /// All nonzero vectors of real norm at most `bound`, both signs, sorted.
    pub fn short_vectors(&self, bound: i64) -> Vec<CwVector> {
        let sv = ShortVectors::new(&self.gram);
        let mut out = Vec::new();
        let n = sv.dim();
        for pre in sv.prefixes(bound as f64, 1.min(n)) {
            sv.for_each_with_prefix(bound as f64, &pre, |y, norm| {
                if norm <= bound && norm > 0 {
                    let v = self.vector(y);
                    out.push(v);
                    out.push(v.scale(Gi::new(-1, 0)));
                }
            });
        }
        out.sort();
        out
    }

    /// Minimum real norm among nonzero vectors. The shortest reduced basis
    /// vector gives an upper bound `b`; only norms below `b` are enumerated.
    pub fn minimum(&self) -> i64 {
        let mut best = (0..self.gram.len()).map(|i| self.gram[i][i]).min().expect("nonempty basis");
        let sv = ShortVectors::new(&self.gram);
        let below = (best - 1) as f64;
        for pre in sv.prefixes(below, 1) {
            sv.for_each_with_prefix(below, &pre, |_, norm| {
                if norm > 0 && norm < best {
                    best = norm;
                }
            });
        }
        best
    }
}

/// Progress of a checkpointed enumeration.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Checkpoint {
    pub bound: i64,
    pub depth: usize,
    pub tasks: usize,
    pub completed: usize,
    pub found: u64,
}

/// Enumerates all vectors of real norm exactly `bound` (both signs), writing
/// JSON-lines of doubled coordinates `[[re, im], ..]` to `out_path` and
/// recording progress at `ckpt_path`. Subtrees run in parallel chunks of the
/// pool size and are written in task order, so the file does not depend on the
/// worker count. Resuming from an existing checkpoint skips completed tasks and
/// drops any output written after the last checkpoint. `stop_after` ends the
/// run once that many tasks are complete (the checkpoint stays resumable).
pub fn enumerate_to_file(
    red: &ReducedLattice,
    bound: i64,
    depth: usize,
    out_path: &Path,
    ckpt_path: &Path,
    stop_after: Option<usize>,
    mut progress: impl FnMut(&Checkpoint),
) -> Result<Checkpoint, LatticeError> {
    use rayon::prelude::*;
    let sv = ShortVectors::new(&red.gram);
    let tasks = sv.prefixes(bound as f64, depth.min(sv.dim()));
    let mut ck = if ckpt_path.exists() {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(ckpt_path)?)
            .map_err(|e| LatticeError::Checkpoint(e.to_string()))?;
        if ck.bound != bound || ck.depth != depth || ck.tasks != tasks.len() {
            return Err(LatticeError::Checkpoint("checkpoint does not match this run".into()));
        }
        ck
    } else {
        Checkpoint { bound, depth, tasks: tasks.len(), completed: 0, found: 0 }
    };
    // Drop lines written after the last completed task.
    let kept = if out_path.exists() && ck.completed > 0 {
        let f = BufReader::new(File::open(out_path)?);
        let lines: Vec<String> = f.lines().take(ck.found as usize).collect::<Result<_, _>>()?;
        if lines.len() as u64 != ck.found {
            return Err(LatticeError::Checkpoint("output shorter than checkpoint".into()));
        }
        lines
    } else {
        ck.completed = 0;
        ck.found = 0;
        Vec::new()
    };
    let mut out = File::create(out_path)?;
    for l in &kept {
        writeln!(out, "{l}")?;
    }
    let end = stop_after.map_or(tasks.len(), |s| s.max(ck.completed).min(tasks.len()));
    let chunk = rayon::current_num_threads().max(1);
    while ck.completed < end {
        let hi = (ck.completed + chunk).min(end);
        let batches: Vec<Vec<CwVector>> = tasks[ck.completed..hi]
            .par_iter()
            .map(|pre| {
                let mut batch = Vec::new();
                sv.for_each_with_prefix(bound as f64, pre, |y, norm| {
                    if norm == bound {
                        let v = red.vector(y);
                        batch.push(v);
                        batch.push(v.scale(Gi::new(-1, 0)));
                    }
                });
                batch
            })
            .collect();
        for v in batches.iter().flatten() {
            writeln!(out, "{}", vector_json(v))?;
        }
        out.flush()?;
        ck.completed = hi;
        ck.found += batches.iter().map(|b| b.len() as u64).sum::<u64>();
        let tmp = ckpt_path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(&ck).expect("checkpoint serializes"))?;
        std::fs::rename(&tmp, ckpt_path)?;
        progress(&ck);
    }
    if ck.completed == 0 {
        let tmp = ckpt_path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(&ck).expect("checkpoint serializes"))?;
        std::fs::rename(&tmp, ckpt_path)?;
    }
    Ok(ck)
}

pub fn vector_json(v: &CwVector) -> String {
    let parts: Vec<String> = v.coords.iter().map(|c| format!("[{},{}]", c.re, c.im)).collect();
    format!("[{}]", parts.join(","))
}

pub fn parse_vector_json(line: &str) -> Option<CwVector> {
    let pairs: Vec<[i64; 2]> = serde_json::from_str(line).ok()?;
    if pairs.len() != RANK {
        return None;
    }
    let mut v = CwVector::zero();
    for (c, p) in v.coords.iter_mut().zip(pairs) {
        *c = Gi::new(p[0], p[1]);
    }
    Some(v)
}

/// Reads a JSON-lines vector file into a sorted list.
pub fn read_vectors(path: &Path) -> Result<Vec<CwVector>, LatticeError> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        let v = parse_vector_json(&line)
            .ok_or_else(|| LatticeError::Checkpoint(format!("bad vector on line {}", n + 1)))?;
        out.push(v);
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_twenty_generators_of_norm_four() {
        let all = table_vectors().unwrap();
        assert_eq!(all.len(), 21);
        assert_eq!(all.iter().filter(|t| t.misprint).count(), 1);
        let gens = table_generators();
        assert_eq!(gens.len(), 20);
        for g in &gens {
            assert_eq!(g.norm4(), 16);
        }
        let mut first = CwVector::zero();
        first.coords[0] = Gi::new(4, 0);
        assert_eq!(gens[0], first);
    }

    #[test]
    fn sign_masks_form_group_of_order_eight() {
        let m = sign_masks();
        assert_eq!(m.len(), 8);
        assert!(m.iter().filter(|&&x| x != 0).all(|x| x.count_ones() == 4));
    }

    #[test]
    fn right_multiplication_by_j_permutes_within_block() {
        let g = MonomialElement { unit: 1, negate: false, sign_mask: 0, rotation: 0 };
        let mut v = CwVector::zero();
        v.coords[0] = Gi::new(4, 0);
        let w = g.apply(&v);
        // 4i * j has only a j-coefficient, 4i.
        assert_eq!(w.coords[1], Gi::new(0, 4));
        assert_eq!(w.norm4(), v.norm4());
        assert_eq!(w.coords.iter().filter(|c| !c.is_zero()).count(), 1);
    }

    #[test]
    fn quaternion_units_satisfy_relations() {
        // j*k = l, k*l = j, l*j = k, j^2 = -1.
        let e = |u: usize| {
            let mut q = [Gi::ZERO; 4];
            q[u] = Gi::ONE;
            q
        };
        assert_eq!(quat_right_mul(e(1), 2), e(3));
        assert_eq!(quat_right_mul(e(2), 3), e(1));
        assert_eq!(quat_right_mul(e(3), 1), e(2));
        assert_eq!(quat_right_mul(e(1), 1), e(0).map(|x| -x));
    }

    #[test]
    fn rotation_shifts_components() {
        let g = MonomialElement { unit: 0, negate: false, sign_mask: 0, rotation: 1 };
        let mut v = CwVector::zero();
        v.coords[4] = Gi::ONE; // first coordinate of q1
        assert_eq!(g.apply(&v).coords[0], Gi::ONE);
    }

    #[test]
    fn group_elements_are_distinct_isometries() {
        let group = monomial_group();
        assert_eq!(group.len(), 448);
        let gens = table_generators();
        let mut seen = HashSet::new();
        for g in &group {
            let images: Vec<CwVector> = gens.iter().map(|v| g.apply(v)).collect();
            for (a, b) in gens.iter().zip(&images) {
                assert_eq!(a.norm4(), b.norm4());
            }
            assert_eq!(images[1].herm4(&images[2]), gens[1].herm4(&gens[2]));
            seen.insert(g.monomial());
        }
        assert_eq!(seen.len(), 448);
    }

    #[test]
    fn misprinted_vector_pairs_non_integrally() {
        let all = table_vectors().unwrap();
        let bad = all.iter().find(|t| t.misprint).unwrap().vector;
        let h = bad.herm4(&all[5].vector);
        assert!(h.re % 4 != 0 || h.im % 4 != 0);
    }

    #[test]
    fn bareiss_small() {
        assert_eq!(bareiss_det(&[vec![2, 1], vec![1, 1]]), BigInt::from(1));
        assert_eq!(bareiss_det(&[vec![0, 1], vec![1, 0]]), BigInt::from(-1));
    }

    #[test]
    fn lattice_is_even_unimodular_rootless() {
        let lat = CwLattice::build().unwrap();
        assert_eq!(lat.rank(), RANK);
        assert!(lat.is_even());
        assert!(lat.real_det().is_one());
        let red = ReducedLattice::new(&lat);
        assert_eq!(red.minimum(), 4);
        assert_eq!(red.theta_series(2), vec![1, 0]);
    }

    #[test]
    fn lattice_is_self_dual_and_holds_generators() {
        let lat = CwLattice::build().unwrap();
        assert!(lat.dual_basis_in_lattice());
        for g in table_generators() {
            assert!(lat.contains(&g));
        }
        let bad = table_vectors().unwrap().into_iter().find(|t| t.misprint).unwrap().vector;
        assert!(!lat.contains(&bad));
    }

    #[test]
    fn reduced_basis_spans_the_lattice() {
        let lat = CwLattice::build().unwrap();
        let red = ReducedLattice::new(&lat);
        for k in 0..REAL_RANK {
            let mut y = vec![0i64; REAL_RANK];
            y[k] = 1;
            let v = red.vector(&y);
            assert!(lat.contains(&v));
            assert_eq!(v.norm4(), 4 * red.gram[k][k]);
        }
        assert!(bareiss_det(&red.gram).is_one());
    }

    #[test]
    fn delta_over_a_closed_orbit_is_invariant() {
        let orbit = generator_orbit();
        let d = QuarticInvariant::from_vectors(&orbit);
        for g in monomial_group() {
            assert_eq!(d.transform(&g), d);
        }
        // Dropping one vector breaks the symmetry.
        let partial = QuarticInvariant::from_vectors(&orbit[1..]);
        assert!(monomial_group().iter().any(|g| partial.transform(g) != partial));
    }
}
