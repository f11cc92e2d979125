//! Lattice reduction and short-vector enumeration on integer Gram matrices.

/// LLL reduction of a positive definite integer Gram matrix. Returns the
/// reduced Gram matrix and the unimodular transform `u` with reduced basis
/// vector `k` equal to `sum_j u[j][k] * (old basis vector j)`.
pub fn lll_gram(gram: &[Vec<i64>], delta: f64) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let n = gram.len();
    let mut g: Vec<Vec<i64>> = gram.to_vec();
    let mut u: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect();
    let mut mu = vec![vec![0f64; n]; n];
    let mut r = vec![vec![0f64; n]; n];
    let gso_row = |g: &Vec<Vec<i64>>, mu: &mut Vec<Vec<f64>>, r: &mut Vec<Vec<f64>>, k: usize| {
        for j in 0..=k {
            let mut s = g[k][j] as f64;
            for i in 0..j {
                s -= mu[j][i] * r[k][i];
            }
            r[k][j] = s;
            if j < k {
                mu[k][j] = s / r[j][j];
            }
        }
    };
    let sub = |g: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, k: usize, j: usize, q: i64| {
        for i in 0..n {
            g[k][i] -= q * g[j][i];
        }
        for i in 0..n {
            g[i][k] -= q * g[i][j];
        }
        for row in u.iter_mut() {
            row[k] -= q * row[j];
        }
    };
    let swap = |g: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, k: usize| {
        g.swap(k, k - 1);
        for row in g.iter_mut() {
            row.swap(k, k - 1);
        }
        for row in u.iter_mut() {
            row.swap(k, k - 1);
        }
    };
    gso_row(&g, &mut mu, &mut r, 0);
    let mut k = 1;
    while k < n {
        loop {
            gso_row(&g, &mut mu, &mut r, k);
            if (0..k).all(|j| mu[k][j].abs() <= 0.501) {
                break;
            }
            for j in (0..k).rev() {
                let q = mu[k][j].round();
                if q != 0.0 {
                    sub(&mut g, &mut u, k, j, q as i64);
                    for i in 0..j {
                        mu[k][i] -= q * mu[j][i];
                    }
                    mu[k][j] -= q;
                }
            }
        }
        let lhs = delta * r[k - 1][k - 1];
        let rhs = r[k][k] + mu[k][k - 1] * mu[k][k - 1] * r[k - 1][k - 1];
        if lhs > rhs {
            swap(&mut g, &mut u, k);
            k = (k - 1).max(1);
            if k == 1 {
                gso_row(&g, &mut mu, &mut r, 0);
            }
        } else {
            k += 1;
        }
    }
    (g, u)
}

/// Fincke-Pohst enumeration of `{x : x^T G x <= bound}` for a positive
/// definite integer Gram matrix. One of each pair `x, -x` is visited (the one
/// whose highest nonzero coordinate is positive); the zero vector is skipped.
pub struct ShortVectors {
    n: usize,
    /// Cholesky data: `Q(x) = sum_i qd[i] (x_i + sum_{j>i} qm[i][j] x_j)^2`.
    qd: Vec<f64>,
    qm: Vec<Vec<f64>>,
    gram: Vec<Vec<i64>>,
}

impl ShortVectors {
    pub fn new(gram: &[Vec<i64>]) -> Self {
        let n = gram.len();
        let mut a: Vec<Vec<f64>> = gram.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
        // Fincke-Pohst quadratic completion in place.
        for i in 0..n {
            for j in i + 1..n {
                a[j][i] = a[i][j];
                a[i][j] /= a[i][i];
            }
            for k in i + 1..n {
                for l in k..n {
                    a[k][l] -= a[k][i] * a[i][l];
                }
            }
        }
        let qd = (0..n).map(|i| a[i][i]).collect();
        let qm = (0..n).map(|i| (0..n).map(|j| if j > i { a[i][j] } else { 0.0 }).collect()).collect();
        ShortVectors { n, qd, qm, gram: gram.to_vec() }
    }

    /// Builds the enumerator from Cholesky data alone; exact norms are then
    /// unavailable.
    pub fn from_cholesky(qd: Vec<f64>, qm: Vec<Vec<f64>>) -> Self {
        let n = qd.len();
        ShortVectors { n, qd, qm, gram: Vec::new() }
    }

    /// Visits every nonzero `x` (one of each `±x`) with `Q(x) <= bound`,
    /// passing the floating-point norm.
    pub fn walk_all<F: FnMut(&[i64], f64)>(&self, bound: f64, f: &mut F) {
        let mut x = vec![0i64; self.n];
        self.walk(bound, self.n, 0, &mut x, 0.0, f);
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn exact_norm(&self, x: &[i64]) -> i64 {
        let mut s = 0;
        for i in 0..self.n {
            if x[i] == 0 {
                continue;
            }
            let mut t = 0;
            for j in 0..self.n {
                t += self.gram[i][j] * x[j];
            }
            s += x[i] * t;
        }
        s
    }

    /// Enumerates the partial assignments of the top `depth` coordinates
    /// (indices `n-1` down to `n-depth`) that can extend to a vector of norm
    /// at most `bound`, in deterministic order.
    pub fn prefixes(&self, bound: f64, depth: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut x = vec![0i64; self.n];
        self.walk(bound, self.n, self.n - depth, &mut x, 0.0, &mut |x: &[i64], _| {
            out.push(x[self.n - depth..].to_vec());
        });
        out
    }

    /// Visits every short vector whose top coordinates equal `prefix`.
    pub fn for_each_with_prefix<F: FnMut(&[i64], i64)>(&self, bound: f64, prefix: &[i64], mut f: F) {
        let n = self.n;
        let d = prefix.len();
        let mut x = vec![0i64; n];
        x[n - d..].copy_from_slice(prefix);
        let mut used = 0.0;
        for i in (n - d..n).rev() {
            let c: f64 = (i + 1..n).map(|j| self.qm[i][j] * x[j] as f64).sum();
            let t = x[i] as f64 + c;
            used += self.qd[i] * t * t;
        }
        if used > bound + 1e-6 {
            return;
        }
        let gram = &self.gram;
        let mut check = |x: &[i64]| {
            let mut s = 0i64;
            for i in 0..n {
                if x[i] != 0 {
                    let mut t = 0i64;
                    for j in 0..n {
                        t += gram[i][j] * x[j];
                    }
                    s += x[i] * t;
                }
            }
            f(x, s);
        };
        self.walk(bound, n - d, 0, &mut x, used, &mut |x: &[i64], _| check(x));
    }

    /// Depth-first enumeration of levels `top-1 .. stop` given fixed higher
    /// coordinates and their partial norm `used`; calls `f` at level `stop`.
    fn walk<F: FnMut(&[i64], f64)>(&self, bound: f64, top: usize, stop: usize, x: &mut [i64], used: f64, f: &mut F) {
        let n = self.n;
        let eps = 1e-6;
        if top == stop {
            if x.iter().any(|&v| v != 0) || stop > 0 {
                f(x, used);
            }
            return;
        }
        let nz_above = x[top..].iter().any(|&v| v != 0);
        let mut i = top - 1;
        let mut rem = vec![0f64; n + 1];
        let mut center = vec![0f64; n];
        let mut hi = vec![0i64; n];
        let mut partial = vec![0f64; n + 1];
        partial[top] = used;
        let mut positive_only = vec![false; n + 1];
        positive_only[top] = !nz_above;
        let set_level = |i: usize,
                             x: &mut [i64],
                             partial: &Vec<f64>,
                             center: &mut Vec<f64>,
                             hi: &mut Vec<i64>,
                             rem: &mut Vec<f64>,
                             positive_only: &Vec<bool>| {
            let c: f64 = (i + 1..n).map(|j| self.qm[i][j] * x[j] as f64).sum();
            center[i] = -c;
            rem[i] = bound + eps - partial[i + 1];
            let w = (rem[i].max(0.0) / self.qd[i]).sqrt();
            let lo = (center[i] - w).ceil() as i64;
            hi[i] = (center[i] + w).floor() as i64;
            x[i] = if positive_only[i + 1] { lo.max(0) } else { lo };
        };
        set_level(i, x, &partial, &mut center, &mut hi, &mut rem, &positive_only);
        loop {
            if x[i] > hi[i] {
                x[i] = 0;
                i += 1;
                if i >= top {
                    return;
                }
                x[i] += 1;
                continue;
            }
            let t = x[i] as f64 - center[i];
            let p = partial[i + 1] + self.qd[i] * t * t;
            if p > bound + eps {
                x[i] += 1;
                continue;
            }
            if i == stop {
                if stop > 0 || !(positive_only[i + 1] && x[i] == 0) {
                    f(x, p);
                }
                x[i] += 1;
                continue;
            }
            partial[i] = p;
            positive_only[i] = positive_only[i + 1] && x[i] == 0;
            i -= 1;
            set_level(i, x, &partial, &mut center, &mut hi, &mut rem, &positive_only);
        }
    }
}

/// Gram-Schmidt data of a Gram matrix: `r[i]` are the squared lengths and
/// `mu[i][j]` (`j < i`) the projection coefficients.
pub fn gso(g: &[Vec<i64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = g.len();
    let mut mu = vec![vec![0f64; n]; n];
    let mut rr = vec![vec![0f64; n]; n];
    let mut r = vec![0f64; n];
    for k in 0..n {
        for j in 0..=k {
            let mut s = g[k][j] as f64;
            for i in 0..j {
                s -= mu[j][i] * rr[k][i];
            }
            rr[k][j] = s;
            if j < k {
                mu[k][j] = s / rr[j][j];
            }
        }
        r[k] = rr[k][k];
    }
    (r, mu)
}

fn col_op(g: &mut [Vec<i64>], u: &mut [Vec<i64>], i: usize, j: usize, m: [[i64; 2]; 2]) {
    // new b_i = m00 b_i + m10 b_j, new b_j = m01 b_i + m11 b_j
    let n = g.len();
    let [[a, b], [c, d]] = m;
    for row in u.iter_mut() {
        let (x, y) = (row[i], row[j]);
        row[i] = a * x + c * y;
        row[j] = b * x + d * y;
    }
    for row in g.iter_mut() {
        let (x, y) = (row[i], row[j]);
        row[i] = a * x + c * y;
        row[j] = b * x + d * y;
    }
    for t in 0..n {
        let (x, y) = (g[i][t], g[j][t]);
        g[i][t] = a * x + c * y;
        g[j][t] = b * x + d * y;
    }
}

fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.abs(), a.signum(), 0)
    } else {
        let (g, s, t) = egcd(b, a.rem_euclid(b));
        (g, t, s - a.div_euclid(b) * t)
    }
}

fn compose(u: &[Vec<i64>], v: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = u.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| u[i][k] * v[k][j]).sum()).collect())
        .collect()
}

/// BKZ reduction with block size `beta` on top of LLL. Same conventions as
/// [`lll_gram`].
pub fn bkz_gram(gram: &[Vec<i64>], beta: usize, max_tours: usize) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let n = gram.len();
    let (mut g, mut u) = lll_gram(gram, 0.99);
    for _ in 0..max_tours {
        let mut changed = false;
        for k in 0..n.saturating_sub(1) {
            let h = (k + beta).min(n);
            let (r, mu) = gso(&g);
            let m = h - k;
            let qd: Vec<f64> = (0..m).map(|i| r[k + i]).collect();
            let qm: Vec<Vec<f64>> =
                (0..m).map(|i| (0..m).map(|j| if j > i { mu[k + j][k + i] } else { 0.0 }).collect()).collect();
            let sv = ShortVectors::from_cholesky(qd, qm);
            let target = 0.99 * r[k];
            let mut best: Option<(f64, Vec<i64>)> = None;
            sv.walk_all(target, &mut |y: &[i64], norm: f64| {
                if best.as_ref().map_or(true, |(b, _)| norm < *b) {
                    best = Some((norm, y.to_vec()));
                }
            });
            let Some((_, mut y)) = best else { continue };
            // Make b_k equal to sum y_i b_{k+i} with a unimodular block transform.
            for j in (1..m).rev() {
                if y[j] == 0 {
                    continue;
                }
                let (gg, s, t) = egcd(y[j - 1], y[j]);
                let (p, q) = (y[j - 1] / gg, y[j] / gg);
                col_op(&mut g, &mut u, k + j - 1, k + j, [[p, -t], [q, s]]);
                y[j - 1] = gg;
                y[j] = 0;
            }
            let (g2, u2) = lll_gram(&g, 0.99);
            u = compose(&u, &u2);
            g = g2;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    (g, u)
}
