//! Weingarten calculus for the unitary group: Gram and Weingarten matrices in
//! exact rational arithmetic, twirl evaluation, and the permutation-basis
//! projection check.
//!
//! Both matrices are functions of the conjugacy class of a product, so they are
//! stored as class functions `F(x) = d^{#cycles(x)}` and `G` with
//! `Q_{pi,sigma} = F(pi sigma)` and `C_{pi,sigma} = G(pi sigma)`. `G` is found by
//! solving `F * G = delta_e` in the class algebra. When `d < t` the Gram matrix
//! is singular and `G` is the group inverse of `F`, which yields the
//! Moore-Penrose pseudo-inverse of `Q`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::permgroup::{Group, Permutation};

/// Gram and Weingarten data for `(t, d)`.
#[derive(Clone, Debug)]
pub struct WeingartenTable {
    t: usize,
    d: usize,
    group: &'static Group,
    gram_class: Vec<BigRational>,
    wg_class: Vec<BigRational>,
    wg_class_f64: Vec<f64>,
    pseudo: bool,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn rat_pow(d: usize, k: usize) -> BigRational {
    BigRational::from_integer(num_traits::pow(BigInt::from(d), k))
}

/// Nearest `f64` of an exact rational.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        // fall back to scaled division for very large operands
        let shift = r.denom().bits().max(r.numer().bits()) as i64 - 900;
        let sh = shift.max(0) as usize;
        let n2 = (r.numer() >> sh).to_f64().unwrap();
        let d2 = (r.denom() >> sh).to_f64().unwrap();
        n2 / d2
    }
}

type RatMatrix = Vec<Vec<BigRational>>;

fn mat_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![BigRational::zero(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[l][j].is_zero() {
                    out[i][j] += &a[i][l] * &b[l][j];
                }
            }
        }
    }
    out
}

/// Reduced row echelon form; returns pivot columns.
fn rref(mut a: RatMatrix) -> (RatMatrix, Vec<usize>) {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for j in 0..cols {
            a[r][j] = &a[r][j] * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let sub = &f * &a[r][j];
                    a[i][j] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

fn invert(a: &RatMatrix) -> Result<RatMatrix> {
    let n = a.len();
    let aug: RatMatrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            r
        })
        .collect();
    let (red, piv) = rref(aug);
    if piv.len() < n || piv[n - 1] >= n {
        return Err(Error::Singular("rational matrix not invertible".into()));
    }
    Ok(red.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn transpose(a: &RatMatrix) -> RatMatrix {
    let n = a.len();
    let m = a[0].len();
    (0..m)
        .map(|j| (0..n).map(|i| a[i][j].clone()).collect())
        .collect()
}

/// A {1}-inverse `X` with `B X B = B`, from a maximal invertible minor.
fn one_inverse(b: &RatMatrix) -> Result<RatMatrix> {
    let n = b.len();
    let (_, cols) = rref(b.clone());
    let (_, rows) = rref(transpose(b));
    let minor: RatMatrix = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| b[i][j].clone()).collect())
        .collect();
    let mut x = vec![vec![BigRational::zero(); n]; n];
    if minor.is_empty() {
        return Ok(x);
    }
    let inv = invert(&minor)?;
    for (a, &j) in cols.iter().enumerate() {
        for (c, &i) in rows.iter().enumerate() {
            x[j][i] = inv[a][c].clone();
        }
    }
    Ok(x)
}

impl WeingartenTable {
    /// Builds the exact table. `d < t` yields the pseudo-inverse and sets [`Self::is_pseudo`].
    pub fn build(t: usize, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParameter(format!(
                "dimension d={d} must be >= 1"
            )));
        }
        let group = Group::cached(t)?;
        let k = group.classes().len();
        let gram_class: Vec<BigRational> =
            (0..k).map(|c| rat_pow(d, group.class_cycles(c))).collect();
        let sc = group.structure_constants();
        // (F * G)(z_g) = sum_{a,b} F_a G_b c[a][b][g]
        let m: RatMatrix = (0..k)
            .map(|g| {
                (0..k)
                    .map(|b| {
                        let mut s = BigRational::zero();
                        for (a, fa) in gram_class.iter().enumerate() {
                            let c = sc[a][b][g];
                            if c != 0 {
                                s += fa * rat(c as i64);
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let e: Vec<BigRational> = (0..k)
            .map(|g| {
                if g == group.identity_class() {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        let (minv, pseudo) = match invert(&m) {
            Ok(inv) => (inv, false),
            Err(_) => {
                let m3 = mat_mul(&mat_mul(&m, &m), &m);
                let x = one_inverse(&m3)?;
                (mat_mul(&mat_mul(&m, &x), &m), true)
            }
        };
        let wg_class: Vec<BigRational> = minv
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&e)
                    .fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect();
        let wg_class_f64 = wg_class.iter().map(rat_to_f64).collect();
        Ok(Self {
            t,
            d,
            group,
            gram_class,
            wg_class,
            wg_class_f64,
            pseudo,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn group(&self) -> &'static Group {
        self.group
    }

    /// True when `d < t` and the pseudo-inverse was used.
    pub fn is_pseudo(&self) -> bool {
        self.pseudo
    }

    /// `Q_{pi,sigma}` by group index.
    pub fn gram(&self, i: usize, j: usize) -> &BigRational {
        &self.gram_class[self.group.product_class(i, j)]
    }

    /// `C_{pi,sigma}` by group index.
    pub fn wg(&self, i: usize, j: usize) -> &BigRational {
        &self.wg_class[self.group.product_class(i, j)]
    }

    #[inline]
    pub fn wg_f64(&self, i: usize, j: usize) -> f64 {
        self.wg_class_f64[self.group.product_class(i, j)]
    }

    /// Weingarten function `Wg(alpha, d) = C_{e, alpha}` per class.
    pub fn wg_class(&self) -> &[BigRational] {
        &self.wg_class
    }

    pub fn wg_class_f64(&self) -> &[f64] {
        &self.wg_class_f64
    }

    pub fn gram_class(&self) -> &[BigRational] {
        &self.gram_class
    }

    /// Exact value of `Wg(alpha, d)`.
    pub fn wg_of(&self, alpha: &Permutation) -> &BigRational {
        let c = self.group.class_of(self.group.index_of(alpha));
        &self.wg_class[c]
    }

    /// `sum_sigma C_{pi,sigma}`, identical for every row.
    pub fn row_sum(&self) -> BigRational {
        self.wg_class
            .iter()
            .zip(self.group.class_sizes())
            .fold(BigRational::zero(), |acc, (g, &n)| acc + g * rat(n as i64))
    }

    /// `(d-1)!/(d+t-1)!`.
    pub fn expected_row_sum(&self) -> BigRational {
        let mut den = BigInt::one();
        for k in 0..self.t {
            den *= BigInt::from(self.d + k);
        }
        BigRational::new(BigInt::one(), den)
    }

    /// Full Gram matrix (t! x t!), exact.
    pub fn gram_matrix(&self) -> RatMatrix {
        let n = self.group.order();
        (0..n)
            .map(|i| (0..n).map(|j| self.gram(i, j).clone()).collect())
            .collect()
    }

    /// Full Weingarten matrix (t! x t!), exact.
    pub fn wg_matrix(&self) -> RatMatrix {
        let n = self.group.order();
        (0..n)
            .map(|i| (0..n).map(|j| self.wg(i, j).clone()).collect())
            .collect()
    }

    /// Twirl coefficients `c_sigma = sum_pi C_{sigma,pi} b_pi` from inner products `b_pi = Tr(W_pi X)`.
    pub fn coefficients(&self, b: &[f64]) -> Vec<f64> {
        let n = self.group.order();
        assert_eq!(b.len(), n);
        (0..n)
            .map(|s| {
                self.group
                    .product_class_row(s)
                    .iter()
                    .zip(b)
                    .map(|(&c, bp)| self.wg_class_f64[c as usize] * bp)
                    .sum()
            })
            .collect()
    }

    /// Bilocal twirl coefficients from the joint inner products `b[(pi, pi')]`
    /// using this table for A and `other` for B.
    pub fn coefficients_bilocal(&self, other: &WeingartenTable, b: &[f64]) -> Vec<f64> {
        let n = self.group.order();
        assert_eq!(other.t, self.t);
        assert_eq!(b.len(), n * n);
        // contract B index first, then A index
        let mut half = vec![0.0; n * n];
        for p in 0..n {
            for s2 in 0..n {
                let row = other.group.product_class_row(s2);
                let mut acc = 0.0;
                for p2 in 0..n {
                    acc += other.wg_class_f64[row[p2] as usize] * b[p * n + p2];
                }
                half[p * n + s2] = acc;
            }
        }
        let mut out = vec![0.0; n * n];
        for s in 0..n {
            let row = self.group.product_class_row(s);
            for p in 0..n {
                let w = self.wg_class_f64[row[p] as usize];
                if w == 0.0 {
                    continue;
                }
                for s2 in 0..n {
                    out[s * n + s2] += w * half[p * n + s2];
                }
            }
        }
        out
    }

    /// Twirl of a class-function inner-product vector (`b` indexed by class):
    /// returns the coefficient per class of sigma.
    pub fn coefficients_by_class(&self, b_class: &[f64]) -> Vec<f64> {
        let g = self.group;
        let k = g.classes().len();
        let mut out = vec![0.0; k];
        for (c, lam) in g.classes().iter().enumerate() {
            let s = g.index_of(&lam.representative());
            let row = g.product_class_row(s);
            let mut acc = 0.0;
            for p in 0..g.order() {
                acc += self.wg_class_f64[row[p] as usize] * b_class[g.class_of(p)];
            }
            out[c] = acc;
        }
        out
    }

    /// Exact twirl `sum C_{pi,sigma} Tr(W_pi X) W_sigma` of a dense operator on `(C^d)^{(x)t}`.
    pub fn twirl_dense(&self, x: &CMatrix, cap: usize) -> Result<CMatrix> {
        let dim = self.d.pow(self.t as u32);
        if dim > cap {
            return Err(Error::CapExceeded { dim, cap });
        }
        if x.nrows() != dim || x.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, expected {dim}x{dim}",
                x.nrows(),
                x.ncols()
            )));
        }
        let n = self.group.order();
        let perms: Vec<Vec<usize>> = self
            .group
            .elements()
            .iter()
            .map(|p| permutation_index_map(p, self.d))
            .collect();
        let b_re: Vec<Complex64> = perms
            .iter()
            .map(|map| (0..dim).map(|r| x[(map[r], r)]).sum())
            .collect();
        let mut coeff = vec![Complex64::new(0.0, 0.0); n];
        for (s, c) in coeff.iter_mut().enumerate() {
            for (p, bp) in b_re.iter().enumerate() {
                *c += bp * self.wg_f64(s, p);
            }
        }
        let mut out = CMatrix::zeros(dim, dim);
        for (s, c) in coeff.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            for (r, &col) in perms[s].iter().enumerate() {
                // W_sigma |r'> = |r' o sigma>; column col maps to row r
                out[(r, col)] += c;
            }
        }
        Ok(out)
    }

    /// JSON dump with exact rationals as `"num/den"` strings; full matrices for t <= 3.
    pub fn to_json(&self) -> Value {
        let classes: Vec<Value> = self
            .group
            .classes()
            .iter()
            .enumerate()
            .map(|(c, lam)| {
                json!({
                    "class": lam.label(),
                    "size": self.group.class_sizes()[c],
                    "gram": rat_string(&self.gram_class[c]),
                    "wg": rat_string(&self.wg_class[c]),
                })
            })
            .collect();
        let mut v = json!({
            "t": self.t,
            "d": self.d,
            "pseudo": self.pseudo,
            "row_sum": rat_string(&self.row_sum()),
            "classes": classes,
        });
        if self.t <= 3 {
            let enc = |m: RatMatrix| -> Value {
                Value::Array(
                    m.iter()
                        .map(|r| {
                            Value::Array(r.iter().map(|x| Value::String(rat_string(x))).collect())
                        })
                        .collect(),
                )
            };
            let order: Vec<String> = self
                .group
                .elements()
                .iter()
                .map(|p| p.to_string())
                .collect();
            v["order"] = json!(order);
            v["gram_matrix"] = enc(self.gram_matrix());
            v["wg_matrix"] = enc(self.wg_matrix());
        }
        v
    }
}

/// Encodes a rational as `"num/den"`.
pub fn rat_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// For basis index `r` of `(C^d)^{(x)t}` (copy 0 most significant), the column
/// `c` such that `<r| W_pi |c> = 1`, i.e. `r = c o pi`.
pub fn permutation_index_map(p: &Permutation, d: usize) -> Vec<usize> {
    let t = p.size();
    let dim = d.pow(t as u32);
    let mut out = vec![0; dim];
    let mut digits = vec![0usize; t];
    for c in 0..dim {
        let mut rem = c;
        for k in (0..t).rev() {
            digits[k] = rem % d;
            rem /= d;
        }
        // row string r_i = c_{pi(i)}
        let mut r = 0;
        for i in 0..t {
            r = r * d + digits[p.apply(i)];
        }
        out[r] = c;
    }
    out
}

/// Dense permutation operator `W_pi` on `(C^d)^{(x)t}`.
pub fn permutation_matrix(p: &Permutation, d: usize) -> CMatrix {
    let map = permutation_index_map(p, d);
    let dim = map.len();
    let mut m = CMatrix::zeros(dim, dim);
    for (r, &c) in map.iter().enumerate() {
        m[(r, c)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// A linear combination of permutation operators (single or bipartite).
#[derive(Clone, Debug, PartialEq)]
pub struct PermutationCombination {
    t: usize,
    parties: usize,
    coeffs: Vec<f64>,
}

impl PermutationCombination {
    pub fn zero(t: usize, parties: usize) -> Result<Self> {
        let n = Group::cached(t)?.order();
        Ok(Self {
            t,
            parties,
            coeffs: vec![0.0; n.pow(parties as u32)],
        })
    }

    pub fn from_coeffs(t: usize, parties: usize, coeffs: Vec<f64>) -> Result<Self> {
        let n = Group::cached(t)?.order();
        if coeffs.len() != n.pow(parties as u32) {
            return Err(Error::SizeMismatch {
                expected: n.pow(parties as u32),
                got: coeffs.len(),
            });
        }
        Ok(Self { t, parties, coeffs })
    }

    /// Single-system term `c W_pi` added in place.
    pub fn add(&mut self, p: &Permutation, c: f64) {
        assert_eq!(self.parties, 1);
        let g = Group::cached(self.t).unwrap();
        self.coeffs[g.index_of(p)] += c;
    }

    /// Bipartite term `c W_pi^A (x) W_sigma^B` added in place.
    pub fn add_pair(&mut self, pa: &Permutation, pb: &Permutation, c: f64) {
        assert_eq!(self.parties, 2);
        let g = Group::cached(self.t).unwrap();
        let n = g.order();
        self.coeffs[g.index_of(pa) * n + g.index_of(pb)] += c;
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, p: &Permutation) -> f64 {
        let g = Group::cached(self.t).unwrap();
        self.coeffs[g.index_of(p)]
    }

    pub fn get_pair(&self, pa: &Permutation, pb: &Permutation) -> f64 {
        let g = Group::cached(self.t).unwrap();
        self.coeffs[g.index_of(pa) * g.order() + g.index_of(pb)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            t: self.t,
            parties: self.parties,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!((self.t, self.parties), (other.t, other.parties));
        Self {
            t: self.t,
            parties: self.parties,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Tensor product of two single-system combinations.
    pub fn tensor(a: &Self, b: &Self) -> Self {
        assert!(a.parties == 1 && b.parties == 1 && a.t == b.t);
        let mut coeffs = Vec::with_capacity(a.coeffs.len() * b.coeffs.len());
        for x in &a.coeffs {
            for y in &b.coeffs {
                coeffs.push(x * y);
            }
        }
        Self {
            t: a.t,
            parties: 2,
            coeffs,
        }
    }

    /// `Tr[self . W_pi]` (or `Tr[self . (W_pi^A (x) W_sigma^B)]`) for every index,
    /// with local dimensions `dims`.
    pub fn inner_products(&self, dims: &[usize]) -> Vec<f64> {
        assert_eq!(dims.len(), self.parties);
        let g = Group::cached(self.t).unwrap();
        let n = g.order();
        let pow = |d: usize| -> Vec<f64> {
            (0..g.classes().len())
                .map(|c| (d as f64).powi(g.class_cycles(c) as i32))
                .collect()
        };
        if self.parties == 1 {
            let fa = pow(dims[0]);
            (0..n)
                .map(|p| {
                    let row = g.product_class_row(p);
                    (0..n).map(|s| self.coeffs[s] * fa[row[s] as usize]).sum()
                })
                .collect()
        } else {
            let fa = pow(dims[0]);
            let fb = pow(dims[1]);
            let mut out = vec![0.0; n * n];
            for p in 0..n {
                for p2 in 0..n {
                    let ra = g.product_class_row(p);
                    let rb = g.product_class_row(p2);
                    let mut acc = 0.0;
                    for s in 0..n {
                        let wa = fa[ra[s] as usize];
                        for s2 in 0..n {
                            let c = self.coeffs[s * n + s2];
                            if c != 0.0 {
                                acc += c * wa * fb[rb[s2] as usize];
                            }
                        }
                    }
                    out[p * n + p2] = acc;
                }
            }
            out
        }
    }

    /// Dense operator for a single system of dimension `d`.
    pub fn to_dense(&self, d: usize) -> CMatrix {
        assert_eq!(self.parties, 1);
        let g = Group::cached(self.t).unwrap();
        let dim = d.pow(self.t as u32);
        let mut m = CMatrix::zeros(dim, dim);
        for (i, p) in g.elements().iter().enumerate() {
            let c = self.coeffs[i];
            if c != 0.0 {
                for (r, col) in permutation_index_map(p, d).into_iter().enumerate() {
                    m[(r, col)] += Complex64::new(c, 0.0);
                }
            }
        }
        m
    }
}

/// Outcome of comparing an observable's permutation-basis inner products with a target.
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    pub pass: bool,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub scale: f64,
}

/// Checks `Tr[O W_pi] = Tr[P W_pi]` for every permutation (or pair), where
/// `o_inner` holds the observable side. Tolerance is `tol` times the largest
/// absolute inner product involved (at least 1).
pub fn projection_criterion(
    o_inner: &[f64],
    target: &PermutationCombination,
    dims: &[usize],
    tol: f64,
) -> ProjectionReport {
    let t_inner = target.inner_products(dims);
    assert_eq!(o_inner.len(), t_inner.len());
    let residuals: Vec<f64> = o_inner
        .iter()
        .zip(&t_inner)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let scale = o_inner
        .iter()
        .chain(&t_inner)
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    ProjectionReport {
        pass: max_residual <= tol * scale,
        residuals,
        max_residual,
        scale,
    }
}

/// Catalan number `(2q)!/(q!(q+1)!)`.
pub fn catalan(q: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..q {
        c = c * 2.0 * (2 * k + 1) as f64 / (k + 2) as f64;
    }
    c
}

/// Leading large-d term `d^{#cycles - 2t} prod (-1)^{xi_i - 1} Ca_{xi_i - 1}`.
pub fn wg_asymptotic(alpha: &Permutation, d: usize) -> f64 {
    let t = alpha.size() as i32;
    let cycles = alpha.cycles();
    let mut v = (d as f64).powi(cycles.len() as i32 - 2 * t);
    for c in cycles {
        let l = c.len();
        let sign = if (l - 1) % 2 == 0 { 1.0 } else { -1.0 };
        v *= sign * catalan(l - 1);
    }
    v
}

/// Checks `Q C Q = Q` exactly for a table (pseudo-inverse property).
pub fn check_pseudo_inverse(tab: &WeingartenTable) -> bool {
    let q = tab.gram_matrix();
    let c = tab.wg_matrix();
    let qcq = mat_mul(&mat_mul(&q, &c), &q);
    qcq == q && mat_mul(&mat_mul(&c, &q), &c) == c
}

/// Checks `Q C = I` exactly.
pub fn check_inverse(tab: &WeingartenTable) -> bool {
    let qc = mat_mul(&tab.gram_matrix(), &tab.wg_matrix());
    qc.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, x)| if i == j { x.is_one() } else { x.is_zero() })
    })
}

/// Absolute value helper used by reports.
pub fn rat_abs(r: &BigRational) -> BigRational {
    r.abs()
}
