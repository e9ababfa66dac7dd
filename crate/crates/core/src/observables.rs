//! Post-processing observables: `O_+`, its bilocal and global variants, the
//! total-correlation pair `(O_A, O_B)`, the Bell-basis `O_--`, the
//! Heisenberg-Weyl machinery and the no-go witness.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::permgroup::{num_blocks, pattern_of, set_partitions, Group, Permutation};
use crate::qstate::{permutation_expectation, DensityMatrix};
use crate::weingarten::{projection_criterion, PermutationCombination, ProjectionReport};

/// Number of copies handled by the observables.
pub const T: usize = 3;

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension {d} must be at least 2"
        )));
    }
    Ok(())
}

/// Falling factorial `d (d-1) ... (d-k+1)`.
pub fn falling(d: usize, k: usize) -> f64 {
    (0..k).map(|i| d as f64 - i as f64).product()
}

/// Coefficient rule of a diagonal observable.
#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    /// `O(wt)` indexed by the multiplicity of the most repeated symbol (1..=3).
    Weight([f64; 3]),
    /// `alpha * delta(s_i, s_j) + beta`.
    PairDelta {
        i: usize,
        j: usize,
        alpha: f64,
        beta: f64,
    },
}

/// Diagonal observable `sum_s O(s) |s><s|` on three copies of an alphabet of size `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalObservable {
    name: &'static str,
    d: usize,
    local_dims: Option<(usize, usize)>,
    rule: Rule,
}

/// Multiplicity of the most repeated symbol.
pub fn weight(symbols: &[usize]) -> usize {
    weight_of_pattern(&pattern_of(symbols))
}

fn weight_of_pattern(p: &[u8]) -> usize {
    let mut counts = [0usize; 8];
    for &b in p {
        counts[b as usize] += 1;
    }
    counts.into_iter().max().unwrap_or(0)
}

impl DiagonalObservable {
    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Alphabet size (the joint dimension for the global observable).
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn local_dims(&self) -> Option<(usize, usize)> {
        self.local_dims
    }

    /// Coefficient for an equality pattern of the three symbols.
    pub fn pattern_coefficient(&self, p: &[u8]) -> f64 {
        match self.rule {
            Rule::Weight(v) => v[weight_of_pattern(p) - 1],
            Rule::PairDelta { i, j, alpha, beta } => {
                if p[i] == p[j] {
                    alpha + beta
                } else {
                    beta
                }
            }
        }
    }

    /// `O(s)` for a string of symbols in `[0, d)`.
    pub fn coefficient(&self, s: &[usize]) -> f64 {
        self.pattern_coefficient(&pattern_of(s))
    }

    /// `O` on joint symbols `c_k = a_k d_B + b_k` (global observable only).
    pub fn coefficient_joint(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let (_, db) = self.local_dims.ok_or(Error::MissingBipartition)?;
        let c: Vec<usize> = a.iter().zip(b).map(|(x, y)| x * db + y).collect();
        Ok(self.coefficient(&c))
    }

    /// Delta form `(alpha, beta, gamma)` of a weight rule:
    /// `alpha d_123 + beta (d_12 + d_13 + d_23) + gamma`.
    pub fn delta_form(&self) -> Option<(f64, f64, f64)> {
        match self.rule {
            Rule::Weight([o1, o2, o3]) => {
                let gamma = o1;
                let beta = o2 - o1;
                Some((o3 - 3.0 * beta - gamma, beta, gamma))
            }
            Rule::PairDelta { .. } => None,
        }
    }

    /// `Tr[O W_pi]` for every `pi` in group order, by set-partition counting.
    pub fn inner_products(&self) -> Vec<f64> {
        let g = Group::cached(T).expect("t=3");
        let parts = set_partitions(T);
        g.elements()
            .iter()
            .map(|p| {
                parts
                    .iter()
                    .filter(|b| p.respects(b))
                    .map(|b| self.pattern_coefficient(b) * falling(self.d, num_blocks(b)))
                    .sum()
            })
            .collect()
    }

    /// `Tr[O (W_pi^A (x) W_sigma^B)]` for the global observable, indexed `pi * 6 + sigma`.
    pub fn global_inner_products(&self) -> Result<Vec<f64>> {
        let (da, db) = self.local_dims.ok_or(Error::MissingBipartition)?;
        let g = Group::cached(T)?;
        let parts = set_partitions(T);
        let n = g.order();
        let mut out = vec![0.0; n * n];
        for pa in &parts {
            for pb in &parts {
                let joint: Vec<usize> = pa
                    .iter()
                    .zip(pb)
                    .map(|(x, y)| (*x as usize) * 8 + *y as usize)
                    .collect();
                let w = self.pattern_coefficient(&pattern_of(&joint))
                    * falling(da, num_blocks(pa))
                    * falling(db, num_blocks(pb));
                if w == 0.0 {
                    continue;
                }
                for (i, p) in g.elements().iter().enumerate() {
                    if !p.respects(pa) {
                        continue;
                    }
                    for (j, s) in g.elements().iter().enumerate() {
                        if s.respects(pb) {
                            out[i * n + j] += w;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Dense diagonal matrix on `(C^d)^{(x)3}` (copy 0 most significant).
    pub fn to_dense(&self) -> CMatrix {
        let dim = self.d.pow(T as u32);
        CMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                Complex64::from(self.coefficient(&digits(r, self.d, T)))
            } else {
                ZERO
            }
        })
    }

    pub fn to_json(&self) -> Value {
        let rule = match self.rule {
            Rule::Weight(v) => json!({"kind": "weight", "wt1": v[0], "wt2": v[1], "wt3": v[2]}),
            Rule::PairDelta { i, j, alpha, beta } => {
                json!({"kind": "pair_delta", "positions": [i + 1, j + 1], "alpha": alpha, "beta": beta})
            }
        };
        json!({"name": self.name, "d": self.d, "local_dims": self.local_dims, "rule": rule})
    }
}

fn digits(mut x: usize, d: usize, t: usize) -> Vec<usize> {
    let mut out = vec![0; t];
    for k in (0..t).rev() {
        out[k] = x % d;
        x /= d;
    }
    out
}

/// `O_+` on a single system: `O(wt) = 1 + (-d)^{wt-1}`.
pub fn o_plus(d: usize) -> Result<DiagonalObservable> {
    check_d(d)?;
    let df = d as f64;
    Ok(DiagonalObservable {
        name: "o_plus",
        d,
        local_dims: None,
        rule: Rule::Weight([2.0, 1.0 - df, 1.0 + df * df]),
    })
}

/// Global `O_+^{AB}`: `O_+` on the joint alphabet of size `d_A d_B`.
pub fn o_plus_global(da: usize, db: usize) -> Result<DiagonalObservable> {
    check_d(da)?;
    check_d(db)?;
    let mut o = o_plus(da * db)?;
    o.name = "o_plus_global";
    o.local_dims = Some((da, db));
    Ok(o)
}

/// Total-correlation pair: `O_A = a_A d(a1,a2) + b_A`, `O_B = a_B d(b2,b3) + b_B`
/// with `a = d + 1`, `b = -1`, normalized so that the twirls are exactly `W_(12)` and `W_(23)`.
pub fn o_corr(da: usize, db: usize) -> Result<(DiagonalObservable, DiagonalObservable)> {
    check_d(da)?;
    check_d(db)?;
    let mk = |name, d: usize, i, j| {
        let df = d as f64;
        DiagonalObservable {
            name,
            d,
            local_dims: None,
            rule: Rule::PairDelta {
                i,
                j,
                alpha: df + 1.0,
                beta: -1.0,
            },
        }
    };
    Ok((mk("o_corr_a", da, 0, 1), mk("o_corr_b", db, 1, 2)))
}

/// Inner products of a product observable `O_A (x) O_B`, indexed `pi * 6 + sigma`.
pub fn product_inner_products(a: &DiagonalObservable, b: &DiagonalObservable) -> Vec<f64> {
    let ia = a.inner_products();
    let ib = b.inner_products();
    ia.iter()
        .flat_map(|x| ib.iter().map(move |y| x * y))
        .collect()
}

/// Monomial matrix `M|j> = c_j |p(j)>`, closed under products and adjoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    perm: Vec<usize>,
    phase: Vec<Complex64>,
}

impl Monomial {
    pub fn identity(d: usize) -> Self {
        Self {
            perm: (0..d).collect(),
            phase: vec![ONE; d],
        }
    }

    /// `self * other`.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let d = self.perm.len();
        let mut perm = vec![0; d];
        let mut phase = vec![ZERO; d];
        for j in 0..d {
            let k = other.perm[j];
            perm[j] = self.perm[k];
            phase[j] = other.phase[j] * self.phase[k];
        }
        Monomial { perm, phase }
    }

    pub fn adjoint(&self) -> Monomial {
        let d = self.perm.len();
        let mut perm = vec![0; d];
        let mut phase = vec![ZERO; d];
        for j in 0..d {
            perm[self.perm[j]] = j;
            phase[self.perm[j]] = self.phase[j].conj();
        }
        Monomial { perm, phase }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.perm.len())
            .filter(|&j| self.perm[j] == j)
            .map(|j| self.phase[j])
            .sum()
    }

    pub fn to_dense(&self) -> CMatrix {
        let d = self.perm.len();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..d {
            m[(self.perm[j], j)] = self.phase[j];
        }
        m
    }
}

/// `P(u, v) = X^u Z^v` as a monomial: `|j> -> w^{v j} |j + u>`.
pub fn heisenberg_weyl_monomial(d: usize, u: usize, v: usize) -> Monomial {
    Monomial {
        perm: (0..d).map(|j| (j + u) % d).collect(),
        phase: (0..d)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * ((v * j) % d) as f64 / d as f64))
            .collect(),
    }
}

/// Dense `P(u, v) = X^u Z^v`.
pub fn heisenberg_weyl(d: usize, u: usize, v: usize) -> CMatrix {
    heisenberg_weyl_monomial(d, u % d, v % d).to_dense()
}

/// `Psi_{u,v} = (I (x) P(u,v)) Psi_+` as a pure state.
pub fn bell_label_state(d: usize, u: usize, v: usize) -> Result<DensityMatrix> {
    check_d(d)?;
    DensityMatrix::from_pure(
        &crate::qstate::bell_basis_vector(d, u % d, v % d),
        Some((d, d)),
    )
}

/// `(wt, theta)` of three Bell labels; `theta` is 0 unless all three labels differ.
pub fn bell_class(labels: &[(usize, usize); 3], d: usize) -> (usize, usize) {
    let [(u1, v1), (u2, v2), (u3, v3)] = *labels;
    let e12 = labels[0] == labels[1];
    let e13 = labels[0] == labels[2];
    let e23 = labels[1] == labels[2];
    let wt = match (e12 as u8) + (e13 as u8) + (e23 as u8) {
        3 => 3,
        1 => 2,
        _ => 1,
    };
    if wt > 1 {
        return (wt, 0);
    }
    let plus = (u1 * v2 + u2 * v3 + u3 * v1) % d;
    let minus = (u1 * v3 + u2 * v1 + u3 * v2) % d;
    (1, (plus + d - minus) % d)
}

/// Decodes label index `u d + v`.
pub fn label_of(index: usize, d: usize) -> (usize, usize) {
    (index / d, index % d)
}

/// `phi(u, v; pi, sigma) = Tr[(Psi_1 (x) Psi_2 (x) Psi_3)(W_pi^A (x) W_sigma^B)]` by the
/// cycle contraction `d^{-3} Tr[(P_k^dagger P_{sigma(k)})_k W_beta]`, where `W_beta = W_sigma W_pi^{-1}`
/// as an operator product (`beta = pi^{-1} o sigma` as maps).
pub fn bell_phi(
    d: usize,
    labels: &[(usize, usize); 3],
    pi: &Permutation,
    sigma: &Permutation,
) -> Complex64 {
    let p: Vec<Monomial> = labels
        .iter()
        .map(|&(u, v)| heisenberg_weyl_monomial(d, u, v))
        .collect();
    let a: Vec<Monomial> = (0..T)
        .map(|k| p[k].adjoint().mul(&p[sigma.apply(k)]))
        .collect();
    let beta = pi.inverse().compose(sigma);
    let mut value = ONE;
    for cycle in beta.cycles() {
        // Tr[(A_1 (x) ... ) W_beta] = prod over cycles of Tr(A_k A_{beta(k)} ...)
        let mut m = Monomial::identity(d);
        for &k in &cycle {
            m = m.mul(&a[k]);
        }
        value *= m.trace();
    }
    value / (d as f64).powi(3)
}

/// Same quantity by sparse contraction over the `d^3` support of the product state.
pub fn bell_phi_sparse(
    d: usize,
    labels: &[(usize, usize); 3],
    pi: &Permutation,
    sigma: &Permutation,
) -> Complex64 {
    let amp = |k: usize, l: usize| -> (usize, Complex64) {
        let (u, v) = labels[k];
        (
            (l + u) % d,
            Complex64::from_polar(
                1.0 / (d as f64).sqrt(),
                2.0 * PI * ((v * l) % d) as f64 / d as f64,
            ),
        )
    };
    let amplitude_at = |a: &[usize; 3], b: &[usize; 3]| -> Complex64 {
        let mut z = ONE;
        for k in 0..T {
            let (bk, c) = amp(k, a[k]);
            if bk != b[k] {
                return ZERO;
            }
            z *= c;
        }
        z
    };
    let mut acc = ZERO;
    for code in 0..d * d * d {
        let ls = [code / (d * d), (code / d) % d, code % d];
        let mut a = [0; 3];
        let mut b = [0; 3];
        let mut z = ONE;
        for k in 0..T {
            let (bk, c) = amp(k, ls[k]);
            a[k] = ls[k];
            b[k] = bk;
            z *= c;
        }
        // W |y> = |x> with x_k = (a_{pi(k)}, b_{sigma(k)})
        let xa = [a[pi.apply(0)], a[pi.apply(1)], a[pi.apply(2)]];
        let xb = [b[sigma.apply(0)], b[sigma.apply(1)], b[sigma.apply(2)]];
        acc += z * amplitude_at(&xa, &xb).conj();
    }
    acc
}

/// Dense `W_pi^A (x) W_sigma^B` on `(C^{d_A} (x) C^{d_B})^{(x)t}` with copies ordered
/// `A_1 B_1 A_2 B_2 ...` (copy 0 most significant).
pub fn bipartite_permutation_matrix(
    pi: &Permutation,
    sigma: &Permutation,
    da: usize,
    db: usize,
) -> CMatrix {
    let t = pi.size();
    let dd = da * db;
    let dim = dd.pow(t as u32);
    let mut m = CMatrix::zeros(dim, dim);
    for c in 0..dim {
        let cs = digits(c, dd, t);
        let mut r = 0;
        for k in 0..t {
            let a = cs[pi.apply(k)] / db;
            let b = cs[sigma.apply(k)] % db;
            r = r * dd + a * db + b;
        }
        m[(r, c)] = ONE;
    }
    m
}

/// Dense `Psi_1 (x) Psi_2 (x) Psi_3` in the ordering of [`bipartite_permutation_matrix`].
pub fn bell_triple_dense(d: usize, labels: &[(usize, usize); 3]) -> CMatrix {
    let vs: Vec<DVector<Complex64>> = labels
        .iter()
        .map(|&(u, v)| crate::qstate::bell_basis_vector(d, u, v))
        .collect();
    let v = vs[0].kronecker(&vs[1]).kronecker(&vs[2]);
    &v * v.adjoint()
}

/// Bell-diagonal observable over label triples, parametrized by `(wt, theta)` classes.
#[derive(Clone, Debug)]
pub struct BellObservable {
    d: usize,
    /// Solved `(Q(1,0), Q(1,d/2), Q(2,0), Q(3,0))`.
    q: [f64; 4],
    /// `n(wt, theta)`: index 0 is wt=3, 1 is wt=2, then `2 + theta` for wt=1.
    counts: Vec<u64>,
    support: Vec<usize>,
    theta_coeff: Vec<f64>,
    coeff2: f64,
    coeff3: f64,
}

/// `n(wt, theta)` by enumeration of all `d^6` label triples.
pub fn bell_class_counts(d: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 2 + d];
    let n = d * d;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let labels = [label_of(x, d), label_of(y, d), label_of(z, d)];
                match bell_class(&labels, d) {
                    (3, _) => counts[0] += 1,
                    (2, _) => counts[1] += 1,
                    (_, th) => counts[2 + th] += 1,
                }
            }
        }
    }
    counts
}

/// The rotation-angle entry `c` of the fourth row: `cos(2 pi theta*/d)` at the support angle.
pub fn bell_row_cosine(d: usize) -> f64 {
    if d.is_multiple_of(2) {
        -1.0
    } else {
        ((d as f64 + 1.0) / d as f64 * PI).cos()
    }
}

/// Solves the 4x4 system for `(Q(1,0), Q(1,d/2), Q(2,0), Q(3,0))`.
pub fn solve_bell_system(d: usize) -> Result<[f64; 4]> {
    check_d(d)?;
    let df = d as f64;
    let c = bell_row_cosine(d);
    let m = DMatrix::from_row_slice(
        4,
        4,
        &[
            df,
            df,
            df,
            df,
            0.0,
            0.0,
            df * df / 3.0,
            df * df,
            0.0,
            0.0,
            0.0,
            df.powi(3),
            df,
            df * c,
            df,
            df,
        ],
    );
    let k = df.powi(5) * (df * df - 1.0).powi(2);
    let rhs = DVector::from_vec(vec![0.0, 0.0, k, -k]);
    let lu = m.lu();
    if lu.determinant().abs() < 1e-12 {
        return Err(Error::Singular(format!("Bell system at d={d}")));
    }
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("Bell system at d={d}")))?;
    Ok([x[0], x[1], x[2], x[3]])
}

/// Support angles carrying the `Q(1,d/2)` weight.
pub fn bell_support_angles(d: usize) -> Vec<usize> {
    if d.is_multiple_of(2) {
        vec![d / 2]
    } else {
        vec![(d - 1) / 2, d.div_ceil(2)]
    }
}

/// `O_--` with `(Phi_A (x) Phi_B)(O_--) = M_-^A (x) M_-^B`.
pub fn o_minus_minus(d: usize) -> Result<BellObservable> {
    let q = solve_bell_system(d)?;
    let counts = bell_class_counts(d);
    let support = bell_support_angles(d);
    let mut theta_coeff = vec![0.0; d];
    theta_coeff[0] = q[0] / counts[2] as f64;
    for &th in &support {
        theta_coeff[th] = q[1] / (support.len() as f64 * counts[2 + th] as f64);
    }
    Ok(BellObservable {
        d,
        q,
        coeff2: q[2] / counts[1] as f64,
        coeff3: q[3] / counts[0] as f64,
        counts,
        support,
        theta_coeff,
    })
}

impl BellObservable {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q_values(&self) -> [f64; 4] {
        self.q
    }

    /// `n(wt, theta)`.
    pub fn class_count(&self, wt: usize, theta: usize) -> u64 {
        match wt {
            3 => self.counts[0],
            2 => self.counts[1],
            _ => self.counts[2 + theta % self.d],
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Per-triple coefficient of class `(wt, theta)`.
    pub fn class_coefficient(&self, wt: usize, theta: usize) -> f64 {
        match wt {
            3 => self.coeff3,
            2 => self.coeff2,
            _ => self.theta_coeff[theta % self.d],
        }
    }

    pub fn coefficient(&self, labels: &[(usize, usize); 3]) -> f64 {
        let (wt, th) = bell_class(labels, self.d);
        self.class_coefficient(wt, th)
    }

    /// Coefficient by label indices `u d + v`.
    pub fn coefficient_indices(&self, x: usize, y: usize, z: usize) -> f64 {
        let d = self.d;
        self.coefficient(&[label_of(x, d), label_of(y, d), label_of(z, d)])
    }

    /// `Tr[O_-- (W_pi^A (x) W_sigma^B)]` via the cycle contraction, indexed `pi * 6 + sigma`.
    pub fn inner_products(&self) -> Vec<f64> {
        self.inner_products_with(bell_phi)
    }

    /// Same inner products through an arbitrary `phi` evaluator.
    pub fn inner_products_with<F>(&self, phi: F) -> Vec<f64>
    where
        F: Fn(usize, &[(usize, usize); 3], &Permutation, &Permutation) -> Complex64,
    {
        let d = self.d;
        let g = Group::cached(T).expect("t=3");
        let n = g.order();
        let mut out = vec![ZERO; n * n];
        let m = d * d;
        for x in 0..m {
            for y in 0..m {
                for z in 0..m {
                    let labels = [label_of(x, d), label_of(y, d), label_of(z, d)];
                    let c = self.coefficient(&labels);
                    if c == 0.0 {
                        continue;
                    }
                    for (i, p) in g.elements().iter().enumerate() {
                        for (j, s) in g.elements().iter().enumerate() {
                            out[i * n + j] += phi(d, &labels, p, s) * c;
                        }
                    }
                }
            }
        }
        out.into_iter().map(|z| z.re).collect()
    }

    /// Dense operator `sum O(labels) Psi_1 (x) Psi_2 (x) Psi_3`.
    pub fn to_dense(&self) -> CMatrix {
        let d = self.d;
        let m = d * d;
        let dim = m.pow(3);
        let mut out = CMatrix::zeros(dim, dim);
        for x in 0..m {
            for y in 0..m {
                for z in 0..m {
                    let labels = [label_of(x, d), label_of(y, d), label_of(z, d)];
                    let c = self.coefficient(&labels);
                    if c != 0.0 {
                        out += bell_triple_dense(d, &labels) * Complex64::from(c);
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut classes = vec![
            json!({"wt": 3, "theta": 0, "count": self.counts[0], "coefficient": self.coeff3}),
            json!({"wt": 2, "theta": 0, "count": self.counts[1], "coefficient": self.coeff2}),
        ];
        for th in 0..self.d {
            classes.push(json!({
                "wt": 1, "theta": th, "count": self.counts[2 + th], "coefficient": self.theta_coeff[th]
            }));
        }
        json!({
            "name": "o_minus_minus",
            "d": self.d,
            "q": {"q10": self.q[0], "q1h": self.q[1], "q20": self.q[2], "q30": self.q[3]},
            "classes": classes,
        })
    }
}

/// Cyclic shifts `W_0 = W_(123)` and `W_1 = W_(132)`.
pub fn cyclic_pair() -> (Permutation, Permutation) {
    (
        Permutation::parse(T, "(1,2,3)").expect("valid"),
        Permutation::parse(T, "(1,3,2)").expect("valid"),
    )
}

/// Target operators as permutation combinations.
#[derive(Clone, Debug)]
pub struct Targets {
    /// `M_+ = W_0 + W_1`.
    pub m_plus: PermutationCombination,
    /// `M_- = W_0 - W_1`.
    pub m_minus: PermutationCombination,
    /// `M_+^A (x) M_+^B`.
    pub m_plus_plus: PermutationCombination,
    /// `M_-^A (x) M_-^B`.
    pub m_minus_minus: PermutationCombination,
    /// `M_+^{AB} = W_0 (x) W_0 + W_1 (x) W_1`.
    pub m_plus_global: PermutationCombination,
    /// `M_neg = (M_+^A (x) M_+^B - M_+^{AB}) / 2 = (W_0 (x) W_1 + W_1 (x) W_0) / 2`.
    pub m_neg: PermutationCombination,
    /// `M_c = W_(12) (x) W_(23)`.
    pub m_c: PermutationCombination,
}

/// Builds all targets (dimension independent).
pub fn m_neg_targets() -> Targets {
    let (w0, w1) = cyclic_pair();
    let mut m_plus = PermutationCombination::zero(T, 1).expect("t=3");
    m_plus.add(&w0, 1.0);
    m_plus.add(&w1, 1.0);
    let mut m_minus = PermutationCombination::zero(T, 1).expect("t=3");
    m_minus.add(&w0, 1.0);
    m_minus.add(&w1, -1.0);
    let m_plus_plus = PermutationCombination::tensor(&m_plus, &m_plus);
    let m_minus_minus = PermutationCombination::tensor(&m_minus, &m_minus);
    let mut m_plus_global = PermutationCombination::zero(T, 2).expect("t=3");
    m_plus_global.add_pair(&w0, &w0, 1.0);
    m_plus_global.add_pair(&w1, &w1, 1.0);
    let m_neg = m_plus_plus.plus(&m_plus_global.scaled(-1.0)).scaled(0.5);
    let mut m_c = PermutationCombination::zero(T, 2).expect("t=3");
    m_c.add_pair(
        &Permutation::parse(T, "(1,2)").expect("valid"),
        &Permutation::parse(T, "(2,3)").expect("valid"),
        1.0,
    );
    Targets {
        m_plus,
        m_minus,
        m_plus_plus,
        m_minus_minus,
        m_plus_global,
        m_neg,
        m_c,
    }
}

/// `Tr[M rho^{(x)3}]` for a bipartite combination, via [`permutation_expectation`].
pub fn expectation(comb: &PermutationCombination, rho: &DensityMatrix) -> Result<Complex64> {
    let g = Group::cached(comb.t())?;
    let n = g.order();
    let mut acc = ZERO;
    match comb.parties() {
        1 => {
            let joint = DensityMatrix::new(rho.data().clone(), Some((rho.dim(), 1)))?;
            let id = Permutation::identity(comb.t());
            for (i, p) in g.elements().iter().enumerate() {
                let c = comb.coeffs()[i];
                if c != 0.0 {
                    acc += permutation_expectation(&joint, p, &id)? * c;
                }
            }
        }
        _ => {
            for (i, p) in g.elements().iter().enumerate() {
                for (j, s) in g.elements().iter().enumerate() {
                    let c = comb.coeffs()[i * n + j];
                    if c != 0.0 {
                        acc += permutation_expectation(rho, p, s)? * c;
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Default relative tolerance of the projection checks.
pub const PROJECTION_TOL: f64 = 1e-9;

/// `Phi^3(O_+) = M_+` on `C^d`.
pub fn verify_o_plus(d: usize) -> Result<ProjectionReport> {
    let o = o_plus(d)?;
    Ok(projection_criterion(
        &o.inner_products(),
        &m_neg_targets().m_plus,
        &[d],
        PROJECTION_TOL,
    ))
}

/// `(Phi_A (x) Phi_B)(O_+ (x) O_+) = M_+^A (x) M_+^B`.
pub fn verify_bilocal(da: usize, db: usize) -> Result<ProjectionReport> {
    let inner = product_inner_products(&o_plus(da)?, &o_plus(db)?);
    Ok(projection_criterion(
        &inner,
        &m_neg_targets().m_plus_plus,
        &[da, db],
        PROJECTION_TOL,
    ))
}

/// `Phi_AB(O_+^{AB}) = M_+^{AB}`: a global twirl only sees `Tr[O (W_pi (x) W_pi)]`,
/// so the diagonal pairs are compared.
pub fn verify_global(da: usize, db: usize) -> Result<ProjectionReport> {
    let inner = o_plus_global(da, db)?.global_inner_products()?;
    let target = m_neg_targets().m_plus_global.inner_products(&[da, db]);
    let n = Group::cached(T)?.order();
    let diag = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[i * n + i]).collect() };
    let (o, t) = (diag(&inner), diag(&target));
    let residuals: Vec<f64> = o.iter().zip(&t).map(|(a, b)| (a - b).abs()).collect();
    let scale = o.iter().chain(&t).fold(1.0f64, |m, x| m.max(x.abs()));
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(ProjectionReport {
        pass: max_residual <= PROJECTION_TOL * scale,
        residuals,
        max_residual,
        scale,
    })
}

/// `(Phi_A (x) Phi_B)(O_A (x) O_B) = W_(12) (x) W_(23)`.
pub fn verify_corr(da: usize, db: usize) -> Result<ProjectionReport> {
    let (oa, ob) = o_corr(da, db)?;
    let inner = product_inner_products(&oa, &ob);
    Ok(projection_criterion(
        &inner,
        &m_neg_targets().m_c,
        &[da, db],
        PROJECTION_TOL,
    ))
}

/// `(Phi_A (x) Phi_B)(O_--) = M_-^A (x) M_-^B`.
pub fn verify_o_minus_minus(d: usize) -> Result<ProjectionReport> {
    let o = o_minus_minus(d)?;
    Ok(projection_criterion(
        &o.inner_products(),
        &m_neg_targets().m_minus_minus,
        &[d, d],
        PROJECTION_TOL,
    ))
}

/// Outcome of the no-go witness.
#[derive(Clone, Debug)]
pub struct NoGoReport {
    pub d: usize,
    /// `Tr[M (W_0 (x) W_0)]` with `M = W_0 (x) W_1 + W_1 (x) W_0`.
    pub target_same: f64,
    /// `Tr[M (W_0 (x) W_1)]`.
    pub target_opposite: f64,
    pub gap: f64,
    /// Largest `|Tr[O (W_0 (x) W_0)] - Tr[O (W_0 (x) W_1)]|` over sampled diagonal `O`.
    pub max_diagonal_difference: f64,
    pub samples: usize,
}

/// No diagonal bipartite observable reproduces `W_0 (x) W_1 + W_1 (x) W_0` under bilocal twirling:
/// the two target inner products differ, while every diagonal `O` gives equal values.
pub fn nogo_witness<R: rand::Rng + ?Sized>(
    d: usize,
    samples: usize,
    rng: &mut R,
) -> Result<NoGoReport> {
    check_d(d)?;
    let (w0, w1) = cyclic_pair();
    let mut m = PermutationCombination::zero(T, 2)?;
    m.add_pair(&w0, &w1, 1.0);
    m.add_pair(&w1, &w0, 1.0);
    let inner = m.inner_products(&[d, d]);
    let g = Group::cached(T)?;
    let n = g.order();
    let (i0, i1) = (g.index_of(&w0), g.index_of(&w1));
    let target_same = inner[i0 * n + i0];
    let target_opposite = inner[i0 * n + i1];
    let dd = d * d;
    let strings = dd.pow(T as u32);
    let mut max_diff = 0.0f64;
    for _ in 0..samples {
        let o: Vec<f64> = (0..strings).map(|_| rng.random_range(-1.0..1.0)).collect();
        let same = diagonal_bipartite_inner(&o, d, d, &w0, &w0);
        let opp = diagonal_bipartite_inner(&o, d, d, &w0, &w1);
        max_diff = max_diff.max((same - opp).abs());
    }
    Ok(NoGoReport {
        d,
        target_same,
        target_opposite,
        gap: target_opposite - target_same,
        max_diagonal_difference: max_diff,
        samples,
    })
}

/// `Tr[O (W_pi^A (x) W_sigma^B)]` for a diagonal `O` given on joint strings
/// (copy 0 most significant, joint symbol `a d_B + b`).
pub fn diagonal_bipartite_inner(
    o: &[f64],
    da: usize,
    db: usize,
    pi: &Permutation,
    sigma: &Permutation,
) -> f64 {
    let t = pi.size();
    let dd = da * db;
    (0..dd.pow(t as u32))
        .filter(|&x| {
            let cs = digits(x, dd, t);
            (0..t).all(|k| {
                cs[pi.apply(k)] / db == cs[k] / db && cs[sigma.apply(k)] % db == cs[k] % db
            })
        })
        .map(|x| o[x])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permgroup::enumerate_group;
    use crate::qstate::{correlation_numerator, moment, negativity_moment, random_mixed};
    use crate::rng::RandomSource;
    use crate::weingarten::WeingartenTable;

    #[test]
    fn o_plus_values() {
        let o = o_plus(2).unwrap();
        assert_eq!(o.delta_form(), Some((12.0, -3.0, 2.0)));
        assert_eq!(o.rule(), &Rule::Weight([2.0, -1.0, 5.0]));
        for d in 2..7 {
            let o = o_plus(d).unwrap();
            assert_eq!(o.coefficient(&[0, 1, 2]), 2.0);
            let (a, b, g) = o.delta_form().unwrap();
            let df = d as f64;
            assert_eq!((a, b, g), ((df + 1.0) * (df + 2.0), -(df + 1.0), 2.0));
        }
        assert_eq!(o_plus(4).unwrap().coefficient(&[3, 3, 3]), 17.0);
        assert_eq!(weight(&[1, 1, 3]), 2);
    }

    #[test]
    fn global_values() {
        let o = o_plus_global(2, 2).unwrap();
        assert_eq!(o.rule(), &Rule::Weight([2.0, -3.0, 17.0]));
        assert_eq!(
            o.coefficient_joint(&[1, 1, 1], &[0, 1, 2 % 2]).unwrap(),
            -3.0
        );
        assert_eq!(
            o_plus_global(2, 3)
                .unwrap()
                .coefficient_joint(&[1, 1, 1], &[0, 1, 2])
                .unwrap(),
            2.0
        );
        assert_eq!(
            o_plus_global(2, 3).unwrap().rule(),
            &Rule::Weight([2.0, -5.0, 37.0])
        );
    }

    #[test]
    fn corr_values() {
        let (oa, ob) = o_corr(2, 3).unwrap();
        assert_eq!(oa.coefficient(&[1, 1, 0]), 2.0);
        assert_eq!(oa.coefficient(&[1, 0, 0]), -1.0);
        assert_eq!(ob.coefficient(&[1, 0, 0]), 3.0);
        assert_eq!(ob.coefficient(&[0, 0, 1]), -1.0);
    }

    #[test]
    fn projection_identities() {
        for d in 2..=6 {
            let r = verify_o_plus(d).unwrap();
            assert!(r.max_residual < 1e-12 * r.scale, "d={d} {:?}", r.residuals);
        }
        for (da, db) in [(2, 2), (2, 3), (3, 3)] {
            assert!(verify_bilocal(da, db).unwrap().pass);
            assert!(verify_global(da, db).unwrap().pass);
            assert!(verify_corr(da, db).unwrap().pass);
        }
    }

    #[test]
    fn corr_twirl_is_exact_transposition() {
        let (oa, _) = o_corr(2, 2).unwrap();
        let mut w12 = PermutationCombination::zero(3, 1).unwrap();
        w12.add(&Permutation::parse(3, "(1,2)").unwrap(), 1.0);
        let r = projection_criterion(&oa.inner_products(), &w12, &[2], 0.0);
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn o_plus_dense_twirl() {
        for d in [2usize, 3] {
            let tab = WeingartenTable::build(3, d).unwrap();
            let y = tab
                .twirl_dense(&o_plus(d).unwrap().to_dense(), 4096)
                .unwrap();
            let target = m_neg_targets().m_plus.to_dense(d);
            assert!((y - target).norm() < 1e-9);
        }
    }

    #[test]
    fn relabeling_invariance() {
        let d = 4;
        let o = o_plus(d).unwrap();
        let (oa, _) = o_corr(d, d).unwrap();
        let relabel = [2usize, 0, 3, 1];
        for x in 0..d * d * d {
            let s = digits(x, d, 3);
            let r: Vec<usize> = s.iter().map(|&c| relabel[c]).collect();
            assert_eq!(o.coefficient(&s), o.coefficient(&r));
            assert_eq!(oa.coefficient(&s), oa.coefficient(&r));
        }
    }

    #[test]
    fn heisenberg_weyl_algebra() {
        assert_eq!(heisenberg_weyl(3, 0, 0), CMatrix::identity(3, 3));
        let x = heisenberg_weyl(2, 1, 0);
        let z = heisenberg_weyl(2, 0, 1);
        assert_eq!(x, CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]));
        assert!(
            (z.clone() - CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])).norm() < 1e-15
        );
        for d in 2..5 {
            for u in 0..d {
                for v in 0..d {
                    let p = heisenberg_weyl(d, u, v);
                    assert!(crate::linalg::unitarity_defect(&p) < 1e-12);
                    let xu = heisenberg_weyl(d, u, 0);
                    let zv = heisenberg_weyl(d, 0, v);
                    let w = Complex64::from_polar(1.0, -2.0 * PI * (u * v) as f64 / d as f64);
                    assert!((&xu * &zv - (&zv * &xu) * w).norm() < 1e-12);
                    let m = heisenberg_weyl_monomial(d, u, v);
                    assert!((m.adjoint().to_dense() - p.adjoint()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bell_states_orthonormal() {
        let d = 3;
        let vs: Vec<_> = (0..d * d)
            .map(|k| crate::qstate::bell_basis_vector(d, k / d, k % d))
            .collect();
        for i in 0..d * d {
            for j in 0..d * d {
                let ip = vs[i].dotc(&vs[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - Complex64::from(expect)).norm() < 1e-12);
            }
        }
        let psi = crate::qstate::bell_vector(d);
        let p = heisenberg_weyl(d, 1, 2);
        let via_op = crate::linalg::kron(&CMatrix::identity(d, d), &p) * psi;
        assert!((via_op - &vs[d + 2]).norm() < 1e-12);
        assert!((bell_label_state(d, 1, 2).unwrap().purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bell_class_examples() {
        for d in 2..5 {
            assert_eq!(bell_class(&[(1, 1), (1, 1), (1, 1)], d), (3, 0));
            let c = bell_class_counts(d);
            let dd = (d * d) as u64;
            assert_eq!(c[0], dd);
            assert_eq!(c[1], 3 * dd * (dd - 1));
            assert_eq!(c[2..].iter().sum::<u64>(), dd * (dd - 1) * (dd - 2));
            for th in 1..d {
                assert_eq!(c[2 + th], c[2 + d - th]);
            }
        }
        let l = [(0, 1), (1, 2), (2, 0)];
        let (_, th) = bell_class(&l, 3);
        let (_, th2) = bell_class(&[l[1], l[0], l[2]], 3);
        assert_eq!((th + th2) % 3, 0);
    }

    #[test]
    fn sparse_matches_dense_at_d2() {
        let d = 2;
        let g = enumerate_group(3).unwrap();
        for code in 0..64usize {
            let labels = [
                label_of(code / 16, d),
                label_of((code / 4) % 4, d),
                label_of(code % 4, d),
            ];
            let rho = bell_triple_dense(d, &labels);
            for p in &g {
                for s in &g {
                    let w = bipartite_permutation_matrix(p, s, d, d);
                    let dense = crate::linalg::trace_product(&rho, &w);
                    let sp = bell_phi_sparse(d, &labels, p, s);
                    assert!(
                        (dense - sp).norm() < 1e-10,
                        "{labels:?} {p} {s}: {dense} vs {sp}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_paths_agree() {
        let g = enumerate_group(3).unwrap();
        for d in [2usize, 3] {
            let m = d * d;
            for x in 0..m {
                for y in 0..m {
                    for z in 0..m {
                        let labels = [label_of(x, d), label_of(y, d), label_of(z, d)];
                        for p in &g {
                            for s in &g {
                                let a = bell_phi(d, &labels, p, s);
                                let b = bell_phi_sparse(d, &labels, p, s);
                                assert!((a - b).norm() < 1e-12, "{labels:?} {p} {s}: {a} vs {b}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn phi_matches_dense_at_d2() {
        let d = 2;
        let g = enumerate_group(3).unwrap();
        let ws: Vec<Vec<CMatrix>> = g
            .iter()
            .map(|p| {
                g.iter()
                    .map(|s| bipartite_permutation_matrix(p, s, d, d))
                    .collect()
            })
            .collect();
        for code in [0usize, 5, 17, 27, 39, 50, 63] {
            let labels = [
                label_of(code / 16, d),
                label_of((code / 4) % 4, d),
                label_of(code % 4, d),
            ];
            let rho = bell_triple_dense(d, &labels);
            for (i, p) in g.iter().enumerate() {
                for (j, s) in g.iter().enumerate() {
                    let dense = crate::linalg::trace_product(&rho, &ws[i][j]);
                    assert!((dense - bell_phi(d, &labels, p, s)).norm() < 1e-10);
                }
            }
        }
    }

    fn tr_pp(p: &[Monomial], i: usize, j: usize) -> Complex64 {
        p[i].adjoint().mul(&p[j]).trace()
    }

    #[test]
    fn phi_reproduces_coefficient_tables() {
        let g = enumerate_group(3).unwrap();
        let name = |p: &Permutation| p.to_string();
        for d in [2usize, 3] {
            let df = d as f64;
            let m = d * d;
            for x in 0..m {
                for y in 0..m {
                    for z in 0..m {
                        let labels = [label_of(x, d), label_of(y, d), label_of(z, d)];
                        let p: Vec<Monomial> = labels
                            .iter()
                            .map(|&(u, v)| heisenberg_weyl_monomial(d, u, v))
                            .collect();
                        let t = |i, j| tr_pp(&p, i, j);
                        let chain = |order: [usize; 6]| {
                            let mut acc = Monomial::identity(d);
                            for (k, &i) in order.iter().enumerate() {
                                let f = if k % 2 == 0 {
                                    p[i].adjoint()
                                } else {
                                    p[i].clone()
                                };
                                acc = acc.mul(&f);
                            }
                            acc.trace()
                        };
                        for pi in &g {
                            for sigma in &g {
                                let (col, row) = (name(pi), name(sigma));
                                let c = Complex64::from;
                                let expected = match (row.as_str(), col.as_str()) {
                                    ("()", "()") => c(df.powi(3)),
                                    ("()", "(1,2,3)" | "(1,3,2)")
                                    | ("(1,2,3)" | "(1,3,2)", "()") => c(df),
                                    ("()", _) | (_, "()") => c(df * df),
                                    ("(2,3)", "(2,3)" | "(1,2,3)" | "(1,3,2)") => t(1, 2) * t(2, 1),
                                    ("(1,3)", "(1,3)" | "(1,2,3)" | "(1,3,2)") => t(0, 2) * t(2, 0),
                                    ("(1,2)", "(1,2)" | "(1,2,3)" | "(1,3,2)") => t(0, 1) * t(1, 0),
                                    ("(1,2,3)" | "(1,3,2)", "(2,3)") => t(1, 2) * t(2, 1),
                                    ("(1,2,3)" | "(1,3,2)", "(1,3)") => t(0, 2) * t(2, 0),
                                    ("(1,2,3)" | "(1,3,2)", "(1,2)") => t(0, 1) * t(1, 0),
                                    ("(1,2,3)", "(1,2,3)") => t(0, 1) * t(1, 2) * t(2, 0),
                                    ("(1,3,2)", "(1,3,2)") => t(0, 2) * t(1, 0) * t(2, 1),
                                    ("(1,2,3)", "(1,3,2)") => chain([0, 1, 2, 0, 1, 2]),
                                    ("(1,3,2)", "(1,2,3)") => chain([0, 2, 1, 0, 2, 1]),
                                    _ => c(df),
                                };
                                // the printed diagonal transposition cells omit the fixed-point factor Tr[P_k^dagger P_k] = d
                                let expected = if row == col && pi.num_cycles() == 2 {
                                    expected * df
                                } else {
                                    expected
                                };
                                let got = bell_phi(d, &labels, pi, sigma) * df.powi(3);
                                assert!(
                                    (got - expected).norm() < 1e-10,
                                    "{labels:?} row {row} col {col}: {got} vs {expected}"
                                );
                            }
                        }
                        // weight table: PQR phases exp(-/+ 2 pi i theta / d)
                        let (wt, th) = bell_class(&labels, d);
                        if wt == 1 {
                            let w = Complex64::from_polar(df, -2.0 * PI * th as f64 / df);
                            let a = chain([0, 2, 1, 0, 2, 1]);
                            let b = chain([0, 1, 2, 0, 1, 2]);
                            assert!(
                                (a - w).norm() < 1e-10 && (b - w.conj()).norm() < 1e-10,
                                "{labels:?}: {a} {b} {w}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bell_system_solutions() {
        for d in 2..=8 {
            let q = solve_bell_system(d).unwrap();
            let df = d as f64;
            let k = df * df * (df * df - 1.0).powi(2);
            assert!((q[3] - k).abs() < 1e-9 * k);
            assert!((q[2] + 3.0 * k).abs() < 1e-9 * k);
            let c = bell_row_cosine(d);
            assert!((q[1] - df * df * k / (1.0 - c)).abs() < 1e-9 * k * df * df);
            assert!((q[0] - (2.0 * k - q[1])).abs() < 1e-9 * k * df * df);
            if d.is_multiple_of(2) {
                // printed even-d vector: first entry matches Q(1,0), second matches Q(1,d/2)
                assert!((q[0] + 0.5 * (df * df - 4.0) * k).abs() < 1e-9 * k * df * df);
                assert!((q[1] - 0.5 * df * df * k).abs() < 1e-9 * k * df * df);
            } else {
                let sec2 = 1.0 / (PI / (2.0 * df)).cos().powi(2);
                assert!((q[1] - 0.5 * df * df * sec2 * k).abs() < 1e-9 * k * df * df);
            }
        }
    }

    #[test]
    fn o_minus_minus_projection() {
        for d in 2..=5 {
            let r = verify_o_minus_minus(d).unwrap();
            assert!(
                r.pass,
                "d={d} residual {} scale {}",
                r.max_residual, r.scale
            );
        }
    }

    #[test]
    fn o_minus_minus_dense_twirl_d2() {
        let d = 2;
        let o = o_minus_minus(d).unwrap();
        let dense = o.to_dense();
        let g = enumerate_group(3).unwrap();
        let n = g.len();
        let ws: Vec<CMatrix> = g
            .iter()
            .flat_map(|p| {
                g.iter()
                    .map(move |s| bipartite_permutation_matrix(p, s, d, d))
            })
            .collect();
        let b: Vec<f64> = ws
            .iter()
            .map(|w| crate::linalg::trace_product(&dense, w).re)
            .collect();
        let tab = WeingartenTable::build(3, d).unwrap();
        let coeffs = tab.coefficients_bilocal(&tab, &b);
        let mut twirled = CMatrix::zeros(64, 64);
        let mut target = CMatrix::zeros(64, 64);
        let tg = m_neg_targets().m_minus_minus;
        for k in 0..n * n {
            twirled += &ws[k] * Complex64::from(coeffs[k]);
            target += &ws[k] * Complex64::from(tg.coeffs()[k]);
        }
        assert!((twirled - target).norm() < 1e-9);
    }

    #[test]
    fn targets_match_oracles() {
        let tg = m_neg_targets();
        let mut rng = RandomSource::new(21);
        for (da, db) in [(2, 2), (2, 3), (3, 3)] {
            let r = random_mixed(da, db, 3, &mut rng).unwrap();
            if (da * db).pow(3) > crate::qstate::DENSE_CAP {
                continue;
            }
            let neg = expectation(&tg.m_neg, &r).unwrap();
            assert!(
                (neg.re - negativity_moment(&r).unwrap()).abs() < 1e-10 && neg.im.abs() < 1e-10
            );
            let pp = expectation(&tg.m_plus_plus, &r).unwrap();
            assert!((0.5 * pp.re - moment(&r, 3) - negativity_moment(&r).unwrap()).abs() < 1e-10);
            let mc = expectation(&tg.m_c, &r).unwrap();
            assert!((mc.re - correlation_numerator(&r).unwrap()).abs() < 1e-10);
            let four = tg
                .m_plus_plus
                .plus(&tg.m_minus_minus.scaled(-1.0))
                .scaled(0.25);
            let via_bell = expectation(&four, &r).unwrap();
            assert!((via_bell.re - neg.re).abs() < 1e-10);
        }
        let mono = random_mixed(3, 1, 2, &mut rng).unwrap();
        let mp = expectation(&tg.m_plus, &mono).unwrap();
        assert!((mp.re - 2.0 * moment(&mono, 3)).abs() < 1e-12);
    }

    #[test]
    fn nogo_examples() {
        let mut rng = RandomSource::new(3);
        let r = nogo_witness(2, 5, &mut rng).unwrap();
        assert_eq!(
            (r.target_same, r.target_opposite, r.gap),
            (32.0, 68.0, 36.0)
        );
        assert!(r.max_diagonal_difference < 1e-12);
        let r3 = nogo_witness(3, 1, &mut rng).unwrap();
        assert_eq!((r3.target_same, r3.target_opposite), (162.0, 738.0));
    }

    #[test]
    fn json_exports() {
        let v = o_minus_minus(2).unwrap().to_json();
        assert_eq!(v["classes"].as_array().unwrap().len(), 4);
        assert_eq!(o_plus(3).unwrap().to_json()["rule"]["wt3"], 10.0);
    }
}
