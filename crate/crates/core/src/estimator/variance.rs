//! Variance theory of the `O_+` estimators.
//!
//! The single-round second moment involves `Gamma_t = Tr[Phi^t(Q_t) rho^{(x)t}]`
//! for `t = 3..6`, where `Q_t` is a product of two `O_+` kernels sharing
//! `6 - t` copies: `Q_3 = O_+^2`, `Q_4 = O_{123} O_{124}`, `Q_5 = O_{123} O_{145}`
//! and `Q_6 = O_{123} O_{456}`. The bipartite analogues `Delta_t` use
//! `O_+^A (x) O_+^B` in each factor. Brute force goes through the Weingarten
//! table and set-partition counting of `Tr[W_pi Q_t]`; pure states also admit
//! a symmetric-subspace count `(d-1)!/(d+t-1)! sum_a Q_t(a) T(a)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::Shots;
use crate::error::{Error, Result};
use crate::permgroup::{
    block_type, factorial, num_blocks, set_partitions, Group, Partition, Permutation,
};
use crate::qstate::{self, DensityMatrix, DENSE_CAP};
use crate::weingarten::{rat_to_f64, WeingartenTable};

/// Origin of a set of variance terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedFormPure,
    ExactGamma3,
    BruteForce,
}

/// `Gamma_3..Gamma_6` (or `Delta_3..Delta_6`), stored at index `t - 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerms {
    pub values: [f64; 4],
    pub provenance: Provenance,
}

impl VarianceTerms {
    pub fn get(&self, t: usize) -> f64 {
        self.values[t - 3]
    }
}

/// `E[M(t)^2]` of the half-normalized U-statistic with `N_M` shots.
fn second_moment(n_m: Shots, terms: &VarianceTerms) -> f64 {
    let [g3, g4, g5, g6] = terms.values;
    match n_m {
        Shots::Exact => 0.25 * g6,
        Shots::Finite(n) => {
            let n = n as f64;
            let denom = 4.0 * n * (n - 1.0) * (n - 2.0);
            ((n - 3.0) * (n - 4.0) * (n - 5.0) * g6
                + 9.0 * (n - 3.0) * (n - 4.0) * g5
                + 18.0 * (n - 3.0) * g4
                + 6.0 * g3)
                / denom
        }
    }
}

/// Leading-order expansion `G6/4 + 9 G5/(4N) + 9 G4/(2N^2) + 3 G3/(2N(N-1)(N-2))`.
fn second_moment_asymptotic(n_m: u64, terms: &VarianceTerms) -> f64 {
    let [g3, g4, g5, g6] = terms.values;
    let n = n_m as f64;
    0.25 * g6 + 2.25 * g5 / n + 4.5 * g4 / (n * n) + 1.5 * g3 / (n * (n - 1.0) * (n - 2.0))
}

/// Single-round variance `nu` of the `O_+` estimator, exact in `N_M`.
pub fn variance_nu(n_m: Shots, terms: &VarianceTerms, tr_rho3: f64) -> f64 {
    second_moment(n_m, terms) - tr_rho3 * tr_rho3
}

/// The large-`N_M` expansion of `nu`.
pub fn variance_nu_asymptotic(n_m: u64, terms: &VarianceTerms, tr_rho3: f64) -> f64 {
    second_moment_asymptotic(n_m, terms) - tr_rho3 * tr_rho3
}

/// Single-round variance `mu` of the bilocal `O_+ (x) O_+` estimator, exact in `N_M`.
pub fn variance_mu(n_m: Shots, terms: &VarianceTerms, tr_rho3: f64, tr_pt3: f64) -> f64 {
    second_moment(n_m, terms) - (tr_rho3 + tr_pt3).powi(2)
}

/// The large-`N_M` expansion of `mu`.
pub fn variance_mu_asymptotic(n_m: u64, terms: &VarianceTerms, tr_rho3: f64, tr_pt3: f64) -> f64 {
    second_moment_asymptotic(n_m, terms) - (tr_rho3 + tr_pt3).powi(2)
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn poly(coeffs: &[i64], d: i64) -> BigRational {
    coeffs
        .iter()
        .fold(BigRational::zero(), |acc, &c| acc * int(d) + int(c))
}

/// Pure-state closed forms as exact rationals (index `t - 3`), validated against brute force.
pub fn gamma_pure_exact(d: usize) -> [BigRational; 4] {
    let x = d as i64;
    [
        poly(&[6, 0, -2, 8], x) / poly(&[1, 2], x),
        int(2) * poly(&[7, 6, 3, 8], x) / poly(&[1, 5, 6], x),
        poly(&[48, 68, 60, 64], x) / poly(&[1, 9, 26, 24], x),
        int(4) * poly(&[1, 59, 107, 109, 84], x) / poly(&[1, 14, 71, 154, 120], x),
    ]
}

/// The rationals exactly as printed in the source derivation, kept for comparison;
/// `Gamma_3` and `Gamma_4` there disagree with brute force.
pub fn gamma_pure_printed(d: usize) -> [BigRational; 4] {
    let x = d as i64;
    let mut out = gamma_pure_exact(d);
    out[0] = poly(&[6, -2, 8], x) / poly(&[1, 2], x);
    out[1] = int(4) * poly(&[3, 5, -1, 5], x) / poly(&[1, 5, 6], x);
    out
}

/// Pure-state `Gamma_3..Gamma_6` from the closed forms.
pub fn gamma_pure(d: usize) -> Result<VarianceTerms> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("d={d} must be >= 2")));
    }
    let g = gamma_pure_exact(d);
    let values = [
        rat_to_f64(&g[0]),
        rat_to_f64(&g[1]),
        rat_to_f64(&g[2]),
        rat_to_f64(&g[3]),
    ];
    debug_assert!(within_bounds(d, &values));
    Ok(VarianceTerms {
        values,
        provenance: Provenance::ClosedFormPure,
    })
}

/// `Gamma_3 < 6 d^2`, `Gamma_4 < 14 d`, `Gamma_5 < 48`, `Gamma_6 < 10`.
pub fn within_bounds(d: usize, values: &[f64; 4]) -> bool {
    let df = d as f64;
    values[0] < 6.0 * df * df && values[1] < 14.0 * df && values[2] < 48.0 && values[3] < 10.0
}

/// Copy positions of the two `O_+` factors of `Q_t`.
pub fn q_factors(t: usize) -> Result<[[usize; 3]; 2]> {
    Ok(match t {
        3 => [[0, 1, 2], [0, 1, 2]],
        4 => [[0, 1, 2], [0, 1, 3]],
        5 => [[0, 1, 2], [0, 3, 4]],
        6 => [[0, 1, 2], [3, 4, 5]],
        _ => return Err(Error::CopiesOutOfRange(t)),
    })
}

fn weight_at(pattern: &[u8], pos: &[usize; 3]) -> usize {
    let (x, y, z) = (pattern[pos[0]], pattern[pos[1]], pattern[pos[2]]);
    match ((x == y) as u8) + ((x == z) as u8) + ((y == z) as u8) {
        3 => 3,
        1 => 2,
        _ => 1,
    }
}

/// The two subsystem weights of an equality pattern under `Q_t`.
pub fn q_weights(t: usize, pattern: &[u8]) -> Result<(usize, usize)> {
    let f = q_factors(t)?;
    Ok((weight_at(pattern, &f[0]), weight_at(pattern, &f[1])))
}

fn o_plus_value(d: f64, wt: usize) -> f64 {
    1.0 + (-d).powi(wt as i32 - 1)
}

/// `Q_t` on any string with the given equality pattern.
pub fn q_value(t: usize, d: usize, pattern: &[u8]) -> Result<f64> {
    let (w1, w2) = q_weights(t, pattern)?;
    Ok(o_plus_value(d as f64, w1) * o_plus_value(d as f64, w2))
}

fn falling(d: usize, k: usize) -> f64 {
    (0..k).map(|i| d as f64 - i as f64).product()
}

/// `Tr[W_pi Q_t]` for every `pi` in group order.
pub fn q_inner_products(t: usize, d: usize) -> Result<Vec<f64>> {
    let g = Group::cached(t)?;
    let mut b = vec![0.0; g.order()];
    for p in set_partitions(t) {
        let w = q_value(t, d, &p)? * falling(d, num_blocks(&p));
        if w == 0.0 {
            continue;
        }
        for (i, pi) in g.elements().iter().enumerate() {
            if pi.respects(&p) {
                b[i] += w;
            }
        }
    }
    Ok(b)
}

/// Twirl coefficients `c_sigma` of `Phi^t(Q_t) = sum_sigma c_sigma W_sigma` on `C^d`.
pub fn q_twirl_coefficients(t: usize, d: usize) -> Result<Vec<f64>> {
    let table = WeingartenTable::build(t, d)?;
    Ok(table.coefficients(&q_inner_products(t, d)?))
}

fn cycle_lengths(p: &Permutation) -> Vec<usize> {
    p.cycles().iter().map(|c| c.len()).collect()
}

/// `Gamma_t(rho) = sum_sigma c_sigma prod_{cycles} Tr rho^{len}` (any state, `t = 3..6`).
pub fn gamma_brute(rho: &DensityMatrix, t: usize) -> Result<f64> {
    let d = rho.dim();
    let c = q_twirl_coefficients(t, d)?;
    let g = Group::cached(t)?;
    let moments: Vec<f64> = (0..=t)
        .map(|k| if k == 0 { 1.0 } else { qstate::moment(rho, k) })
        .collect();
    Ok(g.elements()
        .iter()
        .zip(&c)
        .map(|(s, cs)| {
            cs * cycle_lengths(s)
                .iter()
                .map(|&l| moments[l])
                .product::<f64>()
        })
        .sum())
}

/// `Gamma_3..Gamma_6` by brute force.
pub fn gamma_brute_all(rho: &DensityMatrix) -> Result<VarianceTerms> {
    let mut values = [0.0; 4];
    for t in 3..=6 {
        values[t - 3] = gamma_brute(rho, t)?;
    }
    Ok(VarianceTerms {
        values,
        provenance: Provenance::BruteForce,
    })
}

/// Pure-state `Gamma_t` by symmetric-subspace counting, in exact arithmetic:
/// `(d-1)!/(d+t-1)! sum_P Q_t(P) (d)_{|P|} prod_blocks |b|!`.
pub fn gamma_pure_symmetric(d: usize, t: usize) -> Result<BigRational> {
    let x = d as i64;
    let o = |wt: usize| -> BigRational {
        match wt {
            1 => int(2),
            2 => int(1 - x),
            _ => int(1 + x * x),
        }
    };
    let mut acc = BigRational::zero();
    for p in set_partitions(t) {
        let k = num_blocks(&p);
        if k > d {
            continue;
        }
        let (w1, w2) = q_weights(t, &p)?;
        let fall: i64 = (0..k as i64).map(|i| x - i).product();
        let stab: u64 = block_type(&p)
            .parts()
            .iter()
            .map(|&s| factorial(s))
            .product();
        acc += o(w1) * o(w2) * int(fall) * int(stab as i64);
    }
    let dim_sym: BigInt = (0..t as i64).fold(BigInt::one(), |a, i| a * BigInt::from(x + i));
    Ok(acc / BigRational::from_integer(dim_sym))
}

/// Exact `Gamma_3 = c_e + 3 c_tau Tr rho^2 + 2 c_c Tr rho^3` for any state, with the
/// class coefficients of [`gamma3_class_coefficients`]:
/// `c_e = (d-1)(d^2+3d+4)/(d+2)`, `c_tau = d(d-1)(d+1)/(d+2)`, `c_c = (d^3-d^2+6)/(d+2)`.
pub fn gamma3_exact(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let [ce, ct, cc] = gamma3_class_coefficients(d);
    ce + 3.0 * ct * qstate::moment(rho, 2) + 2.0 * cc * qstate::moment(rho, 3)
}

/// Closed-form twirl coefficients of `Phi^3(O_+^2)` per element of the
/// identity, transposition and 3-cycle classes.
pub fn gamma3_class_coefficients(d: usize) -> [f64; 3] {
    let x = d as f64;
    let den = x + 2.0;
    [
        (x - 1.0) * (x * x + 3.0 * x + 4.0) / den,
        x * (x - 1.0) * (x + 1.0) / den,
        (x * x * x - x * x + 6.0) / den,
    ]
}

/// Exact `Delta_3` of a two-qudit state with `d_A = d_B = d`, from the local
/// and joint moments it depends on.
pub fn delta3_exact(rho: &DensityMatrix) -> Result<f64> {
    let (da, db) = rho.dims()?;
    if da != db {
        return Err(Error::DimensionMismatch(format!(
            "Delta_3 needs d_A = d_B, got {da} x {db}"
        )));
    }
    let [ce, ct, cc] = gamma3_class_coefficients(da);
    let m = Delta3Moments::of(rho)?;
    Ok(ce * ce
        + 3.0 * ce * ct * (m.a2 + m.b2)
        + 2.0 * ce * cc * (m.a3 + m.b3)
        + 3.0 * ct * ct * m.ab2
        + 6.0 * ct * ct * m.corr
        + 6.0 * ct * cc * (m.ab2_a + m.ab2_b)
        + 2.0 * cc * cc * (m.ab3 + m.pt3))
}

/// The moments entering `Delta_3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Delta3Moments {
    pub a2: f64,
    pub a3: f64,
    pub b2: f64,
    pub b3: f64,
    pub ab2: f64,
    pub ab3: f64,
    /// `Tr[rho_AB (rho_A (x) rho_B)]`.
    pub corr: f64,
    /// `Tr[rho_AB^2 (rho_A (x) I)]`.
    pub ab2_a: f64,
    /// `Tr[rho_AB^2 (I (x) rho_B)]`.
    pub ab2_b: f64,
    /// `Tr[(rho^{T_A})^3]`.
    pub pt3: f64,
}

impl Delta3Moments {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        use crate::linalg::{kron, trace_product};
        let (da, db) = rho.dims()?;
        let ra = rho.reduced_a()?;
        let rb = rho.reduced_b()?;
        let sq = rho.data() * rho.data();
        let ia = crate::linalg::CMatrix::identity(da, da);
        let ib = crate::linalg::CMatrix::identity(db, db);
        let pow = |m: &crate::linalg::CMatrix, k: usize| {
            crate::linalg::trace(&crate::linalg::matrix_power(m, k)).re
        };
        Ok(Self {
            a2: pow(&ra, 2),
            a3: pow(&ra, 3),
            b2: pow(&rb, 2),
            b3: pow(&rb, 3),
            ab2: qstate::moment(rho, 2),
            ab3: qstate::moment(rho, 3),
            corr: qstate::correlation_numerator(rho)?,
            ab2_a: trace_product(&sq, &kron(&ra, &ib)).re,
            ab2_b: trace_product(&sq, &kron(&ia, &rb)).re,
            pt3: qstate::pt_moment(rho, 3)?,
        })
    }
}

/// `Delta_t(rho) = sum_{sigma, sigma'} c^A_sigma c^B_sigma' Tr[(W_sigma (x) W_sigma') rho^{(x)t}]`.
///
/// Pure states use the Schmidt spectrum (no size limit); mixed states contract
/// densely, once per orbit of simultaneous conjugation, within the dense cap.
pub fn delta_brute(rho: &DensityMatrix, t: usize) -> Result<f64> {
    let (da, db) = rho.dims()?;
    let ca = q_twirl_coefficients(t, da)?;
    let cb = if db == da {
        ca.clone()
    } else {
        q_twirl_coefficients(t, db)?
    };
    let g = Group::cached(t)?;
    let n = g.order();
    if rho.is_pure() {
        let lambda = qstate::schmidt_spectrum(rho)?;
        let k = g.classes().len();
        let mut w = vec![0.0; k];
        for i in 0..n {
            let inv = g.inverse_index(i);
            for j in 0..n {
                w[g.product_class(j, inv)] += ca[i] * cb[j];
            }
        }
        return Ok(g
            .classes()
            .iter()
            .zip(&w)
            .map(|(lam, wc)| {
                if *wc == 0.0 {
                    0.0
                } else {
                    wc * qstate::schmidt_chi(&lambda, &lam.representative())
                }
            })
            .sum());
    }
    let dim = rho.dim().pow(t as u32);
    if dim > DENSE_CAP {
        return Err(Error::CapExceeded {
            dim,
            cap: DENSE_CAP,
        });
    }
    let orbits = conjugation_orbits(g);
    let mut weight: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            *weight.entry(orbits[i * n + j]).or_insert(0.0) += ca[i] * cb[j];
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (rep, w) in weight {
        if w.abs() < 1e-300 {
            continue;
        }
        let (i, j) = (rep / n, rep % n);
        acc += qstate::permutation_expectation_dense(rho, g.element(i), g.element(j))? * w;
    }
    Ok(acc.re)
}

/// Orbit representative (smallest flat index `i n + j`) of each pair under
/// `(s, s') -> (h s h^{-1}, h s' h^{-1})`.
fn conjugation_orbits(g: &Group) -> Vec<usize> {
    let t = g.t();
    let n = g.order();
    let mut gens = vec![Permutation::identity(t)];
    if t >= 2 {
        let mut swap: Vec<usize> = (0..t).collect();
        swap.swap(0, 1);
        let cyc: Vec<usize> = (0..t).map(|i| (i + 1) % t).collect();
        gens = vec![
            Permutation::new(swap).unwrap(),
            Permutation::new(cyc).unwrap(),
        ];
    }
    let conj: Vec<Vec<usize>> = gens
        .iter()
        .map(|h| {
            let hi = h.inverse();
            g.elements()
                .iter()
                .map(|s| g.index_of(&h.compose(s).compose(&hi)))
                .collect()
        })
        .collect();
    let mut parent: Vec<usize> = (0..n * n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..n {
            for c in &conj {
                let (a, b) = (
                    find(&mut parent, i * n + j),
                    find(&mut parent, c[i] * n + c[j]),
                );
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..n * n).map(|x| find(&mut parent, x)).collect()
}

/// One sub-type row of a class tally: an orbit of equality patterns under the symmetries of `Q_t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubType {
    pub representative: String,
    /// Number of patterns in the orbit (strings per pattern: `A_d^{|lambda|}`).
    pub count: u64,
    pub weights: (usize, usize),
}

/// Rows of the class-counting table of `Q_t`, one per cycle type `lambda`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TallyRow {
    pub lambda: Partition,
    /// Number of equality patterns of type `lambda`.
    pub lambda_count: u64,
    /// Permutations fixing a string of type `lambda`: `prod parts!`.
    pub t_lambda: u64,
    pub subtypes: Vec<SubType>,
}

/// Position permutations preserving the pair of factor supports of `Q_t`.
pub fn q_symmetries(t: usize) -> Result<Vec<Permutation>> {
    let f = q_factors(t)?;
    let sets: Vec<Vec<usize>> = f
        .iter()
        .map(|x| {
            let mut v = x.to_vec();
            v.sort();
            v
        })
        .collect();
    let g = Group::cached(t)?;
    Ok(g.elements()
        .iter()
        .filter(|p| {
            let img: Vec<Vec<usize>> = sets
                .iter()
                .map(|s| {
                    let mut v: Vec<usize> = s.iter().map(|&i| p.apply(i)).collect();
                    v.sort();
                    v
                })
                .collect();
            (img[0] == sets[0] && img[1] == sets[1]) || (img[0] == sets[1] && img[1] == sets[0])
        })
        .cloned()
        .collect())
}

fn canonical(p: &[u8]) -> Vec<u8> {
    let mut map = [u8::MAX; 8];
    let mut next = 0;
    p.iter()
        .map(|&x| {
            if map[x as usize] == u8::MAX {
                map[x as usize] = next;
                next += 1;
            }
            map[x as usize]
        })
        .collect()
}

fn layout(t: usize) -> &'static [usize] {
    match t {
        4 => &[2, 1, 1],
        5 => &[1, 2, 2],
        6 => &[3, 3],
        _ => &[3],
    }
}

fn render(t: usize, p: &[u8]) -> String {
    let mut out = String::new();
    let mut k = 0;
    for (gi, &len) in layout(t).iter().enumerate() {
        if gi > 0 {
            out.push('|');
        }
        for _ in 0..len {
            out.push((b'a' + p[k]) as char);
            k += 1;
        }
    }
    out
}

/// Regenerates the class-counting table of `Q_t`.
pub fn class_tally(t: usize) -> Result<Vec<TallyRow>> {
    let syms = q_symmetries(t)?;
    let mut rows: BTreeMap<Partition, Vec<Vec<u8>>> = BTreeMap::new();
    for p in set_partitions(t) {
        rows.entry(block_type(&p)).or_default().push(p);
    }
    let mut out = Vec::new();
    for (lambda, pats) in rows.into_iter().rev() {
        let mut seen: Vec<Vec<u8>> = Vec::new();
        let mut subtypes = Vec::new();
        for p in &pats {
            if seen.contains(p) {
                continue;
            }
            let mut orbit: Vec<Vec<u8>> = syms
                .iter()
                .map(|s| {
                    // relabel positions: new[s(i)] = p[i]
                    let mut q = vec![0u8; t];
                    for i in 0..t {
                        q[s.apply(i)] = p[i];
                    }
                    canonical(&q)
                })
                .collect();
            orbit.sort();
            orbit.dedup();
            seen.extend(orbit.iter().cloned());
            subtypes.push(SubType {
                representative: render(t, p),
                count: orbit.len() as u64,
                weights: q_weights(t, p)?,
            });
        }
        let t_lambda = lambda.parts().iter().map(|&s| factorial(s)).product();
        out.push(TallyRow {
            lambda,
            lambda_count: pats.len() as u64,
            t_lambda,
            subtypes,
        });
    }
    Ok(out)
}

/// Aggregated tally: `((w_1, w_2) sorted, |lambda|) -> sum T_lambda * count`, the
/// coefficient of `O(w_1) O(w_2) A_d^{|lambda|}` in `sum_a Q_t(a) T(a)`.
pub fn tally_coefficients(rows: &[TallyRow]) -> BTreeMap<((usize, usize), usize), u64> {
    let mut m = BTreeMap::new();
    for r in rows {
        for s in &r.subtypes {
            let w = (s.weights.0.min(s.weights.1), s.weights.0.max(s.weights.1));
            *m.entry((w, r.lambda.len())).or_insert(0) += r.t_lambda * s.count;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{bell_state, haar_pure, maximally_mixed, random_mixed};
    use crate::rng::RandomSource;

    #[test]
    fn closed_forms_match_symmetric_counting() {
        for d in 2..=8 {
            let g = gamma_pure_exact(d);
            for t in 3..=6 {
                assert_eq!(gamma_pure_symmetric(d, t).unwrap(), g[t - 3], "d={d} t={t}");
            }
        }
    }

    #[test]
    fn printed_rationals_disagree_only_for_gamma3_gamma4() {
        let p = gamma_pure_printed(2);
        let e = gamma_pure_exact(2);
        assert_eq!(rat_to_f64(&p[0]), 7.0);
        assert_eq!(rat_to_f64(&e[0]), 13.0);
        // printed Gamma_4 happens to coincide at d = 2
        assert_eq!(p[1], e[1]);
        assert_ne!(gamma_pure_printed(3)[1], gamma_pure_exact(3)[1]);
        assert_eq!(p[2], e[2]);
        assert_eq!(p[3], e[3]);
        assert!((rat_to_f64(&e[3]) - 5.8).abs() < 1e-12);
    }

    #[test]
    fn brute_force_pure_matches_closed_forms() {
        let mut rng = RandomSource::new(4);
        for d in 2..=4 {
            let rho = haar_pure(d, &mut rng).unwrap();
            let want = gamma_pure(d).unwrap();
            for t in 3..=6 {
                let got = gamma_brute(&rho, t).unwrap();
                assert!(
                    (got - want.get(t)).abs() < 1e-9 * want.get(t).abs().max(1.0),
                    "d={d} t={t}: {got} vs {}",
                    want.get(t)
                );
            }
            assert!(within_bounds(d, &want.values));
        }
    }

    #[test]
    fn gamma3_exact_matches_brute_force() {
        let mut rng = RandomSource::new(8);
        for d in 2..=3 {
            for rank in 1..=d {
                let rho = random_mixed(d, 1, rank, &mut rng).unwrap();
                let got = gamma3_exact(&rho);
                let want = gamma_brute(&rho, 3).unwrap();
                assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
            }
        }
        let e = gamma_pure_exact(3);
        let pure = haar_pure(3, &mut rng).unwrap();
        assert!((gamma3_exact(&pure) - rat_to_f64(&e[0])).abs() < 1e-9);
    }

    #[test]
    fn delta3_exact_matches_brute_force() {
        let mut rng = RandomSource::new(9);
        for rank in 1..=4 {
            let rho = random_mixed(2, 2, rank, &mut rng).unwrap();
            let got = delta3_exact(&rho).unwrap();
            let want = delta_brute(&rho, 3).unwrap();
            assert!(
                (got - want).abs() < 1e-8 * want.abs(),
                "rank {rank}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn delta_of_pure_product_is_gamma_squared() {
        let rho = crate::qstate::pure_product(2).unwrap();
        let g = gamma_pure(2).unwrap();
        for t in 3..=6 {
            let got = delta_brute(&rho, t).unwrap();
            assert!((got - g.get(t).powi(2)).abs() < 1e-8 * got.abs(), "t={t}");
        }
        assert!((delta3_exact(&rho).unwrap() - g.get(3).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn delta_dense_and_schmidt_paths_agree() {
        let rho = bell_state(2).unwrap();
        let pure = delta_brute(&rho, 4).unwrap();
        // a tiny admixture of noise forces the dense path
        let near = {
            let mm = maximally_mixed(2, 2).unwrap();
            let data = rho.data() * Complex64::from(1.0 - 1e-9) + mm.data() * Complex64::from(1e-9);
            DensityMatrix::new(data, Some((2, 2))).unwrap()
        };
        let dense = delta_brute(&near, 4).unwrap();
        assert!(
            (pure - dense).abs() < 1e-5 * pure.abs(),
            "{pure} vs {dense}"
        );
    }

    #[test]
    fn orbits_are_conjugation_invariant() {
        let g = Group::cached(4).unwrap();
        let orb = conjugation_orbits(g);
        let n = g.order();
        let h = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let hi = h.inverse();
        for i in 0..n {
            for j in 0..n {
                let ci = g.index_of(&h.compose(g.element(i)).compose(&hi));
                let cj = g.index_of(&h.compose(g.element(j)).compose(&hi));
                assert_eq!(orb[i * n + j], orb[ci * n + cj]);
            }
        }
    }

    #[test]
    fn variance_formulas() {
        let terms = gamma_pure(5).unwrap();
        let exact = variance_nu(Shots::Finite(10), &terms, 1.0);
        let n = 10.0;
        let manual = (7.0 * 6.0 * 5.0 / 6.0 * terms.get(6)
            + 1.5 * 7.0 * 6.0 * terms.get(5)
            + 3.0 * 7.0 * terms.get(4)
            + terms.get(3))
            / (4.0 * n * (n - 1.0) * (n - 2.0) / 6.0)
            - 1.0;
        assert!((exact - manual).abs() < 1e-12);
        let inf = variance_nu(Shots::Exact, &terms, 1.0);
        assert!((inf - (terms.get(6) / 4.0 - 1.0)).abs() < 1e-15);
        assert!(inf < 10.0 / 4.0 - 1.0);
        let big = 1_000_000u64;
        let a = variance_nu(Shots::Finite(big), &terms, 1.0);
        let b = variance_nu_asymptotic(big, &terms, 1.0);
        assert!((a - b).abs() < 1e-4);
        let mu = variance_mu(Shots::Exact, &terms, 0.5, 0.25);
        assert!((mu - (terms.get(6) / 4.0 - 0.5625)).abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed_gamma3() {
        for d in 2..=3 {
            let rho = maximally_mixed(d, 1).unwrap();
            let want = gamma_brute(&rho, 3).unwrap();
            assert!((gamma3_exact(&rho) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn tallies_have_expected_shape() {
        let rows = class_tally(3).unwrap();
        assert_eq!(rows.len(), 3);
        let three = rows.iter().find(|r| r.lambda.parts() == [3]).unwrap();
        assert_eq!(three.t_lambda, 6);
        let rows4 = class_tally(4).unwrap();
        let r31 = rows4.iter().find(|r| r.lambda.parts() == [3, 1]).unwrap();
        let mut counts: Vec<(u64, (usize, usize))> =
            r31.subtypes.iter().map(|s| (s.count, s.weights)).collect();
        counts.sort();
        assert_eq!(counts, vec![(2, (2, 2)), (2, (3, 2))]);
        for t in 3..=6 {
            let total: u64 = class_tally(t).unwrap().iter().map(|r| r.lambda_count).sum();
            let bell = [0, 1, 2, 5, 15, 52, 203][t];
            assert_eq!(total, bell);
        }
    }

    #[test]
    fn low_rank_orders_are_bounded() {
        // observed maxima over this seed: 3.61 and 4.97
        const G3_OVER_D2: f64 = 6.0;
        const G4_OVER_D: f64 = 14.0;
        let mut rng = RandomSource::new(1);
        for d in 2..=30 {
            let rho = random_mixed(d, 1, 2, &mut rng).unwrap();
            let df = d as f64;
            assert!(
                gamma_brute(&rho, 3).unwrap() / (df * df) < G3_OVER_D2,
                "d={d}"
            );
            assert!(gamma_brute(&rho, 4).unwrap() / df < G4_OVER_D, "d={d}");
            assert!((gamma3_exact(&rho) - gamma_brute(&rho, 3).unwrap()).abs() < 1e-8 * df * df);
        }
    }

    #[test]
    fn symmetry_group_orders() {
        let orders: Vec<usize> = (3..=6).map(|t| q_symmetries(t).unwrap().len()).collect();
        assert_eq!(orders, vec![6, 4, 8, 72]);
    }
}
