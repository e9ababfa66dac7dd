//! Qudit density matrices, state factories, Haar sampling, Born-rule measurement
//! and the exact oracles used to validate the estimators.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_eigenvalues, kron, partial_trace_a, partial_trace_b,
    partial_transpose_b, trace_product, CMatrix, ONE, ZERO,
};
use crate::permgroup::{Permutation, MAX_T};

/// Largest `D^t` for which the dense t-copy contraction is attempted.
pub const DENSE_CAP: usize = 4096;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;
const PURE_TOL: f64 = 1e-10;

/// Spectral form `rho = c I + sum_k w_k v_k v_k^dagger` with few terms.
#[derive(Clone, Debug)]
pub struct Spectral {
    /// Most frequent eigenvalue.
    pub offset: f64,
    /// `(lambda_k - offset, v_k)` for the remaining eigenpairs.
    pub terms: Vec<(f64, DVector<Complex64>)>,
}

/// A validated density matrix with optional bipartition `(d_A, d_B)`.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    data: CMatrix,
    bipartition: Option<(usize, usize)>,
    spectral: OnceLock<Spectral>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data && self.bipartition == other.bipartition
    }
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    dims: usize,
    bipartition: Option<[usize; 2]>,
    entries: Vec<[f64; 2]>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(data: CMatrix, bipartition: Option<(usize, usize)>) -> Result<Self> {
        let n = data.nrows();
        if data.ncols() != n || n == 0 {
            return Err(Error::InvalidState(format!(
                "{}x{} is not square",
                n,
                data.ncols()
            )));
        }
        if let Some((da, db)) = bipartition {
            if da * db != n {
                return Err(Error::DimensionMismatch(format!("{da}*{db} != {n}")));
            }
        }
        let herm = data
            .iter()
            .zip(data.adjoint().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {herm:e})"
            )));
        }
        let tr = data.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&data)[0];
        if min < PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self {
            data,
            bipartition,
            spectral: OnceLock::new(),
        })
    }

    /// Pure state `|psi><psi|` from a (not necessarily normalized) vector.
    pub fn from_pure(
        psi: &DVector<Complex64>,
        bipartition: Option<(usize, usize)>,
    ) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi.unscale(norm);
        Self::new(&v * v.adjoint(), bipartition)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn bipartition(&self) -> Option<(usize, usize)> {
        self.bipartition
    }

    /// Bipartition or [`Error::MissingBipartition`].
    pub fn dims(&self) -> Result<(usize, usize)> {
        self.bipartition.ok_or(Error::MissingBipartition)
    }

    pub fn with_bipartition(mut self, da: usize, db: usize) -> Result<Self> {
        if da * db != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{da}*{db} != {}",
                self.dim()
            )));
        }
        self.bipartition = Some((da, db));
        Ok(self)
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.data, &self.data).re
    }

    pub fn is_pure(&self) -> bool {
        self.purity() > 1.0 - PURE_TOL
    }

    /// Cached spectral form, grouping the most frequent eigenvalue into the offset.
    pub fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| {
            let (vals, vecs) = hermitian_eigen(&self.data);
            let tol = 1e-13;
            let offset = vals
                .iter()
                .map(|&v| (v, vals.iter().filter(|&&w| (w - v).abs() < tol).count()))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.partial_cmp(&a.0).unwrap()))
                .map(|x| x.0)
                .unwrap_or(0.0);
            let terms = vals
                .iter()
                .enumerate()
                .filter(|(_, &v)| (v - offset).abs() >= tol)
                .map(|(k, &v)| (v - offset, vecs.column(k).into_owned()))
                .collect();
            Spectral { offset, terms }
        })
    }

    /// Marginal on A.
    pub fn reduced_a(&self) -> Result<CMatrix> {
        let (da, db) = self.dims()?;
        Ok(partial_trace_b(&self.data, da, db))
    }

    /// Marginal on B.
    pub fn reduced_b(&self) -> Result<CMatrix> {
        let (da, db) = self.dims()?;
        Ok(partial_trace_a(&self.data, da, db))
    }

    /// JSON container with dims, bipartition and row-major `[re, im]` entries.
    pub fn to_json(&self) -> String {
        let n = self.dim();
        let entries = (0..n * n)
            .map(|k| {
                let z = self.data[(k / n, k % n)];
                [z.re, z.im]
            })
            .collect();
        let file = StateFile {
            dims: n,
            bipartition: self.bipartition.map(|(a, b)| [a, b]),
            entries,
        };
        serde_json::to_string(&file).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: StateFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let n = file.dims;
        if file.entries.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: file.entries.len(),
            });
        }
        let data = CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = file.entries[i * n + j];
            Complex64::new(re, im)
        });
        Self::new(data, file.bipartition.map(|[a, b]| (a, b)))
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "local dimension d={d} must be at least 2"
        )));
    }
    Ok(())
}

/// Maximally entangled vector `(1/sqrt d) sum_s |s,s>`.
pub fn bell_vector(d: usize) -> DVector<Complex64> {
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    DVector::from_fn(d * d, |k, _| if k / d == k % d { amp } else { ZERO })
}

/// `Psi_+` on `C^d (x) C^d`.
pub fn bell_state(d: usize) -> Result<DensityMatrix> {
    check_d(d)?;
    DensityMatrix::from_pure(&bell_vector(d), Some((d, d)))
}

/// `(1 - p) Psi_+ + p I / D`.
pub fn noisy_bell(d: usize, p: f64) -> Result<DensityMatrix> {
    check_d(d)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "noise p={p} outside [0,1]"
        )));
    }
    let v = bell_vector(d);
    let n = d * d;
    let m = (&v * v.adjoint()) * Complex64::from(1.0 - p)
        + CMatrix::identity(n, n) * Complex64::from(p / n as f64);
    DensityMatrix::new(m, Some((d, d)))
}

/// `|0,0><0,0|` on `C^d (x) C^d`.
pub fn pure_product(d: usize) -> Result<DensityMatrix> {
    check_d(d)?;
    let mut v = DVector::from_element(d * d, ZERO);
    v[0] = ONE;
    DensityMatrix::from_pure(&v, Some((d, d)))
}

/// `I / (d_A d_B)`.
pub fn maximally_mixed(da: usize, db: usize) -> Result<DensityMatrix> {
    let n = da * db;
    DensityMatrix::new(
        CMatrix::identity(n, n) * Complex64::from(1.0 / n as f64),
        Some((da, db)),
    )
}

/// `rho_A (x) rho_B`.
pub fn product_state(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(kron(a.data(), b.data()), Some((a.dim(), b.dim())))
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random pure state on `C^D` (normalized complex Gaussian vector).
pub fn haar_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DensityMatrix> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension 0".into()));
    }
    let v = DVector::from_fn(dim, |_, _| complex_gaussian(rng));
    DensityMatrix::from_pure(&v, None)
}

/// Random mixed state `G G^dagger / Tr` with `G` a `D x rank` Ginibre matrix.
pub fn random_mixed<R: Rng + ?Sized>(
    da: usize,
    db: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let n = da * db;
    if rank == 0 {
        return Err(Error::InvalidParameter("rank 0".into()));
    }
    let g = CMatrix::from_fn(n, rank, |_, _| complex_gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m.map(|z| z / tr), Some((da, db)))
}

/// Haar-random unitary: Ginibre, QR, then `Q diag(R_ii / |R_ii|)`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `rho^{T_B}`.
pub fn partial_transpose(rho: &DensityMatrix) -> Result<CMatrix> {
    let (da, db) = rho.dims()?;
    Ok(partial_transpose_b(rho.data(), da, db))
}

fn power_trace(m: &CMatrix, k: usize) -> f64 {
    match k {
        0 => m.nrows() as f64,
        1 => m.trace().re,
        _ => {
            let mut p = m.clone();
            for _ in 1..k - 1 {
                p = &p * m;
            }
            trace_product(&p, m).re
        }
    }
}

/// `Tr rho^k`.
pub fn moment(rho: &DensityMatrix, k: usize) -> f64 {
    power_trace(rho.data(), k)
}

/// `Tr[(rho^{T_B})^k]`.
pub fn pt_moment(rho: &DensityMatrix, k: usize) -> Result<f64> {
    Ok(power_trace(&partial_transpose(rho)?, k))
}

/// Third negativity moment `Tr[(rho^{T_B})^3]` by direct matrix powers.
pub fn negativity_moment(rho: &DensityMatrix) -> Result<f64> {
    pt_moment(rho, 3)
}

/// Logarithmic negativity `log2 sum_k |lambda_k(rho^{T_B})|`.
pub fn log_negativity(rho: &DensityMatrix) -> Result<f64> {
    let ev = hermitian_eigenvalues(&partial_transpose(rho)?);
    Ok(ev.iter().map(|x| x.abs()).sum::<f64>().log2())
}

/// `Tr[rho_AB (rho_A (x) rho_B)]` from explicit marginals.
pub fn correlation_numerator(rho: &DensityMatrix) -> Result<f64> {
    let ra = rho.reduced_a()?;
    let rb = rho.reduced_b()?;
    Ok(trace_product(rho.data(), &kron(&ra, &rb)).re)
}

/// `F_2 = Tr[rho_AB (rho_A (x) rho_B)] / max(Tr rho_AB^2, Tr rho_A^2 Tr rho_B^2)`.
pub fn fidelity_f2(rho: &DensityMatrix) -> Result<f64> {
    let ra = rho.reduced_a()?;
    let rb = rho.reduced_b()?;
    let num = trace_product(rho.data(), &kron(&ra, &rb)).re;
    let pa = trace_product(&ra, &ra).re;
    let pb = trace_product(&rb, &rb).re;
    Ok(num / rho.purity().max(pa * pb))
}

fn check_unitary_dims(rho: &DensityMatrix, us: &[&CMatrix]) -> Result<()> {
    let total: usize = us.iter().map(|u| u.nrows()).product();
    if us.iter().any(|u| u.nrows() != u.ncols()) || total != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "unitaries of total dimension {total} for a state of dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// Applies `U_1 (x) ... (x) U_m` to a vector without forming the Kronecker product.
pub fn apply_local(us: &[&CMatrix], v: &DVector<Complex64>) -> DVector<Complex64> {
    let dims: Vec<usize> = us.iter().map(|u| u.nrows()).collect();
    let mut cur = v.clone();
    let mut stride_after: usize = dims.iter().product();
    let mut stride_before = 1usize;
    for (k, u) in us.iter().enumerate() {
        let dk = dims[k];
        stride_after /= dk;
        let mut next = DVector::from_element(cur.len(), ZERO);
        for hi in 0..stride_before {
            for lo in 0..stride_after {
                for i in 0..dk {
                    let mut s = ZERO;
                    for j in 0..dk {
                        s += u[(i, j)] * cur[(hi * dk + j) * stride_after + lo];
                    }
                    next[(hi * dk + i) * stride_after + lo] = s;
                }
            }
        }
        cur = next;
        stride_before *= dk;
    }
    cur
}

/// Computational-basis Born probabilities of `(U_1 (x) ... (x) U_m) rho (...)^dagger`.
pub fn born_probabilities(rho: &DensityMatrix, us: &[&CMatrix]) -> Result<Vec<f64>> {
    check_unitary_dims(rho, us)?;
    let sp = rho.spectral();
    let mut p = vec![sp.offset; rho.dim()];
    for (w, v) in &sp.terms {
        let uv = apply_local(us, v);
        for (pi, z) in p.iter_mut().zip(uv.iter()) {
            *pi += w * z.norm_sqr();
        }
    }
    Ok(clean_probabilities(p))
}

fn clean_probabilities(mut p: Vec<f64>) -> Vec<f64> {
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        for x in p.iter_mut() {
            *x /= s;
        }
    }
    p
}

/// Bell-basis vector `Psi_{u,v} = (I (x) X^u Z^v) Psi_+`, amplitude `e^{2 pi i v l/d}/sqrt d` at `(l, l+u)`.
pub fn bell_basis_vector(d: usize, u: usize, v: usize) -> DVector<Complex64> {
    let mut out = DVector::from_element(d * d, ZERO);
    let norm = 1.0 / (d as f64).sqrt();
    for l in 0..d {
        out[l * d + (l + u) % d] =
            Complex64::from_polar(norm, 2.0 * PI * (v * l) as f64 / d as f64);
    }
    out
}

/// Bell-measurement probabilities after `U_A (x) U_B`, indexed by label `u d + v`.
pub fn bell_probabilities(rho: &DensityMatrix, ua: &CMatrix, ub: &CMatrix) -> Result<Vec<f64>> {
    let (da, db) = rho.dims()?;
    if da != db || ua.nrows() != da || ub.nrows() != db {
        return Err(Error::DimensionMismatch(
            "Bell measurement needs d_A = d_B matching the unitaries".into(),
        ));
    }
    let d = da;
    let sp = rho.spectral();
    let mut p = vec![sp.offset; d * d];
    let norm = 1.0 / (d as f64).sqrt();
    let phases: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(norm, -2.0 * PI * k as f64 / d as f64))
        .collect();
    for (w, vec) in &sp.terms {
        let x = apply_local(&[ua, ub], vec);
        for u in 0..d {
            for v in 0..d {
                let amp: Complex64 = (0..d)
                    .map(|l| phases[(v * l) % d] * x[l * d + (l + u) % d])
                    .sum();
                p[u * d + v] += w * amp.norm_sqr();
            }
        }
    }
    Ok(clean_probabilities(p))
}

/// Multinomial histogram of `n` draws from `probs` (sequential binomials).
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let c = Binomial::new(remaining, q)
            .expect("valid binomial")
            .sample(rng);
        counts[k] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Schmidt coefficients squared of a pure bipartite state.
pub fn schmidt_spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let (da, db) = rho.dims()?;
    let (vals, vecs) = hermitian_eigen(rho.data());
    let top = (0..vals.len())
        .max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
        .unwrap();
    let psi = vecs.column(top);
    let m = CMatrix::from_fn(da, db, |a, b| psi[a * db + b]);
    Ok(m.singular_values().iter().map(|s| s * s).collect())
}

/// Schmidt-path value `chi(Psi, beta) = prod_cycles Tr Lambda^{len}`.
pub fn schmidt_chi(lambda: &[f64], beta: &Permutation) -> f64 {
    beta.cycles()
        .iter()
        .map(|c| lambda.iter().map(|l| l.powi(c.len() as i32)).sum::<f64>())
        .product()
}

/// `Tr[(W_pi^A (x) W_sigma^B) rho^{(x) t}]`.
///
/// Pure states use the Schmidt formula over the cycles of `sigma pi^{-1}`; mixed
/// states fall back to the dense t-copy contraction when `D^t <= DENSE_CAP`.
pub fn permutation_expectation(
    rho: &DensityMatrix,
    pi: &Permutation,
    sigma: &Permutation,
) -> Result<Complex64> {
    rho.dims()?;
    let t = pi.size();
    if sigma.size() != t {
        return Err(Error::SizeMismatch {
            expected: t,
            got: sigma.size(),
        });
    }
    if t == 0 || t > MAX_T {
        return Err(Error::CopiesOutOfRange(t));
    }
    if rho.is_pure() {
        let lambda = schmidt_spectrum(rho)?;
        let beta = sigma.compose(&pi.inverse());
        return Ok(Complex64::from(schmidt_chi(&lambda, &beta)));
    }
    permutation_expectation_dense(rho, pi, sigma)
}

/// Dense t-copy contraction `sum_y prod_k rho[y_k, (a_{pi(k)}, b_{sigma(k)})]`.
pub fn permutation_expectation_dense(
    rho: &DensityMatrix,
    pi: &Permutation,
    sigma: &Permutation,
) -> Result<Complex64> {
    let (_, db) = rho.dims()?;
    let t = pi.size();
    let n = rho.dim();
    let total = n.checked_pow(t as u32).filter(|&x| x <= DENSE_CAP);
    let Some(total) = total else {
        return Err(Error::CapExceeded {
            dim: n.saturating_pow(t as u32),
            cap: DENSE_CAP,
        });
    };
    let data: Vec<Complex64> = (0..n * n).map(|k| rho.data()[(k / n, k % n)]).collect();
    let pm = pi.mapping();
    let sm = sigma.mapping();
    let mut y = vec![0usize; t];
    let mut acc = ZERO;
    for _ in 0..total {
        let mut prod = ONE;
        for k in 0..t {
            let col = (y[pm[k]] / db) * db + y[sm[k]] % db;
            prod *= data[y[k] * n + col];
            if prod == ZERO {
                break;
            }
        }
        acc += prod;
        for slot in y.iter_mut() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    fn perm(t: usize, s: &str) -> Permutation {
        Permutation::parse(t, s).unwrap()
    }

    #[test]
    fn noisy_bell_limits() {
        let m = noisy_bell(3, 1.0).unwrap();
        assert!((m.data() - CMatrix::identity(9, 9) * Complex64::from(1.0 / 9.0)).norm() < 1e-15);
        assert!((noisy_bell(3, 0.0).unwrap().purity() - 1.0).abs() < 1e-14);
        assert!(noisy_bell(2, 1.5).is_err());
        assert!(bell_state(1).is_err());
    }

    #[test]
    fn bell_negativity_values() {
        let b = bell_state(2).unwrap();
        assert!((negativity_moment(&b).unwrap() - 0.25).abs() < 1e-14);
        assert!((log_negativity(&b).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            log_negativity(&maximally_mixed(2, 3).unwrap())
                .unwrap()
                .abs()
                < 1e-12
        );
        let no_split = DensityMatrix::new(b.data().clone(), None).unwrap();
        assert_eq!(partial_transpose(&no_split), Err(Error::MissingBipartition));
    }

    #[test]
    fn validation_rejects_bad_states() {
        let mut m = CMatrix::identity(2, 2) * Complex64::from(0.5);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m, None).is_err());
        let neg = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from(1.5),
            Complex64::from(-0.5),
        ]));
        assert!(DensityMatrix::new(neg, None).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2, 2), None).is_err());
    }

    #[test]
    fn moments_and_pt_purity() {
        let mut rng = RandomSource::new(3);
        let r = random_mixed(2, 3, 3, &mut rng).unwrap();
        assert!((moment(&r, 1) - 1.0).abs() < 1e-12);
        assert!((pt_moment(&r, 2).unwrap() - moment(&r, 2)).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        let mut rng = RandomSource::new(4);
        let a = random_mixed(2, 1, 2, &mut rng).unwrap();
        let b = random_mixed(3, 1, 2, &mut rng).unwrap();
        let p = product_state(&a, &b).unwrap();
        assert!((fidelity_f2(&p).unwrap() - 1.0).abs() < 1e-12);
        for d in 2..5 {
            let v = correlation_numerator(&bell_state(d).unwrap()).unwrap();
            assert!((v - 1.0 / (d * d) as f64).abs() < 1e-14);
        }
        let nb = noisy_bell(3, 0.3).unwrap();
        let ra = partial_trace_b(nb.data(), 3, 3);
        let direct = (nb.data() * kron(&ra, &ra)).trace().re;
        assert!((correlation_numerator(&nb).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = RandomSource::new(5);
        for d in 1..6 {
            let u = haar_unitary(d, &mut rng);
            assert!(crate::linalg::unitarity_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn haar_first_moment() {
        let mut rng = RandomSource::new(6);
        let n = 20_000;
        let d = 3;
        let vals: Vec<f64> = (0..n)
            .map(|_| haar_unitary(d, &mut rng)[(0, 0)].norm_sqr())
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0 / d as f64).abs() < 5.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn born_matches_dense_conjugation() {
        let mut rng = RandomSource::new(7);
        let r = random_mixed(3, 3, 2, &mut rng).unwrap();
        let ua = haar_unitary(3, &mut rng);
        let ub = haar_unitary(3, &mut rng);
        let u = kron(&ua, &ub);
        let dense = &u * r.data() * u.adjoint();
        let p = born_probabilities(&r, &[&ua, &ub]).unwrap();
        for i in 0..9 {
            assert!((p[i] - dense[(i, i)].re).abs() < 1e-12);
        }
        let pg = born_probabilities(&r, &[&u]).unwrap();
        for i in 0..9 {
            assert!((pg[i] - p[i]).abs() < 1e-12);
        }
        assert!(born_probabilities(&r, &[&ua]).is_err());
    }

    #[test]
    fn born_identity_on_diagonal_state() {
        let diag = CMatrix::from_diagonal(&DVector::from_vec(
            vec![0.1, 0.2, 0.3, 0.4]
                .into_iter()
                .map(Complex64::from)
                .collect(),
        ));
        let r = DensityMatrix::new(diag, Some((2, 2))).unwrap();
        let i2 = CMatrix::identity(2, 2);
        let p = born_probabilities(&r, &[&i2, &i2]).unwrap();
        for (k, x) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            assert!((p[k] - x).abs() < 1e-14);
        }
    }

    #[test]
    fn bell_probabilities_examples() {
        for d in 2..5 {
            let id = CMatrix::identity(d, d);
            let p = bell_probabilities(&bell_state(d).unwrap(), &id, &id).unwrap();
            assert!((p[0] - 1.0).abs() < 1e-12);
            let mut rng = RandomSource::new(d as u64);
            let r = random_mixed(d, d, 2, &mut rng).unwrap();
            let ua = haar_unitary(d, &mut rng);
            let ub = haar_unitary(d, &mut rng);
            let rot = kron(&ua, &ub) * r.data() * kron(&ua, &ub).adjoint();
            let q = bell_probabilities(&r, &ua, &ub).unwrap();
            for u in 0..d {
                for v in 0..d {
                    let psi = bell_basis_vector(d, u, v);
                    let direct = (psi.adjoint() * &rot * &psi)[(0, 0)].re;
                    assert!((q[u * d + v] - direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampling_examples() {
        let mut rng = RandomSource::new(8);
        assert_eq!(
            sample_counts(&[1.0, 0.0, 0.0], 17, &mut rng),
            vec![17, 0, 0]
        );
        assert_eq!(sample_counts(&[0.5, 0.5], 0, &mut rng), vec![0, 0]);
        let n = 1_000_000u64;
        let c = sample_counts(&[0.25; 4], n, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), n);
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        assert!(c
            .iter()
            .all(|&x| (x as f64 - n as f64 / 4.0).abs() < 5.0 * sd));
        let a = sample_counts(&[0.2, 0.3, 0.5], 1000, &mut RandomSource::new(9));
        let b = sample_counts(&[0.2, 0.3, 0.5], 1000, &mut RandomSource::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_expectation_examples() {
        let c = perm(3, "(1,2,3)");
        let cinv = perm(3, "(1,3,2)");
        for d in 2..5 {
            let v = permutation_expectation(&bell_state(d).unwrap(), &c, &cinv).unwrap();
            assert!((v.re - 1.0 / (d * d) as f64).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
        let mut rng = RandomSource::new(10);
        let r = random_mixed(2, 2, 3, &mut rng).unwrap();
        let same = permutation_expectation(&r, &c, &c).unwrap();
        assert!((same.re - moment(&r, 3)).abs() < 1e-12);
        let neg = permutation_expectation(&r, &c, &cinv).unwrap();
        assert!((neg.re - negativity_moment(&r).unwrap()).abs() < 1e-12);
        let big = noisy_bell(3, 0.2).unwrap();
        assert!(matches!(
            permutation_expectation(&big, &Permutation::identity(4), &Permutation::identity(4)),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn schmidt_and_dense_paths_agree() {
        let mut rng = RandomSource::new(11);
        let psi = haar_pure(4, &mut rng)
            .unwrap()
            .with_bipartition(2, 2)
            .unwrap();
        for t in 2..=4 {
            let g = crate::permgroup::enumerate_group(t).unwrap();
            for p in &g {
                for s in &g {
                    let a = permutation_expectation(&psi, p, s).unwrap();
                    let b = permutation_expectation_dense(&psi, p, s).unwrap();
                    assert!((a - b).norm() < 1e-10, "{p} {s}");
                }
            }
        }
    }
}
