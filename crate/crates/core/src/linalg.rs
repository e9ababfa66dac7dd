//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.trace()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut s = ZERO;
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Partial transpose on the second factor of `C^{da} (x) C^{db}`.
pub fn partial_transpose_b(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(da * db, da * db);
    for a in 0..da {
        for b in 0..db {
            for a2 in 0..da {
                for b2 in 0..db {
                    out[(a * db + b2, a2 * db + b)] = m[(a * db + b, a2 * db + b2)];
                }
            }
        }
    }
    out
}

/// Partial transpose on the first factor.
pub fn partial_transpose_a(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(da * db, da * db);
    for a in 0..da {
        for b in 0..db {
            for a2 in 0..da {
                for b2 in 0..db {
                    out[(a2 * db + b, a * db + b2)] = m[(a * db + b, a2 * db + b2)];
                }
            }
        }
    }
    out
}

/// Reduced matrix on the first factor (trace over B).
pub fn partial_trace_b(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da, da, |a, a2| {
        (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
    })
}

/// Reduced matrix on the second factor (trace over A).
pub fn partial_trace_a(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(db, db, |b, b2| {
        (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
    })
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Eigen-decomposition of a Hermitian matrix: (eigenvalues, eigenvectors as columns).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `||U^dagger U - I||_max`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    max_abs_diff(&p, &CMatrix::identity(n, n))
}

/// Matrix power by repeated multiplication.
pub fn matrix_power(m: &CMatrix, k: usize) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::identity(n, n);
    for _ in 0..k {
        out = &out * m;
    }
    out
}
