//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` dense matrices over `Complex64`. Multi-partite
//! index layout is row-major over the subsystem list: the first subsystem is
//! the most significant digit of a basis index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest total Hilbert-space dimension any routine will build (2^12).
pub const MAX_DIM: usize = 1 << 12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a square matrix from rows of complex entries.
pub fn cmatrix(rows: &[&[C64]]) -> CMatrix {
    let n = rows.len();
    CMatrix::from_fn(n, n, |i, j| rows[i][j])
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `|M·M - I|` entrywise maximum.
pub fn involution_error(m: &CMatrix) -> f64 {
    max_abs_diff(&(m * m), &identity(m.nrows()))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Embeds a single-subsystem operator into the full space `dims`.
pub fn embed(op: &CMatrix, dims: &[usize], sub: usize) -> CMatrix {
    let before: usize = dims[..sub].iter().product();
    let after: usize = dims[sub + 1..].iter().product();
    kron(&kron(&identity(before), op), &identity(after))
}

/// Left-multiplies the rows of `m` by `op` acting on subsystem `sub` only.
///
/// Runs in `O(dim² · d_sub)` without materializing the embedded operator.
pub fn apply_local_left(m: &CMatrix, op: &CMatrix, dims: &[usize], sub: usize) -> CMatrix {
    let ds = dims[sub];
    let lo: usize = dims[sub + 1..].iter().product();
    let dim: usize = dims.iter().product();
    debug_assert_eq!(m.nrows(), dim);
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for row in 0..dim {
        let x = (row / lo) % ds;
        let base = row - x * lo;
        for y in 0..ds {
            let w = op[(x, y)];
            if w == ZERO {
                continue;
            }
            let src = base + y * lo;
            for col in 0..m.ncols() {
                out[(row, col)] += w * m[(src, col)];
            }
        }
    }
    out
}

/// Right-multiplies the columns of `m` by `op†` acting on subsystem `sub`.
pub fn apply_local_right_adjoint(
    m: &CMatrix,
    op: &CMatrix,
    dims: &[usize],
    sub: usize,
) -> CMatrix {
    apply_local_left(&m.adjoint(), op, dims, sub).adjoint()
}

/// `op ρ op†` with `op` acting on one subsystem.
pub fn conjugate_local(m: &CMatrix, op: &CMatrix, dims: &[usize], sub: usize) -> CMatrix {
    apply_local_right_adjoint(&apply_local_left(m, op, dims, sub), op, dims, sub)
}

/// Applies a single-subsystem operator to a state vector.
pub fn apply_local_vec(v: &CVector, op: &CMatrix, dims: &[usize], sub: usize) -> CVector {
    let ds = dims[sub];
    let lo: usize = dims[sub + 1..].iter().product();
    let mut out = CVector::zeros(v.len());
    for idx in 0..v.len() {
        let x = (idx / lo) % ds;
        let base = idx - x * lo;
        let mut acc = ZERO;
        for y in 0..ds {
            acc += op[(x, y)] * v[base + y * lo];
        }
        out[idx] = acc;
    }
    out
}

/// Partial trace of a matrix over every subsystem not listed in `keep`.
///
/// `keep` must be sorted and free of duplicates; the result lists the kept
/// subsystems in their original relative order.
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let n = dims.len();
    let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |sel: &[usize], sel_dims: &[usize], idx: usize| -> usize {
        let mut rem = idx;
        let mut off = 0;
        for (pos, &s) in sel.iter().enumerate().rev() {
            let d = sel_dims[pos];
            off += (rem % d) * strides[s];
            rem /= d;
        }
        off
    };
    let kept_off: Vec<usize> = (0..dk).map(|i| offsets(keep, &kept_dims, i)).collect();
    let traced_off: Vec<usize> = (0..dt).map(|i| offsets(&traced, &traced_dims, i)).collect();

    let mut out = CMatrix::zeros(dk, dk);
    for (i, &ri) in kept_off.iter().enumerate() {
        for (j, &rj) in kept_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_off {
                acc += m[(ri + t, rj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation first removes the phase of the pivot with a diagonal
/// unitary, then applies a real Givens rotation. Converges quadratically;
/// residuals are at machine precision for the small dimensions used here.
pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    let mut a = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v = identity(n);
    let scale = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();

    if scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-17 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= 1e-300 || mag <= 1e-18 * scale {
                        continue;
                    }
                    // Phase step: scale column/row q so the pivot becomes real.
                    let u = apq / mag;
                    let ubar = u.conj();
                    for k in 0..n {
                        a[(k, q)] *= ubar;
                    }
                    for k in 0..n {
                        a[(q, k)] *= u;
                    }
                    for k in 0..n {
                        v[(k, q)] *= ubar;
                    }
                    // Real Jacobi rotation.
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (2.0 * mag);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let cs = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * cs;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * cs - akq * sn;
                        a[(k, q)] = akp * sn + akq * cs;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = apk * cs - aqk * sn;
                        a[(q, k)] = apk * sn + aqk * cs;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * cs - vkq * sn;
                        v[(k, q)] = vkp * sn + vkq * cs;
                    }
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    HermitianEigen { values, vectors }
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let eig = hermitian_eigen(m);
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(k);
        let w = f(lam);
        out += col * col.adjoint() * w;
    }
    out
}

/// `exp(i·H)` for Hermitian `H`.
pub fn unitary_from_hermitian(h: &CMatrix) -> CMatrix {
    hermitian_function(h, |lam| C64::from_polar(1.0, lam))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    // Eigenvalues only, so nalgebra's tridiagonal QR is enough here.
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().map(|x| x.abs()).sum()
}
