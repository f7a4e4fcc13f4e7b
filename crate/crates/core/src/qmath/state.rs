//! Pure and mixed states with explicit subsystem dimension lists.

use super::linalg::{
    self, c, hermitian_eigen, kron, kron_vec, partial_trace_matrix, CMatrix, CVector, C64,
    MAX_DIM,
};
use crate::error::{Error, Result};

/// Numerical tolerance used by the state invariants.
pub const STATE_TOL: f64 = 1e-10;

fn validate_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidDims("empty subsystem list".into()));
    }
    if let Some(d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::InvalidDims(format!("subsystem dimension {d} < 2")));
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&t| t <= MAX_DIM)
        .ok_or_else(|| Error::ScaleExceeded(format!("total dimension of {dims:?} exceeds {MAX_DIM}")))?;
    Ok(total)
}

fn validate_keep(keep: &[usize], count: usize) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::InvalidInput("partial trace must keep at least one subsystem".into()));
    }
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if let Some(&index) = k.iter().find(|&&i| i >= count) {
        return Err(Error::InvalidSubsystem { index, count });
    }
    Ok(k)
}

/// Kronecker composition shared by pure and mixed states.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

/// `a ⊗ b` with concatenated subsystem dimensions.
pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: CVector,
    dims: Vec<usize>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        let total = validate_dims(&dims)?;
        if amps.len() != total {
            return Err(Error::DimensionMismatch { expected: total, found: amps.len() });
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amps, dims })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = amps.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Self::new(amps.unscale(norm), dims)
    }

    pub fn from_slice(amps: &[C64], dims: &[usize]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(amps), dims.to_vec())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dims: &[usize], index: usize) -> Result<Self> {
        let total = validate_dims(dims)?;
        if index >= total {
            return Err(Error::DimensionMismatch { expected: total, found: index });
        }
        let mut amps = CVector::zeros(total);
        amps[index] = c(1.0, 0.0);
        Ok(Self { amps, dims: dims.to_vec() })
    }

    /// `(|01⟩ + |10⟩)/√2`.
    pub fn psi_plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = CVector::from_column_slice(&[c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]);
        Self { amps, dims: vec![2, 2] }
    }

    pub(crate) fn from_parts_unchecked(amps: CVector, dims: Vec<usize>) -> Self {
        Self { amps, dims }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same(other)?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Euclidean distance `‖self − other‖` (no phase optimization).
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok((&self.amps - &other.amps).norm())
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            mat: &self.amps * self.amps.adjoint(),
            dims: self.dims.clone(),
        }
    }

    /// Applies `op` to subsystem `sub`; the result is renormalized only if
    /// `op` is unitary, so callers applying projectors get raw vectors.
    pub fn apply_local(&self, op: &CMatrix, sub: usize) -> Result<CVector> {
        self.check_sub(sub, op)?;
        Ok(linalg::apply_local_vec(&self.amps, op, &self.dims, sub))
    }

    /// Applies a unitary to one subsystem, keeping the result a state.
    pub fn evolve_local(&self, u: &CMatrix, sub: usize) -> Result<Self> {
        let amps = self.apply_local(u, sub)?;
        Self::new(amps, self.dims.clone())
    }

    pub(crate) fn check_sub(&self, sub: usize, op: &CMatrix) -> Result<()> {
        let count = self.dims.len();
        if sub >= count {
            return Err(Error::InvalidSubsystem { index: sub, count });
        }
        if op.nrows() != self.dims[sub] || op.ncols() != self.dims[sub] {
            return Err(Error::DimensionMismatch { expected: self.dims[sub], found: op.nrows() });
        }
        Ok(())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let dims: Vec<usize> = self.dims.iter().chain(&other.dims).copied().collect();
        validate_dims(&dims)?;
        Ok(Self { amps: kron_vec(&self.amps, &other.amps), dims })
    }
}

/// A density operator on a multi-partite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (all to 1e-10).
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let total = validate_dims(&dims)?;
        if mat.nrows() != total || mat.ncols() != total {
            return Err(Error::DimensionMismatch { expected: total, found: mat.nrows() });
        }
        let herm = linalg::hermiticity_error(&mat);
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = linalg::trace(&mat).re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min = hermitian_eigen(&mat).values.first().copied().unwrap_or(0.0);
        if min < -STATE_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { mat, dims })
    }

    pub(crate) fn from_parts_unchecked(mat: CMatrix, dims: Vec<usize>) -> Self {
        Self { mat, dims }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.to_density()
    }

    pub fn maximally_mixed(dims: &[usize]) -> Result<Self> {
        let total = validate_dims(dims)?;
        Ok(Self {
            mat: linalg::identity(total) * c(1.0 / total as f64, 0.0),
            dims: dims.to_vec(),
        })
    }

    /// Convex mixture `Σ pᵢ ρᵢ`; weights must be nonnegative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
        let dims = first.1.dims.clone();
        let n = first.1.dim();
        let mut mat = CMatrix::zeros(n, n);
        for (p, rho) in parts {
            if rho.dims != dims {
                return Err(Error::DimensionMismatch { expected: n, found: rho.dim() });
            }
            mat += &rho.mat * c(*p, 0.0);
        }
        Self::new(mat, dims)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Reduced state on `keep`, in the original relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let keep = validate_keep(keep, self.dims.len())?;
        let mat = partial_trace_matrix(&self.mat, &self.dims, &keep);
        Ok(Self {
            mat,
            dims: keep.iter().map(|&i| self.dims[i]).collect(),
        })
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        // Tr(ρ†ρ) = Σ|ρ_ij|², exact for Hermitian ρ.
        self.mat.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.mat).values
    }

    /// `Tr(op·ρ)` for a full-space operator.
    pub fn expectation(&self, op: &CMatrix) -> Result<C64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.nrows() });
        }
        Ok((op * &self.mat).trace())
    }

    /// `U ρ U†` with `U` acting on one subsystem.
    pub fn conjugate_local(&self, u: &CMatrix, sub: usize) -> Result<Self> {
        let count = self.dims.len();
        if sub >= count {
            return Err(Error::InvalidSubsystem { index: sub, count });
        }
        if u.nrows() != self.dims[sub] {
            return Err(Error::DimensionMismatch { expected: self.dims[sub], found: u.nrows() });
        }
        Ok(Self {
            mat: linalg::conjugate_local(&self.mat, u, &self.dims, sub),
            dims: self.dims.clone(),
        })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let dims: Vec<usize> = self.dims.iter().chain(&other.dims).copied().collect();
        validate_dims(&dims)?;
        Ok(Self { mat: kron(&self.mat, &other.mat), dims })
    }
}

/// `½ Σ|λᵢ(a − b)|`, clamped to `[0, 1]`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.check_same(b)?;
    let diff = &a.mat - &b.mat;
    Ok((0.5 * linalg::trace_norm_hermitian(&diff)).clamp(0.0, 1.0))
}

/// `√⟨φ|ρ|φ⟩`.
pub fn fidelity_with_pure(rho: &DensityMatrix, phi: &StateVector) -> Result<f64> {
    if rho.dims != phi.dims {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: phi.dim() });
    }
    let v = phi.amps.dotc(&(&rho.mat * &phi.amps));
    Ok(v.re.max(0.0).sqrt().min(1.0))
}
