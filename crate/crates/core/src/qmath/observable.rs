//! ±1-valued observables (Hermitian involutions) bound to a subsystem.

use super::linalg::{self, c, cmatrix, CMatrix, C64, ONE, ZERO};
use super::state::STATE_TOL;
use crate::error::{check_range, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    subsystem: usize,
}

impl Observable {
    /// Checks Hermiticity and `M·M = I`, both within 1e-10.
    pub fn new(matrix: CMatrix, subsystem: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(Error::InvalidDims(format!(
                "observable must be square of size ≥ 2, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = linalg::hermiticity_error(&matrix);
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let inv = linalg::involution_error(&matrix);
        if inv > STATE_TOL {
            return Err(Error::NotInvolution(inv));
        }
        Ok(Self { matrix, subsystem })
    }

    /// Qubit observable `n·σ` for a unit Bloch vector `n`.
    pub fn from_bloch(n: [f64; 3], subsystem: usize) -> Result<Self> {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !(len > 0.0) {
            return Err(Error::InvalidInput("zero Bloch vector".into()));
        }
        let [x, y, z] = n.map(|v| v / len);
        Self::new(
            cmatrix(&[&[c(z, 0.0), c(x, -y)], &[c(x, y), c(-z, 0.0)]]),
            subsystem,
        )
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn subsystem(&self) -> usize {
        self.subsystem
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Same matrix, bound to a different subsystem.
    pub fn on(&self, subsystem: usize) -> Self {
        Self { matrix: self.matrix.clone(), subsystem }
    }

    /// `U M U†`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        let m = u * &self.matrix * u.adjoint();
        Self::new((&m + m.adjoint()) * c(0.5, 0.0), self.subsystem)
    }

    /// Bloch vector of a traceless qubit observable.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(Error::InvalidDims("Bloch vector needs a qubit observable".into()));
        }
        let m = &self.matrix;
        Ok([m[(1, 0)].re, m[(1, 0)].im, m[(0, 0)].re])
    }
}

pub fn pauli_x() -> CMatrix {
    cmatrix(&[&[ZERO, ONE], &[ONE, ZERO]])
}

pub fn pauli_y() -> CMatrix {
    cmatrix(&[&[ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), ZERO]])
}

pub fn pauli_z() -> CMatrix {
    cmatrix(&[&[ONE, ZERO], &[ZERO, c(-1.0, 0.0)]])
}

/// The named single-qubit observables, all on subsystem 0.
#[derive(Debug, Clone)]
pub struct StandardObservables {
    pub x: Observable,
    pub y: Observable,
    pub z: Observable,
    /// `(X + Y)/√2`.
    pub p: Observable,
}

pub fn standard_observables() -> StandardObservables {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let p = (pauli_x() + pauli_y()) * c(s, 0.0);
    StandardObservables {
        x: Observable { matrix: pauli_x(), subsystem: 0 },
        y: Observable { matrix: pauli_y(), subsystem: 0 },
        z: Observable { matrix: pauli_z(), subsystem: 0 },
        p: Observable::new(p, 0).expect("P is an involution"),
    }
}

/// Perturbed Bob observables `(B0, B1)` on subsystem 1.
///
/// `B0 → X` and `B1 → Y` as `eps_prime → 0`.
pub fn deviated_observables(eps_prime: f64) -> Result<(Observable, Observable)> {
    check_range("eps_prime", eps_prime, "(0, 1)", eps_prime > 0.0 && eps_prime < 1.0)?;
    let s = eps_prime.sqrt();
    let r = (1.0 - eps_prime).sqrt();
    let b0 = cmatrix(&[&[c(-s, 0.0), c(r, 0.0)], &[c(r, 0.0), c(s, 0.0)]]);
    let b1 = cmatrix(&[&[ZERO, c(s, -r)], &[c(s, r), ZERO]]);
    Ok((Observable::new(b0, 1)?, Observable::new(b1, 1)?))
}

/// `((I + M)/2, (I − M)/2)`.
pub fn eigenprojectors(obs: &Observable) -> (CMatrix, CMatrix) {
    let id = linalg::identity(obs.dim());
    let half = c(0.5, 0.0);
    ((&id + &obs.matrix) * half, (&id - &obs.matrix) * half)
}

/// `|A0·A1 + A1·A0|` entrywise maximum.
pub fn anticommutator_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let ac = a * b + b * a;
    ac.iter().map(|z: &C64| z.norm()).fold(0.0, f64::max)
}
