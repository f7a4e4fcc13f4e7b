//! Total steerability of two-qubit states and its equivalence with maximal
//! entanglement.
//!
//! Complete steerability by Bob is tested through a purification
//! `|ψ_ABC⟩`: the state is completely steerable iff `ρ_BC = ρ_B ⊗ ρ_C`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qmath::linalg::{self, c, hermitian_eigen, CMatrix, CVector, C64};
use crate::qmath::{pauli_x, stream_rng, trace_distance, DensityMatrix, StateVector};

/// Default verdict tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

const EIG_FLOOR: f64 = 1e-13;

/// Parameters `(f, φ₁, φ₂)` of the maximally entangled matrix family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteerableForm {
    pub f: C64,
    pub phi1: f64,
    pub phi2: f64,
}

impl SteerableForm {
    pub fn new(f: C64, phi1: f64, phi2: f64) -> Self {
        Self { f, phi1: phi1.rem_euclid(TAU), phi2: phi2.rem_euclid(TAU) }
    }

    /// The member of the family that is a valid state for a given `f`:
    /// `φ₂ = 0` and `φ₁ = π + 2·arg f`. It is the projector onto
    /// `(f|00⟩ + |01⟩ + |10⟩ − f*|11⟩)/√(2(|f|²+1))`.
    pub fn positive_branch(f: C64) -> Self {
        Self::new(f, PI + 2.0 * f.arg(), 0.0)
    }
}

/// The raw 4×4 family matrix, without validation.
///
/// It always has unit trace, is Hermitian and satisfies `Tr ρ² = 1`, but it is
/// positive semi-definite only for `f = 0` or on the positive branch.
pub fn general_form_matrix(p: &SteerableForm) -> CMatrix {
    let f = p.f;
    let fc = f.conj();
    let m2 = c(f.norm_sqr(), 0.0);
    let e1 = C64::from_polar(1.0, p.phi1);
    let e2 = C64::from_polar(1.0, p.phi2);
    let one = c(1.0, 0.0);
    let rows: [[C64; 4]; 4] = [
        [m2, f, f, e1 * m2],
        [fc, one, e2, -f],
        [fc, e2.conj(), one, -f],
        [e1.conj() * m2, -fc, -fc, m2],
    ];
    let scale = 1.0 / (2.0 * (f.norm_sqr() + 1.0));
    CMatrix::from_fn(4, 4, |i, j| rows[i][j] * scale)
}

/// The family matrix as a validated density matrix.
///
/// Fails with [`Error::NotPositive`] off the positive branch.
pub fn general_form(p: &SteerableForm) -> Result<DensityMatrix> {
    DensityMatrix::new(general_form_matrix(p), vec![2, 2])
}

/// `p·ψ₊ + (1−p)·I/4`.
pub fn werner(p: f64) -> Result<DensityMatrix> {
    check_range("p", p, "[0, 1]", (0.0..=1.0).contains(&p))?;
    let bell = StateVector::psi_plus().to_density();
    let mixed = DensityMatrix::maximally_mixed(&[2, 2])?;
    DensityMatrix::mixture(&[(p, &bell), (1.0 - p, &mixed)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerabilityVerdict {
    pub rho_b_maximally_mixed: bool,
    pub completely_steerable: bool,
    pub totally_steerable: bool,
    pub purity: f64,
    /// Descending Schmidt coefficients; empty unless the state is pure.
    pub schmidt_coefficients: Vec<f64>,
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dims() != [2, 2] {
        return Err(Error::InvalidDims(format!("expected a two-qubit state, got {:?}", rho.dims())));
    }
    Ok(())
}

/// `Σ_k √λ_k |e_k⟩_AB |k⟩_C` from the eigendecomposition of `ρ_AB`.
pub fn canonical_purification(rho: &DensityMatrix) -> Result<StateVector> {
    check_two_qubit(rho)?;
    let eig = hermitian_eigen(rho.matrix());
    let n = rho.dim();
    let mut amps = CVector::zeros(n * n);
    for (k, &lam) in eig.values.iter().enumerate() {
        // Eigenvalues at roundoff level would become 1e-8 amplitudes.
        let w = if lam > EIG_FLOOR { lam.sqrt() } else { 0.0 };
        for i in 0..n {
            amps[i * n + k] = eig.vectors[(i, k)] * w;
        }
    }
    StateVector::normalized(amps, vec![2, 2, n])
}

/// Frobenius norm of `ρ_BC − ρ_B ⊗ ρ_C` for a purification with dims `[2, 2, d_C]`.
pub fn factorization_residual(purification: &StateVector) -> Result<f64> {
    if purification.dims().len() != 3 {
        return Err(Error::InvalidDims(format!("expected (A, B, C), got {:?}", purification.dims())));
    }
    let full = purification.to_density();
    let bc = full.partial_trace(&[1, 2])?;
    let b = bc.partial_trace(&[0])?;
    let cc = bc.partial_trace(&[1])?;
    Ok((bc.matrix() - linalg::kron(b.matrix(), cc.matrix())).norm())
}

fn schmidt_of_pure(rho: &DensityMatrix) -> Vec<f64> {
    let eig = hermitian_eigen(rho.matrix());
    let v = eig.vectors.column(3).into_owned();
    // Reduced state of the dominant eigenvector on Alice.
    let m = CMatrix::from_fn(2, 2, |i, j| v[2 * i] * v[2 * j].conj() + v[2 * i + 1] * v[2 * j + 1].conj());
    let mut s: Vec<f64> = hermitian_eigen(&m).values.iter().map(|x| x.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn rho_b_is_half(rho: &DensityMatrix, tol: f64) -> Result<bool> {
    let b = rho.partial_trace(&[1])?;
    Ok(trace_distance(&b, &DensityMatrix::maximally_mixed(&[2])?)? <= tol)
}

/// Total-steerability verdict for a two-qubit state.
pub fn check_totally_steerable(rho: &DensityMatrix, tol: f64) -> Result<SteerabilityVerdict> {
    check_two_qubit(rho)?;
    let rho_b_maximally_mixed = rho_b_is_half(rho, tol)?;
    let completely_steerable = factorization_residual(&canonical_purification(rho)?)? <= tol;
    let purity = rho.purity();
    let schmidt_coefficients = if purity >= 1.0 - tol { schmidt_of_pure(rho) } else { Vec::new() };
    Ok(SteerabilityVerdict {
        rho_b_maximally_mixed,
        completely_steerable,
        totally_steerable: rho_b_maximally_mixed && completely_steerable,
        purity,
        schmidt_coefficients,
    })
}

/// Whether the steerability verdict agrees with the direct maximal
/// entanglement test (`Tr ρ² ≥ 1 − tol` and `TD(ρ_B, I/2) ≤ tol`).
pub fn entanglement_crosscheck(rho: &DensityMatrix, tol: f64) -> Result<bool> {
    let verdict = check_totally_steerable(rho, tol)?;
    let direct = rho.purity() >= 1.0 - tol && rho_b_is_half(rho, tol)?;
    Ok(verdict.totally_steerable == direct)
}

/// Alice's POVM steering Bob's half of `ψ₊` into the ensemble `targets`.
///
/// Each target must be positive and they must sum to `I/2`; the answer is
/// `E_a = 2·X·σ_aᵀ·X`.
pub fn steer_to_ensemble(targets: &[CMatrix], tol: f64) -> Result<Vec<CMatrix>> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let mut sum = CMatrix::zeros(2, 2);
    for t in targets {
        if t.nrows() != 2 || t.ncols() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: t.nrows() });
        }
        let herm = linalg::hermiticity_error(t);
        if herm > tol {
            return Err(Error::NotHermitian(herm));
        }
        let min = hermitian_eigen(t).values[0];
        if min < -tol {
            return Err(Error::NotPositive(min));
        }
        sum += t;
    }
    let dev = linalg::max_abs_diff(&sum, &(linalg::identity(2) * c(0.5, 0.0)));
    if dev > tol {
        return Err(Error::InvalidInput(format!("ensemble sums to I/2 only within {dev:e}")));
    }
    let x = pauli_x();
    Ok(targets.iter().map(|t| &x * t.transpose() * &x * c(2.0, 0.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub re_f: f64,
    pub im_f: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub purity: f64,
    pub schmidt1: f64,
    pub schmidt2: f64,
    pub totally_steerable: bool,
    pub crosscheck_agrees: bool,
}

/// Random `f` for family draws: Gaussian modulus scale, uniform phase.
pub fn random_family_parameter(rng: &mut impl Rng) -> C64 {
    let r: f64 = rng.sample::<f64, _>(StandardNormal).abs() * 2.0;
    C64::from_polar(r, rng.random::<f64>() * TAU)
}

/// `n` positive-branch family draws; draw `i` uses stream `i` of `seed`.
pub fn family_sweep(n: usize, seed: u64, tol: f64) -> Result<Vec<FamilyRow>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let p = SteerableForm::positive_branch(random_family_parameter(&mut rng));
            let rho = general_form(&p)?;
            let v = check_totally_steerable(&rho, tol)?;
            let s = v.schmidt_coefficients.clone();
            Ok(FamilyRow {
                re_f: p.f.re,
                im_f: p.f.im,
                phi1: p.phi1,
                phi2: p.phi2,
                purity: v.purity,
                schmidt1: s.first().copied().unwrap_or(f64::NAN),
                schmidt2: s.get(1).copied().unwrap_or(f64::NAN),
                totally_steerable: v.totally_steerable,
                crosscheck_agrees: entanglement_crosscheck(&rho, tol)?,
            })
        })
        .collect()
}

/// CSV for [`family_sweep`] rows.
pub fn family_csv(rows: &[FamilyRow]) -> String {
    let mut out = String::from("re_f,im_f,phi1,phi2,purity,schmidt1,schmidt2,verdict\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.re_f, r.im_f, r.phi1, r.phi2, r.purity, r.schmidt1, r.schmidt2, r.totally_steerable
        ));
    }
    out
}
