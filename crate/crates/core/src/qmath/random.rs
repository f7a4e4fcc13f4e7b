//! Random states, unitaries and observables for property tests and sweeps.

use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{c, CMatrix, CVector, C64};
use super::observable::Observable;
use super::state::{DensityMatrix, StateVector};
use crate::error::{Error, Result};

fn gaussian(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_state(dims: &[usize], rng: &mut impl Rng) -> Result<StateVector> {
    let n: usize = dims.iter().product();
    StateVector::normalized(CVector::from_fn(n, |_, _| gaussian(rng)), dims.to_vec())
}

/// Random density matrix `G G† / Tr(G G†)` with `G` an `n × rank` Ginibre matrix.
pub fn random_density(dims: &[usize], rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let n: usize = dims.iter().product();
    if rank == 0 {
        return Err(Error::InvalidInput("rank must be positive".into()));
    }
    let g = CMatrix::from_fn(n, rank, |_, _| gaussian(rng));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale_mut(tr);
    // Symmetrize away rounding before validation.
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(m, dims.to_vec())
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase fix.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random ±1 observable `U diag(±1) U†` on `sub` with at least one of each sign.
pub fn random_observable(n: usize, sub: usize, rng: &mut impl Rng) -> Result<Observable> {
    let u = random_unitary(n, rng);
    let mut signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    if n >= 2 {
        signs[0] = 1.0;
        signs[1] = -1.0;
    }
    let d = CMatrix::from_diagonal(&CVector::from_iterator(n, signs.into_iter().map(|s| c(s, 0.0))));
    let m = &u * d * u.adjoint();
    Observable::new((&m + m.adjoint()) * c(0.5, 0.0), sub)
}
