//! Projective measurement of ±1 observables with Born-rule sampling.

use rand::Rng;

use super::linalg::{self, c, CMatrix};
use super::observable::{eigenprojectors, Observable};
use super::state::{DensityMatrix, StateVector};
use crate::error::{Error, Result};

/// Branches with probability below this are treated as impossible.
pub const BRANCH_EPS: f64 = 1e-14;

fn check_target(dims: &[usize], obs: &Observable) -> Result<()> {
    let sub = obs.subsystem();
    if sub >= dims.len() {
        return Err(Error::InvalidSubsystem { index: sub, count: dims.len() });
    }
    if dims[sub] != obs.dim() {
        return Err(Error::DimensionMismatch { expected: dims[sub], found: obs.dim() });
    }
    Ok(())
}

/// Selects an outcome from `p_plus`, never returning a negligible branch.
fn pick(p_plus: f64, rng: &mut impl Rng) -> i8 {
    let p_plus = p_plus.clamp(0.0, 1.0);
    if p_plus < BRANCH_EPS {
        -1
    } else if 1.0 - p_plus < BRANCH_EPS {
        1
    } else if rng.random::<f64>() < p_plus {
        1
    } else {
        -1
    }
}

/// `(Tr(P₊ρ), Tr(P₋ρ))` for `obs` on its subsystem.
pub fn outcome_probabilities(state: &DensityMatrix, obs: &Observable) -> Result<(f64, f64)> {
    check_target(state.dims(), obs)?;
    let (pp, _) = eigenprojectors(obs);
    let proj = linalg::apply_local_left(state.matrix(), &pp, state.dims(), obs.subsystem());
    let p_plus = proj.trace().re.clamp(0.0, 1.0);
    Ok((p_plus, 1.0 - p_plus))
}

/// Measures `obs` on `state`; returns the outcome and `P ρ P / Tr(P ρ)`.
pub fn measure(
    state: &DensityMatrix,
    obs: &Observable,
    rng: &mut impl Rng,
) -> Result<(i8, DensityMatrix)> {
    let (p_plus, _) = outcome_probabilities(state, obs)?;
    let outcome = pick(p_plus, rng);
    let post = project(state, obs, outcome)?;
    Ok((outcome, post))
}

/// Post-measurement state for a fixed `outcome`.
pub fn project(state: &DensityMatrix, obs: &Observable, outcome: i8) -> Result<DensityMatrix> {
    check_target(state.dims(), obs)?;
    let (pp, pm) = eigenprojectors(obs);
    let p: CMatrix = if outcome > 0 { pp } else { pm };
    let mut m = linalg::conjugate_local(state.matrix(), &p, state.dims(), obs.subsystem());
    let prob = m.trace().re;
    if prob < BRANCH_EPS {
        return Err(Error::Protocol(format!("outcome {outcome} has probability {prob:e}")));
    }
    m.unscale_mut(prob);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    Ok(DensityMatrix::from_parts_unchecked(m, state.dims().to_vec()))
}

/// Pure-state version of [`measure`].
pub fn measure_pure(
    state: &StateVector,
    obs: &Observable,
    rng: &mut impl Rng,
) -> Result<(i8, StateVector)> {
    check_target(state.dims(), obs)?;
    let (pp, pm) = eigenprojectors(obs);
    let plus = state.apply_local(&pp, obs.subsystem())?;
    let p_plus = plus.norm_squared();
    let outcome = pick(p_plus, rng);
    let v = if outcome > 0 {
        plus
    } else {
        state.apply_local(&pm, obs.subsystem())?
    };
    Ok((outcome, StateVector::normalized(v, state.dims().to_vec())?))
}
