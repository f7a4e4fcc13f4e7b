//! Self-testing of `ψ₊` from the correlator `⟨X_A X′_B + Y_A Y′_B⟩`:
//! condition norms, closeness bounds, the extraction isometry and the
//! near-optimal deviated strategy that shows the `√ε` scaling is tight.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qmath::linalg::{self, c, hermitian_eigen, CMatrix, CVector, C64};
use crate::qmath::observable::{anticommutator_error, deviated_observables, pauli_x, pauli_y};
use crate::qmath::random::{random_state, random_unitary};
use crate::qmath::rng::stream_rng;
use crate::qmath::{Observable, StateVector};

/// Slack added to the bound comparison.
pub const BOUND_SLACK: f64 = 1e-9;

/// Overlaps below this are treated as zero in [`extract_distance`].
const OVERLAP_EPS: f64 = 1e-14;

/// Bounds on the three self-testing conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfTestConditions {
    /// Bound on `‖(X_A − X′_B)ψ‖` and `‖(Y_A − Y′_B)ψ‖`.
    pub gamma1: f64,
    /// Bound on `‖(X′_B Y′_B + Y′_B X′_B)ψ‖`.
    pub gamma2: f64,
}

impl SelfTestConditions {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        check_range("gamma1", gamma1, "[0, ∞)", gamma1 >= 0.0)?;
        check_range("gamma2", gamma2, "[0, ∞)", gamma2 >= 0.0)?;
        Ok(Self { gamma1, gamma2 })
    }
}

/// How `γ₂` is obtained when building a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma2Convention {
    /// `γ₂ = 4√ε`.
    Tight,
    /// `γ₂ = 8√ε`.
    Loose,
    /// The actual anticommutator norm of Bob's observables on the state.
    #[default]
    Measured,
}

impl std::str::FromStr for Gamma2Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tight" => Ok(Self::Tight),
            "loose" => Ok(Self::Loose),
            "measured" => Ok(Self::Measured),
            other => Err(Error::InvalidInput(format!("unknown gamma2 convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub saturation: f64,
    pub epsilon: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub closeness_bound: f64,
    pub extracted_distance: f64,
    pub bound_holds: bool,
    pub gamma2_convention: Gamma2Convention,
    /// `ε ≥ 1`: the saturation-to-conditions step no longer applies.
    pub outside_regime: bool,
    /// The isometry output had no overlap with any `|junk⟩⊗ψ₊`.
    pub zero_overlap: bool,
}

/// Norms of the three conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionNorms {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

/// Result of [`extract_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub distance: f64,
    pub junk: StateVector,
    pub zero_overlap: bool,
}

fn check_layout(psi: &StateVector, alice: &[&Observable], bob: &[&Observable]) -> Result<()> {
    let dims = psi.dims();
    if dims.len() != 2 {
        return Err(Error::InvalidDims(format!(
            "expected a bipartite state (Alice, Bob), got dims {dims:?}"
        )));
    }
    if dims[0] != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: dims[0] });
    }
    for (obs, sub) in alice.iter().map(|o| (o, 0)).chain(bob.iter().map(|o| (o, 1))) {
        if obs.subsystem() != sub {
            return Err(Error::InvalidSubsystem { index: obs.subsystem(), count: 2 });
        }
        if obs.dim() != dims[sub] {
            return Err(Error::DimensionMismatch { expected: dims[sub], found: obs.dim() });
        }
    }
    Ok(())
}

fn act(psi: &StateVector, obs: &Observable) -> CVector {
    linalg::apply_local_vec(psi.amplitudes(), obs.matrix(), psi.dims(), obs.subsystem())
}

/// `(‖(X_A − X′_B)ψ‖, ‖(Y_A − Y′_B)ψ‖, ‖(X′_B Y′_B + Y′_B X′_B)ψ‖)`.
pub fn condition_norms(
    psi: &StateVector,
    xa: &Observable,
    ya: &Observable,
    xb: &Observable,
    yb: &Observable,
) -> Result<ConditionNorms> {
    check_layout(psi, &[xa, ya], &[xb, yb])?;
    let xbv = act(psi, xb);
    let ybv = act(psi, yb);
    let n1 = (act(psi, xa) - &xbv).norm();
    let n2 = (act(psi, ya) - &ybv).norm();
    let dims = psi.dims();
    let xy = linalg::apply_local_vec(&ybv, xb.matrix(), dims, 1);
    let yx = linalg::apply_local_vec(&xbv, yb.matrix(), dims, 1);
    Ok(ConditionNorms { n1, n2, n3: (xy + yx).norm() })
}

/// Signed `⟨ψ|X_A X′_B + Y_A Y′_B|ψ⟩`.
fn raw_correlator(
    psi: &StateVector,
    xa: &Observable,
    ya: &Observable,
    xb: &Observable,
    yb: &Observable,
) -> f64 {
    let dims = psi.dims();
    let xx = linalg::apply_local_vec(&act(psi, xb), xa.matrix(), dims, 0);
    let yy = linalg::apply_local_vec(&act(psi, yb), ya.matrix(), dims, 0);
    psi.amplitudes().dotc(&(xx + yy)).re
}

/// `|⟨ψ|X_A X′_B + Y_A Y′_B|ψ⟩|`.
pub fn saturation(
    psi: &StateVector,
    xa: &Observable,
    ya: &Observable,
    xb: &Observable,
    yb: &Observable,
) -> Result<f64> {
    check_layout(psi, &[xa, ya], &[xb, yb])?;
    Ok(raw_correlator(psi, xa, ya, xb, yb).abs())
}

fn closed_form_gammas(epsilon: f64, convention: Gamma2Convention) -> Result<SelfTestConditions> {
    let factor = match convention {
        Gamma2Convention::Tight => 4.0,
        Gamma2Convention::Loose => 8.0,
        Gamma2Convention::Measured => {
            return Err(Error::InvalidInput(
                "the measured convention has no closed form; use certify".into(),
            ))
        }
    };
    let e = epsilon.max(0.0);
    Ok(SelfTestConditions { gamma1: (2.0 * e).sqrt(), gamma2: factor * e.sqrt() })
}

/// `γ₁ = √(2ε)` and `γ₂ = 4√ε` or `8√ε` depending on the convention.
///
/// `ε = 0` is accepted as the limit and yields `(0, 0)`.
pub fn gammas_from_saturation(
    epsilon: f64,
    convention: Gamma2Convention,
) -> Result<SelfTestConditions> {
    check_range("epsilon", epsilon, "[0, 1)", (0.0..1.0).contains(&epsilon))?;
    closed_form_gammas(epsilon, convention)
}

/// `3γ₁ + γ₁²/4 + 2γ₂`.
pub fn selftest_bound(c: &SelfTestConditions) -> f64 {
    3.0 * c.gamma1 + c.gamma1 * c.gamma1 / 4.0 + 2.0 * c.gamma2
}

/// Loose-convention bound as a function of `ε`: `3√(2ε) + ε/2 + 16√ε`.
pub fn loose_bound(epsilon: f64) -> f64 {
    let e = epsilon.max(0.0);
    3.0 * (2.0 * e).sqrt() + e / 2.0 + 16.0 * e.sqrt()
}

/// `|+y⟩`, `|−y⟩`.
fn y_basis() -> (CVector, CVector) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (
        CVector::from_column_slice(&[c(h, 0.0), c(0.0, h)]),
        CVector::from_column_slice(&[c(h, 0.0), c(0.0, -h)]),
    )
}

/// `Φ(ψ) = ½(I + Y′)ψ ⊗ |+y⟩ + (i/2) X′(I − Y′)ψ ⊗ |−y⟩`.
///
/// The ancilla qubit is appended as the last subsystem, so the output has
/// dims `[2, d_B, 2]`.
pub fn apply_isometry(psi: &StateVector, xb: &Observable, yb: &Observable) -> Result<StateVector> {
    if psi.dims().len() != 2 {
        return Err(Error::InvalidDims(format!("expected bipartite state, got {:?}", psi.dims())));
    }
    for obs in [xb, yb] {
        if obs.subsystem() != 1 {
            return Err(Error::InvalidSubsystem { index: obs.subsystem(), count: 2 });
        }
        if obs.dim() != psi.dims()[1] {
            return Err(Error::DimensionMismatch { expected: psi.dims()[1], found: obs.dim() });
        }
    }
    let v = psi.amplitudes();
    let yv = act(psi, yb);
    let half = c(0.5, 0.0);
    let plus = (v + &yv) * half;
    let minus_part = (v - &yv) * c(0.0, 0.5);
    let minus = linalg::apply_local_vec(&minus_part, xb.matrix(), psi.dims(), 1);
    let (py, my) = y_basis();
    let out = linalg::kron_vec(&plus, &py) + linalg::kron_vec(&minus, &my);
    let dims = vec![psi.dims()[0], psi.dims()[1], 2];
    // Unit norm is exact in exact arithmetic; renormalize away rounding only.
    StateVector::normalized(out, dims)
}

/// Distance from `φ` (dims `[2, d_B, 2]`) to the nearest `|junk⟩_B ⊗ ψ₊_{A,anc}`.
///
/// The optimal junk is the normalized partial overlap `⟨ψ₊|φ⟩`; with it the
/// global phase is already aligned, so the distance is the residual norm.
pub fn extract_distance(phi: &StateVector) -> Result<Extraction> {
    let dims = phi.dims();
    if dims.len() != 3 || dims[0] != 2 || dims[2] != 2 {
        return Err(Error::InvalidDims(format!(
            "expected (Alice qubit, Bob, ancilla qubit), got {dims:?}"
        )));
    }
    let db = dims[1];
    let amp = phi.amplitudes();
    let bell = StateVector::psi_plus();
    let bell = bell.amplitudes();
    let idx = |a: usize, b: usize, k: usize| (a * db + b) * 2 + k;

    let mut w = CVector::zeros(db);
    for b in 0..db {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..2 {
            for k in 0..2 {
                acc += bell[2 * a + k].conj() * amp[idx(a, b, k)];
            }
        }
        w[b] = acc;
    }
    let wn = w.norm();
    if wn < OVERLAP_EPS {
        return Ok(Extraction {
            distance: std::f64::consts::SQRT_2,
            junk: StateVector::basis(&[db], 0)?,
            zero_overlap: true,
        });
    }
    let junk = w.unscale(wn);
    let mut residual = amp.clone();
    for a in 0..2 {
        for b in 0..db {
            for k in 0..2 {
                residual[idx(a, b, k)] -= junk[b] * bell[2 * a + k];
            }
        }
    }
    Ok(Extraction {
        distance: residual.norm(),
        junk: StateVector::from_parts_unchecked(junk, vec![db]),
        zero_overlap: false,
    })
}

/// Runs the full pipeline on a strategy and assembles the report.
///
/// A negative correlator is treated as Bob relabeling his outcomes: his
/// observables are negated before the conditions and the isometry are
/// evaluated.
pub fn certify(
    psi: &StateVector,
    xa: &Observable,
    ya: &Observable,
    xb: &Observable,
    yb: &Observable,
    convention: Gamma2Convention,
) -> Result<CertificationReport> {
    check_layout(psi, &[xa, ya], &[xb, yb])?;
    let raw = raw_correlator(psi, xa, ya, xb, yb);
    let (xb, yb) = if raw < 0.0 {
        let neg = |o: &Observable| Observable::new(-o.matrix(), 1);
        (neg(xb)?, neg(yb)?)
    } else {
        (xb.clone(), yb.clone())
    };
    let sat = raw.abs();
    let epsilon = (2.0 - sat).max(0.0);
    let gammas = match convention {
        Gamma2Convention::Measured => {
            let n = condition_norms(psi, xa, ya, &xb, &yb)?;
            SelfTestConditions { gamma1: n.n1.max(n.n2), gamma2: n.n3 }
        }
        conv => closed_form_gammas(epsilon, conv)?,
    };
    let bound = selftest_bound(&gammas);
    let ext = extract_distance(&apply_isometry(psi, &xb, &yb)?)?;
    Ok(CertificationReport {
        saturation: sat,
        epsilon,
        gamma1: gammas.gamma1,
        gamma2: gammas.gamma2,
        closeness_bound: bound,
        extracted_distance: ext.distance,
        bound_holds: ext.distance <= bound + BOUND_SLACK,
        gamma2_convention: convention,
        outside_regime: epsilon >= 1.0,
        zero_overlap: ext.zero_overlap,
    })
}

/// The deviated strategy saturating the correlator to exactly `2 − ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct TightnessWitness {
    pub psi: StateVector,
    pub b0: Observable,
    pub b1: Observable,
}

/// `ψ = (√(1+√ε′)|01⟩ + √(1−√ε′)|10⟩)/√2` with `ε′ = ε/2`, plus the matching
/// deviated Bob observables.
pub fn tightness_witness(epsilon: f64) -> Result<TightnessWitness> {
    check_range("epsilon", epsilon, "(0, 1)", epsilon > 0.0 && epsilon < 1.0)?;
    let ep = epsilon / 2.0;
    let s = ep.sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = CVector::from_column_slice(&[
        c(0.0, 0.0),
        c(h * (1.0 + s).sqrt(), 0.0),
        c(h * (1.0 - s).sqrt(), 0.0),
        c(0.0, 0.0),
    ]);
    let psi = StateVector::normalized(amps, vec![2, 2])?;
    let (b0, b1) = deviated_observables(ep)?;
    Ok(TightnessWitness { psi, b0, b1 })
}

/// Unitary `U` with `U A0 U† = X` and `U A1 U† = Y` for anticommuting qubit
/// observables.
///
/// Built from the +1 eigenvector `|v⟩` of `A2 = −i·A0·A1`: `U` sends `|v⟩`
/// to `|0⟩` and `A0|v⟩` to `|1⟩`. Returns the identity for `(X, Y)`.
pub fn alignment_unitary(a0: &Observable, a1: &Observable) -> Result<CMatrix> {
    if a0.dim() != 2 || a1.dim() != 2 {
        return Err(Error::InvalidDims("Alice observables must be single-qubit".into()));
    }
    let err = anticommutator_error(a0.matrix(), a1.matrix());
    if err > 1e-10 {
        return Err(Error::NotAnticommuting(err));
    }
    let a2 = a0.matrix() * a1.matrix() * c(0.0, -1.0);
    let eig = hermitian_eigen(&((&a2 + a2.adjoint()) * c(0.5, 0.0)));
    let v: CVector = eig.vectors.column(1).into_owned();
    let e1 = a0.matrix() * &v;
    let mut u = CMatrix::zeros(2, 2);
    for j in 0..2 {
        u[(0, j)] = v[j].conj();
        u[(1, j)] = e1[j].conj();
    }
    Ok(u)
}

/// Certification with arbitrary anticommuting Alice observables.
///
/// Alice's qubit is rotated by [`alignment_unitary`] so her observables become
/// exactly `(X, Y)`; the rest of the pipeline is [`certify`].
pub fn general_observable_selftest(
    psi: &StateVector,
    a0: &Observable,
    a1: &Observable,
    b0: &Observable,
    b1: &Observable,
    convention: Gamma2Convention,
) -> Result<CertificationReport> {
    check_layout(psi, &[a0, a1], &[b0, b1])?;
    let u = alignment_unitary(a0, a1)?;
    let rotated = StateVector::from_parts_unchecked(
        linalg::apply_local_vec(psi.amplitudes(), &u, psi.dims(), 0),
        psi.dims().to_vec(),
    );
    let x = Observable::new(pauli_x(), 0)?;
    let y = Observable::new(pauli_y(), 0)?;
    certify(&rotated, &x, &y, b0, b1, convention)
}

/// Honest Bob observable matching Alice's `a` on `ψ₊`: `X·aᵀ·X`.
pub fn honest_partner(a: &Observable) -> Result<Observable> {
    let x = pauli_x();
    Observable::new(&x * a.matrix().transpose() * &x, 1)
}

/// Aggregated outcome of a randomized soundness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub trials: usize,
    pub min_saturation: f64,
    pub seed: u64,
    pub violations: usize,
    /// Largest `extracted_distance / loose_bound` seen.
    pub max_ratio: f64,
    /// Trial index attaining `max_ratio`.
    pub worst_trial: usize,
    pub min_observed_saturation: f64,
    /// Rejected draws (saturation below the threshold) across all trials.
    pub rejected_draws: u64,
}

/// Per-trial result of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub saturation: f64,
    pub epsilon: f64,
    pub extracted_distance: f64,
    pub bound: f64,
    pub rejected_draws: u64,
}

fn hermitian_perturbation(n: usize, scale: f64, rng: &mut impl rand::Rng) -> CMatrix {
    let u = random_unitary(n, rng);
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c(rng.random::<f64>() * 2.0 - 1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let h = &u * d * u.adjoint();
    linalg::unitary_from_hermitian(&(h * c(scale, 0.0)))
}

/// Draws one near-ideal strategy `(ψ, X′, Y′)` on `[2, d_B]`.
pub fn sample_near_ideal(
    rng: &mut impl rand::Rng,
) -> Result<(StateVector, Observable, Observable)> {
    let junk_dim = if rng.random::<bool>() { 1 } else { 2 };
    let db = 2 * junk_dim;
    let dims = vec![2, db];
    // Ideal: ψ₊ on (A, B_qubit) with junk on the trailing Bob factor.
    let bell = StateVector::psi_plus();
    let junk = random_state(&[junk_dim.max(2)], rng)?;
    let mut ideal = CVector::zeros(2 * db);
    for a in 0..2 {
        for b in 0..2 {
            for j in 0..junk_dim {
                let jv = if junk_dim == 1 { c(1.0, 0.0) } else { junk.amplitudes()[j] };
                ideal[(a * 2 + b) * junk_dim + j] = bell.amplitudes()[2 * a + b] * jv;
            }
        }
    }
    let noise = random_state(&[2 * db], rng)?;
    let eta: f64 = rng.random::<f64>() * 0.3;
    let psi = StateVector::normalized(ideal + noise.amplitudes() * c(eta, 0.0), dims)?;

    let id = linalg::identity(junk_dim);
    let xb0 = linalg::kron(&pauli_x(), &id);
    let yb0 = linalg::kron(&pauli_y(), &id);
    let su = rng.random::<f64>() * 0.4;
    let sv = rng.random::<f64>() * 0.4;
    let u = hermitian_perturbation(db, su, rng);
    let v = hermitian_perturbation(db, sv, rng);
    let sym = |m: CMatrix| (&m + m.adjoint()) * c(0.5, 0.0);
    let xb = Observable::new(sym(&u * xb0 * u.adjoint()), 1)?;
    let yb = Observable::new(sym(&v * yb0 * v.adjoint()), 1)?;
    Ok((psi, xb, yb))
}

/// One accepted sweep sample for `(seed, trial)`.
pub fn sweep_trial(seed: u64, trial: u64, min_saturation: f64) -> Result<SweepSample> {
    let mut rng = stream_rng(seed, trial);
    let x = Observable::new(pauli_x(), 0)?;
    let y = Observable::new(pauli_y(), 0)?;
    let mut rejected = 0u64;
    loop {
        let (psi, xb, yb) = sample_near_ideal(&mut rng)?;
        let sat = saturation(&psi, &x, &y, &xb, &yb)?;
        if sat < min_saturation {
            rejected += 1;
            if rejected > 100_000 {
                return Err(Error::InvalidInput(format!(
                    "no draw reached saturation {min_saturation}"
                )));
            }
            continue;
        }
        let report = certify(&psi, &x, &y, &xb, &yb, Gamma2Convention::Loose)?;
        return Ok(SweepSample {
            saturation: report.saturation,
            epsilon: report.epsilon,
            extracted_distance: report.extracted_distance,
            bound: loose_bound(report.epsilon),
            rejected_draws: rejected,
        });
    }
}

/// Randomized soundness check of the loose-convention bound.
///
/// Trials run in parallel on the current rayon pool; each trial uses stream
/// `trial` of `seed`, so the report does not depend on the worker count.
pub fn soundness_sweep(trials: usize, min_saturation: f64, seed: u64) -> Result<SweepReport> {
    check_range("min_saturation", min_saturation, "(1, 2]", min_saturation > 1.0 && min_saturation <= 2.0)?;
    let samples: Vec<SweepSample> = (0..trials as u64)
        .into_par_iter()
        .map(|t| sweep_trial(seed, t, min_saturation))
        .collect::<Result<_>>()?;
    let mut report = SweepReport {
        trials,
        min_saturation,
        seed,
        violations: 0,
        max_ratio: 0.0,
        worst_trial: 0,
        min_observed_saturation: f64::INFINITY,
        rejected_draws: 0,
    };
    for (i, s) in samples.iter().enumerate() {
        if s.extracted_distance > s.bound + BOUND_SLACK {
            report.violations += 1;
        }
        let ratio = if s.bound > 0.0 { s.extracted_distance / s.bound } else { 0.0 };
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst_trial = i;
        }
        report.min_observed_saturation = report.min_observed_saturation.min(s.saturation);
        report.rejected_draws += s.rejected_draws;
    }
    Ok(report)
}
