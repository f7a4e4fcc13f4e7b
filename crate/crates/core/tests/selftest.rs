use proptest::prelude::*;
use steerkit::qmath::linalg::{c, CVector};
use steerkit::qmath::random::{random_observable, random_state, random_unitary};
use steerkit::qmath::{standard_observables, stream_rng, Observable, StateVector};
use steerkit::selftest::*;

/// Distance from `phi` to `e^{iα}(cos t, e^{ip} sin t) ⊗ ψ₊` in the (A, B, anc) layout.
fn product_distance(phi: &StateVector, t: f64, p: f64, alpha: f64) -> f64 {
    let junk = [c(t.cos(), 0.0), c(0.0, p).exp() * t.sin()];
    let bell = StateVector::psi_plus();
    let ph = c(0.0, alpha).exp();
    let mut r = phi.amplitudes().clone();
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                r[(a * 2 + b) * 2 + k] -= ph * junk[b] * bell.amplitudes()[2 * a + k];
            }
        }
    }
    r.norm()
}

/// Grid search followed by a shrinking pattern search over (t, p, α).
fn brute_force_distance(phi: &StateVector) -> f64 {
    let n = 48;
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in 0..=n {
        for j in 0..n {
            for k in 0..n {
                let x = [
                    std::f64::consts::FRAC_PI_2 * i as f64 / n as f64,
                    std::f64::consts::TAU * j as f64 / n as f64,
                    std::f64::consts::TAU * k as f64 / n as f64,
                ];
                let d = product_distance(phi, x[0], x[1], x[2]);
                if d < best.0 {
                    best = (d, x);
                }
            }
        }
    }
    let mut step = 0.1;
    while step > 1e-12 {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut x = best.1;
                x[axis] += sign * step;
                let d = product_distance(phi, x[0], x[1], x[2]);
                if d < best.0 {
                    best = (d, x);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best.0
}

#[test]
fn witness_distance_matches_brute_force_search() {
    let s = standard_observables();
    for eps in [0.02, 0.2, 0.002] {
        let w = tightness_witness(eps).unwrap();
        let phi = apply_isometry(&w.psi, &w.b0, &w.b1).unwrap();
        let ext = extract_distance(&phi).unwrap();
        let oracle = brute_force_distance(&phi);
        assert!((ext.distance - oracle).abs() < 1e-9, "eps={eps}: {} vs {oracle}", ext.distance);
        let r = certify(&w.psi, &s.x, &s.y, &w.b0, &w.b1, Gamma2Convention::Measured).unwrap();
        assert!(r.bound_holds);
    }
}

#[test]
fn witness_tightness_band() {
    let s = standard_observables();
    for eps in [0.0002, 0.002, 0.02, 0.2] {
        let w = tightness_witness(eps).unwrap();
        for conv in [Gamma2Convention::Tight, Gamma2Convention::Loose, Gamma2Convention::Measured] {
            let r = certify(&w.psi, &s.x, &s.y, &w.b0, &w.b1, conv).unwrap();
            assert!((r.saturation - (2.0 - eps)).abs() < 1e-9);
            let ratio = r.extracted_distance / eps.sqrt();
            assert!((0.3..=13.0).contains(&ratio), "eps={eps} ratio={ratio}");
            assert!(r.bound_holds, "{conv:?} eps={eps}");
            assert!(r.extracted_distance > 0.0);
        }
    }
}

#[test]
fn witness_certificate_lower_edge() {
    let s = standard_observables();
    let w = tightness_witness(0.02).unwrap();
    let r = certify(&w.psi, &s.x, &s.y, &w.b0, &w.b1, Gamma2Convention::Measured).unwrap();
    assert!(r.extracted_distance >= 0.3 * 0.02f64.sqrt());
}

#[test]
fn junk_unitary_invariance() {
    let mut rng = stream_rng(17, 0);
    for _ in 0..50 {
        let phi = random_state(&[2, 3, 2], &mut rng).unwrap();
        let u = random_unitary(3, &mut rng);
        let rotated = phi.evolve_local(&u, 1).unwrap();
        let d0 = extract_distance(&phi).unwrap().distance;
        let d1 = extract_distance(&rotated).unwrap().distance;
        assert!((d0 - d1).abs() < 1e-12);
    }
}

#[test]
fn isometry_preserves_norm_on_random_inputs() {
    let mut rng = stream_rng(18, 0);
    for i in 0..1000 {
        let db = [2, 3, 4][i % 3];
        let psi = random_state(&[2, db], &mut rng).unwrap();
        let xb = random_observable(db, 1, &mut rng).unwrap();
        let yb = random_observable(db, 1, &mut rng).unwrap();
        // Unnormalized output norm, computed from the defining formula.
        let y = psi.apply_local(yb.matrix(), 1).unwrap();
        let plus = (psi.amplitudes() + &y) * c(0.5, 0.0);
        let minus_in = (psi.amplitudes() - &y) * c(0.0, 0.5);
        let minus = StateVector::normalized(minus_in.clone(), vec![2, db])
            .map(|m| m.apply_local(xb.matrix(), 1).unwrap() * c(minus_in.norm(), 0.0))
            .unwrap_or_else(|_| CVector::zeros(2 * db));
        let norm = (plus.norm_squared() + minus.norm_squared()).sqrt();
        assert!((norm - 1.0).abs() < 1e-10);
        let phi = apply_isometry(&psi, &xb, &yb).unwrap();
        assert!((phi.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn general_observables_relabeling() {
    let s = standard_observables();
    let w = tightness_witness(0.02).unwrap();
    for conv in [Gamma2Convention::Measured, Gamma2Convention::Tight] {
        let direct = certify(&w.psi, &s.x, &s.y, &w.b0, &w.b1, conv).unwrap();
        let general = general_observable_selftest(&w.psi, &s.x, &s.y, &w.b0, &w.b1, conv).unwrap();
        assert_eq!(
            serde_json::to_string(&direct).unwrap(),
            serde_json::to_string(&general).unwrap()
        );
    }
}

#[test]
fn general_observables_honest_zx() {
    let s = standard_observables();
    let bell = StateVector::psi_plus();
    let b0 = honest_partner(&s.z).unwrap();
    let b1 = honest_partner(&s.x).unwrap();
    let r = general_observable_selftest(&bell, &s.z, &s.x, &b0, &b1, Gamma2Convention::Measured)
        .unwrap();
    assert!(r.epsilon < 1e-12, "{}", r.epsilon);
    assert!(r.extracted_distance < 1e-10);
}

#[test]
fn general_observables_xz_witness() {
    let s = standard_observables();
    let eps = 0.02;
    let w = tightness_witness(eps).unwrap();
    // Conjugate the witness by the rotation taking (X, Z) to (X, Y).
    let u = alignment_unitary(&s.x, &s.z).unwrap();
    let psi = w.psi.evolve_local(&u.adjoint(), 0).unwrap();
    let r = general_observable_selftest(&psi, &s.x, &s.z, &w.b0, &w.b1, Gamma2Convention::Measured)
        .unwrap();
    assert!((r.saturation - (2.0 - eps)).abs() < 1e-10);
    let za = Observable::new(s.z.matrix().clone(), 0).unwrap();
    let direct = saturation(&psi, &s.x, &za, &w.b0, &w.b1).unwrap();
    assert!((direct - (2.0 - eps)).abs() < 1e-10);
}

#[test]
fn general_rejects_commuting_pair() {
    let s = standard_observables();
    let bell = StateVector::psi_plus();
    let err = general_observable_selftest(&bell, &s.x, &s.x, &s.x.on(1), &s.x.on(1), Gamma2Convention::Measured);
    assert!(matches!(err, Err(steerkit::Error::NotAnticommuting(_))));
}

#[test]
fn small_soundness_sweep_is_clean_and_deterministic() {
    let a = soundness_sweep(300, 1.9, 5).unwrap();
    let b = soundness_sweep(300, 1.9, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.violations, 0);
    assert!(a.min_observed_saturation >= 1.9);
}

#[test]
fn certify_is_deterministic() {
    let mut rng = stream_rng(3, 3);
    let s = standard_observables();
    let psi = random_state(&[2, 2], &mut rng).unwrap();
    let xb = random_observable(2, 1, &mut rng).unwrap();
    let yb = random_observable(2, 1, &mut rng).unwrap();
    let a = certify(&psi, &s.x, &s.y, &xb, &yb, Gamma2Convention::Measured).unwrap();
    let b = certify(&psi, &s.x, &s.y, &xb, &yb, Gamma2Convention::Measured).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measured_bound_always_holds(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let s = standard_observables();
        let (psi, xb, yb) = sample_near_ideal(&mut rng).unwrap();
        let r = certify(&psi, &s.x, &s.y, &xb, &yb, Gamma2Convention::Measured).unwrap();
        prop_assert!(r.bound_holds);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&r.saturation));
    }

    #[test]
    fn isometry_norm_proptest(seed in any::<u64>(), db in 2usize..5) {
        let mut rng = stream_rng(seed, 1);
        let psi = random_state(&[2, db], &mut rng).unwrap();
        let xb = random_observable(db, 1, &mut rng).unwrap();
        let yb = random_observable(db, 1, &mut rng).unwrap();
        let phi = apply_isometry(&psi, &xb, &yb).unwrap();
        prop_assert!((phi.norm() - 1.0).abs() < 1e-10);
        let d = extract_distance(&phi).unwrap().distance;
        prop_assert!((0.0..=2.0).contains(&d));
    }
}
