use std::f64::consts::FRAC_1_SQRT_2;

use proptest::prelude::*;
use steerkit::qmath::linalg::{c, hermitian_eigen, identity, max_abs_diff, partial_trace_matrix, CMatrix};
use steerkit::qmath::random::{random_density, random_state, random_unitary};
use steerkit::qmath::{stream_rng, tensor_product, DensityMatrix, StateVector};
use steerkit::steerability::*;

/// `Tr_A((E ⊗ I)|ψ₊⟩⟨ψ₊|)` by explicit partial trace.
fn steered(e: &CMatrix) -> CMatrix {
    let bell = StateVector::psi_plus().to_density();
    let op = steerkit::qmath::linalg::kron(e, &identity(2));
    partial_trace_matrix(&(op * bell.matrix()), &[2, 2], &[1])
}

/// `|v⟩⟨v|/2` for a real unit vector.
fn half_projector(v: [f64; 2]) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| c(0.5 * v[i] * v[j], 0.0))
}

#[test]
fn random_density_matrices_agree() {
    let mut rng = stream_rng(60, 0);
    for i in 0..1000 {
        let rho = random_density(&[2, 2], 1 + i % 4, &mut rng).unwrap();
        assert!(entanglement_crosscheck(&rho, DEFAULT_TOL).unwrap());
    }
}

#[test]
fn random_pure_states_agree() {
    let mut rng = stream_rng(61, 0);
    for _ in 0..300 {
        let a = random_state(&[2], &mut rng).unwrap();
        let b = random_state(&[2], &mut rng).unwrap();
        let prod = tensor_product(&a, &b).unwrap().to_density();
        let v = check_totally_steerable(&prod, DEFAULT_TOL).unwrap();
        assert!(!v.totally_steerable);
        assert!(entanglement_crosscheck(&prod, DEFAULT_TOL).unwrap());
        let ent = random_state(&[2, 2], &mut rng).unwrap().to_density();
        assert!(entanglement_crosscheck(&ent, DEFAULT_TOL).unwrap());
    }
}

#[test]
fn local_unitaries_of_bell_are_totally_steerable() {
    let mut rng = stream_rng(62, 0);
    for _ in 0..100 {
        let u = random_unitary(2, &mut rng);
        let v = random_unitary(2, &mut rng);
        let rho = StateVector::psi_plus()
            .evolve_local(&u, 0)
            .unwrap()
            .evolve_local(&v, 1)
            .unwrap()
            .to_density();
        let verdict = check_totally_steerable(&rho, DEFAULT_TOL).unwrap();
        assert!(verdict.totally_steerable);
        assert!(entanglement_crosscheck(&rho, DEFAULT_TOL).unwrap());
    }
}

#[test]
fn werner_grid_agrees() {
    for i in 0..=10 {
        let p = i as f64 / 10.0;
        let rho = werner(p).unwrap();
        assert!(entanglement_crosscheck(&rho, DEFAULT_TOL).unwrap());
        let v = check_totally_steerable(&rho, DEFAULT_TOL).unwrap();
        assert_eq!(v.totally_steerable, i == 10);
        assert!((v.purity - (p * p + (1.0 - p * p) / 4.0)).abs() < 1e-12);
    }
}

#[test]
fn family_draws_are_bell_states() {
    let rows = family_sweep(1000, 63, DEFAULT_TOL).unwrap();
    for r in &rows {
        assert!((r.purity - 1.0).abs() < 1e-10);
        assert!((r.schmidt1 - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((r.schmidt2 - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(r.totally_steerable && r.crosscheck_agrees);
    }
    let csv = family_csv(&rows[..3]);
    assert!(csv.starts_with("re_f,im_f,phi1,phi2,purity,schmidt1,schmidt2,verdict\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn family_draws_are_valid_density_matrices() {
    let mut rng = stream_rng(64, 0);
    for _ in 0..1000 {
        let p = SteerableForm::positive_branch(random_family_parameter(&mut rng));
        let m = general_form_matrix(&p);
        assert!(max_abs_diff(&m, &m.adjoint()) < 1e-12);
        assert!((m.trace().re - 1.0).abs() < 1e-12);
        assert!(hermitian_eigen(&m).values[0] >= -1e-10);
        assert!(general_form(&p).is_ok());
    }
}

#[test]
fn raw_family_purity_identity_holds_everywhere() {
    let mut rng = stream_rng(65, 0);
    for _ in 0..1000 {
        let f = random_family_parameter(&mut rng);
        let p = SteerableForm::new(
            f,
            rand::Rng::random::<f64>(&mut rng) * std::f64::consts::TAU,
            rand::Rng::random::<f64>(&mut rng) * std::f64::consts::TAU,
        );
        let m = general_form_matrix(&p);
        let purity: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        assert!((purity - 1.0).abs() < 1e-10);
    }
}

#[test]
fn off_branch_parameters_are_rejected() {
    // Tr ρ² = 1 but the matrix has a negative eigenvalue here.
    let p = SteerableForm::new(c(1.0, 1.0), 0.7, 2.1);
    let min = hermitian_eigen(&general_form_matrix(&p)).values[0];
    assert!(min < -0.1);
    assert!(general_form(&p).is_err());
}

#[test]
fn ensembles_reproduced() {
    let h = FRAC_1_SQRT_2;
    let plus = half_projector([h, h]);
    let minus = half_projector([h, -h]);
    let zero = half_projector([1.0, 0.0]);
    let one = half_projector([0.0, 1.0]);
    for targets in [vec![plus, minus], vec![zero, one]] {
        let e = steer_to_ensemble(&targets, 1e-12).unwrap();
        let sum = e.iter().fold(CMatrix::zeros(2, 2), |a, b| a + b);
        assert!(max_abs_diff(&sum, &identity(2)) < 1e-10);
        for (ea, sa) in e.iter().zip(&targets) {
            assert!(max_abs_diff(&steered(ea), sa) < 1e-10);
            // Projective: E² = E.
            assert!(max_abs_diff(&(ea * ea), ea) < 1e-10);
        }
    }
}

#[test]
fn purification_choice_does_not_matter() {
    let mut rng = stream_rng(66, 0);
    for _ in 0..100 {
        let rho = random_density(&[2, 2], 2, &mut rng).unwrap();
        let pur = canonical_purification(&rho).unwrap();
        let u = random_unitary(4, &mut rng);
        let rotated = pur.evolve_local(&u, 2).unwrap();
        let a = factorization_residual(&pur).unwrap();
        let b = factorization_residual(&rotated).unwrap();
        assert!((a - b).abs() < 1e-10);
        let back = rotated.to_density().partial_trace(&[0, 1]).unwrap();
        assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-12);
    }
}

#[test]
fn verdict_json() {
    let v = check_totally_steerable(&werner(0.5).unwrap(), DEFAULT_TOL).unwrap();
    let j = serde_json::to_value(&v).unwrap();
    for k in ["rho_b_maximally_mixed", "completely_steerable", "totally_steerable", "purity", "schmidt_coefficients"] {
        assert!(j.get(k).is_some());
    }
    let _ = DensityMatrix::maximally_mixed(&[2]).unwrap();
}

fn random_ensemble(n: usize, rng: &mut impl rand::Rng) -> Vec<CMatrix> {
    // Split I/2 into n positive parts via a random POVM built from a unitary.
    let u = random_unitary(n.max(2), rng);
    (0..n)
        .map(|k| {
            let v = CMatrix::from_fn(2, 1, |i, _| u[(k % u.nrows(), i)]);
            let w = if n == 2 { c(0.5, 0.0) } else { c(0.5 / (n as f64 / 2.0), 0.0) };
            &v * v.adjoint() * w
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn povm_outputs_valid(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let targets = random_ensemble(2, &mut rng);
        let e = steer_to_ensemble(&targets, 1e-10).unwrap();
        let sum = e.iter().fold(CMatrix::zeros(2, 2), |a, b| a + b);
        prop_assert!(max_abs_diff(&sum, &identity(2)) < 1e-10);
        for (ea, sa) in e.iter().zip(&targets) {
            prop_assert!(hermitian_eigen(ea).values[0] >= -1e-10);
            prop_assert!(max_abs_diff(&steered(ea), sa) < 1e-10);
        }
    }
}
