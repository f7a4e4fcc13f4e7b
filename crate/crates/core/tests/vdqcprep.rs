use std::collections::HashSet;

use proptest::prelude::*;
use steerkit::qmath::linalg::kron;
use steerkit::qmath::{fidelity_with_pure, stream_rng};
use steerkit::vdqcprep::*;

fn cfg(m: usize, t: usize, server: Server) -> PrepConfig {
    PrepConfig { m, t, lambda: 10.0, eta: 0.0, server }
}

fn within_binomial(accepted: u64, runs: u64, p: f64, k_sigma: f64) -> bool {
    let sigma = (runs as f64 * p * (1.0 - p)).sqrt();
    (accepted as f64 - runs as f64 * p).abs() <= k_sigma * sigma.max(0.5)
}

/// Average over the nine bases of the Born probability that the outcome
/// product disagrees with the expected sign.
fn mismatch_oracle(server: Server) -> f64 {
    let rho = server.pair().unwrap().to_density();
    PrepBasis::ALL
        .iter()
        .map(|b| {
            let op = kron(b.observable(0).unwrap().matrix(), b.observable(1).unwrap().matrix());
            let corr = rho.expectation(&op).unwrap().re;
            (1.0 - b.expected_sign() as f64 * corr) / 2.0
        })
        .sum::<f64>()
        / 9.0
}

#[test]
fn honest_server_always_accepted() {
    let s = acceptance_experiment(&cfg(4, 44, Server::Honest), 2000, 1).unwrap();
    assert_eq!(s.accepted, 2000);
    assert_eq!(s.accepted_incorrect, 0);
}

#[test]
fn bitflip_acceptance_matches_bernoulli_product() {
    for tests in [5usize, 20] {
        let runs = 5000;
        let s = acceptance_experiment(&cfg(4, 4 + tests, Server::BitFlip { q: 0.1 }), runs, 2).unwrap();
        let p = 0.9f64.powi(tests as i32);
        assert!(within_binomial(s.accepted, runs, p, 3.0), "{tests}: {} vs {}", s.accepted, p * runs as f64);
    }
    let s = acceptance_experiment(&cfg(4, 204, Server::BitFlip { q: 0.1 }), 2000, 3).unwrap();
    assert_eq!(s.accepted, 0);
}

#[test]
fn acceptance_non_increasing_in_tests() {
    let runs = 4000;
    let mut prev = 1.0;
    for tests in [1usize, 2, 4, 8, 16, 32] {
        let s = acceptance_experiment(&cfg(2, 2 + tests, Server::BitFlip { q: 0.1 }), runs, 4).unwrap();
        let slack = 3.0 * (0.25 / runs as f64).sqrt();
        assert!(s.acceptance_rate <= prev + slack, "{tests}: {} after {prev}", s.acceptance_rate);
        prev = s.acceptance_rate;
    }
}

#[test]
fn witness_server_matches_born_oracle() {
    for eps in [0.02, 0.2] {
        let server = Server::Witness { epsilon: eps };
        let p = mismatch_oracle(server);
        assert!(p > 0.0 && p < eps / 2.0);
        let tests = 30;
        let runs = 5000;
        let s = acceptance_experiment(&cfg(2, 2 + tests, server), runs, 5).unwrap();
        let want = (1.0 - p).powi(tests as i32);
        assert!(within_binomial(s.accepted, runs, want, 3.5), "{eps}: {} vs {}", s.acceptance_rate, want);
    }
}

#[test]
fn blindness_scan() {
    for (i, server) in [Server::Honest, Server::BitFlip { q: 0.05 }, Server::Witness { epsilon: 0.2 }].iter().enumerate() {
        for seed in 0..200 {
            let run = run_stage1(&cfg(5, 40, *server), &mut stream_rng(6, (i * 1000 + seed) as u64)).unwrap();
            let view = serde_json::to_value(&run.server_view).unwrap();
            let text = view.to_string();
            assert!(!text.contains("theta") && !text.contains("flip"));
            let instructed: HashSet<u64> =
                view["instructions"].as_array().unwrap().iter().map(|x| x["id"].as_u64().unwrap()).collect();
            assert_eq!(instructed.len(), 35);
            for r in run.audit.rounds.iter().filter(|r| r.kept) {
                assert!(!instructed.contains(&(r.id as u64)));
            }
            let redacted = serde_json::to_string(&run.outcome.redacted()).unwrap();
            assert!(!redacted.contains("theta") && !redacted.contains("flip") && !redacted.contains("basis"));
            // The audit trace does carry the secrets.
            if !run.outcome.aborted {
                assert!(serde_json::to_string(&run.audit).unwrap().contains("flip"));
            }
        }
    }
}

#[test]
fn kept_qubits_are_prepared_states() {
    let mut seen = HashSet::new();
    for seed in 0..300 {
        let run = run_stage1(&cfg(6, 12, Server::Honest), &mut stream_rng(7, seed)).unwrap();
        assert_eq!(run.outcome.kept.len(), 6);
        for (k, rho) in run.outcome.kept.iter().zip(&run.kept_states) {
            let f = fidelity_with_pure(rho, &k.basis.server_state(k.flip)).unwrap();
            assert!((f - 1.0).abs() <= 1e-10);
            seen.insert((format!("{:?}", k.basis), k.flip));
        }
    }
    // Every basis and both flip values occur.
    assert_eq!(seen.len(), 18);
}

#[test]
fn stage2_dishonest_frequency() {
    let run = run_stage1(&cfg(2, 4, Server::Honest), &mut stream_rng(8, 0)).unwrap();
    let mut rng = stream_rng(8, 1);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| stage2_oracle(&run.outcome, false, 0.1, &mut rng).unwrap() == Stage2Verdict::AcceptIncorrect)
        .count() as u64;
    assert!(within_binomial(hits, n, 0.1, 3.0), "{hits}");
    for _ in 0..100 {
        assert_eq!(stage2_oracle(&run.outcome, true, 0.1, &mut rng).unwrap(), Stage2Verdict::AcceptCorrect);
    }
}

#[test]
fn end_to_end_rate_within_soundness_bound() {
    for server in [Server::Witness { epsilon: 0.02 }, Server::BitFlip { q: 0.01 }] {
        let c = PrepConfig { m: 2, t: 12, lambda: 10.0, eta: 0.1, server };
        let runs = 5000;
        let s = acceptance_experiment(&c, runs, 9).unwrap();
        let slack = 3.0 * (s.soundness_report.bound * (1.0 - s.soundness_report.bound) / runs as f64).sqrt();
        assert!(s.accepted_incorrect_rate <= s.soundness_report.bound + slack, "{s:?}");
    }
}

#[test]
fn runs_are_reproducible() {
    let c = cfg(3, 30, Server::BitFlip { q: 0.02 });
    let a = run_stage1(&c, &mut stream_rng(10, 3)).unwrap();
    let b = run_stage1(&c, &mut stream_rng(10, 3)).unwrap();
    assert_eq!(a.audit, b.audit);
    let x = acceptance_experiment(&c, 300, 11).unwrap();
    let y = acceptance_experiment(&c, 300, 11).unwrap();
    assert_eq!(x, y);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn honest_never_aborts(seed in any::<u64>(), m in 1usize..8, extra in 1usize..40) {
        let run = run_stage1(&cfg(m, m + extra, Server::Honest), &mut stream_rng(seed, 0)).unwrap();
        prop_assert!(!run.outcome.aborted);
        prop_assert_eq!(run.outcome.kept.len(), m);
        prop_assert_eq!(run.outcome.test_stats.tested, extra);
        prop_assert_eq!(run.audit.rounds.len(), m + extra);
    }

    #[test]
    fn kept_len_is_m_iff_accepted(seed in any::<u64>(), q in 0.0f64..0.5) {
        let run = run_stage1(&cfg(3, 10, Server::BitFlip { q }), &mut stream_rng(seed, 0)).unwrap();
        prop_assert_eq!(run.outcome.kept.len() == 3, !run.outcome.aborted);
        prop_assert_eq!(run.outcome.aborted, run.outcome.test_stats.mismatches > 0);
    }
}
