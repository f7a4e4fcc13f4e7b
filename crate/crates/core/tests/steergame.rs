use proptest::prelude::*;
use steerkit::qmath::linalg::c;
use steerkit::qmath::random::{random_density, random_state};
use steerkit::qmath::{standard_observables, stream_rng, trace_distance, DensityMatrix, Tensor};
use steerkit::selftest::{apply_isometry, extract_distance, tightness_witness};
use steerkit::steergame::*;

fn game(strategy: &str, k: usize, seed: u64) -> GameTranscript {
    let s = standard_observables();
    let strategy: ProverStrategy = strategy.parse().unwrap();
    play_game(&strategy, k, &s.x, &s.y, &mut stream_rng(seed, 0)).unwrap()
}

#[test]
fn classical_lhs_reaches_one() {
    let k = 100_000;
    let t = game("lhs", k, 3);
    let (c0, c1) = averaged_correlations(&t);
    // X rounds are deterministic (+1); Y rounds are fair coins.
    let sigma = (1.0 / (k / 2) as f64).sqrt();
    assert!((c0 - 1.0).abs() < 1e-12);
    assert!((c0 + c1 - 1.0).abs() < 3.0 * sigma, "{c0} {c1}");
}

#[test]
fn deviated_strategy_saturates_near_two_minus_eps() {
    let k = 100_000;
    let t = game("deviated:0.02", k, 4);
    let (c0, c1) = averaged_correlations(&t);
    // Per-round variance 1 − 0.99².
    let var = 1.0 - 0.99f64.powi(2);
    let sigma = (2.0 * var / (k / 2) as f64).sqrt();
    assert!((c0 + c1 - 1.98).abs() < 3.0 * sigma, "{}", c0 + c1);
}

#[test]
fn deviated_strategy_large_k_window() {
    let t = game("deviated:0.02", 1_000_000, 5);
    let (c0, c1) = averaged_correlations(&t);
    assert!((c0 + c1 - 1.98).abs() <= 0.004, "{}", c0 + c1);
}

#[test]
fn general_alice_observables_keep_statistics() {
    let s = standard_observables();
    let strategy: ProverStrategy = "deviated:0.02".parse().unwrap();
    let t = play_game(&strategy, 100_000, &s.z, &s.x, &mut stream_rng(6, 0)).unwrap();
    let (c0, c1) = averaged_correlations(&t);
    assert!((c0 + c1 - 1.98).abs() < 0.01);
}

#[test]
fn correlation_value_relation() {
    for (i, strat) in ["honest", "lhs", "bitflip:0.3", "deviated:0.2", "flip-after:3"].iter().enumerate() {
        let t = game(strat, 500, i as u64);
        let mean = t.correlations().iter().map(|&x| x as f64).sum::<f64>() / 500.0;
        let v = correlation_value(&t);
        assert!((0.0..=1.0).contains(&v));
        assert!((v - (1.0 + mean) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn azuma_tails_small_run() {
    let strategy: ProverStrategy = "bitflip:0.1".parse().unwrap();
    let cells = azuma_tail_experiment(&strategy, &[0.05, 0.1, 0.2], 1000, 500, 11).unwrap();
    for cell in &cells {
        assert!(cell.holds, "{cell:?}");
        assert!((cell.true_mean - 0.8).abs() < 1e-12);
    }
    let again = azuma_tail_experiment(&strategy, &[0.05, 0.1, 0.2], 1000, 500, 11).unwrap();
    assert_eq!(cells, again);
}

#[test]
fn typical_state_ensemble_oracle() {
    let mut rng = stream_rng(21, 0);
    let phi = random_state(&[2, 2], &mut rng).unwrap();
    let pure = phi.to_density();
    for trial in 0..20 {
        // Mostly-good ensemble with a few badly perturbed members.
        let n = 100;
        let members: Vec<DensityMatrix> = (0..n)
            .map(|i| {
                let noise = random_density(&[2, 2], 4, &mut rng).unwrap();
                let t = if i % 10 == trial % 10 { 0.6 } else { 0.002 * (i % 7) as f64 };
                DensityMatrix::mixture(&[(1.0 - t, &pure), (t, &noise)]).unwrap()
            })
            .collect();
        let w = 1.0 / n as f64;
        let parts: Vec<(f64, &DensityMatrix)> = members.iter().map(|m| (w, m)).collect();
        let avg = DensityMatrix::mixture(&parts).unwrap();
        let gamma = trace_distance(&avg, &pure).unwrap();
        let (_, dist) = typical_state_bound(gamma).unwrap();
        let far = members.iter().filter(|m| trace_distance(m, &pure).unwrap() > dist).count();
        assert!(far as f64 / n as f64 <= dist, "trial {trial}: {far} far, bound {dist}");
    }
}

#[test]
fn gentle_measurement_oracle() {
    let mut rng = stream_rng(22, 0);
    for _ in 0..300 {
        let pi = random_state(&[2], &mut rng).unwrap().to_density();
        let sigma = random_density(&[2], 2, &mut rng).unwrap();
        let noise = random_density(&[2, 2], 4, &mut rng).unwrap();
        let t: f64 = rand::Rng::random::<f64>(&mut rng) * 0.2;
        let base = pi.tensor(&sigma).unwrap();
        let rho = DensityMatrix::mixture(&[(1.0 - t, &base), (t, &noise)]).unwrap();
        let first = rho.partial_trace(&[0]).unwrap();
        let delta = (1.0 - (pi.matrix() * first.matrix()).trace().re).max(0.0);
        let target = pi.tensor(&rho.partial_trace(&[1]).unwrap()).unwrap();
        let td = trace_distance(&rho, &target).unwrap();
        assert!(td <= gentle_measurement_bound(delta).unwrap() + 1e-12, "td={td} delta={delta}");
    }
}

#[test]
fn extraction_honest_distance_is_zero() {
    let cfg = ExtractionConfig::default();
    for (i, eps) in [0.05, 0.1, 0.3].iter().enumerate() {
        let r = extraction_experiment(&ProverStrategy::honest(), *eps, &cfg, &mut stream_rng(31, i as u64))
            .unwrap();
        assert!(r.saturated);
        assert!(r.sampled_round_td.unwrap() <= 1e-10);
        assert_eq!(r.k % 2, 0);
        assert!(r.k >= required_rounds(*eps).unwrap().rounds);
    }
}

#[test]
fn extraction_deviated_matches_witness_distance() {
    let eps = 0.05;
    // Bob deviates at ε/2 so the saturation threshold 2 − ε is met.
    let strategy: ProverStrategy = format!("deviated:{}", eps / 2.0).parse().unwrap();
    let r = extraction_experiment(&strategy, eps, &ExtractionConfig::default(), &mut stream_rng(32, 0)).unwrap();
    assert!(r.saturated);
    let td = r.sampled_round_td.unwrap();
    let w = tightness_witness(eps / 2.0).unwrap();
    let dist = extract_distance(&apply_isometry(&w.psi, &w.b0, &w.b1).unwrap()).unwrap().distance;
    assert!(td > 0.0 && td <= dist + 1e-12, "td={td} dist={dist}");
    assert!(dist <= 12.3 * (eps / 2.0).sqrt());
    assert!(td <= r.reference_scale);
}

#[test]
fn extraction_one_bad_round() {
    let k = 100usize;
    let strategy: ProverStrategy = "bad-rounds:17".parse().unwrap();
    let cfg = ExtractionConfig { rounds: Some(k as u64), ..Default::default() };
    let games = 4000;
    let mut shortfall = 0.0;
    let mut bad_samples = 0;
    let mut samples = 0;
    for g in 0..games {
        let r = extraction_experiment(&strategy, 0.5, &cfg, &mut stream_rng(33, g)).unwrap();
        shortfall += 2.0 - r.correlation_sum;
        if let Some(i) = r.sampled_round {
            samples += 1;
            if i == 17 {
                bad_samples += 1;
                assert!(r.sampled_round_td.unwrap() > 0.1);
            } else {
                assert!(r.sampled_round_td.unwrap() < 1e-10);
            }
        }
    }
    // Expected shortfall is 2/K; each game contributes 0 or 2·2/K.
    let mean = shortfall / games as f64;
    let sigma = 2.0 / k as f64 / (games as f64).sqrt();
    assert!((mean - 2.0 / k as f64).abs() < 4.0 * sigma, "{mean}");
    let p = bad_samples as f64 / samples as f64;
    let sigma_p = (0.01 * 0.99 / samples as f64).sqrt();
    assert!((p - 0.01).abs() < 4.0 * sigma_p, "{p}");
}

#[test]
fn extraction_round_cap() {
    let cfg = ExtractionConfig { rounds: None, round_limit: 1000 };
    let r = extraction_experiment(&ProverStrategy::honest(), 0.01, &cfg, &mut stream_rng(0, 0));
    assert!(matches!(r, Err(steerkit::Error::ScaleExceeded(_))));
}

#[test]
fn count_monotonicity() {
    let mut prev = u64::MAX;
    for i in 1..99 {
        let r = required_rounds(i as f64 / 100.0).unwrap().rounds;
        assert!(r <= prev);
        prev = r;
    }
    let grid: Vec<f64> = (5..=50).map(|i| i as f64 / 100.0).collect();
    let rows = count_curve_data(&grid, 12.3, 12.3).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].iid_count < w[0].iid_count);
        assert!(w[1].noniid_count < w[0].noniid_count);
    }
}

#[test]
fn count_report_json() {
    let r = measurement_count(12.3, 0.1, CountSetting::Noniid).unwrap();
    let v = serde_json::to_value(r).unwrap();
    assert_eq!(v["setting"], "noniid");
    assert!(v.get("D").is_some());
    let _ = c(0.0, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn honest_always_wins(seed in any::<u64>(), half in 1usize..200) {
        let t = game("honest", 2 * half, seed);
        prop_assert_eq!(correlation_value(&t), 1.0);
        prop_assert_eq!(averaged_correlations(&t), (1.0, 1.0));
    }

    #[test]
    fn settings_are_balanced(seed in any::<u64>(), half in 1usize..300) {
        let s = sample_settings(2 * half, &mut stream_rng(seed, 0));
        prop_assert_eq!(s.iter().filter(|&&x| x == 0).count(), half);
    }

    #[test]
    fn counts_monotone_in_d(d in 0.01f64..0.9, step in 0.001f64..0.05) {
        for setting in [CountSetting::Iid, CountSetting::Noniid] {
            let a = measurement_count(12.3, d, setting).unwrap().count;
            let b = measurement_count(12.3, d + step, setting).unwrap().count;
            prop_assert!(b < a);
        }
    }
}
