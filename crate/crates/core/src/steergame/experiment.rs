//! Repeated-game experiments: Azuma tail frequencies and the single-game
//! saturation-to-closeness experiment.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{azuma_bound, required_rounds};
use super::{averaged_correlations, expected_correlation, play_game, GameTranscript, ProverStrategy};
use crate::error::{check_range, Error, Result};
use crate::qmath::{standard_observables, stream_rng, trace_distance, Observable, SimRng, StateVector};
use crate::selftest::apply_isometry;

/// Default desk-scale cap on the number of rounds in one game.
pub const DEFAULT_ROUND_LIMIT: u64 = 100_000_000;

/// Plays `reps` independent games in parallel; game `i` uses stream `i` of `seed`.
pub fn repeat_games(
    strategy: &ProverStrategy,
    k: usize,
    a0: &Observable,
    a1: &Observable,
    reps: usize,
    seed: u64,
) -> Result<Vec<GameTranscript>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|i| play_game(strategy, k, a0, a1, &mut stream_rng(seed, i)))
        .collect()
}

/// Empirical tail frequency for one `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzumaCell {
    pub delta: f64,
    pub n: usize,
    pub repetitions: usize,
    pub true_mean: f64,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Runs `reps` games of `n` rounds and counts `|mean Ĉᵢ − E[Ĉᵢ]| ≥ δ` for each `δ`.
///
/// The strategy must be i.i.d. across rounds (its expected correlation is
/// taken from round 0).
pub fn azuma_tail_experiment(
    strategy: &ProverStrategy,
    deltas: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<AzumaCell>> {
    let s = standard_observables();
    let true_mean =
        (expected_correlation(strategy, 0, 0)? + expected_correlation(strategy, 0, 1)?) / 2.0;
    let means: Vec<f64> = repeat_games(strategy, n, &s.x, &s.y, reps, seed)?
        .iter()
        .map(|t| t.correlations().iter().map(|&x| x as f64).sum::<f64>() / n as f64)
        .collect();
    deltas
        .iter()
        .map(|&delta| {
            let bound = azuma_bound(delta, n as u64)?;
            let exceedances = means.iter().filter(|m| (*m - true_mean).abs() >= delta).count();
            let frequency = exceedances as f64 / reps as f64;
            Ok(AzumaCell {
                delta,
                n,
                repetitions: reps,
                true_mean,
                exceedances,
                frequency,
                bound,
                holds: frequency <= bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Explicit round count; defaults to `required_rounds(ε)` rounded up to even.
    pub rounds: Option<u64>,
    /// Refuse games longer than this.
    pub round_limit: u64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self { rounds: None, round_limit: DEFAULT_ROUND_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub epsilon: f64,
    pub k: u64,
    pub c0: f64,
    pub c1: f64,
    /// `Ĉ⁰ + Ĉ¹`.
    pub correlation_sum: f64,
    /// `Ĉ⁰ + Ĉ¹ ≥ 2 − ε`.
    pub saturated: bool,
    pub sampled_round: Option<usize>,
    /// Trace distance of the isometry-extracted (A, ancilla) state of the
    /// sampled round to `ψ₊`.
    pub sampled_round_td: Option<f64>,
    /// `ε^{1/6}`.
    pub reference_scale: f64,
}

/// `TD(Tr_B Φ(ρ_i), ψ₊)` for round `round` of the strategy's declared states.
pub fn extracted_round_distance(strategy: &ProverStrategy, round: usize) -> Result<f64> {
    let state = strategy.pair_state(round);
    let (xb, yb) = strategy.isometry_observables(round);
    let phi = apply_isometry(&state, &xb, &yb)?;
    let reduced = phi.to_density().partial_trace(&[0, 2])?;
    trace_distance(&reduced, &StateVector::psi_plus().to_density())
}

/// Plays one game of `K ≈ (8/ε²)·ln(1/ε)` rounds; if the observed correlation
/// sum reaches `2 − ε`, picks a uniformly random round and reports the
/// trace distance of its extracted state to `ψ₊`.
pub fn extraction_experiment(
    strategy: &ProverStrategy,
    epsilon: f64,
    config: &ExtractionConfig,
    rng: &mut SimRng,
) -> Result<ExtractionReport> {
    check_range("epsilon", epsilon, "(0, 1)", epsilon > 0.0 && epsilon < 1.0)?;
    let k = match config.rounds {
        Some(k) => k,
        None => required_rounds(epsilon)?.rounds.max(2),
    };
    let k = k + k % 2;
    if k > config.round_limit {
        return Err(Error::ScaleExceeded(format!(
            "{k} rounds exceeds the limit of {}",
            config.round_limit
        )));
    }
    let s = standard_observables();
    let t = play_game(strategy, k as usize, &s.x, &s.y, rng)?;
    let (c0, c1) = averaged_correlations(&t);
    let sum = c0 + c1;
    let saturated = sum >= 2.0 - epsilon;
    let (sampled_round, sampled_round_td) = if saturated {
        let i = rng.random_range(0..k as usize);
        (Some(i), Some(extracted_round_distance(strategy, i)?))
    } else {
        (None, None)
    };
    Ok(ExtractionReport {
        epsilon,
        k,
        c0,
        c1,
        correlation_sum: sum,
        saturated,
        sampled_round,
        sampled_round_td,
        reference_scale: epsilon.powf(1.0 / 6.0),
    })
}
