//! K-round steering games with a trusted Alice and an adversarial Bob, and
//! the concentration / counting bounds used to analyse them.

mod bounds;
mod experiment;
mod strategy;

pub use bounds::{
    azuma_bound, count_curve_csv, count_curve_data, gentle_measurement_bound, measurement_count,
    required_rounds, typical_state_bound, CountReport, CountSetting, CountCurveRow, RequiredRounds,
};
pub use experiment::{
    azuma_tail_experiment, repeat_games, extraction_experiment, AzumaCell, ExtractionConfig,
    ExtractionReport, DEFAULT_ROUND_LIMIT,
};
pub use strategy::{AdaptiveRule, BobAction, ProverSession, ProverStrategy, StrategyKind};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::linalg::{self, CMatrix};
use crate::qmath::{measure_pure, stream_rng, Observable, SimRng, StateVector};
use crate::selftest::alignment_unitary;

/// One round of a transcript as it appears in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub setting: u8,
    pub alice: i8,
    pub bob: i8,
    pub correlation: i8,
}

/// Settings and outcomes of one K-round game.
///
/// Serializes as a JSON array of [`RoundRecord`]s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<RoundRecord>", try_from = "Vec<RoundRecord>")]
pub struct GameTranscript {
    settings: Vec<u8>,
    alice: Vec<i8>,
    bob: Vec<i8>,
}

impl GameTranscript {
    /// Validates `K` even and nonzero, exactly `K/2` zero settings, and ±1 outcomes.
    pub fn new(settings: Vec<u8>, alice: Vec<i8>, bob: Vec<i8>) -> Result<Self> {
        let k = settings.len();
        if k == 0 || k % 2 != 0 {
            return Err(Error::InvalidInput(format!("round count {k} must be even and positive")));
        }
        if alice.len() != k || bob.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: alice.len().min(bob.len()) });
        }
        if settings.iter().any(|&s| s > 1) {
            return Err(Error::InvalidInput("settings must be 0 or 1".into()));
        }
        let zeros = settings.iter().filter(|&&s| s == 0).count();
        if zeros != k / 2 {
            return Err(Error::InvalidInput(format!("{zeros} zero settings, expected {}", k / 2)));
        }
        if alice.iter().chain(&bob).any(|&o| o != 1 && o != -1) {
            return Err(Error::InvalidInput("outcomes must be ±1".into()));
        }
        Ok(Self { settings, alice, bob })
    }

    pub fn k(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self) -> &[u8] {
        &self.settings
    }

    pub fn alice_outcomes(&self) -> &[i8] {
        &self.alice
    }

    pub fn bob_outcomes(&self) -> &[i8] {
        &self.bob
    }

    /// `Ĉᵢ = aᵢ·bᵢ`.
    pub fn correlations(&self) -> Vec<i8> {
        self.alice.iter().zip(&self.bob).map(|(a, b)| a * b).collect()
    }

    /// Copy with Bob's reports replaced.
    pub fn with_bob_outcomes(&self, bob: Vec<i8>) -> Result<Self> {
        Self::new(self.settings.clone(), self.alice.clone(), bob)
    }
}

impl From<GameTranscript> for Vec<RoundRecord> {
    fn from(t: GameTranscript) -> Self {
        (0..t.k())
            .map(|i| RoundRecord {
                round: i,
                setting: t.settings[i],
                alice: t.alice[i],
                bob: t.bob[i],
                correlation: t.alice[i] * t.bob[i],
            })
            .collect()
    }
}

impl TryFrom<Vec<RoundRecord>> for GameTranscript {
    type Error = Error;

    fn try_from(rows: Vec<RoundRecord>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.round != i || r.correlation != r.alice * r.bob {
                return Err(Error::InvalidInput(format!("inconsistent transcript row {i}")));
            }
        }
        Self::new(
            rows.iter().map(|r| r.setting).collect(),
            rows.iter().map(|r| r.alice).collect(),
            rows.iter().map(|r| r.bob).collect(),
        )
    }
}

/// Fraction of rounds with `aᵢ = bᵢ`.
pub fn correlation_value(t: &GameTranscript) -> f64 {
    let wins = t.alice.iter().zip(&t.bob).filter(|(a, b)| a == b).count();
    wins as f64 / t.k() as f64
}

/// `(Ĉ⁰, Ĉ¹)`: mean correlation over the rounds with setting 0 and 1.
pub fn averaged_correlations(t: &GameTranscript) -> (f64, f64) {
    let mut sum = [0i64; 2];
    for ((&s, &a), &b) in t.settings.iter().zip(&t.alice).zip(&t.bob) {
        sum[s as usize] += (a * b) as i64;
    }
    let half = (t.k() / 2) as f64;
    (sum[0] as f64 / half, sum[1] as f64 / half)
}

/// Uniformly random settings with exactly `k/2` zeros.
pub fn sample_settings(k: usize, rng: &mut impl Rng) -> Vec<u8> {
    let mut s: Vec<u8> = (0..k).map(|i| u8::from(i >= k / 2)).collect();
    s.shuffle(rng);
    s
}

/// Precomputed rotation of Alice's qubit into the canonical (X, Y) frame.
struct Frame {
    alice: [Observable; 2],
    /// `U†`, applied to Alice's qubit of every canonical pair state.
    rotate: Option<CMatrix>,
}

impl Frame {
    fn new(a0: &Observable, a1: &Observable) -> Result<Self> {
        let u = alignment_unitary(a0, a1)?;
        let rotate = (u != linalg::identity(2)).then(|| u.adjoint());
        Ok(Self { alice: [a0.on(0), a1.on(0)], rotate })
    }
}

/// Plays one K-round steering game.
///
/// The verifier's randomness (settings and Alice's outcomes) comes from
/// `rng`; Bob's randomness comes from a prover stream derived from one draw
/// of `rng`, so the whole game is reproducible from `rng` alone.
pub fn play_game(
    strategy: &ProverStrategy,
    k: usize,
    a0: &Observable,
    a1: &Observable,
    rng: &mut SimRng,
) -> Result<GameTranscript> {
    if k == 0 || k % 2 != 0 {
        return Err(Error::InvalidInput(format!("round count {k} must be even and positive")));
    }
    let frame = Frame::new(a0, a1)?;
    let settings = sample_settings(k, rng);
    let mut prover_rng = stream_rng(rng.random(), 0);
    let mut session = strategy.session();
    let mut alice = Vec::with_capacity(k);
    let mut bob = Vec::with_capacity(k);

    for (round, &setting) in settings.iter().enumerate() {
        let mut state = strategy.pair_state(round);
        if state.dims().len() != 2 || state.dims()[0] != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: state.dims()[0] });
        }
        if let Some(u) = &frame.rotate {
            state = state.evolve_local(u, 0)?;
        }
        let (a, post) = measure_pure(&state, &frame.alice[setting as usize], rng)?;
        let b = match session.respond(round, setting) {
            BobAction::Measure { observable, flip_prob } => {
                let (b, _) = measure_pure(&post, &observable, &mut prover_rng)?;
                if flip_prob > 0.0 && prover_rng.random::<f64>() < flip_prob {
                    -b
                } else {
                    b
                }
            }
            BobAction::Report(v) => v,
            BobAction::CoinFlip => {
                if prover_rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
        };
        session.record(b);
        alice.push(a);
        bob.push(b);
    }
    GameTranscript::new(settings, alice, bob)
}

/// Exact `E[Ĉᵢ]` of an i.i.d. strategy in round `round` for `setting`, in
/// the canonical frame.
pub fn expected_correlation(strategy: &ProverStrategy, round: usize, setting: u8) -> Result<f64> {
    let state: StateVector = strategy.pair_state(round);
    let alice = if setting == 0 { crate::qmath::pauli_x() } else { crate::qmath::pauli_y() };
    let a_psi = state.apply_local(&alice, 0)?;
    let a_mean = |v: &crate::qmath::CVector| state.amplitudes().dotc(v).re;
    Ok(match strategy.session().respond(round, setting) {
        BobAction::Measure { observable, flip_prob } => {
            let ab = linalg::apply_local_vec(&a_psi, observable.matrix(), state.dims(), 1);
            a_mean(&ab) * (1.0 - 2.0 * flip_prob)
        }
        BobAction::Report(v) => a_mean(&a_psi) * v as f64,
        BobAction::CoinFlip => 0.0,
    })
}
