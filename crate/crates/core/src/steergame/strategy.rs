//! Prover (Bob) strategies for steering games.
//!
//! Strategies are written in the canonical frame where Alice measures X
//! (setting 0) and Y (setting 1); the game engine rotates Alice's half of
//! each pair when other anticommuting observables are used.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qmath::linalg::{c, identity, CVector};
use crate::qmath::{pauli_x, pauli_y, Observable, StateVector};
use crate::selftest::{tightness_witness, TightnessWitness};

/// Round-indexed adaptive behaviours. Bob only ever sees his own past
/// outcomes and the instructed settings, never Alice's outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AdaptiveRule {
    /// Honest, except that in the listed rounds Bob hands over a product
    /// state `|0⟩|0⟩` and reports a fair coin.
    HonestExceptRounds { bad_rounds: Vec<usize> },
    /// Honest, but after `run_length` consecutive +1 reports of his own Bob
    /// flips the next report.
    FlipAfterRun { run_length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Fresh `ψ₊` each round, Bob measures the instructed observable.
    Honest,
    /// The tightness-witness state and deviated observables at `epsilon`.
    IidDeviated { epsilon: f64 },
    /// Alice receives `|+⟩`; Bob always reports +1.
    ClassicalLhs,
    /// Honest measurement, each report flipped independently with probability `q`.
    BitFlip { q: f64 },
    Adaptive(AdaptiveRule),
}

/// What Bob does in one round.
#[derive(Debug, Clone, PartialEq)]
pub enum BobAction {
    /// Measure `observable` on his register, then flip the result with
    /// probability `flip_prob`.
    Measure { observable: Observable, flip_prob: f64 },
    /// Report a fixed value without measuring.
    Report(i8),
    /// Report a fair coin without measuring.
    CoinFlip,
}

/// An immutable strategy description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProverStrategy {
    kind: StrategyKind,
    witness: Option<TightnessWitness>,
}

impl ProverStrategy {
    pub fn new(kind: StrategyKind) -> Result<Self> {
        let witness = match &kind {
            StrategyKind::IidDeviated { epsilon } => Some(tightness_witness(*epsilon)?),
            StrategyKind::BitFlip { q } => {
                check_range("q", *q, "[0, 1]", (0.0..=1.0).contains(q))?;
                None
            }
            StrategyKind::Adaptive(AdaptiveRule::FlipAfterRun { run_length: 0 }) => {
                return Err(Error::InvalidInput("run_length must be positive".into()))
            }
            _ => None,
        };
        Ok(Self { kind, witness })
    }

    pub fn honest() -> Self {
        Self { kind: StrategyKind::Honest, witness: None }
    }

    pub fn kind(&self) -> &StrategyKind {
        &self.kind
    }

    fn is_bad_round(&self, round: usize) -> bool {
        matches!(&self.kind, StrategyKind::Adaptive(AdaptiveRule::HonestExceptRounds { bad_rounds })
            if bad_rounds.contains(&round))
    }

    /// The state of round `round` as declared by the strategy, dims `[2, d_B]`.
    pub fn pair_state(&self, round: usize) -> StateVector {
        match (&self.kind, &self.witness) {
            (StrategyKind::IidDeviated { .. }, Some(w)) => w.psi.clone(),
            (StrategyKind::ClassicalLhs, _) => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let amps = CVector::from_column_slice(&[c(h, 0.0), c(0.0, 0.0), c(h, 0.0), c(0.0, 0.0)]);
                StateVector::from_parts_unchecked(amps, vec![2, 2])
            }
            _ if self.is_bad_round(round) => {
                StateVector::basis(&[2, 2], 0).expect("valid basis state")
            }
            _ => StateVector::psi_plus(),
        }
    }

    /// Bob's observables `(X′, Y′)` for round `round`, used by the isometry.
    ///
    /// Rounds where Bob does not measure use the identity for both.
    pub fn isometry_observables(&self, round: usize) -> (Observable, Observable) {
        let obs = |m| Observable::new(m, 1).expect("valid observable");
        match (&self.kind, &self.witness) {
            (StrategyKind::IidDeviated { .. }, Some(w)) => (w.b0.clone(), w.b1.clone()),
            (StrategyKind::ClassicalLhs, _) => (obs(identity(2)), obs(identity(2))),
            _ if self.is_bad_round(round) => (obs(identity(2)), obs(identity(2))),
            _ => (obs(pauli_x()), obs(pauli_y())),
        }
    }

    /// Fresh per-game state (Bob's own outcome history).
    pub fn session(&self) -> ProverSession<'_> {
        ProverSession { strategy: self, history: Vec::new() }
    }
}

impl std::str::FromStr for ProverStrategy {
    type Err = Error;

    /// Parses `honest`, `lhs`, `deviated:<eps>`, `bitflip:<q>`,
    /// `bad-rounds:<i>,<j>,...` and `flip-after:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| -> Result<f64> {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad numeric argument {a:?} in {s:?}")))
        };
        let kind = match name {
            "honest" => StrategyKind::Honest,
            "lhs" | "classical-lhs" => StrategyKind::ClassicalLhs,
            "deviated" | "iid-deviated" => StrategyKind::IidDeviated { epsilon: num(arg)? },
            "bitflip" => StrategyKind::BitFlip { q: num(arg)? },
            "bad-rounds" => {
                let bad_rounds = arg
                    .split(',')
                    .filter(|p| !p.is_empty())
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidInput(format!("bad round list in {s:?}")))?;
                StrategyKind::Adaptive(AdaptiveRule::HonestExceptRounds { bad_rounds })
            }
            "flip-after" => {
                let run_length = arg
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad run length in {s:?}")))?;
                StrategyKind::Adaptive(AdaptiveRule::FlipAfterRun { run_length })
            }
            _ => return Err(Error::InvalidInput(format!("unknown strategy {s:?}"))),
        };
        Self::new(kind)
    }
}

/// Per-game prover state.
#[derive(Debug, Clone)]
pub struct ProverSession<'a> {
    strategy: &'a ProverStrategy,
    history: Vec<i8>,
}

impl ProverSession<'_> {
    /// Bob's action for `round` given the instructed `setting` (0 or 1).
    pub fn respond(&self, round: usize, setting: u8) -> BobAction {
        let s = self.strategy;
        let pick = |(x, y): (Observable, Observable)| if setting == 0 { x } else { y };
        match &s.kind {
            StrategyKind::ClassicalLhs => BobAction::Report(1),
            StrategyKind::BitFlip { q } => BobAction::Measure {
                observable: pick(s.isometry_observables(round)),
                flip_prob: *q,
            },
            StrategyKind::Adaptive(AdaptiveRule::HonestExceptRounds { bad_rounds })
                if bad_rounds.contains(&round) =>
            {
                BobAction::CoinFlip
            }
            StrategyKind::Adaptive(AdaptiveRule::FlipAfterRun { run_length }) => {
                let n = *run_length;
                let run = self.history.len() >= n
                    && self.history[self.history.len() - n..].iter().all(|&b| b == 1);
                BobAction::Measure {
                    observable: pick(s.isometry_observables(round)),
                    flip_prob: if run { 1.0 } else { 0.0 },
                }
            }
            _ => BobAction::Measure {
                observable: pick(s.isometry_observables(round)),
                flip_prob: 0.0,
            },
        }
    }

    /// Appends Bob's reported outcome to his own history.
    pub fn record(&mut self, reported: i8) {
        self.history.push(reported);
    }

    pub fn history(&self) -> &[i8] {
        &self.history
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_strategies() {
        let s: ProverStrategy = "deviated:0.02".parse().unwrap();
        assert_eq!(s.kind(), &StrategyKind::IidDeviated { epsilon: 0.02 });
        let s: ProverStrategy = "bad-rounds:3,7".parse().unwrap();
        assert!(s.is_bad_round(7) && !s.is_bad_round(4));
        assert!("bitflip:1.5".parse::<ProverStrategy>().is_err());
        assert!("nonsense".parse::<ProverStrategy>().is_err());
        assert!("flip-after:0".parse::<ProverStrategy>().is_err());
    }

    #[test]
    fn flip_after_run_uses_own_history() {
        let s: ProverStrategy = "flip-after:2".parse().unwrap();
        let mut sess = s.session();
        sess.record(1);
        assert!(matches!(sess.respond(1, 0), BobAction::Measure { flip_prob, .. } if flip_prob == 0.0));
        sess.record(1);
        assert!(matches!(sess.respond(2, 0), BobAction::Measure { flip_prob, .. } if flip_prob == 1.0));
    }

    #[test]
    fn strategy_kind_json() {
        let k = StrategyKind::Adaptive(AdaptiveRule::HonestExceptRounds { bad_rounds: vec![1] });
        let j = serde_json::to_string(&k).unwrap();
        let back: StrategyKind = serde_json::from_str(&j).unwrap();
        assert_eq!(k, back);
    }
}
