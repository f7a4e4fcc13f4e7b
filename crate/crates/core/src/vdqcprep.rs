//! Verified state preparation (stage 1 of one-sided device-independent
//! delegated computation), with the stage-2 computation as an abstract oracle.
//!
//! The verifier holds qubit 0 of every pair, the server holds qubit 1. Kept
//! pairs become remotely prepared `|±_θ⟩` or computational states on the
//! server side; all other pairs are tested by asking the server to measure in
//! the verifier's basis.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qmath::linalg::{c, CVector};
use crate::qmath::{measure_pure, pauli_z, stream_rng, DensityMatrix, Observable, SimRng, StateVector};
use crate::selftest::tightness_witness;

/// Measurement basis for one pair: `M_θ = cos θ·X + sin θ·Y` with
/// `θ = kπ/4`, or the computational basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepBasis {
    Angle(u8),
    Computational,
}

impl PrepBasis {
    /// The eight angles followed by the computational basis.
    pub const ALL: [PrepBasis; 9] = [
        PrepBasis::Angle(0),
        PrepBasis::Angle(1),
        PrepBasis::Angle(2),
        PrepBasis::Angle(3),
        PrepBasis::Angle(4),
        PrepBasis::Angle(5),
        PrepBasis::Angle(6),
        PrepBasis::Angle(7),
        PrepBasis::Computational,
    ];

    pub fn theta(&self) -> Option<f64> {
        match self {
            PrepBasis::Angle(k) => Some(*k as f64 * FRAC_PI_4),
            PrepBasis::Computational => None,
        }
    }

    pub fn observable(&self, subsystem: usize) -> Result<Observable> {
        match self.theta() {
            Some(t) => Observable::from_bloch([t.cos(), t.sin(), 0.0], subsystem),
            None => Observable::new(pauli_z(), subsystem),
        }
    }

    /// Expected product of verifier and server outcomes on ψ₊.
    pub fn expected_sign(&self) -> i8 {
        match self {
            PrepBasis::Angle(_) => 1,
            PrepBasis::Computational => -1,
        }
    }

    /// Server-side state for a given flip bit: `|+_θ⟩`/`|−_θ⟩` or `|0⟩`/`|1⟩`.
    pub fn server_state(&self, flip: bool) -> StateVector {
        let amps = match self.theta() {
            Some(t) => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let s = if flip { -h } else { h };
                CVector::from_column_slice(&[c(h, 0.0), c(s * t.cos(), s * t.sin())])
            }
            None if flip => CVector::from_column_slice(&[c(0.0, 0.0), c(1.0, 0.0)]),
            None => CVector::from_column_slice(&[c(1.0, 0.0), c(0.0, 0.0)]),
        };
        StateVector::normalized(amps, vec![2]).expect("unit vector")
    }

    /// Flip bit of the server state steered by verifier outcome `a`.
    fn flip_for(&self, a: i8) -> bool {
        match self {
            PrepBasis::Angle(_) => a < 0,
            // Anticorrelated: the verifier seeing |0⟩ leaves |1⟩.
            PrepBasis::Computational => a > 0,
        }
    }
}

/// Server behaviour during stage 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Server {
    Honest,
    /// Honest pairs and measurements, each reported outcome flipped with
    /// probability `q`.
    BitFlip { q: f64 },
    /// Tightness-witness pairs at `epsilon`, measured in the instructed basis.
    Witness { epsilon: f64 },
}

impl Server {
    pub fn is_honest(&self) -> bool {
        matches!(self, Server::Honest)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Server::Honest => Ok(()),
            Server::BitFlip { q } => check_range("q", q, "[0, 1]", (0.0..=1.0).contains(&q)),
            Server::Witness { epsilon } => {
                check_range("epsilon", epsilon, "(0, 1)", epsilon > 0.0 && epsilon < 1.0)
            }
        }
    }

    /// Pair state with the verifier's qubit first.
    pub fn pair(&self) -> Result<StateVector> {
        match *self {
            Server::Witness { epsilon } => Ok(tightness_witness(epsilon)?.psi),
            _ => Ok(StateVector::psi_plus()),
        }
    }

    fn flip_prob(&self) -> f64 {
        match *self {
            Server::BitFlip { q } => q,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Server {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Server::Honest => write!(f, "honest"),
            Server::BitFlip { q } => write!(f, "bitflip:{q}"),
            Server::Witness { epsilon } => write!(f, "witness:{epsilon}"),
        }
    }
}

impl FromStr for Server {
    type Err = Error;

    /// `honest`, `bitflip:<q>` or `witness:<eps>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidInput(format!("server '{s}' needs a parameter")))?
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad parameter in '{s}'")))
        };
        let server = match name {
            "honest" => Server::Honest,
            "bitflip" => Server::BitFlip { q: num(arg)? },
            "witness" => Server::Witness { epsilon: num(arg)? },
            _ => return Err(Error::InvalidInput(format!("unknown server '{s}'"))),
        };
        server.validate()?;
        Ok(server)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    /// Computation qubits to keep.
    #[serde(rename = "M")]
    pub m: usize,
    /// Total pairs supplied by the server.
    #[serde(rename = "T")]
    pub t: usize,
    pub lambda: f64,
    /// Stage-2 acceptance probability for an incorrect outcome.
    #[serde(default)]
    pub eta: f64,
    pub server: Server,
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.t <= self.m {
            return Err(Error::InvalidInput(format!("need 0 < M < T, got M={} T={}", self.m, self.t)));
        }
        check_range("lambda", self.lambda, "(1, ∞)", self.lambda > 1.0)?;
        check_range("eta", self.eta, "[0, 1]", (0.0..=1.0).contains(&self.eta))?;
        self.server.validate()
    }

    pub fn tests(&self) -> usize {
        self.t - self.m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptQubit {
    pub id: usize,
    pub basis: PrepBasis,
    pub theta: Option<f64>,
    pub flip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestStats {
    pub tested: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub eta: f64,
    pub lambda: f64,
    pub bound: f64,
    /// The bound is at least 1 and says nothing.
    pub vacuous: bool,
}

/// Verifier-private result of stage 1. Contains the secrets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepOutcome {
    pub aborted: bool,
    /// Empty when aborted.
    pub kept: Vec<KeptQubit>,
    pub test_stats: TestStats,
    pub soundness_report: SoundnessReport,
}

impl PrepOutcome {
    pub fn redacted(&self) -> RedactedOutcome {
        RedactedOutcome {
            aborted: self.aborted,
            kept_ids: self.kept.iter().map(|k| k.id).collect(),
            test_stats: self.test_stats,
            soundness_report: self.soundness_report,
        }
    }
}

/// [`PrepOutcome`] with the angles and flip bits removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedactedOutcome {
    pub aborted: bool,
    pub kept_ids: Vec<usize>,
    pub test_stats: TestStats,
    pub soundness_report: SoundnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: usize,
    pub basis: PrepBasis,
    pub reported: i8,
}

/// Everything the server sees or sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerView {
    pub pairs: usize,
    pub instructions: Vec<Instruction>,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRound {
    pub id: usize,
    pub kept: bool,
    pub basis: PrepBasis,
    pub verifier_outcome: i8,
    pub server_outcome: Option<i8>,
}

/// Full record including secrets. For tests and debugging only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTrace {
    pub config: PrepConfig,
    pub outcome: PrepOutcome,
    pub rounds: Vec<AuditRound>,
}

#[derive(Debug, Clone)]
pub struct Stage1Run {
    pub outcome: PrepOutcome,
    pub server_view: ServerView,
    pub audit: AuditTrace,
    /// Simulated server-side state of each kept qubit, aligned with
    /// `outcome.kept`.
    pub kept_states: Vec<DensityMatrix>,
}

/// `c · M¹³ · ln M`.
pub fn ideal_pair_count(m: u64, c: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::OutOfRange { name: "M", value: m as f64, range: "[2, ∞)" });
    }
    check_range("c", c, "(0, ∞)", c > 0.0)?;
    let mf = m as f64;
    Ok(c * mf.powi(13) * mf.ln())
}

/// `λ¹² · M⁶` steering games.
pub fn recommended_games(lambda: f64, m: u64) -> Result<f64> {
    check_range("lambda", lambda, "(1, ∞)", lambda > 1.0)?;
    Ok(lambda.powi(12) * (m as f64).powi(6))
}

/// `η + 1/λ`.
pub fn soundness_bound(eta: f64, lambda: f64) -> Result<SoundnessReport> {
    check_range("eta", eta, "[0, 1]", (0.0..=1.0).contains(&eta))?;
    check_range("lambda", lambda, "(1, ∞)", lambda > 1.0)?;
    let bound = eta + 1.0 / lambda;
    Ok(SoundnessReport { eta, lambda, bound, vacuous: bound >= 1.0 })
}

/// Runs stage 1 once.
pub fn run_stage1(cfg: &PrepConfig, rng: &mut SimRng) -> Result<Stage1Run> {
    cfg.validate()?;
    let pair = cfg.server.pair()?;
    let q = cfg.server.flip_prob();
    let mut kept_mask = vec![false; cfg.t];
    for i in sample(rng, cfg.t, cfg.m) {
        kept_mask[i] = true;
    }

    let mut rounds = Vec::with_capacity(cfg.t);
    let mut kept = Vec::with_capacity(cfg.m);
    let mut kept_states = Vec::with_capacity(cfg.m);
    let mut instructions = Vec::with_capacity(cfg.tests());
    let mut mismatches = 0;
    for (id, &is_kept) in kept_mask.iter().enumerate() {
        let basis = PrepBasis::ALL[rng.random_range(0..PrepBasis::ALL.len())];
        let (a, post) = measure_pure(&pair, &basis.observable(0)?, rng)?;
        if is_kept {
            kept.push(KeptQubit { id, basis, theta: basis.theta(), flip: basis.flip_for(a) });
            kept_states.push(post.to_density().partial_trace(&[1])?);
            rounds.push(AuditRound { id, kept: true, basis, verifier_outcome: a, server_outcome: None });
            continue;
        }
        let (mut b, _) = measure_pure(&post, &basis.observable(1)?, rng)?;
        if q > 0.0 && rng.random::<f64>() < q {
            b = -b;
        }
        if a * b != basis.expected_sign() {
            mismatches += 1;
        }
        instructions.push(Instruction { id, basis, reported: b });
        rounds.push(AuditRound { id, kept: false, basis, verifier_outcome: a, server_outcome: Some(b) });
    }

    let aborted = mismatches > 0;
    if aborted {
        kept.clear();
        kept_states.clear();
    }
    let outcome = PrepOutcome {
        aborted,
        kept,
        test_stats: TestStats { tested: cfg.tests(), mismatches },
        soundness_report: soundness_bound(cfg.eta, cfg.lambda)?,
    };
    Ok(Stage1Run {
        server_view: ServerView { pairs: cfg.t, instructions, aborted },
        audit: AuditTrace { config: cfg.clone(), outcome: outcome.clone(), rounds },
        outcome,
        kept_states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Verdict {
    AcceptCorrect,
    AcceptIncorrect,
    Reject,
}

/// Stand-in for the computation stage: an honest server is always accepted
/// with a correct result; a dishonest one gets an incorrect result accepted
/// with probability `eta` and is rejected otherwise.
pub fn stage2_oracle(
    prepared: &PrepOutcome,
    honest: bool,
    eta: f64,
    rng: &mut impl Rng,
) -> Result<Stage2Verdict> {
    if prepared.aborted {
        return Err(Error::Protocol("stage 2 called after stage 1 aborted".into()));
    }
    check_range("eta", eta, "[0, 1]", (0.0..=1.0).contains(&eta))?;
    if honest {
        return Ok(Stage2Verdict::AcceptCorrect);
    }
    Ok(if rng.random::<f64>() < eta { Stage2Verdict::AcceptIncorrect } else { Stage2Verdict::Reject })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub config: PrepConfig,
    pub runs: u64,
    pub seed: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Runs that passed stage 1 and then had an incorrect result accepted.
    pub accepted_incorrect: u64,
    pub accepted_incorrect_rate: f64,
    pub soundness_report: SoundnessReport,
}

/// `runs` independent stage-1 runs (run `i` uses stream `i`), each followed
/// by the stage-2 oracle when accepted.
pub fn acceptance_experiment(cfg: &PrepConfig, runs: u64, seed: u64) -> Result<AcceptanceStats> {
    cfg.validate()?;
    let results: Vec<(bool, bool)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let run = run_stage1(cfg, &mut rng)?;
            if run.outcome.aborted {
                return Ok((false, false));
            }
            let v = stage2_oracle(&run.outcome, cfg.server.is_honest(), cfg.eta, &mut rng)?;
            Ok((true, v == Stage2Verdict::AcceptIncorrect))
        })
        .collect::<Result<_>>()?;
    let accepted = results.iter().filter(|r| r.0).count() as u64;
    let accepted_incorrect = results.iter().filter(|r| r.1).count() as u64;
    let n = runs.max(1) as f64;
    Ok(AcceptanceStats {
        config: cfg.clone(),
        runs,
        seed,
        accepted,
        acceptance_rate: accepted as f64 / n,
        accepted_incorrect,
        accepted_incorrect_rate: accepted_incorrect as f64 / n,
        soundness_report: soundness_bound(cfg.eta, cfg.lambda)?,
    })
}
