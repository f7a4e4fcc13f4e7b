//! Sequential steering games at desk scale: strategies over N games of K
//! rounds, the ε-structured test, exact strategy distances and the guessing
//! strategy in which Alice copies her own outcomes as Bob's reports.
//!
//! The global state is a tensor product of *segments*. A segment is a state
//! on a run of consecutive rounds of one game, with subsystems ordered as
//! Alice's qubits for those rounds followed by Bob's registers for the same
//! rounds. Per-round pairs are segments of length one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qmath::linalg::{self, c, CMatrix};
use crate::qmath::observable::eigenprojectors;
use crate::qmath::{
    deviated_observables, measure, pauli_x, pauli_y, standard_observables, DensityMatrix,
    Observable, SimRng, StateVector,
};
use crate::selftest::tightness_witness;
use crate::steergame::{correlation_value, sample_settings, GameTranscript};

/// Largest block dimension and branch count accepted by [`strategy_distance`].
pub const MAX_BLOCK_DIM: usize = 256;
pub const MAX_BRANCHES: usize = 1 << 12;

/// Bob's behaviour in every round of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BobOp {
    /// Measure X or Y on his qubit as instructed.
    Honest,
    /// Measure the deviated observables of the tightness witness at `epsilon`.
    Deviated { epsilon: f64 },
    /// Honest measurement, report flipped with probability `q`.
    BitFlip { q: f64 },
    /// No operation on Bob's register; the reported outcome is Alice's.
    Guessing,
}

impl BobOp {
    fn observables(&self) -> Result<Option<[Observable; 2]>> {
        Ok(match self {
            BobOp::Honest | BobOp::BitFlip { .. } => Some([
                Observable::new(pauli_x(), 1)?,
                Observable::new(pauli_y(), 1)?,
            ]),
            BobOp::Deviated { epsilon } => {
                let (b0, b1) = deviated_observables(epsilon / 2.0)?;
                Some([b0, b1])
            }
            BobOp::Guessing => None,
        })
    }

    fn flip(&self) -> f64 {
        match self {
            BobOp::BitFlip { q } => *q,
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BobOp::Deviated { epsilon } => {
                check_range("epsilon", *epsilon, "(0, 1)", *epsilon > 0.0 && *epsilon < 1.0)
            }
            BobOp::BitFlip { q } => check_range("q", *q, "[0, 1]", (0.0..=1.0).contains(q)),
            _ => Ok(()),
        }
    }
}

/// A state on rounds `start..start + rounds` of game `game`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub game: usize,
    pub start: usize,
    pub rounds: usize,
    /// Dims `[2; rounds] ++ [d_B; rounds]`.
    pub state: DensityMatrix,
}

impl Segment {
    pub fn new(game: usize, start: usize, state: DensityMatrix) -> Result<Self> {
        let dims = state.dims();
        if dims.len() % 2 != 0 || dims.is_empty() {
            return Err(Error::InvalidDims(format!("segment dims {dims:?} are not paired")));
        }
        let rounds = dims.len() / 2;
        if dims[..rounds].iter().any(|&d| d != 2) {
            return Err(Error::InvalidDims(format!("Alice registers must be qubits: {dims:?}")));
        }
        Ok(Self { game, start, rounds, state })
    }

    fn bob_dim(&self, offset: usize) -> usize {
        self.state.dims()[self.rounds + offset]
    }
}

/// N games of K rounds with trusted Alice (X for setting 0, Y for setting 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    n_games: usize,
    rounds_per_game: usize,
    segments: Vec<Segment>,
    bob_ops: Vec<BobOp>,
}

impl Strategy {
    /// Checks that the segments tile every round of every game exactly once.
    pub fn new(
        n_games: usize,
        rounds_per_game: usize,
        mut segments: Vec<Segment>,
        bob_ops: Vec<BobOp>,
    ) -> Result<Self> {
        if n_games == 0 || rounds_per_game == 0 || rounds_per_game % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "need N ≥ 1 games and an even K ≥ 2 rounds, got N={n_games}, K={rounds_per_game}"
            )));
        }
        if bob_ops.len() != n_games {
            return Err(Error::DimensionMismatch { expected: n_games, found: bob_ops.len() });
        }
        for op in &bob_ops {
            op.validate()?;
        }
        segments.sort_by_key(|s| (s.game, s.start));
        let mut next = vec![0usize; n_games];
        for s in &segments {
            if s.game >= n_games || s.start != next[s.game] {
                return Err(Error::InvalidInput(format!(
                    "segment (game {}, start {}) does not continue the tiling",
                    s.game, s.start
                )));
            }
            next[s.game] += s.rounds;
            if bob_ops[s.game] != BobOp::Guessing && (0..s.rounds).any(|i| s.bob_dim(i) != 2) {
                return Err(Error::InvalidDims(
                    "measuring Bob operations need qubit registers".into(),
                ));
            }
        }
        if next.iter().any(|&n| n != rounds_per_game) {
            return Err(Error::InvalidInput("segments do not cover every round".into()));
        }
        Ok(Self { n_games, rounds_per_game, segments, bob_ops })
    }

    /// The same two-qubit pair in every round, with one Bob operation for all games.
    pub fn iid(n_games: usize, rounds_per_game: usize, pair: &DensityMatrix, op: BobOp) -> Result<Self> {
        if pair.dims().len() != 2 {
            return Err(Error::InvalidDims(format!("pair dims {:?}", pair.dims())));
        }
        let segments = (0..n_games)
            .flat_map(|g| (0..rounds_per_game).map(move |r| (g, r)))
            .map(|(g, r)| Segment::new(g, r, pair.clone()))
            .collect::<Result<_>>()?;
        Self::new(n_games, rounds_per_game, segments, vec![op; n_games])
    }

    /// Honest strategy over fresh `ψ₊` pairs.
    pub fn honest_pairs(n_games: usize, rounds_per_game: usize) -> Result<Self> {
        Self::iid(n_games, rounds_per_game, &StateVector::psi_plus().to_density(), BobOp::Honest)
    }

    /// Honest measurements on the tightness-witness state at `epsilon`.
    pub fn witness_pairs(n_games: usize, rounds_per_game: usize, epsilon: f64) -> Result<Self> {
        let w = tightness_witness(epsilon)?;
        Self::iid(n_games, rounds_per_game, &w.psi.to_density(), BobOp::Honest)
    }

    pub fn n_games(&self) -> usize {
        self.n_games
    }

    pub fn rounds_per_game(&self) -> usize {
        self.rounds_per_game
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn bob_ops(&self) -> &[BobOp] {
        &self.bob_ops
    }

    fn segment_of(&self, game: usize, round: usize) -> &Segment {
        self.segments
            .iter()
            .find(|s| s.game == game && (s.start..s.start + s.rounds).contains(&round))
            .expect("segments tile all rounds")
    }

    /// Register dims `(2, d_B)` of one round.
    pub fn round_dims(&self, game: usize, round: usize) -> [usize; 2] {
        let s = self.segment_of(game, round);
        [2, s.bob_dim(round - s.start)]
    }

    /// Full global state with games in order and, within each segment,
    /// Alice's qubits before Bob's registers. Only for very small strategies.
    pub fn global_state(&self) -> Result<DensityMatrix> {
        let mut it = self.segments.iter();
        let first = it.next().expect("at least one segment").state.clone();
        it.try_fold(first, |acc, s| crate::qmath::tensor_product(&acc, &s.state))
    }

    /// Samples one transcript per game.
    pub fn play(&self, rng: &mut SimRng) -> Result<Vec<GameTranscript>> {
        let alice = [standard_observables().x, standard_observables().y];
        (0..self.n_games)
            .map(|g| {
                let settings = sample_settings(self.rounds_per_game, rng);
                let op = &self.bob_ops[g];
                let bob_obs = op.observables()?;
                let mut a_out = vec![0i8; self.rounds_per_game];
                let mut b_out = vec![0i8; self.rounds_per_game];
                for seg in self.segments.iter().filter(|s| s.game == g) {
                    let mut rho = seg.state.clone();
                    for off in 0..seg.rounds {
                        let round = seg.start + off;
                        let r = settings[round] as usize;
                        let (a, post) = measure(&rho, &alice[r].on(off), rng)?;
                        rho = post;
                        let b = match &bob_obs {
                            None => a,
                            Some(obs) => {
                                let (b, post) = measure(&rho, &obs[r].on(seg.rounds + off), rng)?;
                                rho = post;
                                if rng.random::<f64>() < op.flip() {
                                    -b
                                } else {
                                    b
                                }
                            }
                        };
                        a_out[round] = a;
                        b_out[round] = b;
                    }
                }
                GameTranscript::new(settings, a_out, b_out)
            })
            .collect()
    }

    /// Exact expected correlation value of each game.
    pub fn expected_correlation_values(&self) -> Result<Vec<f64>> {
        (0..self.n_games)
            .map(|g| {
                let mut total = 0.0;
                for round in 0..self.rounds_per_game {
                    let blocks = self.round_branches(g, round)?;
                    for (idx, b) in blocks.iter().enumerate() {
                        let (a_minus, b_minus) = ((idx >> 1) & 1, idx & 1);
                        if a_minus == b_minus {
                            total += b.trace().re;
                        }
                    }
                }
                Ok(total / self.rounds_per_game as f64)
            })
            .collect()
    }

    /// `1 − min_j E[correlation value of game j]`.
    pub fn exact_epsilon(&self) -> Result<f64> {
        let v = self.expected_correlation_values()?;
        Ok((1.0 - v.into_iter().fold(f64::INFINITY, f64::min)).max(0.0))
    }

    /// Classical-quantum branches of round `round` of game `game` after all
    /// earlier rounds of its segment have been played and forgotten.
    ///
    /// Entry `4r + 2[a = −1] + [b = −1]` is the unnormalized state of the
    /// round's (Alice, Bob) registers jointly with setting `r`, Alice outcome
    /// `a` and Bob report `b`.
    pub fn round_branches(&self, game: usize, round: usize) -> Result<Vec<CMatrix>> {
        let seg = self.segment_of(game, round);
        let op = &self.bob_ops[game];
        let dims = seg.state.dims().to_vec();
        let mut mat = seg.state.matrix().clone();
        for off in 0..round - seg.start {
            let blocks = branch_blocks(&mat, &dims, off, seg.rounds + off, op)?;
            mat = blocks.into_iter().fold(CMatrix::zeros(mat.nrows(), mat.ncols()), |acc, b| acc + b);
        }
        let off = round - seg.start;
        let reduced = linalg::partial_trace_matrix(&mat, &dims, &[off, seg.rounds + off]);
        let local = [dims[off], dims[seg.rounds + off]];
        branch_blocks(&reduced, &local, 0, 1, op)
    }
}

/// Branch decomposition of one round acting on subsystems `a_sub` (Alice)
/// and `b_sub` (Bob) of `mat`.
fn branch_blocks(
    mat: &CMatrix,
    dims: &[usize],
    a_sub: usize,
    b_sub: usize,
    op: &BobOp,
) -> Result<Vec<CMatrix>> {
    let s = standard_observables();
    let bob = op.observables()?;
    let q = op.flip();
    let half = c(0.5, 0.0);
    let mut out = Vec::with_capacity(8);
    for r in 0..2 {
        let alice = if r == 0 { &s.x } else { &s.y };
        let (pa_plus, pa_minus) = eigenprojectors(alice);
        for pa in [&pa_plus, &pa_minus] {
            let after_a = linalg::conjugate_local(mat, pa, dims, a_sub) * half;
            match &bob {
                None => {
                    let zero = CMatrix::zeros(mat.nrows(), mat.ncols());
                    if std::ptr::eq(pa, &pa_plus) {
                        out.push(after_a);
                        out.push(zero);
                    } else {
                        out.push(zero);
                        out.push(after_a);
                    }
                }
                Some(obs) => {
                    let (qp, qm) = eigenprojectors(&obs[r]);
                    let plus = linalg::conjugate_local(&after_a, &qp, dims, b_sub);
                    let minus = linalg::conjugate_local(&after_a, &qm, dims, b_sub);
                    if q == 0.0 {
                        out.push(plus);
                        out.push(minus);
                    } else {
                        let (keep, flip) = (c(1.0 - q, 0.0), c(q, 0.0));
                        out.push(&plus * keep + &minus * flip);
                        out.push(&minus * keep + &plus * flip);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One uniformly random round per game.
pub fn sample_rounds(n_games: usize, rounds_per_game: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n_games).map(|_| rng.random_range(0..rounds_per_game)).collect()
}

/// Trace distance between the classical-quantum states of the two strategies
/// on the rounds `rounds` (one per game), each evolved exactly through the
/// earlier rounds of its segment.
pub fn strategy_distance(s1: &Strategy, s2: &Strategy, rounds: &[usize]) -> Result<f64> {
    if s1.n_games != s2.n_games || s1.rounds_per_game != s2.rounds_per_game {
        return Err(Error::InvalidInput("strategies have different game shapes".into()));
    }
    if rounds.len() != s1.n_games {
        return Err(Error::DimensionMismatch { expected: s1.n_games, found: rounds.len() });
    }
    let mut per_game = Vec::with_capacity(rounds.len());
    let mut block_dim = 1usize;
    for (g, &r) in rounds.iter().enumerate() {
        if r >= s1.rounds_per_game {
            return Err(Error::InvalidInput(format!("round {r} out of range")));
        }
        let d1 = s1.round_dims(g, r);
        if d1 != s2.round_dims(g, r) {
            return Err(Error::DimensionMismatch { expected: d1[1], found: s2.round_dims(g, r)[1] });
        }
        block_dim = block_dim.saturating_mul(d1[0] * d1[1]);
        per_game.push((s1.round_branches(g, r)?, s2.round_branches(g, r)?));
    }
    let branches = 8usize.checked_pow(rounds.len() as u32).unwrap_or(usize::MAX);
    if block_dim > MAX_BLOCK_DIM || branches > MAX_BRANCHES {
        return Err(Error::ScaleExceeded(format!(
            "{branches} branches of dimension {block_dim}"
        )));
    }
    let mut total = 0.0;
    for joint in 0..branches {
        let mut idx = joint;
        let mut a = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let mut b = a.clone();
        let mut differ = false;
        for (b1, b2) in &per_game {
            let k = idx % 8;
            idx /= 8;
            differ |= b1[k] != b2[k];
            a = linalg::kron(&a, &b1[k]);
            b = linalg::kron(&b, &b2[k]);
        }
        if differ {
            total += linalg::trace_norm_hermitian(&(a - b));
        }
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// Alice plays as in `s` and reports her own outcome as Bob's.
pub fn guessing_strategy(s: &Strategy) -> Strategy {
    Strategy { bob_ops: vec![BobOp::Guessing; s.n_games], ..s.clone() }
}

/// `‖(M⊗I)ψ₊ − (I⊗XMᵀX)ψ₊‖`.
pub fn shift_identity_check(m: &CMatrix) -> Result<f64> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: m.nrows() });
    }
    let bell = StateVector::psi_plus();
    let x = pauli_x();
    let right = &x * m.transpose() * &x;
    let lhs = bell.apply_local(m, 0)?;
    let rhs = bell.apply_local(&right, 1)?;
    Ok((lhs - rhs).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub per_game_correlations: Vec<f64>,
    pub epsilon: f64,
    /// Fraction of games with correlation value above `1 − ε`.
    pub structured_fraction: f64,
    pub structured: bool,
}

/// Empirical test that at least a `1 − ε` fraction of games have
/// correlation value above `1 − ε`.
pub fn epsilon_structured(transcripts: &[GameTranscript], epsilon: f64) -> Result<StructureReport> {
    if transcripts.is_empty() {
        return Err(Error::InvalidInput("no transcripts".into()));
    }
    let per_game_correlations: Vec<f64> = transcripts.iter().map(correlation_value).collect();
    let good = per_game_correlations.iter().filter(|&&v| v > 1.0 - epsilon).count();
    let structured_fraction = good as f64 / transcripts.len() as f64;
    Ok(StructureReport {
        per_game_correlations,
        epsilon,
        structured_fraction,
        structured: structured_fraction >= 1.0 - epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityBound {
    /// `C·N·ε^{1/6}`.
    pub bound: f64,
    /// `N¹²·ln N`, the scaling the number of rounds per game must exceed.
    pub rounds_scale: f64,
    pub note: String,
}

pub fn rigidity_bound(n: usize, epsilon: f64, constant: f64) -> Result<RigidityBound> {
    check_range("constant", constant, "(0, ∞)", constant > 0.0)?;
    check_range("epsilon", epsilon, "[0, ∞)", epsilon >= 0.0)?;
    let nf = n as f64;
    Ok(RigidityBound {
        bound: constant * nf * epsilon.powf(1.0 / 6.0),
        rounds_scale: nf.powi(12) * nf.ln(),
        note: "requires K = Ω(N^12 log N) rounds per game".into(),
    })
}

/// Pair sources accepted in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Bell,
    Witness { epsilon: f64 },
    Product,
    Werner { p: f64 },
}

impl PairSource {
    pub fn density(&self) -> Result<DensityMatrix> {
        match self {
            PairSource::Bell => Ok(StateVector::psi_plus().to_density()),
            PairSource::Witness { epsilon } => Ok(tightness_witness(*epsilon)?.psi.to_density()),
            PairSource::Product => Ok(StateVector::basis(&[2, 2], 0)?.to_density()),
            PairSource::Werner { p } => crate::steerability::werner(*p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub pair: PairSource,
    pub bob: BobOp,
}

/// Declarative scenario: per-game pair sources and Bob operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_games: usize,
    pub rounds_per_game: usize,
    pub epsilon: f64,
    #[serde(default = "default_constant")]
    pub constant: f64,
    pub games: Vec<GameSpec>,
}

fn default_constant() -> f64 {
    13.0
}

impl Scenario {
    pub fn strategy(&self) -> Result<Strategy> {
        if self.games.len() != self.n_games {
            return Err(Error::DimensionMismatch { expected: self.n_games, found: self.games.len() });
        }
        let mut segments = Vec::new();
        for (g, spec) in self.games.iter().enumerate() {
            let rho = spec.pair.density()?;
            for r in 0..self.rounds_per_game {
                segments.push(Segment::new(g, r, rho.clone())?);
            }
        }
        let ops = self.games.iter().map(|g| g.bob.clone()).collect();
        Strategy::new(self.n_games, self.rounds_per_game, segments, ops)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub structure: StructureReport,
    pub sampled_rounds: Vec<usize>,
    pub distance_to_ideal: f64,
    pub distance_to_guessing: f64,
    pub exact_epsilon: f64,
    pub bound: RigidityBound,
}

/// Plays the scenario once, tests structure, and measures exact distances to
/// the ideal strategy (honest over `ψ₊`) and to the scenario's guessing strategy.
pub fn run_scenario(scenario: &Scenario, rng: &mut SimRng) -> Result<RigidityReport> {
    let s = scenario.strategy()?;
    let transcripts = s.play(rng)?;
    let structure = epsilon_structured(&transcripts, scenario.epsilon)?;
    let rounds = sample_rounds(s.n_games, s.rounds_per_game, rng);
    let ideal = Strategy::honest_pairs(s.n_games, s.rounds_per_game)?;
    let exact_epsilon = s.exact_epsilon()?;
    Ok(RigidityReport {
        structure,
        distance_to_ideal: strategy_distance(&s, &ideal, &rounds)?,
        distance_to_guessing: strategy_distance(&s, &guessing_strategy(&s), &rounds)?,
        sampled_rounds: rounds,
        exact_epsilon,
        bound: rigidity_bound(s.n_games, exact_epsilon, scenario.constant)?,
    })
}
