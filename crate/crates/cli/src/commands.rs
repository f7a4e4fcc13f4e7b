//! One function per subcommand. Each returns the process exit code.

use std::fmt;

use anyhow::Context;
use serde::Serialize;
use steerkit::qmath::{c, random::random_density, standard_observables, stream_rng, Observable, StateVector};
use steerkit::rigidity::{self, Scenario};
use steerkit::selftest::{self, Gamma2Convention};
use steerkit::steerability::{self as steer, SteerableForm};
use steerkit::steergame::{self as game, CountSetting, ExtractionConfig, ProverStrategy};
use steerkit::vdqcprep::{self as vdqc, PrepConfig, Server};

use crate::output::{RunManifest, Sink};
use crate::{Cli, Command, CountsArgs, Format, GameArgs, RigidityArgs, SelftestArgs, SteerableArgs, VdqcArgs};

/// Bad arguments that clap cannot see (ranges, file contents, combinations).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 for invalid input, 1 for anything else.
pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<steerkit::Error>() {
        Some(steerkit::Error::Protocol(_)) | None => 1,
        Some(_) => 2,
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<u8> {
    let sink = Sink { out: cli.out.clone() };
    let ctx = Ctx { seed: cli.seed, format: cli.format, sink };
    match &cli.command {
        Command::Selftest(a) => selftest_cmd(&ctx, a),
        Command::Counts(a) => counts_cmd(&ctx, a),
        Command::Game(a) => game_cmd(&ctx, a),
        Command::Rigidity(a) => rigidity_cmd(&ctx, a),
        Command::Steerable(a) => steerable_cmd(&ctx, a),
        Command::Vdqc(a) => vdqc_cmd(&ctx, a),
    }
}

struct Ctx {
    seed: u64,
    format: Format,
    sink: Sink,
}

impl Ctx {
    fn manifest(&self, command: &str, params: impl Serialize) -> RunManifest {
        RunManifest::new(command, params, self.seed, self.sink.paths())
    }

    fn json_only(&self, command: &str) -> anyhow::Result<()> {
        if self.format == Format::Csv {
            return Err(usage(format!("`{command}` has no tabular output; use --format json")));
        }
        Ok(())
    }

    fn emit<T: Serialize>(&self, command: &str, params: impl Serialize, result: &T) -> anyhow::Result<()> {
        self.sink.write_json(&self.manifest(command, params), result)
    }
}

fn selftest_cmd(ctx: &Ctx, a: &SelftestArgs) -> anyhow::Result<u8> {
    ctx.json_only("selftest")?;
    if let Some(trials) = a.random_sweep {
        let report = selftest::soundness_sweep(trials, a.min_saturation, ctx.seed)?;
        ctx.emit("selftest", a, &report)?;
        return Ok(if report.violations == 0 { 0 } else { 1 });
    }
    let conv: Gamma2Convention = a.gamma2.parse()?;
    let s = standard_observables();
    let report = if a.witness {
        let w = selftest::tightness_witness(a.eps)?;
        selftest::certify(&w.psi, &s.x, &s.y, &w.b0, &w.b1, conv)?
    } else if a.honest {
        selftest::certify(&StateVector::psi_plus(), &s.x, &s.y, &s.x.on(1), &s.y.on(1), conv)?
    } else {
        return Err(usage("choose one of --honest, --witness or --random-sweep"));
    };
    ctx.emit("selftest", a, &report)?;
    Ok(if report.bound_holds { 0 } else { 1 })
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad grid {spec:?}; expected start:stop:step")))?;
    let [start, stop, step] = parts[..] else {
        return Err(usage(format!("bad grid {spec:?}; expected start:stop:step")));
    };
    if !(step > 0.0) || stop < start {
        return Err(usage(format!("bad grid {spec:?}")));
    }
    // Integer stepping avoids accumulated drift in the grid points.
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn counts_cmd(ctx: &Ctx, a: &CountsArgs) -> anyhow::Result<u8> {
    if a.curve {
        let grid = parse_grid(&a.d_grid)?;
        let rows = game::count_curve_data(&grid, a.c_iid, a.c_noniid)?;
        let manifest = ctx.manifest("counts", a);
        match ctx.format {
            Format::Csv => ctx.sink.write_csv(&manifest, &game::count_curve_csv(&rows))?,
            Format::Json => ctx.sink.write_json(&manifest, &rows)?,
        }
        return Ok(0);
    }
    ctx.json_only("counts")?;
    if let Some(eps) = a.rounds_for {
        ctx.emit("counts", a, &game::required_rounds(eps)?)?;
        return Ok(0);
    }
    if let Some(m) = a.ideal_pairs {
        #[derive(Serialize)]
        struct Pairs {
            m: u64,
            c: f64,
            pairs: f64,
        }
        let cc = a.c.unwrap_or(1.0);
        ctx.emit("counts", a, &Pairs { m, c: cc, pairs: vdqc::ideal_pair_count(m, cc)? })?;
        return Ok(0);
    }
    let (Some(cc), Some(d), Some(setting)) = (a.c, a.d, a.setting.as_deref()) else {
        return Err(usage("need --c, --D and --setting (or --curve, --rounds-for, --ideal-pairs)"));
    };
    let setting: CountSetting = setting.parse()?;
    ctx.emit("counts", a, &game::measurement_count(cc, d, setting)?)?;
    Ok(0)
}

fn pauli_pair(spec: &str) -> anyhow::Result<(Observable, Observable)> {
    let s = standard_observables();
    let pick = |ch: char| match ch {
        'x' => Ok(s.x.clone()),
        'y' => Ok(s.y.clone()),
        'z' => Ok(s.z.clone()),
        _ => Err(usage(format!("bad Pauli letter {ch:?} in {spec:?}"))),
    };
    let chars: Vec<char> = spec.to_ascii_lowercase().chars().collect();
    let [a, b] = chars[..] else {
        return Err(usage(format!("--alice takes two letters, got {spec:?}")));
    };
    if a == b {
        return Err(usage("Alice's observables must differ"));
    }
    Ok((pick(a)?, pick(b)?))
}

#[derive(Serialize)]
struct GameSummary {
    k: usize,
    correlation_value: f64,
    c0: f64,
    c1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    transcript: Option<game::GameTranscript>,
}

#[derive(Serialize)]
struct RepeatedSummary {
    k: usize,
    repetitions: usize,
    mean_correlation_value: f64,
    min_correlation_value: f64,
    max_correlation_value: f64,
    correlation_values: Vec<f64>,
}

fn game_cmd(ctx: &Ctx, a: &GameArgs) -> anyhow::Result<u8> {
    ctx.json_only("game")?;
    let strategy: ProverStrategy = a.strategy.parse()?;
    if let Some(deltas) = &a.azuma {
        let cells = game::azuma_tail_experiment(&strategy, deltas, a.n, a.repetitions, ctx.seed)?;
        ctx.emit("game", a, &cells)?;
        return Ok(if cells.iter().all(|c| c.holds) { 0 } else { 1 });
    }
    if let Some(eps) = a.extract {
        let cfg = ExtractionConfig { rounds: None, round_limit: a.round_limit };
        let report = game::extraction_experiment(&strategy, eps, &cfg, &mut stream_rng(ctx.seed, 0))?;
        ctx.emit("game", a, &report)?;
        return Ok(0);
    }
    let (a0, a1) = pauli_pair(&a.alice)?;
    if a.repetitions <= 1 {
        let t = game::play_game(&strategy, a.k, &a0, &a1, &mut stream_rng(ctx.seed, 0))?;
        let (c0, c1) = game::averaged_correlations(&t);
        let summary = GameSummary {
            k: t.k(),
            correlation_value: game::correlation_value(&t),
            c0,
            c1,
            transcript: a.transcript.then_some(t),
        };
        ctx.emit("game", a, &summary)?;
        return Ok(0);
    }
    let games = game::repeat_games(&strategy, a.k, &a0, &a1, a.repetitions, ctx.seed)?;
    let values: Vec<f64> = games.iter().map(game::correlation_value).collect();
    let summary = RepeatedSummary {
        k: a.k,
        repetitions: a.repetitions,
        mean_correlation_value: values.iter().sum::<f64>() / values.len() as f64,
        min_correlation_value: values.iter().copied().fold(f64::INFINITY, f64::min),
        max_correlation_value: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        correlation_values: values,
    };
    ctx.emit("game", a, &summary)?;
    Ok(0)
}

fn rigidity_cmd(ctx: &Ctx, a: &RigidityArgs) -> anyhow::Result<u8> {
    ctx.json_only("rigidity")?;
    if let Some(n) = a.shift_check {
        #[derive(Serialize)]
        struct Shift {
            matrices: usize,
            max_residual: f64,
        }
        let mut rng = stream_rng(ctx.seed, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            // Generic complex matrix: neither Hermitian nor unitary.
            let m = steerkit::qmath::random::random_unitary(2, &mut rng)
                + random_density(&[2], 2, &mut rng)?.matrix() * c(2.0, 0.0);
            worst = worst.max(rigidity::shift_identity_check(&m)?);
        }
        ctx.emit("rigidity", a, &Shift { matrices: n, max_residual: worst })?;
        return Ok(if worst < 1e-11 { 0 } else { 1 });
    }
    let scenario = match &a.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| usage(format!("{e:#}")))?;
            serde_json::from_str::<Scenario>(&text).map_err(|e| usage(format!("bad scenario: {e}")))?
        }
        None => {
            let pair = match a.witness {
                Some(e) => rigidity::PairSource::Witness { epsilon: e },
                None => rigidity::PairSource::Bell,
            };
            let bob = match a.witness {
                Some(e) => rigidity::BobOp::Deviated { epsilon: e },
                None => rigidity::BobOp::Honest,
            };
            Scenario {
                n_games: a.n,
                rounds_per_game: a.k,
                epsilon: a.epsilon,
                constant: a.constant,
                games: vec![rigidity::GameSpec { pair, bob }; a.n],
            }
        }
    };
    let report = rigidity::run_scenario(&scenario, &mut stream_rng(ctx.seed, 0))?;
    ctx.emit("rigidity", a, &report)?;
    Ok(if report.distance_to_ideal <= report.bound.bound { 0 } else { 1 })
}

fn steerable_cmd(ctx: &Ctx, a: &SteerableArgs) -> anyhow::Result<u8> {
    if let Some(n) = a.family_sweep {
        let rows = steer::family_sweep(n, ctx.seed, a.tol)?;
        let manifest = ctx.manifest("steerable", a);
        match ctx.format {
            Format::Csv => ctx.sink.write_csv(&manifest, &steer::family_csv(&rows))?,
            Format::Json => ctx.sink.write_json(&manifest, &rows)?,
        }
        let ok = rows.iter().all(|r| r.totally_steerable && r.crosscheck_agrees);
        return Ok(if ok { 0 } else { 1 });
    }
    ctx.json_only("steerable")?;
    if let Some(n) = a.random {
        #[derive(Serialize)]
        struct Random {
            states: usize,
            agreements: usize,
            totally_steerable: usize,
        }
        let mut rng = stream_rng(ctx.seed, 0);
        let (mut agree, mut total) = (0, 0);
        for i in 0..n {
            let rho = random_density(&[2, 2], 1 + i % 4, &mut rng)?;
            agree += steer::entanglement_crosscheck(&rho, a.tol)? as usize;
            total += steer::check_totally_steerable(&rho, a.tol)?.totally_steerable as usize;
        }
        ctx.emit("steerable", a, &Random { states: n, agreements: agree, totally_steerable: total })?;
        return Ok(if agree == n { 0 } else { 1 });
    }
    let rho = if let Some(p) = a.werner {
        steer::werner(p)?
    } else if let Some(f) = &a.form {
        if f.len() != 4 {
            return Err(usage("--form takes re_f,im_f,phi1,phi2"));
        }
        steer::general_form(&SteerableForm::new(c(f[0], f[1]), f[2], f[3]))?
    } else {
        return Err(usage("choose one of --family-sweep, --random, --werner or --form"));
    };
    #[derive(Serialize)]
    struct Single {
        verdict: steer::SteerabilityVerdict,
        crosscheck_agrees: bool,
    }
    let verdict = steer::check_totally_steerable(&rho, a.tol)?;
    let agrees = steer::entanglement_crosscheck(&rho, a.tol)?;
    ctx.emit("steerable", a, &Single { verdict, crosscheck_agrees: agrees })?;
    Ok(if agrees { 0 } else { 1 })
}

#[derive(Serialize)]
struct VdqcReport {
    stats: vdqc::AcceptanceStats,
    abort_rate: f64,
    /// First run as the server sees it.
    server_view: vdqc::ServerView,
    first_outcome: vdqc::RedactedOutcome,
    ideal_pairs: Option<f64>,
    recommended_games: f64,
}

fn vdqc_cmd(ctx: &Ctx, a: &VdqcArgs) -> anyhow::Result<u8> {
    ctx.json_only("vdqc")?;
    let server: Server = a.server.parse()?;
    let cfg = PrepConfig { m: a.m, t: a.t, lambda: a.lambda, eta: a.eta, server };
    cfg.validate()?;
    if a.runs == 0 {
        return Err(usage("--runs must be positive"));
    }
    let stats = vdqc::acceptance_experiment(&cfg, a.runs, ctx.seed)?;
    // Run 0 of the experiment, replayed for its traces.
    let first = vdqc::run_stage1(&cfg, &mut stream_rng(ctx.seed, 0))?;
    if let Some(path) = &a.audit {
        ctx.sink.write_side(path, &first.audit)?;
    }
    let m = a.m as u64;
    let report = VdqcReport {
        abort_rate: 1.0 - stats.acceptance_rate,
        server_view: first.server_view.clone(),
        first_outcome: first.outcome.redacted(),
        ideal_pairs: if m >= 2 { Some(vdqc::ideal_pair_count(m, 1.0)?) } else { None },
        recommended_games: vdqc::recommended_games(a.lambda, m)?,
        stats,
    };
    ctx.emit("vdqc", a, &report)?;
    let honest_failed = server.is_honest() && report.stats.accepted != report.stats.runs;
    Ok(if honest_failed { 1 } else { 0 })
}
