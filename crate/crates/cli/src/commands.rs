use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use qmetro::classical::{ClassicalChain, DEFAULT_N_MAX};
use qmetro::gqpe::{filter_sweep, plan_resources, Backend, BackendKind, EnergyMeter, GqpeConfig};
use qmetro::models::file::{ModelFile, ObservableFile};
use qmetro::models::{build_spectral, AcceptanceFunction, DensityMatrix, SpectralHamiltonian};
use qmetro::par::Exec;
use qmetro::qoracle::{branch_superoperators_guarded, db_report, stationarity_report, TERM_GUARD};
use qmetro::quantum::{QuantumChain, TruncationPolicy};
use qmetro::rng::RngStreams;

use crate::config::{self, required};
use crate::sink::{chain_path, summary_path, write_json, JsonlSink};
use crate::{CliError, CliResult};

/// Settings shared by both chain commands. Burn-in and thinning are only
/// recorded here; `report` applies them.
#[derive(Debug, Clone, Serialize)]
struct RunSettings {
    steps: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    nmax: usize,
    chains: usize,
}

fn run_settings(
    steps: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    nmax: Option<usize>,
    chains: Option<usize>,
) -> CliResult<RunSettings> {
    let s = RunSettings {
        steps: required(steps, "steps")?,
        burnin: burnin.unwrap_or(0),
        thin: thin.unwrap_or(1),
        seed: seed.unwrap_or(0),
        nmax: nmax.unwrap_or(DEFAULT_N_MAX),
        chains: chains.unwrap_or(1),
    };
    if s.steps <= s.burnin {
        return Err(CliError::Config(format!(
            "--steps {} must exceed --burnin {}",
            s.steps, s.burnin
        )));
    }
    if s.thin < 1 || s.chains < 1 || s.nmax < 1 {
        return Err(CliError::Config(
            "--thin, --chains and --nmax must be at least 1".into(),
        ));
    }
    Ok(s)
}

fn check_epsilon(epsilon: f64) -> CliResult<f64> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(epsilon)
    } else {
        Err(CliError::Config(format!("--epsilon {epsilon} not in (0,1)")))
    }
}

#[derive(Debug, Clone, Serialize)]
struct ChainStats {
    file: PathBuf,
    truncated: usize,
    mean_branches: f64,
}

#[derive(Debug, Serialize)]
struct ChainSummary<'a, M: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    model: M,
    #[serde(flatten)]
    run: &'a RunSettings,
    chains_out: Vec<ChainStats>,
}

/// Runs `run(i, path)` for every chain and keeps the outputs in chain order.
fn run_chains(
    out: &Path,
    chains: usize,
    run: impl Fn(usize, &Path) -> CliResult<ChainStats> + Sync + Send,
) -> CliResult<Vec<ChainStats>> {
    Exec::Parallel
        .map_indexed(chains, |i| run(i, &chain_path(out, i, chains)))
        .into_iter()
        .collect()
}

fn finish<M: Serialize>(
    command: &'static str,
    model: M,
    run: &RunSettings,
    out: &Path,
    stats: Vec<ChainStats>,
) -> CliResult<()> {
    let summary = ChainSummary {
        command,
        model,
        run,
        chains_out: stats,
    };
    write_json(Some(&summary_path(out)), &summary)?;
    write_json(None, &summary)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalArgs {
    /// Model file (classical-ising or classical).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Regularization of the acceptance function [default: 0.05].
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Steps discarded by `report` [default: 0].
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Thinning applied by `report` [default: 1].
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Branch cap per step [default: 10000].
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Independent chains, written to `<stem>-<i>.<ext>` when more than one.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Initial state index [default: 0].
    #[arg(long)]
    pub init: Option<usize>,
    /// JSONL sample file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ClassicalRecord {
    step: usize,
    state: usize,
    energy: f64,
    branches: usize,
}

#[derive(Debug, Serialize)]
struct ClassicalModel<'a> {
    model: &'a Path,
    temperature: f64,
    delta: f64,
    init: usize,
}

pub fn classical_chain(args: ClassicalArgs) -> CliResult<()> {
    let model_path = required(args.model, "model")?;
    let t = required(args.temperature, "temperature")?;
    let delta = args.delta.unwrap_or(AcceptanceFunction::DEFAULT_DELTA);
    let out = required(args.out, "out")?;
    let run = run_settings(args.steps, args.burnin, args.thin, args.seed, args.nmax, args.chains)?;
    let init = args.init.unwrap_or(0);

    let (sys, kernel) = ModelFile::load(&model_path)?.classical(t)?;
    if init >= sys.num_states() {
        return Err(CliError::Config(format!(
            "--init {init} outside 0..{}",
            sys.num_states()
        )));
    }
    let mut chain = ClassicalChain::new(sys, kernel, AcceptanceFunction::new(delta, t)?);
    chain.n_max = run.nmax;
    let streams = RngStreams::new(run.seed);

    let stats = run_chains(&out, run.chains, |i, path| {
        let mut sink = JsonlSink::create(path)?;
        let mut branches = 0usize;
        let mut failure = None;
        let result = chain.run(init, run.steps, &streams, i as u64, |k, rec| {
            branches += rec.branches;
            let record = ClassicalRecord {
                step: k,
                state: rec.state,
                energy: chain.system.energy(rec.state),
                branches: rec.branches,
            };
            sink.write(&record).map_err(|e| {
                failure = Some(e);
                qmetro::Error::Invalid {
                    what: "sink",
                    reason: "write failed".into(),
                }
            })
        });
        sink.flush()?;
        if let Some(e) = failure {
            return Err(e);
        }
        result?;
        Ok(ChainStats {
            file: path.to_path_buf(),
            truncated: 0,
            mean_branches: branches as f64 / run.steps as f64,
        })
    })?;
    let model = ClassicalModel {
        model: &model_path,
        temperature: t,
        delta,
        init,
    };
    finish("classical-chain", model, &run, &out, stats)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumArgs {
    /// Model file (dense, tfim or a classical model as a diagonal H).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Local observable file.
    #[arg(long)]
    pub observable: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Grid-matching integer [default: 1].
    #[arg(long)]
    pub z: Option<u32>,
    /// direct | circuit [default: direct].
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// fail | continue: what to do when a step reaches --nmax [default: fail].
    #[arg(long)]
    pub truncation: Option<String>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct QuantumRecord {
    step: usize,
    omega0_raw: f64,
    omega0: f64,
    d0: usize,
    beta_d0: f64,
    branches: usize,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    truncated: bool,
}

#[derive(Debug, Serialize)]
struct QuantumModel<'a> {
    model: &'a Path,
    observable: &'a Path,
    temperature: f64,
    delta: f64,
    backend: BackendKind,
    truncation: TruncationPolicy,
    gqpe: GqpeConfig,
}

fn parse_enum<T: for<'de> Deserialize<'de>>(value: Option<String>, flag: &str) -> CliResult<Option<T>> {
    value
        .map(|v| {
            serde_json::from_value(serde_json::Value::String(v.clone()))
                .map_err(|_| CliError::Config(format!("invalid --{flag} '{v}'")))
        })
        .transpose()
}

fn load_hamiltonian(path: &Path) -> CliResult<SpectralHamiltonian> {
    let model = ModelFile::load(path)?;
    Ok(build_spectral(&model.hamiltonian()?, model.e_max_pad())?)
}

pub fn quantum_chain(args: QuantumArgs) -> CliResult<()> {
    let model_path = required(args.model, "model")?;
    let obs_path = required(args.observable, "observable")?;
    let t = required(args.temperature, "temperature")?;
    let epsilon = check_epsilon(required(args.epsilon, "epsilon")?)?;
    let z = args.z.unwrap_or(1);
    let backend: BackendKind = parse_enum(args.backend, "backend")?.unwrap_or_default();
    let truncation: TruncationPolicy = parse_enum(args.truncation, "truncation")?.unwrap_or_default();
    let delta = args.delta.unwrap_or(AcceptanceFunction::DEFAULT_DELTA);
    let out = required(args.out, "out")?;
    let run = run_settings(args.steps, args.burnin, args.thin, args.seed, args.nmax, args.chains)?;

    let h = load_hamiltonian(&model_path)?;
    let obs_file = ObservableFile::load(&obs_path)?;
    let b = obs_file.observable()?;
    let kernel = obs_file.kernel()?;
    let af = AcceptanceFunction::new(delta, t)?;
    let cfg = plan_resources(epsilon, h.e_max(), t, z)?;
    let meter = Backend::build(backend, &h, &cfg)?;
    meter.check_alignment(t)?;
    let mut chain = QuantumChain::new(meter, b, kernel, af);
    chain.n_max = run.nmax;
    chain.truncation = truncation;
    let streams = RngStreams::new(run.seed);
    let rho0 = DensityMatrix::maximally_mixed(h.dim());

    let stats = run_chains(&out, run.chains, |i, path| {
        let mut sink = JsonlSink::create(path)?;
        let (mut branches, mut truncated) = (0usize, 0usize);
        let mut failure = None;
        let result = chain.run(&rho0, run.steps, &streams, i as u64, |k, rec, _| {
            branches += rec.branches;
            truncated += rec.truncated as usize;
            let record = QuantumRecord {
                step: k,
                omega0_raw: rec.omega0_raw,
                omega0: rec.omega0_corrected,
                d0: rec.d0,
                beta_d0: chain.observable.value(rec.d0),
                branches: rec.branches,
                truncated: rec.truncated,
            };
            sink.write(&record).map_err(|e| {
                failure = Some(e);
                qmetro::Error::Invalid {
                    what: "sink",
                    reason: "write failed".into(),
                }
            })
        });
        sink.flush()?;
        if let Some(e) = failure {
            return Err(e);
        }
        result?;
        Ok(ChainStats {
            file: path.to_path_buf(),
            truncated,
            mean_branches: branches as f64 / run.steps as f64,
        })
    })?;
    let model = QuantumModel {
        model: &model_path,
        observable: &obs_path,
        temperature: t,
        delta,
        backend,
        truncation,
        gqpe: cfg,
    };
    finish("quantum-chain", model, &run, &out, stats)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Spectral bound E_max.
    #[arg(long)]
    pub emax: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub z: Option<u32>,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn planned(epsilon: Option<f64>, emax: Option<f64>, temperature: Option<f64>, z: Option<u32>) -> CliResult<GqpeConfig> {
    let epsilon = check_epsilon(required(epsilon, "epsilon")?)?;
    let emax = required(emax, "emax")?;
    let t = required(temperature, "temperature")?;
    Ok(plan_resources(epsilon, emax, t, z.unwrap_or(1))?)
}

pub fn plan(args: PlanArgs) -> CliResult<()> {
    let cfg = planned(args.epsilon, args.emax, args.temperature, args.z)?;
    write_json(args.out.as_deref(), &cfg)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GqpeVerifyArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub emax: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub z: Option<u32>,
    /// Sweep points over |omega| <= E_max + omega_max [default: 64 per grid step, at least 4001].
    #[arg(long)]
    pub points: Option<usize>,
    /// CSV output instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `--config` may hold a plan as printed by `plan` (recognized by its
/// `lambda` key) or ordinary flag overrides.
pub fn gqpe_verify(args: GqpeVerifyArgs, file: Option<&Path>) -> CliResult<()> {
    let (args, cfg) = match file.map(config::read_object).transpose()? {
        Some(map) if map.contains_key("lambda") => {
            let cfg: GqpeConfig = serde_json::from_value(serde_json::Value::Object(map))
                .map_err(|e| CliError::Config(format!("plan file: {e}")))?;
            cfg.validate()?;
            (args, cfg)
        }
        Some(map) => {
            let args = config::overlay(args, map)?;
            let cfg = planned(args.epsilon, args.emax, args.temperature, args.z)?;
            (args, cfg)
        }
        None => {
            let cfg = planned(args.epsilon, args.emax, args.temperature, args.z)?;
            (args, cfg)
        }
    };
    let auto = ((2.0 * (cfg.e_max + cfg.omega_max) / cfg.spacing()) * 64.0).ceil() as usize + 1;
    let points = args.points.unwrap_or(auto.max(4001));
    if points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    let sweep = filter_sweep(&cfg, points, Exec::Parallel);
    let mut csv = String::from("omega,g,g_tilde,rel_err\n");
    for s in &sweep {
        csv.push_str(&format!("{:e},{:e},{:e},{:e}\n", s.omega, s.g, s.g_tilde, s.rel_err));
    }
    let worst = sweep.iter().map(|s| s.rel_err).fold(0.0, f64::max);
    eprintln!("max |g - g~|/g(0) = {worst:e} (epsilon {})", cfg.epsilon);
    match args.out {
        Some(p) => std::fs::write(&p, csv).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbVerifyArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub observable: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub z: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Highest branch enumerated [default: 2].
    #[arg(long)]
    pub nmax: Option<usize>,
    /// direct | circuit [default: direct].
    #[arg(long)]
    pub backend: Option<String>,
    /// Scale t_max by this factor, breaking grid matching (negative control).
    #[arg(long)]
    pub detune: Option<f64>,
    /// Cap on enumerated terms [default: 1e8].
    #[arg(long)]
    pub guard: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct DbOutput {
    gqpe: GqpeConfig,
    nmax: usize,
    detailed_balance: qmetro::qoracle::DetailedBalanceReport,
    stationarity: qmetro::qoracle::StationarityReport,
}

pub fn db_verify(args: DbVerifyArgs) -> CliResult<()> {
    let h = load_hamiltonian(&required(args.model, "model")?)?;
    let obs_file = ObservableFile::load(required(args.observable, "observable")?)?;
    let t = required(args.temperature, "temperature")?;
    let epsilon = check_epsilon(required(args.epsilon, "epsilon")?)?;
    let backend: BackendKind = parse_enum(args.backend, "backend")?.unwrap_or_default();
    let nmax = args.nmax.unwrap_or(2);
    let af = AcceptanceFunction::new(args.delta.unwrap_or(AcceptanceFunction::DEFAULT_DELTA), t)?;
    let mut cfg = plan_resources(epsilon, h.e_max(), t, args.z.unwrap_or(1))?;
    if let Some(factor) = args.detune {
        cfg = cfg.detuned(factor)?;
    }
    let meter = Backend::build(backend, &h, &cfg)?;
    let ops = branch_superoperators_guarded(
        &meter,
        &obs_file.observable()?,
        &obs_file.kernel()?,
        &af,
        nmax,
        Exec::Parallel,
        args.guard.unwrap_or(TERM_GUARD),
    )?;
    let output = DbOutput {
        gqpe: cfg,
        nmax,
        detailed_balance: db_report(&ops, t),
        stationarity: stationarity_report(&ops, t),
    };
    write_json(args.out.as_deref(), &output)
}
