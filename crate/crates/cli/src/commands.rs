//! The five commands. Each returns a [`Summary`] or an error; the binary
//! turns these into files on stdout and exit codes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cmps_core::observables::Observer;
use cmps_core::optimize::{
    initialize_from_uniform, optimize_with, random_initial_state, OptimizeError, OptimizeOutcome, StopReason,
    TraceRecord,
};
use cmps_core::reference::{free_fermion_box, tonks_girardeau_state};
use cmps_core::uniform::{density_estimate, uniform_optimize, UniformCmps, UniformSolution};
use cmps_core::{CmpsState, HamiltonianSpec, TaylorTolerance};
use rand::SeedableRng;
use serde::Serialize;

use crate::checkpoint::{Checkpoint, StateData};
use crate::config::{InitKind, RunConfig};
use crate::error::CliError;
use crate::output::{self, CsvWriter, Header};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CMPS_OUT_DIR";

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const UNIFORM_FILE: &str = "uniform.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PROFILE_FILE: &str = "profile.csv";
pub const ENTANGLEMENT_FILE: &str = "entanglement.csv";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub cuts: Option<String>,
    /// A previously written uniform checkpoint to reuse.
    pub checkpoint: Option<PathBuf>,
}

/// `--out`, then the config's `io.out_dir`, then `$CMPS_OUT_DIR`, then
/// `cmps-out`.
pub fn output_dir(cli: Option<&Path>, config: Option<&Path>) -> PathBuf {
    cli.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cmps-out"))
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub energy: f64,
    pub particle_number: Option<f64>,
    pub particle_variance: Option<f64>,
    pub max_order_parameter: Option<f64>,
    /// Uniform energy density and particle density.
    pub energy_density: Option<f64>,
    pub density: Option<f64>,
    /// `E − L e_∞`.
    pub boundary_energy: Option<f64>,
    /// Free-fermion reference energy.
    pub reference_energy: Option<f64>,
    pub stop_reason: Option<String>,
    pub iterations: Option<usize>,
    /// The optimizer stalled; the files hold the best state reached.
    pub stalled: bool,
    pub wall_seconds: f64,
    pub out_dir: PathBuf,
}

impl Summary {
    fn new(command: &'static str, out_dir: &Path) -> Self {
        Self {
            command,
            energy: f64::NAN,
            particle_number: None,
            particle_variance: None,
            max_order_parameter: None,
            energy_density: None,
            density: None,
            boundary_energy: None,
            reference_energy: None,
            stop_reason: None,
            iterations: None,
            stalled: false,
            wall_seconds: 0.0,
            out_dir: out_dir.to_path_buf(),
        }
    }

    fn save(&self) -> Result<(), CliError> {
        let path = self.out_dir.join(SUMMARY_FILE);
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    /// Human-readable lines for stdout.
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("E = {:.10}", self.energy)];
        let mut opt = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                out.push(format!("{name} = {v:.10}"));
            }
        };
        opt("e_inf", self.energy_density);
        opt("density", self.density);
        opt("E_B", self.boundary_energy);
        opt("E_ref", self.reference_energy);
        opt("<N>", self.particle_number);
        opt("Var N", self.particle_variance);
        opt("max|<psi>|", self.max_order_parameter);
        if let Some(r) = &self.stop_reason {
            out.push(format!("stop: {r} after {} iterations", self.iterations.unwrap_or(0)));
        }
        if self.stalled {
            out.push("stalled: wrote the best state reached".into());
        }
        out.push(format!("wall time {:.2} s", self.wall_seconds));
        out
    }
}

struct Measurements {
    mean: f64,
    variance: f64,
    max_order_parameter: f64,
}

fn measure(state: &CmpsState, samples: usize, taylor: &TaylorTolerance) -> Result<Measurements, CliError> {
    let obs = Observer::new(state, taylor)?;
    let stats = obs.particle_number()?;
    let positions = output::sample_positions(samples, state.mesh().length());
    let max_order_parameter = obs.order_parameter(&positions)?.into_iter().fold(0.0, f64::max);
    Ok(Measurements {
        mean: stats.mean,
        variance: stats.variance,
        max_order_parameter,
    })
}

fn solve_uniform(config: &RunConfig, g: f64, seed: Option<u64>) -> UniformSolution {
    let mut opts = config.uniform.options();
    if let Some(s) = seed {
        opts.seed = s;
    }
    match uniform_optimize(config.uniform_bond_dim(), config.problem.mu, g, &opts) {
        Ok(sol) => sol,
        Err(stall) => {
            eprintln!(
                "uniform solve did not reach its tolerance ({:?}); using the best point",
                stall.termination
            );
            stall.best
        }
    }
}

fn initial_state(
    config: &RunConfig,
    spec: &HamiltonianSpec,
    uniform: Option<&UniformCmps>,
    seed: u64,
) -> Result<CmpsState, CliError> {
    let mesh = config.ansatz.mesh(config.problem.length)?;
    let d = config.ansatz.bond_dim;
    match (config.optimizer.init, uniform) {
        (InitKind::Uniform, Some(u)) => {
            if !config.problem.dirichlet() {
                return Err(CliError::config(
                    "optimizer.init",
                    "uniform initialization needs dirichlet walls",
                ));
            }
            if u.dim() != d {
                return Err(CliError::config(
                    "uniform.bond_dim",
                    "must equal ansatz.bond_dim for uniform initialization",
                ));
            }
            Ok(initialize_from_uniform(u, &mesh, config.optimizer.taper_width)?)
        }
        _ if config.problem.dirichlet() => Ok(random_initial_state(&mesh, d, spec, seed)),
        _ => {
            let scale = (density_estimate(spec.mu, spec.g) / d as f64).sqrt();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Ok(CmpsState::random(&mesh, d, scale, scale * scale, false, &mut rng))
        }
    }
}

/// Runs the box optimization, streaming the trace and periodic checkpoints
/// into `dir`.
fn run_box(
    config: &RunConfig,
    header: &Header,
    dir: &Path,
    state: CmpsState,
    spec: HamiltonianSpec,
    seed: u64,
) -> Result<(OptimizeOutcome, bool), CliError> {
    let mut opts = config.optimizer.options()?;
    opts.seed = seed;
    let mut trace = CsvWriter::create(&dir.join(TRACE_FILE), header, &TraceRecord::COLUMNS)?;
    let every = config.io.checkpoint_every;
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let mut failure: Option<CliError> = None;
    let mut on_record = |rec: &TraceRecord, state: &CmpsState| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<(), CliError> {
            trace.row(&output::trace_row(rec))?;
            if every > 0 && rec.iteration > 0 && rec.iteration.is_multiple_of(every) {
                trace.flush()?;
                let mut c = Checkpoint::new(&config.problem, &header.config_sha256, StateData::from_state(state));
                c.iteration = Some(rec.iteration);
                c.energy = Some(rec.energy);
                c.save(&checkpoint_path)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    };
    let result = optimize_with(state, spec, &opts, &mut on_record);
    if let Some(e) = failure {
        return Err(e);
    }
    trace.flush()?;
    let (outcome, stalled) = match result {
        Ok(o) => (o, false),
        Err(OptimizeError::Stalled { best, reason }) => {
            eprintln!("optimizer stalled: {reason}");
            (*best, true)
        }
        Err(OptimizeError::Evaluation(e)) => return Err(e.into()),
    };
    let mut c = Checkpoint::new(
        &config.problem,
        &header.config_sha256,
        StateData::from_state(&outcome.state),
    );
    c.iteration = outcome.trace.last().map(|r| r.iteration);
    c.energy = Some(outcome.report.total);
    c.save(&checkpoint_path)?;
    Ok((outcome, stalled))
}

fn stop_name(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Gradient => "gradient",
        StopReason::Flat => "flat",
        StopReason::Iterations => "iterations",
    }
}

fn fill_box(
    summary: &mut Summary,
    config: &RunConfig,
    outcome: &OptimizeOutcome,
    stalled: bool,
    samples: usize,
) -> Result<(), CliError> {
    let m = measure(&outcome.state, samples, &config.optimizer.taylor())?;
    summary.energy = outcome.report.total;
    summary.particle_number = Some(m.mean);
    summary.particle_variance = Some(m.variance);
    summary.max_order_parameter = Some(m.max_order_parameter);
    summary.stop_reason = Some(if stalled { "stalled" } else { stop_name(outcome.reason) }.into());
    summary.iterations = outcome.trace.last().map(|r| r.iteration);
    summary.stalled = stalled;
    Ok(())
}

fn context(config: &RunConfig, text: &str, over: &Overrides) -> Result<(PathBuf, Header, u64, usize), CliError> {
    let dir = output_dir(over.out.as_deref(), config.io.out_dir.as_deref());
    prepare(&dir)?;
    let header = Header {
        config_sha256: crate::config::config_hash(text),
    };
    let seed = over.seed.unwrap_or(config.optimizer.seed);
    let samples = over.samples.unwrap_or(config.io.samples);
    if samples < 2 {
        return Err(CliError::config("--samples", "must be at least 2"));
    }
    Ok((dir, header, seed, samples))
}

fn load_uniform(path: &Path, config: &RunConfig) -> Result<UniformCmps, CliError> {
    let c = Checkpoint::load(path)?;
    if c.problem.mu != config.problem.mu || c.problem.g != config.problem.g {
        return Err(CliError::checkpoint(
            path,
            "uniform state was solved for a different (μ, g)",
        ));
    }
    c.uniform_state(path)
}

/// Optimizes the box state described by `config`.
pub fn optimize(config: &RunConfig, text: &str, over: &Overrides) -> Result<Summary, CliError> {
    let start = Instant::now();
    let (dir, header, seed, samples) = context(config, text, over)?;
    let mesh = config.ansatz.mesh(config.problem.length)?;
    let spec = config.problem.hamiltonian(&mesh)?;
    let uniform = match config.optimizer.init {
        InitKind::Uniform => {
            // the first coupling stage, if any, is where the box run starts
            let g = config
                .optimizer
                .coupling_schedule
                .first()
                .map_or(config.problem.g, |c| c.g);
            Some(solve_uniform(config, g, over.seed).state)
        }
        InitKind::Random => None,
    };
    let state = initial_state(config, &spec, uniform.as_ref(), seed)?;
    let (outcome, stalled) = run_box(config, &header, &dir, state, spec, seed)?;
    let mut summary = Summary::new("optimize", &dir);
    fill_box(&mut summary, config, &outcome, stalled, samples)?;
    summary.wall_seconds = start.elapsed().as_secs_f64();
    summary.save()?;
    Ok(summary)
}

/// Solves the uniform problem at `(D, μ, g)` and writes its checkpoint.
pub fn uniform(config: &RunConfig, text: &str, over: &Overrides) -> Result<Summary, CliError> {
    let start = Instant::now();
    let (dir, header, _, _) = context(config, text, over)?;
    let sol = solve_uniform(config, config.problem.g, over.seed.or(Some(config.uniform.seed)));
    let mut c = Checkpoint::new(
        &config.problem,
        &header.config_sha256,
        StateData::from_uniform(&sol.state),
    );
    c.iteration = Some(sol.iterations);
    c.energy = Some(sol.energy);
    c.save(&dir.join(UNIFORM_FILE))?;
    let mut summary = Summary::new("uniform", &dir);
    summary.energy = sol.energy;
    summary.energy_density = Some(sol.energy);
    summary.density = Some(sol.density);
    summary.iterations = Some(sol.iterations);
    summary.wall_seconds = start.elapsed().as_secs_f64();
    summary.save()?;
    Ok(summary)
}

/// Uniform solution, box optimization and the boundary energy `E − L e_∞`.
pub fn casimir(config: &RunConfig, text: &str, over: &Overrides) -> Result<Summary, CliError> {
    let start = Instant::now();
    let (dir, header, seed, samples) = context(config, text, over)?;
    let (sol_state, e_inf, density) = match &over.checkpoint {
        Some(path) => {
            let u = load_uniform(path, config)?;
            let (e, n) = u.energy_density(config.problem.mu, config.problem.g);
            (u, e, n)
        }
        None => {
            let sol = solve_uniform(config, config.problem.g, over.seed.or(Some(config.uniform.seed)));
            (sol.state, sol.energy, sol.density)
        }
    };
    let mut c = Checkpoint::new(
        &config.problem,
        &header.config_sha256,
        StateData::from_uniform(&sol_state),
    );
    c.energy = Some(e_inf);
    c.save(&dir.join(UNIFORM_FILE))?;
    let mesh = config.ansatz.mesh(config.problem.length)?;
    let spec = config.problem.hamiltonian(&mesh)?;
    let state = initial_state(config, &spec, Some(&sol_state), seed)?;
    let (outcome, stalled) = run_box(config, &header, &dir, state, spec, seed)?;
    let mut summary = Summary::new("casimir", &dir);
    fill_box(&mut summary, config, &outcome, stalled, samples)?;
    summary.energy_density = Some(e_inf);
    summary.density = Some(density);
    summary.boundary_energy = Some(outcome.report.total - config.problem.length * e_inf);
    summary.wall_seconds = start.elapsed().as_secs_f64();
    summary.save()?;
    Ok(summary)
}

/// The exact hard-core state for the modes filled at `μ`, on the configured
/// mesh, with its energy and the free-fermion value.
pub fn tg_reference(config: &RunConfig, text: &str, over: &Overrides) -> Result<Summary, CliError> {
    let start = Instant::now();
    let (dir, header, _, samples) = context(config, text, over)?;
    let (n, exact) = free_fermion_box(config.problem.mu, config.problem.length);
    if n == 0 {
        return Err(CliError::config("problem.mu", "no single-particle mode lies below μ"));
    }
    let mesh = config.ansatz.mesh(config.problem.length)?;
    let state = tonks_girardeau_state(n, &mesh)?;
    let spec = config.problem.hamiltonian(&mesh)?;
    let taylor = config.optimizer.taylor();
    let (report, _) = cmps_core::energy::evaluate_energy(&state, &spec, &taylor)?;
    let mut c = Checkpoint::new(&config.problem, &header.config_sha256, StateData::from_state(&state));
    c.energy = Some(report.total);
    c.save(&dir.join(CHECKPOINT_FILE))?;
    let m = measure(&state, samples, &taylor)?;
    let mut summary = Summary::new("tg-reference", &dir);
    summary.energy = report.total;
    summary.reference_energy = Some(exact);
    summary.particle_number = Some(m.mean);
    summary.particle_variance = Some(m.variance);
    summary.max_order_parameter = Some(m.max_order_parameter);
    summary.wall_seconds = start.elapsed().as_secs_f64();
    summary.save()?;
    Ok(summary)
}

/// Profile and entanglement CSVs for a box checkpoint.
pub fn observe(checkpoint: &Path, over: &Overrides, taylor: &TaylorTolerance) -> Result<Summary, CliError> {
    let start = Instant::now();
    let c = Checkpoint::load(checkpoint)?;
    let state = c.box_state(checkpoint)?;
    let dir = output_dir(over.out.as_deref(), None);
    prepare(&dir)?;
    let header = Header {
        config_sha256: c.config_sha256.clone(),
    };
    let length = state.mesh().length();
    let samples = over.samples.unwrap_or(201);
    if samples < 2 {
        return Err(CliError::config("--samples", "must be at least 2"));
    }
    let cuts = output::parse_cuts(over.cuts.as_deref().unwrap_or("uniform:99"), length)
        .map_err(|e| CliError::config("--cuts", e))?;
    let spec = c.problem.hamiltonian(state.mesh())?;
    let obs = Observer::new(&state, taylor)?;
    let positions = output::sample_positions(samples, length);
    let profile = obs.profiles(&spec, &positions)?;
    output::write_profile(&dir.join(PROFILE_FILE), &header, &profile)?;
    let ent = obs.entanglement(&cuts)?;
    output::write_entanglement(&dir.join(ENTANGLEMENT_FILE), &header, state.dim(), &ent)?;
    let stats = obs.particle_number()?;
    let report = cmps_core::energy::energy(&state, &spec, obs.envelopes())?;
    let mut summary = Summary::new("observe", &dir);
    summary.energy = report.total;
    summary.particle_number = Some(stats.mean);
    summary.particle_variance = Some(stats.variance);
    summary.max_order_parameter = Some(profile.order_parameter.iter().copied().fold(0.0, f64::max));
    summary.wall_seconds = start.elapsed().as_secs_f64();
    Ok(summary)
}
