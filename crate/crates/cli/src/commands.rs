use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qdiscrim::config::{ExperimentConfig, Job, ProtocolKind, TableKind};
use qdiscrim::controls::ControlField;
use qdiscrim::dynamics::{propagate_pair, DiscriminationProblem, NoiseKind, Trajectory};
use qdiscrim::io;
use qdiscrim::krotov::{optimize_fields, KrotovState, StopReason};
use qdiscrim::protocols::{
    fit_effective_time, m_numeric, qsl_time, ramsey_gamma, EffectiveTimeFit, MCurve, Protocol, SweepRow,
};

use crate::manifest::{hash_file, JobStatus, RunManifest};
use crate::pool::{effective_workers, run_jobs};
use crate::{CliError, FitArgs, GlobalArgs, NoiseArg, QslArgs};

struct Loaded {
    config: ExperimentConfig,
    hash: String,
    out: PathBuf,
    workers: usize,
}

fn load(global: &GlobalArgs) -> Result<Loaded, CliError> {
    let path = global.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if global.workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let workers = effective_workers(global.workers.or(config.workers));
    let out = global.out.clone().unwrap_or_else(|| config.outputs.directory.clone());
    fs::create_dir_all(&out)?;
    Ok(Loaded { hash: hash_file(path)?, config, out, workers })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn zero_fields(problem: &DiscriminationProblem) -> [ControlField; 3] {
    let zero = ControlField::zeros(&problem.grid);
    [zero.clone(), zero.clone(), zero]
}

/// Fields a non-optimizing run applies: warm-start files, guesses, or none.
fn fixed_fields(
    config: &ExperimentConfig,
    problem: &DiscriminationProblem,
    job: &Job,
) -> Result<[ControlField; 3], CliError> {
    if let Some(paths) = config.krotov.as_ref().and_then(|k| k.warm_start.as_ref()) {
        return read_fields(paths, problem);
    }
    match config.protocol {
        ProtocolKind::Ramsey => Ok(zero_fields(problem)),
        ProtocolKind::Optimize => Ok(config.guess_fields(problem, job)?),
    }
}

fn read_fields(paths: &[PathBuf; 3], problem: &DiscriminationProblem) -> Result<[ControlField; 3], CliError> {
    let mut fields = Vec::with_capacity(3);
    for path in paths {
        let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let samples = io::read_field(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        fields
            .push(samples.into_field(&problem.grid).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    Ok(fields.try_into().expect("three paths"))
}

fn job_suffix(jobs: &[Job], job: &Job) -> String {
    if jobs.len() == 1 {
        String::new()
    } else {
        format!("_{:03}", job.index)
    }
}

fn status_ok(job: &Job) -> JobStatus {
    JobStatus {
        index: job.index,
        delta_b: job.delta_b,
        t_final: job.t_final,
        status: "ok".into(),
        iterations: None,
        stop_reason: None,
        message: None,
    }
}

fn status_failed(job: &Job, message: String) -> JobStatus {
    JobStatus { status: "failed".into(), message: Some(message), ..status_ok(job) }
}

fn stop_reason_name(state: &KrotovState) -> String {
    match state.stop_reason {
        Some(StopReason::Converged) => "converged",
        Some(StopReason::MaxIterations) => "max_iterations",
        Some(StopReason::NothingToOptimize) => "nothing_to_optimize",
        None => "running",
    }
    .to_string()
}

pub fn propagate(global: &GlobalArgs) -> Result<Vec<PathBuf>, CliError> {
    let run = load(global)?;
    let config = &run.config;
    let jobs = config.jobs()?;
    let results = run_jobs(&jobs, run.workers, |job| -> Result<(DiscriminationProblem, [Trajectory; 2]), CliError> {
        let problem = config.problem_for(job)?;
        let fields = fixed_fields(config, &problem, job)?;
        let pair = propagate_pair(&problem, &fields).map_err(|e| CliError::Numerical(e.to_string()))?;
        Ok((problem, pair))
    })?;
    let mut manifest = RunManifest::new("propagate", run.hash.clone(), config.seed);
    let mut files = Vec::new();
    for (job, result) in jobs.iter().zip(results) {
        let (problem, pair) = result?;
        let suffix = job_suffix(&jobs, job);
        if config.outputs.wants(TableKind::Trajectory) {
            let path = run.out.join(format!("trajectory{suffix}.csv"));
            io::write_trajectory(create(&path)?, &problem.grid, &pair)?;
            files.push(path);
        }
        if config.outputs.wants(TableKind::FinalStates) {
            let path = run.out.join(format!("final_states{suffix}.csv"));
            let states = [pair[0].final_state().map_err(numerical)?, pair[1].final_state().map_err(numerical)?];
            io::write_final_states(create(&path)?, &states)?;
            files.push(path);
        }
        manifest.jobs.push(status_ok(job));
    }
    files.push(manifest.write(&run.out, &files)?);
    Ok(files)
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn run_optimization(config: &ExperimentConfig, job: &Job) -> Result<(DiscriminationProblem, KrotovState), CliError> {
    let problem = config.problem_for(job)?;
    let fields = match config.krotov.as_ref().and_then(|k| k.warm_start.as_ref()) {
        Some(paths) => read_fields(paths, &problem)?,
        None => config.guess_fields(&problem, job)?,
    };
    let shapes = config.shapes(&problem.grid)?;
    let state = optimize_fields(&problem, fields, &config.krotov_config(&problem.grid), &shapes)?;
    if state.stop_reason == Some(StopReason::MaxIterations) {
        log::info!(
            "δB = {}, T = {}: iteration cap reached before ΔJ_T fell below the tolerance (J_T = {:.6e})",
            job.delta_b,
            job.t_final,
            state.jt()
        );
    }
    Ok((problem, state))
}

pub fn optimize(global: &GlobalArgs) -> Result<Vec<PathBuf>, CliError> {
    let run = load(global)?;
    let config = &run.config;
    if config.krotov.is_none() {
        return Err(CliError::Config("optimize needs a [krotov] block".into()));
    }
    let jobs = config.jobs()?;
    let [job] = jobs.as_slice() else {
        return Err(CliError::Config(format!(
            "optimize runs one (delta_b, t_final) pair, config has {}; use sweep",
            jobs.len()
        )));
    };
    let (problem, state) = run_optimization(config, job)?;
    if state.stop_reason == Some(StopReason::MaxIterations) {
        log::warn!("not converged after {} iterations; results are the last iterate", state.iterations());
    }
    let fd = config.analysis.qfi_delta_b;
    let mut files = Vec::new();
    let out = &run.out;
    if config.outputs.wants(TableKind::Convergence) {
        let path = out.join("convergence.csv");
        io::write_convergence(create(&path)?, &state.records)?;
        files.push(path);
    }
    if config.outputs.wants(TableKind::Fields) {
        for (name, field) in ["x", "y", "z"].iter().zip(&state.fields) {
            let path = out.join(format!("field_{name}.csv"));
            io::write_field(create(&path)?, &problem.grid, field)?;
            files.push(path);
        }
    }
    if config.outputs.wants(TableKind::FinalStates) {
        let path = out.join("final_states.csv");
        io::write_final_states(create(&path)?, &state.final_states()?)?;
        files.push(path);
    }
    if config.outputs.wants(TableKind::Trajectory) {
        let path = out.join("trajectory.csv");
        io::write_trajectory(create(&path)?, &problem.grid, &state.forward)?;
        files.push(path);
    }
    if config.outputs.wants(TableKind::Sweep) {
        let mut rows = vec![
            SweepRow::ramsey(&problem, fd)?,
            SweepRow::evaluate(&problem, &state.fields, Protocol::Optimized, fd)?,
        ];
        rows.sort_by(SweepRow::order);
        let path = out.join("sweep.csv");
        io::write_sweep(create(&path)?, &rows)?;
        files.push(path);
    }
    let mut manifest = RunManifest::new("optimize", run.hash.clone(), config.seed);
    manifest.jobs.push(JobStatus {
        iterations: Some(state.iterations()),
        stop_reason: Some(stop_reason_name(&state)),
        ..status_ok(job)
    });
    files.push(manifest.write(out, &files)?);
    Ok(files)
}

struct JobOutcome {
    rows: Vec<SweepRow>,
    status: JobStatus,
}

fn sweep_job(config: &ExperimentConfig, job: &Job) -> JobOutcome {
    let fd = config.analysis.qfi_delta_b;
    let attempt = || -> Result<(Vec<SweepRow>, JobStatus), CliError> {
        let problem = config.problem_for(job)?;
        let mut rows = vec![SweepRow::ramsey(&problem, fd)?];
        let mut status = status_ok(job);
        if config.protocol == ProtocolKind::Optimize {
            let (problem, state) = run_optimization(config, job)?;
            rows.push(SweepRow::evaluate(&problem, &state.fields, Protocol::Optimized, fd)?);
            status.iterations = Some(state.iterations());
            status.stop_reason = Some(stop_reason_name(&state));
        }
        Ok((rows, status))
    };
    match attempt() {
        Ok((rows, status)) => JobOutcome { rows, status },
        Err(e) => {
            log::error!("job {} (δB = {}, T = {}) failed: {e}", job.index, job.delta_b, job.t_final);
            JobOutcome { rows: Vec::new(), status: status_failed(job, e.to_string()) }
        }
    }
}

/// Ramsey `min_t (1 − D_tr)` for one `δB`, from a free evolution up to the speed limit.
fn ramsey_m(config: &ExperimentConfig, delta_b: f64) -> Result<f64, CliError> {
    let job = Job { index: 0, delta_b, t_final: qsl_time(delta_b)? };
    let problem = config.problem_for(&job)?;
    let [a, b] = propagate_pair(&problem, &zero_fields(&problem)).map_err(numerical)?;
    Ok(m_numeric(&a, &b)?)
}

fn nominal_gamma(kind: NoiseKind, decay_time: Option<f64>) -> f64 {
    decay_time.map_or(0.0, |tau| ramsey_gamma(kind, tau))
}

pub fn sweep(global: &GlobalArgs) -> Result<Vec<PathBuf>, CliError> {
    let run = load(global)?;
    let config = &run.config;
    let jobs = config.jobs()?;
    log::info!("{} jobs on {} workers", jobs.len(), run.workers);
    let outcomes = run_jobs(&jobs, run.workers, |job| sweep_job(config, job))?;

    let mut deltas: Vec<f64> = jobs.iter().map(|j| j.delta_b).collect();
    deltas.dedup();
    let ramsey_ms = run_jobs(&deltas, run.workers, |&d| ramsey_m(config, d))?;

    let mut rows: Vec<SweepRow> = outcomes.iter().flat_map(|o| o.rows.iter().copied()).collect();
    rows.sort_by(SweepRow::order);
    let gamma = nominal_gamma(config.noise_kind(), config.decay_time());
    let out = &run.out;
    let mut files = Vec::new();
    if config.outputs.wants(TableKind::Sweep) {
        let path = out.join("sweep.csv");
        io::write_sweep(create(&path)?, &rows)?;
        files.push(path);
    }

    let mut ramsey_points = Vec::new();
    for (&d, m) in deltas.iter().zip(ramsey_ms) {
        match m {
            Ok(m) => ramsey_points.push((d, m)),
            Err(e) => log::error!("Ramsey M at δB = {d} failed: {e}"),
        }
    }
    let ramsey_curve =
        MCurve::new(ramsey_points.iter().map(|p| p.0).collect(), ramsey_points.iter().map(|p| p.1).collect(), gamma)?;
    let optimized_curve = match config.protocol {
        ProtocolKind::Optimize => Some(MCurve::from_rows(&rows, Protocol::Optimized, gamma)?),
        ProtocolKind::Ramsey => None,
    };
    if config.outputs.wants(TableKind::MCurve) {
        let path = out.join("m_curve_ramsey.csv");
        io::write_m_curve(create(&path)?, &ramsey_curve)?;
        files.push(path);
        if let Some(curve) = &optimized_curve {
            let path = out.join("m_curve_optimized.csv");
            io::write_m_curve(create(&path)?, curve)?;
            files.push(path);
        }
    }
    if config.outputs.wants(TableKind::Fit) && config.noise_kind() != NoiseKind::None {
        let curve = optimized_curve.as_ref().unwrap_or(&ramsey_curve);
        match fit_effective_time(curve, config.noise_kind()) {
            Ok(fit) => {
                let path = out.join("fits.csv");
                io::write_fits(create(&path)?, &[fit])?;
                files.push(path);
            }
            Err(e) => log::warn!("no effective-time fit: {e}"),
        }
    }

    let mut manifest = RunManifest::new("sweep", run.hash.clone(), config.seed);
    manifest.jobs = outcomes.into_iter().map(|o| o.status).collect();
    let failed = manifest.jobs.iter().filter(|s| s.status != "ok").count();
    files.push(manifest.write(out, &files)?);
    if failed > 0 {
        return Err(CliError::PartialSweep { failed, total: jobs.len() });
    }
    Ok(files)
}

pub fn fit(global: &GlobalArgs, args: &FitArgs) -> Result<Vec<PathBuf>, CliError> {
    let config = match &global.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None => None,
    };
    let kind = match (args.noise, &config) {
        (Some(NoiseArg::Relaxation), _) => NoiseKind::Relaxation,
        (Some(NoiseArg::Dephasing), _) => NoiseKind::Dephasing,
        (None, Some(c)) if c.noise_kind() != NoiseKind::None => c.noise_kind(),
        _ => return Err(CliError::Config("fit needs --noise (or a config with a noise channel)".into())),
    };
    let decay_time = args
        .decay_time
        .or_else(|| config.as_ref().and_then(|c| c.decay_time()))
        .ok_or_else(|| CliError::Config("fit needs --decay-time (or a config with t1/t2)".into()))?;
    if !(decay_time.is_finite() && decay_time > 0.0) {
        return Err(CliError::Config(format!("decay time {decay_time} must be positive")));
    }
    let file = File::open(&args.table).map_err(|e| CliError::Io(format!("{}: {e}", args.table.display())))?;
    let (deltas, ms) =
        io::read_m_table(file).map_err(|e| CliError::Config(format!("{}: {e}", args.table.display())))?;
    let curve = MCurve::new(deltas, ms, ramsey_gamma(kind, decay_time))?;
    let fit: EffectiveTimeFit = fit_effective_time(&curve, kind)?;
    println!(
        "{} gamma_eff={} ratio={} residual={}",
        kind.as_str(),
        io::fmt_f64(fit.gamma_eff),
        io::fmt_f64(fit.ratio),
        io::fmt_f64(fit.residual)
    );
    let out = global
        .out
        .clone()
        .or_else(|| config.as_ref().map(|c| c.outputs.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let path = out.join("fits.csv");
    io::write_fits(create(&path)?, &[fit])?;
    let manifest = RunManifest::new("fit", hash_file(&args.table)?, config.as_ref().map_or(0, |c| c.seed));
    let files = vec![path];
    let manifest_path = manifest.write(&out, &files)?;
    Ok(vec![files[0].clone(), manifest_path])
}

pub fn qsl(global: &GlobalArgs, args: &QslArgs) -> Result<Vec<PathBuf>, CliError> {
    let deltas = match (args.delta_b, &global.config) {
        (Some(d), _) => vec![d],
        (None, Some(path)) => ExperimentConfig::load(path)?.problem.delta_b.values(),
        (None, None) => return Err(CliError::Config("qsl needs --delta-b or --config".into())),
    };
    for d in deltas {
        println!("{} {}", io::fmt_f64(d), io::fmt_f64(qsl_time(d)?));
    }
    Ok(Vec::new())
}
