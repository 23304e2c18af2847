//! Declarative experiment description (TOML, strict schema).
//!
//! ```toml
//! protocol = "optimize"          # or "ramsey"
//! seed = 7
//!
//! [problem]
//! b = 1.0
//! delta_b = [0.005, 0.011]       # scalar or list
//! noise = "relaxation"           # none | relaxation | dephasing
//! t1 = 1000.0                    # t2 for dephasing; never both
//!
//! [grid]
//! t_final = 2511.0               # scalar, list, or "auto"
//! per_unit_time = 1.0
//!
//! [krotov]
//! lambdas = [1.0, 1.0, 1.0]
//! max_iterations = 200
//! guesses = [{ kind = "zero" }, { kind = "kick_pair" }, { kind = "cancel_drift" }]
//! optimize_mask = [false, true, false]
//!
//! [outputs]
//! directory = "out"
//! tables = ["sweep", "m_curve", "fit"]
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::algebra::DensityMatrix;
use crate::controls::{make_guess, make_shape, ControlField, GuessSpec, ShapeFunction, DEFAULT_RAMP_FRACTION};
use crate::dynamics::{DiscriminationProblem, LindbladSpec, NoiseKind, StepPolicy, TimeGrid};
use crate::krotov::{
    KrotovConfig, DEFAULT_DELTA_JT_TOLERANCE, DEFAULT_LAMBDA, DEFAULT_MAX_BACKOFFS, DEFAULT_MAX_ITERATIONS,
    MONOTONICITY_SLACK,
};
use crate::protocols::{final_time_grid, Strategy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Ramsey,
    Optimize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseName {
    None,
    Relaxation,
    Dephasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    Plus,
    Ground,
    Excited,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(NamedState),
    Bloch([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_b")]
    pub b: f64,
    pub delta_b: OneOrMany,
    pub noise: NoiseName,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    #[serde(default = "default_initial")]
    pub initial: InitialState,
}

fn default_b() -> f64 {
    1.0
}

fn default_initial() -> InitialState {
    InitialState::Named(NamedState::Plus)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FinalTimes {
    One(f64),
    Many(Vec<f64>),
    /// `"auto"`: the geometric family around the speed limit of each `δB`.
    Auto(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_final: Option<FinalTimes>,
    #[serde(default = "default_per_unit_time")]
    pub per_unit_time: f64,
    #[serde(default = "default_per_period")]
    pub per_period: f64,
    #[serde(default = "default_per_decay_time")]
    pub per_decay_time: f64,
    #[serde(default = "default_per_octave")]
    pub final_times_per_octave: usize,
}

fn default_per_unit_time() -> f64 {
    StepPolicy::default().per_unit_time
}

fn default_per_period() -> f64 {
    StepPolicy::default().per_period
}

fn default_per_decay_time() -> f64 {
    StepPolicy::default().per_decay_time
}

fn default_per_octave() -> usize {
    2
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t_final: None,
            per_unit_time: default_per_unit_time(),
            per_period: default_per_period(),
            per_decay_time: default_per_decay_time(),
            final_times_per_octave: default_per_octave(),
        }
    }
}

/// A guess field; omitted lobe parameters take the calibrated defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuessConfig {
    Zero,
    Constant { value: f64 },
    CancelDrift,
    KickPair { amplitude: Option<f64>, width: Option<f64>, center1: Option<f64>, center2: Option<f64> },
    SplitPeak { amplitude: Option<f64>, width: Option<f64>, center: Option<f64> },
}

impl GuessConfig {
    pub fn resolve(&self, grid: &TimeGrid) -> GuessSpec {
        let default_width = GuessSpec::default_width(grid);
        let t_final = grid.t_final();
        match *self {
            GuessConfig::Zero => GuessSpec::Zero,
            GuessConfig::Constant { value } => GuessSpec::Constant(value),
            GuessConfig::CancelDrift => GuessSpec::CancelDrift,
            GuessConfig::KickPair { amplitude, width, center1, center2 } => {
                let width = width.unwrap_or(default_width);
                let center1 = center1.unwrap_or((3.0 * width).min(0.5 * t_final));
                let center2 = center2.unwrap_or(t_final - center1);
                let spec = GuessSpec::calibrated_kick_pair_at(grid, width, center1, center2);
                match (spec, amplitude) {
                    (GuessSpec::KickPair { width, center1, center2, .. }, Some(amplitude)) => {
                        GuessSpec::KickPair { amplitude, width, center1, center2 }
                    }
                    (spec, _) => spec,
                }
            }
            GuessConfig::SplitPeak { amplitude, width, center } => {
                let width = width.unwrap_or(default_width);
                let center = center.unwrap_or((3.0 * width).min(0.5 * t_final));
                match amplitude {
                    Some(amplitude) => GuessSpec::SplitPeak { amplitude, width, center },
                    None => GuessSpec::calibrated_split_peak(grid, width, center),
                }
            }
        }
    }

    fn numbers(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut push = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        match *self {
            GuessConfig::Zero | GuessConfig::CancelDrift => {}
            GuessConfig::Constant { value } => push("value", Some(value)),
            GuessConfig::KickPair { amplitude, width, center1, center2 } => {
                push("amplitude", amplitude);
                push("width", width);
                push("center1", center1);
                push("center2", center2);
            }
            GuessConfig::SplitPeak { amplitude, width, center } => {
                push("amplitude", amplitude);
                push("width", width);
                push("center", center);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrotovBlock {
    #[serde(default = "default_lambdas")]
    pub lambdas: [f64; 3],
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_backoffs")]
    pub max_backoffs: usize,
    /// Defaults to the noise-specific single-field strategy.
    pub guesses: Option<[GuessConfig; 3]>,
    pub optimize_mask: Option<[bool; 3]>,
    #[serde(default = "default_ramp")]
    pub shape_ramp: f64,
    /// Uniform seeded perturbation added to the optimized guesses.
    #[serde(default)]
    pub jitter: f64,
    /// Field files (x, y, z) replacing the guesses.
    pub warm_start: Option<[PathBuf; 3]>,
}

fn default_lambdas() -> [f64; 3] {
    [DEFAULT_LAMBDA; 3]
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_tolerance() -> f64 {
    DEFAULT_DELTA_JT_TOLERANCE
}

fn default_max_backoffs() -> usize {
    DEFAULT_MAX_BACKOFFS
}

fn default_ramp() -> f64 {
    DEFAULT_RAMP_FRACTION
}

impl Default for KrotovBlock {
    fn default() -> Self {
        KrotovBlock {
            lambdas: default_lambdas(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            max_backoffs: default_max_backoffs(),
            guesses: None,
            optimize_mask: None,
            shape_ramp: default_ramp(),
            jitter: 0.0,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Trajectory,
    Convergence,
    Fields,
    FinalStates,
    Sweep,
    MCurve,
    Fit,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Tables to write; all applicable ones when omitted.
    pub tables: Option<Vec<TableKind>>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_directory(), tables: None }
    }
}

impl OutputConfig {
    pub fn wants(&self, table: TableKind) -> bool {
        self.tables.as_ref().is_none_or(|t| t.contains(&table))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Finite-difference splitting for the Fisher information; `10⁻³/T` when omitted.
    pub qfi_delta_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub krotov: Option<KrotovBlock>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// One independent unit of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub index: usize,
    pub delta_b: f64,
    pub t_final: f64,
}

fn check_positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{x} must be a positive finite number")))
    }
}

impl ExperimentConfig {
    /// Parses and validates; nothing downstream runs on an invalid config.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        if !p.b.is_finite() {
            return Err(invalid("problem.b", format!("{} is not finite", p.b)));
        }
        let deltas = p.delta_b.values();
        if deltas.is_empty() {
            return Err(invalid("problem.delta_b", "empty list"));
        }
        for d in &deltas {
            check_positive("problem.delta_b", *d)?;
        }
        match (p.noise, p.t1, p.t2) {
            (_, Some(_), Some(_)) => {
                return Err(invalid("problem", "t1 and t2 together: only one noise channel at a time is supported"))
            }
            (NoiseName::None, None, None) => {}
            (NoiseName::None, _, _) => return Err(invalid("problem", "noise = \"none\" takes no t1/t2")),
            (NoiseName::Relaxation, Some(t1), None) => check_positive("problem.t1", t1)?,
            (NoiseName::Relaxation, None, _) => return Err(invalid("problem.t1", "required for relaxation")),
            (NoiseName::Dephasing, None, Some(t2)) => check_positive("problem.t2", t2)?,
            (NoiseName::Dephasing, _, None) => return Err(invalid("problem.t2", "required for dephasing")),
        }
        if let InitialState::Bloch(r) = p.initial {
            DensityMatrix::try_from_bloch(r).map_err(|e| invalid("problem.initial", e.to_string()))?;
        }

        let g = &self.grid;
        check_positive("grid.per_unit_time", g.per_unit_time)?;
        check_positive("grid.per_period", g.per_period)?;
        check_positive("grid.per_decay_time", g.per_decay_time)?;
        if g.final_times_per_octave == 0 {
            return Err(invalid("grid.final_times_per_octave", "must be at least 1"));
        }
        match &g.t_final {
            None => return Err(invalid("grid.t_final", "required")),
            Some(FinalTimes::One(t)) => check_positive("grid.t_final", *t)?,
            Some(FinalTimes::Many(ts)) => {
                if ts.is_empty() {
                    return Err(invalid("grid.t_final", "empty list"));
                }
                for t in ts {
                    check_positive("grid.t_final", *t)?;
                }
            }
            Some(FinalTimes::Auto(s)) if s == "auto" => {}
            Some(FinalTimes::Auto(s)) => {
                return Err(invalid("grid.t_final", format!("expected a number, list or \"auto\", got {s:?}")))
            }
        }

        if let Some(w) = self.workers {
            if w == 0 {
                return Err(invalid("workers", "must be at least 1"));
            }
        }
        if let Some(q) = self.analysis.qfi_delta_b {
            check_positive("analysis.qfi_delta_b", q)?;
        }

        match (&self.krotov, self.protocol) {
            (None, ProtocolKind::Optimize) => return Err(invalid("krotov", "required for protocol = \"optimize\"")),
            (Some(k), _) => self.validate_krotov(k)?,
            (None, ProtocolKind::Ramsey) => {}
        }
        Ok(())
    }

    fn validate_krotov(&self, k: &KrotovBlock) -> Result<(), ConfigError> {
        for l in k.lambdas {
            check_positive("krotov.lambdas", l)?;
        }
        if !(k.tolerance.is_finite() && k.tolerance >= 0.0) {
            return Err(invalid("krotov.tolerance", format!("{} must be non-negative", k.tolerance)));
        }
        if !(0.0..=0.5).contains(&k.shape_ramp) {
            return Err(invalid("krotov.shape_ramp", format!("{} outside [0, 0.5]", k.shape_ramp)));
        }
        if !(k.jitter.is_finite() && k.jitter >= 0.0) {
            return Err(invalid("krotov.jitter", format!("{} must be non-negative", k.jitter)));
        }
        for (i, guess) in k.guesses.iter().flatten().enumerate() {
            for (name, v) in guess.numbers() {
                let field = format!("krotov.guesses[{i}].{name}");
                if !v.is_finite() {
                    return Err(invalid(&field, format!("{v} is not finite")));
                }
                if name == "width" {
                    check_positive(&field, v)?;
                }
            }
        }
        if k.warm_start.is_some() && self.jobs()?.len() != 1 {
            return Err(invalid("krotov.warm_start", "needs a single (delta_b, t_final) job"));
        }
        Ok(())
    }

    pub fn noise_kind(&self) -> NoiseKind {
        match self.problem.noise {
            NoiseName::None => NoiseKind::None,
            NoiseName::Relaxation => NoiseKind::Relaxation,
            NoiseName::Dephasing => NoiseKind::Dephasing,
        }
    }

    pub fn decay_time(&self) -> Option<f64> {
        self.problem.t1.or(self.problem.t2)
    }

    pub fn noise(&self) -> LindbladSpec {
        match (self.noise_kind(), self.decay_time()) {
            (NoiseKind::None, _) | (_, None) => LindbladSpec::none(),
            (kind, Some(tau)) => LindbladSpec { kind, rate: 1.0 / tau },
        }
    }

    pub fn step_policy(&self) -> StepPolicy {
        StepPolicy {
            per_unit_time: self.grid.per_unit_time,
            per_period: self.grid.per_period,
            per_decay_time: self.grid.per_decay_time,
        }
    }

    pub fn initial_state(&self) -> DensityMatrix {
        match self.problem.initial {
            InitialState::Named(NamedState::Plus) => DensityMatrix::plus(),
            InitialState::Named(NamedState::Ground) => DensityMatrix::ground(),
            InitialState::Named(NamedState::Excited) => DensityMatrix::excited(),
            InitialState::Named(NamedState::Mixed) => DensityMatrix::maximally_mixed(),
            InitialState::Bloch(r) => DensityMatrix::try_from_bloch(r).expect("validated"),
        }
    }

    /// Every `(δB, T)` pair, ordered by `δB` then `T`.
    pub fn jobs(&self) -> Result<Vec<Job>, ConfigError> {
        let mut deltas = self.problem.delta_b.values();
        deltas.sort_by(f64::total_cmp);
        deltas.dedup();
        let mut jobs = Vec::new();
        for delta_b in deltas {
            let mut times = match &self.grid.t_final {
                Some(FinalTimes::One(t)) => vec![*t],
                Some(FinalTimes::Many(ts)) => ts.clone(),
                Some(FinalTimes::Auto(_)) => {
                    final_time_grid(delta_b, self.decay_time(), self.grid.final_times_per_octave)
                        .map_err(|e| invalid("grid.t_final", e.to_string()))?
                }
                None => return Err(invalid("grid.t_final", "required")),
            };
            times.sort_by(f64::total_cmp);
            times.dedup();
            for t_final in times {
                jobs.push(Job { index: jobs.len(), delta_b, t_final });
            }
        }
        Ok(jobs)
    }

    pub fn problem_for(&self, job: &Job) -> Result<DiscriminationProblem, ConfigError> {
        let grid = TimeGrid::with_policy(job.t_final, job.delta_b, self.decay_time(), &self.step_policy())
            .map_err(|e| invalid("grid", e.to_string()))?;
        let problem = DiscriminationProblem::new(self.problem.b, job.delta_b, self.noise(), grid)
            .map_err(|e| invalid("problem", e.to_string()))?;
        Ok(problem.with_initial(self.initial_state()))
    }

    pub fn krotov_block(&self) -> KrotovBlock {
        self.krotov.clone().unwrap_or_default()
    }

    pub fn krotov_config(&self, grid: &TimeGrid) -> KrotovConfig {
        let k = self.krotov_block();
        let strategy = Strategy::for_noise(self.noise_kind(), grid);
        KrotovConfig {
            lambdas: k.lambdas,
            max_iterations: k.max_iterations,
            delta_jt_tolerance: k.tolerance,
            optimize_mask: k.optimize_mask.unwrap_or(strategy.mask),
            monotonicity_slack: MONOTONICITY_SLACK,
            max_backoffs: k.max_backoffs,
        }
    }

    pub fn guesses(&self, grid: &TimeGrid) -> [GuessSpec; 3] {
        match &self.krotov_block().guesses {
            Some(g) => [g[0].resolve(grid), g[1].resolve(grid), g[2].resolve(grid)],
            None => Strategy::for_noise(self.noise_kind(), grid).guesses,
        }
    }

    pub fn shapes(&self, grid: &TimeGrid) -> Result<[ShapeFunction; 3], ConfigError> {
        let shape = make_shape(grid, self.krotov_block().shape_ramp)
            .map_err(|e| invalid("krotov.shape_ramp", e.to_string()))?;
        Ok([shape.clone(), shape.clone(), shape])
    }

    /// Sampled guesses for `job`, plus the seeded jitter on the optimized
    /// controls. The jitter stream depends only on the seed and the job's
    /// `(δB, T)`, never on scheduling.
    pub fn guess_fields(&self, problem: &DiscriminationProblem, job: &Job) -> Result<[ControlField; 3], ConfigError> {
        let grid = &problem.grid;
        let specs = self.guesses(grid);
        let mut fields = Vec::with_capacity(3);
        for (k, spec) in specs.iter().enumerate() {
            let field = make_guess(spec, grid, problem.b)
                .map_err(|e| invalid(&format!("krotov.guesses[{k}]"), e.to_string()))?;
            fields.push(field);
        }
        let mut fields: [ControlField; 3] = fields.try_into().expect("three guesses");
        let jitter = self.krotov_block().jitter;
        if jitter > 0.0 {
            let mask = self.krotov_config(grid).optimize_mask;
            let mut rng = ChaCha8Rng::seed_from_u64(job_seed(self.seed, job));
            for (field, _) in fields.iter_mut().zip(mask).filter(|(_, m)| *m) {
                for x in field.samples_mut() {
                    *x += rng.gen_range(-jitter..=jitter);
                }
            }
        }
        Ok(fields)
    }
}

fn job_seed(seed: u64, job: &Job) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for word in [job.delta_b.to_bits(), job.t_final.to_bits()] {
        h = (h ^ word).wrapping_mul(0x1000_0000_01b3).rotate_left(29);
    }
    h
}
