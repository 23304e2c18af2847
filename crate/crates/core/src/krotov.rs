//! Krotov's method for `J_T = 1 − D_HS(ρ₁(T), ρ₂(T))` over the three
//! control fields, with the running cost `Σ_k (λ_k/S_k)(E_k − E_k^ref)²` and
//! the previous iterate as reference.
//!
//! One iteration is a backward pass of the co-states under the old fields
//! followed by a sequential forward sweep: on interval `j` every unmasked
//! field is updated from `χ^(i)(t_j)` and the freshly propagated
//! `ρ^(i+1)(t_j)`, then both states advance one step under the new values.
//! `J_T` is concave in the final states, so the first-order update is
//! monotone up to time-discretization error; violations beyond the slack
//! double `λ` and retry from the last accepted fields.

use thiserror::Error;

use crate::algebra::{hilbert_schmidt_distance, CoState, DensityMatrix, PauliCoords};
use crate::controls::{make_guess, pulse_fluence, ControlError, ControlField, GuessSpec, ShapeFunction};
use crate::dynamics::{
    check_fields, control_generator, controls_at, generator, step_propagator, DiscriminationProblem, DynamicsError,
    Propagators, Trajectory, Which,
};
use crate::linalg::{self, Mat4};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const DEFAULT_DELTA_JT_TOLERANCE: f64 = 1e-7;
/// Allowed per-iteration increase of `J_T` before a step is rejected.
pub const MONOTONICITY_SLACK: f64 = 1e-10;
pub const DEFAULT_MAX_BACKOFFS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrotovError {
    #[error("invalid Krotov configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite update of control {control} at step {step} in iteration {iteration} (λ too small?)")]
    NonFiniteUpdate { iteration: usize, control: usize, step: usize },
    #[error("J_T rose from {before} to {after} in iteration {iteration} after {backoffs} λ backoffs")]
    MonotonicityViolation { iteration: usize, before: f64, after: f64, backoffs: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrotovConfig {
    /// Inverse step sizes `λ_k`, one per control.
    pub lambdas: [f64; 3],
    pub max_iterations: usize,
    /// Stop once an iteration improves `J_T` by less than this.
    pub delta_jt_tolerance: f64,
    /// Controls left out of the optimization keep their guess bit-exactly.
    pub optimize_mask: [bool; 3],
    pub monotonicity_slack: f64,
    /// Consecutive `λ` doublings allowed within one iteration.
    pub max_backoffs: usize,
}

impl Default for KrotovConfig {
    fn default() -> Self {
        KrotovConfig {
            lambdas: [DEFAULT_LAMBDA; 3],
            max_iterations: DEFAULT_MAX_ITERATIONS,
            delta_jt_tolerance: DEFAULT_DELTA_JT_TOLERANCE,
            optimize_mask: [true; 3],
            monotonicity_slack: MONOTONICITY_SLACK,
            max_backoffs: DEFAULT_MAX_BACKOFFS,
        }
    }
}

impl KrotovConfig {
    pub fn validate(&self) -> Result<(), KrotovError> {
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(KrotovError::InvalidConfig(format!("λ = {l} must be positive")));
        }
        if self.max_iterations == 0 {
            return Err(KrotovError::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.delta_jt_tolerance.is_finite() && self.delta_jt_tolerance > 0.0) {
            return Err(KrotovError::InvalidConfig(format!(
                "ΔJ_T tolerance {} must be positive",
                self.delta_jt_tolerance
            )));
        }
        if !(self.monotonicity_slack.is_finite() && self.monotonicity_slack >= 0.0) {
            return Err(KrotovError::InvalidConfig("monotonicity slack must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `ΔJ_T` fell below the tolerance.
    Converged,
    MaxIterations,
    /// Every control is masked; nothing to optimize.
    NothingToOptimize,
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub jt: f64,
    /// `Σ_k ∫ (λ_k/S_k)(E_k^(i) − E_k^(i−1))² dt`; zero for the guess.
    pub g: f64,
    /// `Σ_k ∫ E_k² dt`.
    pub fluence: f64,
    /// Largest `λ_k` in effect.
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct KrotovState {
    pub fields: [ControlField; 3],
    pub forward: [Trajectory; 2],
    /// Co-states propagated backward under `fields`.
    pub costates: [Trajectory; 2],
    pub jt_history: Vec<f64>,
    pub g_history: Vec<f64>,
    pub records: Vec<IterationRecord>,
    /// `λ_k` after any backoff.
    pub lambdas: [f64; 3],
    pub stop_reason: Option<StopReason>,
}

impl KrotovState {
    /// Forward and backward passes for `fields`; iteration 0 of the history.
    pub fn initialize(
        problem: &DiscriminationProblem,
        fields: [ControlField; 3],
        lambdas: [f64; 3],
    ) -> Result<Self, KrotovError> {
        check_fields(&problem.grid, &fields)?;
        let propagators =
            [Propagators::build(problem, Which::First, &fields)?, Propagators::build(problem, Which::Second, &fields)?];
        let initial = problem.initial.coords();
        let forward = [propagators[0].forward(&initial)?, propagators[1].forward(&initial)?];
        let jt = jt_from_coords(forward[0].last(), forward[1].last());
        let costates = backward_pass(&propagators, &forward)?;
        let fluence = total_fluence(&fields);
        Ok(KrotovState {
            fields,
            forward,
            costates,
            jt_history: vec![jt],
            g_history: vec![0.0],
            records: vec![IterationRecord { iteration: 0, jt, g: 0.0, fluence, lambda: max3(&lambdas) }],
            lambdas,
            stop_reason: None,
        })
    }

    pub fn jt(&self) -> f64 {
        *self.jt_history.last().expect("history starts with the guess")
    }

    pub fn iterations(&self) -> usize {
        self.jt_history.len() - 1
    }

    pub fn final_states(&self) -> Result<[DensityMatrix; 2], KrotovError> {
        Ok([
            self.forward[0].final_state().map_err(DynamicsError::from)?,
            self.forward[1].final_state().map_err(DynamicsError::from)?,
        ])
    }

    /// `D_HS` at the final time.
    pub fn d_hs(&self) -> f64 {
        1.0 - self.jt()
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == Some(StopReason::Converged)
    }
}

fn max3(x: &[f64; 3]) -> f64 {
    x.iter().copied().fold(f64::MIN, f64::max)
}

fn total_fluence(fields: &[ControlField; 3]) -> f64 {
    fields.iter().map(ControlField::fluence).sum()
}

fn jt_from_coords(a: &PauliCoords, b: &PauliCoords) -> f64 {
    let d = a.sub(b);
    1.0 - 0.5 * d.inner(&d)
}

/// `J_T = 1 − D_HS`.
pub fn evaluate_jt(rho1: &DensityMatrix, rho2: &DensityMatrix) -> f64 {
    1.0 - hilbert_schmidt_distance(rho1, rho2)
}

/// `χ_m(T) = −∇_{ρ_m} J_T`: `(ρ₁ − ρ₂, ρ₂ − ρ₁)`.
pub fn costate_terminal(rho1: &DensityMatrix, rho2: &DensityMatrix) -> (CoState, CoState) {
    let (a, b) = terminal_coords(&rho1.coords(), &rho2.coords());
    (CoState::from_coords(&a), CoState::from_coords(&b))
}

fn terminal_coords(a: &PauliCoords, b: &PauliCoords) -> (PauliCoords, PauliCoords) {
    (a.sub(b), b.sub(a))
}

fn backward_pass(propagators: &[Propagators; 2], forward: &[Trajectory; 2]) -> Result<[Trajectory; 2], KrotovError> {
    let (chi1, chi2) = terminal_coords(forward[0].last(), forward[1].last());
    Ok([propagators[0].backward(&chi1)?, propagators[1].backward(&chi2)?])
}

/// One Krotov iteration from `state` at the given `lambdas`. The result has
/// fresh forward trajectories, co-states and one more history entry; no
/// monotonicity check is made here.
pub fn field_update_step(
    state: &KrotovState,
    config: &KrotovConfig,
    problem: &DiscriminationProblem,
    shapes: &[ShapeFunction; 3],
) -> Result<KrotovState, KrotovError> {
    sweep(state, state.lambdas, config, problem, shapes)
}

fn sweep(
    state: &KrotovState,
    lambdas: [f64; 3],
    config: &KrotovConfig,
    problem: &DiscriminationProblem,
    shapes: &[ShapeFunction; 3],
) -> Result<KrotovState, KrotovError> {
    let grid = &problem.grid;
    let n = grid.n_steps();
    let dt = grid.dt();
    let iteration = state.iterations() + 1;
    for (k, shape) in shapes.iter().enumerate() {
        if shape.len() != n {
            return Err(DynamicsError::GridMismatch { control: k, got: shape.len(), expected: n }.into());
        }
    }
    let rotations: [Mat4; 3] = std::array::from_fn(control_generator);
    let drifts = [problem.drift_field(Which::First), problem.drift_field(Which::Second)];
    let initial = problem.initial.coords();

    let mut fields = state.fields.clone();
    let mut rho = [initial, initial];
    let mut points: [Vec<PauliCoords>; 2] = std::array::from_fn(|_| {
        let mut v = Vec::with_capacity(n + 1);
        v.push(initial);
        v
    });
    let mut steps: [Vec<Mat4>; 2] = std::array::from_fn(|_| Vec::with_capacity(n));

    for j in 0..n {
        for k in 0..3 {
            if !config.optimize_mask[k] {
                continue;
            }
            // Re Σ_m ⟨χ_m(t_j), ∂L/∂E_k ρ_m(t_j)⟩
            let pairing: f64 = (0..2)
                .map(|m| {
                    let d = linalg::matvec(&rotations[k], &rho[m].0);
                    state.costates[m].coords(j).inner(&PauliCoords(d))
                })
                .sum();
            let update = shapes[k].samples()[j] / lambdas[k] * pairing;
            let value = state.fields[k].samples()[j] + update;
            if !value.is_finite() {
                return Err(KrotovError::NonFiniteUpdate { iteration, control: k, step: j });
            }
            fields[k].samples_mut()[j] = value;
        }
        let e = controls_at(&fields, j);
        for m in 0..2 {
            let u = step_propagator(drifts[m], e, &problem.noise, dt);
            rho[m] = PauliCoords(linalg::matvec(&u, &rho[m].0));
            if !rho[m].is_finite() {
                return Err(DynamicsError::NonFinite { step: j }.into());
            }
            points[m].push(rho[m]);
            steps[m].push(u);
        }
    }

    let [p1, p2] = points;
    let forward = [Trajectory::from_points(p1), Trajectory::from_points(p2)];
    let [s1, s2] = steps;
    let propagators = [Propagators::from_steps(s1), Propagators::from_steps(s2)];
    let costates = backward_pass(&propagators, &forward)?;
    let jt = jt_from_coords(forward[0].last(), forward[1].last());
    let g: f64 = (0..3)
        .filter(|&k| config.optimize_mask[k])
        .map(|k| pulse_fluence(&fields[k], &state.fields[k], &shapes[k], lambdas[k]))
        .sum();

    let mut jt_history = state.jt_history.clone();
    jt_history.push(jt);
    let mut g_history = state.g_history.clone();
    g_history.push(g);
    let mut records = state.records.clone();
    records.push(IterationRecord { iteration, jt, g, fluence: total_fluence(&fields), lambda: max3(&lambdas) });
    Ok(KrotovState { fields, forward, costates, jt_history, g_history, records, lambdas, stop_reason: None })
}

/// Runs Krotov iterations starting from the sampled guesses.
pub fn optimize(
    problem: &DiscriminationProblem,
    guesses: &[GuessSpec; 3],
    config: &KrotovConfig,
    shapes: &[ShapeFunction; 3],
) -> Result<KrotovState, KrotovError> {
    let fields = [
        make_guess(&guesses[0], &problem.grid, problem.b)?,
        make_guess(&guesses[1], &problem.grid, problem.b)?,
        make_guess(&guesses[2], &problem.grid, problem.b)?,
    ];
    optimize_fields(problem, fields, config, shapes)
}

/// Runs Krotov iterations starting from explicit fields (e.g. a warm start).
pub fn optimize_fields(
    problem: &DiscriminationProblem,
    fields: [ControlField; 3],
    config: &KrotovConfig,
    shapes: &[ShapeFunction; 3],
) -> Result<KrotovState, KrotovError> {
    config.validate()?;
    let mut state = KrotovState::initialize(problem, fields, config.lambdas)?;
    if !config.optimize_mask.iter().any(|&m| m) {
        state.stop_reason = Some(StopReason::NothingToOptimize);
        return Ok(state);
    }
    let mut reason = StopReason::MaxIterations;
    for _ in 0..config.max_iterations {
        let before = state.jt();
        let mut lambdas = state.lambdas;
        let mut backoffs = 0;
        let next = loop {
            let candidate = sweep(&state, lambdas, config, problem, shapes)?;
            let after = candidate.jt();
            if after <= before + config.monotonicity_slack {
                break candidate;
            }
            if backoffs == config.max_backoffs {
                return Err(KrotovError::MonotonicityViolation {
                    iteration: candidate.iterations(),
                    before,
                    after,
                    backoffs,
                });
            }
            backoffs += 1;
            for (l, &m) in lambdas.iter_mut().zip(&config.optimize_mask) {
                if m {
                    *l *= 2.0;
                }
            }
            log::debug!(
                "iteration {}: J_T rose {before:.3e} -> {after:.3e}, λ -> {:.3e}",
                candidate.iterations(),
                max3(&lambdas)
            );
        };
        state = next;
        let gain = before - state.jt();
        log::trace!("iteration {}: J_T = {:.12}", state.iterations(), state.jt());
        if gain < config.delta_jt_tolerance {
            reason = StopReason::Converged;
            break;
        }
    }
    state.stop_reason = Some(reason);
    Ok(state)
}

/// Exact derivative of `J_T` with respect to sample `step` of control
/// `control`, from the co-state/state pairing across the interval:
/// `−Σ_m ⟨χ_m(t_{j+1}), (∂U_j/∂E) ρ_m(t_j)⟩` with `∂U_j/∂E` the Fréchet
/// derivative of the step exponential.
pub fn jt_derivative(
    problem: &DiscriminationProblem,
    fields: &[ControlField; 3],
    control: usize,
    step: usize,
) -> Result<f64, KrotovError> {
    let state = KrotovState::initialize(problem, fields.clone(), [1.0; 3])?;
    Ok(jt_derivative_from_state(&state, problem, control, step))
}

/// As [`jt_derivative`], reusing the trajectories of an initialized state.
pub fn jt_derivative_from_state(
    state: &KrotovState,
    problem: &DiscriminationProblem,
    control: usize,
    step: usize,
) -> f64 {
    let dt = problem.grid.dt();
    let e = controls_at(&state.fields, step);
    let direction = linalg::scale(&control_generator(control), dt);
    Which::BOTH
        .iter()
        .map(|&which| {
            let m = which.index();
            let g = linalg::scale(&generator(problem.drift_field(which), e, &problem.noise), dt);
            let (_, deriv) = linalg::expm_frechet(&g, &direction);
            let moved = PauliCoords(linalg::matvec(&deriv, &state.forward[m].coords(step).0));
            -state.costates[m].coords(step + 1).inner(&moved)
        })
        .sum()
}

/// `J_T` for the given fields (forward propagation only).
pub fn jt_for_fields(problem: &DiscriminationProblem, fields: &[ControlField; 3]) -> Result<f64, KrotovError> {
    let initial = problem.initial.coords();
    let a = Propagators::build(problem, Which::First, fields)?.forward(&initial)?;
    let b = Propagators::build(problem, Which::Second, fields)?.forward(&initial)?;
    Ok(jt_from_coords(a.last(), b.last()))
}
