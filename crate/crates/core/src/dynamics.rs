//! Lindblad dynamics of the two hypotheses with piecewise-constant controls.
//!
//! Each time step applies the exact exponential of the Liouvillian with the
//! controls frozen at the interval's (midpoint) value. Propagation runs on
//! the real Pauli coordinates of [`PauliCoords`]; in that basis the
//! Liouvillian is a real 4×4 matrix `G` with `G_{μν} = ½ Tr{σ_μ L(σ_ν)}` and,
//! the basis being orthogonal, the adjoint Liouvillian is simply `Gᵀ`.
//!
//! [`superoperator`] exposes the same map in the column-stacked operator
//! basis, `vec(ρ) = (ρ₀₀, ρ₁₀, ρ₀₁, ρ₁₁)`, where `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`
//! and the adjoint is the conjugate transpose.

use thiserror::Error;

use crate::algebra::{AlgebraError, CoState, DensityMatrix, Mat2, PauliCoords, Tolerances, C64};
use crate::controls::ControlField;
use crate::linalg::{self, Mat4};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("non-finite input to the Liouvillian")]
    NonFiniteInput,
    #[error("field {control} has {got} samples, grid has {expected} intervals")]
    GridMismatch { control: usize, got: usize, expected: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Uniform grid `t_j = j·dt`, `j = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self, DynamicsError> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("final time {t_final} must be positive")));
        }
        if n_steps == 0 {
            return Err(DynamicsError::InvalidParameter("n_steps must be positive".into()));
        }
        Ok(TimeGrid { t_final, n_steps })
    }

    /// Grid with the step count chosen by `policy`.
    pub fn with_policy(
        t_final: f64,
        delta_b: f64,
        decay_time: Option<f64>,
        policy: &StepPolicy,
    ) -> Result<Self, DynamicsError> {
        Self::new(t_final, 1)?;
        Self::new(t_final, policy.n_steps(t_final, delta_b, decay_time))
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.t_final
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|j| self.time(j))
    }
}

/// Resolution rule for [`TimeGrid::with_policy`]: the largest of the
/// per-unit-time, per-precession-period and per-decay-time requirements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub per_unit_time: f64,
    pub per_period: f64,
    pub per_decay_time: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy { per_unit_time: 10.0, per_period: 50.0, per_decay_time: 100.0 }
    }
}

impl StepPolicy {
    pub fn n_steps(&self, t_final: f64, delta_b: f64, decay_time: Option<f64>) -> usize {
        let mut n = self.per_unit_time * t_final;
        if delta_b > 0.0 {
            let period = 2.0 * std::f64::consts::PI / delta_b;
            n = n.max(self.per_period * t_final / period);
        }
        if let Some(tau) = decay_time.filter(|&tau| tau > 0.0 && tau.is_finite()) {
            n = n.max(self.per_decay_time * t_final / tau);
        }
        (n.ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    None,
    /// `L = |0⟩⟨1|`, `γ = 1/T1`.
    Relaxation,
    /// `L = σ_z`, `γ = 1/T2`.
    Dephasing,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Relaxation => "relaxation",
            NoiseKind::Dephasing => "dephasing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [NoiseKind::None, NoiseKind::Relaxation, NoiseKind::Dephasing].into_iter().find(|k| k.as_str() == s)
    }
}

/// A single Lindblad channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladSpec {
    pub kind: NoiseKind,
    pub rate: f64,
}

impl LindbladSpec {
    pub fn none() -> Self {
        LindbladSpec { kind: NoiseKind::None, rate: 0.0 }
    }

    pub fn relaxation(t1: f64) -> Result<Self, DynamicsError> {
        Self::new(NoiseKind::Relaxation, 1.0 / t1)
    }

    pub fn dephasing(t2: f64) -> Result<Self, DynamicsError> {
        Self::new(NoiseKind::Dephasing, 1.0 / t2)
    }

    pub fn new(kind: NoiseKind, rate: f64) -> Result<Self, DynamicsError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("decay rate {rate} must be finite and ≥ 0")));
        }
        Ok(LindbladSpec { kind, rate })
    }

    pub fn operator(&self) -> Option<Mat2> {
        match self.kind {
            NoiseKind::None => None,
            NoiseKind::Relaxation => Some(Mat2::LOWERING),
            NoiseKind::Dephasing => Some(Mat2::SIGMA_Z),
        }
    }

    /// `1/γ`, if there is any decay.
    pub fn decay_time(&self) -> Option<f64> {
        (self.kind != NoiseKind::None && self.rate > 0.0).then(|| 1.0 / self.rate)
    }
}

/// Which of the two drift Hamiltonians drives the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    /// `B − δB/2`
    First,
    /// `B + δB/2`
    Second,
}

impl Which {
    pub const BOTH: [Which; 2] = [Which::First, Which::Second];

    pub fn index(&self) -> usize {
        match self {
            Which::First => 0,
            Which::Second => 1,
        }
    }
}

/// Two qubits under drifts `(B ∓ δB/2)σ_z/2`, common controls and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminationProblem {
    pub b: f64,
    pub delta_b: f64,
    pub noise: LindbladSpec,
    pub initial: DensityMatrix,
    pub grid: TimeGrid,
}

impl DiscriminationProblem {
    /// Problem starting from `|+⟩⟨+|`.
    pub fn new(b: f64, delta_b: f64, noise: LindbladSpec, grid: TimeGrid) -> Result<Self, DynamicsError> {
        if !b.is_finite() {
            return Err(DynamicsError::InvalidParameter(format!("field B = {b} must be finite")));
        }
        if !(delta_b.is_finite() && delta_b > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("splitting δB = {delta_b} must be positive")));
        }
        LindbladSpec::new(noise.kind, noise.rate)?;
        Ok(DiscriminationProblem { b, delta_b, noise, initial: DensityMatrix::plus(), grid })
    }

    pub fn with_initial(mut self, initial: DensityMatrix) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_grid(mut self, grid: TimeGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_delta_b(mut self, delta_b: f64) -> Self {
        self.delta_b = delta_b;
        self
    }

    /// Field strength `B_m` of the selected drift.
    pub fn drift_field(&self, which: Which) -> f64 {
        match which {
            Which::First => self.b - 0.5 * self.delta_b,
            Which::Second => self.b + 0.5 * self.delta_b,
        }
    }

    pub fn drift(&self, which: Which) -> Mat2 {
        Mat2::SIGMA_Z.scale_re(0.5 * self.drift_field(which))
    }
}

/// `−i[H_d + ½ E·σ, ρ] + γ(L ρ L† − ½{L†L, ρ})`.
pub fn liouvillian_apply(
    drift: &Mat2,
    controls: [f64; 3],
    noise: &LindbladSpec,
    state: &Mat2,
) -> Result<Mat2, DynamicsError> {
    if !drift.is_finite() || !state.is_finite() || !controls.iter().all(|e| e.is_finite()) || !noise.rate.is_finite() {
        return Err(DynamicsError::NonFiniteInput);
    }
    let mut h = *drift;
    for (e, sigma) in controls.iter().zip(&Mat2::PAULI[1..]) {
        h = h + sigma.scale_re(0.5 * e);
    }
    let mut out = h.commutator(state).scale(C64::new(0.0, -1.0));
    if let Some(l) = noise.operator() {
        let ld = l.dagger();
        let jump = l * *state * ld;
        let anti = (ld * l).anticommutator(state).scale_re(0.5);
        out = out + (jump - anti).scale_re(noise.rate);
    }
    Ok(out)
}

/// Column-stacked 4×4 superoperator of [`liouvillian_apply`].
pub fn superoperator(drift: &Mat2, controls: [f64; 3], noise: &LindbladSpec) -> Result<[[C64; 4]; 4], DynamicsError> {
    let mut s = [[C64::new(0.0, 0.0); 4]; 4];
    for col in 0..4 {
        let mut unit = Mat2::ZERO;
        unit.0[col % 2][col / 2] = C64::new(1.0, 0.0);
        let image = liouvillian_apply(drift, controls, noise, &unit)?;
        for row in 0..4 {
            s[row][col] = image.0[row % 2][row / 2];
        }
    }
    Ok(s)
}

/// Pauli-basis generator of the Liouvillian for drift field `b_m`:
/// coherent part `ṙ = Ω × r` with `Ω = (E_x, E_y, b_m + E_z)`, plus the
/// dissipator of `noise`.
pub fn generator(b_m: f64, controls: [f64; 3], noise: &LindbladSpec) -> Mat4 {
    let [ox, oy, oz] = [controls[0], controls[1], b_m + controls[2]];
    let mut g = [[0.0; 4]; 4];
    g[1][2] = -oz;
    g[1][3] = oy;
    g[2][1] = oz;
    g[2][3] = -ox;
    g[3][1] = -oy;
    g[3][2] = ox;
    let gamma = noise.rate;
    match noise.kind {
        NoiseKind::None => {}
        NoiseKind::Relaxation => {
            g[1][1] = -0.5 * gamma;
            g[2][2] = -0.5 * gamma;
            g[3][3] = -gamma;
            g[3][0] = gamma;
        }
        NoiseKind::Dephasing => {
            g[1][1] = -2.0 * gamma;
            g[2][2] = -2.0 * gamma;
        }
    }
    g
}

/// `∂G/∂E_k`: the generator of `ρ ↦ −(i/2)[σ_k, ρ]`, a rotation about axis k.
pub fn control_generator(k: usize) -> Mat4 {
    let mut unit = [0.0; 3];
    unit[k] = 1.0;
    generator(0.0, unit, &LindbladSpec::none())
}

/// One-step propagator `exp(G dt)`.
pub fn step_propagator(b_m: f64, controls: [f64; 3], noise: &LindbladSpec, dt: f64) -> Mat4 {
    linalg::expm(&linalg::scale(&generator(b_m, controls, noise), dt))
}

/// Time series of operator coordinates, one entry per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<PauliCoords>,
}

impl Trajectory {
    pub fn from_points(points: Vec<PauliCoords>) -> Self {
        Trajectory { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PauliCoords] {
        &self.points
    }

    pub fn coords(&self, j: usize) -> &PauliCoords {
        &self.points[j]
    }

    pub fn last(&self) -> &PauliCoords {
        self.points.last().expect("trajectory is never empty")
    }

    pub fn state(&self, j: usize) -> Result<DensityMatrix, AlgebraError> {
        DensityMatrix::from_coords(&self.points[j], &Tolerances::PROPAGATED)
    }

    pub fn final_state(&self) -> Result<DensityMatrix, AlgebraError> {
        self.state(self.points.len() - 1)
    }

    pub fn states(&self) -> Result<Vec<DensityMatrix>, AlgebraError> {
        (0..self.points.len()).map(|j| self.state(j)).collect()
    }

    pub fn costate(&self, j: usize) -> CoState {
        CoState::from_coords(&self.points[j])
    }
}

pub(crate) fn check_fields(grid: &TimeGrid, fields: &[ControlField; 3]) -> Result<(), DynamicsError> {
    for (control, f) in fields.iter().enumerate() {
        if f.len() != grid.n_steps() {
            return Err(DynamicsError::GridMismatch { control, got: f.len(), expected: grid.n_steps() });
        }
    }
    Ok(())
}

pub(crate) fn controls_at(fields: &[ControlField; 3], j: usize) -> [f64; 3] {
    [fields[0].samples()[j], fields[1].samples()[j], fields[2].samples()[j]]
}

/// Step propagators of one hypothesis for every interval of the grid.
#[derive(Debug, Clone)]
pub struct Propagators {
    steps: Vec<Mat4>,
}

impl Propagators {
    pub fn build(
        problem: &DiscriminationProblem,
        which: Which,
        fields: &[ControlField; 3],
    ) -> Result<Self, DynamicsError> {
        check_fields(&problem.grid, fields)?;
        let b_m = problem.drift_field(which);
        let dt = problem.grid.dt();
        let mut steps = Vec::with_capacity(problem.grid.n_steps());
        let mut last: Option<([f64; 3], Mat4)> = None;
        for j in 0..problem.grid.n_steps() {
            let e = controls_at(fields, j);
            let u = match last {
                Some((prev, u)) if prev == e => u,
                _ => step_propagator(b_m, e, &problem.noise, dt),
            };
            last = Some((e, u));
            steps.push(u);
        }
        Ok(Propagators { steps })
    }

    pub fn from_steps(steps: Vec<Mat4>) -> Self {
        Propagators { steps }
    }

    pub fn steps(&self) -> &[Mat4] {
        &self.steps
    }

    pub fn forward(&self, initial: &PauliCoords) -> Result<Trajectory, DynamicsError> {
        let mut points = Vec::with_capacity(self.steps.len() + 1);
        let mut c = *initial;
        points.push(c);
        for (j, u) in self.steps.iter().enumerate() {
            c = PauliCoords(linalg::matvec(u, &c.0));
            if !c.is_finite() {
                return Err(DynamicsError::NonFinite { step: j });
            }
            points.push(c);
        }
        Ok(Trajectory { points })
    }

    /// Adjoint propagation from `terminal` at `t = T` down to `t = 0`;
    /// the result is indexed by grid point.
    pub fn backward(&self, terminal: &PauliCoords) -> Result<Trajectory, DynamicsError> {
        let n = self.steps.len();
        let mut points = vec![PauliCoords::default(); n + 1];
        let mut c = *terminal;
        points[n] = c;
        for j in (0..n).rev() {
            c = PauliCoords(linalg::matvec_transposed(&self.steps[j], &c.0));
            if !c.is_finite() {
                return Err(DynamicsError::NonFinite { step: j });
            }
            points[j] = c;
        }
        Ok(Trajectory { points })
    }
}

/// `ρ_which(t_j)` on every grid point.
pub fn propagate_forward(
    problem: &DiscriminationProblem,
    which: Which,
    fields: &[ControlField; 3],
) -> Result<Trajectory, DynamicsError> {
    Propagators::build(problem, which, fields)?.forward(&problem.initial.coords())
}

/// `χ_which(t_j)` under the adjoint Liouvillian, from `χ(T) = terminal`.
pub fn propagate_backward(
    problem: &DiscriminationProblem,
    which: Which,
    fields: &[ControlField; 3],
    terminal: &CoState,
) -> Result<Trajectory, DynamicsError> {
    Propagators::build(problem, which, fields)?.backward(&terminal.coords())
}

/// Both hypotheses' forward trajectories.
pub fn propagate_pair(
    problem: &DiscriminationProblem,
    fields: &[ControlField; 3],
) -> Result<[Trajectory; 2], DynamicsError> {
    Ok([propagate_forward(problem, Which::First, fields)?, propagate_forward(problem, Which::Second, fields)?])
}
