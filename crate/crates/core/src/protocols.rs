//! Ramsey baselines, the speed limit, maximal-distinguishability curves,
//! quantum Fisher information and effective decay-time fits.

use std::f64::consts::PI;

use thiserror::Error;

use crate::algebra::{
    bures_distance_with, hilbert_schmidt_distance, trace_distance, AlgebraError, BlochVector, DensityMatrix, Tolerances,
};
use crate::controls::{ControlField, GuessSpec};
use crate::dynamics::{propagate_pair, DiscriminationProblem, DynamicsError, NoiseKind, TimeGrid, Trajectory};
use crate::krotov::KrotovError;

/// Fisher-information finite-difference splitting in units of `1/T`.
pub const DEFAULT_QFI_SCALE: f64 = 1e-3;
/// Final-time family for optimized curves, in units of `T_QSL`.
pub const FINAL_TIME_RANGE: (f64, f64) = (0.5, 16.0);
/// Final times never exceed this many decay times.
pub const FINAL_TIME_CAP_DECAY_TIMES: f64 = 10.0;
pub const MIN_FIT_POINTS: usize = 5;

const FIT_SCAN_POINTS: usize = 241;
/// Fit search window relative to the smallest and largest `δB`.
const FIT_WINDOW: (f64, f64) = (1e-4, 1e2);
const GOLDEN_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("underdetermined fit: {0}")]
    Underdetermined(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Krotov(#[from] KrotovError),
}

/// Minimal time `π/δB` for orthogonal final states without noise.
pub fn qsl_time(delta_b: f64) -> Result<f64, ProtocolError> {
    if !(delta_b.is_finite() && delta_b > 0.0) {
        return Err(ProtocolError::InvalidParameter(format!("δB = {delta_b} must be positive")));
    }
    Ok(PI / delta_b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyResult {
    pub times: Vec<f64>,
    pub d_hs: Vec<f64>,
    pub d_tr: Vec<f64>,
    pub purity_1: Vec<f64>,
    pub purity_2: Vec<f64>,
}

impl RamseyResult {
    fn from_states(times: Vec<f64>, states: &[(DensityMatrix, DensityMatrix)]) -> Self {
        let d_hs = states.iter().map(|(a, b)| hilbert_schmidt_distance(a, b)).collect();
        let d_tr = states.iter().map(|(a, b)| trace_distance(a, b)).collect();
        let purity_1 = states.iter().map(|(a, _)| a.purity()).collect();
        let purity_2 = states.iter().map(|(_, b)| b.purity()).collect();
        RamseyResult { times, d_hs, d_tr, purity_1, purity_2 }
    }
}

/// Bloch vector of free evolution from `|+⟩` under `B_m σ_z/2` and `noise`.
fn ramsey_bloch(b_m: f64, problem: &DiscriminationProblem, t: f64) -> [f64; 3] {
    let gamma = problem.noise.rate;
    let (transverse, z) = match problem.noise.kind {
        NoiseKind::None => (1.0, 0.0),
        NoiseKind::Relaxation => ((-0.5 * gamma * t).exp(), 1.0 - (-gamma * t).exp()),
        NoiseKind::Dephasing => ((-2.0 * gamma * t).exp(), 0.0),
    };
    let phase = b_m * t;
    [transverse * phase.cos(), transverse * phase.sin(), z]
}

/// Free evolution of both hypotheses on the problem's grid.
///
/// Closed forms apply to the `|+⟩` initial state; any other initial state is
/// propagated numerically.
pub fn ramsey_analytic(problem: &DiscriminationProblem) -> Result<RamseyResult, ProtocolError> {
    let times: Vec<f64> = problem.grid.times().collect();
    let plus = DensityMatrix::plus();
    if (*problem.initial.matrix() - *plus.matrix()).max_abs() > Tolerances::STRICT.hermitian {
        log::info!("Ramsey closed form needs |+⟩; propagating numerically");
        let zero = ControlField::zeros(&problem.grid);
        let fields = [zero.clone(), zero.clone(), zero];
        let [a, b] = propagate_pair(problem, &fields)?;
        let states = a.states()?.into_iter().zip(b.states()?).collect::<Vec<_>>();
        return Ok(RamseyResult::from_states(times, &states));
    }
    let [b1, b2] = [problem.b - 0.5 * problem.delta_b, problem.b + 0.5 * problem.delta_b];
    let states = times
        .iter()
        .map(|&t| {
            let r1 = BlochVector::new(ramsey_bloch(b1, problem, t))?;
            let r2 = BlochVector::new(ramsey_bloch(b2, problem, t))?;
            Ok((DensityMatrix::from_bloch(&r1), DensityMatrix::from_bloch(&r2)))
        })
        .collect::<Result<Vec<_>, AlgebraError>>()?;
    Ok(RamseyResult::from_states(times, &states))
}

/// Closed-form `min_t (1 − D_tr)` of the Ramsey protocol for transverse
/// decay at rate `γ/2`. Pass `γ = 1/T1` for relaxation and `γ = 4/T2` for
/// dephasing.
pub fn m_analytic(delta_b: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let (d2, g2) = (delta_b * delta_b, gamma * gamma);
    let angle = ((g2 - d2) / (g2 + d2)).clamp(-1.0, 1.0).acos();
    let inner = d2 / (d2 + g2) * (-(gamma / delta_b) * angle).exp();
    (1.0 - inner.sqrt()).clamp(0.0, 1.0)
}

/// The `γ` entering [`m_analytic`] for a noise channel with the given decay time.
pub fn ramsey_gamma(kind: NoiseKind, decay_time: f64) -> f64 {
    match kind {
        NoiseKind::None => 0.0,
        NoiseKind::Relaxation => 1.0 / decay_time,
        NoiseKind::Dephasing => 4.0 / decay_time,
    }
}

/// Decay time corresponding to a fitted `γ` (inverse of [`ramsey_gamma`]).
pub fn decay_time_from_gamma(kind: NoiseKind, gamma: f64) -> f64 {
    match kind {
        NoiseKind::None => f64::INFINITY,
        NoiseKind::Relaxation => 1.0 / gamma,
        NoiseKind::Dephasing => 4.0 / gamma,
    }
}

/// `min_j (1 − D_tr(ρ₁(t_j), ρ₂(t_j)))` over the grid points of a trajectory pair.
pub fn m_numeric(first: &Trajectory, second: &Trajectory) -> Result<f64, ProtocolError> {
    if first.len() != second.len() {
        return Err(ProtocolError::InvalidParameter(format!(
            "trajectories have {} and {} points",
            first.len(),
            second.len()
        )));
    }
    let mut best = 1.0f64;
    for j in 0..first.len() {
        best = best.min(1.0 - trace_distance(&first.state(j)?, &second.state(j)?));
    }
    Ok(best.max(0.0))
}

/// `4 D_B² / δB²` for states evolved under `B ∓ δB/2`; meaningful for small `δB`.
pub fn qfi(rho1: &DensityMatrix, rho2: &DensityMatrix, delta_b: f64) -> Result<f64, ProtocolError> {
    if !(delta_b.is_finite() && delta_b > 0.0) {
        return Err(ProtocolError::InvalidParameter(format!("δB = {delta_b} must be positive")));
    }
    let d = bures_distance_with(rho1, rho2, &Tolerances::PROPAGATED)?;
    Ok(4.0 * d * d / (delta_b * delta_b))
}

/// Fisher information of the protocol defined by `fields` around `problem.b`,
/// from a finite-difference splitting `fd_delta_b` (default `10⁻³/T`).
pub fn qfi_for_fields(
    problem: &DiscriminationProblem,
    fields: &[ControlField; 3],
    fd_delta_b: Option<f64>,
) -> Result<f64, ProtocolError> {
    let delta = fd_delta_b.unwrap_or(DEFAULT_QFI_SCALE / problem.grid.t_final());
    if !(delta.is_finite() && delta > 0.0) {
        return Err(ProtocolError::InvalidParameter(format!("finite-difference δB = {delta} must be positive")));
    }
    let local = problem.with_delta_b(delta);
    let [a, b] = propagate_pair(&local, fields)?;
    qfi(&a.final_state()?, &b.final_state()?, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Ramsey,
    Optimized,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Ramsey => "ramsey",
            Protocol::Optimized => "optimized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ramsey" => Some(Protocol::Ramsey),
            "optimized" => Some(Protocol::Optimized),
            _ => None,
        }
    }
}

/// One row of the tidy sweep table: final-time figures of merit of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta_b: f64,
    pub t_final: f64,
    pub protocol: Protocol,
    pub d_hs: f64,
    pub d_tr: f64,
    pub purity1: f64,
    pub purity2: f64,
    pub qfi_over_t: f64,
}

impl SweepRow {
    /// Figures of merit after running `fields` on `problem`.
    pub fn evaluate(
        problem: &DiscriminationProblem,
        fields: &[ControlField; 3],
        protocol: Protocol,
        fd_delta_b: Option<f64>,
    ) -> Result<Self, ProtocolError> {
        let [a, b] = propagate_pair(problem, fields)?;
        let (r1, r2) = (a.final_state()?, b.final_state()?);
        let t_final = problem.grid.t_final();
        Ok(SweepRow {
            delta_b: problem.delta_b,
            t_final,
            protocol,
            d_hs: hilbert_schmidt_distance(&r1, &r2),
            d_tr: trace_distance(&r1, &r2),
            purity1: r1.purity(),
            purity2: r2.purity(),
            qfi_over_t: qfi_for_fields(problem, fields, fd_delta_b)? / t_final,
        })
    }

    /// Ramsey row: all controls off.
    pub fn ramsey(problem: &DiscriminationProblem, fd_delta_b: Option<f64>) -> Result<Self, ProtocolError> {
        let zero = ControlField::zeros(&problem.grid);
        Self::evaluate(problem, &[zero.clone(), zero.clone(), zero], Protocol::Ramsey, fd_delta_b)
    }

    /// Sort key of the order-normalized tables.
    pub fn order(a: &SweepRow, b: &SweepRow) -> std::cmp::Ordering {
        a.delta_b.total_cmp(&b.delta_b).then(a.t_final.total_cmp(&b.t_final)).then(a.protocol.cmp(&b.protocol))
    }
}

/// Guesses and optimization mask of the single-field control strategies:
/// `E_z = −B` throughout, plus a `π/2` kick pair on `E_y` against relaxation
/// or an early `E_x` peak against dephasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub guesses: [GuessSpec; 3],
    pub mask: [bool; 3],
}

impl Strategy {
    pub fn for_noise(kind: NoiseKind, grid: &TimeGrid) -> Self {
        let width = GuessSpec::default_width(grid);
        match kind {
            NoiseKind::Dephasing => Strategy {
                guesses: [
                    GuessSpec::calibrated_split_peak(grid, width, 3.0 * width),
                    GuessSpec::Zero,
                    GuessSpec::CancelDrift,
                ],
                mask: [true, false, false],
            },
            NoiseKind::Relaxation | NoiseKind::None => Strategy {
                guesses: [GuessSpec::Zero, GuessSpec::calibrated_kick_pair(grid, width), GuessSpec::CancelDrift],
                mask: [false, true, false],
            },
        }
    }
}

/// Geometric family of final times `T ∈ [0.5, 16]·T_QSL`, `per_octave`
/// points per doubling, capped at ten decay times (the cap itself is added
/// when it cuts the family short).
pub fn final_time_grid(delta_b: f64, decay_time: Option<f64>, per_octave: usize) -> Result<Vec<f64>, ProtocolError> {
    if per_octave == 0 {
        return Err(ProtocolError::InvalidParameter("per_octave must be at least 1".into()));
    }
    let qsl = qsl_time(delta_b)?;
    let (lo, hi) = FINAL_TIME_RANGE;
    let octaves = (hi / lo).log2().round() as usize;
    let cap = decay_time.map_or(f64::INFINITY, |tau| FINAL_TIME_CAP_DECAY_TIMES * tau);
    let mut times: Vec<f64> = (0..=octaves * per_octave)
        .map(|i| lo * qsl * 2f64.powf(i as f64 / per_octave as f64))
        .filter(|&t| t <= cap)
        .collect();
    if times.len() <= octaves * per_octave && times.last().is_none_or(|&t| t < cap) {
        times.push(cap);
    }
    Ok(times)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCurve {
    pub delta_b_values: Vec<f64>,
    pub m_values: Vec<f64>,
    /// Nominal `γ` of the data, in the units of [`m_analytic`].
    pub gamma_label: f64,
}

impl MCurve {
    pub fn new(delta_b_values: Vec<f64>, m_values: Vec<f64>, gamma_label: f64) -> Result<Self, ProtocolError> {
        if delta_b_values.len() != m_values.len() {
            return Err(ProtocolError::InvalidParameter(format!(
                "{} δB values but {} M values",
                delta_b_values.len(),
                m_values.len()
            )));
        }
        if let Some(d) = delta_b_values.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(ProtocolError::InvalidParameter(format!("δB = {d} must be positive")));
        }
        if let Some(m) = m_values.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(ProtocolError::InvalidParameter(format!("M = {m} outside [0, 1]")));
        }
        Ok(MCurve { delta_b_values, m_values, gamma_label })
    }

    /// Closed-form Ramsey curve.
    pub fn analytic(delta_b_values: Vec<f64>, gamma: f64) -> Result<Self, ProtocolError> {
        let m_values = delta_b_values.iter().map(|&d| m_analytic(d, gamma)).collect();
        Self::new(delta_b_values, m_values, gamma)
    }

    /// Per-`δB` minimum of `1 − D_tr` over the rows of one protocol,
    /// i.e. the best final time of each family.
    pub fn from_rows(rows: &[SweepRow], protocol: Protocol, gamma_label: f64) -> Result<Self, ProtocolError> {
        let mut best: Vec<(f64, f64)> = Vec::new();
        for row in rows.iter().filter(|r| r.protocol == protocol) {
            let m = (1.0 - row.d_tr).clamp(0.0, 1.0);
            match best.iter_mut().find(|(d, _)| *d == row.delta_b) {
                Some(entry) => entry.1 = entry.1.min(m),
                None => best.push((row.delta_b, m)),
            }
        }
        best.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (d, m) = best.into_iter().unzip();
        Self::new(d, m, gamma_label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTimeFit {
    pub gamma_eff: f64,
    /// Root-mean-square misfit of the closed form at `gamma_eff`.
    pub residual: f64,
    /// `T_eff / T_nominal`, equal to `γ_nominal / γ_eff`.
    pub ratio: f64,
    pub noise_kind: NoiseKind,
}

impl EffectiveTimeFit {
    pub fn effective_time(&self) -> f64 {
        decay_time_from_gamma(self.noise_kind, self.gamma_eff)
    }
}

fn sum_squares(curve: &MCurve, gamma: f64) -> f64 {
    curve.delta_b_values.iter().zip(&curve.m_values).map(|(&d, &m)| (m_analytic(d, gamma) - m).powi(2)).sum()
}

/// Least-squares `γ` of the closed-form curve: a log-spaced scan followed by
/// golden-section refinement in `ln γ`.
pub fn fit_effective_time(curve: &MCurve, noise_kind: NoiseKind) -> Result<EffectiveTimeFit, ProtocolError> {
    let n = curve.delta_b_values.len();
    if n < MIN_FIT_POINTS {
        return Err(ProtocolError::Underdetermined(format!("{n} points, need at least {MIN_FIT_POINTS}")));
    }
    let lo = curve.delta_b_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = curve.delta_b_values.iter().copied().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(ProtocolError::Underdetermined(format!("δB spans [{lo}, {hi}], less than a decade")));
    }
    let (a, b) = ((lo * FIT_WINDOW.0).ln(), (hi * FIT_WINDOW.1).ln());
    let step = (b - a) / (FIT_SCAN_POINTS - 1) as f64;
    let loss = |x: f64| sum_squares(curve, x.exp());
    let scan: Vec<f64> = (0..FIT_SCAN_POINTS).map(|i| loss(a + step * i as f64)).collect();
    let best = scan
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .ok_or_else(|| ProtocolError::FitFailed("empty scan".into()))?;
    if best == 0 || best == FIT_SCAN_POINTS - 1 {
        return Err(ProtocolError::FitFailed(format!(
            "minimum pinned at the search boundary γ = {:.3e}",
            (a + step * best as f64).exp()
        )));
    }
    let x = golden_section(loss, a + step * (best - 1) as f64, a + step * (best + 1) as f64);
    let gamma_eff = x.exp();
    let residual = (sum_squares(curve, gamma_eff) / n as f64).sqrt();
    if !(gamma_eff.is_finite() && residual.is_finite()) {
        return Err(ProtocolError::FitFailed("non-finite optimum".into()));
    }
    Ok(EffectiveTimeFit { gamma_eff, residual, ratio: curve.gamma_label / gamma_eff, noise_kind })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
