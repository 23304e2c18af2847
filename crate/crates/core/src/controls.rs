//! Control fields, update shape functions and guess-field families.
//!
//! Fields are piecewise constant: sample `j` is the value on the interval
//! `[t_j, t_{j+1})`, evaluated at its midpoint.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::dynamics::TimeGrid;

/// Floor keeping shape functions strictly positive.
pub const SHAPE_FLOOR: f64 = 1e-8;
pub const DEFAULT_RAMP_FRACTION: f64 = 0.05;
/// Default guess-lobe width as a fraction of the protocol duration.
pub const DEFAULT_KICK_WIDTH_FRACTION: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("field has {got} samples, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("field sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid guess: {0}")]
    InvalidGuess(String),
    #[error("ramp fraction {0} outside [0, 0.5]")]
    RampFraction(f64),
}

/// Piecewise-constant real field on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    samples: Vec<f64>,
    dt: f64,
}

impl ControlField {
    pub fn zeros(grid: &TimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &TimeGrid, value: f64) -> Self {
        ControlField { samples: vec![value; grid.n_steps()], dt: grid.dt() }
    }

    /// Samples `f` at the interval midpoints.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..grid.n_steps()).map(|j| f(grid.midpoint(j))).collect();
        ControlField { samples, dt: grid.dt() }
    }

    pub fn from_samples(grid: &TimeGrid, samples: Vec<f64>) -> Result<Self, ControlError> {
        if samples.len() != grid.n_steps() {
            return Err(ControlError::Length { got: samples.len(), expected: grid.n_steps() });
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(ControlError::NonFinite { index });
        }
        Ok(ControlField { samples, dt: grid.dt() })
    }

    #[cfg(test)]
    pub(crate) fn from_samples_unchecked(samples: Vec<f64>) -> Self {
        let dt = 1.0 / samples.len() as f64;
        ControlField { samples, dt }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dt
    }

    /// `∫ E dt`.
    pub fn area(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt
    }

    /// `∫ E² dt`.
    pub fn fluence(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() * self.dt
    }
}

/// Update weight `S(t) ∈ (0, 1]` on each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    samples: Vec<f64>,
}

impl ShapeFunction {
    pub fn ones(grid: &TimeGrid) -> Self {
        ShapeFunction { samples: vec![1.0; grid.n_steps()] }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Flat-top window with `sin²` ramps of length `ramp_fraction·T` at both ends.
pub fn make_shape(grid: &TimeGrid, ramp_fraction: f64) -> Result<ShapeFunction, ControlError> {
    if !(0.0..=0.5).contains(&ramp_fraction) {
        return Err(ControlError::RampFraction(ramp_fraction));
    }
    let t_final = grid.t_final();
    let ramp = ramp_fraction * t_final;
    let samples = (0..grid.n_steps())
        .map(|j| {
            let t = grid.midpoint(j);
            let edge = t.min(t_final - t);
            let s = if edge < ramp { (FRAC_PI_2 * edge / ramp).sin().powi(2) } else { 1.0 };
            s.max(SHAPE_FLOOR)
        })
        .collect();
    Ok(ShapeFunction { samples })
}

/// Parametric guess-field families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuessSpec {
    Zero,
    Constant(f64),
    /// Constant `−B`, cancelling the known part of the drift.
    CancelDrift,
    /// Two Gaussian lobes: `amplitude` at `center1`, `−amplitude` at
    /// `center2`.
    KickPair {
        amplitude: f64,
        width: f64,
        center1: f64,
        center2: f64,
    },
    /// One Gaussian lobe.
    SplitPeak {
        amplitude: f64,
        width: f64,
        center: f64,
    },
}

fn gaussian(t: f64, center: f64, width: f64) -> f64 {
    let u = (t - center) / width;
    (-0.5 * u * u).exp()
}

/// `Σ_j g(t_j) dt` for a unit-peak Gaussian lobe on `grid`.
fn lobe_area(grid: &TimeGrid, center: f64, width: f64) -> f64 {
    (0..grid.n_steps()).map(|j| gaussian(grid.midpoint(j), center, width)).sum::<f64>() * grid.dt()
}

impl GuessSpec {
    /// Kick pair whose first lobe rotates `|+⟩` onto `|0⟩` about `y`
    /// (area `−π/2` on the grid) and whose second lobe undoes it. Lobes
    /// sit three widths inside the window.
    pub fn calibrated_kick_pair(grid: &TimeGrid, width: f64) -> Self {
        let t_final = grid.t_final();
        let center1 = (3.0 * width).min(0.5 * t_final);
        Self::calibrated_kick_pair_at(grid, width, center1, t_final - center1)
    }

    /// Kick pair at explicit centers, amplitude calibrated on the first lobe.
    pub fn calibrated_kick_pair_at(grid: &TimeGrid, width: f64, center1: f64, center2: f64) -> Self {
        let amplitude = -FRAC_PI_2 / lobe_area(grid, center1, width);
        GuessSpec::KickPair { amplitude, width, center1, center2 }
    }

    /// Single lobe of area `π/2` on the grid.
    pub fn calibrated_split_peak(grid: &TimeGrid, width: f64, center: f64) -> Self {
        let amplitude = FRAC_PI_2 / lobe_area(grid, center, width);
        GuessSpec::SplitPeak { amplitude, width, center }
    }

    pub fn default_width(grid: &TimeGrid) -> f64 {
        DEFAULT_KICK_WIDTH_FRACTION * grid.t_final()
    }

    fn validate(&self, grid: &TimeGrid) -> Result<(), ControlError> {
        let t_final = grid.t_final();
        let in_window = |c: f64| (0.0..=t_final).contains(&c);
        let check = |amplitude: f64, width: f64, centers: &[f64]| {
            if !amplitude.is_finite() {
                return Err(ControlError::InvalidGuess(format!("amplitude {amplitude} is not finite")));
            }
            if !(width.is_finite() && width > 0.0) {
                return Err(ControlError::InvalidGuess(format!("width {width} must be positive")));
            }
            if let Some(c) = centers.iter().find(|&&c| !in_window(c)) {
                return Err(ControlError::InvalidGuess(format!("center {c} outside [0, {t_final}]")));
            }
            for &c in centers {
                if c - 3.0 * width < 0.0 || c + 3.0 * width > t_final {
                    log::warn!("guess lobe at t = {c} (width {width}) is truncated by the window [0, {t_final}]");
                }
            }
            Ok(())
        };
        match *self {
            GuessSpec::Constant(v) if !v.is_finite() => {
                Err(ControlError::InvalidGuess(format!("constant {v} is not finite")))
            }
            GuessSpec::KickPair { amplitude, width, center1, center2 } => check(amplitude, width, &[center1, center2]),
            GuessSpec::SplitPeak { amplitude, width, center } => check(amplitude, width, &[center]),
            _ => Ok(()),
        }
    }
}

/// Samples a guess field; `b` is the known field midpoint used by
/// [`GuessSpec::CancelDrift`].
pub fn make_guess(spec: &GuessSpec, grid: &TimeGrid, b: f64) -> Result<ControlField, ControlError> {
    spec.validate(grid)?;
    let field = match *spec {
        GuessSpec::Zero => ControlField::zeros(grid),
        GuessSpec::Constant(v) => ControlField::constant(grid, v),
        GuessSpec::CancelDrift => ControlField::constant(grid, -b),
        GuessSpec::KickPair { amplitude, width, center1, center2 } => {
            ControlField::from_fn(grid, |t| amplitude * (gaussian(t, center1, width) - gaussian(t, center2, width)))
        }
        GuessSpec::SplitPeak { amplitude, width, center } => {
            ControlField::from_fn(grid, |t| amplitude * gaussian(t, center, width))
        }
    };
    Ok(field)
}

/// Running cost `Σ_j (λ/S_j)(E_j − E_j^ref)² dt`.
pub fn pulse_fluence(field: &ControlField, reference: &ControlField, shape: &ShapeFunction, lambda: f64) -> f64 {
    debug_assert_eq!(field.len(), reference.len());
    debug_assert_eq!(field.len(), shape.len());
    field
        .samples
        .iter()
        .zip(&reference.samples)
        .zip(&shape.samples)
        .map(|((e, r), s)| lambda / s * (e - r) * (e - r))
        .sum::<f64>()
        * field.dt
}
