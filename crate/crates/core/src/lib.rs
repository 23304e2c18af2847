//! Optimal control of qubit state discrimination and estimation under
//! relaxation or pure dephasing.
//!
//! Two copies of a qubit evolve under drifts `(B ∓ δB/2)σ_z/2`, common
//! control fields `½ Σ_k E_k(t) σ_k` and a single Lindblad channel. The crate
//! propagates both hypotheses ([`dynamics`]), shapes the fields with Krotov's
//! method to maximize their Hilbert-Schmidt distance ([`krotov`]) and
//! evaluates the Ramsey baselines, speed limit, Fisher information and
//! effective decay-time fits ([`protocols`]).

#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod config;
pub mod controls;
pub mod dynamics;
pub mod io;
pub mod krotov;
pub mod linalg;
pub mod protocols;

pub use algebra::{
    bures_distance, hilbert_schmidt_distance, purity, success_probability, trace_distance, BlochVector, CoState,
    DensityMatrix, Mat2,
};
pub use controls::{make_guess, make_shape, pulse_fluence, ControlField, GuessSpec, ShapeFunction};
pub use dynamics::{
    propagate_backward, propagate_forward, DiscriminationProblem, LindbladSpec, NoiseKind, StepPolicy, TimeGrid,
    Trajectory, Which,
};
pub use krotov::{optimize, KrotovConfig, KrotovState};
