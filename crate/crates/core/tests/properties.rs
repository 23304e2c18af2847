//! Randomized invariants of the state algebra and the propagator.

use nalgebra::{Complex, Matrix2};
use proptest::prelude::*;
use qdiscrim::algebra::{PauliCoords, Tolerances};
use qdiscrim::dynamics::{propagate_pair, Propagators};
use qdiscrim::{
    bures_distance, hilbert_schmidt_distance, trace_distance, BlochVector, ControlField, DensityMatrix,
    DiscriminationProblem, LindbladSpec, Mat2, NoiseKind, TimeGrid, Which,
};

const CASES: u32 = 1000;

fn bloch() -> impl Strategy<Value = [f64; 3]> {
    (0.0..=1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU)
        .prop_map(|(r, theta, phi)| [r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()])
}

fn state() -> impl Strategy<Value = DensityMatrix> {
    bloch().prop_map(|r| DensityMatrix::try_from_bloch(r).unwrap())
}

fn to_nalgebra(m: &Mat2) -> Matrix2<Complex<f64>> {
    let a = m.0;
    Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

/// Principal square root of a positive semidefinite Hermitian matrix by
/// eigendecomposition.
fn psd_sqrt(m: &Matrix2<Complex<f64>>) -> Matrix2<Complex<f64>> {
    let eig = m.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| Complex::new(l.max(0.0).sqrt(), 0.0));
    eig.eigenvectors * Matrix2::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// `√(2 − 2 Tr√(√a b √a))` with general matrix square roots.
fn bures_oracle(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let root_a = psd_sqrt(&to_nalgebra(a.matrix()));
    let inner = root_a * to_nalgebra(b.matrix()) * root_a;
    let inner = (inner + inner.adjoint()) * Complex::new(0.5, 0.0);
    let fidelity: f64 = inner.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    (2.0 - 2.0 * fidelity.min(1.0)).max(0.0).sqrt()
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn hilbert_schmidt_is_trace_distance_squared(a in state(), b in state()) {
        let d = trace_distance(&a, &b);
        prop_assert!((hilbert_schmidt_distance(&a, &b) - d * d).abs() <= 1e-12);
    }

    #[test]
    fn trace_distance_is_half_bloch_separation(a in state(), b in state()) {
        let want = 0.5 * a.to_bloch().distance(&b.to_bloch());
        prop_assert!((trace_distance(&a, &b) - want).abs() <= 1e-12);
    }

    #[test]
    fn bloch_round_trip(r in bloch()) {
        let rho = DensityMatrix::from_bloch(&BlochVector::new(r).unwrap());
        let back = rho.to_bloch().components();
        for k in 0..3 {
            prop_assert!((back[k] - r[k]).abs() <= 1e-12);
        }
        let again = DensityMatrix::from_bloch(&rho.to_bloch());
        prop_assert!((*again.matrix() - *rho.matrix()).max_abs() <= 1e-12);
    }

    #[test]
    fn purity_from_bloch_length(r in bloch()) {
        let rho = DensityMatrix::try_from_bloch(r).unwrap();
        let n = norm(r);
        prop_assert!((rho.purity() - 0.5 * (1.0 + n * n)).abs() <= 1e-12);
    }

    #[test]
    fn bures_closed_form_matches_matrix_roots(a in state(), b in state()) {
        let closed = bures_distance(&a, &b).unwrap();
        let oracle = bures_oracle(&a, &b);
        prop_assert!((closed - oracle).abs() <= 1e-10, "closed {closed} oracle {oracle}");
    }

    #[test]
    fn distances_are_symmetric(a in state(), b in state()) {
        prop_assert_eq!(trace_distance(&a, &b), trace_distance(&b, &a));
        prop_assert!((hilbert_schmidt_distance(&a, &b) - hilbert_schmidt_distance(&b, &a)).abs() <= 1e-15);
        prop_assert!((bures_distance(&a, &b).unwrap() - bures_distance(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(trace_distance(&a, &a) <= 1e-15);
        prop_assert!(bures_distance(&a, &a).unwrap() <= 1e-7);
    }
}

#[derive(Debug, Clone)]
struct RandomRun {
    problem: DiscriminationProblem,
    fields: [ControlField; 3],
}

fn random_run(max_rate: f64) -> impl Strategy<Value = RandomRun> {
    (
        0usize..3,
        0.0..=max_rate,
        0.001..0.5f64,
        1.0..60.0f64,
        5usize..60,
        bloch(),
        prop::collection::vec(-2.0..2.0f64, 3 * 60),
    )
        .prop_map(|(kind, rate, delta_b, t_final, n, r, samples)| {
            let grid = TimeGrid::new(t_final, n).unwrap();
            let noise = match kind {
                0 => LindbladSpec::none(),
                1 => LindbladSpec::new(NoiseKind::Relaxation, rate).unwrap(),
                _ => LindbladSpec::new(NoiseKind::Dephasing, rate).unwrap(),
            };
            let fields = std::array::from_fn(|k| {
                ControlField::from_samples(&grid, samples[k * 60..k * 60 + n].to_vec()).unwrap()
            });
            let problem = DiscriminationProblem::new(1.0, delta_b, noise, grid)
                .unwrap()
                .with_initial(DensityMatrix::try_from_bloch(r).unwrap());
            RandomRun { problem, fields }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn forward_trajectories_stay_physical(run in random_run(0.2)) {
        for trajectory in propagate_pair(&run.problem, &run.fields).unwrap() {
            for c in trajectory.points() {
                let m = c.to_matrix();
                let (lo, _) = m.hermitian_eigenvalues();
                prop_assert!((m.trace().re - 1.0).abs() <= 1e-10);
                prop_assert!(m.trace().im.abs() <= 1e-10);
                prop_assert!(lo >= -1e-10, "eigenvalue {lo}");
                prop_assert!(m.hermiticity_defect() <= 1e-10);
                prop_assert!(DensityMatrix::from_coords(c, &Tolerances::PROPAGATED).is_ok());
            }
        }
    }

    #[test]
    fn adjoint_pairing_is_conserved(run in random_run(0.2), terminal in prop::array::uniform4(-1.0..1.0f64)) {
        for which in Which::BOTH {
            let props = Propagators::build(&run.problem, which, &run.fields).unwrap();
            let rho = props.forward(&run.problem.initial.coords()).unwrap();
            let chi = props.backward(&PauliCoords(terminal)).unwrap();
            let reference = chi.coords(0).inner(rho.coords(0));
            for j in 0..rho.len() {
                prop_assert!((chi.coords(j).inner(rho.coords(j)) - reference).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_dynamics_preserves_purity(run in random_run(0.0)) {
        let mut run = run;
        run.problem.noise = LindbladSpec::none();
        let start = run.problem.initial.purity();
        for trajectory in propagate_pair(&run.problem, &run.fields).unwrap() {
            for c in trajectory.points() {
                let p = 0.5 * (c.0[0] * c.0[0] + norm(c.vector()).powi(2));
                prop_assert!((p - start).abs() <= 1e-10);
            }
        }
    }
}
