use std::f64::consts::PI;

use qdiscrim::dynamics::{propagate_pair, StepPolicy};
use qdiscrim::{
    propagate_forward, trace_distance, ControlField, DensityMatrix, DiscriminationProblem, LindbladSpec, TimeGrid,
    Which,
};

fn zeros(grid: &TimeGrid) -> [ControlField; 3] {
    std::array::from_fn(|_| ControlField::zeros(grid))
}

fn problem(delta_b: f64, noise: LindbladSpec, t_final: f64) -> DiscriminationProblem {
    let n = StepPolicy::default().n_steps(t_final, delta_b, noise.decay_time());
    DiscriminationProblem::new(1.0, delta_b, noise, TimeGrid::new(t_final, n).unwrap()).unwrap()
}

fn ramsey_max_error(p: &DiscriminationProblem, envelope: impl Fn(f64) -> f64) -> f64 {
    let [a, b] = propagate_pair(p, &zeros(&p.grid)).unwrap();
    (0..a.len())
        .map(|j| {
            let t = p.grid.time(j);
            let want = envelope(t) * (0.5 * p.delta_b * t).sin().abs();
            (trace_distance(&a.state(j).unwrap(), &b.state(j).unwrap()) - want).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn ramsey_relaxation_follows_closed_form() {
    for delta_b in [0.005, 0.011, 0.05] {
        let p = problem(delta_b, LindbladSpec::relaxation(1000.0).unwrap(), 3000.0);
        let err = ramsey_max_error(&p, |t| (-t / 2000.0).exp());
        assert!(err <= 1e-6, "δB = {delta_b}: {err:e}");
    }
}

#[test]
fn ramsey_dephasing_follows_closed_form() {
    for delta_b in [0.005, 0.011, 0.05] {
        let p = problem(delta_b, LindbladSpec::dephasing(1000.0).unwrap(), 1500.0);
        let err = ramsey_max_error(&p, |t| (-2.0 * t / 1000.0).exp());
        assert!(err <= 1e-6, "δB = {delta_b}: {err:e}");
    }
}

#[test]
fn noiseless_pair_is_orthogonal_at_speed_limit() {
    let delta_b = 0.02;
    let p = problem(delta_b, LindbladSpec::none(), PI / delta_b);
    let [a, b] = propagate_pair(&p, &zeros(&p.grid)).unwrap();
    let d = trace_distance(&a.final_state().unwrap(), &b.final_state().unwrap());
    assert!((d - 1.0).abs() <= 1e-8, "{d}");
}

#[test]
fn excited_population_decays_exponentially() {
    let t1 = 50.0;
    let p = problem(0.01, LindbladSpec::relaxation(t1).unwrap(), 200.0).with_initial(DensityMatrix::excited());
    let rho = propagate_forward(&p, Which::First, &zeros(&p.grid)).unwrap();
    for j in (0..rho.len()).step_by(37) {
        let p11 = rho.state(j).unwrap().matrix().0[1][1].re;
        assert!((p11 - (-p.grid.time(j) / t1).exp()).abs() <= 1e-8);
    }
}

#[test]
fn dephasing_drives_purity_to_one_half() {
    let p = problem(0.01, LindbladSpec::dephasing(10.0).unwrap(), 200.0);
    let [a, _] = propagate_pair(&p, &zeros(&p.grid)).unwrap();
    assert!((a.final_state().unwrap().purity() - 0.5).abs() <= 1e-12);
}

/// Smooth fields sampled at midpoints: halving `dt` shrinks the final-state
/// error at least quadratically.
#[test]
fn refinement_converges_at_second_order() {
    let noise = LindbladSpec::relaxation(30.0).unwrap();
    let run = |n: usize| {
        let grid = TimeGrid::new(20.0, n).unwrap();
        let fields = [
            ControlField::from_fn(&grid, |t| 0.3 * (0.4 * t).sin()),
            ControlField::from_fn(&grid, |t| 0.2 * (0.25 * t).cos()),
            ControlField::from_fn(&grid, |t| -1.0 + 0.1 * t / 20.0),
        ];
        let p = DiscriminationProblem::new(1.0, 0.05, noise, grid).unwrap();
        propagate_forward(&p, Which::First, &fields).unwrap().last().0
    };
    let diff = |a: [f64; 4], b: [f64; 4]| a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (coarse, mid, fine) = (run(100), run(200), run(400));
    let (e1, e2) = (diff(coarse, fine), diff(mid, fine));
    assert!(e1 / e2 >= 3.5, "error ratio {}", e1 / e2);
}
