use qdiscrim::dynamics::propagate_pair;
use qdiscrim::protocols::{
    final_time_grid, fit_effective_time, m_analytic, m_numeric, qfi_for_fields, qsl_time, ramsey_analytic,
    ramsey_gamma, MCurve, ProtocolError,
};
use qdiscrim::{ControlField, DiscriminationProblem, LindbladSpec, NoiseKind, StepPolicy, TimeGrid};

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn zeros(grid: &TimeGrid) -> [ControlField; 3] {
    std::array::from_fn(|_| ControlField::zeros(grid))
}

#[test]
fn fit_recovers_the_generating_rate() {
    let gamma = 1.0 / 2400.0;
    let curve = MCurve::analytic(log_spaced(0.002, 0.02, 7), gamma).unwrap();
    let labelled = MCurve { gamma_label: 1.0 / 1000.0, ..curve };
    let fit = fit_effective_time(&labelled, NoiseKind::Relaxation).unwrap();
    assert!((fit.gamma_eff / gamma - 1.0).abs() <= 1e-8);
    assert!((fit.ratio - 2.4).abs() <= 1e-7);
    assert!((fit.effective_time() - 2400.0).abs() <= 1e-4);
    assert!(fit.residual <= 1e-10);
}

/// `M` depends on `δB/γ` only, so rescaling every `δB` rescales the fitted `γ`.
#[test]
fn fit_is_scale_covariant() {
    let deltas = log_spaced(0.003, 0.05, 9);
    let m: Vec<f64> = deltas.iter().map(|&d| m_analytic(d, 0.004) + 0.003 * (d * 400.0).sin()).collect();
    let base =
        fit_effective_time(&MCurve::new(deltas.clone(), m.clone(), 0.004).unwrap(), NoiseKind::Dephasing).unwrap();
    for s in [0.1, 3.0, 250.0] {
        let scaled = MCurve::new(deltas.iter().map(|d| d * s).collect(), m.clone(), 0.004 * s).unwrap();
        let fit = fit_effective_time(&scaled, NoiseKind::Dephasing).unwrap();
        assert!((fit.gamma_eff / (s * base.gamma_eff) - 1.0).abs() <= 1e-8, "scale {s}");
        assert!((fit.ratio / base.ratio - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn fit_needs_enough_spread_data() {
    let short = MCurve::analytic(log_spaced(0.002, 0.02, 4), 1e-3).unwrap();
    assert!(matches!(fit_effective_time(&short, NoiseKind::Relaxation), Err(ProtocolError::Underdetermined(_))));
    let narrow = MCurve::analytic(log_spaced(0.002, 0.01, 8), 1e-3).unwrap();
    assert!(matches!(fit_effective_time(&narrow, NoiseKind::Relaxation), Err(ProtocolError::Underdetermined(_))));
}

#[test]
fn numeric_minimum_matches_closed_form() {
    for (kind, delta_b) in [(NoiseKind::Relaxation, 0.004), (NoiseKind::Dephasing, 0.03), (NoiseKind::Relaxation, 0.1)]
    {
        let noise = LindbladSpec::new(kind, 1.0 / 800.0).unwrap();
        let t = qsl_time(delta_b).unwrap();
        let n = StepPolicy { per_unit_time: 20.0, per_period: 2000.0, per_decay_time: 2000.0 }.n_steps(
            t,
            delta_b,
            noise.decay_time(),
        );
        let p = DiscriminationProblem::new(1.0, delta_b, noise, TimeGrid::new(t, n).unwrap()).unwrap();
        let [a, b] = propagate_pair(&p, &zeros(&p.grid)).unwrap();
        let want = m_analytic(delta_b, ramsey_gamma(kind, 800.0));
        assert!((m_numeric(&a, &b).unwrap() - want).abs() <= 1e-5, "{kind:?} δB = {delta_b}");
    }
}

#[test]
fn closed_form_limits() {
    assert_eq!(m_analytic(0.01, 0.0), 0.0);
    assert!(m_analytic(1e-6, 1.0) > 0.999);
    assert!((qsl_time(0.011).unwrap() - std::f64::consts::PI / 0.011).abs() < 1e-12);
    assert!(qsl_time(0.0).is_err());
}

/// For a rotation about `z` of a transverse Bloch component of length `a`,
/// the Fisher information is `a² t²`.
#[test]
fn ramsey_fisher_information_matches_rotation_formula() {
    for (kind, tau, decay) in [(NoiseKind::Relaxation, 500.0, 1.0 / 500.0), (NoiseKind::Dephasing, 500.0, 4.0 / 500.0)]
    {
        for t in [50.0, 300.0, 900.0] {
            let noise = LindbladSpec::new(kind, 1.0 / tau).unwrap();
            let p = DiscriminationProblem::new(1.0, 0.01, noise, TimeGrid::new(t, 200).unwrap()).unwrap();
            let f = qfi_for_fields(&p, &zeros(&p.grid), None).unwrap();
            let want = t * t * (-decay * t).exp();
            assert!((f / want - 1.0).abs() <= 1e-6, "{kind:?} T = {t}: {f} vs {want}");
        }
    }
}

#[test]
fn ramsey_closed_form_agrees_with_propagation() {
    let noise = LindbladSpec::relaxation(400.0).unwrap();
    let p = DiscriminationProblem::new(1.0, 0.02, noise, TimeGrid::new(600.0, 3000).unwrap()).unwrap();
    let closed = ramsey_analytic(&p).unwrap();
    let [a, b] = propagate_pair(&p, &zeros(&p.grid)).unwrap();
    for j in (0..a.len()).step_by(97) {
        let d = qdiscrim::trace_distance(&a.state(j).unwrap(), &b.state(j).unwrap());
        assert!((closed.d_tr[j] - d).abs() <= 1e-9);
    }
}

#[test]
fn final_times_double_per_octave_and_respect_the_cap() {
    let times = final_time_grid(0.01, None, 2).unwrap();
    assert_eq!(times.len(), 11);
    let qsl = qsl_time(0.01).unwrap();
    assert!((times[0] - 0.5 * qsl).abs() < 1e-9 && (times[10] - 16.0 * qsl).abs() < 1e-6);
    assert!(times.windows(3).all(|w| (w[2] / w[0] - 2.0).abs() < 1e-12));
    let capped = final_time_grid(0.002, Some(1000.0), 2).unwrap();
    assert_eq!(*capped.last().unwrap(), 10_000.0);
    assert!(capped.iter().all(|&t| t <= 10_000.0));
}
