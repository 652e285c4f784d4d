use cpdsym::geometry::scalar_phi;
use cpdsym::integrators::homogeneous::ScalarCoefficients;
use cpdsym::integrators::CoefficientSet;
use cpdsym::verification::*;
use cpdsym::*;
use num_complex::Complex;

/// `α` without the `φ₁` factor: not symplectic.
struct Perturbed;

impl ScalarCoefficients<f64> for Perturbed {
    fn alpha(&self, tau: f64, sigma: f64, _theta: f64) -> Complex<f64> {
        Complex::new((tau - sigma) * 0.5, 0.0)
    }
    fn beta(&self, tau: f64, theta: f64) -> Complex<f64> {
        scalar_phi(1, (1.0 - tau) * theta) * (1.0 - tau)
    }
    fn gamma(&self, tau: f64, theta: f64) -> Complex<f64> {
        scalar_phi(0, (1.0 - tau) * theta)
    }
}

#[test]
fn coefficient_families_satisfy_the_symplectic_conditions() {
    let samples = condition_samples::<f64>(100, 1e-6, 50.0, 11);
    for set in [CoefficientSet::second_order(), CoefficientSet::fourth_order()] {
        let r = symplectic_condition_residuals(&set, &samples);
        assert!(r.cond_i <= 1e-12 && r.cond_ii <= 1e-12 && r.cond_iii <= 1e-12, "{r:?}");
        assert!(r.d_tau.iter().all(|d| (d - 1.0).norm() <= 1e-12));
    }
}

#[test]
fn perturbed_coefficients_violate_condition_three() {
    let samples = condition_samples::<f64>(20, 0.5, 5.0, 3);
    let r = symplectic_condition_residuals(&Perturbed, &samples);
    assert!(r.cond_i <= 1e-12 && r.cond_ii <= 1e-12);
    assert!(r.cond_iii > 1e-3);
}

#[test]
fn fine_oracle_flow_is_symplectic() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    let integ = Integrator::new(Method::Sc2o4).with_controls(FixedPointControls::tight());
    let r = symplecticity_residual_of(&p, &p.initial_state(), None, |s| {
        integ.advance(&p, *s, 1e-3, 100, &mut SolveStats::default())
    })
    .unwrap();
    assert!(r <= 1e-5, "{r:e}");
}

#[test]
fn symplectic_methods_pass_and_implicit_euler_fails() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    let states = sample_states(&p, 3, 5);
    for m in [Method::Sc1o2, Method::Sc2o2, Method::Sc1o4, Method::Sc2o4, Method::Rko2, Method::Rko4] {
        let integ = Integrator::new(m).with_controls(FixedPointControls::tight());
        let r = symplecticity_report(&integ, &p, 0.1, &states).unwrap();
        assert!(r.max_residual() <= 1e-5, "{m}: {:e}", r.max_residual());
    }
    let ie = Integrator::new(Method::ImplicitEuler).with_controls(FixedPointControls::tight());
    assert!(symplecticity_report(&ie, &p, 0.1, &states).unwrap().max_residual() > 1e-3);
}

#[test]
fn symplecticity_needs_a_vector_potential() {
    let p = make_problem::<f64>(ProblemId::P3, 0.5).unwrap();
    let r = symplecticity_residual(&Integrator::new(Method::Sg1o2), &p, &p.initial_state(), 0.1, None);
    assert!(matches!(r, Err(CpdError::Unsupported(_))));
}

#[test]
fn sample_states_are_seeded() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    assert_eq!(sample_states(&p, 4, 9), sample_states(&p, 4, 9));
    assert_ne!(sample_states(&p, 4, 9), sample_states(&p, 4, 10));
    assert_eq!(sample_states(&p, 4, 9)[0], p.initial_state());
}

#[test]
fn energy_series_starts_at_zero_and_stays_bounded() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    let tr = Integrator::new(Method::Sc2o2).integrate(&p, 0.01, 2000, 10).unwrap();
    let es = energy_series(&tr, &p).unwrap();
    assert_eq!(es.errors[0], 0.0);
    assert_eq!(es.errors.len(), 201);
    let (first, second) = es.half_maxima();
    assert!(es.max() <= 1e-2 && second <= 2.0 * first);
}

#[test]
fn study_measures_the_expected_orders() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    let hs: Vec<f64> = (3..=7).map(|k| 0.5f64.powi(k)).collect();
    for (m, lo, hi) in [(Method::Sc1o2, 1.8, 2.3), (Method::Sc2o4, 3.7, 4.3)] {
        let r = convergence_study(&Integrator::new(m), &p, &hs, 1.0, &OracleConfig::default()).unwrap();
        assert_eq!(r.rows.len(), 5);
        let slope = r.fit(|e| e.error()).unwrap().slope;
        assert!((lo..=hi).contains(&slope), "{m}: {slope}");
    }
}

#[test]
fn uniformity_table_reports_ratio() {
    let t = eps_uniformity::<f64>(
        &Integrator::new(Method::Sc2o2),
        ProblemId::P1,
        1e-2,
        0.5,
        &[1e-1, 1e-2],
        UniformityMetric::Position,
        &OracleConfig::default(),
    )
    .unwrap();
    assert_eq!(t.rows.len(), 2);
    let (a, b): (f64, f64) = (t.rows[0].metrics.err_x, t.rows[1].metrics.err_x);
    assert!((t.ratio - a.max(b) / a.min(b)).abs() < 1e-12);
}
