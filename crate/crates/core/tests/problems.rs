use cpdsym::geometry::Vec3;
use cpdsym::*;
use proptest::prelude::*;

fn fd_gradient(f: impl Fn(Vec3<f64>) -> f64, x: Vec3<f64>, d: f64) -> Vec3<f64> {
    let mut g = Vec3::zero();
    for i in 0..3 {
        let e = Vec3::unit(i) * d;
        g.0[i] = (f(x + e) - f(x - e)) / (2.0 * d);
    }
    g
}

/// `∇ × A` with `A(x) = ε·p(x, v = 0)`.
fn fd_curl(p: &Problem, x: Vec3<f64>, d: f64) -> Vec3<f64> {
    let a = |x: Vec3<f64>| p.momentum(x, Vec3::zero()).unwrap() * p.eps;
    let da = |i: usize| (a(x + Vec3::unit(i) * d) - a(x - Vec3::unit(i) * d)) * (0.5 / d);
    let (d0, d1, d2) = (da(0), da(1), da(2));
    Vec3::new(d1[2] - d2[1], d2[0] - d0[2], d0[1] - d1[0])
}

fn point() -> impl Strategy<Value = Vec3<f64>> {
    prop::array::uniform3(-2.0f64..2.0)
        .prop_filter("away from the axis", |a| a[0].hypot(a[1]) > 0.2)
        .prop_map(Vec3::from_f64)
}

proptest! {
    #[test]
    fn force_is_minus_grad_potential(x in point(), eps in 0.01f64..1.0) {
        for id in ProblemId::ALL {
            let p = make_problem(id, eps).unwrap();
            let g = fd_gradient(|y| p.potential(y).unwrap(), x, 1e-5);
            let f = p.force(x).unwrap();
            prop_assert!((f + g).norm() < 1e-8 * f.norm().max(1.0));
        }
    }

    #[test]
    fn vector_potential_curls_to_the_field(x in point(), eps in 0.01f64..1.0) {
        for id in [ProblemId::P1, ProblemId::P2] {
            let p = make_problem(id, eps).unwrap();
            let curl = fd_curl(&p, x, 1e-5);
            prop_assert!((curl - p.scaled_field(x) * eps).norm() < 1e-8);
        }
    }

    #[test]
    fn momentum_round_trips(x in point(), v in prop::array::uniform3(-1.0f64..1.0)) {
        let p = make_problem(ProblemId::P2, 0.1).unwrap();
        let v = Vec3::from_f64(v);
        let back = p.velocity_from_momentum(x, p.momentum(x, v).unwrap()).unwrap();
        prop_assert!((back - v).norm() < 1e-13);
    }
}

#[test]
fn maximal_ordering_field_matches_its_definition() {
    let eps = 0.25;
    let p = make_problem::<f64>(ProblemId::P3, eps).unwrap();
    let x = Vec3::new(0.4, -1.0, 0.3);
    let y = x * eps;
    let slow = Vec3::new(y[1].cos(), 1.0 + y[2].sin(), y[0].cos());
    let expected = slow * (1.0 / eps) + Vec3::new(-x[0], 0.0, x[2]);
    assert!((p.scaled_field(x) - expected).norm() < 1e-15);
    assert!(matches!(p.momentum(x, Vec3::zero()), Err(CpdError::Unsupported(_))));
}

#[test]
fn rhs_is_lorentz_plus_force() {
    let p = make_problem::<f64>(ProblemId::P2, 0.3).unwrap();
    let x = Vec3::new(0.5, 0.1, -0.2);
    let v = Vec3::new(0.2, -0.7, 0.4);
    let (dx, dv) = p.rhs(x, v).unwrap();
    assert_eq!(dx, v);
    let expected = v.cross(p.scaled_field(x)) + p.force(x).unwrap();
    assert!((dv - expected).norm() < 1e-15);
}
