#![allow(clippy::needless_range_loop)]

use cpdsym::geometry::{phi_op, Vec3};
use cpdsym::integrators::{
    gauss4, solve_stages, step_sc2o2, CoefficientSet, TRIPLE_JUMP_INNER, TRIPLE_JUMP_OUTER,
};
use cpdsym::problems::ForceSpec;
use cpdsym::*;
use std::sync::Arc;

const EXPONENTIAL: [Method; 7] = [
    Method::Sc1o2,
    Method::Sc2o2,
    Method::Sc1o4,
    Method::Sc2o4,
    Method::Sg1o1,
    Method::Sg1o2,
    Method::Sg1o4,
];

fn state_diff(a: &State<f64>, b: &State<f64>) -> f64 {
    let scale = 1f64.max(b.x.norm()).max(b.v.norm());
    ((a.x - b.x).norm() + (a.v - b.v).norm()) / scale
}

fn step(m: Method, p: &Problem, s: &State<f64>, h: f64) -> State<f64> {
    Integrator::new(m).step(p, s, h, &mut SolveStats::default()).unwrap()
}

fn constant_force(p: Problem, f0: Vec3<f64>) -> Problem {
    p.with_force(ForceSpec::Custom {
        potential: Arc::new(move |x: Vec3<f64>| -f0.dot(x)),
        force: Arc::new(move |_| f0),
    })
}

#[test]
fn free_flow_is_reproduced_exactly() {
    let x0 = Vec3::new(0.3, -0.2, 0.7);
    let v0 = Vec3::new(0.9, 0.4, -0.5);
    for eps in [1.0, 1e-2, 1e-4] {
        let p = Problem::free(Vec3::new(0.2, -0.6, 1.1), eps, x0, v0).unwrap();
        for h in [1e-3, 0.1, 1.0, 7.5] {
            let exact = p.exact_free_solution(h).unwrap();
            let theta = h * p.field_matrix(x0).theta();
            for m in EXPONENTIAL {
                let got = step(m, &p, &p.initial_state(), h);
                let d = state_diff(&got, &exact);
                // The composed rotation angles of SG1O4 round separately.
                let tol = if m == Method::Sg1o4 { 1e-13f64.max(8.0 * f64::EPSILON * theta) } else { 1e-13 };
                assert!(d <= tol, "{m} ε={eps} h={h}: {d:e}");
            }
        }
    }
}

#[test]
fn stage_solve_matches_constant_force_closed_form() {
    let f0 = Vec3::new(0.3, -1.2, 0.5);
    let p = constant_force(
        Problem::free(Vec3::new(0.0, 0.0, 1.0), 0.1, Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, 0.5, -0.2)).unwrap(),
        f0,
    );
    let s = p.initial_state();
    let h = 0.05;
    let hm = p.field_matrix(s.x).scale(h);
    let quad = gauss4::<f64>();
    for coeffs in [CoefficientSet::second_order(), CoefficientSet::fourth_order()] {
        let sol = solve_stages(&p, &s, h, &coeffs, &quad, &FixedPointControls::tight()).unwrap();
        for (i, &ci) in quad.nodes.iter().enumerate() {
            let mut expected = s.x + phi_op(1, &hm.scale(ci)).apply(s.v) * (ci * h);
            for (&cj, &bj) in quad.nodes.iter().zip(&quad.weights) {
                expected += coeffs.alpha(ci, cj, &hm).apply(f0) * (h * h * bj);
            }
            assert!((sol.stages[i] - expected).norm() <= 1e-13);
        }
    }
}

#[test]
fn stage_solve_matches_damped_iteration() {
    let p = make_problem::<f64>(ProblemId::P1, 0.1).unwrap();
    let s = p.initial_state();
    let h = 0.1;
    let hm = p.field_matrix(s.x).scale(h);
    let quad = gauss4::<f64>();
    let coeffs = CoefficientSet::fourth_order();
    let sol = solve_stages(&p, &s, h, &coeffs, &quad, &FixedPointControls::tight()).unwrap();
    let pred: Vec<Vec3<f64>> = quad
        .nodes
        .iter()
        .map(|&c| s.x + phi_op(1, &hm.scale(c)).apply(s.v) * (c * h))
        .collect();
    let mut xs = pred.clone();
    for _ in 0..400 {
        let fs: Vec<Vec3<f64>> = xs.iter().map(|&x| p.force(x).unwrap()).collect();
        xs = (0..4)
            .map(|i| {
                let mut acc = pred[i];
                for j in 0..4 {
                    acc += coeffs.alpha(quad.nodes[i], quad.nodes[j], &hm).apply(fs[j]) * (h * h * quad.weights[j]);
                }
                xs[i] * 0.5 + acc * 0.5
            })
            .collect();
    }
    for i in 0..4 {
        assert!((xs[i] - sol.stages[i]).norm() < 1e-14);
    }
}

#[test]
fn sc2o4_is_the_triple_jump_of_sc2o2() {
    let p = make_problem::<f64>(ProblemId::P1, 0.3).unwrap();
    let s = p.initial_state();
    let h = 0.07;
    let mut tj = s;
    for k in [TRIPLE_JUMP_OUTER, TRIPLE_JUMP_INNER, TRIPLE_JUMP_OUTER] {
        tj = step_sc2o2(&p, &tj, k * h).unwrap();
    }
    let direct = step(Method::Sc2o4, &p, &s, h);
    assert!(state_diff(&direct, &tj) < 1e-14);
}

#[test]
fn sg_methods_reduce_to_sc_on_homogeneous_fields() {
    let p = make_problem::<f64>(ProblemId::P1, 0.2).unwrap();
    let s = p.initial_state();
    let h = 0.05;
    let sc = step(Method::Sc1o2, &p, &s, h);
    assert!(state_diff(&step(Method::Sg1o1, &p, &s, h), &sc) < 1e-15);
    assert!(state_diff(&step(Method::Sg1o2, &p, &s, h), &sc) < 1e-15);
    let mut tj = s;
    for k in [TRIPLE_JUMP_OUTER, TRIPLE_JUMP_INNER, TRIPLE_JUMP_OUTER] {
        tj = step(Method::Sc1o2, &p, &tj, k * h);
    }
    assert!(state_diff(&step(Method::Sg1o4, &p, &s, h), &tj) < 1e-14);
}

#[test]
fn sc_methods_reject_general_fields() {
    let p = make_problem::<f64>(ProblemId::P2, 0.5).unwrap();
    for m in [Method::Sc1o2, Method::Sc2o2, Method::Sc1o4, Method::Sc2o4] {
        let err = Integrator::new(m).step(&p, &p.initial_state(), 0.1, &mut SolveStats::default());
        assert!(matches!(err, Err(CpdError::Unsupported(_))), "{m}");
    }
}

#[test]
fn symmetric_methods_retrace_with_negative_steps() {
    let cases = [
        (ProblemId::P1, Method::Sc1o2),
        (ProblemId::P1, Method::Sc2o2),
        (ProblemId::P1, Method::Sc1o4),
        (ProblemId::P1, Method::Sc2o4),
        (ProblemId::P2, Method::Sg1o2),
        (ProblemId::P3, Method::Sg1o4),
        (ProblemId::P2, Method::Rko2),
        (ProblemId::P2, Method::Rko4),
        (ProblemId::P2, Method::Boris),
    ];
    for (id, m) in cases {
        let p = make_problem::<f64>(id, 0.5).unwrap();
        let integ = Integrator::new(m).with_controls(FixedPointControls::tight());
        let s = p.initial_state();
        let mut st = SolveStats::default();
        let fwd = integ.step(&p, &s, 0.05, &mut st).unwrap();
        let back = integ.step(&p, &fwd, -0.05, &mut st).unwrap();
        let d = state_diff(&back, &s);
        assert!(d < 1e-13, "{m} on {id}: {d:e}");
    }
}

#[test]
fn error_halving_ratios() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    let reference = oracle_solve(&p, 1.0, 1.0 / 64.0, &OracleConfig::default()).unwrap();
    for (m, factor) in [(Method::Sc2o2, 4.0), (Method::Sc1o4, 16.0)] {
        let integ = Integrator::new(m);
        let err = |n: usize| {
            let end = integ.advance(&p, p.initial_state(), 1.0 / n as f64, n, &mut SolveStats::default()).unwrap();
            state_diff(&end, &reference.state)
        };
        let ratio = err(32) / err(64);
        assert!((ratio / factor - 1.0).abs() < 0.15, "{m}: ratio {ratio}");
    }
}

#[test]
fn time_grid_is_exact_multiples() {
    let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
    let tr = Integrator::new(Method::Sc2o2).integrate(&p, 0.1, 30, 7).unwrap();
    let ts: Vec<f64> = tr.states.iter().map(|s| s.t).collect();
    let expected: Vec<f64> = [0, 7, 14, 21, 28, 30].iter().map(|&n| n as f64 * 0.1).collect();
    assert_eq!(ts, expected);
    assert_eq!(tr.energies.len(), tr.states.len());
}

#[test]
fn f32_integration_runs() {
    let p = make_problem::<f32>(ProblemId::P1, 1.0).unwrap();
    let tr = Integrator::<f32>::new(Method::Sc2o4).integrate(&p, 0.01, 100, 10).unwrap();
    let e0 = tr.energies[0];
    assert!(tr.energies.iter().all(|e| ((e - e0) / e0).abs() < 1e-3));
}
