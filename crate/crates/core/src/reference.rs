//! Comparison methods and the fine-step reference solution.

use crate::error::{CpdError, Result};
use crate::geometry::{solve_shifted_skew, Vec3};
use crate::integrators::{uniform_grid, FixedPointControls, Integrator, Method, SolveStats};
use crate::problems::{CpdProblem, State};
use crate::scalar::Real;
use crate::verification::relative_errors;

/// Boris push in synchronized form.
///
/// Velocities live at integer steps as averages of the staggered leapfrog
/// velocities, which gives the explicit map
///
/// ```text
/// v₊      = v_n + (h/2)(v_n × B(x_n)/ε + F(x_n))
/// x_{n+1} = x_n + h v₊
/// v_{n+1} = v₊ + (h/2)(v_{n+1} × B(x_{n+1})/ε + F(x_{n+1}))
/// ```
///
/// The last line is linear in `v_{n+1}` and is solved in closed form; the
/// composite magnetic update is the Cayley rotation the classical
/// `t = hB/(2ε)`, `s = 2t/(1+‖t‖²)` push computes.
pub fn step_boris<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    boris(p, state, h)
}

pub(crate) fn boris<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    let half = h * T::lit(0.5);
    let m0 = p.field_matrix(state.x);
    let f0 = p.force(state.x)?;
    let v_half = state.v + (m0.apply(state.v) + f0) * half;
    let x = state.x + v_half * h;
    let m1 = p.field_matrix(x);
    let f1 = p.force(x)?;
    let v = solve_shifted_skew(&m1, half, v_half + f1 * half);
    Ok(State::new(state.t + h, x, v))
}

/// Butcher tableau of an implicit Runge–Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct RkTableau<T> {
    pub a: Vec<Vec<T>>,
    pub b: Vec<T>,
    pub c: Vec<T>,
}

/// Implicit midpoint rule.
pub fn midpoint_tableau<T: Real>() -> RkTableau<T> {
    let half = T::lit(0.5);
    RkTableau { a: vec![vec![half]], b: vec![T::one()], c: vec![half] }
}

/// Two-stage Gauss–Legendre, the order-4 symplectic collocation method.
pub fn gauss2_tableau<T: Real>() -> RkTableau<T> {
    let r = T::lit(3.0).sqrt() / T::lit(6.0);
    let q = T::lit(0.25);
    let half = T::lit(0.5);
    RkTableau {
        a: vec![vec![q, q - r], vec![q + r, q]],
        b: vec![half, half],
        c: vec![half - r, half + r],
    }
}

/// Implicit (backward) Euler.
pub fn euler_tableau<T: Real>() -> RkTableau<T> {
    RkTableau { a: vec![vec![T::one()]], b: vec![T::one()], c: vec![T::one()] }
}

/// Solves the dense system `a·x = rhs` in place by Gaussian elimination with
/// partial pivoting. `a` is row-major `n×n`.
fn gauss_solve<T: Real>(a: &mut [T], rhs: &mut [T], n: usize) -> Result<()> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[pivot * n + col] == T::zero() {
            return Err(CpdError::InvalidArgument("singular stage system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            let r = rhs[col];
            rhs[row] -= f * r;
        }
    }
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * rhs[k];
        }
        rhs[row] = acc / a[row * n + row];
    }
    Ok(())
}

/// Implicit Runge–Kutta step on `ẋ = v, v̇ = M(x)v + F(x)`.
///
/// The stage equations are solved by fixed-point iteration on the stage
/// positions only; for frozen positions the stage velocities satisfy a linear
/// system (the Lorentz term is linear in `v`), which is solved exactly. This
/// keeps the iteration contractive when `h‖B‖/ε` is large.
pub fn step_implicit_rk<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    tab: &RkTableau<T>,
    fp: &FixedPointControls<T>,
) -> Result<State<T>> {
    implicit_rk(p, state, h, tab, fp, &mut SolveStats::default())
}

pub(crate) fn implicit_rk<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    tab: &RkTableau<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<State<T>> {
    let s = tab.b.len();
    let n = 3 * s;
    let mut xs: Vec<Vec3<T>> = tab.c.iter().map(|&c| state.x + state.v * (c * h)).collect();
    let mut sweeps = 0;
    let mut converged = false;
    let (vs, fs, ms) = loop {
        sweeps += 1;
        let fs = xs.iter().map(|&x| p.force(x)).collect::<Result<Vec<_>>>()?;
        let ms: Vec<_> = xs.iter().map(|&x| p.field_matrix(x)).collect();
        let mut mat = vec![T::zero(); n * n];
        let mut rhs = vec![T::zero(); n];
        for i in 0..s {
            let mut r = state.v;
            for j in 0..s {
                r += fs[j] * (h * tab.a[i][j]);
                let mj = ms[j].to_mat();
                for row in 0..3 {
                    for col in 0..3 {
                        let delta = if i == j && row == col { T::one() } else { T::zero() };
                        mat[(3 * i + row) * n + 3 * j + col] = delta - h * tab.a[i][j] * mj.0[row][col];
                    }
                }
            }
            rhs[3 * i..3 * i + 3].copy_from_slice(&r.0);
        }
        if s == 1 {
            let v = solve_shifted_skew(&ms[0], h * tab.a[0][0], Vec3([rhs[0], rhs[1], rhs[2]]));
            rhs.copy_from_slice(&v.0);
        } else {
            gauss_solve(&mut mat, &mut rhs, n)?;
        }
        let vs: Vec<Vec3<T>> = (0..s).map(|i| Vec3([rhs[3 * i], rhs[3 * i + 1], rhs[3 * i + 2]])).collect();
        let mut delta = T::zero();
        let mut size = T::one();
        let mut next = Vec::with_capacity(s);
        for i in 0..s {
            let mut xi = state.x;
            for j in 0..s {
                xi += vs[j] * (h * tab.a[i][j]);
            }
            delta = delta.max((xi - xs[i]).norm_inf());
            size = size.max(xi.norm_inf());
            next.push(xi);
        }
        if !(size <= fp.divergence_bound) {
            return Err(CpdError::Divergence {
                iterations: sweeps,
                norm: size.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        if delta <= fp.tolerance * size {
            converged = true;
            break (vs, fs, ms);
        }
        if sweeps >= fp.max_iterations {
            break (vs, fs, ms);
        }
        xs = next;
    };
    stats.record(sweeps, converged);
    let mut x = state.x;
    let mut v = state.v;
    for i in 0..s {
        x += vs[i] * (h * tab.b[i]);
        v += (ms[i].apply(vs[i]) + fs[i]) * (h * tab.b[i]);
    }
    Ok(State::new(state.t + h, x, v))
}

/// Implicit midpoint rule.
pub fn step_implicit_midpoint<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    step_implicit_rk(p, state, h, &midpoint_tableau(), &FixedPointControls::default())
}

/// Two-stage Gauss–Legendre collocation.
pub fn step_gauss4<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    step_implicit_rk(p, state, h, &gauss2_tableau(), &FixedPointControls::default())
}

pub fn step_implicit_euler<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    step_implicit_rk(p, state, h, &euler_tableau(), &FixedPointControls::default())
}

/// How reference solutions are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig<T> {
    /// Defaults to `SC2O4` for homogeneous fields and `SG1O4` otherwise.
    pub base: Option<Method>,
    /// Reference step is the smallest tested step divided by this.
    pub refinement: usize,
    /// Bound on the relative change when the reference step is halved.
    pub agreement_tol: T,
    pub controls: FixedPointControls<T>,
}

impl<T: Real> Default for OracleConfig<T> {
    fn default() -> Self {
        OracleConfig {
            base: None,
            refinement: 128,
            agreement_tol: T::lit(1e-10),
            controls: FixedPointControls::tight(),
        }
    }
}

impl<T: Real> OracleConfig<T> {
    pub fn base_for(&self, p: &CpdProblem<T>) -> Method {
        self.base.unwrap_or(if p.is_homogeneous() { Method::Sc2o4 } else { Method::Sg1o4 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement < 2 {
            return Err(CpdError::InvalidArgument("oracle refinement must be >= 2".into()));
        }
        self.controls.validate()
    }
}

/// Reference state at `t_end` plus its self-consistency measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T> {
    pub state: State<T>,
    pub method: Method,
    pub h_ref: T,
    pub n_steps: usize,
    /// Relative change (`err_x + err_v`) between step `h_ref` and `h_ref/2`.
    pub check_diff: T,
    pub stats: SolveStats,
}

/// Integrates to `t_end` with step `≈ h_min / refinement`, reruns with half
/// that step and fails if the two differ by more than the agreement tolerance.
/// The finer of the two runs is returned.
pub fn oracle_solve<T: Real>(
    p: &CpdProblem<T>,
    t_end: T,
    h_min: T,
    cfg: &OracleConfig<T>,
) -> Result<OracleSolution<T>> {
    cfg.validate()?;
    if !(t_end > T::zero()) || !(h_min > T::zero()) {
        return Err(CpdError::InvalidArgument("oracle needs t_end > 0 and h_min > 0".into()));
    }
    let method = cfg.base_for(p);
    let integ = Integrator::new(method).with_controls(cfg.controls);
    let (n, h_ref) = uniform_grid(t_end, h_min / T::from_count(cfg.refinement));
    let mut stats = SolveStats::default();
    let coarse = integ.advance(p, p.initial_state(), h_ref, n, &mut stats)?;
    let fine = integ.advance(p, p.initial_state(), h_ref * T::lit(0.5), 2 * n, &mut stats)?;
    let (ex, ev) = relative_errors(&coarse, &fine);
    let diff = ex + ev;
    if !(diff <= cfg.agreement_tol) {
        return Err(CpdError::OracleMismatch {
            diff: diff.to_f64().unwrap_or(f64::NAN),
            tol: cfg.agreement_tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(OracleSolution {
        state: fine,
        method,
        h_ref: h_ref * T::lit(0.5),
        n_steps: 2 * n,
        check_diff: diff,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, ProblemId};

    #[test]
    fn gauss_solve_small_system() {
        let mut a: Vec<f64> = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b: Vec<f64> = vec![7.0, 3.0, 6.0];
        gauss_solve(&mut a, &mut b, 3).unwrap();
        // x = (1, 2, 3)
        assert!((b[0] - 1.0).abs() < 1e-15 && (b[1] - 2.0).abs() < 1e-15 && (b[2] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauss2_abscissae_are_symmetric() {
        let t = gauss2_tableau::<f64>();
        assert!((t.c[0] + t.c[1] - 1.0).abs() < 1e-16);
        for (i, row) in t.a.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - t.c[i]).abs() < 1e-16);
        }
    }

    #[test]
    fn boris_without_magnetic_field_is_velocity_verlet() {
        let p = make_problem::<f64>(ProblemId::P1, 1.0).unwrap();
        let mut flat = p.clone();
        flat.field = crate::problems::FieldSpec::Homogeneous(Vec3::zero());
        let s = flat.initial_state();
        let h = 0.05;
        let out = step_boris(&flat, &s, h).unwrap();
        let vh = s.v + p.force(s.x).unwrap() * (h / 2.0);
        let x = s.x + vh * h;
        let v = vh + p.force(x).unwrap() * (h / 2.0);
        assert_eq!(out.x, x);
        assert!((out.v - v).norm() < 1e-17);
    }
}
