//! Continuous-stage adapted exponential methods for a constant field.
//!
//! With `M = hat(B)/ε` the scheme reads
//!
//! ```text
//! X_τ     = x_n + τhφ₁(τhM) v_n + h² ∫₀¹ α_{τσ}(hM) F(X_σ) dσ
//! x_{n+1} = x_n + hφ₁(hM) v_n   + h² ∫₀¹ β_τ(hM) F(X_τ) dτ
//! v_{n+1} = φ₀(hM) v_n          + h  ∫₀¹ γ_τ(hM) F(X_τ) dτ
//! ```
//!
//! with `β_τ = (1−τ)φ₁((1−τ)hM)`, `γ_τ = φ₀((1−τ)hM)` and
//! `α_{τσ} = (κ + (τ−σ)/2) φ₁((τ−σ)hM)`, where `κ = 0` gives the second-order
//! family and `κ = 1/6` the fourth-order one. The integrals are replaced by a
//! quadrature rule and the stage equations are solved by Picard iteration.

use num_complex::Complex;

use super::{FixedPointControls, SolveStats};
use crate::error::{CpdError, Result};
use crate::geometry::{phi_op, scalar_phi, PhiOp, Skew3, Vec3};
use crate::problems::{CpdProblem, State};
use crate::scalar::Real;

/// Quadrature on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Four-point Gauss rule on `[0, 1]`, nodes in decreasing order.
pub fn gauss4<T: Real>() -> QuadratureRule<T> {
    let sqrt30 = T::lit(30.0).sqrt();
    let a = T::lit(2.0) * sqrt30 / T::lit(35.0);
    let b = sqrt30 / T::lit(36.0);
    let half = T::lit(0.5);
    let three_sevenths = T::lit(3.0) / T::lit(7.0);
    let c1 = (T::one() + (three_sevenths + a).sqrt()) * half;
    let c2 = (T::one() + (three_sevenths - a).sqrt()) * half;
    let b1 = (half - b) * half;
    let b2 = (half + b) * half;
    QuadratureRule {
        nodes: vec![c1, c2, T::one() - c2, T::one() - c1],
        weights: vec![b1, b2, b2, b1],
    }
}

/// One-point Gauss (midpoint) rule.
pub fn midpoint_rule<T: Real>() -> QuadratureRule<T> {
    QuadratureRule {
        nodes: vec![T::lit(0.5)],
        weights: vec![T::one()],
    }
}

/// Coefficient functions `α_{τσ}`, `β_τ`, `γ_τ` evaluated at a scalar
/// argument `W = iθ` (one eigen-component of `hM`).
pub trait ScalarCoefficients<T: Real> {
    fn alpha(&self, tau: T, sigma: T, theta: T) -> Complex<T>;
    fn beta(&self, tau: T, theta: T) -> Complex<T>;
    fn gamma(&self, tau: T, theta: T) -> Complex<T>;
}

/// The symplectic coefficient family with `α_{τσ} = (κ + (τ−σ)/2)φ₁((τ−σ)hM)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet<T> {
    pub alpha_shift: T,
}

impl<T: Real> CoefficientSet<T> {
    /// `α_{τσ} = ((τ−σ)/2)φ₁((τ−σ)hM)`.
    pub fn second_order() -> Self {
        CoefficientSet { alpha_shift: T::zero() }
    }

    /// `α_{τσ} = (1/6 + (τ−σ)/2)φ₁((τ−σ)hM)`.
    pub fn fourth_order() -> Self {
        CoefficientSet { alpha_shift: T::one() / T::lit(6.0) }
    }

    pub fn alpha(&self, tau: T, sigma: T, hm: &Skew3<T>) -> PhiOp<T> {
        let d = tau - sigma;
        phi_op(1, &hm.scale(d)).scaled(self.alpha_shift + d * T::lit(0.5))
    }

    pub fn beta(&self, tau: T, hm: &Skew3<T>) -> PhiOp<T> {
        let r = T::one() - tau;
        phi_op(1, &hm.scale(r)).scaled(r)
    }

    pub fn gamma(&self, tau: T, hm: &Skew3<T>) -> PhiOp<T> {
        phi_op(0, &hm.scale(T::one() - tau))
    }
}

impl<T: Real> ScalarCoefficients<T> for CoefficientSet<T> {
    fn alpha(&self, tau: T, sigma: T, theta: T) -> Complex<T> {
        let d = tau - sigma;
        scalar_phi(1, d * theta) * (self.alpha_shift + d * T::lit(0.5))
    }

    fn beta(&self, tau: T, theta: T) -> Complex<T> {
        let r = T::one() - tau;
        scalar_phi(1, r * theta) * r
    }

    fn gamma(&self, tau: T, theta: T) -> Complex<T> {
        scalar_phi(0, (T::one() - tau) * theta)
    }
}

/// Converged (or capped) stage values of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution<T> {
    pub stages: Vec<Vec3<T>>,
    pub forces: Vec<Vec3<T>>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Precomputed operators of one step with a frozen `hM`.
struct StepOperators<T> {
    hm: Skew3<T>,
    predictors: Vec<Vec3<T>>,
    /// `b_j α(c_i, c_j)`, row-major.
    alpha: Vec<PhiOp<T>>,
}

impl<T: Real> StepOperators<T> {
    fn new(
        state: &State<T>,
        h: T,
        m: &Skew3<T>,
        coeffs: &CoefficientSet<T>,
        quad: &QuadratureRule<T>,
    ) -> Self {
        let hm = m.scale(h);
        let predictors = quad
            .nodes
            .iter()
            .map(|&c| state.x + phi_op(1, &hm.scale(c)).apply(state.v) * (c * h))
            .collect();
        let mut alpha = Vec::with_capacity(quad.len() * quad.len());
        for &ci in &quad.nodes {
            for (&cj, &bj) in quad.nodes.iter().zip(&quad.weights) {
                alpha.push(coeffs.alpha(ci, cj, &hm).scaled(bj));
            }
        }
        StepOperators { hm, predictors, alpha }
    }
}

fn forces_at<T: Real>(p: &CpdProblem<T>, xs: &[Vec3<T>]) -> Result<Vec<Vec3<T>>> {
    xs.iter().map(|&x| p.force(x)).collect()
}

fn solve_with_operators<T: Real>(
    p: &CpdProblem<T>,
    h: T,
    ops: &StepOperators<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<StageSolution<T>> {
    let s = ops.predictors.len();
    let h2 = h * h;
    let mut stages = ops.predictors.clone();
    let mut forces = forces_at(p, &stages)?;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < fp.max_iterations {
        sweeps += 1;
        let mut delta = T::zero();
        let mut size = T::one();
        let mut next = Vec::with_capacity(s);
        for i in 0..s {
            let mut acc = Vec3::zero();
            for (j, f) in forces.iter().enumerate() {
                acc += ops.alpha[i * s + j].apply(*f);
            }
            let xi = ops.predictors[i] + acc * h2;
            delta = delta.max((xi - stages[i]).norm_inf());
            size = size.max(xi.norm_inf());
            next.push(xi);
        }
        stages = next;
        if !(size <= fp.divergence_bound) {
            return Err(CpdError::Divergence {
                iterations: sweeps,
                norm: size.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        forces = forces_at(p, &stages)?;
        if delta <= fp.tolerance * size {
            converged = true;
            break;
        }
    }
    stats.record(sweeps, converged);
    Ok(StageSolution { stages, forces, sweeps, converged })
}

/// Solves the discretized stage equations
/// `X_i = x_n + c_i hφ₁(c_i hM)v_n + h² Σ_j b_j α(c_i, c_j, hM) F(X_j)`
/// for the field matrix at `state.x`, starting from the force-free predictor.
pub fn solve_stages<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    coeffs: &CoefficientSet<T>,
    quad: &QuadratureRule<T>,
    fp: &FixedPointControls<T>,
) -> Result<StageSolution<T>> {
    let m = p.field_matrix(state.x);
    let ops = StepOperators::new(state, h, &m, coeffs, quad);
    solve_with_operators(p, h, &ops, fp, &mut SolveStats::default())
}

/// One step with a frozen field matrix `m` (not yet multiplied by `h`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_frozen<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    m: &Skew3<T>,
    coeffs: &CoefficientSet<T>,
    quad: &QuadratureRule<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<(State<T>, StageSolution<T>)> {
    let ops = StepOperators::new(state, h, m, coeffs, quad);
    let sol = solve_with_operators(p, h, &ops, fp, stats)?;
    let hm = &ops.hm;
    let mut x = state.x + phi_op(1, hm).apply(state.v) * h;
    let mut v = phi_op(0, hm).apply(state.v);
    let h2 = h * h;
    for ((&c, &b), f) in quad.nodes.iter().zip(&quad.weights).zip(&sol.forces) {
        x += coeffs.beta(c, hm).apply(*f) * (h2 * b);
        v += coeffs.gamma(c, hm).apply(*f) * (h * b);
    }
    Ok((State::new(state.t + h, x, v), sol))
}

pub(crate) fn step_exponential<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    coeffs: &CoefficientSet<T>,
    quad: &QuadratureRule<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<State<T>> {
    let m = p.field_matrix(state.x);
    step_frozen(p, state, h, &m, coeffs, quad, fp, stats).map(|(s, _)| s)
}

/// Second-order family discretized with Gauss-4 (implicit).
pub fn step_sc1o2<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    require_homogeneous(p)?;
    step_exponential(
        p,
        state,
        h,
        &CoefficientSet::second_order(),
        &gauss4(),
        &FixedPointControls::default(),
        &mut SolveStats::default(),
    )
}

/// Fourth-order family discretized with Gauss-4 (implicit).
pub fn step_sc1o4<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    require_homogeneous(p)?;
    step_exponential(
        p,
        state,
        h,
        &CoefficientSet::fourth_order(),
        &gauss4(),
        &FixedPointControls::default(),
        &mut SolveStats::default(),
    )
}

/// Second-order family with the midpoint rule; fully explicit.
pub fn step_sc2o2<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    require_homogeneous(p)?;
    sc2o2(p, state, h)
}

/// Explicit three-stage fourth-order scheme.
pub fn step_sc2o4<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    require_homogeneous(p)?;
    sc2o4(p, state, h)
}

fn require_homogeneous<T: Real>(p: &CpdProblem<T>) -> Result<()> {
    if p.is_homogeneous() {
        Ok(())
    } else {
        Err(CpdError::Unsupported(
            "SC methods require a homogeneous magnetic field".into(),
        ))
    }
}

pub(crate) fn sc2o2<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    let hm = p.field_matrix(state.x).scale(h);
    let half_hm = hm.scale(T::lit(0.5));
    let half_phi1 = phi_op(1, &half_hm);
    let stage = state.x + half_phi1.apply(state.v) * (h * T::lit(0.5));
    let f = p.force(stage)?;
    let x = state.x + phi_op(1, &hm).apply(state.v) * h + half_phi1.apply(f) * (h * h * T::lit(0.5));
    let v = phi_op(0, &hm).apply(state.v) + phi_op(0, &half_hm).apply(f) * h;
    Ok(State::new(state.t + h, x, v))
}

/// Tableau of the explicit fourth-order scheme: `(a21, a31, a32, b, c)`.
pub struct Sc2o4Tableau<T> {
    pub a: [[T; 3]; 3],
    pub b: [T; 3],
    pub c: [T; 3],
}

pub fn sc2o4_tableau<T: Real>() -> Sc2o4Tableau<T> {
    let cbrt2 = T::lit(2.0).cbrt();
    let cbrt4 = T::lit(4.0).cbrt();
    let outer = (T::lit(4.0) + T::lit(2.0) * cbrt2 + cbrt4) / T::lit(6.0);
    let inner = (-T::one() - T::lit(2.0) * cbrt2 - cbrt4) / T::lit(3.0);
    let z = T::zero();
    let c1 = outer * T::lit(0.5);
    Sc2o4Tableau {
        a: [[z, z, z], [outer, z, z], [outer, inner, z]],
        b: [outer, inner, outer],
        c: [c1, T::lit(0.5), T::one() - c1],
    }
}

pub(crate) fn sc2o4<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    let tab = sc2o4_tableau::<T>();
    let hm = p.field_matrix(state.x).scale(h);
    let h2 = h * h;
    let mut forces = [Vec3::zero(); 3];
    for i in 0..3 {
        let ci = tab.c[i];
        let mut xi = state.x + phi_op(1, &hm.scale(ci)).apply(state.v) * (ci * h);
        for j in 0..i {
            let d = ci - tab.c[j];
            xi += phi_op(1, &hm.scale(d)).apply(forces[j]) * (h2 * tab.a[i][j] * d);
        }
        forces[i] = p.force(xi)?;
    }
    let mut x = state.x + phi_op(1, &hm).apply(state.v) * h;
    let mut v = phi_op(0, &hm).apply(state.v);
    for i in 0..3 {
        let r = T::one() - tab.c[i];
        x += phi_op(1, &hm.scale(r)).apply(forces[i]) * (h2 * tab.b[i] * r);
        v += phi_op(0, &hm.scale(r)).apply(forces[i]) * (h * tab.b[i]);
    }
    Ok(State::new(state.t + h, x, v))
}
