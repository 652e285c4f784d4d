//! Error metrics, order fitting, symplecticity checks, energy series and
//! ε-uniformity sweeps.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CpdError, Result};
use crate::geometry::{scalar_phi, Vec3};
use crate::integrators::homogeneous::ScalarCoefficients;
use crate::integrators::{uniform_grid, Integrator, Method, SolveStats, Trajectory};
use crate::problems::{make_problem, CpdProblem, ProblemId, State};
use crate::reference::{oracle_solve, OracleConfig, OracleSolution};
use crate::scalar::Real;

/// `(‖x − x_ref‖/‖x_ref‖, ‖v − v_ref‖/‖v_ref‖)`.
pub fn relative_errors<T: Real>(approx: &State<T>, reference: &State<T>) -> (T, T) {
    let rel = |a: Vec3<T>, r: Vec3<T>| {
        let d = (a - r).norm();
        let n = r.norm();
        if n > T::zero() {
            d / n
        } else {
            d
        }
    };
    (rel(approx.x, reference.x), rel(approx.v, reference.v))
}

/// Weights `ε^x_pow · err_x + ε^v_pow · err_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricWeights {
    pub x_pow: i32,
    pub v_pow: i32,
}

impl MetricWeights {
    /// `error = err_x + err_v`.
    pub const PLAIN: MetricWeights = MetricWeights { x_pow: 0, v_pow: 0 };
    /// `err_x + ε·err_v`.
    pub const EPS_V: MetricWeights = MetricWeights { x_pow: 0, v_pow: 1 };
    /// `ε²·err_x + ε³·err_v`.
    pub const EPS2_EPS3: MetricWeights = MetricWeights { x_pow: 2, v_pow: 3 };
    /// `ε·err_x + ε²·err_v`.
    pub const EPS1_EPS2: MetricWeights = MetricWeights { x_pow: 1, v_pow: 2 };
    /// `ε³·err_x + ε⁴·err_v`.
    pub const EPS3_EPS4: MetricWeights = MetricWeights { x_pow: 3, v_pow: 4 };
}

impl Default for MetricWeights {
    fn default() -> Self {
        MetricWeights::PLAIN
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics<T> {
    pub err_x: T,
    pub err_v: T,
}

impl<T: Real> ErrorMetrics<T> {
    pub fn between(approx: &State<T>, reference: &State<T>) -> Self {
        let (err_x, err_v) = relative_errors(approx, reference);
        ErrorMetrics { err_x, err_v }
    }

    pub fn error(&self) -> T {
        self.err_x + self.err_v
    }

    /// `err_x + ε·err_v`.
    pub fn error1(&self, eps: T) -> T {
        self.weighted(MetricWeights::EPS_V, eps)
    }

    pub fn weighted(&self, w: MetricWeights, eps: T) -> T {
        eps.powi(w.x_pow) * self.err_x + eps.powi(w.v_pow) * self.err_v
    }
}

/// Least-squares line through `(log h, log error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

pub fn fit_order<T: Real>(points: &[(T, T)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(CpdError::InvalidArgument("order fit needs at least 3 points".into()));
    }
    let mut hs: Vec<f64> = Vec::with_capacity(points.len());
    for &(h, e) in points {
        let (h, e) = (h.to_f64().unwrap_or(f64::NAN), e.to_f64().unwrap_or(f64::NAN));
        if !(h > 0.0) || !(e > 0.0) || !e.is_finite() {
            return Err(CpdError::InvalidArgument(format!(
                "order fit needs positive step and error, got ({h:e}, {e:e})"
            )));
        }
        if hs.contains(&h) {
            return Err(CpdError::InvalidArgument(format!("duplicate step size {h:e}")));
        }
        hs.push(h);
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(h, e)| (h.to_f64().unwrap().ln(), e.to_f64().unwrap().ln()))
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit { slope, intercept, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub h: T,
    pub n_steps: usize,
    pub metrics: ErrorMetrics<T>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub method: Method,
    pub eps: T,
    pub t_end: T,
    pub rows: Vec<ConvergenceRow<T>>,
    pub oracle: OracleSolution<T>,
}

impl<T: Real> ConvergenceReport<T> {
    /// Slope of the selected metric against `h`.
    pub fn fit(&self, metric: impl Fn(&ErrorMetrics<T>) -> T) -> Result<OrderFit> {
        let pts: Vec<(T, T)> = self.rows.iter().map(|r| (r.h, metric(&r.metrics))).collect();
        fit_order(&pts)
    }
}

/// Runs `integ` on every step size and measures the error at `t_end` against
/// one shared oracle solution.
pub fn convergence_study<T: Real>(
    integ: &Integrator<T>,
    p: &CpdProblem<T>,
    hs: &[T],
    t_end: T,
    oracle: &OracleConfig<T>,
) -> Result<ConvergenceReport<T>> {
    let h_min = hs
        .iter()
        .copied()
        .fold(None, |m: Option<T>, h| Some(m.map_or(h, |m| m.min(h))))
        .ok_or_else(|| CpdError::InvalidArgument("empty step-size grid".into()))?;
    let reference = oracle_solve(p, t_end, h_min, oracle)?;
    let rows = hs
        .iter()
        .map(|&h| convergence_row(integ, p, h, t_end, &reference.state))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport { method: integ.method, eps: p.eps, t_end, rows, oracle: reference })
}

/// One `(h, error)` cell measured against a given reference state.
pub fn convergence_row<T: Real>(
    integ: &Integrator<T>,
    p: &CpdProblem<T>,
    h: T,
    t_end: T,
    reference: &State<T>,
) -> Result<ConvergenceRow<T>> {
    let (n, h_eff) = uniform_grid(t_end, h);
    let mut stats = SolveStats::default();
    let end = integ.advance(p, p.initial_state(), h_eff, n, &mut stats)?;
    Ok(ConvergenceRow { h, n_steps: n, metrics: ErrorMetrics::between(&end, reference), stats })
}

/// Canonical `6×6` symplectic matrix `[[0, I], [−I, 0]]`.
fn omega6(i: usize, j: usize) -> f64 {
    if i < 3 && j == i + 3 {
        1.0
    } else if i >= 3 && j + 3 == i {
        -1.0
    } else {
        0.0
    }
}

/// `max |(JᵀΩJ − Ω)_{ij}|` for the one-step map written in canonical
/// coordinates `(x, p)`, with `J` from central differences.
///
/// `map` advances a velocity-form state; momenta are converted with the
/// problem's vector potential. `delta` defaults to `10⁻⁶·max(1, ‖(x,p)‖)`.
pub fn symplecticity_residual_of<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    delta: Option<T>,
    map: impl Fn(&State<T>) -> Result<State<T>>,
) -> Result<T> {
    let mom = p.momentum(state.x, state.v)?;
    let z: [T; 6] = [state.x[0], state.x[1], state.x[2], mom[0], mom[1], mom[2]];
    let znorm = z.iter().map(|c| *c * *c).sum::<T>().sqrt();
    let d = delta.unwrap_or_else(|| T::lit(1e-6) * T::one().max(znorm));
    let phi = |zz: [T; 6]| -> Result<[T; 6]> {
        let x = Vec3([zz[0], zz[1], zz[2]]);
        let v = p.velocity_from_momentum(x, Vec3([zz[3], zz[4], zz[5]]))?;
        let out = map(&State::new(state.t, x, v))?;
        let pm = p.momentum(out.x, out.v)?;
        Ok([out.x[0], out.x[1], out.x[2], pm[0], pm[1], pm[2]])
    };
    // jac[i][j] = ∂out_i/∂z_j
    let mut jac = [[T::zero(); 6]; 6];
    for j in 0..6 {
        let mut zp = z;
        let mut zm = z;
        zp[j] += d;
        zm[j] -= d;
        let fp = phi(zp)?;
        let fm = phi(zm)?;
        for i in 0..6 {
            jac[i][j] = (fp[i] - fm[i]) / (d + d);
        }
    }
    let mut worst = T::zero();
    for a in 0..6 {
        for b in 0..6 {
            let mut acc = T::zero();
            for i in 0..6 {
                for k in 0..6 {
                    let w = omega6(i, k);
                    if w != 0.0 {
                        acc += jac[i][a] * T::lit(w) * jac[k][b];
                    }
                }
            }
            worst = worst.max((acc - T::lit(omega6(a, b))).abs());
        }
    }
    Ok(worst)
}

/// [`symplecticity_residual_of`] for one step of `integ`.
pub fn symplecticity_residual<T: Real>(
    integ: &Integrator<T>,
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    delta: Option<T>,
) -> Result<T> {
    symplecticity_residual_of(p, state, delta, |s| {
        integ.step(p, s, h, &mut SolveStats::default())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticitySample<T> {
    pub state: State<T>,
    pub delta: T,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticityReport<T> {
    pub method: Method,
    pub h: T,
    pub samples: Vec<SymplecticitySample<T>>,
}

impl<T: Real> SymplecticityReport<T> {
    pub fn max_residual(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.residual))
    }
}

/// Random states near the problem's initial data: positions jittered by up
/// to `0.05` and velocities by up to `0.05` per component.
pub fn sample_states<T: Real>(p: &CpdProblem<T>, n: usize, seed: u64) -> Vec<State<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |c: T| c + T::lit(rng.gen_range(-0.05..0.05));
    (0..n)
        .map(|k| {
            if k == 0 {
                return p.initial_state();
            }
            let x = Vec3(p.x0.0.map(&mut jitter));
            let v = Vec3(p.v0.0.map(&mut jitter));
            State::new(T::zero(), x, v)
        })
        .collect()
}

pub fn symplecticity_report<T: Real>(
    integ: &Integrator<T>,
    p: &CpdProblem<T>,
    h: T,
    states: &[State<T>],
) -> Result<SymplecticityReport<T>> {
    let samples = states
        .iter()
        .map(|s| {
            let mom = p.momentum(s.x, s.v)?;
            let znorm = (s.x.norm_squared() + mom.norm_squared()).sqrt();
            let delta = T::lit(1e-6) * T::one().max(znorm);
            let residual = symplecticity_residual(integ, p, s, h, Some(delta))?;
            Ok(SymplecticitySample { state: *s, delta, residual })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymplecticityReport { method: integ.method, h, samples })
}

/// Maximum residuals of the three symplectic conditions over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResiduals<T> {
    pub cond_i: T,
    pub cond_ii: T,
    pub cond_iii: T,
    /// Recovered `d_τ` per sample.
    pub d_tau: Vec<Complex<T>>,
}

/// Evaluates the symplectic conditions on the scalar eigen-components
/// `W ∈ {iθ, 0, −iθ}` of `hM`, with conjugation as complex conjugation.
///
/// * (i) `γ_τ − Wβ_τ = d_τ` with the same `d_τ` for every component;
/// * (ii) `γ_τ(φ̄₁(W) − τφ̄₁(τW)) = β_τ(e^{−W} + Wφ̄₁(W) − τWφ̄₁(τW))`;
/// * (iii) `β̄_σγ_τ − Wβ̄_σβ_τ/2 − ᾱ_{τσ}(γ_τ − Wβ_τ)
///   = β_τγ̄_σ + Wβ_τβ̄_σ/2 − α_{στ}(γ̄_σ + Wβ̄_σ)`.
///
/// Samples are `(θ, τ, σ)`.
pub fn symplectic_condition_residuals<T: Real, C: ScalarCoefficients<T>>(
    coeffs: &C,
    samples: &[(T, T, T)],
) -> ConditionResiduals<T> {
    let mut out = ConditionResiduals {
        cond_i: T::zero(),
        cond_ii: T::zero(),
        cond_iii: T::zero(),
        d_tau: Vec::with_capacity(samples.len()),
    };
    for &(theta, tau, sigma) in samples {
        let q = |th: T| coeffs.gamma(tau, th) - Complex::new(T::zero(), th) * coeffs.beta(tau, th);
        let d = q(T::zero());
        out.d_tau.push(d);
        out.cond_i = out.cond_i.max((q(theta) - d).norm()).max((q(-theta) - d).norm());

        for th in [theta, -theta, T::zero()] {
            let w = Complex::new(T::zero(), th);
            let phi1_bar = scalar_phi(1, th).conj();
            let phi1_tau_bar = scalar_phi(1, tau * th).conj();
            let exp_minus_w = scalar_phi(0, th).conj();
            let g_t = coeffs.gamma(tau, th);
            let b_t = coeffs.beta(tau, th);
            let lhs = g_t * (phi1_bar - phi1_tau_bar * tau);
            let rhs = b_t * (exp_minus_w + w * phi1_bar - w * phi1_tau_bar * tau);
            out.cond_ii = out.cond_ii.max((lhs - rhs).norm());

            let b_s_bar = coeffs.beta(sigma, th).conj();
            let g_s_bar = coeffs.gamma(sigma, th).conj();
            let a_ts_bar = coeffs.alpha(tau, sigma, th).conj();
            let a_st = coeffs.alpha(sigma, tau, th);
            let half = T::lit(0.5);
            let lhs3 = b_s_bar * g_t - w * b_s_bar * b_t * half - a_ts_bar * (g_t - w * b_t);
            let rhs3 = b_t * g_s_bar + w * b_t * b_s_bar * half - a_st * (g_s_bar + w * b_s_bar);
            out.cond_iii = out.cond_iii.max((lhs3 - rhs3).norm());
        }
    }
    out
}

/// Random `(θ, τ, σ)` with `θ` log-uniform in `[θ_lo, θ_hi]` and `τ, σ`
/// uniform in `[0, 1]`.
pub fn condition_samples<T: Real>(n: usize, theta_lo: f64, theta_hi: f64, seed: u64) -> Vec<(T, T, T)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (theta_lo.ln(), theta_hi.ln());
    (0..n)
        .map(|_| {
            let theta = rng.gen_range(a..=b).exp();
            (T::lit(theta), T::lit(rng.gen_range(0.0..=1.0)), T::lit(rng.gen_range(0.0..=1.0)))
        })
        .collect()
}

/// Relative energy error `|H(x_n,v_n) − H(x_0,v_0)| / |H(x_0,v_0)|` along a
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries<T> {
    pub times: Vec<T>,
    pub errors: Vec<T>,
}

impl<T: Real> EnergySeries<T> {
    pub fn max(&self) -> T {
        self.errors.iter().fold(T::zero(), |m, e| m.max(*e))
    }

    /// Max error over states with `t ≤ t_end/2` and over the rest.
    pub fn half_maxima(&self) -> (T, T) {
        let t_end = *self.times.last().unwrap_or(&T::zero());
        let mid = t_end * T::lit(0.5);
        let mut first = T::zero();
        let mut second = T::zero();
        for (t, e) in self.times.iter().zip(&self.errors) {
            if *t <= mid {
                first = first.max(*e);
            } else {
                second = second.max(*e);
            }
        }
        (first, second)
    }
}

pub fn energy_series<T: Real>(traj: &Trajectory<T>, p: &CpdProblem<T>) -> Result<EnergySeries<T>> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| CpdError::InvalidArgument("empty trajectory".into()))?;
    let h0 = p.energy(first)?;
    if h0 == T::zero() {
        return Err(CpdError::InvalidArgument("initial energy is zero".into()));
    }
    let errors = traj
        .states
        .iter()
        .map(|s| Ok((p.energy(s)? - h0).abs() / h0.abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergySeries { times: traj.states.iter().map(|s| s.t).collect(), errors })
}

/// Which error enters the ε-uniformity ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UniformityMetric {
    Position,
    Velocity,
    Weighted(MetricWeights),
}

impl UniformityMetric {
    pub fn select<T: Real>(&self, m: &ErrorMetrics<T>, eps: T) -> T {
        match self {
            UniformityMetric::Position => m.err_x,
            UniformityMetric::Velocity => m.err_v,
            UniformityMetric::Weighted(w) => m.weighted(*w, eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityRow<T> {
    pub eps: T,
    pub metrics: ErrorMetrics<T>,
    pub selected: T,
    pub oracle_check: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityTable<T> {
    pub method: Method,
    pub h: T,
    pub rows: Vec<UniformityRow<T>>,
    /// `max/min` of the selected metric across ε.
    pub ratio: T,
}

/// Runs `integ` at fixed `h` for every ε against per-ε oracles.
pub fn eps_uniformity<T: Real>(
    integ: &Integrator<T>,
    problem: ProblemId,
    h: T,
    t_end: T,
    eps_list: &[T],
    metric: UniformityMetric,
    oracle: &OracleConfig<T>,
) -> Result<UniformityTable<T>> {
    if eps_list.is_empty() {
        return Err(CpdError::InvalidArgument("empty eps list".into()));
    }
    let rows = eps_list
        .iter()
        .map(|&eps| uniformity_row(integ, problem, h, t_end, eps, metric, oracle))
        .collect::<Result<Vec<_>>>()?;
    let ratio = uniformity_ratio(&rows);
    Ok(UniformityTable { method: integ.method, h, rows, ratio })
}

pub fn uniformity_row<T: Real>(
    integ: &Integrator<T>,
    problem: ProblemId,
    h: T,
    t_end: T,
    eps: T,
    metric: UniformityMetric,
    oracle: &OracleConfig<T>,
) -> Result<UniformityRow<T>> {
    let p = make_problem(problem, eps)?;
    let reference = oracle_solve(&p, t_end, h, oracle)?;
    let row = convergence_row(integ, &p, h, t_end, &reference.state)?;
    Ok(UniformityRow {
        eps,
        metrics: row.metrics,
        selected: metric.select(&row.metrics, eps),
        oracle_check: reference.check_diff,
    })
}

pub fn uniformity_ratio<T: Real>(rows: &[UniformityRow<T>]) -> T {
    let hi = rows.iter().fold(T::zero(), |m, r| m.max(r.selected));
    let lo = rows.iter().fold(T::infinity(), |m, r| m.min(r.selected));
    hi / lo
}
