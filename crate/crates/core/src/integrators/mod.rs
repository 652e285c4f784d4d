//! One-step maps and the trajectory driver.
//!
//! | id      | family                               | order | field       | stage solve |
//! |---------|--------------------------------------|-------|-------------|-------------|
//! | `SC1O2` | continuous-stage exp., Gauss-4       | 2     | homogeneous | implicit    |
//! | `SC2O2` | continuous-stage exp., midpoint      | 2     | homogeneous | explicit    |
//! | `SC1O4` | continuous-stage exp., Gauss-4       | 4     | homogeneous | implicit    |
//! | `SC2O4` | explicit 3-stage exp. tableau        | 4     | homogeneous | explicit    |
//! | `SG1O1` | frozen field at `x_n`                | 1     | any         | implicit    |
//! | `SG1O2` | frozen field at the midpoint         | 2     | any         | implicit    |
//! | `SG1O4` | Triple-Jump composition of `SG1O2`   | 4     | any         | implicit    |
//! | `BORIS` | Boris push, synchronized velocities  | 2     | any         | explicit    |
//! | `RKO2`  | implicit midpoint rule               | 2     | any         | implicit    |
//! | `RKO4`  | 2-stage Gauss–Legendre               | 4     | any         | implicit    |
//! | `EULER` | implicit Euler                       | 1     | any         | implicit    |

pub mod homogeneous;
pub mod nonhomogeneous;

use std::fmt;
use std::str::FromStr;

use crate::error::{CpdError, Result};
use crate::problems::{CpdProblem, State};
use crate::reference;
use crate::scalar::Real;

pub use homogeneous::{
    gauss4, midpoint_rule, solve_stages, step_sc1o2, step_sc1o4, step_sc2o2, step_sc2o4,
    CoefficientSet, QuadratureRule, StageSolution,
};
pub use nonhomogeneous::{
    step_sg1o1, step_sg1o2, step_sg1o4, FrozenFieldStep, TRIPLE_JUMP_INNER, TRIPLE_JUMP_OUTER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sc1o2,
    Sc2o2,
    Sc1o4,
    Sc2o4,
    Sg1o1,
    Sg1o2,
    Sg1o4,
    Boris,
    Rko2,
    Rko4,
    ImplicitEuler,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Sc1o2,
        Method::Sc2o2,
        Method::Sc1o4,
        Method::Sc2o4,
        Method::Sg1o1,
        Method::Sg1o2,
        Method::Sg1o4,
        Method::Boris,
        Method::Rko2,
        Method::Rko4,
        Method::ImplicitEuler,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sc1o2 => "SC1O2",
            Method::Sc2o2 => "SC2O2",
            Method::Sc1o4 => "SC1O4",
            Method::Sc2o4 => "SC2O4",
            Method::Sg1o1 => "SG1O1",
            Method::Sg1o2 => "SG1O2",
            Method::Sg1o4 => "SG1O4",
            Method::Boris => "BORIS",
            Method::Rko2 => "RKO2",
            Method::Rko4 => "RKO4",
            Method::ImplicitEuler => "EULER",
        }
    }

    /// Classical convergence order.
    pub fn order(self) -> u32 {
        match self {
            Method::Sg1o1 | Method::ImplicitEuler => 1,
            Method::Sc1o2 | Method::Sc2o2 | Method::Sg1o2 | Method::Boris | Method::Rko2 => 2,
            Method::Sc1o4 | Method::Sc2o4 | Method::Sg1o4 | Method::Rko4 => 4,
        }
    }

    /// The SC family is only defined for a constant field.
    pub fn requires_homogeneous(self) -> bool {
        matches!(
            self,
            Method::Sc1o2 | Method::Sc2o2 | Method::Sc1o4 | Method::Sc2o4
        )
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, Method::Sc2o2 | Method::Sc2o4 | Method::Boris)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "IMPLICIT_EULER" | "IE" => return Ok(Method::ImplicitEuler),
            _ => {}
        }
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == up)
            .ok_or_else(|| CpdError::UnknownMethod(s.to_string()))
    }
}

/// Controls of every fixed-point solve (stage equations, frozen-field outer
/// loop, implicit Runge–Kutta stages).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointControls<T> {
    /// Stop once the max-norm update falls below `tolerance · max(1, ‖iterate‖)`.
    pub tolerance: T,
    pub max_iterations: usize,
    /// An iterate larger than this in max-norm is reported as divergence.
    pub divergence_bound: T,
}

impl<T: Real> FixedPointControls<T> {
    /// Tolerance 10⁻¹⁶ and at most 5 sweeps; the cap is what binds in binary64.
    pub fn standard() -> Self {
        FixedPointControls {
            tolerance: T::lit(1e-16),
            max_iterations: 5,
            divergence_bound: T::lit(1e10),
        }
    }

    /// Tolerance 10⁻¹⁴ with up to 100 sweeps, for Jacobian-based checks.
    pub fn tight() -> Self {
        FixedPointControls {
            tolerance: T::lit(1e-14),
            max_iterations: 100,
            divergence_bound: T::lit(1e10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) || self.max_iterations == 0 {
            return Err(CpdError::InvalidArgument(
                "fixed-point tolerance must be positive and max_iterations >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl<T: Real> Default for FixedPointControls<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// Iteration counters accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub steps: usize,
    pub solves: usize,
    pub sweeps: usize,
    pub max_sweeps: usize,
    /// Solves that stopped at the iteration cap rather than at tolerance.
    pub capped: usize,
}

impl SolveStats {
    pub(crate) fn record(&mut self, sweeps: usize, converged: bool) {
        self.solves += 1;
        self.sweeps += sweeps;
        self.max_sweeps = self.max_sweeps.max(sweeps);
        if !converged {
            self.capped += 1;
        }
    }

    pub fn merge(&mut self, o: &SolveStats) {
        self.steps += o.steps;
        self.solves += o.solves;
        self.sweeps += o.sweeps;
        self.max_sweeps = self.max_sweeps.max(o.max_sweeps);
        self.capped += o.capped;
    }
}

/// Stage quadrature used by the SG methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SgQuadrature {
    #[default]
    Gauss4,
    Midpoint,
}

/// A configured one-step method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator<T> {
    pub method: Method,
    pub controls: FixedPointControls<T>,
    pub sg_quadrature: SgQuadrature,
}

impl<T: Real> Integrator<T> {
    pub fn new(method: Method) -> Self {
        Integrator {
            method,
            controls: FixedPointControls::default(),
            sg_quadrature: SgQuadrature::default(),
        }
    }

    pub fn with_controls(mut self, controls: FixedPointControls<T>) -> Self {
        self.controls = controls;
        self
    }

    pub fn with_sg_quadrature(mut self, q: SgQuadrature) -> Self {
        self.sg_quadrature = q;
        self
    }

    /// Advances `state` by `h` (which may be negative).
    pub fn step(
        &self,
        p: &CpdProblem<T>,
        state: &State<T>,
        h: T,
        stats: &mut SolveStats,
    ) -> Result<State<T>> {
        use homogeneous as hom;
        use nonhomogeneous as nh;

        if self.method.requires_homogeneous() && !p.is_homogeneous() {
            return Err(CpdError::Unsupported(format!(
                "{} requires a homogeneous magnetic field",
                self.method
            )));
        }
        let fp = &self.controls;
        let quad = match self.sg_quadrature {
            SgQuadrature::Gauss4 => gauss4(),
            SgQuadrature::Midpoint => midpoint_rule(),
        };
        let next = match self.method {
            Method::Sc1o2 => hom::step_exponential(
                p, state, h, &CoefficientSet::second_order(), &gauss4(), fp, stats,
            )?,
            Method::Sc2o2 => hom::sc2o2(p, state, h)?,
            Method::Sc1o4 => hom::step_exponential(
                p, state, h, &CoefficientSet::fourth_order(), &gauss4(), fp, stats,
            )?,
            Method::Sc2o4 => hom::sc2o4(p, state, h)?,
            Method::Sg1o1 => nh::sg1o1(p, state, h, &quad, fp, stats)?.next,
            Method::Sg1o2 => nh::sg1o2(p, state, h, &quad, fp, stats)?.next,
            Method::Sg1o4 => nh::sg1o4(p, state, h, &quad, fp, stats)?,
            Method::Boris => reference::boris(p, state, h)?,
            Method::Rko2 => reference::implicit_rk(p, state, h, &reference::midpoint_tableau(), fp, stats)?,
            Method::Rko4 => reference::implicit_rk(p, state, h, &reference::gauss2_tableau(), fp, stats)?,
            Method::ImplicitEuler => {
                reference::implicit_rk(p, state, h, &reference::euler_tableau(), fp, stats)?
            }
        };
        stats.steps += 1;
        if !next.is_finite() {
            return Err(CpdError::Divergence {
                iterations: 0,
                norm: f64::INFINITY,
            });
        }
        Ok(next)
    }

    /// Applies the one-step map `n_steps` times from the problem's initial
    /// state, recording every `thinning`-th state (the final state is always
    /// recorded).
    pub fn integrate(
        &self,
        p: &CpdProblem<T>,
        h: T,
        n_steps: usize,
        thinning: usize,
    ) -> Result<Trajectory<T>> {
        self.integrate_from(p, p.initial_state(), h, n_steps, thinning)
    }

    pub fn integrate_from(
        &self,
        p: &CpdProblem<T>,
        start: State<T>,
        h: T,
        n_steps: usize,
        thinning: usize,
    ) -> Result<Trajectory<T>> {
        if !(h > T::zero()) {
            return Err(CpdError::InvalidArgument("step size must be positive".into()));
        }
        let thinning = thinning.max(1);
        let mut stats = SolveStats::default();
        let mut states = Vec::with_capacity(n_steps / thinning + 2);
        let mut energies = Vec::with_capacity(n_steps / thinning + 2);
        let t0 = start.t;
        let mut cur = start;
        states.push(cur);
        energies.push(p.energy(&cur)?);
        for n in 1..=n_steps {
            let mut next = self
                .step(p, &cur, h, &mut stats)
                .map_err(|e| CpdError::StepFailed { step: n, source: Box::new(e) })?;
            // Times are n·h rather than accumulated sums.
            next.t = t0 + T::from_count(n) * h;
            cur = next;
            if n % thinning == 0 || n == n_steps {
                states.push(cur);
                energies.push(
                    p.energy(&cur)
                        .map_err(|e| CpdError::StepFailed { step: n, source: Box::new(e) })?,
                );
            }
        }
        Ok(Trajectory { states, energies, stats, h })
    }

    /// Final state after `n_steps` steps, without recording.
    pub fn advance(
        &self,
        p: &CpdProblem<T>,
        start: State<T>,
        h: T,
        n_steps: usize,
        stats: &mut SolveStats,
    ) -> Result<State<T>> {
        let t0 = start.t;
        let mut cur = start;
        for n in 1..=n_steps {
            cur = self
                .step(p, &cur, h, stats)
                .map_err(|e| CpdError::StepFailed { step: n, source: Box::new(e) })?;
            cur.t = t0 + T::from_count(n) * h;
        }
        Ok(cur)
    }
}

/// Recorded states with their energies `½‖v‖² + U(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<State<T>>,
    pub energies: Vec<T>,
    pub stats: SolveStats,
    pub h: T,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &State<T> {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Number of steps of size close to `h` that exactly cover `[0, t_end]`,
/// and the adjusted step.
pub fn uniform_grid<T: Real>(t_end: T, h: T) -> (usize, T) {
    let n = (t_end / h).round().max(T::one());
    let n_steps = n.to_usize().unwrap_or(1);
    (n_steps, t_end / T::from_count(n_steps))
}
