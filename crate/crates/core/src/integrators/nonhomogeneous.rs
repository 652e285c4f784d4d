//! Frozen-field extensions to a position-dependent field `B(x)`.
//!
//! Each step runs the second-order exponential scheme with the field matrix
//! frozen at `x_n` (`SG1O1`) or at the midpoint `(x_n + x_{n+1})/2`
//! (`SG1O2`, an outer fixed point on `x_{n+1}`). `SG1O4` composes three
//! `SG1O2` substeps with the Triple-Jump weights.

use super::homogeneous::{step_frozen, CoefficientSet, QuadratureRule};
use super::{FixedPointControls, SolveStats};
use crate::error::{CpdError, Result};
use crate::geometry::{Skew3, Vec3};
use crate::problems::{CpdProblem, State};
use crate::scalar::Real;

/// Outer Triple-Jump weight `κ₁ = κ₃ = 1/(2 − ∛2)`.
pub const TRIPLE_JUMP_OUTER: f64 = 1.351_207_191_959_657_8;
/// Inner Triple-Jump weight `κ₂ = −∛2/(2 − ∛2)`.
pub const TRIPLE_JUMP_INNER: f64 = -1.702_414_383_919_315_3;

/// Triple-Jump weights computed in the working precision.
pub fn triple_jump<T: Real>() -> [T; 3] {
    let cbrt2 = T::lit(2.0).cbrt();
    let outer = (T::lit(2.0) - cbrt2).recip();
    [outer, -cbrt2 * outer, outer]
}

/// Result of one frozen-field step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenFieldStep<T> {
    /// Frozen `M_n` (or `M̃_n`), before scaling by `h`.
    pub frozen: Skew3<T>,
    pub stages: Vec<Vec3<T>>,
    pub next: State<T>,
    /// Outer midpoint iterations (zero for `SG1O1`).
    pub outer_iterations: usize,
}

pub(crate) fn sg1o1<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    quad: &QuadratureRule<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<FrozenFieldStep<T>> {
    let frozen = p.field_matrix(state.x);
    let (next, sol) = step_frozen(p, state, h, &frozen, &CoefficientSet::second_order(), quad, fp, stats)?;
    Ok(FrozenFieldStep { frozen, stages: sol.stages, next, outer_iterations: 0 })
}

pub(crate) fn sg1o2<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    quad: &QuadratureRule<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<FrozenFieldStep<T>> {
    let coeffs = CoefficientSet::second_order();
    let mut cur = sg1o1(p, state, h, quad, fp, stats)?;
    let half = T::lit(0.5);
    let mut outer = 0;
    let mut converged = false;
    while outer < fp.max_iterations {
        outer += 1;
        let frozen = p.field_matrix((state.x + cur.next.x) * half);
        let (next, sol) = step_frozen(p, state, h, &frozen, &coeffs, quad, fp, stats)?;
        let delta = (next.x - cur.next.x).norm_inf();
        let size = T::one().max(next.x.norm_inf());
        cur = FrozenFieldStep { frozen, stages: sol.stages, next, outer_iterations: outer };
        if !(size <= fp.divergence_bound) {
            return Err(CpdError::Divergence {
                iterations: outer,
                norm: size.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        if delta <= fp.tolerance * size {
            converged = true;
            break;
        }
    }
    stats.record(outer, converged);
    Ok(cur)
}

pub(crate) fn sg1o4<T: Real>(
    p: &CpdProblem<T>,
    state: &State<T>,
    h: T,
    quad: &QuadratureRule<T>,
    fp: &FixedPointControls<T>,
    stats: &mut SolveStats,
) -> Result<State<T>> {
    let mut cur = *state;
    for k in triple_jump::<T>() {
        cur = sg1o2(p, &cur, k * h, quad, fp, stats)?.next;
    }
    cur.t = state.t + h;
    Ok(cur)
}

/// First-order scheme with `M_n = hat(B(x_n))/ε`, Gauss-4 stages.
pub fn step_sg1o1<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<FrozenFieldStep<T>> {
    sg1o1(p, state, h, &super::gauss4(), &FixedPointControls::default(), &mut SolveStats::default())
}

/// Second-order scheme with `M̃_n = hat(B((x_n + x_{n+1})/2))/ε`.
pub fn step_sg1o2<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<FrozenFieldStep<T>> {
    sg1o2(p, state, h, &super::gauss4(), &FixedPointControls::default(), &mut SolveStats::default())
}

/// Fourth-order Triple-Jump composition of [`step_sg1o2`].
pub fn step_sg1o4<T: Real>(p: &CpdProblem<T>, state: &State<T>, h: T) -> Result<State<T>> {
    sg1o4(p, state, h, &super::gauss4(), &FixedPointControls::default(), &mut SolveStats::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_jump_weights() {
        let k = triple_jump::<f64>();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((k[0] - TRIPLE_JUMP_OUTER).abs() < 1e-15);
        assert!((k[1] - TRIPLE_JUMP_INNER).abs() < 1e-15);
        assert_eq!(k[0], k[2]);
    }
}
