//! Charged-particle initial-value problems `ẍ = ẋ × B(x)/ε + F(x)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{CpdError, Result};
use crate::geometry::{hat, phi_op, Skew3, Vec3};
use crate::scalar::Real;

/// Radius around the axis `x₁ = x₂ = 0` inside which the axial potentials are
/// treated as singular.
pub const SINGULAR_RADIUS: f64 = 1e-12;

pub type VectorField<T> = Arc<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>;
pub type ScalarField<T> = Arc<dyn Fn(Vec3<T>) -> T + Send + Sync>;

/// Built-in benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    /// Homogeneous field `B = (0,0,1)`.
    P1,
    /// Axially growing field `B = (0,0,r)`.
    P2,
    /// Maximal-ordering field `B(εx)/ε + (−x₁, 0, x₃)`.
    P3,
}

impl ProblemId {
    pub const ALL: [ProblemId; 3] = [ProblemId::P1, ProblemId::P2, ProblemId::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::P1 => "P1",
            ProblemId::P2 => "P2",
            ProblemId::P3 => "P3",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" => Ok(ProblemId::P1),
            "P2" => Ok(ProblemId::P2),
            "P3" => Ok(ProblemId::P3),
            _ => Err(CpdError::UnknownProblem(s.to_string())),
        }
    }
}

/// Magnetic field description.
#[derive(Clone)]
pub enum FieldSpec<T> {
    /// Constant `B`; the particle sees `B/ε`.
    Homogeneous(Vec3<T>),
    /// `x ↦ B(x)`; the particle sees `B(x)/ε`.
    General(VectorField<T>),
    /// `y ↦ B(y)` evaluated at `y = εx`; the particle sees
    /// `B(εx)/ε + additive(x)`.
    MaximalOrdering {
        slow: VectorField<T>,
        additive: Option<VectorField<T>>,
    },
}

impl<T> fmt::Debug for FieldSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Homogeneous(_) => f.write_str("Homogeneous"),
            FieldSpec::General(_) => f.write_str("General"),
            FieldSpec::MaximalOrdering { additive, .. } => f
                .debug_struct("MaximalOrdering")
                .field("additive", &additive.is_some())
                .finish(),
        }
    }
}

/// Scalar potential `U` and its force `F = −∇U`.
#[derive(Clone)]
pub enum ForceSpec<T> {
    /// `U ≡ 0`.
    Zero,
    /// `U = c / r` with `r = √(x₁² + x₂²)`; singular on the `x₃` axis.
    AxialInverse { coeff: T },
    /// User supplied potential with its analytic force.
    Custom {
        potential: ScalarField<T>,
        force: VectorField<T>,
    },
}

impl<T: fmt::Debug> fmt::Debug for ForceSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceSpec::Zero => f.write_str("Zero"),
            ForceSpec::AxialInverse { coeff } => {
                f.debug_struct("AxialInverse").field("coeff", coeff).finish()
            }
            ForceSpec::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl<T: Real> ForceSpec<T> {
    fn axial_radius(x: Vec3<T>) -> Result<T> {
        let r = x.0[0].hypot(x.0[1]);
        if !(r >= T::lit(SINGULAR_RADIUS)) {
            return Err(CpdError::Singular {
                r: r.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(r)
    }

    pub fn potential(&self, x: Vec3<T>) -> Result<T> {
        match self {
            ForceSpec::Zero => Ok(T::zero()),
            ForceSpec::AxialInverse { coeff } => Ok(*coeff / Self::axial_radius(x)?),
            ForceSpec::Custom { potential, .. } => Ok(potential(x)),
        }
    }

    pub fn force(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        match self {
            ForceSpec::Zero => Ok(Vec3::zero()),
            ForceSpec::AxialInverse { coeff } => {
                let r = Self::axial_radius(x)?;
                let s = *coeff / (r * r * r);
                Ok(Vec3::new(x.0[0] * s, x.0[1] * s, T::zero()))
            }
            ForceSpec::Custom { force, .. } => Ok(force(x)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForceSpec::Zero)
    }
}

/// Time-stamped phase-space point in velocity variables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State<T> {
    pub t: T,
    pub x: Vec3<T>,
    pub v: Vec3<T>,
}

impl<T: Real> State<T> {
    pub fn new(t: T, x: Vec3<T>, v: Vec3<T>) -> Self {
        State { t, x, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.v.is_finite()
    }
}

/// A charged-particle initial-value problem.
#[derive(Clone, Debug)]
pub struct CpdProblem<T> {
    pub id: Option<ProblemId>,
    pub eps: T,
    pub field: FieldSpec<T>,
    pub force: ForceSpec<T>,
    pub x0: Vec3<T>,
    pub v0: Vec3<T>,
    /// Vector potential `A` with `∇ × A = B`, when known.
    pub vector_potential: Option<VectorPotential<T>>,
}

/// Vector potential of the (unscaled) field.
#[derive(Clone)]
pub struct VectorPotential<T>(pub VectorField<T>);

impl<T> fmt::Debug for VectorPotential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorPotential")
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if eps > T::zero() && eps <= T::one() {
        Ok(())
    } else {
        Err(CpdError::InvalidEpsilon(eps.to_f64().unwrap_or(f64::NAN)))
    }
}

/// Builds one of the built-in benchmark problems at field strength `1/ε`.
pub fn make_problem<T: Real>(id: ProblemId, eps: T) -> Result<CpdProblem<T>> {
    check_eps(eps)?;
    let p = match id {
        ProblemId::P1 => {
            let b = Vec3::new(T::zero(), T::zero(), T::one());
            let half = T::lit(0.5);
            CpdProblem {
                id: Some(id),
                eps,
                field: FieldSpec::Homogeneous(b),
                force: ForceSpec::AxialInverse { coeff: T::lit(0.01) },
                x0: Vec3::from_f64([0.0, 0.2, 0.1]),
                v0: Vec3::from_f64([0.09, 0.05, 0.2]),
                vector_potential: Some(VectorPotential(Arc::new(move |x: Vec3<T>| {
                    b.cross(x) * half
                }))),
            }
        }
        ProblemId::P2 => {
            let third = T::one() / T::lit(3.0);
            CpdProblem {
                id: Some(id),
                eps,
                field: FieldSpec::General(Arc::new(|x: Vec3<T>| {
                    Vec3::new(T::zero(), T::zero(), x.0[0].hypot(x.0[1]))
                })),
                force: ForceSpec::AxialInverse { coeff: T::lit(0.01) },
                x0: Vec3::from_f64([0.0, 1.0, 0.1]),
                v0: Vec3::from_f64([0.09, 0.05, 0.2]),
                vector_potential: Some(VectorPotential(Arc::new(move |x: Vec3<T>| {
                    let r = x.0[0].hypot(x.0[1]);
                    Vec3::new(-x.0[1] * r * third, x.0[0] * r * third, T::zero())
                }))),
            }
        }
        ProblemId::P3 => CpdProblem {
            id: Some(id),
            eps,
            field: FieldSpec::MaximalOrdering {
                slow: Arc::new(|y: Vec3<T>| {
                    Vec3::new(y.0[1].cos(), T::one() + y.0[2].sin(), y.0[0].cos())
                }),
                additive: Some(Arc::new(|x: Vec3<T>| Vec3::new(-x.0[0], T::zero(), x.0[2]))),
            },
            force: ForceSpec::AxialInverse { coeff: T::one() },
            x0: Vec3::new(T::one() / T::lit(3.0), T::lit(0.25), T::lit(0.5)),
            v0: Vec3::new(T::lit(2.0) / T::lit(5.0), T::lit(2.0) / T::lit(3.0), T::one()),
            vector_potential: None,
        },
    };
    Ok(p)
}

impl<T: Real> CpdProblem<T> {
    /// A problem with a homogeneous field and no force.
    pub fn free(b: Vec3<T>, eps: T, x0: Vec3<T>, v0: Vec3<T>) -> Result<Self> {
        check_eps(eps)?;
        let half = T::lit(0.5);
        Ok(CpdProblem {
            id: None,
            eps,
            field: FieldSpec::Homogeneous(b),
            force: ForceSpec::Zero,
            x0,
            v0,
            vector_potential: Some(VectorPotential(Arc::new(move |x: Vec3<T>| {
                b.cross(x) * half
            }))),
        })
    }

    /// Same problem with a different force.
    pub fn with_force(mut self, force: ForceSpec<T>) -> Self {
        self.force = force;
        self
    }

    pub fn initial_state(&self) -> State<T> {
        State::new(T::zero(), self.x0, self.v0)
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.field, FieldSpec::Homogeneous(_))
    }

    /// The field the particle actually sees, `B(x)/ε` (plus the additive
    /// part for maximal ordering).
    pub fn scaled_field(&self, x: Vec3<T>) -> Vec3<T> {
        let inv = self.eps.recip();
        match &self.field {
            FieldSpec::Homogeneous(b) => *b * inv,
            FieldSpec::General(f) => f(x) * inv,
            FieldSpec::MaximalOrdering { slow, additive } => {
                let base = slow(x * self.eps) * inv;
                match additive {
                    Some(a) => base + a(x),
                    None => base,
                }
            }
        }
    }

    /// `M(x) = hat(B(x))/ε`, so that `v × B(x)/ε = M(x) v`.
    #[inline]
    pub fn field_matrix(&self, x: Vec3<T>) -> Skew3<T> {
        hat(self.scaled_field(x))
    }

    #[inline]
    pub fn force(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        self.force.force(x)
    }

    pub fn potential(&self, x: Vec3<T>) -> Result<T> {
        self.force.potential(x)
    }

    /// `H = ½‖v‖² + U(x)`; equal to the Hamiltonian in canonical variables.
    pub fn energy(&self, s: &State<T>) -> Result<T> {
        Ok(T::lit(0.5) * s.v.norm_squared() + self.potential(s.x)?)
    }

    /// Right-hand side of the first-order system: `(ẋ, v̇)`.
    pub fn rhs(&self, x: Vec3<T>, v: Vec3<T>) -> Result<(Vec3<T>, Vec3<T>)> {
        Ok((v, self.field_matrix(x).apply(v) + self.force(x)?))
    }

    fn vector_potential(&self) -> Result<&VectorPotential<T>> {
        self.vector_potential.as_ref().ok_or_else(|| {
            CpdError::Unsupported(format!(
                "no vector potential known for problem {}",
                self.id.map_or("<custom>", ProblemId::as_str)
            ))
        })
    }

    /// Conjugate momentum `p = v + A(x)/ε`.
    pub fn momentum(&self, x: Vec3<T>, v: Vec3<T>) -> Result<Vec3<T>> {
        let a = self.vector_potential()?;
        Ok(v + (a.0)(x) * self.eps.recip())
    }

    /// Inverse of [`momentum`](Self::momentum): `v = p − A(x)/ε`.
    pub fn velocity_from_momentum(&self, x: Vec3<T>, p: Vec3<T>) -> Result<Vec3<T>> {
        let a = self.vector_potential()?;
        Ok(p - (a.0)(x) * self.eps.recip())
    }

    /// Exact flow of a force-free problem in a homogeneous field:
    /// `x(t) = x₀ + tφ₁(tM)v₀`, `v(t) = φ₀(tM)v₀`.
    pub fn exact_free_solution(&self, t: T) -> Result<State<T>> {
        if !self.is_homogeneous() || !self.force.is_zero() {
            return Err(CpdError::Unsupported(
                "exact solution needs a homogeneous field and zero force".into(),
            ));
        }
        let tm = self.field_matrix(self.x0).scale(t);
        let x = self.x0 + phi_op(1, &tm).apply(self.v0) * t;
        let v = phi_op(0, &tm).apply(self.v0);
        Ok(State::new(t, x, v))
    }
}
