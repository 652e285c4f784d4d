//! Small fixed-size linear algebra and the φ-function kernels of 3×3
//! skew-symmetric matrices.
//!
//! A skew matrix `S = hat(b)` has eigenvalues `{0, ±iθ}` with `θ = ‖b‖`, and
//! `S³ = −θ² S`. Every analytic function of `S` therefore collapses onto the
//! basis `{I, S, S²}`:
//!
//! ```text
//! f(S) = f(0) I + (Im f(iθ) / θ) S + ((f(0) − Re f(iθ)) / θ²) S²
//! ```
//!
//! [`phi_op`] returns the three coefficients of that expansion for
//! `f = φ_k`, which is all the integrators ever need: applying `φ_k(S)` to a
//! vector costs two cross products.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;

use crate::scalar::{inv_factorial, Real};

/// Highest φ-index supported by the kernels.
pub const MAX_PHI_INDEX: usize = 4;

/// Below this rotation angle `phi_mat` switches to its truncated Taylor series.
pub const PHI_SERIES_THRESHOLD: f64 = 1e-4;

/// Below this |θ| `scalar_phi` sums the power series instead of running the
/// recurrence up from `e^{iθ}`.
const SCALAR_SERIES_THRESHOLD: f64 = 1.0;

/// Highest power of `S` kept by the small-angle matrix series.
const MATRIX_SERIES_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    /// Unit vector along axis `i`.
    pub fn unit(i: usize) -> Self {
        let mut v = Self::zero();
        v.0[i] = T::one();
        v
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Vec3([T::lit(v[0]), T::lit(v[1]), T::lit(v[2])])
    }

    pub fn to_f64(self) -> [f64; 3] {
        self.0.map(|c| c.to_f64().unwrap_or(f64::NAN))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Largest absolute component.
    pub fn norm_inf(self) -> T {
        self.0.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Vec3(self.0.map(|c| c * s))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3(self.0.map(|c| -c))
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Dense 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn zero() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diagonal(T::one())
    }

    pub fn diagonal(d: T) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = d;
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let r = |i: usize| self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        Vec3([r(0), r(1), r(2)])
    }

    pub fn matmul(&self, o: &Self) -> Self {
        Self::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flatten()
            .fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.is_finite())
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.matmul(&o)
    }
}

/// Skew-symmetric 3×3 matrix stored by its axis `b`.
///
/// Sign convention: `S·w = w × b`, i.e.
/// `S = [[0, b₃, −b₂], [−b₃, 0, b₁], [b₂, −b₁, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Skew3<T> {
    pub axis: Vec3<T>,
}

/// Hat map: the skew matrix whose action is `w ↦ w × b`.
#[inline]
pub fn hat<T: Real>(b: Vec3<T>) -> Skew3<T> {
    Skew3 { axis: b }
}

impl<T: Real> Skew3<T> {
    pub fn zero() -> Self {
        hat(Vec3::zero())
    }

    /// Rotation rate `θ = ‖b‖`.
    #[inline]
    pub fn theta(&self) -> T {
        self.axis.norm()
    }

    #[inline]
    pub fn apply(&self, w: Vec3<T>) -> Vec3<T> {
        w.cross(self.axis)
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        hat(self.axis * s)
    }

    pub fn to_mat(&self) -> Mat3<T> {
        let [b1, b2, b3] = self.axis.0;
        let z = T::zero();
        Mat3([[z, b3, -b2], [-b3, z, b1], [b2, -b1, z]])
    }

    /// `S²`, which equals `b bᵀ − θ² I`.
    pub fn squared(&self) -> Mat3<T> {
        let b = self.axis;
        let t2 = b.norm_squared();
        Mat3::from_fn(|i, j| b.0[i] * b.0[j] - if i == j { t2 } else { T::zero() })
    }
}

impl<T: Real> Add for Skew3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        hat(self.axis + o.axis)
    }
}

/// A matrix function of a skew matrix `S`, held as `c0 I + c1 S + c2 S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiOp<T> {
    pub arg: Skew3<T>,
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> PhiOp<T> {
    pub fn identity() -> Self {
        PhiOp {
            arg: Skew3::zero(),
            c0: T::one(),
            c1: T::zero(),
            c2: T::zero(),
        }
    }

    #[inline]
    pub fn apply(&self, w: Vec3<T>) -> Vec3<T> {
        let sw = self.arg.apply(w);
        let ssw = self.arg.apply(sw);
        w * self.c0 + sw * self.c1 + ssw * self.c2
    }

    /// The same operator multiplied by a scalar.
    #[inline]
    pub fn scaled(&self, s: T) -> Self {
        PhiOp {
            arg: self.arg,
            c0: self.c0 * s,
            c1: self.c1 * s,
            c2: self.c2 * s,
        }
    }

    pub fn to_mat(&self) -> Mat3<T> {
        let s = self.arg.to_mat();
        let s2 = self.arg.squared();
        Mat3::diagonal(self.c0) + s.scale(self.c1) + s2.scale(self.c2)
    }
}

/// `φ_k(iθ)` for `k ≤ 4`.
///
/// `φ_0(z) = e^z`, `φ_k(z) = ∫₀¹ e^{(1−σ)z} σ^{k−1}/(k−1)! dσ`, equivalently
/// `φ_k(z) = Σ_j z^j / (j+k)!`.
pub fn scalar_phi<T: Real>(k: usize, theta: T) -> Complex<T> {
    assert!(k <= MAX_PHI_INDEX, "phi index {k} exceeds {MAX_PHI_INDEX}");
    let z = Complex::new(T::zero(), theta);
    if theta.abs() < T::lit(SCALAR_SERIES_THRESHOLD) {
        // Horner evaluation of Σ_{j<n} z^j/(j+k)!, summed from the tail.
        // |θ| < 1 makes 24 terms ample for binary64.
        let n = 24;
        let mut acc = Complex::new(T::zero(), T::zero());
        for j in (0..n).rev() {
            acc = acc * z + Complex::new(inv_factorial::<T>(j + k), T::zero());
        }
        acc
    } else {
        let mut phi = Complex::new(theta.cos(), theta.sin());
        for j in 0..k {
            phi = (phi - Complex::new(inv_factorial::<T>(j), T::zero())) / z;
        }
        phi
    }
}

/// `φ_k(S)` as a [`PhiOp`].
pub fn phi_op<T: Real>(k: usize, s: &Skew3<T>) -> PhiOp<T> {
    assert!(k <= MAX_PHI_INDEX, "phi index {k} exceeds {MAX_PHI_INDEX}");
    let theta = s.theta();
    let c0 = inv_factorial::<T>(k);
    let (c1, c2) = if theta < T::lit(PHI_SERIES_THRESHOLD) {
        // Σ_{j≤8} S^j/(j+k)! folded with S^{2m+1} = (−θ²)^m S, S^{2m+2} = (−θ²)^m S².
        let mt2 = -(theta * theta);
        let mut c1 = T::zero();
        let mut c2 = T::zero();
        let mut pow = T::one();
        let mut m = 0;
        while 2 * m < MATRIX_SERIES_ORDER {
            c1 += pow * inv_factorial::<T>(2 * m + 1 + k);
            if 2 * m + 2 <= MATRIX_SERIES_ORDER {
                c2 += pow * inv_factorial::<T>(2 * m + 2 + k);
            }
            pow *= mt2;
            m += 1;
        }
        (c1, c2)
    } else {
        let f = scalar_phi(k, theta);
        (f.im / theta, (c0 - f.re) / (theta * theta))
    };
    PhiOp { arg: *s, c0, c1, c2 }
}

/// `φ_k(S)` as a dense matrix.
pub fn phi_mat<T: Real>(k: usize, s: &Skew3<T>) -> Mat3<T> {
    phi_op(k, s).to_mat()
}

/// `(I − cS)⁻¹ w` for a skew `S`, in closed form.
///
/// Uses `(I − cS)⁻¹ = I + (cS + c²S²)/(1 + c²θ²)`.
pub fn solve_shifted_skew<T: Real>(s: &Skew3<T>, c: T, w: Vec3<T>) -> Vec3<T> {
    let denom = T::one() + c * c * s.axis.norm_squared();
    let sw = s.apply(w);
    let ssw = s.apply(sw);
    w + (sw * c + ssw * (c * c)) * denom.recip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hat_matches_displayed_matrix() {
        let s = hat(Vec3::<f64>::new(0.0, 0.0, 1.0)).to_mat();
        assert_eq!(s.0, [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(hat(Vec3::<f64>::zero()).to_mat(), Mat3::zero());
    }

    #[test]
    fn hat_applies_cross_product() {
        let s = hat(Vec3::<f64>::new(1.0, 2.0, 3.0));
        let w = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(s.apply(w), Vec3::new(0.0, -3.0, 2.0));
        assert_eq!(s.to_mat().mul_vec(w), Vec3::new(0.0, -3.0, 2.0));
    }

    #[test]
    fn scalar_phi_reference_values() {
        let e = scalar_phi::<f64>(0, PI);
        assert!(close(e.re, -1.0, 1e-15) && close(e.im, 0.0, 1e-15));
        let one = scalar_phi::<f64>(1, 0.0);
        assert_eq!((one.re, one.im), (1.0, 0.0));
        // (e^{iπ} − 1)/(iπ) = 2i/π
        let p = scalar_phi::<f64>(1, PI);
        assert!(close(p.re, 0.0, 1e-15) && close(p.im, 2.0 / PI, 1e-15));
    }

    #[test]
    fn scalar_phi_recurrence_across_threshold() {
        for &theta in &[1e-6, 0.3, 0.999_999, 1.0, 1.000_001, 7.5, 50.0] {
            let z = Complex::new(0.0, theta);
            for k in 0..MAX_PHI_INDEX {
                let lhs = z * scalar_phi::<f64>(k + 1, theta);
                let rhs = scalar_phi::<f64>(k, theta) - inv_factorial::<f64>(k);
                assert!((lhs - rhs).norm() < 1e-14, "k={k} theta={theta}");
            }
        }
    }

    #[test]
    fn phi_mat_zero_is_identity() {
        assert_eq!(phi_mat(0, &Skew3::<f64>::zero()), Mat3::identity());
    }

    #[test]
    fn phi0_is_rodrigues_rotation() {
        let r = phi_mat(0, &hat(Vec3::<f64>::new(0.0, 0.0, 1.0)));
        let w = r.mul_vec(Vec3::new(1.0, 0.0, 0.0));
        assert!((w - Vec3::new(1f64.cos(), -1f64.sin(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phi1_at_pi() {
        let s = hat(Vec3::<f64>::new(0.0, 0.0, PI));
        let expected =
            Mat3::identity() + s.to_mat().scale(2.0 / (PI * PI)) + s.squared().scale(1.0 / (PI * PI));
        assert!((phi_mat(1, &s) - expected).max_abs() < 1e-15);
    }

    #[test]
    fn shifted_skew_solve_inverts() {
        let s = hat(Vec3::<f64>::new(0.3, -1.2, 2.0));
        let w = Vec3::new(0.5, 0.25, -1.0);
        let u = solve_shifted_skew(&s, 0.7, w);
        let back = u - s.apply(u) * 0.7;
        assert!((back - w).norm() < 1e-15);
    }

    #[test]
    fn f32_kernels_run() {
        let s = hat(Vec3::<f32>::new(0.0, 0.0, 2.0));
        let r = phi_mat(0, &s);
        assert!((r.transpose().matmul(&r) - Mat3::identity()).max_abs() < 1e-6);
    }
}
