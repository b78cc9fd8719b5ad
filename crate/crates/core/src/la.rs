//! Small fixed-size linear algebra shared by all modules.
//!
//! Points and vectors live in ambient `R⁴`; the flat model uses the first three
//! coordinates and keeps the fourth at zero.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

pub type V2 = Vector2<f64>;
pub type V4 = Vector4<f64>;
pub type M2 = Matrix2<f64>;
pub type M4 = Matrix4<f64>;

/// Matrix of `J` in a unitary frame `(e1, e2 = J e1)`.
pub fn j0() -> M2 {
    M2::new(0.0, -1.0, 1.0, 0.0)
}

/// Rotation by `angle` in the oriented plane `(e1, e2)`.
pub fn rot(angle: f64) -> M2 {
    let (s, c) = angle.sin_cos();
    M2::new(c, -s, s, c)
}

/// Symmetric part.
pub fn sym2(m: &M2) -> M2 {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry.
pub fn max_abs2(m: &M2) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn max_abs4(m: &M4) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Operator 2-norm of a 2×2 matrix.
pub fn norm2(m: &M2) -> f64 {
    let s = m.singular_values();
    s[0].max(s[1])
}

/// Estimate of a convergence order from two errors at step ratio `ratio`.
pub fn order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}
