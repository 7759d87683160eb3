//! Minimal fixed-size vector algebra in R³.

pub type Vec3 = [f64; 3];

pub const ZERO: Vec3 = [0.0, 0.0, 0.0];
pub const E1: Vec3 = [1.0, 0.0, 0.0];
pub const E2: Vec3 = [0.0, 1.0, 0.0];
pub const E3: Vec3 = [0.0, 0.0, 1.0];

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `a / |a|`, or `None` for the zero vector.
#[inline]
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(1.0 / n, a))
    } else {
        None
    }
}

/// Determinant of the matrix whose columns are `a`, `b`, `c`.
#[inline]
pub fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    dot(a, cross(b, c))
}

/// Solves `x0 * a + x1 * b + x2 * c = rhs` by Cramer's rule.
pub fn solve3(cols: [Vec3; 3], rhs: Vec3) -> Option<Vec3> {
    let d = det3(cols[0], cols[1], cols[2]);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([
        det3(rhs, cols[1], cols[2]) / d,
        det3(cols[0], rhs, cols[2]) / d,
        det3(cols[0], cols[1], rhs) / d,
    ])
}
