//! Minimal 3-vector helpers over `[f64; 3]`.
//!
//! Positions and displacements serialize as plain JSON arrays, so the
//! fixed-size array is the natural representation.

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub fn is_finite(a: Vec3) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Clamp each component into `[min[i], max[i]]`.
pub fn clamp(a: Vec3, min: Vec3, max: Vec3) -> Vec3 {
    [
        a[0].clamp(min[0], max[0]),
        a[1].clamp(min[1], max[1]),
        a[2].clamp(min[2], max[2]),
    ]
}
