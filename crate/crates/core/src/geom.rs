//! Small fixed-size vector helpers for the plane.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inv(m: &Mat2) -> Mat2 {
    let d = det(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn solve(m: &Mat2, v: Vec2) -> Vec2 {
    let d = det(m);
    [(m[1][1] * v[0] - m[0][1] * v[1]) / d, (m[0][0] * v[1] - m[1][0] * v[0]) / d]
}

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn normalize(a: Vec2) -> Vec2 {
    let n = norm(a);
    [a[0] / n, a[1] / n]
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(c: f64, a: Vec2) -> Vec2 {
    [c * a[0], c * a[1]]
}

/// Counterclockwise quarter turn.
pub fn perp(a: Vec2) -> Vec2 {
    [-a[1], a[0]]
}

pub fn wrap(x: Vec2) -> Vec2 {
    let w = |a: f64| {
        let r = a.rem_euclid(1.0);
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    };
    [w(x[0]), w(x[1])]
}

/// Representative of `x` modulo 1 in [-1/2, 1/2).
pub fn wrap_centered(x: Vec2) -> Vec2 {
    [x[0] - (x[0] + 0.5).floor(), x[1] - (x[1] + 0.5).floor()]
}
