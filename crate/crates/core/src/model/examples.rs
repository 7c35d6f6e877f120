use crate::error::{Error, Result};
use crate::truncation::BoundFunction;

use super::CoefficientSet;

/// Lower clamp on κ when `D ≡ 0` would otherwise give κ = 0.
pub const MIN_KAPPA: f64 = 1e-6;

/// Scalar model `D(y) = −a·y`, `b(x, y) = s − s³`, `σ(x, y) = |s|^{3/2}`
/// with `s = x + a·y`, for `|a| < 1`.
///
/// Bound function: with `ŝ = (1 + |a|)·r`, `f(r) = max(ŝ + ŝ³, ŝ^{3/2})`.
pub fn make_example_a(a: f64) -> Result<CoefficientSet> {
    if !(a.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "example-a needs |a| < 1, got a = {a}"
        )));
    }
    let scale = 1.0 + a.abs();
    CoefficientSet::builder("example-a", 1)
        .neutral(move |y, o| o[0] = -a * y[0])
        .drift(move |x, y, o| {
            let s = x[0] + a * y[0];
            o[0] = s - s * s * s;
        })
        .diffusion(1, move |x, y, o| o[0] = (x[0] + a * y[0]).abs().powf(1.5))
        .kappa(a.abs().max(MIN_KAPPA))
        .bound(BoundFunction::new("example-a", move |r| {
            let s = scale * r;
            (s + s * s * s).max(s.powf(1.5))
        }))
        .build()
}

/// Scalar model `D(y) = sin(y)/2`, `b(x, y) = x − x³ + cos y`,
/// `σ(x, y) = |x|^{3/2}`, with κ = 1/2 and `f(r) = max(1 + r + r³, r^{3/2})`.
pub fn make_example_b() -> CoefficientSet {
    CoefficientSet::builder("example-b", 1)
        .neutral(|y, o| o[0] = 0.5 * y[0].sin())
        .drift(|x, y, o| o[0] = x[0] - x[0] * x[0] * x[0] + y[0].cos())
        .diffusion(1, |x, _, o| o[0] = x[0].abs().powf(1.5))
        .kappa(0.5)
        .bound(BoundFunction::new("example-b", |r| {
            (1.0 + r + r * r * r).max(r.powf(1.5))
        }))
        .build()
        .expect("example-b is well formed")
}

/// `dX = dW` in one dimension (`D = 0`, `b = 0`, `σ = 1`).
pub fn make_additive_noise() -> CoefficientSet {
    CoefficientSet::builder("additive", 1)
        .drift(|_, _, o| o[0] = 0.0)
        .diffusion(1, |_, _, o| o[0] = 1.0)
        .kappa(MIN_KAPPA)
        .bound(BoundFunction::new("1 + r", |r| 1.0 + r))
        .build()
        .expect("additive model is well formed")
}

/// Pure compensated jumps `dX = ∫ u Ñ(du, dt)` in one dimension.
///
/// The bound `f(r) = 1 + r` covers the zero drift only; `h(x, y, u) = u` does
/// not depend on the state, so truncation leaves it untouched.
pub fn make_additive_jump() -> CoefficientSet {
    CoefficientSet::builder("jump-additive", 1)
        .drift(|_, _, o| o[0] = 0.0)
        .jump(|_, _, u, o| o[0] = u)
        .kappa(MIN_KAPPA)
        .bound(BoundFunction::new("1 + r", |r| 1.0 + r))
        .build()
        .expect("jump-additive is well formed")
}

/// Scalar jump model `D(y) = sin(y)/4`, `b(x, y) = x − x³ + cos y`,
/// `h(x, y, u) = u·(1 ∧ |x|)`.
///
/// `f(r) = 1 + r + r³` dominates `|b|`; `|h| ≤ |u|` holds for every state, so
/// for marks in `[−1, 1]` it is dominated as well.
pub fn make_jump_example() -> CoefficientSet {
    CoefficientSet::builder("jump-neutral", 1)
        .neutral(|y, o| o[0] = 0.25 * y[0].sin())
        .drift(|x, y, o| o[0] = x[0] - x[0] * x[0] * x[0] + y[0].cos())
        .jump(|x, _, u, o| o[0] = u * x[0].abs().min(1.0))
        .kappa(0.25)
        .bound(BoundFunction::new("1 + r + r^3", |r| 1.0 + r + r * r * r))
        .build()
        .expect("jump-neutral is well formed")
}
