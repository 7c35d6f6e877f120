//! Bound functions, step-size gauges and truncated coefficients.
//!
//! For a step `Δ` the drift, diffusion and jump coefficients are evaluated at
//! states projected onto the ball of radius `r = f⁻¹(g(Δ))`, where `f`
//! dominates the coefficient magnitudes on centred balls and `g` is a
//! decreasing gauge. As a consequence `|b_Δ| ∨ ‖σ_Δ‖ ≤ g(Δ)` everywhere.
//! The neutral map `D` is never truncated.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CoefficientSet;
use crate::noise;

/// Relative slack used when checking the gauge inequalities, so that boundary
/// cases such as `Δ = 2⁻⁸, ε = 1/4` (where `Δ^{1/4} g(Δ) = 1` exactly) are
/// not rejected because of the last bit of `powf`.
const GAUGE_SLACK: f64 = 1e-12;

/// Relative tolerance of [`invert_bound`].
pub const INVERSE_TOLERANCE: f64 = 1e-12;

const MAX_DOUBLINGS: u32 = 1024;

/// Radially projects `x` onto the closed ball of radius `r`.
///
/// Returns `(|x| ∧ r) x / |x|`, with `x / |x| = 0` for `x = 0`.
pub fn truncate_point(x: &[f64], r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidRadius(r));
    }
    let mut out = vec![0.0; x.len()];
    project_into(x, r, &mut out);
    Ok(out)
}

/// In-place projection used on the hot path. `r` may be `+∞`.
///
/// Points inside the ball are copied unchanged, so the truncated and plain
/// schemes agree bit for bit while a path stays inside. Points outside land
/// on or just inside the sphere, which makes the projection idempotent.
#[inline]
pub(crate) fn project_into(x: &[f64], r: f64, out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    if x.len() == 1 {
        out[0] = if x[0].abs() <= r {
            x[0]
        } else {
            r.copysign(x[0])
        };
        return;
    }
    let norm = linalg::norm(x);
    if norm <= r {
        out.copy_from_slice(x);
        return;
    }
    let mut scale = r / norm;
    loop {
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * scale;
        }
        if linalg::norm(out) <= r || scale == 0.0 {
            break;
        }
        scale = scale.next_down();
    }
}

/// A strictly increasing continuous `f: [0, ∞) → [0, ∞)` dominating the
/// coefficient magnitudes on centred balls.
#[derive(Clone)]
pub struct BoundFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    declared_increasing: bool,
    label: String,
}

impl BoundFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            declared_increasing: true,
            label: label.into(),
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    /// `f(0)`, the lower end of the domain of `f⁻¹`.
    pub fn floor(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared_increasing(&self) -> bool {
        self.declared_increasing
    }

    pub fn invert(&self, v: f64) -> Result<f64> {
        invert_bound(self, v)
    }

    /// Checks `f(r₁) < f(r₂)` for consecutive sorted radii.
    pub fn is_strictly_increasing_on(&self, radii: &[f64]) -> bool {
        let mut sorted = radii.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        sorted.windows(2).all(|w| self.eval(w[0]) < self.eval(w[1]))
    }

    /// Numeric fallback for models without a closed-form bound.
    ///
    /// On the radii `r_i = i·r_max/n_radii` the coefficient magnitudes are
    /// sampled over points with `|x| ∨ |y| = r_i` (and over `marks` for jump
    /// models). The running maximum `M_i` is interpolated so that
    /// `f(r_i) = M_{i+1}`, making `f` dominate each shell it has sampled; a
    /// ramp `r·1e-9` enforces strict monotonicity. Past `r_max` the last
    /// slope (at least 1) is continued.
    ///
    /// This only guards against gross violations. It is not a certificate.
    pub fn sampled(
        set: &CoefficientSet,
        r_max: f64,
        n_radii: usize,
        samples_per_radius: usize,
        marks: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if !(r_max > 0.0) || n_radii == 0 || samples_per_radius == 0 {
            return Err(Error::InvalidParameter(
                "sampled bound needs r_max > 0 and positive sample counts".into(),
            ));
        }
        let n = set.state_dim();
        let mut rng = noise::stream_rng(seed, 0, noise::STREAM_BOUND);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut running = Vec::with_capacity(n_radii + 1);
        let mut current = set.coefficient_magnitude(&x, &y, marks);
        running.push(current);
        for i in 1..=n_radii {
            let r = r_max * i as f64 / n_radii as f64;
            for s in 0..samples_per_radius {
                random_direction(&mut rng, &mut x, r);
                let ry = r * rng.random::<f64>();
                random_direction(&mut rng, &mut y, ry);
                if s % 2 == 1 {
                    std::mem::swap(&mut x, &mut y);
                }
                current = current.max(set.coefficient_magnitude(&x, &y, marks));
            }
            running.push(current);
        }
        let step = r_max / n_radii as f64;
        let last_slope = ((running[n_radii] - running[n_radii - 1]) / step).max(1.0);
        let table: Arc<[f64]> = running.into();
        let f = move |r: f64| {
            let r = r.max(0.0);
            let pos = r / step;
            let base = if pos >= (n_radii - 1) as f64 {
                table[n_radii] + (r - (n_radii - 1) as f64 * step) * last_slope
            } else {
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                table[i + 1] + frac * (table[i + 2] - table[i + 1])
            };
            base + r * 1e-9
        };
        Ok(Self {
            eval: Arc::new(f),
            declared_increasing: true,
            label: format!("sampled(r_max = {r_max})"),
        })
    }
}

fn random_direction(rng: &mut impl Rng, out: &mut [f64], radius: f64) {
    loop {
        for v in out.iter_mut() {
            *v = rng.random::<f64>() * 2.0 - 1.0;
        }
        let norm = linalg::norm(out);
        if norm > 1e-3 && norm <= 1.0 {
            for v in out.iter_mut() {
                *v *= radius / norm;
            }
            return;
        }
    }
}

impl fmt::Debug for BoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundFunction")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Solves `f(r) = v` for `r ≥ 0`.
///
/// The bracket grows by doubling from `r = 1`, then bisection runs until
/// `|f(r) − v| ≤ max(1e-12, 1e-12·v)` or the bracket collapses to adjacent
/// floats.
pub fn invert_bound(f: &BoundFunction, v: f64) -> Result<f64> {
    let floor = f.floor();
    if !(v >= floor) {
        return Err(Error::BelowDomain { value: v, floor });
    }
    let tol = INVERSE_TOLERANCE.max(INVERSE_TOLERANCE * v.abs());
    if (floor - v).abs() <= tol {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut doublings = 0;
    while f.eval(hi) < v {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::UnboundedSearch(v));
        }
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f.eval(mid);
        if (fm - v).abs() <= tol {
            return Ok(mid);
        }
        if fm < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (f.eval(lo) - v).abs() <= (f.eval(hi) - v).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

/// Which noise the gauge is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaugeMode {
    /// `Δ^{1/4} g(Δ) ≤ 1`.
    Brownian,
    /// `Δ^{1/4} g(Δ)^p ≤ 1` with moment exponent `p ≥ 2`.
    Jump { p: f64 },
}

impl GaugeMode {
    pub fn is_jump(&self) -> bool {
        matches!(self, GaugeMode::Jump { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GaugeMode::Brownian => "brownian",
            GaugeMode::Jump { .. } => "jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GaugeKind {
    Power { exponent: f64 },
    Table(Arc<[(f64, f64)]>),
}

/// A validated gauge value `g(Δ)` together with the rule that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeValue {
    delta: f64,
    g: f64,
    mode: GaugeMode,
    kind: GaugeKind,
}

impl GaugeValue {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn mode(&self) -> GaugeMode {
        self.mode
    }

    /// The power-law exponent, if this is a power gauge.
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            GaugeKind::Power { exponent } => Some(exponent),
            GaugeKind::Table(_) => None,
        }
    }

    /// Evaluates the same gauge at another step size, without validation.
    fn eval_at(&self, delta: f64) -> Option<f64> {
        match &self.kind {
            GaugeKind::Power { exponent } => Some(delta.powf(-exponent)),
            GaugeKind::Table(t) => lookup(t, delta),
        }
    }
}

fn lookup(table: &[(f64, f64)], delta: f64) -> Option<f64> {
    table
        .iter()
        .find(|(d, _)| (d - delta).abs() <= 1e-12 * delta)
        .map(|&(_, g)| g)
}

fn check_gauge(delta: f64, g: f64, mode: GaugeMode) -> Result<()> {
    if !(g >= 1.0) {
        return Err(Error::InadmissibleGauge {
            constraint: "g(Δ) ≥ 1",
            value: g,
        });
    }
    match mode {
        GaugeMode::Brownian => {
            let value = delta.powf(0.25) * g;
            if value > 1.0 + GAUGE_SLACK {
                return Err(Error::InadmissibleGauge {
                    constraint: "Δ^{1/4}·g(Δ) ≤ 1",
                    value,
                });
            }
        }
        GaugeMode::Jump { p } => {
            if !(p >= 2.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "jump gauge exponent p = {p} must be finite and ≥ 2"
                )));
            }
            let value = delta.powf(0.25) * g.powf(p);
            if value > 1.0 + GAUGE_SLACK {
                return Err(Error::InadmissibleGauge {
                    constraint: "Δ^{1/4}·g(Δ)^p ≤ 1",
                    value,
                });
            }
        }
    }
    Ok(())
}

fn check_step(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step Δ = {delta} must lie in (0, 1]"
        )))
    }
}

/// The power gauge `g(Δ) = Δ^{−ε}`, validated for `mode`.
pub fn power_gauge(delta: f64, epsilon: f64, mode: GaugeMode) -> Result<GaugeValue> {
    check_step(delta)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gauge exponent ε = {epsilon} must be finite and > 0"
        )));
    }
    let g = delta.powf(-epsilon);
    check_gauge(delta, g, mode)?;
    Ok(GaugeValue {
        delta,
        g,
        mode,
        kind: GaugeKind::Power { exponent: epsilon },
    })
}

/// A user-supplied gauge given as `(Δ, g(Δ))` pairs.
///
/// The table must be strictly decreasing in `g` as `Δ` increases, and `delta`
/// must appear in it.
pub fn table_gauge(delta: f64, table: &[(f64, f64)], mode: GaugeMode) -> Result<GaugeValue> {
    check_step(delta)?;
    let mut sorted = table.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted
        .windows(2)
        .any(|w| !(w[0].0 < w[1].0 && w[0].1 > w[1].1))
    {
        return Err(Error::InvalidParameter(
            "gauge table must be strictly decreasing in Δ".into(),
        ));
    }
    let g = lookup(&sorted, delta).ok_or_else(|| {
        Error::InvalidParameter(format!("step Δ = {delta} is not in the gauge table"))
    })?;
    check_gauge(delta, g, mode)?;
    Ok(GaugeValue {
        delta,
        g,
        mode,
        kind: GaugeKind::Table(sorted.into()),
    })
}

/// Step size, gauge value and the resulting truncation radius.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRule {
    gauge: GaugeValue,
    radius: f64,
    delta_star: Option<f64>,
    admissible: bool,
}

impl TruncationRule {
    /// Builds the rule for `gauge` with radius `r = f⁻¹(g(Δ))`.
    pub fn new(bound: &BoundFunction, gauge: GaugeValue) -> Result<Self> {
        let radius = invert_bound(bound, gauge.g)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(Self {
            gauge,
            radius,
            delta_star: None,
            admissible: true,
        })
    }

    /// Power-gauge rule using the model's own bound function.
    pub fn power(set: &CoefficientSet, delta: f64, epsilon: f64, mode: GaugeMode) -> Result<Self> {
        let bound = set.bound().ok_or_else(|| {
            Error::InvalidParameter(format!("model `{}` has no bound function", set.name()))
        })?;
        Self::new(bound, power_gauge(delta, epsilon, mode)?)
    }

    /// A diagnostic rule with an explicit radius. No gauge constraint is
    /// checked; `g` is reported as `f(radius)`.
    pub fn with_radius(
        bound: &BoundFunction,
        delta: f64,
        radius: f64,
        mode: GaugeMode,
    ) -> Result<Self> {
        check_step(delta)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidRadius(radius));
        }
        let g = bound.eval(radius);
        Ok(Self {
            gauge: GaugeValue {
                delta,
                g,
                mode,
                kind: GaugeKind::Table(vec![(delta, g)].into()),
            },
            radius,
            delta_star: None,
            admissible: false,
        })
    }

    /// Restricts the gauge to `(0, Δ*]` with `f(2) ≤ g(Δ*)`, the setting in
    /// which the truncated coefficients inherit the Khasminskii bound of the
    /// untruncated ones when `D ≡ 0`.
    pub fn with_delta_star(mut self, bound: &BoundFunction, delta_star: f64) -> Result<Self> {
        if !(delta_star >= self.gauge.delta && delta_star <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Δ* = {delta_star} must lie in [Δ, 1]"
            )));
        }
        let g_star = self.gauge.eval_at(delta_star).ok_or_else(|| {
            Error::InvalidParameter(format!("gauge is not defined at Δ* = {delta_star}"))
        })?;
        if bound.eval(2.0) > g_star {
            return Err(Error::InadmissibleGauge {
                constraint: "f(2) ≤ g(Δ*)",
                value: bound.eval(2.0),
            });
        }
        self.delta_star = Some(delta_star);
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.gauge.delta
    }

    pub fn g(&self) -> f64 {
        self.gauge.g
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mode(&self) -> GaugeMode {
        self.gauge.mode
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.gauge.exponent()
    }

    pub fn delta_star(&self) -> Option<f64> {
        self.delta_star
    }

    /// False for rules built by [`TruncationRule::with_radius`].
    pub fn is_admissible(&self) -> bool {
        self.admissible
    }
}

/// A coefficient set whose `b`, `σ` and `h` are pre-composed with the radial
/// projection. With an infinite radius this is the plain (untruncated) model.
#[derive(Debug, Clone)]
pub struct TruncatedCoefficients {
    set: Arc<CoefficientSet>,
    radius: f64,
    rule: Option<TruncationRule>,
}

/// Truncates `set` according to `rule`.
pub fn truncated_coefficients(
    set: &Arc<CoefficientSet>,
    rule: &TruncationRule,
) -> Result<TruncatedCoefficients> {
    match (rule.mode().is_jump(), set.is_jump()) {
        (false, true) => Err(Error::ModeMismatch(format!(
            "brownian gauge applied to jump model `{}`",
            set.name()
        ))),
        (true, false) => Err(Error::ModeMismatch(format!(
            "jump gauge applied to brownian model `{}`",
            set.name()
        ))),
        _ => Ok(TruncatedCoefficients {
            set: Arc::clone(set),
            radius: rule.radius(),
            rule: Some(rule.clone()),
        }),
    }
}

impl TruncatedCoefficients {
    /// The identity truncation, `r = ∞`.
    pub fn untruncated(set: &Arc<CoefficientSet>) -> Self {
        Self {
            set: Arc::clone(set),
            radius: f64::INFINITY,
            rule: None,
        }
    }

    pub fn set(&self) -> &Arc<CoefficientSet> {
        &self.set
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rule(&self) -> Option<&TruncationRule> {
        self.rule.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.set.state_dim()
    }

    #[inline]
    pub fn project(&self, x: &[f64], out: &mut [f64]) {
        project_into(x, self.radius, out);
    }

    /// `D(y)`, never truncated.
    #[inline]
    pub fn neutral(&self, y: &[f64], out: &mut [f64]) {
        self.set.neutral(y, out);
    }

    /// `b_Δ(x, y)`.
    pub fn drift(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (xp, yp) = self.projected(x, y);
        let mut out = vec![0.0; self.state_dim()];
        self.set.drift(&xp, &yp, &mut out);
        out
    }

    /// `σ_Δ(x, y)` as a row-major `n × d` matrix, if the model has one.
    pub fn diffusion(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        let (xp, yp) = self.projected(x, y);
        let mut out = vec![0.0; self.state_dim() * self.set.noise_dim()];
        self.set.diffusion(&xp, &yp, &mut out).then_some(out)
    }

    /// `h_Δ(x, y, u)`, if the model has a jump map. The mark is untouched.
    pub fn jump(&self, x: &[f64], y: &[f64], u: f64) -> Option<Vec<f64>> {
        let (xp, yp) = self.projected(x, y);
        let mut out = vec![0.0; self.state_dim()];
        self.set.jump(&xp, &yp, u, &mut out).then_some(out)
    }

    fn projected(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut xp = vec![0.0; x.len()];
        let mut yp = vec![0.0; y.len()];
        self.project(x, &mut xp);
        self.project(y, &mut yp);
        (xp, yp)
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3f64, 1..4)
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(x in vec3(), r in 1e-3..50.0f64) {
            let once = truncate_point(&x, r).unwrap();
            let twice = truncate_point(&once, r).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn projection_norm_is_min(x in vec3(), r in 1e-3..50.0f64) {
            let y = truncate_point(&x, r).unwrap();
            let want = linalg::norm(&x).min(r);
            prop_assert!((linalg::norm(&y) - want).abs() <= 1e-12 * want.max(1.0));
        }

        #[test]
        fn gauge_and_radius_monotone(k1 in 2u32..20, k2 in 2u32..20, eps in 0.01..0.25f64) {
            let (lo, hi) = (k1.min(k2), k1.max(k2));
            let set = crate::model::make_example_b();
            let fine = TruncationRule::power(&set, 2f64.powi(-(hi as i32)), eps, GaugeMode::Brownian).unwrap();
            let coarse = TruncationRule::power(&set, 2f64.powi(-(lo as i32)), eps, GaugeMode::Brownian).unwrap();
            prop_assert!(fine.g() >= coarse.g());
            prop_assert!(fine.radius() >= coarse.radius());
        }

        #[test]
        fn inverse_is_two_sided(v in 1.0..1e6f64) {
            let set = crate::model::make_example_b();
            let f = set.bound().unwrap();
            let r = invert_bound(f, v).unwrap();
            prop_assert!((f.eval(r) - v).abs() <= INVERSE_TOLERANCE.max(INVERSE_TOLERANCE * v) * 4.0);
        }
    }
}
