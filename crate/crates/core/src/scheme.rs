//! The truncated Euler–Maruyama stepper for Brownian-driven models.
//!
//! One step reads
//!
//! ```text
//! y_{k+1} = D(y_{k+1-m}) + [y_k - D(y_{k-m})] + b_Δ(y_k, y_{k-m})·Δ + σ_Δ(y_k, y_{k-m})·ΔW_k
//! ```
//!
//! and is evaluated in difference form: `z = y_k − D(y_{k−m})`,
//! `z' = (z + b_Δ·Δ) + σ_Δ·ΔW`, `y_{k+1} = z' + D(y_{k+1−m})`. Values are
//! produced at grid times only.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, InitialSegment};
use crate::noise::{coarsen, BrownianGrid};
use crate::truncation::{
    project_into, truncated_coefficients, TruncatedCoefficients, TruncationRule,
};

/// A commensurable grid: `Δ = τ/m = T/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    horizon: f64,
    m: usize,
    steps: usize,
    delta: f64,
}

impl TimeGrid {
    /// Grid with `Δ = τ/m`; `T` must be an integer multiple of `Δ`.
    pub fn new(tau: f64, horizon: f64, m: usize) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delay τ = {tau} must be > 0"
            )));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon T = {horizon} must be ≥ 0"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "m must be a positive integer".into(),
            ));
        }
        let delta = tau / m as f64;
        let ratio = horizon / delta;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "T = {horizon} is not an integer multiple of Δ = τ/m = {delta}"
            )));
        }
        Ok(Self {
            tau,
            horizon,
            m,
            steps: steps as usize,
            delta,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Steps per delay, `m = τ/Δ`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Steps to the horizon, `M = T/Δ`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `t_k = kΔ` for `k = −m..=M`.
    pub fn time(&self, k: i64) -> f64 {
        k as f64 * self.delta
    }
}

/// Ring buffer of the last `m + 1` values `y_{k−m}..y_k` together with their
/// neutral images `D(y_j)`.
#[derive(Debug, Clone)]
pub struct DelayState {
    m: usize,
    dim: usize,
    k: i64,
    /// Slot holding `y_k`.
    head: usize,
    values: Vec<f64>,
    neutral: Vec<f64>,
}

impl DelayState {
    /// Seeds the buffer with `y_{−m}..y_0` (flattened, `(m + 1)·n` values).
    pub fn new(set: &CoefficientSet, m: usize, initial: &[f64]) -> Result<Self> {
        let dim = set.state_dim();
        if m == 0 || initial.len() != (m + 1) * dim {
            return Err(Error::InvalidParameter(format!(
                "initial buffer needs {} values, got {}",
                (m + 1) * dim,
                initial.len()
            )));
        }
        let mut neutral = vec![0.0; initial.len()];
        for (y, d) in initial.chunks_exact(dim).zip(neutral.chunks_exact_mut(dim)) {
            set.neutral(y, d);
        }
        Ok(Self {
            m,
            dim,
            k: 0,
            head: m,
            values: initial.to_vec(),
            neutral,
        })
    }

    /// Current index `k`.
    pub fn index(&self) -> i64 {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn slot(&self, j: i64) -> usize {
        let back = (self.k - j) as usize;
        debug_assert!(
            back <= self.m,
            "index {j} outside the buffer at k = {}",
            self.k
        );
        (self.head + self.m + 1 - back) % (self.m + 1)
    }

    /// `y_j` for `k − m ≤ j ≤ k`.
    #[inline]
    pub fn value(&self, j: i64) -> &[f64] {
        let s = self.slot(j) * self.dim;
        &self.values[s..s + self.dim]
    }

    /// `D(y_j)` for `k − m ≤ j ≤ k`.
    #[inline]
    pub fn neutral_value(&self, j: i64) -> &[f64] {
        let s = self.slot(j) * self.dim;
        &self.neutral[s..s + self.dim]
    }

    /// `y_k`.
    pub fn current(&self) -> &[f64] {
        self.value(self.k)
    }

    /// `y_{k−m}`, the value standing in for `Ȳ(t − τ)`.
    pub fn delayed(&self) -> &[f64] {
        self.value(self.k - self.m as i64)
    }

    /// Appends `y_{k+1}`, dropping `y_{k−m}`.
    pub fn push(&mut self, set: &CoefficientSet, y: &[f64]) {
        let next = (self.head + 1) % (self.m + 1);
        let s = next * self.dim;
        self.values[s..s + self.dim].copy_from_slice(y);
        set.neutral(y, &mut self.neutral[s..s + self.dim]);
        self.head = next;
        self.k += 1;
    }
}

/// Scratch space for one stepping loop.
pub(crate) struct Workspace {
    xp: Vec<f64>,
    yp: Vec<f64>,
    drift: Vec<f64>,
    pub(crate) buf: Vec<f64>,
    z: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize, d: usize) -> Self {
        Self {
            xp: vec![0.0; n],
            yp: vec![0.0; n],
            drift: vec![0.0; n],
            buf: vec![0.0; (n * d).max(n)],
            z: vec![0.0; n],
        }
    }
}

/// Computes `y_{k+1}` into `out`. `noise` receives the projected states and
/// `z + b_Δ·Δ` and must add its increment to the latter in place.
pub(crate) fn step_kernel(
    state: &DelayState,
    coeffs: &TruncatedCoefficients,
    delta: f64,
    ws: &mut Workspace,
    out: &mut [f64],
    noise: impl FnOnce(&[f64], &[f64], &mut [f64], &mut Vec<f64>),
) -> Result<()> {
    let set = coeffs.set();
    let k = state.index();
    let m = state.m() as i64;
    let x = state.current();
    let y = state.delayed();
    project_into(x, coeffs.radius(), &mut ws.xp);
    project_into(y, coeffs.radius(), &mut ws.yp);
    set.drift(&ws.xp, &ws.yp, &mut ws.drift);
    let d_old = state.neutral_value(k - m);
    for i in 0..ws.z.len() {
        ws.z[i] = (x[i] - d_old[i]) + ws.drift[i] * delta;
    }
    noise(&ws.xp, &ws.yp, &mut ws.z, &mut ws.buf);
    let d_new = state.neutral_value(k + 1 - m);
    for i in 0..out.len() {
        out[i] = ws.z[i] + d_new[i];
    }
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup {
            step: k + 1,
            level: None,
            path: None,
        })
    }
}

fn brownian_kernel(
    state: &DelayState,
    coeffs: &TruncatedCoefficients,
    delta: f64,
    dw: &[f64],
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<()> {
    let set = coeffs.set();
    let d = set.noise_dim();
    step_kernel(state, coeffs, delta, ws, out, |xp, yp, z, buf| {
        set.diffusion(xp, yp, buf);
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &buf[i * d..(i + 1) * d];
            let mut acc = row[0] * dw[0];
            for j in 1..d {
                acc += row[j] * dw[j];
            }
            *zi += acc;
        }
    })
}

/// One step from `state` with increment `dw`; returns `y_{k+1}`.
pub fn step(
    state: &DelayState,
    coeffs: &TruncatedCoefficients,
    delta: f64,
    dw: &[f64],
) -> Result<Vec<f64>> {
    let set = coeffs.set();
    if set.is_jump() {
        return Err(Error::ModeMismatch(format!(
            "`{}` is jump-driven; use the jump stepper",
            set.name()
        )));
    }
    if dw.len() != set.noise_dim() {
        return Err(Error::InvalidIncrement {
            expected: set.noise_dim(),
            got: dw.len(),
        });
    }
    let n = set.state_dim();
    let mut ws = Workspace::new(n, set.noise_dim());
    let mut out = vec![0.0; n];
    brownian_kernel(state, coeffs, delta, dw, &mut ws, &mut out)?;
    Ok(out)
}

/// Grid values `y_k`, `k = −m..=M`, and the data needed to re-derive them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    radius: f64,
    rule: Option<TruncationRule>,
    seed: u64,
    path_index: u64,
    jumps_per_interval: Option<Vec<usize>>,
}

impl PathRecord {
    pub(crate) fn new(
        grid: TimeGrid,
        dim: usize,
        values: Vec<f64>,
        coeffs: &TruncatedCoefficients,
        seed: u64,
        path_index: u64,
    ) -> Self {
        Self {
            grid,
            dim,
            values,
            radius: coeffs.radius(),
            rule: coeffs.rule().cloned(),
            seed,
            path_index,
            jumps_per_interval: None,
        }
    }

    pub(crate) fn with_jump_counts(mut self, counts: Vec<usize>) -> Self {
        self.jumps_per_interval = Some(counts);
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation radius used, `∞` for the untruncated scheme.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rule(&self) -> Option<&TruncationRule> {
        self.rule.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// Jumps applied in `(t_k, t_{k+1}]`, for jump-driven paths.
    pub fn jumps_per_interval(&self) -> Option<&[usize]> {
        self.jumps_per_interval.as_deref()
    }

    /// `y_k` for `−m ≤ k ≤ M`.
    pub fn value(&self, k: i64) -> &[f64] {
        let j = (k + self.grid.m as i64) as usize;
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// All grid values from `k = −m`, flattened.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `y_M = Y(T)`.
    pub fn terminal(&self) -> &[f64] {
        self.value(self.grid.steps as i64)
    }

    /// The step interpolant `Ȳ(t) = y_k` for `t ∈ [t_k, t_{k+1})`, `t ∈ [−τ, T]`.
    pub fn interpolant(&self, t: f64) -> Result<&[f64]> {
        let lo = -self.grid.tau;
        if !(t >= lo && t <= self.grid.horizon) {
            return Err(Error::InvalidParameter(format!(
                "t = {t} outside [−τ, T] = [{lo}, {}]",
                self.grid.horizon
            )));
        }
        let mut k = (t / self.grid.delta).floor() as i64;
        // Guard against t/Δ rounding just below an integer.
        if self.grid.time(k + 1) <= t {
            k += 1;
        }
        let k = k.clamp(-(self.grid.m as i64), self.grid.steps as i64);
        Ok(self.value(k))
    }

    /// `max_k |y_k|` over `k = −m..=M`.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .map(crate::linalg::norm)
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_delta(rule_delta: f64, grid: &TimeGrid) -> Result<()> {
    if (rule_delta - grid.delta).abs() > 1e-12 * grid.delta {
        return Err(Error::GridMismatch(format!(
            "rule step Δ = {rule_delta} differs from grid step {}",
            grid.delta
        )));
    }
    Ok(())
}

/// Brings `noise` to the grid step by exact coarsening.
fn noise_on_grid(noise: &BrownianGrid, grid: &TimeGrid, d: usize) -> Result<BrownianGrid> {
    if noise.dim() != d {
        return Err(Error::InvalidIncrement {
            expected: d,
            got: noise.dim(),
        });
    }
    if (noise.horizon() - grid.horizon).abs() > 1e-12 * grid.horizon {
        return Err(Error::GridMismatch(format!(
            "noise covers [0, {}] but the grid ends at T = {}",
            noise.horizon(),
            grid.horizon
        )));
    }
    if noise.steps() % grid.steps != 0 {
        return Err(Error::GridMismatch(format!(
            "Δ = {} is not a multiple of the noise step {}",
            grid.delta,
            noise.step_size()
        )));
    }
    coarsen(noise, noise.steps() / grid.steps)
}

/// Runs the scheme for already truncated coefficients.
pub(crate) fn simulate_coefficients(
    coeffs: &TruncatedCoefficients,
    grid: &TimeGrid,
    xi: &InitialSegment,
    noise: &BrownianGrid,
) -> Result<PathRecord> {
    let set = coeffs.set();
    if set.is_jump() {
        return Err(Error::ModeMismatch(format!(
            "`{}` is jump-driven; use simulate_jump",
            set.name()
        )));
    }
    let n = set.state_dim();
    if xi.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "initial segment has dimension {}, model has {n}",
            xi.dim()
        )));
    }
    if (xi.tau() - grid.tau).abs() > 1e-12 * grid.tau {
        return Err(Error::GridMismatch(format!(
            "initial segment delay {} differs from grid delay {}",
            xi.tau(),
            grid.tau
        )));
    }
    let m = grid.m;
    let mut values = xi.sample_grid(m)?;
    if grid.steps == 0 {
        return Ok(PathRecord::new(
            *grid,
            n,
            values,
            coeffs,
            noise.seed(),
            noise.path_index(),
        ));
    }
    let coarse = noise_on_grid(noise, grid, set.noise_dim())?;
    let mut state = DelayState::new(set, m, &values)?;
    values.reserve(grid.steps * n);
    let mut ws = Workspace::new(n, set.noise_dim());
    let mut next = vec![0.0; n];
    for k in 0..grid.steps {
        brownian_kernel(
            &state,
            coeffs,
            grid.delta,
            coarse.increment(k),
            &mut ws,
            &mut next,
        )?;
        state.push(set, &next);
        values.extend_from_slice(&next);
    }
    Ok(PathRecord::new(
        *grid,
        n,
        values,
        coeffs,
        noise.seed(),
        noise.path_index(),
    ))
}

/// Truncated scheme for `set` under `rule`, driven by `noise` coarsened to
/// the grid step.
pub fn simulate(
    set: &Arc<CoefficientSet>,
    rule: &TruncationRule,
    grid: &TimeGrid,
    xi: &InitialSegment,
    noise: &BrownianGrid,
) -> Result<PathRecord> {
    if rule.mode().is_jump() {
        return Err(Error::ModeMismatch(
            "simulate needs a brownian-mode rule".into(),
        ));
    }
    check_delta(rule.delta(), grid)?;
    let coeffs = truncated_coefficients(set, rule)?;
    simulate_coefficients(&coeffs, grid, xi, noise)
}

/// Plain Euler–Maruyama: the same recursion with raw coefficients.
pub fn simulate_untruncated(
    set: &Arc<CoefficientSet>,
    grid: &TimeGrid,
    xi: &InitialSegment,
    noise: &BrownianGrid,
) -> Result<PathRecord> {
    simulate_coefficients(&TruncatedCoefficients::untruncated(set), grid, xi, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_additive_noise, make_example_b};
    use crate::noise::sample_brownian;
    use crate::truncation::GaugeMode;
    use proptest::prelude::*;

    fn frozen() -> Arc<CoefficientSet> {
        Arc::new(
            CoefficientSet::builder("frozen", 1)
                .drift(|_, _, o| o[0] = 0.0)
                .diffusion(1, |_, _, o| o[0] = 0.0)
                .kappa(0.5)
                .build()
                .unwrap(),
        )
    }

    fn constant_drift(c: f64) -> Arc<CoefficientSet> {
        Arc::new(
            CoefficientSet::builder("constant", 1)
                .drift(move |_, _, o| o[0] = c)
                .diffusion(1, |_, _, o| o[0] = 0.0)
                .kappa(0.5)
                .build()
                .unwrap(),
        )
    }

    #[test]
    fn grid_commensurability() {
        let g = TimeGrid::new(1.0, 2.0, 8).unwrap();
        assert_eq!(g.steps(), 16);
        assert_eq!(g.delta(), 0.125);
        assert!(matches!(
            TimeGrid::new(1.0, 2.1, 8),
            Err(Error::GridMismatch(_))
        ));
        assert_eq!(TimeGrid::new(1.0, 0.0, 4).unwrap().steps(), 0);
    }

    #[test]
    fn ring_buffer_lookups() {
        let set = make_example_b();
        let init: Vec<f64> = (0..4).map(|v| v as f64).collect();
        let mut st = DelayState::new(&set, 3, &init).unwrap();
        assert_eq!(st.current(), &[3.0]);
        assert_eq!(st.delayed(), &[0.0]);
        st.push(&set, &[10.0]);
        assert_eq!(st.index(), 1);
        assert_eq!(st.current(), &[10.0]);
        assert_eq!(st.delayed(), &[1.0]);
        assert_eq!(st.value(-1), &[2.0]);
        assert_eq!(st.neutral_value(1), &[0.5 * 10f64.sin()]);
    }

    #[test]
    fn frozen_dynamics() {
        let set = frozen();
        let coeffs = TruncatedCoefficients::untruncated(&set);
        let st = DelayState::new(&set, 2, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(step(&st, &coeffs, 0.1, &[0.7]).unwrap(), vec![3.0]);
    }

    #[test]
    fn constant_drift_is_forward_euler() {
        let set = constant_drift(2.0);
        let coeffs = TruncatedCoefficients::untruncated(&set);
        let st = DelayState::new(&set, 1, &[0.0, 1.0]).unwrap();
        assert_eq!(step(&st, &coeffs, 0.25, &[0.3]).unwrap(), vec![1.5]);
    }

    #[test]
    fn example_b_hand_step() {
        let set = Arc::new(make_example_b());
        let rule = TruncationRule::with_radius(set.bound().unwrap(), 0.5, 2.0, GaugeMode::Brownian)
            .unwrap();
        let coeffs = truncated_coefficients(&set, &rule).unwrap();
        let st = DelayState::new(&set, 2, &[1.0, 1.0, 1.0]).unwrap();
        let y = step(&st, &coeffs, 0.5, &[0.0]).unwrap()[0];
        assert!((y - (1.0 + 1f64.cos() / 2.0)).abs() < 1e-15);
        assert!((y - 1.2701512).abs() < 1e-7);
    }

    #[test]
    fn wrong_increment_dimension() {
        let set = frozen();
        let coeffs = TruncatedCoefficients::untruncated(&set);
        let st = DelayState::new(&set, 1, &[0.0, 0.0]).unwrap();
        assert!(matches!(
            step(&st, &coeffs, 0.1, &[0.0, 0.0]),
            Err(Error::InvalidIncrement {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn empty_horizon_keeps_initial_segment() {
        let set = Arc::new(make_example_b());
        let grid = TimeGrid::new(1.0, 0.0, 4).unwrap();
        let xi = InitialSegment::constant(1.0, vec![0.5]).unwrap();
        let noise = sample_brownian(1, 0, 1.0, 0.25, 1).unwrap();
        let rec = simulate_untruncated(&set, &grid, &xi, &noise).unwrap();
        assert_eq!(rec.values(), &[0.5; 5]);
    }

    #[test]
    fn constancy_and_determinism() {
        let set = frozen();
        let grid = TimeGrid::new(1.0, 2.0, 8).unwrap();
        let xi = InitialSegment::constant(1.0, vec![5.0]).unwrap();
        let noise = sample_brownian(3, 0, 2.0, 1.0 / 64.0, 1).unwrap();
        let rec = simulate_untruncated(&set, &grid, &xi, &noise).unwrap();
        assert!(rec.values().iter().all(|&v| v == 5.0));

        let set = Arc::new(make_example_b());
        let rule = TruncationRule::power(&set, 0.125, 0.05, GaugeMode::Brownian).unwrap();
        let a = simulate(&set, &rule, &grid, &xi, &noise).unwrap();
        let b = simulate(&set, &rule, &grid, &xi, &noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_mismatch_on_incommensurable_noise() {
        let set = Arc::new(make_example_b());
        let grid = TimeGrid::new(1.0, 2.0, 8).unwrap();
        let xi = InitialSegment::constant(1.0, vec![0.5]).unwrap();
        let noise = sample_brownian(3, 0, 2.0, 2.0 / 24.0, 1).unwrap();
        assert!(matches!(
            simulate_untruncated(&set, &grid, &xi, &noise),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn untruncated_blows_up_where_truncated_stays_finite() {
        let set = Arc::new(make_example_b());
        let grid = TimeGrid::new(1.0, 2.0, 4).unwrap();
        let xi = InitialSegment::constant(1.0, vec![10.0]).unwrap();
        let noise = sample_brownian(1, 0, 2.0, 0.25, 1).unwrap();
        let err = simulate_untruncated(&set, &grid, &xi, &noise).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { .. }), "{err:?}");
        let rule = TruncationRule::power(&set, 0.25, 0.25, GaugeMode::Brownian).unwrap();
        let rec = simulate(&set, &rule, &grid, &xi, &noise).unwrap();
        assert!(rec.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn additive_noise_is_exact_across_levels() {
        let set = Arc::new(make_additive_noise());
        let xi = InitialSegment::constant(1.0, vec![1.0]).unwrap();
        let noise = sample_brownian(8, 2, 2.0, 2.0 / 512.0, 1).unwrap();
        let want = 1.0 + noise.terminal()[0];
        for m in [8, 16, 32, 256] {
            let grid = TimeGrid::new(1.0, 2.0, m).unwrap();
            let rec = simulate_untruncated(&set, &grid, &xi, &noise).unwrap();
            assert_eq!(rec.terminal()[0], want, "m = {m}");
        }
    }

    #[test]
    fn interpolant_is_right_continuous() {
        let set = constant_drift(1.0);
        let grid = TimeGrid::new(1.0, 1.0, 4).unwrap();
        let xi = InitialSegment::constant(1.0, vec![0.0]).unwrap();
        let noise = sample_brownian(0, 0, 1.0, 0.25, 1).unwrap();
        let rec = simulate_untruncated(&set, &grid, &xi, &noise).unwrap();
        assert_eq!(rec.interpolant(0.25).unwrap(), &[0.25]);
        assert_eq!(rec.interpolant(0.49).unwrap(), &[0.25]);
        assert_eq!(rec.interpolant(0.5).unwrap(), &[0.5]);
        assert_eq!(rec.interpolant(1.0).unwrap(), &[1.0]);
        assert_eq!(rec.interpolant(-1.0).unwrap(), &[0.0]);
        assert!(rec.interpolant(1.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn telescoping_identity(seed in any::<u64>(), x0 in -2.0f64..2.0) {
            let set = Arc::new(make_example_b());
            let grid = TimeGrid::new(1.0, 2.0, 8).unwrap();
            let rule = TruncationRule::power(&set, grid.delta(), 0.25, GaugeMode::Brownian).unwrap();
            let coeffs = truncated_coefficients(&set, &rule).unwrap();
            let xi = InitialSegment::constant(1.0, vec![x0]).unwrap();
            let noise = sample_brownian(seed, 0, 2.0, grid.delta(), 1).unwrap();
            let rec = simulate(&set, &rule, &grid, &xi, &noise).unwrap();
            let m = grid.m() as i64;
            let dl = grid.delta();
            for k in 0..grid.steps() as i64 {
                let yk = rec.value(k)[0];
                let ykm = rec.value(k - m)[0];
                let z = yk - 0.5 * ykm.sin();
                let b = coeffs.drift(&[yk], &[ykm])[0];
                let s = coeffs.diffusion(&[yk], &[ykm]).unwrap()[0];
                let want = (z + b * dl) + s * noise.increment(k as usize)[0] + 0.5 * rec.value(k + 1 - m)[0].sin();
                prop_assert_eq!(rec.value(k + 1)[0], want);
            }
        }

        #[test]
        fn consistency_with_plain_scheme(seed in any::<u64>()) {
            let set = Arc::new(make_example_b());
            let grid = TimeGrid::new(1.0, 2.0, 64).unwrap();
            let xi = InitialSegment::constant(1.0, vec![0.5]).unwrap();
            let noise = sample_brownian(seed, 0, 2.0, grid.delta(), 1).unwrap();
            let plain = simulate_untruncated(&set, &grid, &xi, &noise).unwrap();
            let r = plain.sup_norm() * 1.01;
            let rule = TruncationRule::with_radius(set.bound().unwrap(), grid.delta(), r, GaugeMode::Brownian).unwrap();
            let trunc = simulate(&set, &rule, &grid, &xi, &noise).unwrap();
            prop_assert_eq!(plain.values(), trunc.values());
        }
    }
}
