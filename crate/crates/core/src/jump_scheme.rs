//! The truncated Euler–Maruyama stepper for models driven by a compensated
//! Poisson random measure.
//!
//! ```text
//! y_{k+1} = D(y_{k+1-m}) + [y_k - D(y_{k-m})] + b_Δ(y_k, y_{k-m})·Δ
//!           + Σ_i h_Δ(y_k, y_{k-m}, u_i) - Δ·∫ h_Δ(y_k, y_{k-m}, u) λ(du)
//! ```
//!
//! The sum runs over the jumps with times in `(t_k, t_{k+1}]`. All jumps in an
//! interval see the left-endpoint state, matching `Ȳ(s) = y_k` on
//! `[t_k, t_{k+1})`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, InitialSegment};
use crate::noise::{JumpRealization, MarkMeasure};
use crate::scheme::{check_delta, step_kernel, DelayState, PathRecord, TimeGrid, Workspace};
use crate::truncation::{
    project_into, truncated_coefficients, TruncatedCoefficients, TruncationRule,
};

/// `∫ h(x, y, u) λ(du)` evaluated at already projected `(x, y)`.
pub type ClosedFormCompensator = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Method {
    ClosedForm(ClosedFormCompensator),
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

/// Evaluates the compensator integral, either in closed form or with a fixed
/// quadrature rule whose weights sum to `λ̄`.
#[derive(Clone)]
pub struct CompensatorOracle {
    method: Method,
    intensity: f64,
}

impl fmt::Debug for CompensatorOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("CompensatorOracle");
        s.field("method", &self.method_name())
            .field("intensity", &self.intensity);
        if let Method::Quadrature { nodes, .. } = &self.method {
            s.field("nodes", &nodes.len());
        }
        s.finish()
    }
}

impl CompensatorOracle {
    /// A model-supplied closed form. `f` receives projected states.
    pub fn closed_form(
        intensity: f64,
        f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidIntensity(intensity));
        }
        Ok(Self {
            method: Method::ClosedForm(Arc::new(f)),
            intensity,
        })
    }

    /// Explicit nodes and nonnegative weights summing to `intensity`.
    pub fn from_nodes(intensity: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidIntensity(intensity));
        }
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidParameter(
                "quadrature needs matching, nonempty nodes and weights".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || nodes.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidParameter(
                "quadrature weights must be ≥ 0 and nodes finite".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - intensity).abs() > 1e-12 * intensity.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!(
                "quadrature weights sum to {total}, expected λ̄ = {intensity}"
            )));
        }
        Ok(Self {
            method: Method::Quadrature { nodes, weights },
            intensity,
        })
    }

    /// Gauss quadrature matched to the mark law of `measure`.
    pub fn quadrature(measure: &MarkMeasure, nodes: usize) -> Result<Self> {
        let (u, w) = measure.quadrature(nodes);
        Self::from_nodes(measure.intensity(), u, w)
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// `closed-form` or `quadrature`.
    pub fn method_name(&self) -> &'static str {
        match self.method {
            Method::ClosedForm(_) => "closed-form",
            Method::Quadrature { .. } => "quadrature",
        }
    }

    /// Quadrature nodes and weights, if any.
    pub fn nodes(&self) -> Option<(&[f64], &[f64])> {
        match &self.method {
            Method::Quadrature { nodes, weights } => Some((nodes, weights)),
            Method::ClosedForm(_) => None,
        }
    }

    /// Integral at projected states, written to `out`; `scratch` has length n.
    fn eval_projected(
        &self,
        set: &CoefficientSet,
        xp: &[f64],
        yp: &[f64],
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        match &self.method {
            Method::ClosedForm(f) => f(xp, yp, out),
            Method::Quadrature { nodes, weights } => {
                out.fill(0.0);
                for (&u, &w) in nodes.iter().zip(weights) {
                    set.jump(xp, yp, u, scratch);
                    for (o, h) in out.iter_mut().zip(scratch.iter()) {
                        *o += w * h;
                    }
                }
            }
        }
    }
}

/// `∫ h_Δ(x, y, u) λ(du)`: projects `(x, y)` onto the truncation ball, then
/// integrates.
pub fn compensator(
    oracle: &CompensatorOracle,
    coeffs: &TruncatedCoefficients,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    let set = coeffs.set();
    if !set.is_jump() {
        return Err(Error::ModeMismatch(format!(
            "`{}` has no jump map",
            set.name()
        )));
    }
    let n = set.state_dim();
    let mut xp = vec![0.0; n];
    let mut yp = vec![0.0; n];
    project_into(x, coeffs.radius(), &mut xp);
    project_into(y, coeffs.radius(), &mut yp);
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    oracle.eval_projected(set, &xp, &yp, &mut out, &mut scratch);
    Ok(out)
}

fn jump_kernel(
    state: &DelayState,
    coeffs: &TruncatedCoefficients,
    delta: f64,
    marks: &[f64],
    oracle: &CompensatorOracle,
    ws: &mut Workspace,
    comp: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let set = coeffs.set();
    let n = set.state_dim();
    step_kernel(state, coeffs, delta, ws, out, |xp, yp, z, buf| {
        let h = &mut buf[..n];
        let mut jumps = vec![0.0; n];
        for &u in marks {
            set.jump(xp, yp, u, h);
            for (a, b) in jumps.iter_mut().zip(h.iter()) {
                *a += b;
            }
        }
        oracle.eval_projected(set, xp, yp, comp, h);
        for i in 0..n {
            z[i] = (z[i] + jumps[i]) - delta * comp[i];
        }
    })
}

/// One jump-driven step; `marks` are those of the jumps in `(t_k, t_{k+1}]`.
pub fn step_jump(
    state: &DelayState,
    coeffs: &TruncatedCoefficients,
    delta: f64,
    marks: &[f64],
    oracle: &CompensatorOracle,
) -> Result<Vec<f64>> {
    let set = coeffs.set();
    if !set.is_jump() {
        return Err(Error::ModeMismatch(format!(
            "`{}` is brownian-driven; use the brownian stepper",
            set.name()
        )));
    }
    let n = set.state_dim();
    let mut ws = Workspace::new(n, 1);
    let mut comp = vec![0.0; n];
    let mut out = vec![0.0; n];
    jump_kernel(
        state, coeffs, delta, marks, oracle, &mut ws, &mut comp, &mut out,
    )?;
    Ok(out)
}

pub(crate) fn simulate_jump_coefficients(
    coeffs: &TruncatedCoefficients,
    grid: &TimeGrid,
    xi: &InitialSegment,
    jumps: &JumpRealization,
    oracle: &CompensatorOracle,
    seed: u64,
    path_index: u64,
) -> Result<PathRecord> {
    let set = coeffs.set();
    if !set.is_jump() {
        return Err(Error::ModeMismatch(format!(
            "`{}` is brownian-driven; use simulate",
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
    if (xi.tau() - grid.tau()).abs() > 1e-12 * grid.tau() {
        return Err(Error::GridMismatch(format!(
            "initial segment delay {} differs from grid delay {}",
            xi.tau(),
            grid.tau()
        )));
    }
    if (jumps.horizon() - grid.horizon()).abs() > 1e-12 * grid.horizon().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "jumps cover (0, {}] but the grid ends at T = {}",
            jumps.horizon(),
            grid.horizon()
        )));
    }
    let m = grid.m();
    let mut values = xi.sample_grid(m)?;
    let steps = grid.steps();
    let offsets = jumps.bin(steps);
    let mut state = DelayState::new(set, m, &values)?;
    values.reserve(steps * n);
    let mut ws = Workspace::new(n, 1);
    let mut comp = vec![0.0; n];
    let mut next = vec![0.0; n];
    let marks = jumps.marks();
    for k in 0..steps {
        let interval = &marks[offsets[k]..offsets[k + 1]];
        jump_kernel(
            &state,
            coeffs,
            grid.delta(),
            interval,
            oracle,
            &mut ws,
            &mut comp,
            &mut next,
        )?;
        state.push(set, &next);
        values.extend_from_slice(&next);
    }
    let counts = offsets.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(PathRecord::new(*grid, n, values, coeffs, seed, path_index).with_jump_counts(counts))
}

/// Truncated jump scheme for `set` under a jump-mode `rule`.
///
/// `seed` and `path_index` are recorded in the result only.
pub fn simulate_jump(
    set: &Arc<CoefficientSet>,
    rule: &TruncationRule,
    grid: &TimeGrid,
    xi: &InitialSegment,
    jumps: &JumpRealization,
    oracle: &CompensatorOracle,
    seed: u64,
    path_index: u64,
) -> Result<PathRecord> {
    if !rule.mode().is_jump() {
        return Err(Error::ModeMismatch(
            "simulate_jump needs a jump-mode rule".into(),
        ));
    }
    check_delta(rule.delta(), grid)?;
    let coeffs = truncated_coefficients(set, rule)?;
    simulate_jump_coefficients(&coeffs, grid, xi, jumps, oracle, seed, path_index)
}

/// Jump scheme with raw coefficients (`r = ∞`).
pub fn simulate_jump_untruncated(
    set: &Arc<CoefficientSet>,
    grid: &TimeGrid,
    xi: &InitialSegment,
    jumps: &JumpRealization,
    oracle: &CompensatorOracle,
    seed: u64,
    path_index: u64,
) -> Result<PathRecord> {
    simulate_jump_coefficients(
        &TruncatedCoefficients::untruncated(set),
        grid,
        xi,
        jumps,
        oracle,
        seed,
        path_index,
    )
}
