//! Coefficient sets `(D, b, σ)` or `(D, b, h)`, the built-in example models,
//! initial segments, and numerical assumption audits.

mod audit;
mod examples;

use std::fmt;
use std::sync::Arc;

pub use audit::{
    audit_assumption, empirical_kappa, AssumptionId, AssumptionParams, AuditReport, LocalLipschitz,
    SampleBox, PASS_TOLERANCE,
};
pub use examples::{
    make_additive_jump, make_additive_noise, make_example_a, make_example_b, make_jump_example,
};

use crate::error::{Error, Result};
use crate::linalg;
use crate::truncation::BoundFunction;

/// `D: Rⁿ → Rⁿ`.
pub type NeutralMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `b: Rⁿ × Rⁿ → Rⁿ`.
pub type DriftMap = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `σ: Rⁿ × Rⁿ → R^{n×d}`, written row-major into an `n·d` slice.
pub type DiffusionMap = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `h: Rⁿ × Rⁿ × Y → Rⁿ` with scalar marks `u ∈ Y ⊂ R`.
pub type JumpMap = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum NoiseTerm {
    Diffusion { noise_dim: usize, map: DiffusionMap },
    Jump { map: JumpMap },
}

/// A neutral delay model driven either by Brownian motion or by a
/// compensated Poisson random measure, never both.
#[derive(Clone)]
pub struct CoefficientSet {
    name: String,
    state_dim: usize,
    neutral: NeutralMap,
    drift: DriftMap,
    noise: NoiseTerm,
    kappa: f64,
    bound: Option<BoundFunction>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim())
            .field("jump", &self.is_jump())
            .field("kappa", &self.kappa)
            .field("bound", &self.bound)
            .finish()
    }
}

impl CoefficientSet {
    pub fn builder(name: impl Into<String>, state_dim: usize) -> CoefficientSetBuilder {
        CoefficientSetBuilder {
            name: name.into(),
            state_dim,
            neutral: None,
            drift: None,
            diffusion: None,
            jump: None,
            kappa: None,
            bound: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Brownian dimension `d`; zero for jump-driven models.
    pub fn noise_dim(&self) -> usize {
        match self.noise {
            NoiseTerm::Diffusion { noise_dim, .. } => noise_dim,
            NoiseTerm::Jump { .. } => 0,
        }
    }

    pub fn is_jump(&self) -> bool {
        matches!(self.noise, NoiseTerm::Jump { .. })
    }

    /// Declared contraction constant of `D`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn bound(&self) -> Option<&BoundFunction> {
        self.bound.as_ref()
    }

    /// Returns a copy with a different bound function.
    pub fn with_bound(&self, bound: BoundFunction) -> Self {
        Self {
            bound: Some(bound),
            ..self.clone()
        }
    }

    #[inline]
    pub fn neutral(&self, y: &[f64], out: &mut [f64]) {
        (self.neutral)(y, out)
    }

    #[inline]
    pub fn drift(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.drift)(x, y, out)
    }

    /// Writes `σ(x, y)`; returns false for jump models.
    #[inline]
    pub fn diffusion(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        match &self.noise {
            NoiseTerm::Diffusion { map, .. } => {
                map(x, y, out);
                true
            }
            NoiseTerm::Jump { .. } => false,
        }
    }

    /// Writes `h(x, y, u)`; returns false for Brownian models.
    #[inline]
    pub fn jump(&self, x: &[f64], y: &[f64], u: f64, out: &mut [f64]) -> bool {
        match &self.noise {
            NoiseTerm::Jump { map } => {
                map(x, y, u, out);
                true
            }
            NoiseTerm::Diffusion { .. } => false,
        }
    }

    pub fn eval_neutral(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.neutral(y, &mut out);
        out
    }

    pub fn eval_drift(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.drift(x, y, &mut out);
        out
    }

    pub fn eval_diffusion(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim()];
        self.diffusion(x, y, &mut out).then_some(out)
    }

    pub fn eval_jump(&self, x: &[f64], y: &[f64], u: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.state_dim];
        self.jump(x, y, u, &mut out).then_some(out)
    }

    /// `|b(x, y)| ∨ ‖σ(x, y)‖` for Brownian models, `|b| ∨ max_u |h(x, y, u)|`
    /// over `marks` for jump models.
    pub fn coefficient_magnitude(&self, x: &[f64], y: &[f64], marks: &[f64]) -> f64 {
        let mut out = linalg::norm(&self.eval_drift(x, y));
        match &self.noise {
            NoiseTerm::Diffusion { .. } => {
                let s = self.eval_diffusion(x, y).unwrap_or_default();
                out = out.max(linalg::norm(&s));
            }
            NoiseTerm::Jump { .. } => {
                for &u in marks {
                    let h = self.eval_jump(x, y, u).unwrap_or_default();
                    out = out.max(linalg::norm(&h));
                }
            }
        }
        out
    }
}

pub struct CoefficientSetBuilder {
    name: String,
    state_dim: usize,
    neutral: Option<NeutralMap>,
    drift: Option<DriftMap>,
    diffusion: Option<(usize, DiffusionMap)>,
    jump: Option<JumpMap>,
    kappa: Option<f64>,
    bound: Option<BoundFunction>,
}

impl CoefficientSetBuilder {
    pub fn neutral(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.neutral = Some(Arc::new(f));
        self
    }

    pub fn drift(mut self, f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion(
        mut self,
        noise_dim: usize,
        f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion = Some((noise_dim, Arc::new(f)));
        self
    }

    pub fn jump(
        mut self,
        f: impl Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jump = Some(Arc::new(f));
        self
    }

    pub fn kappa(mut self, kappa: f64) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn bound(mut self, bound: BoundFunction) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn build(self) -> Result<CoefficientSet> {
        let invalid = |msg: &str| Err(Error::InvalidParameter(format!("{}: {msg}", self.name)));
        if self.state_dim == 0 {
            return invalid("state dimension must be positive");
        }
        let Some(drift) = self.drift.clone() else {
            return invalid("drift is required");
        };
        let noise = match (self.diffusion.clone(), self.jump.clone()) {
            (Some((0, _)), None) => return invalid("noise dimension must be positive"),
            (Some((noise_dim, map)), None) => NoiseTerm::Diffusion { noise_dim, map },
            (None, Some(map)) => NoiseTerm::Jump { map },
            (Some(_), Some(_)) => return invalid("diffusion and jump map are mutually exclusive"),
            (None, None) => return invalid("either a diffusion or a jump map is required"),
        };
        let kappa = self.kappa.unwrap_or(f64::NAN);
        if !(kappa > 0.0 && kappa < 1.0) {
            return invalid(&format!(
                "contraction constant κ = {kappa} must lie in (0, 1)"
            ));
        }
        let neutral: NeutralMap = self
            .neutral
            .clone()
            .unwrap_or_else(|| Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)));
        let mut d0 = vec![1.0; self.state_dim];
        neutral(&vec![0.0; self.state_dim], &mut d0);
        if d0.iter().any(|&v| v != 0.0) {
            return invalid("neutral map must satisfy D(0) = 0");
        }
        Ok(CoefficientSet {
            name: self.name,
            state_dim: self.state_dim,
            neutral,
            drift,
            noise,
            kappa,
            bound: self.bound,
        })
    }
}

type Sampler = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Initial data `ξ` on `[−τ, 0]`, sampled only at grid points `kΔ`.
#[derive(Clone)]
pub struct InitialSegment {
    tau: f64,
    dim: usize,
    sampler: Sampler,
}

impl fmt::Debug for InitialSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialSegment")
            .field("tau", &self.tau)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl InitialSegment {
    pub fn new(
        tau: f64,
        dim: usize,
        sampler: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delay τ = {tau} must be > 0"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "initial segment dimension must be positive".into(),
            ));
        }
        Ok(Self {
            tau,
            dim,
            sampler: Arc::new(sampler),
        })
    }

    /// `ξ ≡ value`.
    pub fn constant(tau: f64, value: Vec<f64>) -> Result<Self> {
        let dim = value.len();
        Self::new(tau, dim, move |_, out| out.copy_from_slice(&value))
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ξ(kΔ)` for `k = −m..=0`, flattened; `Δ = τ/m`.
    pub fn sample_grid(&self, m: usize) -> Result<Vec<f64>> {
        let delta = self.tau / m as f64;
        let mut out = vec![0.0; (m + 1) * self.dim];
        for (j, chunk) in out.chunks_exact_mut(self.dim).enumerate() {
            let k = j as i64 - m as i64;
            (self.sampler)(k as f64 * delta, chunk);
            if !linalg::all_finite(chunk) {
                return Err(Error::InvalidParameter(format!(
                    "initial segment is not finite at t = {}",
                    k as f64 * delta
                )));
            }
        }
        Ok(out)
    }

    /// `‖ξ‖∞` over the grid points of `Δ = τ/m`.
    pub fn sup_norm(&self, m: usize) -> Result<f64> {
        Ok(self
            .sample_grid(m)?
            .chunks_exact(self.dim)
            .map(linalg::norm)
            .fold(0.0, f64::max))
    }
}
