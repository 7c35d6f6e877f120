//! Numerical audits of the coefficient assumptions on compact boxes.
//!
//! Each assumption is an inequality `lhs ≤ rhs`. The audit evaluates the ratio
//! `lhs / rhs` on a seeded low-discrepancy lattice, every box corner and the
//! origin, and reports the worst one. A box audit is a regression guard, not a
//! proof.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm, norm_sq};
use crate::noise::{stream_rng, MarkMeasure, STREAM_AUDIT};
use crate::truncation::{truncated_coefficients, TruncatedCoefficients, TruncationRule};

use super::CoefficientSet;

/// Relative slack in the pass decision.
pub const PASS_TOLERANCE: f64 = 1e-9;

/// Quadrature nodes used for mark integrals.
const MARK_NODES: usize = 32;

/// Corners are enumerated only up to this many sampled coordinates.
const MAX_CORNER_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssumptionId {
    /// `|D(x) − D(y)| ≤ κ|x − y|`.
    A1,
    /// Local Lipschitz continuity of `b` and `σ` with constant `L_R`.
    A2,
    /// `⟨x − D(y), b⟩ + (p−1)/2 ‖σ‖² ≤ L₁(1 + |x|² + |y|²)`.
    A3,
    /// As A3 for `b_Δ`, `σ_Δ` with constant `L̄₁`.
    A4,
    /// `⟨x − D(y), b_Δ⟩ ≤ L̄₁(1 + |x|² + |y|²)`.
    A4Prime,
    /// One-sided monotonicity with exponent `q`, constant `L₂`.
    A5,
    /// `|b| ≤ L₃(1 + |x|^l + |y|^l)`.
    A6,
    /// Polynomially weighted Lipschitz bound on `b` and `σ`, constant `L₄`.
    A7,
    /// Global monotonicity plus polynomial Lipschitz drift, constant `L`.
    A8,
    /// Jump-model monotonicity, `p`-th mark moment Lipschitz bound, constant `K₁`.
    B1,
    /// `⟨x − D(y), b_Δ⟩ ≤ K₂(1 + |x|² + |y|²)` for jump models.
    B2,
}

impl AssumptionId {
    pub const ALL: [AssumptionId; 11] = [
        AssumptionId::A1,
        AssumptionId::A2,
        AssumptionId::A3,
        AssumptionId::A4,
        AssumptionId::A4Prime,
        AssumptionId::A5,
        AssumptionId::A6,
        AssumptionId::A7,
        AssumptionId::A8,
        AssumptionId::B1,
        AssumptionId::B2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AssumptionId::A1 => "A1",
            AssumptionId::A2 => "A2",
            AssumptionId::A3 => "A3",
            AssumptionId::A4 => "A4",
            AssumptionId::A4Prime => "A4'",
            AssumptionId::A5 => "A5",
            AssumptionId::A6 => "A6",
            AssumptionId::A7 => "A7",
            AssumptionId::A8 => "A8",
            AssumptionId::B1 => "B1",
            AssumptionId::B2 => "B2",
        }
    }

    /// Whether the inequality compares two input pairs.
    pub fn is_two_pair(&self) -> bool {
        matches!(
            self,
            AssumptionId::A2
                | AssumptionId::A5
                | AssumptionId::A7
                | AssumptionId::A8
                | AssumptionId::B1
        )
    }

    fn is_truncated(&self) -> bool {
        matches!(
            self,
            AssumptionId::A4 | AssumptionId::A4Prime | AssumptionId::B2
        )
    }
}

impl fmt::Display for AssumptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AssumptionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.trim_start_matches('(').trim_end_matches(')');
        Ok(match key {
            "A1" => AssumptionId::A1,
            "A2" => AssumptionId::A2,
            "A3" => AssumptionId::A3,
            "A4" => AssumptionId::A4,
            "A4'" | "A4PRIME" | "A4P" => AssumptionId::A4Prime,
            "A5" => AssumptionId::A5,
            "A6" => AssumptionId::A6,
            "A7" => AssumptionId::A7,
            "A8" => AssumptionId::A8,
            "B1" => AssumptionId::B1,
            "B2" => AssumptionId::B2,
            _ => return Err(Error::UnsupportedAssumption(s.to_string())),
        })
    }
}

/// Local Lipschitz constant as a function of the radius `R`.
pub type LocalLipschitz = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Exponents and declared constants of the assumption families.
#[derive(Clone)]
pub struct AssumptionParams {
    /// Moment exponent `p`.
    pub p: f64,
    /// Error exponent `q`.
    pub q: f64,
    /// Growth exponent `l`.
    pub l: f64,
    pub l1: f64,
    pub l1_bar: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    /// The constant of A8.
    pub l_global: f64,
    pub k1: f64,
    pub k2: f64,
    /// `R ↦ L_R` for A2.
    pub local_lipschitz: Option<LocalLipschitz>,
    /// Truncation rule for A4, A4' and B2.
    pub rule: Option<TruncationRule>,
    /// Mark measure for B1.
    pub mark_measure: Option<MarkMeasure>,
}

impl Default for AssumptionParams {
    fn default() -> Self {
        Self {
            p: 3.0,
            q: 2.0,
            l: 1.0,
            l1: 1.0,
            l1_bar: 1.0,
            l2: 1.0,
            l3: 1.0,
            l4: 1.0,
            l_global: 1.0,
            k1: 1.0,
            k2: 1.0,
            local_lipschitz: None,
            rule: None,
            mark_measure: None,
        }
    }
}

impl fmt::Debug for AssumptionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssumptionParams")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("l", &self.l)
            .field("l1", &self.l1)
            .field("l1_bar", &self.l1_bar)
            .field("l2", &self.l2)
            .field("l3", &self.l3)
            .field("l4", &self.l4)
            .field("l_global", &self.l_global)
            .field("k1", &self.k1)
            .field("k2", &self.k2)
            .field("local_lipschitz", &self.local_lipschitz.is_some())
            .field("rule", &self.rule)
            .field("mark_measure", &self.mark_measure)
            .finish()
    }
}

impl AssumptionParams {
    /// `q < p` and `q·l < 2p`, required for the convergence-rate estimates.
    pub fn check_rate_preconditions(&self) -> Result<()> {
        if !(self.q < self.p) {
            return Err(Error::InvalidParameter(format!(
                "the rate estimate needs q < p, got q = {}, p = {}",
                self.q, self.p
            )));
        }
        if !(self.q * self.l < 2.0 * self.p) {
            return Err(Error::InvalidParameter(format!(
                "the rate estimate needs q·l < 2p, got q·l = {}, 2p = {}",
                self.q * self.l,
                2.0 * self.p
            )));
        }
        Ok(())
    }

    fn validate(&self, id: AssumptionId) -> Result<()> {
        let positive = [
            ("L1", self.l1),
            ("L1_bar", self.l1_bar),
            ("L2", self.l2),
            ("L3", self.l3),
            ("L4", self.l4),
            ("L", self.l_global),
            ("K1", self.k1),
            ("K2", self.k2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "constant {name} = {v} must be > 0"
                )));
            }
        }
        // B1 allows p = 2; A3 and A4 need p > 2.
        let p_ok = match id {
            AssumptionId::B1 => self.p >= 2.0,
            AssumptionId::A3 | AssumptionId::A4 => self.p > 2.0,
            _ => true,
        };
        if !p_ok {
            return Err(Error::InvalidParameter(format!(
                "moment exponent p = {} too small",
                self.p
            )));
        }
        if id == AssumptionId::A5 && !(self.q >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "error exponent q = {} must be ≥ 2",
                self.q
            )));
        }
        if id == AssumptionId::A6 && !(self.l >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "growth exponent l = {} must be ≥ 1",
                self.l
            )));
        }
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "growth exponent l = {} must be > 0",
                self.l
            )));
        }
        Ok(())
    }
}

/// Per-coordinate bounds for `x` and `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(x_lo: Vec<f64>, x_hi: Vec<f64>, y_lo: Vec<f64>, y_hi: Vec<f64>) -> Result<Self> {
        let n = x_lo.len();
        if n == 0 || x_hi.len() != n || y_lo.len() != n || y_hi.len() != n {
            return Err(Error::InvalidParameter(
                "box bounds must share one positive dimension".into(),
            ));
        }
        let ok = x_lo
            .iter()
            .zip(&x_hi)
            .chain(y_lo.iter().zip(&y_hi))
            .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi);
        if !ok {
            return Err(Error::InvalidParameter(
                "box bounds must be finite with lo ≤ hi".into(),
            ));
        }
        Ok(Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        })
    }

    /// `[−half, half]ⁿ × [−half, half]ⁿ`.
    pub fn symmetric(n: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; n], vec![half; n], vec![-half; n], vec![half; n])
    }

    pub fn dim(&self) -> usize {
        self.x_lo.len()
    }

    fn lo(&self) -> Vec<f64> {
        [self.x_lo.as_slice(), &self.y_lo].concat()
    }

    fn hi(&self) -> Vec<f64> {
        [self.x_hi.as_slice(), &self.y_hi].concat()
    }

    /// Largest norm of an `x` or `y` corner.
    fn max_radius(&self) -> f64 {
        let r = |lo: &[f64], hi: &[f64]| {
            lo.iter()
                .zip(hi)
                .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        r(&self.x_lo, &self.x_hi).max(r(&self.y_lo, &self.y_hi))
    }
}

/// Outcome of one audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub assumption: AssumptionId,
    pub n_samples: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
    /// Inputs attaining the worst ratio: `[x, y]` or `[x, y, x̄, ȳ]`.
    pub witness: Vec<Vec<f64>>,
    /// Worst ratio per truncation regime (both inside, both outside,
    /// x outside only, y outside only), for truncated assumptions.
    pub case_worst: Option<[f64; 4]>,
    pub pass: bool,
}

impl AuditReport {
    /// The smallest declared constant that would have passed, for
    /// assumptions homogeneous in their constant.
    pub fn required_constant(&self, declared: f64) -> f64 {
        declared * self.worst_ratio.max(0.0)
    }
}

#[inline]
fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Seeded Kronecker lattice on `[0, 1)^dim` using the generalized golden
/// ratio, with a random shift.
fn lattice(dim: usize, count: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
    // φ_d is the positive root of x^{d+1} = x + 1.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=dim)
        .map(|j| (1.0 / phi).powi(j as i32).fract())
        .collect();
    let mut rng = stream_rng(seed, tag, STREAM_AUDIT);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count)
        .map(|i| {
            alpha
                .iter()
                .zip(&shift)
                .map(|(a, s)| (s + i as f64 * a).fract())
                .collect()
        })
        .collect()
}

fn to_box(unit: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    unit.iter()
        .zip(lo.iter().zip(hi))
        .map(|(u, (a, b))| a + (b - a) * u)
        .collect()
}

/// Lattice points, corners (when few enough coordinates) and the origin
/// clamped into the box. Points are flattened `[x, y]` or `[x, y, x̄, ȳ]`.
fn sample_points(bx: &SampleBox, pairs: usize, n_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let lo = bx.lo().repeat(pairs);
    let hi = bx.hi().repeat(pairs);
    let dim = lo.len();
    let mut pts: Vec<Vec<f64>> = lattice(dim, n_samples, seed, pairs as u64)
        .iter()
        .map(|u| to_box(u, &lo, &hi))
        .collect();
    if dim <= MAX_CORNER_DIM {
        for mask in 0u32..(1u32 << dim) {
            pts.push(
                (0..dim)
                    .map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] })
                    .collect(),
            );
        }
    }
    pts.push(
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| 0f64.clamp(*a, *b))
            .collect(),
    );
    pts
}

/// Points in each of the four truncation regimes at radius `r`.
fn case_points(bx: &SampleBox, r: f64, per_case: usize, seed: u64) -> [Vec<Vec<f64>>; 4] {
    let n = bx.dim();
    let outer = bx.max_radius().max(2.0 * r);
    let units = lattice(4 * n, per_case, seed, 0xCA5E);
    let place = |dir: &[f64], len: f64| -> Vec<f64> {
        let nd = norm(dir);
        if nd > 0.0 {
            dir.iter().map(|d| d / nd * len).collect()
        } else {
            let mut e = vec![0.0; n];
            e[0] = len;
            e
        }
    };
    let inside = |u: f64| r * u;
    let outside = |u: f64| (r + (outer - r) * u).max(r.next_up());
    let mut cases: [Vec<Vec<f64>>; 4] = Default::default();
    for u in &units {
        // Directions from the first 2n coordinates, lengths from the next two.
        let dx: Vec<f64> = u[..n].iter().map(|v| 2.0 * v - 1.0).collect();
        let dy: Vec<f64> = u[n..2 * n].iter().map(|v| 2.0 * v - 1.0).collect();
        let (ux, uy) = (u[2 * n], u[3 * n]);
        let xs = [inside(ux), outside(ux), outside(ux), inside(ux)];
        let ys = [inside(uy), outside(uy), inside(uy), outside(uy)];
        for c in 0..4 {
            cases[c].push([place(&dx, xs[c]), place(&dy, ys[c])].concat());
        }
    }
    // Regime boundaries.
    let one = {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    };
    let edges = [(r, r), (r.next_up(), r.next_up()), (outer, r), (r, outer)];
    for (c, (lx, ly)) in edges.iter().enumerate() {
        cases[c].push([place(&one, *lx), place(&one, -*ly)].concat());
        cases[c].push([place(&one, -*lx), place(&one, *ly)].concat());
    }
    cases
}

struct Evaluator<'a> {
    id: AssumptionId,
    set: &'a CoefficientSet,
    params: &'a AssumptionParams,
    trunc: Option<TruncatedCoefficients>,
    marks: Option<(Vec<f64>, Vec<f64>)>,
    n: usize,
}

impl Evaluator<'_> {
    fn growth(&self, xs: &[&[f64]]) -> f64 {
        1.0 + xs.iter().map(|v| norm(v).powf(self.params.l)).sum::<f64>()
    }

    fn drift(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.trunc {
            Some(t) => t.drift(x, y),
            None => self.set.eval_drift(x, y),
        }
    }

    fn diffusion(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.trunc {
            Some(t) => t.diffusion(x, y),
            None => self.set.eval_diffusion(x, y),
        }
        .expect("checked applicable")
    }

    fn shifted_inner(
        &self,
        x: &[f64],
        y: &[f64],
        xb: &[f64],
        yb: &[f64],
        b: &[f64],
        bb: &[f64],
    ) -> f64 {
        let d = self.set.eval_neutral(y);
        let db = self.set.eval_neutral(yb);
        let left: Vec<f64> = (0..self.n).map(|i| x[i] - d[i] - xb[i] + db[i]).collect();
        let diff: Vec<f64> = b.iter().zip(bb).map(|(a, c)| a - c).collect();
        dot(&left, &diff)
    }

    fn ratio_at(&self, pt: &[f64]) -> f64 {
        let n = self.n;
        let (x, y) = (&pt[..n], &pt[n..2 * n]);
        let prm = self.params;
        let khas = 1.0 + norm_sq(x) + norm_sq(y);
        match self.id {
            AssumptionId::A1 => {
                let d = dist(&self.set.eval_neutral(x), &self.set.eval_neutral(y));
                ratio(d, self.set.kappa() * dist(x, y))
            }
            AssumptionId::A3 | AssumptionId::A4 => {
                let d = self.set.eval_neutral(y);
                let left: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
                let lhs = dot(&left, &self.drift(x, y))
                    + 0.5 * (prm.p - 1.0) * norm_sq(&self.diffusion(x, y));
                let c = if self.id == AssumptionId::A3 {
                    prm.l1
                } else {
                    prm.l1_bar
                };
                ratio(lhs, c * khas)
            }
            AssumptionId::A4Prime | AssumptionId::B2 => {
                let d = self.set.eval_neutral(y);
                let left: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
                let c = if self.id == AssumptionId::A4Prime {
                    prm.l1_bar
                } else {
                    prm.k2
                };
                ratio(dot(&left, &self.drift(x, y)), c * khas)
            }
            AssumptionId::A6 => ratio(norm(&self.drift(x, y)), prm.l3 * self.growth(&[x, y])),
            _ => {
                let (xb, yb) = (&pt[2 * n..3 * n], &pt[3 * n..4 * n]);
                self.two_pair_ratio(x, y, xb, yb)
            }
        }
    }

    fn two_pair_ratio(&self, x: &[f64], y: &[f64], xb: &[f64], yb: &[f64]) -> f64 {
        let prm = self.params;
        let b = self.set.eval_drift(x, y);
        let bb = self.set.eval_drift(xb, yb);
        let db = dist(&b, &bb);
        let gap = dist(x, xb) + dist(y, yb);
        let gap_sq = norm_sq(&sub(x, xb)) + norm_sq(&sub(y, yb));
        let sigma_gap = || dist(&self.diffusion(x, y), &self.diffusion(xb, yb));
        match self.id {
            AssumptionId::A2 => {
                let radius = [x, y, xb, yb].iter().map(|v| norm(v)).fold(0.0, f64::max);
                let lr = prm.local_lipschitz.as_ref().expect("checked applicable")(radius);
                let lhs = if self.set.noise_dim() > 0 {
                    db.max(sigma_gap())
                } else {
                    db
                };
                ratio(lhs, lr * gap)
            }
            AssumptionId::A5 => {
                let s = sigma_gap();
                let lhs = self.shifted_inner(x, y, xb, yb, &b, &bb) + 0.5 * (prm.q - 1.0) * s * s;
                ratio(lhs, prm.l2 * gap_sq)
            }
            AssumptionId::A7 => ratio(
                db + sigma_gap(),
                prm.l4 * self.growth(&[x, xb, y, yb]) * gap,
            ),
            AssumptionId::A8 => {
                let s = sigma_gap();
                let mono = self.shifted_inner(x, y, xb, yb, &b, &bb).max(s * s);
                let first = ratio(mono, prm.l_global * gap_sq);
                let second = ratio(db, prm.l_global * self.growth(&[x, xb, y, yb]) * gap);
                first.max(second)
            }
            AssumptionId::B1 => {
                let mono = ratio(self.shifted_inner(x, y, xb, yb, &b, &bb), prm.k1 * gap_sq);
                let lip = ratio(db, prm.k1 * self.growth(&[x, xb, y, yb]) * gap);
                let (us, ws) = self.marks.as_ref().expect("checked applicable");
                let mut integral = 0.0;
                for (u, w) in us.iter().zip(ws) {
                    let h = self.set.eval_jump(x, y, *u).expect("checked applicable");
                    let hb = self.set.eval_jump(xb, yb, *u).expect("checked applicable");
                    integral += w * dist(&h, &hb).powf(prm.p);
                }
                let rhs = prm.k1 * (dist(x, xb).powf(prm.p) + dist(y, yb).powf(prm.p));
                mono.max(lip).max(ratio(integral, rhs))
            }
            _ => unreachable!("single-pair assumption"),
        }
    }

    /// `|h(0, 0, u)| ≤ |u|^p` at the quadrature nodes.
    fn origin_growth_ratio(&self) -> (f64, f64) {
        let zero = vec![0.0; self.n];
        let (us, _) = self.marks.as_ref().expect("checked applicable");
        let mut worst = (f64::NEG_INFINITY, 0.0);
        for &u in us {
            let h = self
                .set
                .eval_jump(&zero, &zero, u)
                .expect("checked applicable");
            let r = ratio(norm(&h), u.abs().powf(self.params.p));
            if r > worst.0 {
                worst = (r, u);
            }
        }
        worst
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn inapplicable(id: AssumptionId, reason: impl Into<String>) -> Error {
    Error::Inapplicable {
        assumption: id.name().to_string(),
        reason: reason.into(),
    }
}

/// Audits assumption `id` for `set` on `bx`.
///
/// Evaluates `n_samples` lattice points plus every box corner and the
/// origin. Two-pair assumptions sample `(x, y, x̄, ȳ)` from the product box.
/// Truncated assumptions (A4, A4', B2) additionally sample `n_samples / 4`
/// points (at least one) in each truncation regime at the rule's radius.
pub fn audit_assumption(
    id: AssumptionId,
    set: &CoefficientSet,
    params: &AssumptionParams,
    bx: &SampleBox,
    n_samples: usize,
    seed: u64,
) -> Result<AuditReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be ≥ 1".into()));
    }
    if bx.dim() != set.state_dim() {
        return Err(Error::InvalidParameter(format!(
            "box dimension {} differs from state dimension {}",
            bx.dim(),
            set.state_dim()
        )));
    }
    params.validate(id)?;

    let needs_sigma = matches!(
        id,
        AssumptionId::A3
            | AssumptionId::A4
            | AssumptionId::A5
            | AssumptionId::A7
            | AssumptionId::A8
    );
    if needs_sigma && set.is_jump() {
        return Err(inapplicable(
            id,
            format!("model `{}` has no diffusion coefficient", set.name()),
        ));
    }
    if matches!(id, AssumptionId::B1 | AssumptionId::B2) && !set.is_jump() {
        return Err(inapplicable(
            id,
            format!("model `{}` has no jump coefficient", set.name()),
        ));
    }
    if id == AssumptionId::A2 && params.local_lipschitz.is_none() {
        return Err(inapplicable(id, "no local Lipschitz map L_R declared"));
    }
    let trunc = if id.is_truncated() {
        let rule = params
            .rule
            .as_ref()
            .ok_or_else(|| inapplicable(id, "no truncation rule declared"))?;
        Some(truncated_coefficients(&Arc::new(set.clone()), rule)?)
    } else {
        None
    };
    let marks = if id == AssumptionId::B1 {
        let m = params
            .mark_measure
            .as_ref()
            .ok_or_else(|| inapplicable(id, "no mark measure declared"))?;
        Some(m.quadrature(MARK_NODES))
    } else {
        None
    };

    let ev = Evaluator {
        id,
        set,
        params,
        trunc,
        marks,
        n: set.state_dim(),
    };
    let n = ev.n;
    let split = |pt: &[f64]| pt.chunks_exact(n).map(<[f64]>::to_vec).collect::<Vec<_>>();

    let pairs = if id.is_two_pair() { 2 } else { 1 };
    let mut worst = f64::NEG_INFINITY;
    let mut witness = Vec::new();
    let mut count = 0usize;
    for pt in sample_points(bx, pairs, n_samples, seed) {
        let r = ev.ratio_at(&pt);
        count += 1;
        if r > worst || r.is_nan() {
            worst = if r.is_nan() { f64::INFINITY } else { r };
            witness = split(&pt);
        }
    }
    if id == AssumptionId::B1 {
        let (r, u) = ev.origin_growth_ratio();
        count += 1;
        if r > worst {
            worst = r;
            witness = vec![vec![0.0; n], vec![0.0; n], vec![u]];
        }
    }

    let mut case_worst = None;
    if let Some(t) = &ev.trunc {
        let mut per = [f64::NEG_INFINITY; 4];
        let cases = case_points(bx, t.radius(), (n_samples / 4).max(1), seed);
        for (c, pts) in cases.iter().enumerate() {
            for pt in pts {
                let r = ev.ratio_at(pt);
                count += 1;
                let r = if r.is_nan() { f64::INFINITY } else { r };
                per[c] = per[c].max(r);
                if r > worst {
                    worst = r;
                    witness = split(pt);
                }
            }
        }
        case_worst = Some(per);
    }

    Ok(AuditReport {
        assumption: id,
        n_samples: count,
        worst_ratio: worst,
        witness,
        case_worst,
        pass: worst <= 1.0 + PASS_TOLERANCE,
    })
}

/// Largest observed `|D(x) − D(y)| / |x − y|` on the box: an empirical lower
/// bound for the contraction constant, not a certificate.
pub fn empirical_kappa(set: &CoefficientSet, bx: &SampleBox, n_samples: usize, seed: u64) -> f64 {
    let n = set.state_dim();
    sample_points(bx, 1, n_samples, seed)
        .iter()
        .map(|pt| {
            let (x, y) = (&pt[..n], &pt[n..]);
            ratio(dist(&set.eval_neutral(x), &set.eval_neutral(y)), dist(x, y))
        })
        .fold(0.0, f64::max)
}
