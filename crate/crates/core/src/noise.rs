//! Seeded Brownian increment grids and Poisson random measure realizations.
//!
//! # Stream derivation
//!
//! Every random stream is a `ChaCha8Rng` seeded through
//! `SeedableRng::seed_from_u64(stream_seed(seed, path_index, stream))` with
//!
//! ```text
//! splitmix64(z) = let z = z + 0x9E3779B97F4A7C15;
//!                 let z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!                 let z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//!                 z ^ (z >> 31)                        (wrapping u64 arithmetic)
//!
//! stream_seed(seed, path, stream) = splitmix64(splitmix64(seed ^ stream) ^ path)
//! ```
//!
//! where `stream` is one of the `STREAM_*` tags below. This function is part of
//! the reproducibility contract: changing it changes every output.
//!
//! # Quantized increments
//!
//! Brownian increments are rounded to integer multiples of
//! [`INCREMENT_QUANTUM`] (2⁻⁴⁰). Sums of such values are exact in `f64` as long
//! as partial sums stay below 2¹³ in magnitude, so coarsening is associative:
//! summing a block directly, or in stages, or in any grouping gives the same
//! bits. The rounding perturbs each increment by at most 4.6e-13.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Resolution of stored Brownian increments.
pub const INCREMENT_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

pub const STREAM_BROWNIAN: u64 = 0x4252_4f57_4e49_414e;
pub const STREAM_JUMPS: u64 = 0x4a55_4d50_5300_0000;
pub const STREAM_BOOTSTRAP: u64 = 0x424f_4f54_5354_5250;
pub const STREAM_AUDIT: u64 = 0x4155_4449_5400_0000;
pub const STREAM_BOUND: u64 = 0x424f_554e_4400_0000;

#[inline]
fn splitmix64(z: u64) -> u64 {
    let z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The 64-bit seed of stream `stream` for path `path_index`.
pub fn stream_seed(seed: u64, path_index: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed ^ stream) ^ path_index)
}

pub(crate) fn stream_rng(seed: u64, path_index: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, path_index, stream))
}

/// Brownian increments `ΔW` on a uniform grid of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    horizon: f64,
    steps: usize,
    dim: usize,
    increments: Vec<f64>,
    seed: u64,
    path_index: u64,
}

impl BrownianGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// `ΔW_j = W(t_{j+1}) − W(t_j)`.
    #[inline]
    pub fn increment(&self, j: usize) -> &[f64] {
        &self.increments[j * self.dim..(j + 1) * self.dim]
    }

    /// All increments, row-major `steps × dim`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W(T)` per component, summed in ascending order.
    pub fn terminal(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for chunk in self.increments.chunks_exact(self.dim) {
            for (a, b) in w.iter_mut().zip(chunk) {
                *a += b;
            }
        }
        w
    }
}

fn steps_for(horizon: f64, step: f64) -> Result<usize> {
    if !(horizon > 0.0) || !(step > 0.0) || !horizon.is_finite() {
        return Err(Error::GridMismatch(format!(
            "horizon {horizon} and step {step} must be positive"
        )));
    }
    let ratio = horizon / step;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps {
        return Err(Error::GridMismatch(format!(
            "T / δ = {ratio} is not a positive integer"
        )));
    }
    Ok(steps as usize)
}

/// Samples i.i.d. `N(0, δ)` increments, fully determined by
/// `(seed, path_index)`.
pub fn sample_brownian(
    seed: u64,
    path_index: u64,
    horizon: f64,
    fine_step: f64,
    dim: usize,
) -> Result<BrownianGrid> {
    let steps = steps_for(horizon, fine_step)?;
    sample_brownian_steps(seed, path_index, horizon, steps, dim)
}

/// As [`sample_brownian`], with the grid given by its step count.
pub fn sample_brownian_steps(
    seed: u64,
    path_index: u64,
    horizon: f64,
    steps: usize,
    dim: usize,
) -> Result<BrownianGrid> {
    if steps == 0 || !(horizon > 0.0) {
        return Err(Error::GridMismatch(
            "Brownian grid needs T > 0 and at least one step".into(),
        ));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "Brownian dimension must be positive".into(),
        ));
    }
    let sd = (horizon / steps as f64).sqrt();
    let mut rng = stream_rng(seed, path_index, STREAM_BROWNIAN);
    let increments = (0..steps * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            quantize(z * sd)
        })
        .collect();
    Ok(BrownianGrid {
        horizon,
        steps,
        dim,
        increments,
        seed,
        path_index,
    })
}

#[inline]
fn quantize(x: f64) -> f64 {
    (x / INCREMENT_QUANTUM).round() * INCREMENT_QUANTUM
}

/// Sums blocks of `factor` consecutive increments in ascending index order.
pub fn coarsen(grid: &BrownianGrid, factor: usize) -> Result<BrownianGrid> {
    if factor == 0 || grid.steps % factor != 0 {
        return Err(Error::GridMismatch(format!(
            "factor {factor} does not divide {} increments",
            grid.steps
        )));
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let dim = grid.dim;
    let steps = grid.steps / factor;
    let mut increments = Vec::with_capacity(steps * dim);
    for block in grid.increments.chunks_exact(factor * dim) {
        for c in 0..dim {
            let mut acc = block[c];
            for i in 1..factor {
                acc += block[i * dim + c];
            }
            increments.push(acc);
        }
    }
    Ok(BrownianGrid {
        horizon: grid.horizon,
        steps,
        dim,
        increments,
        seed: grid.seed,
        path_index: grid.path_index,
    })
}

/// Law of a single scalar mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkDistribution {
    /// Every mark equals `c`.
    Point(f64),
    /// `N(0, s²)`.
    Gauss(f64),
    /// Uniform on `[a, b]`.
    Uniform(f64, f64),
}

impl MarkDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarkDistribution::Point(c) => c.is_finite(),
            MarkDistribution::Gauss(s) => s > 0.0 && s.is_finite(),
            MarkDistribution::Uniform(a, b) => a.is_finite() && b.is_finite() && a < b,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid mark distribution {self:?}"
            )))
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match *self {
            MarkDistribution::Point(c) => c == 0.0,
            MarkDistribution::Gauss(_) => true,
            MarkDistribution::Uniform(a, b) => a == -b,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            MarkDistribution::Point(c) => c,
            MarkDistribution::Gauss(s) => Normal::new(0.0, s).expect("validated").sample(rng),
            MarkDistribution::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
        }
    }
}

impl std::str::FromStr for MarkDistribution {
    type Err = Error;

    /// Parses `point:c`, `gauss:s` or `uniform:a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse mark distribution `{s}`"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let dist = match (kind.trim(), nums.as_slice()) {
            ("point", [c]) => MarkDistribution::Point(*c),
            ("gauss", [s]) => MarkDistribution::Gauss(*s),
            ("uniform", [a, b]) => MarkDistribution::Uniform(*a, *b),
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// A finite mark measure `λ = λ̄ · law`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkMeasure {
    intensity: f64,
    law: MarkDistribution,
}

impl MarkMeasure {
    pub fn new(intensity: f64, law: MarkDistribution) -> Result<Self> {
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidIntensity(intensity));
        }
        law.validate()?;
        Ok(Self { intensity, law })
    }

    /// Total mass `λ̄ = λ(Y)`, i.e. jumps per unit time.
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn law(&self) -> MarkDistribution {
        self.law
    }

    /// `∫ |u|^p λ(du)` in closed form.
    pub fn moment(&self, p: f64) -> f64 {
        let m = match self.law {
            MarkDistribution::Point(c) => c.abs().powf(p),
            MarkDistribution::Gauss(s) => {
                s.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt()
            }
            MarkDistribution::Uniform(a, b) => {
                let prim = |u: f64| u.signum() * u.abs().powf(p + 1.0) / (p + 1.0);
                (prim(b) - prim(a)) / (b - a)
            }
        };
        self.intensity * m
    }

    /// Quadrature nodes and nonnegative weights summing to `λ̄`:
    /// Gauss–Hermite for Gaussian marks, Gauss–Legendre for uniform marks and
    /// a single node for point marks.
    pub fn quadrature(&self, nodes: usize) -> (Vec<f64>, Vec<f64>) {
        use gauss_quad::hermite::GaussHermite;
        use gauss_quad::legendre::GaussLegendre;
        use std::num::NonZeroUsize;

        let n = NonZeroUsize::new(nodes.max(1)).expect("nonzero");
        let lam = self.intensity;
        let (us, ws): (Vec<f64>, Vec<f64>) = match self.law {
            MarkDistribution::Point(c) => (vec![c], vec![1.0]),
            MarkDistribution::Gauss(s) => {
                // ∫ f(x) e^{-x²} dx with u = √2·s·x has total weight √π.
                let rule = GaussHermite::new(n);
                let norm = std::f64::consts::PI.sqrt();
                rule.iter()
                    .map(|(x, w)| (std::f64::consts::SQRT_2 * s * x, w / norm))
                    .unzip()
            }
            MarkDistribution::Uniform(a, b) => {
                let rule = GaussLegendre::new(n);
                rule.iter()
                    .map(|(x, w)| (0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * w))
                    .unzip()
            }
        };
        let (us, ws) = if self.law.is_symmetric() {
            symmetrize(us, ws)
        } else {
            (us, ws)
        };
        // Renormalise so the weights sum to λ̄ to round-off.
        let total: f64 = ws.iter().sum();
        (us, ws.into_iter().map(|w| lam * w / total).collect())
    }
}

/// Mirrors a rule for a symmetric law exactly about the origin.
fn symmetrize(us: Vec<f64>, ws: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = us.into_iter().zip(ws).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    for j in 0..n / 2 {
        let (lo, hi) = (pairs[j], pairs[n - 1 - j]);
        let u = 0.5 * (hi.0 - lo.0);
        let w = 0.5 * (hi.1 + lo.1);
        pairs[j] = (-u, w);
        pairs[n - 1 - j] = (u, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Jump times and marks of one Poisson random measure path on `(0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRealization {
    horizon: f64,
    intensity: f64,
    times: Vec<f64>,
    marks: Vec<f64>,
}

impl JumpRealization {
    /// A realization from explicit sorted times in `(0, T]` and marks.
    pub fn from_parts(
        horizon: f64,
        intensity: f64,
        times: Vec<f64>,
        marks: Vec<f64>,
    ) -> Result<Self> {
        if times.len() != marks.len() {
            return Err(Error::InvalidParameter(
                "times and marks differ in length".into(),
            ));
        }
        if times.iter().any(|&t| !(t > 0.0 && t <= horizon))
            || times.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::InvalidParameter(
                "jump times must be sorted within (0, T]".into(),
            ));
        }
        Ok(Self {
            horizon,
            intensity,
            times,
            marks,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Bins jumps into the intervals `(t_k, t_{k+1}]` of a grid with `steps`
    /// steps. Returns CSR offsets: the marks of interval `k` are
    /// `marks()[off[k]..off[k + 1]]`.
    pub fn bin(&self, steps: usize) -> Vec<usize> {
        let mut offsets = vec![0usize; steps + 1];
        if steps == 0 {
            return offsets;
        }
        let scale = steps as f64 / self.horizon;
        for &t in &self.times {
            let k = ((t * scale).ceil() as usize)
                .saturating_sub(1)
                .min(steps - 1);
            offsets[k + 1] += 1;
        }
        for k in 0..steps {
            offsets[k + 1] += offsets[k];
        }
        offsets
    }
}

/// Samples `N ~ Poisson(λ̄T)` jumps with i.i.d. uniform times on `(0, T]`
/// (sorted) and i.i.d. marks, fully determined by `(seed, path_index)`.
pub fn sample_jumps(
    seed: u64,
    path_index: u64,
    horizon: f64,
    measure: &MarkMeasure,
) -> Result<JumpRealization> {
    if !(measure.intensity >= 0.0) {
        return Err(Error::InvalidIntensity(measure.intensity));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon T = {horizon} must be > 0"
        )));
    }
    let mut rng = stream_rng(seed, path_index, STREAM_JUMPS);
    let mean = measure.intensity * horizon;
    let count = if mean > 0.0 {
        let n: f64 = Poisson::new(mean)
            .map_err(|_| Error::InvalidIntensity(measure.intensity))?
            .sample(&mut rng);
        n as usize
    } else {
        0
    };
    // 1 − U with U ∈ [0, 1) lies in (0, 1].
    let mut times: Vec<f64> = (0..count)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);
    let marks = (0..count).map(|_| measure.law.sample(&mut rng)).collect();
    Ok(JumpRealization {
        horizon,
        intensity: measure.intensity,
        times,
        marks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_is_deterministic() {
        let a = sample_brownian(7, 3, 2.0, 1.0 / 64.0, 2).unwrap();
        let b = sample_brownian(7, 3, 2.0, 1.0 / 64.0, 2).unwrap();
        assert_eq!(a, b);
        let c = sample_brownian(7, 4, 2.0, 1.0 / 64.0, 2).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn brownian_rejects_incommensurable_grid() {
        assert!(matches!(
            sample_brownian(1, 0, 1.0, 0.3, 1),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn increments_are_quantized() {
        let g = sample_brownian(1, 0, 1.0, 1.0 / 128.0, 1).unwrap();
        for &v in g.increments() {
            let k = v / INCREMENT_QUANTUM;
            assert_eq!(k, k.round());
        }
    }

    #[test]
    fn brownian_moments() {
        let delta = 1.0 / 1000.0;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut n = 0usize;
        for path in 0..1000 {
            let g = sample_brownian(42, path, 1.0, delta, 1).unwrap();
            for &v in g.increments() {
                sum += v;
                sq += v * v;
                n += 1;
            }
        }
        assert_eq!(n, 1_000_000);
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 * (delta / n as f64).sqrt(), "mean {mean}");
        assert!((var / delta - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn brownian_components_uncorrelated() {
        let g = sample_brownian(9, 0, 1.0, 1e-6, 2).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for j in 0..g.steps() {
            let w = g.increment(j);
            sxy += w[0] * w[1];
            sxx += w[0] * w[0];
            syy += w[1] * w[1];
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho.abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn paths_are_uncorrelated() {
        let a = sample_brownian(5, 0, 1.0, 1e-6, 1).unwrap();
        let b = sample_brownian(5, 1, 1.0, 1e-6, 1).unwrap();
        let dot: f64 = a
            .increments()
            .iter()
            .zip(b.increments())
            .map(|(x, y)| x * y)
            .sum();
        let na: f64 = a.increments().iter().map(|x| x * x).sum();
        let nb: f64 = b.increments().iter().map(|x| x * x).sum();
        assert!((dot / (na * nb).sqrt()).abs() < 0.01);
    }

    #[test]
    fn coarsen_sums_blocks() {
        let g = BrownianGrid {
            horizon: 1.0,
            steps: 4,
            dim: 1,
            increments: vec![0.5, 0.25, -1.0, 2.0],
            seed: 0,
            path_index: 0,
        };
        let c = coarsen(&g, 2).unwrap();
        assert_eq!(c.increments(), &[0.75, 1.0]);
        assert_eq!(coarsen(&g, 1).unwrap(), g);
        assert!(coarsen(&g, 3).is_err());
        assert!(coarsen(&g, 0).is_err());
    }

    #[test]
    fn coarsening_chain_is_bitwise_exact() {
        let g = sample_brownian(3, 11, 2.0, 1.0 / 512.0, 2).unwrap();
        let direct = coarsen(&g, 8).unwrap();
        let staged = coarsen(&coarsen(&coarsen(&g, 2).unwrap(), 2).unwrap(), 2).unwrap();
        assert_eq!(direct, staged);
        let mixed = coarsen(&coarsen(&g, 4).unwrap(), 2).unwrap();
        assert_eq!(direct, mixed);
        assert_eq!(
            coarsen(&g, 1024).unwrap().increments(),
            g.terminal().as_slice()
        );
    }

    #[test]
    fn mark_distribution_parsing() {
        assert_eq!(
            "point:1.5".parse::<MarkDistribution>().unwrap(),
            MarkDistribution::Point(1.5)
        );
        assert_eq!(
            "gauss:2".parse::<MarkDistribution>().unwrap(),
            MarkDistribution::Gauss(2.0)
        );
        assert_eq!(
            "uniform:-1,3".parse::<MarkDistribution>().unwrap(),
            MarkDistribution::Uniform(-1.0, 3.0)
        );
        assert!("gauss:-1".parse::<MarkDistribution>().is_err());
        assert!("uniform:2,1".parse::<MarkDistribution>().is_err());
        assert!("cauchy:1".parse::<MarkDistribution>().is_err());
    }

    #[test]
    fn zero_intensity_is_empty() {
        let m = MarkMeasure::new(0.0, MarkDistribution::Gauss(1.0)).unwrap();
        assert!(sample_jumps(1, 0, 5.0, &m).unwrap().is_empty());
        assert!(matches!(
            MarkMeasure::new(-1.0, MarkDistribution::Gauss(1.0)),
            Err(Error::InvalidIntensity(_))
        ));
    }

    #[test]
    fn jump_counts_follow_poisson_law() {
        let m = MarkMeasure::new(3.0, MarkDistribution::Uniform(-1.0, 1.0)).unwrap();
        let n = 100_000u64;
        let mut total = 0usize;
        for path in 0..n {
            let r = sample_jumps(17, path, 2.0, &m).unwrap();
            assert!(r.times().iter().all(|&t| t > 0.0 && t <= 2.0));
            assert!(r.times().windows(2).all(|w| w[0] <= w[1]));
            total += r.len();
        }
        let mean = total as f64 / n as f64;
        let se = (6.0 / n as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn binning_partitions_jumps() {
        let r = JumpRealization::from_parts(
            2.0,
            1.0,
            vec![0.1, 0.5, 0.50001, 2.0],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let off = r.bin(4);
        assert_eq!(off, vec![0, 2, 3, 3, 4]);
        assert_eq!(*off.last().unwrap(), r.len());
    }

    #[test]
    fn quadrature_weights_sum_to_intensity() {
        for law in [
            MarkDistribution::Gauss(1.3),
            MarkDistribution::Uniform(-0.5, 2.0),
            MarkDistribution::Point(0.7),
        ] {
            let m = MarkMeasure::new(2.5, law).unwrap();
            let (u, w) = m.quadrature(24);
            assert_eq!(u.len(), w.len());
            assert!(w.iter().all(|&x| x >= 0.0));
            let total: f64 = w.iter().sum();
            assert!((total - 2.5).abs() <= 1e-12 * 2.5);
            // Second moment is integrated exactly.
            let second: f64 = u.iter().zip(&w).map(|(u, w)| u * u * w).sum();
            assert!((second - m.moment(2.0)).abs() < 1e-10, "{law:?}");
        }
    }

    #[test]
    fn gaussian_moment_closed_form() {
        let m = MarkMeasure::new(2.0, MarkDistribution::Gauss(1.0)).unwrap();
        // E|Z|^3 = 2·sqrt(2/π).
        let want = 2.0 * 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((m.moment(3.0) - want).abs() < 1e-12);
    }
}
