//! Coupled Monte Carlo strong-error studies.
//!
//! The exact solution is unknown for the example models, so every level is
//! compared with the same truncated scheme on a finer nested grid (`m_ref`),
//! driven by the same noise: the Brownian increments of each level are exact
//! block sums of the reference increments, and jump-driven levels share one
//! jump realization. The measured quantity is therefore a self-convergence
//! error.

mod rate;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

pub use rate::{bootstrap_slope_ci, fit_rate, RateFit, RateSummary};

use crate::error::{Error, Result};
use crate::jump_scheme::{simulate_jump_coefficients, CompensatorOracle};
use crate::linalg::{dist, norm};
use crate::model::{AssumptionParams, CoefficientSet, InitialSegment};
use crate::noise::{sample_brownian_steps, sample_jumps, MarkMeasure};
use crate::scheme::{simulate_coefficients, PathRecord, TimeGrid};
use crate::truncation::{truncated_coefficients, GaugeMode, TruncatedCoefficients, TruncationRule};

/// Where the pathwise gap is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// `|X_ref(T) − Y(T)|`.
    AtT,
    /// `max_k |X_ref(t_k) − Y(t_k)|` over the level's grid times in `[0, T]`.
    Uniform,
}

impl ErrorMode {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorMode::AtT => "at-T",
            ErrorMode::Uniform => "uniform",
        }
    }
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "at-t" | "att" | "t" => Ok(ErrorMode::AtT),
            "uniform" | "sup" => Ok(ErrorMode::Uniform),
            _ => Err(Error::InvalidParameter(format!("unknown error mode `{s}`"))),
        }
    }
}

/// The gauge family `g(Δ) = Δ^{−ε}` or `g(Δ) = Δ^{−ε/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeForm {
    #[default]
    Standard,
    /// Half exponent, used with the improved-rate assumptions.
    Improved,
}

impl GaugeForm {
    /// The exponent actually applied for a nominal `ε`.
    pub fn exponent(&self, epsilon: f64) -> f64 {
        match self {
            GaugeForm::Standard => epsilon,
            GaugeForm::Improved => 0.5 * epsilon,
        }
    }
}

impl FromStr for GaugeForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(GaugeForm::Standard),
            "improved" | "half" => Ok(GaugeForm::Improved),
            _ => Err(Error::InvalidParameter(format!("unknown gauge form `{s}`"))),
        }
    }
}

/// The noise driving the study.
#[derive(Debug, Clone, PartialEq)]
pub enum Driver {
    Brownian,
    /// Compensated Poisson random measure; `p` enters the jump gauge
    /// constraint `Δ^{1/4}·g(Δ)^p ≤ 1`.
    Jump {
        measure: MarkMeasure,
        p: f64,
        quadrature_nodes: usize,
    },
}

impl Driver {
    fn gauge_mode(&self) -> GaugeMode {
        match self {
            Driver::Brownian => GaugeMode::Brownian,
            Driver::Jump { p, .. } => GaugeMode::Jump { p: *p },
        }
    }
}

/// Everything that determines a study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub set: Arc<CoefficientSet>,
    pub xi: InitialSegment,
    pub tau: f64,
    pub horizon: f64,
    /// Steps per delay of each level.
    pub levels: Vec<usize>,
    /// Steps per delay of the reference.
    pub m_ref: usize,
    pub epsilon: f64,
    pub gauge: GaugeForm,
    /// Error exponent.
    pub q: f64,
    pub n_paths: usize,
    pub mode: ErrorMode,
    pub driver: Driver,
    pub seed: u64,
    /// Bootstrap replicates for the slope interval.
    pub bootstrap: usize,
    /// If given, the rate-estimate preconditions are checked and reported as
    /// warnings.
    pub theory: Option<AssumptionParams>,
}

impl StudyConfig {
    /// A Brownian at-T study with `q = 2`, standard gauge and 1000 bootstrap
    /// replicates.
    pub fn new(
        set: Arc<CoefficientSet>,
        xi: InitialSegment,
        tau: f64,
        horizon: f64,
        levels: Vec<usize>,
        m_ref: usize,
        epsilon: f64,
        n_paths: usize,
        seed: u64,
    ) -> Self {
        Self {
            set,
            xi,
            tau,
            horizon,
            levels,
            m_ref,
            epsilon,
            gauge: GaugeForm::Standard,
            q: 2.0,
            n_paths,
            mode: ErrorMode::AtT,
            driver: Driver::Brownian,
            seed,
            bootstrap: 1000,
            theory: None,
        }
    }

    /// The truncation rule of a level with `m` steps per delay.
    pub fn rule(&self, m: usize) -> Result<TruncationRule> {
        TruncationRule::power(
            &self.set,
            self.tau / m as f64,
            self.gauge.exponent(self.epsilon),
            self.driver.gauge_mode(),
        )
    }

    /// Checks every precondition; returns the sorted levels and warnings.
    pub fn validate(&self) -> Result<(Vec<usize>, Vec<String>)> {
        if self.levels.is_empty() {
            return Err(Error::InvalidParameter("level list is empty".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("path count must be ≥ 1".into()));
        }
        if !(self.q >= 2.0) || !self.q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "error exponent q = {} must be ≥ 2",
                self.q
            )));
        }
        if (self.xi.tau() - self.tau).abs() > 1e-12 * self.tau {
            return Err(Error::InvalidParameter(format!(
                "initial segment delay {} differs from τ = {}",
                self.xi.tau(),
                self.tau
            )));
        }
        if self.xi.dim() != self.set.state_dim() {
            return Err(Error::InvalidParameter(format!(
                "initial segment dimension {} differs from model dimension {}",
                self.xi.dim(),
                self.set.state_dim()
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon T = {} must be > 0",
                self.horizon
            )));
        }
        match (&self.driver, self.set.is_jump()) {
            (Driver::Brownian, true) => {
                return Err(Error::ModeMismatch(format!(
                    "model `{}` is jump-driven but the driver is brownian",
                    self.set.name()
                )))
            }
            (Driver::Jump { .. }, false) => {
                return Err(Error::ModeMismatch(format!(
                    "model `{}` is brownian-driven but the driver is jump",
                    self.set.name()
                )))
            }
            _ => {}
        }
        let mut levels = self.levels.clone();
        levels.sort_unstable();
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("levels must be distinct".into()));
        }
        for &m in levels.iter().chain(std::iter::once(&self.m_ref)) {
            if m == 0 || self.m_ref % m != 0 {
                return Err(Error::GridMismatch(format!(
                    "level m = {m} does not divide the reference m_ref = {}",
                    self.m_ref
                )));
            }
            TimeGrid::new(self.tau, self.horizon, m)?;
            self.rule(m)?;
        }
        let mut warnings = Vec::new();
        let finest = *levels.last().expect("nonempty");
        if self.m_ref < 8 * finest && !(levels.len() == 1 && finest == self.m_ref) {
            warnings.push(format!(
                "reference m_ref = {} is finer than the finest level m = {finest} by less than 8x",
                self.m_ref
            ));
        }
        if let Some(params) = &self.theory {
            if let Err(e) = params.check_rate_preconditions() {
                warnings.push(e.to_string());
            }
        }
        let xi_sup = self.xi.sup_norm(levels[0])?;
        let r0 = self.rule(levels[0])?.radius();
        if xi_sup >= r0 {
            warnings.push(format!(
                "‖ξ‖∞ = {xi_sup} is not below the coarsest truncation radius {r0}"
            ));
        }
        Ok((levels, warnings))
    }
}

/// Aggregates of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub m: usize,
    pub delta: f64,
    pub g: f64,
    pub radius: f64,
    pub n_samples: usize,
    /// `(1/N) Σ e_i^q`.
    pub error_moment: f64,
    /// `error_moment^{1/q}`.
    pub root_error: f64,
    /// Standard error of `error_moment`.
    pub std_err: f64,
}

/// Outcome of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub mode: ErrorMode,
    pub q: f64,
    pub seed: u64,
    /// Levels in ascending `m`.
    pub levels: Vec<LevelSummary>,
    /// Reference level data (`error_moment` is zero by construction).
    pub reference: LevelSummary,
    /// `per_path_errors[i][j]` is the error of path `i` at level `j`.
    pub per_path_errors: Vec<Vec<f64>>,
    pub rate: Option<RateSummary>,
    /// Why `rate` is absent.
    pub not_fittable: Option<String>,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    /// Errors strictly decrease from the coarsest to the finest level.
    pub fn strictly_decreasing(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].root_error < w[0].root_error)
    }
}

struct Level {
    grid: TimeGrid,
    coeffs: TruncatedCoefficients,
    rule: TruncationRule,
}

fn build_level(cfg: &StudyConfig, m: usize) -> Result<Level> {
    let grid = TimeGrid::new(cfg.tau, cfg.horizon, m)?;
    let rule = cfg.rule(m)?;
    let coeffs = truncated_coefficients(&cfg.set, &rule)?;
    Ok(Level { grid, coeffs, rule })
}

/// Simulates one path of every level in `levels` (and the reference last).
fn simulate_path(
    cfg: &StudyConfig,
    levels: &[Level],
    oracle: Option<&CompensatorOracle>,
    path: u64,
) -> Result<Vec<PathRecord>> {
    let reference = levels.last().expect("reference level");
    let run = |lvl: &Level, noise: &Noise| -> Result<PathRecord> {
        let res = match noise {
            Noise::Brownian(w) => simulate_coefficients(&lvl.coeffs, &lvl.grid, &cfg.xi, w),
            Noise::Jump(j) => simulate_jump_coefficients(
                &lvl.coeffs,
                &lvl.grid,
                &cfg.xi,
                j,
                oracle.expect("jump oracle"),
                cfg.seed,
                path,
            ),
        };
        res.map_err(|e| e.at(lvl.grid.m(), path))
    };
    let noise = match &cfg.driver {
        Driver::Brownian => Noise::Brownian(sample_brownian_steps(
            cfg.seed,
            path,
            cfg.horizon,
            reference.grid.steps(),
            cfg.set.noise_dim(),
        )?),
        Driver::Jump { measure, .. } => {
            Noise::Jump(sample_jumps(cfg.seed, path, cfg.horizon, measure)?)
        }
    };
    levels.iter().map(|lvl| run(lvl, &noise)).collect()
}

enum Noise {
    Brownian(crate::noise::BrownianGrid),
    Jump(crate::noise::JumpRealization),
}

fn pathwise_error(mode: ErrorMode, reference: &PathRecord, rec: &PathRecord, factor: usize) -> f64 {
    match mode {
        ErrorMode::AtT => dist(reference.terminal(), rec.terminal()),
        ErrorMode::Uniform => (0..=rec.grid().steps() as i64)
            .map(|k| dist(reference.value(k * factor as i64), rec.value(k)))
            .fold(0.0, f64::max),
    }
}

fn summarize(lvl: &Level, errors: impl Iterator<Item = f64>, q: f64) -> LevelSummary {
    let powered: Vec<f64> = errors.map(|e| e.powf(q)).collect();
    let n = powered.len();
    let moment = powered.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = powered
            .iter()
            .map(|v| (v - moment) * (v - moment))
            .sum::<f64>()
            / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    LevelSummary {
        m: lvl.grid.m(),
        delta: lvl.grid.delta(),
        g: lvl.rule.g(),
        radius: lvl.rule.radius(),
        n_samples: n,
        error_moment: moment,
        root_error: moment.powf(1.0 / q),
        std_err,
    }
}

fn make_oracle(driver: &Driver) -> Result<Option<CompensatorOracle>> {
    match driver {
        Driver::Brownian => Ok(None),
        Driver::Jump {
            measure,
            quadrature_nodes,
            ..
        } => Ok(Some(CompensatorOracle::quadrature(
            measure,
            *quadrature_nodes,
        )?)),
    }
}

/// Runs a coupled strong-error study.
///
/// Paths run in parallel; results are reduced in ascending path order, so the
/// report does not depend on scheduling. The first failing path (lowest
/// index) aborts the study.
pub fn strong_error_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let (sorted, warnings) = cfg.validate()?;
    let mut levels: Vec<Level> = sorted
        .iter()
        .map(|&m| build_level(cfg, m))
        .collect::<Result<_>>()?;
    levels.push(build_level(cfg, cfg.m_ref)?);
    let oracle = make_oracle(&cfg.driver)?;
    let n_levels = sorted.len();

    let results: Vec<Result<Vec<f64>>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let recs = simulate_path(cfg, &levels, oracle.as_ref(), path)?;
            let reference = recs.last().expect("reference");
            Ok((0..n_levels)
                .map(|j| pathwise_error(cfg.mode, reference, &recs[j], cfg.m_ref / sorted[j]))
                .collect())
        })
        .collect();
    let per_path: Vec<Vec<f64>> = results.into_iter().collect::<Result<_>>()?;

    let summaries: Vec<LevelSummary> = (0..n_levels)
        .map(|j| summarize(&levels[j], per_path.iter().map(|row| row[j]), cfg.q))
        .collect();
    let reference = summarize(
        &levels[n_levels],
        std::iter::repeat_n(0.0, cfg.n_paths),
        cfg.q,
    );

    let points: Vec<(f64, f64)> = summaries.iter().map(|s| (s.delta, s.root_error)).collect();
    let deltas: Vec<f64> = summaries.iter().map(|s| s.delta).collect();
    let (rate, not_fittable) = match fit_rate(&points).and_then(|fit| {
        let (lo, hi, reps) =
            bootstrap_slope_ci(&per_path, &deltas, cfg.q, cfg.bootstrap.max(1), cfg.seed)?;
        Ok(RateSummary {
            fit,
            ci_lo: lo,
            ci_hi: hi,
            replicates: reps,
        })
    }) {
        Ok(r) => (Some(r), None),
        Err(Error::NotFittable(why)) => (None, Some(why)),
        Err(e) => return Err(e),
    };

    Ok(ConvergenceReport {
        mode: cfg.mode,
        q: cfg.q,
        seed: cfg.seed,
        levels: summaries,
        reference,
        per_path_errors: per_path,
        rate,
        not_fittable,
        warnings,
    })
}

/// Monte Carlo estimate of `E|Y(T)|^p` at one level, with its standard
/// error.
pub fn terminal_moment(cfg: &StudyConfig, m: usize, p: f64) -> Result<(f64, f64)> {
    if cfg.n_paths == 0 {
        return Err(Error::InvalidParameter("path count must be ≥ 1".into()));
    }
    let level = build_level(cfg, m)?;
    let oracle = make_oracle(&cfg.driver)?;
    let steps = level.grid.steps();
    let values: Vec<Result<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let rec = match &cfg.driver {
                Driver::Brownian => {
                    let w = sample_brownian_steps(
                        cfg.seed,
                        path,
                        cfg.horizon,
                        steps,
                        cfg.set.noise_dim(),
                    )?;
                    simulate_coefficients(&level.coeffs, &level.grid, &cfg.xi, &w)
                }
                Driver::Jump { measure, .. } => {
                    let j = sample_jumps(cfg.seed, path, cfg.horizon, measure)?;
                    simulate_jump_coefficients(
                        &level.coeffs,
                        &level.grid,
                        &cfg.xi,
                        &j,
                        oracle.as_ref().expect("oracle"),
                        cfg.seed,
                        path,
                    )
                }
            }
            .map_err(|e| e.at(m, path))?;
            Ok(norm(rec.terminal()).powf(p))
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_additive_noise, make_example_b, make_jump_example};
    use crate::noise::MarkDistribution;

    fn example_b_config(levels: Vec<usize>, m_ref: usize, n: usize) -> StudyConfig {
        StudyConfig::new(
            Arc::new(make_example_b()),
            InitialSegment::constant(1.0, vec![0.5]).unwrap(),
            1.0,
            2.0,
            levels,
            m_ref,
            0.05,
            n,
            7,
        )
    }

    #[test]
    fn reference_level_has_zero_error() {
        let cfg = example_b_config(vec![64], 64, 20);
        let rep = strong_error_study(&cfg).unwrap();
        assert!(rep.per_path_errors.iter().all(|r| r[0] == 0.0));
        assert!(rep.rate.is_none());
        assert!(rep.not_fittable.is_some());
    }

    #[test]
    fn additive_noise_has_zero_error() {
        let mut cfg = StudyConfig::new(
            Arc::new(make_additive_noise()),
            InitialSegment::constant(1.0, vec![0.0]).unwrap(),
            1.0,
            2.0,
            vec![8, 16, 32],
            256,
            0.05,
            10,
            1,
        );
        cfg.bootstrap = 10;
        let rep = strong_error_study(&cfg).unwrap();
        assert!(rep.levels.iter().all(|l| l.error_moment == 0.0));
        assert!(rep.rate.is_none());
    }

    #[test]
    fn permuting_levels_changes_nothing() {
        let mut a = example_b_config(vec![8, 16, 32], 256, 30);
        a.bootstrap = 50;
        let mut b = a.clone();
        b.levels = vec![32, 8, 16];
        assert_eq!(
            strong_error_study(&a).unwrap(),
            strong_error_study(&b).unwrap()
        );
    }

    #[test]
    fn uniform_dominates_at_t() {
        let mut at = example_b_config(vec![8, 16], 128, 30);
        at.bootstrap = 20;
        let mut un = at.clone();
        un.mode = ErrorMode::Uniform;
        let a = strong_error_study(&at).unwrap();
        let u = strong_error_study(&un).unwrap();
        for (ra, ru) in a.per_path_errors.iter().zip(&u.per_path_errors) {
            for (ea, eu) in ra.iter().zip(ru) {
                assert!(eu >= ea);
            }
        }
    }

    #[test]
    fn validation_errors() {
        let cfg = example_b_config(vec![8, 24], 256, 10);
        assert!(matches!(
            strong_error_study(&cfg),
            Err(Error::GridMismatch(_))
        ));
        let mut cfg = example_b_config(vec![8, 16], 256, 10);
        cfg.epsilon = 0.5;
        assert!(matches!(
            strong_error_study(&cfg),
            Err(Error::InadmissibleGauge {
                constraint: "Δ^{1/4}·g(Δ) ≤ 1",
                ..
            })
        ));
        let mut cfg = example_b_config(vec![8, 16], 256, 10);
        cfg.driver = Driver::Jump {
            measure: MarkMeasure::new(1.0, MarkDistribution::Gauss(1.0)).unwrap(),
            p: 3.0,
            quadrature_nodes: 8,
        };
        assert!(matches!(
            strong_error_study(&cfg),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn jump_study_runs() {
        let mut cfg = StudyConfig::new(
            Arc::new(make_jump_example()),
            InitialSegment::constant(1.0, vec![0.5]).unwrap(),
            1.0,
            2.0,
            vec![8, 16],
            128,
            0.08,
            40,
            3,
        );
        cfg.driver = Driver::Jump {
            measure: MarkMeasure::new(1.0, MarkDistribution::Gauss(1.0)).unwrap(),
            p: 3.0,
            quadrature_nodes: 16,
        };
        cfg.bootstrap = 50;
        let rep = strong_error_study(&cfg).unwrap();
        assert!(rep
            .levels
            .iter()
            .all(|l| l.root_error > 0.0 && l.std_err >= 0.0));
        assert!(rep.rate.unwrap().fit.slope.is_finite());
    }

    #[test]
    fn theory_warnings() {
        let mut cfg = example_b_config(vec![8, 16], 128, 5);
        cfg.theory = Some(AssumptionParams {
            p: 3.0,
            q: 2.0,
            l: 3.0,
            ..Default::default()
        });
        let (_, warnings) = cfg.validate().unwrap();
        assert!(
            warnings.iter().any(|w| w.contains("q·l < 2p")),
            "{warnings:?}"
        );
    }
}
