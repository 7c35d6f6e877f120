//! Log-log regression of strong errors and its path bootstrap.

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{stream_rng, STREAM_BOOTSTRAP};

/// Ordinary least squares fit of `log(error) = intercept + slope·log(Δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// A fit together with its bootstrap 95% interval for the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub fit: RateFit,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Bootstrap replicates that produced a finite slope.
    pub replicates: usize,
}

/// Fits the slope of `log(error)` against `log(Δ)`.
///
/// Two points give the exact secant slope.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::NotFittable(format!(
            "need at least two levels, got {}",
            points.len()
        )));
    }
    if let Some(&(d, e)) = points.iter().find(|(_, e)| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::NotFittable(format!(
            "error {e} at Δ = {d} has no finite logarithm"
        )));
    }
    if points.iter().any(|(d, _)| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter(
            "step sizes must be positive".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    for i in 0..xs.len() {
        for j in 0..i {
            if xs[i] == xs[j] {
                return Err(Error::InvalidParameter(format!(
                    "duplicate step size Δ = {}",
                    points[i].0
                )));
            }
        }
    }
    if xs.len() == 2 {
        let slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return Ok(RateFit {
            slope,
            intercept: ys[0] - slope * xs[0],
            r2: 1.0,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r2,
    })
}

/// Root error `(mean e^q)^{1/q}` per level over the given path indices.
pub(crate) fn root_errors(
    per_path: &[Vec<f64>],
    q: f64,
    idx: impl Iterator<Item = usize> + Clone,
) -> Vec<f64> {
    let levels = per_path.first().map_or(0, Vec::len);
    (0..levels)
        .map(|j| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for i in idx.clone() {
                let e = per_path[i][j];
                sum += if q == 2.0 { e * e } else { e.powf(q) };
                n += 1;
            }
            if q == 2.0 {
                (sum / n as f64).sqrt()
            } else {
                (sum / n as f64).powf(1.0 / q)
            }
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data, `p ∈ [0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap 95% interval of the fitted slope.
///
/// `per_path[i][j]` is the error of path `i` at level `j` with step
/// `deltas[j]`. Each replicate resamples whole paths with replacement and
/// re-aggregates every level, so the coupling between levels is kept.
/// Replicates with a zero level error are skipped.
pub fn bootstrap_slope_ci(
    per_path: &[Vec<f64>],
    deltas: &[f64],
    q: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64, usize)> {
    let n = per_path.len();
    if n == 0 || replicates == 0 {
        return Err(Error::InvalidParameter(
            "bootstrap needs paths and replicates".into(),
        ));
    }
    if per_path.iter().any(|row| row.len() != deltas.len()) {
        return Err(Error::InvalidParameter(
            "per-path errors do not match the level count".into(),
        ));
    }
    let mut rng = stream_rng(seed, 0, STREAM_BOOTSTRAP);
    let mut slopes = Vec::with_capacity(replicates);
    let mut draw = vec![0usize; n];
    for _ in 0..replicates {
        for d in draw.iter_mut() {
            *d = rng.random_range(0..n);
        }
        let roots = root_errors(per_path, q, draw.iter().copied());
        let points: Vec<(f64, f64)> = deltas.iter().copied().zip(roots).collect();
        if let Ok(fit) = fit_rate(&points) {
            slopes.push(fit.slope);
        }
    }
    if slopes.len() * 2 < replicates {
        return Err(Error::NotFittable(format!(
            "only {} of {replicates} bootstrap replicates were fittable",
            slopes.len()
        )));
    }
    slopes.sort_by(f64::total_cmp);
    Ok((
        percentile(&slopes, 0.025),
        percentile(&slopes, 0.975),
        slopes.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&d| (d, 3.0 * f64::powf(d, 0.5)))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_secant() {
        let pts = [(0.1, 0.3), (0.05, 0.2)];
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(
            fit.slope,
            (0.2f64.ln() - 0.3f64.ln()) / (0.05f64.ln() - 0.1f64.ln())
        );
    }

    #[test]
    fn zero_error_is_not_fittable() {
        assert!(matches!(
            fit_rate(&[(0.1, 0.0), (0.05, 0.1)]),
            Err(Error::NotFittable(_))
        ));
        assert!(matches!(
            fit_rate(&[(0.1, 0.2)]),
            Err(Error::NotFittable(_))
        ));
        assert!(matches!(
            fit_rate(&[(0.1, 0.2), (0.1, 0.3)]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets_slope() {
        let deltas: [f64; 4] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let mut rng = stream_rng(1, 0, 7);
        let per_path: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                deltas
                    .iter()
                    .map(|d| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        3.0 * d.sqrt() * (1.0 + 0.1 * z)
                    })
                    .collect()
            })
            .collect();
        let a = bootstrap_slope_ci(&per_path, &deltas, 2.0, 1000, 5).unwrap();
        let b = bootstrap_slope_ci(&per_path, &deltas, 2.0, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.0 <= 0.5 && 0.5 <= a.1, "{a:?}");
        assert_eq!(a.2, 1000);
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(slope in 0.05f64..2.0, c in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = (3..8).map(|k| {
                let d = 2f64.powi(-k);
                (d, c * d.powf(slope))
            }).collect();
            let fit = fit_rate(&pts).unwrap();
            prop_assert!((fit.slope - slope).abs() < 1e-10);
            prop_assert!(fit.r2 > 1.0 - 1e-10);
        }
    }
}
