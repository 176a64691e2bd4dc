//! Log-log rate fits on seed-averaged metric traces.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::engine::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub seeds: usize,
}

/// Least-squares line through `(ln t, ln metric)` for `t` in the closed
/// window.
pub fn fit_rate(points: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let inside: Vec<(f64, f64)> = points.iter().copied().filter(|&(t, _)| t >= window.0 && t <= window.1).collect();
    if inside.len() < 5 {
        return Err(Error::TooFewPoints(inside.len()));
    }
    if let Some(&(t, value)) = inside.iter().find(|&&(_, m)| m.is_nan() || m <= 0.0) {
        return Err(Error::NonPositiveMetric { t, value });
    }
    let n = inside.len() as f64;
    let xs: Vec<f64> = inside.iter().map(|&(t, _)| libm::log(t)).collect();
    let ys: Vec<f64> = inside.iter().map(|&(_, m)| libm::log(m)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(RateFit { slope, intercept: my - slope * mx, window, points: inside.len(), seeds: 1 })
}

/// Arithmetic mean across traces at every `t` present in all of them.
pub fn mean_over_seeds(traces: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    first
        .iter()
        .filter_map(|&(t, _)| {
            let mut sum = 0.0;
            for trace in traces {
                let idx = trace.binary_search_by(|p| p.0.total_cmp(&t)).ok()?;
                sum += trace[idx].1;
            }
            Some((t, sum / traces.len() as f64))
        })
        .collect()
}

/// `(t, metric)` pairs from a record trace, skipping missing values.
pub fn trace<F>(records: &[RunRecord], metric: F) -> Vec<(f64, f64)>
where
    F: Fn(&RunRecord) -> Option<f64>,
{
    records.iter().filter_map(|r| metric(r).map(|m| (r.t as f64, m))).collect()
}

/// Seed-mean first, then the log-log fit.
pub fn fit_seed_mean(traces: &[Vec<(f64, f64)>], window: (f64, f64)) -> Result<RateFit> {
    let mean = mean_over_seeds(traces);
    let mut fit = fit_rate(&mean, window)?;
    fit.seeds = traces.len();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..60).map(|i| libm::pow(10.0, 3.0 + 2.0 * i as f64 / 59.0)).collect()
    }

    #[test]
    fn synthetic_curves() {
        let pts: Vec<_> = grid().into_iter().map(|t| (t, 1.0 / t)).collect();
        assert!((fit_rate(&pts, (1e3, 1e5)).unwrap().slope + 1.0).abs() < 1e-10);
        let pts: Vec<_> = grid().into_iter().map(|t| (t, libm::log(t) / libm::sqrt(t))).collect();
        let s = fit_rate(&pts, (1e3, 1e5)).unwrap().slope;
        assert!((-0.5..=-0.35).contains(&s), "{s}");
        let pts: Vec<_> = grid().into_iter().map(|t| (t, 3.0)).collect();
        assert!(fit_rate(&pts, (1e3, 1e5)).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_windows() {
        let pts: Vec<_> = grid().into_iter().map(|t| (t, 1.0)).collect();
        assert!(matches!(fit_rate(&pts[..3], (1e3, 1e5)), Err(Error::TooFewPoints(3))));
        let mut pts = pts;
        pts[10].1 = 0.0;
        assert!(matches!(fit_rate(&pts, (1e3, 1e5)), Err(Error::NonPositiveMetric { .. })));
    }

    #[test]
    fn mean_then_log() {
        let a = vec![(1.0, 1.0), (2.0, 3.0)];
        let b = vec![(1.0, 3.0), (2.0, 5.0), (3.0, 1.0)];
        assert_eq!(mean_over_seeds(&[a, b]), vec![(1.0, 2.0), (2.0, 4.0)]);
    }
}
