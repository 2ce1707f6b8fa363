use crate::mackey_glass::TimeSeries;
use crate::{Error, Result};

/// Root-mean-square error over the samples whose offset from the series
/// start lies in `[0, horizon]`, normalised by `variance`.
///
/// Both series are compared in MG time units and must share start time and
/// spacing. `horizon` is in MG units.
pub fn nrmse(target: &TimeSeries, predicted: &TimeSeries, horizon: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid("variance", format!("{variance} must be positive")));
    }
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon", format!("{horizon} must be non-negative")));
    }
    let (a, b) = (target.in_mg_units(), predicted.in_mg_units());
    let tol = 1e-9 * a.dt.max(1.0);
    if (a.dt - b.dt).abs() > tol || (a.t0 - b.t0).abs() > 1e-9 * a.t0.abs().max(1.0) {
        return Err(Error::invalid(
            "nrmse",
            format!(
                "series are not aligned (t0 {} vs {}, dt {} vs {})",
                a.t0, b.t0, a.dt, b.dt
            ),
        ));
    }
    let m = samples_within(horizon, a.dt);
    if m == 0 || a.len() < m || b.len() < m {
        return Err(Error::invalid(
            "nrmse",
            format!("window needs {m} samples, have {} and {}", a.len(), b.len()),
        ));
    }
    let sse: f64 = a.values[..m]
        .iter()
        .zip(&b.values[..m])
        .map(|(u, v)| (u - v).powi(2))
        .sum();
    Ok((sse / (m as f64 * variance)).sqrt())
}

/// Number of samples at offsets `0, dt, 2dt, …` not exceeding `horizon`.
pub fn samples_within(horizon: f64, dt: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize + 1
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (zero for fewer than two values).
pub fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::invalid("line fit", format!("need matching data with ≥ 2 points, got {n}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("line fit", "x values are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = if n > 2 {
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mackey_glass::TimeUnits;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(0.0, 5.0, values, TimeUnits::Mg).unwrap()
    }

    #[test]
    fn identical_series_score_zero() {
        let a = series((0..30).map(|i| (i as f64).sin()).collect());
        assert_eq!(nrmse(&a, &a, 116.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn offset_equal_to_std_scores_one() {
        let a = series((0..30).map(|i| (i as f64 * 0.3).cos()).collect());
        let sigma2: f64 = 0.04;
        let b = series(a.values.iter().map(|v| v + sigma2.sqrt()).collect());
        assert!((nrmse(&a, &b, 116.0, sigma2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_covers_one_lyapunov_time() {
        assert_eq!(samples_within(116.0, 5.0), 24);
        assert_eq!(samples_within(115.0, 5.0), 24);
        assert_eq!(samples_within(0.0, 5.0), 1);
        // only the first 24 samples count
        let a = series(vec![0.0; 30]);
        let mut v = vec![0.0; 30];
        v[24] = 100.0;
        assert_eq!(nrmse(&a, &series(v), 116.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn amplitude_and_shift_invariance() {
        let u: Vec<f64> = (0..24).map(|i| (i as f64 * 0.4).sin()).collect();
        let v: Vec<f64> = u.iter().map(|x| x * 0.9 + 0.05).collect();
        let base = nrmse(&series(u.clone()), &series(v.clone()), 116.0, 0.3).unwrap();
        let scaled = nrmse(
            &series(u.iter().map(|x| 3.0 * x).collect()),
            &series(v.iter().map(|x| 3.0 * x).collect()),
            116.0,
            0.3 * 9.0,
        )
        .unwrap();
        assert!((base - scaled).abs() < 1e-12);
        let shifted = nrmse(
            &series(u.iter().map(|x| x + 2.0).collect()),
            &series(v.iter().map(|x| x + 2.0).collect()),
            116.0,
            0.3,
        )
        .unwrap();
        assert!((base - shifted).abs() < 1e-12);
    }

    #[test]
    fn nanosecond_series_align_with_mg_series() {
        let a = TimeSeries::new(50.0, 5.0, vec![0.1; 24], TimeUnits::Mg).unwrap();
        let b = TimeSeries::new(62.5, 6.25, vec![0.1; 24], TimeUnits::Ns).unwrap();
        assert_eq!(nrmse(&a, &b, 116.0, 1.0).unwrap(), 0.0);
        let c = TimeSeries::new(0.0, 6.25, vec![0.1; 24], TimeUnits::Ns).unwrap();
        assert!(nrmse(&a, &c, 116.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = series(vec![0.0; 10]);
        assert!(nrmse(&a, &a, 116.0, 1.0).is_err());
        assert!(nrmse(&a, &a, 10.0, 0.0).is_err());
        assert!(nrmse(&a, &a, -1.0, 1.0).is_err());
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((stderr(&[1.0, 2.0, 3.0]) - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(stderr(&[1.0]), 0.0);
    }
}
