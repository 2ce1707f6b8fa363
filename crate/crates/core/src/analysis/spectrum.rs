use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::mackey_glass::TimeSeries;
use crate::{Error, Result};

/// Welch segment length.
pub const SEGMENT_LEN: usize = 256;

/// Delay-embedding lag used for Mackey-Glass plots, in MG units. It is the
/// multiple of the 5-unit sampling interval closest to the MG delay of 17.
pub const DEFAULT_EMBED_DELAY_MG: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Non-negative frequencies in cycles per series time unit.
    pub freqs: Vec<f64>,
    /// Power normalised to a unit maximum.
    pub power: Vec<f64>,
    pub peak_freq: f64,
}

/// Averaged periodogram: Hann-windowed segments of 256 samples with 50 %
/// overlap, mean removed from the whole series first.
pub fn power_spectrum(series: &TimeSeries) -> Result<SpectrumResult> {
    let n = series.len();
    if n < SEGMENT_LEN {
        return Err(Error::Spectrum(format!(
            "series has {n} samples, need at least {SEGMENT_LEN}"
        )));
    }
    let m = series.mean();
    let centred: Vec<f64> = series.values.iter().map(|v| v - m).collect();
    let spread = centred.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if spread <= 1e-24 * (m * m).max(1e-300) {
        return Err(Error::Spectrum("series is constant; spectrum has no peak".into()));
    }
    let window: Vec<f64> = (0..SEGMENT_LEN)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / SEGMENT_LEN as f64;
            x.sin().powi(2)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(SEGMENT_LEN);
    let bins = SEGMENT_LEN / 2 + 1;
    let mut acc = vec![0.0; bins];
    let hop = SEGMENT_LEN / 2;
    let mut start = 0;
    while start + SEGMENT_LEN <= n {
        let mut buf: Vec<Complex<f64>> = centred[start..start + SEGMENT_LEN]
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        start += hop;
    }
    let peak = acc.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Spectrum("spectrum has no peak".into()));
    }
    let peak_bin = acc.iter().position(|&p| p == peak).unwrap_or(0);
    let df = 1.0 / (SEGMENT_LEN as f64 * series.dt);
    Ok(SpectrumResult {
        freqs: (0..bins).map(|k| k as f64 * df).collect(),
        power: acc.iter().map(|p| p / peak).collect(),
        peak_freq: peak_bin as f64 * df,
    })
}

/// Pairs `(u(t), u(t - delay))` for every sample with a valid lag.
pub fn delay_embed(series: &TimeSeries, embed_delay: f64) -> Result<Vec<(f64, f64)>> {
    let ratio = embed_delay / series.dt;
    let lag = ratio.round();
    if !(lag >= 0.0) || (ratio - lag).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Err(Error::invalid(
            "embedding delay",
            format!("{embed_delay} is not a multiple of the sample spacing {}", series.dt),
        ));
    }
    let lag = lag as usize;
    Ok((lag..series.len())
        .map(|i| (series.values[i], series.values[i - lag]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn of(points: &[(f64, f64)]) -> Option<Self> {
        let first = points.first()?;
        Some(points.iter().fold(
            BoundingBox {
                x_min: first.0,
                x_max: first.0,
                y_min: first.1,
                y_max: first.1,
            },
            |b, &(x, y)| BoundingBox {
                x_min: b.x_min.min(x),
                x_max: b.x_max.max(x),
                y_min: b.y_min.min(y),
                y_max: b.y_max.max(y),
            },
        ))
    }

    /// Grow each side by `fraction` of the box's extent along that axis.
    pub fn inflate(&self, fraction: f64) -> Self {
        let dx = (self.x_max - self.x_min) * fraction;
        let dy = (self.y_max - self.y_min) * fraction;
        BoundingBox {
            x_min: self.x_min - dx,
            x_max: self.x_max + dx,
            y_min: self.y_min - dy,
            y_max: self.y_max + dy,
        }
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}
