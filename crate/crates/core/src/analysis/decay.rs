use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{fit_line, mean, stderr};
use crate::io::fixed_point::{quantize, FixedPointWord};
use crate::network::ReservoirSpec;
use crate::sim::{simulate, EngineKind, InputSchedule, SimConfig, DEFAULT_STEP_NS};
use crate::{Error, Result};

/// Fading-memory experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayConfig {
    /// Input samples before and after `t = 0`.
    pub n_samples_each_side: usize,
    pub repetitions: usize,
    /// Fraction of the non-zero part of `d(t)` used for the fit.
    pub fit_window: f64,
    pub sample_period_ns: f64,
    pub record_grid_ns: f64,
    /// Moving-average length applied to `d(t)` before taking logs.
    pub smoothing: usize,
    pub engine: EngineKind,
    pub step_ns: f64,
    pub seed: u64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            n_samples_each_side: 200,
            repetitions: 20,
            fit_window: 0.8,
            sample_period_ns: 6.25,
            record_grid_ns: 6.25,
            smoothing: 5,
            engine: EngineKind::EventDriven,
            step_ns: DEFAULT_STEP_NS,
            seed: 0,
        }
    }
}

impl DecayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("decay config", reason));
        if self.n_samples_each_side == 0 {
            return bad("n_samples_each_side must be positive".into());
        }
        if self.repetitions < 3 {
            return bad(format!("need at least 3 repetitions, got {}", self.repetitions));
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return bad(format!("fit_window {} must lie in (0, 1]", self.fit_window));
        }
        if !(self.sample_period_ns > 0.0 && self.record_grid_ns > 0.0) {
            return bad("periods must be positive".into());
        }
        if self.smoothing == 0 {
            return bad("smoothing length must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    /// Mean decay time over the retained repetitions.
    pub lambda_ns: f64,
    pub stderr_ns: f64,
    pub per_repetition_ns: Vec<f64>,
    pub discarded: usize,
}

/// Distances `‖X₁ − X₂‖₂` sampled on the record grid from `t = 0`.
pub fn state_distance(
    spec: &ReservoirSpec,
    u1: &[FixedPointWord],
    u2: &[FixedPointWord],
    n_before: usize,
    cfg: &DecayConfig,
) -> Result<Vec<f64>> {
    let duration = u1.len() as f64 * cfg.sample_period_ns;
    let sim = SimConfig::new(cfg.engine, duration, cfg.record_grid_ns).with_step(cfg.step_ns);
    let t0 = n_before as f64 * cfg.sample_period_ns;
    let run = |u: &[FixedPointWord]| -> Result<_> {
        let schedule = InputSchedule::new(cfg.sample_period_ns, u.to_vec())?;
        let mut trace = simulate(spec, &schedule, &sim)?;
        trace.transitions.clear();
        Ok(trace)
    };
    let (a, b) = (run(u1)?, run(u2)?);
    Ok(a.times_ns
        .iter()
        .zip(a.boolean_states.iter().zip(&b.boolean_states))
        .filter(|(t, _)| **t >= t0 - 1e-9)
        .map(|(_, (x, y))| {
            let diff = x.iter().zip(y).filter(|(p, q)| p != q).count();
            (diff as f64).sqrt()
        })
        .collect())
}

/// Decay time from one distance curve, or `None` when the states never
/// differ or too few points remain for a fit.
///
/// `d` is smoothed with a centred moving average (truncated at the ends);
/// the fit covers the first `fit_window` fraction of samples up to the point
/// where the smoothed curve vanishes for good, skipping zeros.
pub fn fit_decay(d: &[f64], grid_ns: f64, fit_window: f64, smoothing: usize) -> Option<f64> {
    let last = d.iter().rposition(|&v| v > 0.0)?;
    let half = smoothing / 2;
    let smoothed: Vec<f64> = (0..d.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + smoothing - half).min(d.len());
            mean(&d[lo..hi])
        })
        .collect();
    let support = (last + half + 1).min(d.len());
    let len = ((support as f64) * fit_window).ceil() as usize;
    let (t, y): (Vec<f64>, Vec<f64>) = smoothed[..len.max(1)]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i as f64 * grid_ns, v.ln()))
        .unzip();
    let fit = fit_line(&t, &y).ok()?;
    Some(-1.0 / fit.slope)
}

/// Repeat the two-input convergence experiment and fit `exp(-t/λ)`.
pub fn measure_decay_time(spec: &ReservoirSpec, cfg: &DecayConfig) -> Result<DecayResult> {
    cfg.validate()?;
    let n = cfg.n_samples_each_side;
    let n_bits = spec.n_bits();
    let fits: Vec<Option<f64>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<Option<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64);
            let mut draw = || quantize(rng.gen_range(-1.0..1.0), n_bits);
            let u1: Vec<FixedPointWord> = (0..2 * n).map(|_| draw()).collect::<Result<_>>()?;
            let mut u2 = u1.clone();
            for w in u2.iter_mut().take(n) {
                *w = draw()?;
            }
            let d = state_distance(spec, &u1, &u2, n, cfg)?;
            Ok(fit_decay(&d, cfg.record_grid_ns, cfg.fit_window, cfg.smoothing))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = fits.iter().flatten().copied().collect();
    let discarded = fits.len() - kept.len();
    if discarded > 0 {
        warn!("decay: {discarded} of {} repetitions discarded (states never differed)", fits.len());
    }
    if kept.is_empty() {
        return Err(Error::Decay(format!(
            "all {} repetitions discarded: the driven states never differed",
            fits.len()
        )));
    }
    Ok(DecayResult {
        lambda_ns: mean(&kept),
        stderr_ns: stderr(&kept),
        per_repetition_ns: kept,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_reservoir, Hyperparams};

    #[test]
    fn fit_recovers_pure_exponential() {
        let grid = 2.0;
        let d: Vec<f64> = (0..100).map(|i| 10.0 * (-(i as f64) * grid / 15.0).exp()).collect();
        let lambda = fit_decay(&d, grid, 0.8, 1).unwrap();
        assert!((lambda - 15.0).abs() < 1e-9, "{lambda}");
    }

    #[test]
    fn fit_ignores_trailing_zeros() {
        let grid = 1.0;
        let mut d: Vec<f64> = (0..40).map(|i| (-(i as f64) / 8.0).exp()).collect();
        d.extend(std::iter::repeat(0.0).take(200));
        let lambda = fit_decay(&d, grid, 0.8, 1).unwrap();
        assert!((lambda - 8.0).abs() < 1e-9, "{lambda}");
    }

    #[test]
    fn identical_curves_are_discarded() {
        assert_eq!(fit_decay(&[0.0; 50], 1.0, 0.8, 5), None);
    }

    #[test]
    fn identical_inputs_give_zero_distance() {
        let spec = build_reservoir(&Hyperparams {
            n_nodes: 20,
            seed: 3,
            ..Hyperparams::default()
        })
        .unwrap();
        let cfg = DecayConfig {
            n_samples_each_side: 20,
            ..DecayConfig::default()
        };
        let u: Vec<_> = (0..40)
            .map(|i| quantize(((i * 7) % 11) as f64 / 11.0 - 0.5, 8).unwrap())
            .collect();
        let d = state_distance(&spec, &u, &u, 20, &cfg).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        assert_eq!(fit_decay(&d, cfg.record_grid_ns, 0.8, 5), None);
    }

    #[test]
    fn single_input_node_forgets_within_a_few_cycles() {
        let gamma = 0.3;
        let spec = ReservoirSpec::from_parts(
            Hyperparams {
                n_nodes: 1,
                in_degree: 1,
                ..Hyperparams::default()
            },
            vec![vec![0.0]],
            vec![1.0],
            vec![vec![0.0]],
            vec![gamma],
            vec![0.5],
            0.19,
        )
        .unwrap();
        let cfg = DecayConfig {
            n_samples_each_side: 40,
            repetitions: 30,
            ..DecayConfig::default()
        };
        let r = measure_decay_time(&spec, &cfg).unwrap();
        let scale = gamma + cfg.sample_period_ns;
        assert!(r.lambda_ns > 0.0);
        assert!(r.lambda_ns > 0.1 * scale && r.lambda_ns < 10.0 * scale, "{r:?}");
        assert!(r.discarded > 0);
    }

    #[test]
    fn rejects_bad_config() {
        let spec = build_reservoir(&Hyperparams {
            n_nodes: 10,
            ..Hyperparams::default()
        })
        .unwrap();
        let cfg = DecayConfig {
            repetitions: 2,
            ..DecayConfig::default()
        };
        assert!(measure_decay_time(&spec, &cfg).is_err());
    }
}
