use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decay::{measure_decay_time, DecayConfig};
use super::metrics::{mean, median, stderr};
use crate::experiment::{run_prediction, PredictionData, PredictionTask};
use crate::network::{build_reservoir, Hyperparams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Rho,
    K,
    TauBar,
    Sigma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::K => "k",
            SweepAxis::TauBar => "tau_bar",
            SweepAxis::Sigma => "sigma",
        }
    }

    pub fn apply(self, base: &Hyperparams, value: f64) -> Result<Hyperparams> {
        let mut hp = base.clone();
        match self {
            SweepAxis::Rho => hp.spectral_radius = value,
            SweepAxis::K => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::invalid("sweep value", format!("k = {value} is not a positive integer")));
                }
                hp.in_degree = value as usize;
            }
            SweepAxis::TauBar => hp.mean_delay_ns = value,
            SweepAxis::Sigma => hp.input_density = value,
        }
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default = "default_reservoirs")]
    pub reservoirs_per_point: usize,
    #[serde(default = "default_trials")]
    pub trials_per_reservoir: usize,
    /// Also measure the decay time of every reservoir.
    #[serde(default)]
    pub measure_decay: bool,
}

fn default_reservoirs() -> usize {
    3
}
fn default_trials() -> usize {
    3
}

impl SweepGrid {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Self {
        Self {
            axis,
            values,
            reservoirs_per_point: default_reservoirs(),
            trials_per_reservoir: default_trials(),
            measure_decay: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep grid", "no values"));
        }
        if self.reservoirs_per_point == 0 || self.trials_per_reservoir == 0 {
            return Err(Error::invalid("sweep grid", "counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
    /// Every trial score at this point, reservoir-major.
    pub nrmse: Vec<f64>,
    pub nrmse_median: f64,
    pub nrmse_mean: f64,
    pub nrmse_stderr: f64,
    /// Mean decay time of each reservoir, when measured.
    pub lambda_ns: Vec<f64>,
    pub lambda_mean: f64,
    pub lambda_stderr: f64,
    /// Runs that failed, with their diagnostics.
    pub failures: Vec<String>,
}

struct RunResult {
    nrmse: Vec<f64>,
    lambda: Option<f64>,
}

/// Evaluate every grid value on `reservoirs_per_point` reservoirs. Reservoir
/// `r` at every point uses seed `base.seed + r`, so points differ only in the
/// swept hyperparameter.
pub fn run_sweep(
    grid: &SweepGrid,
    base: &Hyperparams,
    task: &PredictionTask,
    decay: &DecayConfig,
) -> Result<Vec<SweepPoint>> {
    grid.validate()?;
    task.validate()?;
    let task = PredictionTask {
        trials: grid.trials_per_reservoir,
        ..task.clone()
    };
    let jobs: Vec<(usize, usize)> = (0..grid.values.len())
        .flat_map(|p| (0..grid.reservoirs_per_point).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<RunResult>> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let mut hp = grid.axis.apply(base, grid.values[p])?;
            hp.seed = base.seed.wrapping_add(r as u64);
            let spec = build_reservoir(&hp)?;
            let data = PredictionData::generate(&task, &hp)?;
            let outcome = run_prediction(&spec, &data, &task)?;
            let lambda = if grid.measure_decay {
                Some(measure_decay_time(&spec, decay)?.lambda_ns)
            } else {
                None
            };
            Ok(RunResult {
                nrmse: outcome.nrmse_values(),
                lambda,
            })
        })
        .collect();

    let mut points: Vec<SweepPoint> = grid
        .values
        .iter()
        .map(|&value| SweepPoint {
            axis: grid.axis,
            value,
            nrmse: Vec::new(),
            nrmse_median: f64::NAN,
            nrmse_mean: f64::NAN,
            nrmse_stderr: f64::NAN,
            lambda_ns: Vec::new(),
            lambda_mean: f64::NAN,
            lambda_stderr: f64::NAN,
            failures: Vec::new(),
        })
        .collect();
    for (&(p, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(run) => {
                points[p].nrmse.extend(run.nrmse);
                points[p].lambda_ns.extend(run.lambda);
            }
            Err(e) => {
                warn!("sweep {}={} reservoir {r}: {e}", grid.axis.name(), grid.values[p]);
                points[p].failures.push(format!("reservoir {r}: {e}"));
            }
        }
    }
    for pt in &mut points {
        if !pt.nrmse.is_empty() {
            pt.nrmse_median = median(&pt.nrmse);
            pt.nrmse_mean = mean(&pt.nrmse);
            pt.nrmse_stderr = stderr(&pt.nrmse);
        }
        if !pt.lambda_ns.is_empty() {
            pt.lambda_mean = mean(&pt.lambda_ns);
            pt.lambda_stderr = stderr(&pt.lambda_ns);
        }
    }
    Ok(points)
}

/// One row per grid point.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut out: W, header: &[(&str, String)]) -> Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(
        out,
        "axis,value,runs,nrmse_median,nrmse_mean,nrmse_stderr,lambda_mean_ns,lambda_stderr_ns,failures"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.axis.name(),
            p.value,
            p.nrmse.len(),
            p.nrmse_median,
            p.nrmse_mean,
            p.nrmse_stderr,
            p.lambda_mean,
            p.lambda_stderr,
            p.failures.len()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_task() -> PredictionTask {
        PredictionTask {
            train_samples: 120,
            settle_ns: Some(60.0),
            ..PredictionTask::default()
        }
    }

    #[test]
    fn axis_application() {
        let base = Hyperparams::default();
        assert_eq!(SweepAxis::Rho.apply(&base, 0.5).unwrap().spectral_radius, 0.5);
        assert_eq!(SweepAxis::K.apply(&base, 3.0).unwrap().in_degree, 3);
        assert!(SweepAxis::K.apply(&base, 2.5).is_err());
        assert_eq!(SweepAxis::TauBar.apply(&base, 8.0).unwrap().mean_delay_ns, 8.0);
        assert!(SweepAxis::Sigma.apply(&base, 1.5).is_err());
    }

    #[test]
    fn sweep_is_reproducible_and_complete() {
        let base = Hyperparams {
            n_nodes: 16,
            seed: 11,
            ..Hyperparams::default()
        };
        let grid = SweepGrid {
            reservoirs_per_point: 2,
            trials_per_reservoir: 2,
            ..SweepGrid::new(SweepAxis::Sigma, vec![0.5, 1.0])
        };
        let a = run_sweep(&grid, &base, &tiny_task(), &DecayConfig::default()).unwrap();
        let b = run_sweep(&grid, &base, &tiny_task(), &DecayConfig::default()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.len(), 2);
        for p in &a {
            assert_eq!(p.nrmse.len(), 4);
            assert!(p.failures.is_empty());
            assert!(p.nrmse_median.is_finite());
        }
        let mut csv = Vec::new();
        write_sweep_csv(&a, &mut csv, &[("seed", "11".into())]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("# seed=11\naxis,value"));
    }

    #[test]
    fn empty_grid_rejected() {
        let grid = SweepGrid::new(SweepAxis::Rho, vec![]);
        assert!(run_sweep(&grid, &Hyperparams::default(), &tiny_task(), &DecayConfig::default()).is_err());
    }
}
