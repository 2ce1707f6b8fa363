//! End-to-end Mackey-Glass prediction: data, reservoir drive, readout
//! training and autonomous trials.

use serde::{Deserialize, Serialize};

use crate::analysis::decay::DecayConfig;
use crate::analysis::metrics::{nrmse, samples_within};
use crate::analysis::sweep::SweepGrid;
use crate::io::closed_loop::{design_matrix, ClockedReservoir, ClockedRun};
use crate::io::fixed_point::{quantize, FixedPointWord};
use crate::io::readout::{default_ridge_grid, select_ridge_loo, TrainedReadout};
use crate::mackey_glass::{
    generate_dataset, MgParams, TimeSeries, TimeUnits, DEFAULT_SAMPLE_DT_MG, DEFAULT_TRANSIENT_MG,
    LYAPUNOV_TIME_MG,
};
use crate::network::{build_reservoir, Hyperparams, ReservoirSpec};
use crate::sim::{EngineKind, SimConfig, DEFAULT_STEP_NS};
use crate::{Error, Result};

/// Settle time before the training window, in units of the mean link delay.
pub const SETTLE_DELAYS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionTask {
    pub mg: MgParams,
    pub transient_mg: f64,
    pub sample_dt_mg: f64,
    pub t_sample_ns: f64,
    pub train_samples: usize,
    /// Drive time discarded before training; `None` means 50 mean delays.
    pub settle_ns: Option<f64>,
    /// Scoring window in MG units.
    pub horizon_mg: f64,
    /// Autonomous cycles per trial; at least the scoring window.
    pub free_run_cycles: Option<usize>,
    pub trials: usize,
    /// Samples between the starts of consecutive trials.
    pub trial_spacing: usize,
    pub ridge_grid: Vec<f64>,
    pub latency_cycles: usize,
    pub engine: EngineKind,
    pub step_ns: f64,
}

impl Default for PredictionTask {
    fn default() -> Self {
        Self {
            mg: MgParams::default(),
            transient_mg: DEFAULT_TRANSIENT_MG,
            sample_dt_mg: DEFAULT_SAMPLE_DT_MG,
            t_sample_ns: 6.25,
            train_samples: 1500,
            settle_ns: None,
            horizon_mg: LYAPUNOV_TIME_MG,
            free_run_cycles: None,
            trials: 1,
            trial_spacing: 200,
            ridge_grid: default_ridge_grid(),
            latency_cycles: 1,
            engine: EngineKind::EventDriven,
            step_ns: DEFAULT_STEP_NS,
        }
    }
}

impl PredictionTask {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("prediction task", reason));
        self.mg.validate()?;
        self.clock().validate()?;
        if self.train_samples == 0 {
            return bad("train_samples must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.horizon_mg >= 0.0 && self.sample_dt_mg > 0.0 && self.transient_mg >= 0.0) {
            return bad("horizon, sampling interval and transient must be non-negative".into());
        }
        if self.ridge_grid.is_empty() || self.ridge_grid.iter().any(|r| !(*r >= 0.0)) {
            return bad("ridge grid must be non-empty and non-negative".into());
        }
        if let Some(s) = self.settle_ns {
            if !(s >= 0.0) {
                return bad(format!("settle time {s} ns must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn clock(&self) -> ClockedRun {
        ClockedRun {
            sample_period_ns: self.t_sample_ns,
            latency_cycles: self.latency_cycles,
            ns_per_mg: self.t_sample_ns / self.sample_dt_mg,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.engine, self.t_sample_ns, self.t_sample_ns).with_step(self.step_ns)
    }

    pub fn settle_cycles(&self, hp: &Hyperparams) -> usize {
        let ns = self.settle_ns.unwrap_or(SETTLE_DELAYS * hp.mean_delay_ns);
        ((ns / self.t_sample_ns) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn scored_samples(&self) -> usize {
        samples_within(self.horizon_mg, self.sample_dt_mg)
    }

    pub fn run_cycles(&self) -> usize {
        self.free_run_cycles.unwrap_or(0).max(self.scored_samples())
    }

    /// First autonomous edge of trial `j`.
    pub fn trial_start(&self, hp: &Hyperparams, j: usize) -> usize {
        self.settle_cycles(hp) + self.train_samples + 1 + j * self.trial_spacing
    }

    fn warmup_cycles(&self, hp: &Hyperparams) -> usize {
        (2 * self.settle_cycles(hp)).max(self.latency_cycles)
    }
}

/// Normalised, resampled Mackey-Glass data long enough for every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionData {
    pub series: TimeSeries,
    pub words: Vec<FixedPointWord>,
    /// Variance of the whole normalised series, used to scale errors.
    pub variance: f64,
}

impl PredictionData {
    pub fn generate(task: &PredictionTask, hp: &Hyperparams) -> Result<Self> {
        task.validate()?;
        let len = task.trial_start(hp, task.trials - 1) + task.run_cycles();
        let series = generate_dataset(&task.mg, task.transient_mg, len, task.sample_dt_mg)?;
        Self::from_series(series, hp.input_bits)
    }

    pub fn from_series(series: TimeSeries, n_bits: u32) -> Result<Self> {
        let words = series
            .values
            .iter()
            .map(|&v| quantize(v, n_bits))
            .collect::<Result<_>>()?;
        let variance = series.variance();
        Ok(Self {
            series,
            words,
            variance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub start_cycle: usize,
    pub nrmse: f64,
    pub predicted: TimeSeries,
    pub truth: TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub readout: TrainedReadout,
    pub variance: f64,
    pub trials: Vec<TrialOutcome>,
}

impl PredictionOutcome {
    pub fn nrmse_values(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.nrmse).collect()
    }
}

/// Drive through the training window and fit the readout. Returns the
/// reservoir positioned at the first autonomous edge of trial 0.
pub fn train_readout(
    spec: &ReservoirSpec,
    data: &PredictionData,
    task: &PredictionTask,
) -> Result<(TrainedReadout, ClockedReservoir)> {
    let hp = &spec.hyperparams;
    let first = task.settle_cycles(hp) + 1;
    let end = task.trial_start(hp, 0);
    if data.words.len() < end {
        return Err(Error::invalid(
            "prediction data",
            format!("{} samples, training needs {end}", data.words.len()),
        ));
    }
    let mut res = ClockedReservoir::new(spec, &task.clock(), &task.sim_config())?;
    res.drive(&data.words[..end])?;
    let (a, y) = design_matrix(res.states(), res.words(), first.max(task.latency_cycles), end, task.latency_cycles)?;
    let readout = select_ridge_loo(&a, &y, &task.ridge_grid)?;
    Ok((readout, res))
}

/// Autonomous run from `start`, scored against the data.
fn score_trial(
    res: &mut ClockedReservoir,
    readout: &TrainedReadout,
    data: &PredictionData,
    task: &PredictionTask,
    start: usize,
) -> Result<TrialOutcome> {
    let cycles = task.run_cycles();
    if data.words.len() < start + cycles {
        return Err(Error::invalid(
            "prediction data",
            format!("{} samples, trial needs {}", data.words.len(), start + cycles),
        ));
    }
    let words = res.run_autonomous(readout, cycles, task.latency_cycles)?;
    let predicted = TimeSeries {
        t0: start as f64 * task.t_sample_ns,
        dt: task.t_sample_ns,
        values: words.iter().map(|w| w.value()).collect(),
        units: TimeUnits::Ns,
        unit_map_ns_per_mg: task.clock().ns_per_mg,
    };
    let truth = TimeSeries {
        t0: start as f64 * task.sample_dt_mg,
        dt: task.sample_dt_mg,
        values: data.series.values[start..start + cycles].to_vec(),
        units: TimeUnits::Mg,
        unit_map_ns_per_mg: task.clock().ns_per_mg,
    };
    let score = nrmse(&truth, &predicted, task.horizon_mg, data.variance)?;
    Ok(TrialOutcome {
        start_cycle: start,
        nrmse: score,
        predicted,
        truth,
    })
}

/// Run every trial of `task` with an already trained readout. Trial 0
/// continues from `trained`; later trials start from a fresh reservoir
/// warmed up on the data preceding their start.
pub fn run_trials(
    spec: &ReservoirSpec,
    readout: &TrainedReadout,
    trained: Option<ClockedReservoir>,
    data: &PredictionData,
    task: &PredictionTask,
) -> Result<Vec<TrialOutcome>> {
    let hp = &spec.hyperparams;
    let mut out = Vec::with_capacity(task.trials);
    let mut trained = trained;
    for j in 0..task.trials {
        let start = task.trial_start(hp, j);
        let mut res = match trained.take() {
            Some(r) if r.cycle() == start => r,
            _ => {
                let warm = task.warmup_cycles(hp).min(start);
                let mut r = ClockedReservoir::new(spec, &task.clock(), &task.sim_config())?;
                r.drive(&data.words[start - warm..start])?;
                r
            }
        };
        let mut trial = score_trial(&mut res, readout, data, task, start)?;
        trial.start_cycle = start;
        out.push(trial);
    }
    Ok(out)
}

/// Train on `data` and score all trials.
pub fn run_prediction(
    spec: &ReservoirSpec,
    data: &PredictionData,
    task: &PredictionTask,
) -> Result<PredictionOutcome> {
    let (readout, res) = train_readout(spec, data, task)?;
    let trials = run_trials(spec, &readout, Some(res), data, task)?;
    Ok(PredictionOutcome {
        readout,
        variance: data.variance,
        trials,
    })
}

/// Build a reservoir from `hp`, generate data and run the prediction task.
pub fn predict_with(hp: &Hyperparams, task: &PredictionTask) -> Result<(ReservoirSpec, PredictionOutcome)> {
    let spec = build_reservoir(hp)?;
    let data = PredictionData::generate(task, hp)?;
    let outcome = run_prediction(&spec, &data, task)?;
    Ok((spec, outcome))
}

/// Everything a command-line run needs, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub hyperparams: Hyperparams,
    pub task: PredictionTask,
    /// Reservoir seeds for multi-seed runs.
    pub seeds: Vec<u64>,
    pub decay: DecayConfig,
    pub sweeps: Vec<SweepGrid>,
    /// Length of the generated raw Mackey-Glass run, in MG units.
    pub generate_duration_mg: f64,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hyperparams: Hyperparams::default(),
            task: PredictionTask::default(),
            seeds: vec![0, 1, 2, 3, 4],
            decay: DecayConfig::default(),
            sweeps: Vec::new(),
            generate_duration_mg: 10_000.0,
            output_dir: "out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.task.validate()?;
        self.decay.validate()?;
        for s in &self.sweeps {
            s.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("experiment config", "no seeds given"));
        }
        if !(self.generate_duration_mg > 0.0 && self.generate_duration_mg.is_finite()) {
            return Err(Error::invalid(
                "experiment config",
                format!("generate_duration_mg = {} must be positive", self.generate_duration_mg),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_task() -> PredictionTask {
        PredictionTask {
            train_samples: 200,
            settle_ns: Some(100.0),
            trials: 2,
            trial_spacing: 30,
            ..PredictionTask::default()
        }
    }

    fn small_hp() -> Hyperparams {
        Hyperparams {
            n_nodes: 30,
            seed: 5,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn one_lyapunov_time_scores_24_samples() {
        assert_eq!(PredictionTask::default().scored_samples(), 24);
        assert_eq!(PredictionTask::default().settle_cycles(&Hyperparams::default()), 88);
    }

    #[test]
    fn zero_readout_scores_signal_energy() {
        let (task, hp) = (small_task(), small_hp());
        let spec = build_reservoir(&hp).unwrap();
        let data = PredictionData::generate(&task, &hp).unwrap();
        let zero = TrainedReadout::zeros(hp.n_nodes);
        let trials = run_trials(&spec, &zero, None, &data, &task).unwrap();
        assert_eq!(trials.len(), 2);
        for t in trials {
            let u = &data.series.values[t.start_cycle..t.start_cycle + 24];
            let expect = (u.iter().map(|v| v * v).sum::<f64>() / 24.0 / data.variance).sqrt();
            assert!((t.nrmse - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn trained_prediction_is_deterministic_and_finite() {
        let (task, hp) = (small_task(), small_hp());
        let (_, a) = predict_with(&hp, &task).unwrap();
        let (_, b) = predict_with(&hp, &task).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.readout.weights.len(), 31);
        assert!(a.trials.iter().all(|t| t.nrmse.is_finite()));
        assert_eq!(a.trials[0].start_cycle, task.trial_start(&hp, 0));
        assert_eq!(a.trials[1].start_cycle, task.trial_start(&hp, 0) + 30);
    }

    #[test]
    fn config_round_trips_through_toml_friendly_serde() {
        let cfg = ExperimentConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seeds":[7]}"#).unwrap();
        assert_eq!(partial.seeds, vec![7]);
        assert_eq!(partial.task.train_samples, 1500);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.task.ridge_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.generate_duration_mg = 0.0;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
