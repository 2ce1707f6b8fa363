//! Clocked operation: latching states on the global clock, building the
//! training design matrix, and autonomous prediction with the readout fed
//! back as the next input word.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fixed_point::{quantize, FixedPointWord};
use super::readout::TrainedReadout;
use crate::mackey_glass::{TimeSeries, TimeUnits, DEFAULT_NS_PER_MG};
use crate::network::ReservoirSpec;
use crate::sim::{check_word_widths, new_engine, ns_to_ticks, Engine, SimConfig, Tick};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockedRun {
    /// Input hold time, equal to the global clock period.
    pub sample_period_ns: f64,
    /// Cycles between latching a state and its output reaching the input.
    pub latency_cycles: usize,
    /// Nanoseconds per MG time unit for labelling outputs.
    pub ns_per_mg: f64,
}

impl Default for ClockedRun {
    fn default() -> Self {
        Self {
            sample_period_ns: 6.25,
            latency_cycles: 1,
            ns_per_mg: DEFAULT_NS_PER_MG,
        }
    }
}

impl ClockedRun {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_ns > 0.0) || ns_to_ticks(self.sample_period_ns) == 0 {
            return Err(Error::invalid(
                "clocked run",
                format!("sample period {} ns must be positive", self.sample_period_ns),
            ));
        }
        if self.latency_cycles == 0 {
            return Err(Error::invalid("clocked run", "latency must be at least one cycle"));
        }
        if !(self.ns_per_mg > 0.0) {
            return Err(Error::invalid("clocked run", "unit map must be positive"));
        }
        Ok(())
    }

    /// Per-cycle mode bits: `false` while stored words drive the reservoir,
    /// `true` once the output is fed back.
    pub fn mode_schedule(&self, warmup_cycles: usize, horizon_cycles: usize) -> Vec<bool> {
        let mut modes = vec![false; warmup_cycles];
        modes.resize(warmup_cycles + horizon_cycles, true);
        modes
    }
}

/// A reservoir advanced one clock cycle at a time.
///
/// At edge `c` the engine is brought to `c·T`, word `w_c` is applied and the
/// Boolean state is latched as `X_c`.
pub struct ClockedReservoir {
    engine: Box<dyn Engine>,
    period: Tick,
    n_bits: u32,
    n_nodes: usize,
    states: Vec<Vec<bool>>,
    words: Vec<FixedPointWord>,
}

impl ClockedReservoir {
    pub fn new(spec: &ReservoirSpec, clk: &ClockedRun, sim: &SimConfig) -> Result<Self> {
        clk.validate()?;
        let cfg = SimConfig {
            record_grid_ns: clk.sample_period_ns,
            duration_ns: clk.sample_period_ns,
            ..sim.clone()
        };
        let mut engine = new_engine(spec, &cfg)?;
        engine.set_logging(false);
        Ok(Self {
            engine,
            period: ns_to_ticks(clk.sample_period_ns),
            n_bits: spec.n_bits(),
            n_nodes: spec.n_nodes(),
            states: Vec::new(),
            words: Vec::new(),
        })
    }

    /// Number of edges processed so far.
    pub fn cycle(&self) -> usize {
        self.states.len()
    }

    pub fn step(&mut self, word: FixedPointWord) -> Result<()> {
        if word.n_bits() != self.n_bits {
            return Err(Error::invalid("input word", "bit width mismatch"));
        }
        let t = self.states.len() as Tick * self.period;
        self.engine.advance_to(t)?;
        self.engine.set_input(word)?;
        self.states.push(self.engine.states().to_vec());
        self.words.push(word);
        Ok(())
    }

    pub fn drive(&mut self, words: &[FixedPointWord]) -> Result<()> {
        words.iter().try_for_each(|&w| self.step(w))
    }

    /// Latched states, one per edge.
    pub fn states(&self) -> &[Vec<bool>] {
        &self.states
    }

    pub fn words(&self) -> &[FixedPointWord] {
        &self.words
    }

    /// Readout row for the output applied at edge `c`.
    fn row(&self, c: usize, latency: usize) -> Vec<f64> {
        feature_row(&self.states, &self.words, c, latency, self.n_nodes)
    }

    /// Feed the readout back for `horizon` cycles, returning the words
    /// applied.
    pub fn run_autonomous(
        &mut self,
        readout: &TrainedReadout,
        horizon: usize,
        latency: usize,
    ) -> Result<Vec<FixedPointWord>> {
        if readout.weights.len() != self.n_nodes + 1 {
            return Err(Error::invalid(
                "readout",
                format!(
                    "has {} weights, reservoir needs {}",
                    readout.weights.len(),
                    self.n_nodes + 1
                ),
            ));
        }
        if horizon > 0 && self.cycle() < latency {
            return Err(Error::invalid(
                "closed loop",
                format!("needs at least {latency} warmup cycles"),
            ));
        }
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let c = self.cycle();
            let v = readout.predict(&self.row(c, latency));
            if !v.is_finite() {
                return Err(Error::Simulation {
                    time_ns: c as f64 * crate::sim::ticks_to_ns(self.period),
                    reason: format!("readout produced {v} at cycle {c}"),
                });
            }
            let w = quantize(v, self.n_bits)?;
            self.step(w)?;
            out.push(w);
        }
        Ok(out)
    }
}

/// `[X_{c-L}; u_{c-1}]` with `u` dequantized.
fn feature_row(
    states: &[Vec<bool>],
    words: &[FixedPointWord],
    c: usize,
    latency: usize,
    n_nodes: usize,
) -> Vec<f64> {
    let mut row = Vec::with_capacity(n_nodes + 1);
    row.extend(states[c - latency].iter().map(|&b| b as u8 as f64));
    row.push(words[c - 1].value());
    row
}

/// Training rows and targets for outputs at edges `first..end`: row for edge
/// `c` is `[X_{c-L}; u_{c-1}]` and its target is `u_c`.
pub fn design_matrix(
    states: &[Vec<bool>],
    words: &[FixedPointWord],
    first: usize,
    end: usize,
    latency: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if latency == 0 || first < latency.max(1) || end <= first || end > states.len().min(words.len()) {
        return Err(Error::invalid(
            "design matrix",
            format!(
                "rows {first}..{end} with latency {latency} do not fit {} recorded edges",
                states.len().min(words.len())
            ),
        ));
    }
    let n = states[0].len();
    let m = end - first;
    let mut a = DMatrix::zeros(m, n + 1);
    let mut y = Vec::with_capacity(m);
    for (r, c) in (first..end).enumerate() {
        let row = feature_row(states, words, c, latency, n);
        for (j, v) in row.into_iter().enumerate() {
            a[(r, j)] = v;
        }
        y.push(words[c].value());
    }
    Ok((a, y))
}

/// Drive with `warmup`, then run `horizon_cycles` autonomous cycles. The
/// result holds the dequantized fed-back values, starting at the first
/// autonomous edge.
pub fn run_closed_loop(
    spec: &ReservoirSpec,
    readout: &TrainedReadout,
    warmup: &[FixedPointWord],
    horizon_cycles: usize,
    clk: &ClockedRun,
    sim: &SimConfig,
) -> Result<TimeSeries> {
    check_word_widths(spec, warmup)?;
    let mut res = ClockedReservoir::new(spec, clk, sim)?;
    res.drive(warmup)?;
    let words = res.run_autonomous(readout, horizon_cycles, clk.latency_cycles)?;
    Ok(TimeSeries {
        t0: warmup.len() as f64 * clk.sample_period_ns,
        dt: clk.sample_period_ns,
        values: words.iter().map(|w| w.value()).collect(),
        units: TimeUnits::Ns,
        unit_map_ns_per_mg: clk.ns_per_mg,
    })
}
