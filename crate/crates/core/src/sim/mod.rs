//! Continuous-time simulation of the autonomous Boolean network.
//!
//! Every node follows `γ_i dx_i/dt = -x_i + Λ_i(inputs)` and reads high while
//! `x_i >= q_i`. Links are pure transport delays of the node outputs. Two
//! engines implement [`Engine`]:
//!
//! - [`FixedStepEngine`] advances all nodes in lock-step with the exact
//!   exponential update and per-link ring buffers. It is the reference.
//! - [`EventDrivenEngine`] keeps a time-ordered queue of delayed arrivals and
//!   predicted threshold crossings, and is what the experiments use.
//!
//! Time is counted in integer femtosecond ticks so event ordering does not
//! depend on floating-point rounding. Simulations start from `x = 0`
//! everywhere with all-zero link histories and an all-zero input word.

mod event_driven;
mod fixed_step;
pub mod glass;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use event_driven::EventDrivenEngine;
pub use fixed_step::FixedStepEngine;
pub use glass::{crossing_time, relax_node};

use crate::io::fixed_point::FixedPointWord;
use crate::network::{Lut, ReservoirSpec};
use crate::{Error, Result};

/// Integer simulation time in femtoseconds.
pub type Tick = i64;

pub const TICKS_PER_NS: i64 = 1_000_000;

pub fn ns_to_ticks(ns: f64) -> Tick {
    (ns * TICKS_PER_NS as f64).round() as Tick
}

pub fn ticks_to_ns(t: Tick) -> f64 {
    t as f64 / TICKS_PER_NS as f64
}

/// Default reference-engine step.
pub const DEFAULT_STEP_NS: f64 = 0.005;

/// Default bound on pending events before the event-driven engine aborts.
pub const DEFAULT_MAX_PENDING_EVENTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    FixedStep,
    #[default]
    EventDriven,
}

/// Random perturbation of link delays: each of the `2m` inverters on a link
/// contributes an independent normal deviation with standard deviation
/// `spread_ns`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayJitter {
    pub spread_ns: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_ns: f64,
    pub duration_ns: f64,
    pub record_grid_ns: f64,
    pub engine: EngineKind,
    #[serde(default = "default_max_pending")]
    pub max_pending_events: usize,
    #[serde(default)]
    pub jitter: Option<DelayJitter>,
}

fn default_max_pending() -> usize {
    DEFAULT_MAX_PENDING_EVENTS
}

impl SimConfig {
    pub fn new(engine: EngineKind, duration_ns: f64, record_grid_ns: f64) -> Self {
        Self {
            step_ns: DEFAULT_STEP_NS,
            duration_ns,
            record_grid_ns,
            engine,
            max_pending_events: DEFAULT_MAX_PENDING_EVENTS,
            jitter: None,
        }
    }

    pub fn with_step(mut self, step_ns: f64) -> Self {
        self.step_ns = step_ns;
        self
    }

    pub fn validate(&self, spec: &ReservoirSpec) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("simulation config", reason));
        if !(self.duration_ns > 0.0 && self.duration_ns.is_finite()) {
            return bad(format!("duration {} ns must be positive", self.duration_ns));
        }
        if !(self.record_grid_ns > 0.0) || ns_to_ticks(self.record_grid_ns) == 0 {
            return bad(format!("record grid {} ns must be positive", self.record_grid_ns));
        }
        if self.engine == EngineKind::FixedStep {
            let h = ns_to_ticks(self.step_ns);
            if h <= 0 {
                return bad(format!("step {} ns must be positive", self.step_ns));
            }
            let gamma_min = spec
                .node_time_constants_ns
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if self.step_ns > gamma_min / 20.0 + 1e-12 {
                return bad(format!(
                    "step {} ns exceeds min(γ)/20 = {} ns",
                    self.step_ns,
                    gamma_min / 20.0
                ));
            }
            if ns_to_ticks(self.record_grid_ns) % h != 0 {
                return bad("record grid must be an integer multiple of the step".into());
            }
        }
        if self.max_pending_events == 0 {
            return bad("max_pending_events must be positive".into());
        }
        Ok(())
    }
}

/// Largest step no bigger than `target_ns` that divides every period in
/// `periods_ns` (all taken in femtosecond ticks).
pub fn aligned_step_ns(target_ns: f64, periods_ns: &[f64]) -> f64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = periods_ns
        .iter()
        .map(|&p| ns_to_ticks(p))
        .fold(0, gcd)
        .max(1);
    let target = ns_to_ticks(target_ns).max(1);
    if g <= target {
        return ticks_to_ns(g);
    }
    // largest divisor of g not exceeding target
    let mut best = 1;
    let mut d = 1;
    while d * d <= g {
        if g % d == 0 {
            if d <= target {
                best = best.max(d);
            }
            let other = g / d;
            if other <= target {
                best = best.max(other);
            }
        }
        d += 1;
    }
    ticks_to_ns(best)
}

/// Piecewise-constant input: word `m` applies on `[m T, (m+1) T)`; after the
/// last word the input returns to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSchedule {
    pub sample_period_ns: f64,
    pub words: Vec<FixedPointWord>,
}

impl InputSchedule {
    pub fn new(sample_period_ns: f64, words: Vec<FixedPointWord>) -> Result<Self> {
        if !(sample_period_ns > 0.0) || ns_to_ticks(sample_period_ns) == 0 {
            return Err(Error::invalid(
                "input schedule",
                format!("sample period {sample_period_ns} ns must be positive"),
            ));
        }
        Ok(Self {
            sample_period_ns,
            words,
        })
    }

    pub fn period_ticks(&self) -> Tick {
        ns_to_ticks(self.sample_period_ns)
    }
}

/// One change of a node's Boolean output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub time: Tick,
    pub node: usize,
    pub value: bool,
}

/// Recorded simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrace {
    pub times_ns: Vec<f64>,
    pub boolean_states: Vec<Vec<bool>>,
    /// Node variables `x`, recorded by the reference engine only.
    pub continuous_states: Option<Vec<Vec<f64>>>,
    pub transitions: Vec<Transition>,
}

impl StateTrace {
    /// CSV with a `time_ns` column and one 0/1 column per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.boolean_states.first().map_or(0, Vec::len);
        write!(out, "time_ns")?;
        for i in 0..n {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for (t, row) in self.times_ns.iter().zip(&self.boolean_states) {
            write!(out, "{t}")?;
            for &b in row {
                write!(out, ",{}", b as u8)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Common interface of both engines. Engines start at time zero.
pub trait Engine: Send {
    fn now(&self) -> Tick;
    /// Process everything up to and including time `t`.
    fn advance_to(&mut self, t: Tick) -> Result<()>;
    /// Replace the input word at the current time.
    fn set_input(&mut self, word: FixedPointWord) -> Result<()>;
    fn states(&self) -> &[bool];
    fn continuous_states(&self) -> Option<Vec<f64>>;
    fn transitions(&self) -> &[Transition];
    /// Drop the transition log (long runs do not need it).
    fn set_logging(&mut self, enabled: bool);
}

pub fn new_engine(spec: &ReservoirSpec, cfg: &SimConfig) -> Result<Box<dyn Engine>> {
    cfg.validate(spec)?;
    let net = CompiledNetwork::new(spec, cfg.jitter.as_ref());
    Ok(match cfg.engine {
        EngineKind::FixedStep => Box::new(FixedStepEngine::new(net, ns_to_ticks(cfg.step_ns))?),
        EngineKind::EventDriven => Box::new(EventDrivenEngine::new(net, cfg.max_pending_events)),
    })
}

/// Drive the network with `input` for `cfg.duration_ns` and record the
/// Boolean state on the record grid.
pub fn simulate(spec: &ReservoirSpec, input: &InputSchedule, cfg: &SimConfig) -> Result<StateTrace> {
    check_word_widths(spec, &input.words)?;
    let mut engine = new_engine(spec, cfg)?;
    let end = ns_to_ticks(cfg.duration_ns);
    let grid = ns_to_ticks(cfg.record_grid_ns);
    let period = input.period_ticks();
    let n_bits = spec.n_bits();
    let record_continuous = cfg.engine == EngineKind::FixedStep;

    let mut trace = StateTrace {
        times_ns: Vec::new(),
        boolean_states: Vec::new(),
        continuous_states: record_continuous.then(Vec::new),
        transitions: Vec::new(),
    };
    let mut next_record: Tick = 0;
    let mut next_edge: Tick = 0;
    let mut edge_index = 0usize;
    let edges_end = input.words.len();
    loop {
        let edge_pending = edge_index <= edges_end && next_edge <= end;
        let t = if edge_pending {
            next_edge.min(next_record)
        } else {
            next_record
        };
        if t > end {
            break;
        }
        engine.advance_to(t)?;
        if edge_pending && t == next_edge {
            let word = input
                .words
                .get(edge_index)
                .copied()
                .unwrap_or_else(|| FixedPointWord::zero(n_bits));
            engine.set_input(word)?;
            edge_index += 1;
            next_edge = edge_index as Tick * period;
        }
        if t == next_record {
            trace.times_ns.push(ticks_to_ns(t));
            trace.boolean_states.push(engine.states().to_vec());
            if let (Some(c), Some(x)) = (&mut trace.continuous_states, engine.continuous_states()) {
                c.push(x);
            }
            next_record += grid;
        }
    }
    trace.transitions = engine.transitions().to_vec();
    Ok(trace)
}

pub(crate) fn check_word_widths(spec: &ReservoirSpec, words: &[FixedPointWord]) -> Result<()> {
    if let Some(w) = words.iter().find(|w| w.n_bits() != spec.n_bits()) {
        return Err(Error::invalid(
            "input schedule",
            format!(
                "word has {} bits but the reservoir expects {}",
                w.n_bits(),
                spec.n_bits()
            ),
        ));
    }
    Ok(())
}

/// Flattened, engine-ready view of a [`ReservoirSpec`].
#[derive(Debug, Clone)]
pub(crate) struct CompiledNetwork {
    pub n_bits: u32,
    /// Incoming links per node in ascending source order: `(source, delay)`.
    pub in_links: Vec<Vec<(usize, Tick)>>,
    /// Outgoing links per node: `(destination, slot in destination, delay)`.
    pub out_links: Vec<Vec<(usize, usize, Tick)>>,
    pub luts: Vec<Lut>,
    pub gamma_ns: Vec<f64>,
    pub threshold: Vec<f64>,
}

impl CompiledNetwork {
    pub fn new(spec: &ReservoirSpec, jitter: Option<&DelayJitter>) -> Self {
        let n = spec.n_nodes();
        let mut rng = jitter.map(|j| ChaCha8Rng::seed_from_u64(j.seed));
        let mut in_links = Vec::with_capacity(n);
        let mut out_links = vec![Vec::new(); n];
        for i in 0..n {
            let mut links = Vec::new();
            for (slot, j) in spec.sources(i).into_iter().enumerate() {
                let mut d = spec.link_delays_ns[i][j];
                if let (Some(j_cfg), Some(rng)) = (jitter, rng.as_mut()) {
                    let m = (d / (2.0 * spec.inverter_delay_ns)).round().max(1.0);
                    let sd = j_cfg.spread_ns * (2.0 * m).sqrt();
                    if sd > 0.0 {
                        let dev = Normal::new(0.0, sd).expect("finite spread").sample(rng);
                        d = (d + dev).max(spec.inverter_delay_ns);
                    }
                }
                let delay = ns_to_ticks(d).max(1);
                links.push((j, delay));
                out_links[j].push((i, slot, delay));
            }
            in_links.push(links);
        }
        Self {
            n_bits: spec.n_bits(),
            in_links,
            out_links,
            luts: spec.luts.clone(),
            gamma_ns: spec.node_time_constants_ns.clone(),
            threshold: spec.node_thresholds.clone(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.luts.len()
    }

    /// LUT index from the input word bits and the packed recurrent bits
    /// (first source in the most significant position).
    #[inline]
    pub fn lut_index(&self, node: usize, word_bits: u64, recurrent: usize) -> usize {
        let k = self.in_links[node].len();
        ((word_bits as usize) << k) | recurrent
    }
}

/// Compare two transition logs node by node: same number of transitions with
/// the same values, and matching times within `tolerance` ticks. Returns the
/// largest time difference or a description of the first mismatch.
pub fn compare_transitions(
    a: &[Transition],
    b: &[Transition],
    n_nodes: usize,
    tolerance: Tick,
) -> std::result::Result<Tick, String> {
    let split = |log: &[Transition]| {
        let mut per = vec![Vec::new(); n_nodes];
        for t in log {
            per[t.node].push(*t);
        }
        per
    };
    let (pa, pb) = (split(a), split(b));
    let mut worst = 0;
    for node in 0..n_nodes {
        if pa[node].len() != pb[node].len() {
            return Err(format!(
                "node {node}: {} vs {} transitions",
                pa[node].len(),
                pb[node].len()
            ));
        }
        for (x, y) in pa[node].iter().zip(&pb[node]) {
            if x.value != y.value {
                return Err(format!("node {node}: value mismatch at {}", x.time));
            }
            let gap = (x.time - y.time).abs();
            worst = worst.max(gap);
            if gap > tolerance {
                return Err(format!(
                    "node {node}: transition at {} vs {} ticks exceeds tolerance {tolerance}",
                    x.time, y.time
                ));
            }
        }
    }
    // Global order: two transitions may only appear in opposite order when
    // they are within tolerance of each other.
    let mut sa: Vec<_> = a.to_vec();
    let mut sb: Vec<_> = b.to_vec();
    sa.sort_by_key(|t| (t.time, t.node));
    sb.sort_by_key(|t| (t.time, t.node));
    for (x, y) in sa.iter().zip(&sb) {
        if (x.node, x.value) != (y.node, y.value) && (x.time - y.time).abs() > 2 * tolerance {
            return Err(format!(
                "global order differs: node {} at {} vs node {} at {}",
                x.node, x.time, y.node, y.time
            ));
        }
    }
    Ok(worst)
}
