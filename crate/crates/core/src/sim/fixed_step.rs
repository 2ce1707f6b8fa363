use std::collections::VecDeque;

use super::glass::{crossing_time, relax_node};
use super::{ticks_to_ns, CompiledNetwork, Engine, Tick, Transition, TICKS_PER_NS};
use crate::io::fixed_point::FixedPointWord;
use crate::{Error, Result};

/// Lock-step reference engine.
///
/// Time advances in steps of `h`. Each node keeps a buffer of its own
/// timestamped output transitions; a link of delay `d` reads that buffer
/// shifted by `d`. During a step every node integrates its exact exponential
/// piecewise between the instants its delayed inputs change, and threshold
/// crossings are located inside the step rather than snapped to its end.
/// Link delays must exceed `h`, so everything a step reads was produced by
/// earlier steps.
pub struct FixedStepEngine {
    net: CompiledNetwork,
    step: Tick,
    now: Tick,
    /// Node variable at `t_ref`, the last time the target changed.
    x_ref: Vec<f64>,
    t_ref: Vec<Tick>,
    target: Vec<bool>,
    out: Vec<bool>,
    /// Output transitions per node, oldest first. The front entry may be
    /// older than any link reads; it still fixes the current value.
    history: Vec<VecDeque<(Tick, bool)>>,
    longest_delay: Tick,
    word_bits: u64,
    log: Vec<Transition>,
    logging: bool,
    changes: Vec<(Tick, usize, bool)>,
}

impl FixedStepEngine {
    pub(crate) fn new(net: CompiledNetwork, step: Tick) -> Result<Self> {
        if step <= 0 {
            return Err(Error::invalid("fixed-step engine", "step must be positive"));
        }
        let shortest = net.in_links.iter().flatten().map(|&(_, d)| d).min();
        if let Some(d) = shortest {
            if d <= step {
                return Err(Error::invalid(
                    "fixed-step engine",
                    format!("step {step} fs must be shorter than the shortest link delay {d} fs"),
                ));
            }
        }
        let longest_delay = net.in_links.iter().flatten().map(|&(_, d)| d).max().unwrap_or(0);
        let n = net.n_nodes();
        Ok(Self {
            step,
            now: 0,
            x_ref: vec![0.0; n],
            t_ref: vec![0; n],
            target: vec![false; n],
            out: vec![false; n],
            history: vec![VecDeque::new(); n],
            longest_delay,
            word_bits: 0,
            log: Vec::new(),
            logging: true,
            changes: Vec::new(),
            net,
        })
    }

    fn output_at(&self, node: usize, t: Tick) -> bool {
        let h = &self.history[node];
        match h.partition_point(|&(time, _)| time <= t) {
            0 => false,
            k => h[k - 1].1,
        }
    }

    fn packed_inputs(&self, i: usize, t: Tick) -> usize {
        self.net.in_links[i]
            .iter()
            .fold(0, |acc, &(src, d)| (acc << 1) | self.output_at(src, t - d) as usize)
    }

    /// Switch node `i` to `target` at time `t`, continuing from its
    /// trajectory so far.
    fn retarget(&mut self, i: usize, target: bool, t: Tick) {
        if target == self.target[i] {
            return;
        }
        self.x_ref[i] = self.x_at(i, t);
        self.t_ref[i] = t;
        self.target[i] = target;
    }

    fn x_at(&self, i: usize, t: Tick) -> f64 {
        relax_node(
            self.x_ref[i],
            self.target[i],
            ticks_to_ns(t - self.t_ref[i]),
            self.net.gamma_ns[i],
        )
    }

    /// The instant in `(.., until]` at which node `i` reaches its target's
    /// side of the threshold, if it does.
    fn crossing_before(&self, i: usize, until: Tick) -> Option<Tick> {
        if self.out[i] == self.target[i] {
            return None;
        }
        let dt = crossing_time(
            self.x_ref[i],
            self.target[i],
            self.net.threshold[i],
            self.net.gamma_ns[i],
        )
        .unwrap_or(0.0);
        let at = self.t_ref[i] + (dt * TICKS_PER_NS as f64).ceil() as Tick;
        (at <= until).then_some(at)
    }

    fn flip(&mut self, i: usize, at: Tick, new_entries: &mut Vec<Transition>) {
        let value = !self.out[i];
        self.out[i] = value;
        self.history[i].push_back((at, value));
        new_entries.push(Transition {
            time: at,
            node: i,
            value,
        });
    }

    fn step_once(&mut self) -> Result<()> {
        let t0 = self.now;
        let t1 = t0 + self.step;
        let mut new_entries = Vec::new();
        for i in 0..self.net.n_nodes() {
            // delayed input changes landing in (t0, t1]
            let mut changes = std::mem::take(&mut self.changes);
            changes.clear();
            for (slot, &(src, d)) in self.net.in_links[i].iter().enumerate() {
                let h = &self.history[src];
                let from = h.partition_point(|&(time, _)| time <= t0 - d);
                for &(time, value) in h.range(from..) {
                    if time + d > t1 {
                        break;
                    }
                    changes.push((time + d, slot, value));
                }
            }
            changes.sort_unstable();
            let k = self.net.in_links[i].len();
            let mut packed = self.packed_inputs(i, t0);
            let lut_target = self.net.luts[i].get(self.net.lut_index(i, self.word_bits, packed));
            self.retarget(i, lut_target, t0);
            let mut c = 0;
            while c < changes.len() {
                let tc = changes[c].0;
                if let Some(at) = self.crossing_before(i, tc) {
                    self.flip(i, at, &mut new_entries);
                }
                while c < changes.len() && changes[c].0 == tc {
                    let (_, slot, value) = changes[c];
                    let bit = 1usize << (k - 1 - slot);
                    packed = if value { packed | bit } else { packed & !bit };
                    c += 1;
                }
                let target = self.net.luts[i].get(self.net.lut_index(i, self.word_bits, packed));
                self.retarget(i, target, tc);
            }
            if let Some(at) = self.crossing_before(i, t1) {
                self.flip(i, at, &mut new_entries);
            }
            if !self.x_at(i, t1).is_finite() {
                return Err(Error::Simulation {
                    time_ns: ticks_to_ns(t1),
                    reason: format!("node {i} state became non-finite"),
                });
            }
            self.changes = changes;
        }
        self.now = t1;
        let horizon = t1 - self.longest_delay - self.step;
        for h in &mut self.history {
            while h.len() >= 2 && h[1].0 <= horizon {
                h.pop_front();
            }
        }
        if self.logging {
            new_entries.sort_by_key(|t| (t.time, t.node));
            self.log.extend(new_entries);
        }
        Ok(())
    }
}

impl Engine for FixedStepEngine {
    fn now(&self) -> Tick {
        self.now
    }

    fn advance_to(&mut self, t: Tick) -> Result<()> {
        if t % self.step != 0 {
            return Err(Error::invalid(
                "fixed-step engine",
                format!("time {t} fs is not on the {} fs step grid", self.step),
            ));
        }
        while self.now < t {
            self.step_once()?;
        }
        Ok(())
    }

    fn set_input(&mut self, word: FixedPointWord) -> Result<()> {
        if word.n_bits() != self.net.n_bits {
            return Err(Error::invalid("input word", "bit width mismatch"));
        }
        self.word_bits = word.bits();
        let t = self.now;
        let mut new_entries = Vec::new();
        for i in 0..self.net.n_nodes() {
            let packed = self.packed_inputs(i, t);
            let target = self.net.luts[i].get(self.net.lut_index(i, self.word_bits, packed));
            self.retarget(i, target, t);
            // already on the new target's side: switch at once
            if let Some(at) = self.crossing_before(i, t) {
                self.flip(i, at, &mut new_entries);
            }
        }
        if self.logging {
            self.log.extend(new_entries);
        }
        Ok(())
    }

    fn states(&self) -> &[bool] {
        &self.out
    }

    fn continuous_states(&self) -> Option<Vec<f64>> {
        Some((0..self.net.n_nodes()).map(|i| self.x_at(i, self.now)).collect())
    }

    fn transitions(&self) -> &[Transition] {
        &self.log
    }

    fn set_logging(&mut self, enabled: bool) {
        self.logging = enabled;
        if !enabled {
            self.log.clear();
        }
    }
}
