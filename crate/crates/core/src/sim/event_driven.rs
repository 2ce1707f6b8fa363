use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::glass::{crossing_time, relax_node};
use super::{ticks_to_ns, CompiledNetwork, Engine, Tick, Transition, TICKS_PER_NS};
use crate::io::fixed_point::FixedPointWord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    /// Predicted threshold crossing; stale when `generation` no longer
    /// matches the node's counter.
    Crossing { generation: u64 },
    /// A delayed output change reaching input `slot` of the node.
    Arrival { slot: usize, value: bool },
}

/// Ordered by time, then node index, then kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: Tick,
    node: usize,
    kind: EventKind,
}

/// Event-driven engine.
///
/// Between events every node relaxes exponentially toward its current
/// target, so the only things that need scheduling are delayed arrivals and
/// the instant the relaxing node crosses its threshold. When the target
/// changes back before that instant the pending crossing is invalidated,
/// which is how pulses shorter than the gate response are swallowed.
pub struct EventDrivenEngine {
    net: CompiledNetwork,
    now: Tick,
    max_pending: usize,
    queue: BinaryHeap<Reverse<Event>>,
    /// Node variable at `t_ref`.
    x_ref: Vec<f64>,
    t_ref: Vec<Tick>,
    target: Vec<bool>,
    out: Vec<bool>,
    generation: Vec<u64>,
    /// Current recurrent input bits, first source most significant.
    inputs: Vec<usize>,
    word_bits: u64,
    dirty: Vec<bool>,
    dirty_list: Vec<usize>,
    log: Vec<Transition>,
    logging: bool,
}

impl EventDrivenEngine {
    pub(crate) fn new(net: CompiledNetwork, max_pending: usize) -> Self {
        let n = net.n_nodes();
        Self {
            now: 0,
            max_pending,
            queue: BinaryHeap::new(),
            x_ref: vec![0.0; n],
            t_ref: vec![0; n],
            target: vec![false; n],
            out: vec![false; n],
            generation: vec![0; n],
            inputs: vec![0; n],
            word_bits: 0,
            dirty: vec![false; n],
            dirty_list: Vec::new(),
            log: Vec::new(),
            logging: true,
            net,
        }
    }

    fn push(&mut self, ev: Event) -> Result<()> {
        if self.queue.len() >= self.max_pending {
            return Err(Error::Simulation {
                time_ns: ticks_to_ns(self.now),
                reason: format!("event queue exceeded {} pending events", self.max_pending),
            });
        }
        self.queue.push(Reverse(ev));
        Ok(())
    }

    fn mark(&mut self, node: usize) {
        if !self.dirty[node] {
            self.dirty[node] = true;
            self.dirty_list.push(node);
        }
    }

    /// Node variable at the current time.
    fn x_now(&self, i: usize) -> f64 {
        relax_node(
            self.x_ref[i],
            self.target[i],
            ticks_to_ns(self.now - self.t_ref[i]),
            self.net.gamma_ns[i],
        )
    }

    /// Re-evaluate the LUT of every marked node, ascending by index.
    fn settle_dirty(&mut self) -> Result<()> {
        if self.dirty_list.is_empty() {
            return Ok(());
        }
        let mut nodes = std::mem::take(&mut self.dirty_list);
        nodes.sort_unstable();
        for &i in &nodes {
            self.dirty[i] = false;
            self.reevaluate(i)?;
        }
        nodes.clear();
        self.dirty_list = nodes;
        Ok(())
    }

    fn reevaluate(&mut self, i: usize) -> Result<()> {
        let idx = self.net.lut_index(i, self.word_bits, self.inputs[i]);
        let lambda = self.net.luts[i].get(idx);
        if lambda == self.target[i] {
            return Ok(());
        }
        let x = self.x_now(i);
        if !x.is_finite() {
            return Err(Error::Simulation {
                time_ns: ticks_to_ns(self.now),
                reason: format!("node {i} state became non-finite"),
            });
        }
        self.x_ref[i] = x;
        self.t_ref[i] = self.now;
        self.target[i] = lambda;
        self.generation[i] += 1;
        if self.out[i] != lambda {
            // Rounding can leave x a hair on the wrong side of q right after
            // a crossing; switch immediately in that case.
            let dt = crossing_time(x, lambda, self.net.threshold[i], self.net.gamma_ns[i])
                .unwrap_or(0.0);
            let at = self.now + (dt * TICKS_PER_NS as f64).ceil() as Tick;
            let generation = self.generation[i];
            self.push(Event {
                time: at,
                node: i,
                kind: EventKind::Crossing { generation },
            })?;
        }
        Ok(())
    }

    fn fire(&mut self, ev: Event) -> Result<()> {
        match ev.kind {
            EventKind::Crossing { generation } => {
                if generation != self.generation[ev.node] {
                    return Ok(());
                }
                let i = ev.node;
                let value = !self.out[i];
                self.out[i] = value;
                if self.logging {
                    self.log.push(Transition {
                        time: ev.time,
                        node: i,
                        value,
                    });
                }
                for k in 0..self.net.out_links[i].len() {
                    let (dest, slot, delay) = self.net.out_links[i][k];
                    self.push(Event {
                        time: ev.time + delay,
                        node: dest,
                        kind: EventKind::Arrival { slot, value },
                    })?;
                }
            }
            EventKind::Arrival { slot, value } => {
                let i = ev.node;
                let k = self.net.in_links[i].len();
                let bit = 1usize << (k - 1 - slot);
                if value {
                    self.inputs[i] |= bit;
                } else {
                    self.inputs[i] &= !bit;
                }
                self.mark(i);
            }
        }
        Ok(())
    }
}

impl Engine for EventDrivenEngine {
    fn now(&self) -> Tick {
        self.now
    }

    fn advance_to(&mut self, t: Tick) -> Result<()> {
        if t < self.now {
            return Err(Error::invalid(
                "event-driven engine",
                format!("cannot go back from {} to {t}", self.now),
            ));
        }
        while let Some(&Reverse(head)) = self.queue.peek() {
            if head.time > t {
                break;
            }
            self.now = head.time;
            // all events sharing this instant, then one LUT pass
            while let Some(&Reverse(ev)) = self.queue.peek() {
                if ev.time != self.now {
                    break;
                }
                self.queue.pop();
                self.fire(ev)?;
            }
            self.settle_dirty()?;
        }
        self.now = t;
        Ok(())
    }

    fn set_input(&mut self, word: FixedPointWord) -> Result<()> {
        if word.n_bits() != self.net.n_bits {
            return Err(Error::invalid("input word", "bit width mismatch"));
        }
        let bits = word.bits();
        if bits == self.word_bits {
            return Ok(());
        }
        self.word_bits = bits;
        for i in 0..self.net.n_nodes() {
            self.mark(i);
        }
        self.settle_dirty()?;
        // zero-delay crossings scheduled at `now` fire right away
        self.advance_to(self.now)
    }

    fn states(&self) -> &[bool] {
        &self.out
    }

    fn continuous_states(&self) -> Option<Vec<f64>> {
        None
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

impl EventDrivenEngine {
    /// Node variables at the current time (not recorded in traces, but handy
    /// for diagnostics).
    pub fn node_variables(&self) -> Vec<f64> {
        (0..self.net.n_nodes()).map(|i| self.x_now(i)).collect()
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }
}
