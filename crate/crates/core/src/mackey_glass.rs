//! Mackey-Glass delay differential equation
//! `du/dt = β u(t-τ) / (1 + u(t-τ)^n) - γ u(t)`.
//!
//! Integration is classical RK4 at step `h`. The solution is stored on a
//! half-step grid so that the delayed argument of all four stages is an
//! exact grid read. Midpoint values come from the cubic Hermite dense output
//! of each step, which matches the method's fourth-order accuracy.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lyapunov time of the standard chaotic parameters, in MG time units.
pub const LYAPUNOV_TIME_MG: f64 = 116.0;

/// Reservoir input sampling interval in MG units.
pub const DEFAULT_SAMPLE_DT_MG: f64 = 5.0;

/// Transient discarded before any sample is used.
pub const DEFAULT_TRANSIENT_MG: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum History {
    Constant(f64),
    /// Values on the half-step grid covering `[-τ, 0]`, oldest first
    /// (`2τ/h + 1` entries).
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MgParams {
    pub beta: f64,
    pub gamma: f64,
    pub delay: f64,
    pub exponent: f64,
    pub step: f64,
    pub history: History,
}

impl Default for MgParams {
    /// The chaotic regime `(β, γ, τ, n) = (0.2, 0.1, 17, 10)`, step 0.1 and a
    /// constant history of 1.2.
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            delay: 17.0,
            exponent: 10.0,
            step: 0.1,
            history: History::Constant(1.2),
        }
    }
}

impl MgParams {
    fn half_steps_in_delay(&self) -> usize {
        (2.0 * self.delay / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("Mackey-Glass parameters", reason));
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delay", self.delay),
            ("exponent", self.exponent),
            ("step", self.step),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if self.gamma <= 0.0 || self.delay <= 0.0 || self.exponent <= 0.0 {
            return bad("gamma, delay and exponent must be positive".into());
        }
        if !(self.step > 0.0 && self.step <= 0.5) {
            return bad(format!("step {} must lie in (0, 0.5]", self.step));
        }
        let ratio = self.delay / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(format!(
                "delay / step = {ratio} must be a positive integer"
            ));
        }
        match &self.history {
            History::Constant(v) if !v.is_finite() => bad("history must be finite".into()),
            History::Grid(values) if values.len() != self.half_steps_in_delay() + 1 => bad(format!(
                "history grid needs {} values, got {}",
                self.half_steps_in_delay() + 1,
                values.len()
            )),
            History::Grid(values) if values.iter().any(|v| !v.is_finite()) => {
                bad("history must be finite".into())
            }
            _ => Ok(()),
        }
    }

    /// The non-trivial fixed point `(β/γ - 1)^(1/n)`, when it exists.
    pub fn equilibrium(&self) -> Option<f64> {
        let r = self.beta / self.gamma - 1.0;
        (r > 0.0).then(|| r.powf(1.0 / self.exponent))
    }

    fn rhs(&self, u: f64, delayed: f64) -> f64 {
        self.beta * delayed / (1.0 + delayed.powf(self.exponent)) - self.gamma * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnits {
    Mg,
    Ns,
}

impl TimeUnits {
    fn as_str(self) -> &'static str {
        match self {
            TimeUnits::Mg => "mg",
            TimeUnits::Ns => "ns",
        }
    }
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub units: TimeUnits,
    /// Nanoseconds per MG time unit.
    pub unit_map_ns_per_mg: f64,
}

/// One reservoir sample (5 MG units) per 6.25 ns clock period.
pub const DEFAULT_NS_PER_MG: f64 = 6.25 / DEFAULT_SAMPLE_DT_MG;

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, units: TimeUnits) -> Result<Self> {
        let s = Self {
            t0,
            dt,
            values,
            units,
            unit_map_ns_per_mg: DEFAULT_NS_PER_MG,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("time series", format!("dt = {} must be positive", self.dt)));
        }
        if !(self.unit_map_ns_per_mg > 0.0) {
            return Err(Error::invalid("time series", "unit map must be positive"));
        }
        if !self.t0.is_finite() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Re-express the time axis in MG units.
    pub fn in_mg_units(&self) -> TimeSeries {
        match self.units {
            TimeUnits::Mg => self.clone(),
            TimeUnits::Ns => TimeSeries {
                t0: self.t0 / self.unit_map_ns_per_mg,
                dt: self.dt / self.unit_map_ns_per_mg,
                units: TimeUnits::Mg,
                ..self.clone()
            },
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    /// Contiguous sub-series `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<TimeSeries> {
        if start + len > self.values.len() {
            return Err(Error::invalid(
                "time series",
                format!("slice {start}..{} beyond length {}", start + len, self.values.len()),
            ));
        }
        Ok(TimeSeries {
            t0: self.time(start),
            values: self.values[start..start + len].to_vec(),
            ..self.clone()
        })
    }

    /// CSV with a commented header recording units and the unit map.
    pub fn write_csv<W: Write>(&self, mut out: W, provenance: &[(&str, String)]) -> Result<()> {
        for (k, v) in provenance {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "# units={}", self.units.as_str())?;
        writeln!(out, "# unit_map_ns_per_mg={}", self.unit_map_ns_per_mg)?;
        writeln!(out, "# dt={}", self.dt)?;
        writeln!(out, "time,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.time(i), v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<TimeSeries> {
        let mut units = TimeUnits::Mg;
        let mut map = DEFAULT_NS_PER_MG;
        let mut dt = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    match k {
                        "units" => {
                            units = match v {
                                "mg" => TimeUnits::Mg,
                                "ns" => TimeUnits::Ns,
                                other => {
                                    return Err(Error::Format(format!("unknown units {other:?}")))
                                }
                            }
                        }
                        "unit_map_ns_per_mg" => map = parse_f64(v)?,
                        "dt" => dt = Some(parse_f64(v)?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.starts_with("time") {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("malformed row {line:?}")))?;
            times.push(parse_f64(t)?);
            values.push(parse_f64(v)?);
        }
        let t0 = *times.first().ok_or_else(|| Error::Format("no samples".into()))?;
        let dt = match dt {
            Some(dt) => dt,
            None if times.len() > 1 => times[1] - times[0],
            None => return Err(Error::Format("cannot infer dt".into())),
        };
        let series = TimeSeries {
            t0,
            dt,
            values,
            units,
            unit_map_ns_per_mg: map,
        };
        series.validate()?;
        Ok(series)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

/// Integrate from `t = 0` for `duration` MG units; samples at every step.
pub fn integrate_mg(p: &MgParams, duration: f64) -> Result<TimeSeries> {
    p.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(
            "integration duration",
            format!("{duration} must be positive"),
        ));
    }
    let h = p.step;
    let lag = p.half_steps_in_delay();
    let n_steps = (duration / h).round() as usize;

    // grid[j] holds u(-τ + j h/2)
    let mut grid: Vec<f64> = Vec::with_capacity(lag + 1 + 2 * n_steps);
    match &p.history {
        History::Constant(v) => grid.extend(std::iter::repeat(*v).take(lag + 1)),
        History::Grid(values) => grid.extend_from_slice(values),
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut u = grid[lag];
    out.push(u);
    for s in 0..n_steps {
        // u(t_s - τ + k h/2) sits at index 2s + k
        let d0 = grid[2 * s];
        let d1 = grid[2 * s + 1];
        let d2 = grid[2 * s + 2];
        let k1 = p.rhs(u, d0);
        let k2 = p.rhs(u + 0.5 * h * k1, d1);
        let k3 = p.rhs(u + 0.5 * h * k2, d1);
        let k4 = p.rhs(u + h * k3, d2);
        let next = u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Simulation {
                time_ns: (s + 1) as f64 * h,
                reason: "Mackey-Glass state became non-finite".into(),
            });
        }
        let f_next = p.rhs(next, d2);
        let mid = 0.5 * (u + next) + h / 8.0 * (k1 - f_next);
        grid.push(mid);
        grid.push(next);
        out.push(next);
        u = next;
    }
    Ok(TimeSeries {
        t0: 0.0,
        dt: h,
        values: out,
        units: TimeUnits::Mg,
        unit_map_ns_per_mg: DEFAULT_NS_PER_MG,
    })
}

/// `u ↦ tanh(u - 1)`.
pub fn normalize_mg(series: &TimeSeries) -> TimeSeries {
    TimeSeries {
        values: series.values.iter().map(|v| (v - 1.0).tanh()).collect(),
        ..series.clone()
    }
}

/// Keep every `dt_out / dt`-th sample.
pub fn resample(series: &TimeSeries, dt_out: f64) -> Result<TimeSeries> {
    let ratio = dt_out / series.dt;
    let stride = ratio.round();
    if !(stride >= 1.0) || (ratio - stride).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(
            "resampling interval",
            format!("{dt_out} is not an integer multiple of {}", series.dt),
        ));
    }
    let stride = stride as usize;
    Ok(TimeSeries {
        dt: series.dt * stride as f64,
        values: series.values.iter().step_by(stride).copied().collect(),
        ..series.clone()
    })
}

/// Normalised, resampled series of `n_samples` values at `dt_out` spacing,
/// starting after `transient` MG units.
pub fn generate_dataset(
    p: &MgParams,
    transient: f64,
    n_samples: usize,
    dt_out: f64,
) -> Result<TimeSeries> {
    if n_samples == 0 {
        return Err(Error::invalid("dataset", "zero samples requested"));
    }
    let raw = integrate_mg(p, transient + dt_out * n_samples as f64)?;
    let skip = (transient / p.step).round() as usize;
    let tail = TimeSeries {
        t0: 0.0,
        values: raw.values[skip..].to_vec(),
        ..raw
    };
    let mut out = resample(&normalize_mg(&tail), dt_out)?;
    out.values.truncate(n_samples);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_equilibrium_is_constant() {
        let p = MgParams {
            history: History::Constant(1.0),
            ..MgParams::default()
        };
        assert_eq!(p.equilibrium(), Some(1.0));
        let s = integrate_mg(&p, 100.0).unwrap();
        assert_eq!(s.len(), 1001);
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn general_equilibrium_is_constant() {
        let p = MgParams {
            beta: 0.3,
            exponent: 4.0,
            ..MgParams::default()
        };
        let eq = p.equilibrium().unwrap();
        let p = MgParams {
            history: History::Constant(eq),
            ..p
        };
        let s = integrate_mg(&p, 100.0).unwrap();
        assert!(s.values.iter().all(|v| (v - eq).abs() < 1e-10));
    }

    #[test]
    fn pure_decay() {
        let p = MgParams {
            beta: 0.0,
            gamma: 10.0,
            step: 0.01,
            delay: 1.0,
            history: History::Constant(2.0),
            ..MgParams::default()
        };
        let s = integrate_mg(&p, 1.0).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let exact = 2.0 * (-10.0 * i as f64 * 0.01).exp();
            assert!((v - exact).abs() < 1e-5 * exact, "{i}: {v} vs {exact}");
        }
    }

    #[test]
    fn chaotic_run_stays_bounded() {
        let s = integrate_mg(&MgParams::default(), 3000.0).unwrap();
        let tail = &s.values[5000..];
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo > 0.15 && hi < 1.45, "range [{lo}, {hi}]");
        assert!(hi - lo > 0.8);
    }

    #[test]
    fn step_halving_converges_at_fourth_order() {
        let run = |h: f64| {
            let p = MgParams {
                step: h,
                ..MgParams::default()
            };
            let s = integrate_mg(&p, 50.0).unwrap();
            *s.values.last().unwrap()
        };
        let (a, b, c) = (run(0.2), run(0.1), run(0.05));
        let order = ((a - b).abs() / (b - c).abs()).log2();
        assert!(order >= 3.5, "observed order {order}");
    }

    #[test]
    fn normalization_examples() {
        let s = TimeSeries::new(0.0, 1.0, vec![1.0, 2.0, -5.0], TimeUnits::Mg).unwrap();
        let n = normalize_mg(&s);
        assert_eq!(n.values[0], 0.0);
        assert!((n.values[1] - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!(n.values[2] > -1.0);
    }

    #[test]
    fn resample_examples() {
        let s = TimeSeries::new(0.0, 1.0, vec![1.0, 2.0, 3.0, 4.0, 5.0], TimeUnits::Mg).unwrap();
        assert_eq!(resample(&s, 1.0).unwrap(), s);
        assert_eq!(resample(&s, 2.0).unwrap().values, vec![1.0, 3.0, 5.0]);
        assert!(resample(&s, 1.5).is_err());
        let fine = TimeSeries::new(0.0, 0.1, vec![0.0; 501], TimeUnits::Mg).unwrap();
        let coarse = resample(&fine, 5.0).unwrap();
        assert_eq!(coarse.len(), 11);
        assert!((coarse.dt - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let p = MgParams {
            step: 0.3,
            ..MgParams::default()
        };
        assert!(integrate_mg(&p, 10.0).is_err());
        assert!(integrate_mg(&MgParams::default(), 0.0).is_err());
        let p = MgParams {
            history: History::Grid(vec![1.0; 3]),
            ..MgParams::default()
        };
        assert!(integrate_mg(&p, 10.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::new(10.0, 5.0, vec![0.1, -0.2, 0.3], TimeUnits::Mg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &[("seed", "3".into())]).unwrap();
        let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}
