//! Random reservoir construction and per-node truth tables.
//!
//! A reservoir is a directed graph of `N` nodes in which every node reads
//! exactly `k` recurrent inputs through delayed links plus all `n` bits of the
//! fixed-point input word. Node `i` executes
//! `Θ(Σ_j W[i][j] X_j + Σ_b w_b u_b)` with `Θ(x) = 1` iff `x > 0`, which is
//! tabulated once into a [`Lut`].
//!
//! Random draws use ChaCha8 seeded with `Hyperparams::seed` and always happen
//! in the same order: recurrent sources and weights node by node, link delays
//! node by node, node time constants, input nodes, input weights. A spec is
//! therefore a pure function of its hyperparameters.

use std::fmt;

use nalgebra::{DMatrix, Schur};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::io::fixed_point::{expand_input_weights, InputScaling};
use crate::{Error, Result};

/// Current version of the serialized [`ReservoirSpec`] layout.
pub const SPEC_FORMAT_VERSION: u32 = 1;

/// Largest network accepted by [`spectral_radius`].
pub const MAX_DENSE_NODES: usize = 200;

/// Measured mean propagation delay of one inverter gate.
pub const DEFAULT_INVERTER_DELAY_NS: f64 = 0.19;

/// Mean and standard deviation of node time constants. With threshold 0.5 a
/// gate needs `γ ln 2` to switch, which reproduces the inverter delay above.
pub const DEFAULT_GAMMA_MEAN_NS: f64 = 0.274;
pub const DEFAULT_GAMMA_STD_NS: f64 = 0.072;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_nodes: usize,
    pub spectral_radius: f64,
    pub in_degree: usize,
    pub mean_delay_ns: f64,
    pub input_density: f64,
    pub input_bits: u32,
    pub seed: u64,
    pub input_scaling: InputScaling,
    pub inverter_delay_ns: f64,
    pub gamma_mean_ns: f64,
    pub gamma_std_ns: f64,
    pub threshold: f64,
}

impl Default for Hyperparams {
    /// The best-performing configuration for Mackey-Glass prediction:
    /// `(ρ, k, τ̄, σ) = (1.5, 2, 11 ns, 0.5)` with 100 nodes and 8-bit input.
    fn default() -> Self {
        Self {
            n_nodes: 100,
            spectral_radius: 1.5,
            in_degree: 2,
            mean_delay_ns: 11.0,
            input_density: 0.5,
            input_bits: 8,
            seed: 0,
            input_scaling: InputScaling::Normalized,
            inverter_delay_ns: DEFAULT_INVERTER_DELAY_NS,
            gamma_mean_ns: DEFAULT_GAMMA_MEAN_NS,
            gamma_std_ns: DEFAULT_GAMMA_STD_NS,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("hyperparameters", reason));
        if self.n_nodes == 0 {
            return bad("n_nodes must be positive".into());
        }
        if self.n_nodes > MAX_DENSE_NODES {
            return bad(format!(
                "n_nodes = {} exceeds the supported maximum of {MAX_DENSE_NODES}",
                self.n_nodes
            ));
        }
        if self.in_degree == 0 || self.in_degree > self.n_nodes {
            return bad(format!(
                "in_degree k = {} must satisfy 1 <= k <= N = {}",
                self.in_degree, self.n_nodes
            ));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return bad(format!(
                "spectral_radius must be positive, got {}",
                self.spectral_radius
            ));
        }
        if !(self.mean_delay_ns > 0.0 && self.mean_delay_ns.is_finite()) {
            return bad(format!(
                "mean_delay_ns must be positive, got {}",
                self.mean_delay_ns
            ));
        }
        if !(self.input_density > 0.0 && self.input_density <= 1.0) {
            return bad(format!(
                "input_density must lie in (0, 1], got {}",
                self.input_density
            ));
        }
        if self.input_node_count() == 0 {
            return bad(format!(
                "input_density {} x {} nodes rounds to zero input nodes",
                self.input_density, self.n_nodes
            ));
        }
        if self.input_bits == 0 || self.input_bits > 16 {
            return bad(format!("input_bits must lie in 1..=16, got {}", self.input_bits));
        }
        if self.in_degree as u32 + self.input_bits > 20 {
            return bad(format!(
                "k + n = {} gives truth tables too large to tabulate",
                self.in_degree as u32 + self.input_bits
            ));
        }
        if !(self.inverter_delay_ns > 0.0) {
            return bad("inverter_delay_ns must be positive".into());
        }
        if !(self.gamma_mean_ns > 0.0) || self.gamma_std_ns < 0.0 {
            return bad("node time-constant distribution must have positive mean".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        Ok(())
    }

    /// `round(σ·N)` with halves rounded up.
    pub fn input_node_count(&self) -> usize {
        (self.input_density * self.n_nodes as f64 + 0.5).floor() as usize
    }
}

/// A node's truth table. Position `p` holds the output for the input pattern
/// whose bits, read most-significant first, are the input word (sign bit
/// first) followed by the recurrent inputs in ascending source order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Lut(Vec<bool>);

impl Lut {
    pub fn new(entries: Vec<bool>) -> Result<Self> {
        if entries.is_empty() || !entries.len().is_power_of_two() {
            return Err(Error::invalid(
                "LUT",
                format!("length {} is not a power of two", entries.len()),
            ));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of inputs, `log2(len)`.
    pub fn width(&self) -> u32 {
        self.0.len().trailing_zeros()
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn entries(&self) -> &[bool] {
        &self.0
    }
}

impl fmt::Display for Lut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Lut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lut({self})")
    }
}

impl std::str::FromStr for Lut {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("invalid LUT character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Lut::new(entries)
    }
}

impl Serialize for Lut {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Lut {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A complete network instance. Matrices are row-major with the row indexing
/// the receiving node: `weights[i][j]` is the weight of the link `j -> i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub format_version: u32,
    pub hyperparams: Hyperparams,
    pub weights: Vec<Vec<f64>>,
    pub input_weights_effective: Vec<f64>,
    pub link_delays_ns: Vec<Vec<f64>>,
    pub node_time_constants_ns: Vec<f64>,
    pub node_thresholds: Vec<f64>,
    pub inverter_delay_ns: f64,
    pub luts: Vec<Lut>,
}

impl ReservoirSpec {
    /// Assemble a spec from explicit parts and derive its truth tables.
    ///
    /// Only structural invariants are checked (shapes, links exactly where
    /// weights are non-zero, positive delays and time constants); the random
    /// construction invariants such as the spectral radius are not.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        hyperparams: Hyperparams,
        weights: Vec<Vec<f64>>,
        input_weights_effective: Vec<f64>,
        link_delays_ns: Vec<Vec<f64>>,
        node_time_constants_ns: Vec<f64>,
        node_thresholds: Vec<f64>,
        inverter_delay_ns: f64,
    ) -> Result<Self> {
        let mut spec = Self {
            format_version: SPEC_FORMAT_VERSION,
            hyperparams,
            weights,
            input_weights_effective,
            link_delays_ns,
            node_time_constants_ns,
            node_thresholds,
            inverter_delay_ns,
            luts: Vec::new(),
        };
        spec.check_structure()?;
        spec.luts = (0..spec.n_nodes())
            .map(|i| derive_lut(&spec, i))
            .collect::<Result<_>>()?;
        Ok(spec)
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bits(&self) -> u32 {
        self.hyperparams.input_bits
    }

    /// Recurrent sources of node `i` in ascending order.
    pub fn sources(&self, i: usize) -> Vec<usize> {
        self.weights[i]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// All links as `(source, destination, delay_ns)`, ordered by destination
    /// then source.
    pub fn links(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_nodes())
            .flat_map(|i| {
                self.sources(i)
                    .into_iter()
                    .map(move |j| (j, i, self.link_delays_ns[i][j]))
            })
            .collect()
    }

    pub fn link_count(&self) -> usize {
        self.weights
            .iter()
            .map(|row| row.iter().filter(|&&w| w != 0.0).count())
            .sum()
    }

    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        DMatrix::from_fn(n, n, |i, j| self.weights[i][j])
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.n_nodes();
        let bad = |reason: String| Err(Error::invalid("reservoir spec", reason));
        if n == 0 {
            return bad("no nodes".into());
        }
        if self.weights.iter().any(|r| r.len() != n)
            || self.link_delays_ns.len() != n
            || self.link_delays_ns.iter().any(|r| r.len() != n)
        {
            return bad("weights and delays must be N x N".into());
        }
        if self.input_weights_effective.len() != n
            || self.node_time_constants_ns.len() != n
            || self.node_thresholds.len() != n
        {
            return bad("per-node vectors must have length N".into());
        }
        for i in 0..n {
            for j in 0..n {
                let (w, d) = (self.weights[i][j], self.link_delays_ns[i][j]);
                if !w.is_finite() || !d.is_finite() {
                    return Err(Error::NonFinite("reservoir spec"));
                }
                if (w != 0.0) != (d != 0.0) {
                    return bad(format!(
                        "link {j}->{i}: delay must be non-zero exactly where the weight is"
                    ));
                }
                if d < 0.0 {
                    return bad(format!("link {j}->{i} has negative delay"));
                }
            }
            if !(self.node_time_constants_ns[i] > 0.0) {
                return bad(format!("node {i} time constant must be positive"));
            }
            let q = self.node_thresholds[i];
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("node {i} threshold {q} not in (0, 1)"));
            }
            if !self.input_weights_effective[i].is_finite() {
                return Err(Error::NonFinite("input weights"));
            }
        }
        if !(self.inverter_delay_ns > 0.0) {
            return bad("inverter delay must be positive".into());
        }
        let n_bits = self.n_bits();
        if n_bits == 0 || n_bits > 16 {
            return bad(format!("input_bits {n_bits} not in 1..=16"));
        }
        let widest = (0..n).map(|i| self.sources(i).len()).max().unwrap_or(0) as u32 + n_bits;
        if widest > 20 {
            return bad(format!("{widest} node inputs is too many to tabulate"));
        }
        Ok(())
    }

    /// Check every invariant that [`build_reservoir`] guarantees.
    pub fn verify_generated(&self) -> Result<()> {
        self.check_structure()?;
        let hp = &self.hyperparams;
        let bad = |reason: String| Err(Error::invalid("generated spec", reason));
        for i in 0..self.n_nodes() {
            let k = self.sources(i).len();
            if k != hp.in_degree {
                return bad(format!("node {i} has {k} sources, expected {}", hp.in_degree));
            }
        }
        let rho = spectral_radius(&self.weight_matrix())?;
        if (rho - hp.spectral_radius).abs() > 1e-9 * hp.spectral_radius {
            return bad(format!("spectral radius {rho} != {}", hp.spectral_radius));
        }
        let period = 2.0 * self.inverter_delay_ns;
        let (lo, hi) = (hp.mean_delay_ns / 2.0, 1.5 * hp.mean_delay_ns);
        for (_, _, d) in self.links() {
            let m = d / period;
            if (m - m.round()).abs() > 1e-9 || d < lo - 1e-9 || d > hi + 1e-9 {
                return bad(format!("delay {d} ns violates quantization or range"));
            }
        }
        let inputs = self
            .input_weights_effective
            .iter()
            .filter(|&&w| w != 0.0)
            .count();
        if inputs != hp.input_node_count() {
            return bad(format!(
                "{inputs} input nodes, expected {}",
                hp.input_node_count()
            ));
        }
        for (i, lut) in self.luts.iter().enumerate() {
            if *lut != derive_lut(self, i)? {
                return bad(format!("node {i} LUT is stale"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        if spec.format_version != SPEC_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported spec format version {}",
                spec.format_version
            )));
        }
        spec.check_structure()?;
        Ok(spec)
    }
}

/// Largest eigenvalue magnitude of a square matrix (dense Schur decomposition).
pub fn spectral_radius(matrix: &DMatrix<f64>) -> Result<f64> {
    if !matrix.is_square() {
        return Err(Error::NotSquare {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let n = matrix.nrows();
    if n > MAX_DENSE_NODES {
        return Err(Error::TooLarge {
            n,
            limit: MAX_DENSE_NODES,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    // The unshifted QR iteration can stall on matrices such as exact
    // rotations; retry on a shifted copy, whose eigenvalues are `λ + s`.
    let scale = matrix.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for shift in [0.0, 0.1, 0.37, -0.23] {
        let shifted = matrix + DMatrix::identity(n, n) * (shift * scale);
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 100 * n.max(10)) {
            let eig = schur.complex_eigenvalues();
            return Ok(eig
                .iter()
                .map(|z| (z - shift * scale).norm())
                .fold(0.0, f64::max));
        }
    }
    Err(Error::invalid("matrix", "eigenvalue iteration did not converge"))
}

/// Draw a random reservoir.
pub fn build_reservoir(hp: &Hyperparams) -> Result<ReservoirSpec> {
    hp.validate()?;
    let n = hp.n_nodes;
    let k = hp.in_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);

    let mut weights = vec![vec![0.0; n]; n];
    for row in weights.iter_mut() {
        let mut sources = sample(&mut rng, n, k).into_vec();
        sources.sort_unstable();
        for j in sources {
            // reject an exact zero so the link survives
            let mut w = 0.0;
            while w == 0.0 {
                w = rng.gen_range(-1.0..=1.0);
            }
            row[j] = w;
        }
    }
    let raw_radius = spectral_radius(&DMatrix::from_fn(n, n, |i, j| weights[i][j]))?;
    if raw_radius <= f64::EPSILON {
        return Err(Error::invalid(
            "hyperparameters",
            format!("seed {} produced a nilpotent weight matrix", hp.seed),
        ));
    }
    let factor = hp.spectral_radius / raw_radius;
    for w in weights.iter_mut().flatten() {
        *w *= factor;
    }

    let period = 2.0 * hp.inverter_delay_ns;
    let (lo, hi) = (hp.mean_delay_ns / 2.0, 1.5 * hp.mean_delay_ns);
    let m_lo = (lo / period - 1e-9).ceil();
    let m_hi = (hi / period + 1e-9).floor();
    if m_lo > m_hi || m_hi < 1.0 {
        return Err(Error::invalid(
            "hyperparameters",
            format!(
                "no multiple of 2 tau_inv = {period} ns lies in [{lo}, {hi}] ns; increase mean_delay_ns"
            ),
        ));
    }
    let mut delays = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if weights[i][j] != 0.0 {
                delays[i][j] = quantized_delay(&mut rng, lo, hi, period, m_lo, m_hi);
            }
        }
    }

    let gamma_dist = Normal::new(hp.gamma_mean_ns, hp.gamma_std_ns)
        .map_err(|e| Error::invalid("node time constants", e.to_string()))?;
    let gammas: Vec<f64> = (0..n)
        .map(|_| loop {
            let g = gamma_dist.sample(&mut rng);
            if g > 0.0 {
                break g;
            }
        })
        .collect();

    let mut input_nodes = sample(&mut rng, n, hp.input_node_count()).into_vec();
    input_nodes.sort_unstable();
    let mut input_weights = vec![0.0; n];
    for i in input_nodes {
        let mut w = 0.0;
        while w == 0.0 {
            w = rng.gen_range(-1.0..=1.0);
        }
        input_weights[i] = w;
    }

    ReservoirSpec::from_parts(
        hp.clone(),
        weights,
        input_weights,
        delays,
        gammas,
        vec![hp.threshold; n],
        hp.inverter_delay_ns,
    )
}

/// Uniform draw on `[lo, hi]` rounded to the nearest multiple of `period`.
/// Draws whose rounded value falls outside the interval are redrawn, so the
/// result is in range and within `period / 2` of a uniform sample.
fn quantized_delay(rng: &mut ChaCha8Rng, lo: f64, hi: f64, period: f64, m_lo: f64, m_hi: f64) -> f64 {
    loop {
        let d: f64 = rng.gen_range(lo..=hi);
        let m = (d / period).round();
        if m >= m_lo && m <= m_hi {
            return m * period;
        }
    }
}

/// Tabulate `Θ(Σ W X + Σ w_b u_b)` for node `i` over all input patterns.
pub fn derive_lut(spec: &ReservoirSpec, node: usize) -> Result<Lut> {
    if node >= spec.n_nodes() {
        return Err(Error::invalid(
            "node index",
            format!("{node} >= {}", spec.n_nodes()),
        ));
    }
    let n_bits = spec.n_bits();
    let bit_weights = expand_input_weights(
        spec.input_weights_effective[node],
        n_bits,
        spec.hyperparams.input_scaling,
    );
    let rec: Vec<f64> = spec
        .sources(node)
        .into_iter()
        .map(|j| spec.weights[node][j])
        .collect();
    let k = rec.len();
    let width = k + n_bits as usize;
    let entries = (0..1usize << width)
        .map(|idx| {
            let code = idx >> k;
            let mut sum = 0.0;
            for (b, w) in bit_weights.iter().enumerate() {
                if (code >> b) & 1 == 1 {
                    sum += w;
                }
            }
            for (s, w) in rec.iter().enumerate() {
                if (idx >> (k - 1 - s)) & 1 == 1 {
                    sum += w;
                }
            }
            sum > 0.0
        })
        .collect();
    Lut::new(entries)
}

/// The three-node, one-bit network used to illustrate the Verilog listings.
///
/// The listed input column is the per-bit weight of the single input bit, so
/// the effective weight stored here is its negation (a one-bit word's only
/// bit is the sign bit, whose expanded weight is `-w̃`). Delays are the listed
/// multiples of `2 τ_inv`.
pub fn appendix_example() -> ReservoirSpec {
    let weights = vec![
        vec![0.1, 0.3, 0.0],
        vec![-0.2, 0.0, 0.1],
        vec![-0.3, 0.2, 0.0],
    ];
    let input_bit_weights = [0.1, -0.2, 0.2];
    let multiples = [[10.0, 15.0, 0.0], [6.0, 0.0, 7.0], [12.0, 10.0, 0.0]];
    let tau_inv = DEFAULT_INVERTER_DELAY_NS;
    let delays = multiples
        .iter()
        .map(|row| row.iter().map(|m| m * 2.0 * tau_inv).collect())
        .collect();
    let hp = Hyperparams {
        n_nodes: 3,
        spectral_radius: 1.0,
        in_degree: 2,
        mean_delay_ns: 10.0 * 2.0 * tau_inv,
        input_density: 1.0,
        input_bits: 1,
        seed: 0,
        ..Hyperparams::default()
    };
    ReservoirSpec::from_parts(
        hp,
        weights,
        input_bit_weights.iter().map(|w| -w).collect(),
        delays,
        vec![DEFAULT_GAMMA_MEAN_NS; 3],
        vec![DEFAULT_THRESHOLD; 3],
        tau_inv,
    )
    .expect("appendix example is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_hp(seed: u64) -> Hyperparams {
        Hyperparams {
            n_nodes: 12,
            in_degree: 3,
            input_bits: 4,
            seed,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!((spectral_radius(&d).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(spectral_radius(&DMatrix::zeros(4, 4)).unwrap(), 0.0);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_rejects_bad_input() {
        assert!(matches!(
            spectral_radius(&DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(spectral_radius(&m).is_err());
        assert!(matches!(
            spectral_radius(&DMatrix::zeros(201, 201)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn spectral_radius_scales_with_abs_factor() {
        let hp = small_hp(3);
        let w = build_reservoir(&hp).unwrap().weight_matrix();
        let r = spectral_radius(&w).unwrap();
        let r2 = spectral_radius(&(&w * -2.5)).unwrap();
        assert!((r2 - 2.5 * r).abs() < 1e-9 * r2);
    }

    #[test]
    fn appendix_luts() {
        let spec = appendix_example();
        assert_eq!(spec.luts[0].to_string(), "01111111");
        assert_eq!(spec.luts[1].to_string(), "01000000");
        assert_eq!(spec.luts[2].to_string(), "01001101");
        assert_eq!(spec.link_count(), 6);
    }

    #[test]
    fn built_specs_satisfy_invariants() {
        for seed in 0..5 {
            let spec = build_reservoir(&small_hp(seed)).unwrap();
            spec.verify_generated().unwrap();
        }
        let hp = Hyperparams {
            seed: 9,
            ..Hyperparams::default()
        };
        let spec = build_reservoir(&hp).unwrap();
        spec.verify_generated().unwrap();
        let rho = spectral_radius(&spec.weight_matrix()).unwrap();
        assert!((rho - 1.5).abs() < 1e-9 * 1.5);
        assert_eq!(spec.luts[0].len(), 1 << 10);
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_reservoir(&small_hp(42)).unwrap();
        let b = build_reservoir(&small_hp(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = build_reservoir(&small_hp(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn build_rejects_bad_hyperparams() {
        let hp = Hyperparams {
            n_nodes: 3,
            in_degree: 4,
            ..Hyperparams::default()
        };
        let err = build_reservoir(&hp).unwrap_err().to_string();
        assert!(err.contains("in_degree"), "{err}");
        let hp = Hyperparams {
            n_nodes: 3,
            in_degree: 1,
            input_density: 0.1,
            ..Hyperparams::default()
        };
        let err = build_reservoir(&hp).unwrap_err().to_string();
        assert!(err.contains("zero input nodes"), "{err}");
        let hp = Hyperparams {
            mean_delay_ns: 0.2,
            ..Hyperparams::default()
        };
        assert!(build_reservoir(&hp).is_err());
    }

    #[test]
    fn input_count_rounds_half_up() {
        let hp = Hyperparams {
            n_nodes: 10,
            input_density: 0.25,
            ..Hyperparams::default()
        };
        assert_eq!(hp.input_node_count(), 3);
        let hp = Hyperparams {
            n_nodes: 100,
            input_density: 0.5,
            ..Hyperparams::default()
        };
        assert_eq!(hp.input_node_count(), 50);
    }

    #[test]
    fn json_round_trip() {
        let spec = build_reservoir(&small_hp(1)).unwrap();
        let back = ReservoirSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(spec, back);
        let tampered = spec.to_json().unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(ReservoirSpec::from_json(&tampered).is_err());
    }

    #[test]
    fn lut_parsing() {
        assert!("0101".parse::<Lut>().is_ok());
        assert!("010".parse::<Lut>().is_err());
        assert!("01x1".parse::<Lut>().is_err());
        assert_eq!("00010000".parse::<Lut>().unwrap().width(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn zero_weight_inputs_are_irrelevant(seed in 0u64..1000) {
            let spec = build_reservoir(&small_hp(seed)).unwrap();
            let n_bits = spec.n_bits() as usize;
            for i in 0..spec.n_nodes() {
                let k = spec.sources(i).len();
                let bit_weights = expand_input_weights(
                    spec.input_weights_effective[i],
                    spec.n_bits(),
                    spec.hyperparams.input_scaling,
                );
                let lut = &spec.luts[i];
                for idx in 0..lut.len() {
                    for (b, &w) in bit_weights.iter().enumerate().take(n_bits) {
                        if w == 0.0 {
                            let flipped = idx ^ (1 << (k + b));
                            prop_assert_eq!(lut.get(idx), lut.get(flipped));
                        }
                    }
                }
            }
        }

        #[test]
        fn lut_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let spec = build_reservoir(&small_hp(seed)).unwrap();
            let mut scaled = spec.clone();
            for row in scaled.weights.iter_mut() {
                for w in row.iter_mut() {
                    *w *= c;
                }
            }
            for w in scaled.input_weights_effective.iter_mut() {
                *w *= c;
            }
            for i in 0..spec.n_nodes() {
                prop_assert_eq!(derive_lut(&scaled, i).unwrap(), spec.luts[i].clone());
            }
        }

        #[test]
        fn delay_quantization_error_bounded(seed in 0u64..200, tau in 4.0f64..14.0) {
            let hp = Hyperparams { mean_delay_ns: tau, ..small_hp(seed) };
            let spec = build_reservoir(&hp).unwrap();
            spec.verify_generated().unwrap();
        }
    }
}
