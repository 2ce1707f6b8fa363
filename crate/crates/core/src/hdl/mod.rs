//! Verilog generation for a reservoir and its synchronous surroundings.
//!
//! Four source files are produced: a generic `node` LUT module, the
//! inverter-chain `delay_line`, the `reservoir` netlist and the
//! `reservoir_computer` top level (with its output layer and stub
//! `sampler`/`player` modules). Identifiers follow the listing convention:
//! nodes are `node_0`, `node_1`, … and delay lines `delay_<src>_<dst>`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::readout::TrainedReadout;
use crate::network::ReservoirSpec;
use crate::{Error, Result};

pub const NODE_FILE: &str = "node.v";
pub const DELAY_LINE_FILE: &str = "delay_line.v";
pub const RESERVOIR_FILE: &str = "reservoir.v";
pub const TOP_FILE: &str = "reservoir_computer.v";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Sized binary literal whose most significant bit is the entry for the
/// all-zeros input.
pub fn lut_to_literal(entries: &[bool]) -> Result<String> {
    if !entries.len().is_power_of_two() {
        return Err(Error::invalid(
            "LUT",
            format!("length {} is not a power of two", entries.len()),
        ));
    }
    let bits: String = entries.iter().map(|&b| if b { '1' } else { '0' }).collect();
    Ok(format!("{}'b{bits}", entries.len()))
}

/// Number of inverter pairs realising `delay_ns`, at least one.
pub fn delay_to_pairs(delay_ns: f64, tau_inv_ns: f64) -> u64 {
    ((delay_ns / (2.0 * tau_inv_ns)).round() as u64).max(1)
}

/// Saturating conversion of readout weights to two's-complement codes of
/// `2n` bits with `n - 1` fractional bits.
pub fn weights_to_fixed(weights: &[f64], n_bits: u32) -> Vec<i64> {
    let width = 2 * n_bits;
    let hi = (1i64 << (width - 1)) - 1;
    let lo = -(1i64 << (width - 1));
    let scale = (1i64 << (n_bits - 1)) as f64;
    weights
        .iter()
        .map(|w| {
            let c = (w * scale).round();
            if c.is_nan() {
                0
            } else {
                (c.clamp(lo as f64, hi as f64)) as i64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInstance {
    pub name: String,
    pub index: usize,
    pub lut: String,
    /// Sources in the order they are concatenated after the input word.
    pub sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayLineInstance {
    pub name: String,
    pub source: usize,
    pub destination: usize,
    /// Inverter pairs.
    pub m: u64,
    /// Bit of `x_tau` carrying the delayed signal.
    pub tap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlManifest {
    pub n_nodes: usize,
    pub n_delay_lines: usize,
    pub n_bits: u32,
    pub output_weight_bits: u32,
    pub nodes: Vec<NodeInstance>,
    pub delay_lines: Vec<DelayLineInstance>,
    pub output_weight_codes: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdlBundle {
    pub node_module: String,
    pub delay_line_module: String,
    pub reservoir_module: String,
    pub top_module: String,
    pub manifest: HdlManifest,
}

impl HdlBundle {
    /// `(file name, contents)` for every output file.
    pub fn files(&self) -> Result<Vec<(&'static str, String)>> {
        let mut manifest = serde_json::to_string_pretty(&self.manifest)?;
        manifest.push('\n');
        Ok(vec![
            (NODE_FILE, self.node_module.clone()),
            (DELAY_LINE_FILE, self.delay_line_module.clone()),
            (RESERVOIR_FILE, self.reservoir_module.clone()),
            (TOP_FILE, self.top_module.clone()),
            (MANIFEST_FILE, manifest),
        ])
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, text) in self.files()? {
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

const NODE_MODULE: &str = "\
module node (node_in, node_out);
parameter WIDTH = 3;
parameter LUT_SIZE = 8;
parameter [LUT_SIZE-1:0] lut = 8'b00000000;
input [WIDTH-1:0] node_in;
output reg node_out;

// input 0 reads the most significant bit of lut
always @(*)
begin
    node_out = lut[LUT_SIZE-1-node_in];
end

endmodule
";

const DELAY_LINE_MODULE: &str = "\
module delay_line (delay_in, delay_out);
parameter m = 1;
input delay_in;
output delay_out;

wire [2*m:0] chain /*synthesis keep*/;

assign chain[0] = delay_in;
assign delay_out = chain[2*m];

genvar i;
generate
    for (i = 0; i < 2*m; i = i + 1)
    begin : inverters
        assign chain[i+1] = ~chain[i];
    end
endgenerate

endmodule
";

/// Compile `spec` into Verilog. Without a readout the output weights are
/// all zero.
pub fn emit(spec: &ReservoirSpec, n_bits: u32, readout: Option<&TrainedReadout>) -> Result<HdlBundle> {
    if n_bits != spec.n_bits() {
        return Err(Error::HdlMismatch(format!(
            "requested {n_bits}-bit input but the reservoir was built for {} bits",
            spec.n_bits()
        )));
    }
    let n = spec.n_nodes();
    let weights = match readout {
        Some(r) if r.weights.len() != n + 1 => {
            return Err(Error::HdlMismatch(format!(
                "readout has {} weights, reservoir needs {}",
                r.weights.len(),
                n + 1
            )))
        }
        Some(r) => r.weights.clone(),
        None => vec![0.0; n + 1],
    };

    let mut delay_lines = Vec::new();
    let mut nodes = Vec::with_capacity(n);
    for dst in 0..n {
        let sources = spec.sources(dst);
        for &src in &sources {
            delay_lines.push(DelayLineInstance {
                name: format!("delay_{src}_{dst}"),
                source: src,
                destination: dst,
                m: delay_to_pairs(spec.link_delays_ns[dst][src], spec.inverter_delay_ns),
                tap: delay_lines.len(),
            });
        }
        let lut = &spec.luts[dst];
        let expected = 1usize << (sources.len() + n_bits as usize);
        if lut.len() != expected {
            return Err(Error::HdlMismatch(format!(
                "node {dst} LUT has {} entries, expected {expected}",
                lut.len()
            )));
        }
        nodes.push(NodeInstance {
            name: format!("node_{dst}"),
            index: dst,
            lut: lut_to_literal(lut.entries())?,
            sources,
        });
    }
    let codes = weights_to_fixed(&weights, n_bits);
    let manifest = HdlManifest {
        n_nodes: n,
        n_delay_lines: delay_lines.len(),
        n_bits,
        output_weight_bits: 2 * n_bits,
        nodes,
        delay_lines,
        output_weight_codes: codes,
    };
    Ok(HdlBundle {
        node_module: NODE_MODULE.to_string(),
        delay_line_module: DELAY_LINE_MODULE.to_string(),
        reservoir_module: reservoir_module(&manifest),
        top_module: top_module(&manifest),
        manifest,
    })
}

fn reservoir_module(m: &HdlManifest) -> String {
    let mut s = String::new();
    let taps = m.n_delay_lines.max(1);
    let _ = writeln!(s, "module reservoir (u, x);");
    let _ = writeln!(s, "parameter N = {};", m.n_nodes);
    let _ = writeln!(s, "parameter NB = {};", m.n_bits);
    let _ = writeln!(s, "input [NB-1:0] u;");
    let _ = writeln!(s, "output [N-1:0] x;");
    let _ = writeln!(s, "wire [{}:0] x_tau;", taps - 1);
    if m.n_delay_lines == 0 {
        let _ = writeln!(s, "assign x_tau = 1'b0;");
    }
    let _ = writeln!(s);
    for node in &m.nodes {
        let mut inputs = vec!["u".to_string()];
        inputs.extend(
            m.delay_lines
                .iter()
                .filter(|d| d.destination == node.index)
                .map(|d| format!("x_tau[{}]", d.tap)),
        );
        let width = m.n_bits as usize + node.sources.len();
        let _ = writeln!(
            s,
            "node #(.WIDTH({width}), .LUT_SIZE({}), .lut({})) {} (.node_in({{{}}}), .node_out(x[{}]));",
            1usize << width,
            node.lut,
            node.name,
            inputs.join(", "),
            node.index
        );
    }
    if !m.delay_lines.is_empty() {
        let _ = writeln!(s);
    }
    for d in &m.delay_lines {
        let _ = writeln!(
            s,
            "delay_line #(.m({})) {} (.delay_in(x[{}]), .delay_out(x_tau[{}]));",
            d.m, d.name, d.source, d.tap
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "endmodule");
    s
}

fn weights_literal(codes: &[i64], width: u32) -> String {
    let total = codes.len() as u32 * width;
    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    // word 0 occupies the least significant bits
    let bits: String = codes
        .iter()
        .rev()
        .map(|&c| format!("{:0w$b}", (c as u64) & mask, w = width as usize))
        .collect();
    format!("{total}'b{bits}")
}

fn top_module(m: &HdlManifest) -> String {
    let n = m.n_nodes;
    let nb = m.n_bits;
    let mut s = String::new();
    let _ = write!(
        s,
        "\
module reservoir_computer (clk);
parameter N = {n};
parameter NB = {nb};
input clk;

wire [NB-1:0] u;
wire mode;
wire [2*NB*(N+1)-1:0] W_out;
wire [N-1:0] x;
wire [NB-1:0] v;
wire [NB-1:0] r_in;
reg [N-1:0] x_reg;
reg [NB-1:0] v_reg;

sampler #(.N(N), .NB(NB)) sampler_0 (.clk(clk), .u(u), .mode(mode), .W_out(W_out));
player #(.N(N), .NB(NB)) player_0 (.clk(clk), .x(x_reg), .v(v_reg));

// mode 1: stored input drives the reservoir, mode 0: autonomous
assign r_in = mode ? u : v_reg;

reservoir reservoir_0 (.u(r_in), .x(x));

always @(posedge clk)
begin
    x_reg <= x;
    v_reg <= v;
end

output_layer #(.N(N), .NB(NB)) output_layer_0 (.x(x_reg), .u(r_in), .W_out(W_out), .v(v));

endmodule


module output_layer (x, u, W_out, v);
parameter N = {n};
parameter NB = {nb};
input [N-1:0] x;
input [NB-1:0] u;
input [2*NB*(N+1)-1:0] W_out;
output reg [NB-1:0] v;

reg signed [4*NB+31:0] acc;
reg signed [4*NB+31:0] term;
integer i;

always @(*)
begin
    acc = 0;
    for (i = 0; i < N; i = i + 1)
    begin
        if (x[i])
            acc = acc + $signed(W_out[2*NB*i +: 2*NB]);
    end
    term = $signed(W_out[2*NB*N +: 2*NB]) * $signed(u);
    acc = acc + (term >>> (NB-1));
    if (acc > (2**(NB-1))-1)
        v = (2**(NB-1))-1;
    else if (acc < -(2**(NB-1)))
        v = -(2**(NB-1));
    else
        v = acc[NB-1:0];
end

endmodule


// Device-specific; the stub holds the trained weights and stays in training mode.
module sampler (clk, u, mode, W_out);
parameter N = {n};
parameter NB = {nb};
localparam [2*NB*(N+1)-1:0] W_OUT_TRAINED = {weights};
input clk;
output [NB-1:0] u;
output mode;
output [2*NB*(N+1)-1:0] W_out;

assign u = 0;
assign mode = 1'b1;
assign W_out = W_OUT_TRAINED;

endmodule


// Device-specific; the stub discards the recorded data.
module player (clk, x, v);
parameter N = {n};
parameter NB = {nb};
input clk;
input [N-1:0] x;
input [NB-1:0] v;

endmodule
",
        weights = weights_literal(&m.output_weight_codes, m.output_weight_bits),
    );
    s
}
