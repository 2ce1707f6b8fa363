//! Verilog reading for the round-trip tests, built on an independent parser.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use sv_parser::{parse_sv_str, RefNode, SyntaxTree};

#[derive(Debug, Clone)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub params: Vec<(String, String)>,
    pub ports: Vec<(String, String)>,
}

impl Instance {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn port(&self, name: &str) -> Option<&str> {
        self.ports.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

fn strip_parens(s: &str) -> String {
    let s = s.trim();
    s.strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(s)
        .trim()
        .to_string()
}

fn text<'a, T: Into<sv_parser::RefNodes<'a>>>(tree: &SyntaxTree, node: T) -> String {
    tree.get_str_trim(node).unwrap_or("").to_string()
}

/// Every module instantiation in `source`, in file order.
pub fn instances(source: &str) -> Vec<Instance> {
    let defines = HashMap::new();
    let includes: Vec<PathBuf> = Vec::new();
    let (tree, _) = parse_sv_str(source, PathBuf::from("input.v"), &defines, &includes, false, false)
        .expect("emitted Verilog parses");
    let mut out = Vec::new();
    for node in &tree {
        let RefNode::ModuleInstantiation(inst) = node else {
            continue;
        };
        let module = text(&tree, &inst.nodes.0);
        let mut params = Vec::new();
        let mut name = String::new();
        let mut ports = Vec::new();
        for sub in inst {
            match sub {
                RefNode::NamedParameterAssignment(p) => {
                    params.push((text(&tree, &p.nodes.1), strip_parens(&text(&tree, &p.nodes.2))));
                }
                RefNode::NameOfInstance(n) => name = text(&tree, n),
                RefNode::NamedPortConnectionIdentifier(p) => {
                    let expr = p.nodes.3.as_ref().map(|e| strip_parens(&text(&tree, e)));
                    ports.push((text(&tree, &p.nodes.2), expr.unwrap_or_default()));
                }
                _ => {}
            }
        }
        out.push(Instance {
            module,
            name,
            params,
            ports,
        });
    }
    out
}

/// `x[3]` -> 3 for the given vector name.
pub fn bit_index(expr: &str, vector: &str) -> Option<usize> {
    expr.trim()
        .strip_prefix(vector)?
        .strip_prefix('[')?
        .strip_suffix(']')?
        .trim()
        .parse()
        .ok()
}

/// `8'b01111111` -> "01111111".
pub fn binary_literal(expr: &str) -> Option<(usize, String)> {
    let (width, digits) = expr.trim().split_once("'b")?;
    Some((width.trim().parse().ok()?, digits.to_string()))
}

/// Sources, inverter-pair counts and LUT strings recovered from a
/// `reservoir` module: `(sources per node, m per (src, dst), lut per node)`.
#[allow(clippy::type_complexity)]
pub fn recover_network(source: &str) -> (Vec<Vec<usize>>, HashMap<(usize, usize), u64>, Vec<String>) {
    let all = instances(source);
    let mut tap_source: HashMap<usize, (usize, u64)> = HashMap::new();
    for d in all.iter().filter(|i| i.module == "delay_line") {
        let src = bit_index(d.port("delay_in").unwrap(), "x").unwrap();
        let tap = bit_index(d.port("delay_out").unwrap(), "x_tau").unwrap();
        let m: u64 = d.param("m").unwrap().parse().unwrap();
        tap_source.insert(tap, (src, m));
    }
    let nodes: Vec<&Instance> = all.iter().filter(|i| i.module == "node").collect();
    let mut sources = vec![Vec::new(); nodes.len()];
    let mut luts = vec![String::new(); nodes.len()];
    let mut m = HashMap::new();
    for n in nodes {
        let dst = bit_index(n.port("node_out").unwrap(), "x").unwrap();
        let inner = n.port("node_in").unwrap().trim_start_matches('{').trim_end_matches('}');
        for part in inner.split(',').map(str::trim) {
            if let Some(tap) = bit_index(part, "x_tau") {
                let (src, pairs) = tap_source[&tap];
                sources[dst].push(src);
                m.insert((src, dst), pairs);
            }
        }
        let (width, digits) = binary_literal(n.param("lut").unwrap()).unwrap();
        assert_eq!(width, digits.len());
        luts[dst] = digits;
    }
    (sources, m, luts)
}
