mod common;

use std::path::Path;

use boolres::hdl::{emit, lut_to_literal};
use boolres::network::{appendix_example, build_reservoir, Hyperparams};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/appendix");

#[test]
fn appendix_matches_golden_files() {
    let bundle = emit(&appendix_example(), 1, None).unwrap();
    for (name, text) in bundle.files().unwrap() {
        let golden = std::fs::read_to_string(Path::new(GOLDEN).join(name)).unwrap();
        assert_eq!(text, golden, "{name} differs from the golden copy");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = emit(&appendix_example(), 1, None).unwrap().files().unwrap();
    let b = emit(&appendix_example(), 1, None).unwrap().files().unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    emit(&appendix_example(), 1, None).unwrap().write_to_dir(dir.path()).unwrap();
    for (name, text) in a {
        assert_eq!(std::fs::read_to_string(dir.path().join(name)).unwrap(), text);
    }
}

#[test]
fn parsed_appendix_recovers_network() {
    let bundle = emit(&appendix_example(), 1, None).unwrap();
    assert_eq!(bundle.manifest.n_nodes, 3);
    assert_eq!(bundle.manifest.n_delay_lines, 6);
    let (sources, m, luts) = common::recover_network(&bundle.reservoir_module);
    assert_eq!(sources, vec![vec![0, 1], vec![0, 2], vec![0, 1]]);
    let expected_m = [((0, 0), 10), ((1, 0), 15), ((0, 1), 6), ((2, 1), 7), ((0, 2), 12), ((1, 2), 10)];
    assert_eq!(m.len(), expected_m.len());
    for (link, pairs) in expected_m {
        assert_eq!(m[&link], pairs, "link {link:?}");
    }
    assert_eq!(luts, vec!["01111111", "01000000", "01001101"]);
}

#[test]
fn parsed_random_reservoir_recovers_network() {
    let hp = Hyperparams {
        n_nodes: 12,
        in_degree: 3,
        input_bits: 3,
        seed: 9,
        ..Hyperparams::default()
    };
    let spec = build_reservoir(&hp).unwrap();
    let bundle = emit(&spec, 3, None).unwrap();
    let (sources, m, luts) = common::recover_network(&bundle.reservoir_module);
    let period = 2.0 * spec.inverter_delay_ns;
    for dst in 0..spec.n_nodes() {
        assert_eq!(sources[dst], spec.sources(dst));
        for &src in &sources[dst] {
            let pairs = (spec.link_delays_ns[dst][src] / period).round() as u64;
            assert_eq!(m[&(src, dst)], pairs);
        }
        let literal = lut_to_literal(spec.luts[dst].entries()).unwrap();
        assert_eq!(format!("{}'b{}", luts[dst].len(), luts[dst]), literal);
    }
}

#[test]
fn top_level_wiring() {
    let bundle = emit(&appendix_example(), 1, None).unwrap();
    let top = common::instances(&bundle.top_module);
    let find = |module: &str| top.iter().find(|i| i.module == module).unwrap();
    assert_eq!(find("reservoir").port("u"), Some("r_in"));
    assert_eq!(find("output_layer").port("x"), Some("x_reg"));
    assert_eq!(find("output_layer").port("u"), Some("r_in"));
    assert_eq!(find("player").port("x"), Some("x_reg"));
    assert!(bundle.top_module.contains("assign r_in = mode ? u : v_reg;"));
}
