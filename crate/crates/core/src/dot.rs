//! Graphviz export of solution graphs.

use std::fmt::Write;

use crate::perturb::SolutionGraph;

const PALETTE: [&str; 8] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5",
];

/// Deterministic DOT text: nodes carry the bit-string label, component id and
/// self-loop weight; edges are labelled by Hamming distance with the weight
/// in `w`.
pub fn export_dot(graph: &SolutionGraph) -> String {
    let manifold = graph.manifold();
    let n = manifold.num_spins();
    let mut out = String::new();
    out.push_str("graph solution {\n");
    let _ = writeln!(out, "  graph [order=\"{:?}\"];", graph.order());
    out.push_str("  node [shape=box, style=filled];\n");
    for (i, s) in manifold.states().iter().enumerate() {
        let c = graph.component_of(i);
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\", component={c}, self_loop={}, fillcolor=\"{}\"];",
            s.label(n),
            graph.weight(i, i),
            PALETTE[c % PALETTE.len()]
        );
    }
    for (i, j, w) in graph.edges() {
        let hd = graph.hamming(i, j);
        let _ = writeln!(out, "  n{i} -- n{j} [label=\"{hd}\", hd={hd}, w={w}];");
    }
    out.push_str("}\n");
    out
}
