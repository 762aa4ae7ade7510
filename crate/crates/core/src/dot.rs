//! Graphviz rendering: inputs as squares, prefix nodes as circles, output
//! nodes (range starting at bit 0) in red, one rank per logic level.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::PrefixCircuit;

pub fn emit_dot(c: &PrefixCircuit) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "digraph prefix_circuit {{");
    let _ = writeln!(w, "  rankdir=TB;");
    let _ = writeln!(w, "  node [fontname=\"Helvetica\"];");
    let mut ranks: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for node in c.nodes() {
        ranks.entry(node.level).or_default().push(node.id);
        let shape = if node.is_input() { "square" } else { "circle" };
        let color = if node.range.is_output() {
            ", color=red, fontcolor=red"
        } else {
            ""
        };
        let _ = writeln!(
            w,
            "  n{} [shape={shape}, label=\"{}\\n{}\"{color}];",
            node.id, node.id, node.range
        );
    }
    for (level, ids) in &ranks {
        let names: Vec<String> = ids.iter().map(|i| format!("n{i}")).collect();
        let _ = writeln!(w, "  {{ rank=same; /* level {level} */ {}; }}", names.join("; "));
    }
    for node in c.nodes() {
        if let Some((l, r)) = node.children() {
            let _ = writeln!(w, "  n{l} -> n{};", node.id);
            let _ = writeln!(w, "  n{r} -> n{};", node.id);
        }
    }
    let _ = writeln!(w, "}}");
    out
}
