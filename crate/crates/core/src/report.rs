//! Comparison tables: theoretical bound, classical topologies and the best
//! explored circuit per (width, delay) row.

use std::fmt::Write as _;

use crate::baselines::Topology;
use crate::circuit::area_lower_bound;
use crate::dse::CircuitPool;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub width: usize,
    pub delay: u32,
    /// `None` when the delay is below the minimum achievable for the width.
    pub theory_bound: Option<usize>,
    /// Area per [`Topology::ALL`] entry, present only if that topology has
    /// exactly this delay at this width.
    pub baselines: [Option<usize>; 3],
    /// Smallest pool area at this width with delay no greater than the row's.
    pub tool: Option<usize>,
}

fn baseline_area(t: Topology, width: usize, delay: u32) -> Option<usize> {
    let c = t.build(width).ok()?;
    let m = c.metrics();
    (m.delay == delay).then_some(m.area)
}

pub fn build_report(widths: &[usize], delays: &[u32], pools: &[CircuitPool]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &width in widths {
        for &delay in delays {
            let theory_bound = area_lower_bound(width, delay).ok();
            let baselines = Topology::ALL.map(|t| baseline_area(t, width, delay));
            let tool = pools
                .iter()
                .filter(|p| p.width() == width)
                .flat_map(|p| p.entries())
                .filter(|e| e.metrics.delay <= delay)
                .map(|e| e.metrics.area)
                .min();
            rows.push(ReportRow {
                width,
                delay,
                theory_bound,
                baselines,
                tool,
            });
        }
    }
    rows
}

fn cell(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |a| a.to_string())
}

fn header() -> Vec<String> {
    let mut h = vec!["n".to_string(), "delay".into(), "bound".into()];
    h.extend(Topology::ALL.iter().map(|t| t.name().to_string()));
    h.push("tool".into());
    h
}

fn cells(r: &ReportRow) -> Vec<String> {
    let mut v = vec![r.width.to_string(), r.delay.to_string(), cell(r.theory_bound)];
    v.extend(r.baselines.iter().map(|b| cell(*b)));
    v.push(cell(r.tool));
    v
}

/// Right-aligned plain-text table.
pub fn render_table(rows: &[ReportRow]) -> String {
    let table: Vec<Vec<String>> = std::iter::once(header()).chain(rows.iter().map(cells)).collect();
    let widths: Vec<usize> = (0..table[0].len())
        .map(|i| table.iter().map(|r| r[i].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (k, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if k == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = header().join(",");
    out.push('\n');
    for r in rows {
        let row: Vec<String> = cells(r)
            .into_iter()
            .map(|c| if c == "-" { String::new() } else { c })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
