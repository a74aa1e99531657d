//! Timestamp maps: every cell labelled with the step at which it first
//! fired, as plain text or SVG.

use std::fmt::Write;

use crate::lattice::{AvalancheTrace, Cell, Configuration};

/// Inclusive window covering the support of `c` and every fired cell.
pub fn window(c: &Configuration, trace: &AvalancheTrace) -> Option<(Cell, Cell)> {
    let cells = c.iter().map(|(cell, _)| cell).chain(trace.timestamps.keys().copied());
    cells.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((
            Cell::new(lo.x.min(v.x), lo.y.min(v.y)),
            Cell::new(hi.x.max(v.x), hi.y.max(v.y)),
        )),
    })
}

/// One row per lattice row: the first-firing step of fired cells, `o` for
/// cells holding grains that never fired, `.` for empty cells.
pub fn ascii_map(c: &Configuration, trace: &AvalancheTrace) -> String {
    let Some((lo, hi)) = window(c, trace) else {
        return String::new();
    };
    let width = trace.timestamps.values().max().map_or(1, |t| t.to_string().len());
    let mut out = String::new();
    for y in lo.y..=hi.y {
        let row: Vec<String> = (lo.x..=hi.x)
            .map(|x| {
                let v = Cell::new(x, y);
                let tok = match trace.timestamp(v) {
                    Some(t) => t.to_string(),
                    None if c.get(v) > 0 => "o".into(),
                    None => ".".into(),
                };
                format!("{tok:>width$}")
            })
            .collect();
        out.push_str(row.join(" ").trim_end());
        out.push('\n');
    }
    out
}

/// SVG with one square per cell; fired cells are shaded from blue (early)
/// to red (late) and carry their timestamp.
pub fn svg_map(c: &Configuration, trace: &AvalancheTrace, cell_px: u32) -> String {
    let Some((lo, hi)) = window(c, trace) else {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"0\" height=\"0\"/>\n".into();
    };
    let (cols, rows) = ((hi.x - lo.x + 1) as u32, (hi.y - lo.y + 1) as u32);
    let tmax = trace.timestamps.values().max().copied().unwrap_or(1).max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"monospace\" font-size=\"{}\">",
        cols * cell_px,
        rows * cell_px,
        cell_px * 2 / 5
    );
    for y in lo.y..=hi.y {
        for x in lo.x..=hi.x {
            let v = Cell::new(x, y);
            let (px, py) = ((x - lo.x) as u32 * cell_px, (y - lo.y) as u32 * cell_px);
            let fill = match trace.timestamp(v) {
                Some(t) => format!("hsl({:.0},70%,60%)", 240.0 * (1.0 - t as f64 / tmax)),
                None if c.get(v) > 0 => "#d0d0d0".into(),
                None => "#ffffff".into(),
            };
            let _ = writeln!(
                out,
                "<rect x=\"{px}\" y=\"{py}\" width=\"{cell_px}\" height=\"{cell_px}\" fill=\"{fill}\" stroke=\"#999\" stroke-width=\"0.5\"/>"
            );
            if let Some(t) = trace.timestamp(v) {
                let _ = writeln!(
                    out,
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"central\">{t}</text>",
                    px + cell_px / 2,
                    py + cell_px / 2
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
