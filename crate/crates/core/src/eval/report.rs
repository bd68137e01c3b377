//! CSV reports, a plain-text results table and SVG top views.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::benchmark::{BenchmarkResult, MethodSummary, Metric};
use crate::error::{Error, Result};
use crate::sim::{MazeMap, RoomLabel, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub n_samples_used: usize,
    pub n_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerStartRow {
    pub method: String,
    pub map_id: usize,
    pub start_id: usize,
    pub metric: String,
    pub value: f64,
}

pub fn summary_rows(summaries: &[MethodSummary]) -> Vec<SummaryRow> {
    summaries
        .iter()
        .flat_map(|s| {
            Metric::ALL.iter().map(move |m| SummaryRow {
                method: s.method.clone(),
                metric: m.name().to_string(),
                value: match m {
                    Metric::Adt => s.adt,
                    Metric::MaxDistance => s.max_distance,
                    Metric::CollisionRate => s.collision_rate,
                },
                n_samples_used: s.n_samples_used,
                n_starts: s.n_starts,
            })
        })
        .collect()
}

pub fn per_start_rows(result: &BenchmarkResult) -> Vec<PerStartRow> {
    let mut rows = Vec::new();
    for (method, _) in &result.methods {
        let keys = result.per_start_keys(method);
        for metric in Metric::ALL {
            for (&(map_id, start_id), value) in keys.iter().zip(result.per_start(method, metric)) {
                rows.push(PerStartRow {
                    method: method.clone(),
                    map_id,
                    start_id,
                    metric: metric.name().to_string(),
                    value,
                });
            }
        }
    }
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let fail = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let fail = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    let mut r = csv::Reader::from_path(path).map_err(fail)?;
    r.deserialize().map(|row| row.map_err(fail)).collect()
}

/// Results table with one line per method. Methods listed in `expected` but
/// absent from `rows` are shown as absent.
pub fn format_table(rows: &[SummaryRow], expected: &[&str]) -> String {
    let mut methods: Vec<String> = Vec::new();
    for name in expected.iter().map(|s| s.to_string()).chain(rows.iter().map(|r| r.method.clone())) {
        if !methods.contains(&name) {
            methods.push(name);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<30} {:>10} {:>10} {:>14} {:>16}", "method", "# samples", "ADT (m)", "Max dist (m)", "Collision (%)");
    for m in methods {
        let get = |metric: Metric| rows.iter().find(|r| r.method == m && r.metric == metric.name());
        match (get(Metric::Adt), get(Metric::MaxDistance), get(Metric::CollisionRate)) {
            (Some(a), Some(d), Some(c)) => {
                let _ = writeln!(
                    out,
                    "{:<30} {:>10} {:>10.2} {:>14.2} {:>16.1}",
                    m,
                    a.n_samples_used,
                    a.value,
                    d.value,
                    c.value * 100.0
                );
            }
            _ => {
                let _ = writeln!(out, "{m:<30} {:>10} {:>10} {:>14} {:>16}", "absent", "-", "-", "-");
            }
        }
    }
    out
}

/// Color for a subroutine id; trajectories without one are gray.
pub fn palette(id: Option<u8>) -> &'static str {
    const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#e377c2", "#8c564b"];
    id.map_or("#555555", |i| COLORS[i as usize % COLORS.len()])
}

/// Top view of the map with trajectories drawn segment by segment, each
/// segment colored by its subroutine.
pub fn svg_top_view(map: &MazeMap, trajectories: &[Trajectory], scale: f64) -> String {
    let cs = map.cell_size();
    let (w, h) = (map.width() as f64 * cs, map.height() as f64 * cs);
    let px = |v: f64| v * scale;
    // Flip y so the map reads with y up.
    let py = |v: f64| (h - v) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.1} {:.1}">"#,
        px(w),
        px(h),
        px(w),
        px(h)
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for y in 0..map.height() {
        let mut x = 0;
        while x < map.width() {
            let c = crate::sim::Cell::new(x, y);
            let occ = map.is_occupied(c);
            let target = !occ && map.label(c) == RoomLabel::Target;
            if !occ && !target {
                x += 1;
                continue;
            }
            let start = x;
            while x < map.width() {
                let c = crate::sim::Cell::new(x, y);
                let same = if occ { map.is_occupied(c) } else { !map.is_occupied(c) && map.label(c) == RoomLabel::Target };
                if !same {
                    break;
                }
                x += 1;
            }
            let fill = if occ { "#333333" } else { "#fff3c4" };
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{fill}"/>"#,
                px(start as f64 * cs),
                py((y + 1) as f64 * cs),
                px((x - start) as f64 * cs),
                px(cs)
            );
        }
    }
    for t in trajectories {
        for (i, w2) in t.poses.windows(2).enumerate() {
            if w2[0].x == w2[1].x && w2[0].y == w2[1].y {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2" stroke-opacity="0.8"/>"#,
                px(w2[0].x),
                py(w2[0].y),
                px(w2[1].x),
                py(w2[1].y),
                palette(t.subroutine[i])
            );
        }
        let p = t.poses[0];
        let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="4" fill="#000000"/>"##, px(p.x), py(p.y));
    }
    s.push_str("</svg>\n");
    s
}
