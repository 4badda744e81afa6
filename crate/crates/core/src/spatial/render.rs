use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::WorldState;
use crate::tree::{LabeledTree, Node};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub robot_id: Node,
    pub x: f64,
    pub y: f64,
    pub phase: String,
}

impl TrajectoryRow {
    /// One row per robot for the current world snapshot.
    pub fn snapshot(world: &WorldState) -> impl Iterator<Item = TrajectoryRow> + '_ {
        (1..=world.n()).map(move |v| TrajectoryRow {
            t: world.time,
            robot_id: v,
            x: world.positions[v].x,
            y: world.positions[v].y,
            phase: world.phases[v].name().to_string(),
        })
    }
}

pub fn write_trajectory_csv<W: io::Write>(rows: &[TrajectoryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Draws each robot's trail with its start in red and end in green, plus the
/// final tree links.
pub fn render_svg(rows: &[TrajectoryRow], tree: &LabeledTree) -> String {
    let mut trails: BTreeMap<Node, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        trails.entry(r.robot_id).or_default().push((r.x, r.y));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in rows {
        x0 = x0.min(r.x);
        y0 = y0.min(r.y);
        x1 = x1.max(r.x);
        y1 = y1.max(r.y);
    }
    if rows.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let pad = 0.5;
    let (vx, vy) = (x0 - pad, -(y1 + pad));
    let (vw, vh) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let dot = (vw.max(vh) / 150.0).max(0.02);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vx:.3} {vy:.3} {vw:.3} {vh:.3}" width="800" height="{:.0}">"#,
        800.0 * vh / vw
    );
    let _ = writeln!(s, r#"<rect x="{vx:.3}" y="{vy:.3}" width="{vw:.3}" height="{vh:.3}" fill="white"/>"#);
    for pts in trails.values() {
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{:.3}", -y)).collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#999" stroke-width="{:.3}"/>"##,
            path.join(" "),
            dot / 3.0
        );
    }
    let end = |v: Node| trails.get(&v).and_then(|p| p.last()).copied();
    for (u, v) in tree.edges() {
        if let (Some(a), Some(b)) = (end(u), end(v)) {
            let _ = writeln!(
                s,
                r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#222" stroke-width="{:.3}"/>"##,
                a.0,
                -a.1,
                b.0,
                -b.1,
                dot / 2.0
            );
        }
    }
    for pts in trails.values() {
        let (sx, sy) = pts[0];
        let (ex, ey) = pts[pts.len() - 1];
        let _ = writeln!(s, r#"<circle cx="{sx:.3}" cy="{:.3}" r="{dot:.3}" fill="red"/>"#, -sy);
        let _ = writeln!(s, r#"<circle cx="{ex:.3}" cy="{:.3}" r="{dot:.3}" fill="green"/>"#, -ey);
    }
    s.push_str("</svg>\n");
    s
}
