//! SVG figures of a scenario and a driven (or planned) trajectory.

use std::fmt::Write as _;

use crate::env::{ScenarioSpec, TrajectoryRow};
use crate::sim::{OrientedRect, VehicleParams, VehicleState, Pose};

/// Pixels per meter.
pub const SCALE: f64 = 40.0;
/// Heading ticks are drawn on every this many trajectory rows.
pub const TICK_EVERY: usize = 10;
const TICK_LEN: f64 = 0.6;

/// Linear lot-to-viewBox map; y is flipped so north is up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewMap {
    pub min_x: f64,
    pub max_y: f64,
    pub width: f64,
    pub height: f64,
}

impl ViewMap {
    /// Axis-aligned bounds of `lot`, scaled by [`SCALE`].
    pub fn for_lot(lot: &OrientedRect) -> Self {
        let corners = lot.corners();
        let xs = corners.iter().map(|c| c.0);
        let ys = corners.iter().map(|c| c.1);
        let (min_x, max_x) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let (min_y, max_y) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        Self {
            min_x,
            max_y,
            width: (max_x - min_x) * SCALE,
            height: (max_y - min_y) * SCALE,
        }
    }

    pub fn map(&self, p: (f64, f64)) -> (f64, f64) {
        ((p.0 - self.min_x) * SCALE, (self.max_y - p.1) * SCALE)
    }
}

fn polygon(out: &mut String, view: &ViewMap, rect: &OrientedRect, attrs: &str) {
    let pts: Vec<String> = rect
        .corners()
        .iter()
        .map(|&c| {
            let (x, y) = view.map(c);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(out, r#"  <polygon points="{}" {attrs}/>"#, pts.join(" "));
}

/// Render `rows` over the scenario. With no rows only the scene is drawn.
pub fn render_svg(spec: &ScenarioSpec, rows: &[TrajectoryRow], params: &VehicleParams) -> String {
    let view = ViewMap::for_lot(&spec.lot);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.3} {h:.3}" width="{w:.0}" height="{h:.0}">"#,
        w = view.width,
        h = view.height
    );
    let _ = writeln!(out, r#"  <g id="scene">"#);
    polygon(&mut out, &view, &spec.lot, r##"id="lot" fill="#f4f4f4" stroke="#222" stroke-width="3""##);
    for o in &spec.obstacles {
        polygon(&mut out, &view, o, r##"class="obstacle" fill="#8a8f98" stroke="#444" stroke-width="1""##);
    }
    for m in &spec.moving {
        polygon(&mut out, &view, &m.rect, r##"class="moving-obstacle" fill="#c9a227" stroke="#444" stroke-width="1""##);
    }
    polygon(
        &mut out,
        &view,
        &spec.target,
        r##"id="target" fill="none" stroke="#1a7f37" stroke-width="2" stroke-dasharray="6 4""##,
    );
    let _ = writeln!(out, "  </g>");

    if !rows.is_empty() {
        let _ = writeln!(out, r#"  <g id="trajectory">"#);
        let pts: Vec<String> = rows
            .iter()
            .map(|r| {
                let (x, y) = view.map((r.x, r.y));
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r##"    <polyline id="path" points="{}" fill="none" stroke="#0b5cad" stroke-width="2"/>"##,
            pts.join(" ")
        );
        for r in rows.iter().step_by(TICK_EVERY) {
            let (s, c) = r.theta.sin_cos();
            let (x1, y1) = view.map((r.x, r.y));
            let (x2, y2) = view.map((r.x + TICK_LEN * c, r.y + TICK_LEN * s));
            let _ = writeln!(
                out,
                r##"    <line class="heading" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#d1242f" stroke-width="1.5"/>"##
            );
        }
        let first = &rows[0];
        let last = &rows[rows.len() - 1];
        let end_pose = VehicleState::at_rest(Pose::new(last.x, last.y, last.theta));
        polygon(
            &mut out,
            &view,
            &end_pose.footprint(params),
            r##"id="final-footprint" fill="none" stroke="#0b5cad" stroke-width="1""##,
        );
        let (sx, sy) = view.map((first.x, first.y));
        let (ex, ey) = view.map((last.x, last.y));
        let _ = writeln!(out, r##"    <circle id="start" cx="{sx:.3}" cy="{sy:.3}" r="6" fill="#1a7f37"/>"##);
        let _ = writeln!(
            out,
            r##"    <rect id="end" x="{:.3}" y="{:.3}" width="12" height="12" fill="#d1242f"/>"##,
            ex - 6.0,
            ey - 6.0
        );
        let _ = writeln!(out, "  </g>");
    }
    out.push_str("</svg>\n");
    out
}
