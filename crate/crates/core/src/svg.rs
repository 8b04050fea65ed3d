//! Top-view SVG of keys, shell and traces. One user unit is one millimeter;
//! device y is flipped so rows read top to bottom.

use std::fmt::Write;

use crate::geom::{Rect, Vec2};
use crate::placement::{Placement, ShellOutline};
use crate::routing::{Layer, PadShape, RoutePlan};

pub const RIDGE_COLOR: &str = "red";
pub const FLOOR_COLOR: &str = "blue";
const MARGIN_MM: f64 = 5.0;

fn layer_color(l: Layer) -> &'static str {
    match l {
        Layer::Ridge => RIDGE_COLOR,
        Layer::Floor => FLOOR_COLOR,
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn pt(p: Vec2) -> String {
    format!("{:.3},{:.3}", p.x, -p.y)
}

fn path_d(points: &[Vec2], closed: bool) -> String {
    let mut d = String::new();
    for (i, p) in points.iter().enumerate() {
        d.push_str(if i == 0 { "M" } else { " L" });
        d.push_str(&pt(*p));
    }
    if closed {
        d.push_str(" Z");
    }
    d
}

pub fn emit_svg_preview(placement: &Placement, shell: &ShellOutline, plan: &RoutePlan) -> String {
    let mut b: Option<Rect> = Some(placement.full_bounds());
    for poly in &shell.polygons {
        if let Some(r) = Rect::from_points(poly) {
            b = Some(b.map_or(r, |x| x.union(&r)));
        }
    }
    let b = b.unwrap_or_default().expand(MARGIN_MM);
    let (w, h) = (b.width(), b.height());
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}mm" height="{h:.3}mm" viewBox="{:.3} {:.3} {w:.3} {h:.3}">"#,
        b.min.x, -b.max.y
    );

    let _ = writeln!(s, r#"  <g id="shell" fill="none" stroke="black" stroke-width="0.3">"#);
    for poly in &shell.polygons {
        let _ = writeln!(s, r#"    <path class="shell" d="{}"/>"#, path_d(poly, true));
    }
    let _ = writeln!(s, "  </g>");

    let _ = writeln!(s, r#"  <g id="keys">"#);
    for k in &placement.placed {
        let id = esc(&k.id);
        let _ = writeln!(s, r#"    <g class="key" id="key-{id}" data-key="{id}">"#);
        let _ = writeln!(s, "      <title>{id}</title>");
        let _ = writeln!(
            s,
            r##"      <path d="{}" fill="#eeeeee" stroke="#666666" stroke-width="0.2"/>"##,
            path_d(&k.polygon(), true)
        );
        let _ = writeln!(
            s,
            r#"      <text x="{:.3}" y="{:.3}" font-size="4" text-anchor="middle" dominant-baseline="middle">{id}</text>"#,
            k.center.x, -k.center.y
        );
        let _ = writeln!(s, "    </g>");
    }
    let _ = writeln!(s, "  </g>");

    let _ = writeln!(s, r#"  <g id="traces" fill="none" stroke-linecap="square" stroke-linejoin="miter">"#);
    for t in &plan.traces {
        let _ = writeln!(
            s,
            r#"    <path class="trace {}" data-net="{}" stroke="{}" stroke-width="{:.3}" stroke-opacity="0.6" d="{}"/>"#,
            t.layer.as_str(),
            esc(&t.net),
            layer_color(t.layer),
            t.width_mm,
            path_d(&t.points, false)
        );
    }
    for m in &plan.resistors {
        let _ = writeln!(
            s,
            r#"    <path class="resistor floor" data-net="{}" stroke="{FLOOR_COLOR}" stroke-width="{:.3}" stroke-opacity="0.4" d="{}"/>"#,
            esc(&m.id),
            plan.rules.trace_width(),
            path_d(&m.polyline, false)
        );
    }
    let _ = writeln!(s, "  </g>");

    let _ = writeln!(s, r#"  <g id="vias" fill="purple">"#);
    for v in &plan.vias {
        let _ = writeln!(
            s,
            r#"    <rect class="via" data-net="{}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
            esc(&v.net),
            v.at.x - v.size_mm / 2.0,
            -v.at.y - v.size_mm / 2.0,
            v.size_mm,
            v.size_mm
        );
    }
    let _ = writeln!(s, "  </g>");

    let _ = writeln!(s, r#"  <g id="pads" fill="darkred">"#);
    let socket = plan.socket.iter().flat_map(|s| s.electrodes.iter());
    for pad in plan.pads.iter().chain(socket) {
        let pin = esc(&pad.pin);
        match pad.shape {
            PadShape::Square { size, .. } => {
                let _ = writeln!(
                    s,
                    r#"    <rect class="pad" data-pin="{pin}" x="{:.3}" y="{:.3}" width="{size:.3}" height="{size:.3}"/>"#,
                    pad.center.x - size / 2.0,
                    -pad.center.y - size / 2.0
                );
            }
            PadShape::Cone { base_radius, .. } => {
                let _ = writeln!(
                    s,
                    r#"    <circle class="pad cone" data-pin="{pin}" cx="{:.3}" cy="{:.3}" r="{base_radius:.3}"/>"#,
                    pad.center.x, -pad.center.y
                );
            }
        }
    }
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::blueprint_for;
    use crate::placement::{build_shell, place_keys};
    use crate::routing::{build_netlist, plan_rear_zone, route_nets, RoutingRules};
    use crate::spec::parse_device_spec;

    fn svg(src: &str) -> (String, RoutePlan) {
        let spec = parse_device_spec(src).unwrap().spec;
        let bps: Vec<_> = spec.keys.iter().map(|k| blueprint_for(k).unwrap()).collect();
        let mut p = place_keys(&spec, &bps).unwrap();
        let rules = RoutingRules::default();
        let mut n = build_netlist(&p, &spec, &bps, &rules).unwrap();
        let rear = plan_rear_zone(&mut p, &mut n, &rules).unwrap();
        let shell = build_shell(&p, spec.shell_policy);
        let plan = route_nets(&n, &p, &shell, &bps, &rear, &rules, spec.traces_exposed).unwrap();
        (emit_svg_preview(&p, &shell, &plan), plan)
    }

    #[test]
    fn one_key_one_group() {
        let (s, plan) = svg("controller uno\nkey A at 0 0\n");
        assert_eq!(s.matches(r#"<g class="key""#).count(), 1);
        assert!(s.contains(r#"data-key="A""#));
        assert_eq!(s.matches(r#"class="trace "#).count(), plan.traces.len());
        assert_eq!(s.matches(r#"class="shell""#).count(), 1);
        assert!(s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn layers_get_distinct_classes_and_colors() {
        let (s, plan) = svg("controller mega\nrow 0 keys Q W E\nrow 1 keys A S D\n");
        let ridge = plan.traces.iter().filter(|t| t.layer == Layer::Ridge).count();
        let floor = plan.traces.len() - ridge;
        assert!(ridge > 0 && floor > 0);
        assert_eq!(s.matches(r#"class="trace ridge" "#).count(), ridge);
        assert_eq!(s.matches(r#"class="trace floor" "#).count(), floor);
        for line in s.lines().filter(|l| l.contains(r#"class="trace ridge""#)) {
            assert!(line.contains(r#"stroke="red""#));
        }
        for line in s.lines().filter(|l| l.contains(r#"class="trace floor""#)) {
            assert!(line.contains(r#"stroke="blue""#));
        }
    }

    #[test]
    fn deterministic() {
        let src = "controller uno\nrow 0 keys A B\n";
        assert_eq!(svg(src).0, svg(src).0);
    }
}
