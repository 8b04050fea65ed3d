//! Geometric design-rule check of a routed plan. Works on the emitted shapes
//! only, so it catches router bugs instead of repeating them.

use serde::Serialize;

use super::{Layer, Netlist, PadShape, RoutePlan};
use crate::geom::{circle, point_in_polygon, polygon_distance, segment_rect, Rect, Vec2};

const TOUCH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: String,
    pub nets: Vec<String>,
    pub at: Vec2,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct VerificationReport {
    pub clearance_violations: Vec<Violation>,
    pub connectivity_violations: Vec<Violation>,
    pub same_layer_crossings: usize,
    /// Distinct nets whose footprints overlap in plan view on different bands.
    pub layer_crossovers: usize,
    pub min_clearance_mm: Option<f64>,
    pub elements_checked: usize,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.clearance_violations.is_empty() && self.connectivity_violations.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Element {
    net: String,
    /// Trimmed shape used against the resistor's own end nets.
    core: Option<Vec<Vec<Vec2>>>,
    ends: [String; 2],
    shape: Vec<Vec2>,
    bbox: Rect,
    z: (f64, f64),
    layer: Option<Layer>,
}

fn element(net: &str, shape: Vec<Vec2>, z: (f64, f64), layer: Option<Layer>) -> Element {
    Element {
        net: net.to_string(),
        core: None,
        ends: [String::new(), String::new()],
        bbox: Rect::from_points(&shape).unwrap_or_default(),
        shape,
        z,
        layer,
    }
}

fn z_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.1.min(b.1) - a.0.max(b.0)
}

fn elements(plan: &RoutePlan) -> Vec<Element> {
    let st = &plan.stack;
    let h = st.base_height_mm;
    let mut out = Vec::new();
    for t in &plan.traces {
        let half = t.width_mm / 2.0;
        let z = st.band(t.layer);
        if t.points.len() == 1 {
            out.push(element(&t.net, Rect::centered(t.points[0], t.width_mm, t.width_mm).corners(), z, Some(t.layer)));
        }
        for w in t.points.windows(2) {
            out.push(element(&t.net, segment_rect(w[0], w[1], half).corners(), z, Some(t.layer)));
        }
    }
    for v in &plan.vias {
        out.push(element(&v.net, Rect::centered(v.at, v.size_mm, v.size_mm).corners(), (v.z0, v.z1), None));
    }
    let half = plan.rules.trace_width() / 2.0;
    for m in &plan.resistors {
        let core: Vec<Vec<Vec2>> = m.core.windows(2).map(|w| segment_rect(w[0], w[1], half).corners()).collect();
        for w in m.polyline.windows(2) {
            let mut e = element(&m.id, segment_rect(w[0], w[1], half).corners(), st.floor, Some(Layer::Floor));
            e.core = Some(core.clone());
            e.ends = [m.net_a.clone(), m.net_b.clone()];
            out.push(e);
        }
    }
    let sockets = plan.socket.iter().flat_map(|s| s.electrodes.iter());
    for pad in plan.pads.iter().chain(sockets) {
        let net = pad.net.clone().unwrap_or_else(|| format!("nc:{}", pad.pin));
        let (shape, top) = match pad.shape {
            PadShape::Square { size, height } => (Rect::centered(pad.center, size, size).corners(), height),
            PadShape::Cone { base_radius, height, .. } => (circle(pad.center, base_radius, 24), height),
        };
        out.push(element(&net, shape, (st.ridge.0, h + top), Some(Layer::Ridge)));
    }
    for c in &plan.contacts {
        out.push(element(&c.net, c.polygon.clone(), (st.ridge.0, h), Some(Layer::Ridge)));
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn covers(e: &Element, p: Vec2) -> bool {
    point_in_polygon(p, &e.shape) || polygon_distance(&[p], &e.shape) <= TOUCH
}

/// Checks clearance between distinct nets and connectivity of every net.
pub fn verify_routes(plan: &RoutePlan, netlist: &Netlist) -> VerificationReport {
    let els = elements(plan);
    let clearance = plan.rules.clearance_mm;
    // pairs closer than this feed the reported minimum clearance
    let near = 2.0 * clearance;
    let mut report = VerificationReport { elements_checked: els.len(), ..Default::default() };

    let mut order: Vec<usize> = (0..els.len()).collect();
    order.sort_by(|&a, &b| els[a].bbox.min.x.total_cmp(&els[b].bbox.min.x));
    let mut parent: Vec<usize> = (0..els.len()).collect();
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            let (a, b) = (&els[i], &els[j]);
            if b.bbox.min.x > a.bbox.max.x + near {
                break;
            }
            if !a.bbox.expand(near).overlaps(&b.bbox) {
                continue;
            }
            let zo = z_overlap(a.z, b.z);
            if a.net == b.net {
                if zo >= -TOUCH && polygon_distance(&a.shape, &b.shape) <= TOUCH {
                    let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ra] = rb;
                }
                continue;
            }
            let d = polygon_distance(&a.shape, &b.shape);
            if zo <= TOUCH {
                if d <= TOUCH {
                    report.layer_crossovers += 1;
                }
                continue;
            }
            // resistor ends may touch their own nets
            let d = match (a.core.as_ref(), b.core.as_ref()) {
                (Some(core), _) if a.ends.contains(&b.net) => min_dist(core, &b.shape),
                (_, Some(core)) if b.ends.contains(&a.net) => min_dist(core, &a.shape),
                _ => d,
            };
            report.min_clearance_mm = Some(report.min_clearance_mm.map_or(d, |m: f64| m.min(d)));
            if d < clearance - TOUCH {
                if d <= TOUCH && a.layer.is_some() && a.layer == b.layer {
                    report.same_layer_crossings += 1;
                }
                let at = a.bbox.center();
                report.clearance_violations.push(Violation {
                    kind: "clearance".into(),
                    nets: vec![a.net.clone(), b.net.clone()],
                    at,
                    detail: format!("{:.3} mm < {:.3} mm", d, clearance),
                });
            }
        }
    }

    for net in &netlist.nets {
        if !net.is_routed() || net.terminals.is_empty() {
            continue;
        }
        let mut roots = Vec::new();
        for t in &net.terminals {
            let band = plan.stack.band(t.layer);
            let hit = els
                .iter()
                .position(|e| e.net == net.id && z_overlap(e.z, band) > TOUCH && covers(e, t.position));
            match hit {
                Some(i) => roots.push(find(&mut parent, i)),
                None => {
                    report.connectivity_violations.push(Violation {
                        kind: "open_terminal".into(),
                        nets: vec![net.id.clone()],
                        at: t.position,
                        detail: format!("terminal on {} band has no conductor", t.layer.as_str()),
                    });
                    roots.clear();
                    break;
                }
            }
        }
        roots.sort_unstable();
        roots.dedup();
        if roots.len() > 1 {
            report.connectivity_violations.push(Violation {
                kind: "split_net".into(),
                nets: vec![net.id.clone()],
                at: net.terminals[0].position,
                detail: format!("{} disconnected pieces", roots.len()),
            });
        }
    }
    report
}

fn min_dist(core: &[Vec<Vec2>], shape: &[Vec2]) -> f64 {
    core.iter().map(|c| polygon_distance(c, shape)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn net(id: &str, pts: &[(f64, f64)]) -> Net {
        Net {
            id: id.into(),
            class: NetClass::Return(id.into()),
            terminals: pts
                .iter()
                .map(|&(x, y)| NetTerminal {
                    owner: TerminalOwner::Pad { pin: "P".into() },
                    position: Vec2::new(x, y),
                    layer: Layer::Floor,
                })
                .collect(),
            sort_x: 0.0,
        }
    }

    fn trace(net: &str, layer: Layer, pts: &[(f64, f64)]) -> TraceSegment {
        TraceSegment {
            net: net.into(),
            layer,
            points: pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
            width_mm: 2.54,
        }
    }

    fn plan(traces: Vec<TraceSegment>) -> RoutePlan {
        RoutePlan {
            rules: RoutingRules::default(),
            stack: LayerStack::new(6.0, 2.54, false),
            traces,
            vias: Vec::new(),
            resistors: Vec::new(),
            pads: Vec::new(),
            socket: None,
            contacts: Vec::new(),
            inter_row_connectors: 0,
        }
    }

    fn netlist(nets: Vec<Net>) -> Netlist {
        Netlist {
            nets,
            pin_assignments: Default::default(),
            resistors: Vec::new(),
            ladders: Default::default(),
            inter_row_connectors: 0,
            socket: false,
        }
    }

    #[test]
    fn shared_cell_is_one_clearance_violation() {
        let p = plan(vec![
            trace("a", Layer::Floor, &[(0.0, 0.0), (7.62, 0.0)]),
            trace("b", Layer::Floor, &[(7.62, 0.0), (7.62, 7.62)]),
        ]);
        let n = netlist(vec![net("a", &[(0.0, 0.0), (7.62, 0.0)]), net("b", &[(7.62, 7.62)])]);
        let r = verify_routes(&p, &n);
        assert_eq!(r.clearance_violations.len(), 1);
        assert_eq!(r.same_layer_crossings, 1);
        assert!(r.connectivity_violations.is_empty());
    }

    #[test]
    fn split_net_is_one_connectivity_violation() {
        let p = plan(vec![
            trace("a", Layer::Floor, &[(0.0, 0.0), (3.81, 0.0)]),
            trace("a", Layer::Floor, &[(11.43, 0.0), (15.24, 0.0)]),
        ]);
        let n = netlist(vec![net("a", &[(0.0, 0.0), (15.24, 0.0)])]);
        let r = verify_routes(&p, &n);
        assert_eq!(r.connectivity_violations.len(), 1);
        assert!(r.clearance_violations.is_empty());
    }

    #[test]
    fn other_band_is_a_crossover() {
        let p = plan(vec![
            trace("a", Layer::Floor, &[(0.0, 0.0), (7.62, 0.0)]),
            trace("b", Layer::Ridge, &[(3.81, -3.81), (3.81, 3.81)]),
        ]);
        let n = netlist(vec![]);
        let r = verify_routes(&p, &n);
        assert!(r.ok());
        assert_eq!(r.layer_crossovers, 1);
    }

    #[test]
    fn adjacent_lattice_rows_keep_clearance() {
        let p = plan(vec![
            trace("a", Layer::Floor, &[(0.0, 0.0), (7.62, 0.0)]),
            trace("b", Layer::Floor, &[(0.0, 3.81), (7.62, 3.81)]),
        ]);
        let r = verify_routes(&p, &netlist(vec![]));
        assert!(r.ok());
        assert!((r.min_clearance_mm.unwrap() - 1.27).abs() < 1e-9);
    }
}
