//! Layout of the strip behind the keys: controller pads or socket ring, then
//! the printed resistor bank.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    synthesize_resistor_meander, Layer, NetTerminal, Netlist, Pad, PadShape, ResistorMeander, RoutingError,
    RoutingRules, SocketGeometry, TerminalOwner,
};
use crate::geom::{Rect, Vec2};
use crate::placement::Placement;

pub const PAD_HEIGHT_MM: f64 = 1.5;
pub const SOCKET_DIAMETER_MM: f64 = 50.8;
pub const CONE_BASE_RADIUS_MM: f64 = 1.5;
pub const CONE_TOP_RADIUS_MM: f64 = 0.3;
pub const CONE_HALF_ANGLE_DEG: f64 = 30.0;
/// Narrowest resistor bank, so short layouts still get a usable strip.
const MIN_BANK_WIDTH_MM: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RearLayout {
    pub pads: Vec<Pad>,
    pub socket: Option<SocketGeometry>,
    pub meanders: Vec<ResistorMeander>,
    pub zone: Rect,
}

pub fn cone_height() -> f64 {
    (CONE_BASE_RADIUS_MM - CONE_TOP_RADIUS_MM) / CONE_HALF_ANGLE_DEG.to_radians().tan()
}

fn grid_up(v: f64, p: f64) -> f64 {
    (v / p - 1e-9).ceil() * p
}

fn grid_near(v: f64, p: f64) -> f64 {
    (v / p).round() * p
}

/// Places pads, socket electrodes and resistors, attaches their terminals to
/// the netlist and records the zone on the placement.
pub fn plan_rear_zone(
    placement: &mut Placement,
    netlist: &mut Netlist,
    rules: &RoutingRules,
) -> Result<RearLayout, RoutingError> {
    let p = rules.grid_pitch_mm;
    let kb = placement.key_bounds();
    let ring: &[&str] = if netlist.socket { &crate::controller::FLORA_RING } else { &[] };
    let pin_to_net: BTreeMap<String, String> =
        netlist.pin_assignments.iter().map(|(n, pin)| (pin.clone(), n.clone())).collect();

    let order: Vec<String> = netlist.nets.iter().map(|n| n.id.clone()).collect();
    let pad_nets: Vec<&String> = order
        .iter()
        .filter(|n| netlist.pin_assignments.get(*n).is_some_and(|pin| !ring.contains(&pin.as_str())))
        .collect();

    let mut used = kb;
    let mut cursor = kb.max.y + 2.0 * p;
    let mut pads = Vec::new();
    if !pad_nets.is_empty() {
        let y = grid_up(cursor + p, p);
        let x0 = grid_up(kb.min.x + p, p);
        for (i, net) in pad_nets.iter().enumerate() {
            pads.push(Pad {
                pin: netlist.pin_assignments[*net].clone(),
                net: Some((*net).clone()),
                center: Vec2::new(x0 + 2.0 * p * i as f64, y),
                shape: PadShape::Square { size: rules.trace_width(), height: PAD_HEIGHT_MM },
            });
        }
        cursor = y + 2.0 * p;
    }

    let mut socket = None;
    if netlist.socket {
        let r = SOCKET_DIAMETER_MM / 2.0;
        let center = Vec2::new(grid_near(kb.center().x, p), grid_up(cursor + r + CONE_BASE_RADIUS_MM + p, p));
        let n = ring.len();
        let electrodes = ring
            .iter()
            .enumerate()
            .map(|(i, pin)| {
                let a = (90.0 + 360.0 * i as f64 / n as f64).to_radians();
                Pad {
                    pin: pin.to_string(),
                    net: pin_to_net.get(*pin).cloned(),
                    center: center + Vec2::new(a.cos(), a.sin()) * r,
                    shape: PadShape::Cone {
                        base_radius: CONE_BASE_RADIUS_MM,
                        top_radius: CONE_TOP_RADIUS_MM,
                        height: cone_height(),
                    },
                }
            })
            .collect();
        cursor = center.y + r + CONE_BASE_RADIUS_MM + 2.0 * p;
        socket = Some(SocketGeometry {
            center,
            diameter_mm: SOCKET_DIAMETER_MM,
            cone_angle_deg: CONE_HALF_ANGLE_DEG,
            electrodes,
        });
    }

    let mut meanders = Vec::new();
    if !netlist.resistors.is_empty() {
        let x0 = grid_up(kb.min.x + p, p);
        let width = kb.width().max(MIN_BANK_WIDTH_MM);
        let mut x = x0;
        let mut y = grid_up(cursor, p);
        let mut row_top = y;
        for r in &netlist.resistors {
            let region = |x: f64, y: f64| Rect::new(x, y, x + width, y + 10.0 * width);
            let mut m = synthesize_resistor_meander(&r.id, &r.net_a, &r.net_b, r.target_ohms, region(x, y), rules)
                .map_err(|source| RoutingError::Resistor { id: r.id.clone(), source })?;
            if m.bounds.max.x > x0 + width && x > x0 {
                x = x0;
                y = grid_up(row_top + 3.0 * p, p);
                m = synthesize_resistor_meander(&r.id, &r.net_a, &r.net_b, r.target_ohms, region(x, y), rules)
                    .map_err(|source| RoutingError::Resistor { id: r.id.clone(), source })?;
            }
            x = grid_up(m.bounds.max.x + 4.0 * p, p);
            row_top = row_top.max(m.bounds.max.y);
            meanders.push(m);
        }
        cursor = row_top + p;
    }

    for pad in pads.iter().chain(socket.iter().flat_map(|s| s.electrodes.iter())) {
        let c = pad.center;
        used = used.union(&Rect::new(c.x, c.y, c.x, c.y).expand(CONE_BASE_RADIUS_MM + p));
        if let Some(net) = pad.net.as_ref().and_then(|id| netlist.net_mut(id)) {
            net.terminals.push(NetTerminal {
                owner: TerminalOwner::Pad { pin: pad.pin.clone() },
                position: c,
                layer: Layer::Ridge,
            });
        }
    }
    for m in &meanders {
        used = used.union(&m.bounds.expand(p));
        for (net, at) in [(&m.net_a, m.terminal_a), (&m.net_b, m.terminal_b)] {
            if let Some(n) = netlist.net_mut(net) {
                n.terminals.push(NetTerminal {
                    owner: TerminalOwner::Resistor { id: m.id.clone() },
                    position: at,
                    layer: Layer::Floor,
                });
            }
        }
    }
    let zone = if pads.is_empty() && socket.is_none() && meanders.is_empty() {
        None
    } else {
        Some(Rect::new(used.min.x, kb.max.y, used.max.x, used.max.y.max(cursor)))
    };
    placement.rear_zone = zone;
    Ok(RearLayout { pads, socket, meanders, zone: zone.unwrap_or(kb) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::blueprint_for;
    use crate::placement::place_keys;
    use crate::routing::build_netlist;
    use crate::spec::parse_device_spec;

    fn plan(src: &str) -> (Placement, Netlist, RearLayout) {
        let spec = parse_device_spec(src).unwrap().spec;
        let bps: Vec<_> = spec.keys.iter().map(|k| blueprint_for(k).unwrap()).collect();
        let mut p = place_keys(&spec, &bps).unwrap();
        let rules = RoutingRules::default();
        let mut n = build_netlist(&p, &spec, &bps, &rules).unwrap();
        let r = plan_rear_zone(&mut p, &mut n, &rules).unwrap();
        (p, n, r)
    }

    #[test]
    fn cone_geometry() {
        assert!((cone_height() - 1.2 / 30f64.to_radians().tan()).abs() < 1e-12);
    }

    #[test]
    fn socket_ring_and_pulldowns() {
        let (p, n, r) = plan("controller flora socket\nrow 0 keys A B C\n");
        let s = r.socket.as_ref().unwrap();
        assert_eq!(s.electrodes.len(), 14);
        assert_eq!(s.electrodes.iter().filter(|e| e.net.is_some()).count(), 5);
        assert_eq!(r.meanders.len(), 3);
        let zone = p.rear_zone.unwrap();
        assert!(zone.min.y >= p.key_bounds().max.y - 1e-9);
        // ground: one socket electrode plus one meander end per key
        assert_eq!(n.net("gnd").unwrap().terminals.len(), 4);
        for e in &s.electrodes {
            assert!((e.center.dist(s.center) - 25.4).abs() < 1e-9);
        }
    }

    #[test]
    fn pad_row_without_socket() {
        let (_, n, r) = plan("controller uno\nrow 0 keys A B\n");
        assert!(r.socket.is_none());
        assert_eq!(r.pads.len(), 3);
        assert_eq!(n.net("bus").unwrap().terminals.len(), 5);
        assert!(r.meanders.is_empty());
    }
}
