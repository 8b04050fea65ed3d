//! Netlist extraction, rear-zone layout, maze routing and route verification.
//!
//! Conductors live in two bands of the base: the floor band near the
//! underside and the ridge band flush with the top face. Keys stand on the
//! top face, so every conductive key body that touches it is electrically
//! part of the ridge band.

mod meander;
mod rear;
mod router;
mod verify;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use meander::{synthesize_resistor_meander, MeanderError, ResistorMeander};
pub use rear::{plan_rear_zone, RearLayout};
pub use router::route_nets;
pub use verify::{verify_routes, VerificationReport, Violation};

use crate::controller::{allocate_pins, cap_channel_name, ControllerKind};
use crate::electrical::{design_analog_ladder, LadderDesign, LadderParams, MaterialElectrical, DEFAULT_PULLDOWN_OHMS};
use crate::geom::{Rect, Vec2};
use crate::parts::{KeyBlueprint, LayerHint, NetRole};
use crate::placement::Placement;
use crate::spec::{DeviceSpec, KeyKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoutingRules {
    pub grid_pitch_mm: f64,
    /// Width x height of every trace.
    pub trace_cross_section_mm: (f64, f64),
    pub clearance_mm: f64,
    /// Shell material kept between a trace and the outer wall.
    pub wall_mm: f64,
    pub material: MaterialElectrical,
}

impl Default for RoutingRules {
    fn default() -> Self {
        Self {
            grid_pitch_mm: 3.81,
            trace_cross_section_mm: (2.54, 2.54),
            clearance_mm: 1.2,
            wall_mm: 0.4,
            material: MaterialElectrical::default(),
        }
    }
}

impl RoutingRules {
    pub fn trace_width(&self) -> f64 {
        self.trace_cross_section_mm.0
    }

    pub fn area_mm2(&self) -> f64 {
        self.trace_cross_section_mm.0 * self.trace_cross_section_mm.1
    }

    pub fn is_consistent(&self) -> bool {
        self.clearance_mm >= crate::parts::LINE_WIDTH_MM
            && self.grid_pitch_mm >= self.trace_width() + self.clearance_mm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Floor,
    Ridge,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Floor => "floor",
            Layer::Ridge => "ridge",
        }
    }

    fn from_hint(h: LayerHint) -> Layer {
        match h {
            LayerHint::Floor => Layer::Floor,
            LayerHint::Ridge => Layer::Ridge,
        }
    }
}

/// Vertical extents of the conductive bands inside a base of height `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerStack {
    pub base_height_mm: f64,
    pub floor: (f64, f64),
    pub ridge: (f64, f64),
}

pub const EMBEDDED_SKIN_MM: f64 = 0.8;

impl LayerStack {
    pub fn new(base_height_mm: f64, trace_height_mm: f64, exposed: bool) -> Self {
        let skin = if exposed { 0.0 } else { EMBEDDED_SKIN_MM };
        Self {
            base_height_mm,
            floor: (skin, skin + trace_height_mm),
            ridge: (base_height_mm - trace_height_mm, base_height_mm),
        }
    }

    pub fn band(&self, layer: Layer) -> (f64, f64) {
        match layer {
            Layer::Floor => self.floor,
            Layer::Ridge => self.ridge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "class", content = "of", rename_all = "snake_case")]
pub enum NetClass {
    SignalBus,
    Return(String),
    Capacitive(String),
    AnalogLadder(String),
    Ground,
    ResistorTap(String),
}

impl NetClass {
    pub fn name(&self) -> &'static str {
        match self {
            NetClass::SignalBus => "signal_bus",
            NetClass::Return(_) => "return",
            NetClass::Capacitive(_) => "capacitive",
            NetClass::AnalogLadder(_) => "analog_ladder",
            NetClass::Ground => "ground",
            NetClass::ResistorTap(_) => "resistor_tap",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            NetClass::SignalBus => 0,
            NetClass::Return(_) => 1,
            NetClass::Capacitive(_) => 2,
            NetClass::AnalogLadder(_) => 3,
            NetClass::Ground => 4,
            NetClass::ResistorTap(_) => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TerminalOwner {
    /// `anchored` terminals sit under a key body on the floor band and reach
    /// it through a via up to the top face.
    Key { key: String, anchored: bool },
    Pad { pin: String },
    Resistor { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetTerminal {
    pub owner: TerminalOwner,
    pub position: Vec2,
    pub layer: Layer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Net {
    pub id: String,
    pub class: NetClass,
    pub terminals: Vec<NetTerminal>,
    /// Ordering hint for nets of the same class (key x for returns).
    pub sort_x: f64,
}

impl Net {
    pub fn is_routed(&self) -> bool {
        !matches!(self.class, NetClass::ResistorTap(_))
    }
}

/// Resistor to be printed as a meander between two nets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResistorRequest {
    pub id: String,
    pub net_a: String,
    pub net_b: String,
    pub target_ohms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Netlist {
    pub nets: Vec<Net>,
    pub pin_assignments: BTreeMap<String, String>,
    pub resistors: Vec<ResistorRequest>,
    pub ladders: BTreeMap<String, LadderDesign>,
    /// Bus connections needed between otherwise separate key rows.
    pub inter_row_connectors: usize,
    pub socket: bool,
}

impl Netlist {
    pub fn net(&self, id: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.id == id)
    }

    fn net_mut(&mut self, id: &str) -> Option<&mut Net> {
        self.nets.iter_mut().find(|n| n.id == id)
    }

    pub fn count(&self, name: &str) -> usize {
        self.nets.iter().filter(|n| n.class.name() == name).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PadShape {
    Square { size: f64, height: f64 },
    Cone { base_radius: f64, top_radius: f64, height: f64 },
}

/// Conductive contact on the top face for a controller pin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pad {
    pub pin: String,
    /// `None` for socket electrodes without a connection.
    pub net: Option<String>,
    pub center: Vec2,
    pub shape: PadShape,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocketGeometry {
    pub center: Vec2,
    pub diameter_mm: f64,
    pub cone_angle_deg: f64,
    pub electrodes: Vec<Pad>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSegment {
    pub net: String,
    pub layer: Layer,
    /// Rectilinear centerline.
    pub points: Vec<Vec2>,
    pub width_mm: f64,
}

impl TraceSegment {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Square conductive column joining the floor band to the top face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Via {
    pub net: String,
    pub at: Vec2,
    pub size_mm: f64,
    pub z0: f64,
    pub z1: f64,
}

/// Footprint of a conductive key body resting on the top face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactPad {
    pub net: String,
    pub key: String,
    pub polygon: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutePlan {
    pub rules: RoutingRules,
    pub stack: LayerStack,
    pub traces: Vec<TraceSegment>,
    pub vias: Vec<Via>,
    pub resistors: Vec<ResistorMeander>,
    pub pads: Vec<Pad>,
    pub socket: Option<SocketGeometry>,
    pub contacts: Vec<ContactPad>,
    /// Nets actually connected through the bus between rows.
    pub inter_row_connectors: usize,
}

impl RoutePlan {
    /// Centerline length of a net's traces plus the height of its vias.
    pub fn net_length(&self, net: &str) -> f64 {
        let planar: f64 = self.traces.iter().filter(|t| t.net == net).map(TraceSegment::length).sum();
        let vertical: f64 = self
            .vias
            .iter()
            .filter(|v| v.net == net)
            .map(|v| v.z1 - v.z0 - self.rules.trace_cross_section_mm.1)
            .sum();
        planar + vertical.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("pin budget exceeded: no pin left for {}", .0.join(", "))]
    PinBudget(Vec<String>),
    #[error("ladder `{group}`: {source}")]
    Ladder { group: String, source: crate::electrical::ElectricalError },
    #[error("resistor `{id}`: {source}")]
    Resistor { id: String, source: MeanderError },
    #[error("net `{net}` is unroutable: terminal at ({:.2}, {:.2}) cannot be reached; search confined to x {:.2}..{:.2}, y {:.2}..{:.2}", terminal.x, terminal.y, region.min.x, region.max.x, region.min.y, region.max.y)]
    Unroutable { net: String, terminal: Vec2, region: Rect },
    #[error("terminal of net `{net}` at ({:.2}, {:.2}) has no free grid cell within reach", at.x, at.y)]
    NoEscape { net: String, at: Vec2 },
}

pub fn bus_net_id() -> &'static str {
    "bus"
}

pub fn return_net_id(key: &str) -> String {
    format!("ret:{key}")
}

pub fn capacitive_net_id(key: &str) -> String {
    format!("cap:{key}")
}

pub fn ladder_net_id(group: &str) -> String {
    format!("ladder:{group}")
}

pub fn ground_net_id() -> &'static str {
    "gnd"
}

/// Builds nets from key terminals. Controller pads and resistor ends are
/// attached later by `plan_rear_zone`.
pub fn build_netlist(
    p: &Placement,
    spec: &DeviceSpec,
    blueprints: &[KeyBlueprint],
    rules: &RoutingRules,
) -> Result<Netlist, RoutingError> {
    let kind = spec.controller.kind;
    let profile = kind.profile();
    let socket = spec.controller.socket && kind == ControllerKind::Flora;
    let mut nets: Vec<Net> = Vec::new();
    let mut bus = Net { id: bus_net_id().into(), class: NetClass::SignalBus, terminals: Vec::new(), sort_x: 0.0 };
    let mut digital_nets = Vec::new();
    let mut resistors = Vec::new();
    let groups = spec.ladder_groups();
    let mut row_groups: Vec<Option<i64>> = Vec::new();
    let mut rowless = 0usize;

    for ((key, pk), bp) in spec.keys.iter().zip(&p.placed).zip(blueprints) {
        let mut ret = Net {
            id: return_net_id(&key.id),
            class: NetClass::Return(key.id.clone()),
            terminals: Vec::new(),
            sort_x: pk.center.x,
        };
        let mut cap = Net {
            id: capacitive_net_id(&key.id),
            class: NetClass::Capacitive(key.id.clone()),
            terminals: Vec::new(),
            sort_x: pk.center.x,
        };
        for t in &bp.terminals {
            let nt = NetTerminal {
                owner: TerminalOwner::Key { key: key.id.clone(), anchored: t.layer_hint == LayerHint::Floor },
                position: pk.to_world(t.position),
                layer: Layer::from_hint(t.layer_hint),
            };
            match t.net_role {
                NetRole::Signal => bus.terminals.push(nt),
                NetRole::Return => ret.terminals.push(nt),
                NetRole::Capacitive => cap.terminals.push(nt),
            }
        }
        if key.is_switch() {
            match pk.row {
                Some(r) if !row_groups.contains(&Some(r)) => row_groups.push(Some(r)),
                Some(_) => {}
                None => rowless += 1,
            }
            if key.ladder_group.is_none() {
                digital_nets.push(ret.id.clone());
                if socket {
                    let id = format!("pd:{}", key.id);
                    resistors.push(ResistorRequest {
                        id: id.clone(),
                        net_a: ret.id.clone(),
                        net_b: ground_net_id().into(),
                        target_ohms: DEFAULT_PULLDOWN_OHMS,
                    });
                }
            }
            nets.push(ret);
        }
        if key.kind == KeyKind::Analog {
            nets.push(cap);
        }
    }

    let ladder_nets: Vec<String> = groups.iter().map(|g| ladder_net_id(g)).collect();
    let pins = allocate_pins(kind, &digital_nets, &ladder_nets).map_err(|e| RoutingError::PinBudget(e.overflow))?;
    let mut pin_assignments: BTreeMap<String, String> = pins;
    pin_assignments.insert(bus.id.clone(), profile.power_pin.to_string());

    let mut ladders = BTreeMap::new();
    let params = LadderParams {
        vcc_volts: profile.vcc_volts,
        adc_bits: profile.adc_bits,
        cross_section_mm2: rules.area_mm2(),
        material: rules.material,
        ..LadderParams::default()
    };
    for g in &groups {
        let members: Vec<String> = spec.ladder_members(g).iter().map(|k| k.id.clone()).collect();
        let design = design_analog_ladder(&members, &params)
            .map_err(|source| RoutingError::Ladder { group: g.clone(), source })?;
        let net = ladder_net_id(g);
        for e in &design.entries {
            resistors.push(ResistorRequest {
                id: format!("lad:{}", e.key),
                net_a: return_net_id(&e.key),
                net_b: net.clone(),
                target_ohms: e.resistance_ohms,
            });
        }
        resistors.push(ResistorRequest {
            id: format!("pd:{g}"),
            net_a: net.clone(),
            net_b: ground_net_id().into(),
            target_ohms: params.pulldown_ohms,
        });
        let sort_x = spec
            .ladder_members(g)
            .iter()
            .filter_map(|k| p.placed.iter().find(|pk| pk.id == k.id))
            .map(|pk| pk.center.x)
            .fold(f64::INFINITY, f64::min);
        nets.push(Net { id: net, class: NetClass::AnalogLadder(g.clone()), terminals: Vec::new(), sort_x });
        ladders.insert(g.clone(), design);
    }

    let mut cap_index = 0;
    for n in &nets {
        if let NetClass::Capacitive(_) = n.class {
            pin_assignments.insert(n.id.clone(), cap_channel_name(cap_index));
            cap_index += 1;
        }
    }
    if socket || !groups.is_empty() {
        nets.push(Net { id: ground_net_id().into(), class: NetClass::Ground, terminals: Vec::new(), sort_x: 0.0 });
        pin_assignments.insert(ground_net_id().into(), profile.ground_pin.to_string());
    }
    for r in &resistors {
        nets.push(Net { id: r.id.clone(), class: NetClass::ResistorTap(r.id.clone()), terminals: Vec::new(), sort_x: 0.0 });
    }
    if !bus.terminals.is_empty() {
        nets.insert(0, bus);
    } else {
        pin_assignments.remove(bus_net_id());
    }
    sort_nets(&mut nets);
    let groups_total = row_groups.len() + rowless;
    Ok(Netlist {
        nets,
        pin_assignments,
        resistors,
        ladders,
        inter_row_connectors: groups_total.saturating_sub(1).min(row_groups.len().saturating_sub(1) + rowless),
        socket,
    })
}

/// Routing order: bus, returns left to right, capacitive, ladders, ground.
pub fn sort_nets(nets: &mut [Net]) {
    nets.sort_by(|a, b| {
        a.class
            .rank()
            .cmp(&b.class.rank())
            .then(a.sort_x.total_cmp(&b.sort_x))
            .then(a.id.cmp(&b.id))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::blueprint_for;
    use crate::placement::place_keys;
    use crate::spec::parse_device_spec;

    fn netlist(src: &str) -> Netlist {
        let spec = parse_device_spec(src).unwrap().spec;
        let bps: Vec<_> = spec.keys.iter().map(|k| blueprint_for(k).unwrap()).collect();
        let p = place_keys(&spec, &bps).unwrap();
        build_netlist(&p, &spec, &bps, &RoutingRules::default()).unwrap()
    }

    #[test]
    fn socket_adds_pulldowns_and_ground() {
        let n = netlist("controller flora socket\nrow 0 keys A B C\n");
        assert_eq!(n.count("signal_bus"), 1);
        assert_eq!(n.count("return"), 3);
        assert_eq!(n.count("resistor_tap"), 3);
        assert_eq!(n.count("ground"), 1);
        assert!(n.resistors.iter().all(|r| r.target_ohms == DEFAULT_PULLDOWN_OHMS));
    }

    #[test]
    fn two_rows_need_one_connector() {
        let n = netlist("controller mega\nrow 0 keys A B\nrow 1 keys C D\n");
        assert_eq!(n.inter_row_connectors, 1);
        assert_eq!(n.count("ground"), 0);
        assert_eq!(netlist("row 0 keys A B\n").inter_row_connectors, 0);
    }

    #[test]
    fn analog_key_gets_a_capacitive_net() {
        let n = netlist("key P kind analog at 0 0\n");
        assert_eq!(n.count("capacitive"), 1);
        assert_eq!(n.count("signal_bus"), 0);
        assert_eq!(n.pin_assignments["cap:P"], "CAP0");
        let t = &n.net("cap:P").unwrap().terminals[0];
        assert_eq!(t.layer, Layer::Floor);
    }

    #[test]
    fn ladder_collapses_returns() {
        let n = netlist("controller uno\nrow 0 keys A B C\nkey A ladder g\nkey B ladder g\n");
        assert_eq!(n.count("analog_ladder"), 1);
        assert_eq!(n.count("ground"), 1);
        assert_eq!(n.resistors.len(), 3);
        assert_eq!(n.pin_assignments["ladder:g"], "A0");
        assert_eq!(n.pin_assignments["ret:C"], "D2");
        assert!(!n.pin_assignments.contains_key("ret:A"));
    }

    #[test]
    fn net_order_is_class_then_position() {
        let n = netlist("controller flora socket\nrow 0 keys A B\nkey Z kind analog at -40 0\n");
        let ids: Vec<&str> = n.nets.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["bus", "ret:A", "ret:B", "cap:Z", "gnd", "pd:A", "pd:B"]);
    }

    fn routed(src: &str) -> (RoutePlan, Netlist, VerificationReport) {
        let spec = parse_device_spec(src).unwrap().spec;
        let bps: Vec<_> = spec.keys.iter().map(|k| blueprint_for(k).unwrap()).collect();
        let mut p = place_keys(&spec, &bps).unwrap();
        let rules = RoutingRules::default();
        let mut n = build_netlist(&p, &spec, &bps, &rules).unwrap();
        let rear = plan_rear_zone(&mut p, &mut n, &rules).unwrap();
        let shell = crate::placement::build_shell(&p, spec.shell_policy);
        let plan = route_nets(&n, &p, &shell, &bps, &rear, &rules, spec.traces_exposed).unwrap();
        let report = verify_routes(&plan, &n);
        (plan, n, report)
    }

    #[test]
    fn routes_verify_clean() {
        for src in [
            "controller uno\nrow 0 keys A B C\n",
            "controller mega\nrow 0 keys Q W E R T\nrow 1 offset 4.7 keys A S D F G\n",
            "controller flora socket\nshell hull\nrow 0 keys A B C\n",
            "controller uno\nrow 0 keys A B C D\nkey A ladder g\nkey B ladder g\nkey C ladder g\n",
            "controller uno\nkey P kind analog at 0 0\nkey Q at 25 0 rot 30\n",
            "controller uno\nshell none\nkey K kind piano at 0 0\nkey L kind piano at 18.8 0\n",
        ] {
            let (plan, n, r) = routed(src);
            assert!(r.ok(), "{src}: {:#?}", (&r.clearance_violations, &r.connectivity_violations));
            assert_eq!(r.same_layer_crossings, 0);
            for net in n.nets.iter().filter(|n| n.is_routed()) {
                let t = &net.terminals;
                let mut far = 0.0f64;
                for a in t {
                    for b in t {
                        far = far.max((a.position.x - b.position.x).abs() + (a.position.y - b.position.y).abs());
                    }
                }
                assert!(plan.net_length(&net.id) + 1e-9 >= far, "{}", net.id);
            }
        }
    }

    #[test]
    fn rules_are_consistent() {
        assert!(RoutingRules::default().is_consistent());
    }
}
