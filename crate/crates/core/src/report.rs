//! JSON engineering report.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::electrical::{predict_adc_counts, trace_resistance, CapacitanceModel, ElectricalError, LadderEntry};
use crate::mechanics::{
    coil_spring_rate, hinge_activation_force, hinge_strain, max_bending_strain, preset_activation_force, BeamParams,
    CoilParams, Force, HingeParams, MechanicsError, DEFAULT_ELASTIC_MODULUS_MPA, DEFAULT_SHEAR_MODULUS_MPA,
};
use crate::mesh::{AssembledMeshes, WatertightReport};
use crate::parts::{KeyBlueprint, Material, SpringParams, PLATE_DIAMETER_MM};
use crate::placement::Placement;
use crate::routing::{NetClass, Netlist, RoutePlan, VerificationReport};
use crate::spec::{DeviceSpec, KeyInstance, KeyKind};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SLICER_LAYER_HEIGHT_MM: f64 = 0.2;
pub const SLICER_INFILL_PERCENT: f64 = 90.0;
pub const SIGNIFICANT_DIGITS: usize = 9;
pub const CAPACITANCE_SAMPLES: usize = 11;
/// Air gap between the plates.
pub const PLATE_EPSILON_R: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceSource {
    MeasuredPreset,
    BeamModel,
    CoilModel,
    HingeModel,
}

impl ForceSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ForceSource::MeasuredPreset => "measured-preset",
            ForceSource::BeamModel => "beam-model",
            ForceSource::CoilModel => "coil-model",
            ForceSource::HingeModel => "hinge-model",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceRecord {
    pub mean_n: f64,
    pub tolerance_n: f64,
    pub mean_lbf: f64,
    pub tolerance_lbf: f64,
    pub source: ForceSource,
    pub summary: String,
}

impl ForceRecord {
    fn new(f: Force, source: ForceSource) -> Self {
        Self {
            mean_n: f.mean_n,
            tolerance_n: f.tolerance_n,
            mean_lbf: f.mean_lbf,
            tolerance_lbf: f.tolerance_lbf,
            source,
            summary: format!("{:.2} lbf ± {:.2}, source: {}", f.mean_lbf, f.tolerance_lbf, source.as_str()),
        }
    }
}

/// Force, travel and durability figures of one key.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyMechanics {
    pub travel_mm: f64,
    pub force: ForceRecord,
    /// Peak bending strain at full travel; `None` for coil springs.
    pub max_strain: Option<f64>,
}

pub fn key_mechanics(bp: &KeyBlueprint) -> Result<KeyMechanics, MechanicsError> {
    match bp.spring {
        SpringParams::Cantilever { gap_mm, effective_thickness_mm, length_mm, width_mm, .. } => {
            let beam = BeamParams {
                elastic_modulus_mpa: DEFAULT_ELASTIC_MODULUS_MPA,
                length_mm,
                width_mm,
                thickness_mm: effective_thickness_mm,
                deflection_mm: gap_mm,
            };
            Ok(KeyMechanics {
                travel_mm: gap_mm,
                force: ForceRecord::new(preset_activation_force(bp.travel, bp.stiffness), ForceSource::MeasuredPreset),
                max_strain: Some(max_bending_strain(&beam)?),
            })
        }
        SpringParams::Coil { travel_mm, coil_thickness_mm, mean_diameter_mm, turns, .. } => {
            let k = coil_spring_rate(&CoilParams {
                shear_modulus_mpa: DEFAULT_SHEAR_MODULUS_MPA,
                wire_thickness_mm: coil_thickness_mm,
                mean_diameter_mm,
                active_turns: turns as f64,
            })?;
            Ok(KeyMechanics {
                travel_mm,
                force: ForceRecord::new(Force::from_newtons(k * travel_mm), ForceSource::CoilModel),
                max_strain: None,
            })
        }
        SpringParams::Hinge { gap_mm, thickness_mm, length_mm, width_mm, lever_arm_mm } => {
            let h = HingeParams {
                elastic_modulus_mpa: DEFAULT_ELASTIC_MODULUS_MPA,
                width_mm,
                thickness_mm,
                length_mm,
                lever_arm_mm,
                deflection_mm: gap_mm,
            };
            Ok(KeyMechanics {
                travel_mm: gap_mm,
                force: ForceRecord::new(Force::from_newtons(hinge_activation_force(&h)?), ForceSource::HingeModel),
                max_strain: Some(hinge_strain(&h)?),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRecord {
    pub id: String,
    pub kind: KeyKind,
    pub travel: crate::spec::TravelClass,
    pub stiffness: crate::spec::StiffnessClass,
    pub center_mm: [f64; 2],
    pub rotation_deg: f64,
    pub travel_mm: f64,
    pub force: ForceRecord,
    pub max_strain: Option<f64>,
    pub net: Option<String>,
    pub pin: Option<String>,
    pub spring: SpringParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetRecord {
    pub id: String,
    pub class: String,
    pub length_mm: f64,
    pub resistance_ohms: f64,
    pub pin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRecord {
    pub group: String,
    pub net: String,
    pub pin: Option<String>,
    pub vcc_volts: f64,
    pub pulldown_ohms: f64,
    pub adc_bits: u32,
    pub min_separation_counts: u32,
    pub idle_counts: u32,
    pub min_pairwise_counts: Option<u32>,
    pub entries: Vec<LadderEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitanceRecord {
    pub key: String,
    pub electrode_area_mm2: f64,
    pub epsilon_r: f64,
    pub hover_f: f64,
    pub partial_f: f64,
    pub full_f: f64,
    /// (travel mm, capacitance F) pairs.
    pub samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshStats {
    pub material: Material,
    pub file: String,
    pub triangles: usize,
    pub volume_mm3: f64,
    pub watertight: bool,
    pub manifold: bool,
    pub oriented: bool,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub bodies: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingStats {
    pub traces: usize,
    pub vias: usize,
    pub resistors: usize,
    pub clearance_violations: usize,
    pub connectivity_violations: usize,
    pub same_layer_crossings: usize,
    pub layer_crossovers: usize,
    pub min_clearance_mm: Option<f64>,
    pub inter_row_connectors: usize,
    pub grid_pitch_mm: f64,
    pub trace_width_mm: f64,
    pub trace_height_mm: f64,
    pub resistivity_ohm_cm: f64,
    pub traces_exposed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlicerSettings {
    pub layer_height_mm: f64,
    pub infill_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildReport {
    pub device: String,
    pub tool_version: String,
    pub controller: String,
    pub socket: bool,
    pub shell: String,
    pub base_height_mm: f64,
    pub keys: Vec<KeyRecord>,
    pub nets: Vec<NetRecord>,
    pub ladders: Vec<LadderRecord>,
    pub capacitance: Vec<CapacitanceRecord>,
    pub pin_map: BTreeMap<String, String>,
    pub routing: RoutingStats,
    pub meshes: Vec<MeshStats>,
    pub slicer: SlicerSettings,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("key `{key}`: {source}")]
    Mechanics { key: String, source: MechanicsError },
    #[error("key `{key}`: {source}")]
    Electrical { key: String, source: ElectricalError },
}

/// Everything the report is assembled from.
pub struct ReportInputs<'a> {
    pub spec: &'a DeviceSpec,
    pub blueprints: &'a [KeyBlueprint],
    pub placement: &'a Placement,
    pub netlist: &'a Netlist,
    pub plan: &'a RoutePlan,
    pub verification: &'a VerificationReport,
    pub meshes: &'a AssembledMeshes,
    pub watertight: [&'a WatertightReport; 2],
    pub warnings: &'a [String],
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn key_net(netlist: &Netlist, key: &KeyInstance) -> Option<String> {
    let candidates = [
        key.ladder_group.as_ref().map(|g| format!("ladder:{g}")),
        Some(format!("ret:{}", key.id)),
        Some(format!("cap:{}", key.id)),
    ];
    candidates.into_iter().flatten().find(|id| netlist.net(id).is_some())
}

pub fn build_report(inp: &ReportInputs) -> Result<BuildReport, ReportError> {
    let netlist = inp.netlist;
    let plan = inp.plan;
    let material = plan.rules.material;
    let area = plan.rules.area_mm2();
    let resistance = |len: f64| trace_resistance(len, area, &material).unwrap_or(0.0);

    let mut keys = Vec::new();
    let mut capacitance = Vec::new();
    for (k, bp) in inp.spec.keys.iter().zip(inp.blueprints) {
        let m = key_mechanics(bp).map_err(|source| ReportError::Mechanics { key: k.id.clone(), source })?;
        let placed = inp.placement.placed.iter().find(|p| p.id == k.id);
        let net = key_net(netlist, k);
        if k.kind == KeyKind::Analog {
            let plate = std::f64::consts::PI * (PLATE_DIAMETER_MM / 2.0).powi(2);
            let model = CapacitanceModel::for_key(plate, m.travel_mm, PLATE_EPSILON_R)
                .map_err(|source| ReportError::Electrical { key: k.id.clone(), source })?;
            capacitance.push(CapacitanceRecord {
                key: k.id.clone(),
                electrode_area_mm2: model.electrode_area_mm2,
                epsilon_r: model.epsilon_r,
                hover_f: model.thresholds.0,
                partial_f: model.thresholds.1,
                full_f: model.thresholds.2,
                samples: model.curve(CAPACITANCE_SAMPLES).into_iter().map(|(x, c)| [x, c]).collect(),
            });
        }
        keys.push(KeyRecord {
            id: k.id.clone(),
            kind: k.kind,
            travel: k.travel,
            stiffness: k.stiffness,
            center_mm: placed.map_or([0.0, 0.0], |p| [p.center.x, p.center.y]),
            rotation_deg: placed.map_or(0.0, |p| p.rotation_deg),
            travel_mm: m.travel_mm,
            force: m.force,
            max_strain: m.max_strain,
            pin: net.as_ref().and_then(|n| netlist.pin_assignments.get(n).cloned()),
            net,
            spring: bp.spring.clone(),
        });
    }

    let mut nets = Vec::new();
    for n in &netlist.nets {
        let raw = match &n.class {
            NetClass::ResistorTap(id) => {
                plan.resistors.iter().find(|r| &r.id == id).map_or(0.0, |r| r.centerline_length())
            }
            _ => plan.net_length(&n.id),
        };
        // resistance is recomputed from the length as printed
        let length_mm = round_sig(raw);
        nets.push(NetRecord {
            id: n.id.clone(),
            class: n.class.name().to_string(),
            length_mm,
            resistance_ohms: resistance(length_mm),
            pin: netlist.pin_assignments.get(&n.id).cloned(),
        });
    }

    let ladders = netlist
        .ladders
        .iter()
        .map(|(group, d)| {
            let net = format!("ladder:{group}");
            LadderRecord {
                group: group.clone(),
                pin: netlist.pin_assignments.get(&net).cloned(),
                net,
                vcc_volts: d.vcc_volts,
                pulldown_ohms: d.pulldown_ohms,
                adc_bits: d.adc_bits,
                min_separation_counts: d.min_separation_counts,
                idle_counts: predict_adc_counts(d, None).unwrap_or(0),
                min_pairwise_counts: d.min_pairwise_separation(),
                entries: d.entries.clone(),
            }
        })
        .collect();

    let v = inp.verification;
    let routing = RoutingStats {
        traces: plan.traces.len(),
        vias: plan.vias.len(),
        resistors: plan.resistors.len(),
        clearance_violations: v.clearance_violations.len(),
        connectivity_violations: v.connectivity_violations.len(),
        same_layer_crossings: v.same_layer_crossings,
        layer_crossovers: v.layer_crossovers,
        min_clearance_mm: v.min_clearance_mm,
        inter_row_connectors: plan.inter_row_connectors,
        grid_pitch_mm: plan.rules.grid_pitch_mm,
        trace_width_mm: plan.rules.trace_cross_section_mm.0,
        trace_height_mm: plan.rules.trace_cross_section_mm.1,
        resistivity_ohm_cm: material.resistivity_ohm_cm,
        traces_exposed: inp.spec.traces_exposed,
    };

    let meshes = [(Material::Pla, &inp.meshes.pla, inp.watertight[0]), (Material::Cpla, &inp.meshes.cpla, inp.watertight[1])]
        .into_iter()
        .map(|(mat, mesh, w)| {
            let mut bodies = BTreeMap::new();
            for b in inp.meshes.bodies.iter().filter(|b| b.material == mat) {
                *bodies.entry(b.role.clone()).or_insert(0) += 1;
            }
            MeshStats {
                material: mat,
                file: stl_file_name(&inp.spec.name, mat),
                triangles: mesh.triangles.len(),
                volume_mm3: w.signed_volume,
                watertight: w.watertight(),
                manifold: w.manifold,
                oriented: w.oriented,
                boundary_edges: w.boundary_edges.len(),
                nonmanifold_edges: w.nonmanifold_edges.len(),
                bodies,
            }
        })
        .collect();

    Ok(BuildReport {
        device: inp.spec.name.clone(),
        tool_version: TOOL_VERSION.to_string(),
        controller: inp.spec.controller.kind.as_str().to_string(),
        socket: inp.spec.controller.socket,
        shell: inp.spec.shell_policy.as_str().to_string(),
        base_height_mm: inp.placement.base_height_mm,
        keys,
        nets,
        ladders,
        capacitance,
        pin_map: netlist.pin_assignments.clone(),
        routing,
        meshes,
        slicer: SlicerSettings { layer_height_mm: SLICER_LAYER_HEIGHT_MM, infill_percent: SLICER_INFILL_PERCENT },
        warnings: inp.warnings.to_vec(),
    })
}

pub fn stl_file_name(device: &str, m: Material) -> String {
    format!("{device}_{}.stl", m.as_str())
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted object keys and rounded numbers.
pub fn report_json(r: &BuildReport) -> String {
    let v = serde_json::to_value(r).expect("report is plain data");
    let mut s = serde_json::to_string_pretty(&round_value(v)).expect("value serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::blueprint_for;
    use crate::spec::{parse_device_spec, StiffnessClass, TravelClass};

    fn bp(src: &str) -> KeyBlueprint {
        let spec = parse_device_spec(src).unwrap().spec;
        blueprint_for(&spec.keys[0]).unwrap()
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(32.25806451612903), 32.2580645);
        assert_eq!(round_sig(3100.0062000124), 3100.0062);
        assert_eq!(round_sig(1.0e-13 / 3.0), 3.33333333e-14);
        assert_eq!(round_sig(0.0), 0.0);
        for x in [1.0 / 7.0, 123456789.123, 2.54 * 2.54] {
            let s = serde_json::to_string(&round_sig(x)).unwrap();
            let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
            let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
            assert!(digits <= SIGNIFICANT_DIGITS, "{s}");
        }
    }

    #[test]
    fn preset_force_line() {
        let m = key_mechanics(&bp("key A at 0 0 travel short stiffness high")).unwrap();
        assert_eq!(m.force.summary, "2.51 lbf ± 0.15, source: measured-preset");
        assert_eq!(m.force.source, ForceSource::MeasuredPreset);
        assert!(m.max_strain.unwrap() < 0.02);
    }

    #[test]
    fn model_sources() {
        let a = key_mechanics(&bp("key A kind analog at 0 0")).unwrap();
        assert_eq!(a.force.source, ForceSource::CoilModel);
        assert!(a.force.mean_n > 0.0);
        assert!(a.max_strain.is_none());
        let p = key_mechanics(&bp("key A kind piano at 0 0")).unwrap();
        assert_eq!(p.force.source, ForceSource::HingeModel);
        assert!(p.max_strain.unwrap() < 0.02);
    }

    #[test]
    fn every_digital_preset_reports_its_table_entry() {
        for t in TravelClass::ALL {
            for s in StiffnessClass::ALL {
                let src = format!("key A at 0 0 travel {} stiffness {}", t.as_str(), s.as_str());
                let m = key_mechanics(&bp(&src)).unwrap();
                let f = preset_activation_force(*t, *s);
                assert_eq!((m.force.mean_lbf, m.force.tolerance_lbf), (f.mean_lbf, f.tolerance_lbf));
            }
        }
    }

    #[test]
    fn rounding_keeps_structure() {
        let v = serde_json::json!({"b": [1.0 / 3.0, 2], "a": {"x": 2.0 / 3.0}});
        let s = serde_json::to_string(&round_value(v)).unwrap();
        assert_eq!(s, r#"{"a":{"x":0.666666667},"b":[0.333333333,2]}"#);
    }
}
