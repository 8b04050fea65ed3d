//! Parametric key blueprints. Every body is given in key-local millimeters:
//! origin at the footprint center, z = 0 on the top face of the device base,
//! +y toward the device rear.

mod legend;

use serde::Serialize;
use thiserror::Error;

pub use legend::{braille_dots, legend_polygons, LegendError};

use crate::geom::{circle, Aabb, Profile2D, Vec2, Vec3};
use crate::spec::{KeyInstance, KeyKind, LegendSpec, StiffnessClass, TravelClass};

pub const KEYCAP_WIDTH_MM: f64 = 15.5;
pub const KEYCAP_THICKNESS_MM: f64 = 2.0;
pub const JOINED_BASE_GAP_MM: f64 = 3.3;
pub const LINE_WIDTH_MM: f64 = 0.4;
pub const PRINT_ANGLE_DEG: f64 = 45.0;
pub const CANTILEVER_LENGTH_MM: f64 = 12.0;
pub const CANTILEVER_WIDTH_MM: f64 = 8.0;
/// Width x depth x height.
pub const RETURN_ELECTRODE_MM: (f64, f64, f64) = (8.0, 4.0, 6.0);
pub const BASE_HEIGHT_MM: f64 = 6.0;
pub const BASE_HEIGHT_PER_ROW_MM: f64 = 3.0;
pub const PLATE_DIAMETER_MM: f64 = 12.0;
pub const PLATE_THICKNESS_MM: f64 = 1.0;
pub const COIL_MEAN_DIAMETER_MM: f64 = 10.0;
pub const COIL_TURNS: u32 = 4;
pub const BRAILLE_DOT_DIAMETER_MM: f64 = 1.5;
pub const BRAILLE_DOT_PITCH_MM: f64 = 2.5;
pub const BRAILLE_RELIEF_MM: f64 = 0.6;
pub const LEGEND_RELIEF_MM: f64 = 0.6;
pub const LEGEND_INSET_MM: f64 = 0.5;
pub const HINGE_THICKNESS_MM: f64 = 0.8;
pub const HINGE_LENGTH_MM: f64 = 4.0;
pub const PIANO_MIN_LENGTH_MM: f64 = 40.0;
pub const PIANO_MAX_LENGTH_MM: f64 = 160.0;
pub const PIANO_DEFAULT_LENGTH_MM: f64 = 100.0;
pub const PIANO_CONTACT_GAP_MM: f64 = 1.0;
pub const CIRCLE_SEGMENTS: usize = 48;

const SIGNAL_RIDGE_Y_MM: f64 = 5.0;
const STRAP_HALF_DEPTH_MM: f64 = 1.0;
const STRAP_THICKNESS_MM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartError {
    #[error("line count must be at least 1, got {0}")]
    InvalidLineCount(u32),
    #[error("piano key length {0} mm outside [{PIANO_MIN_LENGTH_MM}, {PIANO_MAX_LENGTH_MM}]")]
    PianoLength(f64),
    #[error(transparent)]
    Legend(#[from] LegendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Pla,
    Cpla,
}

impl Material {
    pub fn as_str(self) -> &'static str {
        match self {
            Material::Pla => "pla",
            Material::Cpla => "cpla",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyRole {
    Keycap,
    Legend,
    Base,
    CantileverSpring,
    ReturnElectrode,
    CoilSpring,
    PlateElectrode,
    Hinge,
    ContactElectrode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetRole {
    Signal,
    Return,
    Capacitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerHint {
    Ridge,
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Terminal {
    pub net_role: NetRole,
    pub position: Vec2,
    pub layer_hint: LayerHint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Solid {
    Block { min: Vec3, max: Vec3 },
    Prism { profile: Profile2D, z0: f64, height: f64 },
    /// Straight sweep of a `width` x `thickness` rectangle; `width` runs along
    /// the horizontal axis perpendicular to `direction`.
    Beam { root: Vec3, direction: Vec3, length: f64, width: f64, thickness: f64 },
    /// Square-wire helix with annular end pads; the bottom pad starts at `z0`.
    Coil { center: Vec2, z0: f64, mean_diameter: f64, wire: f64, pitch: f64, turns: u32 },
}

/// Height of a coil with end pads: active turns plus one wire thickness per pad.
pub fn coil_free_height(wire: f64, pitch: f64, turns: u32) -> f64 {
    f64::from(turns) * pitch + 2.0 * wire
}

/// Horizontal unit vector across a beam and the profile normal.
pub fn beam_frame(direction: Vec3) -> (Vec3, Vec3) {
    use crate::geom::{cross3, norm3, scale3};
    let d = scale3(direction, 1.0 / norm3(direction));
    let mut u = cross3([0.0, 0.0, 1.0], d);
    if norm3(u) < 1e-9 {
        u = [1.0, 0.0, 0.0];
    }
    let u = scale3(u, 1.0 / norm3(u));
    let v = cross3(d, u);
    (u, v)
}

impl Solid {
    pub fn block(x0: f64, y0: f64, z0: f64, x1: f64, y1: f64, z1: f64) -> Solid {
        Solid::Block { min: [x0, y0, z0], max: [x1, y1, z1] }
    }

    /// Corner points of the beam's end faces.
    pub fn beam_corners(root: Vec3, direction: Vec3, length: f64, width: f64, thickness: f64) -> [Vec3; 8] {
        use crate::geom::{add3, norm3, scale3};
        let d = scale3(direction, 1.0 / norm3(direction));
        let (u, v) = beam_frame(d);
        let tip = add3(root, scale3(d, length));
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for base in [root, tip] {
            for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                out[i] = add3(add3(base, scale3(u, su * width / 2.0)), scale3(v, sv * thickness / 2.0));
                i += 1;
            }
        }
        out
    }

    pub fn aabb(&self) -> Aabb {
        match self {
            Solid::Block { min, max } => Aabb { min: *min, max: *max },
            Solid::Prism { profile, z0, height } => {
                let pts: Vec<Vec3> = profile.outer.iter().flat_map(|p| [[p.x, p.y, *z0], [p.x, p.y, z0 + height]]).collect();
                Aabb::from_points(&pts).expect("prism profile has vertices")
            }
            Solid::Beam { root, direction, length, width, thickness } => {
                let c = Solid::beam_corners(*root, *direction, *length, *width, *thickness);
                Aabb::from_points(&c).expect("eight corners")
            }
            Solid::Coil { center, z0, mean_diameter, wire, pitch, turns } => {
                let r = mean_diameter / 2.0 + wire / 2.0;
                Aabb {
                    min: [center.x - r, center.y - r, *z0],
                    max: [center.x + r, center.y + r, z0 + coil_free_height(*wire, *pitch, *turns)],
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BodyDef {
    pub name: &'static str,
    pub role: BodyRole,
    pub material: Material,
    /// Net the body belongs to; `None` for insulators.
    pub net_role: Option<NetRole>,
    pub solid: Solid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpringParams {
    Cantilever {
        gap_mm: f64,
        line_count: u32,
        nominal_thickness_mm: f64,
        effective_thickness_mm: f64,
        print_angle_deg: f64,
        length_mm: f64,
        width_mm: f64,
    },
    Coil {
        travel_mm: f64,
        free_height_mm: f64,
        coil_thickness_mm: f64,
        mean_diameter_mm: f64,
        turns: u32,
        pitch_mm: f64,
    },
    Hinge {
        gap_mm: f64,
        thickness_mm: f64,
        length_mm: f64,
        width_mm: f64,
        /// Distance from the hinge center to the contact pad center.
        lever_arm_mm: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyBlueprint {
    pub kind: KeyKind,
    pub travel: TravelClass,
    pub stiffness: StiffnessClass,
    pub footprint_mm: (f64, f64),
    pub keycap_width_mm: f64,
    pub base_height_mm: f64,
    pub bodies: Vec<BodyDef>,
    pub terminals: Vec<Terminal>,
    pub spring: SpringParams,
}

impl KeyBlueprint {
    pub fn conductive_bodies(&self) -> impl Iterator<Item = &BodyDef> {
        self.bodies.iter().filter(|b| b.material == Material::Cpla)
    }
}

pub fn footprint_size(kind: KeyKind, piano_length_mm: f64) -> (f64, f64) {
    match kind {
        KeyKind::Piano => (KEYCAP_WIDTH_MM, piano_length_mm),
        _ => (KEYCAP_WIDTH_MM, KEYCAP_WIDTH_MM),
    }
}

pub fn effective_spring_thickness(line_count: u32) -> Result<f64, PartError> {
    if line_count < 1 {
        return Err(PartError::InvalidLineCount(line_count));
    }
    Ok(nominal_thickness(line_count) * PRINT_ANGLE_DEG.to_radians().cos())
}

fn nominal_thickness(line_count: u32) -> f64 {
    f64::from(line_count) * LINE_WIDTH_MM
}

pub fn line_count(stiffness: StiffnessClass) -> u32 {
    match stiffness {
        StiffnessClass::Low => 3,
        StiffnessClass::High => 4,
    }
}

pub fn digital_gap_mm(travel: TravelClass) -> f64 {
    match travel {
        TravelClass::Short => 0.5,
        TravelClass::Medium => 1.0,
        TravelClass::Long => 1.5,
    }
}

pub fn analog_travel_mm(travel: TravelClass) -> f64 {
    match travel {
        TravelClass::Short => 3.6,
        TravelClass::Medium => 8.64,
        TravelClass::Long => 13.72,
    }
}

/// Coil wire cross-section follows the cantilever line convention.
pub fn coil_wire_mm(stiffness: StiffnessClass) -> f64 {
    nominal_thickness(line_count(stiffness))
}

fn legend_bodies(legend: &LegendSpec, cap_top: f64) -> Result<Vec<BodyDef>, PartError> {
    Ok(legend_polygons(legend, KEYCAP_WIDTH_MM)?
        .into_iter()
        .map(|profile| BodyDef {
            name: "legend",
            role: BodyRole::Legend,
            material: Material::Pla,
            net_role: None,
            solid: Solid::Prism { profile, z0: cap_top, height: legend.relief_height_mm },
        })
        .collect())
}

fn keycap(z0: f64) -> BodyDef {
    let h = KEYCAP_WIDTH_MM / 2.0;
    BodyDef {
        name: "keycap",
        role: BodyRole::Keycap,
        material: Material::Pla,
        net_role: None,
        solid: Solid::block(-h, -h, z0, h, h, z0 + KEYCAP_THICKNESS_MM),
    }
}

pub fn digital_key_blueprint(
    travel: TravelClass,
    stiffness: StiffnessClass,
    legend: &LegendSpec,
) -> Result<KeyBlueprint, PartError> {
    let gap = digital_gap_mm(travel);
    let lines = line_count(stiffness);
    let t = effective_spring_thickness(lines)?;
    let (s, c) = PRINT_ANGLE_DEG.to_radians().sin_cos();
    let root: Vec3 = [0.0, 4.5, 2.0];
    let direction: Vec3 = [0.0, -s, c];
    let tip = [0.0, root[1] - s * CANTILEVER_LENGTH_MM, root[2] + c * CANTILEVER_LENGTH_MM];
    let z_top = tip[2] + t / 2.0 * c;
    let (ew, ed, eh) = RETURN_ELECTRODE_MM;
    let half = KEYCAP_WIDTH_MM / 2.0;
    let spring = |name, solid| BodyDef {
        name,
        role: BodyRole::CantileverSpring,
        material: Material::Cpla,
        net_role: Some(NetRole::Signal),
        solid,
    };
    let mut bodies = vec![
        keycap(z_top),
        spring("pedestal", Solid::block(-ew / 2.0, 2.5, 0.0, ew / 2.0, 6.5, 2.5)),
        spring(
            "strap",
            Solid::block(
                -half,
                SIGNAL_RIDGE_Y_MM - STRAP_HALF_DEPTH_MM,
                0.0,
                half,
                SIGNAL_RIDGE_Y_MM + STRAP_HALF_DEPTH_MM,
                STRAP_THICKNESS_MM,
            ),
        ),
        spring(
            "cantilever",
            Solid::Beam {
                root,
                direction,
                length: CANTILEVER_LENGTH_MM,
                width: CANTILEVER_WIDTH_MM,
                thickness: t,
            },
        ),
        spring(
            "tip_pad",
            Solid::block(-ew / 2.0, tip[1] - ed / 2.0, eh + gap, ew / 2.0, tip[1] + ed / 2.0, z_top),
        ),
        BodyDef {
            name: "return_electrode",
            role: BodyRole::ReturnElectrode,
            material: Material::Cpla,
            net_role: Some(NetRole::Return),
            solid: Solid::block(-ew / 2.0, tip[1] - ed / 2.0, 0.0, ew / 2.0, tip[1] + ed / 2.0, eh),
        },
    ];
    bodies.extend(legend_bodies(legend, z_top + KEYCAP_THICKNESS_MM)?);
    let terminals = vec![
        Terminal {
            net_role: NetRole::Signal,
            position: Vec2::new(-half, SIGNAL_RIDGE_Y_MM),
            layer_hint: LayerHint::Ridge,
        },
        Terminal {
            net_role: NetRole::Signal,
            position: Vec2::new(half, SIGNAL_RIDGE_Y_MM),
            layer_hint: LayerHint::Ridge,
        },
        Terminal {
            net_role: NetRole::Return,
            position: Vec2::new(0.0, tip[1]),
            layer_hint: LayerHint::Floor,
        },
    ];
    Ok(KeyBlueprint {
        kind: KeyKind::Digital,
        travel,
        stiffness,
        footprint_mm: footprint_size(KeyKind::Digital, 0.0),
        keycap_width_mm: KEYCAP_WIDTH_MM,
        base_height_mm: BASE_HEIGHT_MM,
        bodies,
        terminals,
        spring: SpringParams::Cantilever {
            gap_mm: gap,
            line_count: lines,
            nominal_thickness_mm: nominal_thickness(lines),
            effective_thickness_mm: t,
            print_angle_deg: PRINT_ANGLE_DEG,
            length_mm: CANTILEVER_LENGTH_MM,
            width_mm: CANTILEVER_WIDTH_MM,
        },
    })
}

pub fn analog_key_blueprint(
    travel: TravelClass,
    stiffness: StiffnessClass,
    legend: &LegendSpec,
) -> Result<KeyBlueprint, PartError> {
    let travel_mm = analog_travel_mm(travel);
    let wire = coil_wire_mm(stiffness);
    let pitch = wire + travel_mm / f64::from(COIL_TURNS);
    let free = coil_free_height(wire, pitch, COIL_TURNS);
    let z0 = PLATE_THICKNESS_MM;
    let mut bodies = vec![
        keycap(z0 + free),
        BodyDef {
            name: "plate",
            role: BodyRole::PlateElectrode,
            material: Material::Cpla,
            net_role: Some(NetRole::Capacitive),
            solid: Solid::Prism {
                profile: Profile2D::simple(circle(Vec2::default(), PLATE_DIAMETER_MM / 2.0, CIRCLE_SEGMENTS)),
                z0: 0.0,
                height: PLATE_THICKNESS_MM,
            },
        },
        BodyDef {
            name: "coil",
            role: BodyRole::CoilSpring,
            material: Material::Pla,
            net_role: None,
            solid: Solid::Coil {
                center: Vec2::default(),
                z0,
                mean_diameter: COIL_MEAN_DIAMETER_MM,
                wire,
                pitch,
                turns: COIL_TURNS,
            },
        },
    ];
    bodies.extend(legend_bodies(legend, z0 + free + KEYCAP_THICKNESS_MM)?);
    Ok(KeyBlueprint {
        kind: KeyKind::Analog,
        travel,
        stiffness,
        footprint_mm: footprint_size(KeyKind::Analog, 0.0),
        keycap_width_mm: KEYCAP_WIDTH_MM,
        base_height_mm: BASE_HEIGHT_MM,
        bodies,
        terminals: vec![Terminal {
            net_role: NetRole::Capacitive,
            position: Vec2::default(),
            layer_hint: LayerHint::Floor,
        }],
        spring: SpringParams::Coil {
            travel_mm,
            free_height_mm: free,
            coil_thickness_mm: wire,
            mean_diameter_mm: COIL_MEAN_DIAMETER_MM,
            turns: COIL_TURNS,
            pitch_mm: pitch,
        },
    })
}

/// Lever on a living hinge at the rear. A conductive pad under the lever
/// front bridges two fixed contacts when the lever is pressed; the pad is
/// tied to the signal strap by a strip running under the lever and down the
/// front of the anchor block.
pub fn piano_key_blueprint(
    length_mm: f64,
    stiffness: StiffnessClass,
    legend: &LegendSpec,
) -> Result<KeyBlueprint, PartError> {
    if !(PIANO_MIN_LENGTH_MM..=PIANO_MAX_LENGTH_MM).contains(&length_mm) {
        return Err(PartError::PianoLength(length_mm));
    }
    let l2 = length_mm / 2.0;
    let half = KEYCAP_WIDTH_MM / 2.0;
    let gap = PIANO_CONTACT_GAP_MM;
    let lever_top = 8.0;
    let lever_bottom = 5.0;
    let contact_top = lever_bottom - 1.0 - gap;
    let hinge_y0 = l2 - 10.0;
    let hinge_y1 = hinge_y0 + HINGE_LENGTH_MM;
    let hinge_w = match stiffness {
        StiffnessClass::Low => CANTILEVER_WIDTH_MM,
        StiffnessClass::High => KEYCAP_WIDTH_MM,
    };
    let pad_y = (-l2 + 2.0, -l2 + 8.0);
    let pla = |name, role, solid| BodyDef { name, role, material: Material::Pla, net_role: None, solid };
    let contact = |name, net, solid| BodyDef {
        name,
        role: BodyRole::ContactElectrode,
        material: Material::Cpla,
        net_role: Some(net),
        solid,
    };
    let mut bodies = vec![
        pla("lever", BodyRole::Keycap, Solid::block(-half, -l2, lever_bottom, half, hinge_y0, lever_top)),
        pla(
            "hinge",
            BodyRole::Hinge,
            Solid::block(
                -hinge_w / 2.0,
                hinge_y0,
                lever_top - HINGE_THICKNESS_MM,
                hinge_w / 2.0,
                hinge_y1,
                lever_top,
            ),
        ),
        pla("anchor", BodyRole::Hinge, Solid::block(-half, hinge_y1, 0.0, half, l2, lever_top)),
        contact("pad_a", NetRole::Signal, Solid::block(-5.0, pad_y.0, lever_bottom - 1.0, 5.0, pad_y.1, lever_bottom)),
        contact("strip", NetRole::Signal, Solid::block(-2.0, pad_y.1, lever_bottom - 1.0, 2.0, hinge_y1 - 1.0, lever_bottom)),
        contact("down_strip", NetRole::Signal, Solid::block(-2.0, hinge_y1 - 1.0, 0.0, 2.0, hinge_y1, lever_bottom)),
        contact(
            "strap",
            NetRole::Signal,
            Solid::block(-half, hinge_y1 - 2.0, 0.0, half, hinge_y1, STRAP_THICKNESS_MM),
        ),
        contact("contact_b", NetRole::Return, Solid::block(-5.0, pad_y.0, 0.0, -0.5, pad_y.1, contact_top)),
        contact("contact_c", NetRole::Return, Solid::block(0.5, pad_y.0, 0.0, 5.0, pad_y.1, contact_top)),
    ];
    // Legend sits on the lever top near the front where the cap face would be.
    let mut legend_defs = legend_bodies(legend, lever_top)?;
    let shift = -l2 + half;
    for b in &mut legend_defs {
        if let Solid::Prism { profile, .. } = &mut b.solid {
            let mv = |v: &Vec2| Vec2::new(v.x, v.y + shift);
            profile.outer = profile.outer.iter().map(mv).collect();
            profile.holes = profile.holes.iter().map(|h| h.iter().map(mv).collect()).collect();
        }
    }
    bodies.extend(legend_defs);
    let pad_mid = (pad_y.0 + pad_y.1) / 2.0;
    let signal_y = hinge_y1 - 1.0;
    Ok(KeyBlueprint {
        kind: KeyKind::Piano,
        travel: TravelClass::Medium,
        stiffness,
        footprint_mm: footprint_size(KeyKind::Piano, length_mm),
        keycap_width_mm: KEYCAP_WIDTH_MM,
        base_height_mm: BASE_HEIGHT_MM,
        bodies,
        terminals: vec![
            Terminal { net_role: NetRole::Signal, position: Vec2::new(-half, signal_y), layer_hint: LayerHint::Ridge },
            Terminal { net_role: NetRole::Signal, position: Vec2::new(half, signal_y), layer_hint: LayerHint::Ridge },
            Terminal { net_role: NetRole::Return, position: Vec2::new(-2.75, pad_mid), layer_hint: LayerHint::Floor },
            Terminal { net_role: NetRole::Return, position: Vec2::new(2.75, pad_mid), layer_hint: LayerHint::Floor },
        ],
        spring: SpringParams::Hinge {
            gap_mm: gap,
            thickness_mm: HINGE_THICKNESS_MM,
            length_mm: HINGE_LENGTH_MM,
            width_mm: hinge_w,
            lever_arm_mm: (hinge_y0 + hinge_y1) / 2.0 - pad_mid,
        },
    })
}

pub fn blueprint_for(key: &KeyInstance) -> Result<KeyBlueprint, PartError> {
    match key.kind {
        KeyKind::Digital => digital_key_blueprint(key.travel, key.stiffness, &key.legend),
        KeyKind::Analog => analog_key_blueprint(key.travel, key.stiffness, &key.legend),
        KeyKind::Piano => piano_key_blueprint(
            key.length_mm.unwrap_or(PIANO_DEFAULT_LENGTH_MM),
            key.stiffness,
            &key.legend,
        ),
    }
}

/// Conductive bodies that no terminal reaches through touching conductive
/// bodies. Terminals attach to bodies whose bounding box covers the anchor
/// on the z = 0 face.
pub fn floating_conductors(bp: &KeyBlueprint) -> Vec<&'static str> {
    let bodies: Vec<&BodyDef> = bp.conductive_bodies().collect();
    let boxes: Vec<Aabb> = bodies.iter().map(|b| b.solid.aabb()).collect();
    let mut reached = vec![false; bodies.len()];
    let mut stack = Vec::new();
    for t in &bp.terminals {
        let p = [t.position.x, t.position.y, 0.0];
        for (i, bx) in boxes.iter().enumerate() {
            let pt = Aabb { min: p, max: p };
            if !reached[i] && bx.touches(&pt) && bodies[i].net_role == Some(t.net_role) {
                reached[i] = true;
                stack.push(i);
            }
        }
    }
    while let Some(i) = stack.pop() {
        for j in 0..bodies.len() {
            if !reached[j] && boxes[i].touches(&boxes[j]) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    bodies
        .iter()
        .zip(reached)
        .filter(|(_, r)| !r)
        .map(|(b, _)| b.name)
        .collect()
}
