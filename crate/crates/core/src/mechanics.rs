//! Activation force: the measured preset table plus beam, coil and hinge
//! models for custom geometry, and the bending-strain durability check.

use serde::Serialize;
use thiserror::Error;

use crate::spec::{StiffnessClass, TravelClass};

pub const LBF_TO_N: f64 = 4.4482216153;
pub const DEFAULT_ELASTIC_MODULUS_MPA: f64 = 2000.0;
pub const DEFAULT_SHEAR_MODULUS_MPA: f64 = 800.0;
pub const STRAIN_LIMIT: f64 = 0.02;
/// Angle of the press fixture during the force measurements; metadata only.
pub const FORCE_TEST_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanicsError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("mean coil diameter {mean} must exceed wire thickness {wire}")]
    CoilTooTight { mean: f64, wire: f64 },
    #[error("calibration needs at least one measurement")]
    NoMeasurements,
}

fn positive(name: &'static str, value: f64) -> Result<(), MechanicsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MechanicsError::NonPositive { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Force {
    pub mean_lbf: f64,
    pub tolerance_lbf: f64,
    pub mean_n: f64,
    pub tolerance_n: f64,
}

impl Force {
    pub fn from_lbf(mean_lbf: f64, tolerance_lbf: f64) -> Self {
        Self {
            mean_lbf,
            tolerance_lbf,
            mean_n: mean_lbf * LBF_TO_N,
            tolerance_n: tolerance_lbf * LBF_TO_N,
        }
    }

    pub fn from_newtons(mean_n: f64) -> Self {
        Self { mean_lbf: mean_n / LBF_TO_N, tolerance_lbf: 0.0, mean_n, tolerance_n: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceEntry {
    pub travel: TravelClass,
    pub stiffness: StiffnessClass,
    pub force: Force,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceTable {
    pub entries: Vec<ForceEntry>,
    pub test_angle_deg: f64,
}

const MEASURED_LBF: [(TravelClass, StiffnessClass, f64, f64); 6] = [
    (TravelClass::Short, StiffnessClass::High, 2.51, 0.15),
    (TravelClass::Short, StiffnessClass::Low, 0.64, 0.25),
    (TravelClass::Medium, StiffnessClass::High, 1.00, 0.17),
    (TravelClass::Medium, StiffnessClass::Low, 0.49, 0.05),
    (TravelClass::Long, StiffnessClass::High, 1.46, 0.13),
    (TravelClass::Long, StiffnessClass::Low, 0.97, 0.08),
];

pub fn force_table() -> ForceTable {
    ForceTable {
        entries: MEASURED_LBF
            .iter()
            .map(|&(travel, stiffness, m, t)| ForceEntry { travel, stiffness, force: Force::from_lbf(m, t) })
            .collect(),
        test_angle_deg: FORCE_TEST_ANGLE_DEG,
    }
}

pub fn preset_activation_force(travel: TravelClass, stiffness: StiffnessClass) -> Force {
    let &(_, _, m, t) = MEASURED_LBF
        .iter()
        .find(|e| e.0 == travel && e.1 == stiffness)
        .expect("table covers every preset");
    Force::from_lbf(m, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamGeometry {
    pub length_mm: f64,
    pub width_mm: f64,
    pub thickness_mm: f64,
    pub deflection_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamParams {
    pub elastic_modulus_mpa: f64,
    pub length_mm: f64,
    pub width_mm: f64,
    pub thickness_mm: f64,
    pub deflection_mm: f64,
}

impl BeamParams {
    pub fn new(elastic_modulus_mpa: f64, g: BeamGeometry) -> Self {
        Self {
            elastic_modulus_mpa,
            length_mm: g.length_mm,
            width_mm: g.width_mm,
            thickness_mm: g.thickness_mm,
            deflection_mm: g.deflection_mm,
        }
    }
}

/// Tip force per unit modulus, 3·I·δ/L³ with I = w·t³/12.
fn beam_compliance_factor(g: &BeamGeometry) -> f64 {
    let i = g.width_mm * g.thickness_mm.powi(3) / 12.0;
    3.0 * i * g.deflection_mm / g.length_mm.powi(3)
}

/// F = 3·E·I·δ/L³ in newtons (mm, MPa).
pub fn beam_activation_force(p: &BeamParams) -> Result<f64, MechanicsError> {
    positive("elastic modulus", p.elastic_modulus_mpa)?;
    positive("length", p.length_mm)?;
    positive("width", p.width_mm)?;
    positive("thickness", p.thickness_mm)?;
    positive("deflection", p.deflection_mm)?;
    let i = p.width_mm * p.thickness_mm.powi(3) / 12.0;
    Ok(3.0 * p.elastic_modulus_mpa * i * p.deflection_mm / p.length_mm.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub modulus_mpa: f64,
    /// Root-mean-square force error of the fit in newtons.
    pub residual_rms_n: f64,
    /// Largest relative error among the measurements.
    pub max_relative_error: f64,
}

/// Least-squares modulus: E = Σ kᵢFᵢ / Σ kᵢ² with kᵢ the force per unit modulus.
pub fn calibrate_effective_modulus(measurements: &[(BeamGeometry, f64)]) -> Result<Calibration, MechanicsError> {
    if measurements.is_empty() {
        return Err(MechanicsError::NoMeasurements);
    }
    for (g, f) in measurements {
        positive("length", g.length_mm)?;
        positive("width", g.width_mm)?;
        positive("thickness", g.thickness_mm)?;
        positive("deflection", g.deflection_mm)?;
        positive("measured force", *f)?;
    }
    let (num, den) = measurements.iter().fold((0.0, 0.0), |(n, d), (g, f)| {
        let k = beam_compliance_factor(g);
        (n + k * f, d + k * k)
    });
    let e = num / den;
    let mut ss = 0.0;
    let mut worst: f64 = 0.0;
    for (g, f) in measurements {
        let r = e * beam_compliance_factor(g) - f;
        ss += r * r;
        worst = worst.max((r / f).abs());
    }
    Ok(Calibration {
        modulus_mpa: e,
        residual_rms_n: (ss / measurements.len() as f64).sqrt(),
        max_relative_error: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoilParams {
    pub shear_modulus_mpa: f64,
    pub wire_thickness_mm: f64,
    pub mean_diameter_mm: f64,
    pub active_turns: f64,
}

/// k = G·d⁴ / (8·D³·n) in N/mm.
pub fn coil_spring_rate(p: &CoilParams) -> Result<f64, MechanicsError> {
    positive("shear modulus", p.shear_modulus_mpa)?;
    positive("wire thickness", p.wire_thickness_mm)?;
    positive("mean diameter", p.mean_diameter_mm)?;
    positive("active turns", p.active_turns)?;
    if p.mean_diameter_mm <= p.wire_thickness_mm {
        return Err(MechanicsError::CoilTooTight { mean: p.mean_diameter_mm, wire: p.wire_thickness_mm });
    }
    Ok(p.shear_modulus_mpa * p.wire_thickness_mm.powi(4) / (8.0 * p.mean_diameter_mm.powi(3) * p.active_turns))
}

/// Surface strain at the root of a tip-loaded cantilever: 3·t·δ / (2·L²).
pub fn max_bending_strain(p: &BeamParams) -> Result<f64, MechanicsError> {
    positive("length", p.length_mm)?;
    positive("thickness", p.thickness_mm)?;
    if p.deflection_mm < 0.0 {
        return Err(MechanicsError::NonPositive { name: "deflection", value: p.deflection_mm });
    }
    Ok(3.0 * p.thickness_mm * p.deflection_mm / (2.0 * p.length_mm * p.length_mm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HingeParams {
    pub elastic_modulus_mpa: f64,
    pub width_mm: f64,
    pub thickness_mm: f64,
    pub length_mm: f64,
    pub lever_arm_mm: f64,
    pub deflection_mm: f64,
}

/// Small-angle flexure: rotational stiffness E·I/l, load applied at the lever arm.
pub fn hinge_activation_force(p: &HingeParams) -> Result<f64, MechanicsError> {
    positive("elastic modulus", p.elastic_modulus_mpa)?;
    positive("width", p.width_mm)?;
    positive("thickness", p.thickness_mm)?;
    positive("length", p.length_mm)?;
    positive("lever arm", p.lever_arm_mm)?;
    positive("deflection", p.deflection_mm)?;
    let i = p.width_mm * p.thickness_mm.powi(3) / 12.0;
    Ok(p.elastic_modulus_mpa * i * p.deflection_mm / (p.length_mm * p.lever_arm_mm.powi(2)))
}

/// Outer-fiber strain of the flexure, t·θ / (2·l).
pub fn hinge_strain(p: &HingeParams) -> Result<f64, MechanicsError> {
    positive("length", p.length_mm)?;
    positive("lever arm", p.lever_arm_mm)?;
    Ok(p.thickness_mm * (p.deflection_mm / p.lever_arm_mm) / (2.0 * p.length_mm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn beam(e: f64, l: f64, w: f64, t: f64, d: f64) -> BeamParams {
        BeamParams { elastic_modulus_mpa: e, length_mm: l, width_mm: w, thickness_mm: t, deflection_mm: d }
    }

    #[test]
    fn table_lookups() {
        let f = preset_activation_force(TravelClass::Short, StiffnessClass::High);
        assert_eq!((f.mean_lbf, f.tolerance_lbf), (2.51, 0.15));
        let f = preset_activation_force(TravelClass::Medium, StiffnessClass::Low);
        assert_eq!((f.mean_lbf, f.tolerance_lbf), (0.49, 0.05));
        let f = preset_activation_force(TravelClass::Long, StiffnessClass::High);
        assert_eq!((f.mean_lbf, f.tolerance_lbf), (1.46, 0.13));
        let t = force_table();
        assert_eq!(t.entries.len(), 6);
        assert_eq!(t.test_angle_deg, 20.0);
        for e in &t.entries {
            assert!(e.force.mean_lbf > 0.0);
            assert!(rel(e.force.mean_n, e.force.mean_lbf * 4.4482216153) < 1e-9);
        }
    }

    #[test]
    fn formula_examples() {
        let f = beam_activation_force(&beam(2000.0, 12.0, 8.0, 0.85, 0.5)).unwrap();
        assert!((f - 0.7108).abs() < 5e-5);
        let k = coil_spring_rate(&CoilParams {
            shear_modulus_mpa: 800.0,
            wire_thickness_mm: 1.2,
            mean_diameter_mm: 10.0,
            active_turns: 4.0,
        })
        .unwrap();
        assert!((k - 0.05184).abs() < 1e-12);
        let s = max_bending_strain(&beam(2000.0, 12.0, 8.0, 0.85, 0.5)).unwrap();
        assert!((s - 0.00443).abs() < 5e-6);
        assert_eq!(max_bending_strain(&beam(2000.0, 12.0, 8.0, 0.85, 0.0)).unwrap(), 0.0);
        assert!(beam_activation_force(&beam(2000.0, 12.0, 8.0, 0.0, 0.5)).is_err());
    }

    #[test]
    fn calibration_cases() {
        let g = BeamGeometry { length_mm: 12.0, width_mm: 8.0, thickness_mm: 0.85, deflection_mm: 0.5 };
        let f = beam_activation_force(&BeamParams::new(2000.0, g)).unwrap();
        let c = calibrate_effective_modulus(&[(g, f)]).unwrap();
        assert!(rel(c.modulus_mpa, 2000.0) < 1e-12);
        assert!(c.residual_rms_n < 1e-12);

        let g2 = BeamGeometry { deflection_mm: 1.5, thickness_mm: 1.13, ..g };
        let f2 = beam_activation_force(&BeamParams::new(2000.0, g2)).unwrap();
        let c = calibrate_effective_modulus(&[(g, f * 1.05), (g2, f2 * 0.95)]).unwrap();
        assert!((1800.0..=2200.0).contains(&c.modulus_mpa));
        assert!(calibrate_effective_modulus(&[]).is_err());
    }

    #[test]
    fn hinge_model_is_soft_and_safe() {
        let p = HingeParams {
            elastic_modulus_mpa: 2000.0,
            width_mm: 8.0,
            thickness_mm: 0.8,
            length_mm: 4.0,
            lever_arm_mm: 85.0,
            deflection_mm: 1.0,
        };
        let f = hinge_activation_force(&p).unwrap();
        let i = 8.0 * 0.512 / 12.0;
        assert!(rel(f, 2000.0 * i / (4.0 * 85.0 * 85.0)) < 1e-12);
        assert!(hinge_strain(&p).unwrap() < STRAIN_LIMIT);
    }

    proptest! {
        #[test]
        fn beam_scaling(e in 100.0f64..5000.0, l in 2.0f64..50.0, w in 1.0f64..20.0, t in 0.1f64..3.0, d in 0.05f64..5.0) {
            let f = beam_activation_force(&beam(e, l, w, t, d)).unwrap();
            prop_assert!(rel(beam_activation_force(&beam(e, l, w, 2.0 * t, d)).unwrap(), 8.0 * f) <= 1e-12);
            prop_assert!(rel(beam_activation_force(&beam(e, l, w, t, 2.0 * d)).unwrap(), 2.0 * f) <= 1e-12);
            prop_assert!(rel(beam_activation_force(&beam(e, 2.0 * l, w, t, d)).unwrap(), f / 8.0) <= 1e-12);
            let s = max_bending_strain(&beam(e, l, w, t, d)).unwrap();
            prop_assert!(rel(max_bending_strain(&beam(e, 2.0 * l, w, t, d)).unwrap(), s / 4.0) <= 1e-12);
        }

        #[test]
        fn coil_scaling(g in 100.0f64..2000.0, d in 0.2f64..2.0, dm in 5.0f64..30.0, n in 1.0f64..20.0) {
            let c = |g, d, dm, n| coil_spring_rate(&CoilParams {
                shear_modulus_mpa: g, wire_thickness_mm: d, mean_diameter_mm: dm, active_turns: n,
            }).unwrap();
            let k = c(g, d, dm, n);
            prop_assert!(rel(c(g, 2.0 * d, dm, n), 16.0 * k) <= 1e-12);
            prop_assert!(rel(c(g, d, 2.0 * dm, n), k / 8.0) <= 1e-12);
            prop_assert!(rel(c(g, d, dm, 2.0 * n), k / 2.0) <= 1e-12);
        }

        #[test]
        fn calibration_recovers_modulus(
            e in 500.0f64..4000.0,
            geoms in proptest::collection::vec((5.0f64..30.0, 2.0f64..15.0, 0.3f64..2.0, 0.1f64..3.0), 1..8)
        ) {
            let data: Vec<(BeamGeometry, f64)> = geoms.iter().map(|&(l, w, t, d)| {
                let g = BeamGeometry { length_mm: l, width_mm: w, thickness_mm: t, deflection_mm: d };
                (g, beam_activation_force(&BeamParams::new(e, g)).unwrap())
            }).collect();
            let c = calibrate_effective_modulus(&data).unwrap();
            prop_assert!(rel(c.modulus_mpa, e) <= 1e-9);
        }
    }
}
