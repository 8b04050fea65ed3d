//! Trace resistance, resistor-ladder design and the analog key capacitance model.

use serde::Serialize;
use thiserror::Error;

pub const EPSILON_0: f64 = 8.8541878128e-12;
pub const DEFAULT_PULLDOWN_OHMS: f64 = 10_000.0;
pub const DEFAULT_MIN_SEPARATION_COUNTS: u32 = 20;
pub const LADDER_MIN_LENGTH_MM: f64 = 10.0;
pub const LADDER_MAX_LENGTH_MM: f64 = 500.0;
/// Largest ladder `design_analog_ladder` accepts at 10 bits, 10 kΩ pull-down
/// and 20-count separation with the standard trace.
pub const MAX_LADDER_KEYS: usize = 36;
pub const REST_CLEARANCE_MM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElectricalError {
    #[error("cross-section area must be positive, got {0} mm^2")]
    NonPositiveArea(f64),
    #[error("length must be non-negative, got {0} mm")]
    NegativeLength(f64),
    #[error("resistance must be positive, got {0} ohm")]
    NonPositiveResistance(f64),
    #[error("plate gap must be positive, got {0} mm")]
    NonPositiveGap(f64),
    #[error("a ladder needs at least one key")]
    EmptyLadder,
    #[error("minimum separation must be at least 1 count")]
    ZeroSeparation,
    #[error("{requested} keys cannot be separated by {separation} counts; at most {max_keys} fit")]
    InfeasibleLadder { requested: usize, separation: u32, max_keys: usize },
    #[error("key `{0}` is not part of the ladder")]
    UnknownKey(String),
}

/// Volume resistivity of the conductive filament.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaterialElectrical {
    pub resistivity_ohm_cm: f64,
}

impl Default for MaterialElectrical {
    fn default() -> Self {
        Self { resistivity_ohm_cm: 200.0 }
    }
}

/// R = ρ·L/A, with L in mm and A in mm².
pub fn trace_resistance(length_mm: f64, cross_section_mm2: f64, material: &MaterialElectrical) -> Result<f64, ElectricalError> {
    if cross_section_mm2 <= 0.0 {
        return Err(ElectricalError::NonPositiveArea(cross_section_mm2));
    }
    if length_mm < 0.0 {
        return Err(ElectricalError::NegativeLength(length_mm));
    }
    // Ω·cm · (mm / 10) / (mm² / 100)
    Ok(material.resistivity_ohm_cm * length_mm * 10.0 / cross_section_mm2)
}

/// Inverse of `trace_resistance`: L = R·A/ρ in mm.
pub fn length_for_resistance(ohms: f64, cross_section_mm2: f64, material: &MaterialElectrical) -> Result<f64, ElectricalError> {
    if ohms <= 0.0 {
        return Err(ElectricalError::NonPositiveResistance(ohms));
    }
    if cross_section_mm2 <= 0.0 {
        return Err(ElectricalError::NonPositiveArea(cross_section_mm2));
    }
    Ok(ohms * cross_section_mm2 / (10.0 * material.resistivity_ohm_cm))
}

fn full_scale(bits: u32) -> f64 {
    f64::from((1u32 << bits) - 1)
}

/// Unrounded divider reading for a key of resistance `r` over the pull-down.
fn divider_level(bits: u32, pulldown: f64, r: f64) -> f64 {
    full_scale(bits) * pulldown / (pulldown + r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEntry {
    pub key: String,
    pub length_mm: f64,
    pub resistance_ohms: f64,
    pub counts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderDesign {
    pub vcc_volts: f64,
    pub pulldown_ohms: f64,
    pub adc_bits: u32,
    pub min_separation_counts: u32,
    /// Sorted by resistance, ascending.
    pub entries: Vec<LadderEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderParams {
    pub vcc_volts: f64,
    pub pulldown_ohms: f64,
    pub adc_bits: u32,
    pub min_separation_counts: u32,
    pub cross_section_mm2: f64,
    pub material: MaterialElectrical,
}

impl Default for LadderParams {
    fn default() -> Self {
        Self {
            vcc_volts: 5.0,
            pulldown_ohms: DEFAULT_PULLDOWN_OHMS,
            adc_bits: 10,
            min_separation_counts: DEFAULT_MIN_SEPARATION_COUNTS,
            cross_section_mm2: 2.54 * 2.54,
            material: MaterialElectrical::default(),
        }
    }
}

/// Count range reachable with lengths in [LADDER_MIN_LENGTH_MM, LADDER_MAX_LENGTH_MM].
fn count_range(p: &LadderParams) -> Result<(u32, u32), ElectricalError> {
    let r_min = trace_resistance(LADDER_MIN_LENGTH_MM, p.cross_section_mm2, &p.material)?;
    let r_max = trace_resistance(LADDER_MAX_LENGTH_MM, p.cross_section_mm2, &p.material)?;
    let hi = divider_level(p.adc_bits, p.pulldown_ohms, r_min).floor() as u32;
    let lo = divider_level(p.adc_bits, p.pulldown_ohms, r_max).ceil() as u32;
    Ok((hi, lo))
}

pub fn max_ladder_keys(p: &LadderParams) -> Result<usize, ElectricalError> {
    if p.min_separation_counts == 0 {
        return Err(ElectricalError::ZeroSeparation);
    }
    let (hi, lo) = count_range(p)?;
    Ok(((hi - lo) / p.min_separation_counts) as usize + 1)
}

/// Assigns each key a target reading spaced evenly between the readings of
/// the shortest and longest allowed traces, then inverts the divider to a
/// trace length.
pub fn design_analog_ladder(key_ids: &[String], p: &LadderParams) -> Result<LadderDesign, ElectricalError> {
    if key_ids.is_empty() {
        return Err(ElectricalError::EmptyLadder);
    }
    let max_keys = max_ladder_keys(p)?;
    let n = key_ids.len();
    if n > max_keys {
        return Err(ElectricalError::InfeasibleLadder {
            requested: n,
            separation: p.min_separation_counts,
            max_keys,
        });
    }
    let (hi, lo) = count_range(p)?;
    let span = f64::from(hi - lo);
    let fs = full_scale(p.adc_bits);
    let mut entries = Vec::with_capacity(n);
    for (i, id) in key_ids.iter().enumerate() {
        let target = if n == 1 {
            hi
        } else {
            hi - (i as f64 * span / (n - 1) as f64).floor() as u32
        };
        let r = p.pulldown_ohms * (fs / f64::from(target) - 1.0);
        let length_mm = length_for_resistance(r, p.cross_section_mm2, &p.material)?;
        entries.push(LadderEntry {
            key: id.clone(),
            length_mm,
            resistance_ohms: r,
            counts: divider_level(p.adc_bits, p.pulldown_ohms, r).round() as u32,
        });
    }
    entries.sort_by(|a, b| a.resistance_ohms.total_cmp(&b.resistance_ohms));
    Ok(LadderDesign {
        vcc_volts: p.vcc_volts,
        pulldown_ohms: p.pulldown_ohms,
        adc_bits: p.adc_bits,
        min_separation_counts: p.min_separation_counts,
        entries,
    })
}

impl LadderDesign {
    /// Evaluates a ladder with given trace lengths; no separation is enforced.
    pub fn from_lengths(keys: &[(String, f64)], p: &LadderParams) -> Result<LadderDesign, ElectricalError> {
        let mut entries = Vec::with_capacity(keys.len());
        for (id, len) in keys {
            let r = trace_resistance(*len, p.cross_section_mm2, &p.material)?;
            entries.push(LadderEntry {
                key: id.clone(),
                length_mm: *len,
                resistance_ohms: r,
                counts: divider_level(p.adc_bits, p.pulldown_ohms, r).round() as u32,
            });
        }
        entries.sort_by(|a, b| a.resistance_ohms.total_cmp(&b.resistance_ohms));
        Ok(LadderDesign {
            vcc_volts: p.vcc_volts,
            pulldown_ohms: p.pulldown_ohms,
            adc_bits: p.adc_bits,
            min_separation_counts: p.min_separation_counts,
            entries,
        })
    }

    /// Smallest count difference between any two keys, `None` below two keys.
    pub fn min_pairwise_separation(&self) -> Option<u32> {
        let c: Vec<u32> = self.entries.iter().map(|e| e.counts).collect();
        let mut best: Option<u32> = None;
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                let d = c[i].abs_diff(c[j]);
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

/// ADC reading with `pressed` held down; `None` reads the pull-down alone.
pub fn predict_adc_counts(design: &LadderDesign, pressed: Option<&str>) -> Result<u32, ElectricalError> {
    let Some(key) = pressed else { return Ok(0) };
    let e = design
        .entries
        .iter()
        .find(|e| e.key == key)
        .ok_or_else(|| ElectricalError::UnknownKey(key.to_string()))?;
    Ok(divider_level(design.adc_bits, design.pulldown_ohms, e.resistance_ohms).round() as u32)
}

/// Parallel-plate capacitance C = ε0·εr·A/d in farads.
pub fn plate_capacitance(area_mm2: f64, gap_mm: f64, epsilon_r: f64) -> Result<f64, ElectricalError> {
    if gap_mm <= 0.0 {
        return Err(ElectricalError::NonPositiveGap(gap_mm));
    }
    Ok(EPSILON_0 * epsilon_r * (area_mm2 * 1e-6) / (gap_mm * 1e-3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PressState {
    None,
    Hover,
    Partial,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitanceModel {
    pub electrode_area_mm2: f64,
    pub gap_free_mm: f64,
    pub rest_clearance_mm: f64,
    pub epsilon_r: f64,
    /// (hover, partial, full) in farads.
    pub thresholds: (f64, f64, f64),
}

impl CapacitanceModel {
    /// Thresholds are read off the key's own curve at the free gap, half the
    /// free gap and the fully pressed clearance.
    pub fn for_key(electrode_area_mm2: f64, travel_mm: f64, epsilon_r: f64) -> Result<Self, ElectricalError> {
        let gap_free_mm = travel_mm + REST_CLEARANCE_MM;
        let c = |d| plate_capacitance(electrode_area_mm2, d, epsilon_r);
        Ok(Self {
            electrode_area_mm2,
            gap_free_mm,
            rest_clearance_mm: REST_CLEARANCE_MM,
            epsilon_r,
            thresholds: (c(gap_free_mm)?, c(gap_free_mm / 2.0)?, c(REST_CLEARANCE_MM)?),
        })
    }

    /// Samples (travel mm, capacitance F) from rest to full press.
    pub fn curve(&self, samples: usize) -> Vec<(f64, f64)> {
        let travel = self.gap_free_mm - self.rest_clearance_mm;
        (0..samples.max(2))
            .map(|i| {
                let x = travel * i as f64 / (samples.max(2) - 1) as f64;
                let gap = self.gap_free_mm - x;
                (x, EPSILON_0 * self.epsilon_r * self.electrode_area_mm2 * 1e-6 / (gap * 1e-3))
            })
            .collect()
    }
}

/// Bucketing with closed lower bounds.
pub fn classify_press(cap_delta: f64, model: &CapacitanceModel) -> PressState {
    let (hover, partial, full) = model.thresholds;
    if cap_delta >= full {
        PressState::Full
    } else if cap_delta >= partial {
        PressState::Partial
    } else if cap_delta >= hover {
        PressState::Hover
    } else {
        PressState::None
    }
}
