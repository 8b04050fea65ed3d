//! Microcontroller targets: pin tables, socket pad ring and pin allocation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Flora,
    Mega,
    Uno,
}

impl ControllerKind {
    pub const NAMES: &'static str = "flora|mega|uno";

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flora" => Some(Self::Flora),
            "mega" => Some(Self::Mega),
            "uno" => Some(Self::Uno),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Flora => "flora",
            Self::Mega => "mega",
            Self::Uno => "uno",
        }
    }

    pub fn profile(self) -> &'static ControllerProfile {
        match self {
            Self::Flora => &FLORA,
            Self::Mega => &MEGA,
            Self::Uno => &UNO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerTarget {
    pub kind: ControllerKind,
    pub socket: bool,
}

impl Default for ControllerTarget {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Uno,
            socket: false,
        }
    }
}

#[derive(Debug)]
pub struct ControllerProfile {
    pub vcc_volts: f64,
    pub adc_bits: u32,
    pub power_pin: &'static str,
    pub ground_pin: &'static str,
    pub digital_pins: &'static [&'static str],
    pub analog_pins: &'static [&'static str],
    /// Analog-capable pins are drawn from the digital list instead of a separate bank.
    pub analog_shared: bool,
    pub socket_ring: Option<&'static [&'static str]>,
}

/// Pads around the FLORA edge, counterclockwise from the rear-most position.
pub const FLORA_RING: [&str; 14] = [
    "VBATT", "GND", "3V3", "D10", "D9", "D6", "D12", "GND2", "SCL", "SDA", "RX", "TX", "VBUS",
    "GND3",
];

static FLORA: ControllerProfile = ControllerProfile {
    vcc_volts: 3.3,
    adc_bits: 10,
    power_pin: "3V3",
    ground_pin: "GND",
    digital_pins: &["D10", "D9", "D6", "D12", "SCL", "SDA", "RX", "TX"],
    analog_pins: &["D6", "D9", "D10", "D12"],
    analog_shared: true,
    socket_ring: Some(&FLORA_RING),
};

static UNO: ControllerProfile = ControllerProfile {
    vcc_volts: 5.0,
    adc_bits: 10,
    power_pin: "5V",
    ground_pin: "GND",
    digital_pins: &[
        "D2", "D3", "D4", "D5", "D6", "D7", "D8", "D9", "D10", "D11", "D12", "D13",
    ],
    analog_pins: &["A0", "A1", "A2", "A3", "A4", "A5"],
    analog_shared: false,
    socket_ring: None,
};

static MEGA: ControllerProfile = ControllerProfile {
    vcc_volts: 5.0,
    adc_bits: 10,
    power_pin: "5V",
    ground_pin: "GND",
    digital_pins: &[
        "D2", "D3", "D4", "D5", "D6", "D7", "D8", "D9", "D10", "D11", "D12", "D13", "D14", "D15",
        "D16", "D17", "D18", "D19", "D20", "D21", "D22", "D23", "D24", "D25", "D26", "D27", "D28",
        "D29", "D30", "D31", "D32", "D33", "D34", "D35", "D36", "D37", "D38", "D39", "D40", "D41",
        "D42", "D43", "D44", "D45", "D46", "D47", "D48", "D49", "D50", "D51", "D52", "D53",
    ],
    analog_pins: &[
        "A0", "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12", "A13",
        "A14", "A15",
    ],
    analog_shared: false,
    socket_ring: None,
};

/// Electrode channels on the capacitance breakout header.
pub const CAP_CHANNELS: usize = 12;

pub fn cap_channel_name(i: usize) -> String {
    format!("CAP{i}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pin budget exceeded: no pin left for {}", overflow.join(", "))]
pub struct PinBudgetError {
    pub overflow: Vec<String>,
}

/// Assigns controller pins; analog nets claim analog-capable pins before digital nets.
pub fn allocate_pins(
    kind: ControllerKind,
    digital_nets: &[String],
    analog_nets: &[String],
) -> Result<BTreeMap<String, String>, PinBudgetError> {
    let prof = kind.profile();
    let mut map = BTreeMap::new();
    let mut overflow = Vec::new();
    let mut used: Vec<&str> = Vec::new();

    let mut analog_free = prof.analog_pins.iter();
    for net in analog_nets {
        match analog_free.next() {
            Some(pin) => {
                used.push(pin);
                map.insert(net.clone(), pin.to_string());
            }
            None => overflow.push(net.clone()),
        }
    }
    let mut digital_free = prof
        .digital_pins
        .iter()
        .filter(|p| !(prof.analog_shared && used.contains(p)));
    for net in digital_nets {
        match digital_free.next() {
            Some(pin) => {
                map.insert(net.clone(), pin.to_string());
            }
            None => overflow.push(net.clone()),
        }
    }
    if overflow.is_empty() {
        Ok(map)
    } else {
        Err(PinBudgetError { overflow })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn flora_shares_analog_pins_with_digital() {
        let map = allocate_pins(ControllerKind::Flora, &names("d", 4), &names("a", 2)).unwrap();
        assert_eq!(map["a0"], "D6");
        assert_eq!(map["a1"], "D9");
        assert_eq!(map["d0"], "D10");
        assert_eq!(map["d1"], "D12");
        let err = allocate_pins(ControllerKind::Flora, &names("d", 7), &names("a", 2)).unwrap_err();
        assert_eq!(err.overflow, vec!["d6".to_string()]);
    }

    #[test]
    fn mega_fits_a_full_alphabet() {
        let map = allocate_pins(ControllerKind::Mega, &names("k", 27), &[]).unwrap();
        assert_eq!(map.len(), 27);
        assert!(allocate_pins(ControllerKind::Uno, &names("k", 13), &[]).is_err());
    }
}
