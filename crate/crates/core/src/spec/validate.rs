use std::collections::BTreeMap;

use super::*;
use crate::controller::{allocate_pins, ControllerKind, CAP_CHANNELS};
use crate::geom::convex_overlap;
use crate::parts::{self, legend_polygons};
use crate::placement::footprint_polygon;

/// Returns every problem preventing compilation; an empty list means the layout
/// is compilable. Warnings may be present in a compilable layout.
pub fn validate_spec(spec: &DeviceSpec) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    if spec.keys.is_empty() {
        d.push(Diagnostic::error(0, 0, "device declares no keys"));
    }

    let mut first_seen: BTreeMap<&str, usize> = BTreeMap::new();
    for k in &spec.keys {
        if let Some(prev) = first_seen.get(k.id.as_str()) {
            d.push(Diagnostic::error(
                k.line,
                0,
                format!("duplicate key id `{}` (first declared on line {prev})", k.id),
            ));
        } else {
            first_seen.insert(&k.id, k.line);
        }
    }

    for k in &spec.keys {
        check_key(spec, k, &mut d);
    }

    if spec.controller.socket && spec.controller.kind != ControllerKind::Flora {
        d.push(Diagnostic::error(
            0,
            0,
            format!(
                "a printed socket is only available for flora, not {}",
                spec.controller.kind.as_str()
            ),
        ));
    }

    let switches: Vec<String> = spec
        .keys
        .iter()
        .filter(|k| k.is_switch() && k.ladder_group.is_none())
        .map(|k| k.id.clone())
        .collect();
    let groups = spec.ladder_groups();
    if let Err(e) = allocate_pins(spec.controller.kind, &switches, &groups) {
        d.push(Diagnostic::error(
            0,
            0,
            format!(
                "{} has too few pins: {} digital key(s) and {} ladder group(s) requested; no pin left for {}",
                spec.controller.kind.as_str(),
                switches.len(),
                groups.len(),
                e.overflow.join(", ")
            ),
        ));
    }
    let analog = spec.keys.iter().filter(|k| k.kind == KeyKind::Analog).count();
    if analog > CAP_CHANNELS {
        d.push(Diagnostic::error(
            0,
            0,
            format!("{analog} analog keys exceed the {CAP_CHANNELS} capacitance channels"),
        ));
    }

    let mut rows: BTreeMap<i64, (bool, bool)> = BTreeMap::new();
    for k in &spec.keys {
        if let Some(r) = k.position.row() {
            let e = rows.entry(r).or_default();
            match k.position {
                Position::Grid { .. } => e.0 = true,
                Position::Explicit { .. } => e.1 = true,
            }
        }
    }
    for (r, (grid, explicit)) in rows {
        if grid && explicit {
            d.push(Diagnostic::error(0, 0, format!("row {r} mixes grid and explicit keys")));
        }
    }

    let polys: Vec<_> = spec
        .keys
        .iter()
        .map(|k| {
            k.center_mm.map(|c| {
                let (w, h) = k.footprint();
                footprint_polygon(c, w, h, k.position.rotation_deg())
            })
        })
        .collect();
    for i in 0..spec.keys.len() {
        for j in (i + 1)..spec.keys.len() {
            if let (Some(a), Some(b)) = (&polys[i], &polys[j]) {
                if convex_overlap(a, b) {
                    d.push(Diagnostic::error(
                        spec.keys[j].line,
                        0,
                        format!(
                            "footprints of `{}` and `{}` overlap",
                            spec.keys[i].id, spec.keys[j].id
                        ),
                    ));
                }
            }
        }
    }

    sort_diagnostics(&mut d);
    d
}

fn check_key(spec: &DeviceSpec, k: &KeyInstance, d: &mut Vec<Diagnostic>) {
    let line = k.line;
    if let Position::Explicit { rotation_deg, .. } = k.position {
        if !(0.0..360.0).contains(&rotation_deg) {
            d.push(Diagnostic::error(
                line,
                0,
                format!("rotation {rotation_deg} of `{}` must lie in [0, 360)", k.id),
            ));
        }
    }
    match k.kind {
        KeyKind::Piano => {
            if k.travel != TravelClass::Medium {
                d.push(Diagnostic::error(
                    line,
                    0,
                    format!("piano key `{}` has a fixed contact gap; travel must be medium", k.id),
                ));
            }
            let len = k.length_mm.unwrap_or(parts::PIANO_DEFAULT_LENGTH_MM);
            if !(parts::PIANO_MIN_LENGTH_MM..=parts::PIANO_MAX_LENGTH_MM).contains(&len) {
                d.push(Diagnostic::error(
                    line,
                    0,
                    format!("piano key `{}` length {len} mm outside [40, 160]", k.id),
                ));
            }
        }
        _ => {
            if k.length_mm.is_some() {
                d.push(Diagnostic::warning(
                    line,
                    0,
                    format!("length is only meaningful for piano keys; ignored on `{}`", k.id),
                ));
            }
        }
    }
    if k.ladder_group.is_some() && !k.is_switch() {
        d.push(Diagnostic::error(
            line,
            0,
            format!("analog key `{}` cannot join a resistor ladder", k.id),
        ));
    }
    if let Some(g) = &k.ladder_group {
        if spec.ladder_members(g).len() > crate::electrical::MAX_LADDER_KEYS {
            d.push(Diagnostic::error(line, 0, format!("ladder `{g}` has too many keys")));
        }
    }
    if !k.legend.is_blank() && k.legend.relief_height_mm <= 0.0 {
        d.push(Diagnostic::error(
            line,
            0,
            format!("legend relief of `{}` must be positive", k.id),
        ));
    }
    if let Err(e) = legend_polygons(&k.legend, parts::KEYCAP_WIDTH_MM) {
        d.push(Diagnostic::error(line, 0, format!("legend of `{}`: {e}", k.id)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_device_spec;

    fn diags(src: &str) -> Vec<Diagnostic> {
        validate_spec(&parse_device_spec(src).unwrap().spec)
    }

    #[test]
    fn duplicate_ids() {
        let d = diags("key A at 0 0\nkey A at 40 0\n");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("duplicate key id"));
    }

    #[test]
    fn short_travel_is_fine() {
        assert!(diags("key A travel short at 0 0\n").is_empty());
    }

    #[test]
    fn explicit_overlap() {
        let d = diags("key A at 0 0\nkey B at 10 5\n");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("overlap"));
        assert!(diags("key A at 0 0\nkey B at 15.5 0\n").is_empty());
    }

    #[test]
    fn pin_budget() {
        let mut src = String::from("controller uno\nrow 0 keys");
        for i in 0..13 {
            src.push_str(&format!(" K{i}"));
        }
        src.push('\n');
        let d = diags(&src);
        assert!(d.iter().any(|x| x.message.contains("too few pins")), "{d:?}");
        src.push_str("key K0 ladder g\nkey K1 ladder g\n");
        assert!(diags(&src).is_empty());
    }

    #[test]
    fn rotation_range_and_piano_length() {
        assert!(!diags("key A at 0 0 rot 360\n").is_empty());
        assert!(!diags("key P kind piano length 200 at 0 0\n").is_empty());
        assert!(diags("key P kind piano length 40 at 0 0\n").is_empty());
    }

    #[test]
    fn unsupported_legend_character() {
        let d = diags("key A legend text % at 0 0\n");
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn socket_needs_flora() {
        assert!(!diags("controller uno socket\nkey A at 0 0\n").is_empty());
        assert!(diags("controller flora socket\nkey A at 0 0\n").is_empty());
    }
}
