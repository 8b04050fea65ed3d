use std::collections::BTreeSet;
use std::fmt::Write;

use super::*;

fn num(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('e') {
        format!("{v:.9}")
    } else {
        s
    }
}

fn attrs(k: &KeyInstance) -> String {
    let mut s = format!("kind {} travel {} stiffness {}", k.kind, k.travel, k.stiffness);
    match &k.legend.content {
        LegendContent::TextGlyph { ch } => {
            let _ = write!(s, " legend text {ch}");
        }
        LegendContent::Braille { ch } => {
            let _ = write!(s, " legend braille {ch}");
        }
        LegendContent::Blank | LegendContent::RawPolygons { .. } => s.push_str(" legend blank"),
    }
    if let Some(l) = k.length_mm {
        let _ = write!(s, " length {}", num(l));
    }
    if let Some(g) = &k.ladder_group {
        let _ = write!(s, " ladder {g}");
    }
    s
}

/// Renders the normalized text form: every attribute explicit, no `default`
/// directives. Parsing the output reproduces the same spec.
pub fn serialize_spec(spec: &DeviceSpec) -> String {
    let mut out = String::new();
    let _ = write!(out, "device {}", spec.name);
    if let Some(p) = spec.row_pitch_mm {
        let _ = write!(out, " rowpitch {}", num(p));
    }
    let _ = writeln!(
        out,
        " traces {}",
        if spec.traces_exposed { "exposed" } else { "embedded" }
    );
    let _ = writeln!(
        out,
        "controller {}{}",
        spec.controller.kind.as_str(),
        if spec.controller.socket { " socket" } else { "" }
    );
    let _ = writeln!(out, "shell {}", spec.shell_policy);

    let mut rows_done = BTreeSet::new();
    let mut refinements = String::new();
    for k in &spec.keys {
        match k.position {
            Position::Grid { row, .. } => {
                if rows_done.insert(row) {
                    let members: Vec<&KeyInstance> = spec
                        .keys
                        .iter()
                        .filter(|m| matches!(m.position, Position::Grid { row: r, .. } if r == row))
                        .collect();
                    let mut line = String::new();
                    let mut prev: Option<f64> = None;
                    for m in &members {
                        let Position::Grid { offset_mm, .. } = m.position else { continue };
                        match prev {
                            None => {
                                let _ = write!(line, "row {row} offset {} keys", num(offset_mm));
                            }
                            Some(p) if offset_mm != p => {
                                let _ = write!(line, " +{}", num(offset_mm - p));
                            }
                            Some(_) => {}
                        }
                        prev = Some(offset_mm);
                        let _ = write!(line, " {}", m.id);
                    }
                    let _ = writeln!(out, "{line}");
                }
                let _ = writeln!(refinements, "key {} {}", k.id, attrs(k));
            }
            Position::Explicit { x_mm, y_mm, rotation_deg, .. } => {
                let _ = writeln!(
                    out,
                    "key {} {} at {} {} rot {}",
                    k.id,
                    attrs(k),
                    num(x_mm),
                    num(y_mm),
                    num(rotation_deg)
                );
            }
        }
    }
    out.push_str(&refinements);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_device_spec;

    #[test]
    fn normalized_form_is_a_fixed_point() {
        let src = "device demo\ncontroller flora socket\ndefault travel long\nrow 1 offset 2.5 keys Q +7 W\nkey W legend braille w ladder g\nkey Z kind analog at 40 -30 rot 15\nkey P kind piano length 60 at 0 -90\n";
        let first = parse_device_spec(src).unwrap().spec;
        let text = serialize_spec(&first);
        let second = parse_device_spec(&text).unwrap().spec;
        assert_eq!(serialize_spec(&second), text);
        let ids: Vec<&str> = second.keys.iter().map(|k| k.id.as_str()).collect();
        assert_eq!(ids, vec!["Q", "W", "Z", "P"]);
        assert_eq!(
            second.keys.iter().map(|k| k.center_mm).collect::<Vec<_>>(),
            first.keys.iter().map(|k| k.center_mm).collect::<Vec<_>>()
        );
    }
}
