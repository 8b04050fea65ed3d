//! Device layout documents: parsing, validation, default resolution and the
//! normalized text form.

mod parse;
mod serialize;
mod validate;

pub use parse::{parse_device_spec, Parsed};
pub use serialize::serialize_spec;
pub use validate::validate_spec;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerTarget;
use crate::geom::Vec2;
use crate::parts;

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// The accepted spellings joined with `|`.
            pub fn choices() -> String {
                Self::ALL.iter().map(|v| v.as_str()).collect::<Vec<_>>().join("|")
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(KeyKind { Digital => "digital", Analog => "analog", Piano => "piano" });
keyword_enum!(TravelClass { Short => "short", Medium => "medium", Long => "long" });
keyword_enum!(StiffnessClass { Low => "low", High => "high" });
keyword_enum!(ShellPolicy { Rectangle => "rectangle", Hull => "hull", None => "none" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LegendContent {
    Blank,
    TextGlyph { ch: char },
    Braille { ch: char },
    /// Outlines in keycap-local millimeters, centered on the cap.
    RawPolygons { polygons: Vec<Vec<Vec2>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendSpec {
    pub content: LegendContent,
    pub relief_height_mm: f64,
}

impl LegendSpec {
    pub fn blank() -> Self {
        Self {
            content: LegendContent::Blank,
            relief_height_mm: 0.0,
        }
    }

    pub fn text(ch: char) -> Self {
        Self {
            content: LegendContent::TextGlyph { ch },
            relief_height_mm: parts::LEGEND_RELIEF_MM,
        }
    }

    pub fn braille(ch: char) -> Self {
        Self {
            content: LegendContent::Braille { ch },
            relief_height_mm: parts::BRAILLE_RELIEF_MM,
        }
    }

    pub fn is_blank(&self) -> bool {
        matches!(self.content, LegendContent::Blank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Position {
    /// `col` counts keys within the row; `offset_mm` is the row offset plus any
    /// declared gaps preceding the key.
    Grid { row: i64, col: usize, offset_mm: f64 },
    Explicit {
        x_mm: f64,
        y_mm: f64,
        rotation_deg: f64,
        row: Option<i64>,
    },
}

impl Position {
    pub fn row(&self) -> Option<i64> {
        match *self {
            Position::Grid { row, .. } => Some(row),
            Position::Explicit { row, .. } => row,
        }
    }

    pub fn rotation_deg(&self) -> f64 {
        match *self {
            Position::Grid { .. } => 0.0,
            Position::Explicit { rotation_deg, .. } => rotation_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInstance {
    pub id: String,
    pub kind: KeyKind,
    pub travel: TravelClass,
    pub stiffness: StiffnessClass,
    pub legend: LegendSpec,
    pub position: Position,
    pub ladder_group: Option<String>,
    /// Lever length for piano keys.
    pub length_mm: Option<f64>,
    /// Resolved footprint center in device millimeters.
    pub center_mm: Option<Vec2>,
    /// Source line of the declaration; 0 when built programmatically.
    pub line: usize,
}

impl KeyInstance {
    pub fn new(id: impl Into<String>, kind: KeyKind, position: Position) -> Self {
        Self {
            id: id.into(),
            kind,
            travel: DEFAULT_TRAVEL,
            stiffness: DEFAULT_STIFFNESS,
            legend: LegendSpec::blank(),
            position,
            ladder_group: None,
            length_mm: None,
            center_mm: None,
            line: 0,
        }
    }

    /// Footprint (width, depth) in millimeters.
    pub fn footprint(&self) -> (f64, f64) {
        parts::footprint_size(
            self.kind,
            self.length_mm.unwrap_or(parts::PIANO_DEFAULT_LENGTH_MM),
        )
    }

    /// Whether the key switches a return line (digital and piano keys).
    pub fn is_switch(&self) -> bool {
        matches!(self.kind, KeyKind::Digital | KeyKind::Piano)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    pub keys: Vec<KeyInstance>,
    pub controller: ControllerTarget,
    pub shell_policy: ShellPolicy,
    pub row_pitch_mm: Option<f64>,
    /// Floor-layer traces left visible on the underside instead of covered by a skin.
    pub traces_exposed: bool,
}

pub const DEFAULT_KIND: KeyKind = KeyKind::Digital;
pub const DEFAULT_TRAVEL: TravelClass = TravelClass::Medium;
pub const DEFAULT_STIFFNESS: StiffnessClass = StiffnessClass::High;

impl DeviceSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            keys: Vec::new(),
            controller: ControllerTarget::default(),
            shell_policy: ShellPolicy::Rectangle,
            row_pitch_mm: None,
            traces_exposed: false,
        }
    }

    pub fn key(&self, id: &str) -> Option<&KeyInstance> {
        self.keys.iter().find(|k| k.id == id)
    }

    /// Ladder group names in first-appearance order.
    pub fn ladder_groups(&self) -> Vec<String> {
        let mut groups: Vec<String> = Vec::new();
        for k in &self.keys {
            if let Some(g) = &k.ladder_group {
                if !groups.contains(g) {
                    groups.push(g.clone());
                }
            }
        }
        groups
    }

    pub fn ladder_members(&self, group: &str) -> Vec<&KeyInstance> {
        self.keys
            .iter()
            .filter(|k| k.ladder_group.as_deref() == Some(group))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// 1-based source line; 0 for whole-document checks.
    pub line: usize,
    /// 1-based column of the offending token; 0 when not applicable.
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn warning(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if self.line > 0 {
            write!(f, "line {}:{}: {sev}: {}", self.line, self.column, self.message)
        } else {
            write!(f, "{sev}: {}", self.message)
        }
    }
}

pub(crate) fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (a.line, a.column)
            .cmp(&(b.line, b.column))
            .then(a.severity.cmp(&b.severity))
            .then(a.message.cmp(&b.message))
    });
}

/// Row y-pitch used when the document does not set one: tallest grid key plus
/// the joined-base gap.
pub fn derived_row_pitch(spec: &DeviceSpec) -> f64 {
    let depth = spec
        .keys
        .iter()
        .filter(|k| matches!(k.position, Position::Grid { .. }))
        .map(|k| k.footprint().1)
        .fold(parts::KEYCAP_WIDTH_MM, f64::max);
    depth + parts::JOINED_BASE_GAP_MM
}

/// Makes every optional field concrete. Applying it twice is the identity.
pub fn resolve_defaults(mut spec: DeviceSpec) -> DeviceSpec {
    for k in &mut spec.keys {
        if k.kind == KeyKind::Piano && k.length_mm.is_none() {
            k.length_mm = Some(parts::PIANO_DEFAULT_LENGTH_MM);
        }
    }
    let row_pitch = match spec.row_pitch_mm {
        Some(p) => p,
        None => derived_row_pitch(&spec),
    };
    spec.row_pitch_mm = Some(row_pitch);
    let col_pitch = parts::KEYCAP_WIDTH_MM + parts::JOINED_BASE_GAP_MM;
    for k in &mut spec.keys {
        if k.center_mm.is_none() {
            k.center_mm = Some(match k.position {
                Position::Grid { row, col, offset_mm } => {
                    Vec2::new(col as f64 * col_pitch + offset_mm, -(row as f64) * row_pitch)
                }
                Position::Explicit { x_mm, y_mm, .. } => Vec2::new(x_mm, y_mm),
            });
        }
    }
    spec
}
