use std::collections::BTreeSet;

use super::*;
use crate::controller::{ControllerKind, ControllerTarget};

/// A successfully parsed document plus any warnings raised on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub spec: DeviceSpec,
    pub warnings: Vec<Diagnostic>,
}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in body.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push(Tok { text: &body[s..i], col: body[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push(Tok { text: &body[s..], col: body[..s].chars().count() + 1 });
    }
    toks
}

pub(crate) fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Decimal number with an optional sign and `.` fraction; no exponents.
pub(crate) fn parse_number(s: &str) -> Option<f64> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let int_ok = int.chars().all(|c| c.is_ascii_digit());
    let frac_ok = frac.is_none_or(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_digit()));
    if int.is_empty() && frac.is_none() || !int_ok || !frac_ok {
        return None;
    }
    s.parse().ok()
}

#[derive(Default)]
struct Defaults {
    kind: Option<KeyKind>,
    travel: Option<TravelClass>,
    stiffness: Option<StiffnessClass>,
}

#[derive(Default)]
struct KeyAttrs {
    kind: Option<KeyKind>,
    travel: Option<TravelClass>,
    stiffness: Option<StiffnessClass>,
    legend: Option<LegendSpec>,
    at: Option<(f64, f64, f64)>,
    ladder: Option<String>,
    length: Option<f64>,
}

struct Parser {
    diags: Vec<Diagnostic>,
    spec: DeviceSpec,
    defaults: Defaults,
    seen: BTreeSet<&'static str>,
    rows: BTreeSet<i64>,
    refined: BTreeSet<String>,
    line: usize,
}

impl Parser {
    fn err(&mut self, col: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(self.line, col, msg));
    }

    fn warn(&mut self, col: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::warning(self.line, col, msg));
    }

    fn once(&mut self, section: &'static str, col: usize) -> bool {
        if !self.seen.insert(section) {
            self.err(col, format!("duplicate `{section}` directive"));
            return false;
        }
        true
    }

    fn number(&mut self, tok: Option<&Tok>, what: &str, after_col: usize) -> Option<f64> {
        match tok {
            None => {
                self.err(after_col, format!("missing {what}"));
                None
            }
            Some(t) => match parse_number(t.text) {
                Some(v) => Some(v),
                None => {
                    self.err(t.col, format!("malformed number `{}` for {what}", t.text));
                    None
                }
            },
        }
    }

    fn keyword<T>(
        &mut self,
        tok: Option<&Tok>,
        what: &str,
        after_col: usize,
        parse: fn(&str) -> Option<T>,
        choices: &str,
    ) -> Option<T> {
        match tok {
            None => {
                self.err(after_col, format!("missing {what}; expected one of {choices}"));
                None
            }
            Some(t) => match parse(t.text) {
                Some(v) => Some(v),
                None => {
                    self.err(
                        t.col,
                        format!("invalid {what} `{}`; expected one of {choices}", t.text),
                    );
                    None
                }
            },
        }
    }

    fn identifier(&mut self, tok: Option<&Tok>, what: &str, after_col: usize) -> Option<String> {
        match tok {
            None => {
                self.err(after_col, format!("missing {what}"));
                None
            }
            Some(t) if is_identifier(t.text) => Some(t.text.to_string()),
            Some(t) => {
                self.err(t.col, format!("invalid {what} `{}`; identifiers are [A-Za-z0-9_]+", t.text));
                None
            }
        }
    }

    fn directive(&mut self, toks: &[Tok]) {
        let head = &toks[0];
        let end_col = |i: usize| toks.get(i).map_or(head.col + head.text.len(), |t| t.col);
        match head.text {
            "device" => {
                if !self.once("device", head.col) {
                    return;
                }
                if let Some(name) = self.identifier(toks.get(1), "device name", end_col(1)) {
                    self.spec.name = name;
                }
                let mut i = 2;
                while i < toks.len() {
                    match toks[i].text {
                        "rowpitch" => {
                            if let Some(v) = self.number(toks.get(i + 1), "row pitch", end_col(i + 1)) {
                                if v <= 0.0 {
                                    self.err(toks[i + 1].col, "row pitch must be positive");
                                } else {
                                    self.spec.row_pitch_mm = Some(v);
                                }
                            }
                            i += 2;
                        }
                        "traces" => {
                            match toks.get(i + 1).map(|t| t.text) {
                                Some("exposed") => self.spec.traces_exposed = true,
                                Some("embedded") => self.spec.traces_exposed = false,
                                _ => self.err(
                                    end_col(i + 1),
                                    "invalid traces mode; expected one of exposed|embedded",
                                ),
                            }
                            i += 2;
                        }
                        other => {
                            self.warn(toks[i].col, format!("unknown device attribute `{other}` ignored"));
                            i += 1;
                        }
                    }
                }
            }
            "controller" => {
                if !self.once("controller", head.col) {
                    return;
                }
                let kind = self.keyword(toks.get(1), "controller", end_col(1), ControllerKind::parse, ControllerKind::NAMES);
                let mut socket = false;
                for t in toks.iter().skip(2) {
                    if t.text == "socket" {
                        socket = true;
                    } else {
                        self.warn(t.col, format!("unknown controller attribute `{}` ignored", t.text));
                    }
                }
                if let Some(kind) = kind {
                    self.spec.controller = ControllerTarget { kind, socket };
                }
            }
            "shell" => {
                if !self.once("shell", head.col) {
                    return;
                }
                if let Some(p) = self.keyword(toks.get(1), "shell policy", end_col(1), ShellPolicy::parse, &ShellPolicy::choices()) {
                    self.spec.shell_policy = p;
                }
                for t in toks.iter().skip(2) {
                    self.warn(t.col, format!("unknown shell attribute `{}` ignored", t.text));
                }
            }
            "default" => {
                let mut i = 1;
                if toks.len() == 1 {
                    self.err(end_col(1), "default directive needs at least one of kind|travel|stiffness");
                }
                while i < toks.len() {
                    let t = &toks[i];
                    match t.text {
                        "kind" => {
                            self.defaults.kind = self
                                .keyword(toks.get(i + 1), "kind", end_col(i + 1), KeyKind::parse, &KeyKind::choices())
                                .or(self.defaults.kind)
                        }
                        "travel" => {
                            self.defaults.travel = self
                                .keyword(toks.get(i + 1), "travel", end_col(i + 1), TravelClass::parse, &TravelClass::choices())
                                .or(self.defaults.travel)
                        }
                        "stiffness" => {
                            self.defaults.stiffness = self
                                .keyword(toks.get(i + 1), "stiffness", end_col(i + 1), StiffnessClass::parse, &StiffnessClass::choices())
                                .or(self.defaults.stiffness)
                        }
                        other => self.warn(t.col, format!("unknown default attribute `{other}` ignored")),
                    }
                    i += 2;
                }
            }
            "row" => self.row(toks),
            "key" => self.key(toks),
            other => self.err(
                head.col,
                format!("unknown directive `{other}`; expected device|controller|shell|default|row|key"),
            ),
        }
    }

    fn row(&mut self, toks: &[Tok]) {
        let head_end = toks[0].col + 3;
        let Some(idx_tok) = toks.get(1) else {
            self.err(head_end, "missing row index");
            return;
        };
        let Ok(row) = idx_tok.text.parse::<i64>() else {
            self.err(idx_tok.col, format!("malformed row index `{}`", idx_tok.text));
            return;
        };
        if !self.rows.insert(row) {
            self.err(toks[0].col, format!("duplicate row {row}"));
            return;
        }
        let mut i = 2;
        let mut offset = 0.0;
        if toks.get(i).map(|t| t.text) == Some("offset") {
            match self.number(toks.get(i + 1), "row offset", toks[i].col + 6) {
                Some(v) => offset = v,
                None => return,
            }
            i += 2;
        }
        match toks.get(i) {
            Some(t) if t.text == "keys" => i += 1,
            Some(t) => {
                self.err(t.col, format!("expected `keys`, found `{}`", t.text));
                return;
            }
            None => {
                self.err(toks[toks.len() - 1].col, "row needs a `keys` list");
                return;
            }
        }
        let mut col = 0usize;
        let mut extra = 0.0;
        for t in &toks[i..] {
            if let Some(g) = t.text.strip_prefix('+') {
                match parse_number(g) {
                    Some(v) if v >= 0.0 => extra += v,
                    _ => self.err(t.col, format!("malformed gap `{}`", t.text)),
                }
                continue;
            }
            if !is_identifier(t.text) {
                self.err(t.col, format!("invalid key id `{}`; identifiers are [A-Za-z0-9_]+", t.text));
                continue;
            }
            let mut k = self.new_key(t.text, Position::Grid { row, col, offset_mm: offset + extra });
            k.line = self.line;
            self.spec.keys.push(k);
            col += 1;
        }
        if col == 0 {
            self.err(toks[0].col, format!("row {row} lists no keys"));
        }
    }

    fn new_key(&self, id: &str, position: Position) -> KeyInstance {
        let kind = self.defaults.kind.unwrap_or(DEFAULT_KIND);
        let mut k = KeyInstance::new(id, kind, position);
        k.stiffness = self.defaults.stiffness.unwrap_or(DEFAULT_STIFFNESS);
        k.travel = match kind {
            KeyKind::Piano => DEFAULT_TRAVEL,
            _ => self.defaults.travel.unwrap_or(DEFAULT_TRAVEL),
        };
        k
    }

    fn key_attrs(&mut self, toks: &[Tok]) -> Option<KeyAttrs> {
        let mut a = KeyAttrs::default();
        let mut ok = true;
        let mut i = 2;
        let end = |i: usize| toks.get(i).map_or(toks[toks.len() - 1].col + toks[toks.len() - 1].text.len(), |t| t.col);
        while i < toks.len() {
            let t = &toks[i];
            match t.text {
                "kind" => {
                    a.kind = self.keyword(toks.get(i + 1), "kind", end(i + 1), KeyKind::parse, &KeyKind::choices());
                    ok &= a.kind.is_some();
                    i += 2;
                }
                "travel" => {
                    a.travel = self.keyword(toks.get(i + 1), "travel", end(i + 1), TravelClass::parse, &TravelClass::choices());
                    ok &= a.travel.is_some();
                    i += 2;
                }
                "stiffness" => {
                    a.stiffness = self.keyword(toks.get(i + 1), "stiffness", end(i + 1), StiffnessClass::parse, &StiffnessClass::choices());
                    ok &= a.stiffness.is_some();
                    i += 2;
                }
                "length" => {
                    a.length = self.number(toks.get(i + 1), "piano key length", end(i + 1));
                    ok &= a.length.is_some();
                    i += 2;
                }
                "ladder" => {
                    a.ladder = self.identifier(toks.get(i + 1), "ladder group", end(i + 1));
                    ok &= a.ladder.is_some();
                    i += 2;
                }
                "legend" => match toks.get(i + 1).map(|t| t.text) {
                    Some("blank") => {
                        a.legend = Some(LegendSpec::blank());
                        i += 2;
                    }
                    Some(mode @ ("text" | "braille")) => {
                        match toks.get(i + 2) {
                            Some(c) if c.text.chars().count() == 1 => {
                                let ch = c.text.chars().next().unwrap_or(' ');
                                a.legend = Some(if mode == "text" {
                                    LegendSpec::text(ch)
                                } else {
                                    LegendSpec::braille(ch)
                                });
                            }
                            Some(c) => {
                                self.err(c.col, format!("legend {mode} takes a single character, found `{}`", c.text));
                                ok = false;
                            }
                            None => {
                                self.err(end(i + 2), format!("missing legend {mode} character"));
                                ok = false;
                            }
                        }
                        i += 3;
                    }
                    _ => {
                        self.err(end(i + 1), "invalid legend mode; expected one of text|braille|blank");
                        ok = false;
                        i += 2;
                    }
                },
                "at" => {
                    let x = self.number(toks.get(i + 1), "x coordinate", end(i + 1));
                    let y = self.number(toks.get(i + 2), "y coordinate", end(i + 2));
                    i += 3;
                    let mut rot = 0.0;
                    if toks.get(i).map(|t| t.text) == Some("rot") {
                        match self.number(toks.get(i + 1), "rotation", end(i + 1)) {
                            Some(r) => rot = r,
                            None => ok = false,
                        }
                        i += 2;
                    }
                    match (x, y) {
                        (Some(x), Some(y)) => a.at = Some((x, y, rot)),
                        _ => ok = false,
                    }
                }
                other => {
                    self.warn(t.col, format!("unknown key attribute `{other}` ignored"));
                    i += 1;
                }
            }
        }
        ok.then_some(a)
    }

    fn key(&mut self, toks: &[Tok]) {
        let Some(id) = self.identifier(toks.get(1), "key id", toks[0].col + 4) else {
            return;
        };
        let Some(attrs) = self.key_attrs(toks) else {
            return;
        };
        let idcol = toks[1].col;
        match attrs.at {
            Some((x, y, rot)) => {
                let mut k = self.new_key(
                    &id,
                    Position::Explicit { x_mm: x, y_mm: y, rotation_deg: rot, row: None },
                );
                k.line = self.line;
                apply(&mut k, attrs);
                self.spec.keys.push(k);
            }
            None => {
                let target = self
                    .spec
                    .keys
                    .iter()
                    .position(|k| k.id == id && matches!(k.position, Position::Grid { .. }));
                match target {
                    None => self.err(
                        idcol,
                        format!("key `{id}` has no position; list it in a row or give `at <x> <y>`"),
                    ),
                    Some(_) if self.refined.contains(&id) => {
                        self.err(idcol, format!("duplicate key directive for `{id}`"))
                    }
                    Some(ix) => {
                        self.refined.insert(id);
                        apply(&mut self.spec.keys[ix], attrs);
                    }
                }
            }
        }
    }
}

fn apply(k: &mut KeyInstance, a: KeyAttrs) {
    if let Some(kind) = a.kind {
        if kind == KeyKind::Piano && k.kind != KeyKind::Piano && a.travel.is_none() {
            k.travel = DEFAULT_TRAVEL;
        }
        k.kind = kind;
    }
    if let Some(t) = a.travel {
        k.travel = t;
    }
    if let Some(s) = a.stiffness {
        k.stiffness = s;
    }
    if let Some(l) = a.legend {
        k.legend = l;
    }
    if a.ladder.is_some() {
        k.ladder_group = a.ladder;
    }
    if a.length.is_some() {
        k.length_mm = a.length;
    }
}

/// Parses a layout document. On success every field of the returned spec is
/// concrete; on failure at least one error diagnostic is returned, ordered by
/// (line, column).
pub fn parse_device_spec(source: &str) -> Result<Parsed, Vec<Diagnostic>> {
    let mut p = Parser {
        diags: Vec::new(),
        spec: DeviceSpec::new("device"),
        defaults: Defaults::default(),
        seen: BTreeSet::new(),
        rows: BTreeSet::new(),
        refined: BTreeSet::new(),
        line: 0,
    };
    for (i, line) in source.lines().enumerate() {
        p.line = i + 1;
        let toks = tokenize(line);
        if toks.is_empty() {
            continue;
        }
        p.directive(&toks);
    }
    let mut diags = p.diags;
    sort_diagnostics(&mut diags);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok(Parsed {
        spec: resolve_defaults(p.spec),
        warnings: diags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_line_document() {
        let parsed = parse_device_spec("key A at 0 0").unwrap();
        let spec = parsed.spec;
        assert_eq!(spec.keys.len(), 1);
        let k = &spec.keys[0];
        assert_eq!(k.kind, KeyKind::Digital);
        assert_eq!(k.stiffness, StiffnessClass::High);
        assert_eq!(k.travel, TravelClass::Medium);
        assert_eq!(k.center_mm, Some(Vec2::new(0.0, 0.0)));
        assert_eq!(spec.shell_policy, ShellPolicy::Rectangle);
        assert!(spec.row_pitch_mm.is_some());
    }

    #[test]
    fn misspelled_travel_names_line_and_choices() {
        let src = "device t\nkey A at 0 0 travel shrot\n";
        let diags = parse_device_spec(src).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 2);
        assert!(diags[0].message.contains("short|medium|long"), "{}", diags[0].message);
        assert!(diags[0].message.contains("shrot"));
    }

    #[test]
    fn error_kinds() {
        let diags = parse_device_spec("frobnicate 3\n").unwrap_err();
        assert!(diags[0].message.contains("unknown directive"));
        let diags = parse_device_spec("key A at 1,5 0\n").unwrap_err();
        assert!(diags[0].message.contains("malformed number"));
        let diags = parse_device_spec("shell hull\nshell none\nkey A at 0 0\n").unwrap_err();
        assert_eq!(diags[0].line, 2);
        assert!(diags[0].message.contains("duplicate"));
        let diags = parse_device_spec("row 1 keys A\nrow 1 keys B\n").unwrap_err();
        assert!(diags[0].message.contains("duplicate row"));
    }

    #[test]
    fn unknown_attribute_is_a_warning() {
        let parsed = parse_device_spec("key A at 0 0 colour red\n").unwrap();
        assert_eq!(parsed.warnings.len(), 2);
        assert!(parsed.warnings.iter().all(|d| !d.is_error()));
        assert_eq!(parsed.warnings[0].column, 14);
    }

    #[test]
    fn defaults_apply_to_later_keys_only() {
        let src = "row 1 keys A\ndefault stiffness low travel short\nrow 2 keys B\nkey A legend text A\n";
        let spec = parse_device_spec(src).unwrap().spec;
        assert_eq!(spec.key("A").unwrap().stiffness, StiffnessClass::High);
        assert_eq!(spec.key("B").unwrap().stiffness, StiffnessClass::Low);
        assert_eq!(spec.key("B").unwrap().travel, TravelClass::Short);
        assert_eq!(spec.key("A").unwrap().legend, LegendSpec::text('A'));
    }

    #[test]
    fn row_gaps_and_offsets() {
        let spec = parse_device_spec("row 0 offset 9.4 keys A B +20 C\n").unwrap().spec;
        let xs: Vec<f64> = spec.keys.iter().map(|k| k.center_mm.unwrap().x).collect();
        assert!((xs[0] - 9.4).abs() < 1e-12);
        assert!((xs[1] - (9.4 + 18.8)).abs() < 1e-12);
        assert!((xs[2] - (9.4 + 2.0 * 18.8 + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_are_sorted_and_stable() {
        let src = "key A at x 0\nbogus\nkey B travel nope at 0 0\n";
        let a = parse_device_spec(src).unwrap_err();
        let b = parse_device_spec(src).unwrap_err();
        assert_eq!(a, b);
        let pos: Vec<(usize, usize)> = a.iter().map(|d| (d.line, d.column)).collect();
        let mut sorted = pos.clone();
        sorted.sort();
        assert_eq!(pos, sorted);
    }
}
