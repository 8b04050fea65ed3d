//! Keycap legends: a stroke alphabet for A-Z/0-9 and six-dot braille cells.

use thiserror::Error;

use super::{BRAILLE_DOT_DIAMETER_MM, BRAILLE_DOT_PITCH_MM, CIRCLE_SEGMENTS, LEGEND_INSET_MM};
use crate::geom::{circle, Profile2D, Vec2};
use crate::spec::{LegendContent, LegendSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LegendError {
    #[error("character `{0}` is not in the stroke alphabet (A-Z, 0-9)")]
    UnsupportedGlyph(char),
    #[error("character `{0}` has no braille cell (a-z, 0-9)")]
    UnsupportedBraille(char),
    #[error("legend polygon leaves the keycap face inset by {LEGEND_INSET_MM} mm")]
    OutOfBounds,
    #[error("legend polygon is degenerate or self-intersecting")]
    InvalidPolygon,
}

/// Strokes on a 5x7 lattice written as `xy-xy` pairs.
fn glyph_strokes(ch: char) -> Option<&'static str> {
    Some(match ch.to_ascii_uppercase() {
        'A' => "00-04 04-26 26-44 44-40 03-43",
        'B' => "00-06 06-36 36-45 45-33 03-33 33-41 41-30 30-00",
        'C' => "46-06 06-00 00-40",
        'D' => "00-06 06-26 26-44 44-42 42-20 20-00",
        'E' => "46-06 06-00 00-40 03-33",
        'F' => "46-06 06-00 03-33",
        'G' => "46-06 06-00 00-40 40-43 43-23",
        'H' => "00-06 40-46 03-43",
        'I' => "06-46 26-20 00-40",
        'J' => "06-46 36-30 30-10 10-01",
        'K' => "00-06 03-46 03-40",
        'L' => "06-00 00-40",
        'M' => "00-06 06-23 23-46 46-40",
        'N' => "00-06 06-40 40-46",
        'O' => "00-06 06-46 46-40 40-00",
        'P' => "00-06 06-46 46-43 43-03",
        'Q' => "00-06 06-46 46-40 40-00 22-40",
        'R' => "00-06 06-46 46-43 43-03 03-40",
        'S' => "46-06 06-03 03-43 43-40 40-00",
        'T' => "06-46 26-20",
        'U' => "06-00 00-40 40-46",
        'V' => "06-20 20-46",
        'W' => "06-00 00-23 23-40 40-46",
        'X' => "06-40 00-46",
        'Y' => "06-23 46-23 23-20",
        'Z' => "06-46 46-00 00-40",
        '0' => "00-06 06-46 46-40 40-00 00-46",
        '1' => "15-26 26-20 00-40",
        '2' => "06-46 46-43 43-03 03-00 00-40",
        '3' => "06-46 46-40 40-00 03-43",
        '4' => "06-03 03-43 46-40",
        '5' => "46-06 06-03 03-43 43-40 40-00",
        '6' => "46-06 06-00 00-40 40-43 43-03",
        '7' => "06-46 46-20",
        '8' => "00-06 06-46 46-40 40-00 03-43",
        '9' => "43-03 03-06 06-46 46-40 40-00",
        _ => return None,
    })
}

const STROKE_UNIT_MM: f64 = 1.5;
const STROKE_WIDTH_MM: f64 = 1.0;

fn lattice(d: u8) -> f64 {
    f64::from(d - b'0')
}

fn stroke_quad(p: Vec2, q: Vec2, half: f64) -> Vec<Vec2> {
    let d = q - p;
    let u = d * (1.0 / d.norm());
    let n = u.perp();
    vec![
        p - u * half - n * half,
        q + u * half - n * half,
        q + u * half + n * half,
        p - u * half + n * half,
    ]
}

/// Standard six-dot pattern for a letter (dots 1-3 left column top to
/// bottom, 4-6 right column).
pub fn braille_dots(ch: char) -> Option<&'static [u8]> {
    Some(match ch.to_ascii_lowercase() {
        'a' => &[1],
        'b' => &[1, 2],
        'c' => &[1, 4],
        'd' => &[1, 4, 5],
        'e' => &[1, 5],
        'f' => &[1, 2, 4],
        'g' => &[1, 2, 4, 5],
        'h' => &[1, 2, 5],
        'i' => &[2, 4],
        'j' => &[2, 4, 5],
        'k' => &[1, 3],
        'l' => &[1, 2, 3],
        'm' => &[1, 3, 4],
        'n' => &[1, 3, 4, 5],
        'o' => &[1, 3, 5],
        'p' => &[1, 2, 3, 4],
        'q' => &[1, 2, 3, 4, 5],
        'r' => &[1, 2, 3, 5],
        's' => &[2, 3, 4],
        't' => &[2, 3, 4, 5],
        'u' => &[1, 3, 6],
        'v' => &[1, 2, 3, 6],
        'w' => &[2, 4, 5, 6],
        'x' => &[1, 3, 4, 6],
        'y' => &[1, 3, 4, 5, 6],
        'z' => &[1, 3, 5, 6],
        _ => return None,
    })
}

const NUMBER_SIGN: &[u8] = &[3, 4, 5, 6];
const BRAILLE_CELL_SPACING_MM: f64 = 6.0;

/// Cells to emboss for a character; digits are preceded by the number sign.
fn braille_cells(ch: char) -> Option<Vec<&'static [u8]>> {
    if let Some(d) = ch.to_digit(10) {
        let letter = if d == 0 { 'j' } else { (b'a' + d as u8 - 1) as char };
        return Some(vec![NUMBER_SIGN, braille_dots(letter)?]);
    }
    braille_dots(ch).map(|c| vec![c])
}

fn dot_center(dot: u8, cell_x: f64) -> Vec2 {
    let col = f64::from((dot - 1) / 3);
    let row = f64::from((dot - 1) % 3);
    Vec2::new(
        cell_x + (col - 0.5) * BRAILLE_DOT_PITCH_MM,
        (1.0 - row) * BRAILLE_DOT_PITCH_MM,
    )
}

/// Planar legend outlines in keycap-local millimeters, to be extruded by the
/// legend's relief height on the cap face.
pub fn legend_polygons(legend: &LegendSpec, keycap_width_mm: f64) -> Result<Vec<Profile2D>, LegendError> {
    let polys: Vec<Profile2D> = match &legend.content {
        LegendContent::Blank => Vec::new(),
        LegendContent::TextGlyph { ch } => {
            let strokes = glyph_strokes(*ch).ok_or(LegendError::UnsupportedGlyph(*ch))?;
            strokes
                .split_whitespace()
                .map(|s| {
                    let b = s.as_bytes();
                    let p = Vec2::new((lattice(b[0]) - 2.0) * STROKE_UNIT_MM, (lattice(b[1]) - 3.0) * STROKE_UNIT_MM);
                    let q = Vec2::new((lattice(b[3]) - 2.0) * STROKE_UNIT_MM, (lattice(b[4]) - 3.0) * STROKE_UNIT_MM);
                    Profile2D::simple(stroke_quad(p, q, STROKE_WIDTH_MM / 2.0))
                })
                .collect()
        }
        LegendContent::Braille { ch } => {
            let cells = braille_cells(*ch).ok_or(LegendError::UnsupportedBraille(*ch))?;
            let n = cells.len() as f64;
            cells
                .iter()
                .enumerate()
                .flat_map(|(i, dots)| {
                    let cell_x = (i as f64 - (n - 1.0) / 2.0) * BRAILLE_CELL_SPACING_MM;
                    dots.iter().map(move |&d| {
                        Profile2D::simple(circle(dot_center(d, cell_x), BRAILLE_DOT_DIAMETER_MM / 2.0, CIRCLE_SEGMENTS))
                    })
                })
                .collect()
        }
        LegendContent::RawPolygons { polygons } => polygons
            .iter()
            .map(|p| Profile2D::simple(p.clone()))
            .collect(),
    };
    let limit = keycap_width_mm / 2.0 - LEGEND_INSET_MM;
    for p in &polys {
        if p.outer.len() < 3 || !p.is_valid() || p.area() <= 0.0 {
            return Err(LegendError::InvalidPolygon);
        }
        if p.outer.iter().any(|v| v.x.abs() > limit + 1e-9 || v.y.abs() > limit + 1e-9) {
            return Err(LegendError::OutOfBounds);
        }
    }
    Ok(polys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::signed_area;

    #[test]
    fn braille_table_lookups() {
        assert_eq!(legend_polygons(&LegendSpec::braille('a'), 15.5).unwrap().len(), 1);
        let x = legend_polygons(&LegendSpec::braille('x'), 15.5).unwrap();
        assert_eq!(x.len(), 4);
        // dots 1,3,4,6: corners of the cell
        let centers: Vec<Vec2> = x
            .iter()
            .map(|p| p.outer.iter().fold(Vec2::default(), |a, &b| a + b) * (1.0 / p.outer.len() as f64))
            .collect();
        let expect = [dot_center(1, 0.0), dot_center(3, 0.0), dot_center(4, 0.0), dot_center(6, 0.0)];
        for (c, e) in centers.iter().zip(expect) {
            assert!(c.dist(e) < 1e-9);
        }
        assert_eq!(legend_polygons(&LegendSpec::braille('7'), 15.5).unwrap().len(), 4 + 4);
    }

    #[test]
    fn blank_is_empty_and_unknown_chars_fail() {
        assert!(legend_polygons(&LegendSpec::blank(), 15.5).unwrap().is_empty());
        assert_eq!(
            legend_polygons(&LegendSpec::text('%'), 15.5),
            Err(LegendError::UnsupportedGlyph('%'))
        );
        assert!(legend_polygons(&LegendSpec::braille('!'), 15.5).is_err());
    }

    #[test]
    fn every_glyph_fits_the_inset_face() {
        for ch in ('A'..='Z').chain('0'..='9') {
            let polys = legend_polygons(&LegendSpec::text(ch), 15.5).unwrap();
            assert!(!polys.is_empty());
            assert!(polys.iter().all(|p| signed_area(&p.outer) > 0.0));
        }
    }

    #[test]
    fn raw_polygon_outside_the_face_is_rejected() {
        let big = LegendSpec {
            content: LegendContent::RawPolygons {
                polygons: vec![vec![Vec2::new(-7.5, -1.0), Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0)]],
            },
            relief_height_mm: 0.6,
        };
        assert_eq!(legend_polygons(&big, 15.5), Err(LegendError::OutOfBounds));
    }
}
