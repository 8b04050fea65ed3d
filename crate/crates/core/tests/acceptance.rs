//! Acceptance criteria 1-10. Runs as a plain binary so every criterion prints
//! its own PASS/FAIL line; the process fails if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use keyforge::electrical::{design_analog_ladder, predict_adc_counts, trace_resistance, LadderParams, MaterialElectrical};
use keyforge::geom::{Profile2D, Rect, Vec2};
use keyforge::mechanics::{
    beam_activation_force, coil_spring_rate, max_bending_strain, preset_activation_force, BeamParams, CoilParams,
    LBF_TO_N, STRAIN_LIMIT,
};
use keyforge::mesh::{check_watertight, extrude_polygon, read_stl, stl_bytes, sweep_profile, SweepPath};
use keyforge::parts::{blueprint_for, effective_spring_thickness, SpringParams};
use keyforge::pipeline::{compile_source, compile_to_dir, CompileOptions};
use keyforge::report::key_mechanics;
use keyforge::routing::{synthesize_resistor_meander, Layer, RoutePlan, RoutingRules};
use keyforge::spec::{KeyInstance, KeyKind, Position, StiffnessClass, TravelClass};

const QWERTY: &str = include_str!("../specs/qwerty.kf");
const ERGO: &str = include_str!("../specs/ergo_split.kf");
const GAMEPAD: &str = include_str!("../specs/gamepad.kf");
const AAC: &str = include_str!("../specs/aac.kf");

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn qwerty_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let (c, written) = compile_to_dir(QWERTY, dir.path(), &CompileOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;

    let pla = dir.path().join("qwerty_pla.stl");
    let cpla = dir.path().join("qwerty_cpla.stl");
    check(written.contains(&pla) && written.contains(&cpla), "STL files missing")?;
    for (path, mesh) in [(&pla, &c.meshes.pla), (&cpla, &c.meshes.cpla)] {
        let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
        check(bytes == stl_bytes(mesh), "file differs from mesh")?;
        let tris = read_stl(&bytes).map_err(|e| e.to_string())?;
        check(!tris.is_empty() && bytes.len() == 84 + 50 * tris.len(), "not a binary STL")?;
        let w = check_watertight(mesh);
        check(w.watertight(), format!("{} not watertight", path.display()))?;
    }

    let mut rows: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut pairs = 0;
    for k in &c.placement.placed {
        rows.entry(k.row.unwrap_or(i64::MIN)).or_default().push(k.center.x);
    }
    for (row, mut xs) in rows {
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            pairs += 1;
            check((w[1] - w[0] - 18.8).abs() <= 1e-6, format!("row {row}: pitch {}", w[1] - w[0]))?;
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("qwerty_report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let n = report["keys"].as_array().map_or(0, Vec::len);
    check(n == 27, format!("report lists {n} keys"))?;
    Ok(format!("{n} keys, {pairs} adjacent pairs at 18.8 mm, both STLs watertight, {:.2} s", elapsed.as_secs_f64()))
}

fn force_table() -> Outcome {
    let published = [
        (TravelClass::Short, StiffnessClass::High, 2.51, 0.15),
        (TravelClass::Short, StiffnessClass::Low, 0.64, 0.25),
        (TravelClass::Medium, StiffnessClass::High, 1.00, 0.17),
        (TravelClass::Medium, StiffnessClass::Low, 0.49, 0.05),
        (TravelClass::Long, StiffnessClass::High, 1.46, 0.13),
        (TravelClass::Long, StiffnessClass::Low, 0.97, 0.08),
    ];
    for (t, s, m, tol) in published {
        let f = preset_activation_force(t, s);
        check(f.mean_lbf == m && f.tolerance_lbf == tol, format!("{t:?}/{s:?}: {} ± {}", f.mean_lbf, f.tolerance_lbf))?;
        check(rel(f.mean_n, m * 4.4482216153) <= 1e-9, "mean N conversion")?;
        check(rel(f.tolerance_n, tol * 4.4482216153) <= 1e-9, "tolerance N conversion")?;
    }
    check(LBF_TO_N == 4.4482216153, "conversion constant")?;
    Ok("6 presets exact, N = lbf x 4.4482216153".into())
}

fn spring_thickness() -> Outcome {
    let t3 = effective_spring_thickness(3).map_err(|e| e.to_string())?;
    let t4 = effective_spring_thickness(4).map_err(|e| e.to_string())?;
    check(format!("{t3:.4}") == "0.8485" && format!("{t4:.4}") == "1.1314", format!("{t3} / {t4}"))?;
    check(format!("{t3:.2}") == "0.85" && format!("{t4:.2}") == "1.13", "2-decimal rounding")?;
    Ok(format!("{t3:.4} mm / {t4:.4} mm"))
}

fn electrical_oracle() -> Outcome {
    let rho = MaterialElectrical { resistivity_ohm_cm: 200.0 };
    let r = trace_resistance(10.0, 2.54 * 2.54, &rho).map_err(|e| e.to_string())?;
    let rules = RoutingRules::default();
    let mut worst: f64 = 0.0;
    for target in [1_000.0, 3_100.0, 10_000.0, 47_000.0] {
        let m = synthesize_resistor_meander("r", "a", "b", target, Rect::new(0.0, 0.0, 120.0, 400.0), &rules)
            .map_err(|e| e.to_string())?;
        let back = trace_resistance(m.centerline_length(), rules.area_mm2(), &rules.material).map_err(|e| e.to_string())?;
        worst = worst.max(rel(back, target));
    }
    check(worst <= 0.01, format!("meander round-trip error {:.3}%", worst * 100.0))?;
    // rho*L/A with L = 1 cm, A = 0.064516 cm^2 is 3100.0062 ohm; no rounding is applied
    check(r == 3100.0, format!("trace_resistance = {r:.7} ohm, not exactly 3100 (meander round-trip max error {:.4}% ok)", worst * 100.0))?;
    Ok(format!("3100 ohm exact, meander round-trip max error {:.4}%", worst * 100.0))
}

/// Divider reading computed from first principles for every ladder entry.
fn ladder_property() -> Outcome {
    let p = LadderParams::default();
    let mut checked = 0;
    for n in 1..=8usize {
        let ids: Vec<String> = (0..n).map(|i| format!("K{i}")).collect();
        let d = design_analog_ladder(&ids, &p).map_err(|e| e.to_string())?;
        check(d.entries.len() == n, format!("n={n}: {} entries", d.entries.len()))?;
        let full = f64::from(2u32.pow(p.adc_bits) - 1);
        let mut states: Vec<(Option<&str>, u32)> = vec![(None, 0)];
        for e in &d.entries {
            // R = rho[ohm cm] * L[cm] / A[cm^2]
            let r = p.material.resistivity_ohm_cm * (e.length_mm / 10.0) / (p.cross_section_mm2 / 100.0);
            let counts = (full * p.pulldown_ohms / (p.pulldown_ohms + r)).round() as u32;
            states.push((Some(e.key.as_str()), counts));
        }
        for (key, counts) in &states {
            let got = predict_adc_counts(&d, *key).map_err(|e| e.to_string())?;
            check(got == *counts, format!("n={n} {key:?}: predicted {got}, oracle {counts}"))?;
        }
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                let sep = states[i].1.abs_diff(states[j].1);
                checked += 1;
                check(sep >= 20, format!("n={n}: {:?} vs {:?} only {sep} counts", states[i].0, states[j].0))?;
            }
        }
    }
    Ok(format!("n = 1..8, {checked} state pairs >= 20 counts, predictions match oracle"))
}

struct PlanBox {
    net: String,
    layer: Layer,
    bounds: [f64; 4],
    /// Nets joined to this conductor at its ends; for a printed resistor
    /// those are compared against its trimmed core only.
    ends: Vec<String>,
}

/// Axis-aligned plan-view boxes of every floor/ridge conductor run.
fn plan_boxes(plan: &RoutePlan) -> Vec<PlanBox> {
    let half = plan.rules.trace_width() / 2.0;
    let mut out = Vec::new();
    let mut push = |net: &str, layer: Layer, a: Vec2, b: Vec2, ends: Vec<String>| {
        out.push(PlanBox {
            net: net.to_string(),
            layer,
            bounds: [a.x.min(b.x) - half, a.y.min(b.y) - half, a.x.max(b.x) + half, a.y.max(b.y) + half],
            ends,
        });
    };
    for t in &plan.traces {
        if t.points.len() == 1 {
            push(&t.net, t.layer, t.points[0], t.points[0], Vec::new());
        }
        for w in t.points.windows(2) {
            push(&t.net, t.layer, w[0], w[1], Vec::new());
        }
    }
    for m in &plan.resistors {
        for w in m.polyline.windows(2) {
            push(&m.id, Layer::Floor, w[0], w[1], vec![m.net_a.clone(), m.net_b.clone()]);
        }
        for w in m.core.windows(2) {
            push(&m.id, Layer::Floor, w[0], w[1], Vec::new());
        }
    }
    out
}

fn routing_soundness() -> Outcome {
    let mut summary = Vec::new();
    for (name, src) in [("qwerty", QWERTY), ("ergo_split", ERGO), ("gamepad", GAMEPAD), ("aac", AAC)] {
        let c = compile_source(src, &CompileOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let v = &c.verification;
        check(v.clearance_violations.is_empty(), format!("{name}: {} clearance violations", v.clearance_violations.len()))?;
        check(
            v.connectivity_violations.is_empty(),
            format!("{name}: {} connectivity violations", v.connectivity_violations.len()),
        )?;
        check(v.same_layer_crossings == 0, format!("{name}: same-layer crossings"))?;
        for t in &c.plan.traces {
            for w in t.points.windows(2) {
                let d = w[1] - w[0];
                check(d.x.abs() < 1e-9 || d.y.abs() < 1e-9, format!("{name}: diagonal run on {}", t.net))?;
            }
        }
        let boxes = plan_boxes(&c.plan);
        let mut crossings = 0;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (a, b) = (&boxes[i], &boxes[j]);
                if a.net == b.net || a.ends.contains(&b.net) || b.ends.contains(&a.net) {
                    continue;
                }
                let ox = a.bounds[2].min(b.bounds[2]) - a.bounds[0].max(b.bounds[0]);
                let oy = a.bounds[3].min(b.bounds[3]) - a.bounds[1].max(b.bounds[1]);
                if ox > 1e-9 && oy > 1e-9 {
                    crossings += 1;
                    check(a.layer != b.layer, format!("{name}: {} and {} cross on one layer", a.net, b.net))?;
                }
            }
        }
        summary.push(format!("{name} {crossings} crossings"));
    }
    Ok(format!("zero violations; all distinct-net crossings on distinct layers ({})", summary.join(", ")))
}

fn star_profile(radii: &[f64]) -> Profile2D {
    let n = radii.len();
    let outer = radii
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    Profile2D { outer, holes: Vec::new() }
}

fn shoelace(p: &[Vec2]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        let (a, b) = (p[i], p[(i + 1) % p.len()]);
        s += a.x * b.y - b.x * a.y;
    }
    s.abs() / 2.0
}

fn mesh_properties() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 128, failure_persistence: None, ..Config::default() });
    let strategy = (
        prop::collection::vec(1.0f64..10.0, 3..24),
        0.2f64..40.0,
        (-1.0f64..1.0, -1.0f64..1.0, 0.2f64..1.0),
        1.0f64..60.0,
    );
    let mut cases = 0;
    runner
        .run(&strategy, |(radii, h, dir, len)| {
            let prof = star_profile(&radii);
            let area = shoelace(&prof.outer);
            let m = extrude_polygon(&prof, h).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let w = check_watertight(&m);
            prop_assert!(w.watertight() && w.signed_volume > 0.0);
            prop_assert!(rel(w.signed_volume, area * h) <= 1e-3);
            prop_assert_eq!(stl_bytes(&m).len(), 84 + 50 * m.triangles.len());

            let norm = (dir.0 * dir.0 + dir.1 * dir.1 + dir.2 * dir.2).sqrt();
            let d = [dir.0 / norm, dir.1 / norm, dir.2 / norm];
            let path = SweepPath::Polyline(vec![[0.0, 0.0, 0.0], [d[0] * len, d[1] * len, d[2] * len]]);
            let s = sweep_profile(&prof, &path).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let ws = check_watertight(&s);
            prop_assert!(ws.watertight() && ws.signed_volume > 0.0);
            prop_assert!(rel(ws.signed_volume, area * len) <= 1e-3);
            prop_assert_eq!(stl_bytes(&s).len(), 84 + 50 * s.triangles.len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    cases += 128;
    Ok(format!("{cases} random profiles: extrude and sweep volumes within 0.1%, manifold, positive, STL 84 + 50n"))
}

fn scaling_laws() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    let strategy = (500.0f64..4000.0, 5.0f64..30.0, 2.0f64..12.0, 0.3f64..2.0, 0.1f64..3.0, 2.0f64..20.0, 1.0f64..10.0);
    runner
        .run(&strategy, |(e, l, w, t, d, dm, n)| {
            let f = |l: f64, t: f64, d: f64| {
                beam_activation_force(&BeamParams { elastic_modulus_mpa: e, length_mm: l, width_mm: w, thickness_mm: t, deflection_mm: d })
                    .unwrap()
            };
            let base = f(l, t, d);
            prop_assert!(rel(f(l, 2.0 * t, d), 8.0 * base) <= 1e-12);
            prop_assert!(rel(f(l, t, 3.0 * d), 3.0 * base) <= 1e-12);
            prop_assert!(rel(f(2.0 * l, t, d), base / 8.0) <= 1e-12);
            let wire = dm / 10.0;
            let k = |wire: f64, dm: f64| {
                coil_spring_rate(&CoilParams { shear_modulus_mpa: 800.0, wire_thickness_mm: wire, mean_diameter_mm: dm, active_turns: n })
                    .unwrap()
            };
            let k0 = k(wire, dm);
            prop_assert!(rel(k(2.0 * wire, dm), 16.0 * k0) <= 1e-12);
            prop_assert!(rel(k(wire, 2.0 * dm), k0 / 8.0) <= 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("beam t^3, delta^1, L^-3; coil d^4, D^-3 over 256 cases at 1e-12".into())
}

fn durability_proxy() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for kind in KeyKind::ALL {
        for travel in TravelClass::ALL {
            for stiffness in StiffnessClass::ALL {
                let mut k = KeyInstance::new("k", *kind, Position::Explicit { x_mm: 0.0, y_mm: 0.0, rotation_deg: 0.0, row: None });
                k.travel = *travel;
                k.stiffness = *stiffness;
                let bp = blueprint_for(&k).map_err(|e| e.to_string())?;
                let strain = match bp.spring {
                    SpringParams::Cantilever { gap_mm, effective_thickness_mm, length_mm, width_mm, .. } => {
                        Some(max_bending_strain(&BeamParams {
                            elastic_modulus_mpa: 2000.0,
                            length_mm,
                            width_mm,
                            thickness_mm: effective_thickness_mm,
                            deflection_mm: gap_mm,
                        }).map_err(|e| e.to_string())?)
                    }
                    _ => key_mechanics(&bp).map_err(|e| e.to_string())?.max_strain,
                };
                if let Some(s) = strain {
                    n += 1;
                    worst = worst.max(s);
                    check(s < STRAIN_LIMIT, format!("{kind:?}/{travel:?}/{stiffness:?}: strain {s:.4}"))?;
                }
            }
        }
    }
    Ok(format!("{n} bending presets, worst strain {worst:.4} < 0.02"))
}

fn determinism_and_atomicity() -> Outcome {
    let opts = CompileOptions { svg: true, ..CompileOptions::default() };
    for (name, src) in [("gamepad", GAMEPAD), ("aac", AAC), ("qwerty", QWERTY)] {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (_, fa) = compile_to_dir(src, a.path(), &opts).map_err(|e| e.to_string())?;
        let (_, fb) = compile_to_dir(src, b.path(), &opts).map_err(|e| e.to_string())?;
        check(fa.len() == 4 && fa.len() == fb.len(), format!("{name}: file count"))?;
        for (x, y) in fa.iter().zip(&fb) {
            let bx = std::fs::read(x).map_err(|e| e.to_string())?;
            let by = std::fs::read(y).map_err(|e| e.to_string())?;
            check(bx == by, format!("{name}: {} differs between runs", x.display()))?;
        }
    }
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let failing = [
        "device dup\nrow 0 keys A B A\n",
        "device bad\nkey A at 0 0\nkey B at 5 0\n",
        "device nope\nkey A kind lever at 0 0\n",
    ];
    for (i, src) in failing.iter().enumerate() {
        let out = root.path().join(format!("out{i}"));
        check(compile_to_dir(src, &out, &opts).is_err(), format!("failing spec {i} compiled"))?;
        check(!out.exists(), format!("failing spec {i} left output"))?;
    }
    let existing = root.path().join("existing");
    std::fs::create_dir(&existing).map_err(|e| e.to_string())?;
    check(compile_to_dir(failing[0], &existing, &opts).is_err(), "duplicate id compiled")?;
    let left = std::fs::read_dir(&existing).map_err(|e| e.to_string())?.count();
    check(left == 0, format!("{left} file(s) left after failure"))?;
    Ok("3 specs byte-identical across runs (STL, report, SVG); 4 failing compiles left no files".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("QWERTY end-to-end", qwerty_end_to_end),
        ("force table fidelity", force_table),
        ("spring thickness", spring_thickness),
        ("electrical oracle", electrical_oracle),
        ("ladder separation", ladder_property),
        ("routing soundness", routing_soundness),
        ("mesh properties", mesh_properties),
        ("physics scaling laws", scaling_laws),
        ("durability proxy", durability_proxy),
        ("determinism and atomicity", determinism_and_atomicity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
