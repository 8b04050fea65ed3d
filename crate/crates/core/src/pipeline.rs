//! End-to-end compile: source text in, meshes and report out.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::mesh::{assemble_device_meshes, AssembledMeshes};
use crate::mesh::{check_watertight, stl_bytes, WatertightReport};
use crate::parts::{blueprint_for, KeyBlueprint, Material};
use crate::placement::{build_shell, detect_collisions, place_keys, Placement, ShellOutline};
use crate::report::{build_report, report_json, stl_file_name, BuildReport, ReportInputs};
use crate::routing::{
    build_netlist, plan_rear_zone, route_nets, verify_routes, Netlist, RoutePlan, RoutingRules, VerificationReport,
};
use crate::spec::{parse_device_spec, validate_spec, DeviceSpec, Diagnostic};
use crate::svg::emit_svg_preview;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Validate,
    Parts,
    Place,
    Netlist,
    Route,
    Verify,
    Models,
    Mesh,
    Write,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Validate => "validate",
            Stage::Parts => "parts",
            Stage::Place => "place",
            Stage::Netlist => "netlist",
            Stage::Route => "route",
            Stage::Verify => "verify",
            Stage::Models => "models",
            Stage::Mesh => "mesh",
            Stage::Write => "write",
        }
    }

    /// 1 for problems in the input document, 2 for everything downstream.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Parse | Stage::Validate | Stage::Parts | Stage::Place => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl PipelineError {
    fn new(stage: Stage, message: impl Into<String>) -> Self {
        Self { stage, message: message.into(), diagnostics: Vec::new() }
    }

    fn diags(stage: Stage, diagnostics: Vec<Diagnostic>) -> Self {
        let n = diagnostics.iter().filter(|d| d.is_error()).count();
        Self { stage, message: format!("{n} error(s)"), diagnostics }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage.as_str(), self.message)?;
        for d in self.diagnostics.iter().filter(|d| d.is_error()) {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for PipelineError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    pub svg: bool,
    pub report: bool,
    pub force_unwatertight: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { svg: false, report: true, force_unwatertight: false }
    }
}

/// Every intermediate product of a successful compile.
pub struct Compilation {
    pub spec: DeviceSpec,
    pub blueprints: Vec<KeyBlueprint>,
    pub placement: Placement,
    pub shell: ShellOutline,
    pub netlist: Netlist,
    pub plan: RoutePlan,
    pub verification: VerificationReport,
    pub meshes: AssembledMeshes,
    pub watertight: [WatertightReport; 2],
    pub report: BuildReport,
    pub warnings: Vec<String>,
}

impl Compilation {
    /// Output files as (name, bytes), in write order.
    pub fn artifacts(&self, opts: &CompileOptions) -> Vec<(String, Vec<u8>)> {
        let name = &self.spec.name;
        let mut out = vec![
            (stl_file_name(name, Material::Pla), stl_bytes(&self.meshes.pla)),
            (stl_file_name(name, Material::Cpla), stl_bytes(&self.meshes.cpla)),
        ];
        if opts.report {
            out.push((format!("{name}_report.json"), report_json(&self.report).into_bytes()));
        }
        if opts.svg {
            out.push((format!("{name}.svg"), emit_svg_preview(&self.placement, &self.shell, &self.plan).into_bytes()));
        }
        out
    }
}

/// Parse and validate only.
pub fn check_source(source: &str) -> Result<(DeviceSpec, Vec<Diagnostic>), PipelineError> {
    let parsed = parse_device_spec(source).map_err(|d| PipelineError::diags(Stage::Parse, d))?;
    let mut diags = parsed.warnings;
    let found = validate_spec(&parsed.spec);
    if found.iter().any(Diagnostic::is_error) {
        diags.extend(found);
        return Err(PipelineError::diags(Stage::Validate, diags));
    }
    diags.extend(found);
    Ok((parsed.spec, diags))
}

pub fn compile_source(source: &str, opts: &CompileOptions) -> Result<Compilation, PipelineError> {
    let (spec, diags) = check_source(source)?;
    let mut warnings: Vec<String> = diags.iter().map(ToString::to_string).collect();

    let blueprints = spec
        .keys
        .iter()
        .map(|k| blueprint_for(k).map_err(|e| PipelineError::new(Stage::Parts, format!("key `{}`: {e}", k.id))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut placement = place_keys(&spec, &blueprints).map_err(|e| PipelineError::new(Stage::Place, e.to_string()))?;
    let collisions = detect_collisions(&placement);
    if !collisions.is_empty() {
        let list: Vec<String> = collisions.iter().map(|c| format!("{} overlaps {}", c.a, c.b)).collect();
        return Err(PipelineError::new(Stage::Place, list.join("; ")));
    }

    let rules = RoutingRules::default();
    let mut netlist =
        build_netlist(&placement, &spec, &blueprints, &rules).map_err(|e| PipelineError::new(Stage::Netlist, e.to_string()))?;
    let rear =
        plan_rear_zone(&mut placement, &mut netlist, &rules).map_err(|e| PipelineError::new(Stage::Netlist, e.to_string()))?;
    let shell = build_shell(&placement, spec.shell_policy);
    let plan = route_nets(&netlist, &placement, &shell, &blueprints, &rear, &rules, spec.traces_exposed)
        .map_err(|e| PipelineError::new(Stage::Route, e.to_string()))?;

    let verification = verify_routes(&plan, &netlist);
    if !verification.ok() {
        let first: Vec<String> = verification
            .clearance_violations
            .iter()
            .chain(&verification.connectivity_violations)
            .take(5)
            .map(|v| format!("{} {} at ({:.2}, {:.2}): {}", v.kind, v.nets.join("/"), v.at.x, v.at.y, v.detail))
            .collect();
        return Err(PipelineError::new(
            Stage::Verify,
            format!(
                "{} clearance and {} connectivity violation(s): {}",
                verification.clearance_violations.len(),
                verification.connectivity_violations.len(),
                first.join("; ")
            ),
        ));
    }

    let meshes = assemble_device_meshes(&placement, &blueprints, &plan, &shell)
        .map_err(|e| PipelineError::new(Stage::Mesh, e.to_string()))?;
    warnings.extend(meshes.warnings.iter().cloned());
    let watertight = [check_watertight(&meshes.pla), check_watertight(&meshes.cpla)];
    for (w, m) in watertight.iter().zip([Material::Pla, Material::Cpla]) {
        if !w.watertight() {
            let msg = format!(
                "{} mesh is not watertight: {} boundary, {} non-manifold, {} misoriented edge(s), {} degenerate triangle(s), volume {:.3}",
                m.as_str(),
                w.boundary_edges.len(),
                w.nonmanifold_edges.len(),
                w.misoriented_edges.len(),
                w.degenerate_triangles,
                w.signed_volume
            );
            if !opts.force_unwatertight {
                return Err(PipelineError::new(Stage::Mesh, msg));
            }
            warnings.push(msg);
        }
    }

    let report = build_report(&ReportInputs {
        spec: &spec,
        blueprints: &blueprints,
        placement: &placement,
        netlist: &netlist,
        plan: &plan,
        verification: &verification,
        meshes: &meshes,
        watertight: [&watertight[0], &watertight[1]],
        warnings: &warnings,
    })
    .map_err(|e| PipelineError::new(Stage::Models, e.to_string()))?;

    Ok(Compilation { spec, blueprints, placement, shell, netlist, plan, verification, meshes, watertight, report, warnings })
}

/// Writes all files or none: they are staged in a hidden sibling directory
/// and moved into `out` only after every write succeeded.
pub fn write_artifacts(out: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, PipelineError> {
    let werr = |what: &str, p: &Path, e: std::io::Error| PipelineError::new(Stage::Write, format!("{what} {}: {e}", p.display()));
    let created_out = !out.exists();
    fs::create_dir_all(out).map_err(|e| werr("cannot create", out, e))?;
    let staging = out.join(format!(".keyforge-staging-{}", std::process::id()));
    let cleanup = |moved: &[PathBuf]| {
        for p in moved {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_dir_all(&staging);
        if created_out {
            let _ = fs::remove_dir(out);
        }
    };

    if let Err(e) = fs::create_dir_all(&staging) {
        cleanup(&[]);
        return Err(werr("cannot create", &staging, e));
    }
    for (name, bytes) in files {
        let p = staging.join(name);
        if let Err(e) = fs::write(&p, bytes) {
            cleanup(&[]);
            return Err(werr("cannot write", &p, e));
        }
    }
    let mut moved = Vec::new();
    for (name, _) in files {
        let dst = out.join(name);
        if let Err(e) = fs::rename(staging.join(name), &dst) {
            cleanup(&moved);
            return Err(werr("cannot move into", &dst, e));
        }
        moved.push(dst);
    }
    let _ = fs::remove_dir(&staging);
    Ok(moved)
}

/// Compiles `source` and writes its artifacts into `out`. Nothing is written
/// unless every stage succeeds.
pub fn compile_to_dir(source: &str, out: &Path, opts: &CompileOptions) -> Result<(Compilation, Vec<PathBuf>), PipelineError> {
    let c = compile_source(source, opts)?;
    let files = c.artifacts(opts);
    let written = write_artifacts(out, &files)?;
    Ok((c, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_stage() {
        assert_eq!(Stage::Parse.exit_code(), 1);
        assert_eq!(Stage::Validate.exit_code(), 1);
        assert_eq!(Stage::Route.exit_code(), 2);
        assert_eq!(Stage::Mesh.exit_code(), 2);
    }

    #[test]
    fn duplicate_id_is_a_validation_error() {
        let e = compile_source("row 0 keys A B A\n", &CompileOptions::default()).err().unwrap();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("duplicate"), "{e}");
    }

    #[test]
    fn small_device_compiles() {
        let c = compile_source("device pad\ncontroller uno\nrow 0 keys A B\n", &CompileOptions::default()).unwrap();
        assert!(c.watertight.iter().all(WatertightReport::watertight));
        assert_eq!(c.report.keys.len(), 2);
        let names: Vec<String> = c.artifacts(&CompileOptions { svg: true, ..Default::default() }).into_iter().map(|f| f.0).collect();
        assert_eq!(names, ["pad_pla.stl", "pad_cpla.stl", "pad_report.json", "pad.svg"]);
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("new");
        let files = vec![("a.stl".to_string(), vec![1u8]), ("sub/b.stl".to_string(), vec![2u8])];
        assert!(write_artifacts(&out, &files).is_err());
        assert!(!out.exists());
    }
}
