use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use keyforge::parts::blueprint_for;
use keyforge::pipeline::{check_source, compile_to_dir, CompileOptions, PipelineError, Stage};
use keyforge::report::{key_mechanics, TOOL_VERSION};
use keyforge::spec::{KeyInstance, KeyKind, Position, StiffnessClass, TravelClass};

#[derive(Parser)]
#[command(name = "keyforge", about = "Compile tactile input device layouts into printable PLA/cPLA meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a layout into STL files and a JSON report.
    Compile {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a top-view SVG preview.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        no_report: bool,
        /// Write meshes even if they fail the watertight check.
        #[arg(long)]
        force_unwatertight: bool,
    },
    /// Parse and check a layout without compiling it.
    Validate { spec: PathBuf },
    /// Part library queries.
    Parts {
        #[command(subcommand)]
        command: PartsCommand,
    },
    /// Print the tool version.
    Version,
}

#[derive(Subcommand)]
enum PartsCommand {
    /// List every key preset with its footprint and force.
    List,
}

fn read(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: [parse] cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn fail(e: &PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn compile(spec: &Path, out: &Path, opts: CompileOptions) -> ExitCode {
    let src = match read(spec) {
        Ok(s) => s,
        Err(c) => return c,
    };
    match compile_to_dir(&src, out, &opts) {
        Ok((c, written)) => {
            for w in &c.warnings {
                eprintln!("warning: {w}");
            }
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn validate(spec: &Path) -> ExitCode {
    let src = match read(spec) {
        Ok(s) => s,
        Err(c) => return c,
    };
    match check_source(&src) {
        Ok((s, diags)) => {
            for d in diags {
                eprintln!("{d}");
            }
            println!("ok: device `{}`, {} key(s)", s.name, s.keys.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            for d in e.diagnostics.iter().filter(|d| !d.is_error()) {
                eprintln!("{d}");
            }
            fail(&e)
        }
    }
}

fn parts_list() -> ExitCode {
    println!("{:<8} {:<7} {:<6} {:>14} {:>10} {:>10} {:>9}  source", "kind", "travel", "stiff", "footprint mm", "travel mm", "force lbf", "strain");
    for kind in KeyKind::ALL {
        for travel in TravelClass::ALL {
            for stiffness in StiffnessClass::ALL {
                let mut k = KeyInstance::new("part", *kind, Position::Explicit { x_mm: 0.0, y_mm: 0.0, rotation_deg: 0.0, row: None });
                k.travel = *travel;
                k.stiffness = *stiffness;
                let bp = match blueprint_for(&k) {
                    Ok(bp) => bp,
                    Err(e) => {
                        eprintln!("error: [{}] {e}", Stage::Parts.as_str());
                        return ExitCode::from(2);
                    }
                };
                let m = match key_mechanics(&bp) {
                    Ok(m) => m,
                    Err(e) => {
                        eprintln!("error: [{}] {e}", Stage::Models.as_str());
                        return ExitCode::from(2);
                    }
                };
                let fp = format!("{:.1} x {:.1}", bp.footprint_mm.0, bp.footprint_mm.1);
                let strain = m.max_strain.map_or("-".to_string(), |s| format!("{s:.4}"));
                println!(
                    "{:<8} {:<7} {:<6} {:>14} {:>10.2} {:>10} {:>9}  {}",
                    kind.as_str(),
                    travel.as_str(),
                    stiffness.as_str(),
                    fp,
                    m.travel_mm,
                    format!("{:.2}±{:.2}", m.force.mean_lbf, m.force.tolerance_lbf),
                    strain,
                    m.force.source.as_str()
                );
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Compile { spec, out, svg, no_report, force_unwatertight } => {
            compile(&spec, &out, CompileOptions { svg, report: !no_report, force_unwatertight })
        }
        Command::Validate { spec } => validate(&spec),
        Command::Parts { command: PartsCommand::List } => parts_list(),
        Command::Version => {
            println!("keyforge {TOOL_VERSION}");
            ExitCode::SUCCESS
        }
    }
}
