use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use glioseg_core::balloon::OutlineInit;
use glioseg_core::harness::{self, GlobalOverrides};
use glioseg_core::io::load_volume;
use glioseg_core::metrics::{BinaryMask, Dice};
use glioseg_core::segment::{self, Initialization, Method, Overrides, RunRecord};
use glioseg_core::{SegmentError, WorldPoint};

#[derive(Debug, Parser)]
#[command(name = "glioseg", version, about = "Semi-automatic lesion segmentation and batch evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment one volume and write the mask, mesh and run record.
    Segment {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        volume: PathBuf,
        /// Seed point in mm as x,y,z (graph method).
        #[arg(long, value_parser = parse_seed, conflicts_with = "outline")]
        seed: Option<[f64; 3]>,
        /// Outline JSON (balloon method).
        #[arg(long)]
        outline: Option<PathBuf>,
        /// Parameter override, repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Reference mask; adds the Dice coefficient to the record.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every case of a manifest and write report.json and report.txt.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Override for every case, as METHOD.KEY=VALUE; repeatable.
        #[arg(long = "param", value_name = "METHOD.KEY=VALUE")]
        params: Vec<String>,
    },
    /// Generate a seeded synthetic suite with references and a manifest.
    Phantoms {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the summary of a report or record list.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Table,
}

fn parse_seed(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected x,y,z, got {} values", p.len()))
}

enum Failure {
    Usage(String),
    Case(String),
}

impl From<SegmentError> for Failure {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::Params(_) => Failure::Usage(e.to_string()),
            _ => Failure::Case(format!("{} stage failed: {e}", e.stage())),
        }
    }
}

fn fail(e: impl std::fmt::Display) -> Failure {
    Failure::Case(e.to_string())
}

#[derive(Serialize)]
struct SegmentOutput<'a> {
    #[serde(flatten)]
    record: &'a RunRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    dsc: Option<Dice>,
}

fn parse_overrides(params: &[String]) -> Result<Overrides, Failure> {
    params
        .iter()
        .map(|p| segment::parse_override(p).map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

fn parse_global(params: &[String]) -> Result<GlobalOverrides, Failure> {
    let mut out = GlobalOverrides::new();
    for p in params {
        let (k, v) = segment::parse_override(p).map_err(|e| Failure::Usage(e.to_string()))?;
        let (m, key) = k
            .split_once('.')
            .ok_or_else(|| Failure::Usage(format!("expected METHOD.KEY=VALUE, got '{p}'")))?;
        let method: Method = m.parse().map_err(Failure::Usage)?;
        out.entry(method).or_default().insert(key.to_string(), v);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_segment(
    method: Method,
    volume: &Path,
    seed: Option<[f64; 3]>,
    outline: Option<&Path>,
    params: &[String],
    reference: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let overrides = parse_overrides(params)?;
    let init = match (method, seed, outline) {
        (Method::Graph, Some(s), None) => Initialization::Seed(WorldPoint::from(s)),
        (Method::Balloon, None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| fail(format!("{}: {e}", p.display())))?;
            let o: OutlineInit =
                serde_json::from_str(&text).map_err(|e| fail(format!("{}: {e}", p.display())))?;
            Initialization::Outline(o)
        }
        (Method::Graph, _, _) => return Err(Failure::Usage("the graph method needs --seed x,y,z".into())),
        (Method::Balloon, _, _) => return Err(Failure::Usage("the balloon method needs --outline FILE".into())),
    };
    let vol = load_volume(volume).map_err(fail)?;
    let reference = reference.map(BinaryMask::load).transpose().map_err(fail)?;
    let result = segment::run(&vol, method, &init, &overrides)?;
    let dsc = reference.as_ref().map(|r| result.dice_against(r)).transpose()?;

    fs::create_dir_all(out).map_err(|e| fail(format!("{}: {e}", out.display())))?;
    result.mask.save(&out.join("mask.vol.json")).map_err(fail)?;
    fs::write(out.join("mesh.off"), result.mesh.to_off()).map_err(fail)?;
    let json = serde_json::to_string_pretty(&SegmentOutput {
        record: &result.record,
        dsc,
    })
    .expect("record serializes");
    fs::write(out.join("record.json"), json + "\n").map_err(fail)?;

    let r = &result.record;
    print!(
        "{}: {:.2} cm3, {} voxels, {:.0} ms",
        method.name(),
        r.volume_cm3,
        r.voxel_count,
        r.runtime_ms
    );
    if let Some(d) = dsc {
        print!(", DSC {:.2}", d.percent);
    }
    if !r.converged {
        print!(" (iteration cap reached)");
    }
    println!();
    Ok(())
}

fn cmd_evaluate(manifest: &Path, out: &Path, jobs: usize, params: &[String]) -> Result<(), Failure> {
    let global = parse_global(params)?;
    let report = harness::evaluate_manifest(manifest, &global, jobs).map_err(fail)?;
    harness::write_report(&report, out).map_err(fail)?;
    print!("{}", report.table());
    if report.all_ok() {
        Ok(())
    } else {
        let n = report.records.iter().filter(|r| !r.ok).count();
        Err(Failure::Case(format!("{n} case(s) failed")))
    }
}

fn cmd_phantoms(seed: u64, count: usize, out: &Path) -> Result<(), Failure> {
    if count == 0 {
        return Err(Failure::Usage("--count must be at least 1".into()));
    }
    let m = harness::generate_phantom_suite(seed, count, out).map_err(fail)?;
    println!("wrote {} cases and manifest.json to {}", m.cases.len(), out.display());
    Ok(())
}

fn cmd_report(records: &Path, format: Format) -> Result<(), Failure> {
    let report = harness::load_records(records).map_err(fail)?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Table => print!("{}", report.table()),
    }
    if report.all_ok() {
        Ok(())
    } else {
        Err(Failure::Case("report contains failed cases".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment {
            method,
            volume,
            seed,
            outline,
            params,
            reference,
            out,
        } => cmd_segment(
            *method,
            volume,
            *seed,
            outline.as_deref(),
            params,
            reference.as_deref(),
            out,
        ),
        Command::Evaluate {
            manifest,
            out,
            jobs,
            params,
        } => cmd_evaluate(manifest, out, *jobs, params),
        Command::Phantoms { seed, count, out } => cmd_phantoms(*seed, *count, out),
        Command::Report { records, format } => cmd_report(records, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Case(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
