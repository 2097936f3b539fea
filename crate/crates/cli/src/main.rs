//! `pathcert`: certify, falsify and export motion plans from the command line.
//!
//! Exit codes: 0 SAFE (or no collision found), 1 NSAFE with a sampled
//! collision, 2 NSAFE without a confirming collision, 3 invalid input or
//! any other error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use pathcert::certify::{certify_plan, confirm_nsafe, CertifyOptions, Confirmation, PlanReport, PlanVerdict};
use pathcert::checker::{sample_falsify, CheckOptions, FalsifyReport};
use pathcert::conic::{export_standard, SolverOptions};
use pathcert::geometry::Shape;
use pathcert::kinematics::{JointKind, KinematicChain};
use pathcert::plan::MotionPlan;
use pathcert::scene::{load_plan, warn_joint_limits, Scene};
use pathcert::soscert::{assemble_pair_program, LoweringOptions};

const OUTPUT_VERSION: u32 = 1;

const EXIT_SAFE: u8 = 0;
const EXIT_COLLISION: u8 = 1;
const EXIT_UNCERTIFIED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pathcert", version, about = "Certify collision-free motion plans with sums-of-squares programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify every (segment, pair) cell of a plan.
    Certify(RunConfig),
    /// Search a plan for collisions by dense sampling.
    Falsify(RunConfig),
    /// Write one SDPA file per (segment, pair) cell.
    Export(RunConfig),
    /// Compare symbolic and numeric forward kinematics on a sample grid.
    FkCheck(FkConfig),
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Hyperplane degree.
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Samples per segment for falsification.
    #[arg(long, default_value_t = 100_000)]
    falsify_n: usize,
    /// Re-verify certificates in exact rational arithmetic.
    #[arg(long)]
    exact_verify: bool,
    /// Stop a segment at its first failing pair.
    #[arg(long)]
    early_stop: bool,
    /// Directory for reports, certificates and exported programs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct FkConfig {
    #[arg(long)]
    scene: PathBuf,
    /// Grid size.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_inputs(cfg: &RunConfig) -> Result<(Scene, MotionPlan)> {
    let scene = Scene::load(&cfg.scene).with_context(|| format!("scene {}", cfg.scene.display()))?;
    let plan = load_plan(&cfg.plan, &scene.chain).with_context(|| format!("plan {}", cfg.plan.display()))?;
    let offenders = warn_joint_limits(&plan, &scene.chain);
    if offenders > 0 {
        log::warn!("{offenders} segment(s) leave the joint limits");
    }
    Ok((scene, plan))
}

fn prepare_out(out: &Option<PathBuf>) -> Result<Option<&Path>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct Timing {
    total_ms: f64,
    max_ms: f64,
    median_ms: f64,
}

#[derive(Serialize)]
struct FailedCell {
    segment: usize,
    pair: usize,
    status: pathcert::certify::CellStatus,
}

#[derive(Serialize)]
struct CertifySummary {
    version: u32,
    command: &'static str,
    verdict: PlanVerdict,
    degree: u32,
    pairs: usize,
    segments: usize,
    cells: usize,
    safe_cells: usize,
    nsafe_cells: usize,
    failed: Vec<FailedCell>,
    solver_time: Timing,
    wall_ms: f64,
    confirmation: Confirmation,
}

fn summarize(report: &PlanReport, confirmation: Confirmation) -> CertifySummary {
    let mut times: Vec<f64> = report.cells.iter().map(|c| c.solve_ms).collect();
    times.sort_by(f64::total_cmp);
    let median = if times.is_empty() { 0.0 } else { times[times.len() / 2] };
    CertifySummary {
        version: OUTPUT_VERSION,
        command: "certify",
        verdict: report.verdict,
        degree: report.degree,
        pairs: report.pairs,
        segments: report.segments,
        cells: report.cells.len(),
        safe_cells: report.certified_cells(),
        nsafe_cells: report.cells.len() - report.certified_cells(),
        failed: report
            .failing_cells()
            .map(|c| FailedCell { segment: c.segment, pair: c.pair_index, status: c.status })
            .collect(),
        solver_time: Timing {
            total_ms: times.iter().sum(),
            max_ms: times.last().copied().unwrap_or(0.0),
            median_ms: median,
        },
        wall_ms: report.total_ms,
        confirmation,
    }
}

#[derive(Serialize)]
struct CellDocument<'a> {
    version: u32,
    cell: &'a pathcert::certify::CellReport,
}

fn cmd_certify(cfg: &RunConfig) -> Result<u8> {
    let (scene, plan) = load_inputs(cfg)?;
    let out = prepare_out(&cfg.out)?;
    let opts = CertifyOptions {
        degree: cfg.degree,
        jobs: cfg.jobs as usize,
        early_stop: cfg.early_stop,
        lowering: LoweringOptions::default(),
        solver: SolverOptions::from_env(),
        check: CheckOptions { exact: cfg.exact_verify, ..CheckOptions::default() },
    };
    info!("certifying {} segment(s) x {} pair(s)", plan.segments().len(), scene.pairs.len());
    let report = certify_plan(&plan, &scene, &opts);
    let confirmation = confirm_nsafe(&report, &plan, &scene, cfg.falsify_n)?;

    let code = match (&report.verdict, &confirmation) {
        (PlanVerdict::Safe, _) => EXIT_SAFE,
        (_, Confirmation::Collision(_)) => EXIT_COLLISION,
        _ => EXIT_UNCERTIFIED,
    };
    let summary = summarize(&report, confirmation);
    if let Some(dir) = out {
        for cell in &report.cells {
            write_json(&dir.join(format!("seg{}_pair{}.cert.json", cell.segment, cell.pair_index)), &CellDocument {
                version: OUTPUT_VERSION,
                cell,
            })?;
        }
        write_json(&dir.join("summary.json"), &summary)?;
    }

    println!(
        "{}: {} pair(s) x {} segment(s), {} cell(s) certified, {} not",
        match report.verdict {
            PlanVerdict::Safe => "SAFE",
            PlanVerdict::Nsafe => "NSAFE",
        },
        summary.pairs,
        summary.segments,
        summary.safe_cells,
        summary.nsafe_cells
    );
    for f in &summary.failed {
        println!("  segment {} pair {}: {:?}", f.segment, f.pair, f.status);
    }
    match &summary.confirmation {
        Confirmation::Collision(c) => println!(
            "  collision at segment {} t = {:.6} between bodies {} and {} (distance {:.3e})",
            c.segment, c.t, c.pair.a, c.pair.b, c.min_distance
        ),
        Confirmation::Unconfirmed { hint, .. } => println!("  {hint}"),
        Confirmation::NotNeeded => {}
    }
    Ok(code)
}

#[derive(Serialize)]
struct FalsifyDocument {
    version: u32,
    #[serde(flatten)]
    report: FalsifyReport,
}

fn cmd_falsify(cfg: &RunConfig) -> Result<u8> {
    let (scene, plan) = load_inputs(cfg)?;
    let out = prepare_out(&cfg.out)?;
    let report = sample_falsify(&plan, &scene, cfg.falsify_n)?;
    if let Some(dir) = out {
        write_json(&dir.join("falsify.json"), &FalsifyDocument { version: OUTPUT_VERSION, report: report.clone() })?;
    }
    match report.collision() {
        Some(c) => {
            println!(
                "collision at segment {} t = {:.6} between bodies {} and {} (distance {:.3e})",
                c.segment, c.t, c.pair.a, c.pair.b, c.min_distance
            );
            Ok(EXIT_COLLISION)
        }
        None => {
            println!("no collision in {} samples per segment", report.samples_per_segment);
            Ok(EXIT_SAFE)
        }
    }
}

fn cmd_export(cfg: &RunConfig) -> Result<u8> {
    let (scene, plan) = load_inputs(cfg)?;
    let Some(dir) = prepare_out(&cfg.out)? else {
        bail!("export needs --out");
    };
    let mut written = 0;
    for (s, seg) in plan.segments().iter().enumerate() {
        for (p, pair) in scene.pairs.iter().enumerate() {
            let program = assemble_pair_program(&scene, *pair, s, seg, cfg.degree, &LoweringOptions::default())?;
            let path = dir.join(format!("seg{s}_pair{p}.dat-s"));
            fs::write(&path, export_standard(&program.problem)).with_context(|| format!("cannot write {}", path.display()))?;
            written += 1;
        }
    }
    println!("wrote {written} program(s) to {}", dir.display());
    Ok(EXIT_SAFE)
}

#[derive(Serialize)]
struct FkReport {
    version: u32,
    command: &'static str,
    points: usize,
    samples: usize,
    max_deviation: f64,
}

/// Deterministic low-discrepancy grid inside the joint limits (TC values
/// for revolute joints).
fn sample_configuration(chain: &KinematicChain, k: usize, n: usize) -> Vec<f64> {
    (0..chain.dof())
        .map(|j| {
            let joint = chain.joint(j);
            let [lo, hi] = match joint.kind {
                JointKind::Revolute => joint.tc_limits(),
                JointKind::Prismatic => joint.limits,
            };
            let u = ((k as f64 + 0.5) / n as f64 + 0.618_033_988_749_895 * j as f64).fract();
            lo + (hi - lo) * u
        })
        .collect()
}

fn cmd_fk_check(cfg: &FkConfig) -> Result<u8> {
    let scene = Scene::load(&cfg.scene).with_context(|| format!("scene {}", cfg.scene.display()))?;
    if cfg.samples == 0 {
        bail!("--samples must be positive");
    }
    let out = prepare_out(&cfg.out)?;
    let chain = &scene.chain;
    let mut anchors = Vec::new();
    for body in &scene.bodies {
        match &body.shape {
            Shape::Sphere { center, .. } => anchors.push((body.link, *center)),
            Shape::Polytope { vertices } => anchors.extend(vertices.iter().map(|v| (body.link, *v))),
        }
    }
    let symbolic = anchors
        .iter()
        .map(|(link, p)| chain.forward_kinematics_rational(KinematicChain::WORLD, *link, p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut max_dev: f64 = 0.0;
    for k in 0..cfg.samples {
        let s = sample_configuration(chain, k, cfg.samples);
        for ((link, p), fk) in anchors.iter().zip(&symbolic) {
            let numeric = chain.point_position(KinematicChain::WORLD, *link, p, &s)?;
            let rational = fk.eval(&s)?;
            max_dev = max_dev.max((numeric - rational).amax());
        }
    }
    let report = FkReport {
        version: OUTPUT_VERSION,
        command: "fk-check",
        points: anchors.len(),
        samples: cfg.samples,
        max_deviation: max_dev,
    };
    if let Some(dir) = out {
        write_json(&dir.join("fk_check.json"), &report)?;
    }
    println!("max |Δ| = {max_dev:e} over {} point(s) x {} configuration(s)", report.points, report.samples);
    Ok(EXIT_SAFE)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_SAFE });
        }
    };
    let result = match &cli.command {
        Command::Certify(c) => cmd_certify(c),
        Command::Falsify(c) => cmd_falsify(c),
        Command::Export(c) => cmd_export(c),
        Command::FkCheck(c) => cmd_fk_check(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
