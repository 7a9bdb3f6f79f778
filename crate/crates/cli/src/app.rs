//! Argument parsing, dispatch and output writing.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bernoulli_core::closed_form::{weiss_closed_form, weiss_gap, GlobalSolution};
use bernoulli_core::config::{Config, ScenarioName};
use bernoulli_core::experiments::{
    run_angle_d, run_classify_c, run_growth_a, run_instability_e, run_weiss_gap, run_weiss_profile, ExperimentResult,
    Figure, Lab, Outcome, RunManifest, SolveSummary,
};
use bernoulli_core::freeboundary::extract_field;
use bernoulli_core::io::{field_table, from_json, read_text, to_json, write_text, Table};
use bernoulli_core::{derive_params, Error, Result};

use crate::svg::emit_svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bernoulli", version, about = "Two-phase Bernoulli free-boundary laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print gamma, theta and the Weiss energies of the homogeneous solutions.
    Closedform(ClosedformArgs),
    /// Solve once and write the field, the free boundary and pictures.
    Solve(RunArgs),
    /// Weiss profile of the minimizer and the Weiss ordering of the homogeneous solutions.
    Weiss(RunArgs),
    /// Blow-up classification of the minimizers with homogeneous traces.
    Blowup(RunArgs),
    /// Touch-angle profile of the free boundary.
    Angle(RunArgs),
    /// Linear growth at the contact point.
    Growth(RunArgs),
    /// Free boundary under the perturbed flat datum.
    Instability(RunArgs),
    /// Re-read an output directory and print its verdicts.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ClosedformArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha_plus: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_minus: f64,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub lambda_plus: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_minus: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Override a configuration key, e.g. `--set spec.g_coeff=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub dir: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Closedform(a) => closedform(&a),
        Command::Report(a) => report(&a.dir),
        Command::Solve(a) => run_command("solve", &a, None),
        Command::Weiss(a) => run_command("weiss", &a, Some(ScenarioName::WeissGap)),
        Command::Blowup(a) => run_command("blowup", &a, Some(ScenarioName::ClassifyC)),
        Command::Angle(a) => run_command("angle", &a, Some(ScenarioName::AngleD)),
        Command::Growth(a) => run_command("growth", &a, Some(ScenarioName::GrowthA)),
        Command::Instability(a) => run_command("instability", &a, Some(ScenarioName::InstabilityE)),
    }
}

fn closedform(a: &ClosedformArgs) -> Result<i32> {
    let spec = derive_params(a.alpha_plus, a.alpha_minus, a.lambda_plus, a.lambda_minus, 0.0, 1.0)?;
    println!("Lambda      {:.12}", spec.big_lambda);
    match (spec.gamma, spec.theta) {
        (Some(g), Some(t)) => {
            println!("gamma       {g:.12}");
            println!("theta       {t:.12} ({:.6} deg)", t.to_degrees());
            println!("W(1, v_S)   {:.12}", weiss_closed_form(&GlobalSolution::small(spec))?);
            println!("W(1, v_L)   {:.12}", weiss_closed_form(&GlobalSolution::large(spec))?);
            println!("gap         {:.12}", weiss_gap(&spec)?);
            if spec.degenerate_tangential {
                println!("degenerate-tangential: both rays lie along x1");
            }
        }
        _ if spec.no_free_boundary => println!("no free boundary: Lambda <= a+^2 - a-^2"),
        _ => println!("gamma undefined: a+ = a-"),
    }
    Ok(EXIT_OK)
}

fn load_config(a: &RunArgs, scenario: Option<ScenarioName>) -> Result<Config> {
    let text = match &a.config {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let mut cfg = Config::from_toml_with(&text, &a.overrides)?;
    if let Some(name) = scenario {
        cfg.scenario.name = name;
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let busy = std::fs::read_dir(dir)?.next().is_some();
        if busy && !force {
            return Err(Error::Io(format!("{} is not empty; pass --force to overwrite", dir.display())));
        }
    } else {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

fn run_command(command: &str, a: &RunArgs, scenario: Option<ScenarioName>) -> Result<i32> {
    let cfg = load_config(a, scenario)?;
    let s = cfg.scenario()?;
    prepare_out(&a.out, a.force)?;
    let start = Instant::now();
    let result = match command {
        "solve" => solve_only(&s)?,
        "weiss" => {
            let (profile, _) = run_weiss_profile(&s)?;
            if s.spec.gamma.is_some() {
                profile.merge(run_weiss_gap(&s)?)
            } else {
                profile
            }
        }
        "blowup" => run_classify_c(&s)?,
        "angle" => run_angle_d(&s)?,
        "growth" => run_growth_a(&s)?,
        "instability" => run_instability_e(&s)?,
        other => return Err(Error::Config(format!("unknown command {other}"))),
    };
    let outputs = write_outputs(&a.out, &result)?;
    let manifest = RunManifest::new(command, &cfg, &result, outputs);
    write_text(&a.out.join("manifest.json"), &to_json(&manifest)?)?;
    write_text(&a.out.join("timing.json"), &to_json(&Timing { wall_seconds: start.elapsed().as_secs_f64() })?)?;
    print_summary(&manifest);
    Ok(exit_code(&result))
}

fn solve_only(s: &bernoulli_core::config::Scenario) -> Result<ExperimentResult> {
    let lab = Lab::new(s.mesh)?;
    let report = lab.solve(&s.spec, s.params.datum, &s.solve)?;
    let curve = extract_field(&report.field);
    let mut energy = Table::new(&["dirichlet", "phase_area", "total", "outer_iters", "polish_sweeps", "converged"]);
    energy.push(vec![
        report.energy.dirichlet,
        report.energy.phase_area_pos,
        report.energy.total,
        report.outer_iters as f64,
        report.polish_sweeps_run as f64,
        if report.converged { 1.0 } else { 0.0 },
    ]);
    let mut out = ExperimentResult::from_solve(SolveSummary {
        label: "solve".into(),
        energy: report.energy.total,
        converged: report.converged,
        outer_iters: report.outer_iters,
        polish_sweeps: report.polish_sweeps_run,
    });
    out.tables.insert("energy.csv".into(), energy);
    out.tables.insert("field.csv".into(), field_table(&report.field));
    let rays = if s.spec.gamma.is_some() {
        vec![(bernoulli_core::Variant::Small, s.spec), (bernoulli_core::Variant::Large, s.spec)]
    } else {
        Vec::new()
    };
    out.figures.push(Figure { name: "fb".into(), field: Some(report.field), curve, rays, cones: Vec::new() });
    Ok(out)
}

/// Writes tables, free-boundary CSVs and pictures; returns the file names.
fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (name, table) in &result.tables {
        write_text(&dir.join(name), &table.to_csv()?)?;
        names.push(name.clone());
    }
    for fig in &result.figures {
        let csv = format!("{}.csv", fig.name);
        write_text(&dir.join(&csv), &fig.curve.to_csv()?)?;
        names.push(csv);
        let svg = format!("{}.svg", fig.name);
        emit_svg(fig, &dir.join(&svg))?;
        names.push(svg);
    }
    Ok(names)
}

fn print_summary(m: &RunManifest) {
    for c in &m.checks {
        let mark = if c.passed { "ok  " } else if c.gating { "FAIL" } else { "note" };
        println!("{mark} {:<32} value {:>14.6e}  tol {:>11.4e}  {}", c.name, c.value, c.tolerance, c.note);
    }
    for s in &m.solves {
        if !s.converged {
            println!("not converged: {}", s.label);
        }
    }
    println!("outcome: {:?}", m.outcome);
}

fn exit_code(r: &ExperimentResult) -> i32 {
    match r.outcome {
        Outcome::Pass => EXIT_OK,
        Outcome::Fail => EXIT_FAIL,
        Outcome::Inconclusive => EXIT_NOT_CONVERGED,
    }
}

/// Contents of an output directory read back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportData {
    pub manifest: RunManifest,
    pub tables: Vec<(String, Table)>,
}

pub fn read_report(dir: &Path) -> Result<ReportData> {
    let manifest: RunManifest = from_json(&read_text(&dir.join("manifest.json"))?)?;
    if manifest.schema_version != bernoulli_core::experiments::SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported schema_version {}", manifest.schema_version)));
    }
    let mut tables = Vec::new();
    for name in manifest.outputs.iter().filter(|n| n.ends_with(".csv")) {
        tables.push((name.clone(), Table::from_csv(&read_text(&dir.join(name))?)?));
    }
    Ok(ReportData { manifest, tables })
}

fn report(dir: &Path) -> Result<i32> {
    let data = read_report(dir)?;
    println!("command: {}", data.manifest.command);
    for (name, t) in &data.tables {
        println!("{name}: {} rows x {} columns", t.rows.len(), t.header.len());
    }
    print_summary(&data.manifest);
    Ok(EXIT_OK)
}
