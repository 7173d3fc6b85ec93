//! `memsat` command-line front end.
//!
//! Exit codes: 0 success (or solved), 10 unsolved within the step budget,
//! 2 usage error, 3 input error, 1 anything else.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use memsat::barthel::{self, GeneratorConfig, Ratio};
use memsat::dynamics::{self, Params, DEFAULT_MAX_STEPS};
use memsat::fixedpoint::{self, FixedParams};
use memsat::formula::Formula;
use memsat::harness::{self, EnsembleConfig, ExportFormat};
use memsat::{EngineKind, RunResult};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "memsat", version, about = "Digital memcomputing 3-SAT solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted 3-SAT instance in DIMACS format.
    Generate(GenerateArgs),
    /// Solve a DIMACS 3-SAT instance.
    Solve(SolveArgs),
    /// Run an ensemble over problem sizes and fit the scaling exponent.
    Bench(BenchArgs),
    /// Fit a power law to `N,median` rows from a CSV file.
    Fit(FitArgs),
    /// Project FPGA resources and time for a problem size.
    Resources(ResourcesArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Integrator to use.
    #[arg(long, default_value = "fixed")]
    engine: EngineKind,
    /// Step budget.
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    /// Euler step as a right shift: dt = 2^-dt_shift.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(0..=30))]
    dt_shift: u32,
}

impl EngineArgs {
    fn float_params(&self) -> Params {
        Params {
            dt: 2f64.powi(-(self.dt_shift as i32)),
            ..Params::default()
        }
        .with_max_steps(self.max_steps)
    }

    fn fixed_params(&self) -> FixedParams {
        FixedParams::default()
            .with_max_steps(self.max_steps)
            .with_dt_shift(self.dt_shift)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(short = 'n', long = "num-vars", default_value_t = 20)]
    num_vars: usize,
    /// Clause-to-variable ratio, as a decimal or a fraction.
    #[arg(long, default_value = "4.3")]
    ratio: Ratio,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// DIMACS output; the sidecar goes to `<out>.json`.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// DIMACS CNF file.
    file: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Seed of the initial condition.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the run result as JSON to this file.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    /// Write a binary per-step state trace (fixed engine only).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Comma-separated problem sizes.
    #[arg(long, value_delimiter = ',', default_value = "20,40,60")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs_per_size: usize,
    /// Base seed for instance and initial-condition seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "4.3")]
    ratio: Ratio,
    /// Concurrent solver runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write per-run CSV or the full JSON report (chosen by extension or --format).
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with `N,median` rows; a header row is optional.
    file: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ResourcesArgs {
    #[arg(short = 'n', long = "num-vars", default_value_t = 100)]
    num_vars: usize,
    /// Also project FPGA time to solution for this many steps.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    json: bool,
}

/// Error classes that map to distinct exit codes.
enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

trait InputContext<T> {
    fn input(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(what())))
    }
}

const EXIT_UNSOLVED: u8 = 10;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Fit(a) => fit(a),
        Command::Resources(a) => resources(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (code, err) = match f {
                Failure::Usage(e) => (2, e),
                Failure::Input(e) => (3, e),
                Failure::Other(e) => (1, e),
            };
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

#[derive(Serialize)]
struct GenerateOutput<'a> {
    #[serde(flatten)]
    sidecar: &'a barthel::PlantedSidecar,
    #[serde(skip_serializing_if = "Option::is_none")]
    cnf: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimacs: Option<String>,
}

fn generate(a: GenerateArgs) -> Result<u8, Failure> {
    let cfg = GeneratorConfig::new(a.num_vars, a.seed).with_ratio(a.ratio);
    let inst = barthel::generate(&cfg).map_err(|e| Failure::Usage(e.into()))?;
    let sidecar = inst.sidecar(a.ratio);

    match &a.out {
        Some(path) => {
            let write = || -> Result<()> {
                let mut w = BufWriter::new(File::create(path)?);
                inst.formula.write_dimacs(&mut w)?;
                w.flush()?;
                let side = sidecar_path(path);
                fs::write(&side, serde_json::to_string_pretty(&sidecar)? + "\n")?;
                Ok(())
            };
            write().with_context(|| format!("writing {}", path.display()))?;
            if a.json {
                print_json(&GenerateOutput {
                    sidecar: &sidecar,
                    cnf: Some(path.display().to_string()),
                    dimacs: None,
                })?;
            } else {
                println!(
                    "wrote {} (N={}, M={}, seed {}) and {}",
                    path.display(),
                    sidecar.num_vars,
                    sidecar.num_clauses,
                    sidecar.seed,
                    sidecar_path(path).display()
                );
            }
        }
        None if a.json => print_json(&GenerateOutput {
            sidecar: &sidecar,
            cnf: None,
            dimacs: Some(inst.formula.to_dimacs_string()),
        })?,
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            inst.formula.write_dimacs(&mut w).map_err(anyhow::Error::from)?;
        }
    }
    Ok(0)
}

fn read_formula(path: &Path) -> Result<Formula, Failure> {
    let file = File::open(path).input(|| format!("opening {}", path.display()))?;
    Formula::parse_dimacs(BufReader::new(file)).input(|| format!("parsing {}", path.display()))
}

fn format_assignment(r: &RunResult) -> String {
    let mut s = String::from("v");
    for (i, &b) in r.assignment.values().iter().enumerate() {
        let lit = i as i64 + 1;
        s.push_str(&format!(" {}", if b { lit } else { -lit }));
    }
    s.push_str(" 0");
    s
}

fn solve(a: SolveArgs) -> Result<u8, Failure> {
    let formula = read_formula(&a.file)?;
    let result = match (a.engine.engine, &a.trace) {
        (EngineKind::Float, Some(_)) => {
            return Err(Failure::Usage(anyhow!("--trace requires --engine fixed")))
        }
        (EngineKind::Float, None) => dynamics::solve(&formula, &a.engine.float_params(), a.seed),
        (EngineKind::Fixed, None) => {
            fixedpoint::solve_q14(&formula, &a.engine.fixed_params(), a.seed)
                .input(|| "instance does not fit the integer datapath".into())?
        }
        (EngineKind::Fixed, Some(path)) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            let r = fixedpoint::solve_q14_traced(&formula, &a.engine.fixed_params(), a.seed, &mut w)
                .map_err(anyhow::Error::from)?;
            w.flush().with_context(|| format!("writing {}", path.display()))?;
            r
        }
    };

    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&result).map_err(anyhow::Error::from)? + "\n";
        fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    }
    if a.json {
        print_json(&result)?;
    } else {
        if result.solved {
            println!(
                "s SATISFIABLE\nc solved in {} steps ({} engine, seed {}, {:.6} s)",
                result.steps, result.engine, result.seed, result.wall_time_s
            );
            println!("{}", format_assignment(&result));
        } else {
            println!(
                "s UNKNOWN\nc not solved within {} steps ({} engine, seed {}, {:.6} s)",
                result.steps, result.engine, result.seed, result.wall_time_s
            );
        }
    }
    Ok(if result.solved { 0 } else { EXIT_UNSOLVED })
}

fn bench(a: BenchArgs) -> Result<u8, Failure> {
    if a.jobs == 0 {
        return Err(Failure::Usage(anyhow!("--jobs must be at least 1")));
    }
    let format = match (&a.format, &a.out) {
        (Some(f), _) => Some(f.parse::<ExportFormat>().map_err(|e| Failure::Usage(e.into()))?),
        (None, Some(p)) if p.extension().is_some_and(|e| e == "csv") => Some(ExportFormat::Csv),
        (None, Some(_)) => Some(ExportFormat::Json),
        (None, None) => None,
    };
    let mut cfg = EnsembleConfig::new(a.engine.engine, a.sizes, a.runs_per_size, a.seed)
        .with_jobs(a.jobs);
    cfg.ratio = a.ratio;
    cfg.float_params = a.engine.float_params();
    cfg.fixed_params = a.engine.fixed_params();
    let report = harness::run_ensemble(&cfg).map_err(|e| Failure::Usage(e.into()))?;

    if let (Some(path), Some(format)) = (&a.out, format) {
        let bytes = harness::export(&report, format).map_err(anyhow::Error::from)?;
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.json {
        print_json(&report)?;
    } else {
        println!(
            "{:>6} {:>6} {:>6} {:>7} {:>12} {:>14}",
            "N", "M", "runs", "solved", "median_steps", "median_wall_s"
        );
        for s in &report.sizes {
            println!(
                "{:>6} {:>6} {:>6} {:>7} {:>12} {:>14}",
                s.num_vars,
                s.num_clauses,
                s.runs,
                s.solved,
                s.median_steps.map_or("-".into(), |m| m.to_string()),
                s.median_wall_time_s.map_or("-".into(), |w| format!("{w:.6}"))
            );
        }
        match &report.fit {
            Some(fit) => println!(
                "fit: median steps ~ {:.4e} * N^{:.4}{}",
                fit.prefactor,
                fit.exponent,
                fit.exponent_stderr
                    .map_or(String::new(), |s| format!(" (stderr {s:.4})"))
            ),
            None => println!("fit: not enough sizes with solved runs"),
        }
        if !report.excluded_sizes.is_empty() {
            println!("excluded from fit: {:?}", report.excluded_sizes);
        }
    }
    Ok(0)
}

fn fit(a: FitArgs) -> Result<u8, Failure> {
    let file = File::open(&a.file).input(|| format!("opening {}", a.file.display()))?;
    let points = harness::read_points_csv(file).input(|| format!("reading {}", a.file.display()))?;
    let fit = harness::fit_power_law(&points).input(|| format!("fitting {}", a.file.display()))?;
    if a.json {
        print_json(&fit)?;
    } else {
        println!(
            "exponent {:.6}, prefactor {:.6}, stderr {}, {} points",
            fit.exponent,
            fit.prefactor,
            fit.exponent_stderr.map_or("n/a".into(), |s| format!("{s:.6}")),
            fit.points
        );
    }
    Ok(0)
}

#[derive(Serialize)]
struct ResourcesOutput {
    #[serde(flatten)]
    estimate: harness::ResourceEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projected_time_s: Option<f64>,
}

fn resources(a: ResourcesArgs) -> Result<u8, Failure> {
    let estimate = harness::estimate_resources(a.num_vars);
    let projected = a.steps.map(|s| estimate.projected_time(s));
    if a.json {
        print_json(&ResourcesOutput {
            estimate,
            steps: a.steps,
            projected_time_s: projected.map(|d| d.as_secs_f64()),
        })?;
    } else {
        println!(
            "N={}: {} LUTs, {} DSPs, fits VCU118: {}{}",
            estimate.n_vars,
            estimate.luts,
            estimate.dsps,
            estimate.fits_vcu118,
            if estimate.in_domain {
                ""
            } else {
                " (below N=40: outside the LUT fit's range)"
            }
        );
        if let (Some(steps), Some(t)) = (a.steps, projected) {
            println!("{steps} steps at {} ns/step: {:?}", estimate.projected_step_ns, t);
        }
    }
    Ok(0)
}
