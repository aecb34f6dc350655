//! `fragrd`: generate reserve landscapes, run single simulations and sweeps,
//! plot sweep tables and run the built-in checks.

mod config;
mod plots;
mod svg;
mod verify;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fragrd_core::landscape::{build_ensemble, generate, Adjacency, DEFAULT_PROTECTED_FRACTION, DEFAULT_SIDE};
use fragrd_core::observables::annual_yield;
use fragrd_core::solver::solve;
use fragrd_core::sweep::{format_number, run_sweep};
use fragrd_core::{GeneratorConfig, Landscape, StrategyKind};

use crate::config::{base_dir, echo, read_toml, EnsembleSection, RunConfigFile, SweepConfigFile};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(fragrd_core::Error),
    Io(PathBuf, io::Error),
    /// Some verification check failed.
    Checks(usize),
}

impl CliError {
    pub fn io(path: &Path, e: io::Error) -> Self {
        CliError::Io(path.to_path_buf(), e)
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_infeasible() => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(..) | CliError::Checks(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            CliError::Checks(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<fragrd_core::Error> for CliError {
    fn from(e: fragrd_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "fragrd", version, about = "Harvesting on fragmented reserve landscapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate landscape files with a prescribed aggregation index.
    Gen(GenArgs),
    /// Simulate one landscape and write t, P, R, flux.
    Run(RunArgs),
    /// Run an ensemble-by-intensity sweep.
    Sweep(SweepArgs),
    /// Run the built-in analytic checks.
    Verify(VerifyArgs),
    /// Re-plot an existing sweep CSV.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_PROTECTED_FRACTION)]
    fraction: f64,
    #[arg(long, conflicts_with = "ensemble", required_unless_present = "ensemble")]
    s_target: Option<u64>,
    /// `start:step:count`.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file for a single landscape (default: standard output).
    #[arg(long, conflicts_with = "ensemble")]
    out: Option<PathBuf>,
    /// Output directory for an ensemble.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    max_iterations: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides `output.csv`; `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML sweep configuration.
    config: PathBuf,
    /// Also write SVG charts.
    #[arg(long)]
    plot: bool,
    /// Use the 62-landscape ensemble s = 94, 100, ..., 460.
    #[arg(long)]
    full_62: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write one CSV per observation time.
    #[arg(long)]
    per_time: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Time step used by the time-dependent checks.
    #[arg(long)]
    dt: Option<f64>,
    /// Count adjacency on a torus (makes the index check fail).
    #[arg(long)]
    toroidal: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// CSV written by `sweep`.
    csv: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Axis label for the intensity column.
    #[arg(long, default_value = "intensity")]
    label: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fragrd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn parse_ensemble(text: &str) -> Result<(u64, u64, usize), CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Config(format!("--ensemble expects start:step:count, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].trim().parse().map_err(|_| bad())?,
        parts[1].trim().parse().map_err(|_| bad())?,
        parts[2].trim().parse().map_err(|_| bad())?,
    ))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    if let Some(spec) = &args.ensemble {
        let (start, step, count) = parse_ensemble(spec)?;
        let landscapes = build_ensemble(args.n, args.fraction, start, step, count, args.seed)?;
        fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
        for (k, l) in landscapes.iter().enumerate() {
            let path = args.out_dir.join(format!("landscape_{:03}_s{}.txt", k + 1, l.s()));
            write_file(&path, &l.to_text())?;
            println!("{}\ts = {}\tprotected = {}", path.display(), l.s(), l.protected_count());
        }
        return Ok(());
    }
    let target = args.s_target.expect("clap requires --s-target without --ensemble");
    let mut cfg = GeneratorConfig::new(args.n, args.fraction, target, args.seed);
    if let Some(it) = args.max_iterations {
        cfg.max_iterations = it;
    }
    let landscape = generate(&cfg)?;
    let summary = format!("s = {}\tprotected = {}", landscape.s(), landscape.protected_count());
    match &args.out {
        Some(path) => {
            write_file(path, &landscape.to_text())?;
            println!("{}\t{summary}", path.display());
        }
        None => {
            print!("{}", landscape.to_text());
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn trajectory_csv(cfg: &RunConfigFile, landscape: &Landscape) -> Result<String, CliError> {
    let traj = solve(landscape, cfg.strategy(), &cfg.params, &cfg.numerics)?;
    let mut out = String::new();
    for line in echo(cfg) {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&format!(
        "# landscape: n = {}, s = {}, protected = {}, digest = {:016x}\n",
        landscape.n(),
        landscape.s(),
        landscape.protected_count(),
        landscape.digest()
    ));
    out.push_str("t,P,R,flux\n");
    let times: Vec<f64> = match &cfg.observation_times {
        Some(times) => times.clone(),
        None => traj.times().to_vec(),
    };
    for t in times {
        let r = if t >= 1.0 - 1e-9 {
            format_number(annual_yield(&traj, t.max(1.0))?)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_number(t),
            format_number(traj.population_at(t)?),
            r,
            format_number(traj.flux_at(t)?)
        ));
    }
    Ok(out)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let cfg: RunConfigFile = read_toml(&args.config)?;
    cfg.validate()?;
    let base = base_dir(&args.config);
    let landscape = cfg.landscape.load(&base)?;
    let csv = trajectory_csv(&cfg, &landscape)?;
    let target = match (&args.out, &cfg.output.csv) {
        (Some(p), _) if p.as_os_str() == "-" => None,
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(base.join(p)),
        (None, None) => None,
    };
    match target {
        Some(path) => write_file(&path, &csv),
        None => io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut file: SweepConfigFile = read_toml(&args.config)?;
    if args.full_62 {
        let master_seed = file.ensemble.master_seed().unwrap_or(1);
        file.ensemble = EnsembleSection::Full { master_seed };
    }
    if args.threads.is_some() {
        file.threads = args.threads;
    }
    file.output.plot |= args.plot;
    file.output.per_time |= args.per_time;
    let base = base_dir(&args.config);
    let dir = match (&args.out_dir, &file.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => PathBuf::from("."),
    };
    let config = file.sweep_config()?;
    let landscapes = file.ensemble.load(&base)?;
    let result = run_sweep(&config, &landscapes)?;

    let mut metadata = echo(&file);
    metadata.extend(result.provenance());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let write_csv = |path: PathBuf, t: Option<f64>| -> Result<(), CliError> {
        let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(f);
        match t {
            Some(t) => result.write_csv_at(&mut w, &metadata, t),
            None => result.write_csv(&mut w, &metadata),
        }
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&path, e))?;
        println!("{}", path.display());
        Ok(())
    };
    write_csv(dir.join("sweep.csv"), None)?;
    if file.output.per_time {
        for &t in result.observation_times() {
            write_csv(dir.join(format!("sweep_t{}.csv", format_number(t))), Some(t))?;
        }
    }

    let losses_path = dir.join("losses.csv");
    let mut losses = String::new();
    for line in &metadata {
        losses.push_str(&format!("# {line}\n"));
    }
    losses.push_str("intensity,t,P_loss_pct,R_loss_pct\n");
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for row in result.losses()? {
        losses.push_str(&format!(
            "{},{},{},{}\n",
            format_number(row.intensity),
            format_number(row.t),
            opt(row.population_loss),
            opt(row.yield_loss)
        ));
    }
    write_file(&losses_path, &losses)?;
    println!("{}", losses_path.display());

    if file.output.plot {
        let label = intensity_label(config.strategy);
        for path in plots::write_plots(&plots::rows_of(&result), label, &dir)? {
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn intensity_label(kind: StrategyKind) -> &'static str {
    match kind {
        StrategyKind::QuasiConstantYield => "quota [individuals/km^2/year]",
        StrategyKind::Proportional => "effort [1/year]",
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let mut opts = verify::Options::default();
    if let Some(dt) = args.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CliError::Config(format!("--dt must be positive, got {dt}")));
        }
        opts.dt = dt;
    }
    if args.toroidal {
        opts.adjacency = Adjacency::Toroidal;
    }
    let checks = verify::run_all(&opts);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(CliError::Checks(n)),
    }
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let rows = plots::read_csv(&args.csv)?;
    for path in plots::write_plots(&rows, &args.label, &args.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}
