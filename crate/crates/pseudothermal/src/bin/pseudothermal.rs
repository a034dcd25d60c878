//! Command-line pipeline: simulate speckle stacks and run the Fig. 2 / Fig. 3
//! style analyses on them.
//!
//! Exit codes: 0 success, 2 configuration or input parse error, 3 file I/O or
//! format error, 4 degenerate or failed analysis, 5 physics regime violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pseudothermal::config::{ConfigError, RunConfig};
use pseudothermal::correlation::{estimate_g2, fit_g2, g2_model_1tls, g2_model_2tls, G2FitContext, G2Hints, G2Model};
use pseudothermal::export::{
    curve_csv, curve_svg, g2_fit_report, histogram_csv, histogram_svg, parse_curve_csv, stats_fit_report,
    ExportError,
};
use pseudothermal::pipeline::{simulate_stack, PipelineError};
use pseudothermal::stack::{read_stack, write_stack, StackError};
use pseudothermal::stats::{fit_noisy_exponential, histogram};

#[derive(Parser)]
#[command(name = "pseudothermal", version, about = "Pseudothermal light source simulator and analysis toolkit")]
struct Cli {
    /// Output directory (env: PSEUDOTHERMAL_OUT_DIR), default current dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Rayon thread count (env: PSEUDOTHERMAL_THREADS), default automatic.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a speckle frame stack from a run configuration.
    Simulate {
        /// Run configuration file (key = value); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override run.master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.frames.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Histogram a stack and fit the noisy-exponential photon statistics.
    Stats {
        #[arg(long)]
        stack: PathBuf,
    },
    /// Estimate the g2 correlation curve along detector rows.
    G2 {
        #[arg(long)]
        stack: PathBuf,
        /// Reference pixel column x0.
        #[arg(long, default_value_t = 0)]
        x0: usize,
        /// Largest pixel offset from x0.
        #[arg(long)]
        max_offset: usize,
    },
    /// Fit the one- or two-source g2 model to a curve CSV.
    Fit {
        #[arg(long)]
        curve: PathBuf,
        /// `one` or `two`.
        #[arg(long)]
        model: String,
    },
    /// Summarize the artifacts in a run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

enum CliError {
    Config(String),
    Io(String),
    Analysis(String),
    Physics(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Analysis(_) => 4,
            CliError::Physics(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Analysis(m) | CliError::Physics(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<StackError> for CliError {
    fn from(e: StackError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Io(io) => CliError::Io(io.to_string()),
            bad @ ExportError::BadCsv { .. } => CliError::Config(bad.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            PipelineError::Stack(s) => s.into(),
            PipelineError::Propagation(p) => CliError::Physics(p.to_string()),
            PipelineError::Source(s) => CliError::Config(s.to_string()),
            PipelineError::Sensor(s) => CliError::Analysis(s.to_string()),
        }
    }
}

impl From<pseudothermal::stats::StatsError> for CliError {
    fn from(e: pseudothermal::stats::StatsError) -> Self {
        CliError::Analysis(e.to_string())
    }
}

impl From<pseudothermal::correlation::CorrelationError> for CliError {
    fn from(e: pseudothermal::correlation::CorrelationError) -> Self {
        CliError::Analysis(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os("PSEUDOTHERMAL_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let threads = cli.threads.or_else(|| {
        std::env::var("PSEUDOTHERMAL_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&out_dir)?;

    match cli.command {
        Command::Simulate { config, seed, frames } => cmd_simulate(&out_dir, config.as_deref(), seed, frames),
        Command::Stats { stack } => cmd_stats(&out_dir, &stack),
        Command::G2 { stack, x0, max_offset } => cmd_g2(&out_dir, &stack, x0, max_offset),
        Command::Fit { curve, model } => cmd_fit(&out_dir, &curve, &model),
        Command::Report { run_dir } => cmd_report(&out_dir, &run_dir),
    }
}

fn cmd_simulate(
    out_dir: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    frames: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(f) = frames {
        cfg.frames = f;
    }
    cfg.validate()?;
    let stack = simulate_stack(&cfg)?;
    let stack_path = out_dir.join("stack.spkl");
    write_stack(&stack, &stack_path)?;
    std::fs::write(out_dir.join("config.txt"), cfg.to_text())?;
    let warn = stack.frames.iter().filter(|f| f.saturation_warning()).count();
    if warn > 0 {
        eprintln!("warning: {warn} of {} frames have >0.1% clipped pixels", stack.frames.len());
    }
    println!("wrote {} ({} frames of {}x{})", stack_path.display(), stack.frame_count(), stack.width(), stack.height());
    Ok(())
}

fn cmd_stats(out_dir: &Path, stack_path: &Path) -> Result<(), CliError> {
    let stack = read_stack(stack_path)?;
    let h = histogram(&stack)?;
    let fit = fit_noisy_exponential(&h, Some(&stack.meta.noise))?;
    std::fs::write(out_dir.join("histogram.csv"), histogram_csv(&h, Some(&fit)))?;
    std::fs::write(out_dir.join("histogram.svg"), histogram_svg(&h, Some(&fit)))?;
    let report = stats_fit_report(&fit);
    std::fs::write(out_dir.join("stats_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_g2(out_dir: &Path, stack_path: &Path, x0: usize, max_offset: usize) -> Result<(), CliError> {
    let stack = read_stack(stack_path)?;
    let curve = estimate_g2(&stack, x0, max_offset)?;
    let ctx = G2FitContext {
        wavelength: stack.meta.fiber.wavelength(),
        distance_z: stack.meta.detector.distance_z,
    };
    let csv = curve_csv(&curve, &ctx);
    let path = out_dir.join("g2_curve.csv");
    std::fs::write(&path, csv)?;
    println!(
        "wrote {} ({} offsets, g2(0) = {:.3})",
        path.display(),
        curve.g2_values.len(),
        curve.g2_values[0]
    );
    Ok(())
}

fn cmd_fit(out_dir: &Path, curve_path: &Path, model: &str) -> Result<(), CliError> {
    let model = match model {
        "one" => G2Model::OneTLS,
        "two" => G2Model::TwoTLS,
        other => return Err(CliError::Config(format!("model must be `one` or `two`, got `{other}`"))),
    };
    let text = std::fs::read_to_string(curve_path)?;
    let (curve, ctx) = parse_curve_csv(&text)?;
    let ctx = ctx.ok_or_else(|| {
        CliError::Config("curve CSV lacks embedded wavelength/distance geometry comments".into())
    })?;
    let fit = fit_g2(&curve, model, &ctx, &G2Hints::default())?;
    let report = g2_fit_report(&fit);
    std::fs::write(out_dir.join("g2_fit.txt"), &report)?;
    let model_pts: Vec<(f64, f64)> = curve
        .separations
        .iter()
        .map(|&dr| {
            let y = match fit.separation_d {
                None => g2_model_1tls(dr, fit.aperture_radius_a, ctx.wavelength, ctx.distance_z, fit.offset_c, fit.modulation_v),
                Some(d) => g2_model_2tls(dr, fit.aperture_radius_a, d, ctx.wavelength, ctx.distance_z, fit.offset_c, fit.modulation_v),
            };
            (dr, y)
        })
        .collect();
    std::fs::write(out_dir.join("g2_fit.svg"), curve_svg(&curve, Some(&model_pts)))?;
    print!("{report}");
    Ok(())
}

fn cmd_report(out_dir: &Path, run_dir: &Path) -> Result<(), CliError> {
    let mut report = String::from("pseudothermal run summary\n=========================\n");
    let stack_path = run_dir.join("stack.spkl");
    if stack_path.exists() {
        let stack = read_stack(&stack_path)?;
        report.push_str(&format!(
            "\nstack: {} frames of {}x{} at {} bits\n",
            stack.frame_count(),
            stack.width(),
            stack.height(),
            stack.meta.detector.bit_depth
        ));
        report.push_str(&format!(
            "fiber: core radius {} m, NA {}, wavelength {} m\n",
            stack.meta.fiber.core_radius(),
            stack.meta.fiber.numerical_aperture(),
            stack.meta.fiber.wavelength()
        ));
        report.push_str(&format!(
            "detector: z = {} m, pitch {} m, master seed {}\n",
            stack.meta.detector.distance_z, stack.meta.detector.pixel_pitch, stack.meta.master_seed
        ));
    } else {
        report.push_str("\nstack: none\n");
    }
    for (file, title) in [
        ("config.txt", "configuration"),
        ("stats_report.txt", "photon statistics fit"),
        ("g2_fit.txt", "g2 model fit"),
    ] {
        let path = run_dir.join(file);
        if let Ok(text) = std::fs::read_to_string(&path) {
            report.push_str(&format!("\n{title} ({file}):\n"));
            for line in text.lines() {
                report.push_str("  ");
                report.push_str(line);
                report.push('\n');
            }
        }
    }
    std::fs::write(out_dir.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}
