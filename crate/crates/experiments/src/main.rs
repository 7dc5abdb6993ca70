use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pline_experiments::runners::{PL, ZHANG, ZHANG_UNREFINED};
use pline_experiments::{
    emit_svg_plot, ingest_corner_file, ingest_demo, run_calibration, run_pair_evaluation, run_skip_experiment,
    run_translation_sweep, ExperimentConfig, ExperimentReport, Method, PlotSelection, Result,
};

#[derive(Parser)]
#[command(name = "pline", version, about = "Principal-line calibration experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// pl, zhang or both (overrides `method`).
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Also write SVG scatter plots where the experiment has them.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Principal-line deflection under board translations.
    Sweep,
    /// Principal point drift when skipping n consecutive ring poses.
    Skip,
    /// Principal point from combinations of half-turn pose pairs.
    Pairs,
    /// Principal point and baseline calibration on one set of views.
    Calibrate {
        /// Corner file to calibrate from instead of the synthetic ring.
        #[arg(long)]
        corners: Option<PathBuf>,
    },
    /// Export the synthetic ring as a corner file, ingest it and calibrate.
    IngestDemo,
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(method) = common.method {
        config.method = method;
    }
    config.svg |= common.svg;
    config.validate()?;
    Ok(config)
}

fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    let path = dir.join(format!("{}.csv", report.experiment));
    report.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_skip_plots(report: &ExperimentReport, config: &ExperimentConfig) -> Result<()> {
    let mut methods = Vec::new();
    if config.method.runs_pl() {
        methods.push(PL);
    }
    if config.method.runs_zhang() {
        methods.push(ZHANG);
        if config.refine {
            methods.push(ZHANG_UNREFINED);
        }
    }
    for method in methods {
        for (ti, t) in config.translations.iter().enumerate() {
            let selection = PlotSelection {
                method: method.to_string(),
                translation: Some((t[0], t[1])),
                seed: Some(config.seed),
            };
            let svg = emit_svg_plot(report, &selection)?;
            let path = config.out_dir.join(format!("skip_{method}_t{ti}.svg"));
            std::fs::write(&path, svg)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve(&cli.common)?;
    std::fs::create_dir_all(&config.out_dir)?;
    match cli.command {
        Command::Sweep => write_report(&run_translation_sweep(&config)?, &config.out_dir),
        Command::Skip => {
            let report = run_skip_experiment(&config)?;
            write_report(&report, &config.out_dir)?;
            if config.svg {
                write_skip_plots(&report, &config)?;
            }
            Ok(())
        }
        Command::Pairs => write_report(&run_pair_evaluation(&config)?, &config.out_dir),
        Command::Calibrate { corners } => {
            let views = corners.as_deref().map(ingest_corner_file).transpose()?;
            write_report(&run_calibration(&config, views.as_deref())?, &config.out_dir)
        }
        Command::IngestDemo => {
            let demo = ingest_demo(&config, &config.out_dir)?;
            println!("wrote {}", demo.corner_file.display());
            write_report(&demo.report, &config.out_dir)?;
            if demo.identical {
                println!("ingested corners reproduce the in-memory report exactly");
                Ok(())
            } else {
                Err(pline_experiments::ExperimentError::Config(
                    "ingested corners changed the calibration report".into(),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
