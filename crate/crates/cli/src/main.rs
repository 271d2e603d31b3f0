use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use saddlescope::app::{run, Command, RunConfig, EXIT_CONFIG};

/// Periodic orbits, invariant manifolds and tangencies of polynomial
/// diffeomorphisms of the plane.
#[derive(Parser, Debug)]
#[command(name = "saddlescope", version)]
struct Cli {
    /// Map and settings file (`key=value` lines with optional `[section]`s).
    #[arg(long, global = true)]
    map: Option<PathBuf>,

    /// Directory for artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Extra `key=value` setting, may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Summary of the map: census, filtration, grid classification.
    Analyze(Period),
    /// Fixed points of f^n for n up to --period-max, with multiplier bounds.
    Orbits(Period),
    /// Trace stable and unstable manifolds of a saddle.
    Manifolds {
        /// plus, minus, or a symbol code such as "+-"
        #[arg(long)]
        saddle: Option<String>,
        /// Arc length to trace inside the window.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Draw traces, saddles, tangencies and the K-grid as SVG.
    Render {
        /// x0,y0,x1,y1
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate the boundary parameter a* in [a-lo, a-hi] at fixed b.
    TangencyHunt {
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a_lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a_hi: Option<f64>,
    },
    /// Run every check and write the verdict report.
    Verify {
        #[command(flatten)]
        period: Period,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Period {
    #[arg(long)]
    period_max: Option<usize>,
}

fn overrides(cli: &Cli) -> Result<(Command, Vec<(String, String)>), String> {
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.push((k.to_string(), v));
        }
    };
    let command = match &cli.command {
        Cmd::Analyze(p) => {
            put("period_max", p.period_max.map(|v| v.to_string()));
            Command::Analyze
        }
        Cmd::Orbits(p) => {
            put("period_max", p.period_max.map(|v| v.to_string()));
            Command::Orbits
        }
        Cmd::Manifolds { saddle, budget } => {
            put("saddle", saddle.clone());
            put("budget", budget.map(|v| v.to_string()));
            Command::Manifolds
        }
        Cmd::Render { window, out } => {
            put("window", window.clone());
            put("out", out.as_ref().map(|p| p.display().to_string()));
            Command::Render
        }
        Cmd::TangencyHunt { b, a_lo, a_hi } => {
            put("b", b.map(|v| v.to_string()));
            put("a_lo", a_lo.map(|v| v.to_string()));
            put("a_hi", a_hi.map(|v| v.to_string()));
            Command::TangencyHunt
        }
        Cmd::Verify { period, report } => {
            put("period_max", period.period_max.map(|v| v.to_string()));
            put("report", report.as_ref().map(|p| p.display().to_string()));
            Command::Verify
        }
    };
    put("out_dir", cli.out_dir.as_ref().map(|p| p.display().to_string()));
    for s in &cli.set {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        kv.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok((command, kv))
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("SADDLESCOPE_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| format!("SADDLESCOPE_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            return Err("SADDLESCOPE_THREADS must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return code(EXIT_CONFIG);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return code(EXIT_CONFIG);
    }
    let cfg = overrides(&cli).and_then(|(command, kv)| RunConfig::from_file(command, cli.map.as_deref(), &kv).map_err(|e| e.to_string()));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return code(EXIT_CONFIG);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for p in &outcome.artifacts {
                eprintln!("wrote {}", p.display());
            }
            code(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            code(e.exit_code())
        }
    }
}
