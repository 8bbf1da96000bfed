use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fhn_rdm::config::RunConfig;
use fhn_rdm::Error;

mod commands;
mod plot;

#[derive(Parser, Debug)]
#[command(name = "fhn-rdm", version, about = "Travelling pulses of the FitzHugh-Nagumo reaction-diffusion-mechanics model")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output_dir in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and contour sampling.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// One eps value, or a comma-separated list for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Overrides the threshold parameter a.
    #[arg(long, global = true)]
    a: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve for the travelling pulse and export it.
    Pulse,
    /// Essential spectrum, contour counts and reduced problems.
    Spectrum,
    /// Melnikov integrals and the predicted second eigenvalue.
    Melnikov,
    /// Perturbed-pulse PDE run with orbital distance tracking.
    Simulate,
    /// Per-eps table of speeds, eigenvalues and Melnikov values.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Pulse => "pulse",
            Command::Spectrum => "spectrum",
            Command::Melnikov => "melnikov",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }
}

const EXIT_NUMERICAL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn build_config(common: &Common) -> fhn_rdm::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(a) = common.a {
        cfg.params.a = a;
    }
    if let Some(list) = &common.eps {
        if list.len() == 1 {
            cfg.params.eps = list[0];
        } else if let Some(&first) = list.first() {
            cfg.params.eps = first;
            cfg.sweep = Some(list.clone());
        }
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if common.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_error(dir: &Path, command: &str, kind: &str, err: &Error) {
    let body = json!({ "command": command, "status": kind, "error": err.to_string() });
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = fhn_rdm::io::write_json(&dir.join("error.json"), &body);
    }
    eprintln!("{kind}: {err}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let fallback_dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let cfg = match build_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            write_error(&fallback_dir, name, "config_rejected", &e);
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(j) = cli.common.jobs {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let out = cfg.output_dir.clone();
    if let Err(e) = std::fs::create_dir_all(&out) {
        write_error(&fallback_dir, name, "io_error", &Error::Io(e));
        return ExitCode::from(EXIT_NUMERICAL);
    }
    let start = Instant::now();
    let result = match cli.command {
        Command::Pulse => commands::pulse(&cfg, &out),
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::Melnikov => commands::melnikov(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
    };
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(artifacts) => {
            let manifest = json!({
                "command": name,
                "status": "ok",
                "version": env!("CARGO_PKG_VERSION"),
                "config": cfg,
                "jobs": rayon::current_num_threads(),
                "wall_time_s": elapsed,
                "artifacts": artifacts,
            });
            if let Err(e) = fhn_rdm::io::write_json(&out.join("manifest.json"), &manifest) {
                write_error(&out, name, "io_error", &e);
                return ExitCode::from(EXIT_NUMERICAL);
            }
            println!("{name}: ok ({elapsed:.2} s), outputs in {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) | Err(e @ Error::InvalidParameter(_)) => {
            write_error(&out, name, "config_rejected", &e);
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            write_error(&out, name, "numerical_failure", &e);
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
