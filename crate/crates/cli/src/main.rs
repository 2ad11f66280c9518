mod config;
mod error;
mod output;
mod pipelines;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psipi::imaging::PortPair;

use config::{load_config, CorrelationKind, Experiment, ObjectKindSpec, RunConfig, StatisticsSpec};
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "psipi", version, about = "Simulate and invert phase-subtractive two-photon interference")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for map generation.
    #[arg(long, global = true, env = "PSIPI_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ImagingArgs {
    #[arg(long, value_enum)]
    object: Option<ObjectKindSpec>,
    /// Phase object file for `--object file`.
    #[arg(long)]
    object_path: Option<PathBuf>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long, value_enum)]
    correlation: Option<CorrelationKind>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Expected total shot-noise counts.
    #[arg(long)]
    total_counts: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fringe of the two-mode rate against the idler phase difference.
    TwoMode {
        #[arg(long, value_enum)]
        statistics: Option<StatisticsSpec>,
        #[arg(long)]
        scan_points: Option<usize>,
    },
    /// Coincidence map of a phase object.
    Multimode {
        #[command(flatten)]
        imaging: ImagingArgs,
        /// bb, b'b' or bb'.
        #[arg(long)]
        ports: Option<PortPair>,
    },
    /// Single-crystal coincidence map (doubled object phase).
    Herzog {
        #[command(flatten)]
        imaging: ImagingArgs,
    },
    /// Fringe visibility under common-mode frame noise.
    NoiseSweep {
        /// Noise amplitude; repeat for several.
        #[arg(long = "amplitude")]
        amplitudes: Vec<f64>,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Recover the object phase from a coincidence map.
    Reconstruct {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        reference: Option<usize>,
    },
    /// Run the oracle suite and print a pass/fail table.
    Verify,
}

impl ImagingArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if let Some(k) = self.object {
            cfg.object.kind = k;
        }
        cfg.object.path = self.object_path.or(cfg.object.path.take());
        cfg.object.scale = self.scale.or(cfg.object.scale);
        cfg.grid.nx = self.nx.or(cfg.grid.nx);
        cfg.grid.ny = self.ny.or(cfg.grid.ny);
        if let Some(c) = self.correlation {
            cfg.correlation.model = c;
        }
        if let Some(s) = self.sigma {
            cfg.correlation.sigma = s;
        }
        cfg.noise.total_counts = self.total_counts.or(cfg.noise.total_counts);
    }
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let exp = match &cli.command {
        Command::TwoMode { .. } => Experiment::TwoMode,
        Command::Multimode { .. } => Experiment::Multimode,
        Command::Herzog { .. } => Experiment::Herzog,
        Command::NoiseSweep { .. } => Experiment::NoiseSweep,
        Command::Reconstruct { .. } => Experiment::Reconstruct,
        Command::Verify => Experiment::Verify,
    };
    if let Some(declared) = cfg.experiment {
        if declared != exp {
            return Err(CliError::config(format!("config declares experiment `{declared}` but `{exp}` was requested")));
        }
    }
    cfg.experiment = Some(exp);
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.common.out {
        cfg.out = o;
    }
    match cli.command {
        Command::TwoMode { statistics, scan_points } => {
            if let Some(s) = statistics {
                cfg.statistics = s;
            }
            if let Some(n) = scan_points {
                cfg.phases.scan_points = n;
            }
        }
        Command::Multimode { imaging, ports } => {
            imaging.apply(&mut cfg);
            if let Some(p) = ports {
                cfg.ports = p;
            }
        }
        Command::Herzog { imaging } => imaging.apply(&mut cfg),
        Command::NoiseSweep { amplitudes, frames } => {
            if !amplitudes.is_empty() {
                cfg.noise.amplitudes = amplitudes;
            }
            if let Some(f) = frames {
                cfg.noise.frames = f;
            }
        }
        Command::Reconstruct { map, truth, reference } => {
            cfg.reconstruct.map = map.or(cfg.reconstruct.map.take());
            cfg.reconstruct.truth = truth.or(cfg.reconstruct.truth.take());
            cfg.reconstruct.reference = reference.or(cfg.reconstruct.reference);
        }
        Command::Verify => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::acquire(&cfg.out)?;
    out.write_text("config.toml", &cfg.to_toml())?;
    let mut failure = None;
    match cfg.experiment.expect("validated") {
        Experiment::TwoMode => pipelines::two_mode(cfg, &mut out)?,
        Experiment::Multimode => pipelines::multimode(cfg, &mut out)?,
        Experiment::Herzog => pipelines::herzog(cfg, &mut out)?,
        Experiment::NoiseSweep => pipelines::noise_sweep(cfg, &mut out)?,
        Experiment::Reconstruct => pipelines::reconstruct(cfg, &mut out)?,
        Experiment::Verify => {
            let checks = verify::run_checks(cfg)?;
            let table = verify::table(&checks);
            print!("{table}");
            out.write_text("verify.txt", &table)?;
            psipi::io::write_json(out.file("verify.json"), &checks)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                failure = Some(CliError::Numerical(format!("{failed} of {} checks failed", checks.len())));
            }
        }
    }
    out.finish(cfg)?;
    failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match resolve(cli).and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
