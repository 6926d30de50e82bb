use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relational::harness::config::{BecConfig, LightConfig, ModelConfig, OracleConfig, ScatteringConfig};
use relational::harness::{run, verify, ExperimentConfig, Scenario};
use relational::Error;

/// Relative phase and position localization: figure data, batch runs and the acceptance suite.
///
/// Thread count follows RAYON_NUM_THREADS; results do not depend on it.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the data behind one figure.
    #[command(subcommand)]
    Figure(Figure),
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
    /// Execute the acceptance suite and print one line per criterion.
    Verify {
        /// Only this criterion.
        #[arg(long)]
        criterion: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Config file; its values take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Figure {
    /// Exact and approximate record probabilities against the phase peak.
    FockPlr {
        #[arg(long = "N", default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Mean fringe visibility against atom count.
    BecVisibility {
        #[arg(long, default_value_t = 5000)]
        runs: usize,
        #[arg(long = "D", default_value_t = 50)]
        d: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write every run's positions and fringes as well.
        #[arg(long)]
        per_run: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Separation density after forward and deflected monochromatic photons.
    ScatterMono {
        #[arg(long, default_value_t = 5.0)]
        k: f64,
        /// Thermal spread in wavelengths.
        #[arg(long, default_value_t = 0.2)]
        d: f64,
        #[arg(long = "F", default_value_t = 3)]
        forward: usize,
        #[arg(long = "S", default_value_t = 2)]
        deflect: usize,
        #[arg(long, default_value_t = 0.0)]
        lower: f64,
        #[arg(long, default_value_t = 2.0)]
        upper: f64,
        /// Half-angle of the forward cone, radians.
        #[arg(long, default_value_t = 0.02)]
        view: f64,
        #[arg(long, default_value_t = 2001)]
        n_grid: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn figure_config(f: Figure) -> Result<ExperimentConfig, Error> {
    let (mut cfg, common, name) = match f {
        Figure::FockPlr { n, eps, common } => {
            let mut c = ExperimentConfig::new(Scenario::Oracle);
            c.oracle = Some(OracleConfig { n, eps });
            (c, common, "fock_plr")
        }
        Figure::BecVisibility {
            runs,
            d,
            seed,
            per_run,
            common,
        } => {
            let mut c = ExperimentConfig::new(Scenario::Bec);
            c.n_runs = runs;
            c.seed = seed;
            c.bec = Some(BecConfig {
                detections: d,
                per_run_csv: per_run,
                ..BecConfig::default()
            });
            (c, common, "bec_visibility")
        }
        Figure::ScatterMono {
            k,
            d,
            forward,
            deflect,
            lower,
            upper,
            view,
            n_grid,
            common,
        } => {
            let mut c = ExperimentConfig::new(Scenario::Scattering);
            c.scattering = Some(ScatteringConfig {
                model: ModelConfig::Free,
                light: LightConfig::Mono,
                k,
                d,
                lower,
                upper,
                view,
                forward,
                deflect,
                n_grid,
                ..ScatteringConfig::default()
            });
            (c, common, "scatter_mono")
        }
    };
    if let Some(path) = &common.config {
        let file = ExperimentConfig::load(path)?;
        if file.scenario != cfg.scenario {
            return Err(Error::Config {
                line: relational::harness::config::key_line(&std::fs::read_to_string(path)?, None, "scenario"),
                message: format!("this figure needs scenario {}", cfg.scenario.name()),
            });
        }
        cfg = file;
    } else {
        cfg.output.dir = common.out;
        cfg.output.name = Some(name.to_string());
        cfg.validate("")?;
    }
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<(), Error> {
    let m = run(cfg)?;
    for p in &m.outputs {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Figure(f) => figure_config(f).and_then(|c| execute(&c)),
        Command::Run { config } => ExperimentConfig::load(&config).and_then(|c| execute(&c)),
        Command::Verify { criterion } => {
            let reports = match criterion {
                Some(id) => match verify::run_criterion(id) {
                    Some(r) => vec![r],
                    None => {
                        eprintln!("error: no criterion {id}");
                        return ExitCode::from(2);
                    }
                },
                None => verify::run_all(),
            };
            for r in &reports {
                println!("{r}");
            }
            return if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
