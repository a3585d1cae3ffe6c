mod analyze;
mod config;
mod error;
mod selftest;
mod simulate;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use sprint_core::analysis::{classical_threshold, ThresholdKind};
use sprint_core::sim::Scenario;

use crate::config::RunConfig;
use crate::error::{validation, CliError, CliResult};

/// Shipped profile with the nominal operating point.
const NOMINAL_PROFILE: &str = include_str!("../profiles/nominal.params");
const DEFAULT_OUT: &str = "sprint-out";

#[derive(Parser, Debug)]
#[command(name = "sprint", version, about = "Simulate and analyze photon-atom swap gate experiments")]
struct Cli {
    /// Run configuration (TOML). Defaults to the shipped nominal profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "SPRINT_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a campaign and write the click stream, ground truth and manifest.
    Simulate {
        /// Overrides the scenario of the configuration.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
        /// Overrides n_trials from the configuration.
        #[arg(long)]
        trials: Option<u64>,
        /// Skip the ground-truth sidecar.
        #[arg(long)]
        no_truth: bool,
    },
    /// Analyze one or more simulated runs into figure tables and a report.
    Analyze {
        /// Run directories (default: the output directory).
        streams: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: analyze::Mode,
        /// Subtract the background measured in the dark window.
        #[arg(long)]
        correct_false: bool,
        /// Undo the per-direction defect loss configured for the run.
        #[arg(long)]
        compensate_defect: bool,
        /// Also score the exit labels of the ground-truth sidecar.
        #[arg(long)]
        use_ground_truth: bool,
        /// Expected scenario; a run with a different one is rejected.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
        /// Report directory (default: <out>/report).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print classical fidelity thresholds.
    Thresholds {
        /// single_swap, double_swap, poisson_pa or poisson_total (default: all).
        #[arg(value_parser = parse_kind)]
        kind: Option<ThresholdKind>,
        /// Mean photon number of the write pulse for the Poisson kinds.
        #[arg(long, default_value_t = 0.8)]
        mean_photons: f64,
    },
    /// Sweep one numeric configuration key and tabulate derived quantities.
    Sweep {
        /// Dotted key, e.g. params.epsilon or chain.path_efficiency.
        path: String,
        #[arg(allow_negative_numbers = true)]
        from: f64,
        #[arg(allow_negative_numbers = true)]
        to: f64,
        /// Number of points, ends included; 0 gives an empty table.
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Quick consistency checks.
    Selftest,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::from_str(s).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<ThresholdKind, String> {
    ThresholdKind::from_str(s).map_err(|e| e.to_string())
}

impl Cli {
    fn load_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => config::load(p)?,
            None => config::parse(NOMINAL_PROFILE)?,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(validation("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate {
            scenario,
            trials,
            no_truth,
        } => {
            let mut cfg = cli.load_config()?;
            if let Some(s) = scenario {
                cfg.scenario = *s;
            }
            if let Some(n) = trials {
                cfg.n_trials = *n;
            }
            let out = cli.out_dir(Some(&cfg));
            let resolved = cfg.resolve()?;
            let m = simulate::run(&resolved, &out, !no_truth)?;
            println!("scenario = {}", m.scenario);
            println!("trials = {}", m.n_trials);
            println!("clicks = {}", m.n_records);
            println!("config_digest = {}", m.config_digest);
            println!("output = {}", out.display());
        }
        Command::Analyze {
            streams,
            mode,
            correct_false,
            compensate_defect,
            use_ground_truth,
            scenario,
            report,
        } => {
            let analysis = match &cli.config {
                Some(_) => Some(cli.load_config()?.resolve()?.config.analysis),
                None => None,
            };
            let out = cli.out_dir(None);
            let dirs = if streams.is_empty() { vec![out.clone()] } else { streams.clone() };
            let report = report.clone().unwrap_or_else(|| out.join("report"));
            let opts = analyze::Options {
                mode: *mode,
                correct_false: *correct_false,
                compensate_defect: *compensate_defect,
                use_ground_truth: *use_ground_truth,
                scenario: *scenario,
            };
            let files = analyze::run(&dirs, &report, &opts, analysis.as_ref())?;
            print!("{}", std::fs::read_to_string(report.join("report.txt"))?);
            print!("{}", std::fs::read_to_string(report.join("inference.txt"))?);
            println!("files = {}", files.join(" "));
            println!("report = {}", report.display());
        }
        Command::Thresholds { kind, mean_photons } => {
            let kinds = kind.map(|k| vec![k]).unwrap_or_else(|| ThresholdKind::ALL.to_vec());
            for k in kinds {
                let t = classical_threshold(k, Some(*mean_photons))?;
                let exact = t.exact.map(|r| format!(" ({r})")).unwrap_or_default();
                println!("{k} = {:.6}{exact}  # {}", t.value, t.assumptions);
            }
        }
        Command::Sweep { path, from, to, steps } => {
            let cfg = cli.load_config()?;
            let out = cli.out_dir(Some(&cfg));
            let file = out.join(format!("sweep_{}.csv", path.replace('.', "_")));
            for note in sweep::run(&cfg, path, *from, *to, *steps, &file)? {
                println!("{note}");
            }
            println!("table = {}", file.display());
        }
        Command::Selftest => {
            if !selftest::run()? {
                return Err(CliError::Runtime("self-test failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sprint: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
