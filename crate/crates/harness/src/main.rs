use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gossip_harness::{
    emit_plot_data, run_scenario, verify_expectation_cmd, HarnessError, PlotKind, Result,
    ScenarioConfig, TrajectoryLog,
};

#[derive(Parser)]
#[command(name = "gossip-sim", version, about = "Randomized affine dynamics over networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative localization from noisy pairwise differences.
    Localize(ScenarioArgs),
    /// PageRank by link gossip.
    Pagerank(ScenarioArgs),
    /// Opinion dynamics with stubborn agents.
    Opinions(ScenarioArgs),
    /// A user-supplied affine system `x ↦ P x + u` (sync mode only).
    Affine(ScenarioArgs),
    /// Check that the mean sampled kernel is the lazy synchronous system.
    VerifyExpectation {
        /// localize, pagerank or opinions.
        #[arg(long)]
        application: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Extract plot-ready columns from a trajectory or metrics CSV.
    PlotData {
        #[arg(long)]
        input: PathBuf,
        /// trajectory or error-curve.
        #[arg(long, default_value = "trajectory")]
        kind: String,
        /// Node field to plot for trajectories.
        #[arg(long)]
        field: Option<String>,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Every setting can come from `--config` and be overridden by a flag.
#[derive(Args, Default)]
struct ScenarioArgs {
    /// Flat `key = value` scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sync, gossip or both.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Output directory for CSVs and summary.txt.
    #[arg(long)]
    out: Option<String>,
    /// Keep every THIN-th step in the logs (0 keeps only the endpoints).
    #[arg(long)]
    thin: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// Edge-list file, or complete:N, path:N, cycle:N, random:N:EXTRA:SEED.
    #[arg(long)]
    graph: Option<String>,
    /// Influence matrix CSV, example3, or random:N:K:SEED.
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    prejudice: Option<String>,
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    offset: Option<String>,
    #[arg(long)]
    measurements: Option<String>,
    #[arg(long)]
    positions: Option<String>,
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// PageRank damping.
    #[arg(long)]
    m: Option<String>,
    /// Measurement noise standard deviation.
    #[arg(long)]
    sigma: Option<String>,
    /// Dump the raw PageRank vector every N steps.
    #[arg(long)]
    dump_every: Option<String>,
    /// Monte Carlo draws for verify-expectation.
    #[arg(long)]
    samples: Option<String>,
}

impl ScenarioArgs {
    fn load(self, application: &str) -> Result<ScenarioConfig> {
        let mut map = BTreeMap::new();
        map.insert("application".to_string(), application.to_string());
        let flags = [
            ("mode", self.mode),
            ("seed", self.seed),
            ("steps", self.steps),
            ("out", self.out),
            ("thin", self.thin),
            ("replications", self.replications),
            ("graph", self.graph),
            ("network", self.network),
            ("prejudice", self.prejudice),
            ("matrix", self.matrix),
            ("offset", self.offset),
            ("measurements", self.measurements),
            ("positions", self.positions),
            ("x0", self.x0),
            ("gamma", self.gamma),
            ("tau", self.tau),
            ("m", self.m),
            ("sigma", self.sigma),
            ("dump_every", self.dump_every),
            ("samples", self.samples),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        }
        ScenarioConfig::load(self.config.as_deref(), &map)
    }
}

fn scenario(args: ScenarioArgs, application: &str) -> Result<()> {
    let cfg = args.load(application)?;
    let out = run_scenario(&cfg)?;
    print!("{}", out.summary_text());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Localize(a) => scenario(a, "localize"),
        Command::Pagerank(a) => scenario(a, "pagerank"),
        Command::Opinions(a) => scenario(a, "opinions"),
        Command::Affine(a) => scenario(a, "affine"),
        Command::VerifyExpectation { application, scenario } => {
            let cfg = scenario.load(&application)?;
            let report = verify_expectation_cmd(&cfg)?;
            let text = report.render();
            print!("{text}");
            if let Some(dir) = &cfg.out {
                fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
                let path = dir.join("verify.txt");
                fs::write(&path, &text).map_err(|e| io_error(&path, e))?;
            }
            if report.passed() {
                Ok(())
            } else {
                Err(HarnessError::Validation("expectation identity does not hold".into()))
            }
        }
        Command::PlotData { input, kind, field, output } => {
            let kind: PlotKind = kind.parse()?;
            let text = fs::read_to_string(&input).map_err(|e| io_error(&input, e))?;
            let log = TrajectoryLog::from_csv(&text, &input.display().to_string())?;
            let csv = emit_plot_data(&log, kind, field.as_deref())?;
            match output {
                Some(path) => fs::write(&path, csv).map_err(|e| io_error(&path, e)),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn io_error(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.class_name());
            ExitCode::FAILURE
        }
    }
}
