use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bistatic_core::harness::{
    self, run_doppler, run_gdop_map, run_iso_range_sweep, run_multistatic, Engine, GridSpec, ScenarioConfig, PRESETS,
};
use bistatic_core::{Error, Result};

#[derive(Parser)]
#[command(name = "bistatic", version, about = "Bistatic and multistatic OFDM radar localisation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iso-range contour sweep (TDOA/AoA errors, both-mode localisation, GDOP).
    Sweep(Common),
    /// One transmitter, three receivers on a circle; fused vs per-pair error.
    Multistatic(Common),
    /// Moving target: range-Doppler map and speed estimate.
    Doppler {
        #[command(flatten)]
        common: Common,
        /// Where to write the range-Doppler map CSV.
        #[arg(long)]
        map_out: Option<PathBuf>,
    },
    /// GDOP of both modes over a square grid around the pair.
    GdopMap {
        #[command(flatten)]
        common: Common,
        /// Cells per axis.
        #[arg(long, default_value_t = 61)]
        grid: usize,
    },
    /// List built-in presets.
    Scenarios,
}

#[derive(Args)]
struct Common {
    /// Preset name (scenario1|scenario2|scenario3) or path to a TOML file.
    #[arg(long, default_value = "scenario3")]
    scenario: String,
    #[arg(long)]
    bandwidth_mhz: Option<u32>,
    /// signal or model.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.scenario, self.bandwidth_mhz)?;
        if let Some(e) = &self.engine {
            cfg.sweep.engine = e.parse::<Engine>()?;
        }
        if let Some(s) = self.seed {
            cfg.sweep.seed = s;
        }
        if let Some(p) = self.points {
            cfg.sweep.points = p;
        }
        if let Some(t) = self.trials {
            cfg.sweep.trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn report<T: serde::Serialize>(summary: &T) -> Result<()> {
    let text = toml::to_string(summary).map_err(|e| Error::Config(e.to_string()))?;
    eprint!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scenarios => {
            for name in PRESETS {
                let c = ScenarioConfig::preset(name, 100)?;
                println!(
                    "{name}: L = {} m, sum range = {} m, RCS = {} dBsm",
                    c.baseline_l(),
                    c.sweep.sum_range_m,
                    c.sweep.rcs_dbsm
                );
            }
        }
        Command::Sweep(common) => {
            let cfg = common.config()?;
            let res = run_iso_range_sweep(&cfg)?;
            harness::write_csv(sink(common.out.as_deref())?, &res.rows)?;
            report(&res.summary)?;
        }
        Command::Multistatic(common) => {
            let cfg = common.config()?;
            let res = run_multistatic(&cfg)?;
            harness::write_csv(sink(common.out.as_deref())?, &res.rows)?;
            report(&res.summary)?;
        }
        Command::Doppler { common, map_out } => {
            let cfg = common.config()?;
            let res = run_doppler(&cfg)?;
            harness::write_csv(sink(common.out.as_deref())?, std::slice::from_ref(&res.record))?;
            if let Some(p) = map_out {
                res.map.write_csv(BufWriter::new(File::create(p)?))?;
            }
        }
        Command::GdopMap { common, grid } => {
            let cfg = common.config()?;
            let cells = run_gdop_map(&cfg, &GridSpec::around(&cfg, grid))?;
            harness::write_csv(sink(common.out.as_deref())?, &cells)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
