use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use tanglesim::bench::{
    cell_config, compute_metrics, read_records, run_experiment, run_rollout, write_records,
    Manifest, ManifestCell,
};
use tanglesim::SimConfig;

#[derive(Parser)]
#[command(name = "tanglesim", about = "Deterministic cable-untangling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; defaults are used for any omitted field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the proposal-confidence gate.
    #[arg(long)]
    kappa: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow_free::Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => SimConfig::default(),
        };
        if let Some(k) = self.kappa {
            cfg.percept.kappa = k;
        }
        Ok(cfg)
    }
}

/// Tiny local error alias so main can use `?` across io/serde/sim errors.
mod anyhow_free {
    pub type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;
}

#[derive(Subcommand)]
enum Command {
    /// Run a single rollout and write its record (and optional frames).
    Run {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        tier: u8,
        /// Defaults to TANGLESIM_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ablate_uncertainty: bool,
        #[arg(long)]
        noise_off: bool,
        /// Save the observation of every step as a PNG.
        #[arg(long)]
        dump_frames: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run every cell of a manifest across a worker pool.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = rayon::current_num_threads())]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from a records.jsonl file.
    Metrics {
        #[arg(long)]
        records: PathBuf,
    },
}

fn env_seed() -> u64 {
    std::env::var("TANGLESIM_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow_free::Result<()> {
    match cli.command {
        Command::Run {
            tier,
            seed,
            ablate_uncertainty,
            noise_off,
            dump_frames,
            out,
            config,
        } => {
            let seed = seed.unwrap_or_else(env_seed);
            let base = config.load()?;
            let cell = ManifestCell {
                label: "run".into(),
                tier,
                seeds: vec![seed],
                ablate_uncertainty,
                noise_off,
            };
            let cfg = cell_config(&base, &cell);
            std::fs::create_dir_all(&out)?;
            let frame_dir = if dump_frames {
                let dir = out.join(format!("rollout_{seed}"));
                std::fs::create_dir_all(&dir)?;
                Some(dir)
            } else {
                None
            };
            let record = run_rollout(&cfg, tier, seed, frame_dir.as_deref())?;
            write_records(&out.join("records.jsonl"), std::iter::once(&record))?;
            println!(
                "seed {} tier {}: {:?} in {} steps, done_time {:?}",
                seed,
                tier,
                record.outcome,
                record.steps.len(),
                record.done_time
            );
            Ok(())
        }
        Command::Experiment {
            manifest,
            workers,
            out,
        } => {
            let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest)?)?;
            let output = run_experiment(&manifest, workers, &out)?;
            for (label, report) in &output.reports {
                println!(
                    "{label}: {} rollouts, verification {:.3}, failures A/B/C {}/{}/{}",
                    report.rollouts,
                    report.verification_rate,
                    report.failures_a,
                    report.failures_b,
                    report.failures_c
                );
            }
            println!("wrote {}", out.join("records.jsonl").display());
            Ok(())
        }
        Command::Metrics { records } => {
            let records = read_records(&records)?;
            let report = compute_metrics(&records)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}
