//! `skintemp`: synthetic data, magnification, SSI fitting, training and
//! evaluation from one command.
//!
//! Settings resolve as profile defaults, then `--config`, then flags.
//! `SKINTEMP_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use skintemp_core::config::{ModelKind, RunConfig};
use skintemp_core::models::{Profile, Variant};
use skintemp_core::pipeline;

#[derive(Parser)]
#[command(name = "skintemp", version, about = "Skin temperature from video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Input run directory; defaults to `--out`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// nisdl1, nisdl2, dl or nipst.
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    /// paper or desk.
    #[arg(long, global = true)]
    profile: Option<Profile>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic subjects.
    Synth,
    /// Denoise and magnify every clip.
    Magnify,
    /// Split subjects and fit calibration-prefix SSI.
    FitSsi,
    /// Train one variant, or all three without `--model`.
    Train,
    /// Score models on the test subjects.
    Evaluate {
        /// Checkpoint to score; requires a trainable `--model`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// synth, magnify, fit-ssi, train and evaluate in one run directory.
    Pipeline,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SKINTEMP_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("SKINTEMP_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref(), common.profile)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(model) = common.model {
        cfg.model.variant = model;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn variants(model: Option<ModelKind>) -> Result<Vec<Variant>> {
    match model {
        None => Ok(Variant::ALL.to_vec()),
        Some(kind) => match kind.variant() {
            Some(v) => Ok(vec![v]),
            None => bail!("model `nipst` has no trainable weights"),
        },
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = resolve(&cli.common)?;
    let out = &cli.common.out;
    let data = cli.common.data.as_ref().unwrap_or(out);
    match cli.command {
        Command::Synth => {
            let profiles = pipeline::run_synth(&cfg, out)?;
            pipeline::write_config(&cfg, out)?;
            println!("wrote {} subjects to {}", profiles.len(), out.display());
        }
        Command::Magnify => {
            pipeline::run_magnify(&cfg, data, out)?;
            println!("magnified clips in {}", out.join(pipeline::MAGNIFIED_DIR).display());
        }
        Command::FitSsi => {
            let (split, table) = pipeline::run_fit_ssi(&cfg, data, out)?;
            for (id, r) in &table.0 {
                println!("{id}  k={:.4}  b={:.4}  rmse={:.4}", r.k, r.b, r.residual_rmse);
            }
            println!("train {:?}  test {:?}", split.train, split.test);
        }
        Command::Train => {
            for (v, outcome) in pipeline::run_train(&cfg, data, out, &variants(cli.common.model)?)? {
                let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
                println!(
                    "{v}: {} images, final epoch loss {last:.5}, {} checkpoints",
                    outcome.meta.images_seen,
                    outcome.checkpoints.len()
                );
            }
        }
        Command::Evaluate { checkpoint } => {
            let kinds = match cli.common.model {
                Some(k) => vec![k],
                None if checkpoint.is_some() => bail!("--checkpoint needs --model"),
                None => ModelKind::ALL.to_vec(),
            };
            if checkpoint.is_some() && kinds[0] == ModelKind::Nipst {
                bail!("model `nipst` takes no checkpoint");
            }
            let dir = pipeline::report_dir(&cfg, out);
            let reports =
                pipeline::run_evaluate(&cfg, data, &kinds, checkpoint.as_deref(), &dir)?;
            print_reports(&reports);
        }
        Command::Pipeline => {
            let reports = pipeline::run_pipeline(&cfg, out)?;
            print_reports(&reports.into_values().collect::<Vec<_>>());
        }
    }
    Ok(())
}

fn print_reports(reports: &[skintemp_core::evaluate::ErrorReport]) {
    for r in reports {
        let bins: Vec<String> = r.bins.iter().map(|b| format!("{:.3}", b)).collect();
        println!(
            "{:<7} n={} mean={:.4} median={:.4} bins=[{}]",
            r.model_id,
            r.n,
            r.mean,
            r.median,
            bins.join(", ")
        );
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
