use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spikeq::equalizers::EqualizerKind;
use spikeq::harness::{self, ExperimentConfig, Profile};
use spikeq::{Error, Result};

/// SNN decision feedback equalization experiments.
#[derive(Parser)]
#[command(name = "spikeq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a neural equalizer; writes a checkpoint and train_log.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Where to write the checkpoint [default: OUT/checkpoint_<eq>_<channel>.bin]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// BER sweep over the Eb/N0 grid; writes curve_<eq>_<channel>.csv/.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Trained network for neural equalizers [default: OUT/checkpoint_<eq>_<channel>.bin]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Decision-feedback vs teacher-forced error rates of a checkpoint.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Validation symbols.
        #[arg(long, default_value_t = 100_000)]
        symbols: usize,
    },
    /// Join curve files into compare.csv and compare.json.
    Compare {
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print the resolved configuration as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config overlaid on the channel preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// smoke (200 epochs, 3 sweep points) or full.
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// proakis-a, proakis-b, proakis-c or identity.
    #[arg(long)]
    channel: Option<String>,
    /// snn_dfe, ann_dfe_encoded, ann_dfe_raw, zf, lmmse, dfe or map.
    #[arg(long = "eq")]
    equalizer: Option<EqualizerKind>,
    /// Training Eb/N0 (train, validate) or comma-separated sweep grid (sweep).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    ebn0: Vec<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl Common {
    fn resolve(&self, grid: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p, self.channel.as_deref())?,
            None => ExperimentConfig::for_channel(self.channel.as_deref().unwrap_or("proakis-b"))?,
        };
        if let Some(c) = &self.channel {
            cfg.channel = c.clone();
        }
        if let Some(p) = self.profile {
            cfg.apply_profile(p);
        }
        if let Some(e) = self.equalizer {
            cfg.equalizer = e;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.epochs {
            cfg.training.epochs = n;
        }
        match (grid, self.ebn0.as_slice()) {
            (_, []) => {}
            (true, g) => cfg.sweep.ebn0_db = g.to_vec(),
            (false, [x]) => cfg.training.ebn0_db = *x,
            (false, _) => return Err(Error::Config("--ebn0 takes a single value here".into())),
        }
        cfg.canonicalize()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, checkpoint } => {
            let cfg = common.resolve(false)?;
            log::info!(
                "training {} on {} at {} dB for {} epochs (config {})",
                cfg.equalizer,
                cfg.channel,
                cfg.training.ebn0_db,
                cfg.training.epochs,
                &cfg.hash()[..12]
            );
            let every = (cfg.training.epochs / 20).max(1);
            let r = harness::cmd_train(&cfg, &common.out, checkpoint.as_deref(), |r| {
                if r.epoch % every == 0 || r.val_ser.is_some() {
                    match r.val_ser {
                        Some(s) => log::info!("epoch {:>5}  loss {:.4}  lr {:.3e}  val SER {s:.5}", r.epoch, r.loss, r.lr),
                        None => log::info!("epoch {:>5}  loss {:.4}  lr {:.3e}", r.epoch, r.loss, r.lr),
                    }
                }
            })?;
            println!(
                "trained {} epochs in {:.1} s: loss {:.4} -> {:.4}, checkpoint {} (sha256 {})",
                r.epochs,
                r.wall_time_s,
                r.first_loss,
                r.tail_loss,
                r.checkpoint.display(),
                r.checkpoint_sha256
            );
        }
        Command::Sweep { common, checkpoint } => {
            let cfg = common.resolve(true)?;
            let f = harness::cmd_sweep(&cfg, checkpoint.as_deref(), &common.out)?;
            println!("ebn0_db  bit_errors  bits  ber");
            for p in &f.points {
                println!("{:>7}  {:>10}  {:>10}  {:.4e}", p.ebn0_db, p.bit_errors, p.bits, p.ber);
            }
            println!("wrote {}", harness::curve_path(&common.out, &cfg).display());
        }
        Command::Validate {
            common,
            checkpoint,
            symbols,
        } => {
            let cfg = common.resolve(false)?;
            let r = harness::cmd_validate(&cfg, checkpoint.as_deref(), symbols, &common.out)?;
            println!(
                "{} on {} at {} dB, {} symbols (config {})",
                cfg.equalizer, cfg.channel, r.ebn0_db, r.decision_feedback.symbols, r.metadata.config_sha256
            );
            println!("decision feedback: SER {:.5}  BER {:.5}", r.ser_decision, r.ber_decision);
            println!("teacher forcing:   SER {:.5}  BER {:.5}", r.ser_teacher, r.ber_teacher);
            println!("gap (SER):         {:+.5}", r.ser_gap);
        }
        Command::Compare { curves, out } => {
            let c = harness::cmd_compare(&curves, &out)?;
            for (x, rank) in c.ebn0_db.iter().zip(&c.ranking) {
                println!("{x:>6} dB: {}", rank.join(" < "));
            }
            for f in &c.flags {
                println!(
                    "flag: {} ({:.3e}) not below {} ({:.3e}) at {} dB",
                    f.neural, f.neural_ber, f.linear, f.linear_ber, f.ebn0_db
                );
            }
            println!("wrote {}", out.join("compare.csv").display());
        }
        Command::Config { common } => {
            print!("{}", common.resolve(true)?.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e))
        }
    }
}
