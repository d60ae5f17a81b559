//! `ctrnn-synth` command-line front end.
//!
//! Every command works on a run directory `<out>/<run_id>/`; see
//! [`ctrnn_synth::pipeline`] for its layout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ctrnn_synth::pipeline::{self, Trained};
use ctrnn_synth::recipes::{self, Scale};
use ctrnn_synth::synthesis::NetworkFile;
use ctrnn_synth::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "ctrnn-synth",
    version,
    about = "Synthesize recurrent networks that replicate dynamical systems"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; runs go to `<out>/<run_id>/`.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Override data, training and forcing seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Recipe scale.
    #[arg(long, global = true, default_value = "desk")]
    scale: Scale,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the field and train the feedforward net(s).
    Train,
    /// Build the recurrent network from a run's trained models.
    Synth {
        run_dir: PathBuf,
        /// Override the configured time constant.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Integrate the true system and the network from every initial condition.
    Simulate { run_dir: PathBuf },
    /// Compute metrics, deviation, potential and τ-sweep artifacts.
    Analyze { run_dir: PathBuf },
    /// Run the full pipeline for a named recipe, or for `--config` with `run`.
    Example { name: String },
    /// Rerun a trained model at several time constants.
    SweepTau {
        run_dir: PathBuf,
        /// Comma-separated time constants; defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
    },
    /// List the named recipes.
    Recipes,
}

fn load_config(g: &Global) -> anyhow::Result<RunConfig> {
    let path = g.config.as_deref().context("--config is required")?;
    let cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(apply_seed(cfg, g.seed))
}

fn apply_seed(cfg: RunConfig, seed: Option<u64>) -> RunConfig {
    match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    }
}

fn read_run(dir: &Path) -> anyhow::Result<(RunConfig, String)> {
    let cfg = pipeline::read_config(dir)
        .with_context(|| format!("reading run directory {}", dir.display()))?;
    let hash = cfg.hash()?;
    Ok((cfg, hash))
}

fn read_network(dir: &Path) -> anyhow::Result<NetworkFile> {
    let path = dir.join(pipeline::NETWORK_FILE);
    let (network, _) = NetworkFile::read(&path)
        .with_context(|| format!("reading {}; run `synth` first", path.display()))?;
    Ok(network)
}

fn cmd_train(g: &Global) -> anyhow::Result<()> {
    let cfg = load_config(g)?;
    cfg.validate()?;
    let dir = pipeline::run_dir(&g.out, &cfg);
    let hash = pipeline::write_config(&dir, &cfg)?;
    let trained = pipeline::train_stage(&cfg, &hash)?;
    pipeline::write_models(&dir, &trained)?;
    pipeline::write_dataset(&dir, &cfg, &hash)?;
    pipeline::write_field_grid(&dir, &cfg, &hash)?;
    log::info!(
        "model mse {:.3e}, written to {}",
        trained.main.provenance.final_mse,
        dir.display()
    );
    println!("{}", dir.display());
    Ok(())
}

fn cmd_synth(dir: &Path, tau: Option<f64>) -> anyhow::Result<()> {
    let (mut cfg, _) = read_run(dir)?;
    if let Some(t) = tau {
        cfg.rnn.tau = t;
        cfg.validate()?;
        pipeline::write_config(dir, &cfg)?;
    }
    let trained = pipeline::read_models(dir)?;
    let network = pipeline::synth_stage(&cfg, &trained)?;
    pipeline::write_network(dir, &network, &trained)?;
    let (rnn, _) = pipeline::network_parts(&network);
    log::info!("spectral radius {:.6}", rnn.spectral_radius());
    Ok(())
}

fn cmd_simulate(dir: &Path) -> anyhow::Result<()> {
    let (cfg, hash) = read_run(dir)?;
    let network = read_network(dir)?;
    let pairs = pipeline::simulate_stage(&cfg, &network)?;
    pipeline::write_trajectories(dir, &pairs, &hash)?;
    Ok(())
}

fn cmd_analyze(dir: &Path) -> anyhow::Result<()> {
    let a = pipeline::analyze_dir(dir)?;
    println!("{}", serde_json::to_string_pretty(&a.report.metrics)?);
    Ok(())
}

fn cmd_sweep_tau(dir: &Path, taus: Vec<f64>) -> anyhow::Result<()> {
    let (mut cfg, hash) = read_run(dir)?;
    if !taus.is_empty() {
        cfg.analysis.taus = taus;
    }
    if cfg.analysis.taus.is_empty() {
        bail!("no time constants given; pass --taus or set analysis.taus");
    }
    if cfg.forcing.is_some() {
        bail!("τ-sweeps apply to unforced systems only");
    }
    let Trained { main, .. } = pipeline::read_models(dir)?;
    let initial = cfg.initial_conditions()?;
    let sweep = ctrnn_synth::analysis::tau_sweep(
        &main.net,
        &cfg.analysis.taus,
        &initial,
        cfg.analysis.tau_h,
        cfg.analysis.tau_horizon,
        cfg.rnn.bias_drive,
    )?;
    pipeline::write_tau_sweep(dir, &cfg.run_id, &sweep, &hash)?;
    Ok(())
}

fn cmd_example(g: &Global, name: &str) -> anyhow::Result<()> {
    let cfg = if name == "run" {
        load_config(g)?
    } else {
        apply_seed(recipes::recipe(name, g.scale)?, g.seed)
    };
    let out = pipeline::run(&cfg, &g.out)?;
    let m = &out.analysis.report.metrics;
    log::info!(
        "mse {:.3e}  E_max {:.3e}  E_orb {:.3e}  E_L {:.3e}",
        m.mse,
        m.e_max,
        m.e_orb,
        m.e_l
    );
    println!("{}", out.dir.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Train => cmd_train(g),
        Command::Synth { run_dir, tau } => cmd_synth(&run_dir, tau),
        Command::Simulate { run_dir } => cmd_simulate(&run_dir),
        Command::Analyze { run_dir } => cmd_analyze(&run_dir),
        Command::Example { name } => cmd_example(g, &name),
        Command::SweepTau { run_dir, taus } => cmd_sweep_tau(&run_dir, taus),
        Command::Recipes => {
            recipes::RECIPES.iter().for_each(|r| println!("{r}"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
