//! End-to-end runs: sample, train, synthesize, simulate, analyze, export.
//!
//! A run directory `<out>/<run_id>/` holds
//!
//! | file | content |
//! |---|---|
//! | `config.toml` | the config echo |
//! | `dataset.csv` | training samples `q1..qn,F1..Fn` (with `data.save`) |
//! | `model.json`, `forcing_model.json` | trained feedforward nets |
//! | `rnn.json` | synthesized network (`kind` = `rnn` or `frnn`) |
//! | `<run_id>__true-<i>.csv`, `<run_id>__rnn-<i>.csv` | trajectories `t,x1..xn` |
//! | `field_grid.csv` | field on a coarse grid, `q1..qn,F1..Fn` |
//! | `delta.csv` | hidden-state deviation `t,delta` for the first orbit |
//! | `potential.csv` | gradient potential `x,y,V` (2-D systems) |
//! | `tau_sweep/<run_id>__tau-<τ>-<i>.csv` | τ-sweep bundle |
//! | `metrics.json` | metrics, τ conditions, config echo |
//!
//! Every CSV starts with a `# config-hash:` line and every JSON artifact
//! carries `config_hash`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{self, CriticalPoints, DeltaSeries, PotentialSurface, RunMetrics, TauRun};
use crate::config::{RunConfig, System, TrainMode};
use crate::dataset::{sample_grid, sample_uniform, Dataset};
use crate::error::{Error, Result};
use crate::ffnet::{self, eval_metrics, FfNet, ModelFile, NefConfig, Provenance};
use crate::integrate::{simulate_pairs, Network, Trajectory, TrueSystem};
use crate::io;
use crate::synthesis::{
    self, check_tau, merge_frnn_with, synthesize, NetworkFile, SynthRnn, TauReport,
};
use crate::systems::VectorField;

pub const CONFIG_FILE: &str = "config.toml";
pub const MODEL_FILE: &str = "model.json";
pub const FORCING_MODEL_FILE: &str = "forcing_model.json";
pub const NETWORK_FILE: &str = "rnn.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const TAU_SWEEP_DIR: &str = "tau_sweep";

/// Evaluation-grid size keeping 3-D grids near a million nodes.
fn eval_per_axis(cfg: &RunConfig, dim: usize) -> usize {
    match dim {
        1 | 2 => cfg.data.eval_per_axis,
        _ => cfg.data.eval_per_axis.min(101),
    }
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub main: ModelFile,
    pub forcing: Option<ModelFile>,
    pub loss_history: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn fit(
    field: &VectorField,
    count: usize,
    data_seed: u64,
    m: usize,
    cfg: &RunConfig,
    train_cfg: &ffnet::TrainConfig,
    grid_per_axis: usize,
    hash: &str,
) -> Result<(ModelFile, Vec<f64>)> {
    let data = sample_uniform(field, count, data_seed)?;
    let (net, history, mse, trainer) = match cfg.net.mode {
        TrainMode::Train => {
            let out = ffnet::train(&data, m, cfg.net.activation, train_cfg)?;
            (out.net, out.loss_history, out.final_mse, "adam")
        }
        TrainMode::NefBaseline => {
            let nef = NefConfig {
                m,
                seed: train_cfg.seed,
                encoder_scale: cfg.net.encoder_scale,
                activation: cfg.net.activation,
                ..NefConfig::default()
            };
            let net = ffnet::train_nef_baseline(&data, &nef)?;
            let mse = ffnet::component_mse(&net, &data)?;
            (net, Vec::new(), mse, "nef")
        }
    };
    let grid = sample_grid(field, grid_per_axis)?;
    let e_max = eval_metrics(&net, &grid)?.e_max;
    let provenance = Provenance {
        field: field.name.clone(),
        params: field.params().into_iter().collect(),
        seed: train_cfg.seed,
        d_count: count,
        final_mse: mse,
        e_max: Some(e_max),
        trainer: trainer.into(),
        config_hash: Some(hash.to_string()),
    };
    Ok((ModelFile { net, provenance }, history))
}

/// Sample and fit the main net and, for forced systems, the forcing net.
pub fn train_stage(cfg: &RunConfig, hash: &str) -> Result<Trained> {
    let system = cfg.build_system()?;
    let base = system.base();
    let (main, loss_history) = fit(
        base,
        cfg.data.count,
        cfg.data.seed,
        cfg.net.m,
        cfg,
        &cfg.train,
        eval_per_axis(cfg, base.dim()),
        hash,
    )?;
    let forcing = match (&system, &cfg.forcing) {
        (System::Forced(fs), Some(f)) => {
            let seed = cfg.data.seed.wrapping_add(1);
            let per_axis = eval_per_axis(cfg, fs.p());
            Some(
                fit(
                    &fs.force_dynamics,
                    f.count,
                    seed,
                    f.m,
                    cfg,
                    &f.train,
                    per_axis,
                    hash,
                )?
                .0,
            )
        }
        _ => None,
    };
    Ok(Trained {
        main,
        forcing,
        loss_history,
    })
}

pub fn synth_stage(cfg: &RunConfig, trained: &Trained) -> Result<NetworkFile> {
    let rnn = synthesize(&trained.main.net, cfg.rnn.tau)?.with_bias_drive(cfg.rnn.bias_drive);
    match (&trained.forcing, &cfg.forcing) {
        (Some(f), Some(fc)) => {
            let forcing = synthesize(&f.net, cfg.rnn.tau)?.with_bias_drive(cfg.rnn.bias_drive);
            Ok(NetworkFile::Frnn(merge_frnn_with(
                &rnn,
                &forcing,
                fc.hidden_forcing,
            )?))
        }
        (None, None) => Ok(NetworkFile::Rnn(rnn)),
        _ => Err(Error::Config(
            "forcing model and forcing config must come together".into(),
        )),
    }
}

pub fn simulate_stage(
    cfg: &RunConfig,
    network: &NetworkFile,
) -> Result<Vec<(Trajectory, Trajectory)>> {
    simulate_with(cfg, network, cfg.sim.h, cfg.sim.horizon)
}

pub fn simulate_with(
    cfg: &RunConfig,
    network: &NetworkFile,
    h: f64,
    horizon: f64,
) -> Result<Vec<(Trajectory, Trajectory)>> {
    let system = cfg.build_system()?;
    let initial = cfg.initial_conditions()?;
    let mut pairs = match (&system, network) {
        (System::Field(f), NetworkFile::Rnn(r)) => {
            simulate_pairs(TrueSystem::Field(f), Network::Rnn(r), &initial, h, horizon)?
        }
        (System::Forced(fs), NetworkFile::Frnn(r)) => simulate_pairs(
            TrueSystem::Forced(fs),
            Network::Frnn(r),
            &initial,
            h,
            horizon,
        )?,
        _ => {
            return Err(Error::Config(
                "network kind does not match the configured system".into(),
            ))
        }
    };
    for (i, (truth, rnn)) in pairs.iter_mut().enumerate() {
        truth.meta = format!("{}__true-{i}", cfg.run_id);
        rnn.meta = format!("{}__rnn-{i}", cfg.run_id);
    }
    Ok(pairs)
}

/// The unforced recurrent net, and the forcing net when there is one.
pub fn network_parts(network: &NetworkFile) -> (SynthRnn, Option<SynthRnn>) {
    match network {
        NetworkFile::Rnn(r) => (r.clone(), None),
        NetworkFile::Frnn(f) => {
            let (u, forcing) = f.parts();
            (u, Some(forcing))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub net: String,
    pub q0: Vec<f64>,
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingSummary {
    pub m: usize,
    pub mse: f64,
    pub e_max: Option<f64>,
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub metrics: RunMetrics,
    pub e_orb_per_orbit: Vec<f64>,
    pub l_g: f64,
    pub tau_conditions: TauReport,
    pub delta: Vec<DeltaSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_points: Option<CriticalPoints>,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: Report,
    /// First-orbit deviation series of the unforced net (and the forcing net).
    pub delta: Vec<DeltaSeries>,
    pub potential: Option<PotentialSurface>,
    pub sweep: Vec<TauRun>,
}

pub fn analyze_stage(
    cfg: &RunConfig,
    hash: &str,
    trained: &Trained,
    network: &NetworkFile,
    pairs: &[(Trajectory, Trajectory)],
) -> Result<Analysis> {
    let system = cfg.build_system()?;
    let base = system.base();
    let (rnn, forcing_rnn) = network_parts(network);
    let grid = sample_grid(base, eval_per_axis(cfg, base.dim()))?;
    let l_f = analysis::estimate_lipschitz(base, cfg.data.lipschitz_samples, cfg.data.seed)?;
    let metrics = analysis::compute_metrics(
        pairs,
        &trained.main.net,
        &rnn,
        &grid,
        l_f,
        trained.main.provenance.final_mse,
        cfg.data.count,
    )?;
    let e_orb_per_orbit = pairs
        .iter()
        .map(|(t, w)| analysis::e_orb(t, w))
        .collect::<Result<Vec<_>>>()?;
    let l_g = synthesis::estimate_rnn_lipschitz(
        &rnn,
        &base.domain,
        cfg.data.lipschitz_samples,
        cfg.data.seed,
    )?;
    let tau_conditions = check_tau(
        &rnn,
        cfg.analysis.epsilon,
        metrics.horizon,
        l_f.max(f64::MIN_POSITIVE),
        l_g,
        &base.domain,
    )?;

    let initial = cfg.initial_conditions()?;
    let mut delta = Vec::new();
    let mut summaries = Vec::new();
    let mut runs: Vec<(&str, &SynthRnn, Vec<f64>)> = vec![("main", &rnn, initial[0].clone())];
    if let (Some(f), System::Forced(fs)) = (&forcing_rnn, &system) {
        runs.push(("forcing", f, fs.force_initial.clone()));
    }
    for (label, net, q0) in runs {
        let series = analysis::delta_run(net, &q0, cfg.sim.h, cfg.sim.horizon)?;
        summaries.push(DeltaSummary {
            net: label.into(),
            q0,
            fitted_slope: series.fitted_slope,
            predicted_slope: series.predicted_slope,
            relative_error: series.relative_error(),
        });
        delta.push(series);
    }

    let potential = match (&system, rnn.n) {
        (System::Field(f), 2) => Some(analysis::gradient_potential(
            &rnn,
            &f.domain,
            cfg.analysis.potential_per_axis,
        )?),
        _ => None,
    };
    let critical_points = potential.as_ref().map(analysis::critical_points);

    let sweep = match system {
        System::Field(_) if !cfg.analysis.taus.is_empty() => analysis::tau_sweep(
            &trained.main.net,
            &cfg.analysis.taus,
            &initial,
            cfg.analysis.tau_h,
            cfg.analysis.tau_horizon,
            cfg.rnn.bias_drive,
        )?,
        _ => Vec::new(),
    };

    let forcing = trained.forcing.as_ref().map(|f| ForcingSummary {
        m: f.net.m,
        mse: f.provenance.final_mse,
        e_max: f.provenance.e_max,
    });
    let report = Report {
        run_id: cfg.run_id.clone(),
        config_hash: hash.to_string(),
        metrics,
        e_orb_per_orbit,
        l_g,
        tau_conditions,
        delta: summaries,
        forcing,
        critical_points,
        config: cfg.clone(),
    };
    Ok(Analysis {
        report,
        delta,
        potential,
        sweep,
    })
}

pub fn run_dir(out: &Path, cfg: &RunConfig) -> PathBuf {
    out.join(&cfg.run_id)
}

pub fn trajectory_path(dir: &Path, run_id: &str, source: &str) -> PathBuf {
    dir.join(format!("{run_id}__{source}.csv"))
}

fn tau_label(tau: f64) -> String {
    format!("{tau:e}")
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> Result<String> {
    let hash = cfg.hash()?;
    io::write_text(
        &dir.join(CONFIG_FILE),
        &format!("# config-hash: {hash}\n{}", cfg.to_toml()?),
    )?;
    Ok(hash)
}

pub fn write_models(dir: &Path, trained: &Trained) -> Result<()> {
    trained.main.write(&dir.join(MODEL_FILE))?;
    if let Some(f) = &trained.forcing {
        f.write(&dir.join(FORCING_MODEL_FILE))?;
    }
    Ok(())
}

pub fn read_models(dir: &Path) -> Result<Trained> {
    let main = ModelFile::read(&dir.join(MODEL_FILE))?;
    let forcing_path = dir.join(FORCING_MODEL_FILE);
    let forcing = if forcing_path.exists() {
        Some(ModelFile::read(&forcing_path)?)
    } else {
        None
    };
    Ok(Trained {
        main,
        forcing,
        loss_history: Vec::new(),
    })
}

pub fn write_network(dir: &Path, network: &NetworkFile, trained: &Trained) -> Result<()> {
    network.write(&dir.join(NETWORK_FILE), Some(&trained.main.provenance))
}

pub fn write_trajectories(
    dir: &Path,
    pairs: &[(Trajectory, Trajectory)],
    hash: &str,
) -> Result<()> {
    for (truth, rnn) in pairs {
        truth.write_csv(&dir.join(format!("{}.csv", truth.meta)), Some(hash))?;
        rnn.write_csv(&dir.join(format!("{}.csv", rnn.meta)), Some(hash))?;
    }
    Ok(())
}

/// Trajectory pairs written by [`write_trajectories`], in orbit order.
pub fn read_trajectories(dir: &Path, run_id: &str) -> Result<Vec<(Trajectory, Trajectory)>> {
    let mut pairs = Vec::new();
    for i in 0.. {
        let truth = trajectory_path(dir, run_id, &format!("true-{i}"));
        if !truth.exists() {
            break;
        }
        let rnn = trajectory_path(dir, run_id, &format!("rnn-{i}"));
        pairs.push((Trajectory::read_csv(&truth)?, Trajectory::read_csv(&rnn)?));
    }
    if pairs.is_empty() {
        return Err(Error::Config(format!(
            "no trajectories for run '{run_id}' in {}",
            dir.display()
        )));
    }
    Ok(pairs)
}

/// `dataset.csv` when `data.save` is set. Sampling is deterministic, so this
/// reproduces the training set exactly.
pub fn write_dataset(dir: &Path, cfg: &RunConfig, hash: &str) -> Result<()> {
    if !cfg.data.save {
        return Ok(());
    }
    let system = cfg.build_system()?;
    sample_uniform(system.base(), cfg.data.count, cfg.data.seed)?
        .write_csv(&dir.join(DATASET_FILE), Some(hash))
}

pub fn write_field_grid(dir: &Path, cfg: &RunConfig, hash: &str) -> Result<()> {
    let system = cfg.build_system()?;
    sample_grid(system.base(), cfg.data.quiver_per_axis)?
        .write_csv(&dir.join("field_grid.csv"), Some(hash))
}

pub fn write_tau_sweep(dir: &Path, run_id: &str, sweep: &[TauRun], hash: &str) -> Result<()> {
    let sweep_dir = dir.join(TAU_SWEEP_DIR);
    for run in sweep {
        for (i, t) in run.trajectories.iter().enumerate() {
            let source = format!("tau-{}-{i}", tau_label(run.tau));
            t.write_csv(&trajectory_path(&sweep_dir, run_id, &source), Some(hash))?;
        }
    }
    Ok(())
}

pub fn write_analysis(dir: &Path, a: &Analysis, hash: &str) -> Result<()> {
    io::write_json(&dir.join(METRICS_FILE), &a.report)?;
    if let Some(d) = a.delta.first() {
        let header = ["t", "delta"].map(String::from);
        let rows = d.times.iter().zip(&d.delta).map(|(t, v)| vec![*t, *v]);
        io::write_csv(&dir.join("delta.csv"), &header, rows, Some(hash))?;
    }
    if let Some(p) = &a.potential {
        p.write_csv(&dir.join("potential.csv"), Some(hash))?;
    }
    write_tau_sweep(dir, &a.report.run_id, &a.sweep, hash)
}

/// Everything a full run produced, in memory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub trained: Trained,
    pub network: NetworkFile,
    pub pairs: Vec<(Trajectory, Trajectory)>,
    pub analysis: Analysis,
}

/// Train, synthesize, simulate and analyze, writing every artifact under
/// `<out>/<run_id>/`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = run_dir(out, cfg);
    let hash = write_config(&dir, cfg)?;
    log::info!("{}: training", cfg.run_id);
    let trained = train_stage(cfg, &hash)?;
    write_models(&dir, &trained)?;
    write_dataset(&dir, cfg, &hash)?;
    write_field_grid(&dir, cfg, &hash)?;
    let network = synth_stage(cfg, &trained)?;
    write_network(&dir, &network, &trained)?;
    log::info!("{}: simulating", cfg.run_id);
    let pairs = simulate_stage(cfg, &network)?;
    write_trajectories(&dir, &pairs, &hash)?;
    log::info!("{}: analyzing", cfg.run_id);
    let analysis = analyze_stage(cfg, &hash, &trained, &network, &pairs)?;
    write_analysis(&dir, &analysis, &hash)?;
    Ok(RunOutput {
        dir,
        trained,
        network,
        pairs,
        analysis,
    })
}

/// Load a run directory's config echo.
pub fn read_config(dir: &Path) -> Result<RunConfig> {
    RunConfig::load(&dir.join(CONFIG_FILE))
}

/// Recompute the analysis of an existing run directory from its artifacts,
/// simulating first when no trajectories are present.
pub fn analyze_dir(dir: &Path) -> Result<Analysis> {
    let cfg = read_config(dir)?;
    let hash = cfg.hash()?;
    let trained = read_models(dir)?;
    let (network, _) = NetworkFile::read(&dir.join(NETWORK_FILE))?;
    let pairs = if trajectory_path(dir, &cfg.run_id, "true-0").exists() {
        read_trajectories(dir, &cfg.run_id)?
    } else {
        let pairs = simulate_stage(&cfg, &network)?;
        write_trajectories(dir, &pairs, &hash)?;
        pairs
    };
    let analysis = analyze_stage(&cfg, &hash, &trained, &network, &pairs)?;
    write_analysis(dir, &analysis, &hash)?;
    Ok(analysis)
}

/// A single trained net without a config, for `synth` on bare model files.
pub fn synth_model(model: &FfNet, tau: f64) -> Result<SynthRnn> {
    synthesize(model, tau)
}

/// Load a dataset CSV, for training from files instead of sampling.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(path)
}
