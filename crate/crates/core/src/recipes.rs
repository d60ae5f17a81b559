//! Named configurations reproducing the worked examples, each at two scales:
//! `paper` uses the published dataset sizes and hidden-layer widths, `desk`
//! scales the dataset down to run on a workstation in minutes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::config::{
    AnalysisConfig, DataConfig, ForcingConfig, NetConfig, RnnConfig, RunConfig, SimConfig,
    SystemConfig,
};
use crate::error::{Error, Result};
use crate::ffnet::TrainConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scale {
    Paper,
    #[default]
    Desk,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::param(format!(
                "unknown scale '{other}' (paper, desk)"
            ))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        })
    }
}

pub const RECIPES: &[&str] = &[
    "example1_fixed_point",
    "example2_two_fp",
    "example2_four_fp",
    "example3_limit_cycle",
    "example4_vdp",
    "example5_duffing",
    "example6_rossler",
    "example6_lorenz",
];

fn system(name: &str, params: &[(&str, f64)], points: Option<Vec<[f64; 2]>>) -> SystemConfig {
    SystemConfig {
        name: name.into(),
        params: params
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<_, _>>(),
        points,
        domain: None,
    }
}

fn train(epochs: usize, batch_size: usize, lr: f64, final_lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size,
        learning_rate: lr,
        lr_decay: (final_lr / lr).powf(1.0 / epochs.max(1) as f64),
        ..TrainConfig::default()
    }
}

/// Epochs scaled so that both scales take a similar number of Adam steps.
fn epochs_for(count: usize, batch: usize, steps: usize, min_epochs: usize) -> usize {
    (steps * batch).div_ceil(count).max(min_epochs)
}

struct Spec {
    system: SystemConfig,
    m: usize,
    paper_count: usize,
    desk_count: usize,
    batch: usize,
    steps: usize,
    lr: f64,
    final_lr: f64,
    h: f64,
    horizon: f64,
    initial: Vec<Vec<f64>>,
    taus: Vec<f64>,
}

pub fn recipe(name: &str, scale: Scale) -> Result<RunConfig> {
    let s = match name {
        "example1_fixed_point" => Spec {
            system: system(
                "fixed_point",
                &[("a", -1.0), ("b", -1.0), ("p1", 1.0), ("p2", 0.0)],
                None,
            ),
            m: 3,
            paper_count: 250_000,
            desk_count: 20_000,
            batch: 32,
            steps: 450_000,
            lr: 1e-2,
            final_lr: 1e-5,
            h: 1e-3,
            horizon: 40.0,
            initial: vec![
                vec![-1.8, 1.8],
                vec![-1.8, -1.5],
                vec![1.9, 1.9],
                vec![0.2, -1.9],
            ],
            taus: vec![1e6, 1e4, 1e2],
        },
        "example2_two_fp" => Spec {
            system: system(
                "multi_fixed_point",
                &[],
                Some(vec![[1.0, 0.0], [-1.0, 0.0]]),
            ),
            m: 7,
            paper_count: 16_000_000,
            desk_count: 100_000,
            batch: 64,
            steps: 200_000,
            lr: 3e-3,
            final_lr: 3e-5,
            h: 1e-3,
            horizon: 40.0,
            initial: vec![
                vec![-2.5, 2.5],
                vec![2.5, -2.5],
                vec![0.3, 2.8],
                vec![-0.3, -2.8],
            ],
            taus: vec![],
        },
        "example2_four_fp" => Spec {
            system: system(
                "multi_fixed_point",
                &[],
                Some(vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]),
            ),
            m: 9,
            paper_count: 16_000_000,
            desk_count: 100_000,
            batch: 64,
            steps: 200_000,
            lr: 3e-3,
            final_lr: 3e-5,
            h: 1e-3,
            horizon: 40.0,
            initial: vec![
                vec![2.5, 2.5],
                vec![-2.5, 2.0],
                vec![-2.0, -2.5],
                vec![2.5, -0.5],
            ],
            taus: vec![],
        },
        "example3_limit_cycle" => Spec {
            system: system("limit_cycle", &[("radius", 1.0)], None),
            m: 30,
            paper_count: 16_000_000,
            desk_count: 200_000,
            batch: 64,
            steps: 400_000,
            lr: 3e-3,
            final_lr: 1e-5,
            h: 1e-3,
            horizon: 40.0,
            initial: vec![
                vec![0.1, 0.0],
                vec![1.9, 1.9],
                vec![-1.9, 0.5],
                vec![0.5, -1.9],
            ],
            taus: vec![1e6, 1e4, 1e2],
        },
        "example4_vdp" => Spec {
            system: system("van_der_pol", &[("mu", 1.0), ("omega", 1.0)], None),
            m: 50,
            paper_count: 16_000_000,
            desk_count: 200_000,
            batch: 64,
            steps: 400_000,
            lr: 3e-3,
            final_lr: 1e-5,
            h: 1e-3,
            horizon: 40.0,
            initial: vec![vec![0.5, 0.0], vec![-3.0, 3.0], vec![3.0, -3.0]],
            taus: vec![],
        },
        "example5_duffing" => Spec {
            system: system(
                "duffing",
                &[("zeta", 0.1), ("omega", 0.5), ("alpha", 0.05)],
                None,
            ),
            m: 10,
            paper_count: 16_000_000,
            desk_count: 200_000,
            batch: 64,
            steps: 300_000,
            lr: 3e-3,
            final_lr: 1e-5,
            h: 1e-3,
            horizon: 40.0,
            initial: vec![vec![1.0, 0.0], vec![-2.0, 1.0], vec![3.0, -1.0]],
            taus: vec![],
        },
        "example6_rossler" => Spec {
            system: system("rossler", &[("a", 0.1), ("b", 0.1), ("c", 9.0)], None),
            m: 40,
            paper_count: 27_000_000,
            desk_count: 1_000_000,
            batch: 128,
            steps: 300_000,
            lr: 3e-3,
            final_lr: 1e-5,
            h: 5e-4,
            horizon: 80.0,
            initial: vec![vec![1.0, 1.0, 1.0]],
            taus: vec![],
        },
        "example6_lorenz" => Spec {
            system: system(
                "lorenz",
                &[("sigma", 10.0), ("rho", 28.0), ("beta", 8.0 / 3.0)],
                None,
            ),
            m: 60,
            paper_count: 27_000_000,
            desk_count: 1_000_000,
            batch: 128,
            steps: 300_000,
            lr: 3e-3,
            final_lr: 1e-5,
            h: 5e-4,
            horizon: 80.0,
            initial: vec![vec![1.0, 1.0, 20.0]],
            taus: vec![],
        },
        other => {
            return Err(Error::param(format!(
                "unknown recipe '{other}'; known: {}",
                RECIPES.join(", ")
            )))
        }
    };
    let count = match scale {
        Scale::Paper => s.paper_count,
        Scale::Desk => s.desk_count,
    };
    let epochs = epochs_for(count, s.batch, s.steps, 3);
    let forcing = (name == "example5_duffing").then(|| ForcingConfig {
        amplitude: 5.0 / 8.0,
        freq: 1.0,
        m: 4,
        count: count / 4,
        hidden_forcing: true,
        train: train(
            epochs_for(count / 4, s.batch, s.steps, 3),
            s.batch,
            s.lr,
            s.final_lr,
        ),
    });
    let cfg = RunConfig {
        run_id: format!("{name}-{scale}"),
        system: s.system,
        data: DataConfig {
            count,
            seed: 1,
            ..DataConfig::default()
        },
        net: NetConfig {
            m: s.m,
            ..NetConfig::default()
        },
        train: TrainConfig {
            seed: 1,
            ..train(epochs, s.batch, s.lr, s.final_lr)
        },
        rnn: RnnConfig::default(),
        sim: SimConfig {
            h: s.h,
            horizon: s.horizon,
            initial: s.initial,
        },
        analysis: AnalysisConfig {
            taus: s.taus,
            tau_horizon: 200.0,
            ..AnalysisConfig::default()
        },
        forcing,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_is_valid_at_both_scales() {
        for name in RECIPES {
            for scale in [Scale::Paper, Scale::Desk] {
                let cfg = recipe(name, scale).unwrap();
                assert!(cfg.run_id.starts_with(name));
                let n = cfg.build_system().unwrap().base().dim();
                assert!(cfg.sim.initial.iter().all(|q| q.len() == n));
            }
        }
        assert!(recipe("example7", Scale::Desk).is_err());
    }

    #[test]
    fn caption_dimensions() {
        let d = recipe("example5_duffing", Scale::Desk).unwrap();
        assert_eq!((d.net.m, d.forcing.as_ref().unwrap().m), (10, 4));
        assert_eq!(
            recipe("example1_fixed_point", Scale::Paper)
                .unwrap()
                .data
                .count,
            250_000
        );
        assert_eq!(recipe("example6_lorenz", Scale::Desk).unwrap().net.m, 60);
        assert_eq!("paper".parse::<Scale>().unwrap(), Scale::Paper);
        assert!("huge".parse::<Scale>().is_err());
    }
}
