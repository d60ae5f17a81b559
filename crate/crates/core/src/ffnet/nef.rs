//! Random encoders with least-squares decoders.
//!
//! `B` and `θ` are drawn once and frozen; `A` solves the ridge-regularized
//! normal equations `(HᵀH + λI) Aᵀ = HᵀY` with `H` the hidden activations.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, FfNet};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NefConfig {
    pub m: usize,
    pub seed: u64,
    /// Encoder gains and biases are uniform in `±encoder_scale` in
    /// coordinates where the domain is `[-1, 1]ⁿ`.
    pub encoder_scale: f64,
    pub activation: Activation,
    /// `λ = ridge · tr(HᵀH) / m`.
    pub ridge: f64,
}

impl Default for NefConfig {
    fn default() -> Self {
        NefConfig {
            m: 100,
            seed: 0,
            encoder_scale: 2.0,
            activation: Activation::Tanh,
            ridge: 1e-8,
        }
    }
}

const MAX_RIDGE_RETRIES: usize = 20;

pub fn train_nef_baseline(data: &Dataset, cfg: &NefConfig) -> Result<FfNet> {
    if cfg.m == 0 {
        return Err(Error::param("hidden layer needs at least one unit"));
    }
    if data.is_empty() {
        return Err(Error::param("empty dataset"));
    }
    if !(cfg.encoder_scale > 0.0 && cfg.encoder_scale.is_finite()) {
        return Err(Error::param("encoder_scale must be positive"));
    }
    if !(cfg.ridge > 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::param("ridge must be positive"));
    }
    let (n, m) = (data.dim, cfg.m);
    if data.len() < m {
        log::warn!(
            "NEF baseline: {} samples for {m} hidden units; decoders are underdetermined",
            data.len()
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let center = data.domain.center();
    let half: Vec<f64> = (0..n)
        .map(|k| data.domain.span(k) / 2.0)
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    let r = cfg.encoder_scale;
    let mut b = DMatrix::zeros(m, n);
    let mut theta = vec![0.0; m];
    for j in 0..m {
        let mut shift = 0.0;
        for k in 0..n {
            b[(j, k)] = rng.random_range(-r..=r) / half[k];
            shift += b[(j, k)] * center[k];
        }
        theta[j] = rng.random_range(-r..=r) - shift;
    }
    let mut net = FfNet {
        n,
        m,
        activation: cfg.activation,
        a: DMatrix::zeros(n, m),
        b,
        theta,
    };

    let (gram, rhs) = par::map_reduce_chunks(
        data.len(),
        |rows| {
            let mut g = DMatrix::<f64>::zeros(m, m);
            let mut y = DMatrix::<f64>::zeros(m, n);
            let mut h = vec![0.0; m];
            for i in rows {
                net.hidden_into(data.input(i), &mut h);
                let t = data.target(i);
                for p in 0..m {
                    for q in p..m {
                        g[(p, q)] += h[p] * h[q];
                    }
                    for c in 0..n {
                        y[(p, c)] += h[p] * t[c];
                    }
                }
            }
            (g, y)
        },
        (DMatrix::zeros(m, m), DMatrix::zeros(m, n)),
        |(g1, y1), (g2, y2)| (g1 + g2, y1 + y2),
    );
    let gram = DMatrix::from_fn(
        m,
        m,
        |p, q| if p <= q { gram[(p, q)] } else { gram[(q, p)] },
    );

    let mut lambda = cfg.ridge * gram.trace() / m as f64;
    if lambda <= 0.0 {
        lambda = cfg.ridge;
    }
    for attempt in 0..=MAX_RIDGE_RETRIES {
        let reg = &gram + DMatrix::identity(m, m) * lambda;
        if let Some(chol) = reg.cholesky() {
            let at = chol.solve(&rhs);
            if at.iter().all(|v| v.is_finite()) {
                net.a = at.transpose();
                net.validate()?;
                return Ok(net);
            }
        }
        if attempt < MAX_RIDGE_RETRIES {
            log::warn!(
                "NEF baseline: normal equations singular at ridge {lambda:.3e}; retrying with 10x"
            );
            lambda *= 10.0;
        }
    }
    Err(Error::NonFinite(
        "NEF decoders: normal equations stayed singular".into(),
    ))
}
