//! Mini-batch backpropagation under Adam.
//!
//! Parameters live in one flat vector: `A` row-major (`n·m`), then `B`
//! row-major (`m·n`), then `θ` (`m`).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{component_mse, Activation, FfNet};
use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate multiplier applied after every epoch.
    pub lr_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Multiplier on the fan-in init ranges `1/√n` (B) and `1/√m` (A).
    pub init_scale: f64,
    /// Train in coordinates where the domain is `[-1, 1]ⁿ` and each target
    /// component has unit RMS, then fold the scaling back into `A`, `B`, `θ`.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_decay: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            init_scale: 3.0,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::param(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return fail("adam_epsilon must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("lr_decay must lie in (0, 1]");
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return fail("init_scale must be positive");
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn standard(len: usize) -> Self {
        Adam::new(len, 1e-3, 0.9, 0.999, 1e-8)
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: FfNet,
    /// Mean training MSE per epoch in the dataset's units, averaged over the
    /// mini-batches of that epoch.
    pub loss_history: Vec<f64>,
    /// MSE of the returned net on the full training set.
    pub final_mse: f64,
}

#[derive(Clone, Copy)]
struct Shape {
    n: usize,
    m: usize,
}

impl Shape {
    fn len(self) -> usize {
        2 * self.n * self.m + self.m
    }
    fn b_off(self) -> usize {
        self.n * self.m
    }
    fn th_off(self) -> usize {
        2 * self.n * self.m
    }
}

pub(crate) fn params_of(net: &FfNet) -> Vec<f64> {
    let mut p = Vec::with_capacity(Shape { n: net.n, m: net.m }.len());
    for i in 0..net.n {
        p.extend(net.a.row(i).iter());
    }
    for j in 0..net.m {
        p.extend(net.b.row(j).iter());
    }
    p.extend_from_slice(&net.theta);
    p
}

fn net_from_params(p: &[f64], n: usize, m: usize, act: Activation) -> FfNet {
    let s = Shape { n, m };
    FfNet {
        n,
        m,
        activation: act,
        a: DMatrix::from_row_slice(n, m, &p[..s.b_off()]),
        b: DMatrix::from_row_slice(m, n, &p[s.b_off()..s.th_off()]),
        theta: p[s.th_off()..].to_vec(),
    }
}

/// Sum over `rows` of per-component squared errors, and the gradient of the
/// summed squared error, both unscaled.
fn batch_sums(
    p: &[f64],
    s: Shape,
    act: Activation,
    x: &[f64],
    t: &[f64],
    rows: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let Shape { n, m } = s;
    let (a, rest) = p.split_at(s.b_off());
    let (b, th) = rest.split_at(n * m);
    par::map_reduce_chunks(
        rows.len(),
        |r| {
            let mut grad = vec![0.0; s.len()];
            let mut sq = vec![0.0; n];
            let mut h = vec![0.0; m];
            let mut e = vec![0.0; n];
            for &row in &rows[r] {
                let q = &x[row * n..(row + 1) * n];
                let target = &t[row * n..(row + 1) * n];
                for j in 0..m {
                    let mut z = th[j];
                    for k in 0..n {
                        z += b[j * n + k] * q[k];
                    }
                    h[j] = act.eval(z);
                }
                for c in 0..n {
                    let mut y = 0.0;
                    for j in 0..m {
                        y += a[c * m + j] * h[j];
                    }
                    e[c] = y - target[c];
                    sq[c] += e[c] * e[c];
                }
                let (ga, gr) = grad.split_at_mut(s.b_off());
                let (gb, gth) = gr.split_at_mut(n * m);
                for c in 0..n {
                    let g = 2.0 * e[c];
                    for j in 0..m {
                        ga[c * m + j] += g * h[j];
                    }
                }
                for j in 0..m {
                    let mut gh = 0.0;
                    for c in 0..n {
                        gh += a[c * m + j] * e[c];
                    }
                    let gz = 2.0 * gh * act.slope_from_value(h[j]);
                    for k in 0..n {
                        gb[j * n + k] += gz * q[k];
                    }
                    gth[j] += gz;
                }
            }
            (sq, grad)
        },
        (vec![0.0; n], vec![0.0; s.len()]),
        |(mut sa, mut ga), (sb, gb)| {
            sa.iter_mut().zip(&sb).for_each(|(x, y)| *x += y);
            ga.iter_mut().zip(&gb).for_each(|(x, y)| *x += y);
            (sa, ga)
        },
    )
}

/// Training objective (MSE averaged over samples and output components) and
/// its gradient in the flat layout `[A row-major, B row-major, θ]`.
pub fn loss_and_grad(net: &FfNet, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_dim(net.n, data.dim)?;
    if data.is_empty() {
        return Err(Error::param("empty dataset"));
    }
    let s = Shape { n: net.n, m: net.m };
    let rows: Vec<usize> = (0..data.len()).collect();
    let (sq, mut grad) = batch_sums(
        &params_of(net),
        s,
        net.activation,
        &data.inputs,
        &data.targets,
        &rows,
    );
    let denom = (data.len() * net.n) as f64;
    grad.iter_mut().for_each(|g| *g /= denom);
    Ok((sq.iter().sum::<f64>() / denom, grad))
}

struct Scaling {
    center: Vec<f64>,
    half_span: Vec<f64>,
    target: Vec<f64>,
}

impl Scaling {
    fn identity(n: usize) -> Self {
        Scaling {
            center: vec![0.0; n],
            half_span: vec![1.0; n],
            target: vec![1.0; n],
        }
    }

    fn fit(data: &Dataset) -> Self {
        let n = data.dim;
        let positive = |x: f64| if x > 0.0 && x.is_finite() { x } else { 1.0 };
        let half_span = (0..n)
            .map(|k| positive(data.domain.span(k) / 2.0))
            .collect();
        let mut target = vec![0.0; n];
        for row in data.targets.chunks(n) {
            target.iter_mut().zip(row).for_each(|(t, y)| *t += y * y);
        }
        let rows = data.len() as f64;
        let target = target
            .into_iter()
            .map(|t| positive((t / rows).sqrt()))
            .collect();
        Scaling {
            center: data.domain.center(),
            half_span,
            target,
        }
    }

    fn apply(&self, data: &Dataset) -> (Vec<f64>, Vec<f64>) {
        let n = data.dim;
        let x = data
            .inputs
            .chunks(n)
            .flat_map(|q| (0..n).map(move |k| (q[k] - self.center[k]) / self.half_span[k]))
            .collect();
        let t = data
            .targets
            .chunks(n)
            .flat_map(|y| (0..n).map(move |c| y[c] / self.target[c]))
            .collect();
        (x, t)
    }

    /// Parameters of the scaled net expressed in original coordinates.
    fn fold(&self, p: &[f64], s: Shape) -> Vec<f64> {
        let Shape { n, m } = s;
        let mut out = p.to_vec();
        for c in 0..n {
            for j in 0..m {
                out[c * m + j] *= self.target[c];
            }
        }
        for j in 0..m {
            let mut shift = 0.0;
            for k in 0..n {
                let w = p[s.b_off() + j * n + k] / self.half_span[k];
                out[s.b_off() + j * n + k] = w;
                shift += w * self.center[k];
            }
            out[s.th_off() + j] -= shift;
        }
        out
    }
}

/// Fit `F_FF` to `data` by mini-batch Adam on the mean squared error.
/// Deterministic for a given `cfg.seed`.
pub fn train(
    data: &Dataset,
    m: usize,
    activation: Activation,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if m == 0 {
        return Err(Error::param("hidden layer needs at least one unit"));
    }
    if data.is_empty() {
        return Err(Error::param("empty dataset"));
    }
    let n = data.dim;
    let s = Shape { n, m };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let scaling = if cfg.normalize {
        Scaling::fit(data)
    } else {
        Scaling::identity(n)
    };
    let (x, t) = if cfg.normalize {
        scaling.apply(data)
    } else {
        (data.inputs.clone(), data.targets.clone())
    };

    let mut p = vec![0.0; s.len()];
    let ra = cfg.init_scale / (m as f64).sqrt();
    let rb = cfg.init_scale / (n as f64).sqrt();
    for v in &mut p[..s.b_off()] {
        *v = rng.random_range(-ra..=ra);
    }
    for v in &mut p[s.b_off()..s.th_off()] {
        *v = rng.random_range(-rb..=rb);
    }
    // Each unit's transition passes through a random training input.
    for j in 0..m {
        let row = rng.random_range(0..data.len());
        let b = &p[s.b_off() + j * n..s.b_off() + (j + 1) * n];
        let q = &x[row * n..(row + 1) * n];
        p[s.th_off() + j] = -b.iter().zip(q).map(|(b, q)| b * q).sum::<f64>();
    }
    let unit_weights: Vec<f64> = scaling.target.iter().map(|w| w * w).collect();

    let mut adam = Adam::new(
        s.len(),
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_epsilon,
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch_size.min(data.len());

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for rows in order.chunks(batch) {
            let (sq, mut grad) = batch_sums(&p, s, activation, &x, &t, rows);
            epoch_sq += sq
                .iter()
                .zip(&unit_weights)
                .map(|(e, w)| e * w)
                .sum::<f64>();
            let denom = (rows.len() * n) as f64;
            grad.iter_mut().for_each(|g| *g /= denom);
            adam.step(&mut p, &grad);
        }
        let loss = epoch_sq / (data.len() * n) as f64;
        if !loss.is_finite() || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch, loss });
        }
        log::debug!(
            "epoch {epoch}: mse {loss:.3e} lr {:.3e}",
            adam.learning_rate
        );
        history.push(loss);
        adam.learning_rate *= cfg.lr_decay;
    }

    let net = net_from_params(&scaling.fold(&p, s), n, m, activation);
    net.validate()?;
    let final_mse = component_mse(&net, data)?;
    Ok(TrainOutcome {
        net,
        loss_history: history,
        final_mse,
    })
}
