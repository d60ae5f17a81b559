//! Recast of a trained feedforward net as a continuous-time recurrent net,
//! and the merge of an unforced net with a forcing net.
//!
//! State of the recurrent net is `s = col[ω, η]` with `n` output units `ω`
//! and `m` hidden units `η`:
//!
//! ```text
//! ṡ = −s/τ + W σ(s),   W = [[0, A], [0, BA]],   s(0) = col[q0, B q0 + θ]
//! ```
//!
//! σ is applied to every unit, but the first `n` columns of `W` are zero so
//! only `σ(η)` enters. An optional `θ/τ` drive on the hidden units is
//! available through `bias_drive`; without it `η` tracks `Bω + θ` up to a
//! deviation growing like `‖θ‖ t/τ`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ffnet::{Activation, FfNet, Provenance};
use crate::integrate::Dynamics;
use crate::io;
use crate::linalg::{self, all_finite, norm, serde_rows};
use crate::par;
use crate::systems::Domain;

/// Default neuron time constant.
pub const DEFAULT_TAU: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRnn {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub activation: Activation,
    #[serde(default)]
    pub bias_drive: bool,
    #[serde(rename = "W", with = "serde_rows")]
    pub w: DMatrix<f64>,
    #[serde(rename = "A", with = "serde_rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_rows")]
    pub b: DMatrix<f64>,
    pub theta: Vec<f64>,
}

fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "tau must be positive and finite, got {tau}"
        )))
    }
}

/// `[[0, A], [0, BA]]`.
fn assemble(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = a.shape();
    let mut w = DMatrix::zeros(n + m, n + m);
    w.view_mut((0, n), (n, m)).copy_from(a);
    w.view_mut((n, n), (m, m)).copy_from(&(b * a));
    w
}

pub fn synthesize(net: &FfNet, tau: f64) -> Result<SynthRnn> {
    net.validate()?;
    validate_tau(tau)?;
    Ok(SynthRnn {
        n: net.n,
        m: net.m,
        tau,
        activation: net.activation,
        bias_drive: false,
        w: assemble(&net.a, &net.b),
        a: net.a.clone(),
        b: net.b.clone(),
        theta: net.theta.clone(),
    })
}

impl SynthRnn {
    pub fn with_bias_drive(mut self, on: bool) -> Self {
        self.bias_drive = on;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        validate_tau(tau)?;
        self.tau = tau;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn ffnet(&self) -> FfNet {
        FfNet {
            n: self.n,
            m: self.m,
            activation: self.activation,
            a: self.a.clone(),
            b: self.b.clone(),
            theta: self.theta.clone(),
        }
    }

    /// `BA`, the bottom-right block of `W`.
    pub fn hidden_block(&self) -> DMatrix<f64> {
        self.w.view((self.n, self.n), (self.m, self.m)).into_owned()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.hidden_block())
    }

    pub fn validate(&self) -> Result<()> {
        validate_tau(self.tau)?;
        self.ffnet().validate()?;
        check_dim(self.n + self.m, self.w.nrows())?;
        check_dim(self.n + self.m, self.w.ncols())?;
        if !all_finite(&self.w) {
            return Err(Error::NonFinite("W".into()));
        }
        let expected = assemble(&self.a, &self.b);
        let scale = expected.amax().max(1.0);
        if (&self.w - &expected).amax() > 1e-12 * scale {
            return Err(Error::param(
                "W does not have the block form [[0, A], [0, BA]]",
            ));
        }
        Ok(())
    }

    /// `col[q0, B q0 + θ]`.
    pub fn initial_state(&self, q0: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, q0.len())?;
        let mut s = q0.to_vec();
        s.extend(hidden_init(&self.b, &self.theta, q0));
        Ok(s)
    }

    /// `−s/τ + W σ(s)` plus the optional hidden `θ/τ` drive.
    pub fn rnn_derivative(&self, s: &[f64], out: &mut [f64]) {
        leaky_recurrence(&self.w, self.n, self.tau, self.activation, s, out);
        if self.bias_drive {
            for (o, t) in out[self.n..].iter_mut().zip(&self.theta) {
                *o += t / self.tau;
            }
        }
    }
}

fn hidden_init(b: &DMatrix<f64>, theta: &[f64], q0: &[f64]) -> Vec<f64> {
    (0..b.nrows())
        .map(|j| theta[j] + (0..b.ncols()).map(|k| b[(j, k)] * q0[k]).sum::<f64>())
        .collect()
}

/// `out = −s/τ + W σ(s)`, skipping the first `skip` columns of `W`, which
/// are zero by construction.
fn leaky_recurrence(
    w: &DMatrix<f64>,
    skip: usize,
    tau: f64,
    act: Activation,
    s: &[f64],
    out: &mut [f64],
) {
    for (o, x) in out.iter_mut().zip(s) {
        *o = -x / tau;
    }
    for (j, x) in s.iter().enumerate().skip(skip) {
        let h = act.eval(*x);
        for (o, w) in out.iter_mut().zip(w.column(j).iter()) {
            *o += w * h;
        }
    }
}

impl Dynamics for SynthRnn {
    fn dim(&self) -> usize {
        self.n + self.m
    }

    fn derivative(&self, s: &[f64], out: &mut [f64]) {
        self.rnn_derivative(s, out);
    }
}

/// Unforced net `(n, m)` merged with a forcing net `(p, q)`. The state is
/// `col[ω, ω_f, η, η_f]` and
///
/// ```text
/// ṡ = −s/τ + W_Σ σ(s) + K_Σ s
/// ```
///
/// where `K_Σ` adds the first `n` forcing outputs to `ω̇`. With
/// `hidden_forcing` it also adds `B` times them to `η̇`, so that `η` keeps
/// tracking `Bω + θ` under forcing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedRnn {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub q: usize,
    pub tau: f64,
    pub activation: Activation,
    #[serde(default)]
    pub bias_drive: bool,
    #[serde(default)]
    pub hidden_forcing: bool,
    #[serde(rename = "W_sigma", with = "serde_rows")]
    pub w_sigma: DMatrix<f64>,
    #[serde(rename = "K_sigma", with = "serde_rows")]
    pub k_sigma: DMatrix<f64>,
    #[serde(rename = "A", with = "serde_rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_rows")]
    pub b: DMatrix<f64>,
    pub theta: Vec<f64>,
    #[serde(rename = "A_f", with = "serde_rows")]
    pub a_f: DMatrix<f64>,
    #[serde(rename = "B_f", with = "serde_rows")]
    pub b_f: DMatrix<f64>,
    pub theta_f: Vec<f64>,
}

fn assemble_forced(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a_f: &DMatrix<f64>,
    b_f: &DMatrix<f64>,
    hidden_forcing: bool,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = a.shape();
    let (p, q) = a_f.shape();
    let size = n + p + m + q;
    let (eta, eta_f) = (n + p, n + p + m);
    let mut w = DMatrix::zeros(size, size);
    w.view_mut((0, eta), (n, m)).copy_from(a);
    w.view_mut((n, eta_f), (p, q)).copy_from(a_f);
    w.view_mut((eta, eta), (m, m)).copy_from(&(b * a));
    w.view_mut((eta_f, eta_f), (q, q)).copy_from(&(b_f * a_f));
    let mut k = DMatrix::zeros(size, size);
    for i in 0..n {
        k[(i, n + i)] = 1.0;
    }
    if hidden_forcing {
        k.view_mut((eta, n), (m, n)).copy_from(b);
    }
    (w, k)
}

pub fn merge_frnn(unforced: &SynthRnn, forcing: &SynthRnn) -> Result<ForcedRnn> {
    merge_frnn_with(unforced, forcing, false)
}

/// [`merge_frnn`], optionally feeding the force into the hidden units too.
pub fn merge_frnn_with(
    unforced: &SynthRnn,
    forcing: &SynthRnn,
    hidden_forcing: bool,
) -> Result<ForcedRnn> {
    unforced.validate()?;
    forcing.validate()?;
    if unforced.tau != forcing.tau {
        return Err(Error::param(format!(
            "tau mismatch: {} vs {}",
            unforced.tau, forcing.tau
        )));
    }
    if unforced.activation != forcing.activation {
        return Err(Error::param(
            "activation mismatch between unforced and forcing nets",
        ));
    }
    if unforced.bias_drive != forcing.bias_drive {
        return Err(Error::param(
            "bias drive mismatch between unforced and forcing nets",
        ));
    }
    if forcing.n < unforced.n {
        return Err(Error::param(format!(
            "forcing dimension {} < system dimension {}",
            forcing.n, unforced.n
        )));
    }
    let (w_sigma, k_sigma) = assemble_forced(
        &unforced.a,
        &unforced.b,
        &forcing.a,
        &forcing.b,
        hidden_forcing,
    );
    Ok(ForcedRnn {
        n: unforced.n,
        p: forcing.n,
        m: unforced.m,
        q: forcing.m,
        tau: unforced.tau,
        activation: unforced.activation,
        bias_drive: unforced.bias_drive,
        hidden_forcing,
        w_sigma,
        k_sigma,
        a: unforced.a.clone(),
        b: unforced.b.clone(),
        theta: unforced.theta.clone(),
        a_f: forcing.a.clone(),
        b_f: forcing.b.clone(),
        theta_f: forcing.theta.clone(),
    })
}

impl ForcedRnn {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.n + self.p + self.m + self.q
    }

    /// The unforced and forcing nets this was merged from.
    pub fn parts(&self) -> (SynthRnn, SynthRnn) {
        let part = |a: &DMatrix<f64>, b: &DMatrix<f64>, theta: &[f64]| SynthRnn {
            n: a.nrows(),
            m: a.ncols(),
            tau: self.tau,
            activation: self.activation,
            bias_drive: self.bias_drive,
            w: assemble(a, b),
            a: a.clone(),
            b: b.clone(),
            theta: theta.to_vec(),
        };
        (
            part(&self.a, &self.b, &self.theta),
            part(&self.a_f, &self.b_f, &self.theta_f),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (u, f) = self.parts();
        u.validate()?;
        f.validate()?;
        if self.p < self.n {
            return Err(Error::param(
                "forcing dimension smaller than system dimension",
            ));
        }
        let (w, k) = assemble_forced(&self.a, &self.b, &self.a_f, &self.b_f, self.hidden_forcing);
        check_dim(w.nrows(), self.w_sigma.nrows())?;
        check_dim(w.ncols(), self.w_sigma.ncols())?;
        check_dim(k.nrows(), self.k_sigma.nrows())?;
        check_dim(k.ncols(), self.k_sigma.ncols())?;
        let scale = w.amax().max(1.0);
        if (&self.w_sigma - &w).amax() > 1e-12 * scale || self.k_sigma != k {
            return Err(Error::param(
                "W_sigma / K_sigma do not match the merged block layout",
            ));
        }
        Ok(())
    }

    /// `col[q0, q_f0, B q0 + θ, B_f q_f0 + θ_f]`.
    pub fn initial_state(&self, q0: &[f64], qf0: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, q0.len())?;
        check_dim(self.p, qf0.len())?;
        let mut s = q0.to_vec();
        s.extend_from_slice(qf0);
        s.extend(hidden_init(&self.b, &self.theta, q0));
        s.extend(hidden_init(&self.b_f, &self.theta_f, qf0));
        Ok(s)
    }

    pub fn frnn_derivative(&self, s: &[f64], out: &mut [f64]) {
        let skip = self.n + self.p;
        leaky_recurrence(&self.w_sigma, skip, self.tau, self.activation, s, out);
        for (j, &x) in s.iter().enumerate().take(skip).skip(self.n) {
            for (o, k) in out.iter_mut().zip(self.k_sigma.column(j).iter()) {
                *o += k * x;
            }
        }
        if self.bias_drive {
            let hidden = self.theta.iter().chain(&self.theta_f);
            for (o, t) in out[skip..].iter_mut().zip(hidden) {
                *o += t / self.tau;
            }
        }
    }
}

impl Dynamics for ForcedRnn {
    fn dim(&self) -> usize {
        ForcedRnn::dim(self)
    }

    fn derivative(&self, s: &[f64], out: &mut [f64]) {
        self.frnn_derivative(s, out);
    }
}

/// The three conditions on τ that make the recurrent net track the field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub tau: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub l_f: f64,
    pub l_g: f64,
    /// `max ‖q‖ / τ` over the domain.
    pub q_over_tau: f64,
    pub inv_tau: f64,
    pub theta_over_tau: f64,
    /// `ε L_F / (4 (e^{L_F T} − 1))`.
    pub q_bound: f64,
    /// `L_G / 2`.
    pub inv_tau_bound: f64,
    /// `ε L_G / (4 (e^{L_G T} − 1))`.
    pub theta_bound: f64,
    pub q_ok: bool,
    pub inv_tau_ok: bool,
    pub theta_ok: bool,
}

impl TauReport {
    pub fn all_ok(&self) -> bool {
        self.q_ok && self.inv_tau_ok && self.theta_ok
    }
}

fn growth_bound(epsilon: f64, l: f64, t: f64) -> f64 {
    epsilon * l / (4.0 * (l * t).exp_m1())
}

pub fn check_tau(
    rnn: &SynthRnn,
    epsilon: f64,
    horizon: f64,
    l_f: f64,
    l_g: f64,
    domain: &Domain,
) -> Result<TauReport> {
    for (name, v) in [
        ("epsilon", epsilon),
        ("T", horizon),
        ("L_F", l_f),
        ("L_G", l_g),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(format!("{name} must be positive, got {v}")));
        }
    }
    check_dim(rnn.n, domain.dim())?;
    let tau = rnn.tau;
    let q_over_tau = domain.max_norm() / tau;
    let inv_tau = 1.0 / tau;
    let theta_over_tau = norm(&rnn.theta) / tau;
    let q_bound = growth_bound(epsilon, l_f, horizon);
    let inv_tau_bound = l_g / 2.0;
    let theta_bound = growth_bound(epsilon, l_g, horizon);
    Ok(TauReport {
        tau,
        epsilon,
        horizon,
        l_f,
        l_g,
        q_over_tau,
        inv_tau,
        theta_over_tau,
        q_bound,
        inv_tau_bound,
        theta_bound,
        q_ok: q_over_tau < q_bound,
        inv_tau_ok: inv_tau < inv_tau_bound,
        theta_ok: theta_over_tau < theta_bound,
    })
}

/// Largest spectral norm of the Jacobian `−I/τ + W diag(σ'(s))` over states
/// `col[q, Bq + θ]` with `q` uniform in `domain`.
pub fn estimate_rnn_lipschitz(
    rnn: &SynthRnn,
    domain: &Domain,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(rnn.n, domain.dim())?;
    if samples == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let dim = rnn.dim();
    let norms = par::map_indexed(samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let q: Vec<f64> = domain
            .bounds()
            .iter()
            .map(|[lo, hi]| {
                if lo < hi {
                    rng.random_range(*lo..*hi)
                } else {
                    *lo
                }
            })
            .collect();
        let s = rnn.initial_state(&q).expect("dimension checked");
        let mut j = DMatrix::from_diagonal_element(dim, dim, -1.0 / rnn.tau);
        for c in rnn.n..dim {
            let slope = rnn.activation.slope_from_value(rnn.activation.eval(s[c]));
            for r in 0..dim {
                j[(r, c)] += rnn.w[(r, c)] * slope;
            }
        }
        linalg::spectral_norm(&j)
    });
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Either kind of synthesized network, as persisted to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkFile {
    Rnn(SynthRnn),
    Frnn(ForcedRnn),
}

impl NetworkFile {
    pub fn validate(&self) -> Result<()> {
        match self {
            NetworkFile::Rnn(r) => r.validate(),
            NetworkFile::Frnn(f) => f.validate(),
        }
    }

    /// Writes the network with an optional `provenance` object alongside.
    pub fn write(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut v = serde_json::to_value(self)?;
        if let (Some(p), Some(obj)) = (provenance, v.as_object_mut()) {
            obj.insert("provenance".into(), serde_json::to_value(p)?);
        }
        io::write_json(path, &v)
    }

    pub fn read(path: &Path) -> Result<(Self, Option<Provenance>)> {
        let mut v: serde_json::Value = io::read_json(path)?;
        let provenance = match v.as_object_mut().and_then(|o| o.remove("provenance")) {
            Some(p) => Some(serde_json::from_value(p)?),
            None => None,
        };
        let file: NetworkFile = serde_json::from_value(v)?;
        file.validate()?;
        Ok((file, provenance))
    }
}
