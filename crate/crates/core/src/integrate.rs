//! Fixed-step classical Runge–Kutta integration on uniform time grids.

use std::path::Path;

use crate::error::{check_dim, Error, Result};
use crate::io;
use crate::par;
use crate::synthesis::{ForcedRnn, SynthRnn};
use crate::systems::{ForcedSystem, VectorField};

/// An autonomous ODE `ṡ = G(s)`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    fn derivative(&self, s: &[f64], out: &mut [f64]);
}

/// Adapter for closures.
pub struct FnDynamics<F> {
    dim: usize,
    f: F,
}

impl<F> FnDynamics<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnDynamics { dim, f }
    }
}

impl<F> Dynamics for FnDynamics<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative(&self, s: &[f64], out: &mut [f64]) {
        (self.f)(s, out)
    }
}

/// Uniformly sampled time series `t_k = k h`, `k = 0..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub dim: usize,
    /// Row-major `(K+1) × dim`.
    pub states: Vec<f64>,
    /// Source descriptor (system or model id and initial condition).
    pub meta: String,
    /// First step index whose state was non-finite, if integration aborted.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }

    /// Keep only the first `n` components of every state.
    pub fn project(&self, n: usize) -> Trajectory {
        assert!(n <= self.dim);
        let states = self.iter().flat_map(|s| s[..n].iter().copied()).collect();
        Trajectory {
            states,
            dim: n,
            ..self.clone()
        }
    }

    /// Keep samples `0, every, 2·every, ...`.
    pub fn subsample(&self, every: usize) -> Trajectory {
        let states = self
            .iter()
            .step_by(every.max(1))
            .flat_map(|s| s.iter().copied())
            .collect();
        Trajectory {
            states,
            h: self.h * every.max(1) as f64,
            ..self.clone()
        }
    }

    /// Error if the integration was cut short by a non-finite state.
    pub fn ensure_complete(&self) -> Result<()> {
        match self.diverged_at {
            None => Ok(()),
            Some(k) => Err(Error::NonFinite(format!(
                "trajectory '{}' at step {k} (t = {})",
                self.meta,
                self.time(k)
            ))),
        }
    }
}

impl Trajectory {
    /// CSV with header `t,x1..xn`, one row per step.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        let rows = self.iter().enumerate().map(|(k, s)| {
            let mut row = Vec::with_capacity(self.dim + 1);
            row.push(self.time(k));
            row.extend_from_slice(s);
            row
        });
        io::write_csv(path, &header, rows, config_hash)
    }

    pub fn read_csv(path: &Path) -> Result<Trajectory> {
        let (header, rows) = io::read_csv(path)?;
        if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
            return Err(Error::param(format!(
                "{}: expected header t,x1..xn",
                path.display()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::param(format!(
                "{}: need at least two rows",
                path.display()
            )));
        }
        let dim = header.len() - 1;
        let h = rows[1][0] - rows[0][0];
        let mut states = Vec::with_capacity(rows.len() * dim);
        for (k, row) in rows.iter().enumerate() {
            check_dim(dim + 1, row.len())?;
            if (row[0] - k as f64 * h).abs() > 1e-9 * (1.0 + row[0].abs()) {
                return Err(Error::param(format!(
                    "{}: time grid is not uniform at row {k}",
                    path.display()
                )));
            }
            states.extend_from_slice(&row[1..]);
        }
        let meta = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Trajectory {
            h,
            dim,
            states,
            meta,
            diverged_at: None,
        })
    }
}

/// Number of steps for horizon `t_end` at step `h`; `t_end` must be an
/// integer multiple of `h`.
pub fn step_count(h: f64, t_end: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("step must be positive, got {h}")));
    }
    if !(t_end >= h && t_end.is_finite()) {
        return Err(Error::param(format!(
            "horizon {t_end} shorter than step {h}"
        )));
    }
    let k = (t_end / h).round();
    if ((k * h) - t_end).abs() > 1e-9 * t_end {
        return Err(Error::param(format!(
            "horizon {t_end} is not a multiple of step {h}"
        )));
    }
    Ok(k as usize)
}

struct Rk4Scratch {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(dim: usize) -> Self {
        Rk4Scratch {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }
}

/// One RK4 step from `s` into `next`. `stage_hook(i, x)` sees the state at
/// which the `i`-th slope is evaluated.
fn rk4_step<G, H>(
    g: &G,
    s: &[f64],
    h: f64,
    sc: &mut Rk4Scratch,
    next: &mut [f64],
    mut stage_hook: H,
) where
    G: Fn(usize, &[f64], &mut [f64]),
    H: FnMut(usize, &[f64]),
{
    let Rk4Scratch { k, tmp } = sc;
    const C: [f64; 3] = [0.5, 0.5, 1.0];
    stage_hook(0, s);
    g(0, s, &mut k[0]);
    for i in 1..4 {
        let (done, rest) = k.split_at_mut(i);
        let prev = &done[i - 1];
        for ((t, x), d) in tmp.iter_mut().zip(s).zip(prev.iter()) {
            *t = x + C[i - 1] * h * d;
        }
        stage_hook(i, tmp);
        g(i, tmp, &mut rest[0]);
    }
    for j in 0..s.len() {
        next[j] = s[j] + h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
    }
}

fn run<G, H>(
    dim: usize,
    x0: &[f64],
    h: f64,
    t_end: f64,
    meta: String,
    g: G,
    mut step_hook: H,
) -> Result<Trajectory>
where
    G: Fn(usize, usize, &[f64], &mut [f64]),
    H: FnMut(usize, usize, &[f64]),
{
    check_dim(dim, x0.len())?;
    let steps = step_count(h, t_end)?;
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial condition".into()));
    }
    let mut states = Vec::with_capacity((steps + 1) * dim);
    states.extend_from_slice(x0);
    let mut sc = Rk4Scratch::new(dim);
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; dim];
    let mut diverged_at = None;
    for step in 0..steps {
        rk4_step(
            &|stage, s: &[f64], out: &mut [f64]| g(step, stage, s, out),
            &cur,
            h,
            &mut sc,
            &mut next,
            |stage, x| step_hook(step, stage, x),
        );
        if next.iter().any(|x| !x.is_finite()) {
            diverged_at = Some(step + 1);
            break;
        }
        states.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Trajectory {
        h,
        dim,
        states,
        meta,
        diverged_at,
    })
}

/// Classical RK4 from `x0` over `[0, t_end]`. A non-finite state stops the
/// integration; the returned trajectory then ends at the last finite state
/// and `diverged_at` is set.
pub fn integrate_rk4<D: Dynamics + ?Sized>(
    d: &D,
    x0: &[f64],
    h: f64,
    t_end: f64,
) -> Result<Trajectory> {
    run(
        d.dim(),
        x0,
        h,
        t_end,
        String::new(),
        |_, _, s, out| d.derivative(s, out),
        |_, _, _| {},
    )
}

/// RK4 that also returns every stage state, flattened as
/// `[step][stage][component]`. Feeding those stages to
/// [`integrate_rk4_driven`] reproduces a block-triangular coupling exactly.
pub fn integrate_rk4_recording<D: Dynamics + ?Sized>(
    d: &D,
    x0: &[f64],
    h: f64,
    t_end: f64,
) -> Result<(Trajectory, Vec<f64>)> {
    let mut stages = Vec::new();
    let traj = run(
        d.dim(),
        x0,
        h,
        t_end,
        String::new(),
        |_, _, s, out| d.derivative(s, out),
        |_, _, x| stages.extend_from_slice(x),
    )?;
    Ok((traj, stages))
}

/// RK4 for `ṡ = G(s, u)` where the input `u` at step `k`, stage `i` is
/// supplied by `input(k, i)`.
pub fn integrate_rk4_driven<G, U>(
    dim: usize,
    g: G,
    x0: &[f64],
    h: f64,
    t_end: f64,
    input: U,
) -> Result<Trajectory>
where
    G: Fn(&[f64], &[f64], &mut [f64]),
    U: Fn(usize, usize) -> Vec<f64>,
{
    run(
        dim,
        x0,
        h,
        t_end,
        String::new(),
        |k, i, s, out| g(s, &input(k, i), out),
        |_, _, _| {},
    )
}

/// The ground-truth system paired with a network.
#[derive(Clone, Copy, Debug)]
pub enum TrueSystem<'a> {
    Field(&'a VectorField),
    Forced(&'a ForcedSystem),
}

#[derive(Clone, Copy, Debug)]
pub enum Network<'a> {
    Rnn(&'a SynthRnn),
    Frnn(&'a ForcedRnn),
}

/// Integrate the true system from `q0` and the network from its initial
/// state for `q0`, on the same grid. Returns `(q(t), ω(t))`, both projected
/// to the `n` system coordinates.
pub fn simulate_pair(
    sys: TrueSystem<'_>,
    net: Network<'_>,
    q0: &[f64],
    h: f64,
    t_end: f64,
) -> Result<(Trajectory, Trajectory)> {
    let tag = format!("q0={q0:?}");
    let (truth, n) = match sys {
        TrueSystem::Field(f) => {
            check_dim(f.dim(), q0.len())?;
            (integrate_rk4(f, q0, h, t_end)?, f.dim())
        }
        TrueSystem::Forced(fs) => {
            check_dim(fs.n(), q0.len())?;
            (
                integrate_rk4(fs, &fs.augmented_initial(q0), h, t_end)?,
                fs.n(),
            )
        }
    };
    let rnn_traj = match (sys, net) {
        (TrueSystem::Field(_), Network::Rnn(r)) => {
            check_dim(n, r.n())?;
            integrate_rk4(r, &r.initial_state(q0)?, h, t_end)?
        }
        (TrueSystem::Forced(fs), Network::Frnn(r)) => {
            check_dim(n, r.n())?;
            check_dim(fs.p(), r.p())?;
            integrate_rk4(r, &r.initial_state(q0, &fs.force_initial)?, h, t_end)?
        }
        _ => {
            return Err(Error::param(
                "forced systems pair with forced networks, autonomous with autonomous",
            ))
        }
    };
    let mut truth = truth.project(n);
    truth.meta = format!("true {tag}");
    let mut omega = rnn_traj.project(n);
    omega.meta = format!("rnn {tag}");
    Ok((truth, omega))
}

/// [`simulate_pair`] for several initial conditions, run concurrently.
pub fn simulate_pairs(
    sys: TrueSystem<'_>,
    net: Network<'_>,
    initial: &[Vec<f64>],
    h: f64,
    t_end: f64,
) -> Result<Vec<(Trajectory, Trajectory)>> {
    par::map_slice(initial, |q0| simulate_pair(sys, net, q0, h, t_end))
        .into_iter()
        .collect()
}
