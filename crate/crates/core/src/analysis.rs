//! Error metrics, the trajectory-error bound, Lipschitz estimates, the
//! hidden-state deviation law, τ sweeps and the gradient potential.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::ffnet::{eval_metrics, FfNet};
use crate::integrate::{integrate_rk4, Trajectory};
use crate::io;
use crate::linalg::{self, dist, norm};
use crate::par;
use crate::synthesis::{synthesize, SynthRnn};
use crate::systems::{Domain, VectorField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Training-set mean squared error.
    pub mse: f64,
    /// Max field error over the evaluation grid.
    pub e_max: f64,
    /// Max over orbits and time of `‖q − ω‖`, divided by `T`.
    pub e_orb: f64,
    pub spectral_radius: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub d_count: usize,
    pub l_f: f64,
    /// `(2 E_max / L_F)(e^{L_F T} − 1)`.
    pub e_l: f64,
}

/// `(2 E_max / L_F)(e^{L_F T} − 1)`, with the `L_F → 0` limit `2 E_max T`.
pub fn e_l(e_max: f64, l_f: f64, horizon: f64) -> f64 {
    if l_f == 0.0 {
        2.0 * e_max * horizon
    } else {
        2.0 * e_max / l_f * (l_f * horizon).exp_m1()
    }
}

fn check_same_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.h != b.h || a.len() != b.len() || a.dim != b.dim {
        return Err(Error::param(format!(
            "trajectory grids differ: {} steps of {} (dim {}) vs {} steps of {} (dim {})",
            a.len(),
            a.h,
            a.dim,
            b.len(),
            b.h,
            b.dim
        )));
    }
    Ok(())
}

/// `max_k ‖a(t_k) − b(t_k)‖`.
pub fn max_trajectory_error(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    check_same_grid(a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| dist(x, y))
        .fold(0.0, f64::max))
}

/// Max trajectory error normalized by the horizon.
pub fn e_orb(truth: &Trajectory, omega: &Trajectory) -> Result<f64> {
    Ok(max_trajectory_error(truth, omega)? / truth.horizon())
}

/// Metrics for one model over a set of `(q(t), ω(t))` pairs.
pub fn compute_metrics(
    pairs: &[(Trajectory, Trajectory)],
    net: &FfNet,
    rnn: &SynthRnn,
    eval_grid: &Dataset,
    l_f: f64,
    train_mse: f64,
    d_count: usize,
) -> Result<RunMetrics> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::param("no trajectories"))?;
    let horizon = first.0.horizon();
    let mut worst = 0.0_f64;
    for (truth, omega) in pairs {
        truth.ensure_complete()?;
        omega.ensure_complete()?;
        check_same_grid(&first.0, truth)?;
        worst = worst.max(e_orb(truth, omega)?);
    }
    let field = eval_metrics(net, eval_grid)?;
    Ok(RunMetrics {
        mse: train_mse,
        e_max: field.e_max,
        e_orb: worst,
        spectral_radius: rnn.spectral_radius(),
        horizon,
        d_count,
        l_f,
        e_l: e_l(field.e_max, l_f, horizon),
    })
}

/// Largest spectral norm of the field Jacobian over `samples` uniform
/// points of the domain. A lower estimate of the Lipschitz constant.
pub fn estimate_lipschitz(field: &VectorField, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let bounds = field.domain.bounds();
    let norms = par::map_indexed(samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let q: Vec<f64> = bounds
            .iter()
            .map(|[lo, hi]| {
                if lo < hi {
                    rng.random_range(*lo..*hi)
                } else {
                    *lo
                }
            })
            .collect();
        linalg::spectral_norm(&field.jacobian_or_fd(&q))
    });
    Ok(norms.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub times: Vec<f64>,
    /// `‖η(t) − (B ω(t) + θ)‖`.
    pub delta: Vec<f64>,
    pub fitted_slope: f64,
    /// `‖θ‖ / τ`.
    pub predicted_slope: f64,
}

impl DeltaSeries {
    pub fn relative_error(&self) -> f64 {
        ((self.fitted_slope - self.predicted_slope) / self.predicted_slope).abs()
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Deviation of the hidden units from `Bω + θ` along a full-state trajectory.
pub fn delta_series(rnn: &SynthRnn, traj: &Trajectory) -> Result<DeltaSeries> {
    check_dim(rnn.dim(), traj.dim)?;
    if traj.len() < 2 {
        return Err(Error::param("delta fit needs at least two samples"));
    }
    let (n, m) = (rnn.n, rnn.m);
    let delta: Vec<f64> = traj
        .iter()
        .map(|s| {
            let (omega, eta) = s.split_at(n);
            (0..m)
                .map(|j| {
                    let r = rnn.theta[j] + (0..n).map(|k| rnn.b[(j, k)] * omega[k]).sum::<f64>();
                    (eta[j] - r).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let times = traj.times();
    let fitted_slope = ols_slope(&times, &delta);
    Ok(DeltaSeries {
        times,
        delta,
        fitted_slope,
        predicted_slope: norm(&rnn.theta) / rnn.tau,
    })
}

/// Integrate the recurrent net from its initial state for `q0` and return
/// the deviation series.
pub fn delta_run(rnn: &SynthRnn, q0: &[f64], h: f64, horizon: f64) -> Result<DeltaSeries> {
    let traj = integrate_rk4(rnn, &rnn.initial_state(q0)?, h, horizon)?;
    traj.ensure_complete()?;
    delta_series(rnn, &traj)
}

#[derive(Clone, Debug)]
pub struct TauRun {
    pub tau: f64,
    /// Output-unit trajectories, one per initial condition.
    pub trajectories: Vec<Trajectory>,
}

/// One synthesized net per τ, integrated from every initial condition.
pub fn tau_sweep(
    net: &FfNet,
    taus: &[f64],
    initial: &[Vec<f64>],
    h: f64,
    horizon: f64,
    bias_drive: bool,
) -> Result<Vec<TauRun>> {
    if taus.is_empty() {
        return Err(Error::param("tau list is empty"));
    }
    if initial.is_empty() {
        return Err(Error::param("no initial conditions"));
    }
    let rnns = taus
        .iter()
        .map(|&t| Ok(synthesize(net, t)?.with_bias_drive(bias_drive)))
        .collect::<Result<Vec<_>>>()?;
    let k = initial.len();
    let runs = par::map_indexed(taus.len() * k, |i| {
        let rnn = &rnns[i / k];
        let q0 = &initial[i % k];
        let mut t = integrate_rk4(rnn, &rnn.initial_state(q0)?, h, horizon)?.project(rnn.n);
        t.meta = format!("tau={} q0={q0:?}", rnn.tau);
        Ok(t)
    });
    let mut runs = runs.into_iter();
    taus.iter()
        .map(|&tau| {
            let trajectories = runs.by_ref().take(k).collect::<Result<Vec<_>>>()?;
            Ok(TauRun { tau, trajectories })
        })
        .collect()
}

/// Distance of each 2-D state from `center`.
pub fn radii(traj: &Trajectory, center: [f64; 2]) -> Result<Vec<f64>> {
    check_dim(2, traj.dim)?;
    Ok(traj
        .iter()
        .map(|s| (s[0] - center[0]).hypot(s[1] - center[1]))
        .collect())
}

/// `(max − min) / mean` of the radius over the last `fraction` of the
/// trajectory.
pub fn terminal_radius_variation(
    traj: &Trajectory,
    center: [f64; 2],
    fraction: f64,
) -> Result<(f64, f64)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("fraction must lie in (0, 1]"));
    }
    let r = radii(traj, center)?;
    let start = ((1.0 - fraction) * r.len() as f64).floor() as usize;
    let tail = &r[start.min(r.len() - 1)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        });
    Ok((mean, (hi - lo) / mean))
}

/// Mean radius over each complete revolution about `center`. Revolutions
/// are delimited by upward crossings of the ray `y = center.y, x > center.x`.
pub fn revolution_radii(traj: &Trajectory, center: [f64; 2]) -> Result<Vec<f64>> {
    let r = radii(traj, center)?;
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for k in 1..traj.len() {
        let (p, c) = (traj.state(k - 1), traj.state(k));
        let crossed = p[1] - center[1] < 0.0 && c[1] - center[1] >= 0.0 && c[0] > center[0];
        if crossed {
            if let Some(s) = start {
                let seg = &r[s..k];
                out.push(seg.iter().sum::<f64>() / seg.len() as f64);
            }
            start = Some(k);
        }
    }
    Ok(out)
}

/// Whether every value after the first `skip` is strictly below its
/// predecessor. Needs at least two values past `skip`.
pub fn strictly_decreasing_after(values: &[f64], skip: usize) -> bool {
    values.len() >= skip + 2 && values[skip..].windows(2).all(|w| w[1] < w[0])
}

/// Sign changes of coordinate `axis` along the trajectory, ignoring zeros.
pub fn sign_changes(traj: &Trajectory, axis: usize) -> usize {
    let mut last = 0.0_f64;
    let mut count = 0;
    for s in traj.iter() {
        let x = s[axis];
        if x != 0.0 {
            if last != 0.0 && (x > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = x;
        }
    }
    count
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSurface {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `V[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
    /// `(W + Wᵀ) / 2`.
    #[serde(with = "crate::linalg::serde_rows")]
    pub w_sym: DMatrix<f64>,
}

impl PotentialSurface {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }

    /// CSV with header `x,y,V`, `x` varying fastest.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let header = ["x", "y", "V"].map(String::from);
        let rows = (0..self.ys.len()).flat_map(|iy| (0..self.xs.len()).map(move |ix| (ix, iy)));
        io::write_csv(
            path,
            &header,
            rows.map(|(ix, iy)| vec![self.xs[ix], self.ys[iy], self.at(ix, iy)]),
            config_hash,
        )
    }
}

fn axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

/// `V(ω) = −½ σ(y)ᵀ Wˢ σ(y)` with `y = col[ω, Bω + θ]` on a `per_axis²`
/// grid over `domain`.
pub fn gradient_potential(
    rnn: &SynthRnn,
    domain: &Domain,
    per_axis: usize,
) -> Result<PotentialSurface> {
    if rnn.n != 2 {
        return Err(Error::param(format!(
            "potential surface needs n = 2, got {}",
            rnn.n
        )));
    }
    check_dim(2, domain.dim())?;
    if per_axis < 3 {
        return Err(Error::param(
            "potential grid needs at least 3 nodes per axis",
        ));
    }
    let w_sym = (&rnn.w + rnn.w.transpose()) * 0.5;
    let xs = axis(domain.lo(0), domain.hi(0), per_axis);
    let ys = axis(domain.lo(1), domain.hi(1), per_axis);
    let dim = rnn.dim();
    let values = par::map_indexed(per_axis * per_axis, |i| {
        let q = [xs[i % per_axis], ys[i / per_axis]];
        let y = rnn.initial_state(&q).expect("n = 2 checked");
        let s: Vec<f64> = y.iter().map(|v| rnn.activation.eval(*v)).collect();
        let mut v = 0.0;
        for c in 0..dim {
            let col: f64 = w_sym.column(c).iter().zip(&s).map(|(w, x)| w * x).sum();
            v += s[c] * col;
        }
        -0.5 * v
    });
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("potential surface".into()));
    }
    Ok(PotentialSurface {
        xs,
        ys,
        values,
        w_sym,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    pub minima: Vec<[f64; 2]>,
    pub maxima: Vec<[f64; 2]>,
    pub saddles: Vec<[f64; 2]>,
}

/// Classify interior grid nodes by their 8 neighbours: strict minima and
/// maxima, and saddles where the sign of `neighbour − centre` changes at
/// least four times around the ring.
pub fn critical_points(surface: &PotentialSurface) -> CriticalPoints {
    const RING: [(isize, isize); 8] = [
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
    ];
    let (nx, ny) = (surface.xs.len(), surface.ys.len());
    let mut out = CriticalPoints::default();
    for iy in 1..ny.saturating_sub(1) {
        for ix in 1..nx.saturating_sub(1) {
            let c = surface.at(ix, iy);
            let d: Vec<f64> = RING
                .iter()
                .map(|(dx, dy)| {
                    surface.at((ix as isize + dx) as usize, (iy as isize + dy) as usize) - c
                })
                .collect();
            let p = [surface.xs[ix], surface.ys[iy]];
            if d.iter().all(|x| *x > 0.0) {
                out.minima.push(p);
            } else if d.iter().all(|x| *x < 0.0) {
                out.maxima.push(p);
            } else {
                let signs: Vec<bool> = d.iter().filter(|x| **x != 0.0).map(|x| *x > 0.0).collect();
                let changes = (0..signs.len())
                    .filter(|&i| signs[i] != signs[(i + 1) % signs.len()])
                    .count();
                if changes >= 4 {
                    out.saddles.push(p);
                }
            }
        }
    }
    out
}
