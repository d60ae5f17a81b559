//! Catalog of analytic vector fields and forced systems.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::integrate::Dynamics;

/// Axis-aligned box `[lo, hi]` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Domain(Vec<[f64; 2]>);

impl Domain {
    /// Point boxes (`lo == hi`) are accepted; inverted or non-finite axes are not.
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::param("domain needs at least one axis"));
        }
        for (k, [lo, hi]) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::param(format!("domain axis {k}: [{lo}, {hi}]")));
            }
        }
        Ok(Domain(bounds))
    }

    pub fn square(dim: usize, half: f64) -> Self {
        Domain(vec![[-half, half]; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.0
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.0[axis][0]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.0[axis][1]
    }

    pub fn span(&self, axis: usize) -> f64 {
        self.0[axis][1] - self.0[axis][0]
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim()
            && q.iter()
                .zip(&self.0)
                .all(|(x, [lo, hi])| *lo <= *x && *x <= *hi)
    }

    /// The box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Self {
        Domain(
            self.0
                .iter()
                .map(|[lo, hi]| {
                    let c = 0.5 * (lo + hi);
                    let h = 0.5 * (hi - lo) * factor;
                    [c - h, c + h]
                })
                .collect(),
        )
    }

    /// Largest Euclidean norm over the box (attained at a corner).
    pub fn max_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|[lo, hi]| lo.abs().max(hi.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `F(q) = M q + c`.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    FixedPoint {
        a: f64,
        b: f64,
        p: [f64; 2],
    },
    MultiFixedPoint {
        points: Vec<[f64; 2]>,
        a: f64,
        b: f64,
        sharpness: f64,
    },
    LimitCycle {
        radius: f64,
    },
    VanDerPol {
        mu: f64,
        omega: f64,
    },
    Duffing {
        zeta: f64,
        omega: f64,
        alpha: f64,
    },
    Rossler {
        a: f64,
        b: f64,
        c: f64,
    },
    Lorenz {
        sigma: f64,
        rho: f64,
        beta: f64,
    },
    /// Force generator with state `(f_1..f_channels, g)`: channel `target`
    /// oscillates as `f'' = -freq² f` (with `g = f'`), the others are constant.
    SinusoidalDrive {
        channels: usize,
        target: usize,
        freq: f64,
    },
}

/// An analytic C¹ field `F: Rⁿ → Rⁿ` on a compact box. Immutable after
/// construction, so it can be evaluated from any number of threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub name: String,
    pub kind: FieldKind,
    pub domain: Domain,
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, (k, v)) in self.params().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}

pub fn fixed_point(a: f64, b: f64, p1: f64, p2: f64) -> Result<VectorField> {
    if !(a < 0.0 && b < 0.0) {
        return Err(Error::param(format!(
            "fixed point needs a < 0 and b < 0 to attract (a={a}, b={b})"
        )));
    }
    Ok(VectorField {
        name: "fixed_point".into(),
        kind: FieldKind::FixedPoint { a, b, p: [p1, p2] },
        domain: Domain::square(2, 2.0),
    })
}

/// Blend single-fixed-point fields `F_i(q) = diag(a, b)(q - p_i)` with the
/// normalized inverse-distance weights
/// `w_i(q) = Π_{j≠i} |q - p_j|^{2s} / Σ_k Π_{j≠k} |q - p_j|^{2s}`.
/// Each `p_i` is an exact fixed point with Jacobian `diag(a, b)` there, and
/// mirror-symmetric layouts give mirror-symmetric fields.
pub fn multi_fixed_point(
    points: &[[f64; 2]],
    a: f64,
    b: f64,
    sharpness: f64,
) -> Result<VectorField> {
    multi_fixed_point_in(points, a, b, sharpness, Domain::square(2, 3.0))
}

pub fn multi_fixed_point_in(
    points: &[[f64; 2]],
    a: f64,
    b: f64,
    sharpness: f64,
    domain: Domain,
) -> Result<VectorField> {
    if points.len() < 2 {
        return Err(Error::param("need at least two fixed points"));
    }
    if !(a < 0.0 && b < 0.0) {
        return Err(Error::param("fixed points need a < 0 and b < 0"));
    }
    // Below 1/2 the weights lose differentiability at the embedded points.
    if !(sharpness > 0.5) {
        return Err(Error::param(format!(
            "blend sharpness must exceed 0.5, got {sharpness}"
        )));
    }
    for (i, p) in points.iter().enumerate() {
        if !domain.contains(p) {
            return Err(Error::param(format!(
                "fixed point {p:?} outside the domain"
            )));
        }
        if points[..i].contains(p) {
            return Err(Error::param(format!("duplicate fixed point {p:?}")));
        }
    }
    Ok(VectorField {
        name: "multi_fixed_point".into(),
        kind: FieldKind::MultiFixedPoint {
            points: points.to_vec(),
            a,
            b,
            sharpness,
        },
        domain,
    })
}

pub fn limit_cycle(radius: f64) -> Result<VectorField> {
    if !(radius > 0.0) {
        return Err(Error::param(format!(
            "limit cycle radius must be positive, got {radius}"
        )));
    }
    Ok(VectorField {
        name: "limit_cycle".into(),
        kind: FieldKind::LimitCycle { radius },
        domain: Domain::square(2, 2.0 * radius),
    })
}

pub fn van_der_pol(mu: f64, omega: f64) -> VectorField {
    VectorField {
        name: "van_der_pol".into(),
        kind: FieldKind::VanDerPol { mu, omega },
        domain: Domain::square(2, 4.0),
    }
}

pub fn duffing_unforced(zeta: f64, omega: f64, alpha: f64) -> VectorField {
    VectorField {
        name: "duffing".into(),
        kind: FieldKind::Duffing { zeta, omega, alpha },
        domain: Domain::square(2, 6.0),
    }
}

pub fn rossler(a: f64, b: f64, c: f64) -> VectorField {
    VectorField {
        name: "rossler".into(),
        kind: FieldKind::Rossler { a, b, c },
        domain: Domain(vec![[-20.0, 20.0], [-20.0, 20.0], [0.0, 40.0]]),
    }
}

/// The y-axis of the Lorenz attractor reaches about ±28, so it gets a wider
/// interval than x.
pub fn lorenz(sigma: f64, rho: f64, beta: f64) -> VectorField {
    VectorField {
        name: "lorenz".into(),
        kind: FieldKind::Lorenz { sigma, rho, beta },
        domain: Domain(vec![[-25.0, 25.0], [-30.0, 30.0], [0.0, 50.0]]),
    }
}

/// Generator for `f(t) = amplitude · cos(freq t)` on channel `target` of an
/// `channels`-dimensional force. State dimension is `channels + 1`.
pub fn sinusoidal_drive(
    channels: usize,
    target: usize,
    freq: f64,
    amplitude: f64,
) -> Result<(VectorField, Vec<f64>)> {
    if target >= channels {
        return Err(Error::param(format!(
            "drive target {target} >= channels {channels}"
        )));
    }
    let amp = amplitude.abs().max(1e-3) * 1.6;
    let mut bounds = vec![[-0.5, 0.5]; channels];
    bounds[target] = [-amp, amp];
    bounds.push([-amp * freq.abs().max(1e-3), amp * freq.abs().max(1e-3)]);
    let field = VectorField {
        name: "sinusoidal_drive".into(),
        kind: FieldKind::SinusoidalDrive {
            channels,
            target,
            freq,
        },
        domain: Domain(bounds),
    };
    let mut initial = vec![0.0; channels + 1];
    initial[target] = amplitude;
    Ok((field, initial))
}

pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>, domain: Domain) -> Result<VectorField> {
    let n = offset.len();
    check_dim(n, matrix.len())?;
    for row in &matrix {
        check_dim(n, row.len())?;
    }
    check_dim(n, domain.dim())?;
    Ok(VectorField {
        name: "affine".into(),
        kind: FieldKind::Affine { matrix, offset },
        domain,
    })
}

impl VectorField {
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        check_dim(self.dim(), domain.dim())?;
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FieldKind::Affine { offset, .. } => offset.len(),
            FieldKind::Rossler { .. } | FieldKind::Lorenz { .. } => 3,
            FieldKind::SinusoidalDrive { channels, .. } => channels + 1,
            _ => 2,
        }
    }

    pub fn params(&self) -> Vec<(String, f64)> {
        let named = |v: &[(&str, f64)]| v.iter().map(|(k, x)| (k.to_string(), *x)).collect();
        match &self.kind {
            FieldKind::Affine { .. } => Vec::new(),
            FieldKind::FixedPoint { a, b, p } => {
                named(&[("a", *a), ("b", *b), ("p1", p[0]), ("p2", p[1])])
            }
            FieldKind::MultiFixedPoint {
                a, b, sharpness, ..
            } => named(&[("a", *a), ("b", *b), ("sharpness", *sharpness)]),
            FieldKind::LimitCycle { radius } => named(&[("radius", *radius)]),
            FieldKind::VanDerPol { mu, omega } => named(&[("mu", *mu), ("omega", *omega)]),
            FieldKind::Duffing { zeta, omega, alpha } => {
                named(&[("zeta", *zeta), ("omega", *omega), ("alpha", *alpha)])
            }
            FieldKind::Rossler { a, b, c } => named(&[("a", *a), ("b", *b), ("c", *c)]),
            FieldKind::Lorenz { sigma, rho, beta } => {
                named(&[("sigma", *sigma), ("rho", *rho), ("beta", *beta)])
            }
            FieldKind::SinusoidalDrive { freq, .. } => named(&[("freq", *freq)]),
        }
    }

    /// Evaluate `F(q)` into `out`.
    pub fn eval_into(&self, q: &[f64], out: &mut [f64]) {
        debug_assert_eq!(q.len(), self.dim());
        match &self.kind {
            FieldKind::Affine { matrix, offset } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = offset[i] + matrix[i].iter().zip(q).map(|(m, x)| m * x).sum::<f64>();
                }
            }
            FieldKind::FixedPoint { a, b, p } => {
                out[0] = a * (q[0] - p[0]);
                out[1] = b * (q[1] - p[1]);
            }
            FieldKind::MultiFixedPoint {
                points,
                a,
                b,
                sharpness,
            } => {
                let c = blend_center(points, *sharpness, q);
                out[0] = a * (q[0] - c[0]);
                out[1] = b * (q[1] - c[1]);
            }
            FieldKind::LimitCycle { radius } => {
                let (x, y) = (q[0], q[1]);
                let g = radius * radius - x * x - y * y;
                out[0] = -y + x * g;
                out[1] = x + y * g;
            }
            FieldKind::VanDerPol { mu, omega } => {
                let (x, v) = (q[0], q[1]);
                out[0] = v;
                out[1] = -mu * (x * x - 1.0) * v - omega * omega * x;
            }
            FieldKind::Duffing { zeta, omega, alpha } => {
                let (x, v) = (q[0], q[1]);
                out[0] = v;
                out[1] = -2.0 * zeta * omega * v - omega * omega * (x + alpha * x * x * x);
            }
            FieldKind::Rossler { a, b, c } => {
                let (x, y, z) = (q[0], q[1], q[2]);
                out[0] = -y - z;
                out[1] = x + a * y;
                out[2] = b + z * (x - c);
            }
            FieldKind::Lorenz { sigma, rho, beta } => {
                let (x, y, z) = (q[0], q[1], q[2]);
                out[0] = sigma * (y - x);
                out[1] = x * (rho - z) - y;
                out[2] = x * y - beta * z;
            }
            FieldKind::SinusoidalDrive {
                channels,
                target,
                freq,
            } => {
                out.fill(0.0);
                out[*target] = q[*channels];
                out[*channels] = -freq * freq * q[*target];
            }
        }
    }

    pub fn eval(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(q, &mut out);
        out
    }

    pub fn try_eval(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), q.len())?;
        Ok(self.eval(q))
    }

    /// Analytic Jacobian, where the catalog provides one.
    pub fn jacobian(&self, q: &[f64]) -> Option<DMatrix<f64>> {
        let j = match &self.kind {
            FieldKind::Affine { matrix, .. } => {
                let n = matrix.len();
                DMatrix::from_fn(n, n, |i, k| matrix[i][k])
            }
            FieldKind::FixedPoint { a, b, .. } => {
                DMatrix::from_row_slice(2, 2, &[*a, 0.0, 0.0, *b])
            }
            FieldKind::MultiFixedPoint { .. } => return None,
            FieldKind::LimitCycle { radius } => {
                let (x, y) = (q[0], q[1]);
                let g = radius * radius - x * x - y * y;
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        g - 2.0 * x * x,
                        -1.0 - 2.0 * x * y,
                        1.0 - 2.0 * x * y,
                        g - 2.0 * y * y,
                    ],
                )
            }
            FieldKind::VanDerPol { mu, omega } => {
                let (x, v) = (q[0], q[1]);
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        0.0,
                        1.0,
                        -2.0 * mu * x * v - omega * omega,
                        -mu * (x * x - 1.0),
                    ],
                )
            }
            FieldKind::Duffing { zeta, omega, alpha } => {
                let x = q[0];
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        0.0,
                        1.0,
                        -omega * omega * (1.0 + 3.0 * alpha * x * x),
                        -2.0 * zeta * omega,
                    ],
                )
            }
            FieldKind::Rossler { a, c, .. } => {
                let (x, z) = (q[0], q[2]);
                DMatrix::from_row_slice(3, 3, &[0.0, -1.0, -1.0, 1.0, *a, 0.0, z, 0.0, x - c])
            }
            FieldKind::Lorenz { sigma, rho, beta } => {
                let (x, y, z) = (q[0], q[1], q[2]);
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[-sigma, *sigma, 0.0, rho - z, -1.0, -x, y, x, -beta],
                )
            }
            FieldKind::SinusoidalDrive {
                channels,
                target,
                freq,
            } => {
                let p = channels + 1;
                let mut j = DMatrix::zeros(p, p);
                j[(*target, *channels)] = 1.0;
                j[(*channels, *target)] = -freq * freq;
                j
            }
        };
        Some(j)
    }

    /// Central-difference Jacobian with step `rel_step` times each axis span.
    pub fn jacobian_fd(&self, q: &[f64], rel_step: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        let mut qp = q.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for k in 0..n {
            let span = self.domain.span(k);
            let step = rel_step * if span > 0.0 { span } else { 1.0 };
            qp[k] = q[k] + step;
            self.eval_into(&qp, &mut fp);
            qp[k] = q[k] - step;
            self.eval_into(&qp, &mut fm);
            qp[k] = q[k];
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        j
    }

    /// Analytic Jacobian if available, otherwise central differences.
    pub fn jacobian_or_fd(&self, q: &[f64]) -> DMatrix<f64> {
        self.jacobian(q)
            .unwrap_or_else(|| self.jacobian_fd(q, 1e-6))
    }
}

impl Dynamics for VectorField {
    fn dim(&self) -> usize {
        VectorField::dim(self)
    }

    fn derivative(&self, s: &[f64], out: &mut [f64]) {
        self.eval_into(s, out);
    }
}

/// Weighted center `Σ w_i(q) p_i` of the inverse-distance blend.
fn blend_center(points: &[[f64; 2]], s: f64, q: &[f64]) -> [f64; 2] {
    let powered: Vec<f64> = points
        .iter()
        .map(|p| {
            let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            d2.powf(s)
        })
        .collect();
    let mut num = [0.0; 2];
    let mut den = 0.0;
    for (i, p) in points.iter().enumerate() {
        let w: f64 = powered
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, d)| d)
            .product();
        num[0] += w * p[0];
        num[1] += w * p[1];
        den += w;
    }
    [num[0] / den, num[1] / den]
}

/// `q̇ = F(q) + f(t)` with `f` generated autonomously: the force state
/// `q_f = col[f, g]` evolves under `force_dynamics` and its first `n`
/// components are added to `q̇`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedSystem {
    pub base: VectorField,
    pub force_dynamics: VectorField,
    pub force_initial: Vec<f64>,
}

impl ForcedSystem {
    pub fn new(
        base: VectorField,
        force_dynamics: VectorField,
        force_initial: Vec<f64>,
    ) -> Result<Self> {
        let (n, p) = (base.dim(), force_dynamics.dim());
        if p < n {
            return Err(Error::param(format!(
                "force dimension {p} < system dimension {n}"
            )));
        }
        check_dim(p, force_initial.len())?;
        Ok(ForcedSystem {
            base,
            force_dynamics,
            force_initial,
        })
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    pub fn p(&self) -> usize {
        self.force_dynamics.dim()
    }

    /// Initial state of the augmented system `col[q0, q_f(0)]`.
    pub fn augmented_initial(&self, q0: &[f64]) -> Vec<f64> {
        let mut x = q0.to_vec();
        x.extend_from_slice(&self.force_initial);
        x
    }
}

impl Dynamics for ForcedSystem {
    fn dim(&self) -> usize {
        self.n() + self.p()
    }

    fn derivative(&self, s: &[f64], out: &mut [f64]) {
        let n = self.n();
        let (q, qf) = s.split_at(n);
        let (dq, dqf) = out.split_at_mut(n);
        self.base.eval_into(q, dq);
        self.force_dynamics.eval_into(qf, dqf);
        for i in 0..n {
            dq[i] += qf[i];
        }
    }
}

/// Duffing oscillator driven by `f0 cos t` on the velocity equation. The
/// force generator state is `(f_x, f_v, g)` with `f_x ≡ 0`, so `p = 3`.
pub fn duffing_forced(zeta: f64, omega: f64, alpha: f64, f0: f64) -> Result<ForcedSystem> {
    let base = duffing_unforced(zeta, omega, alpha);
    let (force, initial) = sinusoidal_drive(2, 1, 1.0, f0)?;
    ForcedSystem::new(base, force, initial)
}

/// Catalog identifiers accepted in configs and on the command line.
pub const CATALOG: &[&str] = &[
    "fixed_point",
    "multi_fixed_point",
    "limit_cycle",
    "van_der_pol",
    "duffing",
    "rossler",
    "lorenz",
];

fn take(params: &BTreeMap<String, f64>, used: &mut Vec<String>, key: &str, default: f64) -> f64 {
    used.push(key.to_string());
    params.get(key).copied().unwrap_or(default)
}

/// Build a catalog field by name. Missing parameters take their defaults;
/// unknown parameter names are rejected. `points` applies to
/// `multi_fixed_point` only.
pub fn by_name(
    name: &str,
    params: &BTreeMap<String, f64>,
    points: Option<&[[f64; 2]]>,
) -> Result<VectorField> {
    let mut used = Vec::new();
    let u = &mut used;
    let field = match name {
        "fixed_point" => fixed_point(
            take(params, u, "a", -1.0),
            take(params, u, "b", -1.0),
            take(params, u, "p1", 1.0),
            take(params, u, "p2", 0.0),
        )?,
        "multi_fixed_point" => {
            let default_points = [[1.0, 0.0], [-1.0, 0.0]];
            multi_fixed_point(
                points.unwrap_or(&default_points),
                take(params, u, "a", -1.0),
                take(params, u, "b", -1.0),
                take(params, u, "sharpness", 2.0),
            )?
        }
        "limit_cycle" => limit_cycle(take(params, u, "radius", 1.0))?,
        "van_der_pol" => van_der_pol(take(params, u, "mu", 1.0), take(params, u, "omega", 1.0)),
        "duffing" => duffing_unforced(
            take(params, u, "zeta", 0.1),
            take(params, u, "omega", 0.5),
            take(params, u, "alpha", 0.05),
        ),
        "rossler" => rossler(
            take(params, u, "a", 0.1),
            take(params, u, "b", 0.1),
            take(params, u, "c", 9.0),
        ),
        "lorenz" => lorenz(
            take(params, u, "sigma", 10.0),
            take(params, u, "rho", 28.0),
            take(params, u, "beta", 8.0 / 3.0),
        ),
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| !used.contains(k)) {
        return Err(Error::param(format!(
            "unknown parameter '{bad}' for system '{name}'"
        )));
    }
    if points.is_some() && name != "multi_fixed_point" {
        return Err(Error::param(format!(
            "'points' is not a parameter of '{name}'"
        )));
    }
    Ok(field)
}

/// Parse `key=value` pairs as used on the command line.
pub fn parse_params<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::param(format!("expected key=value, got '{pair}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("'{v}' is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn fixed_point_examples() {
        let f = fixed_point(-1.0, -1.0, 1.0, 0.0).unwrap();
        assert_eq!(f.eval(&[1.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(f.eval(&[2.0, 0.0]), vec![-1.0, 0.0]);
        let g = fixed_point(-2.0, -0.5, 0.0, 0.0).unwrap();
        assert_eq!(g.eval(&[1.0, 1.0]), vec![-2.0, -0.5]);
        assert!(fixed_point(0.0, -1.0, 0.0, 0.0).is_err());
        assert!(fixed_point(-1.0, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn multi_fixed_point_embeds_points_exactly() {
        let two = multi_fixed_point(&[[1.0, 0.0], [-1.0, 0.0]], -1.0, -1.0, 2.0).unwrap();
        assert_eq!(two.eval(&[1.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(two.eval(&[-1.0, 0.0]), vec![0.0, 0.0]);

        let pts = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        let four = multi_fixed_point(&pts, -1.0, -1.0, 2.0).unwrap();
        for p in &pts {
            assert_eq!(four.eval(p), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn two_point_blend_has_separatrix_on_y_axis() {
        let f = multi_fixed_point(&[[1.0, 0.0], [-1.0, 0.0]], -1.0, -0.7, 2.0).unwrap();
        for k in 0..=600 {
            let y = -3.0 + 0.01 * k as f64;
            assert_eq!(f.eval(&[0.0, y])[0], 0.0, "y = {y}");
        }
        // Mirror symmetry: F_x(-x, y) = -F_x(x, y), F_y(-x, y) = F_y(x, y).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (x, y) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let a = f.eval(&[x, y]);
            let b = f.eval(&[-x, y]);
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_blend_on_x_axis_has_exactly_three_zeros() {
        // With s = 2 the x-axis restriction reduces to x(x⁴ + 2x² - 3) = 0.
        let f = multi_fixed_point(&[[1.0, 0.0], [-1.0, 0.0]], -1.0, -1.0, 2.0).unwrap();
        let mut crossings = 0;
        let xs: Vec<f64> = (0..=6001)
            .map(|k| -3.0 + 0.001 * k as f64 + 0.0005)
            .collect();
        for w in xs.windows(2) {
            if f.eval(&[w[0], 0.0])[0].signum() != f.eval(&[w[1], 0.0])[0].signum() {
                crossings += 1;
            }
        }
        assert_eq!(crossings, 3);
    }

    #[test]
    fn multi_fixed_point_rejections() {
        assert!(multi_fixed_point(&[[1.0, 0.0]], -1.0, -1.0, 2.0).is_err());
        assert!(multi_fixed_point(&[[1.0, 0.0], [1.0, 0.0]], -1.0, -1.0, 2.0).is_err());
        assert!(multi_fixed_point(&[[1.0, 0.0], [9.0, 0.0]], -1.0, -1.0, 2.0).is_err());
        assert!(multi_fixed_point(&[[1.0, 0.0], [-1.0, 0.0]], -1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn limit_cycle_examples() {
        let f = limit_cycle(1.0).unwrap();
        assert_eq!(f.eval(&[1.0, 0.0]), vec![0.0, 1.0]);
        assert_eq!(f.eval(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(limit_cycle(2.0).unwrap().eval(&[1.0, 0.0]), vec![3.0, 1.0]);
        assert!(limit_cycle(0.0).is_err());
        assert_eq!(limit_cycle(1.5).unwrap().domain, Domain::square(2, 3.0));
    }

    #[test]
    fn van_der_pol_examples() {
        assert_eq!(van_der_pol(1.0, 1.0).eval(&[0.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(van_der_pol(0.0, 1.0).eval(&[1.0, 0.0]), vec![0.0, -1.0]);
        assert_eq!(van_der_pol(1.0, 1.0).eval(&[2.0, 1.0]), vec![1.0, -5.0]);
    }

    #[test]
    fn duffing_and_drive() {
        let sys = duffing_forced(0.1, 0.5, 0.05, 5.0 / 8.0).unwrap();
        assert_eq!((sys.n(), sys.p()), (2, 3));
        assert_eq!(sys.force_initial, vec![0.0, 0.625, 0.0]);
        // The oscillating pair (f, f') behaves as f'' + f = 0.
        assert_eq!(
            sys.force_dynamics.eval(&[0.0, 0.625, 0.0]),
            vec![0.0, 0.0, -0.625]
        );
        let (osc, init) = sinusoidal_drive(1, 0, 1.0, 0.625).unwrap();
        assert_eq!(init, vec![0.625, 0.0]);
        assert_eq!(osc.eval(&init), vec![0.0, -0.625]);

        let mut out = vec![0.0; 5];
        sys.derivative(&[1.0, 2.0, 0.0, 0.625, 0.0], &mut out);
        let base = sys.base.eval(&[1.0, 2.0]);
        assert_eq!(out, vec![base[0], base[1] + 0.625, 0.0, 0.0, -0.625]);
        assert!(ForcedSystem::new(lorenz(10.0, 28.0, 8.0 / 3.0), osc, init).is_err());
    }

    #[test]
    fn chaotic_examples() {
        assert_eq!(
            rossler(0.1, 0.1, 9.0).eval(&[0.0, 0.0, 0.0]),
            vec![0.0, 0.0, 0.1]
        );
        let l = lorenz(10.0, 28.0, 8.0 / 3.0);
        assert_eq!(l.eval(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert!(close(
            &l.eval(&[1.0, 1.0, 1.0]),
            &[0.0, 26.0, -5.0 / 3.0],
            1e-15
        ));
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let fields = vec![
            fixed_point(-1.0, -2.0, 0.3, -0.1).unwrap(),
            limit_cycle(1.0).unwrap(),
            van_der_pol(1.0, 1.0),
            duffing_unforced(0.1, 0.5, 0.05),
            rossler(0.1, 0.1, 9.0),
            lorenz(10.0, 28.0, 8.0 / 3.0),
            sinusoidal_drive(2, 1, 1.0, 0.625).unwrap().0,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in &fields {
            for _ in 0..100 {
                let q: Vec<f64> = (0..f.dim())
                    .map(|k| {
                        let (lo, hi) = (f.domain.lo(k), f.domain.hi(k));
                        let m = 0.01 * (hi - lo);
                        rng.random_range(lo + m..hi - m)
                    })
                    .collect();
                let exact = f.jacobian(&q).unwrap();
                let fd = f.jacobian_fd(&q, 1e-6);
                let scale = exact.norm().max(1.0);
                assert!(
                    (&exact - &fd).norm() / scale <= 1e-5,
                    "{} at {q:?}: {exact} vs {fd}",
                    f.name
                );
            }
        }
    }

    #[test]
    fn by_name_defaults_and_rejections() {
        let none = BTreeMap::new();
        for name in CATALOG {
            let f = by_name(name, &none, None).unwrap();
            assert_eq!(&f.name, name);
        }
        assert!(matches!(
            by_name("henon", &none, None),
            Err(Error::UnknownSystem(_))
        ));
        let bad = parse_params(["rho=28", "gamma=1"]).unwrap();
        assert!(by_name("lorenz", &bad, None).is_err());
        let ok = parse_params(["rho = 24.5"]).unwrap();
        match by_name("lorenz", &ok, None).unwrap().kind {
            FieldKind::Lorenz { rho, .. } => assert_eq!(rho, 24.5),
            k => panic!("{k:?}"),
        }
        assert!(parse_params(["rho"]).is_err());
    }

    #[test]
    fn domain_helpers() {
        let d = Domain::new(vec![[-1.0, 3.0], [0.0, 0.0]]).unwrap();
        assert_eq!(d.center(), vec![1.0, 0.0]);
        assert!(d.contains(&[3.0, 0.0]) && !d.contains(&[3.1, 0.0]));
        assert_eq!(d.scaled(3.0).bounds(), &[[-5.0, 7.0], [0.0, 0.0]]);
        assert!(Domain::new(vec![[1.0, 0.0]]).is_err());
        assert!((Domain::square(2, 3.0).max_norm() - 18f64.sqrt()).abs() < 1e-15);
    }
}
