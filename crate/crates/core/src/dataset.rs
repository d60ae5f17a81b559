//! Training and evaluation samples `(q, F(q))` drawn from a field's domain.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io;
use crate::par;
use crate::systems::{Domain, VectorField};

/// Grids larger than this are refused.
pub const GRID_BUDGET: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    /// Row-major `rows × dim`.
    pub inputs: Vec<f64>,
    /// Row-major `rows × dim`, `F(inputs[i])`.
    pub targets: Vec<f64>,
    pub domain: Domain,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn from_rows(domain: Domain, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let dim = domain.dim();
        if inputs.len() != targets.len() || !inputs.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "inputs ({}) and targets ({}) must both be rows × {dim}",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Dataset {
            dim,
            inputs,
            targets,
            domain,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.dim..(i + 1) * self.dim]
    }

    fn select(&self, rows: &[usize]) -> Dataset {
        let d = self.dim;
        let mut inputs = Vec::with_capacity(rows.len() * d);
        let mut targets = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            inputs.extend_from_slice(self.input(r));
            targets.extend_from_slice(self.target(r));
        }
        Dataset {
            dim: d,
            inputs,
            targets,
            domain: self.domain.clone(),
            seed: self.seed,
        }
    }

    /// Header `q1..qn,F1..Fn`, 17 significant digits.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("q{k}")).collect();
        header.extend((1..=self.dim).map(|k| format!("F{k}")));
        let rows = (0..self.len()).map(|i| {
            let mut r = self.input(i).to_vec();
            r.extend_from_slice(self.target(i));
            r
        });
        io::write_csv(path, &header, rows, config_hash)
    }

    /// Read a dataset CSV. The domain is the bounding box of the inputs.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let (header, rows) = io::read_csv(path)?;
        if header.len() % 2 != 0 || header.is_empty() {
            return Err(Error::param(format!(
                "{}: odd column count",
                path.display()
            )));
        }
        let dim = header.len() / 2;
        let mut inputs = Vec::with_capacity(rows.len() * dim);
        let mut targets = Vec::with_capacity(rows.len() * dim);
        let mut bounds = vec![[f64::INFINITY, f64::NEG_INFINITY]; dim];
        for r in &rows {
            inputs.extend_from_slice(&r[..dim]);
            targets.extend_from_slice(&r[dim..]);
            for (b, x) in bounds.iter_mut().zip(&r[..dim]) {
                b[0] = b[0].min(*x);
                b[1] = b[1].max(*x);
            }
        }
        if rows.is_empty() {
            return Err(Error::param(format!("{}: no rows", path.display())));
        }
        Dataset::from_rows(Domain::new(bounds)?, inputs, targets)
    }
}

fn fill_targets(field: &VectorField, dim: usize, inputs: &[f64]) -> Vec<f64> {
    let mut targets = vec![0.0; inputs.len()];
    par::fill_rows(&mut targets, dim, |first, chunk| {
        for (r, out) in chunk.chunks_mut(dim).enumerate() {
            let row = first + r;
            field.eval_into(&inputs[row * dim..(row + 1) * dim], out);
        }
    });
    targets
}

/// Per-row generator: row `i` draws from ChaCha stream `i` of `seed`, so any
/// chunking of the rows yields the same sample.
fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// `count` i.i.d. uniform samples over the field's domain.
pub fn sample_uniform(field: &VectorField, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    let dim = field.dim();
    let domain = &field.domain;
    let mut inputs = vec![0.0; count * dim];
    par::fill_rows(&mut inputs, dim, |first, chunk| {
        for (r, q) in chunk.chunks_mut(dim).enumerate() {
            let mut rng = row_rng(seed, first + r);
            for (k, x) in q.iter_mut().enumerate() {
                let u: f64 = rng.random();
                *x = domain.lo(k) + domain.span(k) * u;
            }
        }
    });
    let targets = fill_targets(field, dim, &inputs);
    Ok(Dataset {
        dim,
        inputs,
        targets,
        domain: domain.clone(),
        seed: Some(seed),
    })
}

/// Regular lattice with `per_axis` nodes per axis, corners included, last
/// axis varying fastest. A single node per axis sits at the midpoint.
pub fn sample_grid(field: &VectorField, per_axis: usize) -> Result<Dataset> {
    if per_axis == 0 {
        return Err(Error::param("grid needs at least one node per axis"));
    }
    let dim = field.dim();
    let requested = (per_axis as u128)
        .checked_pow(dim as u32)
        .unwrap_or(u128::MAX);
    if requested > GRID_BUDGET {
        return Err(Error::BudgetExceeded {
            requested,
            budget: GRID_BUDGET,
        });
    }
    let count = requested as usize;
    let domain = &field.domain;
    let coord = |k: usize, i: usize| {
        if per_axis == 1 {
            0.5 * (domain.lo(k) + domain.hi(k))
        } else if i + 1 == per_axis {
            domain.hi(k)
        } else {
            domain.lo(k) + domain.span(k) * i as f64 / (per_axis - 1) as f64
        }
    };
    let mut inputs = vec![0.0; count * dim];
    par::fill_rows(&mut inputs, dim, |first, chunk| {
        for (r, q) in chunk.chunks_mut(dim).enumerate() {
            let mut idx = first + r;
            for k in (0..dim).rev() {
                q[k] = coord(k, idx % per_axis);
                idx /= per_axis;
            }
        }
    });
    let targets = fill_targets(field, dim, &inputs);
    Ok(Dataset {
        dim,
        inputs,
        targets,
        domain: domain.clone(),
        seed: None,
    })
}

/// Deterministic shuffled split into `(train, rest)`.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((train_fraction * ds.len() as f64).round() as usize).min(ds.len());
    Ok((ds.select(&order[..cut]), ds.select(&order[cut..])))
}
