//! Three-layer feedforward network `F_FF(q) = A σ(B q + θ)`.
//!
//! The output layer is linear and has no bias: the recurrent recast has no
//! slot for one.

mod nef;
mod train;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use nef::{train_nef_baseline, NefConfig};
pub use train::{loss_and_grad, train, Adam, TrainConfig, TrainOutcome};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::io;
use crate::linalg::{all_finite, serde_rows};
use crate::par;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation value `y = σ(x)`.
    #[inline]
    pub fn slope_from_value(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Logistic => y * (1.0 - y),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            other => Err(Error::param(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FfNet {
    pub n: usize,
    pub m: usize,
    pub activation: Activation,
    /// Hidden → output, `n × m`.
    #[serde(rename = "A", with = "serde_rows")]
    pub a: DMatrix<f64>,
    /// Input → hidden, `m × n`.
    #[serde(rename = "B", with = "serde_rows")]
    pub b: DMatrix<f64>,
    pub theta: Vec<f64>,
}

impl FfNet {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        theta: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let net = FfNet {
            n: a.nrows(),
            m: a.ncols(),
            activation,
            a,
            b,
            theta,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n, self.a.nrows())?;
        check_dim(self.m, self.a.ncols())?;
        check_dim(self.m, self.b.nrows())?;
        check_dim(self.n, self.b.ncols())?;
        check_dim(self.m, self.theta.len())?;
        if self.n == 0 || self.m == 0 {
            return Err(Error::param("network dimensions must be positive"));
        }
        if !all_finite(&self.a) || !all_finite(&self.b) || self.theta.iter().any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("network weights".into()));
        }
        Ok(())
    }

    /// Hidden activations `σ(B q + θ)` into `hidden`.
    #[inline]
    pub fn hidden_into(&self, q: &[f64], hidden: &mut [f64]) {
        for (i, h) in hidden.iter_mut().enumerate() {
            let mut z = self.theta[i];
            for (k, x) in q.iter().enumerate() {
                z += self.b[(i, k)] * x;
            }
            *h = self.activation.eval(z);
        }
    }

    /// `A σ(B q + θ)` without shape checks; `hidden` is scratch of length `m`.
    #[inline]
    pub fn forward_into(&self, q: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        self.hidden_into(q, hidden);
        out.fill(0.0);
        for (j, h) in hidden.iter().enumerate() {
            let col = self.a.column(j);
            for (o, w) in out.iter_mut().zip(col.iter()) {
                *o += w * h;
            }
        }
    }

    pub fn forward(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, q.len())?;
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut hidden = vec![0.0; self.m];
        let mut out = vec![0.0; self.n];
        self.forward_into(q, &mut hidden, &mut out);
        Ok(out)
    }

    /// `B A`, the hidden-to-hidden block of the recurrent recast.
    pub fn hidden_coupling(&self) -> DMatrix<f64> {
        &self.b * &self.a
    }
}

/// Field-approximation error over an evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    /// Mean over points of `|F(q) - F_FF(q)|²`.
    pub mse: f64,
    /// Max over points of `|F(q) - F_FF(q)|`.
    pub e_max: f64,
}

pub fn eval_metrics(net: &FfNet, grid: &Dataset) -> Result<FieldError> {
    check_dim(net.n, grid.dim)?;
    let rows = grid.len();
    let (sum, max) = par::map_reduce_chunks(
        rows,
        |r| {
            let mut hidden = vec![0.0; net.m];
            let mut out = vec![0.0; net.n];
            let (mut s, mut mx) = (0.0_f64, 0.0_f64);
            for i in r {
                net.forward_into(grid.input(i), &mut hidden, &mut out);
                let e2: f64 = out
                    .iter()
                    .zip(grid.target(i))
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum();
                s += e2;
                mx = mx.max(e2);
            }
            (s, mx)
        },
        (0.0, 0.0),
        |a, b| (a.0 + b.0, a.1.max(b.1)),
    );
    Ok(FieldError {
        mse: sum / rows.max(1) as f64,
        e_max: max.sqrt(),
    })
}

/// Training-set MSE averaged over samples and output components, the
/// objective minimized by [`train`].
pub fn component_mse(net: &FfNet, data: &Dataset) -> Result<f64> {
    let e = eval_metrics(net, data)?;
    Ok(e.mse / net.n as f64)
}

/// Where a model came from; stored next to the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub field: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub d_count: usize,
    pub final_mse: f64,
    pub e_max: Option<f64>,
    pub trainer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// The model file: network weights plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub net: FfNet,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: ModelFile = io::read_json(path)?;
        m.net.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::Domain;

    fn net(a: &[f64], b: &[f64], theta: &[f64], n: usize, act: Activation) -> FfNet {
        let m = theta.len();
        FfNet::new(
            DMatrix::from_row_slice(n, m, a),
            DMatrix::from_row_slice(m, n, b),
            theta.to_vec(),
            act,
        )
        .unwrap()
    }

    #[test]
    fn forward_examples() {
        let zero_a = net(
            &[0.0; 6],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[0.1, 0.2, 0.3],
            2,
            Activation::Tanh,
        );
        assert_eq!(zero_a.forward(&[0.7, -3.0]).unwrap(), vec![0.0, 0.0]);

        let half = net(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[0.0; 6],
            &[0.0; 3],
            2,
            Activation::Logistic,
        );
        assert_eq!(half.forward(&[5.0, -5.0]).unwrap(), vec![3.0, 7.5]);

        let scalar = net(&[2.0], &[1.0], &[0.0], 1, Activation::Tanh);
        assert_eq!(scalar.forward(&[0.0]).unwrap(), vec![0.0]);
        assert!((scalar.forward(&[0.5]).unwrap()[0] - 2.0 * 0.5f64.tanh()).abs() < 1e-15);
        assert!(scalar.forward(&[0.0, 1.0]).is_err());
        assert!(scalar.forward(&[f64::NAN]).is_err());
    }

    #[test]
    fn constructor_checks_shapes_and_finiteness() {
        let a = DMatrix::zeros(2, 3);
        assert!(FfNet::new(
            a.clone(),
            DMatrix::zeros(3, 2),
            vec![0.0; 2],
            Activation::Tanh
        )
        .is_err());
        assert!(FfNet::new(
            a.clone(),
            DMatrix::zeros(2, 2),
            vec![0.0; 3],
            Activation::Tanh
        )
        .is_err());
        let mut b = DMatrix::zeros(3, 2);
        b[(0, 0)] = f64::INFINITY;
        assert!(FfNet::new(a, b, vec![0.0; 3], Activation::Tanh).is_err());
    }

    #[test]
    fn metrics_examples() {
        let domain = Domain::square(2, 1.0);
        let one = Dataset::from_rows(domain.clone(), vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        let zero = net(&[0.0; 2], &[0.0; 2], &[0.0], 2, Activation::Tanh);
        let e = eval_metrics(&zero, &one).unwrap();
        assert_eq!((e.mse, e.e_max), (25.0, 5.0));

        // Targets produced by the network itself.
        let n = net(
            &[1.0, -2.0, 0.5, 0.3],
            &[0.2, -0.1, 0.4, 0.9],
            &[0.1, -0.2],
            2,
            Activation::Tanh,
        );
        let inputs = vec![0.1, 0.2, -0.5, 0.9, 1.0, -1.0];
        let targets: Vec<f64> = inputs
            .chunks(2)
            .flat_map(|q| n.forward(q).unwrap())
            .collect();
        let ds = Dataset::from_rows(domain, inputs, targets).unwrap();
        let e = eval_metrics(&n, &ds).unwrap();
        assert_eq!((e.mse, e.e_max), (0.0, 0.0));
    }

    #[test]
    fn model_file_schema() {
        let n = net(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            &[0.0, 0.5, -0.5],
            2,
            Activation::Tanh,
        );
        let file = ModelFile {
            net: n,
            provenance: Provenance {
                field: "lorenz".into(),
                ..Default::default()
            },
        };
        let v = serde_json::to_value(&file).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["m"], 3);
        assert_eq!(v["activation"], "tanh");
        assert_eq!(
            v["A"],
            serde_json::json!([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        );
        assert_eq!(v["B"][2], serde_json::json!([1.0, 1.0]));
        assert_eq!(v["theta"], serde_json::json!([0.0, 0.5, -0.5]));
        assert_eq!(v["provenance"]["field"], "lorenz");

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        file.write(&p).unwrap();
        assert_eq!(ModelFile::read(&p).unwrap(), file);

        let mut bad = v.clone();
        bad["theta"] = serde_json::json!([0.0]);
        std::fs::write(&p, bad.to_string()).unwrap();
        assert!(ModelFile::read(&p).is_err());
    }
}
