use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::partition::ParamPartition;
use crate::autodiff::{Matrix, Objective, ParamLayout, ParamVector, Tape, Var};
use crate::error::{Error, Result};

/// Variance floor inside the normalization layers.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

/// Labelled feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, classes: usize) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows vs {} labels",
                x.rows(),
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!("label {bad} >= class count {classes}")));
        }
        Ok(Dataset { x, y, classes })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            classes: self.classes,
        }
    }
}

/// MLP spec plus its parameter registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    /// Normalization on/off per hidden layer.
    pub norm: Vec<bool>,
    pub activation: Activation,
    layout: ParamLayout,
}

/// Build an MLP with the registry `layerk.{weight,bias}`, `normk.{scale,shift}`
/// and `head.{weight,bias}` (k is 1-based). Weights are stored `[in, out]`.
pub fn build_mlp(input_dim: usize, hidden: &[usize], classes: usize, norm: bool) -> Result<Model> {
    Model::new(input_dim, hidden, classes, vec![norm; hidden.len()], Activation::Tanh)
}

impl Model {
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        norm: Vec<bool>,
        activation: Activation,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        if norm.len() != hidden.len() {
            return Err(Error::InvalidArgument(format!(
                "{} normalization flags for {} hidden layers",
                norm.len(),
                hidden.len()
            )));
        }
        let mut layout = ParamLayout::new();
        let mut fan_in = input_dim;
        for (k, (&width, &nrm)) in hidden.iter().zip(&norm).enumerate() {
            let k = k + 1;
            layout.push(format!("layer{k}.weight"), vec![fan_in, width]);
            layout.push(format!("layer{k}.bias"), vec![width]);
            if nrm {
                layout.push(format!("norm{k}.scale"), vec![width]);
                layout.push(format!("norm{k}.shift"), vec![width]);
            }
            fan_in = width;
        }
        layout.push("head.weight", vec![fan_in, classes]);
        layout.push("head.bias", vec![classes]);
        Ok(Model {
            input_dim,
            hidden: hidden.to_vec(),
            classes,
            norm,
            activation,
            layout,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.len()
    }

    /// Glorot-uniform weights, zero biases, unit scale, zero shift.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pv = ParamVector::zeros(self.layout.clone());
        for entry in self.layout.entries() {
            let block = &mut pv.values[entry.range()];
            if entry.name.ends_with(".weight") {
                let (fi, fo) = (entry.shape[0], entry.shape[1]);
                let bound = (6.0 / (fi + fo) as f64).sqrt();
                for v in block.iter_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            } else if entry.name.ends_with(".scale") {
                block.fill(1.0);
            }
        }
        pv
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "model has {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }

    fn block(&self, params: &[f64], name: &str) -> Matrix {
        let e = self.layout.get(name).expect("registry entry");
        let (r, c) = match e.shape.as_slice() {
            [r, c] => (*r, *c),
            [c] => (1, *c),
            _ => unreachable!("parameter blocks are rank 1 or 2"),
        };
        Matrix::new(r, c, params[e.range()].to_vec()).expect("registry shape")
    }

    /// Record the forward pass on `tape`. Returns the logits node and one
    /// parameter leaf per registry entry, in registry order.
    pub fn forward(&self, tape: &mut Tape, params: &[f64], x: &Matrix) -> Result<(Var, Vec<Var>)> {
        self.check_params(params)?;
        if x.cols() != self.input_dim {
            return Err(Error::Shape {
                node: tape.len(),
                op: "input",
                detail: format!("{} input columns, model expects {}", x.cols(), self.input_dim),
            });
        }
        let leaves: Vec<Var> = self
            .layout
            .entries()
            .iter()
            .map(|e| tape.param(self.block(params, &e.name)))
            .collect();
        let mut li = 0;
        let mut next = || {
            li += 1;
            leaves[li - 1]
        };
        let mut h = tape.constant(x.clone());
        for &nrm in &self.norm {
            let (w, b) = (next(), next());
            let z = tape.matmul(h, w)?;
            let mut z = tape.add(z, b)?;
            if nrm {
                let (s, t) = (next(), next());
                let zs = tape.standardize(z, NORM_EPS);
                z = tape.scale_shift(zs, s, t)?;
            }
            h = match self.activation {
                Activation::Tanh => tape.tanh(z),
                Activation::Relu => tape.relu(z),
            };
        }
        let (w, b) = (next(), next());
        let z = tape.matmul(h, w)?;
        let logits = tape.add(z, b)?;
        Ok((logits, leaves))
    }

    pub fn predict(&self, params: &[f64], x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (logits, _) = self.forward(&mut tape, params, x)?;
        Ok(tape.value(logits).clone())
    }

    /// Mean cross-entropy without any regularizer.
    pub fn data_loss(&self, params: &[f64], data: &Dataset) -> Result<f64> {
        let mut tape = Tape::new();
        let (logits, _) = self.forward(&mut tape, params, &data.x)?;
        let lp = tape.log_softmax(logits);
        let loss = tape.nll_mean(lp, &data.y)?;
        Ok(tape.value(loss).get(0, 0))
    }

    /// Mean cross-entropy and its gradient over all parameters.
    pub fn loss_and_grad(&self, params: &[f64], data: &Dataset) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let (logits, leaves) = self.forward(&mut tape, params, &data.x)?;
        let lp = tape.log_softmax(logits);
        let loss = tape.nll_mean(lp, &data.y)?;
        let grads = tape.backward(loss)?;
        let mut flat = Vec::with_capacity(params.len());
        for leaf in leaves {
            flat.extend_from_slice(grads.wrt(leaf).data());
        }
        Ok((tape.value(loss).get(0, 0), flat))
    }

    /// Mean cross-entropy plus `(weight_decay / 2) · ‖w_trainable‖²`.
    /// With no partition every parameter counts as trainable.
    pub fn nll_loss(
        &self,
        params: &[f64],
        data: &Dataset,
        weight_decay: f64,
        trainable: Option<&ParamPartition>,
    ) -> Result<f64> {
        let ce = self.data_loss(params, data)?;
        let sq: f64 = match trainable {
            Some(part) => part.trainable().iter().map(|&i| params[i] * params[i]).sum(),
            None => params.iter().map(|v| v * v).sum(),
        };
        Ok(ce + 0.5 * weight_decay * sq)
    }
}

/// Mean data loss of a model over a fixed dataset, as an [`Objective`].
pub struct DataLoss<'a> {
    pub model: &'a Model,
    pub data: &'a Dataset,
}

impl Objective for DataLoss<'_> {
    fn dim(&self) -> usize {
        self.model.num_params()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.model.data_loss(x, self.data)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.loss_and_grad(x, self.data)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(build_mlp(2, &[8], 2, true).unwrap().num_params(), 58);
        assert_eq!(build_mlp(2, &[], 2, false).unwrap().num_params(), 6);
        let m = build_mlp(4, &[16, 16], 3, true).unwrap();
        assert!(m.layout().get("norm1.scale").is_some());
        assert!(m.layout().get("norm2.shift").is_some());
        assert_eq!(m.layout().len(), m.num_params());
    }

    #[test]
    fn rejects_single_class() {
        assert!(build_mlp(2, &[4], 1, false).is_err());
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let m = build_mlp(3, &[5], 2, false).unwrap();
        let p = vec![0.0; m.num_params()];
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let logits = m.predict(&p, &x).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logistic_regression_by_hand() {
        let m = build_mlp(2, &[], 2, false).unwrap();
        // W = I, b = (0.5, -0.5)
        let p = vec![1.0, 0.0, 0.0, 1.0, 0.5, -0.5];
        let x = Matrix::from_rows(&[vec![2.0, 3.0]]).unwrap();
        let logits = m.predict(&p, &x).unwrap();
        assert_eq!(logits.row(0), &[2.5, 2.5]);
    }

    #[test]
    fn input_width_mismatch() {
        let m = build_mlp(2, &[3], 2, true).unwrap();
        let p = m.init_params(0);
        let x = Matrix::zeros(1, 3);
        assert!(matches!(m.predict(&p.values, &x), Err(Error::Shape { op: "input", .. })));
    }

    #[test]
    fn uniform_logits_loss_is_ln2() {
        let m = build_mlp(2, &[], 2, false).unwrap();
        let p = vec![0.0; 6];
        let d = Dataset::new(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![0], 2).unwrap();
        let l = m.nll_loss(&p, &d, 0.0, None).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_logits_loss_near_zero() {
        let m = build_mlp(2, &[], 2, false).unwrap();
        // bias-only logits (50, -50) favour class 0
        let p = vec![0.0, 0.0, 0.0, 0.0, 50.0, -50.0];
        let d = Dataset::new(Matrix::from_rows(&[vec![0.3, -0.7]]).unwrap(), vec![0], 2).unwrap();
        assert!(m.nll_loss(&p, &d, 0.0, None).unwrap() < 1e-40);
    }

    #[test]
    fn init_is_deterministic() {
        let m = build_mlp(2, &[8], 2, true).unwrap();
        assert_eq!(m.init_params(7), m.init_params(7));
        let p = m.init_params(7);
        assert!(p.block("norm1.scale").unwrap().iter().all(|&v| v == 1.0));
        assert!(p.block("layer1.bias").unwrap().iter().all(|&v| v == 0.0));
        let bound = (6.0_f64 / 10.0).sqrt();
        assert!(p.block("layer1.weight").unwrap().iter().all(|v| v.abs() <= bound));
    }
}
