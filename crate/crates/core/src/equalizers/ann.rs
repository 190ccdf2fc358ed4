use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::snn::checkpoint::{Checkpoint, StoredKind, StoredLayer};
use crate::snn::Adam;
use crate::{Error, Result};

/// Two weight layers, ReLU hidden units, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    x: Array2<f64>,
    h: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpGradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }
}

impl Mlp {
    pub fn new(w1: Array2<f64>, b1: Array1<f64>, w2: Array2<f64>, b2: Array1<f64>) -> Result<Self> {
        if b1.len() != w1.ncols() || w2.nrows() != w1.ncols() || b2.len() != w2.ncols() {
            return Err(Error::shape(format!(
                "inconsistent MLP shapes {:?}, {}, {:?}, {}",
                w1.dim(),
                b1.len(),
                w2.dim(),
                b2.len()
            )));
        }
        Ok(Self {
            w1: w1.as_standard_layout().to_owned(),
            b1,
            w2: w2.as_standard_layout().to_owned(),
            b2,
        })
    }

    /// Uniform `+-1/sqrt(fan_in)` initialization of weights and biases.
    pub fn random<R: Rng + ?Sized>(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut R) -> Self {
        let u1 = 1.0 / (n_in as f64).sqrt();
        let u2 = 1.0 / (n_hidden as f64).sqrt();
        let w1 = Array2::from_shape_simple_fn((n_in, n_hidden), || rng.random_range(-u1..u1));
        let b1 = Array1::from_shape_simple_fn(n_hidden, || rng.random_range(-u1..u1));
        let w2 = Array2::from_shape_simple_fn((n_hidden, n_out), || rng.random_range(-u2..u2));
        let b2 = Array1::from_shape_simple_fn(n_out, || rng.random_range(-u2..u2));
        Self { w1, b1, w2, b2 }
    }

    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            w1: Array2::zeros((n_in, n_hidden)),
            b1: Array1::zeros(n_hidden),
            w2: Array2::zeros((n_hidden, n_out)),
            b2: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w2.ncols()
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn b1(&self) -> &Array1<f64> {
        &self.b1
    }

    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    pub fn b2(&self) -> &Array1<f64> {
        &self.b2
    }

    /// Order: `w1, b1, w2, b2`.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_in() {
            return Err(Error::shape(format!(
                "input width {} but the network expects {}",
                x.ncols(),
                self.n_in()
            )));
        }
        Ok(())
    }

    fn hidden(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1) + &self.b1;
        h.mapv_inplace(|v| v.max(0.0));
        h
    }

    /// Logits, one row per input row.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        Ok(self.hidden(&x).dot(&self.w2) + &self.b2)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        self.check(&x)?;
        let h = self.hidden(&x);
        let out = h.dot(&self.w2) + &self.b2;
        Ok((out, MlpCache { x: x.to_owned(), h }))
    }

    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<f64>) -> Result<MlpGradients> {
        if d_out.dim() != (cache.h.nrows(), self.n_out()) {
            return Err(Error::shape(format!("output gradient {:?}", d_out.dim())));
        }
        let w2 = cache.h.t().dot(&d_out);
        let b2 = d_out.sum_axis(Axis(0));
        let mut dh = d_out.dot(&self.w2.t());
        dh.zip_mut_with(&cache.h, |g, &h| {
            if h <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = cache.x.t().dot(&dh);
        let b1 = dh.sum_axis(Axis(0));
        Ok(MlpGradients { w1, b1, w2, b2 })
    }

    pub fn to_checkpoint(&self, optimizer: Option<&Adam>) -> Checkpoint {
        Checkpoint {
            layers: vec![
                StoredLayer {
                    kind: StoredKind::Relu,
                    w_in: self.w1.clone(),
                    w_rec: None,
                    bias: Some(self.b1.clone()),
                },
                StoredLayer {
                    kind: StoredKind::Linear,
                    w_in: self.w2.clone(),
                    w_rec: None,
                    bias: Some(self.b2.clone()),
                },
            ],
            neurons: None,
            optimizer: optimizer.cloned(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.layers.as_slice() {
            [h, o] if h.kind == StoredKind::Relu
                && o.kind == StoredKind::Linear
                && h.w_rec.is_none()
                && o.w_rec.is_none()
                && ck.neurons.is_none() =>
            {
                let b1 = h.bias.clone().ok_or_else(|| Error::shape("hidden layer without bias"))?;
                let b2 = o.bias.clone().ok_or_else(|| Error::shape("output layer without bias"))?;
                Self::new(h.w_in.clone(), b1, o.w_in.clone(), b2)
            }
            _ => Err(Error::shape("checkpoint does not hold a ReLU/linear two-layer network")),
        }
    }
}
