use ndarray::{Array2, ArrayView2, Zip};

use super::network::{Network, UnrolledTape};
use super::neuron::{CellKind, MembraneForm, ResetMode};
use crate::{Error, Result};

/// Loss gradients for every weight tensor of a [`Network`], same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w_in: Vec<Array2<f64>>,
    pub w_rec: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            w_in: net.layers().iter().map(|l| Array2::zeros(l.w_in().raw_dim())).collect(),
            w_rec: net
                .layers()
                .iter()
                .map(|l| l.w_rec().map(|w| Array2::zeros(w.raw_dim())))
                .collect(),
        }
    }

    /// Flat views in the order of [`Network::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.w_in
            .iter()
            .zip(&self.w_rec)
            .flat_map(|(a, b)| std::iter::once(a).chain(b.as_ref()))
            .map(|a| a.as_slice().expect("standard layout"))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

impl Network {
    /// Reverse-mode gradients of a scalar loss through the recorded forward
    /// pass. `d_output` is the loss gradient w.r.t. the readout membranes at
    /// the final step (`batch x n_out`); batch contributions are summed.
    pub fn backward(&self, tape: &UnrolledTape, d_output: ArrayView2<f64>) -> Result<Gradients> {
        if tape.version != self.version {
            return Err(Error::StaleTape {
                tape: tape.version,
                network: self.version,
            });
        }
        let batch = tape.stimulus.batch();
        if d_output.dim() != (batch, self.n_out()) {
            return Err(Error::shape(format!(
                "output gradient {:?}, expected {:?}",
                d_output.dim(),
                (batch, self.n_out())
            )));
        }
        if tape.steps() != self.steps() || tape.layers.len() != self.layers().len() {
            return Err(Error::shape("tape does not match network"));
        }
        let n_layers = self.layers().len();
        let dynamics = self.dynamics();
        let surrogate = dynamics.surrogate;
        let mut grads = Gradients::zeros_like(self);

        // adjoints of v[k+1], i[k+1]
        let mut dv: Vec<Array2<f64>> = self
            .layers()
            .iter()
            .map(|l| Array2::zeros((batch, l.neurons())))
            .collect();
        let mut di = dv.clone();
        dv[n_layers - 1].assign(&d_output);
        let mut d_drive0: Array2<f64> = Array2::zeros((batch, self.layer(0).neurons()));

        for k in (0..self.steps()).rev() {
            let mut ds: Vec<Array2<f64>> = dv.iter().map(|a| Array2::zeros(a.raw_dim())).collect();
            let mut dv_new = Vec::with_capacity(n_layers);
            let mut di_new = Vec::with_capacity(n_layers);

            for l in 0..n_layers {
                let layer = self.layer(l);
                let p = &self.neuron_params()[l];
                let tr = &tape.layers[l];
                let (alpha, beta) = (p.alpha(), p.beta());

                // i[k+1] = beta i[k] + x[k] W_in + s[k] W_rec
                if l == 0 {
                    if tape.stimulus.mode == crate::encoding::DriveMode::Constant || k == 0 {
                        d_drive0 += &di[0];
                    }
                } else {
                    let x = &tape.layers[l - 1].s[k];
                    grads.w_in[l] += &x.t().dot(&di[l]);
                    ds[l - 1] += &di[l].dot(&layer.w_in().t());
                }
                if let Some(w) = layer.w_rec() {
                    let s = &tr.s[k];
                    *grads.w_rec[l].as_mut().expect("shape mirrors layer") += &s.t().dot(&di[l]);
                    ds[l] += &di[l].dot(&w.t());
                }
                let mut di_l = &di[l] * beta;

                // v[k+1] = reset(m, s[k]),  m = integrate(v[k], i[k])
                let mut dm = dv[l].clone();
                if layer.kind() == CellKind::Lif {
                    let s = &tr.s[k];
                    match dynamics.reset {
                        ResetMode::Hard => {
                            Zip::from(&mut dm)
                                .and(&mut ds[l])
                                .and(&dv[l])
                                .and(s)
                                .and(&tr.v[k])
                                .and(&tr.i[k])
                                .for_each(|dm, ds, &dv, &s, &v, &i| {
                                    let m = dynamics.integrate(alpha, v, i);
                                    *dm = dv * (1.0 - s);
                                    *ds += dv * (p.v_rest - m);
                                });
                        }
                        ResetMode::Subtract => {
                            ds[l].scaled_add(-p.v_th, &dv[l]);
                        }
                    }
                }
                let (cv, ci) = match dynamics.membrane {
                    MembraneForm::Scaled => (alpha, alpha),
                    MembraneForm::Convex => (alpha, 1.0 - alpha),
                };
                di_l.scaled_add(ci, &dm);
                dm.mapv_inplace(|x| x * cv);
                dv_new.push(dm);
                di_new.push(di_l);
            }

            // s[k] = H(v[k] - v_th), differentiated through the surrogate
            for l in 0..n_layers {
                if self.layer(l).kind() != CellKind::Lif {
                    continue;
                }
                let v_th = self.neuron_params()[l].v_th;
                Zip::from(&mut dv_new[l])
                    .and(&ds[l])
                    .and(&tape.layers[l].v[k])
                    .for_each(|dv, &ds, &v| *dv += ds * surrogate.grad(v - v_th));
            }
            dv = dv_new;
            di = di_new;
        }

        grads.w_in[0] = tape.stimulus.rows.t().dot(&d_drive0);
        if !dynamics.self_connections {
            for g in grads.w_rec.iter_mut().flatten() {
                g.diag_mut().fill(0.0);
            }
        }
        Ok(grads)
    }
}
