use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Neuron constants of one layer. Times share one unit (ms by convention).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifParams {
    pub tau_m: f64,
    pub tau_s: f64,
    pub v_th: f64,
    pub v_rest: f64,
    pub dt: f64,
}

impl LifParams {
    /// Hidden-layer LIF defaults: `tau_m = 10`, `tau_s = 5`, `v_th = 1`.
    pub const HIDDEN: LifParams = LifParams {
        tau_m: 10.0,
        tau_s: 5.0,
        v_th: 1.0,
        v_rest: 0.0,
        dt: 1.0,
    };

    /// Readout LI defaults: `tau_m = 100`, `tau_s = 1`, `v_th = 1000`.
    pub const READOUT: LifParams = LifParams {
        tau_m: 100.0,
        tau_s: 1.0,
        v_th: 1000.0,
        v_rest: 0.0,
        dt: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = [self.tau_m, self.tau_s, self.dt].iter().all(|x| *x > 0.0 && x.is_finite())
            && !self.v_th.is_nan()
            && self.v_rest.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid neuron parameters {self:?}")))
        }
    }

    /// Membrane decay `exp(-dt / tau_m)`.
    pub fn alpha(&self) -> f64 {
        (-self.dt / self.tau_m).exp()
    }

    /// Synaptic decay `exp(-dt / tau_s)`.
    pub fn beta(&self) -> f64 {
        (-self.dt / self.tau_s).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lif,
    Li,
}

/// What happens to a neuron's membrane after it fires.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// `v <- v_rest`.
    #[default]
    Hard,
    /// `v <- v - v_th`.
    Subtract,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembraneForm {
    /// `v' = alpha * v + alpha * i`.
    #[default]
    Scaled,
    /// `v' = alpha * v + (1 - alpha) * i`.
    Convex,
}

/// Forward spike nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeFn {
    #[default]
    Heaviside,
    /// `u / (1 + slope |u|)`, whose derivative is exactly the surrogate.
    /// Only useful for checking gradients against finite differences.
    Soft,
}

/// Fast-sigmoid surrogate `g(u) = 1 / (slope |u| + 1)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub slope: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { slope: 100.0 }
    }
}

impl SurrogateSpec {
    #[inline]
    pub fn grad(&self, u: f64) -> f64 {
        let d = self.slope * u.abs() + 1.0;
        1.0 / (d * d)
    }

    #[inline]
    pub fn soft(&self, u: f64) -> f64 {
        u / (1.0 + self.slope * u.abs())
    }
}

/// Simulation options shared by every layer of a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    #[serde(default)]
    pub reset: ResetMode,
    #[serde(default)]
    pub membrane: MembraneForm,
    #[serde(default)]
    pub spike_fn: SpikeFn,
    #[serde(default)]
    pub surrogate: SurrogateSpec,
    /// Keep the diagonal of recurrent weight matrices.
    #[serde(default)]
    pub self_connections: bool,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            reset: ResetMode::Hard,
            membrane: MembraneForm::Scaled,
            spike_fn: SpikeFn::Heaviside,
            surrogate: SurrogateSpec::default(),
            self_connections: false,
        }
    }
}

impl Dynamics {
    #[inline]
    pub(crate) fn spike(&self, u: f64) -> f64 {
        match self.spike_fn {
            SpikeFn::Heaviside => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Soft => self.surrogate.soft(u),
        }
    }

    /// Pre-reset membrane update.
    #[inline]
    pub(crate) fn integrate(&self, alpha: f64, v: f64, i: f64) -> f64 {
        match self.membrane {
            MembraneForm::Scaled => alpha * v + alpha * i,
            MembraneForm::Convex => alpha * v + (1.0 - alpha) * i,
        }
    }

    #[inline]
    pub(crate) fn reset(&self, p: &LifParams, m: f64, s: f64) -> f64 {
        match self.reset {
            ResetMode::Hard => {
                if s == 1.0 {
                    p.v_rest
                } else {
                    m * (1.0 - s) + p.v_rest * s
                }
            }
            ResetMode::Subtract => m - p.v_th * s,
        }
    }
}

/// Per-neuron state for a batch of independent samples (`batch x neurons`).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub v: Array2<f64>,
    pub i: Array2<f64>,
    /// Spikes emitted in the last step.
    pub s: Array2<f64>,
}

impl LayerState {
    pub fn zeros(batch: usize, neurons: usize) -> Self {
        Self {
            v: Array2::zeros((batch, neurons)),
            i: Array2::zeros((batch, neurons)),
            s: Array2::zeros((batch, neurons)),
        }
    }

    pub fn batch(&self) -> usize {
        self.v.nrows()
    }

    pub fn neurons(&self) -> usize {
        self.v.ncols()
    }
}

/// Spikes and pre-reset membrane values for one step of a layer.
pub(crate) fn fire_and_integrate(
    kind: CellKind,
    p: &LifParams,
    dynamics: &Dynamics,
    v: &Array2<f64>,
    i: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let alpha = p.alpha();
    let mut s = Array2::zeros(v.raw_dim());
    let mut v_next = Array2::zeros(v.raw_dim());
    match kind {
        CellKind::Lif => Zip::from(&mut s).and(&mut v_next).and(v).and(i).for_each(
            |s, vn, &v, &i| {
                *s = dynamics.spike(v - p.v_th);
                *vn = dynamics.reset(p, dynamics.integrate(alpha, v, i), *s);
            },
        ),
        CellKind::Li => Zip::from(&mut v_next)
            .and(v)
            .and(i)
            .for_each(|vn, &v, &i| *vn = dynamics.integrate(alpha, v, i)),
    }
    (s, v_next)
}

fn check_step_shapes(
    state: &LayerState,
    x: &ArrayView2<f64>,
    w_in: &Array2<f64>,
    w_rec: Option<&Array2<f64>>,
) -> Result<()> {
    if x.nrows() != state.batch() || x.ncols() != w_in.nrows() || w_in.ncols() != state.neurons() {
        return Err(Error::shape(format!(
            "input {:?}, weights {:?}, state {:?}",
            x.dim(),
            w_in.dim(),
            state.v.dim()
        )));
    }
    if let Some(w) = w_rec {
        if w.dim() != (state.neurons(), state.neurons()) {
            return Err(Error::shape(format!("recurrent weights {:?}", w.dim())));
        }
    }
    if x.iter().chain(state.v.iter()).chain(state.i.iter()).any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("layer input or state"));
    }
    Ok(())
}

fn step(
    kind: CellKind,
    state: &LayerState,
    x: ArrayView2<f64>,
    p: &LifParams,
    w_in: &Array2<f64>,
    w_rec: Option<&Array2<f64>>,
    dynamics: &Dynamics,
) -> Result<LayerState> {
    check_step_shapes(state, &x, w_in, w_rec)?;
    let (s, v) = fire_and_integrate(kind, p, dynamics, &state.v, &state.i);
    let mut i = &state.i * p.beta() + x.dot(w_in);
    if let Some(w) = w_rec {
        i = i + s.dot(w);
    }
    Ok(LayerState { v, i, s })
}

/// One LIF update: spikes from the current membrane, then leak/integrate,
/// reset and synaptic update (including lateral input from those spikes).
pub fn lif_step(
    state: &LayerState,
    x: ArrayView2<f64>,
    p: &LifParams,
    lp: &super::LayerParams,
    dynamics: &Dynamics,
) -> Result<(LayerState, Array2<f64>)> {
    if lp.kind() != CellKind::Lif {
        return Err(Error::InvalidArgument("lif_step on a non-spiking layer".into()));
    }
    let next = step(CellKind::Lif, state, x, p, lp.w_in(), lp.w_rec(), dynamics)?;
    let s = next.s.clone();
    Ok((next, s))
}

/// One LI update: same integration as LIF without threshold or reset.
pub fn li_step(
    state: &LayerState,
    x: ArrayView2<f64>,
    p: &LifParams,
    lp: &super::LayerParams,
    dynamics: &Dynamics,
) -> Result<LayerState> {
    if lp.kind() != CellKind::Li {
        return Err(Error::InvalidArgument("li_step on a spiking layer".into()));
    }
    step(CellKind::Li, state, x, p, lp.w_in(), None, dynamics)
}
