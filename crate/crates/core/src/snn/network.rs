use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::neuron::{fire_and_integrate, CellKind, Dynamics, LifParams};
use crate::encoding::{DriveMode, SpikeFrame};
use crate::{Error, Result};

/// Synapses of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    w_in: Array2<f64>,
    w_rec: Option<Array2<f64>>,
    kind: CellKind,
}

impl LayerParams {
    pub fn new(w_in: Array2<f64>, w_rec: Option<Array2<f64>>, kind: CellKind) -> Result<Self> {
        let n = w_in.ncols();
        if let Some(w) = &w_rec {
            if kind == CellKind::Li {
                return Err(Error::InvalidArgument("LI layers have no recurrence".into()));
            }
            if w.dim() != (n, n) {
                return Err(Error::shape(format!(
                    "recurrent weights {:?} for {n} neurons",
                    w.dim()
                )));
            }
        }
        Ok(Self {
            w_in: w_in.as_standard_layout().to_owned(),
            w_rec: w_rec.map(|w| w.as_standard_layout().to_owned()),
            kind,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.w_in.nrows()
    }

    pub fn neurons(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    /// `fan_in x neurons`.
    pub fn w_in(&self) -> &Array2<f64> {
        &self.w_in
    }

    /// `neurons x neurons`; row is the presynaptic neuron.
    pub fn w_rec(&self) -> Option<&Array2<f64>> {
        self.w_rec.as_ref()
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        std::iter::once(&mut self.w_in).chain(self.w_rec.as_mut())
    }
}

/// Input currents for a batch of frames: one encoded row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Stimulus {
    pub rows: Array2<f64>,
    pub mode: DriveMode,
}

impl Stimulus {
    pub fn new(rows: Array2<f64>, mode: DriveMode) -> Self {
        Self { rows, mode }
    }

    pub fn from_frame(frame: &SpikeFrame) -> Self {
        let row = Array1::from_iter(frame.pattern().iter().map(|&x| f64::from(x)));
        Self {
            rows: row.insert_axis(Axis(0)),
            mode: frame.mode(),
        }
    }

    pub fn batch(&self) -> usize {
        self.rows.nrows()
    }

    fn active(&self, step: usize) -> bool {
        match self.mode {
            DriveMode::Constant => true,
            DriveMode::Impulse => step == 0,
        }
    }
}

/// Per-layer trace of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LayerTrace {
    pub v: Vec<Array2<f64>>,
    pub i: Vec<Array2<f64>>,
    /// Empty for LI layers.
    pub s: Vec<Array2<f64>>,
}

/// Everything the reverse pass needs: the stimulus and, for every layer and
/// step `k`, the state `(v[k], i[k])` and spikes `s[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnrolledTape {
    pub(crate) version: u64,
    pub(crate) stimulus: Stimulus,
    pub(crate) layers: Vec<LayerTrace>,
    pub(crate) output: Array2<f64>,
}

impl UnrolledTape {
    pub fn steps(&self) -> usize {
        self.layers.first().map_or(0, |l| l.v.len())
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Membrane potentials of the readout after the last step.
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Spikes of layer `layer` at every step.
    pub fn spikes(&self, layer: usize) -> &[Array2<f64>] {
        &self.layers[layer].s
    }

    /// Membrane potentials of layer `layer` at steps `0..steps`.
    pub fn membrane(&self, layer: usize) -> &[Array2<f64>] {
        &self.layers[layer].v
    }

    /// Recomputes every step from the recorded states and checks it against
    /// the next recorded state. Returns false on any bit difference.
    pub fn replay(&self, net: &Network) -> bool {
        let steps = self.steps();
        let drive0 = self.stimulus.rows.dot(net.layers[0].w_in());
        for k in 0..steps {
            for (l, (layer, tr)) in net.layers.iter().zip(&self.layers).enumerate() {
                let p = &net.neurons[l];
                let (s, v_next) =
                    fire_and_integrate(layer.kind, p, &net.dynamics, &tr.v[k], &tr.i[k]);
                if layer.kind == CellKind::Lif && s != tr.s[k] {
                    return false;
                }
                let mut i_next = &tr.i[k] * p.beta();
                if l == 0 {
                    if self.stimulus.active(k) {
                        i_next += &drive0;
                    }
                } else {
                    i_next += &self.layers[l - 1].s[k].dot(layer.w_in());
                }
                if let Some(w) = layer.w_rec() {
                    i_next += &s.dot(w);
                }
                let (v_ref, i_ref) = if k + 1 < steps {
                    (&tr.v[k + 1], &tr.i[k + 1])
                } else if l + 1 == net.layers.len() {
                    if v_next != self.output {
                        return false;
                    }
                    continue;
                } else {
                    continue;
                };
                if v_next != *v_ref || i_next != *i_ref {
                    return false;
                }
            }
        }
        true
    }
}

/// A stack of LIF layers (optionally with lateral recurrence) ending in an LI
/// readout, simulated from a zeroed state for `steps` steps per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub(crate) layers: Vec<LayerParams>,
    pub(crate) neurons: Vec<LifParams>,
    pub(crate) dynamics: Dynamics,
    pub(crate) steps: usize,
    pub(crate) version: u64,
}

impl Network {
    pub fn new(
        layers: Vec<LayerParams>,
        neurons: Vec<LifParams>,
        dynamics: Dynamics,
        steps: usize,
    ) -> Result<Self> {
        if layers.is_empty() || layers.len() != neurons.len() {
            return Err(Error::shape("one neuron parameter set per layer required"));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one simulation step".into()));
        }
        for w in layers.windows(2) {
            if w[0].neurons() != w[1].fan_in() {
                return Err(Error::shape(format!(
                    "layer with {} neurons feeds a layer with fan-in {}",
                    w[0].neurons(),
                    w[1].fan_in()
                )));
            }
        }
        for p in &neurons {
            p.validate()?;
        }
        let mut net = Self {
            layers,
            neurons,
            dynamics,
            steps,
            version: 0,
        };
        net.mask_self_connections();
        Ok(net)
    }

    /// Recurrent LIF hidden layer followed by an LI readout, with weights
    /// drawn uniformly from `+-1/sqrt(fan_in)`.
    pub fn recurrent_lif_li<R: Rng + ?Sized>(
        n_in: usize,
        n_hidden: usize,
        n_out: usize,
        hidden: LifParams,
        readout: LifParams,
        dynamics: Dynamics,
        steps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let l1 = LayerParams::new(
            uniform_init(n_in, n_hidden, rng),
            Some(uniform_init(n_hidden, n_hidden, rng)),
            CellKind::Lif,
        )?;
        let l2 = LayerParams::new(uniform_init(n_hidden, n_out, rng), None, CellKind::Li)?;
        Self::new(vec![l1, l2], vec![hidden, readout], dynamics, steps)
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn neuron_params(&self) -> &[LifParams] {
        &self.neurons
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn dynamics_mut(&mut self) -> &mut Dynamics {
        &mut self.dynamics
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().expect("non-empty").neurons()
    }

    /// Parameter version; bumped by every weight update.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
        self.mask_self_connections();
    }

    fn mask_self_connections(&mut self) {
        if self.dynamics.self_connections {
            return;
        }
        for layer in &mut self.layers {
            if let Some(w) = layer.w_rec.as_mut() {
                w.diag_mut().fill(0.0);
            }
        }
    }

    /// Mutable views of all weight tensors in a fixed order
    /// (`w_in`, then `w_rec` if present, layer by layer).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.tensors_mut())
            .map(|a| a.as_slice_mut().expect("standard layout"))
            .collect()
    }

    /// Replaces a layer's weights, e.g. when restoring a checkpoint.
    pub fn set_layer(&mut self, index: usize, layer: LayerParams) -> Result<()> {
        let old = &self.layers[index];
        if old.fan_in() != layer.fan_in()
            || old.neurons() != layer.neurons()
            || old.kind() != layer.kind()
            || old.w_rec.is_some() != layer.w_rec.is_some()
        {
            return Err(Error::shape("replacement layer differs in shape or kind"));
        }
        self.layers[index] = layer;
        self.bump_version();
        Ok(())
    }

    fn check_stimulus(&self, stim: &Stimulus) -> Result<()> {
        if stim.rows.ncols() != self.n_in() {
            return Err(Error::shape(format!(
                "stimulus width {} but the first layer has fan-in {}",
                stim.rows.ncols(),
                self.n_in()
            )));
        }
        if stim.rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("stimulus"));
        }
        Ok(())
    }

    fn run(&self, stim: &Stimulus, mut tape: Option<&mut Vec<LayerTrace>>) -> Array2<f64> {
        let batch = stim.batch();
        let drive0 = stim.rows.dot(&self.layers[0].w_in);
        let mut v: Vec<Array2<f64>> =
            self.layers.iter().map(|l| Array2::zeros((batch, l.neurons()))).collect();
        let mut i = v.clone();
        for k in 0..self.steps {
            let mut prev_spikes: Option<Array2<f64>> = None;
            for (l, layer) in self.layers.iter().enumerate() {
                let p = &self.neurons[l];
                let (s, v_next) = fire_and_integrate(layer.kind, p, &self.dynamics, &v[l], &i[l]);
                let i_now = std::mem::take(&mut i[l]);
                let mut i_next = &i_now * p.beta();
                match prev_spikes.as_ref() {
                    None if stim.active(k) => i_next += &drive0,
                    None => {}
                    Some(x) => i_next += &x.dot(&layer.w_in),
                }
                if let Some(w) = &layer.w_rec {
                    i_next += &s.dot(w);
                }
                let v_now = std::mem::replace(&mut v[l], v_next);
                if let Some(t) = tape.as_deref_mut() {
                    let tr = &mut t[l];
                    tr.v.push(v_now);
                    tr.i.push(i_now);
                    if layer.kind == CellKind::Lif {
                        tr.s.push(s.clone());
                    }
                }
                i[l] = i_next;
                prev_spikes = Some(s);
            }
        }
        v.pop().expect("non-empty")
    }

    /// Runs the network without recording; returns readout membranes.
    pub fn infer(&self, stim: &Stimulus) -> Result<Array2<f64>> {
        self.check_stimulus(stim)?;
        Ok(self.run(stim, None))
    }

    /// Runs the network and records the tape for [`Network::backward`].
    pub fn forward(&self, stim: &Stimulus) -> Result<(Array2<f64>, UnrolledTape)> {
        self.check_stimulus(stim)?;
        let mut traces: Vec<LayerTrace> = self
            .layers
            .iter()
            .map(|_| LayerTrace {
                v: Vec::with_capacity(self.steps),
                i: Vec::with_capacity(self.steps),
                s: Vec::new(),
            })
            .collect();
        let out = self.run(stim, Some(&mut traces));
        Ok((
            out.clone(),
            UnrolledTape {
                version: self.version,
                stimulus: stim.clone(),
                layers: traces,
                output: out,
            },
        ))
    }

    /// Convenience wrapper for a single frame.
    pub fn forward_frame(&self, frame: &SpikeFrame) -> Result<(Array1<f64>, UnrolledTape)> {
        if frame.steps() != self.steps {
            return Err(Error::shape(format!(
                "frame has {} steps, network simulates {}",
                frame.steps(),
                self.steps
            )));
        }
        let (out, tape) = self.forward(&Stimulus::from_frame(frame))?;
        Ok((out.row(0).to_owned(), tape))
    }

    pub(crate) fn layer(&self, l: usize) -> &LayerParams {
        &self.layers[l]
    }
}

fn uniform_init<R: Rng + ?Sized>(fan_in: usize, n: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, n), || rng.random_range(-bound..bound))
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn decide(v_out: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v_out.iter().enumerate() {
        if x > v_out[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use ndarray::array;
    use rand::SeedableRng;

    fn toy(rng_seed: u64) -> Network {
        let mut rng = StreamRng::seed_from_u64(rng_seed);
        Network::recurrent_lif_li(
            6,
            5,
            3,
            LifParams::HIDDEN,
            LifParams::READOUT,
            Dynamics::default(),
            10,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn zero_frame_gives_zero_output() {
        let net = toy(1);
        let out = net.infer(&Stimulus::new(Array2::zeros((2, 6)), DriveMode::Constant)).unwrap();
        assert_eq!(out, Array2::<f64>::zeros((2, 3)));
    }

    #[test]
    fn forward_matches_infer_and_replays() {
        let mut net = toy(2);
        for w in net.tensors_mut() {
            w.iter_mut().for_each(|x| *x *= 4.0);
        }
        let rows = array![[1.0, -1.0, 0.0, 1.0, 1.0, 0.0], [0.0, 1.0, 1.0, -1.0, 0.0, 1.0]];
        let stim = Stimulus::new(rows, DriveMode::Constant);
        let (out, tape) = net.forward(&stim).unwrap();
        assert_eq!(out, net.infer(&stim).unwrap());
        assert_eq!(tape.steps(), 10);
        assert!(tape.spikes(0).iter().any(|s| s.sum() > 0.0), "toy net should spike");
        assert!(tape.replay(&net));
    }

    #[test]
    fn self_connections_masked() {
        let net = toy(3);
        let w = net.layers()[0].w_rec().unwrap();
        assert!(w.diag().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn width_mismatch() {
        let net = toy(4);
        let stim = Stimulus::new(Array2::zeros((1, 7)), DriveMode::Constant);
        assert!(matches!(net.infer(&stim), Err(Error::Shape(_))));
    }

    #[test]
    fn decide_rules() {
        assert_eq!(decide(&[0.1, 0.9, 0.3, 0.2]), 1);
        assert_eq!(decide(&[0.5; 4]), 0);
        assert_eq!(decide(&[-1.0, 0.2, 0.7, 0.7]), 2);
    }
}
