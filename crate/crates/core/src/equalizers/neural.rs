//! Decision feedback equalizers built around a trained network.
//!
//! Receiving `y[k]` yields the estimate of `a[k']`, `k' = k - n + 1`, from
//! the window `y[k], .., y[k-n+1]` and the fed-back indices
//! `a[k'-1], .., a[k'-m]`. Samples before time 0 are zero, fed-back indices
//! before time 0 are 0.

use ndarray::Array2;
use rand::Rng;

use crate::encoding::{build_frame, DriveMode, TernaryEncoder, TernaryEncoderConfig};
use crate::equalizers::{DfeArchitecture, EqualizerKind, EqualizerOutput, Mlp};
use crate::link::Constellation;
use crate::snn::{decide, Dynamics, LifParams, Network, Stimulus};
use crate::{Error, Result, C64};

/// Scale of the initial readout weights relative to `1/sqrt(fan_in)`; the LI
/// readout sums ten steps of hidden spikes, so full-scale weights start far
/// from a uniform softmax.
pub const READOUT_INIT_GAIN: f64 = 0.1;

/// How a window and its feedback are turned into network inputs.
#[derive(Clone, Debug)]
pub enum FeatureMap {
    /// Ternary-encoded samples, one-hot feedback: `2 M n + |M| m` inputs.
    Encoded(TernaryEncoder),
    /// Real and imaginary parts of samples and fed-back symbols: `2 (n + m)`.
    Raw,
}

#[derive(Clone, Debug)]
pub enum NeuralModel {
    Snn(Network),
    Ann(Mlp),
}

/// Source of the fed-back symbols.
#[derive(Clone, Copy, Debug)]
pub enum FeedbackMode<'a> {
    /// The receiver's own decisions.
    Decision,
    /// Transmitted indices, one slice per stream.
    Teacher(&'a [Vec<usize>]),
}

#[derive(Clone, Debug)]
pub struct NeuralDfe {
    arch: DfeArchitecture,
    constellation: Constellation,
    features: FeatureMap,
    model: NeuralModel,
}

impl NeuralDfe {
    pub fn new(
        arch: DfeArchitecture,
        constellation: Constellation,
        features: FeatureMap,
        model: NeuralModel,
    ) -> Result<Self> {
        arch.validate()?;
        if constellation.size() != arch.alphabet_size {
            return Err(Error::shape(format!(
                "constellation `{}` has {} points, architecture expects {}",
                constellation.name(),
                constellation.size(),
                arch.alphabet_size
            )));
        }
        let width = match &features {
            FeatureMap::Encoded(enc) => {
                if enc.config().m_bits != arch.m_bits {
                    return Err(Error::shape(format!(
                        "encoder uses {} bits, architecture {}",
                        enc.config().m_bits,
                        arch.m_bits
                    )));
                }
                arch.n_in()
            }
            FeatureMap::Raw => arch.raw_width(),
        };
        let (n_in, n_out) = match &model {
            NeuralModel::Snn(net) => {
                if matches!(features, FeatureMap::Raw) {
                    return Err(Error::InvalidArgument("the spiking model needs encoded inputs".into()));
                }
                if net.steps() != arch.steps {
                    return Err(Error::shape(format!(
                        "network simulates {} steps, architecture {}",
                        net.steps(),
                        arch.steps
                    )));
                }
                (net.n_in(), net.n_out())
            }
            NeuralModel::Ann(mlp) => (mlp.n_in(), mlp.n_out()),
        };
        if n_in != width || n_out != arch.n_out() {
            return Err(Error::shape(format!(
                "network is {n_in} -> {n_out}, architecture needs {width} -> {}",
                arch.n_out()
            )));
        }
        Ok(Self {
            arch,
            constellation,
            features,
            model,
        })
    }

    /// Randomly initialized SNN-DFE: recurrent LIF hidden layer, LI readout.
    #[allow(clippy::too_many_arguments)]
    pub fn random_snn<R: Rng + ?Sized>(
        arch: DfeArchitecture,
        constellation: Constellation,
        encoder: TernaryEncoderConfig,
        hidden: LifParams,
        readout: LifParams,
        dynamics: Dynamics,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Network::recurrent_lif_li(
            arch.n_in(),
            arch.n_hidden,
            arch.n_out(),
            hidden,
            readout,
            dynamics,
            arch.steps,
            rng,
        )?;
        if let Some(w) = net.tensors_mut().last_mut() {
            w.iter_mut().for_each(|x| *x *= READOUT_INIT_GAIN);
        }
        net.bump_version();
        Self::new(arch, constellation, FeatureMap::Encoded(TernaryEncoder::new(encoder)?), NeuralModel::Snn(net))
    }

    /// Randomly initialized ANN-DFE with encoded (`Some`) or raw inputs.
    pub fn random_ann<R: Rng + ?Sized>(
        arch: DfeArchitecture,
        constellation: Constellation,
        encoder: Option<TernaryEncoderConfig>,
        rng: &mut R,
    ) -> Result<Self> {
        let features = match encoder {
            Some(cfg) => FeatureMap::Encoded(TernaryEncoder::new(cfg)?),
            None => FeatureMap::Raw,
        };
        let width = match features {
            FeatureMap::Encoded(_) => arch.n_in(),
            FeatureMap::Raw => arch.raw_width(),
        };
        let mlp = Mlp::random(width, arch.n_hidden, arch.n_out(), rng);
        Self::new(arch, constellation, features, NeuralModel::Ann(mlp))
    }

    pub fn architecture(&self) -> &DfeArchitecture {
        &self.arch
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn model(&self) -> &NeuralModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut NeuralModel {
        &mut self.model
    }

    pub fn kind(&self) -> EqualizerKind {
        match (&self.model, &self.features) {
            (NeuralModel::Snn(_), _) => EqualizerKind::SnnDfe,
            (NeuralModel::Ann(_), FeatureMap::Encoded(_)) => EqualizerKind::AnnDfeEncoded,
            (NeuralModel::Ann(_), FeatureMap::Raw) => EqualizerKind::AnnDfeRaw,
        }
    }

    pub fn input_width(&self) -> usize {
        match self.features {
            FeatureMap::Encoded(_) => self.arch.n_in(),
            FeatureMap::Raw => self.arch.raw_width(),
        }
    }

    pub fn decision_delay(&self) -> usize {
        self.arch.decision_delay()
    }

    /// How encoded inputs are presented to a spiking model.
    pub fn drive_mode(&self) -> DriveMode {
        match &self.features {
            FeatureMap::Encoded(enc) => enc.config().drive_mode,
            FeatureMap::Raw => DriveMode::default(),
        }
    }

    /// Output scores for a batch of input rows.
    pub fn logits(&self, rows: Array2<f64>) -> Result<Array2<f64>> {
        match &self.model {
            NeuralModel::Snn(net) => net.infer(&Stimulus::new(rows, self.drive_mode())),
            NeuralModel::Ann(mlp) => mlp.infer(rows.view()),
        }
    }

    /// One decision from an explicit window (`y[k]` first) and feedback
    /// (`a[k'-1]` first). The network starts from rest.
    pub fn step(&self, window: &[C64], feedback: &[usize]) -> Result<usize> {
        if window.len() != self.arch.n_ff || feedback.len() != self.arch.m_fb {
            return Err(Error::shape(format!(
                "window of {} and feedback of {}, architecture has n = {}, m = {}",
                window.len(),
                feedback.len(),
                self.arch.n_ff,
                self.arch.m_fb
            )));
        }
        let row: Vec<f64> = match &self.features {
            FeatureMap::Encoded(enc) => build_frame(
                window,
                feedback,
                enc,
                self.arch.alphabet_size,
                self.arch.n_in(),
                self.arch.steps,
            )?
            .pattern()
            .iter()
            .map(|&x| f64::from(x))
            .collect(),
            FeatureMap::Raw => {
                let mut r = Vec::with_capacity(self.arch.raw_width());
                for y in window {
                    r.extend([y.re, y.im]);
                }
                for &a in feedback {
                    if a >= self.constellation.size() {
                        return Err(Error::OutOfRange {
                            index: a,
                            size: self.constellation.size(),
                        });
                    }
                    let p = self.constellation.point(a);
                    r.extend([p.re, p.im]);
                }
                r
            }
        };
        let rows = Array2::from_shape_vec((1, row.len()), row).expect("one row");
        let out = self.logits(rows)?;
        Ok(decide(out.row(0).as_slice().expect("standard layout")))
    }

    /// Per-stream feature cache: encoded samples or raw samples.
    fn prepare(&self, y: &[C64]) -> Vec<f64> {
        match &self.features {
            FeatureMap::Encoded(enc) => enc.encode_sequence(y).into_iter().map(f64::from).collect(),
            FeatureMap::Raw => y.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    fn per_sample(&self) -> usize {
        match &self.features {
            FeatureMap::Encoded(enc) => 2 * enc.config().m_bits as usize,
            FeatureMap::Raw => 2,
        }
    }

    /// Writes the input row for received index `k` given the fed-back
    /// indices `a[k'-1], ..` (`fb[i]` is `a[k'-1-i]`).
    fn fill_row(&self, cache: &[f64], k: usize, fb: &[usize], row: &mut [f64]) {
        let w = self.per_sample();
        let n = self.arch.n_ff;
        row.fill(0.0);
        for j in 0..n.min(k + 1) {
            row[j * w..(j + 1) * w].copy_from_slice(&cache[(k - j) * w..(k - j + 1) * w]);
        }
        let tail = &mut row[n * w..];
        match &self.features {
            FeatureMap::Encoded(_) => {
                let q = self.arch.alphabet_size;
                for (i, &a) in fb.iter().enumerate() {
                    tail[i * q + a] = 1.0;
                }
            }
            FeatureMap::Raw => {
                for (i, &a) in fb.iter().enumerate() {
                    let p = self.constellation.point(a);
                    tail[2 * i] = p.re;
                    tail[2 * i + 1] = p.im;
                }
            }
        }
    }

    fn feedback_into(&self, past: &[usize], kp: usize, out: &mut Vec<usize>) {
        out.clear();
        for i in 0..self.arch.m_fb {
            out.push(if kp > i { past[kp - 1 - i] } else { 0 });
        }
    }

    /// Input rows for every decision of one stream with teacher-forced
    /// feedback, together with the target indices.
    pub fn teacher_rows(&self, y: &[C64], tx: &[usize]) -> Result<(Array2<f64>, Vec<usize>)> {
        let d = self.decision_delay();
        if y.len() <= d {
            return Ok((Array2::zeros((0, self.input_width())), Vec::new()));
        }
        let decisions = y.len() - d;
        if tx.len() < decisions {
            return Err(Error::MissingGroundTruth);
        }
        let cache = self.prepare(y);
        let width = self.input_width();
        let mut rows = Array2::zeros((decisions, width));
        let mut fb = Vec::with_capacity(self.arch.m_fb);
        for (kp, mut row) in rows.rows_mut().into_iter().enumerate() {
            self.feedback_into(tx, kp, &mut fb);
            self.fill_row(&cache, kp + d, &fb, row.as_slice_mut().expect("standard layout"));
        }
        Ok((rows, tx[..decisions].to_vec()))
    }

    pub fn equalize(&self, y: &[C64], mode: FeedbackMode<'_>) -> Result<EqualizerOutput> {
        let mut v = self.equalize_batch(std::slice::from_ref(&y.to_vec()), mode)?;
        Ok(v.pop().expect("one stream"))
    }

    /// Equalizes equally long streams in lockstep; the decision loop is
    /// sequential in `k`, the streams form the batch dimension.
    pub fn equalize_batch(&self, ys: &[Vec<C64>], mode: FeedbackMode<'_>) -> Result<Vec<EqualizerOutput>> {
        let Some(first) = ys.first() else {
            return Ok(Vec::new());
        };
        let len = first.len();
        if ys.iter().any(|y| y.len() != len) {
            return Err(Error::shape("streams of a batch must have equal length"));
        }
        let d = self.decision_delay();
        if let FeedbackMode::Teacher(tx) = mode {
            if tx.len() != ys.len() || tx.iter().any(|t| t.len() < len.saturating_sub(d)) {
                return Err(Error::MissingGroundTruth);
            }
        }
        let caches: Vec<Vec<f64>> = ys.iter().map(|y| self.prepare(y)).collect();
        let mut decided: Vec<Vec<usize>> = vec![Vec::with_capacity(len); ys.len()];
        let mut out: Vec<Vec<usize>> = vec![vec![0; len]; ys.len()];
        let width = self.input_width();
        let mut fb = Vec::with_capacity(self.arch.m_fb);
        for k in d..len {
            let kp = k - d;
            let mut rows = Array2::zeros((ys.len(), width));
            for (b, mut row) in rows.rows_mut().into_iter().enumerate() {
                let past = match mode {
                    FeedbackMode::Decision => &decided[b],
                    FeedbackMode::Teacher(tx) => &tx[b],
                };
                self.feedback_into(past, kp, &mut fb);
                self.fill_row(&caches[b], k, &fb, row.as_slice_mut().expect("standard layout"));
            }
            let logits = self.logits(rows)?;
            for (b, r) in logits.rows().into_iter().enumerate() {
                let a = decide(r.as_slice().expect("standard layout"));
                out[b][k] = a;
                decided[b].push(a);
            }
        }
        Ok(out
            .into_iter()
            .map(|idx| EqualizerOutput::from_indices(idx, &self.constellation, d))
            .collect())
    }
}
