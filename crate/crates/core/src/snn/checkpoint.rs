//! Binary checkpoint container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic            8 bytes  "SPIKEQCK"
//! format_version   u32      (currently 1)
//! layer_count      u32
//! per layer        fan_in u32, n_neurons u32, cell_kind u8, has_recurrence u8, has_bias u8
//!                  cell_kind: 0 = LIF, 1 = LI, 2 = ReLU, 3 = linear
//! neuron block     present u8; if 1:
//!                  steps u32, reset u8, membrane u8, spike_fn u8, self_connections u8,
//!                  surrogate_slope f64, then per layer tau_m, tau_s, v_th, v_rest, dt (f64)
//! optimizer        present u8; if 1:
//!                  beta1 f64, beta2 f64, eps f64, step u64, tensor_count u32,
//!                  per tensor: len u64, first moments (len f64), second moments (len f64)
//! weights          per layer: w_in (fan_in x n_neurons, row-major f64),
//!                  w_rec (n x n) if has_recurrence, bias (n) if has_bias
//! crc32            u32 over every preceding byte
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::neuron::{CellKind, Dynamics, LifParams, MembraneForm, ResetMode, SpikeFn, SurrogateSpec};
use super::{Adam, LayerParams, Network};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPIKEQCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoredKind {
    Lif,
    Li,
    Relu,
    Linear,
}

impl StoredKind {
    fn code(self) -> u8 {
        match self {
            StoredKind::Lif => 0,
            StoredKind::Li => 1,
            StoredKind::Relu => 2,
            StoredKind::Linear => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => StoredKind::Lif,
            1 => StoredKind::Li,
            2 => StoredKind::Relu,
            3 => StoredKind::Linear,
            _ => return Err(Error::CorruptCheckpoint(format!("unknown cell kind {c}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredLayer {
    pub kind: StoredKind,
    pub w_in: Array2<f64>,
    pub w_rec: Option<Array2<f64>>,
    pub bias: Option<Array1<f64>>,
}

/// Simulation constants of a spiking model.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronBlock {
    pub steps: usize,
    pub dynamics: Dynamics,
    pub neurons: Vec<LifParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub layers: Vec<StoredLayer>,
    pub neurons: Option<NeuronBlock>,
    pub optimizer: Option<Adam>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s<'a>(&mut self, xs: impl IntoIterator<Item = &'a f64>) {
        for &x in xs {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::CorruptCheckpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            x => Err(Error::CorruptCheckpoint(format!("invalid flag byte {x}"))),
        }
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u32(self.layers.len() as u32);
        for l in &self.layers {
            w.u32(l.w_in.nrows() as u32);
            w.u32(l.w_in.ncols() as u32);
            w.u8(l.kind.code());
            w.u8(u8::from(l.w_rec.is_some()));
            w.u8(u8::from(l.bias.is_some()));
        }
        match &self.neurons {
            None => w.u8(0),
            Some(nb) => {
                w.u8(1);
                w.u32(nb.steps as u32);
                let d = &nb.dynamics;
                w.u8(match d.reset {
                    ResetMode::Hard => 0,
                    ResetMode::Subtract => 1,
                });
                w.u8(match d.membrane {
                    MembraneForm::Scaled => 0,
                    MembraneForm::Convex => 1,
                });
                w.u8(match d.spike_fn {
                    SpikeFn::Heaviside => 0,
                    SpikeFn::Soft => 1,
                });
                w.u8(u8::from(d.self_connections));
                w.f64(d.surrogate.slope);
                for p in &nb.neurons {
                    w.f64s(&[p.tau_m, p.tau_s, p.v_th, p.v_rest, p.dt]);
                }
            }
        }
        match &self.optimizer {
            None => w.u8(0),
            Some(a) => {
                w.u8(1);
                w.f64(a.beta1);
                w.f64(a.beta2);
                w.f64(a.eps);
                w.u64(a.t);
                w.u32(a.m.len() as u32);
                for (m, v) in a.m.iter().zip(&a.v) {
                    w.u64(m.len() as u64);
                    w.f64s(m);
                    w.f64s(v);
                }
            }
        }
        for l in &self.layers {
            w.f64s(l.w_in.iter());
            if let Some(r) = &l.w_rec {
                w.f64s(r.iter());
            }
            if let Some(b) = &l.bias {
                w.f64s(b.iter());
            }
        }
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 8 || &bytes[..8] != MAGIC {
            return Err(Error::CorruptCheckpoint("not a spikeq checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 12 };
        let n_layers = r.u32()? as usize;
        let mut shapes = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let fan_in = r.u32()? as usize;
            let n = r.u32()? as usize;
            let kind = StoredKind::from_code(r.u8()?)?;
            let rec = r.flag()?;
            let bias = r.flag()?;
            shapes.push((fan_in, n, kind, rec, bias));
        }
        let neurons = if r.flag()? {
            let steps = r.u32()? as usize;
            let reset = match r.u8()? {
                0 => ResetMode::Hard,
                1 => ResetMode::Subtract,
                x => return Err(Error::CorruptCheckpoint(format!("reset mode {x}"))),
            };
            let membrane = match r.u8()? {
                0 => MembraneForm::Scaled,
                1 => MembraneForm::Convex,
                x => return Err(Error::CorruptCheckpoint(format!("membrane form {x}"))),
            };
            let spike_fn = match r.u8()? {
                0 => SpikeFn::Heaviside,
                1 => SpikeFn::Soft,
                x => return Err(Error::CorruptCheckpoint(format!("spike function {x}"))),
            };
            let self_connections = r.flag()?;
            let slope = r.f64()?;
            let mut params = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let v = r.f64s(5)?;
                params.push(LifParams {
                    tau_m: v[0],
                    tau_s: v[1],
                    v_th: v[2],
                    v_rest: v[3],
                    dt: v[4],
                });
            }
            Some(NeuronBlock {
                steps,
                dynamics: Dynamics {
                    reset,
                    membrane,
                    spike_fn,
                    surrogate: SurrogateSpec { slope },
                    self_connections,
                },
                neurons: params,
            })
        } else {
            None
        };
        let optimizer = if r.flag()? {
            let (b1, b2, eps, t) = (r.f64()?, r.f64()?, r.f64()?, r.u64()?);
            let count = r.u32()? as usize;
            let mut m = Vec::new();
            let mut v = Vec::new();
            for _ in 0..count {
                let len = r.u64()? as usize;
                m.push(r.f64s(len)?);
                v.push(r.f64s(len)?);
            }
            Some(Adam::from_parts(b1, b2, eps, t, m, v))
        } else {
            None
        };
        let mut layers = Vec::with_capacity(n_layers);
        for (fan_in, n, kind, rec, bias) in shapes {
            let w_in = Array2::from_shape_vec((fan_in, n), r.f64s(fan_in * n)?)
                .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
            let w_rec = if rec {
                Some(Array2::from_shape_vec((n, n), r.f64s(n * n)?).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?)
            } else {
                None
            };
            let bias = if bias { Some(Array1::from(r.f64s(n)?)) } else { None };
            layers.push(StoredLayer {
                kind,
                w_in,
                w_rec,
                bias,
            });
        }
        if r.pos != body.len() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }
        Ok(Self {
            layers,
            neurons,
            optimizer,
        })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl Network {
    pub fn to_checkpoint(&self, optimizer: Option<&Adam>) -> Checkpoint {
        Checkpoint {
            layers: self
                .layers()
                .iter()
                .map(|l| StoredLayer {
                    kind: match l.kind() {
                        CellKind::Lif => StoredKind::Lif,
                        CellKind::Li => StoredKind::Li,
                    },
                    w_in: l.w_in().clone(),
                    w_rec: l.w_rec().cloned(),
                    bias: None,
                })
                .collect(),
            neurons: Some(NeuronBlock {
                steps: self.steps(),
                dynamics: *self.dynamics(),
                neurons: self.neuron_params().to_vec(),
            }),
            optimizer: optimizer.cloned(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let nb = ck
            .neurons
            .as_ref()
            .ok_or_else(|| Error::shape("checkpoint holds a non-spiking model"))?;
        let layers = ck
            .layers
            .iter()
            .map(|l| {
                let kind = match l.kind {
                    StoredKind::Lif => CellKind::Lif,
                    StoredKind::Li => CellKind::Li,
                    other => return Err(Error::shape(format!("{other:?} layer in a spiking model"))),
                };
                if l.bias.is_some() {
                    return Err(Error::shape("spiking layers carry no bias"));
                }
                LayerParams::new(l.w_in.clone(), l.w_rec.clone(), kind)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut net = Network::new(layers, nb.neurons.clone(), nb.dynamics, nb.steps)?;
        net.version = 0;
        Ok(net)
    }
}
