//! Spike encodings for the SNN input layer.
//!
//! Received samples use the ternary code: `sign(y) * Q(|y|)`, where `Q` is a
//! uniform `M`-bit quantizer with step `y_max / 2^M` whose codeword is
//! written MSB-first onto `M` input neurons. Past decisions are fed back
//! one-hot.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// How an encoded pattern is presented over the simulation window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Same pattern at every time step.
    #[default]
    Constant,
    /// Pattern at the first step only, silence afterwards.
    Impulse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TernaryEncoderConfig {
    pub m_bits: u32,
    pub y_max: f64,
    #[serde(default)]
    pub drive_mode: DriveMode,
}

impl TernaryEncoderConfig {
    pub fn new(m_bits: u32, y_max: f64) -> Result<Self> {
        let cfg = Self {
            m_bits,
            y_max,
            drive_mode: DriveMode::Constant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_bits == 0 || self.m_bits > 30 {
            return Err(Error::InvalidArgument(format!(
                "m_bits must be in 1..=30, got {}",
                self.m_bits
            )));
        }
        if !(self.y_max > 0.0) || !self.y_max.is_finite() {
            return Err(Error::InvalidArgument(format!("y_max must be positive, got {}", self.y_max)));
        }
        Ok(())
    }

    /// Quantization step `y_max / 2^M`.
    pub fn resolution(&self) -> f64 {
        self.y_max / f64::from(1u32 << self.m_bits)
    }

    fn max_level(&self) -> u32 {
        (1u32 << self.m_bits) - 1
    }

    /// Default clipping bound for a channel: twice the RMS channel gain.
    pub fn default_y_max(channel_energy: f64) -> f64 {
        2.0 * channel_energy.sqrt()
    }
}

/// Quantizer level and saturation flag for `|y|`.
fn level(y: f64, cfg: &TernaryEncoderConfig) -> (u32, bool) {
    let raw = (y.abs() / cfg.resolution() + 0.5).floor();
    let max = cfg.max_level();
    if raw.is_nan() {
        (0, false)
    } else if raw > f64::from(max) {
        (max, true)
    } else {
        (raw as u32, false)
    }
}

fn write_code(y: f64, cfg: &TernaryEncoderConfig, out: &mut [i8]) -> bool {
    debug_assert_eq!(out.len(), cfg.m_bits as usize);
    let (lvl, clipped) = level(y, cfg);
    let sign: i8 = if y < 0.0 { -1 } else { 1 };
    let m = cfg.m_bits as usize;
    for (pos, o) in out.iter_mut().enumerate() {
        let bit = (lvl >> (m - 1 - pos)) & 1;
        *o = if bit == 1 { sign } else { 0 };
    }
    clipped
}

/// Ternary code of one real value, length `m_bits`.
pub fn ternary_encode(y: f64, cfg: &TernaryEncoderConfig) -> Vec<i8> {
    let mut out = vec![0; cfg.m_bits as usize];
    write_code(y, cfg, &mut out);
    out
}

/// Inverse of [`ternary_encode`] up to quantization: `sign * level * step`.
pub fn ternary_decode(v: &[i8], cfg: &TernaryEncoderConfig) -> Result<f64> {
    if v.len() != cfg.m_bits as usize {
        return Err(Error::MalformedCodeword(format!(
            "length {} != m_bits {}",
            v.len(),
            cfg.m_bits
        )));
    }
    let mut sign = 0i8;
    let mut lvl = 0u64;
    for &s in v {
        if !(-1..=1).contains(&s) {
            return Err(Error::MalformedCodeword(format!("entry {s} not in {{-1, 0, 1}}")));
        }
        if s != 0 {
            if sign != 0 && s != sign {
                return Err(Error::MalformedCodeword("mixed-sign spikes".into()));
            }
            sign = s;
        }
        lvl = (lvl << 1) | u64::from(s != 0);
    }
    Ok(f64::from(sign) * lvl as f64 * cfg.resolution())
}

/// Real part on the first `M` neurons, imaginary part on the next `M`.
pub fn encode_complex(y: C64, cfg: &TernaryEncoderConfig) -> Vec<i8> {
    let m = cfg.m_bits as usize;
    let mut out = vec![0; 2 * m];
    write_code(y.re, cfg, &mut out[..m]);
    write_code(y.im, cfg, &mut out[m..]);
    out
}

pub fn one_hot(index: usize, size: usize) -> Result<Vec<u8>> {
    if index >= size {
        return Err(Error::OutOfRange { index, size });
    }
    let mut v = vec![0; size];
    v[index] = 1;
    Ok(v)
}

/// Stateful encoder that counts saturated samples.
#[derive(Debug)]
pub struct TernaryEncoder {
    cfg: TernaryEncoderConfig,
    encoded: AtomicU64,
    clipped: AtomicU64,
}

impl Clone for TernaryEncoder {
    fn clone(&self) -> Self {
        Self {
            cfg: self.cfg,
            encoded: AtomicU64::new(self.encoded.load(Ordering::Relaxed)),
            clipped: AtomicU64::new(self.clipped.load(Ordering::Relaxed)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderStats {
    pub encoded: u64,
    pub clipped: u64,
}

impl TernaryEncoder {
    pub fn new(cfg: TernaryEncoderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            encoded: AtomicU64::new(0),
            clipped: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &TernaryEncoderConfig {
        &self.cfg
    }

    pub fn stats(&self) -> EncoderStats {
        EncoderStats {
            encoded: self.encoded.load(Ordering::Relaxed),
            clipped: self.clipped.load(Ordering::Relaxed),
        }
    }

    /// Writes `2M` ternary values for `y` into `out`.
    pub fn encode_complex_into(&self, y: C64, out: &mut [i8]) {
        let m = self.cfg.m_bits as usize;
        let c = u64::from(write_code(y.re, &self.cfg, &mut out[..m]))
            + u64::from(write_code(y.im, &self.cfg, &mut out[m..2 * m]));
        self.encoded.fetch_add(2, Ordering::Relaxed);
        if c > 0 {
            self.clipped.fetch_add(c, Ordering::Relaxed);
        }
    }

    /// Encodes a whole received sequence, `2M` values per sample.
    pub fn encode_sequence(&self, y: &[C64]) -> Vec<i8> {
        let w = 2 * self.cfg.m_bits as usize;
        let mut out = vec![0; y.len() * w];
        for (z, chunk) in y.iter().zip(out.chunks_exact_mut(w)) {
            self.encode_complex_into(*z, chunk);
        }
        out
    }
}

/// Input neuron count of the decision-feedback SNN: `2 M n + |M| m`.
pub fn frame_width(m_bits: u32, n_ff: usize, alphabet_size: usize, m_fb: usize) -> usize {
    2 * m_bits as usize * n_ff + alphabet_size * m_fb
}

/// Input spikes for one decision: a single encoded pattern together with the
/// way it is driven over `steps` time steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeFrame {
    pattern: Vec<i8>,
    steps: usize,
    mode: DriveMode,
}

impl SpikeFrame {
    pub fn from_pattern(pattern: Vec<i8>, steps: usize, mode: DriveMode) -> Self {
        Self {
            pattern,
            steps,
            mode,
        }
    }

    pub fn width(&self) -> usize {
        self.pattern.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mode(&self) -> DriveMode {
        self.mode
    }

    pub fn pattern(&self) -> &[i8] {
        &self.pattern
    }

    /// Spike value of input neuron `j` at time step `t`.
    pub fn get(&self, t: usize, j: usize) -> i8 {
        match self.mode {
            DriveMode::Constant => self.pattern[j],
            DriveMode::Impulse if t == 0 => self.pattern[j],
            DriveMode::Impulse => 0,
        }
    }

    /// Dense `steps x width` matrix.
    pub fn values(&self) -> Vec<Vec<i8>> {
        (0..self.steps)
            .map(|t| (0..self.width()).map(|j| self.get(t, j)).collect())
            .collect()
    }
}

/// Assembles the SNN-DFE input for one decision.
///
/// `window` holds `y[k], y[k-1], .., y[k-n+1]`, `feedback` holds
/// `a[k'-1], .., a[k'-m]`.
pub fn build_frame(
    window: &[C64],
    feedback: &[usize],
    encoder: &TernaryEncoder,
    alphabet_size: usize,
    expected_width: usize,
    steps: usize,
) -> Result<SpikeFrame> {
    let m = encoder.config().m_bits as usize;
    let width = frame_width(m as u32, window.len(), alphabet_size, feedback.len());
    if width != expected_width {
        return Err(Error::shape(format!(
            "frame width {width} (n={}, m={}) does not match the configured input width {expected_width}",
            window.len(),
            feedback.len()
        )));
    }
    let mut pattern = vec![0i8; width];
    for (y, chunk) in window.iter().zip(pattern.chunks_exact_mut(2 * m)) {
        encoder.encode_complex_into(*y, chunk);
    }
    let fb = &mut pattern[2 * m * window.len()..];
    for (&a, chunk) in feedback.iter().zip(fb.chunks_exact_mut(alphabet_size)) {
        if a >= alphabet_size {
            return Err(Error::OutOfRange {
                index: a,
                size: alphabet_size,
            });
        }
        chunk[a] = 1;
    }
    Ok(SpikeFrame::from_pattern(pattern, steps, encoder.config().drive_mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(m: u32, y_max: f64) -> TernaryEncoderConfig {
        TernaryEncoderConfig::new(m, y_max).unwrap()
    }

    #[test]
    fn worked_examples() {
        let c = cfg(4, 2.0);
        assert_eq!(ternary_encode(2.0, &c), vec![1, 1, 1, 1]);
        assert_eq!(ternary_encode(-1.1, &c), vec![-1, 0, 0, -1]);
        assert_eq!(ternary_encode(0.0, &c), vec![0; 4]);
        assert_eq!(ternary_encode(-0.0, &c), vec![0; 4]);
    }

    #[test]
    fn decode_cases() {
        let c = cfg(4, 2.0);
        assert_abs_diff_eq!(ternary_decode(&[1, 1, 1, 1], &c).unwrap(), 1.875);
        assert_eq!(ternary_decode(&[0; 4], &c).unwrap(), 0.0);
        let c8 = cfg(8, 2.0);
        let d = ternary_decode(&ternary_encode(0.5, &c8), &c8).unwrap();
        assert!((d - 0.5).abs() <= 2.0 / 512.0);
    }

    #[test]
    fn malformed_codewords_rejected() {
        let c = cfg(4, 2.0);
        assert!(ternary_decode(&[1, 0, -1, 0], &c).is_err());
        assert!(ternary_decode(&[1, 0, 0], &c).is_err());
        assert!(ternary_decode(&[2, 0, 0, 0], &c).is_err());
    }

    #[test]
    fn complex_lanes() {
        let c = cfg(4, 2.0);
        assert_eq!(encode_complex(C64::new(0.0, 0.0), &c), vec![0; 8]);
        assert_eq!(encode_complex(C64::new(2.0, 0.0), &c), vec![1, 1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(encode_complex(C64::new(0.0, -1.1), &c), vec![0, 0, 0, 0, -1, 0, 0, -1]);
    }

    #[test]
    fn one_hot_cases() {
        assert_eq!(one_hot(2, 4).unwrap(), vec![0, 0, 1, 0]);
        let e0 = one_hot(0, 16).unwrap();
        assert_eq!(e0[0], 1);
        assert_eq!(e0.iter().map(|&x| x as usize).sum::<usize>(), 1);
        assert!(matches!(one_hot(4, 4), Err(Error::OutOfRange { index: 4, size: 4 })));
    }

    #[test]
    fn table_widths() {
        assert_eq!(frame_width(8, 20, 16, 11), 496);
        assert_eq!(frame_width(8, 28, 4, 3), 460);
        assert_eq!(frame_width(8, 20, 4, 11), 364);
    }

    #[test]
    fn saturation_is_counted() {
        let enc = TernaryEncoder::new(cfg(4, 2.0)).unwrap();
        let mut out = [0i8; 8];
        enc.encode_complex_into(C64::new(5.0, 0.1), &mut out);
        assert_eq!(out[..4], [1, 1, 1, 1]);
        assert_eq!(enc.stats(), EncoderStats { encoded: 2, clipped: 1 });
    }

    #[test]
    fn frame_layout_and_drive() {
        let enc = TernaryEncoder::new(cfg(2, 1.0)).unwrap();
        let window = [C64::new(1.0, 0.0), C64::new(0.0, -0.5)];
        let f = build_frame(&window, &[1], &enc, 4, 12, 3).unwrap();
        assert_eq!(f.pattern(), &[1, 1, 0, 0, 0, 0, -1, 0, 0, 1, 0, 0]);
        assert_eq!(f.values().len(), 3);
        assert!(f.values().iter().all(|row| row == f.pattern()));

        let mut c = *enc.config();
        c.drive_mode = DriveMode::Impulse;
        let enc = TernaryEncoder::new(c).unwrap();
        let f = build_frame(&window, &[1], &enc, 4, 12, 3).unwrap();
        assert_eq!(f.get(0, 0), 1);
        assert_eq!(f.get(1, 0), 0);

        assert!(build_frame(&window, &[1], &enc, 4, 13, 3).is_err());
        assert!(build_frame(&window, &[4], &enc, 4, 12, 3).is_err());
    }
}
