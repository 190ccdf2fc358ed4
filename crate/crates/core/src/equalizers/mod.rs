//! Receivers: the spiking and conventional neural DFEs plus the classical
//! ZF, LMMSE, MMSE-DFE and BCJR references.
//!
//! Every receiver maps a received sequence `y[0..N)` to `N` symbol indices
//! where entry `k` estimates `a[k - decision_delay]`; entries before the
//! delay are placeholders and are skipped by [`ErrorCount::compare`].

mod ann;
mod arch;
mod dfe;
mod linear;
mod map;
mod neural;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::link::Constellation;
use crate::{Error, Result};

pub use ann::{Mlp, MlpCache, MlpGradients};
pub use arch::DfeArchitecture;
pub use dfe::{classical_dfe, MmseDfe};
pub use linear::{lmmse_equalizer, lmmse_at_delay, zf_equalizer, zf_at_delay, LinearEqualizer};
pub use map::{map_detector, MapDetector, MAP_STATE_BUDGET};
pub use neural::{FeatureMap, FeedbackMode, NeuralDfe, NeuralModel, READOUT_INIT_GAIN};
pub use train::{evaluate, train, TrainLog, TrainRecord, TrainSchedule};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualizerOutput {
    pub symbol_indices: Vec<usize>,
    pub bits: Vec<u8>,
    pub decision_delay: usize,
}

impl EqualizerOutput {
    pub fn from_indices(symbol_indices: Vec<usize>, c: &Constellation, decision_delay: usize) -> Self {
        let bits = c.indices_to_bits(&symbol_indices);
        Self {
            symbol_indices,
            bits,
            decision_delay,
        }
    }

    pub fn len(&self) -> usize {
        self.symbol_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbol_indices.is_empty()
    }

    /// Estimates aligned with the transmitted indices `0..len - delay`.
    pub fn aligned(&self) -> &[usize] {
        &self.symbol_indices[self.decision_delay.min(self.len())..]
    }
}

/// Symbol and bit error counts over the aligned part of a burst.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCount {
    pub symbols: u64,
    pub symbol_errors: u64,
    pub bits: u64,
    pub bit_errors: u64,
}

impl ErrorCount {
    pub fn compare(out: &EqualizerOutput, tx: &[usize], c: &Constellation) -> Self {
        let est = out.aligned();
        let n = est.len().min(tx.len());
        let mut e = Self::default();
        for (&a, &b) in est[..n].iter().zip(&tx[..n]) {
            let diff = (c.labels()[a] ^ c.labels()[b]).count_ones();
            e.symbol_errors += u64::from(diff > 0);
            e.bit_errors += u64::from(diff);
        }
        e.symbols = n as u64;
        e.bits = (n * c.bits_per_symbol()) as u64;
        e
    }

    pub fn add(&mut self, other: &Self) {
        self.symbols += other.symbols;
        self.symbol_errors += other.symbol_errors;
        self.bits += other.bits;
        self.bit_errors += other.bit_errors;
    }

    pub fn ser(&self) -> f64 {
        ratio(self.symbol_errors, self.symbols)
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Receiver names as used in configs and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerKind {
    SnnDfe,
    AnnDfeEncoded,
    AnnDfeRaw,
    Zf,
    Lmmse,
    Dfe,
    Map,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 7] = [
        EqualizerKind::SnnDfe,
        EqualizerKind::AnnDfeEncoded,
        EqualizerKind::AnnDfeRaw,
        EqualizerKind::Zf,
        EqualizerKind::Lmmse,
        EqualizerKind::Dfe,
        EqualizerKind::Map,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EqualizerKind::SnnDfe => "snn_dfe",
            EqualizerKind::AnnDfeEncoded => "ann_dfe_encoded",
            EqualizerKind::AnnDfeRaw => "ann_dfe_raw",
            EqualizerKind::Zf => "zf",
            EqualizerKind::Lmmse => "lmmse",
            EqualizerKind::Dfe => "dfe",
            EqualizerKind::Map => "map",
        }
    }

    pub fn is_neural(&self) -> bool {
        matches!(
            self,
            EqualizerKind::SnnDfe | EqualizerKind::AnnDfeEncoded | EqualizerKind::AnnDfeRaw
        )
    }
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.as_str()).collect();
                Error::Config(format!("unknown equalizer `{s}` (expected one of {})", names.join(", ")))
            })
    }
}
