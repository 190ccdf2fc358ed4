use serde::{Deserialize, Serialize};

use crate::encoding::frame_width;
use crate::{Error, Result};

/// Shape of a decision-feedback network: tap split, encoder resolution and
/// layer sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfeArchitecture {
    pub n_ff: usize,
    pub m_fb: usize,
    pub m_bits: u32,
    pub alphabet_size: usize,
    pub n_hidden: usize,
    pub steps: usize,
}

impl DfeArchitecture {
    /// 16-QAM, 20 feedforward and 11 feedback taps, 640 hidden neurons.
    pub const PROAKIS_A: Self = Self {
        n_ff: 20,
        m_fb: 11,
        m_bits: 8,
        alphabet_size: 16,
        n_hidden: 640,
        steps: 10,
    };
    /// QPSK, 28 feedforward and 3 feedback taps, 320 hidden neurons.
    pub const PROAKIS_B: Self = Self {
        n_ff: 28,
        m_fb: 3,
        m_bits: 8,
        alphabet_size: 4,
        n_hidden: 320,
        steps: 10,
    };
    /// QPSK, 20 feedforward and 11 feedback taps, 320 hidden neurons.
    pub const PROAKIS_C: Self = Self {
        n_ff: 20,
        m_fb: 11,
        m_bits: 8,
        alphabet_size: 4,
        n_hidden: 320,
        steps: 10,
    };

    pub fn for_channel(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "proakis-a" | "proakis_a" | "a" => Ok(Self::PROAKIS_A),
            "proakis-b" | "proakis_b" | "b" => Ok(Self::PROAKIS_B),
            "proakis-c" | "proakis_c" | "c" => Ok(Self::PROAKIS_C),
            other => Err(Error::Config(format!("no architecture preset for channel `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ff == 0 {
            return Err(Error::InvalidArgument("at least one feedforward tap".into()));
        }
        if self.alphabet_size < 2 || self.n_hidden == 0 || self.steps == 0 || self.m_bits == 0 {
            return Err(Error::InvalidArgument(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }

    /// `2 M n + |M| m`.
    pub fn n_in(&self) -> usize {
        frame_width(self.m_bits, self.n_ff, self.alphabet_size, self.m_fb)
    }

    /// Input width without encoding: real and imaginary part of every tap.
    pub fn raw_width(&self) -> usize {
        2 * (self.n_ff + self.m_fb)
    }

    pub fn n_out(&self) -> usize {
        self.alphabet_size
    }

    pub fn total_taps(&self) -> usize {
        self.n_ff + self.m_fb
    }

    /// Symbols between the newest received sample and the decided symbol.
    pub fn decision_delay(&self) -> usize {
        self.n_ff - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let rows = [
            (DfeArchitecture::PROAKIS_A, 496, 640, 16),
            (DfeArchitecture::PROAKIS_B, 460, 320, 4),
            (DfeArchitecture::PROAKIS_C, 364, 320, 4),
        ];
        for (a, n_in, hid, out) in rows {
            assert_eq!(a.n_in(), n_in);
            assert_eq!(a.n_hidden, hid);
            assert_eq!(a.n_out(), out);
            assert_eq!(a.total_taps(), 31);
            assert_eq!(a.raw_width(), 62);
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(DfeArchitecture::for_channel("Proakis-B").unwrap(), DfeArchitecture::PROAKIS_B);
        assert!(DfeArchitecture::for_channel("identity").is_err());
    }
}
