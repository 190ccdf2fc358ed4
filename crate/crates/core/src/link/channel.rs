use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Known FIR channel `h[0..L-1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirChannel {
    name: String,
    taps: Vec<C64>,
}

const PROAKIS_A: [f64; 11] = [
    0.04, -0.05, 0.07, -0.21, -0.5, 0.72, 0.36, 0.0, 0.21, 0.03, 0.07,
];
const PROAKIS_B: [f64; 3] = [0.407, 0.815, 0.407];
const PROAKIS_C: [f64; 5] = [0.227, 0.460, 0.688, 0.460, 0.227];

impl FirChannel {
    pub fn new(name: impl Into<String>, taps: Vec<C64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one tap".into()));
        }
        if taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(Error::InvalidArgument("channel taps are all zero".into()));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::NonFinite("channel taps"));
        }
        Ok(Self {
            name: name.into(),
            taps,
        })
    }

    pub fn from_real(name: impl Into<String>, taps: &[f64]) -> Result<Self> {
        Self::new(name, taps.iter().map(|&t| C64::new(t, 0.0)).collect())
    }

    pub fn identity() -> Self {
        Self::from_real("identity", &[1.0]).expect("static taps")
    }

    pub fn proakis_a() -> Self {
        Self::from_real("proakis-a", &PROAKIS_A).expect("static taps")
    }

    pub fn proakis_b() -> Self {
        Self::from_real("proakis-b", &PROAKIS_B).expect("static taps")
    }

    pub fn proakis_c() -> Self {
        Self::from_real("proakis-c", &PROAKIS_C).expect("static taps")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "proakis-a" | "a" => Ok(Self::proakis_a()),
            "proakis-b" | "b" => Ok(Self::proakis_b()),
            "proakis-c" | "c" => Ok(Self::proakis_c()),
            "identity" => Ok(Self::identity()),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// `sum |h[l]|^2`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        apply_channel(x, self)
    }
}

/// Causal convolution with zero prehistory, truncated to the input length.
pub fn apply_channel(x: &[C64], ch: &FirChannel) -> Vec<C64> {
    let h = ch.taps();
    (0..x.len())
        .map(|k| {
            h.iter()
                .take(k + 1)
                .enumerate()
                .fold(C64::new(0.0, 0.0), |acc, (l, &hl)| acc + hl * x[k - l])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn re(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&r| C64::new(r, 0.0)).collect()
    }

    #[test]
    fn identity_channel_is_transparent() {
        let x = vec![C64::new(0.3, -1.0), C64::new(2.0, 0.5)];
        assert_eq!(FirChannel::identity().apply(&x), x);
    }

    #[test]
    fn proakis_b_impulse_response() {
        let y = FirChannel::proakis_b().apply(&re(&[1.0, 0.0, 0.0, 0.0]));
        let expect = [0.407, 0.815, 0.407, 0.0];
        for (a, b) in y.iter().zip(expect) {
            assert_abs_diff_eq!(a.re, b, epsilon = 1e-15);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn proakis_energies() {
        assert_abs_diff_eq!(FirChannel::proakis_c().energy(), 0.999_602, epsilon = 1e-12);
        assert_abs_diff_eq!(FirChannel::proakis_b().energy(), 0.995_523, epsilon = 1e-12);
        assert_abs_diff_eq!(FirChannel::proakis_a().energy(), 1.001, epsilon = 1e-12);
        assert_eq!(FirChannel::proakis_a().len(), 11);
    }

    #[test]
    fn degenerate_channels_rejected() {
        assert!(FirChannel::from_real("z", &[0.0, 0.0]).is_err());
        assert!(FirChannel::new("e", vec![]).is_err());
    }

    #[test]
    fn output_keeps_input_length() {
        let y = FirChannel::proakis_a().apply(&re(&[1.0; 5]));
        assert_eq!(y.len(), 5);
        assert_abs_diff_eq!(y[4].re, 0.04 - 0.05 + 0.07 - 0.21 - 0.5, epsilon = 1e-15);
    }
}
