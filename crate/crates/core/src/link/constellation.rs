use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Modulation alphabet with one Gray label per point.
///
/// Points are stored in label order for the built-in alphabets, so the symbol
/// index and the integer value of its label coincide. Labels are read most
/// significant bit first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    name: String,
    points: Vec<C64>,
    labels: Vec<u32>,
    bits_per_symbol: usize,
}

/// Gray order of the per-axis amplitude levels of 16-QAM: `00 -> -3`,
/// `01 -> -1`, `11 -> +1`, `10 -> +3`.
const PAM4_GRAY: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

impl Constellation {
    /// Builds an alphabet from explicit points and labels, normalising it to
    /// unit average energy.
    pub fn new(name: impl Into<String>, points: Vec<C64>, labels: Vec<u32>) -> Result<Self> {
        let size = points.len();
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "constellation size {size} is not a power of two"
            )));
        }
        if labels.len() != size {
            return Err(Error::InvalidArgument("one label per point required".into()));
        }
        let mut seen = vec![false; size];
        for &l in &labels {
            let l = l as usize;
            if l >= size || std::mem::replace(&mut seen[l], true) {
                return Err(Error::InvalidArgument(format!("label {l} invalid or repeated")));
            }
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / size as f64;
        if energy <= 0.0 {
            return Err(Error::InvalidArgument("constellation has zero energy".into()));
        }
        let scale = energy.sqrt().recip();
        Ok(Self {
            name: name.into(),
            points: points.into_iter().map(|p| p * scale).collect(),
            labels,
            bits_per_symbol: size.trailing_zeros() as usize,
        })
    }

    /// Gray-labelled QPSK: first bit selects the sign of the in-phase part,
    /// second bit the sign of the quadrature part (`0 -> +`).
    pub fn qpsk() -> Self {
        let points = (0..4u32)
            .map(|l| {
                let re = if l & 0b10 == 0 { 1.0 } else { -1.0 };
                let im = if l & 0b01 == 0 { 1.0 } else { -1.0 };
                C64::new(re, im)
            })
            .collect();
        Self::new("qpsk", points, (0..4).collect()).expect("static table")
    }

    /// Gray-labelled square 16-QAM: bits `b0 b1` pick the in-phase level,
    /// `b2 b3` the quadrature level.
    pub fn qam16() -> Self {
        let points = (0..16u32)
            .map(|l| C64::new(PAM4_GRAY[(l >> 2) as usize], PAM4_GRAY[(l & 3) as usize]))
            .collect();
        Self::new("qam16", points, (0..16).collect()).expect("static table")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" | "qam4" => Ok(Self::qpsk()),
            "qam16" | "16qam" | "16-qam" => Ok(Self::qam16()),
            other => Err(Error::Config(format!("unknown constellation `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    /// Index of the point closest to `z`; ties go to the lower index.
    pub fn slice(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Symbol index for one group of `bits_per_symbol` bits.
    pub fn index_of_bits(&self, bits: &[u8]) -> usize {
        let label = bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
        self.labels
            .iter()
            .position(|&l| l == label)
            .expect("labels cover every bit pattern")
    }

    /// Appends the label bits of `index`, most significant first.
    pub fn push_bits(&self, index: usize, out: &mut Vec<u8>) {
        let label = self.labels[index];
        for b in (0..self.bits_per_symbol).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }

    /// Symbol indices for a bit stream.
    pub fn bits_to_indices(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let k = self.bits_per_symbol;
        if bits.len() % k != 0 {
            return Err(Error::LengthMismatch {
                len: bits.len(),
                bits_per_symbol: k,
            });
        }
        Ok(bits.chunks_exact(k).map(|c| self.index_of_bits(c)).collect())
    }

    pub fn indices_to_bits(&self, indices: &[usize]) -> Vec<u8> {
        let mut out = Vec::with_capacity(indices.len() * self.bits_per_symbol);
        for &i in indices {
            self.push_bits(i, &mut out);
        }
        out
    }
}

pub fn gray_map(bits: &[u8], c: &Constellation) -> Result<Vec<C64>> {
    Ok(c.bits_to_indices(bits)?.into_iter().map(|i| c.point(i)).collect())
}

/// Hard minimum-distance demapping back to bits.
pub fn gray_demap(symbols: &[C64], c: &Constellation) -> Vec<u8> {
    let idx: Vec<usize> = symbols.iter().map(|&z| c.slice(z)).collect();
    c.indices_to_bits(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent adjacency oracle: points at the minimum pairwise distance
    /// must have labels at Hamming distance one.
    fn assert_gray(c: &Constellation) {
        let pts = c.points();
        let mut dmin = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                dmin = dmin.min((pts[i] - pts[j]).norm());
            }
        }
        let mut pairs = 0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if (pts[i] - pts[j]).norm() < dmin * (1.0 + 1e-9) {
                    pairs += 1;
                    let h = (c.labels()[i] ^ c.labels()[j]).count_ones();
                    assert_eq!(h, 1, "{} points {i},{j}", c.name());
                }
            }
        }
        assert!(pairs > 0);
    }

    #[test]
    fn builtins_are_gray_and_unit_energy() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            assert_gray(&c);
            let e = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
            assert_eq!(1 << c.bits_per_symbol(), c.size());
        }
        assert_eq!(Constellation::qam16().bits_per_symbol(), 4);
    }

    #[test]
    fn qpsk_zero_bits_map_to_first_quadrant() {
        let x = gray_map(&[0, 0], &Constellation::qpsk()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(x[0].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(x[0].im, s, epsilon = 1e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = gray_map(&[0, 1, 1], &Constellation::qpsk()).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { len: 3, .. }));
    }

    #[test]
    fn non_power_of_two_is_rejected() {
        let pts = vec![C64::new(1.0, 0.0); 3];
        assert!(Constellation::new("x", pts, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn slice_ties_go_low() {
        assert_eq!(Constellation::qpsk().slice(C64::new(0.0, 0.0)), 0);
    }
}
