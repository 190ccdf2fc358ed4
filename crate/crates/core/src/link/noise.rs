use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;
use crate::{Error, Result, C64};
use rand::SeedableRng;

/// AWGN level for a given Eb/N0, assuming unit average symbol energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub ebn0_db: f64,
    /// Total complex noise variance `N0`.
    pub sigma2: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    /// `sigma2 = Eb / 10^(ebn0_db/10)` with `Eb = 1 / bits_per_symbol`.
    pub fn from_ebn0(ebn0_db: f64, bits_per_symbol: usize, rng_seed: u64) -> Result<Self> {
        if bits_per_symbol == 0 || !ebn0_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot derive noise level from Eb/N0 {ebn0_db} dB and {bits_per_symbol} bits/symbol"
            )));
        }
        Ok(Self {
            ebn0_db,
            sigma2: sigma2_for(ebn0_db, bits_per_symbol),
            rng_seed,
        })
    }
}

pub fn sigma2_for(ebn0_db: f64, bits_per_symbol: usize) -> f64 {
    let eb = 1.0 / bits_per_symbol as f64;
    eb / 10f64.powf(ebn0_db / 10.0)
}

pub fn generate_bits(count: usize, seed: u64) -> Vec<u8> {
    generate_bits_with(&mut StreamRng::seed_from_u64(seed), count)
}

pub fn generate_bits_with<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<u8> {
    (0..count).map(|_| u8::from(rng.random::<bool>())).collect()
}

pub fn add_awgn(y: &[C64], ns: &NoiseSpec) -> Result<Vec<C64>> {
    add_awgn_with(y, ns.sigma2, &mut StreamRng::seed_from_u64(ns.rng_seed))
}

/// Circularly-symmetric noise with variance `sigma2 / 2` per component.
pub fn add_awgn_with<R: Rng + ?Sized>(y: &[C64], sigma2: f64, rng: &mut R) -> Result<Vec<C64>> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(y.to_vec());
    }
    let sd = (sigma2 / 2.0).sqrt();
    Ok(y.iter()
        .map(|&v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + C64::new(sd * re, sd * im)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_and_deterministic_bits() {
        assert!(generate_bits(0, 3).is_empty());
        assert_eq!(generate_bits(1000, 9), generate_bits(1000, 9));
        assert_ne!(generate_bits(1000, 9), generate_bits(1000, 10));
    }

    #[test]
    fn qpsk_at_10db() {
        let ns = NoiseSpec::from_ebn0(10.0, 2, 0).unwrap();
        assert_abs_diff_eq!(ns.sigma2, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn zero_noise_is_identity() {
        let y = vec![C64::new(1.0, 2.0); 4];
        let ns = NoiseSpec {
            ebn0_db: f64::INFINITY,
            sigma2: 0.0,
            rng_seed: 1,
        };
        assert_eq!(add_awgn(&y, &ns).unwrap(), y);
    }

    #[test]
    fn negative_variance_rejected() {
        let mut rng = StreamRng::seed_from_u64(0);
        assert!(add_awgn_with(&[C64::new(0.0, 0.0)], -1.0, &mut rng).is_err());
    }
}
