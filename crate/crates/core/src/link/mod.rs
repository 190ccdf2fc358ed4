//! Transmission chain: random bits, Gray mapping, FIR channel, complex AWGN.

mod channel;
mod constellation;
mod noise;

pub use channel::{apply_channel, FirChannel};
pub use constellation::{gray_demap, gray_map, Constellation};
pub use noise::{add_awgn, add_awgn_with, generate_bits, generate_bits_with, sigma2_for, NoiseSpec};

use crate::C64;

/// Converts interleaved `(re, im)` pairs into complex samples.
pub fn from_pairs(pairs: &[[f64; 2]]) -> Vec<C64> {
    pairs.iter().map(|p| C64::new(p[0], p[1])).collect()
}

pub fn to_pairs(x: &[C64]) -> Vec<[f64; 2]> {
    x.iter().map(|z| [z.re, z.im]).collect()
}

/// One burst through the whole chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Burst {
    pub bits: Vec<u8>,
    pub indices: Vec<usize>,
    pub symbols: Vec<C64>,
    pub received: Vec<C64>,
}

/// Draws `n_symbols` symbols from `data`, passes them through `h` and adds
/// noise of total variance `sigma2` from `noise`.
pub fn transmit<R1, R2>(
    c: &Constellation,
    h: &FirChannel,
    sigma2: f64,
    n_symbols: usize,
    data: &mut R1,
    noise: &mut R2,
) -> crate::Result<Burst>
where
    R1: rand::Rng + ?Sized,
    R2: rand::Rng + ?Sized,
{
    let bits = generate_bits_with(data, n_symbols * c.bits_per_symbol());
    let indices = c.bits_to_indices(&bits)?;
    let symbols: Vec<C64> = indices.iter().map(|&i| c.point(i)).collect();
    let received = add_awgn_with(&apply_channel(&symbols, h), sigma2, noise)?;
    Ok(Burst {
        bits,
        indices,
        symbols,
        received,
    })
}
