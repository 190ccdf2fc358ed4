//! Symbol-wise MAP detection on the ISI trellis (forward-backward).
//!
//! A state holds the `L-1` previous symbol indices, `x[k-1]` in the least
//! significant base-`|M|` digit. Symbols before the start of the burst are
//! zero: the recursion starts in state 0 and masks the corresponding taps.

use crate::equalizers::EqualizerOutput;
use crate::link::{Constellation, FirChannel};
use crate::{Error, Result, C64};

/// Largest trellis the detector accepts.
pub const MAP_STATE_BUDGET: usize = 4096;

/// Noise variance floor that keeps branch metrics finite on noiseless input.
const SIGMA2_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct MapDetector {
    constellation: Constellation,
    taps: Vec<C64>,
    sigma2: f64,
    states: usize,
    /// Noise-free output for state `s` and input `a` at `s * M + a`.
    means: Vec<C64>,
}

impl MapDetector {
    pub fn new(h: &FirChannel, c: &Constellation, sigma2: f64) -> Result<Self> {
        Self::with_budget(h, c, sigma2, MAP_STATE_BUDGET)
    }

    pub fn with_budget(h: &FirChannel, c: &Constellation, sigma2: f64, budget: usize) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("noise variance must be >= 0, got {sigma2}")));
        }
        let m = c.size() as u128;
        let states = m.checked_pow((h.len() - 1) as u32).unwrap_or(u128::MAX);
        if states > budget as u128 {
            return Err(Error::MapInfeasible { states, budget });
        }
        let states = states as usize;
        let mut det = Self {
            constellation: c.clone(),
            taps: h.taps().to_vec(),
            sigma2: sigma2.max(SIGMA2_FLOOR),
            states,
            means: Vec::with_capacity(states * c.size()),
        };
        for s in 0..states {
            for a in 0..c.size() {
                det.means.push(det.mean(s, a, usize::MAX));
            }
        }
        Ok(det)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Channel output for state `s` and input `a` at time `k`; taps reaching
    /// before time 0 are skipped.
    fn mean(&self, s: usize, a: usize, k: usize) -> C64 {
        let m = self.constellation.size();
        let mut acc = self.taps[0] * self.constellation.point(a);
        let mut rest = s;
        for (l, t) in self.taps.iter().enumerate().skip(1) {
            let digit = rest % m;
            rest /= m;
            if l <= k {
                acc += t * self.constellation.point(digit);
            }
        }
        acc
    }

    fn next(&self, s: usize, a: usize) -> usize {
        if self.states == 1 {
            0
        } else {
            (s * self.constellation.size() + a) % self.states
        }
    }

    /// Unnormalized branch likelihoods at time `k`, scaled so the best branch
    /// has weight 1.
    fn branch(&self, y: C64, k: usize, gamma: &mut [f64]) {
        let m = self.constellation.size();
        let full = k + 1 >= self.taps.len();
        for (idx, g) in gamma.iter_mut().enumerate() {
            let mu = if full { self.means[idx] } else { self.mean(idx / m, idx % m, k) };
            *g = (y - mu).norm_sqr();
        }
        let dmin = gamma.iter().copied().fold(f64::INFINITY, f64::min);
        for g in gamma.iter_mut() {
            *g = (-(*g - dmin) / self.sigma2).exp();
        }
    }

    pub fn detect(&self, y: &[C64]) -> EqualizerOutput {
        let n = y.len();
        let m = self.constellation.size();
        let s = self.states;
        let sm = s * m;
        let mut gammas = vec![0.0; n * sm];
        for (k, chunk) in gammas.chunks_exact_mut(sm).enumerate() {
            self.branch(y[k], k, chunk);
        }
        let mut alpha = vec![0.0; (n + 1) * s];
        alpha[0] = 1.0;
        for k in 0..n {
            let (cur, nxt) = alpha[k * s..(k + 2) * s].split_at_mut(s);
            let g = &gammas[k * sm..(k + 1) * sm];
            for st in 0..s {
                if cur[st] == 0.0 {
                    continue;
                }
                for a in 0..m {
                    nxt[self.next(st, a)] += cur[st] * g[st * m + a];
                }
            }
            normalize(nxt);
        }
        let mut beta = vec![1.0 / s as f64; s];
        let mut prev = vec![0.0; s];
        let mut app = vec![0.0; m];
        let mut out = vec![0usize; n];
        for k in (0..n).rev() {
            let g = &gammas[k * sm..(k + 1) * sm];
            let al = &alpha[k * s..(k + 1) * s];
            app.fill(0.0);
            prev.fill(0.0);
            for st in 0..s {
                for a in 0..m {
                    let t = g[st * m + a] * beta[self.next(st, a)];
                    app[a] += al[st] * t;
                    prev[st] += t;
                }
            }
            out[k] = argmax(&app);
            normalize(&mut prev);
            std::mem::swap(&mut beta, &mut prev);
        }
        EqualizerOutput::from_indices(out, &self.constellation, 0)
    }
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        v.iter_mut().for_each(|x| *x /= sum);
    } else {
        let u = 1.0 / v.len() as f64;
        v.fill(u);
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One-shot MAP detection; refuses trellises beyond [`MAP_STATE_BUDGET`].
pub fn map_detector(y: &[C64], h: &FirChannel, c: &Constellation, sigma2: f64) -> Result<EqualizerOutput> {
    Ok(MapDetector::new(h, c, sigma2)?.detect(y))
}
