//! Finite-length linear equalizers.
//!
//! With `Y_k = [y[k], .., y[k-N+1]]` and `X_k = [x[k], .., x[k-N-L+2]]` the
//! received window is `Y_k = H X_k + n_k`, `H[j, j+l] = h[l]`. An equalizer
//! `w` estimates `x[k-d]` as `w^T Y_k`; its combined response with the
//! channel is `c = H^T w`.

use nalgebra::{DMatrix, DVector};

use crate::equalizers::EqualizerOutput;
use crate::link::{Constellation, FirChannel};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearEqualizer {
    taps: Vec<C64>,
    delay: usize,
    /// Combined response at the decision delay, divided out before slicing.
    gain: C64,
    /// Design criterion at the chosen delay: residual for ZF, MSE for LMMSE.
    cost: f64,
}

impl LinearEqualizer {
    pub fn new(taps: Vec<C64>, delay: usize) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidArgument("equalizer taps must be finite and non-empty".into()));
        }
        Ok(Self {
            taps,
            delay,
            gain: C64::new(1.0, 0.0),
            cost: f64::NAN,
        })
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn gain(&self) -> C64 {
        self.gain
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// `(w * h)[i]` for `i in 0..N+L-1`.
    pub fn combined_response(&self, h: &FirChannel) -> Vec<C64> {
        let mut c = vec![C64::new(0.0, 0.0); self.taps.len() + h.len() - 1];
        for (j, w) in self.taps.iter().enumerate() {
            for (l, hl) in h.taps().iter().enumerate() {
                c[j + l] += w * hl;
            }
        }
        c
    }

    /// Energy of the combined response outside the decision delay.
    pub fn residual_isi(&self, h: &FirChannel) -> f64 {
        self.combined_response(h)
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.delay)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Soft output `z[k] = sum_j w[j] y[k-j]`, zero prehistory.
    pub fn filter(&self, y: &[C64]) -> Vec<C64> {
        (0..y.len())
            .map(|k| {
                self.taps
                    .iter()
                    .zip(y[..=k].iter().rev())
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }

    pub fn equalize(&self, y: &[C64], c: &Constellation) -> EqualizerOutput {
        let idx = self.filter(y).into_iter().map(|z| c.slice(z / self.gain)).collect();
        EqualizerOutput::from_indices(idx, c, self.delay)
    }
}

fn window_matrix(h: &FirChannel, n: usize) -> DMatrix<C64> {
    let l = h.len();
    let mut m = DMatrix::zeros(n, n + l - 1);
    for j in 0..n {
        for (i, t) in h.taps().iter().enumerate() {
            m[(j, j + i)] = *t;
        }
    }
    m
}

struct Design {
    h: DMatrix<C64>,
    chol: nalgebra::Cholesky<C64, nalgebra::Dyn>,
}

impl Design {
    fn new(ch: &FirChannel, n_taps: usize, sigma2: f64) -> Result<Self> {
        if n_taps == 0 {
            return Err(Error::InvalidArgument("at least one equalizer tap".into()));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("noise variance must be >= 0, got {sigma2}")));
        }
        let h = window_matrix(ch, n_taps);
        let mut a = h.conjugate() * h.transpose();
        for i in 0..n_taps {
            a[(i, i)] += C64::new(sigma2, 0.0);
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("normal equations of channel `{}`", ch.name())))?;
        Ok(Self { h, chol })
    }

    fn delays(&self) -> usize {
        self.h.ncols()
    }

    /// Taps and combined response for delay `d`.
    fn solve(&self, d: usize) -> (DVector<C64>, DVector<C64>) {
        let rhs = self.h.column(d).conjugate();
        let w = self.chol.solve(&rhs);
        let c = self.h.transpose() * &w;
        (w, c)
    }
}

fn build(w: DVector<C64>, c: &DVector<C64>, d: usize, cost: f64) -> Result<LinearEqualizer> {
    let mut eq = LinearEqualizer::new(w.iter().copied().collect(), d)?;
    eq.gain = c[d];
    eq.cost = cost;
    if eq.gain.norm() == 0.0 {
        return Err(Error::Singular(format!("zero response at delay {d}")));
    }
    Ok(eq)
}

fn zf_residual(c: &DVector<C64>, d: usize) -> f64 {
    c.iter()
        .enumerate()
        .map(|(i, v)| if i == d { (v - 1.0).norm_sqr() } else { v.norm_sqr() })
        .sum()
}

/// Least-squares zero forcing for a fixed delay.
pub fn zf_at_delay(h: &FirChannel, n_taps: usize, delay: usize) -> Result<LinearEqualizer> {
    let design = Design::new(h, n_taps, 0.0)?;
    check_delay(delay, design.delays())?;
    let (w, c) = design.solve(delay);
    let r = zf_residual(&c, delay);
    build(w, &c, delay, r)
}

/// Least-squares zero forcing, `min |H^T w - e_d|`, over the delay with the
/// smallest residual (lowest delay on ties).
pub fn zf_equalizer(h: &FirChannel, n_taps: usize) -> Result<LinearEqualizer> {
    let design = Design::new(h, n_taps, 0.0)?;
    let mut best: Option<(f64, usize, DVector<C64>, DVector<C64>)> = None;
    for d in 0..design.delays() {
        let (w, c) = design.solve(d);
        let r = zf_residual(&c, d);
        if best.as_ref().is_none_or(|b| r < b.0 - 1e-12) {
            best = Some((r, d, w, c));
        }
    }
    let (r, d, w, c) = best.expect("at least one delay");
    build(w, &c, d, r)
}

/// Wiener solution `w = (conj(H) H^T + sigma2 I)^-1 conj(H) e_d` for a fixed
/// delay, with `MSE = 1 - c_d` for unit-energy symbols.
pub fn lmmse_at_delay(h: &FirChannel, n_taps: usize, sigma2: f64, delay: usize) -> Result<LinearEqualizer> {
    let design = Design::new(h, n_taps, sigma2)?;
    check_delay(delay, design.delays())?;
    let (w, c) = design.solve(delay);
    build(w, &c, delay, 1.0 - c[delay].re)
}

/// LMMSE equalizer over the delay with the smallest MSE.
pub fn lmmse_equalizer(h: &FirChannel, n_taps: usize, sigma2: f64) -> Result<LinearEqualizer> {
    let design = Design::new(h, n_taps, sigma2)?;
    let mut best: Option<(f64, usize, DVector<C64>, DVector<C64>)> = None;
    for d in 0..design.delays() {
        let (w, c) = design.solve(d);
        let mse = 1.0 - c[d].re;
        if best.as_ref().is_none_or(|b| mse < b.0 - 1e-12) {
            best = Some((mse, d, w, c));
        }
    }
    let (mse, d, w, c) = best.expect("at least one delay");
    build(w, &c, d, mse)
}

fn check_delay(delay: usize, count: usize) -> Result<()> {
    if delay >= count {
        return Err(Error::OutOfRange { index: delay, size: count });
    }
    Ok(())
}
