//! MMSE decision feedback equalizer designed from the known channel.
//!
//! The feedforward window `Y_k` and the past symbols
//! `x[k-d-1], .., x[k-d-m]` are stacked into `u = G X + noise`; assuming
//! correct past decisions, the joint Wiener solution gives both filters.

use nalgebra::{DMatrix, DVector};

use crate::equalizers::EqualizerOutput;
use crate::link::{Constellation, FirChannel};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct MmseDfe {
    ff: Vec<C64>,
    fb: Vec<C64>,
    delay: usize,
    gain: C64,
    mse: f64,
}

fn mixing_matrix(h: &FirChannel, n: usize, m: usize, d: usize) -> DMatrix<C64> {
    let l = h.len();
    let span = (n + l - 1).max(d + m + 1);
    let mut g = DMatrix::zeros(n + m, span);
    for j in 0..n {
        for (i, t) in h.taps().iter().enumerate() {
            g[(j, j + i)] = *t;
        }
    }
    for i in 0..m {
        g[(n + i, d + 1 + i)] = C64::new(1.0, 0.0);
    }
    g
}

fn design_at(h: &FirChannel, n: usize, m: usize, sigma2: f64, d: usize) -> Result<MmseDfe> {
    let g = mixing_matrix(h, n, m, d);
    let mut r = g.conjugate() * g.transpose();
    for j in 0..n {
        r[(j, j)] += C64::new(sigma2, 0.0);
    }
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("DFE normal equations at delay {d}")))?;
    let v: DVector<C64> = chol.solve(&g.column(d).conjugate());
    let c = g.transpose() * &v;
    let gain = c[d];
    if gain.norm() == 0.0 {
        return Err(Error::Singular(format!("zero DFE response at delay {d}")));
    }
    Ok(MmseDfe {
        ff: v.rows(0, n).iter().copied().collect(),
        fb: v.rows(n, m).iter().copied().collect(),
        delay: d,
        gain,
        mse: 1.0 - gain.re,
    })
}

/// MMSE-DFE with `n_ff` feedforward and `m_fb` feedback taps, decision delay
/// chosen for minimum MSE (lowest on ties).
pub fn classical_dfe(h: &FirChannel, n_ff: usize, m_fb: usize, sigma2: f64) -> Result<MmseDfe> {
    if n_ff == 0 {
        return Err(Error::InvalidArgument("at least one feedforward tap".into()));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let mut best: Option<MmseDfe> = None;
    let mut last_err = None;
    for d in 0..n_ff + h.len() - 1 {
        match design_at(h, n_ff, m_fb, sigma2, d) {
            Ok(cand) => {
                if best.as_ref().is_none_or(|b| cand.mse < b.mse - 1e-12) {
                    best = Some(cand);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one delay tried"))
}

impl MmseDfe {
    pub fn at_delay(h: &FirChannel, n_ff: usize, m_fb: usize, sigma2: f64, delay: usize) -> Result<Self> {
        design_at(h, n_ff, m_fb, sigma2, delay)
    }

    pub fn feedforward(&self) -> &[C64] {
        &self.ff
    }

    pub fn feedback(&self) -> &[C64] {
        &self.fb
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn mse(&self) -> f64 {
        self.mse
    }

    pub fn gain(&self) -> C64 {
        self.gain
    }

    /// Runs with its own decisions in the feedback path.
    pub fn equalize(&self, y: &[C64], c: &Constellation) -> EqualizerOutput {
        self.run(y, c, None)
    }

    /// Runs with the transmitted symbols in the feedback path.
    pub fn equalize_genie(&self, y: &[C64], c: &Constellation, tx: &[usize]) -> Result<EqualizerOutput> {
        let need = y.len().saturating_sub(self.delay);
        if tx.len() < need {
            return Err(Error::MissingGroundTruth);
        }
        Ok(self.run(y, c, Some(tx)))
    }

    fn run(&self, y: &[C64], c: &Constellation, genie: Option<&[usize]>) -> EqualizerOutput {
        let zero = C64::new(0.0, 0.0);
        let mut out = vec![0usize; y.len()];
        // decided symbol points indexed by k'
        let mut past: Vec<C64> = Vec::with_capacity(y.len());
        for k in 0..y.len() {
            if k < self.delay {
                continue;
            }
            let kp = k - self.delay;
            let mut z: C64 = self.ff.iter().zip(y[..=k].iter().rev()).map(|(w, v)| w * v).sum();
            for (i, b) in self.fb.iter().enumerate() {
                let x = if kp > i { past[kp - 1 - i] } else { zero };
                z += b * x;
            }
            let a = c.slice(z / self.gain);
            out[k] = a;
            past.push(c.point(genie.map_or(a, |t| t[kp])));
        }
        EqualizerOutput::from_indices(out, c, self.delay)
    }
}
