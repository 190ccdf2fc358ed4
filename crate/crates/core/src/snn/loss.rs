use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}

/// `-log softmax(v_out)[target]`, computed with log-sum-exp.
pub fn loss_softmax_ce(v_out: &[f64], target: usize) -> Result<f64> {
    if target >= v_out.len() {
        return Err(Error::OutOfRange {
            index: target,
            size: v_out.len(),
        });
    }
    let max = v_out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v_out.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    Ok(lse - v_out[target])
}

/// Mean cross-entropy over a batch and its gradient w.r.t. the logits
/// (`(softmax - one_hot) / batch`).
pub fn softmax_ce_batch(logits: ArrayView2<f64>, targets: &[usize]) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != targets.len() || logits.nrows() == 0 {
        return Err(Error::shape(format!(
            "{} logit rows for {} targets",
            logits.nrows(),
            targets.len()
        )));
    }
    let b = targets.len() as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for ((row, mut g), &t) in logits.rows().into_iter().zip(grad.rows_mut()).zip(targets) {
        let z = row.to_vec();
        total += loss_softmax_ce(&z, t)?;
        for (gj, pj) in g.iter_mut().zip(softmax(&z)) {
            *gj = pj / b;
        }
        g[t] -= 1.0 / b;
    }
    Ok((total / b, grad))
}
