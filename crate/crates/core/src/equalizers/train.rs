//! Supervised training of the neural DFEs with teacher-forced feedback.

use serde::{Deserialize, Serialize};

use crate::equalizers::{EqualizerOutput, ErrorCount, FeedbackMode, NeuralDfe, NeuralModel};
use crate::link::{sigma2_for, transmit, FirChannel};
use crate::rng::{Purpose, SeedTree};
use crate::snn::{softmax_ce_batch, Adam, Stimulus};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub epochs: usize,
    /// Decisions per epoch, which is also the batch size.
    pub burst_len: usize,
    pub lr0: f64,
    /// Relative learning-rate decrease per epoch.
    pub decay: f64,
    pub ebn0_db: f64,
    /// Validation period in epochs; 0 disables validation.
    pub val_every: usize,
    pub val_symbols: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            burst_len: 200,
            lr0: 1e-3,
            decay: 0.0008,
            ebn0_db: 11.0,
            val_every: 500,
            val_symbols: 10_000,
        }
    }
}

impl TrainSchedule {
    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr0 * (1.0 - self.decay).powi(epoch as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burst_len == 0 {
            return Err(Error::Config("burst_len must be positive".into()));
        }
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.decay) {
            return Err(Error::Config(format!("decay must be in [0, 1), got {}", self.decay)));
        }
        if !self.ebn0_db.is_finite() {
            return Err(Error::Config("training Eb/N0 must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub val_ser: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub optimizer: Adam,
}

impl TrainLog {
    pub fn first_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    /// Mean loss over the last `n` epochs.
    pub fn tail_loss(&self, n: usize) -> Option<f64> {
        let n = n.min(self.records.len());
        if n == 0 {
            return None;
        }
        let tail = &self.records[self.records.len() - n..];
        Some(tail.iter().map(|r| r.loss).sum::<f64>() / n as f64)
    }
}

fn guard(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { epoch, loss })
    }
}

/// Streams used for periodic validation.
const VAL_STREAMS: usize = 10;

/// Decision-feedback error counts of `eq` on `symbols` fresh symbols split
/// into `streams` equally long bursts.
pub fn evaluate(
    eq: &NeuralDfe,
    h: &FirChannel,
    ebn0_db: f64,
    seeds: &SeedTree,
    symbols: usize,
    streams: usize,
    teacher: bool,
) -> Result<ErrorCount> {
    let c = eq.constellation();
    let sigma2 = sigma2_for(ebn0_db, c.bits_per_symbol());
    let streams = streams.max(1);
    let per = symbols.div_ceil(streams) + eq.decision_delay();
    let mut ys = Vec::with_capacity(streams);
    let mut txs = Vec::with_capacity(streams);
    for s in 0..streams as u64 {
        let b = transmit(
            c,
            h,
            sigma2,
            per,
            &mut seeds.stream(Purpose::Data, s),
            &mut seeds.stream(Purpose::Noise, s),
        )?;
        ys.push(b.received);
        txs.push(b.indices);
    }
    let mode = if teacher {
        FeedbackMode::Teacher(&txs)
    } else {
        FeedbackMode::Decision
    };
    let outs: Vec<EqualizerOutput> = eq.equalize_batch(&ys, mode)?;
    let mut total = ErrorCount::default();
    for (o, tx) in outs.iter().zip(&txs) {
        total.add(&ErrorCount::compare(o, tx, c));
    }
    Ok(total)
}

/// Trains `eq` on fresh bursts from `h` at the schedule's Eb/N0.
///
/// Each epoch transmits `burst_len + n - 1` symbols so that every one of
/// the `burst_len` decisions sees a full window; the mean cross-entropy over
/// the burst drives one Adam step at `lr0 (1 - decay)^epoch`.
pub fn train(
    eq: &mut NeuralDfe,
    h: &FirChannel,
    schedule: &TrainSchedule,
    seeds: &SeedTree,
    mut on_epoch: impl FnMut(&TrainRecord),
) -> Result<TrainLog> {
    schedule.validate()?;
    let c = eq.constellation().clone();
    let sigma2 = sigma2_for(schedule.ebn0_db, c.bits_per_symbol());
    let n_symbols = schedule.burst_len + eq.decision_delay();
    let val_seeds = seeds.child(Purpose::Validation, 0);
    let mut adam = Adam::default();
    let mut records = Vec::with_capacity(schedule.epochs);
    for epoch in 0..schedule.epochs {
        let burst = transmit(
            &c,
            h,
            sigma2,
            n_symbols,
            &mut seeds.stream(Purpose::Data, epoch as u64),
            &mut seeds.stream(Purpose::Noise, epoch as u64),
        )?;
        let (rows, targets) = eq.teacher_rows(&burst.received, &burst.indices)?;
        let lr = schedule.lr(epoch);
        let drive = eq.drive_mode();
        let loss = match eq.model_mut() {
            NeuralModel::Snn(net) => {
                let (logits, tape) = net.forward(&Stimulus::new(rows, drive))?;
                let (loss, d_out) = softmax_ce_batch(logits.view(), &targets)?;
                guard(epoch, loss)?;
                let g = net.backward(&tape, d_out.view())?;
                adam.step(&mut net.tensors_mut(), &g.tensors(), lr)?;
                net.bump_version();
                loss
            }
            NeuralModel::Ann(mlp) => {
                let (logits, cache) = mlp.forward(rows.view())?;
                let (loss, d_out) = softmax_ce_batch(logits.view(), &targets)?;
                guard(epoch, loss)?;
                let g = mlp.backward(&cache, d_out.view())?;
                adam.step(&mut mlp.tensors_mut(), &g.tensors(), lr)?;
                loss
            }
        };
        let last = epoch + 1 == schedule.epochs;
        let val_ser = if schedule.val_every > 0 && (epoch % schedule.val_every == 0 || last) {
            let e = evaluate(eq, h, schedule.ebn0_db, &val_seeds, schedule.val_symbols, VAL_STREAMS, false)?;
            Some(e.ser())
        } else {
            None
        };
        let rec = TrainRecord {
            epoch,
            loss,
            lr,
            val_ser,
        };
        on_epoch(&rec);
        records.push(rec);
    }
    Ok(TrainLog {
        records,
        optimizer: adam,
    })
}
