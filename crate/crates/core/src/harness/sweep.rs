//! Monte-Carlo BER estimation over an Eb/N0 grid.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepConfig};
use crate::equalizers::{
    classical_dfe, lmmse_equalizer, zf_equalizer, EqualizerKind, EqualizerOutput, ErrorCount, FeedbackMode,
    LinearEqualizer, MapDetector, MmseDfe, NeuralDfe,
};
use crate::link::{sigma2_for, transmit, Constellation, FirChannel};
use crate::rng::{Purpose, SeedTree};
use crate::{Error, Result, C64};

/// A receiver ready to be swept: a trained network, or a classical design
/// recomputed at every noise level.
#[derive(Clone, Debug)]
pub enum Receiver {
    Neural(NeuralDfe),
    Classical(EqualizerKind),
}

impl Receiver {
    pub fn kind(&self) -> EqualizerKind {
        match self {
            Receiver::Neural(eq) => eq.kind(),
            Receiver::Classical(k) => *k,
        }
    }

    /// Equalizes the bursts `ys` received on the configured channel at
    /// `ebn0_db` (the noise level classical designs are computed for).
    pub fn equalize(&self, cfg: &ExperimentConfig, ebn0_db: f64, ys: &[Vec<C64>]) -> Result<Vec<EqualizerOutput>> {
        let h = FirChannel::by_name(&cfg.channel)?;
        let c = Constellation::by_name(&cfg.constellation)?;
        let sigma2 = sigma2_for(ebn0_db, c.bits_per_symbol());
        self.prepare(cfg, &h, &c, sigma2)?.run(ys, &c)
    }

    /// Designs the receiver for noise variance `sigma2`. Linear equalizers
    /// use `n_ff + m_fb` taps, the MMSE-DFE the same split as the network.
    fn prepare(&self, cfg: &ExperimentConfig, h: &FirChannel, c: &Constellation, sigma2: f64) -> Result<Prepared<'_>> {
        let a = &cfg.architecture;
        Ok(match self {
            Receiver::Neural(eq) => Prepared::Neural(eq),
            Receiver::Classical(EqualizerKind::Zf) => Prepared::Linear(zf_equalizer(h, a.total_taps())?),
            Receiver::Classical(EqualizerKind::Lmmse) => {
                Prepared::Linear(lmmse_equalizer(h, a.total_taps(), sigma2)?)
            }
            Receiver::Classical(EqualizerKind::Dfe) => Prepared::Dfe(classical_dfe(h, a.n_ff, a.m_fb, sigma2)?),
            Receiver::Classical(EqualizerKind::Map) => Prepared::Map(MapDetector::new(h, c, sigma2)?),
            Receiver::Classical(k) => return Err(Error::MissingCheckpoint(k.to_string())),
        })
    }
}

enum Prepared<'a> {
    Neural(&'a NeuralDfe),
    Linear(LinearEqualizer),
    Dfe(MmseDfe),
    Map(MapDetector),
}

impl Prepared<'_> {
    fn run(&self, ys: &[Vec<C64>], c: &Constellation) -> Result<Vec<EqualizerOutput>> {
        match self {
            Prepared::Neural(eq) => eq.equalize_batch(ys, FeedbackMode::Decision),
            Prepared::Linear(eq) => Ok(ys.iter().map(|y| eq.equalize(y, c)).collect()),
            Prepared::Dfe(eq) => Ok(ys.iter().map(|y| eq.equalize(y, c)).collect()),
            Prepared::Map(eq) => Ok(ys.iter().map(|y| eq.detect(y)).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MinBitErrors,
    MaxBits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub symbol_errors: u64,
    pub symbols: u64,
    pub stopped_by: StopReason,
    pub wall_time_s: f64,
}

/// The row written to `curve_*.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
}

impl From<&CurvePoint> for CurveRow {
    fn from(p: &CurvePoint) -> Self {
        Self {
            ebn0_db: p.ebn0_db,
            bit_errors: p.bit_errors,
            bits: p.bits,
            ber: p.ber,
        }
    }
}

/// Seeds of the point at `ebn0_db`; keyed by value so a point gets the same
/// streams in every grid that contains it.
pub fn point_seeds(master: u64, ebn0_db: f64) -> SeedTree {
    SeedTree::new(master).child(Purpose::Sweep, ebn0_db.to_bits())
}

/// Simulates rounds of `bursts_per_round` bursts until the bit-error or the
/// bit budget of `sweep` is reached.
pub fn simulate_point(
    rx: &Receiver,
    cfg: &ExperimentConfig,
    sweep: &SweepConfig,
    ebn0_db: f64,
    seeds: &SeedTree,
) -> Result<CurvePoint> {
    let start = Instant::now();
    let h = FirChannel::by_name(&cfg.channel)?;
    let c = Constellation::by_name(&cfg.constellation)?;
    let sigma2 = sigma2_for(ebn0_db, c.bits_per_symbol());
    let prepared = rx.prepare(cfg, &h, &c, sigma2)?;
    let mut total = ErrorCount::default();
    let mut burst = 0u64;
    let stopped_by = loop {
        let mut ys = Vec::with_capacity(sweep.bursts_per_round);
        let mut txs = Vec::with_capacity(sweep.bursts_per_round);
        for _ in 0..sweep.bursts_per_round {
            let b = transmit(
                &c,
                &h,
                sigma2,
                sweep.burst_symbols,
                &mut seeds.stream(Purpose::Data, burst),
                &mut seeds.stream(Purpose::Noise, burst),
            )?;
            ys.push(b.received);
            txs.push(b.indices);
            burst += 1;
        }
        let outs = prepared.run(&ys, &c)?;
        let before = total.bits;
        for (o, tx) in outs.iter().zip(&txs) {
            total.add(&ErrorCount::compare(o, tx, &c));
        }
        if total.bit_errors >= sweep.min_bit_errors {
            break StopReason::MinBitErrors;
        }
        if total.bits >= sweep.max_bits {
            break StopReason::MaxBits;
        }
        if total.bits == before {
            return Err(Error::Config(format!(
                "bursts of {} symbols leave nothing after the decision delay",
                sweep.burst_symbols
            )));
        }
    };
    if stopped_by == StopReason::MaxBits {
        log::warn!(
            "{} at {ebn0_db} dB: only {} of {} bit errors within {} bits",
            rx.kind(),
            total.bit_errors,
            sweep.min_bit_errors,
            total.bits
        );
    }
    Ok(CurvePoint {
        ebn0_db,
        bit_errors: total.bit_errors,
        bits: total.bits,
        ber: total.ber(),
        symbol_errors: total.symbol_errors,
        symbols: total.symbols,
        stopped_by,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every grid point of `cfg.sweep` on a pool of worker threads; points
/// come back in grid order whatever the scheduling.
pub fn sweep(rx: &Receiver, cfg: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    let grid = &cfg.sweep.ebn0_db;
    let workers = match cfg.sweep.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(grid.len())
    .max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CurvePoint>>>> = Mutex::new((0..grid.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= grid.len() {
                    break;
                }
                let r = simulate_point(rx, cfg, &cfg.sweep, grid[i], &point_seeds(cfg.seed, grid[i]));
                results.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect()
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile
/// `z` (1.96 for 95%).
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
