//! The four harness commands. Each writes its files atomically into an
//! output directory and records itself in `summary.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::files::{ensure_dir, read_csv, sha256_file, update_summary, write_csv, write_json, write_table, Metadata};
use super::sweep::{sweep, CurvePoint, CurveRow, Receiver};
use crate::encoding::TernaryEncoder;
use crate::equalizers::{
    evaluate, train, EqualizerKind, ErrorCount, FeatureMap, Mlp, NeuralDfe, NeuralModel, TrainRecord,
};
use crate::link::{Constellation, FirChannel};
use crate::rng::{Purpose, SeedTree};
use crate::snn::checkpoint::Checkpoint;
use crate::snn::Network;
use crate::{Error, Result};

fn stem(cfg: &ExperimentConfig) -> String {
    format!("{}_{}", cfg.equalizer, cfg.channel)
}

/// Default checkpoint location inside `out`.
pub fn checkpoint_path(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(format!("checkpoint_{}.bin", stem(cfg)))
}

pub fn curve_path(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(format!("curve_{}.csv", stem(cfg)))
}

/// Freshly initialized network for a neural equalizer kind, drawn from the
/// `Init` stream of the config seed.
pub fn build_untrained(cfg: &ExperimentConfig) -> Result<NeuralDfe> {
    let c = Constellation::by_name(&cfg.constellation)?;
    let mut rng = SeedTree::new(cfg.seed).stream(Purpose::Init, 0);
    match cfg.equalizer {
        EqualizerKind::SnnDfe => NeuralDfe::random_snn(
            cfg.architecture,
            c,
            cfg.encoder,
            cfg.hidden,
            cfg.readout,
            cfg.dynamics,
            &mut rng,
        ),
        EqualizerKind::AnnDfeEncoded => NeuralDfe::random_ann(cfg.architecture, c, Some(cfg.encoder), &mut rng),
        EqualizerKind::AnnDfeRaw => NeuralDfe::random_ann(cfg.architecture, c, None, &mut rng),
        k => Err(Error::Config(format!("`{k}` has no trainable parameters"))),
    }
}

/// Network stored at `path`, checked against the configured architecture.
pub fn load_neural(cfg: &ExperimentConfig, path: &Path) -> Result<NeuralDfe> {
    let c = Constellation::by_name(&cfg.constellation)?;
    let ck = Checkpoint::load(path)?;
    let model = if ck.neurons.is_some() {
        NeuralModel::Snn(Network::from_checkpoint(&ck)?)
    } else {
        NeuralModel::Ann(Mlp::from_checkpoint(&ck)?)
    };
    let features = match (cfg.equalizer, &model) {
        (EqualizerKind::SnnDfe, NeuralModel::Snn(_)) | (EqualizerKind::AnnDfeEncoded, NeuralModel::Ann(_)) => {
            FeatureMap::Encoded(TernaryEncoder::new(cfg.encoder)?)
        }
        (EqualizerKind::AnnDfeRaw, NeuralModel::Ann(_)) => FeatureMap::Raw,
        (k, _) => {
            return Err(Error::shape(format!(
                "{} does not hold a `{k}` model",
                path.display()
            )))
        }
    };
    NeuralDfe::new(cfg.architecture, c, features, model)
}

/// Receiver for `cfg.equalizer`; neural kinds need `checkpoint`.
pub fn load_receiver(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Receiver> {
    if !cfg.equalizer.is_neural() {
        return Ok(Receiver::Classical(cfg.equalizer));
    }
    match checkpoint {
        Some(p) if p.exists() => Ok(Receiver::Neural(load_neural(cfg, p)?)),
        _ => Err(Error::MissingCheckpoint(cfg.equalizer.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub metadata: Metadata,
    pub checkpoint: PathBuf,
    pub checkpoint_sha256: String,
    pub train_log: PathBuf,
    pub epochs: usize,
    pub first_loss: f64,
    pub final_loss: f64,
    /// Mean loss over the last 50 epochs.
    pub tail_loss: f64,
    pub final_val_ser: Option<f64>,
    pub wall_time_s: f64,
}

/// Row of `train_log.csv`.
#[derive(Serialize)]
struct LogRow {
    epoch: usize,
    loss: f64,
    lr: f64,
    val_ser: Option<f64>,
}

/// Trains `cfg.equalizer` and writes the checkpoint (to `checkpoint` or the
/// default path in `out`) and `train_log.csv`. The log is also written when
/// training diverges.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    out: &Path,
    checkpoint: Option<&Path>,
    mut on_epoch: impl FnMut(&TrainRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    ensure_dir(out)?;
    let start = Instant::now();
    let h = FirChannel::by_name(&cfg.channel)?;
    let mut eq = build_untrained(cfg)?;
    let meta = Metadata::new(cfg);
    let log_path = out.join("train_log.csv");
    let mut rows = Vec::with_capacity(cfg.training.epochs);
    let result = train(&mut eq, &h, &cfg.training, &SeedTree::new(cfg.seed), |r| {
        rows.push(LogRow {
            epoch: r.epoch,
            loss: r.loss,
            lr: r.lr,
            val_ser: r.val_ser,
        });
        on_epoch(r);
    });
    write_csv(&log_path, Some(&meta), &rows)?;
    let log = result?;
    let ck_path = checkpoint.map_or_else(|| checkpoint_path(out, cfg), Path::to_path_buf);
    if let Some(dir) = ck_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let ck = match eq.model() {
        NeuralModel::Snn(net) => net.to_checkpoint(Some(&log.optimizer)),
        NeuralModel::Ann(mlp) => mlp.to_checkpoint(Some(&log.optimizer)),
    };
    ck.save(&ck_path)?;
    let last = log.records.last().expect("at least one epoch");
    let report = TrainReport {
        metadata: meta,
        checkpoint_sha256: sha256_file(&ck_path)?,
        checkpoint: ck_path,
        train_log: log_path,
        epochs: log.records.len(),
        first_loss: log.first_loss().expect("at least one epoch"),
        final_loss: last.loss,
        tail_loss: log.tail_loss(50).expect("at least one epoch"),
        final_val_ser: log.records.iter().rev().find_map(|r| r.val_ser),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join(format!("train_{}.json", stem(cfg))), &report)?;
    update_summary(out, &format!("train_{}", stem(cfg)), serde_json::to_value(&report)?)?;
    Ok(report)
}

/// JSON companion of a curve CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub metadata: Metadata,
    pub equalizer: EqualizerKind,
    pub channel: String,
    pub checkpoint_sha256: Option<String>,
    pub points: Vec<CurvePoint>,
}

/// Sweeps `cfg.sweep.ebn0_db` and writes `curve_<eq>_<channel>.csv/.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: &Path) -> Result<CurveFile> {
    cfg.validate()?;
    ensure_dir(out)?;
    let default_ck = checkpoint_path(out, cfg);
    let ck = checkpoint.or(cfg.equalizer.is_neural().then_some(default_ck.as_path()));
    let rx = load_receiver(cfg, ck)?;
    let points = sweep(&rx, cfg)?;
    let file = CurveFile {
        metadata: Metadata::new(cfg),
        equalizer: cfg.equalizer,
        channel: cfg.channel.clone(),
        checkpoint_sha256: match (&rx, ck) {
            (Receiver::Neural(_), Some(p)) => Some(sha256_file(p)?),
            _ => None,
        },
        points,
    };
    let csv_path = curve_path(out, cfg);
    let rows: Vec<CurveRow> = file.points.iter().map(CurveRow::from).collect();
    write_csv(&csv_path, Some(&file.metadata), &rows)?;
    write_json(&csv_path.with_extension("json"), &file)?;
    update_summary(out, &format!("curve_{}", stem(cfg)), serde_json::to_value(&file)?)?;
    Ok(file)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub metadata: Metadata,
    pub checkpoint_sha256: String,
    pub ebn0_db: f64,
    pub decision_feedback: ErrorCount,
    pub teacher_forcing: ErrorCount,
    pub ser_decision: f64,
    pub ser_teacher: f64,
    pub ber_decision: f64,
    pub ber_teacher: f64,
    /// `ser_decision - ser_teacher`; error propagation makes it non-negative
    /// up to Monte-Carlo noise.
    pub ser_gap: f64,
}

/// Decision-feedback and teacher-forced error rates of a checkpoint at the
/// training Eb/N0 on the same `symbols` received samples.
pub fn validate_checkpoint(eq: &NeuralDfe, cfg: &ExperimentConfig, symbols: usize) -> Result<(ErrorCount, ErrorCount)> {
    let h = FirChannel::by_name(&cfg.channel)?;
    let seeds = SeedTree::new(cfg.seed).child(Purpose::Validation, 1);
    let streams = (symbols / 1000).clamp(1, 100);
    let ebn0 = cfg.training.ebn0_db;
    let decision = evaluate(eq, &h, ebn0, &seeds, symbols, streams, false)?;
    let teacher = evaluate(eq, &h, ebn0, &seeds, symbols, streams, true)?;
    Ok((decision, teacher))
}

pub fn cmd_validate(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    symbols: usize,
    out: &Path,
) -> Result<ValidationReport> {
    cfg.validate()?;
    if !cfg.equalizer.is_neural() {
        return Err(Error::Config(format!("`{}` has no checkpoint to validate", cfg.equalizer)));
    }
    ensure_dir(out)?;
    let ck = checkpoint.map_or_else(|| checkpoint_path(out, cfg), Path::to_path_buf);
    if !ck.exists() {
        return Err(Error::MissingCheckpoint(cfg.equalizer.to_string()));
    }
    let eq = load_neural(cfg, &ck)?;
    let (d, t) = validate_checkpoint(&eq, cfg, symbols)?;
    let report = ValidationReport {
        metadata: Metadata::new(cfg),
        checkpoint_sha256: sha256_file(&ck)?,
        ebn0_db: cfg.training.ebn0_db,
        decision_feedback: d,
        teacher_forcing: t,
        ser_decision: d.ser(),
        ser_teacher: t.ser(),
        ber_decision: d.ber(),
        ber_teacher: t.ber(),
        ser_gap: d.ser() - t.ser(),
    };
    write_json(&out.join(format!("validate_{}.json", stem(cfg))), &report)?;
    update_summary(out, &format!("validate_{}", stem(cfg)), serde_json::to_value(&report)?)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSource {
    pub label: String,
    pub file: PathBuf,
    pub equalizer: Option<EqualizerKind>,
    pub metadata: Option<Metadata>,
}

/// BER of `a` and `b` compared point by point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOrdering {
    pub a: String,
    pub b: String,
    pub a_lower: Vec<f64>,
    pub b_lower: Vec<f64>,
    pub equal: Vec<f64>,
}

/// A grid point where a neural equalizer is not strictly better than a
/// linear one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingFlag {
    pub ebn0_db: f64,
    pub neural: String,
    pub neural_ber: f64,
    pub linear: String,
    pub linear_ber: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub curves: Vec<CurveSource>,
    pub ebn0_db: Vec<f64>,
    /// True when the inputs had different grids; only common points are kept.
    pub grid_mismatch: bool,
    pub dropped: BTreeMap<String, Vec<f64>>,
    /// Labels sorted by BER at every kept point.
    pub ranking: Vec<Vec<String>>,
    pub pairwise: Vec<PairOrdering>,
    pub flags: Vec<OrderingFlag>,
}

fn grid_key(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// Joins curve CSVs on Eb/N0 into `compare.csv` (one BER column per curve)
/// and `compare.json`.
pub fn cmd_compare(curves: &[PathBuf], out: &Path) -> Result<Comparison> {
    if curves.is_empty() {
        return Err(Error::Config("compare needs at least one curve file".into()));
    }
    ensure_dir(out)?;
    let mut sources = Vec::new();
    let mut tables: Vec<BTreeMap<i64, CurveRow>> = Vec::new();
    for path in curves {
        let (meta, rows): (Option<Metadata>, Vec<CurveRow>) = read_csv(path)?;
        let equalizer = meta.as_ref().map(|m| m.config.equalizer);
        let label = match &meta {
            Some(m) => m.config.equalizer.to_string(),
            None => path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
        };
        sources.push(CurveSource {
            label,
            file: path.clone(),
            equalizer,
            metadata: meta,
        });
        tables.push(rows.into_iter().map(|r| (grid_key(r.ebn0_db), r)).collect());
    }
    disambiguate(&mut sources);
    let common: Vec<i64> = tables[0]
        .keys()
        .copied()
        .filter(|k| tables.iter().all(|t| t.contains_key(k)))
        .collect();
    if common.is_empty() {
        return Err(Error::Config("the curves share no Eb/N0 point".into()));
    }
    let mut dropped = BTreeMap::new();
    for (s, t) in sources.iter().zip(&tables) {
        let extra: Vec<f64> = t.iter().filter(|(k, _)| !common.contains(k)).map(|(_, r)| r.ebn0_db).collect();
        if !extra.is_empty() {
            log::warn!("{}: Eb/N0 points {extra:?} are not in every curve and are dropped", s.file.display());
            dropped.insert(s.label.clone(), extra);
        }
    }
    let ebn0: Vec<f64> = common.iter().map(|k| tables[0][k].ebn0_db).collect();
    let ber = |i: usize, k: i64| tables[i][&k].ber;

    let mut table = vec![std::iter::once("ebn0_db".to_string())
        .chain(sources.iter().map(|s| s.label.clone()))
        .collect::<Vec<_>>()];
    let mut ranking = Vec::new();
    let mut flags = Vec::new();
    for (&k, &x) in common.iter().zip(&ebn0) {
        table.push(
            std::iter::once(x.to_string())
                .chain((0..sources.len()).map(|i| ber(i, k).to_string()))
                .collect(),
        );
        let mut order: Vec<usize> = (0..sources.len()).collect();
        order.sort_by(|&a, &b| ber(a, k).total_cmp(&ber(b, k)));
        ranking.push(order.iter().map(|&i| sources[i].label.clone()).collect());
        for (n, sn) in sources.iter().enumerate().filter(|(_, s)| s.equalizer.is_some_and(|e| e.is_neural())) {
            for (l, sl) in sources
                .iter()
                .enumerate()
                .filter(|(_, s)| matches!(s.equalizer, Some(EqualizerKind::Zf | EqualizerKind::Lmmse)))
            {
                if ber(n, k) >= ber(l, k) {
                    flags.push(OrderingFlag {
                        ebn0_db: x,
                        neural: sn.label.clone(),
                        neural_ber: ber(n, k),
                        linear: sl.label.clone(),
                        linear_ber: ber(l, k),
                    });
                }
            }
        }
    }
    let mut pairwise = Vec::new();
    for a in 0..sources.len() {
        for b in a + 1..sources.len() {
            let mut p = PairOrdering {
                a: sources[a].label.clone(),
                b: sources[b].label.clone(),
                a_lower: Vec::new(),
                b_lower: Vec::new(),
                equal: Vec::new(),
            };
            for (&k, &x) in common.iter().zip(&ebn0) {
                match ber(a, k).total_cmp(&ber(b, k)) {
                    std::cmp::Ordering::Less => p.a_lower.push(x),
                    std::cmp::Ordering::Greater => p.b_lower.push(x),
                    std::cmp::Ordering::Equal => p.equal.push(x),
                }
            }
            pairwise.push(p);
        }
    }
    let cmp = Comparison {
        curves: sources,
        ebn0_db: ebn0,
        grid_mismatch: !dropped.is_empty(),
        dropped,
        ranking,
        pairwise,
        flags,
    };
    let origin: Vec<_> = cmp.curves.iter().map(|s| &s.metadata).collect();
    write_table(&out.join("compare.csv"), Some(&serde_json::to_string(&origin)?), &table)?;
    write_json(&out.join("compare.json"), &cmp)?;
    update_summary(out, "compare", serde_json::to_value(&cmp)?)?;
    Ok(cmp)
}

/// Appends the channel, then a counter, to labels that occur twice.
fn disambiguate(sources: &mut [CurveSource]) {
    let count = |s: &[CurveSource], l: &str| s.iter().filter(|x| x.label == l).count();
    for i in 0..sources.len() {
        if count(sources, &sources[i].label) > 1 {
            if let Some(m) = &sources[i].metadata {
                sources[i].label = format!("{}_{}", sources[i].label, m.config.channel);
            }
        }
    }
    for i in 0..sources.len() {
        if count(sources, &sources[i].label) > 1 {
            sources[i].label = format!("{}_{i}", sources[i].label);
        }
    }
}
