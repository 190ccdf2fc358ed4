//! Experiment configuration: named presets, TOML overlays and profiles.
//!
//! Resolution order is preset, then the config file, then the profile, then
//! command-line overrides. Unknown keys and type errors are rejected by the
//! TOML reader with their line; semantic errors found afterwards are reported
//! at the line of the key that set the offending value.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::encoding::{DriveMode, TernaryEncoderConfig};
use crate::equalizers::{DfeArchitecture, EqualizerKind, TrainSchedule};
use crate::link::{Constellation, FirChannel};
use crate::snn::{Dynamics, LifParams, MembraneForm, ResetMode, SpikeFn, SurrogateSpec};
use crate::{Error, Result};

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 3] = ["proakis-a", "proakis-b", "proakis-c"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 200 epochs and three sweep points.
    Smoke,
    /// The full training schedule and grid.
    #[default]
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smoke" => Ok(Profile::Smoke),
            "full" => Ok(Profile::Full),
            other => Err(Error::Config(format!("unknown profile `{other}` (expected smoke or full)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Smoke => "smoke",
            Profile::Full => "full",
        })
    }
}

/// Monte-Carlo BER sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ebn0_db: Vec<f64>,
    /// A point stops once this many bit errors are counted...
    pub min_bit_errors: u64,
    /// ...or this many bits are simulated.
    pub max_bits: u64,
    /// Symbols per burst (MAP memory grows linearly with it).
    pub burst_symbols: usize,
    /// Bursts equalized together before the stopping rule is checked.
    pub bursts_per_round: usize,
    /// Concurrent sweep points; 0 uses every available core.
    pub workers: usize,
}

impl SweepConfig {
    fn for_grid(ebn0_db: Vec<f64>) -> Self {
        Self {
            ebn0_db,
            min_bit_errors: 500,
            max_bits: 10_000_000,
            burst_symbols: 4096,
            bursts_per_round: 8,
            workers: 0,
        }
    }
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

/// Fully resolved experiment description, echoed into every result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub channel: String,
    pub constellation: String,
    pub equalizer: EqualizerKind,
    pub seed: u64,
    pub architecture: DfeArchitecture,
    pub hidden: LifParams,
    pub readout: LifParams,
    pub dynamics: Dynamics,
    pub encoder: TernaryEncoderConfig,
    pub training: TrainSchedule,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    /// Architecture and neuron constants of one channel's row, SNN-DFE at
    /// 11 dB, seed 1.
    pub fn preset(name: &str) -> Result<Self> {
        let h = FirChannel::by_name(name)?;
        let architecture = DfeArchitecture::for_channel(h.name())?;
        let (constellation, ebn0) = match h.name() {
            "proakis-a" => ("qam16", grid(6.0, 22.0, 2.0)),
            _ => ("qpsk", grid(0.0, 16.0, 2.0)),
        };
        Ok(Self {
            profile: Profile::Full,
            channel: h.name().to_string(),
            constellation: constellation.to_string(),
            equalizer: EqualizerKind::SnnDfe,
            seed: 1,
            architecture,
            hidden: LifParams::HIDDEN,
            readout: LifParams::READOUT,
            dynamics: Dynamics::default(),
            encoder: TernaryEncoderConfig {
                m_bits: architecture.m_bits,
                y_max: TernaryEncoderConfig::default_y_max(h.energy()),
                drive_mode: DriveMode::Constant,
            },
            training: TrainSchedule::default(),
            sweep: SweepConfig::for_grid(ebn0),
        })
    }

    /// The preset of `channel`, or the `proakis-b` rows with `channel`
    /// substituted when it has no preset of its own.
    pub fn for_channel(channel: &str) -> Result<Self> {
        let h = FirChannel::by_name(channel)?;
        if DfeArchitecture::for_channel(h.name()).is_ok() {
            return Self::preset(h.name());
        }
        let mut cfg = Self::preset("proakis-b")?;
        cfg.channel = h.name().to_string();
        Ok(cfg)
    }

    /// Preset for `base`, overlaid with the TOML document `text`.
    ///
    /// Without `base` the file's `preset` key, then its `channel` key if it
    /// names a preset, then `proakis-b` select the preset. `source` names the
    /// document in errors.
    pub fn from_toml(text: &str, source: &str, base: Option<&str>) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {}", e.to_string().trim_end())))?;
        let mut lines = LineIndex::new(text);
        let name = match (base, &file.preset, &file.channel) {
            (Some(b), _, _) => b.to_string(),
            (None, Some(p), _) => {
                lines.record("preset", p.span());
                p.get_ref().clone()
            }
            (None, None, Some(c)) if DfeArchitecture::for_channel(c.get_ref()).is_ok() => c.get_ref().clone(),
            _ => "proakis-b".to_string(),
        };
        let mut cfg = Self::for_channel(&name).map_err(|e| lines.locate(source, "preset", e))?;
        file.apply(&mut cfg, &mut lines);
        cfg.check().map_err(|(key, msg)| lines.locate(source, &key, Error::Config(msg)))?;
        cfg.canonicalize()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, base: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string(), base)
    }

    /// Applies a profile: `Smoke` trains for 200 epochs and keeps the first,
    /// middle and last grid points.
    pub fn apply_profile(&mut self, profile: Profile) {
        self.profile = profile;
        if profile == Profile::Smoke {
            self.training.epochs = 200;
            let g = &self.sweep.ebn0_db;
            if g.len() > 3 {
                self.sweep.ebn0_db = vec![g[0], g[g.len() / 2], g[g.len() - 1]];
            }
        }
    }

    /// Normalizes the channel and constellation names.
    pub fn canonicalize(&mut self) -> Result<()> {
        self.channel = FirChannel::by_name(&self.channel)?.name().to_string();
        self.constellation = Constellation::by_name(&self.constellation)?.name().to_string();
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(key, msg)| Error::Config(format!("{key}: {msg}")))
    }

    fn check(&self) -> std::result::Result<(), (String, String)> {
        fn at(key: &str) -> impl Fn(Error) -> (String, String) + '_ {
            move |e| {
                let msg = match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                };
                (key.to_string(), msg)
            }
        }
        FirChannel::by_name(&self.channel).map_err(at("channel"))?;
        let c = Constellation::by_name(&self.constellation).map_err(at("constellation"))?;
        let a = &self.architecture;
        a.validate().map_err(at("architecture"))?;
        if c.size() != a.alphabet_size {
            return Err((
                "architecture.alphabet_size".into(),
                format!("{} does not match the {} points of {}", a.alphabet_size, c.size(), c.name()),
            ));
        }
        self.hidden.validate().map_err(at("hidden"))?;
        self.readout.validate().map_err(at("readout"))?;
        if !(self.dynamics.surrogate.slope > 0.0) || !self.dynamics.surrogate.slope.is_finite() {
            return Err(("dynamics.surrogate".into(), "slope must be positive".into()));
        }
        self.encoder.validate().map_err(at("encoder"))?;
        if self.encoder.m_bits != a.m_bits {
            return Err((
                "encoder.m_bits".into(),
                format!("encoder uses {} bits but architecture.m_bits is {}", self.encoder.m_bits, a.m_bits),
            ));
        }
        if self.training.epochs == 0 {
            return Err(("training.epochs".into(), "at least one epoch".into()));
        }
        self.training.validate().map_err(at("training"))?;
        let s = &self.sweep;
        if s.ebn0_db.is_empty() || s.ebn0_db.iter().any(|x| !x.is_finite()) {
            return Err(("sweep.ebn0_db".into(), "grid must be non-empty and finite".into()));
        }
        for (key, v) in [
            ("sweep.min_bit_errors", s.min_bit_errors),
            ("sweep.max_bits", s.max_bits),
            ("sweep.burst_symbols", s.burst_symbols as u64),
            ("sweep.bursts_per_round", s.bursts_per_round as u64),
        ] {
            if v == 0 {
                return Err((key.into(), "must be positive".into()));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Pretty TOML form, loadable with [`ExperimentConfig::from_toml`].
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Line of each key set by the file, keyed `section.field`.
struct LineIndex {
    starts: Vec<usize>,
    lines: HashMap<String, usize>,
}

impl LineIndex {
    fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self {
            starts,
            lines: HashMap::new(),
        }
    }

    fn record(&mut self, key: &str, span: std::ops::Range<usize>) {
        let line = self.starts.partition_point(|&s| s <= span.start);
        self.lines.insert(key.to_string(), line);
    }

    /// Attaches the line of `key`, or of its closest recorded parent.
    fn locate(&self, source: &str, key: &str, e: Error) -> Error {
        let msg = match e {
            Error::Config(m) => m,
            other => other.to_string(),
        };
        let mut k = key;
        loop {
            if let Some(line) = self.lines.get(k) {
                return Error::Config(format!("{source}:{line}: {key}: {msg}"));
            }
            match k.rfind('.') {
                Some(i) => k = &k[..i],
                None => return Error::Config(format!("{source}: {key}: {msg}")),
            }
        }
    }
}

macro_rules! patch {
    ($name:ident => $target:ty { $($field:ident: $ty:ty),* $(,)? }) => {
        #[derive(Debug, Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            $(#[serde(default)] $field: Option<Spanned<$ty>>,)*
        }

        impl $name {
            fn apply(self, section: &str, target: &mut $target, lines: &mut LineIndex) {
                $(
                    if let Some(v) = self.$field {
                        lines.record(&format!("{section}.{}", stringify!($field)), v.span());
                        target.$field = v.into_inner();
                    }
                )*
            }
        }
    };
}

patch!(ArchPatch => DfeArchitecture {
    n_ff: usize, m_fb: usize, m_bits: u32, alphabet_size: usize, n_hidden: usize, steps: usize,
});
patch!(NeuronPatch => LifParams { tau_m: f64, tau_s: f64, v_th: f64, v_rest: f64, dt: f64 });
patch!(DynamicsPatch => Dynamics {
    reset: ResetMode, membrane: MembraneForm, spike_fn: SpikeFn, surrogate: SurrogateSpec, self_connections: bool,
});
patch!(EncoderPatch => TernaryEncoderConfig { m_bits: u32, y_max: f64, drive_mode: DriveMode });
patch!(TrainingPatch => TrainSchedule {
    epochs: usize, burst_len: usize, lr0: f64, decay: f64, ebn0_db: f64, val_every: usize, val_symbols: usize,
});
patch!(SweepPatch => SweepConfig {
    ebn0_db: Vec<f64>, min_bit_errors: u64, max_bits: u64, burst_symbols: usize, bursts_per_round: usize, workers: usize,
});

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<Spanned<String>>,
    profile: Option<Spanned<Profile>>,
    channel: Option<Spanned<String>>,
    constellation: Option<Spanned<String>>,
    equalizer: Option<Spanned<EqualizerKind>>,
    seed: Option<Spanned<u64>>,
    architecture: Option<Spanned<ArchPatch>>,
    hidden: Option<Spanned<NeuronPatch>>,
    readout: Option<Spanned<NeuronPatch>>,
    dynamics: Option<Spanned<DynamicsPatch>>,
    encoder: Option<Spanned<EncoderPatch>>,
    training: Option<Spanned<TrainingPatch>>,
    sweep: Option<Spanned<SweepPatch>>,
}

fn take<T>(v: Option<Spanned<T>>, key: &str, lines: &mut LineIndex) -> Option<T> {
    v.map(|s| {
        lines.record(key, s.span());
        s.into_inner()
    })
}

impl ConfigFile {
    fn apply(self, cfg: &mut ExperimentConfig, lines: &mut LineIndex) {
        if let Some(p) = take(self.profile, "profile", lines) {
            cfg.apply_profile(p);
        }
        if let Some(c) = take(self.channel, "channel", lines) {
            cfg.channel = c;
        }
        if let Some(c) = take(self.constellation, "constellation", lines) {
            cfg.constellation = c;
        }
        if let Some(e) = take(self.equalizer, "equalizer", lines) {
            cfg.equalizer = e;
        }
        if let Some(s) = take(self.seed, "seed", lines) {
            cfg.seed = s;
        }
        if let Some(p) = take(self.architecture, "architecture", lines) {
            p.apply("architecture", &mut cfg.architecture, lines);
        }
        if let Some(p) = take(self.hidden, "hidden", lines) {
            p.apply("hidden", &mut cfg.hidden, lines);
        }
        if let Some(p) = take(self.readout, "readout", lines) {
            p.apply("readout", &mut cfg.readout, lines);
        }
        if let Some(p) = take(self.dynamics, "dynamics", lines) {
            p.apply("dynamics", &mut cfg.dynamics, lines);
        }
        if let Some(p) = take(self.encoder, "encoder", lines) {
            p.apply("encoder", &mut cfg.encoder, lines);
        }
        if let Some(p) = take(self.training, "training", lines) {
            p.apply("training", &mut cfg.training, lines);
        }
        if let Some(p) = take(self.sweep, "sweep", lines) {
            p.apply("sweep", &mut cfg.sweep, lines);
        }
    }
}
