use std::path::PathBuf;
use std::str::FromStr;

use crate::aqm::{AqmParams, DisciplineKind, DEFAULT_HARD_LIMIT};
use crate::predictor::{LstmConfig, SynthParams};
use crate::simnet::{stream, LinkSpec, RandomRanges, SimTime, TopologySpec};
use crate::tuner::TunerConfig;

use super::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Identical access links on both sides of a 20 Mbps bottleneck.
    Fixed,
    /// Random access links and start times around a 10 Mbps bottleneck.
    Random,
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(ScenarioKind::Fixed),
            "random" => Ok(ScenarioKind::Random),
            other => Err(format!("unknown scenario '{other}' (expected fixed or random)")),
        }
    }
}

/// Everything that determines one simulation run.
///
/// Text form is one `key = value` per line, `#` starts a comment. Keys carry
/// their unit as a suffix. See [`ScenarioConfig::KEYS`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub pairs: usize,
    pub host_b_bw_mbps: f64,
    pub host_b_delay_ms: f64,
    pub host_a_bw_mbps: f64,
    pub host_a_delay_ms: f64,
    pub bottleneck_bw_mbps: f64,
    pub bottleneck_delay_ms: f64,
    pub start_jitter_ms: f64,
    pub random: RandomRanges,
    pub discipline: DisciplineKind,
    pub ecn_enabled: bool,
    pub hard_limit_pkts: usize,
    pub target: SimTime,
    pub interval: SimTime,
    pub intelligent: bool,
    pub duration_s: u64,
    pub seed: u64,
    pub tuner: TunerConfig,
    pub ece_bin: SimTime,
    pub probes_per_epoch: u64,
    pub predictor_checkpoint: Option<PathBuf>,
    pub predictor_epochs: usize,
    pub lstm: LstmConfig,
    pub trace: Option<PathBuf>,
    pub trace_interval: SimTime,
    pub synth: SynthParams,
    pub synth_len: usize,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::preset(ScenarioKind::Fixed)
    }
}

fn ms(v: f64) -> SimTime {
    SimTime::from_secs_f64(v / 1e3)
}

impl ScenarioConfig {
    /// Recognized keys, in documentation order.
    pub const KEYS: &'static [&'static str] = &[
        "scenario",
        "pairs",
        "host_b_bw_mbps",
        "host_b_delay_ms",
        "host_a_bw_mbps",
        "host_a_delay_ms",
        "bottleneck_bw_mbps",
        "bottleneck_delay_ms",
        "start_jitter_ms",
        "random_bw_min_mbps",
        "random_bw_max_mbps",
        "random_delay_min_ms",
        "random_delay_max_ms",
        "random_start_min_s",
        "random_start_max_s",
        "discipline",
        "ecn_enabled",
        "hard_limit_pkts",
        "target_us",
        "interval_us",
        "intelligent",
        "duration_s",
        "seed",
        "alpha",
        "gamma",
        "epsilon",
        "epoch_ms",
        "ece_bin_ms",
        "probes_per_epoch",
        "predictor_checkpoint",
        "predictor_epochs",
        "lstm_hidden",
        "lstm_layers",
        "lstm_steps",
        "lstm_dropout",
        "trace",
        "trace_interval_ms",
        "synth_len",
        "synth_p_on",
        "synth_p_off",
        "synth_rate",
        "out",
    ];

    pub fn preset(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            scenario: kind,
            pairs: 20,
            host_b_bw_mbps: 200.0,
            host_b_delay_ms: 20.0,
            host_a_bw_mbps: 100.0,
            host_a_delay_ms: 0.0,
            bottleneck_bw_mbps: match kind {
                ScenarioKind::Fixed => 20.0,
                ScenarioKind::Random => 10.0,
            },
            bottleneck_delay_ms: 0.0,
            start_jitter_ms: 100.0,
            random: RandomRanges::default(),
            discipline: DisciplineKind::FqCodel,
            ecn_enabled: true,
            hard_limit_pkts: DEFAULT_HARD_LIMIT,
            target: SimTime::from_millis(5),
            interval: SimTime::from_millis(100),
            intelligent: false,
            duration_s: 300,
            seed: 1,
            tuner: TunerConfig::default(),
            ece_bin: SimTime::from_millis(100),
            probes_per_epoch: 10,
            predictor_checkpoint: None,
            predictor_epochs: 100,
            lstm: LstmConfig::default(),
            trace: None,
            trace_interval: SimTime::from_millis(100),
            synth: SynthParams::default(),
            synth_len: 6000,
            out: PathBuf::from("out"),
        }
    }

    /// Builds a config from `key = value` text followed by extra overrides.
    /// The `scenario` key, wherever it appears, selects the preset the other
    /// keys modify.
    pub fn from_sources(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut entries = match text {
            Some(t) => parse_entries(t)?,
            None => Vec::new(),
        };
        entries.extend(overrides.iter().cloned());
        let kind = match entries.iter().rev().find(|(k, _)| k == "scenario") {
            Some((k, v)) => v.parse().map_err(|msg| HarnessError::Config { key: k.clone(), msg })?,
            None => ScenarioKind::Fixed,
        };
        let mut cfg = ScenarioConfig::preset(kind);
        for (k, v) in &entries {
            if k != "scenario" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        ScenarioConfig::from_sources(Some(text), &[])
    }

    /// Assigns one key. Does not re-validate cross-field constraints.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: String| HarnessError::Config { key: key.to_string(), msg };
        let f = || value.parse::<f64>().map_err(|e| bad(format!("'{value}': {e}")));
        let u = || value.parse::<u64>().map_err(|e| bad(format!("'{value}': {e}")));
        let b = || parse_bool(value).ok_or_else(|| bad(format!("'{value}' is not a boolean")));
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "scenario" => {
                let kind: ScenarioKind = value.parse().map_err(bad)?;
                if kind != self.scenario {
                    return Err(bad("scenario must be chosen before other keys".into()));
                }
            }
            "pairs" => self.pairs = u()? as usize,
            "host_b_bw_mbps" => self.host_b_bw_mbps = f()?,
            "host_b_delay_ms" => self.host_b_delay_ms = f()?,
            "host_a_bw_mbps" => self.host_a_bw_mbps = f()?,
            "host_a_delay_ms" => self.host_a_delay_ms = f()?,
            "bottleneck_bw_mbps" => self.bottleneck_bw_mbps = f()?,
            "bottleneck_delay_ms" => self.bottleneck_delay_ms = f()?,
            "start_jitter_ms" => self.start_jitter_ms = f()?,
            "random_bw_min_mbps" => self.random.bw_mbps.0 = f()?,
            "random_bw_max_mbps" => self.random.bw_mbps.1 = f()?,
            "random_delay_min_ms" => self.random.delay_ms.0 = f()?,
            "random_delay_max_ms" => self.random.delay_ms.1 = f()?,
            "random_start_min_s" => self.random.start_s.0 = f()?,
            "random_start_max_s" => self.random.start_s.1 = f()?,
            "discipline" => self.discipline = value.parse().map_err(bad)?,
            "ecn_enabled" => self.ecn_enabled = b()?,
            "hard_limit_pkts" => self.hard_limit_pkts = u()? as usize,
            "target_us" => self.target = SimTime::from_micros(u()?),
            "interval_us" => self.interval = SimTime::from_micros(u()?),
            "intelligent" => self.intelligent = b()?,
            "duration_s" => self.duration_s = u()?,
            "seed" => self.seed = u()?,
            "alpha" => self.tuner.alpha = f()?,
            "gamma" => self.tuner.gamma = f()?,
            "epsilon" => self.tuner.epsilon = f()?,
            "epoch_ms" => self.tuner.epoch = SimTime::from_millis(u()?),
            "ece_bin_ms" => self.ece_bin = SimTime::from_millis(u()?),
            "probes_per_epoch" => self.probes_per_epoch = u()?,
            "predictor_checkpoint" => self.predictor_checkpoint = path(),
            "predictor_epochs" => self.predictor_epochs = u()? as usize,
            "lstm_hidden" => self.lstm.hidden = u()? as usize,
            "lstm_layers" => self.lstm.layers = u()? as usize,
            "lstm_steps" => self.lstm.steps = u()? as usize,
            "lstm_dropout" => self.lstm.dropout = f()?,
            "trace" => self.trace = path(),
            "trace_interval_ms" => self.trace_interval = SimTime::from_millis(u()?),
            "synth_len" => self.synth_len = u()? as usize,
            "synth_p_on" => self.synth.p_on = f()?,
            "synth_p_off" => self.synth.p_off = f()?,
            "synth_rate" => self.synth.rate = f()?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(HarnessError::Config { key: key.into(), msg: msg.into() });
        if self.pairs == 0 {
            return bad("pairs", "need at least one host pair");
        }
        for (key, v) in [
            ("host_b_bw_mbps", self.host_b_bw_mbps),
            ("host_a_bw_mbps", self.host_a_bw_mbps),
            ("bottleneck_bw_mbps", self.bottleneck_bw_mbps),
            ("random_bw_min_mbps", self.random.bw_mbps.0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, "bandwidth must be positive");
            }
        }
        for (key, v) in [
            ("host_b_delay_ms", self.host_b_delay_ms),
            ("host_a_delay_ms", self.host_a_delay_ms),
            ("bottleneck_delay_ms", self.bottleneck_delay_ms),
            ("start_jitter_ms", self.start_jitter_ms),
            ("random_delay_min_ms", self.random.delay_ms.0),
            ("random_start_min_s", self.random.start_s.0),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(key, "must be non-negative");
            }
        }
        for (key, (lo, hi)) in [
            ("random_bw_max_mbps", self.random.bw_mbps),
            ("random_delay_max_ms", self.random.delay_ms),
            ("random_start_max_s", self.random.start_s),
        ] {
            if !(hi.is_finite() && hi >= lo) {
                return bad(key, "upper bound below lower bound");
            }
        }
        AqmParams::new(self.target, self.interval, self.hard_limit_pkts, self.ecn_enabled)?;
        self.tuner.validate()?;
        if self.duration_s == 0 {
            return bad("duration_s", "must be at least one second");
        }
        let epoch = self.tuner.epoch.as_nanos();
        if epoch == 0 || self.ece_bin.as_nanos() == 0 || !epoch.is_multiple_of(self.ece_bin.as_nanos()) {
            return bad("ece_bin_ms", "must be positive and divide epoch_ms");
        }
        if !(self.duration_s * 1_000_000_000).is_multiple_of(epoch) {
            return bad("epoch_ms", "must divide the duration");
        }
        if self.probes_per_epoch == 0 || !epoch.is_multiple_of(self.probes_per_epoch) {
            return bad("probes_per_epoch", "must be positive and divide the epoch");
        }
        if self.predictor_epochs == 0 {
            return bad("predictor_epochs", "must be positive");
        }
        if self.synth_len <= self.lstm.steps {
            return bad("synth_len", "must exceed lstm_steps");
        }
        if self.trace_interval == SimTime::ZERO {
            return bad("trace_interval_ms", "must be positive");
        }
        self.lstm.validate()?;
        Ok(())
    }

    pub fn aqm_params(&self) -> AqmParams {
        AqmParams {
            target: self.target,
            interval: self.interval,
            hard_limit: self.hard_limit_pkts,
            ecn_enabled: self.ecn_enabled,
        }
    }

    pub fn b_link(&self) -> LinkSpec {
        LinkSpec::mbps(self.host_b_bw_mbps, ms(self.host_b_delay_ms))
    }

    pub fn a_link(&self) -> LinkSpec {
        LinkSpec::mbps(self.host_a_bw_mbps, ms(self.host_a_delay_ms))
    }

    pub fn bottleneck(&self) -> LinkSpec {
        LinkSpec::mbps(self.bottleneck_bw_mbps, ms(self.bottleneck_delay_ms))
    }

    /// Link parameters and start times, drawn from the seed for the random
    /// scenario. Monitors always use the `host_b`/`host_a` links.
    pub fn topology(&self) -> TopologySpec {
        let mut rng = stream(self.seed, "topology");
        match self.scenario {
            ScenarioKind::Fixed => TopologySpec::uniform(
                self.pairs,
                self.b_link(),
                self.a_link(),
                self.bottleneck(),
                ms(self.start_jitter_ms),
                &mut rng,
            ),
            ScenarioKind::Random => TopologySpec::randomized(
                self.pairs,
                self.random,
                self.bottleneck(),
                self.b_link(),
                self.a_link(),
                &mut rng,
            ),
        }
    }

    pub fn epochs(&self) -> u64 {
        self.duration_s * 1_000_000_000 / self.tuner.epoch.as_nanos()
    }

    pub fn bins_per_epoch(&self) -> usize {
        (self.tuner.epoch.as_nanos() / self.ece_bin.as_nanos()) as usize
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

/// Splits `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Syntax {
            line: i + 1,
            msg: format!("expected key = value, got '{line}'"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(HarnessError::Syntax { line: i + 1, msg: "empty key".into() });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses a `key=value` command-line override.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
