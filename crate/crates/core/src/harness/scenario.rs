use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::predictor::Predictor;
use crate::simnet::{stream, sub_seed, Network, NetworkConfig, SimTime, TopologySpec, CONTROL_PACKET_BYTES};
use crate::transport::CubicParams;
use crate::tuner::{raw_power, Agent, RewardSample};

use super::stats::mean;
use super::{io_err, Result, ScenarioConfig};

/// One decision epoch. Tuner columns are empty for static runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRow {
    pub epoch_index: u64,
    /// Mean ECE count per bin over the preceding epoch.
    pub observed_count: f64,
    pub state: Option<usize>,
    pub action: Option<usize>,
    pub target_us: u64,
    pub interval_us: u64,
    pub throughput_bps: f64,
    pub mrtt_us: f64,
    pub reward: f64,
    pub predicted_next: Option<f64>,
    pub occupancy_pct: f64,
    pub drops: u64,
    pub marks: u64,
    pub next_state: Option<usize>,
    pub occupancy_max_pct: f64,
    pub probes: usize,
    /// True when no probe completed and `mrtt_us` repeats the last value.
    pub mrtt_carried: bool,
    pub power: f64,
    pub cumulative_power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub discipline: String,
    pub intelligent: bool,
    pub seed: u64,
    pub epochs: u64,
    pub mean_occupancy_pct: f64,
    pub max_occupancy_pct: f64,
    pub mean_mrtt_us: f64,
    pub mean_throughput_bps: f64,
    pub mean_power: f64,
    pub final_cumulative_power: f64,
    pub reward_normalizer: f64,
    pub drops: u64,
    pub marks: u64,
    pub carried_epochs: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutcome {
    pub rows: Vec<EpochRow>,
    pub summary: Summary,
    /// ECE counts per bin for the whole run.
    pub ece_bins: Vec<u64>,
}

/// Idle round trip of a probe: both directions of the monitor B link, the
/// bottleneck and the monitor A link, each paying propagation plus one
/// serialization.
pub fn base_rtt(topo: &TopologySpec) -> SimTime {
    let one_way: SimTime = [topo.monitor_b, topo.bottleneck, topo.monitor_a]
        .iter()
        .map(|l| l.prop_delay + l.serialization(CONTROL_PACKET_BYTES))
        .fold(SimTime::ZERO, |a, b| a + b);
    one_way + one_way
}

/// Bottleneck rate over idle probe RTT, in bit/s^2.
pub fn reward_normalizer(topo: &TopologySpec) -> f64 {
    topo.bottleneck.bandwidth_bps as f64 / base_rtt(topo).as_secs_f64()
}

fn network_config(cfg: &ScenarioConfig, topology: TopologySpec) -> NetworkConfig {
    NetworkConfig {
        topology,
        discipline: cfg.discipline,
        aqm: cfg.aqm_params(),
        hosts_ecn: cfg.ecn_enabled,
        cubic: CubicParams::default(),
        ece_bin: cfg.ece_bin,
        probe_every: SimTime::from_nanos(cfg.tuner.epoch.as_nanos() / cfg.probes_per_epoch),
        hash_seed: sub_seed(cfg.seed, "fq-hash"),
    }
}

/// Runs one scenario for `cfg.duration_s` seconds. The intelligent loop needs
/// `predictor`; static runs ignore it and never retune the bottleneck.
pub fn run_scenario(cfg: &ScenarioConfig, predictor: Option<&Predictor<f64>>) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let topology = cfg.topology();
    let normalizer = reward_normalizer(&topology);
    let idle_rtt = base_rtt(&topology);
    let mut net = Network::new(network_config(cfg, topology));
    let mut agent = match (cfg.intelligent, predictor) {
        (true, Some(p)) => Some((Agent::<f64>::new(cfg.tuner, stream(cfg.seed, "tuner"))?, p)),
        (true, None) => {
            return Err(super::HarnessError::Config {
                key: "intelligent".into(),
                msg: "the intelligent loop needs a predictor".into(),
            })
        }
        (false, _) => None,
    };
    let bins = cfg.bins_per_epoch();
    let epoch = cfg.tuner.epoch;
    let mut rows = Vec::with_capacity(cfg.epochs() as usize);
    let mut last_mrtt = idle_rtt;
    let mut cumulative = 0.0;

    for e in 0..cfg.epochs() {
        let observed = {
            let all = net.ece_bins();
            let window = &all[all.len().saturating_sub(bins)..];
            if window.is_empty() {
                0.0
            } else {
                window.iter().sum::<u64>() as f64 / window.len() as f64
            }
        };
        let decision = match agent.as_mut() {
            Some((a, _)) => {
                let d = a.decide(observed);
                net.set_aqm_params(d.target, d.interval)?;
                Some(d)
            }
            None => None,
        };
        let params = net.bottleneck_queue().params();
        net.run_until(epoch.saturating_mul(e + 1));
        let stats = net.take_epoch();

        let (mrtt, carried) = match stats.mean_rtt() {
            Some(t) => (t, false),
            None => (last_mrtt, true),
        };
        last_mrtt = mrtt;
        let sample = RewardSample {
            throughput_bps: stats.throughput_bps(),
            mrtt_s: mrtt.as_secs_f64(),
        };
        let power = raw_power(sample)?;
        let reward = power / normalizer;
        cumulative += power;

        let (predicted, next_state) = match agent.as_mut() {
            Some((a, p)) => {
                let steps = p.model.config().steps;
                let all = net.ece_bins();
                let mut recent = vec![0.0; steps.saturating_sub(all.len())];
                recent.extend(all[all.len().saturating_sub(steps)..].iter().map(|&c| c as f64));
                let predicted = p.predict_next(&recent).max(0.0);
                (Some(predicted), Some(a.learn(reward, predicted)?))
            }
            None => (None, None),
        };

        rows.push(EpochRow {
            epoch_index: e,
            observed_count: observed,
            state: decision.map(|d| d.state),
            action: decision.map(|d| d.action),
            target_us: params.target.as_nanos() / 1000,
            interval_us: params.interval.as_nanos() / 1000,
            throughput_bps: sample.throughput_bps,
            mrtt_us: mrtt.as_micros_f64(),
            reward,
            predicted_next: predicted,
            occupancy_pct: stats.occupancy.mean_pct,
            drops: stats.drops,
            marks: stats.marks,
            next_state,
            occupancy_max_pct: stats.occupancy.max_pct,
            probes: stats.probe_rtts.len(),
            mrtt_carried: carried,
            power,
            cumulative_power: cumulative,
        });
    }

    let col = |f: fn(&EpochRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let summary = Summary {
        discipline: cfg.discipline.name().to_string(),
        intelligent: cfg.intelligent,
        seed: cfg.seed,
        epochs: rows.len() as u64,
        mean_occupancy_pct: mean(&col(|r| r.occupancy_pct)),
        max_occupancy_pct: col(|r| r.occupancy_max_pct).into_iter().fold(0.0, f64::max),
        mean_mrtt_us: mean(&col(|r| r.mrtt_us)),
        mean_throughput_bps: mean(&col(|r| r.throughput_bps)),
        mean_power: mean(&col(|r| r.power)),
        final_cumulative_power: cumulative,
        reward_normalizer: normalizer,
        drops: rows.iter().map(|r| r.drops).sum(),
        marks: rows.iter().map(|r| r.marks).sum(),
        carried_epochs: rows.iter().filter(|r| r.mrtt_carried).count() as u64,
    };
    let ece_bins = net.ece_bins().to_vec();
    Ok(ScenarioOutcome { rows, summary, ece_bins })
}

pub(crate) fn write_rows<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_epochs_csv(path: &Path, rows: &[EpochRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_summary_csv(path: &Path, summary: &Summary) -> Result<()> {
    write_rows(path, std::slice::from_ref(summary))
}

/// Writes `epochs.csv` and `summary.csv` into `dir`.
pub fn write_outcome(dir: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    write_epochs_csv(&dir.join("epochs.csv"), &outcome.rows)?;
    write_summary_csv(&dir.join("summary.csv"), &outcome.summary)
}
