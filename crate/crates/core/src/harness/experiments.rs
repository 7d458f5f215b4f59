use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::aqm::DisciplineKind;
use crate::predictor::{ingest_trace, synth_trace, EceSeries, FitReport, Predictor};
use crate::simnet::{stream, sub_seed, SimTime};

use super::scenario::{run_scenario, write_rows, Summary};
use super::stats::mean;
use super::{Result, ScenarioConfig};

/// Targets of the sweep in microseconds; intervals are 20 times larger.
pub const DEFAULT_SWEEP_TARGETS_US: [u64; 6] = [50, 500, 1000, 2000, 4000, 6000];

/// Bin width and length of the ECE trace collected for a re-train.
pub const RETRAIN_BIN: SimTime = SimTime::from_millis(1);
pub const RETRAIN_WINDOW: SimTime = SimTime::from_secs(6);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub discipline: String,
    pub target_us: u64,
    pub interval_us: u64,
    pub seeds: usize,
    pub mean_mrtt_us: f64,
    pub mean_throughput_bps: f64,
    pub mean_power: f64,
    pub mean_occupancy_pct: f64,
}

/// Static runs of every (discipline, target, seed), averaged over seeds.
pub fn target_sweep(
    base: &ScenarioConfig,
    disciplines: &[DisciplineKind],
    targets_us: &[u64],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>> {
    let mut jobs = Vec::new();
    for &d in disciplines {
        for &t in targets_us {
            for &s in seeds {
                let mut c = base.clone();
                c.discipline = d;
                c.target = SimTime::from_micros(t);
                c.interval = SimTime::from_micros(20 * t);
                c.intelligent = false;
                c.seed = s;
                jobs.push(c);
            }
        }
    }
    let runs: Vec<Summary> = jobs
        .par_iter()
        .map(|c| run_scenario(c, None).map(|o| o.summary))
        .collect::<Result<_>>()?;
    let per_point = seeds.len().max(1);
    Ok(jobs
        .chunks(per_point)
        .zip(runs.chunks(per_point))
        .map(|(cfgs, sums)| {
            let avg = |f: fn(&Summary) -> f64| mean(&sums.iter().map(f).collect::<Vec<_>>());
            SweepPoint {
                discipline: cfgs[0].discipline.name().to_string(),
                target_us: cfgs[0].target.as_nanos() / 1000,
                interval_us: cfgs[0].interval.as_nanos() / 1000,
                seeds: sums.len(),
                mean_mrtt_us: avg(|s| s.mean_mrtt_us),
                mean_throughput_bps: avg(|s| s.mean_throughput_bps),
                mean_power: avg(|s| s.mean_power),
                mean_occupancy_pct: avg(|s| s.mean_occupancy_pct),
            }
        })
        .collect())
}

/// One row of the comparison. `scope` is `seed` for per-run rows and `mean`
/// for the across-seed averages.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub scope: String,
    pub seed: Option<u64>,
    pub discipline: String,
    pub arm: String,
    pub final_cumulative_power: f64,
    pub mean_occupancy_pct: f64,
    pub max_occupancy_pct: f64,
    pub mean_mrtt_us: f64,
    pub mean_throughput_bps: f64,
}

fn arm_name(intelligent: bool) -> &'static str {
    if intelligent {
        "intelligent"
    } else {
        "static"
    }
}

/// Static and intelligent arms of each discipline over the same seeds. The
/// static arm keeps the configured target and interval throughout.
pub fn compare_iaqm(
    base: &ScenarioConfig,
    disciplines: &[DisciplineKind],
    seeds: &[u64],
    predictor: &Predictor<f64>,
) -> Result<Vec<CompareRow>> {
    let mut jobs = Vec::new();
    for &d in disciplines {
        for intelligent in [false, true] {
            for &s in seeds {
                let mut c = base.clone();
                c.discipline = d;
                c.intelligent = intelligent;
                c.seed = s;
                jobs.push(c);
            }
        }
    }
    let runs: Vec<Summary> = jobs
        .par_iter()
        .map(|c| run_scenario(c, Some(predictor)).map(|o| o.summary))
        .collect::<Result<_>>()?;
    let mut rows: Vec<CompareRow> = runs
        .iter()
        .map(|s| CompareRow {
            scope: "seed".into(),
            seed: Some(s.seed),
            discipline: s.discipline.clone(),
            arm: arm_name(s.intelligent).into(),
            final_cumulative_power: s.final_cumulative_power,
            mean_occupancy_pct: s.mean_occupancy_pct,
            max_occupancy_pct: s.max_occupancy_pct,
            mean_mrtt_us: s.mean_mrtt_us,
            mean_throughput_bps: s.mean_throughput_bps,
        })
        .collect();
    let per_arm = seeds.len().max(1);
    let means: Vec<CompareRow> = rows
        .chunks(per_arm)
        .map(|g| {
            let avg = |f: fn(&CompareRow) -> f64| mean(&g.iter().map(f).collect::<Vec<_>>());
            CompareRow {
                scope: "mean".into(),
                seed: None,
                discipline: g[0].discipline.clone(),
                arm: g[0].arm.clone(),
                final_cumulative_power: avg(|r| r.final_cumulative_power),
                mean_occupancy_pct: avg(|r| r.mean_occupancy_pct),
                max_occupancy_pct: avg(|r| r.max_occupancy_pct),
                mean_mrtt_us: avg(|r| r.mean_mrtt_us),
                mean_throughput_bps: avg(|r| r.mean_throughput_bps),
            }
        })
        .collect();
    rows.extend(means);
    Ok(rows)
}

fn training_series(cfg: &ScenarioConfig) -> Result<EceSeries> {
    Ok(match &cfg.trace {
        Some(path) => ingest_trace(path, cfg.trace_interval)?,
        None => synth_trace(sub_seed(cfg.seed, "synth-trace"), cfg.synth_len, cfg.synth, cfg.trace_interval)?,
    })
}

/// Trains a fresh predictor on the configured trace (or a synthetic one) for
/// `predictor_epochs` epochs.
pub fn pretrain_predictor(cfg: &ScenarioConfig) -> Result<(Predictor<f64>, FitReport)> {
    let series = training_series(cfg)?;
    let mut p = Predictor::new(cfg.lstm, cfg.seed)?;
    let report = p.fit(&series, cfg.predictor_epochs, &mut stream(cfg.seed, "predictor-train"))?;
    Ok((p, report))
}

/// Loads `predictor_checkpoint` if set, otherwise pre-trains.
pub fn obtain_predictor(cfg: &ScenarioConfig) -> Result<Predictor<f64>> {
    match &cfg.predictor_checkpoint {
        Some(path) => Ok(Predictor::load(path)?),
        None => Ok(pretrain_predictor(cfg)?.0),
    }
}

#[derive(Clone, Debug)]
pub struct RetrainOutcome {
    pub before: FitReport,
    pub after: FitReport,
    /// Time spent in the re-train epoch (scoring included).
    pub wall: Duration,
    pub trace: EceSeries,
}

/// Runs the scenario until every flow has started, collects
/// [`RETRAIN_WINDOW`] of ECE counts in [`RETRAIN_BIN`] bins and re-trains
/// `predictor` for one epoch on them.
pub fn retrain_demo(cfg: &ScenarioConfig, predictor: &mut Predictor<f64>) -> Result<RetrainOutcome> {
    let mut c = cfg.clone();
    c.intelligent = false;
    c.ece_bin = RETRAIN_BIN;
    let warmup = match c.scenario {
        super::ScenarioKind::Random => c.random.start_s.1.ceil() as u64,
        super::ScenarioKind::Fixed => (c.start_jitter_ms / 1e3).ceil() as u64,
    };
    let window_bins = (RETRAIN_WINDOW.as_nanos() / RETRAIN_BIN.as_nanos()) as usize;
    c.duration_s = warmup + RETRAIN_WINDOW.as_nanos() / 1_000_000_000;
    let out = run_scenario(&c, None)?;
    let trace = EceSeries::new(RETRAIN_BIN, out.ece_bins[out.ece_bins.len() - window_bins..].to_vec());
    let t0 = Instant::now();
    let (before, after) = predictor.retrain_one_epoch(&trace, &mut stream(c.seed, "predictor-retrain"))?;
    Ok(RetrainOutcome {
        before,
        after,
        wall: t0.elapsed(),
        trace,
    })
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    write_rows(path, points)
}

pub fn write_compare_csv(path: &Path, rows: &[CompareRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_fit_report_csv(path: &Path, report: &FitReport) -> Result<()> {
    write_rows(path, std::slice::from_ref(report))
}

#[derive(Serialize)]
struct RetrainRow<'a> {
    phase: &'a str,
    rmse_train: f64,
    rmse_test: f64,
    mae_train: f64,
    mae_test: f64,
}

/// `before` and `after` error rows of a re-train.
pub fn write_retrain_csv(path: &Path, outcome: &RetrainOutcome) -> Result<()> {
    let row = |phase, r: &FitReport| RetrainRow {
        phase,
        rmse_train: r.rmse_train,
        rmse_test: r.rmse_test,
        mae_train: r.mae_train,
        mae_test: r.mae_test,
    };
    write_rows(path, &[row("before", &outcome.before), row("after", &outcome.after)])
}
