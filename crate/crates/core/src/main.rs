use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iaqm::aqm::DisciplineKind;
use iaqm::harness::{
    compare_iaqm, obtain_predictor, parse_override, pretrain_predictor, retrain_demo, run_scenario, target_sweep,
    write_compare_csv, write_fit_report_csv, write_outcome, write_retrain_csv, write_sweep_csv, HarnessError,
    ScenarioConfig, DEFAULT_SWEEP_TARGETS_US,
};
use iaqm::predictor::Predictor;

#[derive(Parser)]
#[command(name = "iaqm", version, about = "ECN-driven learning AQM experiments on a simulated dumbbell")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (first seed for multi-seed commands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulated duration in seconds.
    #[arg(long = "duration-s", global = true)]
    duration_s: Option<u64>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override, global = true)]
    set: Vec<(String, String)>,
}

#[derive(Args, Clone)]
struct Multi {
    /// Number of consecutive seeds starting at the master seed.
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated disciplines.
    #[arg(long, value_delimiter = ',', default_value = "codel,fq_codel")]
    disciplines: Vec<DisciplineKind>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single scenario: epochs.csv and summary.csv.
    Run,
    /// Static target sweep: sweep.csv.
    Sweep {
        #[command(flatten)]
        multi: Multi,
        /// Comma-separated targets in microseconds.
        #[arg(long = "targets-us", value_delimiter = ',')]
        targets_us: Option<Vec<u64>>,
    },
    /// Intelligent vs static arms: compare.csv.
    Compare {
        #[command(flatten)]
        multi: Multi,
    },
    /// Pre-train the predictor: predictor.json and fit_report.csv.
    Pretrain,
    /// Re-train a predictor for one epoch on traffic from the random scenario.
    RetrainDemo,
}

fn load_config(common: &Common, defaults: &[(&str, &str)]) -> Result<ScenarioConfig, HarnessError> {
    // Command defaults go first so the file and flags can override them.
    let mut text: String = defaults.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    if let Some(p) = &common.config {
        text += &std::fs::read_to_string(p).map_err(|source| HarnessError::Io {
            path: p.clone(),
            source,
        })?;
    }
    let mut sets = common.set.clone();
    if let Some(s) = common.seed {
        sets.push(("seed".into(), s.to_string()));
    }
    if let Some(d) = common.duration_s {
        sets.push(("duration_s".into(), d.to_string()));
    }
    if let Some(o) = &common.out {
        sets.push(("out".into(), o.display().to_string()));
    }
    ScenarioConfig::from_sources(Some(&text), &sets)
}

fn seed_list(cfg: &ScenarioConfig, n: u64) -> Vec<u64> {
    (0..n).map(|i| cfg.seed + i).collect()
}

fn save_predictor(p: &Predictor<f64>, dir: &Path) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join("predictor.json");
    p.save(&path)?;
    Ok(path)
}

fn execute(cmd: Cmd, common: Common) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Run => {
            let cfg = load_config(&common, &[])?;
            let predictor = if cfg.intelligent { Some(obtain_predictor(&cfg)?) } else { None };
            let out = run_scenario(&cfg, predictor.as_ref())?;
            write_outcome(&cfg.out, &out)?;
            let s = &out.summary;
            println!(
                "{} intelligent={} seed={} mean_occ={:.3}% max_occ={:.2}% mrtt={:.2}ms thr={:.3}Mbps cum_power={:.4e}",
                s.discipline,
                s.intelligent,
                s.seed,
                s.mean_occupancy_pct,
                s.max_occupancy_pct,
                s.mean_mrtt_us / 1e3,
                s.mean_throughput_bps / 1e6,
                s.final_cumulative_power
            );
        }
        Cmd::Sweep { multi, targets_us } => {
            let cfg = load_config(&common, &[])?;
            let targets = targets_us.unwrap_or_else(|| DEFAULT_SWEEP_TARGETS_US.to_vec());
            let seeds = seed_list(&cfg, multi.seeds.unwrap_or(3));
            let pts = target_sweep(&cfg, &multi.disciplines, &targets, &seeds)?;
            write_sweep_csv(&cfg.out.join("sweep.csv"), &pts)?;
            for p in &pts {
                println!(
                    "{:<8} target={:>5}us mrtt={:.2}ms thr={:.3}Mbps occ={:.3}%",
                    p.discipline,
                    p.target_us,
                    p.mean_mrtt_us / 1e3,
                    p.mean_throughput_bps / 1e6,
                    p.mean_occupancy_pct
                );
            }
        }
        Cmd::Compare { multi } => {
            let cfg = load_config(&common, &[])?;
            let predictor = obtain_predictor(&cfg)?;
            let seeds = seed_list(&cfg, multi.seeds.unwrap_or(5));
            let rows = compare_iaqm(&cfg, &multi.disciplines, &seeds, &predictor)?;
            write_compare_csv(&cfg.out.join("compare.csv"), &rows)?;
            println!("{:<9} {:<12} {:>9} {:>9} {:>14}", "scheme", "arm", "avg occ%", "max occ%", "cum power");
            for r in rows.iter().filter(|r| r.scope == "mean") {
                println!(
                    "{:<9} {:<12} {:>9.2} {:>9.2} {:>14.4e}",
                    r.discipline, r.arm, r.mean_occupancy_pct, r.max_occupancy_pct, r.final_cumulative_power
                );
            }
        }
        Cmd::Pretrain => {
            let cfg = load_config(&common, &[])?;
            let t0 = std::time::Instant::now();
            let (p, report) = pretrain_predictor(&cfg)?;
            let path = save_predictor(&p, &cfg.out)?;
            write_fit_report_csv(&cfg.out.join("fit_report.csv"), &report)?;
            println!(
                "epochs={} rmse_train={:.4} rmse_test={:.4} mae_train={:.4} mae_test={:.4} checkpoint={} ({:.1}s)",
                report.epochs,
                report.rmse_train,
                report.rmse_test,
                report.mae_train,
                report.mae_test,
                path.display(),
                t0.elapsed().as_secs_f64()
            );
        }
        Cmd::RetrainDemo => {
            let cfg = load_config(&common, &[("scenario", "random")])?;
            let mut p = obtain_predictor(&cfg)?;
            let out = retrain_demo(&cfg, &mut p)?;
            write_retrain_csv(&cfg.out.join("retrain.csv"), &out)?;
            let trace_path = cfg.out.join("retrain_trace.csv");
            let file = std::fs::File::create(&trace_path).map_err(|source| HarnessError::Io {
                path: trace_path.clone(),
                source,
            })?;
            out.trace.write_csv(file)?;
            save_predictor(&p, &cfg.out)?;
            println!(
                "rmse_test before={:.4} after={:.4} retrain_wall={:.2}s",
                out.before.rmse_test,
                out.after.rmse_test,
                out.wall.as_secs_f64()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd, cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
