//! Sweep expansion, parallel execution and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use wpmec_core::sim::build_topology;
use wpmec_core::{run, Policy, RunOutput, RunSummary, Scenario};

use crate::config::{Config, SweepAxis};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SUMMARY_COLUMNS: [&str; 22] = [
    "sweep_axis",
    "sweep_value",
    "policy",
    "seed",
    "status",
    "slots",
    "steady_slots",
    "avg_energy",
    "avg_wpt_energy",
    "avg_edge_energy",
    "avg_queue",
    "avg_actual_queue",
    "avg_latency",
    "full_avg_energy",
    "full_avg_queue",
    "full_avg_actual_queue",
    "full_avg_latency",
    "wpt_duty",
    "gap_cert_max",
    "gap_violations",
    "diverging",
    "error",
];

pub const SERIES_COLUMNS: [&str; 7] = ["t", "avg_Q_eff", "avg_Q_act", "avg_placeholder", "total_battery", "e_wpt", "e_edge"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// One (sweep point, policy, seed) combination.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub sweep_value: Option<f64>,
    pub policy: Policy,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub job: Job,
    pub outcome: Result<RunOutput, String>,
}

impl RunRecord {
    pub fn summary(&self) -> Option<&RunSummary> {
        self.outcome.as_ref().ok().map(|o| &o.summary)
    }
}

/// Jobs ordered by sweep point, then policy, then seed, as listed in the config.
pub fn expand(cfg: &Config) -> Vec<Job> {
    let points: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for &sweep_value in &points {
        for &policy in &cfg.policies {
            for &seed in &cfg.seeds {
                jobs.push(Job { sweep_value, policy, seed });
            }
        }
    }
    jobs
}

/// The scenario a job simulates.
pub fn job_scenario(cfg: &Config, job: &Job) -> wpmec_core::Result<(Scenario, wpmec_core::Topology)> {
    let mut sys = cfg.sys.clone();
    let mut scale = cfg.arrival_scale;
    if let (Some(sweep), Some(x)) = (&cfg.sweep, job.sweep_value) {
        match sweep.axis {
            SweepAxis::Penalty => sys.penalty = x,
            SweepAxis::ArrivalScale => scale = x,
            SweepAxis::NumAps => sys.num_aps = x as usize,
            SweepAxis::NumDevices => sys.num_devices = x as usize,
            SweepAxis::Placeholders => sys.placeholders = x != 0.0,
        }
    }
    sys.rng_seed = job.seed;
    let mut dev = cfg.device.clone();
    dev.arrival_lo *= scale;
    dev.arrival_hi *= scale;
    let sc = Scenario::new(sys.clone(), vec![dev; sys.num_devices], vec![cfg.ap.clone(); sys.num_aps])?;
    Ok(build_topology(&sc, cfg.area_side))
}

fn execute_job(cfg: &Config, job: &Job) -> Result<RunOutput, String> {
    let (sc, topo) = job_scenario(cfg, job).map_err(|e| e.to_string())?;
    run(&sc, &topo, job.policy, &cfg.run_options()).map_err(|e| e.to_string())
}

/// Run every job on a pool of `cfg.workers` threads; records come back in job order.
pub fn execute(cfg: &Config) -> Result<Vec<RunRecord>, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let jobs = expand(cfg);
    Ok(pool.install(|| {
        jobs.into_par_iter()
            .map(|job| {
                let outcome = execute_job(cfg, &job);
                RunRecord { job, outcome }
            })
            .collect()
    }))
}

fn float(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn tag(cfg: &Config, job: &Job) -> String {
    match (&cfg.sweep, job.sweep_value) {
        (Some(s), Some(x)) => format!("{}-{}_{}_seed{}", s.axis.name(), x, job.policy, job.seed),
        _ => format!("{}_seed{}", job.policy, job.seed),
    }
}

pub fn summary_csv(cfg: &Config, records: &[RunRecord]) -> String {
    let mut out = SUMMARY_COLUMNS.join(",");
    out.push('\n');
    let axis = cfg.sweep.as_ref().map_or("none", |s| s.axis.name());
    for r in records {
        let value = r.job.sweep_value.map(|x| x.to_string()).unwrap_or_default();
        let _ = write!(out, "{axis},{value},{},{},", r.job.policy, r.job.seed);
        match &r.outcome {
            Ok(o) => {
                let s = &o.summary;
                let floats = [
                    s.avg_energy,
                    s.avg_wpt_energy,
                    s.avg_edge_energy,
                    s.avg_queue,
                    s.avg_actual_queue,
                    s.avg_latency,
                    s.full_avg_energy,
                    s.full_avg_queue,
                    s.full_avg_actual_queue,
                    s.full_avg_latency,
                    s.wpt_duty,
                    s.gap_cert_max,
                ];
                let floats: Vec<String> = floats.iter().map(|&x| float(x)).collect();
                let _ = writeln!(
                    out,
                    "ok,{},{},{},{},{},",
                    s.slots,
                    s.steady_slots,
                    floats.join(","),
                    s.gap_violations,
                    s.diverging
                );
            }
            Err(msg) => {
                let blanks = ",".repeat(SUMMARY_COLUMNS.len() - 6);
                let _ = writeln!(out, "aborted{blanks},{}", msg.replace([',', '\n'], ";"));
            }
        }
    }
    out
}

pub fn series_csv(output: &RunOutput) -> String {
    let mut out = SERIES_COLUMNS.join(",");
    let width = output.series.first().map_or(0, |p| p.batteries.len());
    for i in 0..width {
        let _ = write!(out, ",battery_{i}");
    }
    out.push('\n');
    for p in &output.series {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            p.slot,
            float(p.avg_q_eff),
            float(p.avg_q_act),
            float(p.avg_placeholder),
            float(p.total_battery),
            float(p.e_wpt),
            float(p.e_edge)
        );
        for &b in &p.batteries {
            let _ = write!(out, ",{}", float(b));
        }
        out.push('\n');
    }
    out
}

pub fn manifest(cfg: &Config) -> String {
    format!("# wpmec run manifest\n# code_version = {CODE_VERSION}\n{}", cfg.to_text())
}

fn write(path: PathBuf, contents: &str) -> Result<(), ExperimentError> {
    fs::write(&path, contents).map_err(|source| ExperimentError::Io { path, source })
}

/// Write the summary, manifest and (optionally) series files into `dir`.
pub fn write_outputs(cfg: &Config, records: &[RunRecord], dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.to_path_buf(), source })?;
    write(dir.join(SUMMARY_FILE), &summary_csv(cfg, records))?;
    write(dir.join(MANIFEST_FILE), &manifest(cfg))?;
    if cfg.write_series {
        for r in records {
            if let Ok(o) = &r.outcome {
                write(dir.join(format!("series_{}.csv", tag(cfg, &r.job))), &series_csv(o))?;
            }
        }
    }
    Ok(())
}

/// Execute and write everything; returns the records for inspection.
pub fn run_experiment(cfg: &Config) -> Result<Vec<RunRecord>, ExperimentError> {
    let records = execute(cfg)?;
    write_outputs(cfg, &records, &cfg.output)?;
    Ok(records)
}
