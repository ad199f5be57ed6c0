//! Seeded multi-policy benchmark and its reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::episode::{run_episode_with, EpisodeLog, EpisodeOptions};
use crate::harness::Policy;

/// One episode's outcome, as written to the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub policy: Policy,
    pub objects: usize,
    pub seed: u64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub motions: usize,
    pub degenerate: bool,
}

impl EpisodeRow {
    fn of(log: &EpisodeLog) -> Self {
        Self {
            policy: log.policy,
            objects: log.objects,
            seed: log.scene_seed,
            tp: log.matches.tp,
            fp: log.matches.fp,
            fn_: log.matches.fn_,
            precision: log.metrics.precision,
            recall: log.metrics.recall,
            f1: log.metrics.f1,
            motions: log.motions,
            degenerate: log.metrics.degenerate,
        }
    }
}

/// Means over a group of episodes. `objects` is `None` for the
/// all-densities aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub policy: Policy,
    pub objects: Option<usize>,
    pub episodes: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub motions: f64,
}

impl Aggregate {
    fn of<'a>(policy: Policy, objects: Option<usize>, rows: impl Iterator<Item = &'a EpisodeRow>) -> Self {
        let rows: Vec<&EpisodeRow> = rows.collect();
        let n = rows.len().max(1) as f64;
        let mean = |f: fn(&EpisodeRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            policy,
            objects,
            episodes: rows.len(),
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            f1: mean(|r| r.f1),
            motions: mean(|r| r.motions as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub aggregates: Vec<Aggregate>,
    pub rows: Vec<EpisodeRow>,
}

impl BenchmarkReport {
    pub fn from_rows(config: ExperimentConfig, rows: Vec<EpisodeRow>) -> Self {
        let mut aggregates = Vec::new();
        for &policy in &config.policies {
            for &objects in &config.densities {
                aggregates.push(Aggregate::of(
                    policy,
                    Some(objects),
                    rows.iter().filter(|r| r.policy == policy && r.objects == objects),
                ));
            }
            aggregates.push(Aggregate::of(policy, None, rows.iter().filter(|r| r.policy == policy)));
        }
        Self { config, aggregates, rows }
    }

    /// Aggregate for `policy` over `objects`-object scenes, or over all.
    pub fn aggregate(&self, policy: Policy, objects: Option<usize>) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.policy == policy && a.objects == objects)
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        csv_text(w)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["policy", "objects", "episodes", "precision", "recall", "f1", "motions"])?;
        for a in &self.aggregates {
            let objects = a.objects.map_or_else(|| "all".to_string(), |n| n.to_string());
            w.write_record([
                a.policy.as_str().to_string(),
                objects,
                a.episodes.to_string(),
                a.precision.to_string(),
                a.recall.to_string(),
                a.f1.to_string(),
                a.motions.to_string(),
            ])?;
        }
        csv_text(w)
    }

    /// Human-readable table of the aggregates (percentages).
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<11} {:>7} {:>8} {:>9} {:>7} {:>7} {:>8}", "policy", "objects", "episodes", "precision", "recall", "f1", "motions");
        for a in &self.aggregates {
            let objects = a.objects.map_or_else(|| "all".to_string(), |n| n.to_string());
            let _ = writeln!(
                out,
                "{:<11} {:>7} {:>8} {:>9.2} {:>7.2} {:>7.2} {:>8.2}",
                a.policy.as_str(),
                objects,
                a.episodes,
                100.0 * a.precision,
                100.0 * a.recall,
                100.0 * a.f1,
                a.motions
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            what: "benchmark report",
            message: e.to_string(),
        })
    }
}

fn csv_text(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs every (density, policy, seed) episode on `jobs` worker threads.
/// Results do not depend on `jobs`.
pub fn run_benchmark(config: &ExperimentConfig, jobs: usize, out_dir: Option<&Path>) -> Result<BenchmarkReport> {
    let mut tasks = Vec::new();
    for &objects in &config.densities {
        let settings = config.settings(objects)?;
        for &policy in &config.policies {
            for k in 0..config.episodes {
                tasks.push((settings.clone(), policy, config.first_seed + k as u64));
            }
        }
    }
    let options = EpisodeOptions {
        heatmap_dir: match (config.heatmaps, out_dir) {
            (true, Some(dir)) => {
                let dir = dir.join("heatmaps");
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                Some(dir)
            }
            _ => None,
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let logs: Vec<EpisodeLog> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(settings, policy, seed)| run_episode_with(settings, *policy, *seed, &options))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = logs.iter().map(EpisodeRow::of).collect();
    let report = BenchmarkReport::from_rows(config.clone(), rows);
    if let Some(dir) = out_dir {
        write_report(&report, &logs, dir)?;
    }
    Ok(report)
}

/// Writes `results.csv`, `summary.csv`, `summary.txt`, `report.json` and one
/// JSON log per episode under `episodes/`.
pub fn write_report(report: &BenchmarkReport, logs: &[EpisodeLog], dir: &Path) -> Result<()> {
    let episodes = dir.join("episodes");
    std::fs::create_dir_all(&episodes).map_err(|e| Error::io(&episodes, e))?;
    let write = |path: std::path::PathBuf, text: String| std::fs::write(&path, text).map_err(|e| Error::io(&path, e));
    write(dir.join("results.csv"), report.rows_csv()?)?;
    write(dir.join("summary.csv"), report.summary_csv()?)?;
    write(dir.join("summary.txt"), report.summary_text())?;
    write(dir.join("report.json"), report.to_json()?)?;
    for log in logs {
        let name = format!("{}_{}_{}.json", log.policy, log.objects, log.scene_seed);
        write(episodes.join(name), log.to_json()?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            episodes: 2,
            densities: vec![5],
            policies: vec![Policy::None, Policy::Smart],
            width: 180,
            height: 128,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn aggregates_are_row_means() {
        let report = run_benchmark(&tiny(), 1, None).unwrap();
        assert_eq!(report.rows.len(), 4);
        for a in &report.aggregates {
            let rows: Vec<_> = report.rows.iter().filter(|r| r.policy == a.policy).collect();
            let f1 = rows.iter().map(|r| r.f1).sum::<f64>() / rows.len() as f64;
            assert!((a.f1 - f1).abs() < 1e-9);
            assert_eq!(a.episodes, 2);
        }
    }

    #[test]
    fn single_episode_report_has_one_row() {
        let cfg = ExperimentConfig {
            episodes: 1,
            policies: vec![Policy::None],
            ..tiny()
        };
        let report = run_benchmark(&cfg, 1, None).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows_csv().unwrap().lines().count(), 2);
    }
}
