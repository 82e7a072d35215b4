//! Report rendering and output.
//!
//! Episode CSV schema, one row per (algorithm, seed, episode):
//!
//! ```text
//! algorithm,seed,episode,reward,urllc_delay_ms,embb_throughput_mbps,pdr
//! q_learning,42,0,0.7315...,0.2934...,1.402...,0.0125...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a row gives
//! back the exact value that was written. Wall-clock time never appears in
//! CSV or summary output, keeping both byte-stable for equal inputs.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    ComparisonReport, HarnessError, Metric, MetricSet, RobustnessReport, RunResult,
};
use crate::config::Algorithm;
use crate::env::EpisodeMetrics;

pub const CSV_HEADER: [&str; 7] = [
    "algorithm",
    "seed",
    "episode",
    "reward",
    "urllc_delay_ms",
    "embb_throughput_mbps",
    "pdr",
];

/// Reference improvements of the self-play ensemble over Q-learning, in
/// percent, printed next to the measured values.
pub const REFERENCE_IMPROVEMENT: MetricSet = MetricSet {
    reward: f64::NAN,
    urllc_delay_ms: 21.92,
    embb_throughput_mbps: 24.22,
    pdr: 23.63,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Summary,
    Json,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "summary" | "summary-text" | "text" => Ok(Format::Summary),
            "json" => Ok(Format::Json),
            other => Err(HarnessError::Format(format!(
                "unknown format {other:?} (expected csv, summary or json)"
            ))),
        }
    }
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub episode: usize,
    pub metrics: EpisodeMetrics,
}

pub fn write_runs_csv<W: Write>(runs: &[RunResult], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for run in runs {
        for (episode, m) in run.per_episode.iter().enumerate() {
            out.write_record([
                run.algorithm.as_str().to_string(),
                run.seed.to_string(),
                episode.to_string(),
                m.mean_reward.to_string(),
                m.mean_urllc_delay_ms.to_string(),
                m.mean_embb_throughput_mbps.to_string(),
                m.pdr_urllc.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn runs_csv(runs: &[RunResult]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_runs_csv(runs, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// SHA-256 hex digest of the CSV rendering of `runs`.
pub fn csv_digest(runs: &[RunResult]) -> String {
    hex::encode(Sha256::digest(runs_csv(runs)))
}

pub fn read_runs_csv<R: Read>(r: R) -> Result<Vec<CsvRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let bad = |msg: String| HarnessError::Format(msg);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or_default();
        let num = |k: usize| -> Result<f64, HarnessError> {
            field(k)
                .parse()
                .map_err(|e| bad(format!("row {}: {}: {e}", i + 1, CSV_HEADER[k])))
        };
        rows.push(CsvRow {
            algorithm: field(0)
                .parse()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
            seed: field(1)
                .parse()
                .map_err(|e| bad(format!("row {}: seed: {e}", i + 1)))?,
            episode: field(2)
                .parse()
                .map_err(|e| bad(format!("row {}: episode: {e}", i + 1)))?,
            metrics: EpisodeMetrics {
                mean_reward: num(3)?,
                mean_urllc_delay_ms: num(4)?,
                mean_embb_throughput_mbps: num(5)?,
                pdr_urllc: num(6)?,
            },
        });
    }
    Ok(rows)
}

fn metric_line(out: &mut String, label: &str, mean: &MetricSet, std: &MetricSet) {
    let _ = writeln!(
        out,
        "  {label:<20} reward {:>9.4} ± {:<8.4} delay_ms {:>7.4} ± {:<7.4} thr_mbps {:>8.4} ± {:<7.4} pdr {:>7.4} ± {:.4}",
        mean.reward,
        std.reward,
        mean.urllc_delay_ms,
        std.urllc_delay_ms,
        mean.embb_throughput_mbps,
        std.embb_throughput_mbps,
        mean.pdr,
        std.pdr,
    );
}

pub fn run_summary(run: &RunResult) -> String {
    let w = run.final_window();
    let n = super::window_len(run.per_episode.len());
    let mut out = String::new();
    let _ = writeln!(out, "algorithm      {}", run.algorithm);
    let _ = writeln!(out, "seed           {}", run.seed);
    let _ = writeln!(out, "scenario       {}", run.scenario_hash);
    let _ = writeln!(out, "episodes       {}", run.per_episode.len());
    let _ = writeln!(out, "final window   {n} episodes");
    let _ = writeln!(out, "reward         {:.6}", w.reward);
    let _ = writeln!(out, "urllc delay    {:.6} ms", w.urllc_delay_ms);
    let _ = writeln!(out, "embb thr       {:.6} Mbps/UE", w.embb_throughput_mbps);
    let _ = writeln!(out, "urllc pdr      {:.6}", w.pdr);
    out
}

pub fn comparison_summary(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}", report.scenario_hash);
    let _ = writeln!(
        out,
        "{} seeds, final window {} episodes",
        report.seeds.len(),
        report.window_episodes
    );
    let _ = writeln!(out, "\nfinal-window mean ± std across seeds");
    for s in &report.per_algorithm {
        metric_line(&mut out, s.algorithm.as_str(), &s.mean, &s.std);
    }
    let _ = writeln!(out, "\nimprovement over q_learning (%), reference values in brackets");
    for (algo, imp) in &report.relative_improvement {
        if *algo == Algorithm::QLearning {
            continue;
        }
        let reference = |m: Metric| {
            let v = REFERENCE_IMPROVEMENT.get(m);
            if *algo == Algorithm::SelfPlayEnsemble && v.is_finite() {
                format!(" [{v:.2}]")
            } else {
                String::new()
            }
        };
        let _ = writeln!(
            out,
            "  {:<20} reward {:+.2}  latency {:+.2}{}  throughput {:+.2}{}  pdr {:+.2}{}",
            algo.as_str(),
            imp.reward,
            imp.urllc_delay_ms,
            reference(Metric::UrllcDelay),
            imp.embb_throughput_mbps,
            reference(Metric::EmbbThroughput),
            imp.pdr,
            reference(Metric::Pdr),
        );
    }
    let _ = writeln!(out, "\none-sided paired t-tests (candidate better than baseline)");
    for g in &report.tests {
        let _ = writeln!(
            out,
            "  {:<20} > {:<12} {:<22} diff {:+.5}  p {:.3e}",
            g.candidate.as_str(),
            g.baseline.as_str(),
            g.metric,
            g.test.mean_diff,
            g.test.p_value,
        );
    }
    out
}

pub fn robustness_summary(report: &RobustnessReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}", report.scenario_hash);
    let _ = writeln!(
        out,
        "{} seeds, final window {} episodes, corrupted table {}",
        report.seeds.len(),
        report.window_episodes,
        report
            .adversarial_table
            .map_or("none".to_string(), |i| i.to_string())
    );
    for e in &report.per_algorithm {
        let _ = writeln!(out, "\n{}", e.algorithm);
        metric_line(&mut out, "clean", &e.clean.mean, &e.clean.std);
        metric_line(&mut out, "corrupted", &e.corrupted.mean, &e.corrupted.std);
        let d = &e.degradation;
        let _ = writeln!(
            out,
            "  degradation (%)      reward {:+.2}  latency {:+.2}  throughput {:+.2}  pdr {:+.2}",
            d.reward, d.urllc_delay_ms, d.embb_throughput_mbps, d.pdr
        );
        let _ = writeln!(
            out,
            "  clean > corrupted reward: diff {:+.5}  p {:.3e}",
            e.reward_drop.mean_diff, e.reward_drop.p_value
        );
    }
    let t = &report.self_play_less_degraded;
    let _ = writeln!(
        out,
        "\ndouble_q degrades more than self_play_ensemble: diff {:+.3} pts  p {:.3e}",
        t.mean_diff, t.p_value
    );
    out
}

pub fn render_run(run: &RunResult, format: Format) -> Result<Vec<u8>, HarnessError> {
    Ok(match format {
        Format::Csv => runs_csv(std::slice::from_ref(run)),
        Format::Summary => run_summary(run).into_bytes(),
        Format::Json => serde_json::to_vec_pretty(run)?,
    })
}

pub fn render_comparison(report: &ComparisonReport, format: Format) -> Result<Vec<u8>, HarnessError> {
    Ok(match format {
        Format::Csv => runs_csv(&report.runs),
        Format::Summary => comparison_summary(report).into_bytes(),
        Format::Json => serde_json::to_vec_pretty(report)?,
    })
}

pub fn render_robustness(report: &RobustnessReport, format: Format) -> Result<Vec<u8>, HarnessError> {
    Ok(match format {
        Format::Csv => robustness_csv(&report.runs, report.seeds.len()),
        Format::Summary => robustness_summary(report).into_bytes(),
        Format::Json => serde_json::to_vec_pretty(report)?,
    })
}

/// Robustness CSV: the episode schema with an extra leading `arm` column.
fn robustness_csv(runs: &[RunResult], arm: usize) -> Vec<u8> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["arm"];
    header.extend(CSV_HEADER);
    out.write_record(&header).expect("in-memory write");
    for (k, run) in runs.iter().enumerate() {
        let label = if (k / arm).is_multiple_of(2) { "clean" } else { "corrupted" };
        for (episode, m) in run.per_episode.iter().enumerate() {
            out.write_record([
                label.to_string(),
                run.algorithm.as_str().to_string(),
                run.seed.to_string(),
                episode.to_string(),
                m.mean_reward.to_string(),
                m.mean_urllc_delay_ms.to_string(),
                m.mean_embb_throughput_mbps.to_string(),
                m.pdr_urllc.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    out.into_inner().expect("in-memory flush")
}

/// Writes `bytes` to `path`, attaching the path to any I/O error.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_run(run: &RunResult, path: &Path, format: Format) -> Result<(), HarnessError> {
    write_file(path, &render_run(run, format)?)
}

pub fn emit_comparison(
    report: &ComparisonReport,
    path: &Path,
    format: Format,
) -> Result<(), HarnessError> {
    write_file(path, &render_comparison(report, format)?)
}

pub fn emit_robustness(
    report: &RobustnessReport,
    path: &Path,
    format: Format,
) -> Result<(), HarnessError> {
    write_file(path, &render_robustness(report, format)?)
}
