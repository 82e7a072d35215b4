//! Experiment orchestration: single runs, paired multi-seed comparisons, and
//! the adversarial robustness experiment.
//!
//! Every (algorithm, seed) run is independent, so comparisons fan out over
//! rayon and are merged back in (algorithm, seed) order. Within a seed all
//! algorithms see the same arrivals and channel draws.

pub mod report;
pub mod stats;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError};
use crate::config::{Algorithm, ConfigError, ScenarioConfig};
use crate::env::{EnvError, EpisodeAccumulator, EpisodeMetrics, SliceAction, SlicingEnv};
use crate::radio::Slice;

pub use report::{emit_comparison, emit_robustness, emit_run, Format};
use stats::{mean, paired_t_greater, std_dev, PairedTest};

/// Fraction of the final episodes averaged into converged metrics.
pub const FINAL_WINDOW: f64 = 0.2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("the comparison needs q_learning as its baseline")]
    MissingBaseline,
    #[error("{0}")]
    Format(String),
}

/// Everything recorded by one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub scenario_hash: String,
    pub seed: u64,
    pub per_episode: Vec<EpisodeMetrics>,
    /// Not part of any deterministic output.
    pub wall_time_s: f64,
}

impl RunResult {
    /// Mean of each metric over the final window of episodes.
    pub fn final_window(&self) -> MetricSet {
        let n = window_len(self.per_episode.len());
        let tail = &self.per_episode[self.per_episode.len() - n..];
        let avg = |f: fn(&EpisodeMetrics) -> f64| mean(&tail.iter().map(f).collect::<Vec<_>>());
        MetricSet {
            reward: avg(|m| m.mean_reward),
            urllc_delay_ms: avg(|m| m.mean_urllc_delay_ms),
            embb_throughput_mbps: avg(|m| m.mean_embb_throughput_mbps),
            pdr: avg(|m| m.pdr_urllc),
        }
    }
}

/// Number of episodes in the final window: `ceil(0.2 * n)`, at least one
/// when there are any episodes.
pub fn window_len(episodes: usize) -> usize {
    if episodes == 0 {
        return 0;
    }
    ((episodes as f64 * FINAL_WINDOW).ceil() as usize).clamp(1, episodes)
}

/// The four reported metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub reward: f64,
    pub urllc_delay_ms: f64,
    pub embb_throughput_mbps: f64,
    pub pdr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Reward,
    UrllcDelay,
    EmbbThroughput,
    Pdr,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Reward,
        Metric::UrllcDelay,
        Metric::EmbbThroughput,
        Metric::Pdr,
    ];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Reward | Metric::EmbbThroughput)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Reward => "reward",
            Metric::UrllcDelay => "urllc_delay_ms",
            Metric::EmbbThroughput => "embb_throughput_mbps",
            Metric::Pdr => "pdr",
        }
    }
}

impl MetricSet {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Reward => self.reward,
            Metric::UrllcDelay => self.urllc_delay_ms,
            Metric::EmbbThroughput => self.embb_throughput_mbps,
            Metric::Pdr => self.pdr,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Metric) -> f64) -> Self {
        Self {
            reward: f(Metric::Reward),
            urllc_delay_ms: f(Metric::UrllcDelay),
            embb_throughput_mbps: f(Metric::EmbbThroughput),
            pdr: f(Metric::Pdr),
        }
    }

    /// Signed percentage improvement of `self` over `baseline`; positive is
    /// better in every metric.
    pub fn improvement_over(&self, baseline: &MetricSet) -> MetricSet {
        MetricSet::from_fn(|m| improvement(m, baseline.get(m), self.get(m)))
    }
}

/// Percentage by which `candidate` beats `baseline` on metric `m`. Zero when
/// the baseline is zero.
pub fn improvement(m: Metric, baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 {
        return 0.0;
    }
    let gain = if m.higher_is_better() {
        candidate - baseline
    } else {
        baseline - candidate
    };
    100.0 * gain / baseline.abs()
}

/// Per-TTI trace sink. Rows are appended in execution order.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub const HEADER: [&'static str; 12] = [
        "episode",
        "tti",
        "action",
        "r_embb",
        "r_urllc",
        "q_embb",
        "q_urllc",
        "reward",
        "delivered_embb",
        "delivered_urllc",
        "dropped_urllc",
        "explored",
    ];

    pub fn new(w: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(Self::HEADER)?;
        Ok(Self { inner })
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }

    /// Flushes and returns the underlying writer.
    pub fn into_inner(self) -> std::io::Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

/// Trains the configured agent for `num_episodes` episodes. The agent
/// persists across episodes and the environment is reset for each one.
pub fn train<W: Write>(
    config: &ScenarioConfig,
    mut trace: Option<&mut TraceWriter<W>>,
) -> Result<(RunResult, Agent), HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let cap = config.mdp.queue_cap;
    let num_rbg = config.radio.num_rbg;
    let mut agent = Agent::from_scenario(config)?;
    let mut per_episode = Vec::with_capacity(config.mdp.num_episodes);

    for episode in 0..config.mdp.num_episodes {
        let mut env = SlicingEnv::new(config, episode);
        let mut acc = EpisodeAccumulator::default();
        let mut obs = env.observation();
        for tti in 0..config.mdp.ttis_per_episode {
            let s = obs.index(cap);
            let choice = agent.act(s);
            let action = SliceAction::from_index(choice.action, num_rbg);
            let outcome = env.step(action)?;
            let s_next = outcome.observation.index(cap);
            agent.observe(s, choice.action, outcome.metrics.reward, s_next)?;
            acc.record(&outcome.metrics);
            if let Some(t) = trace.as_deref_mut() {
                let m = &outcome.metrics;
                t.inner
                    .write_record([
                        episode.to_string(),
                        tti.to_string(),
                        choice.action.to_string(),
                        action.r_embb.to_string(),
                        action.r_urllc.to_string(),
                        obs.q_embb.to_string(),
                        obs.q_urllc.to_string(),
                        m.reward.to_string(),
                        m.delivered_count(Slice::Embb).to_string(),
                        m.delivered_count(Slice::Urllc).to_string(),
                        m.dropped.urllc.to_string(),
                        u8::from(choice.explored).to_string(),
                    ])
                    .map_err(|e| HarnessError::Csv {
                        path: PathBuf::from("<trace>"),
                        source: e,
                    })?;
            }
            obs = outcome.observation;
        }
        agent.end_episode();
        per_episode.push(acc.finish(config));
    }

    let result = RunResult {
        algorithm: config.agent.algorithm,
        scenario_hash: config.digest(),
        seed: config.seed,
        per_episode,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((result, agent))
}

/// Runs one scenario without tracing.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, HarnessError> {
    train::<std::io::Sink>(config, None).map(|(r, _)| r)
}

/// Runs every configuration in parallel, returning results in input order.
pub fn run_many(configs: &[ScenarioConfig]) -> Result<Vec<RunResult>, HarnessError> {
    configs.par_iter().map(run).collect()
}

/// Aggregate of one algorithm's final-window metrics across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub mean: MetricSet,
    pub std: MetricSet,
    /// Final-window metrics of each seed, in seed order.
    pub per_seed: Vec<MetricSet>,
}

impl AlgorithmSummary {
    pub fn from_windows(algorithm: Algorithm, per_seed: Vec<MetricSet>) -> Self {
        let column = |m: Metric| per_seed.iter().map(|x| x.get(m)).collect::<Vec<_>>();
        Self {
            algorithm,
            mean: MetricSet::from_fn(|m| mean(&column(m))),
            std: MetricSet::from_fn(|m| std_dev(&column(m))),
            per_seed,
        }
    }

    pub fn column(&self, m: Metric) -> Vec<f64> {
        self.per_seed.iter().map(|x| x.get(m)).collect()
    }
}

/// One-sided paired test that `candidate` beats `baseline` on `m`.
pub fn paired_better(m: Metric, candidate: &[f64], baseline: &[f64]) -> PairedTest {
    if m.higher_is_better() {
        paired_t_greater(candidate, baseline)
    } else {
        paired_t_greater(baseline, candidate)
    }
}

/// Significance of one candidate-vs-baseline gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTest {
    pub candidate: Algorithm,
    pub baseline: Algorithm,
    pub metric: String,
    pub test: PairedTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    pub window_episodes: usize,
    pub algorithms: Vec<Algorithm>,
    pub per_algorithm: Vec<AlgorithmSummary>,
    /// Percent improvement of each algorithm's mean over the q_learning mean.
    pub relative_improvement: Vec<(Algorithm, MetricSet)>,
    /// Every algorithm against q_learning on every metric, plus each
    /// adjacent pair of the reward ordering.
    pub tests: Vec<GapTest>,
    pub runs: Vec<RunResult>,
}

impl ComparisonReport {
    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.per_algorithm.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn improvement(&self, algorithm: Algorithm) -> Option<&MetricSet> {
        self.relative_improvement
            .iter()
            .find(|(a, _)| *a == algorithm)
            .map(|(_, m)| m)
    }

    pub fn test(&self, candidate: Algorithm, baseline: Algorithm, m: Metric) -> Option<&PairedTest> {
        self.tests
            .iter()
            .find(|g| g.candidate == candidate && g.baseline == baseline && g.metric == m.as_str())
            .map(|g| &g.test)
    }
}

/// Runs every (algorithm, seed) pair on `config` and aggregates the final
/// window. `q_learning` must be among `algorithms`.
pub fn compare(
    config: &ScenarioConfig,
    algorithms: &[Algorithm],
    seeds: &[u64],
) -> Result<ComparisonReport, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::NoSeeds);
    }
    if !algorithms.contains(&Algorithm::QLearning) {
        return Err(HarnessError::MissingBaseline);
    }
    config.validate()?;
    let mut algorithms = algorithms.to_vec();
    algorithms.dedup();

    let jobs: Vec<ScenarioConfig> = algorithms
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| config.with_algorithm(a).with_seed(s)))
        .collect();
    let runs = run_many(&jobs)?;

    let per_algorithm: Vec<AlgorithmSummary> = algorithms
        .iter()
        .zip(runs.chunks(seeds.len()))
        .map(|(&a, chunk)| {
            AlgorithmSummary::from_windows(a, chunk.iter().map(RunResult::final_window).collect())
        })
        .collect();

    let baseline = per_algorithm
        .iter()
        .find(|s| s.algorithm == Algorithm::QLearning)
        .expect("baseline present");
    let relative_improvement = per_algorithm
        .iter()
        .map(|s| (s.algorithm, s.mean.improvement_over(&baseline.mean)))
        .collect();

    let mut tests = Vec::new();
    for s in &per_algorithm {
        if s.algorithm == Algorithm::QLearning {
            continue;
        }
        for m in Metric::ALL {
            tests.push(GapTest {
                candidate: s.algorithm,
                baseline: Algorithm::QLearning,
                metric: m.as_str().to_string(),
                test: paired_better(m, &s.column(m), &baseline.column(m)),
            });
        }
    }
    let ordered = [Algorithm::SelfPlayEnsemble, Algorithm::DoubleQ];
    if let (Some(sp), Some(dq)) = (
        per_algorithm.iter().find(|s| s.algorithm == ordered[0]),
        per_algorithm.iter().find(|s| s.algorithm == ordered[1]),
    ) {
        tests.push(GapTest {
            candidate: sp.algorithm,
            baseline: dq.algorithm,
            metric: Metric::Reward.as_str().to_string(),
            test: paired_better(
                Metric::Reward,
                &sp.column(Metric::Reward),
                &dq.column(Metric::Reward),
            ),
        });
    }

    Ok(ComparisonReport {
        scenario_hash: config.digest(),
        seeds: seeds.to_vec(),
        window_episodes: window_len(config.mdp.num_episodes),
        algorithms,
        per_algorithm,
        relative_improvement,
        tests,
        runs,
    })
}

/// Clean and corrupted arms for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEntry {
    pub algorithm: Algorithm,
    pub clean: AlgorithmSummary,
    pub corrupted: AlgorithmSummary,
    /// Percent degradation of the corrupted mean versus the clean mean;
    /// positive means worse in every metric.
    pub degradation: MetricSet,
    /// Per-seed percent reward degradation, in seed order.
    pub reward_degradation_per_seed: Vec<f64>,
    /// Paired test that the clean arm earns more reward than the corrupted one.
    pub reward_drop: PairedTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    pub window_episodes: usize,
    pub adversarial_table: Option<usize>,
    pub per_algorithm: Vec<RobustnessEntry>,
    /// Paired test that double Q-learning degrades more than the self-play
    /// ensemble on reward.
    pub self_play_less_degraded: PairedTest,
    pub runs: Vec<RunResult>,
}

impl RobustnessReport {
    pub fn entry(&self, algorithm: Algorithm) -> Option<&RobustnessEntry> {
        self.per_algorithm.iter().find(|e| e.algorithm == algorithm)
    }
}

/// Algorithms exercised by the robustness experiment.
pub const ROBUSTNESS_ALGORITHMS: [Algorithm; 2] = [Algorithm::DoubleQ, Algorithm::SelfPlayEnsemble];

/// Runs double Q-learning and the self-play ensemble clean and with table
/// `corrupt` under the adversarial update. `None` runs the null experiment
/// with both arms clean.
pub fn robustness_with(
    config: &ScenarioConfig,
    seeds: &[u64],
    corrupt: Option<usize>,
) -> Result<RobustnessReport, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::NoSeeds);
    }
    let mut jobs = Vec::new();
    for algorithm in ROBUSTNESS_ALGORITHMS {
        for adversary in [None, corrupt] {
            for &seed in seeds {
                let mut c = config.with_algorithm(algorithm).with_seed(seed);
                c.agent.adversarial_table = adversary;
                c.validate()?;
                jobs.push(c);
            }
        }
    }
    let runs = run_many(&jobs)?;
    let mut arms = runs.chunks(seeds.len()).map(|chunk| {
        chunk.iter().map(RunResult::final_window).collect::<Vec<_>>()
    });

    let mut per_algorithm = Vec::new();
    for algorithm in ROBUSTNESS_ALGORITHMS {
        let clean = AlgorithmSummary::from_windows(algorithm, arms.next().expect("clean arm"));
        let corrupted =
            AlgorithmSummary::from_windows(algorithm, arms.next().expect("corrupted arm"));
        let degradation = MetricSet::from_fn(|m| -improvement(m, clean.mean.get(m), corrupted.mean.get(m)));
        let reward_degradation_per_seed = clean
            .per_seed
            .iter()
            .zip(&corrupted.per_seed)
            .map(|(c, k)| -improvement(Metric::Reward, c.reward, k.reward))
            .collect();
        let reward_drop =
            paired_t_greater(&clean.column(Metric::Reward), &corrupted.column(Metric::Reward));
        per_algorithm.push(RobustnessEntry {
            algorithm,
            clean,
            corrupted,
            degradation,
            reward_degradation_per_seed,
            reward_drop,
        });
    }
    let self_play_less_degraded = paired_t_greater(
        &per_algorithm[0].reward_degradation_per_seed,
        &per_algorithm[1].reward_degradation_per_seed,
    );

    Ok(RobustnessReport {
        scenario_hash: config.digest(),
        seeds: seeds.to_vec(),
        window_episodes: window_len(config.mdp.num_episodes),
        adversarial_table: corrupt,
        per_algorithm,
        self_play_less_degraded,
        runs,
    })
}

/// The robustness experiment with table 0 corrupted.
pub fn robustness(
    config: &ScenarioConfig,
    seeds: &[u64],
) -> Result<RobustnessReport, HarnessError> {
    robustness_with(config, seeds, Some(0))
}
