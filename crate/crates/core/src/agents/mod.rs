//! Tabular learners for the slicing controller.
//!
//! [`Agent`] wraps the four algorithms behind one `act` / `observe` /
//! `end_episode` interface. The building blocks (selection rules, update
//! rules, table storage) are public for direct use and testing.

pub mod policy;
pub mod qtable;
pub mod update;

use thiserror::Error;

use crate::config::{AgentConfig, Algorithm, ScenarioConfig};
use crate::rng::{rng_stream, SimRng, COIN, EXPLORATION, TIE_BREAK};

pub use policy::{epsilon_greedy, greedy_action, majority_vote, ActionChoice};
pub use qtable::{read_tables, write_tables, QTable, QTableError};
pub use update::{
    adversarial_update, double_q_update, q_update, DoubleQState, DoubleSide, EnsembleState,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("majority vote over an empty ensemble")]
    EmptyEnsemble,
    #[error("the adversary needs a partner table, but there are only {tables}")]
    AdversaryNeedsPartner { tables: usize },
    #[error("table index {index} out of range for {tables} tables")]
    TableOutOfRange { index: usize, tables: usize },
    #[error("{0} has no adversarial mode")]
    NoAdversary(Algorithm),
}

/// The agent's private random streams.
#[derive(Debug, Clone)]
pub struct AgentStreams {
    pub exploration: SimRng,
    pub tie_break: SimRng,
    pub coin: SimRng,
}

impl AgentStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            exploration: rng_stream(seed, EXPLORATION),
            tie_break: rng_stream(seed, TIE_BREAK),
            coin: rng_stream(seed, COIN),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Learner {
    Single(QTable),
    Double(DoubleQState),
    Ensemble(EnsembleState),
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    learner: Learner,
    streams: AgentStreams,
    episodes: usize,
}

impl Agent {
    pub fn new(
        config: &AgentConfig,
        states: usize,
        actions: usize,
        streams: AgentStreams,
    ) -> Result<Self, AgentError> {
        let learner = match config.algorithm {
            Algorithm::QLearning => {
                if config.adversarial_table.is_some() {
                    return Err(AgentError::NoAdversary(config.algorithm));
                }
                Learner::Single(QTable::zeros(states, actions))
            }
            Algorithm::DoubleQ => {
                if let Some(i) = config.adversarial_table {
                    if i >= 2 {
                        return Err(AgentError::TableOutOfRange { index: i, tables: 2 });
                    }
                }
                let mut dq = DoubleQState::new(states, actions);
                dq.adversarial_index = config.adversarial_table;
                Learner::Double(dq)
            }
            Algorithm::EnsembleMv | Algorithm::SelfPlayEnsemble => {
                let n = config.per_table_alpha.len();
                if n == 0 {
                    return Err(AgentError::EmptyEnsemble);
                }
                if let Some(i) = config.adversarial_table {
                    if n < 2 {
                        return Err(AgentError::AdversaryNeedsPartner { tables: n });
                    }
                    if i >= n {
                        return Err(AgentError::TableOutOfRange { index: i, tables: n });
                    }
                }
                Learner::Ensemble(EnsembleState::new(
                    states,
                    actions,
                    config.per_table_alpha.clone(),
                    config.beta,
                    config.adversarial_table,
                ))
            }
        };
        Ok(Self {
            config: config.clone(),
            learner,
            streams,
            episodes: 0,
        })
    }

    /// Agent for a scenario, with streams keyed by the scenario seed.
    pub fn from_scenario(scenario: &ScenarioConfig) -> Result<Self, AgentError> {
        Self::new(
            &scenario.agent,
            scenario.mdp.num_states(),
            scenario.num_actions(),
            AgentStreams::new(scenario.seed),
        )
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }

    pub fn episodes_completed(&self) -> usize {
        self.episodes
    }

    /// Picks the action for state `s`.
    pub fn act(&mut self, s: usize) -> ActionChoice {
        let AgentStreams {
            exploration,
            tie_break,
            ..
        } = &mut self.streams;
        let epsilon = self.config.epsilon;
        match &self.learner {
            Learner::Single(t) => epsilon_greedy(t, s, epsilon, exploration, tie_break),
            Learner::Double(dq) => {
                policy::epsilon_greedy_row(&dq.mean_row(s), epsilon, exploration, tie_break)
            }
            Learner::Ensemble(e) => match &self.config.per_table_epsilon {
                None => {
                    let u: f64 = rand::Rng::random(exploration);
                    if u < epsilon {
                        let actions = e.tables[0].actions();
                        ActionChoice {
                            action: rand::Rng::random_range(exploration, 0..actions),
                            explored: true,
                            votes: None,
                        }
                    } else {
                        majority_vote(&e.tables, s, tie_break)
                            .expect("ensemble is non-empty by construction")
                    }
                }
                // Each table votes epsilon-greedily with its own rate. The
                // choice counts as explored when any vote was.
                Some(rates) => {
                    let mut explored = false;
                    let votes: Vec<usize> = e
                        .tables
                        .iter()
                        .zip(rates)
                        .map(|(t, &eps)| {
                            let c = epsilon_greedy(t, s, eps, exploration, tie_break);
                            explored |= c.explored;
                            c.action
                        })
                        .collect();
                    let action = policy::tally_votes(&votes, e.tables[0].actions(), tie_break);
                    ActionChoice {
                        action,
                        explored,
                        votes: Some(votes),
                    }
                }
            },
        }
    }

    /// Learns from the transition `(s, a, r, s_next)`.
    pub fn observe(&mut self, s: usize, a: usize, r: f64, s_next: usize) -> Result<(), AgentError> {
        let gamma = self.config.gamma;
        match &mut self.learner {
            Learner::Single(t) => {
                q_update(t, s, a, r, s_next, self.config.alpha, gamma);
                Ok(())
            }
            Learner::Double(dq) => {
                double_q_update(
                    dq,
                    s,
                    a,
                    r,
                    s_next,
                    self.config.alpha,
                    gamma,
                    &mut self.streams.coin,
                    &mut self.streams.tie_break,
                );
                Ok(())
            }
            Learner::Ensemble(e) => e.update(s, a, r, s_next, gamma),
        }
    }

    /// Episode boundary. Self-play blends toward the last snapshot and then
    /// refreshes the snapshot on its cadence.
    pub fn end_episode(&mut self) {
        self.episodes += 1;
        if self.config.algorithm != Algorithm::SelfPlayEnsemble {
            return;
        }
        if let Learner::Ensemble(e) = &mut self.learner {
            e.self_play_blend();
            if self.episodes.is_multiple_of(self.config.snapshot_every) {
                e.snapshot();
            }
        }
    }

    /// Current tables with stable names, for dumps and comparisons.
    pub fn named_tables(&self) -> Vec<(String, &QTable)> {
        match &self.learner {
            Learner::Single(t) => vec![("q".to_string(), t)],
            Learner::Double(dq) => vec![
                ("q_a".to_string(), dq.table_a()),
                ("q_b".to_string(), dq.table_b()),
            ],
            Learner::Ensemble(e) => e
                .tables
                .iter()
                .enumerate()
                .map(|(i, t)| (format!("q{i}"), t))
                .collect(),
        }
    }

    /// Writes all current tables in the dump format.
    pub fn dump_tables<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let named = self.named_tables();
        let refs: Vec<(&str, &QTable)> = named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        write_tables(&refs, w)
    }
}
