//! Action selection: greedy with random tie-breaking, epsilon-greedy, and
//! majority voting across an ensemble of tables.

use rand::Rng;

use super::{AgentError, QTable};

/// The action an agent settled on for one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionChoice {
    pub action: usize,
    /// True when the action came from uniform exploration.
    pub explored: bool,
    /// Per-table votes, for ensemble decisions.
    pub votes: Option<Vec<usize>>,
}

impl ActionChoice {
    pub fn greedy(action: usize) -> Self {
        Self {
            action,
            explored: false,
            votes: None,
        }
    }
}

/// Uniform pick among `candidates`. A single candidate consumes no randomness.
pub fn uniform_among<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> usize {
    match candidates {
        [] => panic!("no candidates to choose from"),
        [only] => *only,
        _ => candidates[rng.random_range(0..candidates.len())],
    }
}

/// Indices holding the maximum of `row`.
pub fn argmax_set(row: &[f64]) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect()
}

pub fn greedy_from_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    uniform_among(&argmax_set(row), rng)
}

/// Argmax of the table row, ties broken uniformly from `tie_rng`.
pub fn greedy_action<R: Rng + ?Sized>(table: &QTable, state: usize, tie_rng: &mut R) -> usize {
    greedy_from_row(table.row(state), tie_rng)
}

/// With probability `epsilon` a uniform action from `explore_rng`, otherwise
/// the greedy action. One uniform draw is always taken from `explore_rng`, so
/// the stream advances the same way whatever the outcome.
pub fn epsilon_greedy_row<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    row: &[f64],
    epsilon: f64,
    explore_rng: &mut R1,
    tie_rng: &mut R2,
) -> ActionChoice {
    let u: f64 = explore_rng.random();
    if u < epsilon {
        ActionChoice {
            action: explore_rng.random_range(0..row.len()),
            explored: true,
            votes: None,
        }
    } else {
        ActionChoice::greedy(greedy_from_row(row, tie_rng))
    }
}

pub fn epsilon_greedy<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    table: &QTable,
    state: usize,
    epsilon: f64,
    explore_rng: &mut R1,
    tie_rng: &mut R2,
) -> ActionChoice {
    epsilon_greedy_row(table.row(state), epsilon, explore_rng, tie_rng)
}

/// Counts votes and returns the most-voted action, ties broken uniformly.
pub fn tally_votes<R: Rng + ?Sized>(votes: &[usize], num_actions: usize, rng: &mut R) -> usize {
    let mut counts = vec![0usize; num_actions];
    for &v in votes {
        counts[v] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    let winners: Vec<usize> = (0..num_actions).filter(|&a| counts[a] == best).collect();
    uniform_among(&winners, rng)
}

/// Every table votes for its greedy action; the most-voted action wins.
pub fn majority_vote<R: Rng + ?Sized>(
    tables: &[QTable],
    state: usize,
    tie_rng: &mut R,
) -> Result<ActionChoice, AgentError> {
    let first = tables.first().ok_or(AgentError::EmptyEnsemble)?;
    let votes: Vec<usize> = tables
        .iter()
        .map(|t| greedy_action(t, state, tie_rng))
        .collect();
    let action = tally_votes(&votes, first.actions(), tie_rng);
    Ok(ActionChoice {
        action,
        explored: false,
        votes: Some(votes),
    })
}
