//! Value-update rules: one-step Q-learning, double Q-learning, the corrupted
//! adversarial update, and the self-play blend over an ensemble.

use rand::Rng;

use super::policy::greedy_from_row;
use super::{AgentError, QTable};

/// One-step Q-learning target `r + gamma * max_a' Q(s', a')`.
pub fn q_target(table: &QTable, r: f64, s_next: usize, gamma: f64) -> f64 {
    r + gamma * table.max_value(s_next)
}

/// Moves `Q(s, a)` toward `target` by step `alpha`.
pub fn step_toward(table: &mut QTable, s: usize, a: usize, target: f64, alpha: f64) {
    let q = table.get(s, a);
    table.set(s, a, q + alpha * (target - q));
}

/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`.
pub fn q_update(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) {
    let target = q_target(table, r, s_next, gamma);
    step_toward(table, s, a, target, alpha);
}

/// Target used by a corrupted table: the bootstrap is the smallest next-state
/// value over the table itself and its partner.
pub fn adversarial_target(
    own: &QTable,
    partner: &QTable,
    r: f64,
    s_next: usize,
    gamma: f64,
) -> f64 {
    r + gamma * own.min_value(s_next).min(partner.min_value(s_next))
}

/// Index of the honest table the adversary pairs with.
pub fn partner_index(i: usize, n: usize) -> usize {
    (i + 1) % n
}

/// Applies the corrupted update to `tables[i]`, with `tables[(i + 1) % n]` as
/// the partner. No other table is written.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_update(
    tables: &mut [QTable],
    i: usize,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<(), AgentError> {
    let n = tables.len();
    if n < 2 {
        return Err(AgentError::AdversaryNeedsPartner { tables: n });
    }
    if i >= n {
        return Err(AgentError::TableOutOfRange { index: i, tables: n });
    }
    let target = adversarial_target(&tables[i], &tables[partner_index(i, n)], r, s_next, gamma);
    step_toward(&mut tables[i], s, a, target, alpha);
    Ok(())
}

/// Which of the two double-Q tables a step updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleSide {
    A,
    B,
}

impl DoubleSide {
    pub fn index(self) -> usize {
        match self {
            DoubleSide::A => 0,
            DoubleSide::B => 1,
        }
    }
}

/// The two tables of double Q-learning. Index 0 is table A.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleQState {
    pub tables: [QTable; 2],
    /// Table whose updates go through the adversarial rule, if any.
    pub adversarial_index: Option<usize>,
}

impl DoubleQState {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            tables: [QTable::zeros(states, actions), QTable::zeros(states, actions)],
            adversarial_index: None,
        }
    }

    pub fn table_a(&self) -> &QTable {
        &self.tables[0]
    }

    pub fn table_b(&self) -> &QTable {
        &self.tables[1]
    }

    /// Behaviour values: the mean of the two tables for one state.
    pub fn mean_row(&self, s: usize) -> Vec<f64> {
        self.tables[0]
            .row(s)
            .iter()
            .zip(self.tables[1].row(s))
            .map(|(a, b)| (a + b) / 2.0)
            .collect()
    }

    /// Updates the table picked by `side`. The updated table picks the next
    /// action and the other table evaluates it.
    #[allow(clippy::too_many_arguments)]
    pub fn update_side<R: Rng + ?Sized>(
        &mut self,
        side: DoubleSide,
        s: usize,
        a: usize,
        r: f64,
        s_next: usize,
        alpha: f64,
        gamma: f64,
        tie_rng: &mut R,
    ) {
        let (u, e) = match side {
            DoubleSide::A => (0, 1),
            DoubleSide::B => (1, 0),
        };
        if self.adversarial_index == Some(u) {
            let target = adversarial_target(&self.tables[u], &self.tables[e], r, s_next, gamma);
            step_toward(&mut self.tables[u], s, a, target, alpha);
            return;
        }
        let best = greedy_from_row(self.tables[u].row(s_next), tie_rng);
        let target = r + gamma * self.tables[e].get(s_next, best);
        step_toward(&mut self.tables[u], s, a, target, alpha);
    }
}

/// Flips the fair coin and updates the chosen table.
#[allow(clippy::too_many_arguments)]
pub fn double_q_update<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    state: &mut DoubleQState,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
    coin: &mut R1,
    tie_rng: &mut R2,
) -> DoubleSide {
    let side = if coin.random_bool(0.5) {
        DoubleSide::A
    } else {
        DoubleSide::B
    };
    state.update_side(side, s, a, r, s_next, alpha, gamma, tie_rng);
    side
}

/// Ensemble tables, their past snapshots, and per-table learning rates.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub tables: Vec<QTable>,
    pub snapshots: Vec<QTable>,
    pub per_table_alpha: Vec<f64>,
    pub beta: f64,
    pub adversarial_index: Option<usize>,
}

impl EnsembleState {
    pub fn new(
        states: usize,
        actions: usize,
        per_table_alpha: Vec<f64>,
        beta: f64,
        adversarial_index: Option<usize>,
    ) -> Self {
        let n = per_table_alpha.len();
        Self {
            tables: vec![QTable::zeros(states, actions); n],
            snapshots: vec![QTable::zeros(states, actions); n],
            per_table_alpha,
            beta,
            adversarial_index,
        }
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Updates every table on one transition. All targets are computed from
    /// the pre-step tables, so the result does not depend on table order.
    pub fn update(
        &mut self,
        s: usize,
        a: usize,
        r: f64,
        s_next: usize,
        gamma: f64,
    ) -> Result<(), AgentError> {
        let n = self.tables.len();
        if let Some(i) = self.adversarial_index {
            if n < 2 {
                return Err(AgentError::AdversaryNeedsPartner { tables: n });
            }
            if i >= n {
                return Err(AgentError::TableOutOfRange { index: i, tables: n });
            }
        }
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                if self.adversarial_index == Some(i) {
                    let partner = &self.tables[partner_index(i, n)];
                    adversarial_target(&self.tables[i], partner, r, s_next, gamma)
                } else {
                    q_target(&self.tables[i], r, s_next, gamma)
                }
            })
            .collect();
        for ((table, target), &alpha) in self.tables.iter_mut().zip(targets).zip(&self.per_table_alpha) {
            step_toward(table, s, a, target, alpha);
        }
        Ok(())
    }

    /// `Q_i <- (1 - beta) Q_i + beta Q_past_i` over every entry of every table.
    pub fn self_play_blend(&mut self) {
        let beta = self.beta;
        for (table, past) in self.tables.iter_mut().zip(&self.snapshots) {
            for (q, p) in table.values_mut().iter_mut().zip(past.values()) {
                *q = (1.0 - beta) * *q + beta * p;
            }
        }
    }

    /// Copies the current tables into the snapshots.
    pub fn snapshot(&mut self) {
        self.snapshots.clone_from(&self.tables);
    }
}
