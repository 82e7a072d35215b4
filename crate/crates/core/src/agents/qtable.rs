//! Dense state-by-action value table and its flat text dump format.
//!
//! The dump format is line oriented:
//!
//! ```text
//! # sliceq-qtable v1
//! # table q0 states 121 actions 14
//! 0 0 0.5
//! 0 1 -0.25
//! ...
//! ```
//!
//! Each data line is `state action value`. A file may hold several tables,
//! each introduced by its own `# table` header. Other `#` lines and blank
//! lines are ignored. Values are written in Rust's shortest round-trip
//! decimal form.

use std::io::{BufRead, Write};

use thiserror::Error;

const MAGIC: &str = "# sliceq-qtable v1";

#[derive(Debug, Error)]
pub enum QTableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    /// All-zero table.
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            values: vec![0.0; states * actions],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let actions = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == actions), "ragged rows");
        Self {
            states: rows.len(),
            actions,
            values: rows.concat(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.states == other.states && self.actions == other.actions
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn write_body<W: Write>(&self, name: &str, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "# table {name} states {} actions {}",
            self.states, self.actions
        )?;
        for s in 0..self.states {
            for a in 0..self.actions {
                writeln!(w, "{s} {a} {}", self.get(s, a))?;
            }
        }
        Ok(())
    }

    pub fn dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write_tables(&[("q", self)], w)
    }

    /// Reads a single-table dump.
    pub fn load<R: BufRead>(r: R) -> Result<QTable, QTableError> {
        let mut tables = read_tables(r)?;
        if tables.len() != 1 {
            return Err(QTableError::Parse {
                line: 0,
                msg: format!("expected one table, found {}", tables.len()),
            });
        }
        Ok(tables.remove(0).1)
    }
}

/// Writes several named tables into one dump.
pub fn write_tables<W: Write>(tables: &[(&str, &QTable)], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    for (name, t) in tables {
        t.write_body(name, w)?;
    }
    Ok(())
}

/// Parses a dump written by [`write_tables`]. Every entry of every table must
/// appear exactly once.
pub fn read_tables<R: BufRead>(r: R) -> Result<Vec<(String, QTable)>, QTableError> {
    let mut tables: Vec<(String, QTable, Vec<bool>)> = Vec::new();
    let err = |line: usize, msg: String| QTableError::Parse { line, msg };

    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# table ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let (name, states, actions) = match parts.as_slice() {
                [name, "states", s, "actions", a] => (
                    name.to_string(),
                    s.parse::<usize>()
                        .map_err(|e| err(lineno, format!("bad state count: {e}")))?,
                    a.parse::<usize>()
                        .map_err(|e| err(lineno, format!("bad action count: {e}")))?,
                ),
                _ => return Err(err(lineno, format!("malformed table header {line:?}"))),
            };
            tables.push((name, QTable::zeros(states, actions), vec![false; states * actions]));
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some((_, table, seen)) = tables.last_mut() else {
            return Err(err(lineno, "data before any table header".into()));
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [s, a, v] = fields.as_slice() else {
            return Err(err(lineno, format!("expected `state action value`, got {line:?}")));
        };
        let s: usize = s.parse().map_err(|e| err(lineno, format!("bad state: {e}")))?;
        let a: usize = a.parse().map_err(|e| err(lineno, format!("bad action: {e}")))?;
        let v: f64 = v.parse().map_err(|e| err(lineno, format!("bad value: {e}")))?;
        if s >= table.states() || a >= table.actions() {
            return Err(err(lineno, format!("entry ({s}, {a}) out of range")));
        }
        if !v.is_finite() {
            return Err(err(lineno, format!("non-finite value {v}")));
        }
        let k = s * table.actions() + a;
        if std::mem::replace(&mut seen[k], true) {
            return Err(err(lineno, format!("duplicate entry ({s}, {a})")));
        }
        table.set(s, a, v);
    }

    tables
        .into_iter()
        .map(|(name, table, seen)| {
            if seen.iter().all(|&x| x) {
                Ok((name, table))
            } else {
                Err(err(0, format!("table {name} is missing entries")))
            }
        })
        .collect()
}
