use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Dark,
    Repump,
    Resonant,
    Depleted,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Dark => "dark",
            Condition::Repump => "repump",
            Condition::Resonant => "resonant",
            Condition::Depleted => "depleted",
        };
        f.write_str(s)
    }
}

/// Continuous-time Markov generator Q (rates in s⁻¹, rows sum to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    n: usize,
    q: Vec<f64>,
}

impl Generator {
    /// Builds Q from its off-diagonal rates; diagonal entries of `rates` must
    /// be either 0 or already equal to minus the row sum.
    pub fn from_rates(rates: &[Vec<f64>]) -> Result<Self> {
        let n = rates.len();
        if n == 0 {
            return Err(Error::domain("generator needs at least one state"));
        }
        let mut q = vec![0.0; n * n];
        for (i, row) in rates.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "rate matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            let mut exit = 0.0;
            for (j, &r) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::domain(format!(
                        "rate {i}->{j} must be finite and >= 0 (got {r})"
                    )));
                }
                q[i * n + j] = r;
                exit += r;
            }
            let d = row[i];
            if d != 0.0 && (d + exit).abs() > 1e-9 * exit.max(1.0) {
                return Err(Error::domain(format!(
                    "row {i} of the generator does not sum to zero (diagonal {d}, exit rate {exit})"
                )));
            }
            q[i * n + i] = -exit;
        }
        Ok(Self { n, q })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            q: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rate i → j in s⁻¹ (diagonal: minus the exit rate).
    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[i * self.n + i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            q: self.q.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.q[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }
}

/// Single charge trap with equally spaced Stark-shifted lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapMarkovModel {
    /// Opaque state labels; index i produces line i+1.
    pub labels: Vec<String>,
    pub line_spacing_mhz: f64,
    /// Off-diagonal rate matrices (s⁻¹) per illumination condition.
    pub rates_per_s: BTreeMap<Condition, Vec<Vec<f64>>>,
}

impl Default for TrapMarkovModel {
    fn default() -> Self {
        let mut rates = BTreeMap::new();
        rates.insert(
            Condition::Dark,
            vec![
                vec![0.0, 100.0, 0.0],
                vec![0.0, 0.0, 40.0],
                vec![0.0, 200.0, 0.0],
            ],
        );
        rates.insert(
            Condition::Repump,
            vec![
                vec![0.0, 1000.0, 0.0],
                vec![1000.0, 0.0, 0.0],
                vec![0.0, 2000.0, 0.0],
            ],
        );
        rates.insert(
            Condition::Resonant,
            vec![
                vec![0.0, 50.0, 0.0],
                vec![0.0, 0.0, 1000.0],
                vec![0.0, 50.0, 0.0],
            ],
        );
        rates.insert(Condition::Depleted, vec![vec![0.0; 3]; 3]);
        Self {
            labels: vec!["2-".into(), "-".into(), "0".into()],
            line_spacing_mhz: 400.0,
            rates_per_s: rates,
        }
    }
}

impl TrapMarkovModel {
    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::validation("trap.labels", "need at least one state"));
        }
        if !self.line_spacing_mhz.is_finite() {
            return Err(Error::validation("trap.line_spacing_mhz", "must be finite"));
        }
        for (c, rows) in &self.rates_per_s {
            let path = format!("trap.rates_per_s.{c}");
            if rows.len() != self.n_states() {
                return Err(Error::validation(
                    path,
                    format!("expected a {0}x{0} matrix", self.n_states()),
                ));
            }
            Generator::from_rates(rows).map_err(|e| Error::validation(path, e.to_string()))?;
        }
        Ok(())
    }

    pub fn generator(&self, condition: Condition) -> Result<Generator> {
        let rows = self.rates_per_s.get(&condition).ok_or_else(|| {
            Error::validation(
                format!("trap.rates_per_s.{condition}"),
                "no rates given for this condition",
            )
        })?;
        Generator::from_rates(rows)
    }

    /// Line shifts (MHz) of the states: equally spaced and centred on zero.
    pub fn line_shifts_mhz(&self) -> Vec<f64> {
        let n = self.n_states();
        let mid = 0.5 * (n as f64 - 1.0);
        (0..n)
            .map(|i| (i as f64 - mid) * self.line_spacing_mhz)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_depleted_is_frozen() {
        let m = TrapMarkovModel::default();
        m.validate().unwrap();
        assert!(m.generator(Condition::Depleted).unwrap().is_zero());
        assert_eq!(m.line_shifts_mhz(), vec![-400.0, 0.0, 400.0]);
    }

    #[test]
    fn rows_sum_to_zero() {
        let g = TrapMarkovModel::default()
            .generator(Condition::Repump)
            .unwrap();
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| g.rate(i, j)).sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn bad_rates_rejected() {
        assert!(Generator::from_rates(&[vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(Generator::from_rates(&[vec![-5.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(Generator::from_rates(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).is_ok());
        assert!(Generator::from_rates(&[vec![0.0, 1.0]]).is_err());
    }
}
