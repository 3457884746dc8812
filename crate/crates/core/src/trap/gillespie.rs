use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::model::{Condition, Generator, TrapMarkovModel};
use super::stationary::stationary_distribution;
use crate::error::{Error, Result};
use crate::units::num;

/// Piecewise-constant illumination: each segment starts at `start_ms` and lasts
/// until the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSchedule {
    segments: Vec<(f64, Condition)>,
}

impl ConditionSchedule {
    pub fn constant(condition: Condition) -> Self {
        Self {
            segments: vec![(0.0, condition)],
        }
    }

    pub fn new(segments: Vec<(f64, Condition)>) -> Result<Self> {
        if segments.is_empty() || segments[0].0 != 0.0 {
            return Err(Error::domain("schedule must start with a segment at t = 0"));
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0))
            || segments.iter().any(|s| !s.0.is_finite())
        {
            return Err(Error::domain(
                "schedule start times must be finite and strictly increasing",
            ));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(f64, Condition)] {
        &self.segments
    }

    pub fn condition_at(&self, t_ms: f64) -> Condition {
        let i = self.segments.partition_point(|s| s.0 <= t_ms);
        self.segments[i.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapTrajectory {
    /// Entry time of each visited state; starts at 0.
    pub times_ms: Vec<f64>,
    pub states: Vec<usize>,
    pub duration_ms: f64,
    pub schedule: ConditionSchedule,
}

impl TrapTrajectory {
    pub fn jumps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state_at(&self, t_ms: f64) -> usize {
        let i = self.times_ms.partition_point(|&t| t <= t_ms);
        self.states[i.saturating_sub(1)]
    }

    /// Fraction of [t0, t1) spent in each of `n` states.
    pub fn occupancy(&self, n: usize, t0: f64, t1: f64) -> Vec<f64> {
        let mut occ = vec![0.0; n];
        if !(t1 > t0) {
            occ[self.state_at(t0)] = 1.0;
            return occ;
        }
        let start = self
            .times_ms
            .partition_point(|&t| t <= t0)
            .saturating_sub(1);
        for k in start..self.states.len() {
            let a = self.times_ms[k].max(t0);
            let b = self
                .times_ms
                .get(k + 1)
                .copied()
                .unwrap_or(self.duration_ms)
                .min(t1);
            if a >= t1 {
                break;
            }
            if b > a {
                occ[self.states[k]] += b - a;
            }
        }
        let total = t1 - t0;
        for v in &mut occ {
            *v /= total;
        }
        occ
    }

    /// Completed sojourns (ms) in `state`; the final, censored one is dropped.
    pub fn dwell_times(&self, state: usize) -> Vec<f64> {
        (0..self.states.len().saturating_sub(1))
            .filter(|&k| self.states[k] == state)
            .map(|k| self.times_ms[k + 1] - self.times_ms[k])
            .collect()
    }

    /// (t_ms, state) rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_ms,state\n");
        for (t, st) in self.times_ms.iter().zip(&self.states) {
            s.push_str(&format!("{},{st}\n", num(*t)));
        }
        s
    }
}

pub(crate) fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Initial state drawn from the stationary distribution of the first condition,
/// or the middle state when that is not unique.
pub(crate) fn default_initial_state<R: Rng>(g: &Generator, rng: &mut R) -> Result<usize> {
    let st = stationary_distribution(g)?;
    Ok(match st.unique {
        Some(p) => sample_index(&p, rng),
        None => g.n() / 2,
    })
}

/// Exact jump-process simulation under a piecewise-constant schedule.
pub fn simulate_trajectory<R: Rng>(
    model: &TrapMarkovModel,
    schedule: &ConditionSchedule,
    duration_ms: f64,
    initial_state: Option<usize>,
    rng: &mut R,
) -> Result<TrapTrajectory> {
    if !(duration_ms > 0.0 && duration_ms.is_finite()) {
        return Err(Error::domain(format!(
            "duration must be > 0 ms (got {duration_ms})"
        )));
    }
    model.validate()?;
    let n = model.n_states();
    let mut gens = Vec::with_capacity(schedule.segments.len());
    for &(_, c) in &schedule.segments {
        gens.push(model.generator(c)?);
    }
    let mut state = match initial_state {
        Some(s) if s < n => s,
        Some(s) => return Err(Error::domain(format!("initial state {s} out of range"))),
        None => default_initial_state(&gens[0], rng)?,
    };
    let mut times = vec![0.0];
    let mut states = vec![state];
    let mut t = 0.0;
    let mut seg = 0;
    let mut weights = vec![0.0; n];
    while t < duration_ms {
        let seg_end = schedule
            .segments
            .get(seg + 1)
            .map_or(duration_ms, |s| s.0)
            .min(duration_ms);
        let g = &gens[seg];
        let exit_per_ms = g.exit_rate(state) * 1e-3;
        let tau = if exit_per_ms > 0.0 {
            Exp::new(exit_per_ms).unwrap().sample(rng)
        } else {
            f64::INFINITY
        };
        if t + tau >= seg_end {
            t = seg_end;
            seg += 1;
            if seg >= gens.len() {
                break;
            }
            continue;
        }
        t += tau;
        for (j, w) in weights.iter_mut().enumerate() {
            *w = if j == state { 0.0 } else { g.rate(state, j) };
        }
        state = sample_index(&weights, rng);
        if t > *times.last().unwrap() {
            times.push(t);
            states.push(state);
        } else {
            *states.last_mut().unwrap() = state;
        }
    }
    Ok(TrapTrajectory {
        times_ms: times,
        states,
        duration_ms,
        schedule: schedule.clone(),
    })
}
