use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::PopulationState;

/// Time-stamped states produced by an integrator, with optional event tags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<PopulationState>,
    events: Vec<Option<String>>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample. Times must be strictly increasing.
    pub fn push(&mut self, t: f64, state: PopulationState, event: Option<String>) -> Result<()> {
        if let Some(&prev) = self.times.last() {
            if t <= prev {
                return Err(Error::NonIncreasingTime { prev, next: t });
            }
        }
        self.times.push(t);
        self.states.push(state);
        self.events.push(event);
        Ok(())
    }

    /// Tags the most recent sample with `event`, appending to any existing tag.
    pub(crate) fn tag_last(&mut self, event: String) {
        if let Some(slot) = self.events.last_mut() {
            match slot {
                Some(existing) => {
                    existing.push(';');
                    existing.push_str(&event);
                }
                None => *slot = Some(event),
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.states.first().map_or(0, PopulationState::arity)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PopulationState] {
        &self.states
    }

    pub fn events(&self) -> &[Option<String>] {
        &self.events
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn last_state(&self) -> Option<&PopulationState> {
        self.states.last()
    }

    /// Frequency of strategy `i` along the trajectory.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// `(time, tag)` for every tagged sample.
    pub fn event_list(&self) -> Vec<(f64, &str)> {
        self.times
            .iter()
            .zip(&self.events)
            .filter_map(|(&t, e)| e.as_deref().map(|e| (t, e)))
            .collect()
    }

    /// CSV with header `t,x1,...,xN,event`. Numbers use the shortest decimal
    /// representation that round-trips, with an exponent for very small or
    /// large magnitudes.
    pub fn to_csv(&self) -> String {
        let n = self.arity();
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push_str(",event\n");
        for ((t, s), e) in self.times.iter().zip(&self.states).zip(&self.events) {
            let _ = write!(out, "{t:?}");
            for w in s.as_slice() {
                let _ = write!(out, ",{w:?}");
            }
            let _ = writeln!(out, ",{}", e.as_deref().unwrap_or(""));
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Parses the format written by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty csv".into()))?;
        let n = header.split(',').count().saturating_sub(2);
        let mut traj = Self::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 2 {
                return Err(Error::InvalidParameter(format!(
                    "row {row}: expected {} fields, got {}",
                    n + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("row {row}: {e}")))
            };
            let t = parse(fields[0])?;
            let w = fields[1..=n].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
            let state = PopulationState::validate(&w, crate::simplex::DRIFT_TOL)?;
            let event = (!fields[n + 1].is_empty()).then(|| fields[n + 1].to_string());
            traj.push(t, state, event)?;
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: &[f64]) -> PopulationState {
        PopulationState::validate(v, 1e-9).unwrap()
    }

    #[test]
    fn rejects_non_increasing_times() {
        let mut tr = Trajectory::new();
        tr.push(0.0, st(&[0.5, 0.5]), None).unwrap();
        assert!(tr.push(0.0, st(&[0.5, 0.5]), None).is_err());
        assert!(tr.push(-1.0, st(&[0.5, 0.5]), None).is_err());
        assert_eq!(tr.len(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let mut tr = Trajectory::new();
        tr.push(0.0, st(&[0.1, 0.9]), None).unwrap();
        tr.push(0.1, st(&[1.0 / 3.0, 2.0 / 3.0]), Some("L->R".into())).unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x1,x2,event\n0.0,0.1,0.9,\n"));
        assert_eq!(Trajectory::from_csv(&csv).unwrap(), tr);
    }
}
