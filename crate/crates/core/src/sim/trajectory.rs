use serde::{Deserialize, Serialize};

use crate::report::csv_table;

/// What happened at a record time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Flow,
    /// A sampling time of the generated partition (and the initial time).
    Sample,
    /// A fixed-time impulse.
    Impulse,
}

impl Event {
    /// Numeric code used in the CSV `event` column.
    pub fn code(self) -> u8 {
        match self {
            Event::Flow => 0,
            Event::Sample => 1,
            Event::Impulse => 2,
        }
    }
}

/// The realized set of times at which restarts reproduce the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingSet {
    /// Every time in the simulated interval.
    Continuum,
    /// The listed times only.
    Times { times: Vec<f64> },
}

impl SamplingSet {
    pub fn contains(&self, t: f64, t0: f64, end: f64) -> bool {
        let tol = 1e-12 * t.abs().max(1.0);
        match self {
            SamplingSet::Continuum => t >= t0 - tol && t <= end + tol,
            SamplingSet::Times { times } => times.iter().any(|s| (s - t).abs() <= tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    Completed,
    /// The state norm exceeded the blowup bound at `t`.
    Blowup {
        t: f64,
        #[serde(with = "crate::report::float")]
        norm: f64,
    },
    /// A vector field, jump map or sampling period produced an invalid value.
    Fault { t: f64, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub t0: f64,
    pub horizon: f64,
    pub h_int: f64,
    pub record_dt: Option<f64>,
    pub blowup: f64,
    pub seeds: Vec<u64>,
}

/// Columnar record store produced by [`simulate`](super::simulate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub n: usize,
    pub p: usize,
    pub dim_u: usize,
    pub dim_d: usize,
    pub dim_w: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub outputs: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub w: Vec<f64>,
    pub events: Vec<Event>,
    pub sampling: SamplingSet,
    pub status: Status,
}

fn row(data: &[f64], dim: usize, i: usize) -> &[f64] {
    &data[i * dim..(i + 1) * dim]
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        row(&self.states, self.n, i)
    }

    pub fn output(&self, i: usize) -> &[f64] {
        row(&self.outputs, self.p, i)
    }

    pub fn input_u(&self, i: usize) -> &[f64] {
        row(&self.u, self.dim_u, i)
    }

    pub fn input_d(&self, i: usize) -> &[f64] {
        row(&self.d, self.dim_d, i)
    }

    pub fn input_w(&self, i: usize) -> &[f64] {
        row(&self.w, self.dim_w, i)
    }

    pub fn t0(&self) -> f64 {
        self.meta.t0
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("at least the initial record")
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn completed(&self) -> bool {
        self.status == Status::Completed
    }

    /// Index of the record at `t`, within `1e-12 * max(1, |t|)`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Index of the last record at or before `t` (with tolerance `tol`).
    pub fn index_at_or_before(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s <= t + tol);
        i.checked_sub(1)
    }

    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        self.index_of(t).map(|i| self.state(i))
    }

    /// Times of records flagged as sampling times or impulses.
    pub fn event_times(&self) -> Vec<f64> {
        self.times.iter().zip(&self.events).filter(|(_, e)| **e != Event::Flow).map(|(t, _)| *t).collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let cols = [("x", self.n), ("y", self.p), ("u", self.dim_u), ("d", self.dim_d), ("w", self.dim_w)];
        for (name, dim) in cols {
            h.extend((1..=dim).map(|i| format!("{name}_{i}")));
        }
        h.push("event".into());
        h
    }

    /// CSV with columns `t, x_*, y_*, u_*, d_*, w_*, event`; the event
    /// column holds 0 (flow), 1 (sampling time) or 2 (impulse).
    pub fn to_csv(&self) -> String {
        let rows = (0..self.len()).map(|i| {
            let mut r = vec![self.times[i]];
            r.extend_from_slice(self.state(i));
            r.extend_from_slice(self.output(i));
            r.extend_from_slice(self.input_u(i));
            r.extend_from_slice(self.input_d(i));
            r.extend_from_slice(self.input_w(i));
            r
        });
        let body = csv_table(&self.csv_header()[..self.csv_header().len() - 1], rows);
        // append the integer event code to each data line
        let mut out = String::with_capacity(body.len() + 2 * self.len() + 8);
        for (k, line) in body.lines().enumerate() {
            out.push_str(line);
            if k == 0 {
                out.push_str(",event\n");
            } else {
                out.push(',');
                out.push_str(&self.events[k - 1].code().to_string());
                out.push('\n');
            }
        }
        out
    }

    pub fn state_norm(&self, i: usize) -> f64 {
        norm(self.state(i))
    }

    pub fn output_norm(&self, i: usize) -> f64 {
        norm(self.output(i))
    }

    /// Largest state norm over all records.
    pub fn sup_state_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.state_norm(i)).fold(0.0, f64::max)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
