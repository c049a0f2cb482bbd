//! Dispatching policies and the assignment solver behind them.

mod assignment;
mod insertion;
mod policy;

pub use assignment::{solve_assignment, Assignment, CostMatrix};
pub use insertion::{insertion_cost, omdd_dispatch, AppendAnchor, Insertion, InsertionKind, OmddPlan, ScheduleEntry, SvPlan};
pub use policy::{fcfs_match, oml_dispatch, oml_edge_cost, RequestView, SvView};

use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::demand::TransitionModel;
use crate::domain::{RandomSource, ZoneId};
use crate::request::{RequestId, SvId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Fcfs,
    Oml,
    Omdd,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Fcfs, Policy::Oml, Policy::Omdd];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Fcfs => "fcfs",
            Policy::Oml => "oml",
            Policy::Omdd => "omdd",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fcfs" => Ok(Policy::Fcfs),
            "oml" => Ok(Policy::Oml),
            "omdd" => Ok(Policy::Omdd),
            other => Err(format!("unknown policy '{other}' (expected fcfs, oml or omdd)")),
        }
    }
}

/// Travel-time source for matching costs, in ticks.
pub trait TravelTimes {
    /// Expected travel time used for matching costs.
    fn expected(&self, from: ZoneId, to: ZoneId) -> f64;
    /// One random travel time, used by FCFS to rank candidate SVs.
    fn sample(&self, from: ZoneId, to: ZoneId, rng: &mut RandomSource) -> f64;
}

/// Travel times from a [`TransitionModel`] at a fixed interval.
#[derive(Debug, Clone, Copy)]
pub struct ModelTravel<'a> {
    pub model: &'a TransitionModel,
    pub interval: usize,
    pub tick_minutes: f64,
}

impl TravelTimes for ModelTravel<'_> {
    #[inline]
    fn expected(&self, from: ZoneId, to: ZoneId) -> f64 {
        self.model.expected_minutes(self.interval, from, to) / self.tick_minutes
    }

    fn sample(&self, from: ZoneId, to: ZoneId, rng: &mut RandomSource) -> f64 {
        self.model.sample_minutes(self.interval, from, to, rng) / self.tick_minutes
    }
}

/// Deterministic travel times from a dense matrix; handy for tests and
/// hand-built instances. `jitter` adds a log-normal factor to samples.
#[derive(Debug, Clone)]
pub struct MatrixTravel {
    pub n: usize,
    pub ticks: Vec<f64>,
    pub jitter: f64,
}

impl MatrixTravel {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let ticks = (0..n * n).map(|k| f(k / n, k % n)).collect();
        MatrixTravel { n, ticks, jitter: 0.0 }
    }
}

impl TravelTimes for MatrixTravel {
    fn expected(&self, from: ZoneId, to: ZoneId) -> f64 {
        self.ticks[from.0 * self.n + to.0]
    }

    fn sample(&self, from: ZoneId, to: ZoneId, rng: &mut RandomSource) -> f64 {
        let base = self.expected(from, to);
        if self.jitter == 0.0 {
            return base;
        }
        let z: f64 = StandardNormal.sample(rng);
        base * (self.jitter * z - 0.5 * self.jitter * self.jitter).exp()
    }
}

/// A matched (SV, request) pair with its edge cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub sv: SvId,
    pub request: RequestId,
    pub cost: f64,
}

/// Outcome of one dispatching round: a partial matching in which no SV and
/// no request appears twice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dispatch {
    pub matches: Vec<Match>,
    pub objective: f64,
}

impl Dispatch {
    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }
}
