//! Experiment drivers: single runs, the fleet-size sweep and the depot search.
//!
//! Every run is an isolated single-threaded world; parallel drivers share
//! only the read-only scenario and precomputed demand model.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::DemandState;
use crate::dispatch::Policy;
use crate::domain::ZoneId;
use crate::error::{Error, Result};
use crate::metrics::MetricsSummary;
use crate::scenario::{DepotChoice, Scenario};
use crate::sim::{TickReport, World};

/// Everything reported about one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario_hash: String,
    pub seed: u64,
    pub policy: Policy,
    pub fleet_size: u32,
    pub depot: ZoneId,
    pub metrics: MetricsSummary,
    /// Mean wait per zone over the collection window; `None` where nothing was served.
    pub zone_mean_wait: Vec<Option<f64>>,
    pub series: Vec<TickReport>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run summary serializes")
    }

    fn sort_key(&self) -> (u32, usize, u64, usize) {
        (self.fleet_size, policy_rank(self.policy), self.seed, self.depot.0)
    }
}

fn policy_rank(p: Policy) -> usize {
    Policy::ALL.iter().position(|&q| q == p).unwrap_or(usize::MAX)
}

/// Depot to use for each policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepotPlan(pub BTreeMap<Policy, ZoneId>);

impl DepotPlan {
    pub fn uniform(zone: ZoneId) -> Self {
        DepotPlan(Policy::ALL.iter().map(|&p| (p, zone)).collect())
    }

    pub fn get(&self, policy: Policy) -> Result<ZoneId> {
        self.0
            .get(&policy)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("no depot chosen for policy {policy}")))
    }
}

/// Precomputes the stationary demand model of a scenario.
pub fn demand_model(scenario: &Scenario) -> Result<DemandState> {
    let c = &scenario.config;
    DemandState::new(&scenario.model, &c.energy, c.n_ldev, c.stationary_tol)
}

/// Runs one simulation at the scenario's fixed depot.
pub fn run(scenario: &Scenario, seed: u64, fleet_size: u32, policy: Policy) -> Result<RunSummary> {
    let demand = demand_model(scenario)?;
    run_cell(scenario, &scenario.hash(), &demand, seed, fleet_size, policy, scenario.depot()?)
}

/// Runs one simulation from a precomputed demand model.
pub fn run_cell(
    scenario: &Scenario,
    hash: &str,
    demand: &DemandState,
    seed: u64,
    fleet_size: u32,
    policy: Policy,
    depot: ZoneId,
) -> Result<RunSummary> {
    let cfg = scenario.sim_config(fleet_size, policy, depot);
    let out = World::with_demand(cfg, &scenario.model, demand.clone(), seed)?.run()?;
    let c = &scenario.config;
    let metrics = MetricsSummary::from_ledger(&out.ledger, &c.economics, &c.energy);
    let zone_mean_wait = out
        .ledger
        .zone_wait_sum
        .iter()
        .zip(&out.ledger.zone_served)
        .map(|(&sum, &n)| (n > 0).then(|| sum / n as f64))
        .collect();
    Ok(RunSummary {
        scenario_hash: hash.to_string(),
        seed,
        policy,
        fleet_size,
        depot,
        metrics,
        zone_mean_wait,
        series: out.reports,
    })
}

/// One grid cell that could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub fleet_size: u32,
    pub policy: Policy,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<CellFailure>,
}

/// The (fleet size, policy, seed) grid of a scenario, in output order.
pub fn sweep_cells(scenario: &Scenario) -> Vec<(u32, Policy, u64)> {
    let c = &scenario.config;
    let mut cells = Vec::with_capacity(c.fleet_sizes.len() * c.policies.len() * c.seeds.len());
    for &f in &c.fleet_sizes {
        for &p in &c.policies {
            for &s in &c.seeds {
                cells.push((f, p, s));
            }
        }
    }
    cells.sort_by_key(|&(f, p, s)| (f, policy_rank(p), s));
    cells.dedup();
    cells
}

/// Runs every cell of the grid in parallel on the current rayon pool. A
/// failing cell is reported and does not stop the others. Output order
/// depends only on the grid, never on scheduling.
pub fn sweep(scenario: &Scenario, depots: &DepotPlan) -> Result<SweepResult> {
    let demand = demand_model(scenario)?;
    let hash = scenario.hash();
    let cells = sweep_cells(scenario);
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(f, p, s)| {
            let r = depots
                .get(p)
                .and_then(|depot| run_cell(scenario, &hash, &demand, s, f, p, depot));
            (f, p, s, r)
        })
        .collect();
    let mut out = SweepResult::default();
    for (fleet_size, policy, seed, r) in outcomes {
        match r {
            Ok(summary) => out.summaries.push(summary),
            Err(e) => out.failures.push(CellFailure {
                fleet_size,
                policy,
                seed,
                error: e.to_string(),
            }),
        }
    }
    out.summaries.sort_by_key(RunSummary::sort_key);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotCandidate {
    pub zone: ZoneId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Mean over seeds of the per-run mean wait; `None` if no run served anything.
    pub mean_wait_min: Option<f64>,
    pub per_seed_mean_wait: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGroup {
    pub label: String,
    pub zones: Vec<ZoneId>,
    pub best_zone: ZoneId,
    pub best_mean_wait_min: Option<f64>,
    pub median_mean_wait_min: Option<f64>,
}

/// Depot candidates for one policy, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotRanking {
    pub policy: Policy,
    pub fleet_size: u32,
    pub ranking: Vec<DepotCandidate>,
    pub groups: Vec<LabelGroup>,
    pub failures: Vec<String>,
}

impl DepotRanking {
    pub fn best(&self) -> Option<ZoneId> {
        self.ranking.first().map(|c| c.zone)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Places the depot in every zone in turn and ranks the zones by mean
/// waiting time across the scenario's seeds, once per scenario policy.
/// Zones whose runs served nothing rank last; ties go to the lower zone.
pub fn depot_search(scenario: &Scenario, fleet_size: Option<u32>) -> Result<Vec<DepotRanking>> {
    let fleet = fleet_size.unwrap_or(scenario.config.search_fleet_size);
    let demand = demand_model(scenario)?;
    let hash = scenario.hash();
    let n = scenario.n_zones();
    let seeds = &scenario.config.seeds;
    let labels = &scenario.config.zone_labels;

    let mut rankings = Vec::new();
    for &policy in &scenario.config.policies {
        let runs: Vec<(usize, u64, Result<RunSummary>)> = (0..n)
            .flat_map(|z| seeds.iter().map(move |&s| (z, s)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(z, s)| (z, s, run_cell(scenario, &hash, &demand, s, fleet, policy, ZoneId(z))))
            .collect();

        let mut per_zone: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(seeds.len()); n];
        let mut failures = Vec::new();
        for (z, s, r) in runs {
            match r {
                Ok(summary) => per_zone[z].push(summary.metrics.mean_wait_min),
                Err(e) => failures.push(format!("zone {z}, seed {s}: {e}")),
            }
        }
        let mut ranking: Vec<DepotCandidate> = per_zone
            .into_iter()
            .enumerate()
            .map(|(z, waits)| {
                let defined: Vec<f64> = waits.iter().flatten().copied().collect();
                DepotCandidate {
                    zone: ZoneId(z),
                    label: labels.get(z).cloned(),
                    mean_wait_min: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
                    per_seed_mean_wait: waits,
                }
            })
            .collect();
        ranking.sort_by(|a, b| {
            let key = |c: &DepotCandidate| c.mean_wait_min.unwrap_or(f64::INFINITY);
            key(a).total_cmp(&key(b)).then(a.zone.cmp(&b.zone))
        });

        let mut by_label: BTreeMap<&str, Vec<&DepotCandidate>> = BTreeMap::new();
        for c in &ranking {
            if let Some(l) = &c.label {
                by_label.entry(l.as_str()).or_default().push(c);
            }
        }
        let groups = by_label
            .into_iter()
            .map(|(label, members)| LabelGroup {
                label: label.to_string(),
                zones: {
                    let mut z: Vec<ZoneId> = members.iter().map(|c| c.zone).collect();
                    z.sort();
                    z
                },
                best_zone: members[0].zone,
                best_mean_wait_min: members[0].mean_wait_min,
                median_mean_wait_min: median(members.iter().filter_map(|c| c.mean_wait_min).collect()),
            })
            .collect();

        rankings.push(DepotRanking {
            policy,
            fleet_size: fleet,
            ranking,
            groups,
            failures,
        });
    }
    Ok(rankings)
}

/// The depot per policy: the scenario's fixed zone, or the winners of a
/// depot search.
pub fn resolve_depots(scenario: &Scenario) -> Result<DepotPlan> {
    match scenario.config.depot {
        DepotChoice::Zone(z) => Ok(DepotPlan::uniform(z)),
        DepotChoice::Search => {
            let mut plan = BTreeMap::new();
            for r in depot_search(scenario, None)? {
                let best = r
                    .best()
                    .ok_or_else(|| Error::InvalidConfig("depot search produced no candidate".into()))?;
                plan.insert(r.policy, best);
            }
            Ok(DepotPlan(plan))
        }
    }
}
