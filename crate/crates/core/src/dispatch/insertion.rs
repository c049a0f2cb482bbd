//! Detour insertion for OMDD.
//!
//! An SV with a schedule `[m_1 .. m_n]` can take a new stop `x` at the
//! front, in a gap between consecutive stops, or at the end. Front and gap
//! positions need enough slack to travel through `x`; their cost is `eta`
//! times the slack left over. Appending is always allowed and costs like an
//! OML edge from the last stop, departing at the current tick unless the
//! plan says when the SV can leave that stop. The matching cost of
//! (SV, request) is the cheapest valid position.

use serde::{Deserialize, Serialize};

use super::policy::{oml_edge_cost, RequestView};
use super::{solve_assignment, CostMatrix, Dispatch, Match, TravelTimes};
use crate::domain::ZoneId;
use crate::request::{RequestId, SvId};

/// One scheduled stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub request: RequestId,
    pub zone: ZoneId,
    pub service_tick: u32,
}

/// An SV as seen by OMDD: where it is now, its stops in visit order, and
/// how many more requests its MBU inventory can cover.
#[derive(Debug, Clone, PartialEq)]
pub struct SvPlan {
    pub id: SvId,
    pub zone: ZoneId,
    pub schedule: Vec<ScheduleEntry>,
    pub spare_sets: u32,
    /// Earliest tick the SV can leave its last stop, or its current
    /// position when the schedule is empty. `None` means the current tick.
    pub last_departure: Option<f64>,
}

/// Departure time assumed for the leg from the last stop to an appended one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppendAnchor {
    /// The current tick.
    #[default]
    Now,
    /// When the SV finishes its last scheduled service.
    LastStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionKind {
    Prepend,
    Gap,
    Append,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    /// Index the new stop takes in the schedule.
    pub position: usize,
    pub kind: InsertionKind,
    pub cost: f64,
}

/// Cheapest valid insertion of `new` into `sv`'s schedule, or `None` when
/// the SV has no uncommitted MBU set.
///
/// Front and gap positions also require `new.service_tick` to fall between
/// its neighbours' service ticks so the schedule stays in time order.
pub fn insertion_cost(
    sv: &SvPlan,
    new: &ScheduleEntry,
    now: u32,
    eta: f64,
    travel: &impl TravelTimes,
) -> Option<Insertion> {
    if sv.spare_sets == 0 {
        return None;
    }
    let now_f = now as f64;
    let depart = sv.last_departure.map_or(now_f, |d| d.max(now_f));
    let tx = new.service_tick;
    let stops = &sv.schedule;

    let Some(last) = stops.last() else {
        let c = oml_edge_cost(travel.expected(sv.zone, new.zone), depart, tx as f64, eta);
        return Some(Insertion {
            position: 0,
            kind: InsertionKind::Append,
            cost: c,
        });
    };

    let tau_last = travel.expected(last.zone, new.zone);
    let mut best = Insertion {
        position: stops.len(),
        kind: InsertionKind::Append,
        cost: oml_edge_cost(tau_last, depart, tx as f64, eta),
    };
    let mut consider = |position: usize, kind: InsertionKind, cost: f64| {
        // ties go to the earlier position
        if cost < best.cost || (cost == best.cost && position < best.position) {
            best = Insertion { position, kind, cost };
        }
    };

    let first = &stops[0];
    if tx <= first.service_tick {
        let slack = first.service_tick as f64 - now_f - travel.expected(sv.zone, new.zone) - travel.expected(new.zone, first.zone);
        if slack >= 0.0 {
            consider(0, InsertionKind::Prepend, eta * slack);
        }
    }
    for k in 1..stops.len() {
        let (prev, next) = (&stops[k - 1], &stops[k]);
        if tx < prev.service_tick || tx > next.service_tick {
            continue;
        }
        let gap = next.service_tick as f64 - prev.service_tick as f64;
        let slack = gap - travel.expected(prev.zone, new.zone) - travel.expected(new.zone, next.zone);
        if slack >= 0.0 {
            consider(k, InsertionKind::Gap, eta * slack);
        }
    }
    Some(best)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OmddPlan {
    pub dispatch: Dispatch,
    /// Where each match goes, parallel to `dispatch.matches`.
    pub insertions: Vec<Insertion>,
}

/// Optimal matching over every eligible SV with insertion costs as edge
/// weights. Requests with no valid SV stay unmatched.
pub fn omdd_dispatch(
    svs: &[SvPlan],
    requests: &[RequestView],
    now: u32,
    eta: f64,
    travel: &impl TravelTimes,
) -> OmddPlan {
    if svs.is_empty() || requests.is_empty() {
        return OmddPlan::default();
    }
    let mut choices: Vec<Option<Insertion>> = Vec::with_capacity(svs.len() * requests.len());
    for sv in svs {
        for r in requests {
            let entry = ScheduleEntry {
                request: r.id,
                zone: r.zone,
                service_tick: r.scheduled_tick,
            };
            choices.push(insertion_cost(sv, &entry, now, eta, travel));
        }
    }
    let cols = requests.len();
    let costs = CostMatrix::from_fn(svs.len(), cols, |i, j| {
        choices[i * cols + j].map_or(f64::INFINITY, |c| c.cost)
    });
    let a = solve_assignment(&costs);
    let mut plan = OmddPlan::default();
    for &(i, j) in &a.pairs {
        let ins = choices[i * cols + j].expect("assignment only returns finite edges");
        plan.dispatch.matches.push(Match {
            sv: svs[i].id,
            request: requests[j].id,
            cost: ins.cost,
        });
        plan.insertions.push(ins);
    }
    plan.dispatch.objective = a.objective;
    plan
}
