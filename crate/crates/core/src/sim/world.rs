use serde::{Deserialize, Serialize};

use super::vehicle::{Leg, ServiceVehicle, SvState};
use crate::demand::{sample_requests, DemandState, TransitionModel, Travel};
use crate::dispatch::{
    fcfs_match, oml_dispatch, omdd_dispatch, AppendAnchor, Insertion, InsertionKind, ModelTravel, Policy, RequestView, ScheduleEntry,
    SvPlan, SvView,
};
use crate::domain::{stream, EnergyConfig, RandomSource, TimeGrid, ZoneId};
use crate::error::{Error, Result};
use crate::metrics::MetricsLedger;
use crate::request::{ChargingRequest, RequestId, RequestStatus, SvId};

/// Everything one simulation run needs besides the model and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: TimeGrid,
    pub energy: EnergyConfig,
    pub policy: Policy,
    pub eta: f64,
    pub depot: ZoneId,
    pub fleet_size: u32,
    pub n_ldev: u32,
    pub service_minutes: f64,
    pub reload_minutes: f64,
    /// Unassigned requests older than this (past their service time) are dropped.
    pub max_wait_minutes: Option<f64>,
    pub stationary_tol: f64,
    /// Whether waiting LDEVs are removed from the pool that generates demand.
    pub waiting_feedback: bool,
    /// When OMDD assumes an SV leaves its last stop for an appended one.
    pub omdd_append_anchor: AppendAnchor,
    /// Keep a record of every OMDD insertion for replay checks.
    pub audit_insertions: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid: TimeGrid::default(),
            energy: EnergyConfig::default(),
            policy: Policy::Omdd,
            eta: 0.1,
            depot: ZoneId(0),
            fleet_size: 10,
            n_ldev: 500,
            service_minutes: 2.5,
            reload_minutes: 10.0,
            max_wait_minutes: None,
            stationary_tol: 1e-10,
            waiting_feedback: true,
            omdd_append_anchor: AppendAnchor::Now,
            audit_insertions: false,
        }
    }
}

/// Per-tick counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u32,
    pub generated: u32,
    pub matched: u32,
    pub served: u32,
    pub expired: u32,
    /// Requests generated and not yet served or expired.
    pub live: u32,
    /// Live requests with no SV assigned.
    pub unassigned: u32,
    /// SVs per state, ordered I, R, S, M, D.
    pub states: [u32; 5],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FleetEvent {
    Arrived { sv: SvId, zone: ZoneId },
    Served { sv: SvId, request: RequestId },
    HeadingToDepot { sv: SvId },
    AtDepot { sv: SvId },
    Reloaded { sv: SvId },
}

/// One executed OMDD insertion, with the neighbours it was placed between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionRecord {
    pub tick: u32,
    pub interval: usize,
    pub sv: SvId,
    pub sv_zone: ZoneId,
    pub kind: InsertionKind,
    pub entry: ScheduleEntry,
    pub prev: Option<ScheduleEntry>,
    pub next: Option<ScheduleEntry>,
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<TickReport>,
    pub ledger: MetricsLedger,
    pub requests: Vec<ChargingRequest>,
    pub fleet: Vec<ServiceVehicle>,
    pub insertions: Vec<InsertionRecord>,
}

/// The simulation state of one run. Strictly single-threaded; step it one
/// tick at a time or call [`World::run`].
pub struct World<'a> {
    cfg: SimConfig,
    model: &'a TransitionModel,
    demand: DemandState,
    demand_rng: RandomSource,
    travel_rng: RandomSource,
    dispatch_rng: RandomSource,
    service_ticks: u32,
    reload_ticks: u32,
    max_wait_ticks: Option<u32>,
    requests: Vec<ChargingRequest>,
    unassigned: Vec<RequestId>,
    fleet: Vec<ServiceVehicle>,
    generated: u64,
    served: u64,
    expired: u64,
    ledger: MetricsLedger,
    insertions: Vec<InsertionRecord>,
    next_tick: u32,
}

impl<'a> World<'a> {
    pub fn new(cfg: SimConfig, model: &'a TransitionModel, seed: u64) -> Result<Self> {
        let demand = DemandState::new(model, &cfg.energy, cfg.n_ldev, cfg.stationary_tol)?;
        Self::with_demand(cfg, model, demand, seed)
    }

    /// Builds a world from a precomputed demand model (it only depends on
    /// the transition model and the energy constants, so sweeps share it).
    pub fn with_demand(cfg: SimConfig, model: &'a TransitionModel, mut demand: DemandState, seed: u64) -> Result<Self> {
        cfg.grid.validate()?;
        cfg.energy.validate()?;
        if cfg.depot.0 >= model.n_zones() {
            return Err(Error::InvalidConfig(format!(
                "depot {} outside the {} zones of the model",
                cfg.depot,
                model.n_zones()
            )));
        }
        if !(0.0..=1.0).contains(&cfg.eta) {
            return Err(Error::InvalidConfig(format!("eta must lie in [0, 1], got {}", cfg.eta)));
        }
        if !(cfg.service_minutes > 0.0) || !(cfg.reload_minutes > 0.0) {
            return Err(Error::InvalidConfig("service and reload durations must be positive".into()));
        }
        demand.n_ldev = cfg.n_ldev;
        demand.n_waiting = 0;
        demand.waiting_feedback = cfg.waiting_feedback;

        let root = RandomSource::new(seed);
        let service_ticks = cfg.grid.ticks_for_minutes(cfg.service_minutes).max(1);
        let reload_ticks = cfg.grid.ticks_for_minutes(cfg.reload_minutes).max(1);
        let max_wait_ticks = cfg.max_wait_minutes.map(|m| cfg.grid.ticks_for_minutes(m));
        let fleet = (0..cfg.fleet_size)
            .map(|id| ServiceVehicle::new(id, cfg.depot, cfg.energy.sv_mbu_capacity))
            .collect();
        let ledger = MetricsLedger::new(
            model.n_zones(),
            cfg.fleet_size,
            cfg.energy.sv_mbu_capacity,
            cfg.grid.collection_minutes(),
        );
        Ok(World {
            demand_rng: root.fork(&[stream::DEMAND]),
            travel_rng: root.fork(&[stream::TRAVEL]),
            dispatch_rng: root.fork(&[stream::DISPATCH]),
            cfg,
            model,
            demand,
            service_ticks,
            reload_ticks,
            max_wait_ticks,
            requests: Vec::new(),
            unassigned: Vec::new(),
            fleet,
            generated: 0,
            served: 0,
            expired: 0,
            ledger,
            insertions: Vec::new(),
            next_tick: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn fleet(&self) -> &[ServiceVehicle] {
        &self.fleet
    }

    pub fn fleet_mut(&mut self) -> &mut [ServiceVehicle] {
        &mut self.fleet
    }

    pub fn requests(&self) -> &[ChargingRequest] {
        &self.requests
    }

    pub fn demand(&self) -> &DemandState {
        &self.demand
    }

    pub fn service_ticks(&self) -> u32 {
        self.service_ticks
    }

    pub fn next_tick(&self) -> u32 {
        self.next_tick
    }

    /// Adds a request by hand, bypassing the demand model.
    pub fn inject_request(&mut self, zone: ZoneId, scheduled_tick: u32) -> RequestId {
        let id = self.requests.len() as RequestId;
        let tick = self.next_tick;
        self.requests
            .push(ChargingRequest::new(id, zone, zone, tick, scheduled_tick.max(tick)));
        self.unassigned.push(id);
        self.generated += 1;
        self.demand.n_waiting += 1;
        id
    }

    /// Advances one tick: demand, fleet movement, expiry, dispatch and
    /// commit, then bookkeeping and consistency checks.
    pub fn step(&mut self) -> Result<TickReport> {
        let tick = self.next_tick;
        if tick >= self.cfg.grid.horizon_ticks {
            return Err(Error::Invariant {
                tick,
                message: "stepped past the horizon".into(),
            });
        }

        let new = sample_requests(tick, &mut self.demand, self.model, &self.cfg.grid, &self.demand_rng);
        let generated = new.len() as u32;
        // ids from the demand model count only its own requests; renumber densely
        for mut r in new {
            r.id = self.requests.len() as RequestId;
            self.unassigned.push(r.id);
            self.requests.push(r);
        }
        self.generated += generated as u64;

        let served_before = self.served;
        self.advance_fleet(tick)?;
        let served = (self.served - served_before) as u32;

        let expired = self.expire(tick);
        let matched = self.dispatch(tick)?;

        let mut states = [0u32; 5];
        let in_window = tick >= self.cfg.grid.warmup_ticks;
        for sv in &mut self.fleet {
            let k = sv.state.index();
            states[k] += 1;
            sv.state_minutes[k] += self.cfg.grid.tick_minutes;
            if in_window {
                self.ledger.state_minutes[k] += self.cfg.grid.tick_minutes;
            }
        }
        self.check_invariants(tick)?;
        self.next_tick += 1;

        Ok(TickReport {
            tick,
            generated,
            matched,
            served,
            expired,
            live: self.demand.n_waiting,
            unassigned: self.unassigned.len() as u32,
            states,
        })
    }

    /// Moves every SV through the transitions that fall due by `tick`.
    pub fn advance_fleet(&mut self, tick: u32) -> Result<Vec<FleetEvent>> {
        let mut events = Vec::new();
        for idx in 0..self.fleet.len() {
            loop {
                let sv = &self.fleet[idx];
                match sv.state {
                    SvState::Idle => break,
                    SvState::Relocating | SvState::ToDepot => {
                        let leg = sv.leg.expect("moving SV has a leg");
                        if leg.arrival_tick > tick {
                            break;
                        }
                        self.complete_leg(idx, leg, &mut events);
                    }
                    SvState::Service => {
                        let end = sv.busy_until.expect("SV in service has an end time");
                        if end > tick {
                            break;
                        }
                        self.finish_service(idx, end, tick, &mut events)?;
                    }
                    SvState::AtDepot => {
                        let end = sv.busy_until.expect("SV at depot has an end time");
                        if end > tick {
                            break;
                        }
                        let cap = self.cfg.energy.sv_mbu_capacity;
                        let sv = &mut self.fleet[idx];
                        sv.full_sets = cap;
                        sv.depleted_sets = 0;
                        sv.busy_until = None;
                        sv.state = SvState::Idle;
                        events.push(FleetEvent::Reloaded { sv: sv.id });
                    }
                }
            }
        }
        Ok(events)
    }

    fn complete_leg(&mut self, idx: usize, leg: Leg, events: &mut Vec<FleetEvent>) {
        if leg.arrival_tick >= self.cfg.grid.warmup_ticks {
            self.ledger.sv_miles += leg.miles;
        }
        let service_ticks = self.service_ticks;
        let reload_ticks = self.reload_ticks;
        let sv = &mut self.fleet[idx];
        sv.odometer_miles += leg.miles;
        sv.zone = leg.to;
        sv.leg = None;
        if sv.state == SvState::ToDepot {
            sv.state = SvState::AtDepot;
            sv.busy_until = Some(leg.arrival_tick + reload_ticks);
            events.push(FleetEvent::AtDepot { sv: sv.id });
            return;
        }
        let stop = sv.current.expect("relocating SV has a destination");
        let req = &mut self.requests[stop.request as usize];
        req.sv_arrival_tick = Some(leg.arrival_tick);
        let start = leg.arrival_tick.max(req.scheduled_tick);
        sv.state = SvState::Service;
        sv.busy_until = Some(start + service_ticks);
        events.push(FleetEvent::Arrived { sv: sv.id, zone: leg.to });
    }

    fn finish_service(&mut self, idx: usize, end: u32, tick: u32, events: &mut Vec<FleetEvent>) -> Result<()> {
        let sv = &mut self.fleet[idx];
        let stop = sv.current.take().expect("SV in service has a stop");
        if sv.full_sets == 0 || sv.committed == 0 {
            return Err(Error::Invariant {
                tick,
                message: format!("SV {} served request {} without a committed full MBU set", sv.id, stop.request),
            });
        }
        sv.full_sets -= 1;
        sv.depleted_sets += 1;
        sv.committed -= 1;
        sv.served += 1;
        sv.busy_until = None;
        let sv_id = sv.id;

        let start = end - self.service_ticks;
        let req = &mut self.requests[stop.request as usize];
        debug_assert!(start >= req.scheduled_tick);
        req.status = RequestStatus::Served;
        req.served_tick = Some(start);
        let wait = (start - req.scheduled_tick) as f64 * self.cfg.grid.tick_minutes;
        req.wait_minutes = Some(wait);
        self.demand.release();
        self.served += 1;
        if end >= self.cfg.grid.warmup_ticks {
            self.ledger.record_service(idx, stop.zone.0, wait);
        }
        events.push(FleetEvent::Served {
            sv: sv_id,
            request: stop.request,
        });

        let sv = &mut self.fleet[idx];
        if let Some(next) = sv.schedule.pop_front() {
            sv.current = Some(next);
            sv.state = SvState::Relocating;
            self.start_leg(idx, next.zone, end);
        } else if sv.full_sets > 0 {
            sv.state = SvState::Idle;
        } else {
            sv.state = SvState::ToDepot;
            let depot = self.cfg.depot;
            self.start_leg(idx, depot, end);
            events.push(FleetEvent::HeadingToDepot { sv: sv_id });
        }
        Ok(())
    }

    fn start_leg(&mut self, idx: usize, to: ZoneId, depart: u32) {
        let t = self.cfg.grid.interval_of(depart, self.model.n_intervals());
        let from = self.fleet[idx].zone;
        let Travel { ticks, miles } = self.model.realize_travel(from, to, t, &self.cfg.grid, &mut self.travel_rng);
        self.fleet[idx].leg = Some(Leg {
            to,
            depart_tick: depart,
            arrival_tick: depart + ticks,
            miles,
        });
    }

    fn expire(&mut self, tick: u32) -> u32 {
        let Some(limit) = self.max_wait_ticks else {
            return 0;
        };
        let requests = &mut self.requests;
        let mut dropped = 0u32;
        self.unassigned.retain(|&id| {
            let r = &mut requests[id as usize];
            if tick > r.scheduled_tick + limit {
                r.status = RequestStatus::Expired;
                dropped += 1;
                false
            } else {
                true
            }
        });
        for _ in 0..dropped {
            self.demand.release();
        }
        self.expired += dropped as u64;
        dropped
    }

    fn dispatch(&mut self, tick: u32) -> Result<u32> {
        if self.unassigned.is_empty() || self.fleet.is_empty() {
            return Ok(0);
        }
        let interval = self.cfg.grid.interval_of(tick, self.model.n_intervals());
        let travel = ModelTravel {
            model: self.model,
            interval,
            tick_minutes: self.cfg.grid.tick_minutes,
        };
        let views: Vec<RequestView> = self
            .unassigned
            .iter()
            .map(|&id| {
                let r = &self.requests[id as usize];
                RequestView {
                    id,
                    zone: r.service_zone,
                    announce_tick: r.announce_tick,
                    scheduled_tick: r.scheduled_tick,
                }
            })
            .collect();

        let matched: Vec<RequestId> = match self.cfg.policy {
            Policy::Fcfs | Policy::Oml => {
                let idle: Vec<SvView> = self
                    .fleet
                    .iter()
                    .filter(|sv| sv.state == SvState::Idle && sv.full_sets > 0)
                    .map(|sv| SvView { id: sv.id, zone: sv.zone })
                    .collect();
                if idle.is_empty() {
                    return Ok(0);
                }
                let d = if self.cfg.policy == Policy::Fcfs {
                    fcfs_match(&views, &idle, &travel, &mut self.dispatch_rng)
                } else {
                    oml_dispatch(&idle, &views, tick, self.cfg.eta, &travel)
                };
                for m in &d.matches {
                    self.assign_direct(m.sv as usize, m.request, tick);
                }
                d.matches.iter().map(|m| m.request).collect()
            }
            Policy::Omdd => {
                let plans: Vec<SvPlan> = self
                    .fleet
                    .iter()
                    .filter(|sv| {
                        matches!(sv.state, SvState::Idle | SvState::Relocating | SvState::Service) && sv.spare_sets() > 0
                    })
                    .map(|sv| {
                        let schedule = sv.plan_stops();
                        let last_departure = match self.cfg.omdd_append_anchor {
                            AppendAnchor::Now => None,
                            AppendAnchor::LastStop => match schedule.last() {
                                Some(last) => Some((last.service_tick + self.service_ticks) as f64),
                                None => sv.busy_until.map(f64::from),
                            },
                        };
                        SvPlan {
                            id: sv.id,
                            zone: sv.zone,
                            schedule,
                            spare_sets: sv.spare_sets(),
                            last_departure,
                        }
                    })
                    .collect();
                if plans.is_empty() {
                    return Ok(0);
                }
                let plan = omdd_dispatch(&plans, &views, tick, self.cfg.eta, &travel);
                let by_id: std::collections::HashMap<SvId, &SvPlan> = plans.iter().map(|p| (p.id, p)).collect();
                for (m, ins) in plan.dispatch.matches.iter().zip(&plan.insertions) {
                    if self.cfg.audit_insertions {
                        self.record_insertion(tick, interval, by_id[&m.sv], m.request, ins);
                    }
                    self.assign_insertion(m.sv as usize, m.request, ins, tick)?;
                }
                plan.dispatch.matches.iter().map(|m| m.request).collect()
            }
        };

        if !matched.is_empty() {
            let requests = &self.requests;
            self.unassigned
                .retain(|&id| requests[id as usize].status == RequestStatus::Open);
        }
        Ok(matched.len() as u32)
    }

    fn entry_for(&self, request: RequestId) -> ScheduleEntry {
        let r = &self.requests[request as usize];
        ScheduleEntry {
            request,
            zone: r.service_zone,
            service_tick: r.scheduled_tick,
        }
    }

    fn mark_assigned(&mut self, idx: usize, request: RequestId) {
        let sv_id = self.fleet[idx].id;
        let r = &mut self.requests[request as usize];
        r.status = RequestStatus::Assigned;
        r.assigned_sv = Some(sv_id);
        self.fleet[idx].committed += 1;
    }

    fn assign_direct(&mut self, idx: usize, request: RequestId, tick: u32) {
        let entry = self.entry_for(request);
        self.mark_assigned(idx, request);
        let sv = &mut self.fleet[idx];
        sv.current = Some(entry);
        sv.state = SvState::Relocating;
        self.start_leg(idx, entry.zone, tick);
    }

    fn assign_insertion(&mut self, idx: usize, request: RequestId, ins: &Insertion, tick: u32) -> Result<()> {
        let state = self.fleet[idx].state;
        if state == SvState::Idle {
            self.assign_direct(idx, request, tick);
            return Ok(());
        }
        let entry = self.entry_for(request);
        self.mark_assigned(idx, request);
        let sv = &mut self.fleet[idx];
        match (state, ins.position) {
            (SvState::Relocating, 0) => {
                // divert: the new stop goes first, the old target waits
                let old = sv.current.replace(entry).expect("relocating SV has a destination");
                sv.schedule.push_front(old);
                self.start_leg(idx, entry.zone, tick);
            }
            (SvState::Relocating, k) => sv.schedule.insert(k - 1, entry),
            (SvState::Service, k) => sv.schedule.insert(k, entry),
            (other, _) => {
                return Err(Error::Invariant {
                    tick,
                    message: format!("OMDD inserted into SV {} in state {:?}", sv.id, other),
                })
            }
        }
        Ok(())
    }

    fn record_insertion(&mut self, tick: u32, interval: usize, plan: &SvPlan, request: RequestId, ins: &Insertion) {
        let stops = &plan.schedule;
        let k = ins.position;
        self.insertions.push(InsertionRecord {
            tick,
            interval,
            sv: plan.id,
            sv_zone: plan.zone,
            kind: ins.kind,
            entry: self.entry_for(request),
            prev: k.checked_sub(1).and_then(|p| stops.get(p)).copied(),
            next: stops.get(k).copied(),
        });
    }

    fn check_invariants(&self, tick: u32) -> Result<()> {
        let fail = |message: String| Err(Error::Invariant { tick, message });
        let live = self.demand.n_waiting as u64;
        if self.generated != self.served + live + self.expired {
            return fail(format!(
                "request conservation: generated {} != served {} + live {} + expired {}",
                self.generated, self.served, live, self.expired
            ));
        }
        let committed: u64 = self.fleet.iter().map(|sv| sv.committed as u64).sum();
        if live != self.unassigned.len() as u64 + committed {
            return fail(format!(
                "live requests {live} != unassigned {} + committed {committed}",
                self.unassigned.len()
            ));
        }
        let cap = self.cfg.energy.sv_mbu_capacity;
        for sv in &self.fleet {
            if sv.full_sets + sv.depleted_sets != cap {
                return fail(format!(
                    "SV {} holds {} full + {} depleted sets, capacity {cap}",
                    sv.id, sv.full_sets, sv.depleted_sets
                ));
            }
            if sv.committed > sv.full_sets {
                return fail(format!(
                    "SV {} committed to {} requests with {} full sets",
                    sv.id, sv.committed, sv.full_sets
                ));
            }
            let scheduled = sv.schedule.len() as u32 + u32::from(sv.current.is_some());
            if scheduled != sv.committed {
                return fail(format!(
                    "SV {} has {scheduled} stops but {} commitments",
                    sv.id, sv.committed
                ));
            }
            let ok = match sv.state {
                SvState::Idle => sv.current.is_none() && sv.leg.is_none() && sv.full_sets > 0,
                SvState::Relocating => sv.current.is_some() && sv.leg.is_some(),
                SvState::Service => sv.current.is_some() && sv.busy_until.is_some() && sv.leg.is_none(),
                SvState::ToDepot => sv.leg.is_some() && sv.committed == 0,
                SvState::AtDepot => sv.busy_until.is_some() && sv.committed == 0,
            };
            if !ok {
                return fail(format!("SV {} is in an inconsistent {:?} state", sv.id, sv.state));
            }
        }
        Ok(())
    }

    /// Runs the remaining ticks to the horizon and closes the ledger.
    pub fn run(mut self) -> Result<RunOutput> {
        let mut reports = Vec::with_capacity(self.cfg.grid.horizon_ticks as usize);
        while self.next_tick < self.cfg.grid.horizon_ticks {
            reports.push(self.step()?);
        }
        Ok(self.finish(reports))
    }

    /// Closes the ledger with the requests announced in the collection window.
    pub fn finish(mut self, reports: Vec<TickReport>) -> RunOutput {
        let warmup = self.cfg.grid.warmup_ticks;
        for r in self.requests.iter().filter(|r| r.announce_tick >= warmup) {
            self.ledger.generated += 1;
            match r.status {
                RequestStatus::Served => self.ledger.cohort_served += 1,
                RequestStatus::Expired => self.ledger.cohort_expired += 1,
                RequestStatus::Open | RequestStatus::Assigned => self.ledger.cohort_open += 1,
            }
        }
        RunOutput {
            reports,
            ledger: self.ledger,
            requests: self.requests,
            fleet: self.fleet,
            insertions: self.insertions,
        }
    }
}

/// Replays recorded OMDD insertions against the model's expected travel
/// times and returns a description of every one that broke the slack or
/// ordering conditions of its position.
pub fn audit_insertions(records: &[InsertionRecord], model: &TransitionModel, tick_minutes: f64) -> Vec<String> {
    let tau = |t: usize, a: ZoneId, b: ZoneId| model.expected_minutes(t, a, b) / tick_minutes;
    let mut bad = Vec::new();
    for r in records {
        let x = r.entry;
        let ok = match r.kind {
            InsertionKind::Prepend => match r.next {
                Some(first) => {
                    let need = tau(r.interval, r.sv_zone, x.zone) + tau(r.interval, x.zone, first.zone);
                    r.prev.is_none()
                        && x.service_tick <= first.service_tick
                        && first.service_tick as f64 - r.tick as f64 >= need
                }
                None => false,
            },
            InsertionKind::Gap => match (r.prev, r.next) {
                (Some(a), Some(b)) => {
                    let need = tau(r.interval, a.zone, x.zone) + tau(r.interval, x.zone, b.zone);
                    a.service_tick <= x.service_tick
                        && x.service_tick <= b.service_tick
                        && (b.service_tick - a.service_tick) as f64 >= need
                }
                _ => false,
            },
            InsertionKind::Append => r.next.is_none(),
        };
        if !ok {
            bad.push(format!(
                "tick {}: SV {} {:?} insertion of request {} violates its feasibility condition",
                r.tick, r.sv, r.kind, x.request
            ));
        }
    }
    bad
}
