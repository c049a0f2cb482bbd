use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dispatch::ScheduleEntry;
use crate::domain::ZoneId;
use crate::request::SvId;

/// SV lifecycle. Regular service cycles I -> R -> S -> I; an SV that has
/// used its last full MBU set goes S -> M -> D -> I instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SvState {
    /// Idle with charged MBU sets, no task.
    #[serde(rename = "I")]
    Idle,
    /// Driving to a service location.
    #[serde(rename = "R")]
    Relocating,
    /// At the service location: waiting for the LDEV or swapping.
    #[serde(rename = "S")]
    Service,
    /// Out of charged sets, driving to the depot.
    #[serde(rename = "M")]
    ToDepot,
    /// Reloading at the depot.
    #[serde(rename = "D")]
    AtDepot,
}

impl SvState {
    pub const ALL: [SvState; 5] = [
        SvState::Idle,
        SvState::Relocating,
        SvState::Service,
        SvState::ToDepot,
        SvState::AtDepot,
    ];

    pub fn index(self) -> usize {
        match self {
            SvState::Idle => 0,
            SvState::Relocating => 1,
            SvState::Service => 2,
            SvState::ToDepot => 3,
            SvState::AtDepot => 4,
        }
    }

    pub fn letter(self) -> char {
        ['I', 'R', 'S', 'M', 'D'][self.index()]
    }
}

/// A relocation in progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub to: ZoneId,
    pub depart_tick: u32,
    pub arrival_tick: u32,
    pub miles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceVehicle {
    pub id: SvId,
    pub state: SvState,
    /// Current zone; the departure zone while a leg is in progress.
    pub zone: ZoneId,
    pub full_sets: u32,
    pub depleted_sets: u32,
    /// Requests assigned and not yet served, including `current`.
    pub committed: u32,
    /// The stop being driven to (R) or served (S).
    pub current: Option<ScheduleEntry>,
    /// Stops after `current`, in visit order.
    pub schedule: VecDeque<ScheduleEntry>,
    pub leg: Option<Leg>,
    /// End of the swap (S) or of reloading (D).
    pub busy_until: Option<u32>,
    pub odometer_miles: f64,
    pub state_minutes: [f64; 5],
    pub served: u32,
}

impl ServiceVehicle {
    pub fn new(id: SvId, zone: ZoneId, capacity: u32) -> Self {
        ServiceVehicle {
            id,
            state: SvState::Idle,
            zone,
            full_sets: capacity,
            depleted_sets: 0,
            committed: 0,
            current: None,
            schedule: VecDeque::new(),
            leg: None,
            busy_until: None,
            odometer_miles: 0.0,
            state_minutes: [0.0; 5],
            served: 0,
        }
    }

    /// Full sets not yet promised to a request.
    pub fn spare_sets(&self) -> u32 {
        self.full_sets - self.committed
    }

    /// Stops in visit order as OMDD sees them. For an SV on its way to a
    /// stop, that stop comes first; a stop being served is fixed and left out.
    pub fn plan_stops(&self) -> Vec<ScheduleEntry> {
        let mut out = Vec::with_capacity(self.schedule.len() + 1);
        if self.state == SvState::Relocating {
            if let Some(c) = self.current {
                out.push(c);
            }
        }
        out.extend(self.schedule.iter().copied());
        out
    }
}
