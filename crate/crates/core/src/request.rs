use serde::{Deserialize, Serialize};

use crate::domain::ZoneId;

pub type RequestId = u32;
pub type SvId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    /// Waiting for an SV.
    Open,
    /// Committed to an SV schedule (or its current leg), not yet served.
    Assigned,
    Served,
    /// Dropped after exceeding the configured maximum wait.
    Expired,
}

/// One battery-delivery request from an LDEV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingRequest {
    pub id: RequestId,
    pub service_zone: ZoneId,
    /// Zone the LDEV was travelling from when it announced the request.
    pub origin_zone: ZoneId,
    pub announce_tick: u32,
    /// Requested service time.
    pub scheduled_tick: u32,
    pub status: RequestStatus,
    pub assigned_sv: Option<SvId>,
    /// Tick the SV reached the service zone.
    pub sv_arrival_tick: Option<u32>,
    /// Tick the swap started; never earlier than `scheduled_tick`.
    pub served_tick: Option<u32>,
    pub wait_minutes: Option<f64>,
}

impl ChargingRequest {
    pub fn new(id: RequestId, service_zone: ZoneId, origin_zone: ZoneId, announce_tick: u32, scheduled_tick: u32) -> Self {
        debug_assert!(announce_tick <= scheduled_tick);
        ChargingRequest {
            id,
            service_zone,
            origin_zone,
            announce_tick,
            scheduled_tick,
            status: RequestStatus::Open,
            assigned_sv: None,
            sv_arrival_tick: None,
            served_tick: None,
            wait_minutes: None,
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.status, RequestStatus::Open | RequestStatus::Assigned)
    }
}
