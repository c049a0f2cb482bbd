//! Shared domain types: zones, the simulation time grid, energy and
//! economic constants, and the seeded random source.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense zone index in `[0, n_zones)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub usize);

impl ZoneId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zone {}", self.0)
    }
}

/// Simulation clock. One tick is `tick_minutes` of simulated time; model
/// matrices change every `interval_minutes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub tick_minutes: f64,
    pub horizon_ticks: u32,
    pub warmup_ticks: u32,
    pub interval_minutes: u32,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.tick_minutes > 0.0) || !self.tick_minutes.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tick_minutes must be positive, got {}",
                self.tick_minutes
            )));
        }
        if self.warmup_ticks >= self.horizon_ticks {
            return Err(Error::InvalidConfig(format!(
                "warmup_ticks ({}) must be below horizon_ticks ({})",
                self.warmup_ticks, self.horizon_ticks
            )));
        }
        let ratio = self.interval_minutes as f64 / self.tick_minutes;
        if self.interval_minutes == 0 || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "interval_minutes ({}) must be a positive multiple of tick_minutes ({})",
                self.interval_minutes, self.tick_minutes
            )));
        }
        Ok(())
    }

    /// Matrix interval index for `tick`, clamped to the last of
    /// `n_intervals` available intervals.
    pub fn interval_of(&self, tick: u32, n_intervals: usize) -> usize {
        let raw = (tick as f64 * self.tick_minutes / self.interval_minutes as f64).floor() as usize;
        raw.min(n_intervals.saturating_sub(1))
    }

    /// Whole ticks needed to cover `minutes`, rounding up.
    pub fn ticks_for_minutes(&self, minutes: f64) -> u32 {
        if minutes <= 0.0 {
            return 0;
        }
        // tolerate float noise so that e.g. 10.000000000001 stays 10 ticks
        (minutes / self.tick_minutes - 1e-9).ceil().max(0.0) as u32
    }

    /// Minutes over which metrics are collected.
    pub fn collection_minutes(&self) -> f64 {
        (self.horizon_ticks - self.warmup_ticks) as f64 * self.tick_minutes
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            tick_minutes: 1.0,
            horizon_ticks: 1740,
            warmup_ticks: 600,
            interval_minutes: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub c_ldev_kwh: f64,
    pub c_mbu_kwh: f64,
    /// Charging threshold as a fraction of battery capacity.
    pub delta: f64,
    /// Number of four-module MBU sets an SV carries when full.
    pub sv_mbu_capacity: u32,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            c_ldev_kwh: 50.0,
            c_mbu_kwh: 14.0,
            delta: 0.2,
            sv_mbu_capacity: 50,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_ldev_kwh > 0.0) || !(self.c_mbu_kwh > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "battery capacities must be positive (c_ldev_kwh={}, c_mbu_kwh={})",
                self.c_ldev_kwh, self.c_mbu_kwh
            )));
        }
        if self.c_mbu_kwh > self.c_ldev_kwh {
            return Err(Error::InvalidConfig(format!(
                "c_mbu_kwh ({}) exceeds c_ldev_kwh ({})",
                self.c_mbu_kwh, self.c_ldev_kwh
            )));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if self.sv_mbu_capacity == 0 {
            return Err(Error::InvalidConfig("sv_mbu_capacity must be positive".into()));
        }
        Ok(())
    }

    /// Full-charge-equivalent factor `C_LDEV / C_MBU`.
    pub fn fce_factor(&self) -> Result<f64> {
        if !(self.c_mbu_kwh > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "c_mbu_kwh must be positive, got {}",
                self.c_mbu_kwh
            )));
        }
        Ok(self.c_ldev_kwh / self.c_mbu_kwh)
    }
}

/// Cost, price and baseline constants for the economic metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicConfig {
    /// SV unit price.
    pub q_sv: f64,
    /// Price of one four-module MBU set.
    pub q_mbu_set: f64,
    /// SV operating cost per mile.
    pub q_per_mile: f64,
    /// Labor cost per served request.
    pub q_labor: f64,
    /// Price per service.
    pub price: f64,
    /// Value of time per minute.
    pub kappa: f64,
    /// Electricity cost of one full LDEV charge.
    pub q_elec: f64,
    /// Mean time to visit and charge at a fixed station, minutes.
    pub t_fcs_min: f64,
    /// Mean detour distance to a fixed station, miles.
    pub d_fcs_mile: f64,
    /// Minutes over which the capital outlay is spread for per-minute profit.
    pub amortization_min: f64,
}

impl Default for EconomicConfig {
    fn default() -> Self {
        EconomicConfig {
            q_sv: 40_000.0,
            q_mbu_set: 10_000.0,
            q_per_mile: 0.573,
            q_labor: 10.0,
            price: 5.0,
            kappa: 1.0,
            q_elec: 6.75,
            t_fcs_min: 90.0,
            d_fcs_mile: 15.0,
            amortization_min: 1140.0,
        }
    }
}

impl EconomicConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("q_sv", self.q_sv),
            ("q_mbu_set", self.q_mbu_set),
            ("q_per_mile", self.q_per_mile),
            ("q_labor", self.q_labor),
            ("price", self.price),
            ("kappa", self.kappa),
            ("q_elec", self.q_elec),
            ("t_fcs_min", self.t_fcs_min),
            ("d_fcs_mile", self.d_fcs_mile),
            ("amortization_min", self.amortization_min),
        ];
        for (name, value) in fields {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        if self.amortization_min <= 0.0 {
            return Err(Error::InvalidConfig("amortization_min must be positive".into()));
        }
        Ok(())
    }
}

/// Stream tags for [`RandomSource::fork`].
pub mod stream {
    pub const DEMAND: u64 = 0x6465_6d61_6e64;
    pub const TRAVEL: u64 = 0x7472_6176_656c;
    pub const DISPATCH: u64 = 0x6469_7370_6174;
    pub const SYNTHETIC: u64 = 0x7379_6e74_6800;
}

/// Seeded, platform-independent random stream.
///
/// Child streams are derived with [`RandomSource::fork`] from the seed
/// alone, so they do not depend on how many draws the parent has made.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fork(&self, tags: &[u64]) -> RandomSource {
        let mut state = splitmix64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for &tag in tags {
            state = splitmix64(state ^ splitmix64(tag));
        }
        RandomSource::new(state)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
