//! Synthetic city generator: a stand-in for transition and travel-time
//! matrices estimated from real trip records.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{IntervalMatrices, TransitionModel};
use crate::domain::RandomSource;
use crate::error::{Error, Result};

pub const KM_PER_MILE: f64 = 1.609344;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_zones: usize,
    #[serde(default = "SyntheticSpec::default_n_intervals")]
    pub n_intervals: usize,
    /// Zones `0..hotspots` attract the extra destination mass.
    #[serde(default)]
    pub hotspots: usize,
    /// Share of every row's mass sent to the hotspots, in [0, 1].
    #[serde(default)]
    pub hotspot_weight: f64,
    /// Side of the square the zone centroids are drawn from.
    #[serde(default = "SyntheticSpec::default_extent")]
    pub extent_miles: f64,
    /// Road distance over straight-line distance.
    #[serde(default = "SyntheticSpec::default_detour")]
    pub detour_factor: f64,
    #[serde(default = "SyntheticSpec::default_speed")]
    pub speed_mph: f64,
    /// Log-normal scale of every travel time.
    #[serde(default = "SyntheticSpec::default_sigma")]
    pub travel_sigma: f64,
    /// Destination attractiveness decays as (d + 1)^-gravity_exponent.
    #[serde(default = "SyntheticSpec::default_gravity")]
    pub gravity_exponent: f64,
    #[serde(default = "SyntheticSpec::default_efficiency")]
    pub km_per_kwh: f64,
    /// Trips per LDEV per minute before the interval profile is applied.
    pub trips_per_ldev_per_min: f64,
    /// Multiplier on K per interval, cycled if shorter than `n_intervals`.
    #[serde(default)]
    pub k_profile: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    fn default_n_intervals() -> usize {
        1
    }
    fn default_extent() -> f64 {
        10.0
    }
    fn default_detour() -> f64 {
        1.3
    }
    fn default_speed() -> f64 {
        12.0
    }
    fn default_sigma() -> f64 {
        0.3
    }
    fn default_gravity() -> f64 {
        1.0
    }
    fn default_efficiency() -> f64 {
        5.0
    }

    pub fn new(n_zones: usize, trips_per_ldev_per_min: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_zones,
            n_intervals: Self::default_n_intervals(),
            hotspots: 0,
            hotspot_weight: 0.0,
            extent_miles: Self::default_extent(),
            detour_factor: Self::default_detour(),
            speed_mph: Self::default_speed(),
            travel_sigma: Self::default_sigma(),
            gravity_exponent: Self::default_gravity(),
            km_per_kwh: Self::default_efficiency(),
            trips_per_ldev_per_min,
            k_profile: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("synthetic model: {m}")));
        if self.n_zones == 0 || self.n_intervals == 0 {
            return bad("n_zones and n_intervals must be positive".into());
        }
        if self.hotspots > self.n_zones {
            return bad(format!("{} hotspots but only {} zones", self.hotspots, self.n_zones));
        }
        if !(0.0..=1.0).contains(&self.hotspot_weight) {
            return bad(format!("hotspot_weight {} outside [0, 1]", self.hotspot_weight));
        }
        for (name, v) in [
            ("extent_miles", self.extent_miles),
            ("detour_factor", self.detour_factor),
            ("speed_mph", self.speed_mph),
            ("km_per_kwh", self.km_per_kwh),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("travel_sigma", self.travel_sigma),
            ("gravity_exponent", self.gravity_exponent),
            ("trips_per_ldev_per_min", self.trips_per_ldev_per_min),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if let Some((t, v)) = self.k_profile.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return bad(format!("k_profile[{t}] = {v} must be nonnegative"));
        }
        Ok(())
    }

    fn k_multiplier(&self, t: usize) -> f64 {
        if self.k_profile.is_empty() {
            1.0
        } else {
            self.k_profile[t % self.k_profile.len()]
        }
    }
}

/// Builds a row-stochastic model from `spec`. Centroids are uniform in a
/// square; distances are detoured Euclidean, with the diagonal set to a
/// typical within-zone trip. Each P row mixes a gravity kernel with a
/// uniform pull towards the hotspots. Mean travel time is distance over
/// speed; energy per trip is distance over efficiency.
pub fn generate_synthetic(spec: &SyntheticSpec, rng: &mut RandomSource) -> Result<TransitionModel> {
    spec.validate()?;
    let n = spec.n_zones;
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random::<f64>() * spec.extent_miles,
                rng.random::<f64>() * spec.extent_miles,
            )
        })
        .collect();
    let intrazone = 0.25 * spec.extent_miles / (n as f64).sqrt();
    let distance = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            intrazone
        } else {
            let (dx, dy) = (xy[i].0 - xy[j].0, xy[i].1 - xy[j].1);
            // keep distinct zones at least as far apart as a within-zone trip
            (spec.detour_factor * dx.hypot(dy)).max(intrazone)
        }
    });

    let p = transition_matrix(&distance, spec);
    let s2 = spec.travel_sigma * spec.travel_sigma;
    let mu = distance.mapv(|d| (d / spec.speed_mph * 60.0).ln() - s2 / 2.0);
    let sigma = Array2::from_elem((n, n), spec.travel_sigma);
    let e = distance.mapv(|d| d * KM_PER_MILE / spec.km_per_kwh);

    let intervals = (0..spec.n_intervals)
        .map(|t| IntervalMatrices {
            p: p.clone(),
            e: e.clone(),
            mu: mu.clone(),
            sigma: sigma.clone(),
            trips_per_ldev_per_min: spec.trips_per_ldev_per_min * spec.k_multiplier(t),
        })
        .collect();
    TransitionModel::new(intervals, distance)
}

fn transition_matrix(distance: &Array2<f64>, spec: &SyntheticSpec) -> Array2<f64> {
    let n = distance.nrows();
    let w = if spec.hotspots == 0 { 0.0 } else { spec.hotspot_weight };
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let gravity: Array1<f64> = distance
            .row(i)
            .mapv(|d| (d + 1.0).powf(-spec.gravity_exponent));
        let gsum = gravity.sum();
        for j in 0..n {
            let hot = if j < spec.hotspots { 1.0 / spec.hotspots as f64 } else { 0.0 };
            p[[i, j]] = (1.0 - w) * gravity[j] / gsum + w * hot;
        }
        let total = p.row(i).sum();
        p.row_mut(i).mapv_inplace(|v| v / total);
    }
    p
}
