//! Service, economic and equity metrics computed from a run's ledger.

use serde::{Deserialize, Serialize};

use crate::domain::{EconomicConfig, EnergyConfig};

/// Largest exponent fed to `exp` in the logit; keeps the result finite.
const LOGIT_EXP_CLAMP: f64 = 700.0;

/// Accumulators filled by the simulation after warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub fleet_size: u32,
    pub sv_capacity: u32,
    /// Length of the collection window, minutes.
    pub collection_minutes: f64,
    /// Requests announced during the window.
    pub generated: u64,
    /// Of those, served by the horizon.
    pub cohort_served: u64,
    /// Of those, still waiting or en route at the horizon.
    pub cohort_open: u64,
    /// Of those, dropped after the maximum wait.
    pub cohort_expired: u64,
    /// Services completed during the window.
    pub served: u64,
    /// Waiting time of each service completed in the window, minutes.
    pub waits: Vec<f64>,
    pub zone_wait_sum: Vec<f64>,
    pub zone_served: Vec<u64>,
    pub sv_served: Vec<u64>,
    /// Fleet minutes spent in each SV state, ordered I, R, S, M, D.
    pub state_minutes: [f64; 5],
    /// Miles driven by the whole fleet during the window.
    pub sv_miles: f64,
}

impl MetricsLedger {
    pub fn new(n_zones: usize, fleet_size: u32, sv_capacity: u32, collection_minutes: f64) -> Self {
        MetricsLedger {
            fleet_size,
            sv_capacity,
            collection_minutes,
            generated: 0,
            cohort_served: 0,
            cohort_open: 0,
            cohort_expired: 0,
            served: 0,
            waits: Vec::new(),
            zone_wait_sum: vec![0.0; n_zones],
            zone_served: vec![0; n_zones],
            sv_served: vec![0; fleet_size as usize],
            state_minutes: [0.0; 5],
            sv_miles: 0.0,
        }
    }

    pub fn record_service(&mut self, sv: usize, zone: usize, wait_minutes: f64) {
        self.served += 1;
        self.waits.push(wait_minutes);
        self.zone_wait_sum[zone] += wait_minutes;
        self.zone_served[zone] += 1;
        self.sv_served[sv] += 1;
    }

    /// Mean waiting time of served requests; `None` when nothing was served.
    pub fn mean_wait(&self) -> Option<f64> {
        if self.waits.is_empty() {
            None
        } else {
            Some(self.waits.iter().sum::<f64>() / self.waits.len() as f64)
        }
    }

    /// Served share of the requests announced in the window.
    pub fn fulfillment_rate(&self) -> Option<f64> {
        (self.generated > 0).then(|| self.cohort_served as f64 / self.generated as f64)
    }

    /// Mean wait per zone, for zones with at least one service.
    pub fn zone_mean_waits(&self) -> Vec<f64> {
        self.zone_wait_sum
            .iter()
            .zip(&self.zone_served)
            .filter(|(_, &n)| n > 0)
            .map(|(&s, &n)| s / n as f64)
            .collect()
    }
}

/// Out-of-service time saved per request against a fixed-station visit:
/// `T_FCS - T_CaaS * C_LDEV / C_MBU`.
pub fn oos_saving(mean_wait: Option<f64>, econ: &EconomicConfig, energy: &EnergyConfig) -> Option<f64> {
    let fce = energy.c_ldev_kwh / energy.c_mbu_kwh;
    mean_wait.map(|w| econ.t_fcs_min - w * fce)
}

/// Charging miles saved per minute:
/// `(d_FCS * N_s - d_SV * C_LDEV / C_MBU) / dT`.
pub fn distance_saving(served: u64, sv_miles: f64, collection_minutes: f64, econ: &EconomicConfig, energy: &EnergyConfig) -> Option<f64> {
    if !(collection_minutes > 0.0) {
        return None;
    }
    let fce = energy.c_ldev_kwh / energy.c_mbu_kwh;
    Some((econ.d_fcs_mile * served as f64 - sv_miles * fce) / collection_minutes)
}

/// One-time capital outlay `N_SV * (Q_SV + C * Q_MBU)`.
pub fn capital_cost(fleet_size: u32, capacity: u32, econ: &EconomicConfig) -> f64 {
    fleet_size as f64 * (econ.q_sv + capacity as f64 * econ.q_mbu_set)
}

/// Total cost: capital plus fleet mileage at `q` plus labor per service.
pub fn total_cost(fleet_size: u32, capacity: u32, sv_miles: f64, served: u64, econ: &EconomicConfig) -> f64 {
    capital_cost(fleet_size, capacity, econ) + sv_miles * econ.q_per_mile + econ.q_labor * served as f64
}

/// Binary-logit probability of choosing the delivery service over a fixed
/// charging station, given the wait in minutes.
pub fn adoption_probability(wait_minutes: f64, econ: &EconomicConfig, energy: &EnergyConfig) -> f64 {
    let fce = energy.c_ldev_kwh / energy.c_mbu_kwh;
    let u_caas = -(econ.price + econ.kappa * wait_minutes) * fce - econ.q_elec;
    let u_fcs = -econ.kappa * econ.t_fcs_min - econ.q_elec;
    let x = (u_fcs - u_caas).clamp(-LOGIT_EXP_CLAMP, LOGIT_EXP_CLAMP);
    1.0 / (1.0 + x.exp())
}

/// Expected revenue `price * sum_i P_adopt(W_i)` over served requests.
pub fn expected_revenue(waits: &[f64], econ: &EconomicConfig, energy: &EnergyConfig) -> f64 {
    econ.price * waits.iter().map(|&w| adoption_probability(w, econ, energy)).sum::<f64>()
}

/// Profit per minute: operating margin over the window minus capital
/// spread over `amortization_min`.
pub fn profit_per_minute(ledger: &MetricsLedger, econ: &EconomicConfig, energy: &EnergyConfig) -> Option<f64> {
    if !(ledger.collection_minutes > 0.0) {
        return None;
    }
    let revenue = expected_revenue(&ledger.waits, econ, energy);
    let operating = econ.q_labor * ledger.served as f64 + ledger.sv_miles * econ.q_per_mile;
    let capital = capital_cost(ledger.fleet_size, ledger.sv_capacity, econ);
    Some((revenue - operating) / ledger.collection_minutes - capital / econ.amortization_min)
}

/// Gini coefficient `sum_ij |v_i - v_j| / (2 n^2 mean)`, evaluated with the
/// sorted-rank identity. Zero for an empty or all-zero input.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    // the rank weights sum to zero, so shifting by the minimum changes nothing
    // but makes constant inputs come out exactly zero
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * (v - min))
        .sum();
    weighted / (n as f64 * total)
}

/// Share of fleet time spent relocating or serving.
pub fn utilization_rate(ledger: &MetricsLedger) -> Option<f64> {
    let denom = ledger.fleet_size as f64 * ledger.collection_minutes;
    (denom > 0.0).then(|| (ledger.state_minutes[1] + ledger.state_minutes[2]) / denom)
}

/// Scalar metrics of one run. `None` marks a metric that is undefined for
/// the run (for example a mean wait with no served request).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub generated: u64,
    pub served: u64,
    pub cohort_served: u64,
    pub open_at_horizon: u64,
    pub expired: u64,
    pub mean_wait_min: Option<f64>,
    pub fulfillment_rate: Option<f64>,
    pub utilization_rate: Option<f64>,
    pub sv_miles: f64,
    pub collection_minutes: f64,
    pub oos_saving_min: Option<f64>,
    pub distance_saving_mile_per_min: Option<f64>,
    pub total_cost: f64,
    pub mean_adoption_probability: Option<f64>,
    pub expected_revenue: f64,
    pub profit_per_min: Option<f64>,
    pub gini_zone_wait: Option<f64>,
    pub gini_sv_served: Option<f64>,
}

impl MetricsSummary {
    pub fn from_ledger(ledger: &MetricsLedger, econ: &EconomicConfig, energy: &EnergyConfig) -> Self {
        let mean_wait = ledger.mean_wait();
        let zone_waits = ledger.zone_mean_waits();
        let sv_served: Vec<f64> = ledger.sv_served.iter().map(|&c| c as f64).collect();
        MetricsSummary {
            generated: ledger.generated,
            served: ledger.served,
            cohort_served: ledger.cohort_served,
            open_at_horizon: ledger.cohort_open,
            expired: ledger.cohort_expired,
            mean_wait_min: mean_wait,
            fulfillment_rate: ledger.fulfillment_rate(),
            utilization_rate: utilization_rate(ledger),
            sv_miles: ledger.sv_miles,
            collection_minutes: ledger.collection_minutes,
            oos_saving_min: oos_saving(mean_wait, econ, energy),
            distance_saving_mile_per_min: distance_saving(ledger.served, ledger.sv_miles, ledger.collection_minutes, econ, energy),
            total_cost: total_cost(ledger.fleet_size, ledger.sv_capacity, ledger.sv_miles, ledger.served, econ),
            mean_adoption_probability: (!ledger.waits.is_empty()).then(|| {
                ledger.waits.iter().map(|&w| adoption_probability(w, econ, energy)).sum::<f64>() / ledger.waits.len() as f64
            }),
            expected_revenue: expected_revenue(&ledger.waits, econ, energy),
            profit_per_min: profit_per_minute(ledger, econ, energy),
            gini_zone_wait: (!zone_waits.is_empty()).then(|| gini(&zone_waits)),
            gini_sv_served: (!sv_served.is_empty()).then(|| gini(&sv_served)),
        }
    }

    /// Metric names and values in a fixed order, for tabular export.
    pub fn named_values(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("generated", Some(self.generated as f64)),
            ("served", Some(self.served as f64)),
            ("cohort_served", Some(self.cohort_served as f64)),
            ("open_at_horizon", Some(self.open_at_horizon as f64)),
            ("expired", Some(self.expired as f64)),
            ("mean_wait_min", self.mean_wait_min),
            ("fulfillment_rate", self.fulfillment_rate),
            ("utilization_rate", self.utilization_rate),
            ("sv_miles", Some(self.sv_miles)),
            ("oos_saving_min", self.oos_saving_min),
            ("distance_saving_mile_per_min", self.distance_saving_mile_per_min),
            ("total_cost", Some(self.total_cost)),
            ("mean_adoption_probability", self.mean_adoption_probability),
            ("expected_revenue", Some(self.expected_revenue)),
            ("profit_per_min", self.profit_per_min),
            ("gini_zone_wait", self.gini_zone_wait),
            ("gini_sv_served", self.gini_sv_served),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RandomSource;
    use proptest::prelude::*;
    use rand::Rng;

    fn table() -> (EconomicConfig, EnergyConfig) {
        (EconomicConfig::default(), EnergyConfig::default())
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-12)
    }

    fn gini_double_sum(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for a in v {
            for b in v {
                s += (a - b).abs();
            }
        }
        s / (2.0 * n * n * mean)
    }

    #[test]
    fn oos_saving_values() {
        let (econ, energy) = table();
        // 90 - 5 * 50/14
        assert!((oos_saving(Some(5.0), &econ, &energy).unwrap() - 72.142_857).abs() < 1e-3);
        assert!(oos_saving(Some(90.0 * 14.0 / 50.0), &econ, &energy).unwrap().abs() < 1e-12);
        assert_eq!(oos_saving(Some(0.0), &econ, &energy), Some(90.0));
        assert_eq!(oos_saving(None, &econ, &energy), None);
    }

    #[test]
    fn distance_saving_values() {
        let (econ, energy) = table();
        // (15 * 1000 - 2000 * 50/14) / 1140
        let v = distance_saving(1000, 2000.0, 1140.0, &econ, &energy).unwrap();
        assert!((v - 6.892).abs() < 1e-3, "{v}");
        assert_eq!(distance_saving(0, 0.0, 1140.0, &econ, &energy), Some(0.0));
        let even = distance_saving(1000, 15.0 * 1000.0 * 14.0 / 50.0, 1140.0, &econ, &energy).unwrap();
        assert!(even.abs() < 1e-9);
        assert_eq!(distance_saving(1, 1.0, 0.0, &econ, &energy), None);
    }

    #[test]
    fn total_cost_values() {
        let (econ, _) = table();
        let c = total_cost(250, 50, 25_000.0, 5000, &econ);
        assert!(rel_close(c, 135_064_325.0, 1e-12), "{c}");
        assert_eq!(total_cost(0, 50, 0.0, 0, &econ), 0.0);
        let capital_only = EconomicConfig {
            q_per_mile: 0.0,
            q_labor: 0.0,
            ..econ.clone()
        };
        assert_eq!(total_cost(3, 50, 99.0, 7, &capital_only), 3.0 * (40_000.0 + 50.0 * 10_000.0));
    }

    #[test]
    fn adoption_values() {
        let (econ, energy) = table();
        // indifference: (p + W) * fce = T_FCS
        let w_even = 90.0 * 14.0 / 50.0 - econ.price;
        assert!((adoption_probability(w_even, &econ, &energy) - 0.5).abs() < 1e-12);
        // U_CaaS - U_FCS = -(5 + 5) * 50/14 + 90 = 54.2857...
        let p = adoption_probability(5.0, &econ, &energy);
        let expected = 1.0 / (1.0 + (-(90.0 - 10.0 * 50.0 / 14.0f64)).exp());
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);
        assert!(adoption_probability(1e6, &econ, &energy) < 1e-200);
        assert!(adoption_probability(1e300, &econ, &energy).is_finite());
    }

    #[test]
    fn gini_closed_forms() {
        assert_eq!(gini(&[3.7; 9]), 0.0);
        assert_eq!(gini(&[1.0, 0.0, 0.0, 0.0]), 0.75);
        assert_eq!(gini(&[0.0, 0.0]), 0.0);
        assert_eq!(gini(&[]), 0.0);
    }

    #[test]
    fn gini_matches_double_sum() {
        let mut rng = RandomSource::new(19);
        for _ in 0..20 {
            let v: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 30.0).collect();
            assert!((gini(&v) - gini_double_sum(&v)).abs() < 1e-12);
        }
    }

    fn ledger_with(fleet: u32, minutes: f64) -> MetricsLedger {
        MetricsLedger::new(3, fleet, 50, minutes)
    }

    #[test]
    fn utilization_cases() {
        let mut l = ledger_with(4, 100.0);
        l.state_minutes = [400.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(utilization_rate(&l), Some(0.0));
        l.state_minutes = [0.0, 250.0, 150.0, 0.0, 0.0];
        assert_eq!(utilization_rate(&l), Some(1.0));
        let mut one = ledger_with(1, 100.0);
        one.state_minutes = [50.0, 50.0, 0.0, 0.0, 0.0];
        assert_eq!(utilization_rate(&one), Some(0.5));
        assert_eq!(utilization_rate(&ledger_with(0, 100.0)), None);
    }

    #[test]
    fn profit_cases() {
        let (econ, energy) = table();
        let l = ledger_with(10, 1140.0);
        assert!(profit_per_minute(&l, &econ, &energy).unwrap() < 0.0);

        let mut l = ledger_with(10, 1140.0);
        l.record_service(0, 1, 4.0);
        l.record_service(1, 2, 12.0);
        l.sv_miles = 30.0;
        let free = EconomicConfig { price: 0.0, ..econ.clone() };
        let got = profit_per_minute(&l, &free, &energy).unwrap();
        let want = -(free.q_labor * 2.0 + 30.0 * free.q_per_mile) / 1140.0 - capital_cost(10, 50, &free) / free.amortization_min;
        assert!((got - want).abs() < 1e-9);

        let mut last = f64::NEG_INFINITY;
        for p in [2.0, 5.0, 10.0] {
            let e = EconomicConfig { price: p, ..econ.clone() };
            let v = profit_per_minute(&l, &e, &energy).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn ledger_rates() {
        let mut l = ledger_with(2, 60.0);
        assert_eq!(l.mean_wait(), None);
        assert_eq!(l.fulfillment_rate(), None);
        l.generated = 4;
        l.cohort_served = 3;
        l.cohort_open = 1;
        l.record_service(0, 0, 2.0);
        l.record_service(1, 0, 4.0);
        l.record_service(1, 2, 9.0);
        assert_eq!(l.mean_wait(), Some(5.0));
        assert_eq!(l.fulfillment_rate(), Some(0.75));
        let f = l.fulfillment_rate().unwrap();
        assert_eq!(f, 1.0 - (l.cohort_open + l.cohort_expired) as f64 / l.generated as f64);
        // zone 1 has no service and is left out
        assert_eq!(l.zone_mean_waits(), vec![3.0, 9.0]);
    }

    #[test]
    fn summary_marks_undefined() {
        let (econ, energy) = table();
        let s = MetricsSummary::from_ledger(&ledger_with(5, 100.0), &econ, &energy);
        assert_eq!(s.mean_wait_min, None);
        assert_eq!(s.oos_saving_min, None);
        assert_eq!(s.gini_zone_wait, None);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"mean_wait_min\":null"));
    }

    proptest! {
        #[test]
        fn gini_scale_invariant_and_bounded(v in proptest::collection::vec(0.0f64..100.0, 1..40), c in 0.01f64..1000.0) {
            let g = gini(&v);
            let n = v.len() as f64;
            prop_assert!(g >= 0.0 && g <= (n - 1.0) / n + 1e-12);
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            prop_assert!((gini(&scaled) - g).abs() < 1e-9);
        }

        #[test]
        fn adoption_strictly_decreasing(w in 0.0f64..60.0, dw in 0.01f64..5.0, p in 0.0f64..20.0, dp in 0.01f64..5.0) {
            let energy = EnergyConfig::default();
            let base = EconomicConfig { price: p, ..EconomicConfig::default() };
            let pricier = EconomicConfig { price: p + dp, ..base.clone() };
            // stay out of the saturated region where both round to 1.0
            let a = adoption_probability(w + 20.0, &base, &energy);
            prop_assert!(adoption_probability(w + 20.0 + dw, &base, &energy) < a);
            prop_assert!(adoption_probability(w + 20.0, &pricier, &energy) < a);
        }

        #[test]
        fn savings_are_linear(w1 in 0.0f64..50.0, w2 in 0.0f64..50.0, d1 in 0.0f64..5000.0, d2 in 0.0f64..5000.0) {
            let (econ, energy) = (EconomicConfig::default(), EnergyConfig::default());
            let fce = 50.0 / 14.0;
            if (w1 - w2).abs() > 1e-6 {
                let slope = (oos_saving(Some(w1), &econ, &energy).unwrap() - oos_saving(Some(w2), &econ, &energy).unwrap()) / (w1 - w2);
                prop_assert!((slope + fce).abs() < 1e-9);
            }
            if (d1 - d2).abs() > 1e-3 {
                let s1 = distance_saving(100, d1, 1140.0, &econ, &energy).unwrap();
                let s2 = distance_saving(100, d2, 1140.0, &econ, &energy).unwrap();
                prop_assert!(((s1 - s2) / (d1 - d2) + fce / 1140.0).abs() < 1e-9);
            }
        }
    }
}
