//! Stationary charging-demand model.
//!
//! LDEV movements within each time interval are treated as a Markov chain
//! over zones. Its stationary distribution, the expected energy spent on the
//! trip into each zone, and the charging threshold give a per-zone
//! probability that an arriving LDEV needs a recharge. Arrivals of charging
//! requests are then Poisson with rate
//! `K * pi_i * (N_LDEV - N_w) * P(charge at i)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::{Poisson, StandardNormal};

use crate::domain::{EnergyConfig, RandomSource, TimeGrid, ZoneId};
use crate::error::{Error, Result};
use crate::request::{ChargingRequest, RequestId};

/// Tolerance on row sums of transition matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const STATIONARY_MAX_ITERATIONS: usize = 1_000_000;

/// Model inputs that hold for one time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrices {
    /// Zone-to-zone transition probabilities, row-stochastic.
    pub p: Array2<f64>,
    /// Expected energy use per trip, kWh.
    pub e: Array2<f64>,
    /// Log-normal location parameter of travel time in minutes.
    pub mu: Array2<f64>,
    /// Log-normal scale parameter of travel time.
    pub sigma: Array2<f64>,
    /// Average trips completed per LDEV per minute (K).
    pub trips_per_ldev_per_min: f64,
}

/// A realized relocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Travel {
    pub ticks: u32,
    pub miles: f64,
}

/// Per-interval transition, energy and travel-time matrices plus the
/// (time-invariant) OD distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    n_zones: usize,
    intervals: Vec<IntervalMatrices>,
    distance: Array2<f64>,
    expected_minutes: Vec<Array2<f64>>,
}

impl TransitionModel {
    pub fn new(intervals: Vec<IntervalMatrices>, distance: Array2<f64>) -> Result<Self> {
        let n = distance.nrows();
        if n == 0 {
            return Err(Error::ScenarioData("model must have at least one zone".into()));
        }
        if intervals.is_empty() {
            return Err(Error::ScenarioData("model must have at least one interval".into()));
        }
        check_square(&distance, n, "distance", None)?;
        for ((i, j), &d) in distance.indexed_iter() {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::ScenarioData(format!(
                    "distance[{i}][{j}] = {d} must be finite and nonnegative"
                )));
            }
        }
        for (t, m) in intervals.iter().enumerate() {
            check_square(&m.p, n, "p", Some(t))?;
            check_square(&m.e, n, "e", Some(t))?;
            check_square(&m.mu, n, "mu", Some(t))?;
            check_square(&m.sigma, n, "sigma", Some(t))?;
            for (i, row) in m.p.outer_iter().enumerate() {
                if let Some(j) = row.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::ScenarioData(format!(
                        "interval {t}: p[{i}][{j}] = {} is not a probability",
                        row[j]
                    )));
                }
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::ScenarioData(format!(
                        "interval {t}: row {i} of p sums to {sum}, expected 1"
                    )));
                }
            }
            for ((i, j), &v) in m.e.indexed_iter() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::ScenarioData(format!(
                        "interval {t}: e[{i}][{j}] = {v} must be finite and nonnegative"
                    )));
                }
            }
            for ((i, j), &v) in m.sigma.indexed_iter() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::ScenarioData(format!(
                        "interval {t}: sigma[{i}][{j}] = {v} must be finite and nonnegative"
                    )));
                }
            }
            for ((i, j), &v) in m.mu.indexed_iter() {
                if !v.is_finite() {
                    return Err(Error::ScenarioData(format!(
                        "interval {t}: missing travel time, mu[{i}][{j}] = {v}"
                    )));
                }
            }
            if !(m.trips_per_ldev_per_min >= 0.0) || !m.trips_per_ldev_per_min.is_finite() {
                return Err(Error::ScenarioData(format!(
                    "interval {t}: trips_per_ldev_per_min = {} must be nonnegative",
                    m.trips_per_ldev_per_min
                )));
            }
        }
        let expected_minutes = intervals
            .iter()
            .map(|m| {
                Array2::from_shape_fn((n, n), |(i, j)| {
                    let s = m.sigma[[i, j]];
                    if i == j && s == 0.0 {
                        0.0
                    } else {
                        (m.mu[[i, j]] + 0.5 * s * s).exp()
                    }
                })
            })
            .collect();
        Ok(TransitionModel {
            n_zones: n,
            intervals,
            distance,
            expected_minutes,
        })
    }

    pub fn n_zones(&self) -> usize {
        self.n_zones
    }

    pub fn n_intervals(&self) -> usize {
        self.intervals.len()
    }

    pub fn interval(&self, t: usize) -> &IntervalMatrices {
        &self.intervals[t]
    }

    pub fn intervals(&self) -> &[IntervalMatrices] {
        &self.intervals
    }

    pub fn distance(&self) -> &Array2<f64> {
        &self.distance
    }

    #[inline]
    pub fn miles(&self, from: ZoneId, to: ZoneId) -> f64 {
        self.distance[[from.0, to.0]]
    }

    /// Mean of the log-normal travel time, `exp(mu + sigma^2 / 2)` minutes.
    /// Zero for a zone to itself when its self-travel has no variance.
    #[inline]
    pub fn expected_minutes(&self, t: usize, from: ZoneId, to: ZoneId) -> f64 {
        self.expected_minutes[t][[from.0, to.0]]
    }

    /// One log-normal draw of travel time in minutes.
    pub fn sample_minutes(&self, t: usize, from: ZoneId, to: ZoneId, rng: &mut RandomSource) -> f64 {
        let m = &self.intervals[t];
        let (i, j) = (from.0, to.0);
        let sigma = m.sigma[[i, j]];
        if sigma == 0.0 {
            if i == j {
                return 0.0;
            }
            return m.mu[[i, j]].exp();
        }
        let z: f64 = StandardNormal.sample(rng);
        (m.mu[[i, j]] + sigma * z).exp()
    }

    /// Draws a relocation: travel time rounded up to whole ticks (at least
    /// one tick between distinct zones) and the OD distance.
    pub fn realize_travel(
        &self,
        from: ZoneId,
        to: ZoneId,
        t: usize,
        grid: &TimeGrid,
        rng: &mut RandomSource,
    ) -> Travel {
        let minutes = self.sample_minutes(t, from, to, rng);
        let mut ticks = grid.ticks_for_minutes(minutes);
        if from != to {
            ticks = ticks.max(1);
        }
        Travel {
            ticks,
            miles: self.miles(from, to),
        }
    }
}

fn check_square(m: &Array2<f64>, n: usize, name: &str, interval: Option<usize>) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        let at = interval.map(|t| format!("interval {t}: ")).unwrap_or_default();
        return Err(Error::ScenarioData(format!(
            "{at}{name} has shape {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Stationary distribution of a row-stochastic matrix by power iteration on
/// the lazy chain `(I + P) / 2`, which shares its fixed point with `P` but is
/// aperiodic. Stops once `||pi P - pi||_1 <= tol`.
pub fn stationary_distribution(p: ArrayView2<f64>, tol: f64) -> Result<Array1<f64>> {
    let n = p.nrows();
    assert_eq!(n, p.ncols(), "transition matrix must be square");
    assert!(n > 0, "transition matrix must be nonempty");
    assert!(tol > 0.0, "tolerance must be positive");

    let mut pi = Array1::from_elem(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITERATIONS {
        let next = pi.dot(&p);
        residual = next.iter().zip(pi.iter()).map(|(a, b)| (a - b).abs()).sum();
        if residual <= tol {
            return Ok(pi);
        }
        if !residual.is_finite() {
            break;
        }
        pi = normalized((&pi + &next) * 0.5);
    }
    Err(Error::Convergence {
        iterations: STATIONARY_MAX_ITERATIONS,
        residual,
    })
}

fn normalized(mut v: Array1<f64>) -> Array1<f64> {
    v.mapv_inplace(|x| x.max(0.0));
    let s = v.sum();
    if s > 0.0 {
        v /= s;
    }
    v
}

/// Expected energy used on the trip into each zone:
/// `e_i = sum_j pi_j P_ji E_ji / sum_j pi_j P_ji`, zero for zones without inflow.
pub fn expected_consumption(p: ArrayView2<f64>, e: ArrayView2<f64>, pi_bar: ArrayView1<f64>) -> Array1<f64> {
    let n = p.nrows();
    let mut num = Array1::<f64>::zeros(n);
    let mut den = Array1::<f64>::zeros(n);
    for j in 0..n {
        let w = pi_bar[j];
        if w == 0.0 {
            continue;
        }
        let prow = p.row(j);
        let erow = e.row(j);
        for i in 0..n {
            let flow = w * prow[i];
            num[i] += flow * erow[i];
            den[i] += flow;
        }
    }
    Array1::from_shape_fn(n, |i| if den[i] > 0.0 { num[i] / den[i] } else { 0.0 })
}

/// Probability that an LDEV arriving in a zone is below the charging
/// threshold, `pi_i e_i / (C_LDEV (1 - delta))` clamped to `[0, 1]`.
pub fn charge_probability(pi_bar_i: f64, e_bar_i: f64, cfg: &EnergyConfig) -> Result<f64> {
    if !(0.0..1.0).contains(&cfg.delta) {
        return Err(Error::InvalidConfig(format!(
            "delta must lie in [0, 1), got {}",
            cfg.delta
        )));
    }
    let p = pi_bar_i * e_bar_i / (cfg.c_ldev_kwh * (1.0 - cfg.delta));
    Ok(p.clamp(0.0, 1.0))
}

/// Charging-request arrival rate per minute in one zone.
pub fn arrival_rate(k: f64, pi_bar_i: f64, n_ldev: u32, n_waiting: u32, p_charge_i: f64) -> f64 {
    let active = n_ldev.saturating_sub(n_waiting) as f64;
    (k * pi_bar_i * active * p_charge_i).max(0.0)
}

/// Demand quantities derived from one interval's matrices.
#[derive(Debug, Clone)]
pub struct IntervalDemand {
    pub pi_bar: Array1<f64>,
    pub e_bar: Array1<f64>,
    pub p_charge: Array1<f64>,
    pub k: f64,
    /// Origin sampler per destination zone, weights `pi_j P_ji`; `None`
    /// for zones without inflow.
    origin: Vec<Option<WeightedIndex<f64>>>,
}

/// Precomputed demand model plus the live count of LDEVs waiting for service.
#[derive(Debug, Clone)]
pub struct DemandState {
    pub intervals: Vec<IntervalDemand>,
    pub n_ldev: u32,
    pub n_waiting: u32,
    /// When false the rate ignores `n_waiting`, so the request stream no
    /// longer depends on how fast the fleet serves it.
    pub waiting_feedback: bool,
    issued: u32,
}

impl DemandState {
    pub fn new(model: &TransitionModel, energy: &EnergyConfig, n_ldev: u32, tol: f64) -> Result<Self> {
        let mut intervals = Vec::with_capacity(model.n_intervals());
        for m in model.intervals() {
            let pi_bar = stationary_distribution(m.p.view(), tol)?;
            let e_bar = expected_consumption(m.p.view(), m.e.view(), pi_bar.view());
            let p_charge = pi_bar
                .iter()
                .zip(e_bar.iter())
                .map(|(&pi, &e)| charge_probability(pi, e, energy))
                .collect::<Result<Array1<f64>>>()?;
            let n = model.n_zones();
            let origin = (0..n)
                .map(|i| {
                    let weights: Vec<f64> = (0..n).map(|j| pi_bar[j] * m.p[[j, i]]).collect();
                    WeightedIndex::new(weights).ok()
                })
                .collect();
            intervals.push(IntervalDemand {
                pi_bar,
                e_bar,
                p_charge,
                k: m.trips_per_ldev_per_min,
                origin,
            });
        }
        Ok(DemandState {
            intervals,
            n_ldev,
            n_waiting: 0,
            waiting_feedback: true,
            issued: 0,
        })
    }

    /// Current arrival rate per minute in `zone` during interval `t`.
    pub fn rate(&self, zone: ZoneId, t: usize) -> f64 {
        let d = &self.intervals[t];
        let waiting = if self.waiting_feedback { self.n_waiting } else { 0 };
        arrival_rate(d.k, d.pi_bar[zone.0], self.n_ldev, waiting, d.p_charge[zone.0])
    }

    /// Total requests issued so far.
    pub fn issued(&self) -> u32 {
        self.issued
    }

    /// Records that a waiting LDEV left the queue (served or gave up).
    pub fn release(&mut self) {
        debug_assert!(self.n_waiting > 0);
        self.n_waiting = self.n_waiting.saturating_sub(1);
    }
}

/// Draws this tick's charging requests.
///
/// Each zone gets an independent Poisson count with mean `rate * tick_minutes`.
/// A request's lead time is a travel-time draw from an origin zone picked in
/// proportion to its inflow weight. Every (tick, zone) pair draws from its
/// own stream forked off `rng`, so the draws never depend on what other
/// subsystems consumed.
pub fn sample_requests(
    tick: u32,
    state: &mut DemandState,
    model: &TransitionModel,
    grid: &TimeGrid,
    rng: &RandomSource,
) -> Vec<ChargingRequest> {
    let t = grid.interval_of(tick, model.n_intervals());
    let mut out = Vec::new();
    // rates are frozen at the start of the tick
    let rates: Vec<f64> = (0..model.n_zones())
        .map(|i| state.rate(ZoneId(i), t) * grid.tick_minutes)
        .collect();
    for (i, &mean) in rates.iter().enumerate() {
        if !(mean > 0.0) {
            continue;
        }
        let mut zrng = rng.fork(&[tick as u64, i as u64]);
        let count = match Poisson::new(mean) {
            Ok(dist) => dist.sample(&mut zrng) as u32,
            Err(_) => continue,
        };
        if count == 0 {
            continue;
        }
        let Some(origin) = state.intervals[t].origin[i].as_ref() else {
            continue;
        };
        let zone = ZoneId(i);
        for _ in 0..count {
            let from = ZoneId(origin.sample(&mut zrng));
            let lead = model.realize_travel(from, zone, t, grid, &mut zrng).ticks;
            let id: RequestId = state.issued;
            state.issued += 1;
            out.push(ChargingRequest::new(id, zone, from, tick, tick + lead));
        }
        state.n_waiting += count;
    }
    out
}
