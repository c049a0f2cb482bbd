//! Acceptance suite. Runs every criterion, prints one PASS or FAIL line per
//! criterion and exits nonzero if any failed.
//!
//! Set `CAAS_FULL_SWEEP=1` to time the complete 960-cell city-scale sweep
//! instead of extrapolating it from one seed per cell.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use caas_core::demand::{stationary_distribution, DemandState};
use caas_core::dispatch::{solve_assignment, AppendAnchor, CostMatrix, Policy};
use caas_core::domain::{EconomicConfig, EnergyConfig};
use caas_core::experiment::{demand_model, run};
use caas_core::metrics::{adoption_probability, distance_saving, gini, oos_saving, total_cost, MetricsSummary};
use caas_core::scenario::{load_scenario, Scenario};
use caas_core::sim::{audit_insertions, World};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const DESK_FLEETS: [u32; 4] = [5, 10, 20, 40];
const UNDERSUPPLIED_FLEET: u32 = 10;
const OMDD_TARGET_FULFILLMENT: f64 = 0.95;
const CITY_FLEET: u32 = 250;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Per-run outcome of a simulation stepped tick by tick with external checks.
struct Checked {
    metrics: MetricsSummary,
    elapsed: Duration,
    insertions: usize,
    audit_failures: Vec<String>,
    conservation_failures: Vec<String>,
}

/// Totals of the external checks over every run of the suite.
#[derive(Default)]
struct Ledger {
    runs: usize,
    ticks: u64,
    conservation_failures: Vec<String>,
    omdd_runs: usize,
    insertions: usize,
    audit_failures: Vec<String>,
}

impl Ledger {
    fn absorb(&mut self, label: &str, c: &Checked, ticks: u64) {
        self.runs += 1;
        self.ticks += ticks;
        self.conservation_failures
            .extend(c.conservation_failures.iter().map(|m| format!("{label}: {m}")));
        if c.insertions > 0 || !c.audit_failures.is_empty() {
            self.omdd_runs += 1;
        }
        self.insertions += c.insertions;
        self.audit_failures.extend(c.audit_failures.iter().map(|m| format!("{label}: {m}")));
    }
}

/// Steps one run to the horizon. Every tick it recounts request conservation
/// from the tick reports and the fleet, checks each SV's MBU inventory and
/// checks that the full sets an SV holds equal what it reloaded minus what it
/// has served since.
fn run_checked(
    scenario: &Scenario,
    demand: &DemandState,
    seed: u64,
    fleet: u32,
    policy: Policy,
    anchor: AppendAnchor,
) -> Checked {
    let start = Instant::now();
    let depot = scenario.depot().expect("acceptance scenarios fix the depot");
    let mut cfg = scenario.sim_config(fleet, policy, depot);
    cfg.audit_insertions = policy == Policy::Omdd;
    cfg.omdd_append_anchor = anchor;
    let cap = cfg.energy.sv_mbu_capacity;
    let horizon = cfg.grid.horizon_ticks;
    let tick_minutes = cfg.grid.tick_minutes;
    let mut world = World::with_demand(cfg, &scenario.model, demand.clone(), seed).expect("valid acceptance config");

    let mut failures = Vec::new();
    let (mut generated, mut served, mut expired) = (0u64, 0u64, 0u64);
    // full sets at the start of the current depot cycle and services since
    let mut cycle: Vec<(u32, u32)> = world.fleet().iter().map(|sv| (sv.full_sets, sv.served)).collect();
    let mut reports = Vec::with_capacity(horizon as usize);
    while world.next_tick() < horizon {
        let r = match world.step() {
            Ok(r) => r,
            Err(e) => {
                failures.push(e.to_string());
                break;
            }
        };
        generated += r.generated as u64;
        served += r.served as u64;
        expired += r.expired as u64;
        if generated != served + r.live as u64 + expired {
            failures.push(format!(
                "tick {}: generated {generated} != served {served} + open {} + unserved {expired}",
                r.tick, r.live
            ));
        }
        let committed: u64 = world.fleet().iter().map(|sv| sv.committed as u64).sum();
        if r.live as u64 != r.unassigned as u64 + committed {
            failures.push(format!(
                "tick {}: open {} != unassigned {} + committed {committed}",
                r.tick, r.live, r.unassigned
            ));
        }
        for (sv, c) in world.fleet().iter().zip(cycle.iter_mut()) {
            if sv.full_sets + sv.depleted_sets != cap {
                failures.push(format!(
                    "tick {}: SV {} holds {} + {} sets, capacity {cap}",
                    r.tick, sv.id, sv.full_sets, sv.depleted_sets
                ));
            }
            let expected = c.0 as i64 - (sv.served - c.1) as i64;
            if (sv.full_sets as i64) > expected {
                if sv.full_sets != cap {
                    failures.push(format!("tick {}: SV {} reloaded to {} sets", r.tick, sv.id, sv.full_sets));
                }
                *c = (sv.full_sets, sv.served);
            } else if sv.full_sets as i64 != expected {
                failures.push(format!(
                    "tick {}: SV {} has {} full sets, expected {expected}",
                    r.tick, sv.id, sv.full_sets
                ));
            }
        }
        reports.push(r);
    }
    let out = world.finish(reports);
    let c = &scenario.config;
    Checked {
        metrics: MetricsSummary::from_ledger(&out.ledger, &c.economics, &c.energy),
        elapsed: start.elapsed(),
        insertions: out.insertions.len(),
        audit_failures: audit_insertions(&out.insertions, &scenario.model, tick_minutes),
        conservation_failures: failures,
    }
}

fn brute_force_min(c: &[Vec<f64>]) -> f64 {
    fn go(c: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == c.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                go(c, row + 1, used, acc + c[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
    best
}

fn assignment_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut mismatches = 0;
    for k in 0..1000 {
        let n = 2 + k % 6;
        // integer costs make every objective exactly representable
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(0..1000) as f64).collect())
            .collect();
        if solve_assignment(&CostMatrix::from_rows(&rows)).objective != brute_force_min(&rows) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        mismatches == 0 && secs < 10.0,
        format!("1000 matrices 2x2..7x7, {mismatches} mismatches, {secs:.2} s"),
    )
}

fn stationarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for k in 0..100 {
        let n = 1 + rng.random_range(0..50);
        let sparse = k % 2 == 1;
        let mut p = Array2::from_shape_fn((n, n), |(i, j)| {
            if sparse && i != j && rng.random_bool(0.7) {
                0.0
            } else {
                rng.random::<f64>()
            }
        });
        for mut row in p.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        match stationary_distribution(p.view(), 1e-10) {
            Ok(pi) => worst = worst.max((pi.dot(&p) - &pi).mapv(f64::abs).sum()),
            Err(_) => errors += 1,
        }
    }
    Outcome::new(
        errors == 0 && worst <= 1e-8,
        format!("100 matrices n<=50, worst residual {worst:.2e}, {errors} solver errors"),
    )
}

fn metric_formulas() -> Outcome {
    let econ = EconomicConfig::default();
    let energy = EnergyConfig::default();
    let rel = |got: f64, want: f64| (got - want).abs() <= 1e-3 * want.abs();
    let oos = oos_saving(Some(5.0), &econ, &energy).unwrap();
    let dist = distance_saving(1000, 2000.0, 1140.0, &econ, &energy).unwrap();
    let cost = total_cost(250, 50, 25_000.0, 5000, &econ);
    let adopt = adoption_probability(5.0, &econ, &energy);
    let g = gini(&[1.0, 0.0, 0.0, 0.0]);
    let checks = [
        ("oos", rel(oos, 72.143)),
        ("distance", rel(dist, 6.892)),
        ("cost", rel(cost, 135_064_325.0)),
        ("adoption", (adopt - 1.0).abs() < 1e-12),
        ("gini", rel(g, 0.75)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome::new(
        failed.is_empty(),
        format!(
            "oos {oos:.3}, distance {dist:.3}, cost {cost:.0}, adoption {adopt:.15}, gini {g}{}",
            if failed.is_empty() { String::new() } else { format!(", off: {failed:?}") }
        ),
    )
}

fn gini_closed_forms() -> Outcome {
    let mut bad = Vec::new();
    for n in 2..=10usize {
        if gini(&vec![2.5; n]) != 0.0 {
            bad.push(format!("equal n={n}"));
        }
        let mut v = vec![0.0; n];
        v[n / 2] = 3.0;
        if gini(&v) != (n as f64 - 1.0) / n as f64 {
            bad.push(format!("single n={n}"));
        }
    }
    Outcome::new(bad.is_empty(), format!("n=2..10, {} failures {bad:?}", bad.len()))
}

type Grid = BTreeMap<(Policy, u32, u64), MetricsSummary>;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn series(grid: &Grid, policy: Policy, fleet: u32, seeds: &[u64], f: impl Fn(&MetricsSummary) -> f64) -> Vec<f64> {
    seeds.iter().map(|&s| f(&grid[&(policy, fleet, s)])).collect()
}

fn wait(m: &MetricsSummary) -> f64 {
    m.mean_wait_min.unwrap_or(f64::NAN)
}

fn fulfillment(m: &MetricsSummary) -> f64 {
    m.fulfillment_rate.unwrap_or(f64::NAN)
}

fn policy_ordering(grid: &Grid, seeds: &[u64], secs: f64) -> Outcome {
    let f = UNDERSUPPLIED_FLEET;
    let (fc, fc_se) = mean_se(&series(grid, Policy::Fcfs, f, seeds, wait));
    let mut pass = secs < 120.0;
    let mut parts = vec![format!("fcfs {fc:.1}±{fc_se:.1}")];
    for p in [Policy::Oml, Policy::Omdd] {
        let (m, se) = mean_se(&series(grid, p, f, seeds, wait));
        pass &= fc - m > fc_se.max(se);
        parts.push(format!("{p} {m:.1}±{se:.1}"));
    }
    Outcome::new(
        pass,
        format!("{f} SVs, {} seeds, mean wait min {}, {secs:.1} s", seeds.len(), parts.join(", ")),
    )
}

fn monotonicity(grid: &Grid, seeds: &[u64]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in Policy::ALL {
        let mut inversions = 0;
        for &s in seeds {
            for w in DESK_FLEETS.windows(2) {
                let (a, b) = (&grid[&(p, w[0], s)], &grid[&(p, w[1], s)]);
                // a metric that turns undefined counts as an inversion
                inversions += usize::from(!(wait(b) <= wait(a))) + usize::from(!(fulfillment(b) >= fulfillment(a)));
            }
        }
        pass &= inversions <= 1;
        parts.push(format!("{p} {inversions}"));
    }
    Outcome::new(
        pass,
        format!("fleets {DESK_FLEETS:?}, inversions per policy: {} (limit 1 each)", parts.join(", ")),
    )
}

fn best_fulfillment(grid: &Grid, seeds: &[u64]) -> (u32, f64) {
    DESK_FLEETS
        .iter()
        .map(|&f| (f, mean_se(&series(grid, Policy::Omdd, f, seeds, fulfillment)).0))
        .fold((0, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b })
}

fn high_fulfillment(grid: &Grid, seeds: &[u64]) -> Outcome {
    let (fleet, rate) = best_fulfillment(grid, seeds);
    Outcome::new(
        rate >= OMDD_TARGET_FULFILLMENT,
        format!("best OMDD fulfillment {rate:.3} at {fleet} SVs (target {OMDD_TARGET_FULFILLMENT})"),
    )
}

fn determinism(desk: &Scenario) -> Outcome {
    let mut diffs = Vec::new();
    for p in Policy::ALL {
        let a = run(desk, 7, UNDERSUPPLIED_FLEET, p).expect("desk run").to_json();
        let b = run(desk, 7, UNDERSUPPLIED_FLEET, p).expect("desk run").to_json();
        if a != b {
            diffs.push(p.to_string());
        }
    }
    Outcome::new(
        diffs.is_empty(),
        format!("two runs per policy at seed 7, differing: {diffs:?}"),
    )
}

/// Single-threaded run time of the city-scale scenario, the slowest policy,
/// and the wall time of the full sweep, measured or extrapolated.
fn performance(city: &Scenario, demand: &DemandState, ledger: &mut Ledger) -> Outcome {
    let seed = city.config.seeds[0];
    let mut slowest = (Policy::Fcfs, 0.0f64);
    for p in Policy::ALL {
        let c = run_checked(city, demand, seed, CITY_FLEET, p, city.config.omdd_append_anchor);
        ledger.absorb(&format!("city {p} {CITY_FLEET} seed {seed}"), &c, city.config.time.horizon_ticks as u64);
        if c.elapsed.as_secs_f64() > slowest.1 {
            slowest = (p, c.elapsed.as_secs_f64());
        }
    }

    let threads = rayon::current_num_threads();
    let cells: Vec<(u32, Policy, u64)> = city
        .config
        .fleet_sizes
        .iter()
        .flat_map(|&f| Policy::ALL.map(|p| (f, p)))
        .flat_map(|(f, p)| city.config.seeds.iter().map(move |&s| (f, p, s)))
        .collect();
    let full = std::env::var_os("CAAS_FULL_SWEEP").is_some();
    let sample: Vec<_> = if full {
        cells.clone()
    } else {
        cells.iter().copied().filter(|c| c.2 == seed).collect()
    };
    let start = Instant::now();
    let results: Vec<(String, Checked)> = sample
        .par_iter()
        .map(|&(f, p, s)| {
            let c = run_checked(city, demand, s, f, p, city.config.omdd_append_anchor);
            (format!("city {p} {f} seed {s}"), c)
        })
        .collect();
    let sample_secs = start.elapsed().as_secs_f64();
    for (label, c) in &results {
        ledger.absorb(label, c, city.config.time.horizon_ticks as u64);
    }
    let sweep_secs = sample_secs * cells.len() as f64 / sample.len() as f64;
    let how = if full {
        "measured".to_string()
    } else {
        format!("extrapolated from {} cells in {sample_secs:.1} s", sample.len())
    };
    Outcome::new(
        slowest.1 < 60.0 && sweep_secs < 1800.0,
        format!(
            "{} zones, {CITY_FLEET} SVs, {} LDEVs: slowest run {} {:.2} s; {}-cell sweep on {threads} threads {sweep_secs:.0} s ({how})",
            city.n_zones(),
            city.config.n_ldev,
            slowest.0,
            slowest.1,
            cells.len()
        ),
    )
}

fn main() -> ExitCode {
    let desk = load_scenario(&scenario_path("desk.toml")).expect("desk scenario loads");
    let city = load_scenario(&scenario_path("city.toml")).expect("city scenario loads");
    let desk_demand = demand_model(&desk).expect("desk demand model");
    let city_demand = demand_model(&city).expect("city demand model");
    let seeds = desk.config.seeds.clone();
    assert_eq!(seeds.len(), 20);
    assert_eq!(desk.config.fleet_sizes, DESK_FLEETS);

    let mut ledger = Ledger::default();
    let mut grid = Grid::new();
    let mut undersupplied_secs = 0.0;
    let horizon = desk.config.time.horizon_ticks as u64;
    for &f in &DESK_FLEETS {
        for p in Policy::ALL {
            for &s in &seeds {
                let c = run_checked(&desk, &desk_demand, s, f, p, desk.config.omdd_append_anchor);
                if f == UNDERSUPPLIED_FLEET {
                    undersupplied_secs += c.elapsed.as_secs_f64();
                }
                ledger.absorb(&format!("desk {p} {f} seed {s}"), &c, horizon);
                grid.insert((p, f, s), c.metrics);
            }
        }
    }
    // the same OMDD grid with the append cost measured from the last stop
    let mut alt = Grid::new();
    for &f in &DESK_FLEETS {
        for &s in &seeds {
            let c = run_checked(&desk, &desk_demand, s, f, Policy::Omdd, AppendAnchor::LastStop);
            ledger.absorb(&format!("desk omdd last-stop {f} seed {s}"), &c, horizon);
            alt.insert((Policy::Omdd, f, s), c.metrics);
        }
    }

    let mut results: Vec<(&str, Outcome)> = vec![
        ("assignment exactness", assignment_exactness()),
        ("stationarity", stationarity()),
        ("metric formulas", metric_formulas()),
        ("gini closed forms", gini_closed_forms()),
        ("policy ordering", policy_ordering(&grid, &seeds, undersupplied_secs)),
        ("fleet-size monotonicity", monotonicity(&grid, &seeds)),
        ("high fulfillment", high_fulfillment(&grid, &seeds)),
    ];
    let determinism = determinism(&desk);
    let performance = performance(&city, &city_demand, &mut ledger);

    let conservation = Outcome::new(
        ledger.conservation_failures.is_empty(),
        format!(
            "{} runs, {} ticks checked, {} violations{}",
            ledger.runs,
            ledger.ticks,
            ledger.conservation_failures.len(),
            ledger.conservation_failures.first().map(|m| format!(", first: {m}")).unwrap_or_default()
        ),
    );
    let audit = Outcome::new(
        ledger.audit_failures.is_empty() && ledger.insertions > 0,
        format!(
            "{} OMDD runs, {} insertions replayed, {} violations{}",
            ledger.omdd_runs,
            ledger.insertions,
            ledger.audit_failures.len(),
            ledger.audit_failures.first().map(|m| format!(", first: {m}")).unwrap_or_default()
        ),
    );
    results.push(("conservation", conservation));
    results.push(("determinism", determinism));
    results.push(("performance", performance));
    results.push(("insertion audit", audit));

    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        failed += usize::from(!o.pass);
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    let (fleet, rate) = best_fulfillment(&alt, &seeds);
    let (w, _) = mean_se(&series(&alt, Policy::Omdd, fleet, &seeds, wait));
    println!("note: with the append cost measured from the last stop, best OMDD fulfillment is {rate:.3} at {fleet} SVs, mean wait {w:.1} min");
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
