use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use caas_core::dispatch::Policy;
use caas_core::domain::ZoneId;
use caas_core::experiment::{self, DepotPlan, RunSummary};
use caas_core::export::{export, export_depot_search, read_summaries};
use caas_core::scenario::{
    load_scenario, DepotChoice, ModelSource, Scenario, ScenarioConfig,
};
use caas_core::synth::SyntheticSpec;

#[derive(Parser)]
#[command(name = "caas", version, about = "Charging-as-a-service fleet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a scenario, then print its summary and hash.
    Validate { scenario: PathBuf },
    /// Write a scenario with a synthetic city model.
    GenSynth(GenSynth),
    /// Run one simulation.
    Run(RunArgs),
    /// Run every (fleet size, policy, seed) cell of a scenario.
    Sweep(SweepArgs),
    /// Rank every zone as a depot location by mean waiting time.
    DepotSearch(SearchArgs),
    /// Rebuild tables and manifest from a summaries file.
    Export {
        summaries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose zone labels should annotate the zone table.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Dispatch policy; repeatable.
    #[arg(long, value_enum)]
    policy: Vec<PolicyArg>,
    /// Fleet size; repeatable.
    #[arg(long)]
    fleet_size: Vec<u32>,
    /// Random seed; repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    /// Depot zone, overriding the scenario.
    #[arg(long)]
    depot: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for summaries, tables and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Drop per-tick series from the summaries.
    #[arg(long)]
    no_series: bool,
}

#[derive(Args)]
struct SearchArgs {
    scenario: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenSynth {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    zones: usize,
    #[arg(long, default_value_t = 1)]
    intervals: usize,
    #[arg(long, default_value_t = 0)]
    hotspots: usize,
    #[arg(long, default_value_t = 0.0)]
    hotspot_weight: f64,
    #[arg(long, default_value_t = 10.0)]
    extent_miles: f64,
    #[arg(long, default_value_t = 12.0)]
    speed_mph: f64,
    /// Trips per LDEV per minute.
    #[arg(long, default_value_t = 0.02)]
    k: f64,
    #[arg(long, default_value_t = 500)]
    ldev: u32,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    fleet_sizes: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    depot: usize,
    /// Seed of the city generator.
    #[arg(long, default_value_t = 1)]
    model_seed: u64,
    /// Store the generated matrices instead of the generator spec.
    #[arg(long, value_enum, default_value_t = Materialize::None)]
    materialize: Materialize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Materialize {
    None,
    Inline,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Fcfs,
    Oml,
    Omdd,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Fcfs => Policy::Fcfs,
            PolicyArg::Oml => Policy::Oml,
            PolicyArg::Omdd => Policy::Omdd,
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Validate { scenario } => validate(&scenario),
        Command::GenSynth(args) => gen_synth(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::DepotSearch(args) => depot_search(args),
        Command::Export { summaries, out, scenario } => reexport(&summaries, &out, scenario.as_deref()),
    }
}

fn load(path: &Path, o: &Overrides) -> Result<Scenario> {
    let mut s = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    let c = &mut s.config;
    if !o.policy.is_empty() {
        c.policies = o.policy.iter().map(|&p| p.into()).collect();
    }
    if !o.fleet_size.is_empty() {
        c.fleet_sizes = o.fleet_size.clone();
    }
    if !o.seed.is_empty() {
        c.seeds = o.seed.clone();
    }
    if let Some(z) = o.depot {
        if z >= s.model.n_zones() {
            bail!("depot zone {z} outside the {} zones", s.model.n_zones());
        }
        c.depot = DepotChoice::Zone(ZoneId(z));
    }
    Ok(s)
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let s = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    let c = &s.config;
    println!("scenario     {}", if c.name.is_empty() { "(unnamed)" } else { &c.name });
    println!("hash         {}", s.hash());
    println!("zones        {}", s.n_zones());
    println!("intervals    {}", s.model.n_intervals());
    println!("ldevs        {}", c.n_ldev);
    println!("depot        {}", c.depot);
    println!("fleet sizes  {:?}", c.fleet_sizes);
    println!("policies     {}", c.policies.iter().map(|p| p.name()).collect::<Vec<_>>().join(", "));
    println!("seeds        {}", c.seeds.len());
    println!("cells        {}", experiment::sweep_cells(&s).len());
    Ok(())
}

fn gen_synth(a: GenSynth) -> Result<()> {
    let mut spec = SyntheticSpec::new(a.zones, a.k, a.model_seed);
    spec.n_intervals = a.intervals;
    spec.hotspots = a.hotspots;
    spec.hotspot_weight = a.hotspot_weight;
    spec.extent_miles = a.extent_miles;
    spec.speed_mph = a.speed_mph;
    let mut config = ScenarioConfig::new(
        a.ldev,
        a.fleet_sizes,
        DepotChoice::Zone(ZoneId(a.depot)),
        a.seeds,
        ModelSource::Synthetic(spec),
    );
    config.name = format!("synthetic-{}", a.zones);
    let base = a.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut s = Scenario::from_config(config, &base)?;
    match a.materialize {
        Materialize::None => {}
        Materialize::Inline => s = s.to_inline(),
        Materialize::Csv => {
            let stem = a.out.file_stem().and_then(|x| x.to_str()).unwrap_or("scenario");
            s.config.model = ModelSource::Files {
                dir: PathBuf::from(format!("{stem}_matrices")),
                trips_per_ldev_per_min: s.model.intervals().iter().map(|m| m.trips_per_ldev_per_min).collect(),
            };
        }
    }
    s.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} ({} zones, hash {})", a.out.display(), s.n_zones(), s.hash());
    Ok(())
}

fn print_run(r: &RunSummary) {
    let m = &r.metrics;
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    println!(
        "fleet {:>4}  {:<4}  seed {:>4}  depot {:>4}  generated {:>6}  served {:>6}  wait {:>9}  fulfillment {:>7}  utilization {:>7}",
        r.fleet_size,
        r.policy.name(),
        r.seed,
        r.depot.0,
        m.generated,
        m.served,
        f(m.mean_wait_min),
        f(m.fulfillment_rate),
        f(m.utilization_rate),
    );
}

fn run(a: RunArgs) -> Result<()> {
    let s = load(&a.scenario, &a.overrides)?;
    let c = &s.config;
    let (fleet, policy, seed) = (c.fleet_sizes[0], c.policies[0], c.seeds[0]);
    let depot = experiment::resolve_depots(&s)?.get(policy)?;
    let demand = experiment::demand_model(&s)?;
    let r = experiment::run_cell(&s, &s.hash(), &demand, seed, fleet, policy, depot)?;
    print_run(&r);
    if let Some(out) = a.out {
        let files = export(std::slice::from_ref(&r), &[], &r.scenario_hash, &[seed], &c.zone_labels, &out)?;
        report_files(&files);
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    set_threads(a.threads)?;
    let s = load(&a.scenario, &a.overrides)?;
    let depots: DepotPlan = experiment::resolve_depots(&s)?;
    let cells = experiment::sweep_cells(&s).len();
    eprintln!("running {cells} cells on {} threads", rayon::current_num_threads());
    let started = std::time::Instant::now();
    let mut result = experiment::sweep(&s, &depots)?;
    eprintln!("finished in {:.1} s", started.elapsed().as_secs_f64());
    if a.no_series {
        for r in &mut result.summaries {
            r.series.clear();
        }
    }
    for r in &result.summaries {
        print_run(r);
    }
    for f in &result.failures {
        eprintln!("failed: fleet {} {} seed {}: {}", f.fleet_size, f.policy, f.seed, f.error);
    }
    let files = export(&result.summaries, &result.failures, &s.hash(), &s.config.seeds, &s.config.zone_labels, &a.out)?;
    report_files(&files);
    if !result.failures.is_empty() {
        bail!("{} of {cells} cells failed", result.failures.len());
    }
    Ok(())
}

fn depot_search(a: SearchArgs) -> Result<()> {
    set_threads(a.threads)?;
    let s = load(&a.scenario, &a.overrides)?;
    // an explicit --fleet-size replaces the search fleet
    let fleet = a.overrides.fleet_size.first().copied();
    let rankings = experiment::depot_search(&s, fleet)?;
    for r in &rankings {
        println!("policy {} (fleet {})", r.policy, r.fleet_size);
        for (k, c) in r.ranking.iter().take(10).enumerate() {
            let w = c.mean_wait_min.map_or("NA".to_string(), |x| format!("{x:.4}"));
            let label = c.label.as_deref().unwrap_or("");
            println!("  {:>3}. zone {:>4}  {:>10} min  {label}", k + 1, c.zone.0, w);
        }
        for g in &r.groups {
            let w = g.best_mean_wait_min.map_or("NA".to_string(), |x| format!("{x:.4}"));
            println!("  group {:<16} best zone {:>4}  {:>10} min", g.label, g.best_zone.0, w);
        }
        for f in &r.failures {
            eprintln!("  failed: {f}");
        }
    }
    if let Some(out) = a.out {
        report_files(&export_depot_search(&rankings, &out)?);
    }
    Ok(())
}

fn reexport(summaries: &Path, out: &Path, scenario: Option<&Path>) -> Result<()> {
    let runs = read_summaries(summaries)?;
    let hashes: BTreeSet<&str> = runs.iter().map(|r| r.scenario_hash.as_str()).collect();
    if hashes.len() > 1 {
        bail!("{} mixes runs from {} different scenarios", summaries.display(), hashes.len());
    }
    let hash = hashes.into_iter().next().unwrap_or("").to_string();
    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect::<BTreeSet<_>>().into_iter().collect();
    let labels = match scenario {
        Some(p) => load_scenario(p)?.config.zone_labels,
        None => Vec::new(),
    };
    report_files(&export(&runs, &[], &hash, &seeds, &labels, out)?);
    Ok(())
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}
