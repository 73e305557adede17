use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rendezvous_core::comms::connectivity_csv;
use rendezvous_core::config::{BenchManifest, PolicyKind, SimConfig};
use rendezvous_core::engine::{self, RunMetrics};
use rendezvous_core::maps;
use rendezvous_core::plan::{to_jssp_with, EnvEstimates, PlanDocument, PlanReport, SyncRule};
use rendezvous_core::solver::evolve;
use rendezvous_core::CellState;

#[derive(Parser)]
#[command(name = "rendezvous", version, about = "Multi-robot exploration with planned rendezvous")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a rendezvous plan with the genetic solver.
    Plan(PlanArgs),
    /// Print metrics and the schedule of a plan document, or describe a map.
    Inspect(InspectArgs),
    /// Simulate one mission.
    Run(RunArgs),
    /// Run every map, policy and seed of a manifest.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    robots: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    crossover: Option<f64>,
    #[arg(long)]
    mutation: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    structural: Option<f64>,
    #[arg(long)]
    elitism: Option<usize>,
    /// Four comma-separated weights for h1..h4.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Two comma-separated weights for g1, g2.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    min_agreements: Option<usize>,
    #[arg(long)]
    max_agreements: Option<usize>,
    #[arg(long)]
    min_steps: Option<u32>,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long)]
    max_team: Option<usize>,
    /// `sync_at_end` or `sync_at_start`.
    #[arg(long)]
    sync_rule: Option<String>,
    /// Mission area in cells.
    #[arg(long)]
    omega_a: Option<f64>,
    /// Area already explored, in cells.
    #[arg(long)]
    omega_e: Option<f64>,
    /// Cells revealed per exploration step.
    #[arg(long)]
    explore_rate: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: Common,
    /// Plan document to report on.
    plan: Option<PathBuf>,
    /// Describe a map (`builtin:NAME` or a path) instead.
    #[arg(long, conflicts_with = "plan")]
    map: Option<String>,
    /// `sync_at_end` or `sync_at_start`.
    #[arg(long)]
    sync_rule: Option<String>,
}

#[derive(Args, Clone)]
struct SimOverrides {
    /// `builtin:NAME` or a path to an ASCII map.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    robots: Option<usize>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    vis_radius: Option<u32>,
    #[arg(long)]
    comm_range: Option<f64>,
    #[arg(long)]
    step_cap: Option<u64>,
    #[arg(long)]
    timeout: Option<u32>,
    /// Plan document to use instead of generating one.
    #[arg(long)]
    plan: Option<String>,
    #[arg(long)]
    explore_rate: Option<f64>,
    #[arg(long)]
    log_decisions: bool,
}

impl SimOverrides {
    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(m) = &self.map {
            cfg.map = m.clone();
        }
        if let Some(v) = self.robots {
            cfg.robots = v;
        }
        if let Some(v) = self.policy {
            cfg.policy = v;
        }
        if let Some(v) = self.vis_radius {
            cfg.vis_radius = v;
        }
        if let Some(v) = self.comm_range {
            cfg.comm_range = v;
        }
        if let Some(v) = self.step_cap {
            cfg.step_cap = v;
        }
        if self.timeout.is_some() {
            cfg.timeout = self.timeout;
        }
        if self.plan.is_some() {
            cfg.plan = self.plan.clone();
        }
        if self.explore_rate.is_some() {
            cfg.explore_rate = self.explore_rate;
        }
        if self.log_decisions {
            cfg.log_decisions = true;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimOverrides,
}

#[derive(Args)]
struct BenchArgs {
    /// `--config` names a manifest; `--seed` offsets every manifest seed.
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    maps: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    sim: SimOverrides,
}

fn load_sim(common: &Common) -> Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_plan(args: &PlanArgs) -> Result<()> {
    let cfg = load_sim(&args.common)?;
    let mut ga = cfg.ga.clone();
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field.clone() {
                ga.$field = v;
            }
        )*};
    }
    set!(population, generations, crossover, mutation, jitter, structural, elitism, alpha, beta);
    set!(min_agreements, max_agreements, min_steps, max_steps, sync_rule);
    if args.max_team.is_some() {
        ga.max_team = args.max_team;
    }
    let defaults = EnvEstimates::default();
    let env = EnvEstimates {
        omega_a: args.omega_a.unwrap_or(defaults.omega_a),
        omega_e: args.omega_e.unwrap_or(defaults.omega_e),
        explore_rate: args.explore_rate.or(cfg.explore_rate).unwrap_or(defaults.explore_rate),
    };
    let robots = args.robots.unwrap_or(cfg.robots);
    let ga_cfg = ga.to_config(cfg.seed, env)?;
    let evo = evolve(robots, &ga_cfg)?;
    let doc = PlanDocument { k: evo.best.k.clone(), w: evo.best.w.clone(), sync_row: None };
    let dir = out_dir(&args.common)?;
    write(&dir, "plan.txt", &doc.to_string())?;
    write(&dir, "fitness.csv", &engine::history_csv(&evo.history))?;
    println!(
        "best fitness {} after {} generations (initial {})",
        evo.history.last().copied().unwrap_or(f64::NAN),
        ga_cfg.generations,
        evo.initial_best.fitness.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    if let Some(source) = &args.map {
        let map = maps::resolve(source)?;
        let (w, h) = map.dims();
        println!("size={w}x{h}");
        println!("free={}", map.count(CellState::Free));
        println!("obstacle={}", map.count(CellState::Obstacle));
        print!("{}", map.to_ascii());
        return Ok(());
    }
    let Some(path) = &args.plan else {
        bail!("inspect needs a plan document or --map");
    };
    let cfg = load_sim(&args.common)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = PlanDocument::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let rule: SyncRule = match &args.sync_rule {
        Some(r) => r.parse().map_err(anyhow::Error::msg)?,
        None => cfg.ga.sync_rule.parse().map_err(anyhow::Error::msg)?,
    };
    let ga = cfg.ga.to_config(cfg.seed, EnvEstimates::default())?;
    let inst = to_jssp_with(&doc.k, &doc.w, rule)?;
    let report = PlanReport::new(&inst, &doc.k, &ga.weights, &ga.env, doc.sync_row)?;
    print!("{report}");
    let schedule = engine::schedule_csv(&inst);
    match &args.common.out {
        Some(_) => write(&out_dir(&args.common)?, "schedule.csv", &schedule)?,
        None => print!("\n{schedule}"),
    }
    Ok(())
}

fn write_run(dir: &Path, m: &RunMetrics, decisions: bool) -> Result<()> {
    write(dir, "metrics.csv", &engine::metrics_csv(std::slice::from_ref(m)))?;
    write(dir, "coverage.csv", &engine::coverage_csv(m))?;
    write(dir, "connectivity.csv", &connectivity_csv(&m.connectivity))?;
    write(dir, "agreements.csv", &engine::agreements_csv(m))?;
    if decisions {
        write(dir, "decisions.csv", &engine::decisions_csv(&m.decisions))?;
    }
    if let Some(doc) = &m.initial_plan {
        write(dir, "plan.txt", &doc.to_string())?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut cfg = load_sim(&args.common)?;
    args.sim.apply(&mut cfg);
    cfg.validate()?;
    let dir = out_dir(&args.common)?;
    let m = engine::run(&cfg)?;
    write_run(&dir, &m, cfg.log_decisions)?;
    match m.steps_to_finish {
        Some(s) => println!("{} {} seed {}: finished in {s} steps, return {}", m.map, m.policy, m.seed, m.return_value),
        None => println!("{} {} seed {}: unfinished after {} steps", m.map, m.policy, m.seed, m.steps_run),
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let mut manifest = match &args.common.config {
        Some(p) => BenchManifest::load(p)?,
        None => BenchManifest::default(),
    };
    if let Some(m) = &args.maps {
        manifest.maps = m.clone();
    }
    if let Some(p) = &args.policies {
        manifest.policies = p.clone();
    }
    if let Some(s) = &args.seeds {
        manifest.seeds = s.clone();
    }
    if let Some(offset) = args.common.seed {
        for s in &mut manifest.seeds {
            *s = s.wrapping_add(offset);
        }
    }
    args.sim.apply(&mut manifest.base);
    let cfgs = manifest.expand();
    for c in &cfgs {
        c.validate()?;
    }
    let dir = out_dir(&args.common)?;

    let mut done: Vec<(&SimConfig, RunMetrics)> = Vec::new();
    let mut failed = Vec::new();
    for c in &cfgs {
        log::info!("running {} / {} / seed {}", c.map, c.policy, c.seed);
        match engine::run(c) {
            Ok(m) => done.push((c, m)),
            Err(e) => failed.push(format!("{} / {} / seed {}: {e}", c.map, c.policy, c.seed)),
        }
    }
    let runs: Vec<RunMetrics> = done.iter().map(|(_, m)| m.clone()).collect();
    let pairs: Vec<(&SimConfig, &RunMetrics)> = done.iter().map(|(c, m)| (*c, m)).collect();
    let rows = engine::summarize(&pairs);
    write(&dir, "metrics.csv", &engine::metrics_csv(&runs))?;
    write(&dir, "summary.csv", &engine::summary_csv(&rows))?;

    println!("{:<22} {:<16} {:>5} {:>12} {:>10} {:>12} {:>10}", "map", "policy", "runs", "steps", "sd", "return", "sd");
    for r in &rows {
        println!(
            "{:<22} {:<16} {:>5} {:>12.1} {:>10.1} {:>12.3} {:>10.3}",
            r.map, r.policy.to_string(), r.runs, r.mean_steps, r.std_steps, r.mean_return, r.std_return
        );
    }
    if failed.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} of {} runs failed:", failed.len(), cfgs.len());
    for f in &failed {
        eprintln!("  {f}");
    }
    Ok(ExitCode::FAILURE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a).map(|_| ExitCode::SUCCESS),
        Command::Inspect(a) => cmd_inspect(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => cmd_run(a).map(|_| ExitCode::SUCCESS),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
