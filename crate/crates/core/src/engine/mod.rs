//! Deterministic simulation loop.
//!
//! Each step runs sense → exchange → decide → deliver → select → move.
//! Controllers see a snapshot of the step (their own merged map and the
//! beacons broadcast at the end of the previous step), so results do not
//! depend on the order robots are visited in.

mod report;

pub use report::{
    agreements_csv, batch, coverage_csv, decisions_csv, history_csv, metrics_csv, schedule_csv, summarize, summary_csv,
    BatchRow,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::comms::{connectivity, deliver, exchange, Beacon, ConnectivityGraph, Envelope};
use crate::config::{ConfigError, PolicyKind, SimConfig};
use crate::gridworld::{CellState, FrontierSet, GridMap, Pose};
use crate::maps::{resolve, MapSourceError};
use crate::plan::{EnvEstimates, PlanDocument, PlanError, RendezvousPlan};
use crate::policy::{
    select_joint, AgreementRecord, BaselineController, ControllerSettings, Mode, Observation,
    RendezvousController, Status, TeamMember,
};
use crate::solver::{calibrate_explore_rate, evolve, GaConfig, SolverError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Map(#[from] MapSourceError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot read plan {path}: {source}")]
    PlanFile {
        path: String,
        source: std::io::Error,
    },
    #[error("map has no free cells")]
    NoFreeCells,
    #[error("start cell {0} is not a free cell with a free neighbour")]
    BadStart(Pose),
    #[error("plan is for {plan} robots but the run has {run}")]
    PlanSize { plan: usize, run: usize },
}

/// One frontier selection, with everything needed to re-price it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub step: u64,
    pub robot: usize,
    pub pose: Pose,
    pub target: Pose,
    /// Unknown cells within sensing radius of the target.
    pub gain: usize,
    /// Path length from pose to target.
    pub cost: u32,
    /// Map centre of mass and rendezvous location fed to the prioritisation term.
    pub center: (f64, f64),
    pub rendezvous: Pose,
    /// The target was already claimed by a teammate, so the utility was negated.
    pub shared: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRecord {
    pub step: u64,
    pub robot: usize,
    pub mode: Mode,
    pub target: Option<Pose>,
    pub row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub map: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub robots: usize,
    pub start: Pose,
    /// First step at which no robot had a reachable frontier in its own map.
    pub steps_to_finish: Option<u64>,
    /// Steps simulated, including the trip home.
    pub steps_run: u64,
    pub return_value: f64,
    /// Known cells in the union of local maps, after sensing, per step.
    pub coverage: Vec<usize>,
    /// Known cells of the ground truth's reachable area, the coverage ceiling.
    pub reachable_known: usize,
    /// Union of every robot's local map at the end of the run.
    pub union: GridMap,
    pub complete: bool,
    pub agreements: Vec<AgreementRecord>,
    /// Connectivity graphs of the steps that had at least one edge.
    pub connectivity: Vec<ConnectivityGraph>,
    /// Robot poses at the start of every step.
    pub trajectory: Vec<Vec<Pose>>,
    pub actions: Vec<ActionRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub initial_plan: Option<PlanDocument>,
    pub plan_updates: usize,
    pub deliveries: usize,
    /// Known cells of the map held by the base station and relays.
    pub delivered_known: usize,
    pub relays: Vec<Pose>,
    pub dropped_messages: usize,
}

impl RunMetrics {
    /// Steps to finish, or the cap for runs that never finished.
    pub fn finish_or_cap(&self, cap: u64) -> u64 {
        self.steps_to_finish.unwrap_or(cap)
    }

    /// Newly revealed union cells per step.
    pub fn explored_per_step(&self) -> Vec<usize> {
        let mut prev = 0;
        self.coverage
            .iter()
            .map(|&c| {
                let d = c - prev;
                prev = c;
                d
            })
            .collect()
    }
}

#[allow(clippy::large_enum_variant)]
enum Controller {
    Rendezvous(RendezvousController),
    Baseline(BaselineController),
}

impl Controller {
    fn status(&self) -> Status {
        match self {
            Controller::Rendezvous(c) => c.status(),
            Controller::Baseline(c) => c.status(),
        }
    }

    fn mode(&self) -> Mode {
        self.status().mode
    }

    fn wants_target(&self) -> bool {
        match self {
            Controller::Rendezvous(c) => c.wants_target(),
            Controller::Baseline(c) => c.wants_target(),
        }
    }

    fn explorer_mut(&mut self) -> &mut crate::policy::Explorer {
        match self {
            Controller::Rendezvous(c) => c.explorer_mut(),
            Controller::Baseline(c) => c.explorer_mut(),
        }
    }

    fn hint(&self, home: Pose) -> Pose {
        match self {
            Controller::Rendezvous(c) => c.rendezvous_hint(),
            Controller::Baseline(_) => home,
        }
    }

    fn goal(&self) -> Option<Pose> {
        match self {
            Controller::Rendezvous(c) => c.goal(),
            Controller::Baseline(c) => c.goal(),
        }
    }
}

fn pick_start(truth: &GridMap, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Pose, SimError> {
    let ok = |p: Pose| truth.is_free(p) && truth.neighbors4(p).any(|n| truth.is_free(n));
    if let Some([x, y]) = cfg.start {
        let p = Pose::new(x, y);
        return if truth.contains(p) && ok(p) { Ok(p) } else { Err(SimError::BadStart(p)) };
    }
    let cells: Vec<Pose> = truth.poses().filter(|&p| ok(p)).collect();
    cells.choose(rng).copied().ok_or(SimError::NoFreeCells)
}

fn ga_config(cfg: &SimConfig, seed: u64, truth: &GridMap, explore_rate: f64) -> Result<GaConfig, SimError> {
    let env = EnvEstimates {
        omega_a: truth.area() as f64,
        omega_e: 0.0,
        explore_rate,
    };
    let ga = cfg.ga.to_config(seed, env)?;
    ga.validate(cfg.robots)?;
    Ok(ga)
}

/// Builds the starting plan: loaded from the configured document, or
/// generated by the solver. Sync runs get a whole-team row appended.
pub fn initial_plan(
    cfg: &SimConfig,
    truth: &GridMap,
    home: Pose,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(RendezvousPlan, GaConfig)>, SimError> {
    if cfg.robots < 2 || cfg.policy.baseline().is_some() {
        return Ok(None);
    }
    let explore_rate = match cfg.explore_rate {
        Some(x) => x,
        None => calibrate_explore_rate(truth, &truth.blank_like(), cfg.vis_radius, cfg.pilot_trials, cfg.pilot_horizon, rng)?,
    };
    let ga = ga_config(cfg, rand::Rng::gen(rng), truth, explore_rate)?;
    let (k, w, mut sync) = match &cfg.plan {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| SimError::PlanFile {
                path: path.clone(),
                source: e,
            })?;
            let doc = PlanDocument::parse(&text)?;
            (doc.k, doc.w, doc.sync_row)
        }
        None => {
            let evo = evolve(cfg.robots, &ga)?;
            (evo.best.k, evo.best.w, None)
        }
    };
    if k.robots() != cfg.robots {
        return Err(SimError::PlanSize { plan: k.robots(), run: cfg.robots });
    }
    let (k, w) = if cfg.policy == PolicyKind::RendezvousSync && sync.is_none() {
        let (k, w, row) = RendezvousPlan::with_sync_row_appended(&k, &w)?;
        sync = Some(row);
        (k, w)
    } else {
        (k, w)
    };
    let plan = RendezvousPlan::new(k, w, sync, home)?;
    Ok(Some((plan, ga)))
}

pub fn run(cfg: &SimConfig) -> Result<RunMetrics, SimError> {
    cfg.validate()?;
    let truth = resolve(&cfg.map)?;
    run_on(cfg, &truth)
}

/// Runs `cfg` on an already-loaded ground-truth map.
pub fn run_on(cfg: &SimConfig, truth: &GridMap) -> Result<RunMetrics, SimError> {
    cfg.validate()?;
    if truth.count(CellState::Free) == 0 {
        return Err(SimError::NoFreeCells);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let home = pick_start(truth, cfg, &mut rng)?;
    let n = cfg.robots;
    let (w, h) = truth.dims();
    let timeout = cfg.timeout.unwrap_or(2 * (w + h) as u32);
    let plan = initial_plan(cfg, truth, home, &mut rng)?;
    let initial_doc = plan.as_ref().map(|(p, _)| p.to_document());

    let mut ctrls: Vec<Controller> = (0..n)
        .map(|r| match cfg.policy.baseline() {
            Some(kind) => Controller::Baseline(BaselineController::new(r, home, kind, cfg.baseline())),
            None => {
                let sync_ga = match (&plan, cfg.policy) {
                    (Some((_, ga)), PolicyKind::RendezvousSync) => Some(GaConfig {
                        population: cfg.ga.sync_population,
                        generations: cfg.ga.sync_generations,
                        elitism: ga.elitism.min(cfg.ga.sync_population),
                        ..ga.clone()
                    }),
                    _ => None,
                };
                let settings = ControllerSettings { timeout, knn_k: cfg.knn_k, sync_ga };
                Controller::Rendezvous(RendezvousController::new(
                    r,
                    home,
                    plan.as_ref().map(|(p, _)| p.clone()),
                    settings,
                    cfg.seed,
                ))
            }
        })
        .collect();

    let params = cfg.utility();
    let mut poses = vec![home; n];
    let mut maps = vec![truth.blank_like(); n];
    let mut union = truth.blank_like();
    let mut network = vec![home];
    let mut base_map = truth.blank_like();
    let reachable_known = reachable_known_cells(truth, home, cfg.vis_radius);

    let mut m = RunMetrics {
        map: cfg.map.clone(),
        policy: cfg.policy,
        seed: cfg.seed,
        robots: n,
        start: home,
        steps_to_finish: None,
        steps_run: 0,
        return_value: 0.0,
        coverage: Vec::new(),
        reachable_known,
        union: truth.blank_like(),
        complete: false,
        agreements: Vec::new(),
        connectivity: Vec::new(),
        trajectory: Vec::new(),
        actions: Vec::new(),
        decisions: Vec::new(),
        initial_plan: initial_doc,
        plan_updates: 0,
        deliveries: 0,
        delivered_known: 0,
        relays: Vec::new(),
        dropped_messages: 0,
    };
    let mut statuses: Vec<Status> = ctrls.iter().map(Controller::status).collect();

    for step in 0..cfg.step_cap {
        m.steps_run = step + 1;
        m.trajectory.push(poses.clone());
        for r in 0..n {
            maps[r].sense(truth, poses[r], cfg.vis_radius).expect("maps share the truth's size");
            union.sense(truth, poses[r], cfg.vis_radius).expect("maps share the truth's size");
        }
        let graph = connectivity(step, &poses, cfg.comm_range);
        exchange(&mut maps, &poses, &graph).expect("maps share the truth's size");
        if !graph.edges().is_empty() {
            m.connectivity.push(graph.clone());
        }
        m.coverage.push(union.known_count());
        let frontiers: Vec<FrontierSet> = (0..n).map(|r| maps[r].frontiers_from(poses[r])).collect();
        if m.steps_to_finish.is_none() && frontiers.iter().all(FrontierSet::is_empty) {
            m.steps_to_finish = Some(step);
            m.complete = true;
        }

        let beacons: Vec<Beacon<Status>> = (0..n)
            .map(|r| Beacon { robot: r, pose: poses[r], status: statuses[r] })
            .collect();
        let heard = crate::comms::hear(&beacons, &graph);

        let mut outbox: Vec<Envelope> = Vec::new();
        for r in 0..n {
            let o = Observation {
                step,
                pose: poses[r],
                map: &maps[r],
                frontiers: &frontiers[r],
                heard: &heard[r],
                network: &network,
            };
            match &mut ctrls[r] {
                Controller::Rendezvous(c) => outbox.extend(c.decide(&o)),
                Controller::Baseline(c) => c.decide(&o),
            }
        }
        m.plan_updates += outbox
            .iter()
            .filter(|e| matches!(e.message, crate::comms::Message::PlanUpdate(_)))
            .count();
        let (inbox, dropped) = deliver(&outbox, &graph);
        m.dropped_messages += dropped;
        for (r, msgs) in inbox.iter().enumerate() {
            if let Controller::Rendezvous(c) = &mut ctrls[r] {
                c.receive(step, msgs);
            }
        }

        // Joint frontier selection, one team per connected component.
        for comp in graph.components() {
            let team: Vec<usize> = comp.iter().copied().filter(|&r| ctrls[r].wants_target()).collect();
            if team.is_empty() {
                continue;
            }
            let lead = team[0];
            let due = team.iter().any(|&r| {
                let ctrl = &mut ctrls[r];
                ctrl.explorer_mut().needs_target(&maps[r], poses[r], &team)
            });
            if !due {
                continue;
            }
            let members: Vec<TeamMember> = team
                .iter()
                .map(|&r| TeamMember { robot: r, pose: poses[r], rendezvous: ctrls[r].hint(home) })
                .collect();
            let shared = &maps[lead];
            let candidates = shared.frontiers();
            let picks = select_joint(&members, &candidates, shared, &params);
            let center = shared.center_of_mass().unwrap_or((0.0, 0.0));
            let mut claimed: Vec<Pose> = Vec::new();
            for (robot, pick) in picks {
                let target = pick.map(|(t, _)| t);
                ctrls[robot].explorer_mut().assign(target, &team);
                if let Some((t, value)) = pick {
                    let cost = shared.distances_from(poses[robot]).distance(t).expect("picked targets are reachable");
                    m.return_value += value;
                    m.actions.push(ActionRecord {
                        step,
                        robot,
                        pose: poses[robot],
                        target: t,
                        gain: shared.unknown_gain(t, params.vis_radius),
                        cost,
                        center,
                        rendezvous: ctrls[robot].hint(home),
                        shared: claimed.contains(&t),
                        value,
                    });
                    claimed.push(t);
                }
            }
        }

        for r in 0..n {
            let o = Observation {
                step,
                pose: poses[r],
                map: &maps[r],
                frontiers: &frontiers[r],
                heard: &heard[r],
                network: &network,
            };
            let action = match &mut ctrls[r] {
                Controller::Rendezvous(c) => c.act(&o),
                Controller::Baseline(c) => c.act(&o),
            };
            debug_assert!(action.next.manhattan(poses[r]) <= 1 && truth.is_free(action.next));
            if action.deliver {
                base_map.merge_from(&maps[r]).expect("same size");
                m.deliveries += 1;
            }
            if action.relay {
                network.push(poses[r]);
                m.relays.push(poses[r]);
            }
            poses[r] = action.next;
        }
        for (r, c) in ctrls.iter().enumerate() {
            statuses[r] = c.status();
            if cfg.log_decisions {
                m.decisions.push(DecisionRecord {
                    step,
                    robot: r,
                    mode: c.mode(),
                    target: c.goal(),
                    row: statuses[r].row,
                });
            }
        }
        if ctrls.iter().all(|c| c.mode() == Mode::Done) {
            break;
        }
    }

    for c in &ctrls {
        if let Controller::Rendezvous(c) = c {
            m.agreements.extend_from_slice(c.records());
        }
    }
    m.agreements.sort_by_key(|a| (a.ended, a.robot));
    m.delivered_known = base_map.known_count();
    m.union = union;
    Ok(m)
}

/// Cells a robot could ever know: the reachable free component plus every
/// cell visible from it.
fn reachable_known_cells(truth: &GridMap, home: Pose, radius: u32) -> usize {
    let field = truth.distances_from(home);
    let mut seen = truth.blank_like();
    for p in truth.poses() {
        if field.distance(p).is_some() {
            seen.sense(truth, p, radius).expect("same size");
        }
    }
    seen.known_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(map: &str, robots: usize, policy: PolicyKind) -> SimConfig {
        let mut c = SimConfig {
            map: map.into(),
            robots,
            policy,
            seed: 3,
            ..SimConfig::default()
        };
        c.ga.population = 16;
        c.ga.generations = 20;
        c
    }

    #[test]
    fn single_robot_clears_an_empty_room() {
        let truth = GridMap::new(8, 8, CellState::Free);
        let m = run_on(&cfg("inline", 1, PolicyKind::Rendezvous), &truth).unwrap();
        assert!(m.complete);
        assert_eq!(*m.coverage.last().unwrap(), 64);
        assert_eq!(m.reachable_known, 64);
        assert!(m.coverage.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn runs_are_deterministic() {
        for policy in PolicyKind::ALL {
            let c = SimConfig { log_decisions: true, ..cfg("builtin:rooms32", 3, policy) };
            let a = run(&c).unwrap();
            let b = run(&c).unwrap();
            assert_eq!(a, b, "{policy}");
            assert!(a.complete, "{policy}");
        }
    }

    #[test]
    fn return_matches_repriced_actions() {
        let c = SimConfig { beta_u: 0.01, ..cfg("builtin:open32", 3, PolicyKind::Rendezvous) };
        let m = run(&c).unwrap();
        let repriced: f64 = m
            .actions
            .iter()
            .map(|a| {
                let base = c.alpha_u * a.gain as f64 / a.cost.max(1) as f64;
                let (fx, fy) = (a.target.x as f64, a.target.y as f64);
                let dot = (fx - a.center.0) * (fx - a.rendezvous.x as f64) + (fy - a.center.1) * (fy - a.rendezvous.y as f64);
                let u = base + c.beta_u * dot;
                if a.shared { -u } else { u }
            })
            .sum();
        assert!((repriced - m.return_value).abs() < 1e-9 * m.return_value.abs().max(1.0));
    }

    #[test]
    fn union_never_exceeds_truth_and_edges_respect_range() {
        let c = cfg("builtin:maze32", 4, PolicyKind::RendezvousSync);
        let m = run(&c).unwrap();
        assert!(m.coverage.iter().all(|&k| k <= m.reachable_known));
        // Every reachable free cell is known at the end; obstacles seen only
        // from afar may stay unknown.
        let truth = crate::maps::resolve(&c.map).unwrap();
        let field = truth.distances_from(m.start);
        let reachable_free = truth.poses().filter(|&p| field.distance(p).is_some()).count();
        assert!(*m.coverage.last().unwrap() >= reachable_free);
        for g in &m.connectivity {
            let at = &m.trajectory[g.step() as usize];
            for i in 0..4 {
                for j in i + 1..4 {
                    let within = at[i].distance(at[j]) <= c.comm_range;
                    assert_eq!(g.has_edge(i, j), within, "step {}", g.step());
                }
            }
        }
        let logged: Vec<u64> = m.connectivity.iter().map(|g| g.step()).collect();
        for (step, at) in m.trajectory.iter().enumerate() {
            let any = (0..4).any(|i| (i + 1..4).any(|j| at[i].distance(at[j]) <= c.comm_range));
            assert_eq!(any, logged.binary_search(&(step as u64)).is_ok());
        }
    }

    #[test]
    fn bad_start_is_rejected() {
        let truth = GridMap::parse("#####\n#.#.#\n#####\n").unwrap();
        let c = SimConfig { start: Some([1, 1]), ..cfg("inline", 1, PolicyKind::Bs) };
        assert!(matches!(run_on(&c, &truth), Err(SimError::BadStart(_))));
        let walls = GridMap::new(3, 3, CellState::Obstacle);
        assert!(matches!(run_on(&cfg("inline", 1, PolicyKind::Bs), &walls), Err(SimError::NoFreeCells)));
    }
}
