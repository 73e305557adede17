//! The rendezvous controller: a per-robot state machine that alternates
//! exploration budgets with sub-team meetings.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::location::{synchronize, update_location};
use crate::comms::{Beacon, Envelope, Message};
use crate::gridworld::{FrontierSet, GridMap, Pose};
use crate::plan::RendezvousPlan;
use crate::solver::GaConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exploring,
    ToRendezvous,
    WaitingAtRendezvous,
    /// Baselines only: travelling to, or dwelling at, the delivery network.
    Delivering,
    ReturningHome,
    Done,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exploring => "exploring",
            Mode::ToRendezvous => "to_rendezvous",
            Mode::WaitingAtRendezvous => "waiting",
            Mode::Delivering => "delivering",
            Mode::ReturningHome => "returning_home",
            Mode::Done => "done",
        })
    }
}

/// What a robot broadcasts about itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Status {
    pub mode: Mode,
    pub row: Option<usize>,
}

/// One robot's view of the current step, after sensing and exchange.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub step: u64,
    pub pose: Pose,
    pub map: &'a GridMap,
    /// Frontiers reachable from `pose` in `map`.
    pub frontiers: &'a FrontierSet,
    /// Beacons from the other robots in this robot's component, as of the
    /// end of the previous step.
    pub heard: &'a [Beacon<Status>],
    /// Base station and relays; empty for rendezvous runs.
    pub network: &'a [Pose],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub next: Pose,
    pub deliver: bool,
    pub relay: bool,
}

impl Action {
    pub fn go(next: Pose) -> Self {
        Action { next, deliver: false, relay: false }
    }
}

/// Cached shortest path toward a goal. Free cells never change, so a path
/// stays valid for as long as the goal does.
#[derive(Debug, Clone, Default)]
pub struct Route {
    goal: Option<Pose>,
    path: Vec<Pose>,
    next: usize,
}

impl Route {
    /// Makes sure a path from `pose` to `goal` is cached; `false` when unreachable.
    pub fn ensure(&mut self, map: &GridMap, pose: Pose, goal: Pose) -> bool {
        let on_path = self.goal == Some(goal) && self.next > 0 && self.path.get(self.next - 1) == Some(&pose);
        if on_path {
            return true;
        }
        match map.shortest_path(pose, goal) {
            Some(path) => {
                self.goal = Some(goal);
                self.path = path;
                self.next = 1;
                true
            }
            None => {
                self.clear();
                false
            }
        }
    }

    /// Next cell toward `goal`; staying put at the goal or when unreachable.
    pub fn step(&mut self, map: &GridMap, pose: Pose, goal: Pose) -> Pose {
        if pose == goal || !self.ensure(map, pose, goal) {
            return pose;
        }
        let next = self.path[self.next];
        self.next += 1;
        next
    }

    pub fn clear(&mut self) {
        self.goal = None;
        self.path.clear();
        self.next = 0;
    }
}

/// Frontier-following sub-behaviour shared by every controller.
#[derive(Debug, Clone, Default)]
pub struct Explorer {
    target: Option<Pose>,
    team: Vec<usize>,
    route: Route,
}

impl Explorer {
    pub fn target(&self) -> Option<Pose> {
        self.target
    }

    /// A new target is due when there is none, it was reached, it stopped
    /// being a frontier, or the set of jointly exploring teammates changed.
    pub fn needs_target(&self, map: &GridMap, pose: Pose, team: &[usize]) -> bool {
        match self.target {
            None => true,
            Some(t) => t == pose || !map.is_frontier(t) || self.team != team,
        }
    }

    pub fn assign(&mut self, target: Option<Pose>, team: &[usize]) {
        self.target = target;
        self.team = team.to_vec();
    }

    pub fn clear(&mut self) {
        self.target = None;
        self.team.clear();
        self.route.clear();
    }

    pub fn step(&mut self, map: &GridMap, pose: Pose) -> Pose {
        match self.target {
            Some(t) => self.route.step(map, pose, t),
            None => pose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Fulfilled,
    TimedOut,
    Unreachable,
    /// The robot ran out of frontiers and headed home.
    Abandoned,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Fulfilled => "fulfilled",
            Outcome::TimedOut => "timed_out",
            Outcome::Unreachable => "unreachable",
            Outcome::Abandoned => "abandoned",
        })
    }
}

/// One robot's pass through one agreement row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementRecord {
    pub robot: usize,
    pub row: usize,
    pub members: Vec<usize>,
    pub location: Pose,
    /// Step at which the budget for this row was loaded.
    pub started: u64,
    pub arrived: Option<u64>,
    pub ended: u64,
    pub outcome: Outcome,
    pub budget: u32,
    pub explored: u32,
    pub waited: u32,
    /// Plan generation the row belongs to; bumps at every plan replacement.
    pub epoch: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSettings {
    pub timeout: u32,
    pub knn_k: usize,
    /// Solver settings for regenerating the plan at the sync row; `None`
    /// keeps the plan fixed and only updates locations.
    pub sync_ga: Option<GaConfig>,
}

#[derive(Debug, Clone)]
struct Progress {
    row: usize,
    started: u64,
    arrived: Option<u64>,
    explored: u32,
    waited: u32,
}

#[derive(Debug, Clone)]
pub struct RendezvousController {
    robot: usize,
    home: Pose,
    plan: Option<RendezvousPlan>,
    settings: ControllerSettings,
    mode: Mode,
    steps_remaining: u32,
    progress: Progress,
    explorer: Explorer,
    route: Route,
    rng: ChaCha8Rng,
    epoch: u32,
    records: Vec<AgreementRecord>,
}

impl RendezvousController {
    /// A controller without a plan (or with a one-robot team) explores freely.
    pub fn new(
        robot: usize,
        home: Pose,
        plan: Option<RendezvousPlan>,
        settings: ControllerSettings,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(robot as u64);
        let plan = plan.filter(|p| p.robots() > 1);
        let row = plan.as_ref().map_or(0, |p| p.first_row_for(robot));
        let steps_remaining = plan.as_ref().map_or(0, |p| p.budget(row, robot));
        RendezvousController {
            robot,
            home,
            plan,
            settings,
            mode: Mode::Exploring,
            steps_remaining,
            progress: Progress { row, started: 0, arrived: None, explored: 0, waited: 0 },
            explorer: Explorer::default(),
            route: Route::default(),
            rng,
            epoch: 0,
            records: Vec::new(),
        }
    }

    pub fn robot(&self) -> usize {
        self.robot
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn row(&self) -> Option<usize> {
        self.plan.as_ref().map(|_| self.progress.row)
    }

    pub fn steps_remaining(&self) -> u32 {
        self.steps_remaining
    }

    pub fn wait_timer(&self) -> u32 {
        self.progress.waited
    }

    pub fn plan(&self) -> Option<&RendezvousPlan> {
        self.plan.as_ref()
    }

    pub fn records(&self) -> &[AgreementRecord] {
        &self.records
    }

    pub fn status(&self) -> Status {
        Status { mode: self.mode, row: self.row() }
    }

    pub fn explorer(&self) -> &Explorer {
        &self.explorer
    }

    pub fn explorer_mut(&mut self) -> &mut Explorer {
        &mut self.explorer
    }

    pub fn wants_target(&self) -> bool {
        self.mode == Mode::Exploring
    }

    /// The location exploration is biased against: the current meeting
    /// point, or home without a plan.
    pub fn rendezvous_hint(&self) -> Pose {
        self.plan.as_ref().map_or(self.home, |p| p.location(self.progress.row))
    }

    /// Where this robot is headed, for logging.
    pub fn goal(&self) -> Option<Pose> {
        match self.mode {
            Mode::Exploring => self.explorer.target(),
            Mode::ToRendezvous | Mode::WaitingAtRendezvous => Some(self.rendezvous_hint()),
            Mode::ReturningHome | Mode::Done => Some(self.home),
            Mode::Delivering => None,
        }
    }

    fn close(&mut self, step: u64, outcome: Outcome) {
        let Some(plan) = &self.plan else { return };
        let row = self.progress.row;
        self.records.push(AgreementRecord {
            robot: self.robot,
            row,
            members: plan.members(row).to_vec(),
            location: plan.location(row),
            started: self.progress.started,
            arrived: self.progress.arrived,
            ended: step,
            outcome,
            budget: plan.budget(row, self.robot),
            explored: self.progress.explored,
            waited: self.progress.waited,
            epoch: self.epoch,
        });
    }

    fn load_row(&mut self, step: u64, row: usize) {
        let plan = self.plan.as_ref().expect("rows exist only with a plan");
        self.steps_remaining = plan.budget(row, self.robot);
        self.progress = Progress { row, started: step, arrived: None, explored: 0, waited: 0 };
        self.mode = Mode::Exploring;
        self.explorer.clear();
        self.route.clear();
    }

    fn advance(&mut self, step: u64, outcome: Outcome) {
        self.close(step, outcome);
        let plan = self.plan.as_ref().expect("rows exist only with a plan");
        let next = plan.next_row_for(self.robot, self.progress.row);
        self.load_row(step, next);
    }

    fn adopt(&mut self, step: u64, plan: RendezvousPlan, outcome: Option<Outcome>) {
        if let Some(o) = outcome {
            self.close(step, o);
        }
        let first = plan.first_row_for(self.robot);
        self.plan = Some(plan);
        self.epoch += 1;
        self.load_row(step, first);
    }

    /// Mode transitions and, for the robot in charge of a completed meeting,
    /// the update it broadcasts.
    pub fn decide(&mut self, obs: &Observation) -> Vec<Envelope> {
        let step = obs.step;
        match self.mode {
            Mode::Done => return Vec::new(),
            Mode::ReturningHome => {
                if obs.pose == self.home {
                    self.mode = Mode::Done;
                }
                return Vec::new();
            }
            _ => {}
        }
        if obs.frontiers.is_empty() {
            self.close(step, Outcome::Abandoned);
            self.explorer.clear();
            self.route.clear();
            self.mode = if obs.pose == self.home { Mode::Done } else { Mode::ReturningHome };
            return Vec::new();
        }
        let Some(plan) = &self.plan else {
            return Vec::new();
        };
        let row = self.progress.row;
        let location = plan.location(row);
        if self.mode == Mode::Exploring && self.steps_remaining == 0 {
            self.mode = Mode::ToRendezvous;
        }
        if self.mode == Mode::ToRendezvous {
            if obs.pose == location {
                self.mode = Mode::WaitingAtRendezvous;
                self.progress.arrived = Some(step);
            } else if !self.route.ensure(obs.map, obs.pose, location) {
                log::debug!("robot {} cannot reach rendezvous {location} for row {row}", self.robot);
                self.advance(step, Outcome::Unreachable);
                return Vec::new();
            }
        }
        if self.mode != Mode::WaitingAtRendezvous {
            return Vec::new();
        }
        self.progress.waited += 1;
        let others: Vec<usize> = plan.members(row).iter().copied().filter(|&r| r != self.robot).collect();
        let waiting = Status { mode: Mode::WaitingAtRendezvous, row: Some(row) };
        let present: Vec<usize> = others
            .iter()
            .copied()
            .filter(|&o| obs.heard.iter().any(|b| b.robot == o && b.status == waiting && b.pose == location))
            .collect();
        if plan.in_charge(row) == self.robot && present.len() == others.len() {
            return self.fulfill(obs, others);
        }
        if self.progress.waited > self.settings.timeout {
            // The lowest id among the robots that did show up moves the
            // meeting point for all of them; the others wait for its word.
            if present.iter().all(|&o| o > self.robot) {
                return self.relocate(obs, present, false);
            }
        }
        Vec::new()
    }

    fn fulfill(&mut self, obs: &Observation, others: Vec<usize>) -> Vec<Envelope> {
        let plan = self.plan.as_ref().expect("fulfilment needs a plan");
        let row = self.progress.row;
        let frontiers = obs.frontiers.as_slice();
        if plan.sync_row() == Some(row) {
            if let Some(ga) = &self.settings.sync_ga {
                let mut ga = ga.clone();
                ga.seed = self.rng.gen();
                match synchronize(plan.robots(), obs.map, frontiers, plan.location(row), self.settings.knn_k, &ga) {
                    Ok(Some(new_plan)) => {
                        let env = Envelope {
                            sender: self.robot,
                            recipients: others,
                            message: Message::PlanUpdate(Box::new(new_plan.clone())),
                        };
                        self.adopt(obs.step, new_plan, Some(Outcome::Fulfilled));
                        return vec![env];
                    }
                    Ok(None) => {}
                    Err(e) => log::warn!("robot {} failed to regenerate the plan: {e}", self.robot),
                }
            }
        }
        self.relocate(obs, others, true)
    }

    fn relocate(&mut self, obs: &Observation, recipients: Vec<usize>, complete: bool) -> Vec<Envelope> {
        let plan = self.plan.as_mut().expect("relocation needs a plan");
        let row = self.progress.row;
        let location =
            update_location(obs.frontiers.as_slice(), self.settings.knn_k, &mut self.rng).unwrap_or(plan.location(row));
        plan.set_location(row, location);
        self.advance(obs.step, if complete { Outcome::Fulfilled } else { Outcome::TimedOut });
        if recipients.is_empty() {
            return Vec::new();
        }
        vec![Envelope {
            sender: self.robot,
            recipients,
            message: Message::LocationUpdate { row, location, complete },
        }]
    }

    /// Applies messages delivered this step.
    pub fn receive(&mut self, step: u64, inbox: &[(usize, Message)]) {
        for (_, msg) in inbox {
            match msg {
                Message::LocationUpdate { row, location, complete } => {
                    let Some(plan) = self.plan.as_mut() else { continue };
                    if *row >= plan.rows() {
                        continue;
                    }
                    plan.set_location(*row, *location);
                    if self.mode == Mode::WaitingAtRendezvous && self.progress.row == *row {
                        self.advance(step, if *complete { Outcome::Fulfilled } else { Outcome::TimedOut });
                    }
                }
                Message::PlanUpdate(new_plan) => {
                    if matches!(self.mode, Mode::ReturningHome | Mode::Done) || self.plan.is_none() {
                        continue;
                    }
                    let outcome = (self.mode == Mode::WaitingAtRendezvous).then_some(Outcome::Fulfilled);
                    self.adopt(step, (**new_plan).clone(), outcome);
                }
            }
        }
    }

    /// Movement for this step. Exploration steps consume budget.
    pub fn act(&mut self, obs: &Observation) -> Action {
        let next = match self.mode {
            Mode::Exploring => {
                if self.plan.is_some() {
                    self.steps_remaining = self.steps_remaining.saturating_sub(1);
                    self.progress.explored += 1;
                }
                self.explorer.step(obs.map, obs.pose)
            }
            Mode::ToRendezvous => {
                let goal = self.rendezvous_hint();
                self.route.step(obs.map, obs.pose, goal)
            }
            Mode::ReturningHome => self.route.step(obs.map, obs.pose, self.home),
            Mode::WaitingAtRendezvous | Mode::Delivering | Mode::Done => obs.pose,
        };
        Action::go(next)
    }
}
