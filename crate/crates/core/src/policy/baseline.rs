//! Base-station and relay-network baselines: frontier exploration with a
//! periodic obligation to bring the map back to a static network.

use std::fmt;
use std::str::FromStr;

use super::controller::{Action, Explorer, Mode, Observation, Route, Status};
use crate::gridworld::{GridMap, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Base station only.
    Bs,
    /// Base station plus one relay per robot.
    Crn1r,
    /// Base station plus two relays per robot.
    Crn2r,
}

impl BaselineKind {
    pub fn relays(self) -> u32 {
        match self {
            BaselineKind::Bs => 0,
            BaselineKind::Crn1r => 1,
            BaselineKind::Crn2r => 2,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Bs => "bs",
            BaselineKind::Crn1r => "crn1r",
            BaselineKind::Crn2r => "crn2r",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bs" => Ok(BaselineKind::Bs),
            "crn1r" => Ok(BaselineKind::Crn1r),
            "crn2r" => Ok(BaselineKind::Crn2r),
            other => Err(format!("unknown baseline {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSettings {
    pub deliver_period: u64,
    pub network_range: f64,
    pub relay_after: u64,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        BaselineSettings {
            deliver_period: 250,
            network_range: 12.0,
            relay_after: 2000,
        }
    }
}

fn nearest_node_distance(pose: Pose, network: &[Pose]) -> f64 {
    network.iter().map(|n| n.distance(pose)).fold(f64::INFINITY, f64::min)
}

/// Closest reachable free cell within `range` of any network node, by path
/// length and then `(y, x)`.
pub fn delivery_point(map: &GridMap, pose: Pose, network: &[Pose], range: f64) -> Option<Pose> {
    let r2 = range * range;
    let field = map.distances_from(pose);
    map.poses()
        .filter(|&c| network.iter().any(|n| n.dist2(c) as f64 <= r2))
        .filter_map(|c| field.distance(c).map(|d| (d, c)))
        .min()
        .map(|(_, c)| c)
}

#[derive(Debug, Clone)]
pub struct BaselineController {
    robot: usize,
    home: Pose,
    kind: BaselineKind,
    settings: BaselineSettings,
    mode: Mode,
    relays_left: u32,
    goal: Option<Pose>,
    explorer: Explorer,
    route: Route,
    deliver_now: bool,
    relay_now: bool,
    deliveries: Vec<u64>,
    missed: u32,
}

impl BaselineController {
    pub fn new(robot: usize, home: Pose, kind: BaselineKind, settings: BaselineSettings) -> Self {
        BaselineController {
            robot,
            home,
            kind,
            settings,
            mode: Mode::Exploring,
            relays_left: kind.relays(),
            goal: None,
            explorer: Explorer::default(),
            route: Route::default(),
            deliver_now: false,
            relay_now: false,
            deliveries: Vec::new(),
            missed: 0,
        }
    }

    pub fn robot(&self) -> usize {
        self.robot
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn status(&self) -> Status {
        Status { mode: self.mode, row: None }
    }

    pub fn relays_left(&self) -> u32 {
        self.relays_left
    }

    /// Steps at which this robot delivered its map.
    pub fn deliveries(&self) -> &[u64] {
        &self.deliveries
    }

    /// Delivery periods skipped because the network was unreachable.
    pub fn missed(&self) -> u32 {
        self.missed
    }

    pub fn explorer_mut(&mut self) -> &mut Explorer {
        &mut self.explorer
    }

    pub fn wants_target(&self) -> bool {
        self.mode == Mode::Exploring
    }

    pub fn goal(&self) -> Option<Pose> {
        match self.mode {
            Mode::Exploring => self.explorer.target(),
            Mode::Delivering => self.goal,
            _ => Some(self.home),
        }
    }

    pub fn decide(&mut self, obs: &Observation) {
        self.deliver_now = false;
        self.relay_now = false;
        match self.mode {
            Mode::Done => return,
            Mode::ReturningHome => {
                if obs.pose == self.home {
                    self.mode = Mode::Done;
                }
                return;
            }
            _ => {}
        }
        if obs.frontiers.is_empty() {
            self.explorer.clear();
            self.mode = if obs.pose == self.home { Mode::Done } else { Mode::ReturningHome };
            return;
        }
        let range = self.settings.network_range;
        if obs.step >= self.settings.relay_after && self.relays_left > 0 {
            let d = nearest_node_distance(obs.pose, obs.network);
            if d > range - 1.0 && d <= range {
                self.relay_now = true;
                self.relays_left -= 1;
            }
        }
        let period = self.settings.deliver_period;
        if self.mode == Mode::Exploring && period > 0 && obs.step > 0 && obs.step.is_multiple_of(period) {
            match delivery_point(obs.map, obs.pose, obs.network, range) {
                Some(g) => {
                    self.mode = Mode::Delivering;
                    self.goal = Some(g);
                }
                None => {
                    log::debug!("robot {} cannot reach the network at step {}", self.robot, obs.step);
                    self.missed += 1;
                }
            }
        }
        if self.mode == Mode::Delivering && Some(obs.pose) == self.goal {
            self.deliver_now = true;
        }
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        let next = match self.mode {
            Mode::Exploring => self.explorer.step(obs.map, obs.pose),
            Mode::Delivering if self.deliver_now => {
                self.deliveries.push(obs.step);
                self.mode = Mode::Exploring;
                self.goal = None;
                obs.pose
            }
            Mode::Delivering => {
                let goal = self.goal.expect("delivering robots have a goal");
                self.route.step(obs.map, obs.pose, goal)
            }
            Mode::ReturningHome => self.route.step(obs.map, obs.pose, self.home),
            _ => obs.pose,
        };
        Action { next, deliver: self.deliver_now, relay: self.relay_now }
    }
}
