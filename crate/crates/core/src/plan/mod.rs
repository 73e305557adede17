//! Rendezvous plans: the agreement matrix `K`, the steps matrix `W`, the
//! sub-teams they induce, and the job-shop view used to score them.
//!
//! Robots and agreements are zero-indexed. Row `a` of `K` lists the members
//! of agreement `a`; row `a` of `W` says how many steps each member explores
//! before heading to that agreement's rendezvous location.

mod document;
mod jssp;
mod metrics;

pub use document::PlanDocument;
pub use jssp::{from_jssp, to_jssp, to_jssp_with, idle_gaps, Job, JsspInstance, SyncRule};
pub use metrics::{
    condensed_graph, g1, g2, h1, h2, h3, h4, intermittently_connected, objective, CondensedGraph,
    EnvEstimates, ObjectiveWeights, PlanReport,
};

use crate::gridworld::Pose;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("a plan needs at least one robot and one agreement")]
    Empty,
    #[error("row {row}: expected {expected} columns, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: an agreement needs at least two robots, found {found}")]
    TooFewParticipants { row: usize, found: usize },
    #[error("robot {robot} does not take part in any agreement")]
    UncoveredRobot { robot: usize },
    #[error("row {row}, robot {robot}: {reason}")]
    Steps {
        row: usize,
        robot: usize,
        reason: &'static str,
    },
    #[error("steps matrix is {found:?} but agreements are {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("sync row {row} must exist and include every robot")]
    SyncRow { row: usize },
    #[error("{name} must be non-negative and finite, got {value}")]
    Estimate { name: &'static str, value: f64 },
    #[error("{which} weights: expected {expected}, found {found}")]
    WeightArity {
        which: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("job on machine {machine}: {reason}")]
    Job {
        machine: usize,
        reason: String,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Binary agreement matrix: rows are agreements, columns are robots.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgreementMatrix {
    robots: usize,
    rows: Vec<Vec<bool>>,
}

impl AgreementMatrix {
    /// Validates that every row has at least two members and every robot
    /// belongs to at least one row.
    pub fn new(robots: usize, rows: Vec<Vec<bool>>) -> Result<Self, PlanError> {
        if robots == 0 || rows.is_empty() {
            return Err(PlanError::Empty);
        }
        let mut covered = vec![false; robots];
        for (row, bits) in rows.iter().enumerate() {
            if bits.len() != robots {
                return Err(PlanError::RowLength {
                    row,
                    expected: robots,
                    found: bits.len(),
                });
            }
            let found = bits.iter().filter(|&&b| b).count();
            if found < 2 {
                return Err(PlanError::TooFewParticipants { row, found });
            }
            for (r, &b) in bits.iter().enumerate() {
                covered[r] |= b;
            }
        }
        if let Some(robot) = covered.iter().position(|&c| !c) {
            return Err(PlanError::UncoveredRobot { robot });
        }
        Ok(AgreementMatrix { robots, rows })
    }

    /// Convenience constructor from 0/1 rows.
    pub fn from_bits(rows: &[&[u8]]) -> Result<Self, PlanError> {
        let robots = rows.first().map_or(0, |r| r.len());
        Self::new(
            robots,
            rows.iter()
                .map(|r| r.iter().map(|&b| b != 0).collect())
                .collect(),
        )
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    pub fn agreements(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, row: usize, robot: usize) -> bool {
        self.rows[row][robot]
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.rows[row]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    /// Members of agreement `row`, ascending.
    pub fn members(&self, row: usize) -> Vec<usize> {
        self.rows[row]
            .iter()
            .enumerate()
            .filter_map(|(r, &b)| b.then_some(r))
            .collect()
    }
}

/// Exploration budgets, same shape as the agreement matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepsMatrix {
    rows: Vec<Vec<u32>>,
}

impl StepsMatrix {
    /// Checks `rows` against `k`: positive exactly where `k` has a one.
    pub fn new(k: &AgreementMatrix, rows: Vec<Vec<u32>>) -> Result<Self, PlanError> {
        let found = (rows.len(), rows.first().map_or(0, |r| r.len()));
        if rows.len() != k.agreements() {
            return Err(PlanError::Shape {
                expected: (k.agreements(), k.robots()),
                found,
            });
        }
        for (row, steps) in rows.iter().enumerate() {
            if steps.len() != k.robots() {
                return Err(PlanError::RowLength {
                    row,
                    expected: k.robots(),
                    found: steps.len(),
                });
            }
            for (robot, &s) in steps.iter().enumerate() {
                match (k.get(row, robot), s) {
                    (true, 0) => {
                        return Err(PlanError::Steps {
                            row,
                            robot,
                            reason: "member with a zero budget",
                        })
                    }
                    (false, s) if s > 0 => {
                        return Err(PlanError::Steps {
                            row,
                            robot,
                            reason: "budget given to a non-member",
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(StepsMatrix { rows })
    }

    /// Rounds real-valued budgets to whole steps, keeping members at one step or more.
    pub fn from_real(k: &AgreementMatrix, rows: &[Vec<f64>]) -> Result<Self, PlanError> {
        let rounded = rows
            .iter()
            .enumerate()
            .map(|(a, r)| {
                r.iter()
                    .enumerate()
                    .map(|(robot, &v)| {
                        let member = k.rows.get(a).and_then(|row| row.get(robot)).copied() == Some(true);
                        if member {
                            v.round().max(1.0) as u32
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(k, rounded)
    }

    pub fn get(&self, row: usize, robot: usize) -> u32 {
        self.rows[row][robot]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }
}

/// A full rendezvous plan as held by each robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RendezvousPlan {
    k: AgreementMatrix,
    w: StepsMatrix,
    sub_teams: Vec<Vec<usize>>,
    row_team: Vec<usize>,
    locations: Vec<Pose>,
    sync_row: Option<usize>,
}

impl RendezvousPlan {
    /// Derives the sub-teams from the distinct row supports of `k` and places
    /// every rendezvous location at `start`.
    pub fn new(
        k: AgreementMatrix,
        w: StepsMatrix,
        sync_row: Option<usize>,
        start: Pose,
    ) -> Result<Self, PlanError> {
        // Re-run the pairing check in case the caller built `w` for another `k`.
        let w = StepsMatrix::new(&k, w.rows)?;
        if let Some(row) = sync_row {
            if row >= k.agreements() || k.members(row).len() != k.robots() {
                return Err(PlanError::SyncRow { row });
            }
        }
        let mut sub_teams: Vec<Vec<usize>> = Vec::new();
        let mut row_team = Vec::with_capacity(k.agreements());
        for row in 0..k.agreements() {
            let members = k.members(row);
            let team = match sub_teams.iter().position(|t| *t == members) {
                Some(i) => i,
                None => {
                    sub_teams.push(members);
                    sub_teams.len() - 1
                }
            };
            row_team.push(team);
        }
        let locations = vec![start; sub_teams.len()];
        Ok(RendezvousPlan {
            k,
            w,
            sub_teams,
            row_team,
            locations,
            sync_row,
        })
    }

    pub fn from_document(doc: &PlanDocument, start: Pose) -> Result<Self, PlanError> {
        Self::new(doc.k.clone(), doc.w.clone(), doc.sync_row, start)
    }

    pub fn to_document(&self) -> PlanDocument {
        PlanDocument {
            k: self.k.clone(),
            w: self.w.clone(),
            sync_row: self.sync_row,
        }
    }

    pub fn agreements(&self) -> &AgreementMatrix {
        &self.k
    }

    pub fn steps(&self) -> &StepsMatrix {
        &self.w
    }

    pub fn robots(&self) -> usize {
        self.k.robots()
    }

    pub fn rows(&self) -> usize {
        self.k.agreements()
    }

    pub fn sync_row(&self) -> Option<usize> {
        self.sync_row
    }

    pub fn sub_teams(&self) -> &[Vec<usize>] {
        &self.sub_teams
    }

    pub fn team_of_row(&self, row: usize) -> usize {
        self.row_team[row]
    }

    pub fn members(&self, row: usize) -> &[usize] {
        &self.sub_teams[self.row_team[row]]
    }

    /// Robot responsible for location and plan updates: lowest id of the sub-team.
    pub fn in_charge(&self, row: usize) -> usize {
        self.members(row)[0]
    }

    pub fn location(&self, row: usize) -> Pose {
        self.locations[self.row_team[row]]
    }

    pub fn team_location(&self, team: usize) -> Pose {
        self.locations[team]
    }

    pub fn set_location(&mut self, row: usize, location: Pose) {
        let team = self.row_team[row];
        self.locations[team] = location;
    }

    pub fn set_team_location(&mut self, team: usize, location: Pose) {
        self.locations[team] = location;
    }

    pub fn budget(&self, row: usize, robot: usize) -> u32 {
        self.w.get(row, robot)
    }

    /// First row `robot` takes part in.
    pub fn first_row_for(&self, robot: usize) -> usize {
        (0..self.rows())
            .find(|&r| self.k.get(r, robot))
            .expect("every robot is covered by a validated plan")
    }

    /// Next row after `row` that includes `robot`, wrapping around.
    pub fn next_row_for(&self, robot: usize, row: usize) -> usize {
        let m = self.rows();
        (1..=m)
            .map(|d| (row + d) % m)
            .find(|&r| self.k.get(r, robot))
            .expect("every robot is covered by a validated plan")
    }

    /// Appends a row containing every robot and marks it as the sync row.
    /// Each robot's budget for it is the rounded mean of its other budgets.
    pub fn with_sync_row_appended(k: &AgreementMatrix, w: &StepsMatrix) -> Result<(AgreementMatrix, StepsMatrix, usize), PlanError> {
        let n = k.robots();
        let mut krows = k.rows().to_vec();
        let mut wrows = w.rows().to_vec();
        let budgets: Vec<u32> = (0..n)
            .map(|r| {
                let own: Vec<u32> = wrows.iter().map(|row| row[r]).filter(|&s| s > 0).collect();
                let mean = own.iter().map(|&s| s as f64).sum::<f64>() / own.len().max(1) as f64;
                mean.round().max(1.0) as u32
            })
            .collect();
        krows.push(vec![true; n]);
        wrows.push(budgets);
        let k = AgreementMatrix::new(n, krows)?;
        let w = StepsMatrix::new(&k, wrows)?;
        let row = k.agreements() - 1;
        Ok((k, w, row))
    }
}
