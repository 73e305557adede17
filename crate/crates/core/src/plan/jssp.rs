//! Job-shop view of a plan: robots are machines, and every `(agreement,
//! member)` pair becomes one job of length `W[agreement][member]`.

use std::fmt;
use std::str::FromStr;

use super::{AgreementMatrix, PlanError, StepsMatrix};

/// How a row's jobs are placed on their machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum SyncRule {
    /// Each job starts at its machine's clock; afterwards every participant
    /// waits until the row's latest job ends.
    #[default]
    AtEnd,
    /// Every job of a row starts at the latest participant clock; each
    /// machine is then free from its own job end.
    AtStart,
}

impl fmt::Display for SyncRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyncRule::AtEnd => "sync_at_end",
            SyncRule::AtStart => "sync_at_start",
        })
    }
}

impl FromStr for SyncRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sync_at_end" | "end" => Ok(SyncRule::AtEnd),
            "sync_at_start" | "start" => Ok(SyncRule::AtStart),
            other => Err(format!("unknown sync rule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Job {
    pub robot: usize,
    pub agreement: usize,
    pub length: u64,
    pub start: u64,
    pub end: u64,
    /// Idle steps this job causes on its machine under the instance's rule.
    pub wait: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsspInstance {
    rule: SyncRule,
    machines: Vec<Vec<Job>>,
    sync_end: Vec<u64>,
}

impl JsspInstance {
    /// Assembles an instance from loose jobs, sorting each machine by start
    /// time and recomputing sync ends and waits. Rejects overlapping jobs,
    /// zero lengths and inconsistent end times.
    pub fn from_jobs(machines: usize, jobs: Vec<Job>, rule: SyncRule) -> Result<Self, PlanError> {
        let mut per_machine = vec![Vec::new(); machines];
        let mut agreements = 0;
        for job in jobs {
            if job.robot >= machines {
                return Err(PlanError::Job {
                    machine: job.robot,
                    reason: format!("only {machines} machines exist"),
                });
            }
            if job.length == 0 || job.end != job.start + job.length {
                return Err(PlanError::Job {
                    machine: job.robot,
                    reason: format!("job for agreement {} has inconsistent times", job.agreement),
                });
            }
            agreements = agreements.max(job.agreement + 1);
            per_machine[job.robot].push(job);
        }
        for (m, jobs) in per_machine.iter_mut().enumerate() {
            jobs.sort_by_key(|j| (j.start, j.agreement));
            for pair in jobs.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(PlanError::Job {
                        machine: m,
                        reason: format!(
                            "jobs for agreements {} and {} overlap",
                            pair[0].agreement, pair[1].agreement
                        ),
                    });
                }
            }
        }
        let mut inst = JsspInstance {
            rule,
            machines: per_machine,
            sync_end: vec![0; agreements],
        };
        inst.recompute_waits();
        Ok(inst)
    }

    fn recompute_waits(&mut self) {
        self.sync_end.iter_mut().for_each(|e| *e = 0);
        for job in self.machines.iter().flatten() {
            let e = &mut self.sync_end[job.agreement];
            *e = (*e).max(job.end);
        }
        for jobs in &mut self.machines {
            let mut prev_end = 0;
            for job in jobs.iter_mut() {
                job.wait = match self.rule {
                    SyncRule::AtEnd => self.sync_end[job.agreement] - job.end,
                    SyncRule::AtStart => job.start.saturating_sub(prev_end),
                };
                prev_end = job.end;
            }
        }
    }

    pub fn rule(&self) -> SyncRule {
        self.rule
    }

    pub fn machines(&self) -> &[Vec<Job>] {
        &self.machines
    }

    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn agreement_count(&self) -> usize {
        self.sync_end.len()
    }

    pub fn jobs(&self) -> impl Iterator<Item = &Job> {
        self.machines.iter().flatten()
    }

    pub fn job_count(&self) -> usize {
        self.machines.iter().map(Vec::len).sum()
    }

    /// Latest job end among the jobs of `agreement`.
    pub fn sync_end(&self, agreement: usize) -> u64 {
        self.sync_end[agreement]
    }

    pub fn total_length(&self) -> u64 {
        self.jobs().map(|j| j.length).sum()
    }

    pub fn makespan(&self) -> u64 {
        self.jobs().map(|j| j.end).max().unwrap_or(0)
    }

    pub fn total_wait(&self) -> u64 {
        self.jobs().map(|j| j.wait).sum()
    }

    /// Jobs in agreement-major order, members ascending within a row.
    pub fn schedule(&self) -> Vec<Job> {
        let mut jobs: Vec<Job> = self.jobs().copied().collect();
        jobs.sort_by_key(|j| (j.agreement, j.robot));
        jobs
    }
}

/// Builds the instance under the default [`SyncRule::AtEnd`].
pub fn to_jssp(k: &AgreementMatrix, w: &StepsMatrix) -> Result<JsspInstance, PlanError> {
    to_jssp_with(k, w, SyncRule::default())
}

/// Processes rows first to last, placing one job per member on its machine.
pub fn to_jssp_with(
    k: &AgreementMatrix,
    w: &StepsMatrix,
    rule: SyncRule,
) -> Result<JsspInstance, PlanError> {
    // Validates the pairing, and the K invariants by construction of `k`.
    let w = StepsMatrix::new(k, w.rows().to_vec())?;
    let n = k.robots();
    let mut clock = vec![0u64; n];
    let mut machines: Vec<Vec<Job>> = vec![Vec::new(); n];
    let mut sync_end = Vec::with_capacity(k.agreements());
    for row in 0..k.agreements() {
        let members = k.members(row);
        let row_start = members.iter().map(|&r| clock[r]).max().unwrap_or(0);
        let mut end_max = 0;
        for &robot in &members {
            let length = w.get(row, robot) as u64;
            let start = match rule {
                SyncRule::AtEnd => clock[robot],
                SyncRule::AtStart => row_start,
            };
            let end = start + length;
            end_max = end_max.max(end);
            let wait = match rule {
                SyncRule::AtEnd => 0,
                SyncRule::AtStart => start - clock[robot],
            };
            machines[robot].push(Job {
                robot,
                agreement: row,
                length,
                start,
                end,
                wait,
            });
            if rule == SyncRule::AtStart {
                clock[robot] = end;
            }
        }
        if rule == SyncRule::AtEnd {
            for &robot in &members {
                let job = machines[robot].last_mut().expect("job was just pushed");
                job.wait = end_max - job.end;
                clock[robot] = end_max;
            }
        }
        sync_end.push(end_max);
    }
    Ok(JsspInstance {
        rule,
        machines,
        sync_end,
    })
}

/// Recovers `(K, W)` from the agreement tags of an instance.
pub fn from_jssp(inst: &JsspInstance) -> Result<(AgreementMatrix, StepsMatrix), PlanError> {
    let n = inst.machine_count();
    let m = inst.agreement_count();
    let mut krows = vec![vec![false; n]; m];
    let mut wrows = vec![vec![0u32; n]; m];
    for job in inst.jobs() {
        if krows[job.agreement][job.robot] {
            return Err(PlanError::Job {
                machine: job.robot,
                reason: format!("two jobs tagged with agreement {}", job.agreement),
            });
        }
        let length = u32::try_from(job.length).map_err(|_| PlanError::Job {
            machine: job.robot,
            reason: format!("job length {} does not fit a step budget", job.length),
        })?;
        krows[job.agreement][job.robot] = true;
        wrows[job.agreement][job.robot] = length;
    }
    let k = AgreementMatrix::new(n, krows)?;
    let w = StepsMatrix::new(&k, wrows)?;
    Ok((k, w))
}

/// Idle steps per machine measured from the timeline alone: the gap before
/// each job plus, under [`SyncRule::AtEnd`], the wait after the last job.
pub fn idle_gaps(inst: &JsspInstance) -> u64 {
    let mut total = 0;
    for jobs in inst.machines() {
        let mut prev_end = 0;
        for job in jobs {
            total += job.start - prev_end;
            prev_end = job.end;
        }
        if inst.rule() == SyncRule::AtEnd {
            if let Some(last) = jobs.last() {
                total += inst.sync_end(last.agreement) - last.end;
            }
        }
    }
    total
}
