//! Batch aggregation and CSV rendering of run metrics.

use super::{DecisionRecord, RunMetrics, SimError};
use crate::config::{PolicyKind, SimConfig};
use crate::plan::JsspInstance;

fn to_string(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn writer(header: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory cannot fail");
    w
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `map,policy,seed,steps,return` plus completion columns. Unfinished runs
/// leave `steps` empty.
pub fn metrics_csv(runs: &[RunMetrics]) -> String {
    let mut w = writer(&["map", "policy", "seed", "steps", "return", "steps_run", "complete"]);
    for r in runs {
        w.write_record([
            r.map.clone(),
            r.policy.to_string(),
            r.seed.to_string(),
            opt(r.steps_to_finish),
            r.return_value.to_string(),
            r.steps_run.to_string(),
            r.complete.to_string(),
        ])
        .expect("writing to memory cannot fail");
    }
    to_string(w)
}

pub fn coverage_csv(run: &RunMetrics) -> String {
    let mut w = writer(&["step", "known", "new"]);
    for (step, (known, new)) in run.coverage.iter().zip(run.explored_per_step()).enumerate() {
        w.write_record([step.to_string(), known.to_string(), new.to_string()])
            .expect("writing to memory cannot fail");
    }
    to_string(w)
}

pub fn agreements_csv(run: &RunMetrics) -> String {
    let mut w = writer(&[
        "robot", "row", "epoch", "members", "x", "y", "started", "arrived", "ended", "outcome", "budget", "explored",
        "waited",
    ]);
    for a in &run.agreements {
        let members: Vec<String> = a.members.iter().map(usize::to_string).collect();
        w.write_record([
            a.robot.to_string(),
            a.row.to_string(),
            a.epoch.to_string(),
            members.join(" "),
            a.location.x.to_string(),
            a.location.y.to_string(),
            a.started.to_string(),
            opt(a.arrived),
            a.ended.to_string(),
            a.outcome.to_string(),
            a.budget.to_string(),
            a.explored.to_string(),
            a.waited.to_string(),
        ])
        .expect("writing to memory cannot fail");
    }
    to_string(w)
}

pub fn decisions_csv(records: &[DecisionRecord]) -> String {
    let mut w = writer(&["step", "robot", "mode", "target_x", "target_y", "row"]);
    for d in records {
        w.write_record([
            d.step.to_string(),
            d.robot.to_string(),
            d.mode.to_string(),
            opt(d.target.map(|t| t.x)),
            opt(d.target.map(|t| t.y)),
            opt(d.row),
        ])
        .expect("writing to memory cannot fail");
    }
    to_string(w)
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub map: String,
    pub policy: PolicyKind,
    pub runs: usize,
    pub finished: usize,
    /// Over all runs, counting unfinished ones at the step cap.
    pub mean_steps: f64,
    pub std_steps: f64,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Runs every config in order and aggregates per (map, policy). Stops at the
/// first failing run.
pub fn batch(cfgs: &[SimConfig]) -> Result<(Vec<RunMetrics>, Vec<BatchRow>), SimError> {
    let mut runs = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        log::info!("running {} / {} / seed {}", cfg.map, cfg.policy, cfg.seed);
        runs.push(super::run(cfg)?);
    }
    let pairs: Vec<(&SimConfig, &RunMetrics)> = cfgs.iter().zip(&runs).collect();
    let rows = summarize(&pairs);
    Ok((runs, rows))
}

/// One row per (map, policy), in order of first appearance.
pub fn summarize(runs: &[(&SimConfig, &RunMetrics)]) -> Vec<BatchRow> {
    let mut keys: Vec<(String, PolicyKind)> = Vec::new();
    for (_, r) in runs {
        let key = (r.map.clone(), r.policy);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(map, policy)| {
            let group: Vec<&(&SimConfig, &RunMetrics)> =
                runs.iter().filter(|(_, r)| r.map == map && r.policy == policy).collect();
            let steps: Vec<f64> = group.iter().map(|(c, r)| r.finish_or_cap(c.step_cap) as f64).collect();
            let returns: Vec<f64> = group.iter().map(|(_, r)| r.return_value).collect();
            let (mean_steps, std_steps) = mean_std(&steps);
            let (mean_return, std_return) = mean_std(&returns);
            BatchRow {
                map,
                policy,
                runs: group.len(),
                finished: group.iter().filter(|(_, r)| r.complete).count(),
                mean_steps,
                std_steps,
                mean_return,
                std_return,
            }
        })
        .collect()
}

pub fn schedule_csv(inst: &JsspInstance) -> String {
    let mut w = writer(&["robot", "agreement", "start", "end", "wait"]);
    for job in inst.schedule() {
        w.serialize((job.robot, job.agreement, job.start, job.end, job.wait))
            .expect("writing to memory cannot fail");
    }
    to_string(w)
}

/// Best fitness per generation.
pub fn history_csv(history: &[f64]) -> String {
    let mut w = writer(&["generation", "best"]);
    for (g, f) in history.iter().enumerate() {
        w.serialize((g, f)).expect("writing to memory cannot fail");
    }
    to_string(w)
}

pub fn summary_csv(rows: &[BatchRow]) -> String {
    let mut w = writer(&[
        "map", "policy", "runs", "finished", "mean_steps", "std_steps", "mean_return", "std_return",
    ]);
    for r in rows {
        w.write_record([
            r.map.clone(),
            r.policy.to_string(),
            r.runs.to_string(),
            r.finished.to_string(),
            r.mean_steps.to_string(),
            r.std_steps.to_string(),
            r.mean_return.to_string(),
            r.std_return.to_string(),
        ])
        .expect("writing to memory cannot fail");
    }
    to_string(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, policy: PolicyKind) -> SimConfig {
        let mut c = SimConfig { map: "builtin:open32".into(), robots: 2, policy, seed, ..SimConfig::default() };
        c.ga.population = 8;
        c.ga.generations = 5;
        c
    }

    #[test]
    fn one_seed_has_zero_spread() {
        let (runs, rows) = batch(&[small(1, PolicyKind::Bs)]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].std_steps, 0.0);
        assert_eq!(rows[0].std_return, 0.0);
        assert_eq!(rows[0].mean_steps, runs[0].steps_to_finish.unwrap() as f64);
    }

    #[test]
    fn repeated_seeds_give_identical_rows() {
        let cfgs = vec![small(4, PolicyKind::Rendezvous), small(4, PolicyKind::Rendezvous)];
        let (runs, rows) = batch(&cfgs).unwrap();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(rows[0].std_steps, 0.0);
        let csv = metrics_csv(&runs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "map,policy,seed,steps,return,steps_run,complete");
        assert_eq!(lines[1], lines[2]);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!((m, s), (5.0, 2.0));
    }
}
