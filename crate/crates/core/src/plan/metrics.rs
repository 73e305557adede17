//! Plan-error and connectivity metrics, and the weighted objective `z`.
//!
//! `z = α₁h₁ + α₂h₂ + α₃h₃ + α₄h₄ − β₁g₁ + β₂g₂`, minimised. The connectivity
//! index enters negated because more connectivity is better, while the edge
//! count is a penalty against over-connected plans.

use std::collections::BTreeSet;
use std::fmt;

use super::jssp::JsspInstance;
use super::{AgreementMatrix, PlanError};

/// Environment estimates feeding `h1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvEstimates {
    /// Estimated mission area, in cells.
    pub omega_a: f64,
    /// Area already explored, in cells.
    pub omega_e: f64,
    /// Cells a robot is expected to reveal per exploration step.
    pub explore_rate: f64,
}

impl EnvEstimates {
    pub fn validate(&self) -> Result<(), PlanError> {
        for (name, value) in [
            ("omega_a", self.omega_a),
            ("omega_e", self.omega_e),
            ("explore_rate", self.explore_rate),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(PlanError::Estimate { name, value });
            }
        }
        Ok(())
    }
}

impl Default for EnvEstimates {
    fn default() -> Self {
        EnvEstimates {
            omega_a: 4096.0,
            omega_e: 0.0,
            explore_rate: 4.0,
        }
    }
}

/// Weights for `(h1, h2, h3, h4)` and `(g1, g2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub alpha: [f64; 4],
    pub beta: [f64; 2],
}

impl ObjectiveWeights {
    pub fn new(alpha: &[f64], beta: &[f64]) -> Result<Self, PlanError> {
        let alpha: [f64; 4] = alpha.try_into().map_err(|_| PlanError::WeightArity {
            which: "alpha",
            expected: 4,
            found: alpha.len(),
        })?;
        let beta: [f64; 2] = beta.try_into().map_err(|_| PlanError::WeightArity {
            which: "beta",
            expected: 2,
            found: beta.len(),
        })?;
        Ok(ObjectiveWeights { alpha, beta })
    }

    pub fn zero() -> Self {
        ObjectiveWeights {
            alpha: [0.0; 4],
            beta: [0.0; 2],
        }
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            alpha: [1e-3, 1.0, 1.0, 1.0],
            beta: [100.0, 1.0],
        }
    }
}

/// Exploration estimate error: `((Ω_A − Ω_E) − Σ job · X)²`.
pub fn h1(inst: &JsspInstance, env: &EnvEstimates) -> Result<f64, PlanError> {
    env.validate()?;
    let remaining = env.omega_a - env.omega_e;
    let planned = inst.total_length() as f64 * env.explore_rate;
    Ok((remaining - planned).powi(2))
}

/// Work-done error: `(Σ Y(job))²` with `Y` the realised rendezvous wait.
pub fn h2(inst: &JsspInstance) -> f64 {
    (inst.total_wait() as f64).powi(2)
}

/// Population standard deviation of job lengths.
pub fn h3(inst: &JsspInstance) -> f64 {
    let n = inst.job_count();
    if n == 0 {
        return 0.0;
    }
    let mean = inst.total_length() as f64 / n as f64;
    let var = inst
        .jobs()
        .map(|j| (j.length as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    var.sqrt()
}

/// Makespan as a plan-error term.
pub fn h4(inst: &JsspInstance) -> f64 {
    inst.makespan() as f64
}

/// Graph over robots with an edge wherever two robots share an agreement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondensedGraph {
    robots: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl CondensedGraph {
    pub fn robots(&self) -> usize {
        self.robots
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Component label for every robot, labels assigned in ascending robot order.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.robots];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut label = vec![usize::MAX; self.robots];
        let mut next = 0;
        for s in 0..self.robots {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(v) = stack.pop() {
                for &u in &adj[v] {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn largest_component(&self) -> usize {
        let labels = self.component_labels();
        let mut sizes = vec![0usize; self.robots];
        for l in labels {
            sizes[l] += 1;
        }
        sizes.into_iter().max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        self.robots > 0 && self.largest_component() == self.robots
    }
}

pub fn condensed_graph(k: &AgreementMatrix) -> CondensedGraph {
    let mut edges = BTreeSet::new();
    for row in 0..k.agreements() {
        let members = k.members(row);
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                edges.insert((a, b));
            }
        }
    }
    CondensedGraph {
        robots: k.robots(),
        edges,
    }
}

/// Connectivity index `1 − 1/(1 + P)` with `P` the largest component size.
pub fn g1(k: &AgreementMatrix) -> f64 {
    let p = condensed_graph(k).largest_component() as f64;
    1.0 - 1.0 / (1.0 + p)
}

pub fn g2(k: &AgreementMatrix) -> usize {
    condensed_graph(k).edge_count()
}

/// Static feasibility proxy: every robot is covered and the condensed graph
/// is connected.
pub fn intermittently_connected(k: &AgreementMatrix) -> bool {
    condensed_graph(k).is_connected()
}

pub fn objective(
    inst: &JsspInstance,
    k: &AgreementMatrix,
    weights: &ObjectiveWeights,
    env: &EnvEstimates,
) -> Result<f64, PlanError> {
    let h = [h1(inst, env)?, h2(inst), h3(inst), h4(inst)];
    let g = [-g1(k), g2(k) as f64];
    let plan_error: f64 = weights.alpha.iter().zip(h).map(|(a, v)| a * v).sum();
    let connectivity: f64 = weights.beta.iter().zip(g).map(|(b, v)| b * v).sum();
    Ok(plan_error + connectivity)
}

/// Every metric for one plan, as printed by `inspect`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub robots: usize,
    pub agreements: usize,
    pub makespan: u64,
    pub total_wait: u64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    pub g1: f64,
    pub g2: usize,
    pub z: f64,
    pub intermittently_connected: bool,
    pub sync_row: Option<usize>,
}

impl PlanReport {
    pub fn new(
        inst: &JsspInstance,
        k: &AgreementMatrix,
        weights: &ObjectiveWeights,
        env: &EnvEstimates,
        sync_row: Option<usize>,
    ) -> Result<Self, PlanError> {
        Ok(PlanReport {
            robots: k.robots(),
            agreements: k.agreements(),
            makespan: inst.makespan(),
            total_wait: inst.total_wait(),
            h1: h1(inst, env)?,
            h2: h2(inst),
            h3: h3(inst),
            h4: h4(inst),
            g1: g1(k),
            g2: g2(k),
            z: objective(inst, k, weights, env)?,
            intermittently_connected: intermittently_connected(k),
            sync_row,
        })
    }
}

impl fmt::Display for PlanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "robots={}", self.robots)?;
        writeln!(f, "agreements={}", self.agreements)?;
        writeln!(f, "makespan={}", self.makespan)?;
        writeln!(f, "total_wait={}", self.total_wait)?;
        writeln!(f, "h1={}", self.h1)?;
        writeln!(f, "h2={}", self.h2)?;
        writeln!(f, "h3={}", self.h3)?;
        writeln!(f, "h4={}", self.h4)?;
        writeln!(f, "g1={}", self.g1)?;
        writeln!(f, "g2={}", self.g2)?;
        writeln!(f, "z={}", self.z)?;
        writeln!(f, "intermittently_connected={}", self.intermittently_connected)?;
        match self.sync_row {
            Some(r) => writeln!(f, "sync_row={r}"),
            None => writeln!(f, "sync_row=none"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{to_jssp, StepsMatrix};
    use super::*;
    use proptest::prelude::*;

    fn example() -> JsspInstance {
        to_jssp(&example_k(), &example_w()).unwrap()
    }

    fn env(omega_a: f64, omega_e: f64, x: f64) -> EnvEstimates {
        EnvEstimates {
            omega_a,
            omega_e,
            explore_rate: x,
        }
    }

    #[test]
    fn h1_fixtures() {
        let inst = example();
        assert_eq!(h1(&inst, &env(5300.0, 0.0, 10.0)).unwrap(), 0.0);
        assert_eq!(h1(&inst, &env(5400.0, 0.0, 10.0)).unwrap(), 10000.0);
        assert_eq!(h1(&inst, &env(700.0, 700.0, 3.0)).unwrap(), (530.0f64 * 3.0).powi(2));
        assert!(h1(&inst, &env(-1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn h2_fixtures() {
        assert_eq!(h2(&example()), 100.0);
        let k = AgreementMatrix::from_bits(&[&[1, 1]]).unwrap();
        let even = to_jssp(&k, &StepsMatrix::new(&k, vec![vec![7, 7]]).unwrap()).unwrap();
        assert_eq!(h2(&even), 0.0);
        let uneven = to_jssp(&k, &StepsMatrix::new(&k, vec![vec![10, 30]]).unwrap()).unwrap();
        assert_eq!(h2(&uneven), 400.0);
    }

    #[test]
    fn h3_hand_computation() {
        // Lengths 50,50,50,100,90,40,50,100: mean 66.25, squared deviations sum 4587.5.
        let expected = (4587.5f64 / 8.0).sqrt();
        assert!((h3(&example()) - expected).abs() < 1e-12);
        assert!((h3(&example()) - 23.946555).abs() < 1e-6);
        let k = AgreementMatrix::from_bits(&[&[1, 1, 1], &[1, 1, 0]]).unwrap();
        let flat = StepsMatrix::new(&k, vec![vec![9, 9, 9], vec![9, 9, 0]]).unwrap();
        assert_eq!(h3(&to_jssp(&k, &flat).unwrap()), 0.0);
    }

    #[test]
    fn connectivity_fixtures() {
        let k = example_k();
        let g = condensed_graph(&k);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.largest_component(), 3);
        assert_eq!(g1(&k), 0.75);
        assert_eq!(g2(&k), 3);
        assert!(intermittently_connected(&k));

        let pair = AgreementMatrix::from_bits(&[&[1, 1]]).unwrap();
        assert!((g1(&pair) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g2(&pair), 1);

        let split = AgreementMatrix::from_bits(&[&[1, 1, 0, 0], &[0, 0, 1, 1]]).unwrap();
        assert_eq!(condensed_graph(&split).largest_component(), 2);
        assert!((g1(&split) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g2(&split), 2);
        assert!(!intermittently_connected(&split));

        let all = AgreementMatrix::from_bits(&[&[1, 1, 1, 1, 1]]).unwrap();
        assert!(intermittently_connected(&all));
    }

    #[test]
    fn objective_composition() {
        let inst = example();
        let k = example_k();
        let e = env(5300.0, 0.0, 10.0);
        assert_eq!(objective(&inst, &k, &ObjectiveWeights::zero(), &e).unwrap(), 0.0);

        let only_h1 = ObjectiveWeights::new(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0]).unwrap();
        let e2 = env(5400.0, 0.0, 10.0);
        assert_eq!(objective(&inst, &k, &only_h1, &e2).unwrap(), 10000.0);

        let ones = ObjectiveWeights::new(&[1.0; 4], &[1.0; 2]).unwrap();
        let expected = 0.0 + 100.0 + (4587.5f64 / 8.0).sqrt() + 200.0 - 0.75 + 3.0;
        assert!((objective(&inst, &k, &ones, &e).unwrap() - expected).abs() < 1e-9);

        assert!(matches!(
            ObjectiveWeights::new(&[1.0; 3], &[1.0; 2]),
            Err(PlanError::WeightArity { which: "alpha", expected: 4, found: 3 })
        ));
        assert!(ObjectiveWeights::new(&[1.0; 4], &[1.0]).is_err());
    }

    #[test]
    fn report_for_example() {
        let r = PlanReport::new(
            &example(),
            &example_k(),
            &ObjectiveWeights::default(),
            &env(5300.0, 0.0, 10.0),
            None,
        )
        .unwrap();
        assert_eq!(r.makespan, 200);
        assert_eq!(r.total_wait, 10);
        let text = r.to_string();
        assert!(text.contains("g1=0.75\n"));
        assert!(text.contains("sync_row=none\n"));
    }

    proptest! {
        #[test]
        fn h3_matches_two_pass_oracle(lengths in prop::collection::vec(1u32..1000, 2..12)) {
            // One row per job pair so every length lands in the instance.
            let n = 2;
            let rows = lengths.len() / 2;
            prop_assume!(rows >= 1);
            let k = AgreementMatrix::new(n, vec![vec![true, true]; rows]).unwrap();
            let w = StepsMatrix::new(&k, lengths.chunks(2).take(rows).map(|c| c.to_vec()).collect()).unwrap();
            let inst = to_jssp(&k, &w).unwrap();
            let used: Vec<f64> = lengths[..rows * 2].iter().map(|&v| v as f64).collect();
            let mean = used.iter().sum::<f64>() / used.len() as f64;
            let sd = (used.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / used.len() as f64).sqrt();
            prop_assert!((h3(&inst) - sd).abs() < 1e-9 * sd.max(1.0));
        }

        #[test]
        fn g1_tracks_largest_component((k, _w) in super::super::jssp::tests::arb_plan()) {
            let n = k.robots() as f64;
            let p = condensed_graph(&k).largest_component() as f64;
            let v = g1(&k);
            prop_assert_eq!(v, 1.0 - 1.0 / (1.0 + p));
            prop_assert!((0.5..=1.0 - 1.0 / (1.0 + n)).contains(&v));
            // Adding an all-robot row can only grow the component.
            let mut rows = k.rows().to_vec();
            rows.push(vec![true; k.robots()]);
            let bigger = AgreementMatrix::new(k.robots(), rows).unwrap();
            prop_assert!(g1(&bigger) >= v);
            prop_assert!(intermittently_connected(&bigger));
        }
    }
}
