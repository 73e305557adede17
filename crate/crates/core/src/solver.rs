//! Genetic algorithm over `(K, W)` pairs, minimising the plan objective.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{CellState, GridMap, Pose};
use crate::plan::{
    intermittently_connected, objective, to_jssp_with, AgreementMatrix, EnvEstimates,
    JsspInstance, ObjectiveWeights, PlanError, StepsMatrix, SyncRule,
};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Shape limits for generated plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub min_agreements: usize,
    pub max_agreements: usize,
    pub min_steps: u32,
    pub max_steps: u32,
    /// Largest sub-team; `None` allows the whole team.
    pub max_team: Option<usize>,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            min_agreements: 1,
            max_agreements: 8,
            min_steps: 10,
            max_steps: 300,
            max_team: None,
        }
    }
}

impl Bounds {
    fn team_cap(&self, robots: usize) -> usize {
        self.max_team.unwrap_or(robots).min(robots)
    }

    /// Fewest rows that can cover and connect `robots` robots.
    fn rows_needed(&self, robots: usize) -> usize {
        let t = self.team_cap(robots);
        if t < 2 {
            return usize::MAX;
        }
        (robots - 1).div_ceil(t - 1).max(1)
    }

    fn row_range(&self, robots: usize) -> (usize, usize) {
        (self.min_agreements.max(self.rows_needed(robots)), self.max_agreements)
    }

    pub fn check(&self, robots: usize) -> Result<(), SolverError> {
        if robots < 2 {
            return Err(SolverError::Config(format!("need at least 2 robots, got {robots}")));
        }
        if self.team_cap(robots) < 2 {
            return Err(SolverError::Config("sub-teams need at least 2 members".into()));
        }
        if self.min_steps == 0 || self.min_steps > self.max_steps {
            return Err(SolverError::Config(format!(
                "step bounds [{}, {}] are empty or include 0",
                self.min_steps, self.max_steps
            )));
        }
        let (lo, hi) = self.row_range(robots);
        if lo > hi {
            return Err(SolverError::Config(format!(
                "{robots} robots with sub-teams of at most {} need {} agreements, but at most {hi} are allowed",
                self.team_cap(robots),
                self.rows_needed(robots),
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-entry probability of jittering a step budget.
    pub mutation_rate: f64,
    /// Relative jitter amplitude: entries move by up to `±jitter · w`.
    pub jitter: f64,
    pub structural_rate: f64,
    pub elitism: usize,
    pub seed: u64,
    pub weights: ObjectiveWeights,
    pub env: EnvEstimates,
    pub rule: SyncRule,
    pub bounds: Bounds,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 64,
            generations: 300,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            jitter: 0.2,
            structural_rate: 0.1,
            elitism: 2,
            seed: 0,
            weights: ObjectiveWeights::default(),
            env: EnvEstimates::default(),
            rule: SyncRule::AtEnd,
            bounds: Bounds::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self, robots: usize) -> Result<(), SolverError> {
        if self.population < 2 {
            return Err(SolverError::Config("population must be at least 2".into()));
        }
        if self.elitism < 1 || self.elitism > self.population {
            return Err(SolverError::Config(format!(
                "elitism must be in 1..={}, got {}",
                self.population, self.elitism
            )));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("structural_rate", self.structural_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(SolverError::Config(format!("{name} must be in [0, 1], got {r}")));
            }
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(SolverError::Config(format!("jitter must be non-negative, got {}", self.jitter)));
        }
        if self.weights.alpha.iter().chain(&self.weights.beta).any(|w| !w.is_finite()) {
            return Err(SolverError::Config("weights must be finite".into()));
        }
        self.env.validate()?;
        self.bounds.check(robots)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub k: AgreementMatrix,
    pub w: StepsMatrix,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(k: AgreementMatrix, w: StepsMatrix) -> Self {
        Individual { k, w, fitness: None }
    }

    pub fn schedule(&self, rule: SyncRule) -> JsspInstance {
        to_jssp_with(&self.k, &self.w, rule).expect("individuals hold paired matrices")
    }
}

/// Objective value of a plan, or `+∞` when its condensed graph is disconnected.
pub fn fitness(k: &AgreementMatrix, w: &StepsMatrix, cfg: &GaConfig) -> Result<f64, PlanError> {
    if !intermittently_connected(k) {
        return Ok(f64::INFINITY);
    }
    let inst = to_jssp_with(k, w, cfg.rule)?;
    objective(&inst, k, &cfg.weights, &cfg.env)
}

/// Scores `ind` and caches the value on it.
pub fn evaluate(ind: &mut Individual, cfg: &GaConfig) -> Result<f64, SolverError> {
    let z = fitness(&ind.k, &ind.w, cfg)?;
    ind.fitness = Some(z);
    Ok(z)
}

// Raw row representation used while building and recombining plans.
type Rows = Vec<(Vec<bool>, Vec<u32>)>;

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Component root per robot; uncovered robots stay singletons.
fn components(rows: &Rows, robots: usize) -> (Vec<usize>, Vec<bool>) {
    let mut parent: Vec<usize> = (0..robots).collect();
    let mut covered = vec![false; robots];
    for (bits, _) in rows {
        let mut first = None;
        for (r, &b) in bits.iter().enumerate() {
            if !b {
                continue;
            }
            covered[r] = true;
            match first {
                None => first = Some(r),
                Some(f) => {
                    let (a, b) = (find(&mut parent, f), find(&mut parent, r));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots = (0..robots).map(|r| find(&mut parent, r)).collect();
    (roots, covered)
}

fn feasible(rows: &Rows, robots: usize) -> bool {
    let (roots, covered) = components(rows, robots);
    covered.iter().all(|&c| c) && roots.iter().all(|&r| r == roots[0])
}

fn random_steps(bits: &[bool], bounds: &Bounds, rng: &mut impl Rng) -> Vec<u32> {
    bits.iter()
        .map(|&b| if b { rng.gen_range(bounds.min_steps..=bounds.max_steps) } else { 0 })
        .collect()
}

fn random_row(robots: usize, bounds: &Bounds, rng: &mut impl Rng) -> (Vec<bool>, Vec<u32>) {
    let size = rng.gen_range(2..=bounds.team_cap(robots));
    let mut ids: Vec<usize> = (0..robots).collect();
    ids.shuffle(rng);
    let mut bits = vec![false; robots];
    for &r in &ids[..size] {
        bits[r] = true;
    }
    let steps = random_steps(&bits, bounds, rng);
    (bits, steps)
}

fn into_individual(rows: Rows, robots: usize) -> Individual {
    let (bits, steps): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let k = AgreementMatrix::new(robots, bits).expect("repaired rows satisfy K invariants");
    let w = StepsMatrix::new(&k, steps).expect("repaired rows satisfy W invariants");
    Individual::new(k, w)
}

fn rows_of(ind: &Individual) -> Rows {
    ind.k.rows().iter().cloned().zip(ind.w.rows().iter().cloned()).collect()
}

const RESAMPLE_TRIES: usize = 64;

/// Uniformly random valid plan with a connected condensed graph.
///
/// Rows are resampled a bounded number of times; if that fails, a random
/// spanning chain of sub-teams is laid down and the remaining rows are drawn
/// freely, which is always connected.
pub fn random_individual(
    robots: usize,
    bounds: &Bounds,
    rng: &mut impl Rng,
) -> Result<Individual, SolverError> {
    bounds.check(robots)?;
    let (lo, hi) = bounds.row_range(robots);
    let m = rng.gen_range(lo..=hi);
    for _ in 0..RESAMPLE_TRIES {
        let rows: Rows = (0..m).map(|_| random_row(robots, bounds, rng)).collect();
        if feasible(&rows, robots) {
            return Ok(into_individual(rows, robots));
        }
    }
    let t = bounds.team_cap(robots);
    let mut order: Vec<usize> = (0..robots).collect();
    order.shuffle(rng);
    let mut rows: Rows = Vec::with_capacity(m);
    let mut i = 0;
    while i + 1 < robots {
        let end = (i + t).min(robots);
        let mut bits = vec![false; robots];
        for &r in &order[i..end] {
            bits[r] = true;
        }
        let steps = random_steps(&bits, bounds, rng);
        rows.push((bits, steps));
        i = end - 1;
    }
    while rows.len() < m {
        let at = rng.gen_range(0..=rows.len());
        rows.insert(at, random_row(robots, bounds, rng));
    }
    Ok(into_individual(rows, robots))
}

/// Adds two-member rows bridging components until the rows are feasible or
/// the row cap is reached.
fn bridge(rows: &mut Rows, robots: usize, bounds: &Bounds, rng: &mut impl Rng) -> bool {
    loop {
        if feasible(rows, robots) {
            return true;
        }
        if rows.len() >= bounds.max_agreements {
            return false;
        }
        let (roots, covered) = components(rows, robots);
        let a = 0;
        let b = (0..robots)
            .find(|&r| r != a && (roots[r] != roots[a] || !covered[r]))
            .expect("infeasible rows have a second component");
        let pick = |root: usize, rng: &mut dyn rand::RngCore| {
            let members: Vec<usize> = (0..robots).filter(|&r| roots[r] == root).collect();
            members[rng.gen_range(0..members.len())]
        };
        let (x, y) = (pick(roots[a], rng), pick(roots[b], rng));
        let mut bits = vec![false; robots];
        bits[x] = true;
        bits[y] = true;
        let steps = random_steps(&bits, bounds, rng);
        let at = rng.gen_range(0..=rows.len());
        rows.insert(at, (bits, steps));
    }
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut impl Rng) -> &'a Individual {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..3 {
        let c = &pop[rng.gen_range(0..pop.len())];
        if c.fitness.unwrap_or(f64::INFINITY) < best.fitness.unwrap_or(f64::INFINITY) {
            best = c;
        }
    }
    best
}

/// One-point row-wise crossover aligned on row index. The head comes from
/// one parent and the tail from the other; an infeasible child is first
/// retried with the parents swapped, then bridged, and finally replaced by a
/// copy of the fitter parent.
fn crossover(
    a: &Individual,
    b: &Individual,
    robots: usize,
    bounds: &Bounds,
    rng: &mut impl Rng,
) -> Individual {
    let (ra, rb) = (rows_of(a), rows_of(b));
    let shorter = ra.len().min(rb.len());
    let cut = if shorter <= 1 { 1 } else { rng.gen_range(1..shorter) };
    let splice = |head: &Rows, tail: &Rows| -> Rows {
        let mut rows: Rows = head[..cut.min(head.len())].to_vec();
        rows.extend_from_slice(&tail[cut.min(tail.len())..]);
        rows
    };
    for (h, t) in [(&ra, &rb), (&rb, &ra)] {
        let child = splice(h, t);
        if (bounds.min_agreements..=bounds.max_agreements).contains(&child.len())
            && feasible(&child, robots)
        {
            return into_individual(child, robots);
        }
    }
    let mut child = splice(&ra, &rb);
    if child.len() <= bounds.max_agreements && bridge(&mut child, robots, bounds, rng) {
        return into_individual(child, robots);
    }
    let fa = a.fitness.unwrap_or(f64::INFINITY);
    let fb = b.fitness.unwrap_or(f64::INFINITY);
    let mut keep = if fb < fa { b.clone() } else { a.clone() };
    keep.fitness = None;
    keep
}

fn jitter_steps(ind: &mut Individual, cfg: &GaConfig, rng: &mut impl Rng) {
    let mut rows = rows_of(ind);
    let mut touched = false;
    for (bits, steps) in &mut rows {
        for (b, s) in bits.iter().zip(steps.iter_mut()) {
            if *b && rng.gen_bool(cfg.mutation_rate) {
                let f = 1.0 + rng.gen_range(-cfg.jitter..=cfg.jitter);
                let v = (*s as f64 * f).round();
                *s = (v as u32).clamp(cfg.bounds.min_steps, cfg.bounds.max_steps);
                touched = true;
            }
        }
    }
    if touched {
        *ind = into_individual(rows, ind.k.robots());
    }
}

/// Inserts a random row or deletes one whose removal keeps the plan valid.
fn structural(ind: &mut Individual, bounds: &Bounds, rng: &mut impl Rng) {
    let robots = ind.k.robots();
    let mut rows = rows_of(ind);
    let (lo, hi) = bounds.row_range(robots);
    let insert = rng.gen_bool(0.5);
    if insert && rows.len() < hi {
        let at = rng.gen_range(0..=rows.len());
        rows.insert(at, random_row(robots, bounds, rng));
        *ind = into_individual(rows, robots);
    } else if !insert && rows.len() > lo {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(rng);
        for i in order {
            let mut trial = rows.clone();
            trial.remove(i);
            if feasible(&trial, robots) {
                *ind = into_individual(trial, robots);
                return;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub best: Individual,
    /// Best individual of the initial population.
    pub initial_best: Individual,
    /// Best fitness per generation, starting with the initial population.
    pub history: Vec<f64>,
}

fn generation_rng(seed: u64, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation as u64);
    rng
}

fn best_of(pop: &[Individual]) -> &Individual {
    // Ties go to the lowest index so the result is independent of sort stability.
    pop.iter()
        .reduce(|a, b| if b.fitness.unwrap() < a.fitness.unwrap() { b } else { a })
        .expect("population is non-empty")
}

pub fn evolve(robots: usize, cfg: &GaConfig) -> Result<Evolution, SolverError> {
    cfg.validate(robots)?;
    let mut rng = generation_rng(cfg.seed, 0);
    let mut pop = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        let mut ind = random_individual(robots, &cfg.bounds, &mut rng)?;
        evaluate(&mut ind, cfg)?;
        pop.push(ind);
    }
    let initial_best = best_of(&pop).clone();
    let mut history = vec![initial_best.fitness.unwrap()];

    for gen in 1..=cfg.generations {
        let mut rng = generation_rng(cfg.seed, gen);
        let mut ranked: Vec<usize> = (0..pop.len()).collect();
        ranked.sort_by(|&a, &b| {
            pop[a].fitness.unwrap().total_cmp(&pop[b].fitness.unwrap()).then(a.cmp(&b))
        });
        let mut next: Vec<Individual> = ranked[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population {
            let a = tournament(&pop, &mut rng);
            let mut child = if rng.gen_bool(cfg.crossover_rate) {
                let b = tournament(&pop, &mut rng);
                crossover(a, b, robots, &cfg.bounds, &mut rng)
            } else {
                a.clone()
            };
            jitter_steps(&mut child, cfg, &mut rng);
            if rng.gen_bool(cfg.structural_rate) {
                structural(&mut child, &cfg.bounds, &mut rng);
            }
            evaluate(&mut child, cfg)?;
            next.push(child);
        }
        pop = next;
        history.push(best_of(&pop).fitness.unwrap());
    }
    Ok(Evolution {
        best: best_of(&pop).clone(),
        initial_best,
        history,
    })
}

/// Mean newly revealed cells per step over short greedy single-robot
/// rollouts. Each trial starts from a random free cell of `truth` with the
/// knowledge in `known`, and repeatedly steps toward the nearest frontier.
pub fn calibrate_explore_rate(
    truth: &GridMap,
    known: &GridMap,
    vis_radius: u32,
    trials: usize,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<f64, SolverError> {
    if trials == 0 || horizon == 0 {
        return Err(SolverError::Config("calibration needs at least one trial and step".into()));
    }
    if truth.dims() != known.dims() {
        return Err(SolverError::Config("calibration maps differ in size".into()));
    }
    let starts: Vec<Pose> = truth.poses().filter(|&p| truth.is_free(p)).collect();
    if starts.is_empty() || known.count(CellState::Unknown) == 0 {
        return Ok(0.0);
    }
    let (mut revealed, mut steps) = (0usize, 0usize);
    for _ in 0..trials {
        let mut local = known.clone();
        let mut pos = starts[rng.gen_range(0..starts.len())];
        local.set(pos, CellState::Free);
        local.sense(truth, pos, vis_radius).expect("maps share dimensions");
        for _ in 0..horizon {
            let field = local.distances_from(pos);
            let target = local
                .frontiers_from(pos)
                .iter()
                .filter_map(|f| field.distance(f).map(|d| (d, f)))
                .min();
            let Some((_, goal)) = target else { break };
            // A frontier at the robot's own cell stays put; its neighbour is unknown.
            let path = local.shortest_path(pos, goal).expect("frontier is reachable");
            let next = if path.len() > 1 {
                path[1]
            } else {
                match local.neighbors4(pos).find(|&n| local.get(n) == CellState::Unknown && truth.is_free(n)) {
                    Some(n) => n,
                    None => break,
                }
            };
            pos = next;
            local.set(pos, CellState::Free);
            revealed += local.sense(truth, pos, vis_radius).expect("maps share dimensions");
            steps += 1;
        }
    }
    Ok(if steps == 0 { 0.0 } else { revealed as f64 / steps as f64 })
}
