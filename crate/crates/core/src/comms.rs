//! Range-gated communication between robots.
//!
//! Robots within range of each other form a connectivity graph each step.
//! Maps and poses flow freely across a connected component (robots relay for
//! each other within the step); addressed messages reach only recipients in
//! the sender's component.


use crate::gridworld::{GridMap, MapError, Pose};
use crate::plan::RendezvousPlan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityGraph {
    step: u64,
    robots: usize,
    edges: Vec<(usize, usize)>,
}

impl ConnectivityGraph {
    /// Normalises edges to `i < j`, sorted and deduplicated. Self-loops and
    /// out-of-range ids are dropped.
    pub fn new(step: u64, robots: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|&(a, b)| a != b && a < robots && b < robots)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        ConnectivityGraph { step, robots, edges }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn neighbors(&self, robot: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == robot, b == robot) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Smallest member id of each robot's component.
    pub fn component_labels(&self) -> Vec<usize> {
        component_labels(self.robots, self.edges.iter().copied())
    }

    /// Components as ascending id lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let labels = self.component_labels();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (r, &l) in labels.iter().enumerate() {
            if l == r {
                out.push(vec![r]);
            } else {
                let slot = out.iter_mut().find(|c| c[0] == l).expect("label precedes member");
                slot.push(r);
            }
        }
        out
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        let labels = self.component_labels();
        labels[a] == labels[b]
    }

    /// `true` when every robot in `team` shares one component.
    pub fn team_connected(&self, team: &[usize]) -> bool {
        let labels = self.component_labels();
        team.windows(2).all(|p| labels[p[0]] == labels[p[1]])
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().iter().all(|&l| l == 0)
    }
}

fn component_labels(robots: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..robots).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    (0..robots).map(|r| find(&mut parent, r)).collect()
}

/// Edge between every pair at Euclidean distance at most `range`.
pub fn connectivity(step: u64, poses: &[Pose], range: f64) -> ConnectivityGraph {
    let r2 = range * range;
    let mut edges = Vec::new();
    for (i, a) in poses.iter().enumerate() {
        for (j, b) in poses.iter().enumerate().skip(i + 1) {
            if a.dist2(*b) as f64 <= r2 {
                edges.push((i, j));
            }
        }
    }
    ConnectivityGraph::new(step, poses.len(), edges)
}

/// `true` when the union of the window's edges connects every robot.
/// An empty window carries no evidence and is never connected.
pub fn window_connected(graphs: &[ConnectivityGraph]) -> bool {
    let Some(first) = graphs.first() else {
        return false;
    };
    let robots = first.robots;
    debug_assert!(graphs.iter().all(|g| g.robots == robots));
    let labels = component_labels(robots, graphs.iter().flat_map(|g| g.edges.iter().copied()));
    labels.iter().all(|&l| l == 0)
}

/// Per-robot result of one exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    /// Cells each robot's map gained.
    pub gained: Vec<usize>,
    /// Poses of the other robots in each robot's component, ascending by id.
    pub neighbors: Vec<Vec<(usize, Pose)>>,
}

/// Shares maps and poses across every component of `graph`.
///
/// Each robot ends with the join of all maps in its component. Results depend
/// only on the pre-exchange maps, and running the exchange again in the same
/// step changes nothing.
pub fn exchange(
    maps: &mut [GridMap],
    poses: &[Pose],
    graph: &ConnectivityGraph,
) -> Result<Exchange, MapError> {
    let n = maps.len();
    let mut gained = vec![0; n];
    let mut neighbors = vec![Vec::new(); n];
    for comp in graph.components() {
        if comp.len() > 1 {
            let mut joint = maps[comp[0]].clone();
            for &r in &comp[1..] {
                joint.merge_from(&maps[r])?;
            }
            for &r in &comp {
                gained[r] = maps[r].merge_from(&joint)?;
            }
        }
        for &r in &comp {
            neighbors[r] = comp.iter().filter(|&&o| o != r).map(|&o| (o, poses[o])).collect();
        }
    }
    Ok(Exchange { gained, neighbors })
}

/// A robot's broadcast state: its pose plus whatever status the policy shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Beacon<S> {
    pub robot: usize,
    pub pose: Pose,
    pub status: S,
}

/// Beacons each robot hears: every other robot in its component.
pub fn hear<S: Clone>(beacons: &[Beacon<S>], graph: &ConnectivityGraph) -> Vec<Vec<Beacon<S>>> {
    let labels = graph.component_labels();
    (0..beacons.len())
        .map(|r| {
            beacons
                .iter()
                .filter(|b| b.robot != r && labels[b.robot] == labels[r])
                .cloned()
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// New meeting location for one agreement row. `complete` is false when
    /// the robots present gave up waiting for the rest of the sub-team.
    LocationUpdate { row: usize, location: Pose, complete: bool },
    /// A regenerated plan, sent at synchronization.
    PlanUpdate(Box<RendezvousPlan>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub sender: usize,
    pub recipients: Vec<usize>,
    pub message: Message,
}

/// Routes each envelope to those recipients in the sender's component.
/// Inboxes preserve outbox order. Returns the inboxes and the number of
/// envelope-recipient pairs dropped for being out of reach.
pub fn deliver(
    outbox: &[Envelope],
    graph: &ConnectivityGraph,
) -> (Vec<Vec<(usize, Message)>>, usize) {
    let labels = graph.component_labels();
    let mut inbox = vec![Vec::new(); graph.robots()];
    let mut dropped = 0;
    for env in outbox {
        for &r in &env.recipients {
            if r == env.sender {
                continue;
            }
            if labels[r] == labels[env.sender] {
                inbox[r].push((env.sender, env.message.clone()));
            } else {
                dropped += 1;
            }
        }
    }
    (inbox, dropped)
}

/// `step,i,j` rows; steps without edges produce no rows.
pub fn connectivity_csv(graphs: &[ConnectivityGraph]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "i", "j"]).expect("writing to memory cannot fail");
    for g in graphs {
        for &(i, j) in &g.edges {
            w.serialize((g.step, i, j)).expect("writing to memory cannot fail");
        }
    }
    String::from_utf8(w.into_inner().expect("writing to memory cannot fail")).expect("csv output is utf-8")
}

/// Parses [`connectivity_csv`] output back into one graph per listed step.
pub fn parse_connectivity_csv(text: &str, robots: usize) -> Result<Vec<ConnectivityGraph>, String> {
    let mut graphs: Vec<ConnectivityGraph> = Vec::new();
    let mut pending: Vec<(usize, usize)> = Vec::new();
    let mut current: Option<u64> = None;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    for record in reader.deserialize::<(u64, usize, usize)>() {
        let (step, i, j) = record.map_err(|e| e.to_string())?;
        if i >= robots || j >= robots || i == j {
            return Err(format!("step {step}: invalid robot pair {i},{j}"));
        }
        if current != Some(step) {
            if let Some(s) = current {
                if step < s {
                    return Err(format!("step {step}: steps must be non-decreasing"));
                }
                graphs.push(ConnectivityGraph::new(s, robots, std::mem::take(&mut pending)));
            }
            current = Some(step);
        }
        pending.push((i, j));
    }
    if let Some(s) = current {
        graphs.push(ConnectivityGraph::new(s, robots, pending));
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::CellState;
    use proptest::prelude::*;

    fn p(x: usize, y: usize) -> Pose {
        Pose::new(x, y)
    }

    #[test]
    fn range_gating() {
        let same = connectivity(0, &[p(3, 3), p(3, 3)], 0.0);
        assert_eq!(same.edges(), &[(0, 1)]);
        let far = connectivity(0, &[p(0, 0), p(3, 0)], 2.0);
        assert!(far.edges().is_empty());
        let line = connectivity(0, &[p(0, 0), p(2, 0), p(4, 0), p(6, 0)], 2.0);
        assert_eq!(line.edges(), &[(0, 1), (1, 2), (2, 3)]);
        // (2,1) is at distance sqrt(5) > 2.
        let diag = connectivity(0, &[p(0, 0), p(2, 1)], 2.0);
        assert!(diag.edges().is_empty());
    }

    #[test]
    fn graph_normalisation_and_components() {
        let g = ConnectivityGraph::new(7, 5, [(3, 1), (1, 3), (2, 2), (4, 0), (9, 1)]);
        assert_eq!(g.edges(), &[(0, 4), (1, 3)]);
        assert_eq!(g.components(), vec![vec![0, 4], vec![1, 3], vec![2]]);
        assert_eq!(g.neighbors(3), vec![1]);
        assert!(g.team_connected(&[1, 3]));
        assert!(!g.team_connected(&[0, 1]));
        assert!(!g.is_connected());
    }

    #[test]
    fn window_union() {
        let g = |s, e: &[(usize, usize)]| ConnectivityGraph::new(s, 4, e.iter().copied());
        assert!(window_connected(&[g(0, &[(0, 1)]), g(1, &[(1, 2)]), g(2, &[(2, 3)])]));
        assert!(!window_connected(&[g(0, &[(0, 1)]), g(1, &[(1, 2)]), g(2, &[(0, 2)])]));
        assert!(!window_connected(&[]));
    }

    fn tagged(w: usize, h: usize, tag: Pose) -> GridMap {
        let mut m = GridMap::unknown(w, h);
        m.set(tag, CellState::Free);
        m
    }

    #[test]
    fn exchange_merges_components() {
        let poses = [p(0, 0), p(1, 0), p(9, 9)];
        let mut maps: Vec<GridMap> = (0..3).map(|i| tagged(10, 10, p(i, 5))).collect();
        let before = maps.clone();
        let g = connectivity(0, &poses, 2.0);
        let ex = exchange(&mut maps, &poses, &g).unwrap();
        let ab = crate::gridworld::merge(&before[0], &before[1]).unwrap();
        assert_eq!(maps[0], ab);
        assert_eq!(maps[1], ab);
        assert_eq!(maps[2], before[2]);
        assert_eq!(ex.gained, vec![1, 1, 0]);
        assert_eq!(ex.neighbors[0], vec![(1, p(1, 0))]);
        assert!(ex.neighbors[2].is_empty());
        let again = exchange(&mut maps, &poses, &g).unwrap();
        assert_eq!(again.gained, vec![0, 0, 0]);
    }

    #[test]
    fn triangle_gets_three_way_merge() {
        let poses = [p(0, 0), p(1, 0), p(0, 1)];
        let mut maps: Vec<GridMap> = (0..3).map(|i| tagged(4, 4, p(i, 3))).collect();
        let all = {
            let mut m = maps[0].clone();
            m.merge_from(&maps[1]).unwrap();
            m.merge_from(&maps[2]).unwrap();
            m
        };
        exchange(&mut maps, &poses, &connectivity(0, &poses, 2.0)).unwrap();
        assert!(maps.iter().all(|m| *m == all));
    }

    #[test]
    fn messages_reach_only_addressed_reachable_robots() {
        let g = ConnectivityGraph::new(0, 4, [(0, 1), (1, 2)]);
        let outbox = vec![Envelope {
            sender: 0,
            recipients: vec![0, 2, 3],
            message: Message::LocationUpdate { row: 1, location: p(4, 4), complete: true },
        }];
        let (inbox, dropped) = deliver(&outbox, &g);
        assert!(inbox[0].is_empty() && inbox[1].is_empty() && inbox[3].is_empty());
        assert_eq!(inbox[2], vec![(0, Message::LocationUpdate { row: 1, location: p(4, 4), complete: true })]);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn beacons_follow_components() {
        let g = ConnectivityGraph::new(0, 3, [(0, 2)]);
        let beacons: Vec<Beacon<u8>> = (0..3).map(|r| Beacon { robot: r, pose: p(r, 0), status: r as u8 }).collect();
        let heard = hear(&beacons, &g);
        assert_eq!(heard[0], vec![beacons[2].clone()]);
        assert!(heard[1].is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let graphs = vec![
            ConnectivityGraph::new(3, 3, [(0, 1)]),
            ConnectivityGraph::new(5, 3, [(0, 2), (1, 2)]),
        ];
        let text = connectivity_csv(&graphs);
        assert_eq!(text, "step,i,j\n3,0,1\n5,0,2\n5,1,2\n");
        assert_eq!(parse_connectivity_csv(&text, 3).unwrap(), graphs);
        assert!(parse_connectivity_csv("step,i,j\n1,0,0\n", 3).is_err());
        assert!(parse_connectivity_csv("step,i,j\n4,0,1\n2,0,1\n", 3).is_err());
    }

    proptest! {
        #[test]
        fn knowledge_flows_only_along_temporal_paths(
            robots in 2usize..=5,
            walk in proptest::collection::vec(proptest::collection::vec((0usize..8, 0usize..8), 5), 1..20),
        ) {
            // Robot r starts knowing only its private tag cell (r, 0) on row 8.
            let size = 9;
            let mut maps: Vec<GridMap> = (0..robots).map(|r| tagged(size, size, p(r, 8))).collect();
            // knows[i][j]: j's tag has reached i. Repeated pairwise relaxation
            // over each step's edges until nothing changes.
            let mut knows: Vec<Vec<bool>> = (0..robots).map(|i| (0..robots).map(|j| i == j).collect()).collect();
            for (step, positions) in walk.iter().enumerate() {
                let poses: Vec<Pose> = positions[..robots].iter().map(|&(x, y)| p(x, y)).collect();
                let g = connectivity(step as u64, &poses, 2.0);
                let mut changed = true;
                while changed {
                    changed = false;
                    for &(a, b) in g.edges() {
                        for j in 0..robots {
                            if knows[a][j] != knows[b][j] {
                                knows[a][j] = true;
                                knows[b][j] = true;
                                changed = true;
                            }
                        }
                    }
                }
                exchange(&mut maps, &poses, &g).unwrap();
                for i in 0..robots {
                    for j in 0..robots {
                        prop_assert_eq!(maps[i].get(p(j, 8)) == CellState::Free, knows[i][j]);
                    }
                }
            }
        }

        #[test]
        fn exchange_is_order_independent(seed_poses in proptest::collection::vec((0usize..6, 0usize..6), 4)) {
            let poses: Vec<Pose> = seed_poses.iter().map(|&(x, y)| p(x, y)).collect();
            let g = connectivity(0, &poses, 2.0);
            let mut forward: Vec<GridMap> = (0..4).map(|r| tagged(6, 6, p(r, 5))).collect();
            let mut reversed: Vec<GridMap> = forward.iter().rev().cloned().collect();
            let rposes: Vec<Pose> = poses.iter().rev().copied().collect();
            let rg = connectivity(0, &rposes, 2.0);
            exchange(&mut forward, &poses, &g).unwrap();
            exchange(&mut reversed, &rposes, &rg).unwrap();
            reversed.reverse();
            prop_assert_eq!(forward, reversed);
        }
    }
}
