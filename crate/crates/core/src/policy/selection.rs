//! Frontier utilities and single/joint action selection.

use crate::gridworld::{FrontierSet, GridMap, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    pub alpha: f64,
    pub beta: f64,
    pub vis_radius: u32,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams {
            alpha: 1.0,
            beta: 0.0,
            vis_radius: 5,
        }
    }
}

impl UtilityParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(format!("beta must be non-negative, got {}", self.beta));
        }
        Ok(())
    }
}

/// `α·N/Φ + β·⟨f − x, f − y⟩`, with `Φ = 0` treated as 1.
pub fn utility_from(gain: usize, cost: u32, f: Pose, params: &UtilityParams, x: (f64, f64), y: Pose) -> f64 {
    let phi = cost.max(1) as f64;
    let mut u = params.alpha * gain as f64 / phi;
    if params.beta != 0.0 {
        let (fx, fy) = (f.x as f64, f.y as f64);
        let dot = (fx - x.0) * (fx - y.x as f64) + (fy - x.1) * (fy - y.y as f64);
        u += params.beta * dot;
    }
    u
}

/// Utility of frontier `f` for a robot at `pose`; `None` when unreachable.
pub fn utility(
    f: Pose,
    local: &GridMap,
    pose: Pose,
    params: &UtilityParams,
    x: (f64, f64),
    y: Pose,
) -> Option<f64> {
    let cost = local.distances_from(pose).distance(f)?;
    Some(utility_from(local.unknown_gain(f, params.vis_radius), cost, f, params, x, y))
}

/// Argmax of `scores`, skipping `None`; ties go to the lowest index.
fn argmax(scores: impl Iterator<Item = Option<f64>>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        if let Some(v) = s {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best
}

/// Utility of every frontier for every robot. Rows follow `poses`, columns
/// follow the (sorted) frontier set.
pub fn utility_matrix(
    frontiers: &FrontierSet,
    map: &GridMap,
    poses: &[Pose],
    targets: &[Pose],
    params: &UtilityParams,
) -> Vec<Vec<Option<f64>>> {
    let x = map.center_of_mass().unwrap_or((0.0, 0.0));
    let gains: Vec<usize> = frontiers.iter().map(|f| map.unknown_gain(f, params.vis_radius)).collect();
    poses
        .iter()
        .zip(targets)
        .map(|(&pose, &y)| {
            let field = map.distances_from(pose);
            frontiers
                .iter()
                .zip(&gains)
                .map(|(f, &g)| field.distance(f).map(|d| utility_from(g, d, f, params, x, y)))
                .collect()
        })
        .collect()
}

/// Best frontier for one robot; ties go to the smaller `(y, x)`.
pub fn select_single(
    frontiers: &FrontierSet,
    local: &GridMap,
    pose: Pose,
    params: &UtilityParams,
    y: Pose,
) -> Option<(Pose, f64)> {
    let u = utility_matrix(frontiers, local, &[pose], &[y], params);
    argmax(u[0].iter().copied()).map(|(i, v)| (frontiers.as_slice()[i], v))
}

/// Greedy sequential assignment in row order. Each robot prefers frontiers
/// nobody has taken yet; if every reachable frontier is taken it falls back
/// to the one with the best negated utility. Returns the chosen column and
/// the value the robot booked for it.
pub fn assign_greedy(u: &[Vec<Option<f64>>]) -> Vec<Option<(usize, f64)>> {
    let cols = u.first().map_or(0, Vec::len);
    let mut taken = vec![false; cols];
    let mut out = Vec::with_capacity(u.len());
    for row in u {
        let fresh = argmax(row.iter().enumerate().map(|(j, &v)| v.filter(|_| !taken[j])));
        let pick = fresh.or_else(|| argmax(row.iter().map(|&v| v.map(|x| -x))));
        if let Some((j, _)) = pick {
            taken[j] = true;
        }
        out.push(pick);
    }
    out
}

/// Team welfare: each robot earns its utility for its frontier, negated when
/// another robot chose the same frontier.
pub fn welfare(u: &[Vec<Option<f64>>], assignment: &[Option<usize>]) -> f64 {
    let mut total = 0.0;
    for (i, a) in assignment.iter().enumerate() {
        let Some(j) = *a else { continue };
        let v = u[i][j].expect("assigned frontiers are reachable");
        let shared = assignment.iter().enumerate().any(|(k, b)| k != i && *b == Some(j));
        total += if shared { -v } else { v };
    }
    total
}

/// Welfare-maximising assignment by enumerating every outcome. Robots with no
/// reachable frontier stay unassigned. Ties keep the first outcome in
/// lexicographic order.
pub fn assign_exhaustive(u: &[Vec<Option<f64>>]) -> (Vec<Option<usize>>, f64) {
    let options: Vec<Vec<usize>> = u
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(j, _)| j).collect())
        .collect();
    let mut idx = vec![0usize; u.len()];
    let mut best: Option<(Vec<Option<usize>>, f64)> = None;
    loop {
        let current: Vec<Option<usize>> = options
            .iter()
            .zip(&idx)
            .map(|(o, &i)| o.get(i).copied())
            .collect();
        let w = welfare(u, &current);
        if best.as_ref().is_none_or(|(_, b)| w > *b) {
            best = Some((current, w));
        }
        // Odometer increment over the non-empty option lists.
        let mut carry = true;
        for (i, o) in idx.iter_mut().zip(&options) {
            if !carry {
                break;
            }
            if o.is_empty() {
                continue;
            }
            *i += 1;
            if *i < o.len() {
                carry = false;
            } else {
                *i = 0;
            }
        }
        if carry {
            break;
        }
    }
    best.expect("at least one outcome exists")
}

/// A team member as seen by joint selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeamMember {
    pub robot: usize,
    pub pose: Pose,
    /// The member's current rendezvous location.
    pub rendezvous: Pose,
}

/// Greedy joint selection over a co-located team sharing `map`. Members are
/// processed in ascending robot id, so every member computes the same result.
/// The output follows that order.
pub fn select_joint(
    team: &[TeamMember],
    frontiers: &FrontierSet,
    map: &GridMap,
    params: &UtilityParams,
) -> Vec<(usize, Option<(Pose, f64)>)> {
    let mut team = team.to_vec();
    team.sort_by_key(|m| m.robot);
    let poses: Vec<Pose> = team.iter().map(|m| m.pose).collect();
    let ys: Vec<Pose> = team.iter().map(|m| m.rendezvous).collect();
    let u = utility_matrix(frontiers, map, &poses, &ys, params);
    let picks = assign_greedy(&u);
    team.iter()
        .zip(picks)
        .map(|(m, p)| (m.robot, p.map(|(j, v)| (frontiers.as_slice()[j], v))))
        .collect()
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
    fn utility_arithmetic() {
        let a1 = UtilityParams { alpha: 1.0, beta: 0.0, vis_radius: 5 };
        assert_eq!(utility_from(20, 10, p(1, 1), &a1, (0.0, 0.0), p(0, 0)), 2.0);
        assert_eq!(utility_from(20, 0, p(1, 1), &a1, (0.0, 0.0), p(0, 0)), 20.0);
        let b1 = UtilityParams { beta: 1.0, ..a1 };
        // f - x = (4, 0), f - y = (2, 0).
        assert_eq!(utility_from(0, 1, p(4, 0), &b1, (0.0, 0.0), p(2, 0)), 8.0);
        // Collinear beyond y: positive; f between x and y: negative.
        assert!(utility_from(0, 1, p(6, 0), &b1, (0.0, 0.0), p(3, 0)) > 0.0);
        assert!(utility_from(0, 1, p(2, 0), &b1, (0.0, 0.0), p(4, 0)) < 0.0);
    }

    fn open_with_unknown_band() -> GridMap {
        // Known free left half, unknown right half.
        let mut m = GridMap::unknown(12, 7);
        for y in 0..7 {
            for x in 0..6 {
                m.set(p(x, y), CellState::Free);
            }
        }
        m
    }

    #[test]
    fn single_selection_matches_brute_force() {
        let m = open_with_unknown_band();
        let frontiers = m.frontiers();
        let params = UtilityParams::default();
        let pose = p(0, 1);
        let x = m.center_of_mass().unwrap();
        let (best, value) = select_single(&frontiers, &m, pose, &params, pose).unwrap();
        let brute: Vec<(Pose, f64)> = frontiers
            .iter()
            .map(|f| (f, utility(f, &m, pose, &params, x, pose).unwrap()))
            .collect();
        let top = brute.iter().map(|b| b.1).fold(f64::MIN, f64::max);
        let first = brute.iter().find(|b| b.1 == top).unwrap();
        assert_eq!((best, value), *first);
    }

    #[test]
    fn single_selection_ties_take_smaller_pose() {
        let mut m = GridMap::new(5, 1, CellState::Free);
        m.set(p(0, 0), CellState::Unknown);
        m.set(p(4, 0), CellState::Unknown);
        let f = m.frontiers();
        assert_eq!(f.as_slice(), &[p(1, 0), p(3, 0)]);
        let params = UtilityParams { vis_radius: 1, ..UtilityParams::default() };
        assert_eq!(select_single(&f, &m, p(2, 0), &params, p(2, 0)).unwrap().0, p(1, 0));
        let lone = FrontierSet::from_poses(vec![p(3, 0)]);
        assert_eq!(select_single(&lone, &m, p(2, 0), &params, p(2, 0)).unwrap().0, p(3, 0));
    }

    fn m(rows: &[&[f64]]) -> Vec<Vec<Option<f64>>> {
        rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect()
    }

    #[test]
    fn greedy_versus_oracle_fixture() {
        let u = m(&[&[5.0, 3.0], &[4.0, 1.0]]);
        let g = assign_greedy(&u);
        assert_eq!(g, vec![Some((0, 5.0)), Some((1, 1.0))]);
        let ga: Vec<Option<usize>> = g.iter().map(|x| x.map(|(j, _)| j)).collect();
        assert_eq!(welfare(&u, &ga), 6.0);
        let (best, w) = assign_exhaustive(&u);
        assert_eq!(best, vec![Some(1), Some(0)]);
        assert_eq!(w, 7.0);
    }

    #[test]
    fn more_robots_than_frontiers() {
        let u = m(&[&[5.0, 3.0], &[4.0, 6.0], &[2.0, 7.0]]);
        let g = assign_greedy(&u);
        assert_eq!(g[0], Some((0, 5.0)));
        assert_eq!(g[1], Some((1, 6.0)));
        // Both taken: the third robot books the larger negated utility, -2.
        assert_eq!(g[2], Some((0, -2.0)));
    }

    #[test]
    fn unreachable_entries_are_skipped() {
        let u = vec![vec![None, Some(1.0)], vec![None, None]];
        assert_eq!(assign_greedy(&u), vec![Some((1, 1.0)), None]);
        let (a, w) = assign_exhaustive(&u);
        assert_eq!(a, vec![Some(1), None]);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn joint_with_one_robot_is_single() {
        let m = open_with_unknown_band();
        let f = m.frontiers();
        let params = UtilityParams::default();
        let me = TeamMember { robot: 3, pose: p(2, 2), rendezvous: p(0, 0) };
        let joint = select_joint(&[me], &f, &m, &params);
        assert_eq!(joint, vec![(3, select_single(&f, &m, me.pose, &params, me.rendezvous))]);
    }

    fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<Option<f64>>>> {
        (1usize..=3, 1usize..=4).prop_flat_map(|(r, f)| {
            proptest::collection::vec(proptest::collection::vec((0u32..100).prop_map(|v| Some(v as f64)), f), r)
        })
    }

    proptest! {
        #[test]
        fn oracle_dominates_greedy(u in matrix_strategy()) {
            let g: Vec<Option<usize>> = assign_greedy(&u).iter().map(|x| x.map(|(j, _)| j)).collect();
            let (_, best) = assign_exhaustive(&u);
            prop_assert!(best >= welfare(&u, &g));
            if u[0].len() >= u.len() {
                let mut seen: Vec<usize> = g.iter().map(|x| x.unwrap()).collect();
                seen.sort();
                seen.dedup();
                prop_assert_eq!(seen.len(), u.len());
            }
        }

        #[test]
        fn joint_selection_is_member_independent(
            cells in proptest::collection::vec(0u8..3, 64),
            starts in proptest::collection::vec((0usize..8, 0usize..8), 1..=3),
        ) {
            let mut map = GridMap::unknown(8, 8);
            for (i, c) in cells.iter().enumerate() {
                let pose = map.pose_at(i);
                map.set(pose, match c { 0 => CellState::Unknown, 1 => CellState::Free, _ => CellState::Obstacle });
            }
            let team: Vec<TeamMember> = starts
                .iter()
                .enumerate()
                .map(|(r, &(x, y))| {
                    map.set(p(x, y), CellState::Free);
                    TeamMember { robot: r, pose: p(x, y), rendezvous: p(0, 0) }
                })
                .collect();
            let frontiers = map.frontiers();
            let params = UtilityParams::default();
            let a = select_joint(&team, &frontiers, &map, &params);
            let mut reversed = team.clone();
            reversed.reverse();
            let b = select_joint(&reversed, &frontiers, &map, &params);
            prop_assert_eq!(&a, &b);
            let copy = map.clone();
            prop_assert_eq!(select_joint(&team, &frontiers, &copy, &params), a);
        }
    }
}
