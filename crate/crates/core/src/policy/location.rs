//! Rendezvous location choice: frontier clustering, farthest-point spreading
//! and plan regeneration at synchronization.

use rand::Rng;

use crate::gridworld::{GridMap, Pose};
use crate::plan::RendezvousPlan;
use crate::solver::{evolve, GaConfig, SolverError};

fn nearest(points: &[Pose], x: f64, y: f64) -> Pose {
    let d = |p: &Pose| (p.x as f64 - x).powi(2) + (p.y as f64 - y).powi(2);
    *points
        .iter()
        .min_by(|a, b| d(a).total_cmp(&d(b)).then(a.cmp(b)))
        .expect("points is non-empty")
}

/// Each frontier's centroid is the mean of itself and its `k` nearest
/// frontiers, snapped back to the closest frontier. Returns the distinct
/// snapped centroids in ascending order.
pub fn knn_centroids(frontiers: &[Pose], k: usize) -> Vec<Pose> {
    let mut out = Vec::new();
    for &f in frontiers {
        let mut others: Vec<Pose> = frontiers.iter().copied().filter(|&o| o != f).collect();
        others.sort_by_key(|&o| (f.dist2(o), o));
        others.truncate(k);
        let n = (others.len() + 1) as f64;
        let sx = others.iter().map(|o| o.x as f64).sum::<f64>() + f.x as f64;
        let sy = others.iter().map(|o| o.y as f64).sum::<f64>() + f.y as f64;
        out.push(nearest(frontiers, sx / n, sy / n));
    }
    out.sort();
    out.dedup();
    out
}

/// Uniform sample from the snapped centroid set; `None` without frontiers.
pub fn update_location(frontiers: &[Pose], k: usize, rng: &mut impl Rng) -> Option<Pose> {
    let centroids = knn_centroids(frontiers, k);
    if centroids.is_empty() {
        return None;
    }
    Some(centroids[rng.gen_range(0..centroids.len())])
}

/// Greedy farthest-point selection of `count` points: the first is farthest
/// from `from`, each next maximises its distance to the nearest chosen point.
/// With fewer candidates than `count` the chosen points repeat round-robin.
pub fn farthest_points(candidates: &[Pose], from: Pose, count: usize) -> Vec<Pose> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let mut pool: Vec<Pose> = candidates.to_vec();
    pool.sort();
    pool.dedup();
    let mut chosen: Vec<Pose> = Vec::new();
    // Ties keep the smallest pose, since the pool is sorted.
    let mut score: Vec<usize> = pool.iter().map(|p| p.dist2(from)).collect();
    let mut used = vec![false; pool.len()];
    while chosen.len() < count.min(pool.len()) {
        let (i, _) = score
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .fold(None, |best: Option<(usize, usize)>, (i, &s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((i, s)),
            })
            .expect("unused candidates remain");
        used[i] = true;
        let c = pool[i];
        chosen.push(c);
        for (j, s) in score.iter_mut().enumerate() {
            let d = pool[j].dist2(c);
            *s = if chosen.len() == 1 { d } else { (*s).min(d) };
        }
    }
    if count > chosen.len() {
        log::debug!("only {} distinct locations for {count} sub-teams; reusing", chosen.len());
    }
    (0..count).map(|i| chosen[i % chosen.len()]).collect()
}

/// Integer centre of mass of the frontiers, snapped to the nearest frontier.
pub fn frontier_center(frontiers: &[Pose]) -> Option<Pose> {
    if frontiers.is_empty() {
        return None;
    }
    let n = frontiers.len() as f64;
    let cx = (frontiers.iter().map(|p| p.x as f64).sum::<f64>() / n).round();
    let cy = (frontiers.iter().map(|p| p.y as f64).sum::<f64>() / n).round();
    Some(nearest(frontiers, cx, cy))
}

/// Regenerates the plan at a fulfilled synchronization agreement.
///
/// The solver runs with the explored area taken from `map`; a fresh sync row
/// spanning the whole team is appended. Sub-team locations spread over the
/// frontier centroids by farthest-point selection starting away from the
/// current sync location, and the new sync location is the frontier centre of
/// mass. Returns `None` when no frontiers remain.
pub fn synchronize(
    robots: usize,
    map: &GridMap,
    frontiers: &[Pose],
    current_sync: Pose,
    knn_k: usize,
    ga: &GaConfig,
) -> Result<Option<RendezvousPlan>, SolverError> {
    let Some(center) = frontier_center(frontiers) else {
        return Ok(None);
    };
    let mut cfg = ga.clone();
    cfg.env.omega_e = map.known_count() as f64;
    let evo = evolve(robots, &cfg)?;
    let (k, w, sync) = RendezvousPlan::with_sync_row_appended(&evo.best.k, &evo.best.w)?;
    let mut plan = RendezvousPlan::new(k, w, Some(sync), center)?;
    let sync_team = plan.team_of_row(sync);
    let others: Vec<usize> = (0..plan.sub_teams().len()).filter(|&t| t != sync_team).collect();
    let centroids = knn_centroids(frontiers, knn_k);
    let spots = farthest_points(&centroids, current_sync, others.len());
    for (&team, &spot) in others.iter().zip(&spots) {
        plan.set_team_location(team, spot);
    }
    plan.set_team_location(sync_team, center);
    Ok(Some(plan))
}
