//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to assigned centroids.
    pub objective: f64,
    /// Objective after each Lloyd iteration of the selected restart.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances from each point to the mean of its cluster.
pub fn clustering_objective(points: &[Vec<f64>], labels: &[usize], clusters: usize) -> f64 {
    let centroids = centroids_of(points, labels, clusters);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| centroids[l].as_ref().map_or(0.0, |c| sq_dist(p, c)))
        .sum()
}

fn centroids_of(points: &[Vec<f64>], labels: &[usize], clusters: usize) -> Vec<Option<Vec<f64>>> {
    let d = points.first().map_or(0, |p| p.len());
    let mut sums = vec![vec![0.0; d]; clusters];
    let mut counts = vec![0usize; clusters];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (l, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (l, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[idx].clone());
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> Clustering {
    let k = centroids.len();
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut objective = f64::INFINITY;
    for _ in 0..max_iter {
        let mut changed = false;
        let mut obj = 0.0;
        for (p, label) in points.iter().zip(labels.iter_mut()) {
            let (l, d) = nearest(p, &centroids);
            if *label != l {
                *label = l;
                changed = true;
            }
            obj += d;
        }
        let updated = centroids_of(points, &labels, k);
        for (l, c) in updated.into_iter().enumerate() {
            match c {
                Some(c) => centroids[l] = c,
                None => {
                    // Re-seed an empty cluster at the point farthest from its centroid.
                    let far = points
                        .iter()
                        .zip(&labels)
                        .enumerate()
                        .map(|(i, (p, &lab))| (i, sq_dist(p, &centroids[lab])))
                        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
                        .0;
                    centroids[l] = points[far].clone();
                    labels[far] = l;
                    changed = true;
                }
            }
        }
        objective = clustering_objective(points, &labels, k);
        history.push(objective);
        if !changed && obj.is_finite() {
            break;
        }
    }
    for (l, c) in centroids_of(points, &labels, k).into_iter().enumerate() {
        if let Some(c) = c {
            centroids[l] = c;
        }
    }
    Clustering {
        labels,
        centroids,
        objective,
        history,
    }
}

/// Cluster `points` into `k` groups, keeping the restart with the lowest
/// objective (first wins on ties).
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, max_iter: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {} samples",
            points.len()
        )));
    }
    let mut best: Option<Clustering> = None;
    for r in 0..restarts.max(1) {
        let mut rng = stream(seed, Stream::KMeans, r as u64, 0);
        let init = plus_plus_init(points, k, &mut rng);
        let c = lloyd(points, init, max_iter.max(1));
        if best.as_ref().is_none_or(|b| c.objective < b.objective) {
            best = Some(c);
        }
    }
    Ok(best.unwrap())
}
