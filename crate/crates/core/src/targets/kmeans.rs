//! Lloyd's algorithm with k-means++ seeding.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

pub const DIM: usize = 10;
pub type Point = [f64; DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringReport {
    pub k: usize,
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Number of times an empty cluster was re-seeded at the farthest point.
    pub reseeds: usize,
    /// Inertia after each assignment step, ending with the final assignment.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Point>,
    pub assignments: Vec<usize>,
    pub report: ClusteringReport,
}

pub fn sq_dist(a: &Point, b: &Point) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Nearest centroid for every point; ties go to the lowest index.
fn assign(points: &[Point], centroids: &[Point]) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

fn plus_plus(points: &[Point], k: usize, rng: &mut rng::Rng) -> Vec<Point> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn validate(points: &[Point], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::validation(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::validation(
            "non-finite coordinate in clustering input",
        ));
    }
    Ok(())
}

pub fn kmeans(
    points: &[Point],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering> {
    validate(points, k)?;
    let mut rng = rng::rng_for(seed, &["kmeans++"]);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut history = Vec::new();
    let mut reseeds = 0;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let assigned = assign(points, &centroids);
        history.push(assigned.iter().map(|a| a.1).sum());

        let mut sums = vec![[0.0; DIM]; k];
        let mut counts = vec![0usize; k];
        for (p, &(j, _)) in points.iter().zip(&assigned) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }

        let mut updated = centroids.clone();
        let mut taken = vec![false; points.len()];
        for j in 0..k {
            if counts[j] > 0 {
                updated[j] = sums[j].map(|s| s / counts[j] as f64);
                continue;
            }
            let far = assigned
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken[*i])
                .fold(
                    None,
                    |best: Option<(usize, f64)>, (i, &(_, d))| match best {
                        Some((_, bd)) if bd >= d => best,
                        _ => Some((i, d)),
                    },
                )
                .map(|(i, _)| i)
                .expect("k <= #points");
            taken[far] = true;
            updated[j] = points[far];
            reseeds += 1;
        }

        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < tol {
            break;
        }
    }

    let assigned = assign(points, &centroids);
    let inertia = assigned.iter().map(|a| a.1).sum();
    history.push(inertia);
    Ok(Clustering {
        centroids,
        assignments: assigned.into_iter().map(|a| a.0).collect(),
        report: ClusteringReport {
            k,
            inertia,
            iterations,
            seed,
            reseeds,
            inertia_history: history,
        },
    })
}

/// Best of `cfg.restarts` runs by inertia (earliest run on ties).
pub fn kmeans_best(points: &[Point], cfg: &KmeansConfig) -> Result<Clustering> {
    validate(points, cfg.k)?;
    let mut best: Option<Clustering> = None;
    for r in 0..cfg.restarts.max(1) {
        let seed = rng::derive_seed(cfg.seed, &["restart", &r.to_string()]);
        let run = kmeans(points, cfg.k, seed, cfg.max_iter, cfg.tol)?;
        if best
            .as_ref()
            .is_none_or(|b| run.report.inertia < b.report.inertia)
        {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn elbow_curve(
    points: &[Point],
    ks: &[usize],
    cfg: &KmeansConfig,
) -> Result<Vec<(usize, f64)>> {
    ks.iter()
        .map(|&k| {
            let run = kmeans_best(points, &KmeansConfig { k, ..*cfg })?;
            Ok((k, run.report.inertia))
        })
        .collect()
}
