//! Numerical building blocks shared by the solver and the reference-set pipeline.

pub mod assignment;
pub mod cluster;
pub mod geometry;
pub mod linalg;
pub mod stats;

pub use assignment::{hungarian, Assignment};
pub use cluster::{dbscan, kmeans, kmedoids, weakest_link, Clustering, KMeans};
pub use geometry::{circumsphere, delaunay, sample_simplex, simplex_volume};
pub use linalg::{least_squares_min_norm, pseudo_inverse, qr_factor, solve_linear, LinearSolution, QrFactors};
pub use stats::{holm_sidak, mann_whitney, MannWhitney};

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// `a` Pareto-dominates `b` (minimization).
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Indices of the mutually non-dominated members of `points`. Exact duplicates
/// are all kept.
pub fn non_dominated(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect()
}
