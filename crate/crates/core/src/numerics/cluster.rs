//! DBSCAN, cluster scoring, k-means and k-medoids over points in objective space.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DpnError, Result};
use crate::numerics::{dist, dist2};

/// Cluster labels, `None` for noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

impl Clustering {
    /// One cluster holding every point.
    pub fn single(len: usize) -> Self {
        Self {
            labels: vec![Some(0); len],
            n_clusters: usize::from(len > 0),
        }
    }

    /// Labels with noise encoded as `-1`.
    pub fn signed_labels(&self) -> Vec<i64> {
        self.labels
            .iter()
            .map(|l| l.map_or(-1, |c| c as i64))
            .collect()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(cluster))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Density-based clustering. A point is core when at least `minpts` points
/// (itself included) lie within distance `r`. Clusters are grown in input
/// order, so a border point joins the first cluster that reaches it.
pub fn dbscan(points: &[Vec<f64>], r: f64, minpts: usize) -> Result<Clustering> {
    if !(r > 0.0) || minpts == 0 {
        return Err(DpnError::InvalidArgument(format!(
            "dbscan needs r > 0 and minpts >= 1 (got r={r}, minpts={minpts})"
        )));
    }
    let n = points.len();
    let r2 = r * r;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| dist2(&points[i], &points[j]) <= r2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= minpts).collect();

    let mut labels = vec![None; n];
    let mut n_clusters = 0;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        labels[start] = Some(c);
        let mut queue = vec![start];
        while let Some(p) = queue.pop() {
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(c);
                    if core[q] {
                        queue.push(q);
                    }
                }
            }
        }
    }
    Ok(Clustering { labels, n_clusters })
}

/// Longest edge of the Euclidean minimum spanning tree over `idx` (Prim, O(n²)).
fn mst_max_edge(points: &[Vec<f64>], idx: &[usize]) -> f64 {
    let n = idx.len();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut longest = 0.0_f64;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("vertex left");
        in_tree[u] = true;
        longest = longest.max(best[u]);
        for v in 0..n {
            if !in_tree[v] {
                let d = dist(&points[idx[u]], &points[idx[v]]);
                if d < best[v] {
                    best[v] = d;
                }
            }
        }
    }
    longest
}

/// Cluster quality, lower is better: the largest minimum-spanning-tree edge
/// inside any cluster divided by the smallest distance between points of
/// different clusters.
///
/// For scoring, noise points join the cluster of their nearest clustered point,
/// so labelling sparse stretches as noise cannot fake a separation. A single
/// cluster scores 1, which a split beats only when every cluster is internally
/// closer knit than its distance to the others.
pub fn weakest_link(points: &[Vec<f64>], clustering: &Clustering) -> f64 {
    let mut groups: Vec<Vec<usize>> = (0..clustering.n_clusters)
        .map(|c| clustering.members(c))
        .collect();
    let clustered: Vec<usize> = (0..points.len())
        .filter(|&i| clustering.labels[i].is_some())
        .collect();
    if clustered.is_empty() {
        return f64::INFINITY;
    }
    for i in (0..points.len()).filter(|&i| clustering.labels[i].is_none()) {
        let near = clustered
            .iter()
            .copied()
            .min_by(|&a, &b| dist2(&points[i], &points[a]).total_cmp(&dist2(&points[i], &points[b])))
            .expect("non-empty");
        groups[clustering.labels[near].expect("clustered")].push(i);
    }
    let link = groups
        .iter()
        .map(|g| mst_max_edge(points, g))
        .fold(0.0, f64::max);
    if link == 0.0 {
        return 0.0;
    }
    if groups.len() == 1 {
        return 1.0;
    }
    let mut separation = f64::INFINITY;
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            for &i in &groups[a] {
                for &j in &groups[b] {
                    separation = separation.min(dist(&points[i], &points[j]));
                }
            }
        }
    }
    if separation == 0.0 {
        return f64::INFINITY;
    }
    link / separation
}

/// k-means++ seeding: indices of the initial centres.
fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] == 0.0 {
                // roundoff pushed us past the last positive weight
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // every remaining point coincides with a centre
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &points[next]));
        }
    }
    chosen
}

fn check_k(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(DpnError::InvalidArgument("k must be positive".into()));
    }
    if k > points.len() {
        return Err(DpnError::InvalidArgument(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    Ok(())
}

fn nearest(p: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, z) in centres.iter().enumerate() {
        let d = dist2(p, z);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
    pub iterations: usize,
}

/// Lloyd's algorithm from k-means++ seeds, stopped when no centroid moves more
/// than `1e-8` or after 200 iterations. Empty clusters are re-seeded at the
/// point farthest from its centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    check_k(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = points[0].len();
    let mut centroids: Vec<Vec<f64>> = plus_plus(points, k, &mut rng)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let mut labels = vec![0; points.len()];
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            labels[i] = c;
            dists[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift = 0.0_f64;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                let far = (0..points.len())
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]))
                    .expect("non-empty");
                dists[far] = 0.0;
                points[far].clone()
            };
            shift = shift.max(dist(&next, &centroids[c]));
            centroids[c] = next;
        }
        if shift < 1e-8 {
            break;
        }
    }
    let mut sse = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, &centroids);
        labels[i] = c;
        sse += d;
    }
    Ok(KMeans {
        centroids,
        labels,
        sse,
        iterations,
    })
}

/// Medoid selection by PAM swap descent from k-means++ seeds. Each pass
/// evaluates all (medoid, non-medoid) swaps in `O(n²)` using the nearest and
/// second-nearest medoid distances, and applies the best improving one.
///
/// Returns indices into `points`, sorted ascending.
pub fn kmedoids(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(points, k)?;
    let n = points.len();
    if k == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = plus_plus(points, k, &mut rng);
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }

    let assign = |medoids: &[usize]| -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        let mut near = vec![0; n];
        let mut d1 = vec![f64::INFINITY; n];
        let mut d2 = vec![f64::INFINITY; n];
        for (o, p) in points.iter().enumerate() {
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dist(p, &points[m]);
                if d < d1[o] {
                    d2[o] = d1[o];
                    d1[o] = d;
                    near[o] = slot;
                } else if d < d2[o] {
                    d2[o] = d;
                }
            }
        }
        (near, d1, d2)
    };

    let (mut near, mut d1, mut d2) = assign(&medoids);
    for _ in 0..1000 {
        let mut best = (0.0, usize::MAX, usize::MAX);
        let mut delta = vec![0.0; k];
        for c in 0..n {
            if is_medoid[c] {
                continue;
            }
            delta.iter_mut().for_each(|d| *d = 0.0);
            let mut shared = 0.0;
            for o in 0..n {
                let doc = dist(&points[o], &points[c]);
                let gain = (doc - d1[o]).min(0.0);
                shared += gain;
                delta[near[o]] += doc.min(d2[o]) - d1[o] - gain;
            }
            for (slot, d) in delta.iter().enumerate() {
                let total = shared + d;
                if total < best.0 - 1e-12 {
                    best = (total, slot, c);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let (_, slot, c) = best;
        is_medoid[medoids[slot]] = false;
        is_medoid[c] = true;
        medoids[slot] = c;
        (near, d1, d2) = assign(&medoids);
    }
    medoids.sort_unstable();
    Ok(medoids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn dbscan_two_groups() {
        let mut p = vec![];
        for i in 0..5 {
            p.push(vec![0.02 * i as f64, 0.0]);
            p.push(vec![10.0 + 0.02 * i as f64, 0.0]);
        }
        let c = dbscan(&p, 1.0, 2).unwrap();
        assert_eq!(c.n_clusters, 2);
        assert_eq!(c.noise_count(), 0);
    }

    #[test]
    fn dbscan_identical_and_isolated() {
        let same = vec![vec![1.0, 1.0]; 4];
        assert_eq!(dbscan(&same, 0.1, 2).unwrap().n_clusters, 1);
        let lone = vec![vec![0.0], vec![0.01], vec![5.0]];
        let c = dbscan(&lone, 0.1, 2).unwrap();
        assert_eq!(c.labels[2], None);
        assert_eq!(c.signed_labels()[2], -1);
    }

    #[test]
    fn dbscan_empty() {
        let c = dbscan(&[], 1.0, 2).unwrap();
        assert_eq!(c.n_clusters, 0);
    }

    #[test]
    fn weakest_link_prefers_separation() {
        let p = pts(&[0.0, 0.1, 0.2, 5.0, 5.1, 5.2]);
        let split = dbscan(&p, 0.5, 2).unwrap();
        assert_eq!(split.n_clusters, 2);
        let one = Clustering::single(p.len());
        assert!(weakest_link(&p, &split) < weakest_link(&p, &one));
    }

    #[test]
    fn weakest_link_noise_gap_is_no_separation() {
        let xs: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let p = pts(&xs);
        let labels = (0..20)
            .map(|i| match i {
                0..=8 => Some(0),
                9 | 10 => None,
                _ => Some(1),
            })
            .collect();
        let split = Clustering { labels, n_clusters: 2 };
        assert!(weakest_link(&p, &split) >= weakest_link(&p, &Clustering::single(20)));
    }

    #[test]
    fn weakest_link_degenerate_cases() {
        let p = pts(&[0.0, 1.0, 2.0]);
        let singletons = Clustering {
            labels: vec![Some(0), Some(1), Some(2)],
            n_clusters: 3,
        };
        assert_eq!(weakest_link(&p, &singletons), 0.0);
        let same = vec![vec![3.0]; 3];
        assert_eq!(weakest_link(&same, &Clustering::single(3)), 0.0);
    }

    #[test]
    fn kmeans_exact_fit_and_mean() {
        let km = kmeans(&pts(&[0.0, 10.0]), 2, 1).unwrap();
        let mut c: Vec<f64> = km.centroids.iter().map(|v| v[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        let sq = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let km = kmeans(&sq, 1, 7).unwrap();
        assert_eq!(km.centroids[0], vec![0.5, 0.5]);
    }

    #[test]
    fn kmeans_too_many_centres() {
        assert!(kmeans(&pts(&[0.0]), 2, 0).is_err());
        assert!(kmedoids(&pts(&[0.0]), 2, 0).is_err());
    }

    #[test]
    fn kmedoids_small_cases() {
        assert_eq!(kmedoids(&pts(&[0.0, 10.0]), 2, 3).unwrap(), vec![0, 1]);
        for seed in 0..5 {
            assert_eq!(kmedoids(&pts(&[0.0, 1.0, 10.0]), 1, seed).unwrap(), vec![1]);
        }
        let p = pts(&[3.0, 1.0, 4.0, 1.5]);
        assert_eq!(kmedoids(&p, 4, 0).unwrap(), vec![0, 1, 2, 3]);
    }
}
