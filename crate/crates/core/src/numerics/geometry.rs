//! Bowyer-Watson Delaunay triangulation in 2-D and 3-D, simplex volumes, and
//! uniform sampling inside simplices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{DpnError, Result};
use crate::numerics::dist2;

/// Circumcentre and squared circumradius of a `d`-simplex in `R^d`, or `None`
/// for a flat simplex.
pub fn circumsphere(vertices: &[&[f64]]) -> Option<(Vec<f64>, f64)> {
    let d = vertices.len() - 1;
    let v0 = vertices[0];
    // 2(v_i − v_0)ᵀ c = |v_i|² − |v_0|²
    let mut a = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for i in 0..d {
        let vi = vertices[i + 1];
        for j in 0..d {
            a[(i, j)] = 2.0 * (vi[j] - v0[j]);
        }
        b[i] = vi.iter().map(|x| x * x).sum::<f64>() - v0.iter().map(|x| x * x).sum::<f64>();
    }
    let c = a.lu().solve(&b)?;
    if c.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let centre: Vec<f64> = c.iter().copied().collect();
    let r2 = dist2(&centre, v0);
    Some((centre, r2))
}

/// `d`-volume of the simplex spanned by `d + 1` points in any ambient dimension.
pub fn simplex_volume(vertices: &[&[f64]]) -> f64 {
    let d = vertices.len() - 1;
    if d == 0 {
        return 0.0;
    }
    let amb = vertices[0].len();
    let e = DMatrix::from_fn(amb, d, |r, c| vertices[c + 1][r] - vertices[0][r]);
    let gram = e.transpose() * e;
    let det = gram.determinant().max(0.0);
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    det.sqrt() / fact
}

/// Dimension of the affine hull of `points`.
fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let d = points[0].len();
    let e = DMatrix::from_fn(d, points.len() - 1, |r, c| points[c + 1][r] - points[0][r]);
    let scale = e.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    e.svd(false, false).rank(1e-9 * scale)
}

struct Cell {
    v: Vec<usize>,
    centre: Vec<f64>,
    r2: f64,
}

/// Delaunay triangulation of points in `R^2` or `R^3`. Returns simplices as
/// sorted vertex index tuples into `points`.
///
/// A point lies inside a circumsphere when its squared distance to the centre
/// is below `r²·(1 − 1e-9)`, so cocircular configurations keep whichever
/// diagonal was built first.
pub fn delaunay(points: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let Some(first) = points.first() else {
        return Err(DpnError::Degenerate("no points to triangulate".into()));
    };
    let d = first.len();
    if !(2..=3).contains(&d) {
        return Err(DpnError::InvalidArgument(format!(
            "triangulation supports dimensions 2 and 3, got {d}"
        )));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(DpnError::InvalidArgument("mixed point dimensions".into()));
    }
    if points.len() < d + 1 || affine_rank(points) < d {
        return Err(DpnError::Degenerate(format!(
            "{} points do not span {d} dimensions",
            points.len()
        )));
    }

    // Work in normalized coordinates so the super-simplex size is scale-free.
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let span = (0..d).map(|j| hi[j] - lo[j]).fold(0.0, f64::max);
    let mut pts: Vec<Vec<f64>> = points
        .iter()
        .map(|p| (0..d).map(|j| (p[j] - lo[j]) / span).collect())
        .collect();
    let n = pts.len();
    let big = 1e3;
    let centre = vec![0.5; d];
    let supers: Vec<Vec<f64>> = if d == 2 {
        vec![
            vec![centre[0] - big, centre[1] - big],
            vec![centre[0] + big, centre[1] - big],
            vec![centre[0], centre[1] + big],
        ]
    } else {
        vec![
            vec![centre[0] - big, centre[1] - big, centre[2] - big],
            vec![centre[0] + big, centre[1] - big, centre[2] - big],
            vec![centre[0], centre[1] + big, centre[2] - big],
            vec![centre[0], centre[1], centre[2] + big],
        ]
    };
    pts.extend(supers);

    let make = |v: Vec<usize>, pts: &[Vec<f64>]| -> Option<Cell> {
        let verts: Vec<&[f64]> = v.iter().map(|&i| pts[i].as_slice()).collect();
        circumsphere(&verts).map(|(centre, r2)| Cell { v, centre, r2 })
    };

    let mut cells = vec![make((n..n + d + 1).collect(), &pts).expect("super simplex")];
    for i in 0..n {
        let p = &pts[i];
        let (bad, good): (Vec<Cell>, Vec<Cell>) = cells
            .into_iter()
            .partition(|c| dist2(p, &c.centre) < c.r2 * (1.0 - 1e-9));
        cells = good;
        // Faces of the cavity appear in exactly one bad cell.
        let mut faces: Vec<Vec<usize>> = Vec::new();
        for c in &bad {
            for skip in 0..=d {
                let mut f: Vec<usize> = c
                    .v
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != skip)
                    .map(|(_, v)| *v)
                    .collect();
                f.sort_unstable();
                faces.push(f);
            }
        }
        faces.sort();
        let mut k = 0;
        while k < faces.len() {
            let mut e = k + 1;
            while e < faces.len() && faces[e] == faces[k] {
                e += 1;
            }
            if e - k == 1 {
                let mut v = faces[k].clone();
                v.push(i);
                if let Some(cell) = make(v, &pts) {
                    cells.push(cell);
                }
            }
            k = e;
        }
    }

    let mut out: Vec<Vec<usize>> = cells
        .into_iter()
        .filter(|c| c.v.iter().all(|&v| v < n))
        .filter(|c| {
            let verts: Vec<&[f64]> = c.v.iter().map(|&i| pts[i].as_slice()).collect();
            simplex_volume(&verts) > 1e-14
        })
        .map(|mut c| {
            c.v.sort_unstable();
            c.v
        })
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(DpnError::Degenerate("triangulation produced no simplices".into()));
    }
    Ok(out)
}

/// `count` points drawn uniformly from the simplex with the given vertices,
/// using spacings of sorted uniforms as barycentric coordinates.
pub fn sample_simplex<R: Rng + ?Sized>(
    vertices: &[Vec<f64>],
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    if count == 0 || vertices.is_empty() {
        return Vec::new();
    }
    let d = vertices.len() - 1;
    let dim = vertices[0].len();
    let mut u = vec![0.0; d + 2];
    (0..count)
        .map(|_| {
            u[0] = 0.0;
            for slot in u.iter_mut().take(d + 1).skip(1) {
                *slot = rng.gen::<f64>();
            }
            u[d + 1] = 1.0;
            u[1..=d].sort_by(f64::total_cmp);
            let mut x = vec![0.0; dim];
            for (j, v) in vertices.iter().enumerate() {
                let w = u[j + 1] - u[j];
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += w * vi;
                }
            }
            x
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empty_circle_holds(points: &[Vec<f64>], tris: &[Vec<usize>]) -> bool {
        tris.iter().all(|t| {
            let verts: Vec<&[f64]> = t.iter().map(|&i| points[i].as_slice()).collect();
            let (c, r2) = circumsphere(&verts).unwrap();
            points
                .iter()
                .all(|p| dist2(p, &c) >= r2 - 1e-9 * (1.0 + r2))
        })
    }

    #[test]
    fn single_triangle() {
        let p = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.2, 0.7]];
        assert_eq!(delaunay(&p).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn square_gives_two_triangles() {
        let p = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let t = delaunay(&p).unwrap();
        assert_eq!(t.len(), 2);
        assert!(empty_circle_holds(&p, &t));
        let area: f64 = t
            .iter()
            .map(|s| simplex_volume(&s.iter().map(|&i| p[i].as_slice()).collect::<Vec<_>>()))
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_degenerate() {
        let p = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(delaunay(&p), Err(DpnError::Degenerate(_))));
    }

    #[test]
    fn tetrahedron_and_cube() {
        let tet = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        assert_eq!(delaunay(&tet).unwrap().len(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let t = delaunay(&cloud).unwrap();
        assert!(empty_circle_holds(&cloud, &t));
    }

    #[test]
    fn simplex_sampling_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(sample_simplex(&[vec![0.0], vec![1.0]], 0, &mut rng).is_empty());
        let seg = sample_simplex(&[vec![0.0], vec![1.0]], 10_000, &mut rng);
        let mean = seg.iter().map(|p| p[0]).sum::<f64>() / seg.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);

        let tri = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = sample_simplex(&tri, 10_000, &mut rng);
        assert!(s.iter().all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0 + 1e-15));
        let frac = s.iter().filter(|p| p[0] + p[1] < 0.5).count() as f64 / s.len() as f64;
        assert!((frac - 0.25).abs() < 0.02);
    }
}
