//! Convex collision bodies and a Euclidean distance oracle.
//!
//! Distances involving polytopes are computed as the minimum-norm point of a
//! convex hull (the Minkowski difference for polytope pairs) with Wolfe's
//! active-set method, which terminates after finitely many affine solves.

use nalgebra::{DMatrix, DVector, Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("sphere radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("polytope needs at least one finite vertex")]
    BadPolytope,
    #[error("collision pair must reference two distinct bodies")]
    DegeneratePair,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Sphere { center: Point3<f64>, radius: f64 },
    Polytope { vertices: Vec<Point3<f64>> },
}

/// A convex body rigidly attached to a chain link.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexBody {
    pub name: String,
    pub link: usize,
    pub shape: Shape,
}

impl ConvexBody {
    pub fn sphere(name: &str, link: usize, center: Point3<f64>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) || !center.coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Self { name: name.to_string(), link, shape: Shape::Sphere { center, radius } })
    }

    pub fn polytope(name: &str, link: usize, vertices: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        if vertices.is_empty() || !vertices.iter().all(|v| v.coords.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::BadPolytope);
        }
        Ok(Self { name: name.to_string(), link, shape: Shape::Polytope { vertices } })
    }

    /// Places the body using its link's world pose.
    pub fn place(&self, link_pose: &Isometry3<f64>) -> PlacedBody {
        match &self.shape {
            Shape::Sphere { center, radius } => PlacedBody::Sphere { center: link_pose * center, radius: *radius },
            Shape::Polytope { vertices } => PlacedBody::Polytope {
                vertices: vertices.iter().map(|v| link_pose * v).collect(),
            },
        }
    }
}

/// Unordered pair of distinct bodies, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CollisionPair {
    pub a: usize,
    pub b: usize,
}

impl CollisionPair {
    pub fn new(a: usize, b: usize) -> Result<Self, GeometryError> {
        if a == b {
            return Err(GeometryError::DegeneratePair);
        }
        Ok(Self { a: a.min(b), b: a.max(b) })
    }
}

/// A body in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum PlacedBody {
    Sphere { center: Point3<f64>, radius: f64 },
    Polytope { vertices: Vec<Point3<f64>> },
}

impl PlacedBody {
    pub fn translated(&self, d: &Vector3<f64>) -> PlacedBody {
        match self {
            PlacedBody::Sphere { center, radius } => PlacedBody::Sphere { center: center + d, radius: *radius },
            PlacedBody::Polytope { vertices } => PlacedBody::Polytope {
                vertices: vertices.iter().map(|v| v + d).collect(),
            },
        }
    }
}

/// Norms below this are treated as touching.
pub const CONTACT_TOLERANCE: f64 = 1e-12;

/// Separation distance between two placed bodies. Positive values are exact
/// Euclidean gaps; a value `<= 0` means the bodies intersect (sphere cases
/// report the signed center-based value, polytope pairs report `0`).
pub fn min_distance(a: &PlacedBody, b: &PlacedBody) -> f64 {
    use PlacedBody::*;
    match (a, b) {
        (Sphere { center: ca, radius: ra }, Sphere { center: cb, radius: rb }) => (ca - cb).norm() - ra - rb,
        (Sphere { center, radius }, Polytope { vertices }) | (Polytope { vertices }, Sphere { center, radius }) => {
            let pts: Vec<Vector3<f64>> = vertices.iter().map(|v| v - center).collect();
            let d = min_norm_point(&pts).norm();
            if d <= CONTACT_TOLERANCE {
                -radius
            } else {
                d - radius
            }
        }
        (Polytope { vertices: va }, Polytope { vertices: vb }) => {
            let mut pts = Vec::with_capacity(va.len() * vb.len());
            for u in va {
                for w in vb {
                    pts.push(u - w);
                }
            }
            let d = min_norm_point(&pts).norm();
            if d <= CONTACT_TOLERANCE {
                0.0
            } else {
                d
            }
        }
    }
}

const MAX_ITERATIONS: usize = 100_000;
const WOLFE_TOLERANCE: f64 = 1e-10;

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
pub fn min_norm_point(points: &[Vector3<f64>]) -> Vector3<f64> {
    assert!(!points.is_empty());
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let first = (0..points.len())
        .min_by(|&i, &j| points[i].norm_squared().total_cmp(&points[j].norm_squared()))
        .unwrap();
    let mut active = vec![first];
    let mut weights = vec![1.0];
    let mut x = points[first];

    for _ in 0..MAX_ITERATIONS {
        if x.norm_squared() <= CONTACT_TOLERANCE * CONTACT_TOLERANCE {
            return x;
        }
        let (j, pj) = points
            .iter()
            .enumerate()
            .min_by(|a, b| x.dot(a.1).total_cmp(&x.dot(b.1)))
            .unwrap();
        if x.norm_squared() - x.dot(pj) <= WOLFE_TOLERANCE * scale || active.contains(&j) {
            return x;
        }
        active.push(j);
        weights.push(0.0);

        loop {
            let Some(alpha) = affine_min_norm(points, &active) else {
                // affinely dependent corral: drop the oldest zero-weight point
                let k = weights.iter().position(|&w| w <= 0.0).unwrap_or(0);
                active.remove(k);
                weights.remove(k);
                break;
            };
            if alpha.iter().all(|&a| a > WOLFE_TOLERANCE) {
                weights = alpha;
                x = combine(points, &active, &weights);
                break;
            }
            let mut theta: f64 = 1.0;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= WOLFE_TOLERANCE && w - a > 0.0 {
                    theta = theta.min(w / (w - a));
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * a;
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= WOLFE_TOLERANCE {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            x = combine(points, &active, &weights);
            if active.len() <= 1 {
                break;
            }
        }
    }
    x
}

fn combine(points: &[Vector3<f64>], active: &[usize], weights: &[f64]) -> Vector3<f64> {
    active.iter().zip(weights).map(|(&i, &w)| points[i] * w).sum()
}

/// Affine weights of the minimum-norm point of the affine hull of the active
/// points, or `None` when they are affinely dependent.
fn affine_min_norm(points: &[Vector3<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let n = active.len();
    if n == 1 {
        return Some(vec![1.0]);
    }
    if n > 4 {
        return None;
    }
    let mut k = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = points[active[i]].dot(&points[active[j]]);
        }
        k[(i, n)] = 1.0;
        k[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let sol = k.clone().lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(n).copied().collect();
    if alpha.iter().any(|a| !a.is_finite()) {
        return None;
    }
    // reject near-singular corrals whose solve is not accurate
    let resid = &k * &sol - &rhs;
    let scale = k.amax().max(1.0);
    if resid.amax() > 1e-9 * scale * sol.amax().max(1.0) {
        return None;
    }
    Some(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PlacedBody {
        PlacedBody::Polytope {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
        }
    }

    #[test]
    fn sphere_sphere() {
        let a = PlacedBody::Sphere { center: Point3::origin(), radius: 1.0 };
        let b = PlacedBody::Sphere { center: Point3::new(3.0, 0.0, 0.0), radius: 1.0 };
        assert_eq!(min_distance(&a, &b), 1.0);
    }

    #[test]
    fn sphere_inside_polytope() {
        let s = PlacedBody::Sphere { center: Point3::new(0.5, 0.5, 0.0), radius: 0.1 };
        assert!(min_distance(&s, &square()) <= 0.0);
        assert!(min_distance(&square(), &s) <= 0.0);
    }

    #[test]
    fn square_vs_point() {
        let p = PlacedBody::Polytope { vertices: vec![Point3::new(2.0, 0.0, 0.0)] };
        assert!((min_distance(&square(), &p) - 1.0).abs() < 1e-12);
        let q = PlacedBody::Polytope { vertices: vec![Point3::new(2.0, 0.5, 0.0)] };
        assert!((min_distance(&square(), &q) - 1.0).abs() < 1e-12);
        let r = PlacedBody::Polytope { vertices: vec![Point3::new(2.0, 2.0, 0.0)] };
        assert!((min_distance(&square(), &r) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overlapping_cubes() {
        let cube = |o: f64| PlacedBody::Polytope {
            vertices: (0..8)
                .map(|k| Point3::new(o + (k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64))
                .collect(),
        };
        assert_eq!(min_distance(&cube(0.0), &cube(0.5)), 0.0);
        assert!((min_distance(&cube(0.0), &cube(1.25)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pair_normalization() {
        assert_eq!(CollisionPair::new(3, 1).unwrap(), CollisionPair { a: 1, b: 3 });
        assert!(CollisionPair::new(2, 2).is_err());
        assert!(ConvexBody::sphere("s", 0, Point3::origin(), 0.0).is_err());
        assert!(ConvexBody::polytope("p", 0, vec![]).is_err());
    }
}
