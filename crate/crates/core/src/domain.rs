//! Input domains: explicit finite grids and the box `[0, r]^d`.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A finite input domain given as an explicit, duplicate-free point list.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGrid {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl FiniteGrid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::EmptyDomain);
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: "zero-dimensional points".into(),
            });
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "grid point",
                });
            }
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidParameter {
                    name: "points",
                    reason: "duplicate grid point".into(),
                });
            }
        }
        Ok(Self { points, dim })
    }

    /// Regular lattice `{r/m, 2r/m, ..., r}^d` with `m` levels per dimension,
    /// enumerated with the last dimension varying fastest.
    pub fn lattice(dim: usize, per_dim: usize, r: f64) -> Result<Self> {
        if dim == 0 || per_dim == 0 {
            return Err(Error::EmptyDomain);
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("must be finite and positive, got {r}"),
            });
        }
        let total = (per_dim as u64)
            .checked_pow(dim as u32)
            .filter(|&t| t <= 10_000_000);
        let Some(total) = total else {
            return Err(Error::TooLarge {
                what: "lattice size",
                limit: 10_000_000,
            });
        };
        let mut points = Vec::with_capacity(total as usize);
        let mut index = vec![0usize; dim];
        loop {
            points.push(
                index
                    .iter()
                    .map(|&i| (i + 1) as f64 * r / per_dim as f64)
                    .collect(),
            );
            let mut k = dim;
            loop {
                if k == 0 {
                    return Self::new(points);
                }
                k -= 1;
                index[k] += 1;
                if index[k] < per_dim {
                    break;
                }
                index[k] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(Vec::as_slice)
    }

    /// Index of the grid point nearest to `x` in L1 distance; ties go to the
    /// lowest index.
    pub fn nearest_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b).abs()).sum();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        Ok(best)
    }

    /// Exact membership lookup by bit pattern.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| {
            p.len() == x.len() && p.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }
}

/// The compact box `[0, r]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    dim: usize,
    r: f64,
}

impl BoxDomain {
    pub fn new(dim: usize, r: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be >= 1".into(),
            });
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("must be finite and positive, got {r}"),
            });
        }
        Ok(Self { dim, r })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_shape_and_range() {
        let g = FiniteGrid::lattice(2, 3, 1.0).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.dim(), 2);
        assert_eq!(g.point(0), &[1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(g.point(8), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(matches!(FiniteGrid::new(vec![]), Err(Error::EmptyDomain)));
        assert!(FiniteGrid::new(vec![vec![0.1], vec![0.1]]).is_err());
    }

    #[test]
    fn nearest_ties_to_lowest_index() {
        let g = FiniteGrid::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(g.nearest_index(&[0.5]).unwrap(), 0);
        assert_eq!(g.nearest_index(&[0.6]).unwrap(), 1);
    }

    #[test]
    fn box_validation() {
        assert!(BoxDomain::new(0, 1.0).is_err());
        assert!(BoxDomain::new(2, 0.0).is_err());
        assert!(BoxDomain::new(2, 1.0).is_ok());
    }
}
