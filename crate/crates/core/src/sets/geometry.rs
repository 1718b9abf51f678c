use serde::{Deserialize, Serialize};

use crate::weights::WeightedDensity;
use crate::{Error, Result};

/// Regular voxel grid over an axis-aligned box, row-major with axis 0
/// slowest. Voxel centers sit at `lo + (i + 1/2)·h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub dims: Vec<usize>,
}

impl GridGeometry {
    /// Grid whose voxels must be cubes to within 1%.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        let g = Self::new_unchecked(lo, hi, dims)?;
        if g.dim() > 1 {
            let hs: Vec<f64> = (0..g.dim()).map(|a| g.h(a)).collect();
            let mx = hs.iter().copied().fold(0.0, f64::max);
            let mn = hs.iter().copied().fold(f64::INFINITY, f64::min);
            if mx > mn * 1.01 {
                return Err(Error::InvalidArgument(format!("voxels are not cubes within 1% (spacings {hs:?})")));
            }
        }
        Ok(g)
    }

    /// Grid without the cube check (used for fiber bases).
    pub fn new_unchecked(lo: Vec<f64>, hi: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        let n = dims.len();
        if lo.len() != n || hi.len() != n {
            return Err(Error::InvalidArgument("grid dimension mismatch".into()));
        }
        if dims.iter().any(|&d| d == 0) || lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidArgument("grid needs positive dims and lo < hi".into()));
        }
        Ok(GridGeometry { lo, hi, dims })
    }

    /// Grid over the density's truncation box with `res` voxels along the
    /// widest axis.
    pub fn for_density(w: &WeightedDensity, res: usize) -> Result<Self> {
        let widths: Vec<f64> = w.lo.iter().zip(&w.hi).map(|(a, b)| b - a).collect();
        let wmax = widths.iter().copied().fold(0.0, f64::max);
        let dims = widths.iter().map(|wd| ((res as f64 * wd / wmax).round() as usize).max(1)).collect();
        Self::new(w.lo.clone(), w.hi.clone(), dims)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self, a: usize) -> f64 {
        (self.hi[a] - self.lo[a]) / self.dims[a] as f64
    }

    /// Largest spacing.
    pub fn hmax(&self) -> f64 {
        (0..self.dim()).map(|a| self.h(a)).fold(0.0, f64::max)
    }

    pub fn voxel_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.h(a)).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.dims[a + 1];
        }
        s
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }

    pub fn unravel(&self, mut k: usize) -> Vec<usize> {
        let n = self.dim();
        let mut idx = vec![0; n];
        for a in (0..n).rev() {
            idx[a] = k % self.dims[a];
            k /= self.dims[a];
        }
        idx
    }

    pub fn center_coord(&self, a: usize, i: usize) -> f64 {
        self.lo[a] + (i as f64 + 0.5) * self.h(a)
    }

    pub fn center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, &i)| self.center_coord(a, i)).collect()
    }

    pub fn center_of(&self, k: usize) -> Vec<f64> {
        self.center(&self.unravel(k))
    }

    /// Voxel index containing `x`, if inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for a in 0..self.dim() {
            let u = (x[a] - self.lo[a]) / self.h(a);
            if !(u >= 0.0 && u < self.dims[a] as f64) {
                return None;
            }
            idx.push(u as usize);
        }
        Some(idx)
    }

    pub fn same_as(&self, other: &GridGeometry) -> bool {
        self.dims == other.dims
            && self.lo.iter().zip(&other.lo).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            && self.hi.iter().zip(&other.hi).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }

    /// Same box with every axis refined by `k`.
    pub fn refined(&self, k: usize) -> Self {
        GridGeometry { lo: self.lo.clone(), hi: self.hi.clone(), dims: self.dims.iter().map(|d| d * k).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let g = GridGeometry::new(vec![0.0, 0.0, 0.0], vec![3.0, 4.0, 5.0], vec![3, 4, 5]).unwrap();
        for k in [0, 7, 33, 59] {
            assert_eq!(g.ravel(&g.unravel(k)), k);
        }
        assert_eq!(g.strides(), vec![20, 5, 1]);
        assert_eq!(g.locate(&[2.5, 0.1, 4.9]), Some(vec![2, 0, 4]));
        assert_eq!(g.center(&[0, 0, 0]), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn rejects_non_cubic_voxels() {
        assert!(GridGeometry::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![10, 10]).is_err());
    }
}
