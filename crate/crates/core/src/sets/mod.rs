//! Voxel indicator sets, analytic regions, μ-measures and equal-measure
//! half-spaces.

mod geometry;
mod halfspace;
mod height;
mod mass;
mod region;

pub use geometry::GridGeometry;
pub use halfspace::{
    half_space_equal_measure, half_space_for_mass, half_space_mass, rasterize_halfspace_exact,
};
pub use height::HeightField;
pub use mass::MassGrid;
pub(crate) use halfspace::{base_ranges, plane_integral};
pub use region::{rasterize, rasterize_on, Region, DEFAULT_SUBCELL};

use serde::{Deserialize, Serialize};

use crate::weights::{dot, WeightedDensity};
use crate::{Error, Result};

/// `H(v, r) = {x : x·v ≥ r}` with `|v| = 1`; `r` may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub v: Vec<f64>,
    pub r: f64,
}

impl HalfSpace {
    /// Normalizes `v`.
    pub fn new(v: &[f64], r: f64) -> Result<Self> {
        let nv = dot(v, v).sqrt();
        if !(nv > 0.0) || !nv.is_finite() || r.is_nan() {
            return Err(Error::InvalidArgument("half-space needs a nonzero normal".into()));
        }
        Ok(HalfSpace { v: v.iter().map(|x| x / nv).collect(), r })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dot(x, &self.v) >= self.r
    }

    pub fn is_unit(&self) -> bool {
        (dot(&self.v, &self.v).sqrt() - 1.0).abs() <= 1e-12
    }
}

/// How a set continues outside the truncation box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TailConvention {
    EmptyOutside,
    FullOutside,
    HalfSpaceOutside(HalfSpace),
}

/// A set as voxel occupancy fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub geom: GridGeometry,
    pub subcell: usize,
    pub tail: TailConvention,
    pub occ: Vec<f64>,
}

impl IndicatorSet {
    pub fn new(geom: GridGeometry, subcell: usize, tail: TailConvention, occ: Vec<f64>) -> Result<Self> {
        if occ.len() != geom.len() {
            return Err(Error::InvalidArgument("occupancy length does not match the grid".into()));
        }
        if occ.iter().any(|o| !(*o >= 0.0 && *o <= 1.0)) {
            return Err(Error::InvalidArgument("occupancy fractions must lie in [0, 1]".into()));
        }
        if subcell == 0 {
            return Err(Error::InvalidArgument("subcell factor must be positive".into()));
        }
        Ok(IndicatorSet { geom, subcell, tail, occ })
    }

    pub fn empty(geom: &GridGeometry, subcell: usize) -> Self {
        IndicatorSet { geom: geom.clone(), subcell, tail: TailConvention::EmptyOutside, occ: vec![0.0; geom.len()] }
    }

    pub fn full(geom: &GridGeometry, subcell: usize) -> Self {
        IndicatorSet { geom: geom.clone(), subcell, tail: TailConvention::FullOutside, occ: vec![1.0; geom.len()] }
    }

    pub fn same_grid(&self, other: &IndicatorSet) -> bool {
        self.geom.same_as(&other.geom)
    }

    /// True when no level-1/2 boundary can be extracted.
    pub fn is_constant(&self) -> bool {
        let above = self.occ.iter().filter(|o| **o >= 0.5).count();
        above == 0 || above == self.occ.len()
    }

    pub fn is_all_full(&self) -> bool {
        self.occ.iter().all(|o| *o == 1.0)
    }

    pub fn is_all_empty(&self) -> bool {
        self.occ.iter().all(|o| *o == 0.0)
    }
}

/// `μ(E)`: occupancy-weighted voxel masses plus the tail term.
pub fn mu_measure(w: &WeightedDensity, e: &IndicatorSet) -> f64 {
    MassGrid::new(w, &e.geom).measure(e)
}

/// `μ(E Δ F)`.
pub fn symm_diff_measure(w: &WeightedDensity, e: &IndicatorSet, f: &IndicatorSet) -> Result<f64> {
    if !e.same_grid(f) {
        return Err(Error::GridMismatch);
    }
    MassGrid::new(w, &e.geom).symm_diff(e, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_space_normalizes() {
        let h = HalfSpace::new(&[3.0, 4.0], 1.0).unwrap();
        assert!(h.is_unit());
        assert!(h.contains(&[0.6, 0.8]));
        assert!(HalfSpace::new(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn occupancy_validation() {
        let g = GridGeometry::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        assert!(IndicatorSet::new(g.clone(), 1, TailConvention::EmptyOutside, vec![0.5, 1.2]).is_err());
        assert!(IndicatorSet::new(g, 1, TailConvention::EmptyOutside, vec![0.5, 1.0]).is_ok());
    }
}
