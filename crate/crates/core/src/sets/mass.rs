use rayon::prelude::*;

use super::{GridGeometry, IndicatorSet, TailConvention};
use crate::numeric::par_sum;
use crate::weights::WeightedDensity;
use crate::{Error, Result};

/// Per-voxel masses `μ(voxel)` and the mass outside the box.
///
/// Separable densities use exact products of 1D CDF differences; others
/// use a two-point Gauss rule per axis.
#[derive(Clone, Debug)]
pub struct MassGrid {
    pub geom: GridGeometry,
    pub w: Vec<f64>,
    pub outside: f64,
}

impl MassGrid {
    pub fn new(dens: &WeightedDensity, geom: &GridGeometry) -> Self {
        let n = geom.dim();
        let w: Vec<f64> = if let Some((s, fs)) = dens.factors() {
            let axis_masses: Vec<Vec<f64>> = (0..n)
                .map(|a| {
                    (0..geom.dims[a])
                        .map(|i| {
                            let x0 = geom.lo[a] + i as f64 * geom.h(a);
                            let x1 = if i + 1 == geom.dims[a] { geom.hi[a] } else { x0 + geom.h(a) };
                            fs[a].mass_between(x0, x1)
                        })
                        .collect()
                })
                .collect();
            (0..geom.len())
                .into_par_iter()
                .map(|k| {
                    let idx = geom.unravel(k);
                    idx.iter().enumerate().fold(s, |acc, (a, &i)| acc * axis_masses[a][i])
                })
                .collect()
        } else if dens.is_zero() {
            vec![0.0; geom.len()]
        } else {
            let g = 0.5 / 3f64.sqrt();
            let vol = geom.voxel_volume() / (1usize << n) as f64;
            (0..geom.len())
                .into_par_iter()
                .map(|k| {
                    let c = geom.center_of(k);
                    let mut p = c.clone();
                    let mut acc = 0.0;
                    for corner in 0..(1usize << n) {
                        for a in 0..n {
                            let sgn = if (corner >> a) & 1 == 1 { 1.0 } else { -1.0 };
                            p[a] = c[a] + sgn * g * geom.h(a);
                        }
                        acc += dens.eval(&p);
                    }
                    acc * vol
                })
                .collect()
        };
        let inside = par_sum(w.len(), |k| w[k]);
        let outside = (dens.total_mass().total - inside).max(0.0);
        MassGrid { geom: geom.clone(), w, outside }
    }

    pub fn box_mass(&self) -> f64 {
        par_sum(self.w.len(), |k| self.w[k])
    }

    /// Largest voxel mass divided by the number of subcells.
    pub fn subcell_mass(&self, s: usize) -> f64 {
        let m = self.w.iter().copied().fold(0.0, f64::max);
        m / (s.pow(self.geom.dim() as u32)) as f64
    }

    fn tail_term(&self, t: &TailConvention) -> f64 {
        match t {
            TailConvention::FullOutside => self.outside,
            _ => 0.0,
        }
    }

    pub fn measure(&self, e: &IndicatorSet) -> f64 {
        par_sum(self.w.len(), |k| self.w[k] * e.occ[k]) + self.tail_term(&e.tail)
    }

    fn check(&self, e: &IndicatorSet, f: &IndicatorSet) -> Result<()> {
        if !e.geom.same_as(&self.geom) || !f.geom.same_as(&self.geom) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `μ(E \ F)`.
    pub fn diff(&self, e: &IndicatorSet, f: &IndicatorSet) -> Result<f64> {
        self.check(e, f)?;
        let tail = match (&e.tail, &f.tail) {
            (TailConvention::FullOutside, TailConvention::EmptyOutside) => self.outside,
            _ => 0.0,
        };
        Ok(par_sum(self.w.len(), |k| self.w[k] * (e.occ[k] - f.occ[k]).max(0.0)) + tail)
    }

    /// `μ(E Δ F) = μ(E \ F) + μ(F \ E)`.
    pub fn symm_diff(&self, e: &IndicatorSet, f: &IndicatorSet) -> Result<f64> {
        Ok(self.diff(e, f)? + self.diff(f, e)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{rasterize_on, Region};
    use crate::weights::{DensityKind, WeightedDensity};

    #[test]
    fn gauss_rule_agrees_with_exact_masses() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 64).unwrap();
        let exact = MassGrid::new(&w, &geom);
        let pert = WeightedDensity::new(
            DensityKind::Perturbed {
                base: Box::new(w.kind.clone()),
                bump: crate::weights::Bump { center: vec![0.0, 0.0], width: 1.0, strength: 0.0 },
            },
            2,
        )
        .unwrap();
        let approx = MassGrid::new(&pert, &geom);
        let err = exact.w.iter().zip(&approx.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!((exact.box_mass() + exact.outside - 1.0).abs() < 1e-14);
    }

    #[test]
    fn difference_identity() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 128).unwrap();
        let e = rasterize_on(&Region::ball(&[0.3, 0.0], 1.0), &geom, 4).unwrap();
        let f = rasterize_on(&Region::half_space(&[1.0, 0.0], 0.5), &geom, 4).unwrap();
        let mg = MassGrid::new(&w, &geom);
        let s = mg.symm_diff(&e, &f).unwrap();
        assert_eq!(s, mg.diff(&e, &f).unwrap() + mg.diff(&f, &e).unwrap());
    }
}
