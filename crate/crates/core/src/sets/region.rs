use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GridGeometry, HalfSpace, HeightField, IndicatorSet, TailConvention};
use crate::weights::{dot, WeightedDensity};
use crate::{Error, Result};

pub const DEFAULT_SUBCELL: usize = 4;

/// Analytic region descriptions. Boolean combinations act on the signed
/// distance functions before any occupancy is aggregated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Empty,
    Full,
    HalfSpace(HalfSpace),
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{lo ≤ x·normal ≤ hi}`.
    Strip { normal: Vec<f64>, lo: f64, hi: f64 },
    Subgraph(HeightField),
    Union { parts: Vec<Region> },
    Intersection { parts: Vec<Region> },
    Difference { a: Box<Region>, b: Box<Region> },
    Complement { a: Box<Region> },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball { center: center.to_vec(), radius }
    }

    pub fn half_space(v: &[f64], r: f64) -> Self {
        Region::HalfSpace(HalfSpace::new(v, r).expect("nonzero normal"))
    }

    pub fn union(parts: Vec<Region>) -> Self {
        Region::Union { parts }
    }

    pub fn minus(self, b: Region) -> Self {
        Region::Difference { a: Box::new(self), b: Box::new(b) }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match self {
            Region::Empty | Region::Full => Ok(()),
            Region::HalfSpace(h) => {
                if h.v.len() != n {
                    return bad("half-space normal has the wrong dimension");
                }
                Ok(())
            }
            Region::Ball { center, radius } => {
                if center.len() != n || !(*radius >= 0.0) {
                    return bad("ball needs a matching center and radius >= 0");
                }
                Ok(())
            }
            Region::Box { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return bad("box corners have the wrong dimension");
                }
                Ok(())
            }
            Region::Strip { normal, lo, hi } => {
                if normal.len() != n || !(hi >= lo) {
                    return bad("strip needs a matching normal and lo <= hi");
                }
                Ok(())
            }
            Region::Subgraph(g) => {
                if g.frame.dim() != n {
                    return bad("height field has the wrong dimension");
                }
                Ok(())
            }
            Region::Union { parts } | Region::Intersection { parts } => parts.iter().try_for_each(|p| p.validate(n)),
            Region::Difference { a, b } => {
                a.validate(n)?;
                b.validate(n)
            }
            Region::Complement { a } => a.validate(n),
        }
    }

    /// Signed distance (negative inside); exact for primitives, a
    /// 1-Lipschitz bound for combinations.
    pub fn sdf(&self, x: &[f64]) -> f64 {
        match self {
            Region::Empty => f64::INFINITY,
            Region::Full => f64::NEG_INFINITY,
            Region::HalfSpace(h) => h.r - dot(x, &h.v),
            Region::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() - radius
            }
            Region::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for a in 0..x.len() {
                    let d = (lo[a] - x[a]).max(x[a] - hi[a]);
                    if d > 0.0 {
                        outside += d * d;
                    }
                    inside = inside.max(d);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Region::Strip { normal, lo, hi } => {
                let nn = dot(normal, normal).sqrt();
                let s = dot(x, normal) / nn;
                (lo / nn - s).max(s - hi / nn)
            }
            Region::Subgraph(g) => g.sdf(x),
            Region::Union { parts } => parts.iter().map(|p| p.sdf(x)).fold(f64::INFINITY, f64::min),
            Region::Intersection { parts } => parts.iter().map(|p| p.sdf(x)).fold(f64::NEG_INFINITY, f64::max),
            Region::Difference { a, b } => a.sdf(x).max(-b.sdf(x)),
            Region::Complement { a } => -a.sdf(x),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.sdf(x) <= 0.0
    }

    /// Whether `sdf` is a true 1-Lipschitz distance bound.
    fn lipschitz(&self) -> bool {
        match self {
            Region::Subgraph(_) => false,
            Region::Union { parts } | Region::Intersection { parts } => parts.iter().all(Region::lipschitz),
            Region::Difference { a, b } => a.lipschitz() && b.lipschitz(),
            Region::Complement { a } => a.lipschitz(),
            _ => true,
        }
    }

    /// What the region looks like outside any bounded box.
    pub fn tail(&self) -> TailConvention {
        use TailConvention::*;
        match self {
            Region::Full => FullOutside,
            Region::HalfSpace(h) => HalfSpaceOutside(h.clone()),
            Region::Subgraph(g) => {
                let v: Vec<f64> = g.frame.axis_vector().iter().map(|x| -x).collect();
                let mut finite: Vec<f64> = g.values.iter().copied().filter(|x| x.is_finite()).collect();
                if finite.is_empty() {
                    return if g.values.iter().any(|x| *x == f64::INFINITY) { FullOutside } else { EmptyOutside };
                }
                finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
                HalfSpaceOutside(HalfSpace { v, r: -finite[finite.len() / 2] })
            }
            Region::Union { parts } => {
                let tails: Vec<TailConvention> = parts.iter().map(Region::tail).collect();
                if tails.iter().any(|t| *t == FullOutside) {
                    FullOutside
                } else {
                    tails.into_iter().find(|t| matches!(t, HalfSpaceOutside(_))).unwrap_or(EmptyOutside)
                }
            }
            Region::Intersection { parts } => {
                let tails: Vec<TailConvention> = parts.iter().map(Region::tail).collect();
                if tails.iter().any(|t| *t == EmptyOutside) {
                    EmptyOutside
                } else {
                    tails.into_iter().find(|t| matches!(t, HalfSpaceOutside(_))).unwrap_or(FullOutside)
                }
            }
            Region::Difference { a, b } => match b.tail() {
                FullOutside => EmptyOutside,
                _ => a.tail(),
            },
            Region::Complement { a } => match a.tail() {
                EmptyOutside => FullOutside,
                FullOutside => EmptyOutside,
                HalfSpaceOutside(h) => HalfSpaceOutside(HalfSpace { v: h.v.iter().map(|x| -x).collect(), r: -h.r }),
            },
            _ => EmptyOutside,
        }
    }

    /// The region moved by `a`.
    pub fn translated(&self, a: &[f64]) -> Region {
        let add = |p: &[f64]| p.iter().zip(a).map(|(x, y)| x + y).collect::<Vec<f64>>();
        match self {
            Region::Empty | Region::Full => self.clone(),
            Region::HalfSpace(h) => Region::HalfSpace(HalfSpace { v: h.v.clone(), r: h.r + dot(&h.v, a) }),
            Region::Ball { center, radius } => Region::Ball { center: add(center), radius: *radius },
            Region::Box { lo, hi } => Region::Box { lo: add(lo), hi: add(hi) },
            Region::Strip { normal, lo, hi } => {
                let s = dot(normal, a);
                Region::Strip { normal: normal.clone(), lo: lo + s, hi: hi + s }
            }
            Region::Subgraph(g) => {
                let (xp, t) = g.frame.split(a);
                let mut g2 = g.clone();
                for v in g2.values.iter_mut() {
                    *v += t;
                }
                for (k, s) in xp.iter().enumerate() {
                    g2.base.lo[k] += s;
                    g2.base.hi[k] += s;
                }
                Region::Subgraph(g2)
            }
            Region::Union { parts } => Region::Union { parts: parts.iter().map(|p| p.translated(a)).collect() },
            Region::Intersection { parts } => Region::Intersection { parts: parts.iter().map(|p| p.translated(a)).collect() },
            Region::Difference { a: x, b } => Region::Difference { a: Box::new(x.translated(a)), b: Box::new(b.translated(a)) },
            Region::Complement { a: x } => Region::Complement { a: Box::new(x.translated(a)) },
        }
    }

    /// The region mapped by the orthogonal matrix `rot` (row-major),
    /// for primitives that stay in the family under rotation.
    pub fn rotated(&self, rot: &[Vec<f64>]) -> Result<Region> {
        let apply = |p: &[f64]| rot.iter().map(|row| dot(row, p)).collect::<Vec<f64>>();
        Ok(match self {
            Region::Empty | Region::Full => self.clone(),
            Region::HalfSpace(h) => Region::HalfSpace(HalfSpace { v: apply(&h.v), r: h.r }),
            Region::Ball { center, radius } => Region::Ball { center: apply(center), radius: *radius },
            Region::Strip { normal, lo, hi } => Region::Strip { normal: apply(normal), lo: *lo, hi: *hi },
            Region::Union { parts } => Region::Union { parts: parts.iter().map(|p| p.rotated(rot)).collect::<Result<_>>()? },
            Region::Intersection { parts } => {
                Region::Intersection { parts: parts.iter().map(|p| p.rotated(rot)).collect::<Result<_>>()? }
            }
            Region::Difference { a, b } => Region::Difference { a: Box::new(a.rotated(rot)?), b: Box::new(b.rotated(rot)?) },
            Region::Complement { a } => Region::Complement { a: Box::new(a.rotated(rot)?) },
            Region::Box { .. } | Region::Subgraph(_) => {
                return Err(Error::Unsupported("boxes and subgraphs do not rotate analytically".into()))
            }
        })
    }
}

/// Fraction of a subcell of side `ell` lying inside, from the signed
/// distance of its center (exact for axis-aligned boundaries).
fn coverage(sd: f64, ell: f64) -> f64 {
    (0.5 - sd / ell).clamp(0.0, 1.0)
}

/// Rasterize on the density's box with `res` voxels along the widest axis.
pub fn rasterize(region: &Region, w: &WeightedDensity, res: usize) -> Result<IndicatorSet> {
    let geom = GridGeometry::for_density(w, res)?;
    rasterize_on(region, &geom, DEFAULT_SUBCELL)
}

/// Occupancy by `s`-fold supersampling per axis with antialiased subcell
/// coverage.
pub fn rasterize_on(region: &Region, geom: &GridGeometry, s: usize) -> Result<IndicatorSet> {
    let n = geom.dim();
    region.validate(n)?;
    if s == 0 {
        return Err(Error::InvalidArgument("subcell factor must be positive".into()));
    }
    let hs: Vec<f64> = (0..n).map(|a| geom.h(a)).collect();
    let ell = hs.iter().sum::<f64>() / (n as f64 * s as f64);
    let half_diag = 0.5 * hs.iter().map(|h| h * h).sum::<f64>().sqrt();
    let shortcut = region.lipschitz();
    let subs = s.pow(n as u32);
    let occ: Vec<f64> = (0..geom.len())
        .into_par_iter()
        .map(|k| {
            let idx = geom.unravel(k);
            let c = geom.center(&idx);
            if shortcut {
                let sd = region.sdf(&c);
                if sd > half_diag + ell {
                    return 0.0;
                }
                if sd < -(half_diag + ell) {
                    return 1.0;
                }
            }
            let mut acc = 0.0;
            let mut p = vec![0.0; n];
            for j in 0..subs {
                let mut r = j;
                for a in 0..n {
                    let q = r % s;
                    r /= s;
                    p[a] = geom.lo[a] + (idx[a] as f64 + (q as f64 + 0.5) / s as f64) * hs[a];
                }
                acc += coverage(region.sdf(&p), ell);
            }
            acc / subs as f64
        })
        .collect();
    let tail = region.tail();
    let vol: f64 = occ.iter().sum::<f64>() * geom.voxel_volume();
    if tail == TailConvention::EmptyOutside && vol < 0.5 * geom.voxel_volume() / subs as f64 {
        return Err(Error::EmptyRegion);
    }
    Ok(IndicatorSet { geom: geom.clone(), subcell: s, tail, occ })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(res: usize) -> GridGeometry {
        GridGeometry::new(vec![-6.0, -6.0], vec![6.0, 6.0], vec![res, res]).unwrap()
    }

    #[test]
    fn half_plane_column_is_half_occupied() {
        let g = geom(255);
        let e = rasterize_on(&Region::half_space(&[-1.0, 0.0], 0.0), &g, 4).unwrap();
        assert!((e.occ[g.ravel(&[127, 40])] - 0.5).abs() < 1e-12);
        assert_eq!(e.occ[g.ravel(&[126, 40])], 1.0);
        assert_eq!(e.occ[g.ravel(&[128, 40])], 0.0);
    }

    #[test]
    fn tiny_ball_is_empty_region() {
        let r = rasterize_on(&Region::ball(&[0.01, 0.02], 1e-4), &geom(256), 4);
        assert!(matches!(r, Err(Error::EmptyRegion)));
    }

    #[test]
    fn two_ball_area() {
        let g = geom(512);
        let reg = Region::union(vec![Region::ball(&[-2.0, 0.0], 0.5), Region::ball(&[2.0, 0.0], 0.5)]);
        let e = rasterize_on(&reg, &g, 4).unwrap();
        let cells: f64 = e.occ.iter().sum();
        let want = 2.0 * std::f64::consts::PI * 0.25 / g.voxel_volume();
        assert!((cells / want - 1.0).abs() < 5e-3, "{cells} vs {want}");
    }

    #[test]
    fn tails_follow_the_algebra() {
        let h = Region::half_space(&[1.0, 0.0], 0.0);
        assert!(matches!(h.tail(), TailConvention::HalfSpaceOutside(_)));
        let c = Region::Complement { a: Box::new(Region::ball(&[0.0, 0.0], 1.0)) };
        assert_eq!(c.tail(), TailConvention::FullOutside);
        assert_eq!(h.clone().minus(Region::Full).tail(), TailConvention::EmptyOutside);
    }
}
