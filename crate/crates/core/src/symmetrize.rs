//! Generalized Ehrhard symmetrization `S_v(E)`: every fiber along `v` is
//! replaced by the half-line `{x·v ≥ c}` of equal fiber mass, with `c` the
//! smallest admissible constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sets::{
    half_space_for_mass, GridGeometry, HalfSpace, HeightField, IndicatorSet, MassGrid, TailConvention,
};
use crate::weights::{chord, dot, Frame, LineDensity, WeightedDensity};
use crate::{Error, Result};

/// Relative mass tolerance for a symmetrized set.
pub const MASS_TOL: f64 = 1e-6;
/// Relative defect above which the sampled path is declared under-resolved
/// before mass projection.
pub const RAW_DEFECT_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizeOptions {
    /// Regularization: fiber mass is raised to
    /// `min(m_E + delta, m_full)` (mass per unit base measure).
    pub delta: f64,
    /// Relative mass tolerance.
    pub mass_tol: f64,
    /// Supersampling for the back-rasterization of sampled fibers.
    pub subcell: Option<usize>,
}

impl Default for SymmetrizeOptions {
    fn default() -> Self {
        SymmetrizeOptions { delta: 0.0, mass_tol: MASS_TOL, subcell: None }
    }
}

/// Which discretization produced a symmetrized set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetrizePath {
    /// Mass-exact fill along voxel chains `i + k·d`, `d ∈ {−1,0,1}ⁿ`.
    Lattice,
    /// Continuous fibers sampled at half-voxel spacing, rasterized back
    /// and mass-projected.
    Sampled,
}

#[derive(Clone, Debug)]
pub struct Symmetrized {
    pub set: IndicatorSet,
    pub path: SymmetrizePath,
    /// `μ(S_v(E)) − μ(E)` before projection (zero for lattice fills).
    pub raw_defect: f64,
    /// `μ(S_v(E)) − μ(E)` as returned.
    pub defect: f64,
}

/// Integer direction with entries in `{−1, 0, 1}` parallel to `v`.
pub fn lattice_direction(v: &[f64]) -> Option<Vec<i64>> {
    let m = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(m > 0.0) {
        return None;
    }
    let d: Vec<i64> = v.iter().map(|x| (x / m).round() as i64).collect();
    let dn = (d.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
    let vn = dot(v, v).sqrt();
    let close = v.iter().zip(&d).all(|(x, k)| (x / vn - *k as f64 / dn).abs() <= 1e-9);
    if close {
        Some(d)
    } else {
        None
    }
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = dot(v, v).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument("direction must be a nonzero vector".into()));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Reusable symmetrization context for one density and grid.
pub struct Symmetrizer<'a> {
    pub density: &'a WeightedDensity,
    pub masses: MassGrid,
    pub opts: SymmetrizeOptions,
    total: f64,
}

impl<'a> Symmetrizer<'a> {
    pub fn new(density: &'a WeightedDensity, geom: &GridGeometry, opts: SymmetrizeOptions) -> Self {
        let masses = MassGrid::new(density, geom);
        let total = density.total_mass().total;
        Symmetrizer { density, masses, opts, total }
    }

    pub fn with_masses(density: &'a WeightedDensity, masses: MassGrid, opts: SymmetrizeOptions) -> Self {
        let total = density.total_mass().total;
        Symmetrizer { density, masses, opts, total }
    }

    pub fn apply(&self, e: &IndicatorSet, v: &[f64]) -> Result<IndicatorSet> {
        Ok(self.run(e, v)?.set)
    }

    pub fn run(&self, e: &IndicatorSet, v: &[f64]) -> Result<Symmetrized> {
        if !e.geom.same_as(&self.masses.geom) {
            return Err(Error::GridMismatch);
        }
        if v.len() != e.geom.dim() {
            return Err(Error::InvalidArgument("direction has the wrong dimension".into()));
        }
        let v = unit(v)?;
        let m_e = self.masses.measure(e);
        let tail = self.output_tail(e, &v, m_e)?;
        if let Some(d) = lattice_direction(&v) {
            let occ = self.lattice_fill(e, &d);
            let set = IndicatorSet { geom: e.geom.clone(), subcell: e.subcell, tail, occ };
            let defect = self.masses.measure(&set) - m_e;
            return Ok(Symmetrized { set, path: SymmetrizePath::Lattice, raw_defect: defect, defect });
        }
        if e.geom.dim() != 2 {
            return Err(Error::Unsupported("non-lattice directions are only sampled in two dimensions".into()));
        }
        let occ = self.sampled_fill(e, &v);
        let mut set = IndicatorSet { geom: e.geom.clone(), subcell: e.subcell, tail, occ };
        let raw_defect = self.masses.measure(&set) - m_e;
        let scale = self.total.max(1e-300);
        if raw_defect.abs() > RAW_DEFECT_TOL * scale {
            return Err(Error::ResolutionInsufficient { defect: raw_defect.abs() / scale, tol: RAW_DEFECT_TOL });
        }
        project_mass(&mut set.occ, &self.masses.w, -raw_defect);
        let defect = self.masses.measure(&set) - m_e;
        if defect.abs() > self.opts.mass_tol * scale {
            return Err(Error::ResolutionInsufficient { defect: defect.abs() / scale, tol: self.opts.mass_tol });
        }
        Ok(Symmetrized { set, path: SymmetrizePath::Sampled, raw_defect, defect })
    }

    fn output_tail(&self, e: &IndicatorSet, v: &[f64], m_e: f64) -> Result<TailConvention> {
        if e.tail == TailConvention::FullOutside {
            return Ok(TailConvention::FullOutside);
        }
        if m_e <= 0.0 {
            return Ok(TailConvention::EmptyOutside);
        }
        let h = half_space_for_mass(self.density, v, m_e.min(self.total))?;
        Ok(if h.r == f64::NEG_INFINITY {
            TailConvention::FullOutside
        } else if h.r == f64::INFINITY {
            TailConvention::EmptyOutside
        } else {
            TailConvention::HalfSpaceOutside(h)
        })
    }

    fn lattice_fill(&self, e: &IndicatorSet, d: &[i64]) -> Vec<f64> {
        let geom = &e.geom;
        let n = geom.dim();
        let w = &self.masses.w;
        let step = (d.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt() * geom.hmax();
        let delta_chain = self.opts.delta * geom.voxel_volume() / step;
        let inside = |idx: &[i64]| idx.iter().zip(&geom.dims).all(|(i, n)| *i >= 0 && (*i as usize) < *n);
        let starts: Vec<usize> = (0..geom.len())
            .filter(|&k| {
                let idx = geom.unravel(k);
                let prev: Vec<i64> = idx.iter().zip(d).map(|(i, s)| *i as i64 - s).collect();
                !inside(&prev)
            })
            .collect();
        let filled: Vec<Vec<(usize, f64)>> = starts
            .par_iter()
            .map(|&k0| {
                let mut chain = Vec::new();
                let mut idx: Vec<i64> = geom.unravel(k0).iter().map(|&i| i as i64).collect();
                while inside(&idx) {
                    let u: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
                    chain.push(geom.ravel(&u));
                    for a in 0..n {
                        idx[a] += d[a];
                    }
                }
                let full: f64 = chain.iter().map(|&k| w[k]).sum();
                let m: f64 = chain.iter().map(|&k| w[k] * e.occ[k]).sum();
                let mut rem = (m + delta_chain).min(full);
                let mut out = Vec::with_capacity(chain.len());
                let slack = 1e-12 * full;
                let mut done = false;
                for &k in chain.iter().rev() {
                    let o = if done {
                        0.0
                    } else if w[k] <= rem + slack {
                        rem = (rem - w[k]).max(0.0);
                        1.0
                    } else if rem > 0.0 {
                        let o = rem / w[k];
                        rem = 0.0;
                        done = true;
                        o
                    } else {
                        done = true;
                        0.0
                    };
                    out.push((k, o));
                }
                out
            })
            .collect();
        let mut occ = vec![0.0; geom.len()];
        for chain in filled {
            for (k, o) in chain {
                occ[k] = o;
            }
        }
        occ
    }

    fn sampled_fill(&self, e: &IndicatorSet, v: &[f64]) -> Vec<f64> {
        let geom = &e.geom;
        let h = geom.hmax();
        let wv = [-v[1], v[0]];
        let corners = [[geom.lo[0], geom.lo[1]], [geom.hi[0], geom.lo[1]], [geom.lo[0], geom.hi[1]], [geom.hi[0], geom.hi[1]]];
        let smin = corners.iter().map(|c| dot(c, &wv)).fold(f64::INFINITY, f64::min);
        let smax = corners.iter().map(|c| dot(c, &wv)).fold(f64::NEG_INFINITY, f64::max);
        let s = self.opts.subcell.unwrap_or(e.subcell).max(1);
        let ell = h / s as f64;
        let ds = ell.min(0.5 * h);
        let ns = ((smax - smin) / ds).ceil() as usize;
        let cs: Vec<f64> = (0..ns)
            .into_par_iter()
            .map(|j| {
                let s = smin + (j as f64 + 0.5) * ds;
                let x0 = [s * wv[0], s * wv[1]];
                let line = self.density.line(&x0, v);
                let full = line.total();
                let m = line_mass(e, &line, &x0, v);
                let md = (m + self.opts.delta).min(full);
                if md >= full * (1.0 - 1e-12) {
                    f64::NEG_INFINITY
                } else {
                    line.quantile_upper(md)
                }
            })
            .collect();
        let c_at = |sv: f64| -> (f64, f64) {
            let u = (sv - smin) / ds - 0.5;
            let j = (u.floor().max(0.0) as usize).min(ns.saturating_sub(2));
            let fr = (u - j as f64).clamp(0.0, 1.0);
            let (c0, c1) = (cs[j], cs[(j + 1).min(ns - 1)]);
            if c0.is_finite() && c1.is_finite() {
                (c0 + fr * (c1 - c0), (c1 - c0) / ds)
            } else if fr < 0.5 {
                (c0, 0.0)
            } else {
                (c1, 0.0)
            }
        };
        (0..geom.len())
            .into_par_iter()
            .map(|k| {
                let p = geom.center_of(k);
                let (c, slope) = c_at(dot(&p, &wv));
                let t = dot(&p, v);
                if c == f64::NEG_INFINITY {
                    return 1.0;
                }
                let reach = 2.0 * h * (1.0 + slope.abs());
                if c.is_finite() && (t - c).abs() > reach || c == f64::INFINITY {
                    return if t > c { 1.0 } else { 0.0 };
                }
                let mut acc = 0.0;
                for a in 0..s {
                    for b in 0..s {
                        let q = [
                            geom.lo[0] + (geom.unravel(k)[0] as f64 + (a as f64 + 0.5) / s as f64) * geom.h(0),
                            geom.lo[1] + (geom.unravel(k)[1] as f64 + (b as f64 + 0.5) / s as f64) * geom.h(1),
                        ];
                        let (c, slope) = c_at(dot(&q, &wv));
                        acc += match c {
                            f64::NEG_INFINITY => 1.0,
                            f64::INFINITY => 0.0,
                            _ => {
                                let norm = (1.0 + slope * slope).sqrt();
                                // Inside normal in ambient coordinates.
                                let nx = [(v[0] - slope * wv[0]) / norm, (v[1] - slope * wv[1]) / norm];
                                let off = (c - dot(&q, v)) / norm;
                                square_fraction(off, nx[0] * ell, nx[1] * ell)
                            }
                        };
                    }
                }
                acc / (s * s) as f64
            })
            .collect()
    }
}

/// Fraction of the unit-scaled square `{a·y₁ + b·y₂ : y ∈ [−½, ½]²}` with
/// `a·y₁ + b·y₂ ≥ off`.
fn square_fraction(off: f64, a: f64, b: f64) -> f64 {
    let (mut big, mut small) = (0.5 * a.abs(), 0.5 * b.abs());
    if small > big {
        std::mem::swap(&mut big, &mut small);
    }
    let upper = |d: f64| -> f64 {
        // P(X + Y ≥ d) for d ≥ 0, X ~ U[−big, big], Y ~ U[−small, small].
        if d >= big + small {
            0.0
        } else if small <= 1e-15 * big || d <= big - small {
            ((big - d) / (2.0 * big)).max(0.0)
        } else {
            let r = big + small - d;
            r * r / (8.0 * big * small)
        }
    };
    if big <= 0.0 {
        return if off <= 0.0 { 1.0 } else { 0.0 };
    }
    if off >= 0.0 {
        upper(off)
    } else {
        1.0 - upper(-off)
    }
}

/// Add `delta` mass to `occ`, spread over partially occupied voxels in
/// proportion to their free (or filled) capacity.
fn project_mass(occ: &mut [f64], w: &[f64], delta: f64) {
    if delta == 0.0 {
        return;
    }
    for pass in 0..2 {
        let eligible = |o: f64| if pass == 0 { o > 0.0 && o < 1.0 } else { true };
        let cap: f64 = occ
            .iter()
            .zip(w)
            .filter(|(o, _)| eligible(**o))
            .map(|(o, wk)| if delta > 0.0 { (1.0 - o) * wk } else { o * wk })
            .sum();
        if cap >= delta.abs() || pass == 1 {
            if cap <= 0.0 {
                return;
            }
            let a = (delta.abs() / cap).min(1.0);
            for o in occ.iter_mut() {
                if eligible(*o) {
                    if delta > 0.0 {
                        *o += a * (1.0 - *o);
                    } else {
                        *o -= a * *o;
                    }
                    *o = o.clamp(0.0, 1.0);
                }
            }
            return;
        }
    }
}

/// `∫ occ_E·f` along the line `x0 + t·d`, including the part outside the
/// box as dictated by the tail convention.
fn line_mass(e: &IndicatorSet, line: &LineDensity<'_>, x0: &[f64], d: &[f64]) -> f64 {
    let geom = &e.geom;
    let n = geom.dim();
    let (t0, t1) = match chord(x0, d, &geom.lo, &geom.hi) {
        Some(c) => c,
        None => return outside_mass(e, line, x0, d, f64::INFINITY, f64::INFINITY),
    };
    let mut ts = vec![t0, t1];
    for a in 0..n {
        if d[a].abs() < 1e-300 {
            continue;
        }
        for i in 1..geom.dims[a] {
            let t = (geom.lo[a] + i as f64 * geom.h(a) - x0[a]) / d[a];
            if t > t0 && t < t1 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = 0.0;
    let mut mid = vec![0.0; n];
    for pair in ts.windows(2) {
        let (ta, tb) = (pair[0], pair[1]);
        if !(tb > ta) {
            continue;
        }
        let tm = 0.5 * (ta + tb);
        for a in 0..n {
            mid[a] = x0[a] + tm * d[a];
        }
        let o = match geom.locate(&mid) {
            Some(idx) => e.occ[geom.ravel(&idx)],
            None => continue,
        };
        if o > 0.0 {
            acc += o * line.mass_between(ta, tb);
        }
    }
    acc + outside_mass(e, line, x0, d, t0, t1)
}

fn outside_mass(e: &IndicatorSet, line: &LineDensity<'_>, x0: &[f64], d: &[f64], t0: f64, t1: f64) -> f64 {
    let (lo_seg, hi_seg) = if t0.is_finite() {
        ((f64::NEG_INFINITY, t0), (t1, f64::INFINITY))
    } else {
        ((f64::NEG_INFINITY, f64::INFINITY), (f64::INFINITY, f64::INFINITY))
    };
    let seg_mass = |a: f64, b: f64| -> f64 {
        if !(b > a) {
            0.0
        } else if a == f64::NEG_INFINITY && b == f64::INFINITY {
            line.total()
        } else if a == f64::NEG_INFINITY {
            line.cdf(b)
        } else if b == f64::INFINITY {
            line.sf(a)
        } else {
            line.mass_between(a, b)
        }
    };
    match &e.tail {
        TailConvention::EmptyOutside => 0.0,
        TailConvention::FullOutside => seg_mass(lo_seg.0, lo_seg.1) + seg_mass(hi_seg.0, hi_seg.1),
        TailConvention::HalfSpaceOutside(h) => {
            let rate = dot(d, &h.v);
            let off = h.r - dot(x0, &h.v);
            let (a, b) = if rate > 0.0 {
                (off / rate, f64::INFINITY)
            } else if rate < 0.0 {
                (f64::NEG_INFINITY, off / rate)
            } else if off <= 0.0 {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                return 0.0;
            };
            let clip = |s: (f64, f64)| seg_mass(s.0.max(a), s.1.min(b));
            clip(lo_seg) + clip(hi_seg)
        }
    }
}

/// `μ(S_v(E))`-preserving symmetrization of `E` in direction `v`.
pub fn symmetrize(w: &WeightedDensity, e: &IndicatorSet, v: &[f64]) -> Result<IndicatorSet> {
    Symmetrizer::new(w, &e.geom, SymmetrizeOptions::default()).apply(e, v)
}

/// Marginal slice `m_E(f, x′)`: the μ-mass of `E` on the fiber over `xp`.
pub fn marginal_slice(w: &WeightedDensity, frame: &Frame, e: &IndicatorSet, xp: &[f64]) -> f64 {
    let x0 = frame.point(xp, 0.0);
    let d = frame.axis_vector();
    let line = w.line(&x0, d);
    line_mass(e, &line, &x0, d)
}

/// Height field `h_δ(x′)`: the largest `h` with fiber mass of
/// `(−∞, h]` equal to `min(m_E + δ, m_full)`.
///
/// Without an explicit `base`, axis-aligned frames reuse the set's own
/// grid and rotated frames cover the projected box at voxel spacing.
pub fn height_function(
    w: &WeightedDensity,
    frame: &Frame,
    e: &IndicatorSet,
    delta: f64,
    base: Option<GridGeometry>,
) -> Result<HeightField> {
    if delta < 0.0 {
        return Err(Error::InvalidArgument("delta must be non-negative".into()));
    }
    frame.validate()?;
    let n = e.geom.dim();
    if frame.dim() != n {
        return Err(Error::InvalidArgument("frame dimension mismatch".into()));
    }
    let base = match base {
        Some(b) => b,
        None => default_base(&e.geom, frame)?,
    };
    let values: Vec<f64> = (0..base.len())
        .into_par_iter()
        .map(|k| {
            let xp = base.center_of(k);
            let x0 = frame.point(&xp, 0.0);
            let d = frame.axis_vector();
            let line = w.line(&x0, d);
            let full = line.total();
            let m = line_mass(e, &line, &x0, d);
            let md = (m + delta).min(full);
            if md >= full * (1.0 - 1e-12) && full > 0.0 {
                f64::INFINITY
            } else {
                line.height_lower(md)
            }
        })
        .collect();
    HeightField::new(base, frame.clone(), values)
}

fn default_base(geom: &GridGeometry, frame: &Frame) -> Result<GridGeometry> {
    let n = geom.dim();
    let axis_aligned = (0..n).all(|i| {
        let c = &frame.cols[i];
        c.iter().enumerate().all(|(j, x)| if i == j { *x == 1.0 } else { *x == 0.0 })
    });
    if axis_aligned {
        let keep: Vec<usize> = (0..n).filter(|&a| a != frame.axis).collect();
        return GridGeometry::new_unchecked(
            keep.iter().map(|&a| geom.lo[a]).collect(),
            keep.iter().map(|&a| geom.hi[a]).collect(),
            keep.iter().map(|&a| geom.dims[a]).collect(),
        );
    }
    let mut lo = vec![f64::INFINITY; n - 1];
    let mut hi = vec![f64::NEG_INFINITY; n - 1];
    for corner in 0..(1usize << n) {
        let x: Vec<f64> = (0..n).map(|a| if (corner >> a) & 1 == 1 { geom.hi[a] } else { geom.lo[a] }).collect();
        let (xp, _) = frame.split(&x);
        for (k, s) in xp.iter().enumerate() {
            lo[k] = lo[k].min(*s);
            hi[k] = hi[k].max(*s);
        }
    }
    let h = geom.hmax();
    let dims = lo.iter().zip(&hi).map(|(a, b)| (((b - a) / h).ceil() as usize).max(1)).collect();
    GridGeometry::new_unchecked(lo, hi, dims)
}

/// The half-space `H(v, r)` reported for a symmetrized set's exterior.
pub fn exterior_half_space(set: &IndicatorSet) -> Option<&HalfSpace> {
    match &set.tail {
        TailConvention::HalfSpaceOutside(h) => Some(h),
        _ => None,
    }
}
