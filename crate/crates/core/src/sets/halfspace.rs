use rayon::prelude::*;

use super::{mu_measure, rasterize_on, GridGeometry, HalfSpace, IndicatorSet, Region, TailConvention};
use crate::numeric::integrate_box;
use crate::weights::{axis_of, dot, Frame, WeightedDensity};
use crate::{Error, Result};

/// `μ(H(v, r))` computed from the marginal of `x·v`, never by rasterizing.
pub fn half_space_mass(w: &WeightedDensity, v: &[f64], r: f64) -> f64 {
    let h = match HalfSpace::new(v, r) {
        Ok(h) => h,
        Err(_) => return 0.0,
    };
    let v = &h.v;
    if w.is_zero() || r == f64::INFINITY {
        return 0.0;
    }
    if let Some(g) = w.gaussian_form() {
        return g.halfspace_mass(v, r);
    }
    if let Some((s, fs)) = w.factors() {
        if let Some(k) = axis_of(v) {
            let others: f64 = fs.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, f)| f.total()).product();
            let m = if v[k] > 0.0 { fs[k].sf(r) } else { fs[k].cdf(-r) };
            return s * others * m;
        }
    }
    numeric_mass(w, v, r)
}

/// Fiberwise quadrature in a frame whose axis is `v`.
fn numeric_mass(w: &WeightedDensity, v: &[f64], r: f64) -> f64 {
    let frame = Frame::with_axis_vector(v).expect("unit normal");
    let n = w.dim;
    if n == 1 {
        return w.line(&[0.0], v).sf(r);
    }
    let (blo, bhi) = base_ranges(w, &frame);
    let scale = w.total_mass().box_mass.max(1e-300);
    let vol: f64 = blo.iter().zip(&bhi).map(|(a, b)| b - a).product();
    integrate_box(&|xp: &[f64]| w.fiber(&frame, xp).sf(r), &blo, &bhi, 1e-12 * scale / vol)
}

/// Projection of the truncation box onto the fiber-base axes of `frame`.
pub(crate) fn base_ranges(w: &WeightedDensity, frame: &Frame) -> (Vec<f64>, Vec<f64>) {
    let n = w.dim;
    let mut lo = vec![f64::INFINITY; n - 1];
    let mut hi = vec![f64::NEG_INFINITY; n - 1];
    for corner in 0..(1usize << n) {
        let x: Vec<f64> = (0..n).map(|a| if (corner >> a) & 1 == 1 { w.hi[a] } else { w.lo[a] }).collect();
        let (xp, _) = frame.split(&x);
        for (k, s) in xp.iter().enumerate() {
            lo[k] = lo[k].min(*s);
            hi[k] = hi[k].max(*s);
        }
    }
    (lo, hi)
}

/// The largest half-space `H(v, r)` with `μ(H) = mass`.
pub fn half_space_for_mass(w: &WeightedDensity, v: &[f64], mass: f64) -> Result<HalfSpace> {
    let h = HalfSpace::new(v, 0.0)?;
    let v = h.v.clone();
    let total = if w.gaussian_form().is_some() || (w.factors().is_some() && axis_of(&v).is_some()) {
        w.total_mass().total
    } else {
        half_space_mass(w, &v, f64::NEG_INFINITY)
    };
    let tol = 1e-9 * total.max(1e-300);
    if mass > total + tol || mass < -tol {
        return Err(Error::OutOfRange { requested: mass, available: total });
    }
    if mass >= total - 2.0 * tol {
        return Ok(HalfSpace { v, r: f64::NEG_INFINITY });
    }
    if let Some(g) = w.gaussian_form() {
        let r = if mass <= 0.0 {
            f64::INFINITY
        } else {
            dot(&g.center, &v) + g.sigma_along(&v) * crate::numeric::normal_isf(mass / g.total())
        };
        return Ok(HalfSpace { v, r });
    }
    if let Some((s, fs)) = w.factors() {
        if let Some(k) = axis_of(&v) {
            let others: f64 = fs.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, f)| f.total()).product();
            let p = mass / (s * others);
            let r = if v[k] > 0.0 { fs[k].quantile_upper(p) } else { -fs[k].height_lower(p) };
            return Ok(HalfSpace { v, r });
        }
    }
    // Monotone bisection for the smallest r with m(r) <= mass.
    let proj: Vec<f64> = (0..(1usize << w.dim))
        .map(|c| (0..w.dim).map(|a| (if (c >> a) & 1 == 1 { w.hi[a] } else { w.lo[a] }) * v[a]).sum())
        .collect();
    let rlo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let rhi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mass <= 0.0 && w.is_positive() {
        return Ok(HalfSpace { v, r: f64::INFINITY });
    }
    // Newton on m(r) − mass with m′(r) = −∫_{∂H} f, kept inside a bracket
    // for the smallest r with m(r) ≤ mass.
    let accept = |m: f64| m <= mass + 0.5 * tol;
    let (mut lo, mut hi) = (rlo, rhi);
    let x_tol = 1e-13 * (rhi - rlo);
    let mut r = 0.5 * (lo + hi);
    for _ in 0..200 {
        let m = half_space_mass(w, &v, r);
        if accept(m) {
            hi = r;
        } else {
            lo = r;
        }
        if (m - mass).abs() <= 0.25 * tol || hi - lo <= x_tol {
            break;
        }
        let slope = plane_integral(w, &v, r);
        let mut next = if slope > 0.0 { r + (m - mass) / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next <= lo || next >= hi {
            break;
        }
        r = next;
    }
    if !accept(half_space_mass(w, &v, r)) {
        r = hi;
    }
    Ok(HalfSpace { v, r })
}

/// `∫_{x·v = r} f dH^{n−1}` by quadrature over the truncation box.
pub(crate) fn plane_integral(w: &WeightedDensity, v: &[f64], r: f64) -> f64 {
    if w.dim == 1 {
        return w.eval(&[r * v[0]]);
    }
    let frame = Frame::with_axis_vector(v).expect("unit normal");
    let (lo, hi) = base_ranges(w, &frame);
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let tol = 1e-12 * w.total_mass().box_mass.max(1e-300);
    integrate_box(&|xp: &[f64]| w.eval(&frame.point(xp, r)), &lo, &hi, tol / vol.max(1e-300))
}

/// `H_μ(E, v)`.
pub fn half_space_equal_measure(w: &WeightedDensity, e: &IndicatorSet, v: &[f64]) -> Result<HalfSpace> {
    half_space_for_mass(w, v, mu_measure(w, e))
}

/// Half-space with voxel occupancy equal to its mass fraction
/// `μ(voxel ∩ H)/μ(voxel)` for axis-aligned normals of separable
/// densities; other cases fall back to antialiased supersampling.
pub fn rasterize_halfspace_exact(w: &WeightedDensity, h: &HalfSpace, geom: &GridGeometry, s: usize) -> Result<IndicatorSet> {
    let tail = if h.r == f64::NEG_INFINITY {
        TailConvention::FullOutside
    } else if h.r == f64::INFINITY {
        TailConvention::EmptyOutside
    } else {
        TailConvention::HalfSpaceOutside(h.clone())
    };
    if !h.r.is_finite() {
        let fill = if h.r < 0.0 { 1.0 } else { 0.0 };
        return IndicatorSet::new(geom.clone(), s, tail, vec![fill; geom.len()]);
    }
    if let (Some((_, fs)), Some(k)) = (w.factors(), axis_of(&h.v)) {
        let up = h.v[k] > 0.0;
        let hk = geom.h(k);
        let col: Vec<f64> = (0..geom.dims[k])
            .map(|i| {
                let a = geom.lo[k] + i as f64 * hk;
                let b = a + hk;
                // H restricted to the axis: [r, ∞) or (−∞, −r].
                let (ca, cb) = if up { (a.max(h.r), b) } else { (a, b.min(-h.r)) };
                let tot = fs[k].mass_between(a, b);
                if tot > 0.0 {
                    (fs[k].mass_between(ca, cb) / tot).clamp(0.0, 1.0)
                } else {
                    ((cb - ca) / hk).clamp(0.0, 1.0)
                }
            })
            .collect();
        let occ: Vec<f64> = (0..geom.len()).into_par_iter().map(|j| col[geom.unravel(j)[k]]).collect();
        return IndicatorSet::new(geom.clone(), s, tail, occ);
    }
    let mut e = rasterize_on(&Region::HalfSpace(h.clone()), geom, s).or_else(|err| match err {
        Error::EmptyRegion => Ok(IndicatorSet::empty(geom, s)),
        other => Err(other),
    })?;
    e.tail = tail;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::normal_cdf;
    use crate::weights::{Bump, DensityKind};

    #[test]
    fn gaussian_median_half_space() {
        let w = WeightedDensity::standard_gaussian(2);
        for th in [0.0f64, 0.4, 2.0] {
            let h = half_space_for_mass(&w, &[th.cos(), th.sin()], 0.5).unwrap();
            assert!(h.r.abs() < 1e-12);
        }
        let h = half_space_for_mass(&w, &[1.0, 0.0], 0.158_655_253_931_457).unwrap();
        assert!((h.r - 1.0).abs() < 1e-9);
        let full = half_space_for_mass(&w, &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(full.r, f64::NEG_INFINITY);
        assert!(half_space_for_mass(&w, &[1.0, 0.0], 1.1).is_err());
    }

    #[test]
    fn numeric_path_agrees_with_closed_form() {
        let base = WeightedDensity::standard_gaussian(2);
        let w = WeightedDensity::new(
            DensityKind::Perturbed {
                base: Box::new(base.kind.clone()),
                bump: Bump { center: vec![0.0, 0.0], width: 1.0, strength: 0.0 },
            },
            2,
        )
        .unwrap();
        let v = [0.6, -0.8];
        let m = half_space_mass(&w, &v, 0.3);
        assert!((m - (1.0 - normal_cdf(0.3))).abs() < 1e-8, "{m}");
        let h = half_space_for_mass(&w, &v, 0.2).unwrap();
        assert!((half_space_mass(&base, &v, h.r) - 0.2).abs() < 1e-8);
    }

    #[test]
    fn exact_raster_matches_mass() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 100).unwrap();
        let h = HalfSpace::new(&[-1.0, 0.0], -0.37).unwrap();
        let e = rasterize_halfspace_exact(&w, &h, &geom, 4).unwrap();
        let m = mu_measure(&w, &e);
        assert!((m - normal_cdf(0.37)).abs() < 1e-9, "{m}");
    }
}
