//! Minkowski enlargement quotients `q(ρ) = (μ(E + B_ρ) − μ(E))/ρ`,
//! extrapolated to `ρ → 0`.

use rayon::prelude::*;

use super::contour::{self, square_segments, LEVEL};
use super::{PerimeterEstimate, PerimeterMethod};
use crate::numeric::{pairwise_sum, polyfit};
use crate::sets::{IndicatorSet, TailConvention};
use crate::weights::WeightedDensity;
use crate::{Error, Result};

/// Relative oscillation of the quotient sequence above which the
/// extrapolation is rejected.
pub const MAX_OSCILLATION: f64 = 0.2;
/// Discretization part of the budget, relative to `h · value`.
pub const C_MK: f64 = 1.0;

/// Radii `2h, 3h, …, 8h`.
pub fn default_schedule(e: &IndicatorSet) -> Vec<f64> {
    let h = e.geom.hmax();
    (2..=8).map(|j| j as f64 * h).collect()
}

pub fn perimeter_minkowski(w: &WeightedDensity, e: &IndicatorSet, schedule: &[f64]) -> Result<PerimeterEstimate> {
    let n = e.geom.dim();
    if n != w.dim {
        return Err(Error::InvalidArgument("set and density dimensions differ".into()));
    }
    let h = e.geom.hmax();
    if schedule.len() < 3 {
        return Err(Error::InvalidArgument("need at least three radii".into()));
    }
    if schedule.iter().any(|r| !(*r >= 2.0 * h * (1.0 - 1e-12))) {
        return Err(Error::InvalidArgument("radii must be at least two voxel sizes".into()));
    }
    let res = e.geom.dims.iter().copied().max().unwrap_or(0);
    let excess = if e.is_constant() {
        vec![0.0; schedule.len()]
    } else {
        match n {
            1 => excess_1d(w, e, schedule),
            2 => excess_2d(w, e, schedule),
            _ => return Err(Error::Unsupported("Minkowski enlargement is implemented in one and two dimensions".into())),
        }
    };
    let q: Vec<f64> = excess.iter().zip(schedule).map(|(m, r)| m / r).collect();
    let quotients: Vec<(f64, f64)> = schedule.iter().copied().zip(q.iter().copied()).collect();
    let scale = q.iter().map(|x| x.abs()).sum::<f64>() / q.len() as f64;
    if scale == 0.0 {
        return Ok(PerimeterEstimate {
            value: 0.0,
            method: PerimeterMethod::Minkowski,
            resolution: res,
            error_budget: f64::MIN_POSITIVE,
            quotients,
        });
    }
    let lin = polyfit(schedule, &q, 1);
    let quad = polyfit(schedule, &q, 2);
    let osc = schedule
        .iter()
        .zip(&q)
        .map(|(r, qi)| (qi - (lin[0] + lin[1] * r)).abs())
        .fold(0.0, f64::max)
        / scale;
    if osc > MAX_OSCILLATION {
        return Err(Error::Nonconvergent(osc));
    }
    let value = quad[0].max(0.0);
    let disc = if n == 1 { 0.0 } else { C_MK * h * value };
    let budget = (lin[0] - quad[0]).abs() + disc + 1e-12 * scale;
    Ok(PerimeterEstimate { value, method: PerimeterMethod::Minkowski, resolution: res, error_budget: budget, quotients })
}

/// Inside intervals `[a, b]` of a 1D set from its level-1/2 crossings,
/// extended to infinity where the tail says so.
fn intervals_1d(e: &IndicatorSet) -> Vec<(f64, f64)> {
    let g = &e.geom;
    let cross = contour::extract(e);
    let inside_low = match &e.tail {
        TailConvention::FullOutside => true,
        TailConvention::HalfSpaceOutside(h) => h.v[0] < 0.0,
        TailConvention::EmptyOutside => false,
    };
    let inside_high = match &e.tail {
        TailConvention::FullOutside => true,
        TailConvention::HalfSpaceOutside(h) => h.v[0] > 0.0,
        TailConvention::EmptyOutside => false,
    };
    let mut out = Vec::new();
    let mut start = if e.occ[0] >= LEVEL { Some(if inside_low { f64::NEG_INFINITY } else { g.lo[0] }) } else { None };
    for c in &cross {
        let x = c.verts[0][0];
        match start {
            Some(a) => {
                out.push((a, x));
                start = None;
            }
            None => start = Some(x),
        }
    }
    if let Some(a) = start {
        out.push((a, if inside_high { f64::INFINITY } else { g.hi[0] }));
    }
    out
}

fn excess_1d(w: &WeightedDensity, e: &IndicatorSet, schedule: &[f64]) -> Vec<f64> {
    let line = w.line(&[0.0], &[1.0]);
    let mass = |a: f64, b: f64| -> f64 {
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
    let iv = intervals_1d(e);
    schedule
        .iter()
        .map(|&r| {
            // Gaps between consecutive intervals shrink by 2ρ (or close).
            let mut added = 0.0;
            for (k, &(a, b)) in iv.iter().enumerate() {
                if k == 0 && a.is_finite() {
                    added += mass(a - r, a);
                }
                if k + 1 == iv.len() {
                    if b.is_finite() {
                        added += mass(b, b + r);
                    }
                } else {
                    let next = iv[k + 1].0;
                    if next - b <= 2.0 * r {
                        added += mass(b, next);
                    } else {
                        added += mass(b, b + r) + mass(next - r, next);
                    }
                }
            }
            added
        })
        .collect()
}

/// Segment list bucketed by marching cell.
struct Buckets {
    cells: [usize; 2],
    start: Vec<usize>,
    segs: Vec<[[f64; 2]; 2]>,
}

impl Buckets {
    fn new(e: &IndicatorSet) -> Self {
        let g = &e.geom;
        let cells = [g.dims[0] - 1, g.dims[1] - 1];
        let facets = contour::extract(e);
        let mut per: Vec<Vec<[[f64; 2]; 2]>> = vec![Vec::new(); cells[0] * cells[1]];
        for f in facets {
            let idx = g.unravel(f.cell);
            per[idx[0] * cells[1] + idx[1]].push([[f.verts[0][0], f.verts[0][1]], [f.verts[1][0], f.verts[1][1]]]);
        }
        let mut start = Vec::with_capacity(per.len() + 1);
        let mut segs = Vec::new();
        for p in per {
            start.push(segs.len());
            segs.extend(p);
        }
        start.push(segs.len());
        Buckets { cells, start, segs }
    }

    fn cell(&self, i: usize, j: usize) -> &[[[f64; 2]; 2]] {
        let c = i * self.cells[1] + j;
        &self.segs[self.start[c]..self.start[c + 1]]
    }
}

fn seg_dist(p: [f64; 2], s: &[[f64; 2]; 2]) -> f64 {
    let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((p[0] - s[0][0]) * d[0] + (p[1] - s[0][1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [s[0][0] + t * d[0] - p[0], s[0][1] + t * d[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

/// Side of `p` relative to the marching-squares boundary of its cell.
fn inside_2d(e: &IndicatorSet, p: [f64; 2]) -> bool {
    let g = &e.geom;
    let u = [(p[0] - g.lo[0]) / g.h(0) - 0.5, (p[1] - g.lo[1]) / g.h(1) - 0.5];
    let out_of_cells = (0..2).any(|a| u[a] < 0.0 || u[a] > (g.dims[a] - 1) as f64);
    if out_of_cells {
        let idx: Vec<usize> = (0..2).map(|a| (u[a].round().max(0.0) as usize).min(g.dims[a] - 1)).collect();
        return e.occ[g.ravel(&idx)] >= LEVEL;
    }
    let i = (u[0].floor() as usize).min(g.dims[0] - 2);
    let j = (u[1].floor() as usize).min(g.dims[1] - 2);
    let offs = [[0, 0], [1, 0], [1, 1], [0, 1]];
    let mut corners = [[0.0; 2]; 4];
    let mut vals = [0.0; 4];
    for (k, o) in offs.iter().enumerate() {
        let idx = [i + o[0], j + o[1]];
        corners[k] = [g.center_coord(0, idx[0]), g.center_coord(1, idx[1])];
        vals[k] = e.occ[g.ravel(&idx)];
    }
    let inside: Vec<bool> = vals.iter().map(|v| *v >= LEVEL).collect();
    let segs = square_segments(&corners, &vals);
    let side = |s: &[[f64; 2]; 2], q: [f64; 2]| -> f64 {
        (s[1][0] - s[0][0]) * (q[1] - s[0][1]) - (s[1][1] - s[0][1]) * (q[0] - s[0][0])
    };
    match segs.len() {
        0 => inside[0],
        1 => {
            // Compare with any corner; pick the one farthest from the line.
            let s = &segs[0];
            let k = (0..4)
                .max_by(|&a, &b| side(s, corners[a]).abs().partial_cmp(&side(s, corners[b]).abs()).unwrap())
                .unwrap();
            let same = side(s, corners[k]) * side(s, p) >= 0.0;
            if same {
                inside[k]
            } else {
                !inside[k]
            }
        }
        _ => {
            let center_in = vals.iter().sum::<f64>() / 4.0 >= LEVEL;
            // Each segment cuts off the corner whose status differs from the center.
            let cut: Vec<usize> = (0..4).filter(|&c| inside[c] != center_in).collect();
            for (s, &c) in segs.iter().zip(&cut) {
                if side(s, corners[c]) * side(s, p) > 0.0 {
                    return inside[c];
                }
            }
            center_in
        }
    }
}

fn excess_2d(w: &WeightedDensity, e: &IndicatorSet, schedule: &[f64]) -> Vec<f64> {
    let g = &e.geom;
    let h = g.hmax();
    let rmax = schedule.iter().copied().fold(0.0, f64::max);
    let reach = (rmax / h).ceil() as usize + 2;
    let b = Buckets::new(e);
    // Voxels within `reach` cells of a boundary cell.
    let (nx, ny) = (g.dims[0], g.dims[1]);
    let mut near = vec![false; g.len()];
    for ci in 0..b.cells[0] {
        for cj in 0..b.cells[1] {
            if b.cell(ci, cj).is_empty() {
                continue;
            }
            for i in ci.saturating_sub(reach)..(ci + reach + 2).min(nx) {
                for j in cj.saturating_sub(reach)..(cj + reach + 2).min(ny) {
                    near[i * ny + j] = true;
                }
            }
        }
    }
    let cand: Vec<usize> = (0..g.len()).filter(|&k| near[k]).collect();
    let s = e.subcell.max(1);
    let ell = h / s as f64;
    let area = g.h(0) * g.h(1) / (s * s) as f64;
    let per_voxel: Vec<Vec<f64>> = cand
        .par_iter()
        .map(|&k| {
            let idx = g.unravel(k);
            let mut acc = vec![0.0; schedule.len()];
            let ci0 = idx[0].saturating_sub(reach);
            let ci1 = (idx[0] + reach + 1).min(b.cells[0]);
            let cj0 = idx[1].saturating_sub(reach);
            let cj1 = (idx[1] + reach + 1).min(b.cells[1]);
            for a in 0..s {
                for c in 0..s {
                    let p = [
                        g.lo[0] + (idx[0] as f64 + (a as f64 + 0.5) / s as f64) * g.h(0),
                        g.lo[1] + (idx[1] as f64 + (c as f64 + 0.5) / s as f64) * g.h(1),
                    ];
                    let mut d = f64::INFINITY;
                    for ci in ci0..ci1 {
                        for cj in cj0..cj1 {
                            for sg in b.cell(ci, cj) {
                                d = d.min(seg_dist(p, sg));
                            }
                        }
                    }
                    if !d.is_finite() || d > rmax + ell {
                        continue;
                    }
                    let sd = if inside_2d(e, p) { -d } else { d };
                    // Antialiased {sd ≤ t} over the subcell.
                    let frac = |t: f64| ((t - sd) / ell + 0.5).clamp(0.0, 1.0);
                    let base = frac(0.0);
                    let fw = w.eval(&p) * area;
                    for (m, r) in acc.iter_mut().zip(schedule) {
                        *m += fw * (frac(*r) - base);
                    }
                }
            }
            acc
        })
        .collect();
    (0..schedule.len())
        .map(|j| pairwise_sum(&per_voxel.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{rasterize_on, GridGeometry, Region};

    #[test]
    fn logistic_half_line_quotient() {
        let w = WeightedDensity::logistic(1);
        let geom = GridGeometry::for_density(&w, 2048).unwrap();
        let e = rasterize_on(&Region::half_space(&[-1.0], 0.0), &geom, 4).unwrap();
        let est = perimeter_minkowski(&w, &e, &default_schedule(&e)).unwrap();
        assert!((est.value - 0.25).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn full_space_has_zero_enlargement() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 64).unwrap();
        let e = IndicatorSet::full(&geom, 4);
        assert_eq!(perimeter_minkowski(&w, &e, &default_schedule(&e)).unwrap().value, 0.0);
    }
}
