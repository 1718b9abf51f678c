//! Weighted perimeter `Per_μ(E)` by boundary integration, Minkowski
//! enlargement, the graph formula, and closed forms for half-spaces.

pub mod contour;
mod minkowski;

pub use minkowski::{default_schedule, perimeter_minkowski};

use serde::{Deserialize, Serialize};

use crate::numeric::par_sum;
use crate::sets::{plane_integral, HalfSpace, HeightField, IndicatorSet};
use crate::weights::{axis_of, WeightedDensity};
use crate::{Error, Result};

/// Budget constant for boundary integration: per facet,
/// `C_BV · hⁿ · (max of f over the facet)`.
pub const C_BV: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerimeterMethod {
    BvBoundary,
    Minkowski,
    GraphFormula,
    HalfspaceClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerimeterEstimate {
    pub value: f64,
    pub method: PerimeterMethod,
    /// Largest grid dimension (0 for closed forms).
    pub resolution: usize,
    /// Declared absolute error bound.
    pub error_budget: f64,
    /// Minkowski quotient sequence `(ρ, q(ρ))`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quotients: Vec<(f64, f64)>,
}

impl PerimeterEstimate {
    fn new(value: f64, method: PerimeterMethod, resolution: usize, error_budget: f64) -> Self {
        PerimeterEstimate { value, method, resolution, error_budget, quotients: Vec::new() }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.error_budget
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error_budget
    }

    /// Whether the two estimates are compatible within their budgets.
    pub fn agrees_with(&self, other: &PerimeterEstimate) -> bool {
        (self.value - other.value).abs() <= self.error_budget + other.error_budget
    }
}

fn resolution(e: &IndicatorSet) -> usize {
    e.geom.dims.iter().copied().max().unwrap_or(0)
}

/// Boundary integral `∫_{∂E} f dH^{n−1}` over the level-1/2 contour of
/// the occupancy field.
pub fn perimeter_bv(w: &WeightedDensity, e: &IndicatorSet) -> Result<PerimeterEstimate> {
    if e.geom.dim() != w.dim {
        return Err(Error::InvalidArgument("set and density dimensions differ".into()));
    }
    if e.is_constant() {
        return Err(Error::NoBoundary);
    }
    let facets = contour::extract(e);
    if facets.is_empty() {
        return Err(Error::NoBoundary);
    }
    let hn = e.geom.hmax().powi(e.geom.dim() as i32);
    let value = par_sum(facets.len(), |k| {
        let f = &facets[k];
        f.measure() * w.eval(&f.centroid())
    });
    let budget = C_BV
        * hn
        * par_sum(facets.len(), |k| {
            let fmax = facets[k].verts.iter().map(|p| w.eval(p)).fold(0.0, f64::max);
            fmax.max(w.eval(&facets[k].centroid()))
        });
    Ok(PerimeterEstimate::new(value, PerimeterMethod::BvBoundary, resolution(e), budget.max(f64::MIN_POSITIVE)))
}

/// Graph formula `∫ f(x′, g(x′))·√(1 + |∇g|²) dx′` with central-difference
/// gradients. The budget compares against the same rule at double spacing,
/// plus a truncation term: the integrand on the edge cells of the base
/// spread over the base extent.
pub fn perimeter_graph(w: &WeightedDensity, g: &HeightField) -> Result<PerimeterEstimate> {
    if g.frame.dim() != w.dim {
        return Err(Error::InvalidArgument("height field and density dimensions differ".into()));
    }
    let inf = g.infinite_count();
    if inf > 0 {
        return Err(Error::InfiniteHeight(inf));
    }
    let fine = graph_sum(w, g, 1, |_| 1.0);
    let coarse_ok = g.base.dims.iter().all(|&d| d >= 6);
    let quad = if coarse_ok { (fine - graph_sum(w, g, 2, |_| 1.0)).abs() } else { 1e-3 * fine.abs() };
    let b = &g.base;
    let edge = graph_sum(w, g, 1, |idx| {
        (0..b.dim()).filter(|&a| idx[a] == 0 || idx[a] + 1 == b.dims[a]).map(|a| b.dims[a] as f64).sum()
    });
    let budget = quad + edge;
    let res = g.base.dims.iter().copied().max().unwrap_or(1);
    Ok(PerimeterEstimate::new(fine, PerimeterMethod::GraphFormula, res, budget.max(1e-12 * fine.abs()).max(f64::MIN_POSITIVE)))
}

/// Midpoint rule on every `stride`-th base cell, each cell scaled by
/// `weight` of its coarse index.
fn graph_sum<F: Fn(&[usize]) -> f64 + Sync>(w: &WeightedDensity, g: &HeightField, stride: usize, weight: F) -> f64 {
    let b = &g.base;
    let m = b.dim();
    let sub: Vec<usize> = b.dims.iter().map(|d| d / stride).collect();
    let total: usize = sub.iter().product::<usize>().max(1);
    let cell: f64 = (0..m).map(|a| b.h(a) * stride as f64).product();
    let value = |idx: &[usize]| g.values[b.ravel(idx)];
    par_sum(total, |k| {
        let mut rem = k;
        let mut sidx = vec![0; m];
        for a in (0..m).rev() {
            sidx[a] = rem % sub[a];
            rem /= sub[a];
        }
        // Center of the coarse cell, expressed through fine indices.
        let xp: Vec<f64> = (0..m).map(|a| b.lo[a] + (sidx[a] as f64 + 0.5) * b.h(a) * stride as f64).collect();
        let here: Vec<usize> = (0..m).map(|a| sidx[a] * stride + (stride - 1) / 2).collect();
        let gv = if stride == 1 { value(&here) } else { g.eval(&xp) };
        let mut grad2 = 0.0;
        for a in 0..m {
            let h = b.h(a) * stride as f64;
            let (lo, hi) = if sidx[a] == 0 {
                (0usize, 1usize)
            } else if sidx[a] + 1 == sub[a] {
                (sub[a] - 2, sub[a] - 1)
            } else {
                (sidx[a] - 1, sidx[a] + 1)
            };
            if sub[a] < 2 {
                continue;
            }
            let at = |s: usize| -> f64 {
                if stride == 1 {
                    let mut idx = here.clone();
                    idx[a] = s;
                    value(&idx)
                } else {
                    let mut x = xp.clone();
                    x[a] = b.lo[a] + (s as f64 + 0.5) * h;
                    g.eval(&x)
                }
            };
            let d = (at(hi) - at(lo)) / ((hi - lo) as f64 * h);
            grad2 += d * d;
        }
        w.eval(&g.frame.point(&xp, gv)) * (1.0 + grad2).sqrt() * cell * weight(&sidx)
    })
}

/// `Per_μ(H(v, r))`: closed forms for Gaussian and axis-separable weights,
/// otherwise quadrature of `f` over `∂H` within the box.
pub fn perimeter_halfspace(w: &WeightedDensity, h: &HalfSpace) -> Result<PerimeterEstimate> {
    let h = HalfSpace::new(&h.v, h.r)?;
    let closed = |value: f64| {
        PerimeterEstimate::new(value, PerimeterMethod::HalfspaceClosedForm, 0, (16.0 * f64::EPSILON * value).max(f64::MIN_POSITIVE))
    };
    if !h.r.is_finite() || w.is_zero() {
        return Ok(closed(0.0));
    }
    if let Some(g) = w.gaussian_form() {
        return Ok(closed(g.halfspace_perimeter(&h.v, h.r)));
    }
    if let (Some((s, fs)), Some(k)) = (w.factors(), axis_of(&h.v)) {
        let others: f64 = fs.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, f)| f.total()).product();
        let y = if h.v[k] > 0.0 { h.r } else { -h.r };
        return Ok(closed(s * others * fs[k].eval(y)));
    }
    if w.dim == 1 {
        return Ok(closed(w.eval(&[h.r * h.v[0]])));
    }
    let tol = 1e-12 * w.total_mass().box_mass.max(1e-300);
    let value = plane_integral(w, &h.v, h.r);
    Ok(PerimeterEstimate::new(value, PerimeterMethod::HalfspaceClosedForm, 0, tol.max(f64::MIN_POSITIVE)))
}

/// Number of extracted boundary facets.
pub fn boundary_facet_count(e: &IndicatorSet) -> usize {
    contour::extract(e).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;
    use crate::sets::GridGeometry;
    use crate::weights::{Bump, DensityKind, Frame};

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn empty_set_has_no_boundary() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 32).unwrap();
        assert!(matches!(perimeter_bv(&w, &IndicatorSet::empty(&geom, 4)), Err(Error::NoBoundary)));
    }

    #[test]
    fn half_space_closed_forms() {
        let g = WeightedDensity::standard_gaussian(2);
        let p = perimeter_halfspace(&g, &HalfSpace { v: vec![1.0, 0.0], r: 0.0 }).unwrap();
        assert!((p.value - INV_SQRT_2PI).abs() < 1e-15);
        let l = WeightedDensity::logistic(2);
        let p = perimeter_halfspace(&l, &HalfSpace { v: vec![1.0, 0.0], r: 0.0 }).unwrap();
        assert!((p.value - 0.25).abs() < 1e-15);
        let p = perimeter_halfspace(&g, &HalfSpace { v: vec![1.0, 0.0], r: f64::NEG_INFINITY }).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn half_space_quadrature_matches_closed_form() {
        let g = WeightedDensity::standard_gaussian(2);
        let w = WeightedDensity::new(
            DensityKind::Perturbed {
                base: Box::new(g.kind.clone()),
                bump: Bump { center: vec![0.0, 0.0], width: 1.0, strength: 0.0 },
            },
            2,
        )
        .unwrap();
        let h = HalfSpace::new(&[0.6, -0.8], 0.4).unwrap();
        let a = perimeter_halfspace(&w, &h).unwrap();
        let b = perimeter_halfspace(&g, &h).unwrap();
        assert!((a.value - b.value).abs() < 1e-10, "{} {}", a.value, b.value);
    }

    #[test]
    fn flat_graph() {
        let w = WeightedDensity::standard_gaussian(2);
        let base = GridGeometry::new_unchecked(vec![w.lo[0]], vec![w.hi[0]], vec![256]).unwrap();
        let g = HeightField::from_fn(base, Frame::identity(2, 1), |_| 0.0).unwrap();
        let p = perimeter_graph(&w, &g).unwrap();
        assert!((p.value - INV_SQRT_2PI).abs() < 1e-4, "{p:?}");
    }

    #[test]
    fn tilted_graph_matches_quadrature() {
        let w = WeightedDensity::standard_gaussian(2);
        let base = GridGeometry::new_unchecked(vec![w.lo[0]], vec![w.hi[0]], vec![512]).unwrap();
        let g = HeightField::from_fn(base, Frame::identity(2, 1), |x| 0.3 * x[0]).unwrap();
        let p = perimeter_graph(&w, &g).unwrap();
        let c = 1.09f64.sqrt() / (2.0 * std::f64::consts::PI);
        let (oracle, _) = integrate(|x| c * (-(x * x * 1.09) / 2.0).exp(), w.lo[0], w.hi[0], 1e-14, 1e-13);
        assert!((p.value - oracle).abs() < 1e-4, "{} {}", p.value, oracle);
        assert!((p.value - oracle).abs() <= p.error_budget.max(1e-6));
    }

    #[test]
    fn infinite_graph_is_rejected() {
        let w = WeightedDensity::standard_gaussian(2);
        let base = GridGeometry::new_unchecked(vec![-1.0], vec![1.0], vec![8]).unwrap();
        let g = HeightField::from_fn(base, Frame::identity(2, 1), |x| if x[0] > 0.0 { f64::INFINITY } else { 0.0 }).unwrap();
        assert!(matches!(perimeter_graph(&w, &g), Err(Error::InfiniteHeight(4))));
    }
}
