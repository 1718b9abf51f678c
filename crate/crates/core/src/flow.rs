//! Hole-filling flow: iterated symmetrizations `F_{k+1} = S_{η_k}(F_k)`
//! that move mass from `F \ H` into `H \ F`, with `H = H_μ(E, v)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::perimeter::perimeter_bv;
use crate::sets::{half_space_for_mass, rasterize_halfspace_exact, HalfSpace, IndicatorSet, MassGrid};
use crate::symmetrize::{SymmetrizeOptions, Symmetrizer, MASS_TOL};
use crate::weights::{dot, WeightedDensity};
use crate::{Error, Result};

/// Candidate voxels kept per side when scoring pairs (so at most 64² pairs).
pub const CANDIDATES: usize = 64;
/// Half-width of the window used for local masses (5 voxels wide).
pub const WINDOW: usize = 2;
/// Steps without progress before `eps` is halved.
pub const STALL_STEPS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    BudgetExhausted,
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub step: usize,
    /// Direction used to reach this state (empty for the initial state).
    pub eta: Vec<f64>,
    /// `μ(F_k Δ H)`.
    pub symm_diff: f64,
    /// `μ(F_k \ H)`.
    pub excess: f64,
    /// `μ(F_k)`.
    pub mass: f64,
    pub perimeter: Option<f64>,
    pub perimeter_budget: Option<f64>,
    pub eps: f64,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub v: Vec<f64>,
    pub halfspace: HalfSpace,
    pub target: f64,
    pub steps: Vec<FlowStep>,
    pub status: FlowStatus,
    #[serde(skip)]
    pub final_set: Option<IndicatorSet>,
}

impl FlowTrace {
    pub fn initial_symm_diff(&self) -> f64 {
        self.steps.first().map(|s| s.symm_diff).unwrap_or(0.0)
    }

    pub fn final_symm_diff(&self) -> f64 {
        self.steps.last().map(|s| s.symm_diff).unwrap_or(0.0)
    }

    /// Number of symmetrization steps taken.
    pub fn step_count(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// Largest increase of `μ(F_k \ H)` between consecutive steps.
    pub fn max_excess_increase(&self) -> f64 {
        self.steps.windows(2).map(|p| p[1].excess - p[0].excess).fold(0.0, f64::max)
    }

    pub fn wall_times_ms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.wall_ms).collect()
    }

    pub fn to_csv(&self) -> String {
        let n = self.v.len();
        let mut out = String::from("step");
        for a in 0..n {
            out.push_str(&format!(",eta_{a}"));
        }
        out.push_str(",symm_diff,excess,mass,perimeter,perimeter_budget,eps,wall_ms\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
        for s in &self.steps {
            out.push_str(&s.step.to_string());
            for a in 0..n {
                out.push(',');
                if let Some(x) = s.eta.get(a) {
                    out.push_str(&format!("{x:.17e}"));
                }
            }
            out.push_str(&format!(
                ",{:.17e},{:.17e},{:.17e},{},{},{:.6e},{:.3}\n",
                s.symm_diff,
                s.excess,
                s.mass,
                opt(s.perimeter),
                opt(s.perimeter_budget),
                s.eps,
                s.wall_ms
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub max_steps: usize,
    /// Absolute stopping level for `μ(F_k Δ H)`.
    pub target: f64,
    /// Initial density threshold; defaults to `1e−3 · max f` on the grid.
    pub eps: Option<f64>,
    /// Always snap directions to `{−1,0,1}ⁿ` lattice directions, for which
    /// the discrete symmetrization is mass-exact. Otherwise the picked
    /// direction is used unless it breaks monotonicity of `μ(F \ H)`.
    pub lattice_snap: bool,
    pub track_perimeter: bool,
    pub mass_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { max_steps: 60, target: 0.0, eps: None, lattice_snap: false, track_perimeter: true, mass_tol: MASS_TOL }
    }
}

/// Local masses of `E \ H` and `H \ E` summed over a `(2·WINDOW+1)ⁿ` window.
fn window_masses(masses: &MassGrid, e: &IndicatorSet, h: &IndicatorSet) -> (Vec<f64>, Vec<f64>) {
    let geom = &masses.geom;
    let mut out_e: Vec<f64> = (0..geom.len()).map(|k| masses.w[k] * (e.occ[k] - h.occ[k]).max(0.0)).collect();
    let mut out_h: Vec<f64> = (0..geom.len()).map(|k| masses.w[k] * (h.occ[k] - e.occ[k]).max(0.0)).collect();
    let strides = geom.strides();
    for a in 0..geom.dim() {
        for field in [&mut out_e, &mut out_h] {
            let src = field.clone();
            for (k, slot) in field.iter_mut().enumerate() {
                let i = (k / strides[a]) % geom.dims[a];
                let lo = i.saturating_sub(WINDOW);
                let hi = (i + WINDOW).min(geom.dims[a] - 1);
                let base = k - i * strides[a];
                *slot = (lo..=hi).map(|j| src[base + j * strides[a]]).sum();
            }
        }
    }
    (out_e, out_h)
}

/// Indices of the `CANDIDATES` largest positive entries among voxels with
/// `f ≥ eps`; ties broken by index.
fn top_candidates(score: &[f64], dens: &[f64], eps: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..score.len()).filter(|&k| score[k] > 0.0 && dens[k] >= eps).collect();
    idx.sort_by(|&a, &b| score[b].partial_cmp(&score[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(CANDIDATES);
    idx
}

struct Picker<'a> {
    masses: &'a MassGrid,
    dens: Vec<f64>,
    total: f64,
    mass_tol: f64,
}

impl<'a> Picker<'a> {
    fn new(w: &'a WeightedDensity, masses: &'a MassGrid, mass_tol: f64) -> Self {
        let dens = (0..masses.geom.len()).map(|k| w.eval(&masses.geom.center_of(k))).collect();
        Picker { masses, dens, total: w.total_mass().total, mass_tol }
    }

    fn pick(&self, e: &IndicatorSet, h: &IndicatorSet, v: &[f64], eps: f64) -> Result<Vec<f64>> {
        let d = self.masses.symm_diff(e, h)?;
        if d <= 2.0 * self.mass_tol * self.total {
            return Err(Error::AlreadyConverged);
        }
        let (me, mh) = window_masses(self.masses, e, h);
        let xs = top_candidates(&me, &self.dens, eps);
        let ys = top_candidates(&mh, &self.dens, eps);
        let geom = &self.masses.geom;
        let mut best: Option<(f64, usize, usize)> = None;
        for &x in &xs {
            let px = geom.center_of(x);
            for &y in &ys {
                let py = geom.center_of(y);
                let diff: Vec<f64> = py.iter().zip(&px).map(|(a, b)| a - b).collect();
                if dot(&diff, v) <= 0.0 {
                    continue;
                }
                let score = me[x] * mh[y] / dot(&diff, &diff).sqrt();
                let better = match best {
                    None => true,
                    Some((s, bx, by)) => score > s || (score == s && (x, y) < (bx, by)),
                };
                if better {
                    best = Some((score, x, y));
                }
            }
        }
        let (_, x, y) = best.ok_or(Error::NoDensityPair(eps))?;
        let (px, py) = (geom.center_of(x), geom.center_of(y));
        let diff: Vec<f64> = py.iter().zip(&px).map(|(a, b)| a - b).collect();
        let l = dot(&diff, &diff).sqrt();
        Ok(diff.iter().map(|c| c / l).collect())
    }
}

/// Direction `η = (y − x)/|y − x|` from a high-density point `x` of `E \ H`
/// to a point `y` of `H \ E`, with `v·η > 0`.
pub fn pick_direction(w: &WeightedDensity, e: &IndicatorSet, h: &HalfSpace, eps: f64) -> Result<Vec<f64>> {
    let masses = MassGrid::new(w, &e.geom);
    let hr = rasterize_halfspace_exact(w, h, &e.geom, e.subcell)?;
    let fmax = (0..e.geom.len()).map(|k| w.eval(&e.geom.center_of(k))).fold(0.0, f64::max);
    if eps > fmax {
        return Err(Error::NoDensityPair(eps));
    }
    Picker::new(w, &masses, MASS_TOL).pick(e, &hr, &h.v, eps)
}

/// Nearest `{−1,0,1}ⁿ` direction to `eta` with `v·d > 0`, skipping `avoid`.
pub fn snap_to_lattice(eta: &[f64], v: &[f64], avoid: Option<&[f64]>) -> Vec<f64> {
    let n = eta.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let d: Vec<f64> = (0..n)
            .map(|_| {
                let x = (c % 3) as f64 - 1.0;
                c /= 3;
                x
            })
            .collect();
        let l = dot(&d, &d).sqrt();
        if l == 0.0 {
            continue;
        }
        let d: Vec<f64> = d.iter().map(|x| x / l).collect();
        if dot(&d, v) <= 1e-12 {
            continue;
        }
        if let Some(a) = avoid {
            if d.iter().zip(a).all(|(x, y)| (x - y).abs() < 1e-12) {
                continue;
            }
        }
        let cos = dot(&d, eta);
        if best.as_ref().map_or(true, |(b, _)| cos > *b) {
            best = Some((cos, d));
        }
    }
    best.map(|(_, d)| d).unwrap_or_else(|| v.to_vec())
}

/// Run the flow from `E` toward `H_μ(E, v)`.
pub fn flow_to_halfspace(w: &WeightedDensity, e: &IndicatorSet, v: &[f64], opts: &FlowOptions) -> Result<FlowTrace> {
    let vn = dot(v, v).sqrt();
    if !(vn > 0.0) {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    let v: Vec<f64> = v.iter().map(|x| x / vn).collect();
    let geom = e.geom.clone();
    let sym = Symmetrizer::new(w, &geom, SymmetrizeOptions { mass_tol: opts.mass_tol, ..Default::default() });
    let masses = &sym.masses;
    let m0 = masses.measure(e);
    let total = w.total_mass().total;
    let h = half_space_for_mass(w, &v, m0.min(total))?;
    let hr = rasterize_halfspace_exact(w, &h, &geom, e.subcell)?;
    let picker = Picker::new(w, masses, opts.mass_tol);
    let fmax = picker.dens.iter().copied().fold(0.0, f64::max);
    let mut eps = opts.eps.unwrap_or(1e-3 * fmax);
    let eps_floor = 1e-12 * fmax;

    let record = |step: usize, eta: Vec<f64>, f: &IndicatorSet, eps: f64, t: Instant| -> Result<FlowStep> {
        let (perimeter, perimeter_budget) = if opts.track_perimeter {
            match perimeter_bv(w, f) {
                Ok(p) => (Some(p.value), Some(p.error_budget)),
                Err(Error::NoBoundary) => (Some(0.0), Some(0.0)),
                Err(err) => return Err(err),
            }
        } else {
            (None, None)
        };
        Ok(FlowStep {
            step,
            eta,
            symm_diff: masses.symm_diff(f, &hr)?,
            excess: masses.diff(f, &hr)?,
            mass: masses.measure(f),
            perimeter,
            perimeter_budget,
            eps,
            wall_ms: t.elapsed().as_secs_f64() * 1e3,
        })
    };

    let mut f = e.clone();
    let mut steps = vec![record(0, Vec::new(), &f, eps, Instant::now())?];
    let mut status = FlowStatus::BudgetExhausted;
    let mut stall = 0;
    let mut last: Option<Vec<f64>> = None;
    let mut f_next;
    for k in 1..=opts.max_steps + 1 {
        let d = steps.last().unwrap().symm_diff;
        if d <= opts.target {
            status = FlowStatus::Converged;
            break;
        }
        if k > opts.max_steps {
            break;
        }
        let t = Instant::now();
        let eta = loop {
            match picker.pick(&f, &hr, &v, eps) {
                Ok(eta) => break Some(eta),
                Err(Error::AlreadyConverged) => break None,
                Err(Error::NoDensityPair(_)) if eps > eps_floor => eps *= 0.5,
                Err(Error::NoDensityPair(_)) => break None,
                Err(err) => return Err(err),
            }
        };
        let Some(eta) = eta else {
            status = if d <= 2.0 * opts.mass_tol * total || d <= opts.target { FlowStatus::Converged } else { FlowStatus::Stalled };
            break;
        };
        let snapped = snap_to_lattice(&eta, &v, last.as_deref());
        let mut eta = if opts.lattice_snap { snapped.clone() } else { eta };
        f_next = sym.apply(&f, &eta)?;
        // Resampled directions are kept only while μ(F \ H) stays monotone;
        // lattice directions satisfy it exactly.
        let prev_excess = steps.last().unwrap().excess;
        if masses.diff(&f_next, &hr)? > prev_excess + opts.mass_tol * total && eta != snapped {
            eta = snapped;
            f_next = sym.apply(&f, &eta)?;
        }
        f = f_next;
        let rec = record(k, eta.clone(), &f, eps, t)?;
        if d - rec.symm_diff < opts.mass_tol * total {
            stall += 1;
            if stall >= STALL_STEPS {
                stall = 0;
                eps *= 0.5;
                if eps < eps_floor {
                    steps.push(rec);
                    status = FlowStatus::Stalled;
                    break;
                }
            }
        } else {
            stall = 0;
        }
        last = Some(eta);
        steps.push(rec);
    }
    Ok(FlowTrace { v, halfspace: h, target: opts.target, steps, status, final_set: Some(f) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{rasterize_on, GridGeometry, Region};

    #[test]
    fn snapping_respects_v() {
        let s = 0.5f64.sqrt();
        assert_eq!(snap_to_lattice(&[1.0, 0.1], &[1.0, 0.0], None), vec![1.0, 0.0]);
        let d = snap_to_lattice(&[0.8, 0.6], &[1.0, 0.0], None);
        assert!((d[0] - s).abs() < 1e-15 && (d[1] - s).abs() < 1e-15);
        let d = snap_to_lattice(&[1.0, 0.0], &[1.0, 0.0], Some(&[1.0, 0.0]));
        assert!(d[0] > 0.0 && d[1] != 0.0);
    }

    #[test]
    fn half_space_is_already_converged() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 64).unwrap();
        let h = HalfSpace::new(&[1.0, 0.0], 0.2).unwrap();
        let e = rasterize_halfspace_exact(&w, &h, &geom, 4).unwrap();
        assert!(matches!(pick_direction(&w, &e, &h, 1e-6), Err(Error::AlreadyConverged)));
        let tr = flow_to_halfspace(&w, &e, &[1.0, 0.0], &FlowOptions::default()).unwrap();
        assert_eq!(tr.step_count(), 0);
        assert_eq!(tr.status, FlowStatus::Converged);
    }

    #[test]
    fn eps_above_max_density_has_no_pair() {
        let w = WeightedDensity::standard_gaussian(2);
        let geom = GridGeometry::for_density(&w, 64).unwrap();
        let h = HalfSpace::new(&[1.0, 0.0], 0.0).unwrap();
        let e = rasterize_on(&Region::ball(&[-1.0, 0.0], 1.0), &geom, 4).unwrap();
        assert!(matches!(pick_direction(&w, &e, &h, 1.0), Err(Error::NoDensityPair(_))));
    }

    #[test]
    fn one_dimensional_flow_is_one_step() {
        let w = WeightedDensity::logistic(1);
        let geom = GridGeometry::for_density(&w, 512).unwrap();
        let e = rasterize_on(&Region::Box { lo: vec![-1.0], hi: vec![2.0] }, &geom, 4).unwrap();
        let opts = FlowOptions { target: 1e-9, ..Default::default() };
        let tr = flow_to_halfspace(&w, &e, &[-1.0], &opts).unwrap();
        assert_eq!(tr.step_count(), 1);
        assert_eq!(tr.steps[1].eta, vec![-1.0]);
        assert!(tr.final_symm_diff() < 1e-9, "{}", tr.final_symm_diff());
    }
}
