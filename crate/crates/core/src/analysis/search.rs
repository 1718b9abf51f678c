//! Search for sets whose weighted perimeter increases under `S_v`, with a
//! three-part certification (margin, resolution doubling, estimator agreement).

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::perimeter::{default_schedule, perimeter_bv, perimeter_minkowski, PerimeterEstimate};
use crate::sets::{rasterize_on, GridGeometry, IndicatorSet, MassGrid, Region, DEFAULT_SUBCELL};
use crate::symmetrize::{SymmetrizeOptions, Symmetrizer};
use crate::weights::WeightedDensity;
use crate::{Error, Result};

/// Required ratio of margin to combined error budget.
pub const CERTIFY_FACTOR: f64 = 5.0;
/// Screening ratio at the coarse resolution, where budgets are widest.
pub const SCREEN_FACTOR: f64 = 1.0;
/// Box half-width divided by this gives the length scale of non-Gaussian weights.
const BOX_SCALE_DIVISOR: f64 = 6.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetFamily {
    /// `[θ, r]`: `{x : (x − a)·u(θ) ≥ r·σ}`.
    TiltedHalfSpace,
    /// `[θ, r, width]`: `|(x − a)·u(θ) − r·σ| ≤ width·σ/2`.
    Strip,
    /// `[d, ρ, θ]`: balls of radius `ρ·σ` at `a ± (d·σ/2)·u(θ)`.
    TwoBalls,
    /// `[θ, opening, r]`: cone of the given opening around `u(θ)` with apex `a + r·σ·u(θ)`.
    Wedge,
}

impl SetFamily {
    pub const ALL: [SetFamily; 4] = [SetFamily::TiltedHalfSpace, SetFamily::Strip, SetFamily::TwoBalls, SetFamily::Wedge];

    /// Coarse parameter grid.
    pub fn grid(self) -> Vec<Vec<f64>> {
        let angles = |k: usize, span: f64| -> Vec<f64> { (0..k).map(|i| span * i as f64 / k as f64).collect() };
        let mut out = Vec::new();
        match self {
            SetFamily::TiltedHalfSpace => {
                for t in angles(16, TAU) {
                    for r in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                        out.push(vec![t, r]);
                    }
                }
            }
            SetFamily::Strip => {
                for t in angles(8, PI) {
                    for r in [-1.0, 0.0, 1.0] {
                        for wd in [0.5, 1.0, 2.0] {
                            out.push(vec![t, r, wd]);
                        }
                    }
                }
            }
            SetFamily::TwoBalls => {
                for d in [1.0, 2.0, 3.0] {
                    for rho in [0.5, 1.0] {
                        for t in angles(8, PI) {
                            out.push(vec![d, rho, t]);
                        }
                    }
                }
            }
            SetFamily::Wedge => {
                for t in angles(8, TAU) {
                    for op in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
                        for r in [-0.5, 0.0, 0.5] {
                            out.push(vec![t, op, r]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Initial pattern-search step per parameter.
    fn steps(self) -> Vec<f64> {
        match self {
            SetFamily::TiltedHalfSpace => vec![PI / 16.0, 0.25],
            SetFamily::Strip => vec![PI / 16.0, 0.5, 0.25],
            SetFamily::TwoBalls => vec![0.5, 0.25, PI / 16.0],
            SetFamily::Wedge => vec![PI / 8.0, PI / 12.0, 0.25],
        }
    }

    /// Clamp parameters to their admissible box.
    fn clamp(self, p: &mut [f64]) {
        match self {
            SetFamily::TiltedHalfSpace => p[1] = p[1].clamp(-2.5, 2.5),
            SetFamily::Strip => {
                p[1] = p[1].clamp(-2.5, 2.5);
                p[2] = p[2].clamp(0.1, 4.0);
            }
            SetFamily::TwoBalls => {
                p[0] = p[0].clamp(0.0, 5.0);
                p[1] = p[1].clamp(0.1, 2.0);
            }
            SetFamily::Wedge => {
                p[1] = p[1].clamp(0.1, PI - 0.1);
                p[2] = p[2].clamp(-2.5, 2.5);
            }
        }
    }

    /// The region for parameters `p`, centered at `a` with length scale `sigma`.
    pub fn region(self, p: &[f64], a: &[f64], sigma: f64) -> Region {
        let u = |t: f64| [t.cos(), t.sin()];
        let at = |s: f64, d: [f64; 2]| vec![a[0] + s * d[0], a[1] + s * d[1]];
        let off = |n: [f64; 2], base: &[f64]| n[0] * base[0] + n[1] * base[1];
        match self {
            SetFamily::TiltedHalfSpace => {
                let n = u(p[0]);
                Region::half_space(&n, off(n, a) + p[1] * sigma)
            }
            SetFamily::Strip => {
                let n = u(p[0]);
                let c = off(n, a) + p[1] * sigma;
                let hw = 0.5 * p[2] * sigma;
                Region::Strip { normal: n.to_vec(), lo: c - hw, hi: c + hw }
            }
            SetFamily::TwoBalls => {
                let d = u(p[2]);
                let s = 0.5 * p[0] * sigma;
                Region::union(vec![Region::ball(&at(s, d), p[1] * sigma), Region::ball(&at(-s, d), p[1] * sigma)])
            }
            SetFamily::Wedge => {
                let apex = at(p[2] * sigma, u(p[0]));
                let tilt = 0.5 * PI - 0.5 * p[1];
                let parts = [p[0] - tilt, p[0] + tilt]
                    .iter()
                    .map(|&t| {
                        let n = u(t);
                        Region::half_space(&n, off(n, &apex))
                    })
                    .collect();
                Region::Intersection { parts }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub families: Vec<SetFamily>,
    /// Symmetrization directions as angles.
    pub direction_angles: Vec<f64>,
    pub coarse_res: usize,
    /// Certification runs here and at twice this resolution.
    pub certify_res: usize,
    pub refine_rounds: usize,
    pub max_certify: usize,
    pub subcell: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            families: SetFamily::ALL.to_vec(),
            direction_angles: (0..16).map(|i| TAU * i as f64 / 16.0).collect(),
            coarse_res: 128,
            certify_res: 256,
            refine_rounds: 24,
            max_certify: 3,
            subcell: DEFAULT_SUBCELL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Found,
    NoneFound,
}

/// One comparison of `Per(E)` and `Per(S_v(E))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub resolution: usize,
    pub per_e: PerimeterEstimate,
    pub per_s: PerimeterEstimate,
    pub margin: f64,
    pub budget: f64,
    pub passed: bool,
}

impl Comparison {
    fn new(per_e: PerimeterEstimate, per_s: PerimeterEstimate) -> Self {
        let margin = per_s.value - per_e.value;
        let budget = per_e.error_budget + per_s.error_budget;
        Comparison {
            resolution: per_e.resolution,
            passed: margin > CERTIFY_FACTOR * budget,
            per_e,
            per_s,
            margin,
            budget,
        }
    }

    fn score(&self) -> f64 {
        self.margin - SCREEN_FACTOR * self.budget
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: SetFamily,
    pub params: Vec<f64>,
    pub v_angle: f64,
    /// `margin − budget` at the coarse resolution.
    pub score: f64,
}

impl Candidate {
    pub fn v(&self) -> Vec<f64> {
        vec![self.v_angle.cos(), self.v_angle.sin()]
    }

    fn key(&self) -> Vec<f64> {
        let mut k = self.params.clone();
        k.push(self.v_angle);
        k
    }
}

/// Higher score first, then family and the parameter tuple.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.family.cmp(&b.family))
        .then_with(|| {
            a.key().iter().zip(&b.key()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub candidate: Candidate,
    pub region: Region,
    pub v: Vec<f64>,
    /// Boundary estimator at the certification resolution and at twice it.
    pub bv: Vec<Comparison>,
    /// Minkowski estimator at twice the certification resolution.
    pub minkowski: Comparison,
    pub margin: f64,
    pub budget: f64,
    #[serde(skip)]
    pub set: Option<IndicatorSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub status: SearchStatus,
    pub record: Option<ViolationRecord>,
    /// Refined candidates in rank order.
    pub candidates: Vec<Candidate>,
    /// Candidates that entered certification and how far they got.
    pub rejected: Vec<String>,
    pub evaluations: usize,
    pub skipped: usize,
    pub center: Vec<f64>,
    pub sigma: f64,
}

/// Center and length scale that make the family translation-covariant.
pub fn family_frame(w: &WeightedDensity) -> (Vec<f64>, f64) {
    match w.gaussian_form() {
        Some(g) => {
            let rmin = g.rates.iter().copied().fold(f64::INFINITY, f64::min);
            (g.center.clone(), 1.0 / (2.0 * rmin).sqrt())
        }
        None => {
            let hw = (0..w.dim).map(|a| 0.5 * (w.hi[a] - w.lo[a])).fold(0.0, f64::max);
            (w.center(), hw / BOX_SCALE_DIVISOR)
        }
    }
}

struct Level<'a> {
    w: &'a WeightedDensity,
    geom: GridGeometry,
    sym: Symmetrizer<'a>,
    subcell: usize,
}

impl<'a> Level<'a> {
    fn new(w: &'a WeightedDensity, res: usize, subcell: usize) -> Result<Self> {
        let geom = GridGeometry::for_density(w, res)?;
        let sym = Symmetrizer::with_masses(w, MassGrid::new(w, &geom), SymmetrizeOptions::default());
        Ok(Level { w, geom, sym, subcell })
    }

    fn set(&self, region: &Region) -> Result<IndicatorSet> {
        rasterize_on(region, &self.geom, self.subcell)
    }

    fn compare(&self, e: &IndicatorSet, v: &[f64]) -> Result<(Comparison, IndicatorSet)> {
        let s = self.sym.apply(e, v)?;
        let c = Comparison::new(perimeter_bv(self.w, e)?, perimeter_bv(self.w, &s)?);
        Ok((c, s))
    }
}

fn unit(t: f64) -> Vec<f64> {
    vec![t.cos(), t.sin()]
}

pub fn violation_search(w: &WeightedDensity, opts: &SearchOptions) -> Result<SearchReport> {
    if w.dim != 2 {
        return Err(Error::Unsupported("violation search runs in two dimensions".into()));
    }
    if opts.families.is_empty() || opts.direction_angles.is_empty() {
        return Err(Error::InvalidArgument("empty family or direction grid".into()));
    }
    let (center, sigma) = family_frame(w);
    let coarse = Level::new(w, opts.coarse_res, opts.subcell)?;

    // Coarse scan: one rasterization per set, all directions.
    let sets: Vec<(SetFamily, Vec<f64>)> =
        opts.families.iter().flat_map(|&f| f.grid().into_iter().map(move |p| (f, p))).collect();
    let scanned: Vec<(Vec<Candidate>, usize, usize)> = sets
        .par_iter()
        .map(|(fam, p)| {
            let mut out = Vec::new();
            let (mut evals, mut skipped) = (0, 0);
            let e = match coarse.set(&fam.region(p, &center, sigma)) {
                Ok(e) if !e.is_constant() => e,
                _ => return (out, 0, opts.direction_angles.len()),
            };
            for &t in &opts.direction_angles {
                evals += 1;
                match coarse.compare(&e, &unit(t)) {
                    Ok((c, _)) => out.push(Candidate { family: *fam, params: p.clone(), v_angle: t, score: c.score() }),
                    Err(_) => skipped += 1,
                }
            }
            (out, evals, skipped)
        })
        .collect();
    let mut evaluations: usize = scanned.iter().map(|s| s.1).sum();
    let mut skipped: usize = scanned.iter().map(|s| s.2).sum();
    let mut pool: Vec<Candidate> = scanned.into_iter().flat_map(|s| s.0).collect();
    pool.sort_by(rank);

    // Refine the best few distinct (family, set) starts.
    let mut starts: Vec<Candidate> = Vec::new();
    for c in pool {
        if starts.len() == opts.max_certify {
            break;
        }
        if !starts.iter().any(|s| s.family == c.family && s.params == c.params) {
            starts.push(c);
        }
    }
    let eval = |fam: SetFamily, p: &[f64], t: f64| -> Option<f64> {
        let e = coarse.set(&fam.region(p, &center, sigma)).ok()?;
        if e.is_constant() {
            return None;
        }
        coarse.compare(&e, &unit(t)).ok().map(|(c, _)| c.score())
    };
    let mut candidates = Vec::with_capacity(starts.len());
    for start in starts {
        let mut best = start.clone();
        let mut steps = start.family.steps();
        steps.push(PI / 32.0);
        for _ in 0..opts.refine_rounds {
            let mut improved = false;
            for k in 0..steps.len() {
                for sgn in [-1.0, 1.0] {
                    let mut p = best.params.clone();
                    let mut t = best.v_angle;
                    if k < p.len() {
                        p[k] += sgn * steps[k];
                        start.family.clamp(&mut p);
                    } else {
                        t = (t + sgn * steps[k]).rem_euclid(TAU);
                    }
                    evaluations += 1;
                    match eval(start.family, &p, t) {
                        Some(s) if s > best.score => {
                            best = Candidate { family: start.family, params: p, v_angle: t, score: s };
                            improved = true;
                        }
                        Some(_) => {}
                        None => skipped += 1,
                    }
                }
            }
            if !improved {
                steps.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        candidates.push(best);
    }
    candidates.sort_by(rank);

    // Certification at the certification resolution and twice it.
    let mut rejected = Vec::new();
    let mut record = None;
    let mut levels: Option<(Level, Level)> = None;
    for c in &candidates {
        if c.score <= 0.0 {
            rejected.push(format!("{:?} {:?}: coarse score {:.3e} not positive", c.family, c.params, c.score));
            continue;
        }
        if levels.is_none() {
            levels = Some((
                Level::new(w, opts.certify_res, opts.subcell)?,
                Level::new(w, 2 * opts.certify_res, opts.subcell)?,
            ));
        }
        let (l1, l2) = levels.as_ref().unwrap();
        let region = c.family.region(&c.params, &center, sigma);
        let v = c.v();
        let attempt = (|| -> Result<std::result::Result<ViolationRecord, String>> {
            let (b1, _) = l1.compare(&l1.set(&region)?, &v)?;
            if !b1.passed {
                return Ok(Err(format!("bv at {}: margin {:.3e} vs budget {:.3e}", b1.resolution, b1.margin, b1.budget)));
            }
            let e2 = l2.set(&region)?;
            let (b2, s2) = l2.compare(&e2, &v)?;
            if !b2.passed {
                return Ok(Err(format!("bv at {}: margin {:.3e} vs budget {:.3e}", b2.resolution, b2.margin, b2.budget)));
            }
            let mk = Comparison::new(
                perimeter_minkowski(w, &e2, &default_schedule(&e2))?,
                perimeter_minkowski(w, &s2, &default_schedule(&s2))?,
            );
            if !mk.passed {
                return Ok(Err(format!("minkowski: margin {:.3e} vs budget {:.3e}", mk.margin, mk.budget)));
            }
            Ok(Ok(ViolationRecord {
                candidate: c.clone(),
                region: region.clone(),
                v: v.clone(),
                margin: b2.margin,
                budget: b2.budget,
                bv: vec![b1, b2],
                minkowski: mk,
                set: Some(e2),
            }))
        })();
        evaluations += 1;
        match attempt {
            Ok(Ok(r)) => {
                record = Some(r);
                break;
            }
            Ok(Err(why)) => rejected.push(format!("{:?} {:?}: {why}", c.family, c.params)),
            Err(e) => rejected.push(format!("{:?} {:?}: {e}", c.family, c.params)),
        }
    }
    let status = if record.is_some() { SearchStatus::Found } else { SearchStatus::NoneFound };
    Ok(SearchReport { status, record, candidates, rejected, evaluations, skipped, center, sigma })
}
