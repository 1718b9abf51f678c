//! Weighted measures `μ = f·Lⁿ` with evaluable densities.

mod density1d;
mod frame;
mod grid;
mod line;

pub use density1d::{Density1D, GaussianBump};
pub use frame::Frame;
pub use grid::GridField;
pub use line::{chord, LineDensity, NumericLine};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::numeric::{integrate_box, normal_pdf, normal_sf};
use crate::{Error, Result};

pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

/// Multiplicative Gaussian bump `1 + strength·exp(−|x − center|²/(2·width²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub strength: f64,
}

impl Bump {
    fn factor(&self, x: &[f64]) -> f64 {
        self.strength * (-dist2(x, &self.center) / (2.0 * self.width * self.width)).exp()
    }
}

/// The density families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Zero,
    /// `amp·exp(−rate·|x − center|²)`.
    IsotropicGaussian { amp: f64, rate: f64, center: Vec<f64> },
    /// `amp·exp(−Σ rates_i·(x_i − center_i)²)`.
    AnisotropicGaussian { amp: f64, rates: Vec<f64>, center: Vec<f64> },
    /// `Π f_i(x_i)`.
    Product(Vec<Density1D>),
    /// Product of logistic factors with the given scales.
    LogisticProduct { scales: Vec<f64> },
    GridSampled(GridField),
    /// `base·(1 + bump)`.
    Perturbed { base: Box<DensityKind>, bump: Bump },
}

/// `amp·exp(−Σ rates_i (x_i − center_i)²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianForm {
    pub amp: f64,
    pub rates: Vec<f64>,
    pub center: Vec<f64>,
}

impl GaussianForm {
    pub fn total(&self) -> f64 {
        self.amp * self.rates.iter().map(|c| (PI / c).sqrt()).product::<f64>()
    }

    /// Standard deviation of `x·v` under the normalized law.
    pub fn sigma_along(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.rates).map(|(a, c)| a * a / (2.0 * c)).sum::<f64>().sqrt()
    }

    /// `μ(H(v, r))`.
    pub fn halfspace_mass(&self, v: &[f64], r: f64) -> f64 {
        let s = self.sigma_along(v);
        let m = dot(&self.center, v);
        self.total() * normal_sf((r - m) / s)
    }

    /// `∫_{x·v = r} f dH^{n−1}`, the density of `x·v` at `r`.
    pub fn halfspace_perimeter(&self, v: &[f64], r: f64) -> f64 {
        if !r.is_finite() {
            return 0.0;
        }
        let s = self.sigma_along(v);
        let m = dot(&self.center, v);
        self.total() * normal_pdf((r - m) / s) / s
    }
}

/// Mass inside the truncation box plus the certified bound on the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub box_mass: f64,
    pub tail_bound: f64,
    /// Best estimate of `μ(ℝⁿ)`.
    pub total: f64,
}

/// A density on `ℝⁿ` together with its truncation box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDensity {
    pub kind: DensityKind,
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub tail_tol: f64,
    /// Certified `μ(ℝⁿ \ box)` (declared zero for grid kinds).
    pub tail_bound: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl DensityKind {
    fn check_dim(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            DensityKind::Zero => Ok(()),
            DensityKind::IsotropicGaussian { amp, rate, center } => {
                if center.len() != n {
                    return bad(format!("center has {} coordinates, dim is {n}", center.len()));
                }
                if !(*amp >= 0.0 && *rate > 0.0) {
                    return bad("gaussian needs amp >= 0 and rate > 0".into());
                }
                Ok(())
            }
            DensityKind::AnisotropicGaussian { amp, rates, center } => {
                if center.len() != n || rates.len() != n {
                    return bad(format!("anisotropic gaussian needs {n} rates and center coordinates"));
                }
                if !(*amp >= 0.0) || rates.iter().any(|c| !(*c > 0.0)) {
                    return bad("gaussian needs amp >= 0 and positive rates".into());
                }
                Ok(())
            }
            DensityKind::Product(fs) => {
                if fs.len() != n {
                    return bad(format!("product has {} factors, dim is {n}", fs.len()));
                }
                fs.iter().try_for_each(Density1D::validate)
            }
            DensityKind::LogisticProduct { scales } => {
                if scales.len() != n || scales.iter().any(|s| !(*s > 0.0)) {
                    return bad(format!("logistic product needs {n} positive scales"));
                }
                Ok(())
            }
            DensityKind::GridSampled(g) => {
                if g.dim() != n {
                    return bad("grid field dimension mismatch".into());
                }
                Ok(())
            }
            DensityKind::Perturbed { base, bump } => {
                if bump.center.len() != n || !(bump.width > 0.0) || !(bump.strength.abs() < 1.0) {
                    return bad("bump needs matching center, width > 0 and |strength| < 1".into());
                }
                if matches!(**base, DensityKind::GridSampled(_)) {
                    return bad("perturbed grid densities are not supported".into());
                }
                base.check_dim(n)
            }
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DensityKind::Zero => 0.0,
            DensityKind::IsotropicGaussian { amp, rate, center } => amp * (-rate * dist2(x, center)).exp(),
            DensityKind::AnisotropicGaussian { amp, rates, center } => {
                let q: f64 = x
                    .iter()
                    .zip(center)
                    .zip(rates)
                    .map(|((xi, ai), ci)| ci * (xi - ai) * (xi - ai))
                    .sum();
                amp * (-q).exp()
            }
            DensityKind::Product(fs) => fs.iter().zip(x).map(|(f, t)| f.eval(*t)).product(),
            DensityKind::LogisticProduct { scales } => scales
                .iter()
                .zip(x)
                .map(|(s, t)| Density1D::Logistic { scale: *s, center: 0.0 }.eval(*t))
                .product(),
            DensityKind::GridSampled(g) => g.eval(x),
            DensityKind::Perturbed { base, bump } => base.eval(x) * (1.0 + bump.factor(x)),
        }
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        Ok(match self {
            DensityKind::Zero => vec![0.0; n],
            DensityKind::IsotropicGaussian { rate, center, .. } => {
                let f = self.eval(x);
                (0..n).map(|i| -2.0 * rate * (x[i] - center[i]) * f).collect()
            }
            DensityKind::AnisotropicGaussian { rates, center, .. } => {
                let f = self.eval(x);
                (0..n).map(|i| -2.0 * rates[i] * (x[i] - center[i]) * f).collect()
            }
            DensityKind::Product(fs) => product_grad(fs, x),
            DensityKind::LogisticProduct { scales } => {
                let fs: Vec<Density1D> = scales.iter().map(|s| Density1D::Logistic { scale: *s, center: 0.0 }).collect();
                product_grad(&fs, x)
            }
            DensityKind::GridSampled(g) => g.grad(x)?,
            DensityKind::Perturbed { base, bump } => {
                let b = base.eval(x);
                let gb = base.grad(x)?;
                let p = bump.factor(x);
                let s2 = bump.width * bump.width;
                (0..n)
                    .map(|i| gb[i] * (1.0 + p) - b * p * (x[i] - bump.center[i]) / s2)
                    .collect()
            }
        })
    }

    fn gaussian_form(&self) -> Option<GaussianForm> {
        match self {
            DensityKind::IsotropicGaussian { amp, rate, center } => Some(GaussianForm {
                amp: *amp,
                rates: vec![*rate; center.len()],
                center: center.clone(),
            }),
            DensityKind::AnisotropicGaussian { amp, rates, center } => Some(GaussianForm {
                amp: *amp,
                rates: rates.clone(),
                center: center.clone(),
            }),
            _ => None,
        }
    }

    fn factors(&self) -> Option<(f64, Vec<Density1D>)> {
        if let Some(g) = self.gaussian_form() {
            let fs = g
                .rates
                .iter()
                .zip(&g.center)
                .map(|(c, a)| Density1D::Gaussian { amp: 1.0, rate: *c, center: *a })
                .collect();
            return Some((g.amp, fs));
        }
        match self {
            DensityKind::Product(fs) => Some((1.0, fs.clone())),
            DensityKind::LogisticProduct { scales } => Some((
                1.0,
                scales.iter().map(|s| Density1D::Logistic { scale: *s, center: 0.0 }).collect(),
            )),
            _ => None,
        }
    }

    /// Density positive on all of `ℝⁿ`.
    fn positive(&self) -> bool {
        match self {
            DensityKind::IsotropicGaussian { amp, .. } | DensityKind::AnisotropicGaussian { amp, .. } => *amp > 0.0,
            DensityKind::LogisticProduct { .. } => true,
            DensityKind::Product(fs) => fs.iter().all(|f| {
                let (a, b) = f.support();
                a == f64::NEG_INFINITY && b == f64::INFINITY && f.total() > 0.0
            }),
            DensityKind::Perturbed { base, .. } => base.positive(),
            DensityKind::Zero | DensityKind::GridSampled(_) => false,
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            DensityKind::Zero => true,
            DensityKind::IsotropicGaussian { amp, .. } | DensityKind::AnisotropicGaussian { amp, .. } => *amp == 0.0,
            DensityKind::Product(fs) => fs.iter().any(|f| f.total() == 0.0),
            DensityKind::LogisticProduct { .. } => false,
            DensityKind::GridSampled(g) => g.max_value() == 0.0,
            DensityKind::Perturbed { base, .. } => base.is_zero(),
        }
    }

    /// Exact total mass where available.
    fn analytic_total(&self) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        if let Some((s, fs)) = self.factors() {
            return Some(s * fs.iter().map(Density1D::total).product::<f64>());
        }
        match self {
            DensityKind::GridSampled(g) => Some(g.integral()),
            DensityKind::Perturbed { base, bump } => {
                let g = base.gaussian_form()?;
                let b = 1.0 / (2.0 * bump.width * bump.width);
                let mut cross = g.amp;
                for i in 0..g.rates.len() {
                    let c = g.rates[i];
                    let d = g.center[i] - bump.center[i];
                    cross *= (PI / (c + b)).sqrt() * (-c * b * d * d / (c + b)).exp();
                }
                Some(g.total() + bump.strength * cross)
            }
            _ => None,
        }
    }

    /// Certified `μ(ℝⁿ \ [lo, hi])`.
    fn tail_outside(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if let Some((s, fs)) = self.factors() {
            let total = s * fs.iter().map(Density1D::total).product::<f64>();
            let mut log_in = 0.0;
            for (i, f) in fs.iter().enumerate() {
                let frac = (f.cdf(lo[i]) + f.sf(hi[i])) / f.total();
                log_in += (-frac.min(1.0)).ln_1p();
            }
            return Ok(total * -log_in.exp_m1());
        }
        match self {
            DensityKind::GridSampled(g) => {
                if (0..g.dim()).all(|a| lo[a] <= g.lo[a] && hi[a] >= g.hi[a]) {
                    Ok(0.0)
                } else {
                    Err(Error::Unsupported("truncation box must contain the sampled grid".into()))
                }
            }
            DensityKind::Perturbed { base, bump } => Ok(base.tail_outside(lo, hi)? * (1.0 + bump.strength.max(0.0))),
            _ => Err(Error::Unsupported("no tail certificate for this density".into())),
        }
    }

    /// Smallest cube with certified tail at most `tail_tol`.
    fn auto_box(&self, n: usize, tail_tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_zero() {
            return Ok((vec![-1.0; n], vec![1.0; n]));
        }
        let (lo, hi) = match self {
            DensityKind::GridSampled(g) => (g.lo.clone(), g.hi.clone()),
            DensityKind::Perturbed { base, bump } => return base.auto_box(n, tail_tol / (1.0 + bump.strength.max(0.0))),
            _ => {
                let (s, fs) = self
                    .factors()
                    .ok_or_else(|| Error::Unsupported("no automatic box for this density".into()))?;
                let total = s * fs.iter().map(Density1D::total).product::<f64>();
                // Per-side fraction; the product form of the tail makes this conservative.
                let frac = tail_tol / (2.0 * n as f64 * total.max(f64::MIN_POSITIVE)) * 0.999;
                let mut lo = Vec::with_capacity(n);
                let mut hi = Vec::with_capacity(n);
                for f in &fs {
                    let (a, b) = f.core_interval(frac.min(0.25) * f.total());
                    lo.push(a);
                    hi.push(b);
                }
                (lo, hi)
            }
        };
        let width = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let lo2: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b) - 0.5 * width).collect();
        let hi2: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b) + 0.5 * width).collect();
        Ok((lo2, hi2))
    }
}

fn product_grad(fs: &[Density1D], x: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = fs.iter().zip(x).map(|(f, t)| f.eval(*t)).collect();
    (0..fs.len())
        .map(|i| {
            let mut g = fs[i].deriv(x[i]);
            for (j, v) in vals.iter().enumerate() {
                if j != i {
                    g *= v;
                }
            }
            g
        })
        .collect()
}

impl WeightedDensity {
    /// Density with an automatically chosen cubic truncation box and the
    /// default tail tolerance.
    pub fn new(kind: DensityKind, dim: usize) -> Result<Self> {
        Self::with_tail_tol(kind, dim, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(kind: DensityKind, dim: usize, tail_tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        kind.check_dim(dim)?;
        let (lo, hi) = kind.auto_box(dim, tail_tol)?;
        Self::with_box(kind, lo, hi, tail_tol)
    }

    /// Density with an explicit truncation box; fails if the certified
    /// tail exceeds `tail_tol`.
    pub fn with_box(kind: DensityKind, lo: Vec<f64>, hi: Vec<f64>, tail_tol: f64) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || hi.len() != dim || lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidArgument("truncation box needs lo < hi on every axis".into()));
        }
        kind.check_dim(dim)?;
        let tail_bound = kind.tail_outside(&lo, &hi)?;
        if tail_bound > tail_tol {
            return Err(Error::TailBoundExceeded { certified: tail_bound, tail_tol });
        }
        Ok(WeightedDensity { kind, dim, lo, hi, tail_tol, tail_bound })
    }

    /// `(2π)^{−n/2} e^{−|x|²/2}`.
    pub fn standard_gaussian(n: usize) -> Self {
        Self::new(
            DensityKind::IsotropicGaussian {
                amp: (2.0 * PI).powf(-(n as f64) / 2.0),
                rate: 0.5,
                center: vec![0.0; n],
            },
            n,
        )
        .expect("standard gaussian is valid")
    }

    pub fn logistic(n: usize) -> Self {
        Self::new(DensityKind::LogisticProduct { scales: vec![1.0; n] }, n).expect("logistic is valid")
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.kind.eval(x)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.kind.grad(x)
    }

    pub fn gaussian_form(&self) -> Option<GaussianForm> {
        self.kind.gaussian_form()
    }

    /// `(scale, factors)` with `f(x) = scale·Π factors_i(x_i)`.
    pub fn factors(&self) -> Option<(f64, Vec<Density1D>)> {
        self.kind.factors()
    }

    pub fn is_zero(&self) -> bool {
        self.kind.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.kind.positive()
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.kind, DensityKind::IsotropicGaussian { .. })
    }

    pub fn total_mass(&self) -> MassReport {
        if self.is_zero() {
            return MassReport { box_mass: 0.0, tail_bound: 0.0, total: 0.0 };
        }
        if let Some((s, fs)) = self.factors() {
            let box_mass = s * fs
                .iter()
                .enumerate()
                .map(|(i, f)| f.mass_between(self.lo[i], self.hi[i]))
                .product::<f64>();
            let total = self.kind.analytic_total().unwrap_or(box_mass);
            return MassReport { box_mass, tail_bound: self.tail_bound, total };
        }
        let box_mass = match &self.kind {
            DensityKind::GridSampled(g) => g.integral(),
            _ => {
                let scale = self.eval(&self.center()).max(1e-300);
                integrate_box(&|x: &[f64]| self.eval(x), &self.lo, &self.hi, 1e-12 * scale)
            }
        };
        let total = self.kind.analytic_total().unwrap_or(box_mass + 0.5 * self.tail_bound);
        MassReport { box_mass, tail_bound: self.tail_bound, total }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Restriction of `f` to the line `x0 + t·d` (`d` a unit vector).
    pub fn line(&self, x0: &[f64], d: &[f64]) -> LineDensity<'_> {
        if self.is_zero() {
            return LineDensity::Zero;
        }
        if let Some(g) = self.gaussian_form() {
            let mut alpha = 0.0;
            let mut beta = 0.0;
            let mut gamma = 0.0;
            for i in 0..self.dim {
                let u = x0[i] - g.center[i];
                alpha += g.rates[i] * d[i] * d[i];
                beta += g.rates[i] * d[i] * u;
                gamma += g.rates[i] * u * u;
            }
            return LineDensity::Closed {
                d: Density1D::Gaussian { amp: 1.0, rate: alpha, center: -beta / alpha },
                scale: g.amp * (-(gamma - beta * beta / alpha)).exp(),
            };
        }
        if let Some((s, fs)) = self.factors() {
            if let Some(k) = axis_of(d) {
                let sign = d[k].signum();
                if let Some(dk) = fs[k].affine(x0[k], sign) {
                    let mut scale = s;
                    for (i, f) in fs.iter().enumerate() {
                        if i != k {
                            scale *= f.eval(x0[i]);
                        }
                    }
                    return LineDensity::Closed { d: dk, scale };
                }
            }
        }
        match chord(x0, d, &self.lo, &self.hi) {
            Some((t0, t1)) => LineDensity::Numeric(NumericLine::new(self, x0, d, t0, t1, self.is_positive())),
            None => LineDensity::Zero,
        }
    }

    /// Line density of the fiber over `xp` in `frame`.
    pub fn fiber(&self, frame: &Frame, xp: &[f64]) -> LineDensity<'_> {
        let x0 = frame.point(xp, 0.0);
        self.line(&x0, frame.axis_vector())
    }

    /// `∫_{−∞}^t f(xp + s·e_axis) ds`.
    pub fn fiber_cdf(&self, frame: &Frame, xp: &[f64], t: f64) -> f64 {
        self.fiber(frame, xp).cdf(t)
    }

    /// Smallest `c` with fiber mass of `[c, ∞)` equal to `p`.
    pub fn fiber_quantile(&self, frame: &Frame, xp: &[f64], p: f64) -> Result<f64> {
        let line = self.fiber(frame, xp);
        let tot = line.total();
        if p < 0.0 || p > tot * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::OutOfRange { requested: p, available: tot });
        }
        Ok(line.quantile_upper(p))
    }
}

/// Index `k` if `d = ±e_k`.
pub(crate) fn axis_of(d: &[f64]) -> Option<usize> {
    let mut found = None;
    for (i, v) in d.iter().enumerate() {
        if v.abs() > 1.0 - 1e-15 {
            found = Some(i);
        } else if v.abs() > 1e-15 {
            return None;
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gaussian_values() {
        let w = WeightedDensity::standard_gaussian(2);
        assert!((w.eval(&[0.0, 0.0]) - 1.0 / (2.0 * PI)).abs() < 1e-16);
        let m = w.total_mass();
        assert!((m.total - 1.0).abs() < 1e-14);
        assert!(m.tail_bound <= 1e-9);
        assert!((m.box_mass + m.tail_bound - 1.0).abs() < 1e-13);
    }

    #[test]
    fn explicit_box_tail_check() {
        let k = WeightedDensity::standard_gaussian(2).kind;
        let e = WeightedDensity::with_box(k.clone(), vec![-6.0; 2], vec![6.0; 2], 1e-9);
        assert!(matches!(e, Err(Error::TailBoundExceeded { .. })));
        assert!(WeightedDensity::with_box(k, vec![-6.0; 2], vec![6.0; 2], 1e-8).is_ok());
    }

    #[test]
    fn anisotropic_gradient() {
        let w = WeightedDensity::new(
            DensityKind::AnisotropicGaussian { amp: 1.0, rates: vec![1.0, 4.0], center: vec![0.0, 0.0] },
            2,
        )
        .unwrap();
        let f = w.eval(&[1.0, 0.0]);
        let g = w.grad(&[1.0, 0.0]).unwrap();
        assert!((g[0] + 2.0 * f).abs() < 1e-16 && g[1] == 0.0);
    }

    #[test]
    fn zero_density() {
        let w = WeightedDensity::new(DensityKind::Zero, 2).unwrap();
        assert_eq!(w.eval(&[0.3, 0.1]), 0.0);
        assert_eq!(w.total_mass().total, 0.0);
    }

    #[test]
    fn fiber_cdf_of_standard_gaussian() {
        let w = WeightedDensity::standard_gaussian(2);
        let fr = Frame::identity(2, 1);
        let v = w.fiber_cdf(&fr, &[0.0], 0.0);
        assert!((v - 0.5 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(w.fiber_cdf(&fr, &[0.0], f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn numeric_line_matches_closed_form() {
        let base = DensityKind::IsotropicGaussian { amp: 1.0, rate: 0.5, center: vec![0.0, 0.0] };
        let w = WeightedDensity::new(
            DensityKind::Perturbed {
                base: Box::new(base),
                bump: Bump { center: vec![0.5, 0.5], width: 1e6, strength: 0.0 },
            },
            2,
        )
        .unwrap();
        let d = [0.6, 0.8];
        let line = w.line(&[0.3, -0.2], &d);
        assert!(matches!(line, LineDensity::Numeric(_)));
        let g = WeightedDensity::new(DensityKind::IsotropicGaussian { amp: 1.0, rate: 0.5, center: vec![0.0, 0.0] }, 2).unwrap();
        let exact = g.line(&[0.3, -0.2], &d);
        for &t in &[-1.0, 0.0, 0.7, 2.0] {
            assert!((line.cdf(t) - exact.cdf(t)).abs() < 1e-9);
        }
        let c = line.quantile_upper(0.3);
        assert!((exact.sf(c) - 0.3).abs() < 1e-8);
    }

    #[test]
    fn perturbed_total_closed_form() {
        let w = WeightedDensity::new(
            DensityKind::Perturbed {
                base: Box::new(DensityKind::IsotropicGaussian { amp: 1.0, rate: 0.5, center: vec![0.0, 0.0] }),
                bump: Bump { center: vec![0.5, -0.3], width: 0.7, strength: 0.4 },
            },
            2,
        )
        .unwrap();
        let m = w.total_mass();
        assert!((m.box_mass - m.total).abs() < 1e-8, "{m:?}");
    }
}
