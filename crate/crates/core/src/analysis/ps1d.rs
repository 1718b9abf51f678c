//! One-dimensional PS checks: symmetry about the median and
//! subadditivity of `I = f ∘ F⁻¹`.

use serde::{Deserialize, Serialize};

use crate::weights::Density1D;
use crate::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-6;
pub const SUBADDITIVITY_TOL: f64 = 1e-9;
pub const DEFAULT_PQ_GRID: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub verdict: Verdict,
    pub median: f64,
    /// Offset `t` with the largest relative deviation `|f(m−t) − f(m+t)|/max`.
    pub worst_t: f64,
    pub worst_deviation: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub verdict: Verdict,
    /// Pair `(p, q)` maximizing `I(p+q) − I(p) − I(q)`.
    pub worst_p: f64,
    pub worst_q: f64,
    pub worst_violation: f64,
    pub grid: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PSReport {
    pub median: f64,
    pub symmetry: SymmetryReport,
    pub subadditivity: SubadditivityReport,
    pub verdict: Verdict,
}

/// Reject densities that vanish between two regions of positive density.
fn check_no_interior_zero(w: &Density1D, lo: f64, hi: f64) -> Result<()> {
    let n = 4000;
    let mut seen_positive = false;
    let mut gap = false;
    for i in 0..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let f = w.eval(t);
        if f > 0.0 {
            if gap {
                return Err(Error::Unsupported("density has an interior zero".into()));
            }
            seen_positive = true;
        } else if seen_positive {
            gap = true;
        }
    }
    Ok(())
}

/// `f(m − t) = f(m + t)` around the median `m`.
pub fn symmetry_test_1d(w: &Density1D) -> Result<SymmetryReport> {
    symmetry_test_1d_tol(w, SYMMETRY_TOL)
}

pub fn symmetry_test_1d_tol(w: &Density1D, tol: f64) -> Result<SymmetryReport> {
    w.validate()?;
    let total = w.total();
    if !(total > 0.0) {
        return Err(Error::Unsupported("zero density".into()));
    }
    let (lo, hi) = w.core_interval(1e-12 * total);
    check_no_interior_zero(w, lo, hi)?;
    let m = w.height_lower(0.5 * total);
    let reach = (m - lo).min(hi - m).max(0.0);
    let n = 2000;
    let mut worst = (0.0, 0.0);
    for i in 1..=n {
        let t = reach * i as f64 / n as f64;
        let (a, b) = (w.eval(m - t), w.eval(m + t));
        let scale = a.max(b);
        if scale <= 0.0 {
            continue;
        }
        let dev = (a - b).abs() / scale;
        if dev > worst.1 {
            worst = (t, dev);
        }
    }
    let verdict = if worst.1 <= tol { Verdict::Pass } else { Verdict::Fail };
    Ok(SymmetryReport { verdict, median: m, worst_t: worst.0, worst_deviation: worst.1, tol })
}

/// Scan `I(p+q) ≤ I(p) + I(q)` on the triangular grid `p = i·T/N`,
/// `q = j·T/N`, `i + j < N`.
pub fn i_subadditivity_test(w: &Density1D, grid: usize) -> Result<SubadditivityReport> {
    w.validate()?;
    if grid < 2 {
        return Err(Error::InvalidArgument("grid must have at least two cells".into()));
    }
    let total = w.total();
    if !(total > 0.0) {
        return Err(Error::Unsupported("zero density".into()));
    }
    let (lo, hi) = w.core_interval(1e-12 * total);
    check_no_interior_zero(w, lo, hi)?;
    let i_at: Vec<f64> = (0..=grid)
        .map(|k| {
            let p = total * k as f64 / grid as f64;
            if k == 0 || k == grid {
                0.0
            } else {
                w.eval(w.height_lower(p))
            }
        })
        .collect();
    let mut worst = (0usize, 0usize, f64::NEG_INFINITY);
    for i in 0..grid {
        for j in 0..(grid - i) {
            let viol = i_at[i + j] - i_at[i] - i_at[j];
            if viol > worst.2 {
                worst = (i, j, viol);
            }
        }
    }
    let verdict = if worst.2 <= SUBADDITIVITY_TOL { Verdict::Pass } else { Verdict::Fail };
    let step = total / grid as f64;
    Ok(SubadditivityReport {
        verdict,
        worst_p: worst.0 as f64 * step,
        worst_q: worst.1 as f64 * step,
        worst_violation: worst.2,
        grid,
        tol: SUBADDITIVITY_TOL,
    })
}

pub fn ps_test_1d(w: &Density1D, grid: usize) -> Result<PSReport> {
    let symmetry = symmetry_test_1d(w)?;
    let subadditivity = i_subadditivity_test(w, grid)?;
    let verdict = if symmetry.verdict == Verdict::Pass && subadditivity.verdict == Verdict::Pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(PSReport { median: symmetry.median, symmetry, subadditivity, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::GaussianBump;

    #[test]
    fn logistic_passes_both() {
        let r = ps_test_1d(&Density1D::logistic(), DEFAULT_PQ_GRID).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.median.abs() < 1e-12);
        // I(p) = p(1 − p): I(p+q) − I(p) − I(q) = −2pq, largest (zero) on the axes.
        assert!(r.subadditivity.worst_violation.abs() < 1e-12);
    }

    #[test]
    fn one_sided_exponential_is_asymmetric() {
        let r = symmetry_test_1d(&Density1D::OneSidedExponential { rate: 1.0 }).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!((r.median - 2f64.ln()).abs() < 1e-12);
        // The deviation 1 − e^{−2t} grows up to the support edge at t = ln 2.
        assert!((r.worst_t - 2f64.ln()).abs() < 1e-9);
        assert!(r.worst_deviation >= 0.75);
    }

    #[test]
    fn asymmetric_mixture_violates_subadditivity() {
        let d = Density1D::Mixture {
            components: vec![
                GaussianBump { amp: 1.0, rate: 0.5, center: -3.0 },
                GaussianBump { amp: 1.0, rate: 10.0, center: 3.0 },
            ],
        };
        let r = i_subadditivity_test(&d, DEFAULT_PQ_GRID).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        // Same verdict at doubled grid.
        assert_eq!(i_subadditivity_test(&d, 2 * DEFAULT_PQ_GRID).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn interior_zero_is_unsupported() {
        // Narrow bumps far apart: the density underflows to zero between them.
        let d = Density1D::Mixture {
            components: vec![
                GaussianBump { amp: 1.0, rate: 10.0, center: -20.0 },
                GaussianBump { amp: 1.0, rate: 10.0, center: 20.0 },
            ],
        };
        assert!(matches!(symmetry_test_1d(&d), Err(Error::Unsupported(_))));
        assert!(matches!(i_subadditivity_test(&d, 50), Err(Error::Unsupported(_))));
    }
}
