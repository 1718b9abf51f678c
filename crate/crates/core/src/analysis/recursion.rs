//! Functional equations for the log-profile `g` of a PS density and the
//! quadratic fit `g(α) ≈ −cα²`.

use serde::{Deserialize, Serialize};

use crate::weights::WeightedDensity;
use crate::{Error, Result};

/// Absolute residual tolerance at unit scale, multiplied by `max(1, max|g|)`.
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const EVEN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub alphas: Vec<f64>,
    /// `g(α) − g(0)` at `alphas`.
    pub samples: Vec<f64>,
    pub k_list: Vec<u32>,
    /// Least-squares `c` in `g(α) ≈ −cα²`.
    pub c: f64,
    /// `max |2g(√k α) + 2g(α) − g((√k−1)α) − g((√k+1)α)|`.
    pub recursion_residual: f64,
    /// `max |g(kα) − k²g(α)|`.
    pub base_residual: f64,
    /// `max |g(α) + cα²|`.
    pub fit_residual: f64,
    pub tol: f64,
    /// All residuals within `tol`.
    pub accepted: bool,
    /// `c > 0`, otherwise `e^g` is not integrable.
    pub integrable: bool,
}

/// Default grid `α ∈ (0, 1]`.
pub fn default_alpha_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / count as f64).collect()
}

pub fn log_profile_recursion_check<G: Fn(f64) -> f64>(g: G, k_list: &[u32], alpha_grid: &[f64]) -> Result<QuadraticFit> {
    if alpha_grid.is_empty() || k_list.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid or k list".into()));
    }
    if k_list.contains(&0) {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let g0 = g(0.0);
    let gs = |a: f64| g(a) - g0;
    let mut asym: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for &a in alpha_grid {
        let (p, m) = (gs(a), gs(-a));
        if !p.is_finite() || !m.is_finite() {
            return Err(Error::InvalidArgument(format!("g is not finite at ±{a}")));
        }
        asym = asym.max((p - m).abs());
        scale = scale.max(p.abs());
    }
    if asym > EVEN_TOL * scale {
        return Err(Error::NotEven(asym));
    }
    let samples: Vec<f64> = alpha_grid.iter().map(|&a| gs(a)).collect();
    let mut recursion: f64 = 0.0;
    let mut base: f64 = 0.0;
    for &k in k_list {
        let kf = k as f64;
        let r = kf.sqrt();
        for (&a, &ga) in alpha_grid.iter().zip(&samples) {
            let lhs = 2.0 * gs(r * a) + 2.0 * ga;
            let rhs = gs((r - 1.0) * a) + gs((r + 1.0) * a);
            recursion = recursion.max((lhs - rhs).abs());
            base = base.max((gs(kf * a) - kf * kf * ga).abs());
            scale = scale.max(gs(kf * a).abs()).max(gs((r + 1.0) * a).abs());
        }
    }
    let (num, den) = alpha_grid
        .iter()
        .zip(&samples)
        .fold((0.0, 0.0), |(n, d), (&a, &ga)| (n + ga * a * a, d + a.powi(4)));
    let c = -num / den;
    let fit = alpha_grid.iter().zip(&samples).map(|(&a, &ga)| (ga + c * a * a).abs()).fold(0.0, f64::max);
    let tol = RESIDUAL_TOL * scale;
    let ok = |r: f64| r.is_finite() && r <= tol;
    Ok(QuadraticFit {
        alphas: alpha_grid.to_vec(),
        samples,
        k_list: k_list.to_vec(),
        c,
        recursion_residual: recursion,
        base_residual: base,
        fit_residual: fit,
        tol,
        accepted: ok(recursion) && ok(base) && ok(fit),
        integrable: c > 0.0,
    })
}

/// `α ↦ ln f(center + α·dir)` for a unit direction `dir`.
pub fn log_profile<'a>(w: &'a WeightedDensity, center: &'a [f64], dir: &'a [f64]) -> impl Fn(f64) -> f64 + 'a {
    move |a| {
        let x: Vec<f64> = center.iter().zip(dir).map(|(c, d)| c + a * d).collect();
        w.eval(&x).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::DensityKind;

    #[test]
    fn half_square_satisfies_both_relations() {
        let f = log_profile_recursion_check(|a| -0.5 * a * a, &[2], &default_alpha_grid(50)).unwrap();
        assert!(f.accepted && f.integrable);
        assert!((f.c - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gaussian_profile_recovers_rate() {
        let w = WeightedDensity::new(
            DensityKind::IsotropicGaussian { amp: 2.0, rate: 0.7, center: vec![1.0, -0.5] },
            2,
        )
        .unwrap();
        let center = [1.0, -0.5];
        let dir = [0.6, 0.8];
        let ks: Vec<u32> = (1..=9).collect();
        let f = log_profile_recursion_check(log_profile(&w, &center, &dir), &ks, &default_alpha_grid(40)).unwrap();
        assert!((f.c - 0.7).abs() < 1e-6, "{}", f.c);
        assert!(f.recursion_residual <= 1e-8 && f.base_residual <= 1e-8);
        assert!(f.accepted && f.integrable);
    }

    #[test]
    fn quartic_is_rejected() {
        let f = log_profile_recursion_check(|a| -a.powi(4), &[2], &[1.0]).unwrap();
        // 2·(−4) + 2·(−1) against −((√2−1)⁴ + (√2+1)⁴) = −34.
        assert!((f.recursion_residual - 24.0).abs() < 1e-9);
        assert!(!f.accepted);
    }

    #[test]
    fn odd_profile_is_not_even() {
        assert!(matches!(
            log_profile_recursion_check(|a| a - a * a, &[2], &[0.5, 1.0]),
            Err(Error::NotEven(_))
        ));
    }
}
