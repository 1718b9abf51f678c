use serde::{Deserialize, Serialize};

use crate::numeric::{bisect_first_true, normal_cdf, normal_isf, normal_sf};

/// One Gaussian bump `amp·exp(−rate·(t − center)²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amp: f64,
    pub rate: f64,
    pub center: f64,
}

impl GaussianBump {
    fn sigma(&self) -> f64 {
        (0.5 / self.rate).sqrt()
    }
    fn total(&self) -> f64 {
        self.amp * (std::f64::consts::PI / self.rate).sqrt()
    }
    fn eval(&self, t: f64) -> f64 {
        let d = t - self.center;
        self.amp * (-self.rate * d * d).exp()
    }
    fn cdf(&self, t: f64) -> f64 {
        self.total() * normal_cdf((t - self.center) / self.sigma())
    }
    fn sf(&self, t: f64) -> f64 {
        self.total() * normal_sf((t - self.center) / self.sigma())
    }
}

/// A one-dimensional density with closed-form CDF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Density1D {
    /// `amp·exp(−rate·(t − center)²)`.
    Gaussian { amp: f64, rate: f64, center: f64 },
    /// `1/(s·(e^{u/2} + e^{−u/2})²)` with `u = (t − center)/s`.
    Logistic {
        scale: f64,
        #[serde(default)]
        center: f64,
    },
    /// `height` on `[lo, hi]`, zero elsewhere.
    Uniform { lo: f64, hi: f64, height: f64 },
    /// `rate·exp(−rate·t)` for `t > 0`.
    OneSidedExponential { rate: f64 },
    /// Sum of Gaussian bumps.
    Mixture { components: Vec<GaussianBump> },
}

impl Density1D {
    pub fn standard_gaussian() -> Self {
        Density1D::Gaussian {
            amp: 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            rate: 0.5,
            center: 0.0,
        }
    }

    pub fn logistic() -> Self {
        Density1D::Logistic { scale: 1.0, center: 0.0 }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::InvalidArgument(m.to_string()));
        match self {
            Density1D::Gaussian { amp, rate, .. } => {
                if !(*amp >= 0.0 && *rate > 0.0) {
                    return bad("gaussian needs amp >= 0 and rate > 0");
                }
            }
            Density1D::Logistic { scale, .. } => {
                if !(*scale > 0.0) {
                    return bad("logistic scale must be positive");
                }
            }
            Density1D::Uniform { lo, hi, height } => {
                if !(hi > lo && *height >= 0.0) {
                    return bad("uniform needs lo < hi and height >= 0");
                }
            }
            Density1D::OneSidedExponential { rate } => {
                if !(*rate > 0.0) {
                    return bad("exponential rate must be positive");
                }
            }
            Density1D::Mixture { components } => {
                if components.is_empty() || components.iter().any(|b| !(b.amp >= 0.0 && b.rate > 0.0)) {
                    return bad("mixture needs non-empty bumps with amp >= 0, rate > 0");
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Density1D::Gaussian { amp, rate, center } => {
                let d = t - center;
                amp * (-rate * d * d).exp()
            }
            Density1D::Logistic { scale, center } => {
                let u = ((t - center) / scale).abs();
                let e = (-u).exp();
                e / ((1.0 + e) * (1.0 + e)) / scale
            }
            Density1D::Uniform { lo, hi, height } => {
                if t >= *lo && t <= *hi {
                    *height
                } else {
                    0.0
                }
            }
            Density1D::OneSidedExponential { rate } => {
                if t > 0.0 {
                    rate * (-rate * t).exp()
                } else {
                    0.0
                }
            }
            Density1D::Mixture { components } => components.iter().map(|b| b.eval(t)).sum(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Density1D::Gaussian { rate, center, .. } => -2.0 * rate * (t - center) * self.eval(t),
            Density1D::Logistic { scale, center } => {
                -self.eval(t) * (0.5 * (t - center) / scale).tanh() / scale
            }
            Density1D::Uniform { .. } => 0.0,
            Density1D::OneSidedExponential { rate } => -rate * self.eval(t),
            Density1D::Mixture { components } => components
                .iter()
                .map(|b| -2.0 * b.rate * (t - b.center) * b.eval(t))
                .sum(),
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            Density1D::Gaussian { amp, rate, .. } => amp * (std::f64::consts::PI / rate).sqrt(),
            Density1D::Logistic { .. } | Density1D::OneSidedExponential { .. } => 1.0,
            Density1D::Uniform { lo, hi, height } => height * (hi - lo),
            Density1D::Mixture { components } => components.iter().map(GaussianBump::total).sum(),
        }
    }

    /// `F(t) = ∫_{−∞}^t f`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        if t == f64::INFINITY {
            return self.total();
        }
        match self {
            Density1D::Gaussian { amp, rate, center } => {
                GaussianBump { amp: *amp, rate: *rate, center: *center }.cdf(t)
            }
            Density1D::Logistic { scale, center } => 1.0 / (1.0 + (-(t - center) / scale).exp()),
            Density1D::Uniform { lo, hi, height } => height * (t.clamp(*lo, *hi) - lo),
            Density1D::OneSidedExponential { rate } => {
                if t > 0.0 {
                    -(-rate * t).exp_m1()
                } else {
                    0.0
                }
            }
            Density1D::Mixture { components } => components.iter().map(|b| b.cdf(t)).sum(),
        }
    }

    /// Upper tail mass `∫_t^∞ f`, computed without cancellation.
    pub fn sf(&self, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            return self.total();
        }
        if t == f64::INFINITY {
            return 0.0;
        }
        match self {
            Density1D::Gaussian { amp, rate, center } => {
                GaussianBump { amp: *amp, rate: *rate, center: *center }.sf(t)
            }
            Density1D::Logistic { scale, center } => 1.0 / (1.0 + ((t - center) / scale).exp()),
            Density1D::Uniform { lo, hi, height } => height * (hi - t.clamp(*lo, *hi)),
            Density1D::OneSidedExponential { rate } => {
                if t > 0.0 {
                    (-rate * t).exp()
                } else {
                    1.0
                }
            }
            Density1D::Mixture { components } => components.iter().map(|b| b.sf(t)).sum(),
        }
    }

    /// Mass of `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        // Use the tail on the side that avoids cancellation.
        if a >= self.median_hint() {
            (self.sf(a) - self.sf(b)).max(0.0)
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }

    fn median_hint(&self) -> f64 {
        match self {
            Density1D::Gaussian { center, .. } | Density1D::Logistic { center, .. } => *center,
            Density1D::Uniform { lo, hi, .. } => 0.5 * (lo + hi),
            Density1D::OneSidedExponential { rate } => std::f64::consts::LN_2 / rate,
            Density1D::Mixture { components } => {
                let t: f64 = components.iter().map(GaussianBump::total).sum();
                components.iter().map(|b| b.total() * b.center).sum::<f64>() / t.max(f64::MIN_POSITIVE)
            }
        }
    }

    /// Closed support interval (infinite ends allowed).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density1D::Uniform { lo, hi, .. } => (*lo, *hi),
            Density1D::OneSidedExponential { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Point of mirror symmetry when it is known in closed form.
    pub fn symmetry_center(&self) -> Option<f64> {
        match self {
            Density1D::Gaussian { center, .. } | Density1D::Logistic { center, .. } => Some(*center),
            Density1D::Uniform { lo, hi, .. } => Some(0.5 * (lo + hi)),
            _ => None,
        }
    }

    /// Interval holding all but `tol` of the mass on each side.
    pub fn core_interval(&self, tol: f64) -> (f64, f64) {
        let tot = self.total();
        if tot <= 0.0 {
            return (0.0, 0.0);
        }
        let (s0, s1) = self.support();
        let lo = if s0.is_finite() { s0 } else { self.height_lower(tol) };
        let hi = if s1.is_finite() { s1 } else { self.quantile_upper(tol) };
        (lo, hi)
    }

    /// Smallest `c` with `∫_c^∞ f ≤ p` (the largest half-line of mass `p`).
    ///
    /// `p ≥ total` gives `−∞`; `p ≤ 0` gives the supremum of the support.
    pub fn quantile_upper(&self, p: f64) -> f64 {
        let tot = self.total();
        if p >= tot {
            return f64::NEG_INFINITY;
        }
        if p <= 0.0 {
            return self.support().1;
        }
        match self {
            Density1D::Gaussian { rate, center, .. } => center + (0.5 / rate).sqrt() * normal_isf(p / tot),
            Density1D::Logistic { scale, center } => center + scale * ((1.0 - p) / p).ln(),
            Density1D::Uniform { hi, height, .. } => hi - p / height,
            Density1D::OneSidedExponential { rate } => -p.ln() / rate,
            Density1D::Mixture { .. } => {
                let (lo, hi) = self.bracket();
                bisect_first_true(|c| self.sf(c) <= p, lo, hi, 1e-14 * (hi - lo))
            }
        }
    }

    /// Largest `h` with `∫_{−∞}^h f ≤ m` (the largest-possible-value height).
    ///
    /// `m ≥ total` gives `+∞`; `m ≤ 0` gives the infimum of the support.
    pub fn height_lower(&self, m: f64) -> f64 {
        let tot = self.total();
        if m >= tot {
            return f64::INFINITY;
        }
        if m <= 0.0 {
            return self.support().0;
        }
        match self {
            Density1D::Gaussian { rate, center, .. } => center - (0.5 / rate).sqrt() * normal_isf(m / tot),
            Density1D::Logistic { scale, center } => center + scale * (m / (1.0 - m)).ln(),
            Density1D::Uniform { lo, height, .. } => lo + m / height,
            Density1D::OneSidedExponential { rate } => -(-m).ln_1p() / rate,
            Density1D::Mixture { .. } => {
                let (lo, hi) = self.bracket();
                // Largest h with cdf(h) <= m is the first point where cdf exceeds m.
                bisect_first_true(|h| self.cdf(h) > m, lo, hi, 1e-14 * (hi - lo))
            }
        }
    }

    fn bracket(&self) -> (f64, f64) {
        match self {
            Density1D::Mixture { components } => {
                let lo = components.iter().map(|b| b.center - 40.0 * b.sigma()).fold(f64::INFINITY, f64::min);
                let hi = components.iter().map(|b| b.center + 40.0 * b.sigma()).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            _ => (-1e3, 1e3),
        }
    }

    /// Reparametrize along `t ↦ shift + sign·t`; `None` when the result
    /// has no closed form in this family.
    pub fn affine(&self, shift: f64, sign: f64) -> Option<Density1D> {
        let map = |c: f64| (c - shift) * sign;
        match self {
            Density1D::Gaussian { amp, rate, center } => Some(Density1D::Gaussian {
                amp: *amp,
                rate: *rate,
                center: map(*center),
            }),
            Density1D::Logistic { scale, center } => Some(Density1D::Logistic {
                scale: *scale,
                center: map(*center),
            }),
            Density1D::Uniform { lo, hi, height } => {
                let (a, b) = (map(*lo), map(*hi));
                Some(Density1D::Uniform { lo: a.min(b), hi: a.max(b), height: *height })
            }
            Density1D::OneSidedExponential { .. } => {
                if shift == 0.0 && sign > 0.0 {
                    Some(self.clone())
                } else {
                    None
                }
            }
            Density1D::Mixture { components } => Some(Density1D::Mixture {
                components: components
                    .iter()
                    .map(|b| GaussianBump { amp: b.amp, rate: b.rate, center: map(b.center) })
                    .collect(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;

    fn all() -> Vec<Density1D> {
        vec![
            Density1D::standard_gaussian(),
            Density1D::logistic(),
            Density1D::Logistic { scale: 0.7, center: 1.3 },
            Density1D::Uniform { lo: -1.0, hi: 2.0, height: 0.5 },
            Density1D::OneSidedExponential { rate: 1.5 },
            Density1D::Mixture {
                components: vec![
                    GaussianBump { amp: 1.0, rate: 0.5, center: -3.0 },
                    GaussianBump { amp: 1.0, rate: 10.0, center: 3.0 },
                ],
            },
        ]
    }

    #[test]
    fn cdf_matches_quadrature() {
        for d in all() {
            for &t in &[-2.5, -0.3, 0.0, 0.4, 1.7, 3.2] {
                let (lo, _) = d.core_interval(1e-18);
                let lo = lo.max(-60.0);
                let (q, _) = integrate(|s| d.eval(s), lo, t, 1e-14, 1e-13);
                assert!((q - d.cdf(t)).abs() < 1e-10, "{d:?} t={t}: {q} vs {}", d.cdf(t));
                assert!((d.cdf(t) + d.sf(t) - d.total()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for d in all() {
            for &t in &[-1.1, 0.35, 2.6] {
                let h = 1e-6;
                let fd = (d.eval(t + h) - d.eval(t - h)) / (2.0 * h);
                assert!((fd - d.deriv(t)).abs() < 1e-7 * (1.0 + fd.abs()), "{d:?} at {t}");
            }
        }
    }

    #[test]
    fn logistic_closed_forms() {
        let d = Density1D::logistic();
        assert!((d.eval(0.0) - 0.25).abs() < 1e-16);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-16);
        assert!(d.quantile_upper(0.5).abs() < 1e-15);
        let t: f64 = 1.3;
        let want = 1.0 / ((t / 2.0).exp() + (-t / 2.0).exp()).powi(2);
        assert!((d.eval(t) - want).abs() < 1e-16);
    }

    #[test]
    fn quantile_and_height_invert_tails() {
        for d in all() {
            let tot = d.total();
            for &frac in &[1e-6, 0.1, 0.37, 0.5, 0.9] {
                let p = frac * tot;
                let c = d.quantile_upper(p);
                assert!((d.sf(c) - p).abs() < 1e-9 * tot, "{d:?} {frac}");
                let h = d.height_lower(p);
                assert!((d.cdf(h) - p).abs() < 1e-9 * tot, "{d:?} {frac}");
            }
            assert_eq!(d.quantile_upper(tot), f64::NEG_INFINITY);
            assert_eq!(d.height_lower(tot), f64::INFINITY);
        }
    }

    #[test]
    fn gaussian_quantile_at_one_sigma() {
        let c = Density1D::standard_gaussian().quantile_upper(0.158_655_253_931_457);
        assert!((c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_mass_goes_to_support_edge() {
        assert_eq!(Density1D::Uniform { lo: 0.0, hi: 2.0, height: 1.0 }.quantile_upper(0.0), 2.0);
        assert_eq!(Density1D::standard_gaussian().quantile_upper(0.0), f64::INFINITY);
        assert_eq!(Density1D::OneSidedExponential { rate: 1.0 }.height_lower(0.0), 0.0);
    }

    #[test]
    fn affine_reparametrization() {
        for d in all() {
            if let Some(e) = d.affine(0.4, -1.0) {
                for &t in &[-1.0, 0.2, 0.9] {
                    assert!((e.eval(t) - d.eval(0.4 - t)).abs() < 1e-15);
                }
            }
        }
    }
}
