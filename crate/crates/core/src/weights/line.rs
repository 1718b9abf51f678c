use super::{Density1D, WeightedDensity};
use crate::numeric::integrate;

const PANELS: usize = 48;

/// The restriction `t ↦ f(x0 + t·d)` of a density to a line.
pub enum LineDensity<'a> {
    /// `scale·g(t)` with `g` in closed form.
    Closed { d: Density1D, scale: f64 },
    /// Panel-cumulative quadrature over the chord inside the truncation box.
    Numeric(NumericLine<'a>),
    Zero,
}

pub struct NumericLine<'a> {
    w: &'a WeightedDensity,
    x0: Vec<f64>,
    dir: Vec<f64>,
    knots: Vec<f64>,
    cum: Vec<f64>,
    unbounded: bool,
}

impl<'a> NumericLine<'a> {
    pub(crate) fn new(w: &'a WeightedDensity, x0: &[f64], dir: &[f64], t0: f64, t1: f64, unbounded: bool) -> Self {
        let mut line = NumericLine {
            w,
            x0: x0.to_vec(),
            dir: dir.to_vec(),
            knots: (0..=PANELS).map(|k| t0 + (t1 - t0) * k as f64 / PANELS as f64).collect(),
            cum: vec![0.0; PANELS + 1],
            unbounded,
        };
        for k in 0..PANELS {
            let m = line.integrate(line.knots[k], line.knots[k + 1]);
            line.cum[k + 1] = line.cum[k] + m;
        }
        line
    }

    fn at(&self, t: f64) -> f64 {
        let n = self.x0.len();
        if n <= 3 {
            let mut x = [0.0; 3];
            for a in 0..n {
                x[a] = self.x0[a] + t * self.dir[a];
            }
            return self.w.eval(&x[..n]);
        }
        let x: Vec<f64> = self.x0.iter().zip(&self.dir).map(|(a, b)| a + t * b).collect();
        self.w.eval(&x)
    }

    /// Five-point Gauss–Legendre rule, for segments shorter than a panel.
    fn short_segment(&self, a: f64, b: f64) -> f64 {
        const X: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664_0];
        const W: [f64; 3] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = W[0] * self.at(c);
        for j in 1..3 {
            acc += W[j] * (self.at(c - h * X[j]) + self.at(c + h * X[j]));
        }
        acc * h
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        integrate(|t| self.at(t), a, b, 1e-16, 1e-12).0
    }

    fn t0(&self) -> f64 {
        self.knots[0]
    }

    fn t1(&self) -> f64 {
        self.knots[PANELS]
    }

    /// First `t` with `pred(t)` for a predicate that flips where the CDF
    /// crosses `target`: Newton steps inside the bracketing panel, with
    /// bisection wherever a step leaves the bracket.
    fn solve<P: Fn(f64) -> bool>(&self, target: f64, pred: P) -> f64 {
        let (t0, t1) = (self.t0(), self.t1());
        if pred(t0) {
            return t0;
        }
        let k = self.cum.partition_point(|&c| c < target).clamp(1, PANELS);
        let (mut lo, mut hi) = (self.knots[k - 1], self.knots[k]);
        if pred(lo) {
            (lo, hi) = (t0, lo);
        } else if !pred(hi) {
            (lo, hi) = (hi, t1);
        }
        let x_tol = 1e-13 * (t1 - t0);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            if hi - lo <= x_tol {
                break;
            }
            let f = self.at(t);
            let g = self.cdf(t) - target;
            let mut next = if f > 0.0 { t - g / f } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next <= lo || next >= hi {
                break;
            }
            if pred(next) {
                hi = next;
            } else {
                lo = next;
            }
            // A converged Newton iterate: shrink the bracket around it.
            if (next - t).abs() <= x_tol {
                let (a, b) = (next - x_tol, next + x_tol);
                if a > lo && !pred(a) {
                    lo = a;
                }
                if b < hi && pred(b) {
                    hi = b;
                }
            }
            t = next;
        }
        hi
    }

    fn cdf(&self, t: f64) -> f64 {
        if !(t > self.t0()) {
            return 0.0;
        }
        if t >= self.t1() {
            return self.cum[PANELS];
        }
        let k = self.knots.partition_point(|&s| s <= t).saturating_sub(1).min(PANELS - 1);
        self.cum[k] + self.integrate(self.knots[k], t)
    }
}

impl LineDensity<'_> {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            LineDensity::Closed { d, scale } => scale * d.eval(t),
            LineDensity::Numeric(n) => {
                if t >= n.t0() && t <= n.t1() {
                    n.at(t)
                } else {
                    0.0
                }
            }
            LineDensity::Zero => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            LineDensity::Closed { d, scale } => scale * d.total(),
            LineDensity::Numeric(n) => n.cum[PANELS],
            LineDensity::Zero => 0.0,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            LineDensity::Closed { d, scale } => scale * d.cdf(t),
            LineDensity::Numeric(n) => n.cdf(t),
            LineDensity::Zero => 0.0,
        }
    }

    pub fn sf(&self, t: f64) -> f64 {
        match self {
            LineDensity::Closed { d, scale } => scale * d.sf(t),
            LineDensity::Numeric(n) => (n.cum[PANELS] - n.cdf(t)).max(0.0),
            LineDensity::Zero => 0.0,
        }
    }

    /// Mass of `[a, b]` along the line.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        match self {
            LineDensity::Closed { d, scale } => scale * d.mass_between(a, b),
            LineDensity::Numeric(n) => {
                let a = a.max(n.t0());
                let b = b.min(n.t1());
                if b > a && b - a < (n.t1() - n.t0()) / PANELS as f64 {
                    n.short_segment(a, b)
                } else {
                    (n.cdf(b) - n.cdf(a)).max(0.0)
                }
            }
            LineDensity::Zero => 0.0,
        }
    }

    /// Smallest `c` with `∫_c^∞ ≤ p`: the largest half-line of mass `p`.
    pub fn quantile_upper(&self, p: f64) -> f64 {
        let tot = self.total();
        if p >= tot {
            return f64::NEG_INFINITY;
        }
        match self {
            LineDensity::Closed { d, scale } => d.quantile_upper(p / scale),
            LineDensity::Numeric(n) => {
                if p <= 0.0 && n.unbounded {
                    return f64::INFINITY;
                }
                let target = tot - p.max(0.0);
                n.solve(target, |c| n.cdf(c) >= target)
            }
            LineDensity::Zero => f64::NEG_INFINITY,
        }
    }

    /// Largest `h` with `∫_{−∞}^h ≤ m`: the largest-possible-value height.
    pub fn height_lower(&self, m: f64) -> f64 {
        let tot = self.total();
        if m >= tot {
            return f64::INFINITY;
        }
        match self {
            LineDensity::Closed { d, scale } => d.height_lower(m / scale),
            LineDensity::Numeric(n) => {
                if m <= 0.0 && n.unbounded {
                    return f64::NEG_INFINITY;
                }
                let target = m.max(0.0);
                n.solve(target, |h| n.cdf(h) > target)
            }
            LineDensity::Zero => f64::INFINITY,
        }
    }
}

/// Parameter interval of the chord `{x0 + t·d} ∩ [lo, hi]`.
pub fn chord(x0: &[f64], d: &[f64], lo: &[f64], hi: &[f64]) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..x0.len() {
        if d[a].abs() < 1e-300 {
            if x0[a] < lo[a] || x0[a] > hi[a] {
                return None;
            }
            continue;
        }
        let ta = (lo[a] - x0[a]) / d[a];
        let tb = (hi[a] - x0[a]) / d[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    if t1 > t0 {
        Some((t0, t1))
    } else {
        None
    }
}
