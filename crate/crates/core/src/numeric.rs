//! Quadrature, root bracketing, normal-distribution helpers and
//! reproducible summation.

use rayon::prelude::*;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Gauss–Kronrod 15-point abscissae on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (G7/K15) integral of `f` over `[a, b]`.
///
/// Returns `(value, error_estimate)`. Subdivides until the local error is
/// below `max(abs_tol, rel_tol * |value|)` or the depth limit is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    if !(b > a) {
        if a == b {
            return (0.0, 0.0);
        }
        let (v, e) = integrate(f, b, a, abs_tol, rel_tol);
        return (-v, e);
    }
    let (whole, err) = gk15(&f, a, b);
    let mut total = 0.0;
    let mut total_err = 0.0;
    refine(&f, a, b, whole, err, abs_tol.max(rel_tol * whole.abs()), 0, &mut total, &mut total_err);
    (total, total_err)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    est: f64,
    err: f64,
    tol: f64,
    depth: u32,
    total: &mut f64,
    total_err: &mut f64,
) {
    if err <= tol || depth >= 40 || (b - a) < 1e-13 * (a.abs() + b.abs()).max(1e-300) {
        *total += est;
        *total_err += err;
        return;
    }
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    let half = 0.5 * tol;
    refine(f, a, m, l, el, half, depth + 1, total, total_err);
    refine(f, m, b, r, er, half, depth + 1, total, total_err);
}

/// Nested adaptive quadrature over an axis-aligned box (any dimension).
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], abs_tol: f64) -> f64 {
    nested(f, lo, hi, abs_tol, &[])
}

fn nested<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], tol: f64, prefix: &[f64]) -> f64 {
    let axis = prefix.len();
    if axis == lo.len() {
        return f(prefix);
    }
    let (v, _) = integrate(
        |t| {
            let mut p = prefix.to_vec();
            p.push(t);
            nested(f, lo, hi, tol, &p)
        },
        lo[axis],
        hi[axis],
        tol,
        1e-12,
    );
    v
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal CDF `P(Z <= z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`normal_sf`]: the `z` with `P(Z > z) = p`.
pub fn normal_isf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let mut z = SQRT_2 * erfc_inv(2.0 * p);
    // Newton polish against the accurate tail.
    for _ in 0..3 {
        let d = normal_pdf(z);
        if d <= 0.0 || !z.is_finite() {
            break;
        }
        z += (normal_sf(z) - p) / d;
    }
    z
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, for a predicate that is
/// monotone (false then true). Returns `hi` if never true at `lo`.
pub fn bisect_first_true<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    if pred(lo) {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Pairwise (cascade) summation; the grouping depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

const CHUNK: usize = 4096;

/// Deterministic parallel sum of `term(i)` for `i in 0..n`.
///
/// Chunk boundaries are fixed, so the result is bit-identical for any
/// thread count.
pub fn par_sum<F: Fn(usize) -> f64 + Sync>(n: usize, term: F) -> f64 {
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let local: Vec<f64> = (start..end).map(&term).collect();
            pairwise_sum(&local)
        })
        .collect();
    pairwise_sum(&partial)
}

/// Least-squares polynomial fit of degree `deg`; returns coefficients in
/// increasing order.
pub fn polyfit(x: &[f64], y: &[f64], deg: usize) -> Vec<f64> {
    let m = deg + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(x.len(), m);
    for (i, &xi) in x.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..m {
            a[(i, j)] = p;
            p *= xi;
        }
    }
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14)
        .map(|s| s.iter().copied().collect())
        .unwrap_or_else(|_| vec![f64::NAN; m])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_gaussian() {
        let (v, _) = integrate(|x| x * x * x - x, 0.0, 2.0, 1e-12, 1e-12);
        assert!((v - 2.0).abs() < 1e-13);
        let (g, _) = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-12, 1e-12);
        assert!((g - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let (v, _) = integrate(|x| x, 1.0, 0.0, 1e-12, 1e-12);
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn box_integral_2d() {
        let v = integrate_box(&|x: &[f64]| x[0] * x[1], &[0.0, 0.0], &[1.0, 2.0], 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_quantiles_round_trip() {
        let s1 = normal_sf(1.0);
        assert!((s1 - 0.158_655_253_931_457_05).abs() < 1e-16, "{s1}");
        for &p in &[1e-12, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9] {
            let z = normal_isf(p);
            assert!((normal_sf(z) - p).abs() < 1e-14 * p.max(1e-3));
        }
    }

    #[test]
    fn bisection_finds_threshold() {
        let x = bisect_first_true(|x| x >= 0.3, 0.0, 1.0, 1e-14);
        assert!((x - 0.3).abs() < 1e-13);
    }

    #[test]
    fn par_sum_is_thread_independent() {
        let n = 100_003;
        let a = par_sum(n, |i| (i as f64).sin());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| par_sum(n, |i| (i as f64).sin()));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn polyfit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|t| 0.5 - 2.0 * t).collect();
        let c = polyfit(&x, &y, 1);
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12);
    }
}
