use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Density samples at the nodes of a regular grid, read by multilinear
/// interpolation. Zero outside the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = dims.len();
        if n == 0 || lo.len() != n || hi.len() != n {
            return Err(Error::InvalidArgument("grid field dimension mismatch".into()));
        }
        if dims.iter().any(|&d| d < 2) || lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidArgument("grid field needs >= 2 nodes per axis and lo < hi".into()));
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidArgument("grid field sample count mismatch".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("grid field samples must be finite and >= 0".into()));
        }
        Ok(GridField { lo, hi, dims, values })
    }

    /// Sample `f` at the grid nodes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(lo: Vec<f64>, hi: Vec<f64>, dims: Vec<usize>, f: F) -> Result<Self> {
        let n = dims.len();
        let total: usize = dims.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        for _ in 0..total {
            for a in 0..n {
                x[a] = lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / (dims[a] - 1) as f64;
            }
            values.push(f(&x));
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        GridField::new(lo, hi, dims, values)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn spacing(&self, a: usize) -> f64 {
        (self.hi[a] - self.lo[a]) / (self.dims[a] - 1) as f64
    }

    fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }

    fn locate(&self, x: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
        let n = self.dim();
        let mut base = vec![0; n];
        let mut frac = vec![0.0; n];
        for a in 0..n {
            if !(x[a] >= self.lo[a] && x[a] <= self.hi[a]) {
                return None;
            }
            let u = (x[a] - self.lo[a]) / self.spacing(a);
            let i = (u.floor() as usize).min(self.dims[a] - 2);
            base[a] = i;
            frac[a] = u - i as f64;
        }
        Some((base, frac))
    }

    fn blend<F: Fn(&[usize]) -> f64>(&self, base: &[usize], frac: &[f64], node: F) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        let mut idx = vec![0; n];
        for corner in 0..(1usize << n) {
            let mut wgt = 1.0;
            for a in 0..n {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit;
                wgt *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if wgt != 0.0 {
                acc += wgt * node(&idx);
            }
        }
        acc
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.locate(x) {
            Some((b, f)) => self.blend(&b, &f, |i| self.values[self.linear(i)]),
            None => 0.0,
        }
    }

    /// Gradient by central differences at the nodes (second order),
    /// blended multilinearly.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let (base, frac) = self
            .locate(x)
            .ok_or_else(|| Error::Unsupported("gradient outside the sampled grid".into()))?;
        for a in 0..n {
            if base[a] == 0 || base[a] + 2 >= self.dims[a] {
                return Err(Error::Unsupported("gradient in the grid boundary layer".into()));
            }
        }
        let mut g = vec![0.0; n];
        for (a, ga) in g.iter_mut().enumerate() {
            let h = self.spacing(a);
            *ga = self.blend(&base, &frac, |i| {
                let mut p = i.to_vec();
                let mut m = i.to_vec();
                p[a] += 1;
                m[a] -= 1;
                (self.values[self.linear(&p)] - self.values[self.linear(&m)]) / (2.0 * h)
            });
        }
        Ok(g)
    }

    /// Exact integral of the interpolant (the trapezoid rule).
    pub fn integral(&self) -> f64 {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        let mut acc = 0.0;
        let cell: f64 = (0..n).map(|a| self.spacing(a)).product();
        for v in &self.values {
            let mut w = 1.0;
            for a in 0..n {
                if idx[a] == 0 || idx[a] == self.dims[a] - 1 {
                    w *= 0.5;
                }
            }
            acc += w * v;
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < self.dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        acc * cell
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_bilinear_functions() {
        let g = GridField::from_fn(vec![-1.0, 0.0], vec![1.0, 2.0], vec![5, 9], |x| 2.0 + x[0] + 0.5 * x[1] + x[0] * x[1])
            .unwrap();
        let x = [0.13, 1.37];
        assert!((g.eval(&x) - (2.0 + 0.13 + 0.685 + 0.13 * 1.37)).abs() < 1e-13);
        let gr = g.grad(&x).unwrap();
        assert!((gr[0] - (1.0 + 1.37)).abs() < 1e-12 && (gr[1] - (0.5 + 0.13)).abs() < 1e-12);
        assert_eq!(g.eval(&[1.5, 0.0]), 0.0);
    }

    #[test]
    fn boundary_gradient_unsupported() {
        let g = GridField::from_fn(vec![0.0], vec![1.0], vec![11], |x| x[0]).unwrap();
        assert!(matches!(g.grad(&[0.05]), Err(Error::Unsupported(_))));
        assert!((g.grad(&[0.5]).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_integral() {
        let g = GridField::from_fn(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 3], |x| x[0] + x[1]).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-14);
    }
}
