use serde::{Deserialize, Serialize};

use super::GridGeometry;
use crate::weights::Frame;

/// Extended-real heights `h(x′)` over a base grid in the fiber-base
/// coordinates of `frame`, encoding `{x : x_axis ≤ h(x′)}` in frame
/// coordinates. Infinite values are stored as IEEE infinities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub base: GridGeometry,
    pub frame: Frame,
    pub values: Vec<f64>,
}

impl HeightField {
    pub fn new(base: GridGeometry, frame: Frame, values: Vec<f64>) -> crate::Result<Self> {
        if base.dim() + 1 != frame.dim() || values.len() != base.len() {
            return Err(crate::Error::InvalidArgument("height field shape mismatch".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(crate::Error::InvalidArgument("height field contains NaN".into()));
        }
        Ok(HeightField { base, frame, values })
    }

    /// Sample `g` at the base cell centers.
    pub fn from_fn<G: Fn(&[f64]) -> f64>(base: GridGeometry, frame: Frame, g: G) -> crate::Result<Self> {
        let values = (0..base.len()).map(|k| g(&base.center_of(k))).collect();
        Self::new(base, frame, values)
    }

    pub fn infinite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_infinite()).count()
    }

    fn cell_coords(&self, xp: &[f64]) -> Vec<f64> {
        (0..self.base.dim())
            .map(|a| {
                let u = (xp[a] - self.base.lo[a]) / self.base.h(a) - 0.5;
                u.clamp(0.0, (self.base.dims[a] - 1) as f64)
            })
            .collect()
    }

    /// Multilinear interpolation between cell centers; falls back to the
    /// nearest cell when a neighbour is infinite.
    pub fn eval(&self, xp: &[f64]) -> f64 {
        let m = self.base.dim();
        if m == 0 {
            return self.values[0];
        }
        let u = self.cell_coords(xp);
        let base: Vec<usize> = u.iter().zip(&self.base.dims).map(|(v, d)| (v.floor() as usize).min(d.saturating_sub(2))).collect();
        let mut acc = 0.0;
        let mut idx = vec![0; m];
        for corner in 0..(1usize << m) {
            let mut wgt = 1.0;
            for a in 0..m {
                let bit = (corner >> a) & 1;
                idx[a] = (base[a] + bit).min(self.base.dims[a] - 1);
                let fr = u[a] - base[a] as f64;
                wgt *= if bit == 1 { fr } else { 1.0 - fr };
            }
            if wgt == 0.0 {
                continue;
            }
            let v = self.values[self.base.ravel(&idx)];
            if !v.is_finite() {
                let near: Vec<usize> = u.iter().map(|x| x.round() as usize).collect();
                return self.values[self.base.ravel(&near)];
            }
            acc += wgt * v;
        }
        acc
    }

    /// Local slope magnitude `|∇h|` by one-sided cell differences.
    pub fn slope(&self, xp: &[f64]) -> f64 {
        let m = self.base.dim();
        let u = self.cell_coords(xp);
        let idx: Vec<usize> = u.iter().map(|x| x.round() as usize).collect();
        let mut s2 = 0.0;
        for a in 0..m {
            if self.base.dims[a] < 2 {
                continue;
            }
            let mut i0 = idx.clone();
            let mut i1 = idx.clone();
            if idx[a] + 1 < self.base.dims[a] {
                i1[a] += 1;
            } else {
                i0[a] -= 1;
            }
            let d = (self.values[self.base.ravel(&i1)] - self.values[self.base.ravel(&i0)]) / self.base.h(a);
            if d.is_finite() {
                s2 += d * d;
            }
        }
        s2.sqrt()
    }

    /// Approximate signed distance to the graph (negative below).
    pub fn sdf(&self, x: &[f64]) -> f64 {
        let (xp, t) = self.frame.split(x);
        let h = self.eval(&xp);
        if h == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        if h == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        (t - h) / (1.0 + self.slope(&xp).powi(2)).sqrt()
    }
}
