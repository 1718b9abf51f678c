use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Orthonormal frame with a distinguished fiber axis.
///
/// `cols[i]` is the basis vector `e_i` in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub cols: Vec<Vec<f64>>,
    pub axis: usize,
}

impl Frame {
    pub fn identity(n: usize, axis: usize) -> Self {
        let cols = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Frame { cols, axis }
    }

    /// Standard basis rotated by `theta` in the plane of axes 0 and 1.
    pub fn rotation_2d(theta: f64, axis: usize) -> Self {
        let (s, c) = theta.sin_cos();
        Frame { cols: vec![vec![c, s], vec![-s, c]], axis }
    }

    pub fn from_columns(cols: Vec<Vec<f64>>, axis: usize) -> Result<Self> {
        let f = Frame { cols, axis };
        f.validate()?;
        Ok(f)
    }

    /// Frame whose fiber axis is the unit vector `v`, completed by
    /// Gram–Schmidt against the standard basis.
    pub fn with_axis_vector(v: &[f64]) -> Result<Self> {
        let n = v.len();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("zero direction".into()));
        }
        let mut cols: Vec<Vec<f64>> = vec![v.iter().map(|x| x / norm).collect()];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cols[0][a].abs().partial_cmp(&cols[0][b].abs()).unwrap());
        for &k in &order {
            if cols.len() == n {
                break;
            }
            let mut e: Vec<f64> = (0..n).map(|j| if j == k { 1.0 } else { 0.0 }).collect();
            for _ in 0..2 {
                for c in &cols {
                    let d: f64 = c.iter().zip(&e).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        e[j] -= d * c[j];
                    }
                }
            }
            let en = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if en > 1e-8 {
                cols.push(e.iter().map(|x| x / en).collect());
            }
        }
        // Put the fiber direction last.
        let first = cols.remove(0);
        cols.push(first);
        Frame::from_columns(cols, n - 1)
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn axis_vector(&self) -> &[f64] {
        &self.cols[self.axis]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cols.len();
        if n == 0 || self.axis >= n || self.cols.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidArgument("frame must be square with a valid axis".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d: f64 = self.cols[i].iter().zip(&self.cols[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (d - want).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "frame columns not orthonormal ({i},{j}: {d})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn determinant(&self) -> f64 {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| self.cols[c][r]).determinant()
    }

    /// Ambient point with fiber-base coordinates `xp` (the non-axis frame
    /// coordinates in order) and fiber coordinate `t`.
    pub fn point(&self, xp: &[f64], t: f64) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        let mut k = 0;
        for (i, c) in self.cols.iter().enumerate() {
            let s = if i == self.axis {
                t
            } else {
                let s = xp[k];
                k += 1;
                s
            };
            for j in 0..n {
                x[j] += s * c[j];
            }
        }
        x
    }

    /// Frame coordinates of an ambient point.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| c.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Split frame coordinates into `(xp, t)`.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let c = self.coords(x);
        let t = c[self.axis];
        let xp = c
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.axis)
            .map(|(_, v)| *v)
            .collect();
        (xp, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_orthonormal_and_round_trips() {
        let f = Frame::rotation_2d(0.7, 1);
        f.validate().unwrap();
        assert!((f.determinant() - 1.0).abs() < 1e-12);
        let x = f.point(&[0.3], -1.2);
        let (xp, t) = f.split(&x);
        assert!((xp[0] - 0.3).abs() < 1e-14 && (t + 1.2).abs() < 1e-14);
    }

    #[test]
    fn axis_vector_completion() {
        let v = [0.2, -0.5, 0.8];
        let f = Frame::with_axis_vector(&v).unwrap();
        let n = (0.04f64 + 0.25 + 0.64).sqrt();
        for j in 0..3 {
            assert!((f.axis_vector()[j] - v[j] / n).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_skew_columns() {
        assert!(Frame::from_columns(vec![vec![1.0, 0.0], vec![0.1, 1.0]], 0).is_err());
    }
}
