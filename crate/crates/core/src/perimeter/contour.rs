//! Level-1/2 boundary extraction from occupancy fields sampled at voxel
//! centers: crossings (1D), marching squares (2D), marching tetrahedra (3D).

use crate::sets::IndicatorSet;

pub const LEVEL: f64 = 0.5;

/// A boundary facet: its vertices (2 for segments, 3 for triangles).
#[derive(Clone, Debug)]
pub struct Facet {
    pub verts: Vec<Vec<f64>>,
    /// Index of the marching cell (lower corner voxel) that produced it.
    pub cell: usize,
}

impl Facet {
    pub fn measure(&self) -> f64 {
        match self.verts.len() {
            1 => 1.0,
            2 => dist(&self.verts[0], &self.verts[1]),
            3 => {
                let a = sub(&self.verts[1], &self.verts[0]);
                let b = sub(&self.verts[2], &self.verts[0]);
                let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
            _ => 0.0,
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let k = self.verts.len() as f64;
        let n = self.verts[0].len();
        (0..n).map(|a| self.verts.iter().map(|v| v[a]).sum::<f64>() / k).collect()
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lerp(a: &[f64], b: &[f64], va: f64, vb: f64) -> Vec<f64> {
    let t = ((LEVEL - va) / (vb - va)).clamp(0.0, 1.0);
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Extract all facets of the level-1/2 set of `e.occ`.
pub fn extract(e: &IndicatorSet) -> Vec<Facet> {
    match e.geom.dim() {
        1 => crossings_1d(e),
        2 => marching_squares(e),
        3 => marching_tetrahedra(e),
        _ => Vec::new(),
    }
}

fn crossings_1d(e: &IndicatorSet) -> Vec<Facet> {
    let g = &e.geom;
    (0..g.dims[0].saturating_sub(1))
        .filter_map(|i| {
            let (va, vb) = (e.occ[i], e.occ[i + 1]);
            if (va >= LEVEL) == (vb >= LEVEL) {
                return None;
            }
            let p = lerp(&[g.center_coord(0, i)], &[g.center_coord(0, i + 1)], va, vb);
            Some(Facet { verts: vec![p], cell: i })
        })
        .collect()
}

/// Corner order: (i,j), (i+1,j), (i+1,j+1), (i,j+1); edge k joins corner k
/// and corner k+1.
const SQ: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

pub(crate) fn square_segments(corners: &[[f64; 2]; 4], vals: &[f64; 4]) -> Vec<[[f64; 2]; 2]> {
    let inside: Vec<bool> = vals.iter().map(|v| *v >= LEVEL).collect();
    let cross = |k: usize| -> [f64; 2] {
        let (a, b) = (k, (k + 1) % 4);
        let p = lerp(&corners[a], &corners[b], vals[a], vals[b]);
        [p[0], p[1]]
    };
    let edges: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
    match edges.len() {
        2 => vec![[cross(edges[0]), cross(edges[1])]],
        4 => {
            let center_in = vals.iter().sum::<f64>() / 4.0 >= LEVEL;
            // Cut off the two corners whose status differs from the center.
            let mut segs = Vec::with_capacity(2);
            for c in 0..4 {
                if inside[c] != center_in {
                    segs.push([cross((c + 3) % 4), cross(c)]);
                }
            }
            segs
        }
        _ => Vec::new(),
    }
}

fn marching_squares(e: &IndicatorSet) -> Vec<Facet> {
    use rayon::prelude::*;
    let g = &e.geom;
    let (nx, ny) = (g.dims[0], g.dims[1]);
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    (0..(nx - 1) * (ny - 1))
        .into_par_iter()
        .flat_map_iter(|c| {
            let (i, j) = (c / (ny - 1), c % (ny - 1));
            let mut corners = [[0.0; 2]; 4];
            let mut vals = [0.0; 4];
            for (k, o) in SQ.iter().enumerate() {
                let idx = [i + o[0], j + o[1]];
                corners[k] = [g.center_coord(0, idx[0]), g.center_coord(1, idx[1])];
                vals[k] = e.occ[g.ravel(&idx)];
            }
            let cell = g.ravel(&[i, j]);
            square_segments(&corners, &vals)
                .into_iter()
                .map(move |s| Facet { verts: vec![s[0].to_vec(), s[1].to_vec()], cell })
        })
        .collect()
}

/// Kuhn triangulation of the unit cube into six tetrahedra along the main
/// diagonal; corner bits are (x, y, z) = (1, 2, 4).
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn marching_tetrahedra(e: &IndicatorSet) -> Vec<Facet> {
    use rayon::prelude::*;
    let g = &e.geom;
    let d = &g.dims;
    if d.iter().any(|&n| n < 2) {
        return Vec::new();
    }
    let cells = (d[0] - 1) * (d[1] - 1) * (d[2] - 1);
    (0..cells)
        .into_par_iter()
        .flat_map_iter(|c| {
            let i = c / ((d[1] - 1) * (d[2] - 1));
            let j = (c / (d[2] - 1)) % (d[1] - 1);
            let k = c % (d[2] - 1);
            let mut pos = vec![vec![0.0; 3]; 8];
            let mut vals = [0.0; 8];
            for b in 0..8 {
                let idx = [i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)];
                pos[b] = (0..3).map(|a| g.center_coord(a, idx[a])).collect();
                vals[b] = e.occ[g.ravel(&idx)];
            }
            let cell = g.ravel(&[i, j, k]);
            let mut out = Vec::new();
            if vals.iter().all(|v| *v >= LEVEL) || vals.iter().all(|v| *v < LEVEL) {
                return out.into_iter();
            }
            for t in TETS.iter() {
                let (ins, outs): (Vec<usize>, Vec<usize>) = t.iter().partition(|&&b| vals[b] >= LEVEL);
                let cut = |a: usize, b: usize| lerp(&pos[a], &pos[b], vals[a], vals[b]);
                match (ins.len(), outs.len()) {
                    (1, 3) | (3, 1) => {
                        let (lone, rest) = if ins.len() == 1 { (ins[0], &outs) } else { (outs[0], &ins) };
                        let verts = rest.iter().map(|&b| cut(lone, b)).collect();
                        out.push(Facet { verts, cell });
                    }
                    (2, 2) => {
                        let q = [cut(ins[0], outs[0]), cut(ins[0], outs[1]), cut(ins[1], outs[1]), cut(ins[1], outs[0])];
                        out.push(Facet { verts: vec![q[0].clone(), q[1].clone(), q[2].clone()], cell });
                        out.push(Facet { verts: vec![q[0].clone(), q[2].clone(), q[3].clone()], cell });
                    }
                    _ => {}
                }
            }
            out.into_iter()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_cuts_off_minority_corners() {
        let c = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let segs = square_segments(&c, &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(segs.len(), 2);
        let segs = square_segments(&c, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(segs.len(), 1);
        let len = dist(&segs[0][0], &segs[0][1]);
        assert!((len - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
