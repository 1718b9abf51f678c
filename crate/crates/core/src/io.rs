//! Density spec files and the binary GridField / IndicatorSet formats.
//!
//! Binary layouts (little-endian):
//! - GridField: `"EHGF"`, version u32, n u32, dims u64[n], box f64[2n]
//!   (lo then hi), samples f64 row-major.
//! - IndicatorSet: `"EHIS"`, version u32, n u32, dims u64[n], box f64[2n],
//!   subcell u8, tail tag u8 (0 empty, 1 full, 2 half-space followed by
//!   v f64[n] and r f64), occupancy f64 row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::sets::{GridGeometry, HalfSpace, IndicatorSet, TailConvention};
use crate::weights::{DensityKind, GridField, WeightedDensity, DEFAULT_TAIL_TOL};
use crate::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"EHGF";
pub const SET_MAGIC: &[u8; 4] = b"EHIS";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, x: u32) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(b)
}

fn get_f64s<R: Read>(r: &mut R, k: usize) -> Result<Vec<f64>> {
    (0..k).map(|_| Ok(f64::from_le_bytes(get::<8, R>(r)?))).collect()
}

/// Shared header: magic, version, n, dims, box.
fn put_header<W: Write>(w: &mut W, magic: &[u8; 4], dims: &[usize], lo: &[f64], hi: &[f64]) -> Result<()> {
    w.write_all(magic)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u32(w, dims.len() as u32)?;
    for &d in dims {
        put_u64(w, d as u64)?;
    }
    put_f64s(w, lo)?;
    put_f64s(w, hi)
}

type Header = (Vec<usize>, Vec<f64>, Vec<f64>);

fn get_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<Header> {
    if &get::<4, R>(r)? != magic {
        return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    let version = u32::from_le_bytes(get::<4, R>(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(get::<4, R>(r)?) as usize;
    if n == 0 || n > 3 {
        return Err(Error::Format(format!("unsupported dimension {n}")));
    }
    let dims = (0..n)
        .map(|_| Ok(u64::from_le_bytes(get::<8, R>(r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let lo = get_f64s(r, n)?;
    let hi = get_f64s(r, n)?;
    Ok((dims, lo, hi))
}

fn sample_count(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .filter(|&k| k <= 1 << 31)
        .ok_or_else(|| Error::Format("grid too large".into()))
}

pub fn write_grid_field<W: Write>(w: &mut W, g: &GridField) -> Result<()> {
    put_header(w, GRID_MAGIC, &g.dims, &g.lo, &g.hi)?;
    put_f64s(w, &g.values)
}

pub fn read_grid_field<R: Read>(r: &mut R) -> Result<GridField> {
    let (dims, lo, hi) = get_header(r, GRID_MAGIC)?;
    let values = get_f64s(r, sample_count(&dims)?)?;
    GridField::new(lo, hi, dims, values)
}

pub fn write_indicator_set<W: Write>(w: &mut W, e: &IndicatorSet) -> Result<()> {
    put_header(w, SET_MAGIC, &e.geom.dims, &e.geom.lo, &e.geom.hi)?;
    let subcell = u8::try_from(e.subcell).map_err(|_| Error::Format("subcell factor exceeds 255".into()))?;
    w.write_all(&[subcell])?;
    match &e.tail {
        TailConvention::EmptyOutside => w.write_all(&[0])?,
        TailConvention::FullOutside => w.write_all(&[1])?,
        TailConvention::HalfSpaceOutside(h) => {
            w.write_all(&[2])?;
            put_f64s(w, &h.v)?;
            put_f64s(w, &[h.r])?;
        }
    }
    put_f64s(w, &e.occ)
}

pub fn read_indicator_set<R: Read>(r: &mut R) -> Result<IndicatorSet> {
    let (dims, lo, hi) = get_header(r, SET_MAGIC)?;
    let n = dims.len();
    let [subcell] = get::<1, R>(r)?;
    let tail = match get::<1, R>(r)?[0] {
        0 => TailConvention::EmptyOutside,
        1 => TailConvention::FullOutside,
        2 => {
            let v = get_f64s(r, n)?;
            let rr = get_f64s(r, 1)?[0];
            TailConvention::HalfSpaceOutside(HalfSpace::new(&v, rr)?)
        }
        t => return Err(Error::Format(format!("unknown tail tag {t}"))),
    };
    let occ = get_f64s(r, sample_count(&dims)?)?;
    IndicatorSet::new(GridGeometry::new(lo, hi, dims)?, subcell as usize, tail, occ)
}

pub fn save_grid_field(path: &Path, g: &GridField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid_field(&mut w, g)?;
    Ok(w.flush()?)
}

pub fn load_grid_field(path: &Path) -> Result<GridField> {
    read_grid_field(&mut BufReader::new(File::open(path)?))
}

pub fn save_indicator_set(path: &Path, e: &IndicatorSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_indicator_set(&mut w, e)?;
    Ok(w.flush()?)
}

pub fn load_indicator_set(path: &Path) -> Result<IndicatorSet> {
    read_indicator_set(&mut BufReader::new(File::open(path)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Density spec file `{kind, params, dim, box, tail_tol}`.
///
/// Kinds and their params:
/// - `isotropic_gaussian`: `amp`, `rate`, `center` (amp defaults to the
///   probability normalization, rate to 1/2, center to the origin)
/// - `anisotropic_gaussian`: `amp`, `rates`, `center`
/// - `product`: `factors` (list of one-dimensional densities)
/// - `logistic_product`: `scales` (default 1 per axis)
/// - `grid_sampled`: `path` to a GridField file, relative to the spec file
/// - `perturbed`: `base` (a nested `{kind, params}`) and `bump`
/// - `zero`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    pub dim: usize,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

fn param<T: serde::de::DeserializeOwned>(params: &Value, key: &str) -> Result<Option<T>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::InvalidArgument(format!("param {key}: {e}"))),
    }
}

fn required<T: serde::de::DeserializeOwned>(params: &Value, key: &str) -> Result<T> {
    param(params, key)?.ok_or_else(|| Error::InvalidArgument(format!("missing param {key}")))
}

fn kind_from(kind: &str, params: &Value, dim: usize, base_dir: &Path) -> Result<DensityKind> {
    let gauss_amp = |rates: &[f64]| rates.iter().map(|r| (r / std::f64::consts::PI).sqrt()).product::<f64>();
    Ok(match kind {
        "zero" => DensityKind::Zero,
        "isotropic_gaussian" => {
            let rate = param(params, "rate")?.unwrap_or(0.5);
            let amp = match param(params, "amp")? {
                Some(a) => a,
                None => gauss_amp(&vec![rate; dim]),
            };
            let center = param(params, "center")?.unwrap_or_else(|| vec![0.0; dim]);
            DensityKind::IsotropicGaussian { amp, rate, center }
        }
        "anisotropic_gaussian" => {
            let rates: Vec<f64> = required(params, "rates")?;
            let amp = match param(params, "amp")? {
                Some(a) => a,
                None => gauss_amp(&rates),
            };
            let center = param(params, "center")?.unwrap_or_else(|| vec![0.0; dim]);
            DensityKind::AnisotropicGaussian { amp, rates, center }
        }
        "product" | "product_1d" => DensityKind::Product(required(params, "factors")?),
        "logistic_product" => DensityKind::LogisticProduct {
            scales: param(params, "scales")?.unwrap_or_else(|| vec![1.0; dim]),
        },
        "grid_sampled" | "grid_file" => {
            let rel: PathBuf = required(params, "path")?;
            DensityKind::GridSampled(load_grid_field(&base_dir.join(rel))?)
        }
        "perturbed" => {
            let base: Value = required(params, "base")?;
            let bk: String = required(&base, "kind")?;
            let bp = base.get("params").cloned().unwrap_or(Value::Null);
            DensityKind::Perturbed { base: Box::new(kind_from(&bk, &bp, dim, base_dir)?), bump: required(params, "bump")? }
        }
        other => return Err(Error::InvalidArgument(format!("unknown density kind {other}"))),
    })
}

impl DensitySpec {
    /// Build the density; grid paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<WeightedDensity> {
        let kind = kind_from(&self.kind, &self.params, self.dim, base_dir)?;
        let tail_tol = self.tail_tol.unwrap_or(DEFAULT_TAIL_TOL);
        match (&self.bbox, &kind) {
            (Some(b), _) => WeightedDensity::with_box(kind, b.lo.clone(), b.hi.clone(), tail_tol),
            (None, DensityKind::GridSampled(g)) => {
                let (lo, hi) = (g.lo.clone(), g.hi.clone());
                WeightedDensity::with_box(kind, lo, hi, tail_tol)
            }
            (None, _) => WeightedDensity::with_tail_tol(kind, self.dim, tail_tol),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("density spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<(Self, WeightedDensity)> {
        let spec = Self::from_json(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let w = spec.build(dir)?;
        Ok((spec, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{rasterize, Region};

    #[test]
    fn indicator_set_round_trip() {
        let w = WeightedDensity::standard_gaussian(2);
        let e = rasterize(&Region::half_space(&[0.6, 0.8], 0.3), &w, 32).unwrap();
        let mut buf = Vec::new();
        write_indicator_set(&mut buf, &e).unwrap();
        assert_eq!(&buf[..4], SET_MAGIC);
        assert_eq!(read_indicator_set(&mut buf.as_slice()).unwrap(), e);
    }

    #[test]
    fn grid_field_round_trip_and_bad_magic() {
        let g = GridField::from_fn(vec![-1.0, -2.0], vec![1.0, 2.0], vec![3, 4], |x| x[0] * x[0] + x[1].abs()).unwrap();
        let mut buf = Vec::new();
        write_grid_field(&mut buf, &g).unwrap();
        assert_eq!(read_grid_field(&mut buf.as_slice()).unwrap(), g);
        buf[0] = b'X';
        assert!(matches!(read_grid_field(&mut buf.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_indicator_set(&mut &buf[..10]), Err(Error::Format(_))));
    }

    #[test]
    fn spec_defaults_give_standard_gaussian() {
        let s = DensitySpec::from_json(r#"{"kind": "isotropic_gaussian", "dim": 2}"#).unwrap();
        let w = s.build(Path::new(".")).unwrap();
        let std = WeightedDensity::standard_gaussian(2);
        assert!((w.eval(&[0.3, -0.4]) - std.eval(&[0.3, -0.4])).abs() < 1e-15);
        assert!(DensitySpec::from_json(r#"{"kind": "cubic", "dim": 2}"#).unwrap().build(Path::new(".")).is_err());
    }
}
