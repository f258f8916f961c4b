//! Array files (raw little-endian samples plus a JSON sidecar), lattice
//! rasters and binary PGM images.

use crate::error::{Error, Result};
use crate::phase_space::{BoundaryField, BoundaryGrid, Lattice};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Complex128,
    Float64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::Complex128 => 16,
            Dtype::Float64 => 8,
        }
    }
}

/// Sidecar `<name>.json` describing `<name>.bin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayHeader {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub grid: String,
}

impl ArrayHeader {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Complex(Vec<C64>),
    Real(Vec<f64>),
}

impl ArrayData {
    pub fn into_complex(self) -> Vec<C64> {
        match self {
            ArrayData::Complex(v) => v,
            ArrayData::Real(v) => v.into_iter().map(|x| C64::new(x, 0.0)).collect(),
        }
    }
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("bin"), base.with_extension("json"))
}

pub fn write_complex(base: &Path, data: &[C64], shape: &[usize], grid: &str) -> Result<()> {
    check_shape(data.len(), shape)?;
    let bytes: Vec<u8> = data
        .iter()
        .flat_map(|z| z.re.to_le_bytes().into_iter().chain(z.im.to_le_bytes()))
        .collect();
    write_pair(base, &bytes, Dtype::Complex128, shape, grid)
}

pub fn write_real(base: &Path, data: &[f64], shape: &[usize], grid: &str) -> Result<()> {
    check_shape(data.len(), shape)?;
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(base, &bytes, Dtype::Float64, shape, grid)
}

fn check_shape(len: usize, shape: &[usize]) -> Result<()> {
    if shape.iter().product::<usize>() != len {
        return Err(Error::Format(format!("shape {shape:?} does not match {len} samples")));
    }
    Ok(())
}

fn write_pair(base: &Path, bytes: &[u8], dtype: Dtype, shape: &[usize], grid: &str) -> Result<()> {
    let (bin, json) = paths(base);
    if let Some(dir) = bin.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let header = ArrayHeader {
        dtype,
        shape: shape.to_vec(),
        grid: grid.to_string(),
    };
    std::fs::write(&bin, bytes)?;
    std::fs::write(&json, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

/// Reads an array given either its `.bin`, its `.json` or the common stem.
pub fn read_array(base: &Path) -> Result<(ArrayHeader, ArrayData)> {
    let (bin, json) = paths(base);
    let text = std::fs::read_to_string(&json)?;
    let header: ArrayHeader =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", json.display())))?;
    let bytes = std::fs::read(&bin)?;
    let expect = header.len() * header.dtype.width();
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "{} holds {} bytes, header expects {expect}",
            bin.display(),
            bytes.len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let data = match header.dtype {
        Dtype::Float64 => ArrayData::Real(bytes.chunks_exact(8).map(f).collect()),
        Dtype::Complex128 => ArrayData::Complex(bytes.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect()),
    };
    Ok((header, data))
}

/// Reads a complex (or real, promoted) array and checks its grid tag.
pub fn read_complex(base: &Path, shape: &[usize], grid: &str) -> Result<Vec<C64>> {
    let (h, d) = read_array(base)?;
    if h.shape != shape {
        return Err(Error::Format(format!("{}: shape {:?}, expected {shape:?}", base.display(), h.shape)));
    }
    if h.grid != grid {
        return Err(Error::mismatch(format!("{}: grid '{}', expected '{grid}'", base.display(), h.grid)));
    }
    Ok(d.into_complex())
}

/// Lattice node values as an n×n raster (row index = y), zero off the disk.
pub fn raster(lattice: &Lattice, v: &[C64]) -> Vec<C64> {
    let n = lattice.n;
    let m = (lattice.side - n) / 2;
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for (k, &(ix, iy)) in lattice.nodes.iter().enumerate() {
        out[(iy - m) * n + (ix - m)] = v[k];
    }
    out
}

pub fn from_raster(lattice: &Lattice, r: &[C64]) -> Result<Vec<C64>> {
    let n = lattice.n;
    if r.len() != n * n {
        return Err(Error::Format(format!("raster has {} samples, lattice needs {}", r.len(), n * n)));
    }
    let m = (lattice.side - n) / 2;
    Ok(lattice.nodes.iter().map(|&(ix, iy)| r[(iy - m) * n + (ix - m)]).collect())
}

pub fn lattice_tag(lattice: &Lattice) -> String {
    lattice.descriptor()
}

pub fn write_lattice(base: &Path, lattice: &Lattice, v: &[C64]) -> Result<()> {
    write_complex(base, &raster(lattice, v), &[lattice.n, lattice.n], &lattice_tag(lattice))
}

pub fn read_lattice(base: &Path, lattice: &Lattice) -> Result<Vec<C64>> {
    let r = read_complex(base, &[lattice.n, lattice.n], &lattice_tag(lattice))?;
    from_raster(lattice, &r)
}

/// Boundary data as an n_beta × n_alpha array.
pub fn write_boundary(base: &Path, bd: &BoundaryGrid, w: &BoundaryField) -> Result<()> {
    bd.check(w)?;
    write_complex(base, &w.data, &[bd.n_beta, bd.n_alpha], &bd.descriptor())
}

pub fn read_boundary(base: &Path, bd: &BoundaryGrid) -> Result<BoundaryField> {
    let data = read_complex(base, &[bd.n_beta, bd.n_alpha], &bd.descriptor())?;
    let mut w = bd.zeros();
    w.data = data;
    Ok(w)
}

/// Binary P5 image of `values` (row-major, `width` per row, top row first),
/// linearly mapped from [0, max] to [0, 255].
pub fn pgm_bytes(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    if width * height != values.len() || width == 0 {
        return Err(Error::Format(format!("{width}x{height} image from {} values", values.len())));
    }
    let max = values.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if max > 0.0 && v.is_finite() {
            (v.max(0.0) / max * 255.0).round().min(255.0) as u8
        } else {
            0
        }
    }));
    Ok(out)
}

/// |v| of a lattice field as a PGM heatmap (y increasing upwards).
pub fn write_pgm_abs(path: &Path, lattice: &Lattice, v: &[C64]) -> Result<()> {
    let n = lattice.n;
    let r = raster(lattice, v);
    let mut vals = Vec::with_capacity(n * n);
    for row in (0..n).rev() {
        vals.extend(r[row * n..(row + 1) * n].iter().map(|z| z.norm()));
    }
    std::fs::write(path, pgm_bytes(n, n, &vals)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("sub/a");
        let v: Vec<C64> = (0..12).map(|k| C64::new(k as f64 / 7.0, -(k as f64).sqrt())).collect();
        write_complex(&base, &v, &[3, 4], "g").unwrap();
        let (h, d) = read_array(&base).unwrap();
        assert_eq!(h.shape, vec![3, 4]);
        assert_eq!(h.dtype, Dtype::Complex128);
        assert_eq!(d, ArrayData::Complex(v));
        assert_eq!(std::fs::metadata(base.with_extension("bin")).unwrap().len(), 12 * 16);
    }

    #[test]
    fn real_round_trip_and_promotion() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("r");
        write_real(&base, &[1.5, -2.0], &[2], "x").unwrap();
        let v = read_complex(&base, &[2], "x").unwrap();
        assert_eq!(v, vec![C64::new(1.5, 0.0), C64::new(-2.0, 0.0)]);
        assert!(read_complex(&base, &[2], "y").is_err());
        assert!(read_complex(&base, &[3], "x").is_err());
    }

    #[test]
    fn corrupted_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        write_real(&base, &[1.0], &[1], "x").unwrap();
        std::fs::write(base.with_extension("json"), "{\"dtype\": \"float64\", \"shape\": [1]").unwrap();
        assert!(matches!(read_array(&base), Err(Error::Format(_))));
        std::fs::write(base.with_extension("json"), "{\"dtype\":\"float64\",\"shape\":[2],\"grid\":\"x\"}").unwrap();
        assert!(matches!(read_array(&base), Err(Error::Format(_))));
        assert!(write_real(&base, &[1.0], &[2], "x").is_err());
    }

    #[test]
    fn raster_round_trip() {
        let l = Lattice::new(16).unwrap();
        let v: Vec<C64> = (0..l.len()).map(|k| C64::new(k as f64, 1.0)).collect();
        let r = raster(&l, &v);
        assert_eq!(r.len(), 256);
        assert_eq!(from_raster(&l, &r).unwrap(), v);
    }

    #[test]
    fn pgm_header_and_scaling() {
        let b = pgm_bytes(2, 1, &[0.5, 1.0]).unwrap();
        assert_eq!(&b[..11], b"P5\n2 1\n255\n");
        assert_eq!(&b[11..], &[128, 255]);
        let z = pgm_bytes(1, 1, &[0.0]).unwrap();
        assert_eq!(*z.last().unwrap(), 0);
        assert!(pgm_bytes(2, 2, &[1.0]).is_err());
    }
}
