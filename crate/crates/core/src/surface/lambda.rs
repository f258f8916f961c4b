use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

/// Value and derivatives up to second order of the conformal exponent.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Jet {
    pub fn laplacian(&self) -> f64 {
        self.xx + self.yy
    }
}

/// Conformal exponent λ of the metric e^{2λ}(dx² + dy²).
#[derive(Clone, Debug)]
pub enum Lambda {
    Zero,
    /// amplitude · exp(−|p − center|² / (2 width²))
    Gaussian {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
    },
    /// coeff · (x² + y²)
    Quadratic { coeff: f64 },
    /// gx · x + gy · y
    Linear { gx: f64, gy: f64 },
    Grid(LambdaGrid),
}

impl Lambda {
    pub fn jet(&self, x: f64, y: f64) -> Jet {
        match self {
            Lambda::Zero => Jet::default(),
            Lambda::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let s2 = width * width;
                let g = amplitude * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                Jet {
                    v: g,
                    x: -g * dx / s2,
                    y: -g * dy / s2,
                    xx: g * (dx * dx / s2 - 1.0) / s2,
                    xy: g * dx * dy / (s2 * s2),
                    yy: g * (dy * dy / s2 - 1.0) / s2,
                }
            }
            Lambda::Quadratic { coeff } => Jet {
                v: coeff * (x * x + y * y),
                x: 2.0 * coeff * x,
                y: 2.0 * coeff * y,
                xx: 2.0 * coeff,
                xy: 0.0,
                yy: 2.0 * coeff,
            },
            Lambda::Linear { gx, gy } => Jet {
                v: gx * x + gy * y,
                x: *gx,
                y: *gy,
                ..Jet::default()
            },
            Lambda::Grid(g) => g.jet(x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Lambda::Zero => true,
            Lambda::Gaussian { amplitude, .. } => *amplitude == 0.0,
            Lambda::Quadratic { coeff } => *coeff == 0.0,
            Lambda::Linear { gx, gy } => *gx == 0.0 && *gy == 0.0,
            Lambda::Grid(g) => g.values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Lambda::Zero => "euclidean".into(),
            Lambda::Gaussian {
                center,
                width,
                amplitude,
            } => format!(
                "gaussian:{:?}:{:?}:{:?}:{:?}",
                center[0], center[1], width, amplitude
            ),
            Lambda::Quadratic { coeff } => format!("quadratic:{coeff:?}"),
            Lambda::Linear { gx, gy } => format!("linear:{gx:?}:{gy:?}"),
            Lambda::Grid(g) => format!("grid:{}:{:?}:{}", g.n, g.extent, g.checksum()),
        }
    }
}

/// Header of a λ grid file: `<name>.json` next to `<name>.bin` holding
/// `n*n` little-endian f64 values in row-major order (row index = y).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaGridHeader {
    pub n: usize,
    /// samples cover [-extent, extent]² with endpoints included
    pub extent: f64,
}

/// Samples of λ on a square lattice, interpolated by Keys cubic convolution.
#[derive(Clone, Debug)]
pub struct LambdaGrid {
    pub n: usize,
    pub extent: f64,
    pub values: Vec<f64>,
}

fn keys(t: f64) -> (f64, f64, f64) {
    const A: f64 = -0.5;
    let s = t.abs();
    let sg = if t < 0.0 { -1.0 } else { 1.0 };
    if s <= 1.0 {
        (
            (A + 2.0) * s * s * s - (A + 3.0) * s * s + 1.0,
            sg * (3.0 * (A + 2.0) * s * s - 2.0 * (A + 3.0) * s),
            6.0 * (A + 2.0) * s - 2.0 * (A + 3.0),
        )
    } else if s < 2.0 {
        (
            A * s * s * s - 5.0 * A * s * s + 8.0 * A * s - 4.0 * A,
            sg * (3.0 * A * s * s - 10.0 * A * s + 8.0 * A),
            6.0 * A * s - 10.0 * A,
        )
    } else {
        (0.0, 0.0, 0.0)
    }
}

impl LambdaGrid {
    pub fn new(n: usize, extent: f64, values: Vec<f64>) -> Result<Self> {
        if n < 4 || values.len() != n * n {
            return Err(Error::Format(format!(
                "lambda grid needs n >= 4 and n*n values, got n={n}, len={}",
                values.len()
            )));
        }
        if extent < 1.0 {
            return Err(Error::Format("lambda grid must cover the unit disk".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("lambda grid has non-finite samples".into()));
        }
        Ok(Self { n, extent, values })
    }

    pub fn from_fn(n: usize, extent: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = 2.0 * extent / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(-extent + i as f64 * h, -extent + j as f64 * h));
            }
        }
        Self::new(n, extent, values)
    }

    /// Reads `path` (the .json header); samples come from the sibling .bin.
    pub fn load(path: &Path) -> Result<Self> {
        let header: LambdaGridHeader = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let bin = path.with_extension("bin");
        let mut bytes = Vec::new();
        std::fs::File::open(&bin)?.read_to_end(&mut bytes)?;
        if bytes.len() != header.n * header.n * 8 {
            return Err(Error::Format(format!(
                "{} holds {} bytes, header expects {}",
                bin.display(),
                bytes.len(),
                header.n * header.n * 8
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(header.n, header.extent, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = LambdaGridHeader {
            n: self.n,
            extent: self.extent,
        };
        std::fs::write(path, serde_json::to_string_pretty(&header)?)?;
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path.with_extension("bin"), bytes)?;
        Ok(())
    }

    fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        // linear extrapolation past the edges keeps the kernel stencil defined
        let ci = i.clamp(0, n - 1);
        let cj = j.clamp(0, n - 1);
        let base = self.values[(cj * n + ci) as usize];
        let di = i - ci;
        let dj = j - cj;
        if di == 0 && dj == 0 {
            return base;
        }
        let si = if di > 0 { -1 } else { 1 };
        let sj = if dj > 0 { -1 } else { 1 };
        let mut v = base;
        if di != 0 {
            let inner = self.values[(cj * n + ci + si) as usize];
            v += (base - inner) * di.abs() as f64;
        }
        if dj != 0 {
            let inner = self.values[((cj + sj) * n + ci) as usize];
            v += (base - inner) * dj.abs() as f64;
        }
        v
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet {
        let h = 2.0 * self.extent / (self.n - 1) as f64;
        let u = (x + self.extent) / h;
        let w = (y + self.extent) / h;
        let i0 = u.floor() as isize;
        let j0 = w.floor() as isize;
        let mut jet = Jet::default();
        for dj in -1..=2 {
            let (ky, kyd, kydd) = keys(w - (j0 + dj) as f64);
            for di in -1..=2 {
                let (kx, kxd, kxdd) = keys(u - (i0 + di) as f64);
                let f = self.at(i0 + di, j0 + dj);
                jet.v += f * kx * ky;
                jet.x += f * kxd * ky;
                jet.y += f * kx * kyd;
                jet.xx += f * kxdd * ky;
                jet.xy += f * kxd * kyd;
                jet.yy += f * kx * kydd;
            }
        }
        jet.x /= h;
        jet.y /= h;
        jet.xx /= h * h;
        jet.xy /= h * h;
        jet.yy /= h * h;
        jet
    }
}
