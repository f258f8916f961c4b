//! Cell-centred Cartesian lattice clipped to the unit disk, with a ghost band
//! outside the circle filled by local polynomial extrapolation.

use crate::error::{Error, Result};
use crate::func::{Func, Sampled};
use crate::linalg::dense_solve_real;
use crate::C64;
use faer::Mat;
use std::sync::Arc;

/// Cells of padding on each side of [-1, 1]².
pub const MARGIN: usize = 5;
/// Ghost nodes are all outside nodes with r < 1 + GHOST_WIDTH·h.
const GHOST_WIDTH: f64 = 3.6;
/// Total polynomial degree of the ghost extrapolant.
const GHOST_DEGREE: usize = 5;

#[derive(Clone, Debug)]
struct Ghost {
    slot: usize,
    stencil: Vec<(usize, f64)>,
}

#[derive(Debug)]
pub struct Lattice {
    /// cells across the diameter
    pub n: usize,
    /// nodes per side including padding
    pub side: usize,
    pub h: f64,
    /// (ix, iy) of each inside node, row-major order
    pub nodes: Vec<(usize, usize)>,
    /// slot → inside index
    index: Vec<Option<usize>>,
    ghosts: Vec<Ghost>,
    /// covered area per inside node, including redistributed clipped area
    pub area: Vec<f64>,
    /// slot is inside or ghost
    available: Vec<bool>,
}

fn monomials(x: f64, y: f64, out: &mut [f64]) {
    let mut k = 0;
    for d in 0..=GHOST_DEGREE {
        for py in 0..=d {
            out[k] = x.powi((d - py) as i32) * y.powi(py as i32);
            k += 1;
        }
    }
}

const N_MONO: usize = (GHOST_DEGREE + 1) * (GHOST_DEGREE + 2) / 2;

impl Lattice {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if n < 8 {
            return Err(Error::invalid(format!("lattice needs at least 8 cells across, got {n}")));
        }
        let side = n + 2 * MARGIN;
        let h = 2.0 / n as f64;
        let mut index = vec![None; side * side];
        let mut nodes = Vec::new();
        let coord = |i: usize| -1.0 + (i as f64 - MARGIN as f64 + 0.5) * h;
        for iy in 0..side {
            for ix in 0..side {
                let (x, y) = (coord(ix), coord(iy));
                if x * x + y * y < 1.0 {
                    index[iy * side + ix] = Some(nodes.len());
                    nodes.push((ix, iy));
                }
            }
        }
        // covered areas by subsampling clipped cells
        let sub = 24;
        let cell_area = |ix: usize, iy: usize| -> f64 {
            let (cx, cy) = (coord(ix), coord(iy));
            let corners_in = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]
                .iter()
                .all(|(a, b)| (cx + a * h).powi(2) + (cy + b * h).powi(2) <= 1.0);
            if corners_in {
                return h * h;
            }
            let mut cnt = 0usize;
            for a in 0..sub {
                for b in 0..sub {
                    let x = cx + ((a as f64 + 0.5) / sub as f64 - 0.5) * h;
                    let y = cy + ((b as f64 + 0.5) / sub as f64 - 0.5) * h;
                    if x * x + y * y <= 1.0 {
                        cnt += 1;
                    }
                }
            }
            h * h * cnt as f64 / (sub * sub) as f64
        };
        let mut area: Vec<f64> = nodes.iter().map(|&(ix, iy)| cell_area(ix, iy)).collect();
        for iy in 0..side {
            for ix in 0..side {
                if index[iy * side + ix].is_some() {
                    continue;
                }
                let (x, y) = (coord(ix), coord(iy));
                let r = (x * x + y * y).sqrt();
                if r > 1.0 + h {
                    continue;
                }
                let a = cell_area(ix, iy);
                if a == 0.0 {
                    continue;
                }
                let mut best = None;
                let mut bd = f64::INFINITY;
                for dy in -2i64..=2 {
                    for dx in -2i64..=2 {
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if let Some(k) = index[(jy as usize) * side + jx as usize] {
                            let d = ((dx * dx + dy * dy) as f64).sqrt();
                            if d < bd {
                                bd = d;
                                best = Some(k);
                            }
                        }
                    }
                }
                if let Some(k) = best {
                    area[k] += a;
                }
            }
        }
        let mut lat = Self {
            n,
            side,
            h,
            nodes,
            index,
            ghosts: Vec::new(),
            area,
            available: vec![false; side * side],
        };
        lat.build_ghosts()?;
        for (k, &(ix, iy)) in lat.nodes.iter().enumerate() {
            let _ = k;
            lat.available[iy * side + ix] = true;
        }
        for g in &lat.ghosts {
            lat.available[g.slot] = true;
        }
        Ok(Arc::new(lat))
    }

    fn build_ghosts(&mut self) -> Result<()> {
        let side = self.side;
        let h = self.h;
        let mut ghosts = Vec::new();
        for iy in 0..side {
            for ix in 0..side {
                let slot = iy * side + ix;
                if self.index[slot].is_some() {
                    continue;
                }
                let (x, y) = self.slot_xy(slot);
                let r = (x * x + y * y).sqrt();
                if r >= 1.0 + GHOST_WIDTH * h {
                    continue;
                }
                // nearest inside nodes by distance
                let mut cand: Vec<(f64, usize)> = Vec::new();
                let reach = 9i64;
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if jx < 0 || jy < 0 || jx >= side as i64 || jy >= side as i64 {
                            continue;
                        }
                        if let Some(k) = self.index[jy as usize * side + jx as usize] {
                            cand.push(((dx * dx + dy * dy) as f64, k));
                        }
                    }
                }
                cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cand.truncate(4 * N_MONO);
                if cand.len() < N_MONO + 4 {
                    return Err(Error::invalid("lattice too coarse for ghost extrapolation"));
                }
                let mut g = Mat::<f64>::zeros(N_MONO, N_MONO);
                let mut phi = vec![0.0; N_MONO];
                let mut rows = Vec::with_capacity(cand.len());
                for &(d2, k) in &cand {
                    let (nx, ny) = self.node_xy(k);
                    monomials((nx - x) / h, (ny - y) / h, &mut phi);
                    let w = 1.0 / (1.0 + d2 / 4.0);
                    for a in 0..N_MONO {
                        for b in 0..N_MONO {
                            g[(a, b)] += w * phi[a] * phi[b];
                        }
                    }
                    rows.push((k, w, phi.clone()));
                }
                let mut e0 = Mat::<f64>::zeros(N_MONO, 1);
                e0[(0, 0)] = 1.0;
                let z = dense_solve_real(&g, &e0);
                let stencil = rows
                    .into_iter()
                    .map(|(k, w, p)| (k, w * (0..N_MONO).map(|a| p[a] * z[(a, 0)]).sum::<f64>()))
                    .collect();
                ghosts.push(Ghost { slot, stencil });
            }
        }
        self.ghosts = ghosts;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + (i as f64 - MARGIN as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn slot_xy(&self, slot: usize) -> (f64, f64) {
        (self.coord(slot % self.side), self.coord(slot / self.side))
    }

    #[inline]
    pub fn node_xy(&self, k: usize) -> (f64, f64) {
        let (ix, iy) = self.nodes[k];
        (self.coord(ix), self.coord(iy))
    }

    #[inline]
    pub fn slot_of(&self, k: usize) -> usize {
        let (ix, iy) = self.nodes[k];
        iy * self.side + ix
    }

    pub fn inside_index(&self, slot: usize) -> Option<usize> {
        self.index[slot]
    }

    pub fn descriptor(&self) -> String {
        format!("lattice:{}", self.n)
    }

    pub fn sample(&self, f: &Func) -> Vec<C64> {
        crate::par::map(self.len(), |k| {
            let (x, y) = self.node_xy(k);
            f.value(x, y)
        })
    }

    pub fn sample_real(&self, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Vec<f64> {
        crate::par::map(self.len(), |k| {
            let (x, y) = self.node_xy(k);
            f(x, y)
        })
    }

    /// Full padded array: inside values, extrapolated ghosts, zero elsewhere.
    pub fn pad(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.side * self.side];
        for (k, val) in v.iter().enumerate() {
            out[self.slot_of(k)] = *val;
        }
        for g in &self.ghosts {
            out[g.slot] = g.stencil.iter().map(|&(k, w)| v[k] * w).sum();
        }
        out
    }

    /// Ghost stencil of a padded slot in terms of inside nodes.
    pub fn slot_stencil(&self, slot: usize) -> Vec<(usize, f64)> {
        if let Some(k) = self.index[slot] {
            return vec![(k, 1.0)];
        }
        self.ghosts
            .iter()
            .find(|g| g.slot == slot)
            .map(|g| g.stencil.clone())
            .unwrap_or_default()
    }

    fn diff(&self, p: &[C64], k: usize, stride: usize) -> C64 {
        let s = self.slot_of(k);
        let av = |o: isize| -> bool {
            let t = s as isize + o * stride as isize;
            t >= 0 && (t as usize) < self.available.len() && self.available[t as usize]
        };
        let at = |o: isize| p[(s as isize + o * stride as isize) as usize];
        if av(2) && av(-2) {
            (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) / (12.0 * self.h)
        } else {
            (at(1) - at(-1)) / (2.0 * self.h)
        }
    }

    /// ∂x at inside nodes from a padded array.
    pub fn dx_padded(&self, p: &[C64]) -> Vec<C64> {
        (0..self.len()).map(|k| self.diff(p, k, 1)).collect()
    }

    pub fn dy_padded(&self, p: &[C64]) -> Vec<C64> {
        (0..self.len()).map(|k| self.diff(p, k, self.side)).collect()
    }

    pub fn grad(&self, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let p = self.pad(v);
        (self.dx_padded(&p), self.dy_padded(&p))
    }

    /// (∂z, ∂z̄) at inside nodes.
    pub fn dz(&self, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let (gx, gy) = self.grad(v);
        let i = C64::i();
        let dz = gx.iter().zip(&gy).map(|(a, b)| (a - i * b) * 0.5).collect();
        let dzb = gx.iter().zip(&gy).map(|(a, b)| (a + i * b) * 0.5).collect();
        (dz, dzb)
    }

    /// Tensor cubic Lagrange stencil (padded slot, weight) at (x, y).
    #[inline]
    pub fn interp_stencil(&self, x: f64, y: f64) -> [(usize, f64); 16] {
        let u = (x + 1.0) / self.h + MARGIN as f64 - 0.5;
        let w = (y + 1.0) / self.h + MARGIN as f64 - 0.5;
        let i0 = (u.floor() as isize).clamp(1, self.side as isize - 3);
        let j0 = (w.floor() as isize).clamp(1, self.side as isize - 3);
        let wx = lagrange4(u - i0 as f64);
        let wy = lagrange4(w - j0 as f64);
        let mut out = [(0usize, 0.0); 16];
        for b in 0..4 {
            for a in 0..4 {
                let slot = (j0 + b as isize - 1) as usize * self.side + (i0 + a as isize - 1) as usize;
                out[b * 4 + a] = (slot, wx[a] * wy[b]);
            }
        }
        out
    }

    #[inline]
    pub fn interp(&self, padded: &[C64], x: f64, y: f64) -> C64 {
        self.interp_stencil(x, y)
            .iter()
            .map(|&(s, w)| padded[s] * w)
            .sum()
    }

    /// Quadrature ∫ v · weight dx dy with the clipped-cell areas.
    pub fn integrate(&self, v: &[C64]) -> C64 {
        v.iter().zip(&self.area).map(|(a, w)| a * *w).sum()
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Inside nodes whose 5-point difference stencil reaches ghost values.
    pub fn boundary_stencil_nodes(&self) -> usize {
        (0..self.len())
            .filter(|&k| {
                let s = self.slot_of(k);
                [1isize, 2, -1, -2]
                    .iter()
                    .flat_map(|&o| [o, o * self.side as isize])
                    .any(|o| self.index[(s as isize + o) as usize].is_none())
            })
            .count()
    }
}

/// Cubic Lagrange weights for nodes −1, 0, 1, 2 at offset t.
#[inline]
pub fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// A lattice field evaluable off-grid (value by cubic interpolation,
/// gradient by interpolated differences).
#[derive(Debug)]
pub struct LatticeFunc {
    lattice: Arc<Lattice>,
    value: Vec<C64>,
    dx: Vec<C64>,
    dy: Vec<C64>,
}

impl LatticeFunc {
    pub fn new(lattice: Arc<Lattice>, v: &[C64]) -> Self {
        let (gx, gy) = lattice.grad(v);
        let value = lattice.pad(v);
        let dx = lattice.pad(&gx);
        let dy = lattice.pad(&gy);
        Self { lattice, value, dx, dy }
    }

    pub fn into_func(self) -> Func {
        Func::Sampled(Arc::new(self))
    }
}

impl Sampled for LatticeFunc {
    fn value(&self, x: f64, y: f64) -> C64 {
        self.lattice.interp(&self.value, x, y)
    }

    fn grad(&self, x: f64, y: f64) -> (C64, C64) {
        (self.lattice.interp(&self.dx, x, y), self.lattice.interp(&self.dy, x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_matches_disk() {
        let l = Lattice::new(64).unwrap();
        assert!((l.total_area() - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn derivatives_of_smooth_function_converge() {
        let f = Func::gaussian([0.3, -0.2], 0.5, C64::new(1.0, 0.3)).plus(Func::monomial(3, 1, 0.2));
        let err = |n: usize| {
            let l = Lattice::new(n).unwrap();
            let v = l.sample(&f);
            let (gx, gy) = l.grad(&v);
            let mut e: f64 = 0.0;
            for k in 0..l.len() {
                let (x, y) = l.node_xy(k);
                let (ex, ey) = f.grad(x, y);
                e = e.max((gx[k] - ex).norm()).max((gy[k] - ey).norm());
            }
            e
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 2e-3, "{e2}");
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn interpolation_reaches_boundary() {
        let f = Func::monomial(2, 1, 1.0).plus(Func::gaussian([0.0, 0.5], 0.4, 1.0));
        let l = Lattice::new(64).unwrap();
        let p = l.pad(&l.sample(&f));
        for i in 0..50 {
            let b = i as f64 * 0.1257;
            let (x, y) = (b.cos(), b.sin());
            assert!((l.interp(&p, x, y) - f.value(x, y)).norm() < 1e-4);
        }
    }
}
