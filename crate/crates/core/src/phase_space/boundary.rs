//! Fan-beam grids on ∂₊SM and on the whole of ∂SM.

use super::lattice::lagrange4;
use crate::error::{Error, Result};
use crate::surface::{BoundaryPoint, ConformalMetric};
use crate::C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaNodes {
    /// α_j = −π/2 + (j + ½)π/n_α; the grid extends to a uniform fiber grid on ∂SM
    Midpoint,
    /// Gauss–Legendre nodes on (−π/2, π/2); ∂₊SM only
    GaussLegendre,
}

pub struct BoundaryGrid {
    pub metric: Arc<ConformalMetric>,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub kind: AlphaNodes,
    pub alphas: Vec<f64>,
    alpha_w: Vec<f64>,
    /// λ at the boundary angles
    pub lam: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for BoundaryGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BoundaryGrid({}x{} {:?})", self.n_beta, self.n_alpha, self.kind)
    }
}

/// Complex samples on ∂₊SM indexed [β][α].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    pub n_beta: usize,
    pub n_alpha: usize,
    pub data: Vec<C64>,
}

/// Complex samples on ∂SM indexed [β][j], j < n_α inward, j ≥ n_α outward,
/// with fiber angle θ = β + π + α_j, α_j = −π/2 + (j + ½)π/n_α.
#[derive(Clone, Debug, PartialEq)]
pub struct FullBoundaryField {
    pub n_beta: usize,
    pub n_fiber: usize,
    pub data: Vec<C64>,
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let mut q0 = 1.0;
                let mut q1 = z;
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let d = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * d * d);
                break;
            }
        }
        x[i] = z;
    }
    let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

impl BoundaryGrid {
    pub fn new(metric: Arc<ConformalMetric>, n_beta: usize, n_alpha: usize, kind: AlphaNodes) -> Result<Arc<Self>> {
        if n_beta < 8 || n_alpha < 4 {
            return Err(Error::invalid(format!("fan-beam grid {n_beta}x{n_alpha} is too small")));
        }
        let (alphas, alpha_w) = match kind {
            AlphaNodes::Midpoint => {
                let d = PI / n_alpha as f64;
                (
                    (0..n_alpha).map(|j| -PI / 2.0 + (j as f64 + 0.5) * d).collect(),
                    vec![d; n_alpha],
                )
            }
            AlphaNodes::GaussLegendre => {
                let (x, w) = gauss_legendre(n_alpha);
                (
                    x.iter().map(|t| t * PI / 2.0).collect(),
                    w.iter().map(|t| t * PI / 2.0).collect(),
                )
            }
        };
        let lam = (0..n_beta)
            .map(|i| {
                let b = 2.0 * PI * i as f64 / n_beta as f64;
                metric.lambda(b.cos(), b.sin())
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(2 * n_alpha);
        let inv = planner.plan_fft_inverse(2 * n_alpha);
        Ok(Arc::new(Self {
            metric,
            n_beta,
            n_alpha,
            kind,
            alphas,
            alpha_w,
            lam,
            fwd,
            inv,
        }))
    }

    pub fn len(&self) -> usize {
        self.n_beta * self.n_alpha
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_fiber(&self) -> usize {
        2 * self.n_alpha
    }

    pub fn descriptor(&self) -> String {
        format!("fan:{}x{}:{:?}", self.n_beta, self.n_alpha, self.kind)
    }

    pub fn d_beta(&self) -> f64 {
        2.0 * PI / self.n_beta as f64
    }

    pub fn beta(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n_beta as f64
    }

    pub fn point(&self, i: usize, j: usize) -> BoundaryPoint {
        BoundaryPoint::inward(self.beta(i), self.alphas[j])
    }

    /// μ-weighted quadrature weight e^{λ} dβ · w_α · cos α.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.lam[i].exp() * self.d_beta() * self.alpha_w[j] * self.alphas[j].cos()
    }

    pub fn require_full(&self) -> Result<()> {
        if self.kind != AlphaNodes::Midpoint {
            return Err(Error::mismatch("operators on all of ∂SM need midpoint α nodes"));
        }
        Ok(())
    }

    /// α-coordinate of full fiber index j (θ = β + π + α).
    pub fn full_alpha(&self, j: usize) -> f64 {
        -PI / 2.0 + (j as f64 + 0.5) * PI / self.n_alpha as f64
    }

    /// Boundary point of full index (i, j).
    pub fn full_point(&self, i: usize, j: usize) -> BoundaryPoint {
        let a = self.full_alpha(j);
        if j < self.n_alpha {
            BoundaryPoint::inward(self.beta(i), a)
        } else {
            BoundaryPoint::outward(self.beta(i), a - PI)
        }
    }

    /// Weight for L²(∂SM, |μ| dΣ²).
    pub fn full_weight(&self, i: usize, j: usize) -> f64 {
        let d = PI / self.n_alpha as f64;
        self.lam[i].exp() * self.d_beta() * d * self.full_alpha(j).cos().abs()
    }

    pub fn zeros(&self) -> BoundaryField {
        BoundaryField {
            n_beta: self.n_beta,
            n_alpha: self.n_alpha,
            data: vec![C64::new(0.0, 0.0); self.len()],
        }
    }

    pub fn full_zeros(&self) -> FullBoundaryField {
        FullBoundaryField {
            n_beta: self.n_beta,
            n_fiber: self.n_fiber(),
            data: vec![C64::new(0.0, 0.0); self.n_beta * self.n_fiber()],
        }
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> C64 + Sync + Send) -> BoundaryField {
        let na = self.n_alpha;
        let data = crate::par::map(self.len(), |k| f(self.beta(k / na), self.alphas[k % na]));
        BoundaryField {
            n_beta: self.n_beta,
            n_alpha: na,
            data,
        }
    }

    pub fn check(&self, w: &BoundaryField) -> Result<()> {
        if w.n_beta != self.n_beta || w.n_alpha != self.n_alpha {
            return Err(Error::mismatch(format!(
                "boundary field {}x{} on grid {}x{}",
                w.n_beta, w.n_alpha, self.n_beta, self.n_alpha
            )));
        }
        Ok(())
    }

    pub fn check_full(&self, w: &FullBoundaryField) -> Result<()> {
        self.require_full()?;
        if w.n_beta != self.n_beta || w.n_fiber != self.n_fiber() {
            return Err(Error::mismatch(format!(
                "∂SM field {}x{} on grid {}x{}",
                w.n_beta,
                w.n_fiber,
                self.n_beta,
                self.n_fiber()
            )));
        }
        Ok(())
    }

    /// ⟨w, z⟩ in L²_μ(∂₊SM).
    pub fn inner(&self, w: &BoundaryField, z: &BoundaryField) -> Result<C64> {
        self.check(w)?;
        self.check(z)?;
        let na = self.n_alpha;
        Ok((0..self.len())
            .map(|k| w.data[k] * z.data[k].conj() * self.weight(k / na, k % na))
            .sum())
    }

    pub fn norm(&self, w: &BoundaryField) -> f64 {
        self.inner(w, w).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    pub fn full_inner(&self, w: &FullBoundaryField, z: &FullBoundaryField) -> Result<C64> {
        self.check_full(w)?;
        self.check_full(z)?;
        let nf = self.n_fiber();
        Ok((0..w.data.len())
            .map(|k| w.data[k] * z.data[k].conj() * self.full_weight(k / nf, k % nf))
            .sum())
    }

    pub fn full_norm(&self, w: &FullBoundaryField) -> f64 {
        self.full_inner(w, w).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// Restriction of a ∂SM field to ∂₊SM.
    pub fn restrict(&self, w: &FullBoundaryField) -> BoundaryField {
        let (na, nf) = (self.n_alpha, self.n_fiber());
        let data = (0..self.len())
            .map(|k| w.data[(k / na) * nf + k % na])
            .collect();
        BoundaryField {
            n_beta: self.n_beta,
            n_alpha: na,
            data,
        }
    }

    /// Extension of a ∂₊SM field by zero on ∂₋SM.
    pub fn extend_by_zero(&self, w: &BoundaryField) -> FullBoundaryField {
        let (na, nf) = (self.n_alpha, self.n_fiber());
        let mut out = self.full_zeros();
        for k in 0..self.len() {
            out.data[(k / na) * nf + k % na] = w.data[k];
        }
        out
    }

    /// Applies a fiber-mode multiplier m(k) on every boundary fiber.
    pub fn fiber_multiplier(&self, w: &FullBoundaryField, m: impl Fn(i64) -> C64 + Sync) -> Result<FullBoundaryField> {
        self.check_full(w)?;
        let nf = self.n_fiber();
        let mult: Vec<C64> = (0..nf)
            .map(|c| {
                let k = if c < nf / 2 {
                    c as i64
                } else if c == nf / 2 {
                    return C64::new(0.0, 0.0);
                } else {
                    c as i64 - nf as i64
                };
                m(k)
            })
            .collect();
        let mut out = w.clone();
        crate::par::for_chunks(&mut out.data, nf, |_, row| {
            self.fwd.process(row);
            for (c, v) in row.iter_mut().enumerate() {
                *v *= mult[c] / nf as f64;
            }
            self.inv.process(row);
        });
        Ok(out)
    }

    /// Fiberwise Hilbert transform on ∂SM.
    pub fn hilbert(&self, w: &FullBoundaryField) -> Result<FullBoundaryField> {
        self.fiber_multiplier(w, |k| C64::new(0.0, -(k.signum() as f64)))
    }

    /// Fiber mean (mode 0) at each boundary angle.
    pub fn fiber_mean(&self, w: &FullBoundaryField) -> Vec<C64> {
        let nf = self.n_fiber();
        (0..self.n_beta)
            .map(|i| w.data[i * nf..(i + 1) * nf].iter().sum::<C64>() / nf as f64)
            .collect()
    }

    /// Fiber mode k (w.r.t. the absolute angle θ) at each boundary angle.
    pub fn fiber_mode(&self, w: &FullBoundaryField, k: i64) -> Vec<C64> {
        let nf = self.n_fiber();
        (0..self.n_beta)
            .map(|i| {
                let s: C64 = (0..nf)
                    .map(|j| {
                        let th = self.beta(i) + PI + self.full_alpha(j);
                        w.data[i * nf + j] * C64::new(0.0, -(k as f64) * th).exp()
                    })
                    .sum();
                s / nf as f64
            })
            .collect()
    }

    /// Cubic interpolation on ∂₊SM at (β, α); α outside the node range is
    /// extrapolated from the edge stencil and reported through the flag.
    pub fn interp(&self, w: &BoundaryField, beta: f64, alpha: f64) -> (C64, bool) {
        let nb = self.n_beta as f64;
        let u = beta.rem_euclid(2.0 * PI) / self.d_beta();
        let i0 = u.floor() as i64;
        let wb = lagrange4(u - i0 as f64);
        let na = self.n_alpha;
        let clamped = alpha < self.alphas[0] || alpha > self.alphas[na - 1];
        let (j0, wa): (usize, [f64; 4]) = match self.kind {
            AlphaNodes::Midpoint => {
                let d = PI / na as f64;
                let t = (alpha + PI / 2.0) / d - 0.5;
                let j = (t.floor() as i64).clamp(1, na as i64 - 3);
                (j as usize - 1, lagrange4(t - j as f64))
            }
            AlphaNodes::GaussLegendre => {
                let pos = self.alphas.partition_point(|&a| a < alpha) as i64;
                let j = (pos - 2).clamp(0, na as i64 - 4) as usize;
                let xs = &self.alphas[j..j + 4];
                let mut wts = [0.0; 4];
                for a in 0..4 {
                    let mut p = 1.0;
                    for b in 0..4 {
                        if a != b {
                            p *= (alpha - xs[b]) / (xs[a] - xs[b]);
                        }
                    }
                    wts[a] = p;
                }
                (j, wts)
            }
        };
        let mut s = C64::new(0.0, 0.0);
        for (a, wbv) in wb.iter().enumerate() {
            let i = (i0 + a as i64 - 1).rem_euclid(nb as i64) as usize;
            for (b, wav) in wa.iter().enumerate() {
                s += w.data[i * na + j0 + b] * (wbv * wav);
            }
        }
        (s, clamped)
    }

    /// Periodic cubic interpolation on ∂SM at boundary angle β and fiber
    /// coordinate α = θ − β − π.
    pub fn interp_full(&self, w: &FullBoundaryField, beta: f64, alpha: f64) -> C64 {
        let nb = self.n_beta as i64;
        let nf = self.n_fiber() as i64;
        let u = beta.rem_euclid(2.0 * PI) / self.d_beta();
        let i0 = u.floor() as i64;
        let wb = lagrange4(u - i0 as f64);
        let d = PI / self.n_alpha as f64;
        let t = (alpha + PI / 2.0).rem_euclid(2.0 * PI) / d - 0.5;
        let j0 = t.floor() as i64;
        let wa = lagrange4(t - j0 as f64);
        let mut s = C64::new(0.0, 0.0);
        for (a, wbv) in wb.iter().enumerate() {
            let i = (i0 + a as i64 - 1).rem_euclid(nb) as usize;
            for (b, wav) in wa.iter().enumerate() {
                let j = (j0 + b as i64 - 1).rem_euclid(nf) as usize;
                s += w.data[i * nf as usize + j] * (wbv * wav);
            }
        }
        s
    }
}

impl BoundaryField {
    pub fn zip(&self, o: &BoundaryField, f: impl Fn(C64, C64) -> C64) -> BoundaryField {
        BoundaryField {
            data: self.data.iter().zip(&o.data).map(|(a, b)| f(*a, *b)).collect(),
            ..*self
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> BoundaryField {
        BoundaryField {
            data: self.data.iter().map(|a| f(*a)).collect(),
            ..*self
        }
    }

    pub fn add(&self, o: &BoundaryField) -> BoundaryField {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &BoundaryField) -> BoundaryField {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, c: C64) -> BoundaryField {
        self.map(|a| a * c)
    }

    pub fn conj(&self) -> BoundaryField {
        self.map(|a| a.conj())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl FullBoundaryField {
    pub fn zip(&self, o: &FullBoundaryField, f: impl Fn(C64, C64) -> C64) -> FullBoundaryField {
        FullBoundaryField {
            data: self.data.iter().zip(&o.data).map(|(a, b)| f(*a, *b)).collect(),
            ..*self
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> FullBoundaryField {
        FullBoundaryField {
            data: self.data.iter().map(|a| f(*a)).collect(),
            ..*self
        }
    }

    pub fn add(&self, o: &FullBoundaryField) -> FullBoundaryField {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &FullBoundaryField) -> FullBoundaryField {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, c: C64) -> FullBoundaryField {
        self.map(|a| a * c)
    }

    pub fn conj(&self) -> FullBoundaryField {
        self.map(|a| a.conj())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_nodes_integrate_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn mu_measure_total() {
        // ∫∫ cos α dα e^λ dβ = 2 · 2π for the Euclidean disk
        for kind in [AlphaNodes::Midpoint, AlphaNodes::GaussLegendre] {
            let g = BoundaryGrid::new(Arc::new(ConformalMetric::euclidean()), 32, 24, kind).unwrap();
            let one = g.field_from_fn(|_, _| C64::new(1.0, 0.0));
            let m = g.inner(&one, &one).unwrap().re;
            assert!((m - 4.0 * PI).abs() < 1e-2, "{kind:?} {m}");
        }
    }

    #[test]
    fn full_hilbert_matches_mode_rule() {
        let g = BoundaryGrid::new(Arc::new(ConformalMetric::euclidean()), 16, 12, AlphaNodes::Midpoint).unwrap();
        let mut w = g.full_zeros();
        let nf = g.n_fiber();
        for i in 0..16 {
            for j in 0..nf {
                let th = g.beta(i) + PI + g.full_alpha(j);
                w.data[i * nf + j] = C64::new((2.0 * th).cos(), 0.0) + 0.5;
            }
        }
        let h = g.hilbert(&w).unwrap();
        for i in 0..16 {
            for j in 0..nf {
                let th = g.beta(i) + PI + g.full_alpha(j);
                assert!((h.data[i * nf + j] - (2.0 * th).sin()).norm() < 1e-13);
            }
        }
    }
}
