//! The unit circle bundle SM sampled on lattice nodes × uniform fiber angles.

use super::lattice::Lattice;
use crate::error::{Error, Result};
use crate::func::Func;
use crate::surface::ConformalMetric;
use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub struct SmGrid {
    pub lattice: Arc<Lattice>,
    pub metric: Arc<ConformalMetric>,
    pub n_theta: usize,
    /// highest retained fiber mode
    pub k_max: usize,
    /// λ at the nodes
    pub lam: Vec<f64>,
    /// ∂z λ at the nodes
    pub lam_dz: Vec<C64>,
    /// e^{2λ} · covered area at the nodes (Riemannian area element)
    pub vol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SmGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmGrid")
            .field("n", &self.lattice.n)
            .field("nodes", &self.lattice.len())
            .field("n_theta", &self.n_theta)
            .finish()
    }
}

/// Complex samples indexed [node][angle].
#[derive(Clone, Debug, PartialEq)]
pub struct SmField {
    pub n_nodes: usize,
    pub n_theta: usize,
    pub data: Vec<C64>,
}

/// Fiber Fourier coefficients indexed [node][k + K], k ∈ {−K, …, K}.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSpectrum {
    pub n_nodes: usize,
    pub k_max: usize,
    pub data: Vec<C64>,
}

impl SmGrid {
    pub fn new(lattice: Arc<Lattice>, metric: Arc<ConformalMetric>, n_theta: usize) -> Result<Arc<Self>> {
        if n_theta < 4 || !n_theta.is_power_of_two() {
            return Err(Error::invalid(format!("n_theta must be a power of two >= 4, got {n_theta}")));
        }
        let k_max = n_theta / 2 - 1;
        let n = lattice.len();
        let mut lam = Vec::with_capacity(n);
        let mut lam_dz = Vec::with_capacity(n);
        let mut vol = Vec::with_capacity(n);
        for k in 0..n {
            let (x, y) = lattice.node_xy(k);
            let j = metric.jet(x, y);
            lam.push(j.v);
            lam_dz.push(C64::new(0.5 * j.x, -0.5 * j.y));
            vol.push((2.0 * j.v).exp() * lattice.area[k]);
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_theta);
        let inv = planner.plan_fft_inverse(n_theta);
        Ok(Arc::new(Self {
            lattice,
            metric,
            n_theta,
            k_max,
            lam,
            lam_dz,
            vol,
            fwd,
            inv,
        }))
    }

    pub fn n_nodes(&self) -> usize {
        self.lattice.len()
    }

    pub fn n_modes(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn theta(&self, l: usize) -> f64 {
        2.0 * PI * l as f64 / self.n_theta as f64
    }

    /// Liouville weight of a node-angle pair.
    pub fn liouville(&self, node: usize) -> f64 {
        self.vol[node] * 2.0 * PI / self.n_theta as f64
    }

    pub fn descriptor(&self) -> String {
        format!("sm:{}x{}:{}", self.lattice.n, self.n_theta, self.metric.descriptor())
    }

    pub fn zeros(&self) -> SmField {
        SmField {
            n_nodes: self.n_nodes(),
            n_theta: self.n_theta,
            data: vec![C64::new(0.0, 0.0); self.n_nodes() * self.n_theta],
        }
    }

    pub fn zero_spectrum(&self) -> FiberSpectrum {
        FiberSpectrum {
            n_nodes: self.n_nodes(),
            k_max: self.k_max,
            data: vec![C64::new(0.0, 0.0); self.n_nodes() * self.n_modes()],
        }
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64, f64) -> C64 + Sync + Send) -> SmField {
        let nt = self.n_theta;
        let data = crate::par::map(self.n_nodes(), |k| {
            let (x, y) = self.lattice.node_xy(k);
            (0..nt).map(|l| f(x, y, self.theta(l))).collect::<Vec<_>>()
        })
        .concat();
        SmField {
            n_nodes: self.n_nodes(),
            n_theta: nt,
            data,
        }
    }

    /// Spectrum with mode coefficient functions given in closed form.
    pub fn spectrum_from_modes(&self, modes: &[(i32, Func)]) -> Result<FiberSpectrum> {
        let mut s = self.zero_spectrum();
        let nm = self.n_modes();
        for (k, f) in modes {
            if k.unsigned_abs() as usize > self.k_max {
                return Err(Error::invalid(format!("mode {k} exceeds K = {}", self.k_max)));
            }
            let vals = self.lattice.sample(f);
            let col = (*k + self.k_max as i32) as usize;
            for (node, v) in vals.into_iter().enumerate() {
                s.data[node * nm + col] += v;
            }
        }
        Ok(s)
    }

    pub fn check_field(&self, u: &SmField) -> Result<()> {
        if u.n_nodes != self.n_nodes() || u.n_theta != self.n_theta {
            return Err(Error::mismatch(format!(
                "field {}x{} on grid {}x{}",
                u.n_nodes,
                u.n_theta,
                self.n_nodes(),
                self.n_theta
            )));
        }
        Ok(())
    }

    pub fn check_spectrum(&self, s: &FiberSpectrum) -> Result<()> {
        if s.n_nodes != self.n_nodes() || s.k_max != self.k_max {
            return Err(Error::mismatch(format!(
                "spectrum {}x(K={}) on grid {}x(K={})",
                s.n_nodes,
                s.k_max,
                self.n_nodes(),
                self.k_max
            )));
        }
        Ok(())
    }

    pub fn analyze(&self, u: &SmField) -> Result<FiberSpectrum> {
        self.check_field(u)?;
        let nt = self.n_theta;
        let km = self.k_max;
        let nm = self.n_modes();
        let mut out = self.zero_spectrum();
        let mut buf = u.data.clone();
        crate::par::for_chunks(&mut buf, nt * 64, |_, chunk| {
            self.fwd.process(chunk);
        });
        let scale = 1.0 / nt as f64;
        crate::par::for_chunks(&mut out.data, nm, |node, row| {
            let src = &buf[node * nt..(node + 1) * nt];
            for k in 0..=km {
                row[km + k] = src[k] * scale;
                if k > 0 {
                    row[km - k] = src[nt - k] * scale;
                }
            }
        });
        Ok(out)
    }

    pub fn synthesize(&self, s: &FiberSpectrum) -> Result<SmField> {
        self.check_spectrum(s)?;
        let nt = self.n_theta;
        let km = self.k_max;
        let nm = self.n_modes();
        let mut out = self.zeros();
        crate::par::for_chunks(&mut out.data, nt, |node, row| {
            let src = &s.data[node * nm..(node + 1) * nm];
            for k in 0..=km {
                row[k] = src[km + k];
                if k > 0 {
                    row[nt - k] = src[km - k];
                }
            }
        });
        crate::par::for_chunks(&mut out.data, nt * 64, |_, chunk| {
            self.inv.process(chunk);
        });
        Ok(out)
    }

    /// Coefficient field of mode k over the nodes.
    pub fn mode(&self, s: &FiberSpectrum, k: i32) -> Vec<C64> {
        let nm = self.n_modes();
        if k.unsigned_abs() as usize > self.k_max {
            return vec![C64::new(0.0, 0.0); self.n_nodes()];
        }
        let c = (k + self.k_max as i32) as usize;
        (0..self.n_nodes()).map(|n| s.data[n * nm + c]).collect()
    }

    pub fn set_mode(&self, s: &mut FiberSpectrum, k: i32, v: &[C64]) {
        let nm = self.n_modes();
        let c = (k + self.k_max as i32) as usize;
        for (n, val) in v.iter().enumerate() {
            s.data[n * nm + c] = *val;
        }
    }

    pub fn map_modes(&self, s: &FiberSpectrum, f: impl Fn(i32) -> C64) -> FiberSpectrum {
        let nm = self.n_modes();
        let km = self.k_max as i32;
        let mult: Vec<C64> = (0..nm).map(|c| f(c as i32 - km)).collect();
        let mut out = s.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v *= mult[i % nm];
        }
        out
    }

    /// Fiberwise Hilbert transform: mode k ↦ −i sgn(k).
    pub fn hilbert_spec(&self, s: &FiberSpectrum) -> FiberSpectrum {
        self.map_modes(s, |k| C64::new(0.0, -(k.signum() as f64)))
    }

    pub fn v_spec(&self, s: &FiberSpectrum) -> FiberSpectrum {
        self.map_modes(s, |k| C64::new(0.0, k as f64))
    }

    /// Keeps modes with `keep(k)`.
    pub fn filter_modes(&self, s: &FiberSpectrum, keep: impl Fn(i32) -> bool) -> FiberSpectrum {
        self.map_modes(s, |k| if keep(k) { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// η₊: mode k coefficient c ↦ e^{−λ}(∂z c − k ∂zλ c) at mode k+1.
    pub fn eta_plus_spec(&self, s: &FiberSpectrum) -> FiberSpectrum {
        self.eta(s, true)
    }

    /// η₋: mode k coefficient c ↦ e^{−λ}(∂z̄ c + k ∂z̄λ c) at mode k−1.
    pub fn eta_minus_spec(&self, s: &FiberSpectrum) -> FiberSpectrum {
        self.eta(s, false)
    }

    fn eta(&self, s: &FiberSpectrum, plus: bool) -> FiberSpectrum {
        let km = self.k_max as i32;
        let n = self.n_nodes();
        let nm = self.n_modes();
        let ks: Vec<i32> = if plus { (-km..km).collect() } else { (-km + 1..=km).collect() };
        let cols = crate::par::map(ks.len(), |i| {
            let k = ks[i];
            let c = self.mode(s, k);
            if c.iter().all(|v| v.norm_sqr() == 0.0) {
                return None;
            }
            Some(if plus { self.eta_plus_mode(&c, k) } else { self.eta_minus_mode(&c, k) })
        });
        let mut out = self.zero_spectrum();
        for (i, col) in cols.into_iter().enumerate() {
            if let Some(col) = col {
                let target = (ks[i] + if plus { 1 } else { -1 } + km) as usize;
                for p in 0..n {
                    out.data[p * nm + target] = col[p];
                }
            }
        }
        out
    }

    /// η₊ on a single mode-k coefficient field (result at mode k+1).
    pub fn eta_plus_mode(&self, c: &[C64], k: i32) -> Vec<C64> {
        let (dz, _) = self.lattice.dz(c);
        (0..self.n_nodes())
            .map(|p| (-self.lam[p]).exp() * (dz[p] - c[p] * self.lam_dz[p] * k as f64))
            .collect()
    }

    /// η₋ on a single mode-k coefficient field (result at mode k−1).
    pub fn eta_minus_mode(&self, c: &[C64], k: i32) -> Vec<C64> {
        let (_, dzb) = self.lattice.dz(c);
        (0..self.n_nodes())
            .map(|p| (-self.lam[p]).exp() * (dzb[p] + c[p] * self.lam_dz[p].conj() * k as f64))
            .collect()
    }

    pub fn x_spec(&self, s: &FiberSpectrum) -> FiberSpectrum {
        add_spec(&self.eta_plus_spec(s), &self.eta_minus_spec(s), C64::new(1.0, 0.0))
    }

    /// X⊥ = −i(η₊ − η₋)
    pub fn xperp_spec(&self, s: &FiberSpectrum) -> FiberSpectrum {
        let d = add_spec(&self.eta_plus_spec(s), &self.eta_minus_spec(s), C64::new(-1.0, 0.0));
        scale_spec(&d, C64::new(0.0, -1.0))
    }

    pub fn apply_spec(&self, u: &SmField, f: impl Fn(&FiberSpectrum) -> FiberSpectrum) -> Result<SmField> {
        let s = self.analyze(u)?;
        self.synthesize(&f(&s))
    }

    pub fn apply_x(&self, u: &SmField) -> Result<SmField> {
        self.apply_spec(u, |s| self.x_spec(s))
    }

    pub fn apply_xperp(&self, u: &SmField) -> Result<SmField> {
        self.apply_spec(u, |s| self.xperp_spec(s))
    }

    pub fn apply_v(&self, u: &SmField) -> Result<SmField> {
        self.apply_spec(u, |s| self.v_spec(s))
    }

    pub fn hilbert(&self, u: &SmField) -> Result<SmField> {
        self.apply_spec(u, |s| self.hilbert_spec(s))
    }

    pub fn eta_plus(&self, u: &SmField) -> Result<SmField> {
        self.apply_spec(u, |s| self.eta_plus_spec(s))
    }

    pub fn eta_minus(&self, u: &SmField) -> Result<SmField> {
        self.apply_spec(u, |s| self.eta_minus_spec(s))
    }

    /// ⟨u, v⟩ = ∫ u v̄ dΣ³
    pub fn inner(&self, u: &SmField, v: &SmField) -> Result<C64> {
        self.check_field(u)?;
        self.check_field(v)?;
        let nt = self.n_theta;
        Ok(crate::par::sum(self.n_nodes(), |p| {
            let s: C64 = (0..nt)
                .map(|l| u.data[p * nt + l] * v.data[p * nt + l].conj())
                .sum();
            s * self.liouville(p)
        }))
    }

    /// The same inner product computed from spectra (Parseval).
    pub fn inner_spec(&self, u: &FiberSpectrum, v: &FiberSpectrum) -> Result<C64> {
        self.check_spectrum(u)?;
        self.check_spectrum(v)?;
        let nm = self.n_modes();
        Ok(crate::par::sum(self.n_nodes(), |p| {
            let s: C64 = (0..nm)
                .map(|c| u.data[p * nm + c] * v.data[p * nm + c].conj())
                .sum();
            s * self.vol[p] * 2.0 * PI
        }))
    }

    pub fn norm(&self, u: &SmField) -> f64 {
        self.inner(u, u).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    pub fn norm_spec(&self, u: &FiberSpectrum) -> f64 {
        self.inner_spec(u, u).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// L² norm of a node field with the Riemannian area element.
    pub fn node_norm(&self, v: &[C64]) -> f64 {
        v.iter()
            .zip(&self.vol)
            .map(|(a, w)| a.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn node_inner(&self, u: &[C64], v: &[C64]) -> C64 {
        u.iter()
            .zip(v)
            .zip(&self.vol)
            .map(|((a, b), w)| a * b.conj() * *w)
            .sum()
    }
}

pub fn add_spec(a: &FiberSpectrum, b: &FiberSpectrum, cb: C64) -> FiberSpectrum {
    let mut out = a.clone();
    for (o, v) in out.data.iter_mut().zip(&b.data) {
        *o += cb * v;
    }
    out
}

pub fn scale_spec(a: &FiberSpectrum, c: C64) -> FiberSpectrum {
    let mut out = a.clone();
    for o in &mut out.data {
        *o *= c;
    }
    out
}

impl SmField {
    pub fn map(&self, f: impl Fn(C64) -> C64) -> SmField {
        SmField {
            data: self.data.iter().map(|v| f(*v)).collect(),
            ..*self
        }
    }

    pub fn zip(&self, other: &SmField, f: impl Fn(C64, C64) -> C64) -> SmField {
        SmField {
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
            ..*self
        }
    }

    pub fn add(&self, other: &SmField) -> SmField {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SmField) -> SmField {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SmField) -> SmField {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> SmField {
        self.map(|a| a * c)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Field value at node p, angle index l.
    pub fn at(&self, p: usize, l: usize) -> C64 {
        self.data[p * self.n_theta + l]
    }
}

impl FiberSpectrum {
    pub fn add(&self, other: &FiberSpectrum) -> FiberSpectrum {
        add_spec(self, other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &FiberSpectrum) -> FiberSpectrum {
        add_spec(self, other, C64::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: C64) -> FiberSpectrum {
        scale_spec(self, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, nt: usize) -> Arc<SmGrid> {
        SmGrid::new(Lattice::new(n).unwrap(), Arc::new(ConformalMetric::euclidean()), nt).unwrap()
    }

    #[test]
    fn pure_modes_and_round_trip() {
        let g = grid(16, 16);
        let u = g.field_from_fn(|x, _, t| C64::new(0.0, t).exp() * (1.0 + x));
        let s = g.analyze(&u).unwrap();
        let m1 = g.mode(&s, 1);
        let other: f64 = (-7..=7).filter(|&k| k != 1).map(|k| g.node_norm(&g.mode(&s, k))).sum();
        assert!(other < 1e-13 && g.node_norm(&m1) > 0.1);
        let back = g.synthesize(&s).unwrap();
        assert!(back.sub(&u).max_abs() < 1e-13);
    }

    #[test]
    fn hilbert_of_cos_is_sin() {
        let g = grid(16, 16);
        let u = g.field_from_fn(|_, _, t| C64::new(t.cos(), 0.0));
        let h = g.hilbert(&u).unwrap();
        let w = g.field_from_fn(|_, _, t| C64::new(t.sin(), 0.0));
        assert!(h.sub(&w).max_abs() < 1e-14);
    }

    #[test]
    fn liouville_mass() {
        let g = grid(64, 16);
        let one = g.field_from_fn(|_, _, _| C64::new(1.0, 0.0));
        let m = g.inner(&one, &one).unwrap().re;
        assert!((m - 2.0 * PI * PI).abs() < 1e-2);
    }

    #[test]
    fn euclidean_x_on_functions() {
        let g = grid(64, 16);
        let f = Func::gaussian([0.1, 0.2], 0.4, 1.0);
        let u = g.synthesize(&g.spectrum_from_modes(&[(0, f.clone())]).unwrap()).unwrap();
        let xu = g.apply_x(&u).unwrap();
        let exact = g.field_from_fn(|x, y, t| {
            let (fx, fy) = f.grad(x, y);
            fx * t.cos() + fy * t.sin()
        });
        let e = xu.sub(&exact).max_abs();
        assert!(e < 5e-4, "{e}");
    }
}
