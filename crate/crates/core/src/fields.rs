//! Node-valued fields on the disk lattice.

use crate::phase_space::Lattice;
use crate::C64;

/// A one-form α_x dx + α_y dy sampled at the lattice nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
}

impl OneForm {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![C64::new(0.0, 0.0); n],
            y: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// dh
    pub fn exact(lattice: &Lattice, h: &[C64]) -> Self {
        let (x, y) = lattice.grad(h);
        Self { x, y }
    }

    /// ⋆dh = −h_y dx + h_x dy
    pub fn star_d(lattice: &Lattice, h: &[C64]) -> Self {
        let (gx, gy) = lattice.grad(h);
        Self {
            x: gy.into_iter().map(|v| -v).collect(),
            y: gx,
        }
    }

    /// Flat curl ∂xα_y − ∂yα_x (the coefficient of dα on dx∧dy).
    pub fn curl(&self, lattice: &Lattice) -> Vec<C64> {
        let (_, ayy) = lattice.grad(&self.x);
        let (bxx, _) = lattice.grad(&self.y);
        bxx.iter().zip(&ayy).map(|(a, b)| a - b).collect()
    }

    /// Flat divergence ∂xα_x + ∂yα_y.
    pub fn div(&self, lattice: &Lattice) -> Vec<C64> {
        let (axx, _) = lattice.grad(&self.x);
        let (_, ayy) = lattice.grad(&self.y);
        axx.iter().zip(&ayy).map(|(a, b)| a + b).collect()
    }

    pub fn add(&self, o: &OneForm) -> OneForm {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &OneForm) -> OneForm {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, c: C64) -> OneForm {
        Self {
            x: self.x.iter().map(|v| v * c).collect(),
            y: self.y.iter().map(|v| v * c).collect(),
        }
    }

    pub fn zip(&self, o: &OneForm, f: impl Fn(C64, C64) -> C64) -> OneForm {
        Self {
            x: self.x.iter().zip(&o.x).map(|(a, b)| f(*a, *b)).collect(),
            y: self.y.iter().zip(&o.y).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// ∫ (α_x β̄_x + α_y β̄_y) dx dy, the conformally invariant L² product.
    pub fn inner(&self, o: &OneForm, lattice: &Lattice) -> C64 {
        let v: Vec<C64> = (0..self.len())
            .map(|k| self.x[k] * o.x[k].conj() + self.y[k] * o.y[k].conj())
            .collect();
        lattice.integrate(&v)
    }

    pub fn norm(&self, lattice: &Lattice) -> f64 {
        self.inner(self, lattice).re.max(0.0).sqrt()
    }
}

/// ∫ u v̄ e^{2λ} dx dy given e^{2λ}·area per node.
pub fn scalar_inner(u: &[C64], v: &[C64], vol: &[f64]) -> C64 {
    u.iter()
        .zip(v)
        .zip(vol)
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum()
}

pub fn scalar_norm(u: &[C64], vol: &[f64]) -> f64 {
    scalar_inner(u, u, vol).re.max(0.0).sqrt()
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn add(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a + b).collect()
}

pub fn scale(u: &[C64], c: C64) -> Vec<C64> {
    u.iter().map(|a| a * c).collect()
}
