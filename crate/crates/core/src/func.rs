//! Closed-form complex scalar fields on the plane with analytic gradients.
//! Phantoms, attenuations and basis members are all built from these.

use crate::surface::ConformalMetric;
use crate::C64;
use std::fmt::Debug;
use std::sync::Arc;

/// A sampled field that can be evaluated off-grid.
pub trait Sampled: Send + Sync + Debug {
    fn value(&self, x: f64, y: f64) -> C64;
    fn grad(&self, x: f64, y: f64) -> (C64, C64);
}

#[derive(Clone, Debug)]
pub enum Func {
    Zero,
    Const(C64),
    /// amp · exp(−|p − c|²/(2 width²))
    Gaussian {
        center: [f64; 2],
        width: f64,
        amp: C64,
    },
    /// amp · (1 − |p − c|²/R²)^power inside the ball, zero outside
    PolyBump {
        center: [f64; 2],
        radius: f64,
        power: u32,
        amp: C64,
    },
    /// amp · exp(1 − 1/(1 − |p − c|²/R²)) inside the ball, zero outside
    SmoothBump {
        center: [f64; 2],
        radius: f64,
        amp: C64,
    },
    /// amp · z^p · conj(z)^q
    Monomial { p: u32, q: u32, amp: C64 },
    /// e^{k λ} for the metric's conformal exponent λ
    ExpLambda { metric: Arc<ConformalMetric>, k: f64 },
    Sum(Vec<Func>),
    Product(Box<Func>, Box<Func>),
    Scaled(C64, Box<Func>),
    Conj(Box<Func>),
    Sampled(Arc<dyn Sampled>),
}

impl Default for Func {
    fn default() -> Self {
        Func::Zero
    }
}

fn zpow(z: C64, p: u32) -> C64 {
    if p == 0 {
        C64::new(1.0, 0.0)
    } else {
        z.powu(p)
    }
}

impl Func {
    pub fn constant(c: impl Into<C64>) -> Self {
        Func::Const(c.into())
    }

    pub fn gaussian(center: [f64; 2], width: f64, amp: impl Into<C64>) -> Self {
        Func::Gaussian {
            center,
            width,
            amp: amp.into(),
        }
    }

    pub fn monomial(p: u32, q: u32, amp: impl Into<C64>) -> Self {
        Func::Monomial { p, q, amp: amp.into() }
    }

    pub fn scale(self, c: impl Into<C64>) -> Self {
        Func::Scaled(c.into(), Box::new(self))
    }

    pub fn times(self, other: Func) -> Self {
        Func::Product(Box::new(self), Box::new(other))
    }

    pub fn plus(self, other: Func) -> Self {
        match self {
            Func::Sum(mut v) => {
                v.push(other);
                Func::Sum(v)
            }
            f => Func::Sum(vec![f, other]),
        }
    }

    pub fn conj(self) -> Self {
        Func::Conj(Box::new(self))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Func::Zero => true,
            Func::Const(c) => *c == C64::new(0.0, 0.0),
            Func::Gaussian { amp, .. }
            | Func::PolyBump { amp, .. }
            | Func::SmoothBump { amp, .. }
            | Func::Monomial { amp, .. } => *amp == C64::new(0.0, 0.0),
            Func::Sum(v) => v.iter().all(Func::is_zero),
            Func::Product(a, b) => a.is_zero() || b.is_zero(),
            Func::Scaled(c, f) => *c == C64::new(0.0, 0.0) || f.is_zero(),
            Func::Conj(f) => f.is_zero(),
            Func::ExpLambda { .. } | Func::Sampled(_) => false,
        }
    }

    pub fn value(&self, x: f64, y: f64) -> C64 {
        match self {
            Func::Zero => C64::new(0.0, 0.0),
            Func::Const(c) => *c,
            Func::Gaussian { center, width, amp } => {
                let dx = x - center[0];
                let dy = y - center[1];
                amp * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
            Func::PolyBump {
                center,
                radius,
                power,
                amp,
            } => {
                let s = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (radius * radius);
                if s >= 1.0 {
                    C64::new(0.0, 0.0)
                } else {
                    amp * (1.0 - s).powi(*power as i32)
                }
            }
            Func::SmoothBump { center, radius, amp } => {
                let s = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (radius * radius);
                if s >= 1.0 {
                    C64::new(0.0, 0.0)
                } else {
                    amp * (1.0 - 1.0 / (1.0 - s)).exp()
                }
            }
            Func::Monomial { p, q, amp } => {
                let z = C64::new(x, y);
                amp * zpow(z, *p) * zpow(z.conj(), *q)
            }
            Func::ExpLambda { metric, k } => C64::new((k * metric.lambda(x, y)).exp(), 0.0),
            Func::Sum(v) => v.iter().map(|f| f.value(x, y)).sum(),
            Func::Product(a, b) => a.value(x, y) * b.value(x, y),
            Func::Scaled(c, f) => c * f.value(x, y),
            Func::Conj(f) => f.value(x, y).conj(),
            Func::Sampled(s) => s.value(x, y),
        }
    }

    /// (∂x, ∂y) of the field.
    pub fn grad(&self, x: f64, y: f64) -> (C64, C64) {
        let zero = C64::new(0.0, 0.0);
        match self {
            Func::Zero | Func::Const(_) => (zero, zero),
            Func::Gaussian { center, width, .. } => {
                let v = self.value(x, y);
                let s2 = width * width;
                (-v * (x - center[0]) / s2, -v * (y - center[1]) / s2)
            }
            Func::PolyBump {
                center,
                radius,
                power,
                amp,
            } => {
                let r2 = radius * radius;
                let s = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / r2;
                if s >= 1.0 || *power == 0 {
                    return (zero, zero);
                }
                let d = -amp * (*power as f64) * (1.0 - s).powi(*power as i32 - 1);
                (d * 2.0 * (x - center[0]) / r2, d * 2.0 * (y - center[1]) / r2)
            }
            Func::SmoothBump { center, radius, amp } => {
                let r2 = radius * radius;
                let s = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / r2;
                if s >= 1.0 {
                    return (zero, zero);
                }
                let v = amp * (1.0 - 1.0 / (1.0 - s)).exp();
                let d = -v / ((1.0 - s) * (1.0 - s));
                (d * 2.0 * (x - center[0]) / r2, d * 2.0 * (y - center[1]) / r2)
            }
            Func::Monomial { p, q, amp } => {
                let z = C64::new(x, y);
                let zb = z.conj();
                let dz = if *p == 0 {
                    zero
                } else {
                    amp * (*p as f64) * zpow(z, p - 1) * zpow(zb, *q)
                };
                let dzb = if *q == 0 {
                    zero
                } else {
                    amp * (*q as f64) * zpow(z, *p) * zpow(zb, q - 1)
                };
                (dz + dzb, C64::i() * (dz - dzb))
            }
            Func::ExpLambda { metric, k } => {
                let j = metric.jet(x, y);
                let e = (k * j.v).exp();
                (C64::new(k * e * j.x, 0.0), C64::new(k * e * j.y, 0.0))
            }
            Func::Sum(v) => v.iter().fold((zero, zero), |acc, f| {
                let g = f.grad(x, y);
                (acc.0 + g.0, acc.1 + g.1)
            }),
            Func::Product(a, b) => {
                let (va, vb) = (a.value(x, y), b.value(x, y));
                let (ga, gb) = (a.grad(x, y), b.grad(x, y));
                (ga.0 * vb + va * gb.0, ga.1 * vb + va * gb.1)
            }
            Func::Scaled(c, f) => {
                let g = f.grad(x, y);
                (c * g.0, c * g.1)
            }
            Func::Conj(f) => {
                let g = f.grad(x, y);
                (g.0.conj(), g.1.conj())
            }
            Func::Sampled(s) => s.grad(x, y),
        }
    }

    /// (∂_z, ∂_z̄) of the field.
    pub fn dz(&self, x: f64, y: f64) -> (C64, C64) {
        let (gx, gy) = self.grad(x, y);
        let i = C64::i();
        ((gx - i * gy) * 0.5, (gx + i * gy) * 0.5)
    }

    /// Identifier for cache keys.
    pub fn descriptor(&self) -> String {
        format!("{self:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_grad(f: &Func, x: f64, y: f64) {
        let e = 1e-6;
        let (gx, gy) = f.grad(x, y);
        let fx = (f.value(x + e, y) - f.value(x - e, y)) / (2.0 * e);
        let fy = (f.value(x, y + e) - f.value(x, y - e)) / (2.0 * e);
        assert!((gx - fx).norm() < 1e-6 * (1.0 + fx.norm()), "{f:?} x {gx} {fx}");
        assert!((gy - fy).norm() < 1e-6 * (1.0 + fy.norm()), "{f:?} y {gy} {fy}");
    }

    #[test]
    fn gradients_match_differences() {
        let m = Arc::new(
            ConformalMetric::new(crate::surface::Lambda::Gaussian {
                center: [0.1, 0.2],
                width: 0.5,
                amplitude: 0.1,
            })
            .unwrap(),
        );
        let fs = vec![
            Func::gaussian([0.1, -0.2], 0.3, C64::new(1.0, 0.5)),
            Func::PolyBump {
                center: [0.0, 0.0],
                radius: 1.0,
                power: 2,
                amp: C64::new(1.0, 0.0),
            },
            Func::SmoothBump {
                center: [0.2, 0.1],
                radius: 0.6,
                amp: C64::new(0.0, 2.0),
            },
            Func::monomial(3, 1, C64::new(0.3, -1.0)),
            Func::ExpLambda {
                metric: m.clone(),
                k: -1.0,
            }
            .times(Func::monomial(2, 0, 1.0)),
            Func::monomial(1, 2, 1.0).conj().scale(C64::new(0.0, 1.0)),
        ];
        for f in &fs {
            for &(x, y) in &[(0.3, 0.2), (-0.5, 0.1), (0.05, -0.7)] {
                check_grad(f, x, y);
            }
        }
    }

    #[test]
    fn holomorphic_monomial_has_no_zbar_derivative() {
        let f = Func::monomial(4, 0, 1.0);
        let (dz, dzb) = f.dz(0.3, -0.4);
        assert!(dzb.norm() < 1e-15);
        assert!((dz - 4.0 * C64::new(0.3, -0.4).powu(3)).norm() < 1e-14);
    }
}
