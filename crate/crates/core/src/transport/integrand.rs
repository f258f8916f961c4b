use crate::func::Func;
use crate::surface::ConformalMetric;
use crate::C64;
use std::sync::Arc;

/// A function on SM evaluated along geodesics.
pub trait Integrand: Sync {
    fn eval(&self, x: f64, y: f64, theta: f64) -> C64;
}

impl<F: Fn(f64, f64, f64) -> C64 + Sync> Integrand for F {
    fn eval(&self, x: f64, y: f64, theta: f64) -> C64 {
        self(x, y, theta)
    }
}

/// Σ_k c_k(x) e^{ikθ} with closed-form coefficient fields.
#[derive(Clone, Debug, Default)]
pub struct ModeList {
    pub modes: Vec<(i32, Func)>,
}

impl ModeList {
    pub fn new(modes: Vec<(i32, Func)>) -> Self {
        Self { modes }
    }

    pub fn scalar(f: Func) -> Self {
        Self { modes: vec![(0, f)] }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|(_, f)| f.is_zero())
    }

    pub fn extend(mut self, other: ModeList) -> Self {
        self.modes.extend(other.modes);
        self
    }
}

impl Integrand for ModeList {
    fn eval(&self, x: f64, y: f64, theta: f64) -> C64 {
        self.modes
            .iter()
            .map(|(k, f)| f.value(x, y) * C64::new(0.0, *k as f64 * theta).exp())
            .sum()
    }
}

/// A pair [α, f]: one-form α = α_x dx + α_y dy and a function f.
#[derive(Clone, Debug, Default)]
pub struct Pair {
    pub ax: Func,
    pub ay: Func,
    pub f: Func,
}

impl Pair {
    pub fn new(ax: Func, ay: Func, f: Func) -> Self {
        Self { ax, ay, f }
    }

    pub fn function(f: Func) -> Self {
        Self {
            f,
            ..Default::default()
        }
    }

    pub fn one_form(ax: Func, ay: Func) -> Self {
        Self {
            ax,
            ay,
            f: Func::Zero,
        }
    }

    /// d_a m = [dm, a m]
    pub fn potential(a: &Func, m: &Func) -> Self {
        Self {
            ax: Func::Sampled(Arc::new(Partial { f: m.clone(), y: false })),
            ay: Func::Sampled(Arc::new(Partial { f: m.clone(), y: true })),
            f: a.clone().times(m.clone()),
        }
    }

    /// [⋆dh, 0] with ⋆dh = −h_y dx + h_x dy.
    pub fn star_d(h: &Func) -> Self {
        Self {
            ax: Func::Sampled(Arc::new(Partial { f: h.clone(), y: true })).scale(-1.0),
            ay: Func::Sampled(Arc::new(Partial { f: h.clone(), y: false })),
            f: Func::Zero,
        }
    }

    /// The pair as an SM function: f + α(v) with v the unit vector of angle θ.
    /// Mode ±1 coefficients are e^{−λ}(α_x ∓ iα_y)/2.
    pub fn modes(&self, metric: &Arc<ConformalMetric>) -> ModeList {
        let i = C64::i();
        let el = Func::ExpLambda {
            metric: metric.clone(),
            k: -1.0,
        };
        let mut modes = vec![(0, self.f.clone())];
        if !(self.ax.is_zero() && self.ay.is_zero()) {
            let p = self.ax.clone().scale(0.5).plus(self.ay.clone().scale(-0.5 * i));
            let m = self.ax.clone().scale(0.5).plus(self.ay.clone().scale(0.5 * i));
            modes.push((1, el.clone().times(p)));
            modes.push((-1, el.times(m)));
        }
        ModeList::new(modes)
    }
}

/// ∂x or ∂y of a closed-form field, as a field.
#[derive(Debug)]
struct Partial {
    f: Func,
    y: bool,
}

impl crate::func::Sampled for Partial {
    fn value(&self, x: f64, y: f64) -> C64 {
        let g = self.f.grad(x, y);
        if self.y {
            g.1
        } else {
            g.0
        }
    }

    fn grad(&self, x: f64, y: f64) -> (C64, C64) {
        let e = 1e-5;
        (
            (self.value(x + e, y) - self.value(x - e, y)) / (2.0 * e),
            (self.value(x, y + e) - self.value(x, y - e)) / (2.0 * e),
        )
    }
}
