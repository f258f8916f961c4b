//! Elliptic solves on the disk, Hodge and pair decompositions, harmonic
//! conjugates, the h = h₀ + h₊ + h₋ splitting and orthonormal bases of
//! holomorphic one-forms.

use crate::error::{Error, Result};
use crate::fields::{scalar_inner, scalar_norm, OneForm};
use crate::func::Func;
use crate::linalg::SparseLu;
use crate::phase_space::{Lattice, SmGrid};
use crate::surface::ConformalMetric;
use crate::C64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Boundary samples used for boundary means and traces.
fn boundary_samples(lattice: &Lattice) -> usize {
    8 * lattice.n
}

/// Shortley–Weller discretization of (−Δ_g + q)u = r, u|∂ = g on the inside
/// lattice nodes, Δ_g = e^{−2λ}Δ, factorized once.
pub struct DirichletSolver {
    lattice: Arc<Lattice>,
    lu: SparseLu,
    entries: Vec<(usize, usize, f64)>,
    /// (row, coefficient, boundary angle) couplings to Dirichlet data
    boundary: Vec<(usize, f64, f64)>,
    e2l: Vec<f64>,
}

impl std::fmt::Debug for DirichletSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DirichletSolver({}, {} unknowns)", self.lattice.descriptor(), self.lattice.len())
    }
}

impl DirichletSolver {
    /// `zero_order`: q at the nodes (real, nonnegative), or none.
    pub fn new(lattice: Arc<Lattice>, metric: &ConformalMetric, zero_order: Option<&[f64]>) -> Result<Self> {
        let n = lattice.len();
        let h = lattice.h;
        let e2l: Vec<f64> = (0..n)
            .map(|k| {
                let (x, y) = lattice.node_xy(k);
                (2.0 * metric.jet(x, y).v).exp()
            })
            .collect();
        if let Some(q) = zero_order {
            if q.len() != n {
                return Err(Error::mismatch("zero-order term does not match the lattice"));
            }
            if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("zero-order term must be finite and nonnegative"));
            }
        }
        let mut entries = Vec::with_capacity(5 * n);
        let mut boundary = Vec::new();
        let side = lattice.side as isize;
        for k in 0..n {
            let (x, y) = lattice.node_xy(k);
            let slot = lattice.slot_of(k) as isize;
            let mut diag = zero_order.map(|q| q[k] * e2l[k]).unwrap_or(0.0);
            for (axis, stride) in [(0usize, 1isize), (1, side)] {
                let mut arm = [(0.0f64, None::<usize>, 0.0f64); 2];
                for (s, sign) in [(0usize, -1.0f64), (1, 1.0)] {
                    let nb = (slot + if s == 0 { -stride } else { stride }) as usize;
                    match lattice.inside_index(nb) {
                        Some(j) => arm[s] = (h, Some(j), 0.0),
                        None => {
                            let (px, ex) = if axis == 0 { (x, y) } else { (y, x) };
                            // |p + t e| = 1 along the axis
                            let b = sign * px;
                            let c = px * px + ex * ex - 1.0;
                            let t = (-b + (b * b - c).max(0.0).sqrt()).clamp(1e-3 * h, h);
                            let (bx, by) = if axis == 0 { (x + sign * t, y) } else { (x, y + sign * t) };
                            arm[s] = (t, None, by.atan2(bx).rem_euclid(2.0 * PI));
                        }
                    }
                }
                let (hl, hr) = (arm[0].0, arm[1].0);
                let cl = 2.0 / (hl * (hl + hr));
                let cr = 2.0 / (hr * (hl + hr));
                diag += cl + cr;
                for (s, c) in [(0usize, cl), (1, cr)] {
                    match arm[s].1 {
                        Some(j) => entries.push((k, j, -c)),
                        None => boundary.push((k, c, arm[s].2)),
                    }
                }
            }
            entries.push((k, k, diag));
        }
        let lu = SparseLu::new(n, &entries)?;
        Ok(Self {
            lattice,
            lu,
            entries,
            boundary,
            e2l,
        })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    fn rhs(&self, r: &[C64], g: Option<&dyn Fn(f64) -> C64>) -> Vec<C64> {
        let mut b: Vec<C64> = r.iter().zip(&self.e2l).map(|(v, e)| v * *e).collect();
        if let Some(g) = g {
            for &(k, c, beta) in &self.boundary {
                b[k] += g(beta) * c;
            }
        }
        b
    }

    /// Solves with zero Dirichlet data.
    pub fn solve(&self, r: &[C64]) -> Result<Vec<C64>> {
        self.solve_with_boundary(r, None)
    }

    pub fn solve_with_boundary(&self, r: &[C64], g: Option<&dyn Fn(f64) -> C64>) -> Result<Vec<C64>> {
        if r.len() != self.lattice.len() {
            return Err(Error::mismatch("right-hand side does not match the lattice"));
        }
        let b = self.rhs(r, g);
        let u = self.lu.solve(&b);
        let res = self.residual_of(&u, &b);
        let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if res > 1e-10 * bn.max(f64::MIN_POSITIVE) && bn > 0.0 {
            return Err(Error::Residual {
                what: "dirichlet solve".into(),
                residual: res / bn,
                tolerance: 1e-10,
            });
        }
        Ok(u)
    }

    fn residual_of(&self, u: &[C64], b: &[C64]) -> f64 {
        let mut au = vec![C64::new(0.0, 0.0); u.len()];
        for &(i, j, v) in &self.entries {
            au[i] += u[j] * v;
        }
        au.iter().zip(b).map(|(a, c)| (a - c).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Harmonic extension of boundary data g(β).
    pub fn harmonic_extension(&self, g: &dyn Fn(f64) -> C64) -> Result<Vec<C64>> {
        let zero = vec![C64::new(0.0, 0.0); self.lattice.len()];
        self.solve_with_boundary(&zero, Some(g))
    }
}

/// −Δ_g u + q u = r with u|∂ = 0.
pub fn poisson_dirichlet(lattice: Arc<Lattice>, metric: &ConformalMetric, r: &[C64], zero_order: Option<&[f64]>) -> Result<Vec<C64>> {
    DirichletSolver::new(lattice, metric, zero_order)?.solve(r)
}

/// Values of a lattice field on ∂M at `m` equispaced angles, by the padded
/// (extrapolated) cubic interpolant.
pub fn boundary_trace(lattice: &Lattice, v: &[C64], m: usize) -> Vec<C64> {
    let p = lattice.pad(v);
    (0..m)
        .map(|i| {
            let b = 2.0 * PI * i as f64 / m as f64;
            lattice.interp(&p, b.cos(), b.sin())
        })
        .collect()
}

/// ∫_{∂M} v ds / ∫_{∂M} ds with the metric arclength e^{λ}dβ.
pub fn boundary_mean(lattice: &Lattice, metric: &ConformalMetric, v: &[C64]) -> C64 {
    let m = boundary_samples(lattice);
    let tr = boundary_trace(lattice, v, m);
    let mut s = C64::new(0.0, 0.0);
    let mut w = 0.0;
    for (i, t) in tr.iter().enumerate() {
        let b = 2.0 * PI * i as f64 / m as f64;
        let e = metric.jet(b.cos(), b.sin()).v.exp();
        s += t * e;
        w += e;
    }
    s / w
}

/// Least-squares integration of a gradient field: v minimizing
/// Σ_edges |v_j − v_i − h(g_i + g_j)·e/2|², pinned to zero boundary mean.
/// Returns v and the relative misfit (path dependence).
pub fn integrate_gradient(
    lattice: &Arc<Lattice>,
    metric: &ConformalMetric,
    gx: &[C64],
    gy: &[C64],
) -> Result<(Vec<C64>, f64)> {
    let n = lattice.len();
    let h = lattice.h;
    let side = lattice.side;
    let mut edges = Vec::with_capacity(2 * n);
    for k in 0..n {
        let s = lattice.slot_of(k);
        if let Some(j) = lattice.inside_index(s + 1) {
            edges.push((k, j, (gx[k] + gx[j]) * (0.5 * h)));
        }
        if let Some(j) = lattice.inside_index(s + side) {
            edges.push((k, j, (gy[k] + gy[j]) * (0.5 * h)));
        }
    }
    let mut entries = Vec::with_capacity(4 * edges.len() + 1);
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for &(i, j, d) in &edges {
        if i != 0 {
            entries.push((i, i, 1.0));
            entries.push((i, j, -1.0));
            rhs[i] -= d;
        }
        if j != 0 {
            entries.push((j, j, 1.0));
            entries.push((j, i, -1.0));
            rhs[j] += d;
        }
    }
    entries.push((0, 0, 1.0));
    let v = SparseLu::new(n, &entries)?.solve(&rhs);
    let mis: f64 = edges.iter().map(|&(i, j, d)| (v[j] - v[i] - d).norm_sqr()).sum::<f64>();
    let tot: f64 = edges.iter().map(|e| e.2.norm_sqr()).sum::<f64>();
    let rel = if tot > 0.0 { (mis / tot).sqrt() } else { 0.0 };
    let mean = boundary_mean(lattice, metric, &v);
    Ok((v.into_iter().map(|x| x - mean).collect(), rel))
}

/// v with du = ⋆dv (v_x = u_y, v_y = −u_x), zero boundary mean.
pub fn harmonic_conjugate(lattice: &Arc<Lattice>, metric: &ConformalMetric, u: &[C64], tol: f64) -> Result<Vec<C64>> {
    let (ux, uy) = lattice.grad(u);
    let gy: Vec<C64> = ux.iter().map(|v| -v).collect();
    let (v, rel) = integrate_gradient(lattice, metric, &uy, &gy)?;
    if rel > tol {
        return Err(Error::Residual {
            what: "harmonic conjugate path dependence (input not harmonic)".into(),
            residual: rel,
            tolerance: tol,
        });
    }
    Ok(v)
}

/// α = df' + ⋆dh with f'|∂ = 0 and ∫_{∂M} h ds = 0.
#[derive(Clone, Debug)]
pub struct HodgeParts {
    pub f_prime: Vec<C64>,
    pub h: Vec<C64>,
    /// ‖α − df' − ⋆dh‖/‖α‖
    pub residual: f64,
}

pub fn hodge_oneform(solver: &DirichletSolver, metric: &ConformalMetric, alpha: &OneForm) -> Result<HodgeParts> {
    let l = solver.lattice().clone();
    // flat: Δf' = div α, i.e. −Δ_g f' = −e^{−2λ} div α
    let div = alpha.div(&l);
    let r: Vec<C64> = (0..l.len())
        .map(|k| {
            let (x, y) = l.node_xy(k);
            -div[k] * (-2.0 * metric.jet(x, y).v).exp()
        })
        .collect();
    let fp = solver.solve(&r)?;
    let rem = alpha.sub(&OneForm::exact(&l, &fp));
    // ⋆dh = rem: h_x = rem_y, h_y = −rem_x
    let hy: Vec<C64> = rem.x.iter().map(|v| -v).collect();
    let (h, _) = integrate_gradient(&l, metric, &rem.y, &hy)?;
    let back = OneForm::exact(&l, &fp).add(&OneForm::star_d(&l, &h));
    let an = alpha.norm(&l);
    let residual = if an > 0.0 { alpha.sub(&back).norm(&l) / an } else { 0.0 };
    Ok(HodgeParts { f_prime: fp, h, residual })
}

/// [α, f] = [β, g] + d_a b with δ_a[β, g] = 0 and b|∂ = 0.
#[derive(Clone, Debug)]
pub struct PairParts {
    pub beta: OneForm,
    pub g: Vec<C64>,
    pub b: Vec<C64>,
    /// ‖δ_a[β, g]‖/‖δ_a[α, f]‖ (measured with the grid derivatives)
    pub solenoidal_residual: f64,
}

/// δ_a[β, g] = −e^{−2λ}div β + ā g.
pub fn delta_a(lattice: &Lattice, lam: &[f64], a: &[C64], beta: &OneForm, g: &[C64]) -> Vec<C64> {
    let div = beta.div(lattice);
    (0..lattice.len())
        .map(|k| -div[k] * (-2.0 * lam[k]).exp() + a[k].conj() * g[k])
        .collect()
}

/// Solves (−Δ_g + |a|²)b = −div_g α + ā f for the a-potential part.
pub fn pair_decompose(sm: &SmGrid, a: &Func, alpha: &OneForm, f: &[C64]) -> Result<PairParts> {
    let l = sm.lattice.clone();
    let av = l.sample(a);
    let q: Vec<f64> = av.iter().map(|v| v.norm_sqr()).collect();
    let solver = DirichletSolver::new(l.clone(), &sm.metric, Some(&q))?;
    let r = delta_a(&l, &sm.lam, &av, alpha, f);
    let b = solver.solve(&r)?;
    let beta = alpha.sub(&OneForm::exact(&l, &b));
    let g: Vec<C64> = (0..l.len()).map(|k| f[k] - av[k] * b[k]).collect();
    let res = delta_a(&l, &sm.lam, &av, &beta, &g);
    let rn = scalar_norm(&r, &sm.vol);
    let solenoidal_residual = if rn > 0.0 { scalar_norm(&res, &sm.vol) / rn } else { 0.0 };
    Ok(PairParts {
        beta,
        g,
        b,
        solenoidal_residual,
    })
}

/// Canonical representative (h, f) with I_a[α, f₀] = I_a[⋆dh, f].
#[derive(Clone, Debug)]
pub struct Canonical {
    pub h: Vec<C64>,
    pub f: Vec<C64>,
    pub f_prime: Vec<C64>,
    pub hodge_residual: f64,
}

pub fn canonical_rep(solver: &DirichletSolver, sm: &SmGrid, a: &Func, alpha: &OneForm, f0: &[C64]) -> Result<Canonical> {
    let parts = hodge_oneform(solver, &sm.metric, alpha)?;
    let av = sm.lattice.sample(a);
    let f = (0..f0.len()).map(|k| f0[k] - av[k] * parts.f_prime[k]).collect();
    Ok(Canonical {
        h: parts.h,
        f,
        f_prime: parts.f_prime,
        hodge_residual: parts.residual,
    })
}

/// h = h₀ + h₊ + h₋ with h₀|∂ = 0, h₊ holomorphic (η₋h₊ = 0) and h₋
/// antiholomorphic (η₊h₋ = 0), both with zero boundary mean.
#[derive(Clone, Debug)]
pub struct SplitH {
    pub h0: Vec<C64>,
    pub h_plus: Vec<C64>,
    pub h_minus: Vec<C64>,
    /// ‖η₋h₊‖/‖∇h₊‖ and ‖η₊h₋‖/‖∇h₋‖
    pub kernel_residuals: [f64; 2],
}

pub fn split_h(solver: &DirichletSolver, sm: &SmGrid, h: &[C64]) -> Result<SplitH> {
    let l = solver.lattice().clone();
    let m = boundary_samples(&l);
    let tr = boundary_trace(&l, h, m);
    let g = |b: f64| periodic_interp(&tr, b);
    let u = solver.harmonic_extension(&g)?;
    let v = harmonic_conjugate(&l, &sm.metric, &u, 1e-2)?;
    let i = C64::i();
    let h0 = (0..l.len()).map(|k| h[k] - u[k]).collect();
    // with ⋆dv = du the holomorphic combination is u − iv
    let hp: Vec<C64> = (0..l.len()).map(|k| (u[k] - i * v[k]) * 0.5).collect();
    let hm: Vec<C64> = (0..l.len()).map(|k| (u[k] + i * v[k]) * 0.5).collect();
    let kernel_residuals = [kernel_residual(sm, &hp, false), kernel_residual(sm, &hm, true)];
    Ok(SplitH {
        h0,
        h_plus: hp,
        h_minus: hm,
        kernel_residuals,
    })
}

/// ‖η∓c‖ relative to ‖(∂z c, ∂z̄ c)‖ for a mode-0 field c.
pub fn kernel_residual(sm: &SmGrid, c: &[C64], plus: bool) -> f64 {
    let (dz, dzb) = sm.lattice.dz(c);
    let (num, other) = if plus { (&dz, &dzb) } else { (&dzb, &dz) };
    let area = &sm.lattice.area;
    let n: f64 = num.iter().zip(area).map(|(v, a)| v.norm_sqr() * a).sum();
    let o: f64 = other.iter().zip(area).map(|(v, a)| v.norm_sqr() * a).sum();
    if n + o > 0.0 {
        (n / (n + o)).sqrt()
    } else {
        0.0
    }
}

/// Periodic cubic interpolation of equispaced samples on [0, 2π).
pub fn periodic_interp(v: &[C64], beta: f64) -> C64 {
    let m = v.len();
    let u = beta.rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
    let i0 = u.floor() as i64;
    let w = crate::phase_space::lattice::lagrange4(u - i0 as f64);
    (0..4)
        .map(|a| v[(i0 - 1 + a as i64).rem_euclid(m as i64) as usize] * w[a])
        .sum()
}

/// Orthonormal basis of holomorphic (degree +1) or antiholomorphic (−1)
/// one-forms in L²(SM): members g_p(z) dz (resp. conj(g_p) dz̄) with mode
/// ±1 coefficient e^{−λ}g_p, built by Gram–Schmidt from the powers z^p.
#[derive(Clone, Debug)]
pub struct HoloBasis {
    pub degree: i32,
    /// coeffs[p][q]: g_p = Σ_q coeffs[p][q] z^q
    pub coeffs: Vec<Vec<C64>>,
    /// mode ±1 coefficient fields at the nodes
    pub modes: Vec<Vec<C64>>,
    pub gram_error: f64,
    pub kernel_residual: f64,
}

impl HoloBasis {
    pub fn new(sm: &SmGrid, degree: i32, count: usize) -> Result<Self> {
        if degree != 1 && degree != -1 {
            return Err(Error::invalid("holomorphic basis degree must be ±1"));
        }
        if count == 0 || count > 32 {
            return Err(Error::invalid("basis size must lie in 1..=32"));
        }
        let l = &sm.lattice;
        let n = l.len();
        let raw: Vec<Vec<C64>> = (0..count)
            .map(|p| {
                (0..n)
                    .map(|k| {
                        let (x, y) = l.node_xy(k);
                        let z = C64::new(x, if degree > 0 { y } else { -y });
                        z.powu(p as u32) * (-sm.lam[k]).exp()
                    })
                    .collect()
            })
            .collect();
        let w: Vec<f64> = sm.vol.iter().map(|v| v * 2.0 * PI).collect();
        let mut coeffs: Vec<Vec<C64>> = Vec::with_capacity(count);
        let mut modes: Vec<Vec<C64>> = Vec::with_capacity(count);
        for p in 0..count {
            let mut v = raw[p].clone();
            let mut c = vec![C64::new(0.0, 0.0); count];
            c[p] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for q in 0..modes.len() {
                    let r = scalar_inner(&v, &modes[q], &w);
                    for k in 0..n {
                        v[k] -= modes[q][k] * r;
                    }
                    for t in 0..count {
                        c[t] -= coeffs[q][t] * r;
                    }
                }
            }
            let nv = scalar_norm(&v, &w);
            if nv < 1e-8 {
                return Err(Error::Linalg(format!("holomorphic basis lost rank at member {p}")));
            }
            coeffs.push(c.iter().map(|x| x / nv).collect());
            modes.push(v.iter().map(|x| x / nv).collect());
        }
        let mut gram_error: f64 = 0.0;
        for p in 0..count {
            for q in 0..count {
                let g = scalar_inner(&modes[p], &modes[q], &w);
                let id = if p == q { 1.0 } else { 0.0 };
                gram_error = gram_error.max((g - id).norm());
            }
        }
        let mut kr: f64 = 0.0;
        for m in &modes {
            let r = if degree > 0 { sm.eta_minus_mode(m, 1) } else { sm.eta_plus_mode(m, -1) };
            let s = scalar_norm(&r, &sm.vol) / scalar_norm(m, &sm.vol);
            kr = kr.max(s);
        }
        Ok(Self {
            degree,
            coeffs,
            modes,
            gram_error,
            kernel_residual: kr,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The form Σ_p c_p φ_p as closed-form components (α_x, α_y).
    pub fn one_form(&self, c: &[C64]) -> (Func, Func) {
        let mut g = Func::Zero;
        for (p, cp) in c.iter().enumerate() {
            for (q, v) in self.coeffs[p].iter().enumerate() {
                let amp = cp * v;
                if amp.norm() > 0.0 {
                    let mono = if self.degree > 0 { Func::monomial(q as u32, 0, amp) } else { Func::monomial(0, q as u32, amp) };
                    g = g.plus(mono);
                }
            }
        }
        let i = C64::i();
        let ay = g.clone().scale(if self.degree > 0 { i } else { -i });
        (g, ay)
    }

    /// Mode ±1 coefficient field of Σ_p c_p φ_p.
    pub fn mode_field(&self, c: &[C64]) -> Vec<C64> {
        let n = self.modes[0].len();
        (0..n)
            .map(|k| c.iter().zip(&self.modes).map(|(a, m)| a * m[k]).sum())
            .collect()
    }
}
