//! Inversion of the attenuated transform on pairs: recovery of
//! (f, h₀, ω₁, ω₋₁) from boundary data and the associated projections.

use crate::adjoint_ops::forward_lattice_pair;
use crate::error::{Error, Result};
use crate::fields::{scalar_norm, OneForm};
use crate::func::Func;
use crate::hodge::{boundary_trace, HoloBasis};
use crate::holo::{first_integrals, holo_integrating_factor, FirstIntegral, Holomorphizer, IntegratingFactor, InvariantSolver, Side};
use crate::phase_space::{BoundaryField, FullBoundaryField};
use crate::transport::{forward_field, op_q, psi_extension, Beam, Pair, Setup};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// degree of the invariant correction in the integrating factors
    pub factor_degree: usize,
    /// degree of the invariant basis for first integrals
    pub invariant_degree: usize,
    /// degree of the invariant basis behind the P± right inverses
    pub holo_degree: usize,
    /// one-sidedness penalty weight
    pub penalty: f64,
    pub svd_cutoff: f64,
    /// size P of the holomorphic one-form bases
    pub basis_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            factor_degree: 12,
            invariant_degree: 16,
            holo_degree: 20,
            penalty: 1e3,
            svd_cutoff: 1e-6,
            basis_size: 8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.svd_cutoff > 0.0 && self.svd_cutoff < 1.0) {
            return Err(Error::invalid("svd_cutoff must lie in (0,1)"));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::invalid("penalty must be positive"));
        }
        if self.basis_size == 0 || self.basis_size > 16 {
            return Err(Error::invalid("basis_size must lie in 1..=16"));
        }
        if self.invariant_degree < self.basis_size + 1 {
            return Err(Error::invalid("invariant_degree too small for the one-form basis"));
        }
        Ok(())
    }
}

/// Residual diagnostics carried through the pipeline.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub factor_up: crate::holo::FactorResiduals,
    pub factor_down: crate::holo::FactorResiduals,
    pub first_integral_mode_match: f64,
    pub first_integral_wrong_side: f64,
    pub holo_basis_gram: f64,
    pub holo_right_inverse: [f64; 2],
    pub g_fit: [f64; 2],
    pub h0_boundary: f64,
    pub bessel: [f64; 2],
    pub warnings: Vec<String>,
}

/// One-form components recovered in the holomorphic bases.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Omegas {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

/// (f, h₀, ω₁, ω₋₁) at the lattice nodes (ω's by basis coefficients).
#[derive(Clone, Debug)]
pub struct Quadruple {
    pub f: Vec<C64>,
    pub h0: Vec<C64>,
    pub omegas: Omegas,
    pub diagnostics: Diagnostics,
}

/// The four projections of boundary data.
#[derive(Clone, Debug)]
pub struct Projections {
    pub p0: BoundaryField,
    pub perp: BoundaryField,
    pub plus: BoundaryField,
    pub minus: BoundaryField,
}

impl Projections {
    pub fn sum(&self) -> BoundaryField {
        self.p0.add(&self.perp).add(&self.plus).add(&self.minus)
    }
}

/// Everything that depends only on (metric, a, grids): integrating factors,
/// holomorphization operator, one-form bases and their first integrals.
pub struct Pipeline {
    pub setup: Arc<Setup>,
    pub a: Func,
    pub beam: Beam,
    pub cfg: PipelineConfig,
    pub factor_up: IntegratingFactor,
    pub factor_down: IntegratingFactor,
    pub holo: Holomorphizer,
    pub basis_plus: HoloBasis,
    pub basis_minus: HoloBasis,
    pub fi_plus: Vec<FirstIntegral>,
    pub fi_minus: Vec<FirstIntegral>,
    pub diagnostics: Diagnostics,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Pipeline({}, a={}, {:?})", self.setup.descriptor(), self.a.descriptor(), self.cfg)
    }
}

impl Pipeline {
    pub fn new(setup: Arc<Setup>, a: &Func, cfg: PipelineConfig) -> Result<Self> {
        let beam = Beam::new(&setup, a)?;
        Self::with_beam(setup, beam, cfg, None)
    }

    pub fn with_beam(setup: Arc<Setup>, beam: Beam, cfg: PipelineConfig, cache: Option<&crate::cache::Cache>) -> Result<Self> {
        setup.bd.require_full()?;
        cfg.validate()?;
        let s = &setup;
        let factor_up = holo_integrating_factor(s, &beam, Side::Holomorphic, cfg.factor_degree)?;
        let factor_down = holo_integrating_factor(s, &beam, Side::Antiholomorphic, cfg.factor_degree)?;
        let holo = Holomorphizer::with_cache(s, cfg.holo_degree, cfg.svd_cutoff, cache)?;
        let basis_plus = HoloBasis::new(&s.sm, 1, cfg.basis_size)?;
        let basis_minus = HoloBasis::new(&s.sm, -1, cfg.basis_size)?;
        // first integrals solve (X − ā)w = 0: integrating factors of b = −ā
        let nb = beam.neg_conj();
        let mut diagnostics = Diagnostics {
            factor_up: factor_up.residuals,
            factor_down: factor_down.residuals,
            holo_basis_gram: basis_plus.gram_error.max(basis_minus.gram_error),
            ..Default::default()
        };
        let mut fis = Vec::with_capacity(2);
        for (basis, side) in [(&basis_plus, Side::Holomorphic), (&basis_minus, Side::Antiholomorphic)] {
            let fac = holo_integrating_factor(s, &nb, side, cfg.factor_degree)?;
            let solver = InvariantSolver::new(s, basis.degree, side, cfg.invariant_degree, cfg.penalty)?;
            let fi = first_integrals(s, &fac, &solver, &basis.modes)?;
            for w in &fi {
                diagnostics.first_integral_mode_match = diagnostics.first_integral_mode_match.max(w.residuals.mode_match);
                diagnostics.first_integral_wrong_side = diagnostics.first_integral_wrong_side.max(w.residuals.wrong_side);
            }
            fis.push(fi);
        }
        let fi_minus = fis.pop().unwrap();
        let fi_plus = fis.pop().unwrap();
        Ok(Self {
            a: beam.a.clone(),
            setup,
            beam,
            cfg,
            factor_up,
            factor_down,
            holo,
            basis_plus,
            basis_minus,
            fi_plus,
            fi_minus,
            diagnostics,
        })
    }

    fn check(&self, d: &BoundaryField) -> Result<()> {
        self.setup.bd.check(d)
    }

    /// Coefficients c_p = ⟨D, w^{±1,(p)}|∂₊SM⟩_μ.
    pub fn recover_omegas(&self, d: &BoundaryField) -> Result<Omegas> {
        self.check(d)?;
        let bd = &self.setup.bd;
        let co = |fi: &[FirstIntegral]| -> Result<Vec<C64>> { fi.iter().map(|w| bd.inner(d, &w.plus)).collect() };
        Ok(Omegas {
            plus: co(&self.fi_plus)?,
            minus: co(&self.fi_minus)?,
        })
    }

    /// The one-form ω₁ + ω₋₁ as closed-form components.
    pub fn omega_form(&self, om: &Omegas) -> (Func, Func) {
        let (px, py) = self.basis_plus.one_form(&om.plus);
        let (mx, my) = self.basis_minus.one_form(&om.minus);
        (px.plus(mx), py.plus(my))
    }

    /// I_a^{+1}ω₁ and I_a^{−1}ω₋₁.
    pub fn forward_omegas(&self, om: &Omegas) -> Result<(BoundaryField, BoundaryField)> {
        let s = &self.setup;
        let (px, py) = self.basis_plus.one_form(&om.plus);
        let (mx, my) = self.basis_minus.one_form(&om.minus);
        let p = forward_field(s, &self.a, &Pair::one_form(px, py).modes(&s.metric))?;
        let m = forward_field(s, &self.a, &Pair::one_form(mx, my).modes(&s.metric))?;
        Ok((p, m))
    }

    /// D⃗ (holomorphic side) or D⃖ on the SM grid and on ∂SM, from data I
    /// of a transport solution vanishing on ∂₋SM.
    fn d_field(&self, data: &FullBoundaryField, side: Side) -> Result<(crate::phase_space::SmField, FullBoundaryField, f64)> {
        let s = &self.setup;
        let fac = match side {
            Side::Holomorphic => &self.factor_up,
            Side::Antiholomorphic => &self.factor_down,
        };
        let h = data.zip(&fac.exp_full(-1.0), |a, b| a * b);
        let (q, diag) = match side {
            Side::Holomorphic => self.holo.apply(s, &h)?,
            Side::Antiholomorphic => self.holo.apply_anti(s, &h)?,
        };
        let (qpsi, _) = psi_extension(s, &q)?;
        let zero = Beam::new(s, &Func::Zero)?;
        let qb = op_q(s, &zero, &q)?;
        let sm = qpsi.zip(&fac.sm, |a, b| a * b.exp());
        let bdv = qb.zip(&fac.boundary, |a, b| a * b.exp());
        Ok((sm, bdv, diag.right_inverse))
    }

    /// (f, h₀) from data I = I_a[⋆dh₀, f].
    pub fn recover_f_h0(&self, d: &BoundaryField) -> Result<(Vec<C64>, Vec<C64>, Diagnostics)> {
        self.check(d)?;
        let s = &self.setup;
        let sm = &s.sm;
        let bd = &s.bd;
        let n = sm.n_nodes();
        let data = bd.extend_by_zero(d);
        let (dup_sm, dup_bd, r_up) = self.d_field(&data, Side::Holomorphic)?;
        let (ddn_sm, ddn_bd, r_dn) = self.d_field(&data, Side::Antiholomorphic)?;
        let su = sm.analyze(&dup_sm)?;
        let sd = sm.analyze(&ddn_sm)?;
        // boundary traces of G = (u − D⃗)₀ and K = (u − D⃖)₀
        let tg = bd.fiber_mean(&data.sub(&dup_bd));
        let tk = bd.fiber_mean(&data.sub(&ddn_bd));
        let (g, fit_g) = g_kernel_solve(&s.sm.lattice, Side::Holomorphic, &tg)?;
        let (k, fit_k) = g_kernel_solve(&s.sm.lattice, Side::Antiholomorphic, &tk)?;
        let i = C64::i();
        let du0 = sm.mode(&su, 0);
        let dd0 = sm.mode(&sd, 0);
        let h0: Vec<C64> = (0..n).map(|p| (g[p] - k[p] + du0[p] - dd0[p]) * (-0.5 * i)).collect();
        let e1 = sm.eta_plus_mode(&sm.mode(&su, -1), -1);
        let e2 = sm.eta_minus_mode(&sm.mode(&sd, 1), 1);
        let av = sm.lattice.sample(&self.a);
        let f: Vec<C64> = (0..n)
            .map(|p| -e1[p] - e2[p] - av[p] * 0.5 * (du0[p] + dd0[p] + g[p] + k[p]))
            .collect();
        let mut diag = self.diagnostics.clone();
        diag.holo_right_inverse = [r_up, r_dn];
        diag.g_fit = [fit_g, fit_k];
        let tr = boundary_trace(&sm.lattice, &h0, 4 * sm.lattice.n);
        let scale = scalar_norm(&h0, &sm.vol).max(scalar_norm(&f, &sm.vol)).max(f64::MIN_POSITIVE);
        let hb = (tr.iter().map(|v| v.norm_sqr()).sum::<f64>() / tr.len() as f64).sqrt();
        diag.h0_boundary = hb / (scale / PI.sqrt());
        Ok((f, h0, diag))
    }

    /// Full decomposition: ω's first, then (f, h₀) from the remainder.
    pub fn decompose_data(&self, d: &BoundaryField) -> Result<Quadruple> {
        let om = self.recover_omegas(d)?;
        let (p, m) = self.forward_omegas(&om)?;
        let rest = d.sub(&p).sub(&m);
        let (f, h0, mut diag) = self.recover_f_h0(&rest)?;
        let dn = self.setup.bd.norm(d);
        if dn > 0.0 {
            let bp: f64 = om.plus.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let bm: f64 = om.minus.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            diag.bessel = [bp, bm];
        }
        Ok(Quadruple {
            f,
            h0,
            omegas: om,
            diagnostics: diag,
        })
    }

    /// Data of a recovered quadruple.
    pub fn forward_quadruple(&self, q: &Quadruple) -> Result<Projections> {
        let s = &self.setup;
        let l = &s.sm.lattice;
        let n = l.len();
        let zero_form = OneForm::zeros(n);
        let zero = vec![C64::new(0.0, 0.0); n];
        let p0 = forward_lattice_pair(s, &self.a, &zero_form, &q.f)?;
        let perp = forward_lattice_pair(s, &self.a, &OneForm::star_d(l, &q.h0), &zero)?;
        let (plus, minus) = self.forward_omegas(&q.omegas)?;
        Ok(Projections { p0, perp, plus, minus })
    }

    /// P_{a,0}, P_{a,⊥}, P_{a,±1} applied to data.
    pub fn projections(&self, d: &BoundaryField) -> Result<Projections> {
        let q = self.decompose_data(d)?;
        self.forward_quadruple(&q)
    }
}

/// Holomorphic (η₋g = 0) or antiholomorphic (η₊g = 0) function with the
/// given equispaced boundary trace, by Fourier fitting on the circle:
/// returns the interior values and the relative misfit of the trace.
pub fn g_kernel_solve(lattice: &crate::phase_space::Lattice, side: Side, trace: &[C64]) -> Result<(Vec<C64>, f64)> {
    let m = trace.len();
    if m < 4 {
        return Err(Error::invalid("boundary trace needs at least 4 samples"));
    }
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let mut c = trace.to_vec();
    fft.process(&mut c);
    for v in c.iter_mut() {
        *v /= m as f64;
    }
    let kmax = (m / 2 - 1) as i64;
    let coef = |k: i64| c[k.rem_euclid(m as i64) as usize];
    let mut keep = 0.0;
    let mut total = 0.0;
    for k in -(m as i64 / 2)..(m as i64 / 2) {
        let e = coef(k).norm_sqr();
        total += e;
        let ok = match side {
            Side::Holomorphic => k >= 0 && k <= kmax,
            Side::Antiholomorphic => k <= 0 && k >= -kmax,
        };
        if ok {
            keep += e;
        }
    }
    let misfit = if total > 0.0 { ((total - keep).max(0.0) / total).sqrt() } else { 0.0 };
    let vals = (0..lattice.len())
        .map(|p| {
            let (x, y) = lattice.node_xy(p);
            let z = match side {
                Side::Holomorphic => C64::new(x, y),
                Side::Antiholomorphic => C64::new(x, -y),
            };
            let sgn = side.sign() as i64;
            let mut acc = C64::new(0.0, 0.0);
            let mut zp = C64::new(1.0, 0.0);
            for n in 0..=kmax {
                acc += coef(sgn * n) * zp;
                zp *= z;
            }
            acc
        })
        .collect();
    Ok((vals, misfit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::Lattice;
    use crate::surface::ConformalMetric;
    use crate::transport::{GridSpec, ModeList};

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = [
            PipelineConfig { svd_cutoff: 0.0, ..Default::default() },
            PipelineConfig { penalty: f64::NAN, ..Default::default() },
            PipelineConfig { basis_size: 0, ..Default::default() },
            PipelineConfig { invariant_degree: 4, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidArgument(_))), "{c:?}");
        }
    }

    #[test]
    fn kernel_solve_from_trace() {
        let l = Lattice::new(16).unwrap();
        let m = 32;
        let tr: Vec<C64> = (0..m)
            .map(|i| {
                let b = 2.0 * PI * i as f64 / m as f64;
                C64::new(0.0, 2.0 * b).exp() + 1.0
            })
            .collect();
        let (v, mis) = g_kernel_solve(&l, Side::Holomorphic, &tr).unwrap();
        assert!(mis < 1e-14);
        for (p, val) in v.iter().enumerate() {
            let (x, y) = l.node_xy(p);
            assert!((val - (C64::new(x, y).powu(2) + 1.0)).norm() < 1e-13);
        }
        let (_, mis) = g_kernel_solve(&l, Side::Antiholomorphic, &tr).unwrap();
        assert!((mis - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(g_kernel_solve(&l, Side::Holomorphic, &tr[..3]).is_err());
    }

    #[test]
    fn small_grid_decomposition() {
        let g = GridSpec {
            n_x: 24,
            n_theta: 32,
            n_beta: 32,
            n_alpha: 24,
            ..Default::default()
        };
        let s = Setup::new(Arc::new(ConformalMetric::euclidean()), &g).unwrap();
        let cfg = PipelineConfig {
            factor_degree: 6,
            invariant_degree: 8,
            holo_degree: 10,
            basis_size: 3,
            ..Default::default()
        };
        let a = Func::gaussian([0.05, 0.1], 0.3, C64::new(0.6, 0.3));
        let pl = Pipeline::new(s.clone(), &a, cfg).unwrap();
        let f = Func::gaussian([0.1, -0.2], 0.3, C64::new(1.0, 0.5));
        let d = forward_field(&s, &a, &ModeList::scalar(f.clone())).unwrap();
        let q = pl.decompose_data(&d).unwrap();
        let want = s.sm.lattice.sample(&f);
        let e = scalar_norm(&q.f.iter().zip(&want).map(|(x, y)| x - y).collect::<Vec<_>>(), &s.sm.vol) / scalar_norm(&want, &s.sm.vol);
        let back = pl.forward_quadruple(&q).unwrap().sum();
        let c = s.bd.norm(&back.sub(&d)) / s.bd.norm(&d);
        assert!(e < 0.1 && c < 5e-2, "f {e}, consistency {c}");
    }
}
