//! Antipodal splitting of boundary data and numerical range tests for the
//! attenuated transform: membership u = P_a w, the constrained versions for
//! I⁰ and solenoidal I¹, and the projection criteria.

use crate::error::{Error, Result};
use crate::fields::OneForm;
use crate::adjoint_ops::forward_lattice_pair;
use crate::holo::p_basis_cached;
use crate::linalg::{from_c64, to_c64, Tsvd};
use crate::phase_space::BoundaryField;
use crate::reconstruct::Pipeline;
use crate::transport::{integrating_factor_u, Beam, GeodesicBasis, Setup};
use crate::C64;
use faer::{c64, Mat};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// w∘α_A on ∂₊SM, where α_A sends (x, v) to the reversed exit of the
/// geodesic through (x, v). Returns the number of extrapolated samples.
pub fn antipodal_pullback(setup: &Setup, w: &BoundaryField) -> Result<(BoundaryField, usize)> {
    let bd = &setup.bd;
    bd.check(w)?;
    let na = bd.n_alpha;
    let vals = crate::par::map(bd.len(), |q| {
        let e = setup.chord_plus(q / na, q % na);
        bd.interp(w, e.beta, e.alpha - PI)
    });
    let clamped = vals.iter().filter(|v| v.1).count();
    let mut out = bd.zeros();
    for (o, v) in out.data.iter_mut().zip(vals) {
        *o = v.0;
    }
    Ok((out, clamped))
}

/// w± = ½(Id ± α_A^*)w.
pub fn antipodal_split(setup: &Setup, w: &BoundaryField) -> Result<(BoundaryField, BoundaryField)> {
    let (wa, _) = antipodal_pullback(setup, w)?;
    Ok((w.zip(&wa, |a, b| (a + b) * 0.5), w.zip(&wa, |a, b| (a - b) * 0.5)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeTarget {
    #[default]
    Pair,
    I0,
    I1Solenoidal,
}

#[derive(Clone, Debug, Serialize)]
pub struct RangeReport {
    pub target: RangeTarget,
    pub residual_relative: f64,
    /// coefficients of the least-squares preimage in the geodesic basis
    pub witness_coeffs: Vec<C64>,
    #[serde(skip)]
    pub witness_w: Option<BoundaryField>,
    pub condition_flags: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub verdict: bool,
    pub rank: usize,
    pub spectrum: Vec<f64>,
    pub grid: String,
}

impl RangeReport {
    fn decide(mut self) -> Self {
        self.verdict = self.residual_relative <= self.tolerance && self.condition_flags.values().all(|&v| v <= self.tolerance);
        self
    }
}

/// P_a assembled over a geodesic basis, with its truncated-SVD inverse and
/// the constraint rows for the I⁰ and solenoidal-I¹ characterizations.
pub struct RangeTester {
    pub basis: GeodesicBasis,
    pub beam: Beam,
    m: Mat<c64>,
    tsvd: Tsvd,
    sqrt_w: Vec<f64>,
    cutoff: f64,
    constraints: Option<Constraints>,
    grid: String,
}

struct Constraints {
    /// √vol·(w♯)₀ per node and member
    c0: Mat<c64>,
    /// √vol·e^{−2λ}curl β per node and member
    c1: Mat<c64>,
    /// (w♯)₀ per node and member
    mode0: Mat<c64>,
    /// e^{−2λ}curl β per node and member
    curl: Mat<c64>,
}

impl std::fmt::Debug for RangeTester {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RangeTester(members={}, rank={}, {})", self.basis.len(), self.tsvd.rank(), self.grid)
    }
}

fn weighted(u: &BoundaryField, w: &[f64]) -> Vec<C64> {
    u.data.iter().zip(w).map(|(a, b)| a * *b).collect()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn matvec(m: &Mat<c64>, x: &[C64]) -> Vec<C64> {
    let xc = Mat::<c64>::from_fn(x.len(), 1, |i, _| to_c64(x[i]));
    let y = m * &xc;
    (0..y.nrows()).map(|i| from_c64(y[(i, 0)])).collect()
}

impl RangeTester {
    pub fn new(setup: &Setup, beam: Beam, degree: usize, cutoff: f64) -> Result<Self> {
        Self::with_cache(setup, beam, degree, cutoff, None)
    }

    pub fn with_cache(setup: &Setup, beam: Beam, degree: usize, cutoff: f64, cache: Option<&crate::cache::Cache>) -> Result<Self> {
        let basis = GeodesicBasis::triangular(degree);
        let all: Vec<usize> = (0..basis.len()).collect();
        let (m, sqrt_w) = p_basis_cached(setup, &beam, &basis, &all, cache)?;
        let tsvd = Tsvd::new(&m, cutoff)?;
        Ok(Self {
            basis,
            beam,
            m,
            tsvd,
            sqrt_w,
            cutoff,
            constraints: None,
            grid: setup.descriptor(),
        })
    }

    pub fn rank(&self) -> usize {
        self.tsvd.rank()
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.tsvd.spectrum
    }

    /// The √μ-weighted matrix of P_a over the basis.
    pub fn matrix(&self) -> &Mat<c64> {
        &self.m
    }

    /// ‖P P† y − y‖/‖y‖ for weighted data y.
    pub fn right_inverse_residual(&self, y: &[C64]) -> f64 {
        let x = self.tsvd.solve(y);
        let r: Vec<C64> = matvec(&self.m, &x).iter().zip(y).map(|(a, b)| a - b).collect();
        norm(&r) / norm(y).max(f64::MIN_POSITIVE)
    }

    /// u minus its μ-orthogonal projection onto the resolved range.
    pub fn complement(&self, u: &BoundaryField) -> BoundaryField {
        let y = weighted(u, &self.sqrt_w);
        let p = self.tsvd.project_range(&y);
        let mut out = u.clone();
        for ((o, a), (b, s)) in out.data.iter_mut().zip(&y).zip(p.iter().zip(&self.sqrt_w)) {
            *o = if *s > 0.0 { (a - b) / *s } else { C64::new(0.0, 0.0) };
        }
        out
    }

    fn report(&self, setup: &Setup, target: RangeTarget, c: Vec<C64>, res: f64, tol: f64) -> RangeReport {
        RangeReport {
            target,
            residual_relative: res,
            witness_w: Some(self.basis.field_plus(setup, &c)),
            witness_coeffs: c,
            condition_flags: BTreeMap::new(),
            tolerance: tol,
            verdict: false,
            rank: self.tsvd.rank(),
            spectrum: self.tsvd.spectrum.clone(),
            grid: self.grid.clone(),
        }
    }

    /// Is u = P_a w for some w? Least squares over the basis.
    pub fn test_pair(&self, setup: &Setup, u: &BoundaryField, tol: f64) -> Result<RangeReport> {
        setup.bd.check(u)?;
        let y = weighted(u, &self.sqrt_w);
        let yn = norm(&y);
        if yn == 0.0 {
            let r = self.report(setup, RangeTarget::Pair, vec![C64::new(0.0, 0.0); self.basis.len()], 0.0, tol);
            return Ok(r.decide());
        }
        let x = self.tsvd.solve(&y);
        let r: Vec<C64> = matvec(&self.m, &x).iter().zip(&y).map(|(a, b)| a - b).collect();
        Ok(self.report(setup, RangeTarget::Pair, x, norm(&r) / yn, tol).decide())
    }

    fn build_constraints(setup: &Setup, beam: &Beam, basis: &GeodesicBasis) -> Constraints {
        let sm = &setup.sm;
        let l = &sm.lattice;
        let n = sm.n_nodes();
        let nt = sm.n_theta;
        let nb = basis.len();
        let ua = integrating_factor_u(&beam.neg_conj());
        // per node: modes −1, 0, 1 of w♯ = U_a w_ψ for every member
        let modes = crate::par::map(n, |p| {
            let mut acc = vec![vec![C64::new(0.0, 0.0); nb]; 3];
            let mut row = vec![C64::new(0.0, 0.0); nb];
            for l in 0..nt {
                let q = p * nt + l;
                basis.eval_ends(&setup.foot[q], &setup.exit[q], &mut row);
                let th = sm.theta(l);
                for (k, a) in acc.iter_mut().enumerate() {
                    let ph = C64::new(0.0, -((k as f64) - 1.0) * th).exp() * ua[q] / nt as f64;
                    for (x, v) in a.iter_mut().zip(&row) {
                        *x += v * ph;
                    }
                }
            }
            acc
        });
        let sv: Vec<f64> = sm.vol.iter().map(|v| v.sqrt()).collect();
        let mode0 = Mat::<c64>::from_fn(n, nb, |p, j| to_c64(modes[p][1][j]));
        let c0 = Mat::<c64>::from_fn(n, nb, |p, j| mode0[(p, j)] * c64::new(sv[p], 0.0));
        let cols = crate::par::map(nb, |j| {
            let mut beta = OneForm::zeros(n);
            for p in 0..n {
                let el = PI * sm.lam[p].exp();
                let (um, up) = (modes[p][0][j], modes[p][2][j]);
                beta.x[p] = (up + um) * el;
                beta.y[p] = C64::i() * (up - um) * el;
            }
            beta.curl(l)
        });
        let curl = Mat::<c64>::from_fn(n, nb, |p, j| to_c64(cols[j][p] * (-2.0 * sm.lam[p]).exp()));
        let c1 = Mat::<c64>::from_fn(n, nb, |p, j| curl[(p, j)] * c64::new(sv[p], 0.0));
        Constraints { c0, c1, mode0, curl }
    }

    fn constraints(&mut self, setup: &Setup) -> &Constraints {
        if self.constraints.is_none() {
            self.constraints = Some(Self::build_constraints(setup, &self.beam, &self.basis));
        }
        self.constraints.as_ref().unwrap()
    }

    /// Least squares for u = P_a w subject to (w♯)₀ = 0 (I⁰) or to the
    /// one-form of (w♯)_{±1} being closed (solenoidal I¹), enforced as
    /// weighted constraint rows. Flags report the part of P_a w that the
    /// constraint violation contributes, I_a[⋆d(w♯)₀, 0] or
    /// I_a[0, e^{−2λ}curl β]/2π, relative to u.
    pub fn test_constrained(&mut self, setup: &Setup, u: &BoundaryField, target: RangeTarget, tol: f64, weight: f64) -> Result<RangeReport> {
        if target == RangeTarget::Pair {
            return self.test_pair(setup, u, tol);
        }
        setup.bd.check(u)?;
        if !(weight > 0.0) {
            return Err(Error::invalid("constraint weight must be positive"));
        }
        let y = weighted(u, &self.sqrt_w);
        let yn = norm(&y);
        let nb = self.basis.len();
        let cutoff = self.cutoff;
        let name = match target {
            RangeTarget::I0 => "mode0_of_sharp",
            _ => "curl_of_sharp_one_form",
        };
        if yn == 0.0 {
            let mut r = self.report(setup, target, vec![C64::new(0.0, 0.0); nb], 0.0, tol);
            r.condition_flags.insert(name.into(), 0.0);
            return Ok(r.decide());
        }
        let m = self.m.clone();
        let a = self.beam.a.clone();
        let cons = self.constraints(setup);
        let c = match target {
            RangeTarget::I0 => &cons.c0,
            _ => &cons.c1,
        };
        let fro = |a: &Mat<c64>| a.norm_l2();
        let rho = weight * fro(&m) / fro(c).max(f64::MIN_POSITIVE);
        let rows = m.nrows() + c.nrows();
        let stacked = Mat::<c64>::from_fn(rows, nb, |r, j| {
            if r < m.nrows() {
                m[(r, j)]
            } else {
                c[(r - m.nrows(), j)] * c64::new(rho, 0.0)
            }
        });
        let mut rhs = y.clone();
        rhs.resize(rows, C64::new(0.0, 0.0));
        let x = Tsvd::new(&stacked, cutoff)?.solve(&rhs);
        let fit: Vec<C64> = matvec(&m, &x).iter().zip(&y).map(|(a, b)| a - b).collect();
        let n = setup.sm.n_nodes();
        let zero = vec![C64::new(0.0, 0.0); n];
        let viol = match target {
            RangeTarget::I0 => {
                let g = matvec(&cons.mode0, &x);
                forward_lattice_pair(setup, &a, &OneForm::star_d(&setup.sm.lattice, &g), &zero)?
            }
            _ => {
                let f: Vec<C64> = matvec(&cons.curl, &x).into_iter().map(|v| v / (2.0 * PI)).collect();
                forward_lattice_pair(setup, &a, &OneForm::zeros(n), &f)?
            }
        };
        let flag = setup.bd.norm(&viol) / setup.bd.norm(u);

        let mut r = self.report(setup, target, x, norm(&fit) / yn, tol);
        r.condition_flags.insert(name.into(), flag);
        Ok(r.decide())
    }
}

/// Membership through the projections: for I⁰ data P_{a,±1}u and P_{a,⊥}u
/// must vanish; for solenoidal I¹ data P_{a,0}u must vanish.
pub fn range_test_charac2(
    tester: &RangeTester,
    pipeline: &Pipeline,
    u: &BoundaryField,
    target: RangeTarget,
    tol: f64,
) -> Result<RangeReport> {
    let setup = &pipeline.setup;
    let mut r = tester.test_pair(setup, u, tol)?;
    r.target = target;
    let un = setup.bd.norm(u);
    if un == 0.0 {
        for k in ["p_plus", "p_minus", "p_perp", "p_zero"] {
            r.condition_flags.insert(k.into(), 0.0);
        }
        return Ok(r.decide());
    }
    let p = pipeline.projections(u)?;
    let rel = |b: &BoundaryField| setup.bd.norm(b) / un;
    match target {
        RangeTarget::I0 => {
            r.condition_flags.insert("p_plus".into(), rel(&p.plus));
            r.condition_flags.insert("p_minus".into(), rel(&p.minus));
            r.condition_flags.insert("p_perp".into(), rel(&p.perp));
        }
        RangeTarget::I1Solenoidal => {
            r.condition_flags.insert("p_zero".into(), rel(&p.p0));
        }
        RangeTarget::Pair => {
            r.condition_flags.insert("completeness".into(), rel(&p.sum().sub(u)));
        }
    }
    Ok(r.decide())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::Func;
    use crate::surface::ConformalMetric;
    use crate::transport::{forward_field, GridSpec, ModeList};
    use std::sync::{Arc, OnceLock};

    fn setup() -> &'static Arc<Setup> {
        static S: OnceLock<Arc<Setup>> = OnceLock::new();
        S.get_or_init(|| {
            let g = GridSpec {
                n_x: 16,
                n_theta: 32,
                n_beta: 32,
                n_alpha: 16,
                ..Default::default()
            };
            Setup::new(Arc::new(ConformalMetric::euclidean()), &g).unwrap()
        })
    }

    fn rel(a: &BoundaryField, b: &BoundaryField, s: &Setup) -> f64 {
        s.bd.norm(&a.sub(b)) / s.bd.norm(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn split_recombines_and_is_idempotent() {
        let s = setup();
        let w = s.bd.field_from_fn(|b, a| C64::new((2.0 * b).cos() + a, (b + 3.0 * a).sin()));
        let (p, m) = antipodal_split(s, &w).unwrap();
        assert!(rel(&p.add(&m), &w, s) < 1e-14);
        let (pp, pm) = antipodal_split(s, &p).unwrap();
        assert!(rel(&pp, &p, s) < 1e-2 && s.bd.norm(&pm) < 1e-2 * s.bd.norm(&p));
    }

    #[test]
    fn basis_members_have_their_parity() {
        let s = setup();
        let b = GeodesicBasis::triangular(3);
        for i in 0..b.len() {
            let mut c = vec![C64::new(0.0, 0.0); b.len()];
            c[i] = C64::new(1.0, 0.0);
            let w = b.field_plus(s, &c);
            let (p, m) = antipodal_split(s, &w).unwrap();
            let (keep, drop) = if b.parity(i) > 0 { (p, m) } else { (m, p) };
            assert!(s.bd.norm(&drop) < 1e-2 * s.bd.norm(&keep), "{:?}", b.terms[i]);
        }
    }

    #[test]
    fn unattenuated_function_data_is_even() {
        let s = setup();
        let d = forward_field(s, &Func::Zero, &ModeList::scalar(Func::gaussian([0.2, -0.1], 0.3, 1.0))).unwrap();
        let (p, m) = antipodal_split(s, &d).unwrap();
        assert!(s.bd.norm(&m) < 1e-2 * s.bd.norm(&p), "{}", s.bd.norm(&m) / s.bd.norm(&p));
    }

    #[test]
    fn range_membership() {
        let s = setup();
        let beam = Beam::new(s, &Func::gaussian([0.1, 0.0], 0.4, C64::new(0.6, 0.3))).unwrap();
        let rt = RangeTester::new(s, beam, 6, 1e-8).unwrap();
        assert!(rt.rank() > 0 && rt.spectrum().len() == rt.basis.len());
        let x: Vec<C64> = (0..rt.basis.len()).map(|k| C64::new((k as f64).cos(), 0.3)).collect();
        let y = matvec(rt.matrix(), &x);
        assert!(rt.right_inverse_residual(&y) < 1e-6);
        let mut u = s.bd.zeros();
        for (o, (v, w)) in u.data.iter_mut().zip(y.iter().zip(&rt.sqrt_w)) {
            *o = v / *w;
        }
        let r = rt.test_pair(s, &u, 1e-3).unwrap();
        assert!(r.verdict, "{}", r.residual_relative);
        assert!(s.bd.norm(&rt.complement(&u)) < 1e-6 * s.bd.norm(&u));
        let noise = s.bd.field_from_fn(|b, a| C64::new((7.0 * b + 5.0 * a).sin(), (3.0 * b).cos() * a));
        let r = rt.test_pair(s, &noise, 1e-3).unwrap();
        assert!(!r.verdict);
        assert!(rt.test_pair(s, &s.bd.zeros(), 1e-3).unwrap().verdict);
    }
}
