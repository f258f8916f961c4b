//! Holomorphic and antiholomorphic integrating factors, invariant functions
//! with a prescribed fiber mode, first integrals and the holomorphization
//! operators.

use crate::error::{Error, Result};
use crate::linalg::{from_c64, hermitian_solve, to_c64, Tsvd};
use crate::phase_space::{BoundaryField, FullBoundaryField, SmField};
use crate::transport::{beam_odd_boundary, beam_odd_solution, op_b, op_p_invariant, Beam, GeodesicBasis, Setup};
use crate::C64;
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

/// Holomorphic side keeps nonnegative fiber modes, antiholomorphic side
/// nonpositive ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Holomorphic,
    Antiholomorphic,
}

impl Side {
    pub fn sign(self) -> i32 {
        match self {
            Side::Holomorphic => 1,
            Side::Antiholomorphic => -1,
        }
    }

    /// Multiplier of (Id ± iH) on mode k.
    fn projector(self, k: i64) -> C64 {
        C64::new(1.0 + (self.sign() as i64 * k.signum()) as f64, 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FactorResiduals {
    /// ‖Xw + b‖/‖b‖ measured with the grid derivatives
    pub transport: f64,
    /// ‖(X⊥(u+p))₀‖/‖b‖, the defect left by the invariant correction
    pub correction: f64,
    pub wrong_side: f64,
    pub oddness: f64,
}

/// Odd solution of Xw = −b with one-sided fiber spectrum, on the SM grid
/// and on ∂SM.
#[derive(Clone, Debug)]
pub struct IntegratingFactor {
    pub side: Side,
    pub sm: SmField,
    pub boundary: FullBoundaryField,
    pub residuals: FactorResiduals,
    pub source: String,
}

impl IntegratingFactor {
    /// e^{±w} restricted to ∂₊SM.
    pub fn exp_plus(&self, setup: &Setup, sign: f64) -> BoundaryField {
        let r = setup.bd.restrict(&self.boundary);
        r.map(|v| (v * sign).exp())
    }

    pub fn exp_full(&self, sign: f64) -> FullBoundaryField {
        self.boundary.map(|v| (v * sign).exp())
    }

    pub fn exp_sm(&self, sign: f64) -> SmField {
        self.sm.map(|v| (v * sign).exp())
    }
}

/// Per-node fiber modes lo..=hi of every basis member: [node][mode][member].
fn basis_modes(setup: &Setup, basis: &GeodesicBasis, lo: i32, hi: i32) -> Vec<Vec<Vec<C64>>> {
    crate::par::map(setup.sm.n_nodes(), |p| basis.node_modes(setup, p, lo, hi))
}

/// Builds the integrating factor of `beam.a` on the given side: the odd
/// beam solution u plus an invariant odd correction p chosen by least
/// squares so that (X⊥(u+p))₀ = 0, followed by (Id ± iH).
pub fn holo_integrating_factor(setup: &Setup, beam: &Beam, side: Side, degree: usize) -> Result<IntegratingFactor> {
    let sm = &setup.sm;
    let bd = &setup.bd;
    let source = beam.a.descriptor();
    if beam.is_zero() {
        return Ok(IntegratingFactor {
            side,
            sm: sm.zeros(),
            boundary: bd.full_zeros(),
            residuals: FactorResiduals::default(),
            source,
        });
    }
    let n = sm.n_nodes();
    let u = beam_odd_solution(setup, beam);
    let su = sm.analyze(&u)?;
    let i = C64::i();
    let xperp0 = |m1: &[C64], p1: &[C64]| -> Vec<C64> {
        let a = sm.eta_plus_mode(m1, -1);
        let b = sm.eta_minus_mode(p1, 1);
        a.iter().zip(&b).map(|(x, y)| -i * (x - y)).collect()
    };
    let defect = xperp0(&sm.mode(&su, -1), &sm.mode(&su, 1));

    let basis = GeodesicBasis::triangular(degree);
    let basis = basis.restrict(&basis.indices(-1));
    let nb = basis.len();
    let modes = basis_modes(setup, &basis, -1, 1);
    let cols = crate::par::map(nb, |j| {
        let m1: Vec<C64> = (0..n).map(|p| modes[p][0][j]).collect();
        let p1: Vec<C64> = (0..n).map(|p| modes[p][2][j]).collect();
        xperp0(&m1, &p1)
    });
    let sw: Vec<f64> = sm.vol.iter().map(|v| v.sqrt()).collect();
    let a = Mat::<c64>::from_fn(n, nb, |r, j| to_c64(cols[j][r] * sw[r]));
    let rhs: Vec<C64> = (0..n).map(|r| -defect[r] * sw[r]).collect();
    let c = Tsvd::new(&a, 1e-10)?.solve(&rhs);

    let b_nodes = sm.lattice.sample(&beam.a);
    let b_norm = sm.node_norm(&b_nodes).max(f64::MIN_POSITIVE);
    let left: Vec<C64> = (0..n)
        .map(|r| defect[r] + (0..nb).map(|j| cols[j][r] * c[j]).sum::<C64>())
        .collect();
    let correction = sm.node_norm(&left) / b_norm;

    let total = u.add(&basis.field_sm(setup, &c));
    let st = sm.analyze(&total)?;
    let w = sm.synthesize(&sm.map_modes(&st, |k| side.projector(k as i64)))?;

    let ub = beam_odd_boundary(setup, beam)?;
    let pb = basis.field_full(setup, &c);
    let boundary = bd.fiber_multiplier(&ub.add(&pb), |k| side.projector(k))?;

    let xw = sm.apply_x(&w)?;
    let nt = sm.n_theta;
    let res = SmField {
        n_nodes: n,
        n_theta: nt,
        data: (0..n * nt).map(|q| xw.data[q] + b_nodes[q / nt]).collect(),
    };
    let bfield = SmField {
        n_nodes: n,
        n_theta: nt,
        data: (0..n * nt).map(|q| b_nodes[q / nt]).collect(),
    };
    let transport = sm.norm(&res) / sm.norm(&bfield).max(f64::MIN_POSITIVE);
    let sw_spec = sm.analyze(&w)?;
    let wrong = sm.filter_modes(&sw_spec, |k| k * side.sign() < 0);
    let wrong_side = sm.norm_spec(&wrong) / sm.norm_spec(&sw_spec).max(f64::MIN_POSITIVE);
    let half = nt / 2;
    let mut odd = 0.0f64;
    for p in 0..n {
        for l in 0..half {
            odd = odd.max((w.at(p, l) + w.at(p, l + half)).norm());
        }
    }
    let oddness = odd / w.max_abs().max(f64::MIN_POSITIVE);
    Ok(IntegratingFactor {
        side,
        sm: w,
        boundary,
        residuals: FactorResiduals {
            transport,
            correction,
            wrong_side,
            oddness,
        },
        source,
    })
}

/// Residuals of an invariant function with prescribed mode.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct InvariantResiduals {
    /// ‖w_m − f‖/‖f‖
    pub mode_match: f64,
    /// wrong-side mode mass relative to ‖f‖
    pub wrong_side: f64,
}

/// Least-squares machinery for invariant functions w (Xw = 0 exactly, as
/// members of the geodesic basis) with w_m = f and vanishing modes on the
/// wrong side of m, enforced as a weighted penalty.
pub struct InvariantSolver {
    pub basis: GeodesicBasis,
    pub m: i32,
    pub side: Side,
    pub penalty: f64,
    /// mode-m value of each member at each node: [node][member]
    target: Vec<Vec<C64>>,
    vol: Vec<f64>,
    normal: Mat<c64>,
    wrong: Mat<c64>,
}

impl std::fmt::Debug for InvariantSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "InvariantSolver(m={}, {:?}, members={}, penalty={})",
            self.m,
            self.side,
            self.basis.len(),
            self.penalty
        )
    }
}

impl InvariantSolver {
    pub fn new(setup: &Setup, m: i32, side: Side, degree: usize, penalty: f64) -> Result<Self> {
        let sm = &setup.sm;
        let l = degree as i32;
        if m.abs() > l {
            return Err(Error::invalid(format!("mode {m} exceeds basis degree {degree}")));
        }
        if l > sm.k_max as i32 {
            return Err(Error::invalid(format!(
                "basis degree {degree} exceeds the resolved fiber modes ({})",
                sm.k_max
            )));
        }
        let basis = GeodesicBasis::triangular(degree);
        let nb = basis.len();
        let (lo, hi) = match side {
            Side::Holomorphic => (-l, m),
            Side::Antiholomorphic => (m, l),
        };
        let target_pos = (m - lo) as usize;
        let n = sm.n_nodes();
        let chunk = 64;
        let n_chunks = n.div_ceil(chunk);
        let parts = crate::par::map(n_chunks, |ci| {
            let nodes: Vec<usize> = (ci * chunk..((ci + 1) * chunk).min(n)).collect();
            let per: Vec<Vec<Vec<C64>>> = nodes.iter().map(|&p| basis.node_modes(setup, p, lo, hi)).collect();
            let n_wrong = (hi - lo) as usize;
            let rows = nodes.len() * n_wrong;
            let wm = Mat::<c64>::from_fn(rows, nb, |r, j| {
                let (t, k) = (r / n_wrong, r % n_wrong);
                let kk = if k >= target_pos { k + 1 } else { k };
                to_c64(per[t][kk][j] * sm.vol[nodes[t]].sqrt())
            });
            let tm = Mat::<c64>::from_fn(nodes.len(), nb, |t, j| to_c64(per[t][target_pos][j] * sm.vol[nodes[t]].sqrt()));
            let gw = wm.adjoint() * &wm;
            let gt = tm.adjoint() * &tm;
            let targets: Vec<Vec<C64>> = per.iter().map(|v| v[target_pos].clone()).collect();
            (gw, gt, targets)
        });
        let mut wrong = Mat::<c64>::zeros(nb, nb);
        let mut gt = Mat::<c64>::zeros(nb, nb);
        let mut target = Vec::with_capacity(n);
        for (a, b, t) in parts {
            wrong += &a;
            gt += &b;
            target.extend(t);
        }
        let p2 = penalty * penalty;
        let normal = Mat::<c64>::from_fn(nb, nb, |i, j| gt[(i, j)] + wrong[(i, j)] * p2);
        Ok(Self {
            basis,
            m,
            side,
            penalty,
            target,
            vol: sm.vol.clone(),
            normal,
            wrong,
        })
    }

    /// Coefficients for each target mode field f (node values).
    pub fn solve(&self, fs: &[Vec<C64>]) -> Result<Vec<(Vec<C64>, InvariantResiduals)>> {
        let nb = self.basis.len();
        let n = self.target.len();
        for f in fs {
            if f.len() != n {
                return Err(Error::mismatch("target field does not match the SM grid"));
            }
        }
        let rhs = Mat::<c64>::from_fn(nb, fs.len(), |j, c| {
            let s: C64 = (0..n).map(|p| self.target[p][j].conj() * fs[c][p] * self.vol[p]).sum();
            to_c64(s)
        });
        let x = hermitian_solve(&self.normal, &rhs, 1e-14)?;
        let mut out = Vec::with_capacity(fs.len());
        for (c, f) in fs.iter().enumerate() {
            let coef: Vec<C64> = (0..nb).map(|j| from_c64(x[(j, c)])).collect();
            let fit = self.mode_values(&coef);
            let fn2: f64 = (0..n).map(|p| f[p].norm_sqr() * self.vol[p]).sum();
            let e2: f64 = (0..n).map(|p| (fit[p] - f[p]).norm_sqr() * self.vol[p]).sum();
            let cv = Mat::<c64>::from_fn(nb, 1, |j, _| to_c64(coef[j]));
            let ww = (cv.adjoint() * &self.wrong * &cv)[(0, 0)].re.max(0.0);
            let scale = fn2.sqrt().max(f64::MIN_POSITIVE);
            out.push((
                coef,
                InvariantResiduals {
                    mode_match: e2.sqrt() / scale,
                    wrong_side: ww.sqrt() / scale,
                },
            ));
        }
        Ok(out)
    }

    /// Mode-m node values of Σ c_j w_j.
    pub fn mode_values(&self, c: &[C64]) -> Vec<C64> {
        self.target
            .iter()
            .map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Invariant function with w_m = f and one-sided spectrum, on the SM grid.
pub fn invariant_with_mode(
    setup: &Setup,
    m: i32,
    f: &[C64],
    side: Side,
    degree: usize,
    penalty: f64,
) -> Result<(SmField, InvariantResiduals)> {
    let solver = InvariantSolver::new(setup, m, side, degree, penalty)?;
    let mut r = solver.solve(&[f.to_vec()])?;
    let (c, res) = r.pop().unwrap();
    Ok((solver.basis.field_sm(setup, &c), res))
}

/// w = e^{w'} v' with (X − ā)w = 0 and w_{±1} = φ: `factor` integrates
/// b = −ā on the side matching the solver.
#[derive(Clone, Debug)]
pub struct FirstIntegral {
    pub coeffs: Vec<C64>,
    pub plus: BoundaryField,
    pub residuals: InvariantResiduals,
}

impl FirstIntegral {
    pub fn sm_field(&self, setup: &Setup, solver: &InvariantSolver, factor: &IntegratingFactor) -> SmField {
        let v = solver.basis.field_sm(setup, &self.coeffs);
        v.zip(&factor.sm, |a, b| a * b.exp())
    }
}

pub fn first_integrals(
    setup: &Setup,
    factor: &IntegratingFactor,
    solver: &InvariantSolver,
    phis: &[Vec<C64>],
) -> Result<Vec<FirstIntegral>> {
    if factor.side != solver.side {
        return Err(Error::invalid("integrating factor and invariant solver sides differ"));
    }
    let e = factor.exp_plus(setup, 1.0);
    let sols = solver.solve(phis)?;
    Ok(sols
        .into_iter()
        .map(|(coeffs, residuals)| {
            let v = solver.basis.field_plus(setup, &coeffs);
            FirstIntegral {
                plus: v.zip(&e, |a, b| a * b),
                coeffs,
                residuals,
            }
        })
        .collect())
}

/// Diagnostics of one holomorphization.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct HoloDiag {
    /// ‖P₀w − B₀y‖/‖B₀y‖ of the right-inverse step
    pub right_inverse: f64,
}

/// The holomorphization operator h ↦ B⃗h = ½[(Id − iH)h + i(Id + iH)A₊w] on
/// ∂₊SM, where w solves P₀w = B₀(Id − iH)h through truncated-SVD right
/// inverses of the antipodal blocks P± of P₀ = B₀HA₊ over the geodesic basis.
pub struct Holomorphizer {
    pub basis: GeodesicBasis,
    idx: [Vec<usize>; 2],
    inv: [Tsvd; 2],
    sqrt_w: Vec<f64>,
    pub cutoff: f64,
}

impl std::fmt::Debug for Holomorphizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Holomorphizer(members={}, ranks={}/{}, cutoff={})",
            self.basis.len(),
            self.inv[0].rank(),
            self.inv[1].rank(),
            self.cutoff
        )
    }
}

/// Columns P₀w_j over the basis, weighted by √μ.
pub fn assemble_p_basis(setup: &Setup, beam: &Beam, basis: &GeodesicBasis, idx: &[usize]) -> Result<(Mat<c64>, Vec<f64>)> {
    let bd = &setup.bd;
    let sqrt_w: Vec<f64> = (0..bd.len())
        .map(|q| bd.weight(q / bd.n_alpha, q % bd.n_alpha).sqrt())
        .collect();
    let cols = crate::par::map(idx.len(), |c| -> Result<BoundaryField> {
        let mut e = vec![C64::new(0.0, 0.0); basis.len()];
        e[idx[c]] = C64::new(1.0, 0.0);
        op_p_invariant(setup, beam, &basis.field_full(setup, &e))
    });
    let mut m = Mat::<c64>::zeros(bd.len(), idx.len());
    for (c, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (r, v) in col.data.iter().enumerate() {
            m[(r, c)] = to_c64(v * sqrt_w[r]);
        }
    }
    Ok((m, sqrt_w))
}

/// `assemble_p_basis` through an optional on-disk cache.
pub fn p_basis_cached(
    setup: &Setup,
    beam: &Beam,
    basis: &GeodesicBasis,
    idx: &[usize],
    cache: Option<&crate::cache::Cache>,
) -> Result<(Mat<c64>, Vec<f64>)> {
    let Some(cache) = cache else {
        return assemble_p_basis(setup, beam, basis, idx);
    };
    let bd = &setup.bd;
    let sqrt_w: Vec<f64> = (0..bd.len())
        .map(|q| bd.weight(q / bd.n_alpha, q % bd.n_alpha).sqrt())
        .collect();
    let terms: Vec<(u32, i32)> = idx.iter().map(|&i| basis.terms[i]).collect();
    let parts = [
        "p_basis".to_string(),
        setup.descriptor(),
        beam.a.descriptor(),
        format!("{terms:?}"),
    ];
    let refs: Vec<&str> = parts.iter().map(|s| s.as_str()).collect();
    let m = cache.matrix(&refs, || assemble_p_basis(setup, beam, basis, idx).map(|r| r.0))?;
    Ok((m, sqrt_w))
}

impl Holomorphizer {
    pub fn new(setup: &Setup, degree: usize, cutoff: f64) -> Result<Self> {
        Self::with_cache(setup, degree, cutoff, None)
    }

    pub fn with_cache(setup: &Setup, degree: usize, cutoff: f64, cache: Option<&crate::cache::Cache>) -> Result<Self> {
        let basis = GeodesicBasis::triangular(degree);
        let zero = Beam::new(setup, &crate::func::Func::Zero)?;
        let idx = [basis.indices(1), basis.indices(-1)];
        let mut inv = Vec::with_capacity(2);
        let mut sqrt_w = Vec::new();
        for ix in &idx {
            let (m, w) = p_basis_cached(setup, &zero, &basis, ix, cache)?;
            inv.push(Tsvd::new(&m, cutoff)?);
            sqrt_w = w;
        }
        let inv: [Tsvd; 2] = inv.try_into().map_err(|_| Error::Linalg("block count".into()))?;
        Ok(Self {
            basis,
            idx,
            inv,
            sqrt_w,
            cutoff,
        })
    }

    pub fn spectra(&self) -> [&[f64]; 2] {
        [&self.inv[0].spectrum, &self.inv[1].spectrum]
    }

    /// B⃗h on ∂₊SM for h on ∂SM.
    pub fn apply(&self, setup: &Setup, h: &FullBoundaryField) -> Result<(BoundaryField, HoloDiag)> {
        let bd = &setup.bd;
        let zero = Beam::new(setup, &crate::func::Func::Zero)?;
        let y = bd.fiber_multiplier(h, |k| Side::Antiholomorphic.projector(k))?;
        let rhs = op_b(setup, &zero, &y)?;
        let wr: Vec<C64> = rhs.data.iter().zip(&self.sqrt_w).map(|(v, s)| v * *s).collect();
        let mut c = vec![C64::new(0.0, 0.0); self.basis.len()];
        let mut fitted = vec![C64::new(0.0, 0.0); wr.len()];
        for b in 0..2 {
            let cb = self.inv[b].solve(&wr);
            let pr = self.inv[b].project_range(&wr);
            for (f, p) in fitted.iter_mut().zip(&pr) {
                *f += p;
            }
            for (k, &j) in self.idx[b].iter().enumerate() {
                c[j] = cb[k];
            }
        }
        let rn: f64 = wr.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let en: f64 = wr.iter().zip(&fitted).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let z = self.basis.field_full(setup, &c);
        let hz = bd.fiber_multiplier(&z, |k| Side::Holomorphic.projector(k))?;
        let i = C64::i();
        let full = y.zip(&hz, |a, b| (a + i * b) * 0.5);
        Ok((
            bd.restrict(&full),
            HoloDiag {
                right_inverse: if rn > 0.0 { en / rn } else { 0.0 },
            },
        ))
    }

    /// B⃖h = conj(B⃗(conj h)).
    pub fn apply_anti(&self, setup: &Setup, h: &FullBoundaryField) -> Result<(BoundaryField, HoloDiag)> {
        let (b, d) = self.apply(setup, &h.conj())?;
        Ok((b.conj(), d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::Func;
    use crate::surface::ConformalMetric;
    use crate::transport::GridSpec;
    use std::sync::{Arc, OnceLock};

    fn setup() -> &'static Arc<Setup> {
        static S: OnceLock<Arc<Setup>> = OnceLock::new();
        S.get_or_init(|| {
            let g = GridSpec {
                n_x: 24,
                n_theta: 32,
                n_beta: 32,
                n_alpha: 16,
                ..Default::default()
            };
            Setup::new(Arc::new(ConformalMetric::euclidean()), &g).unwrap()
        })
    }

    #[test]
    fn zero_attenuation_factor_vanishes() {
        let s = setup();
        let beam = Beam::new(s, &Func::Zero).unwrap();
        let f = holo_integrating_factor(s, &beam, Side::Holomorphic, 4).unwrap();
        assert!(f.sm.max_abs() == 0.0 && f.boundary.max_abs() == 0.0);
        assert!(f.exp_sm(1.0).data.iter().all(|v| *v == C64::new(1.0, 0.0)));
    }

    #[test]
    fn gaussian_factor_is_one_sided() {
        let s = setup();
        let beam = Beam::new(s, &Func::gaussian([0.1, -0.1], 0.35, C64::new(0.8, 0.4))).unwrap();
        for side in [Side::Holomorphic, Side::Antiholomorphic] {
            let f = holo_integrating_factor(s, &beam, side, 6).unwrap();
            let r = f.residuals;
            assert!(r.transport < 5e-2 && r.wrong_side < 1e-12 && r.oddness < 1e-12, "{side:?} {r:?}");
        }
    }

    #[test]
    fn holomorphizer_is_linear() {
        let s = setup();
        let h = Holomorphizer::new(s, 6, 1e-8).unwrap();
        let bd = &s.bd;
        let f1 = bd.full_zeros();
        let mut f2 = f1.clone();
        let mut f3 = f1.clone();
        let nf = bd.n_fiber();
        for q in 0..f1.data.len() {
            let (b, a) = (bd.beta(q / nf), bd.full_alpha(q % nf));
            f2.data[q] = C64::new((b + a).cos(), 0.5 * (2.0 * b).sin());
            f3.data[q] = C64::new(a.sin() * b.cos(), 0.0);
        }
        let (z, _) = h.apply(s, &f1).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let c = C64::new(0.3, -2.0);
        let (a, _) = h.apply(s, &f2).unwrap();
        let (b, _) = h.apply(s, &f3).unwrap();
        let (ab, _) = h.apply(s, &f2.add(&f3.scale(c))).unwrap();
        assert!(ab.sub(&a.add(&b.scale(c))).max_abs() < 1e-10 * ab.max_abs());
        let (an, _) = h.apply_anti(s, &f2).unwrap();
        let (ac, _) = h.apply(s, &f2.conj()).unwrap();
        assert!(an.sub(&ac.conj()).max_abs() == 0.0);
    }
}
