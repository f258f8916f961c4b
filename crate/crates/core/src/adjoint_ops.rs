//! Adjoint transforms by weighted backprojection, the factorization of P_a
//! through the adjoints, and dense operator assembly with truncated-SVD
//! pseudoinverses.

use crate::error::{Error, Result};
use crate::fields::OneForm;
use crate::func::Func;
use crate::linalg::{from_c64, to_c64, Tsvd};
use crate::phase_space::{BoundaryField, LatticeFunc, SmField};
use crate::transport::{forward_field, integrating_factor_u, psi_extension, Beam, Pair, Setup};
use crate::C64;
use faer::{c64, Mat};
use std::f64::consts::PI;

/// I_a^* h = U_{−ā} h_ψ, with `beam` the beam of a.
pub fn adjoint_i(setup: &Setup, beam: &Beam, h: &BoundaryField) -> Result<SmField> {
    let (psi, _) = psi_extension(setup, h)?;
    Ok(adjoint_i_psi(beam, &psi))
}

/// U_{−ā}·h_ψ from an already extended h_ψ.
pub fn adjoint_i_psi(beam: &Beam, hpsi: &SmField) -> SmField {
    if beam.is_zero() {
        return hpsi.clone();
    }
    let u = integrating_factor_u(&beam.neg_conj());
    SmField {
        n_nodes: hpsi.n_nodes,
        n_theta: hpsi.n_theta,
        data: hpsi.data.iter().zip(&u).map(|(a, b)| a * b).collect(),
    }
}

/// 2π·(F)₀ for an SM field F.
pub fn mode0_backprojection(setup: &Setup, f: &SmField) -> Result<Vec<C64>> {
    let s = setup.sm.analyze(f)?;
    Ok(setup.sm.mode(&s, 0).into_iter().map(|v| v * (2.0 * PI)).collect())
}

/// The one-form whose modes ±1 are π(F)_{±1}.
pub fn mode1_backprojection(setup: &Setup, f: &SmField) -> Result<OneForm> {
    let sm = &setup.sm;
    let s = sm.analyze(f)?;
    let p = sm.mode(&s, 1);
    let m = sm.mode(&s, -1);
    let i = C64::i();
    let mut out = OneForm::zeros(sm.n_nodes());
    for k in 0..sm.n_nodes() {
        let el = PI * sm.lam[k].exp();
        out.x[k] = (p[k] + m[k]) * el;
        out.y[k] = i * (p[k] - m[k]) * el;
    }
    Ok(out)
}

/// (I_a⁰)^* h = 2π(U_{−ā}h_ψ)₀.
pub fn adjoint_i0(setup: &Setup, beam: &Beam, h: &BoundaryField) -> Result<Vec<C64>> {
    mode0_backprojection(setup, &adjoint_i(setup, beam, h)?)
}

/// (I_a¹)^* h = π(U_{−ā}h_ψ)_{−1} + π(U_{−ā}h_ψ)_1 as a one-form.
pub fn adjoint_i1(setup: &Setup, beam: &Beam, h: &BoundaryField) -> Result<OneForm> {
    mode1_backprojection(setup, &adjoint_i(setup, beam, h)?)
}

/// Pair of lattice fields as closed-form-evaluable functions.
pub fn lattice_pair(setup: &Setup, alpha: &OneForm, f: &[C64]) -> Pair {
    let l = &setup.sm.lattice;
    let lf = |v: &[C64]| {
        if v.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            Func::Zero
        } else {
            LatticeFunc::new(l.clone(), v).into_func()
        }
    };
    Pair::new(lf(&alpha.x), lf(&alpha.y), lf(f))
}

/// I_a of a pair sampled on the lattice.
pub fn forward_lattice_pair(setup: &Setup, a: &Func, alpha: &OneForm, f: &[C64]) -> Result<BoundaryField> {
    let pair = lattice_pair(setup, alpha, f);
    forward_field(setup, a, &pair.modes(&setup.metric))
}

/// Right-hand side of −2πP_a w = I_a[⋆d(I⁰_{−ā})^*w, ⋆d(I¹_{−ā})^*w], given
/// w_ψ on the SM grid and the beam of a.
pub fn factorization_rhs(setup: &Setup, beam: &Beam, wpsi: &SmField) -> Result<BoundaryField> {
    // adjoints for −ā use U_{a}
    let sharp = adjoint_i_psi(&beam.neg_conj(), wpsi);
    let g0 = mode0_backprojection(setup, &sharp)?;
    let b1 = mode1_backprojection(setup, &sharp)?;
    let l = &setup.sm.lattice;
    let one = OneForm::star_d(l, &g0);
    let f: Vec<C64> = b1
        .curl(l)
        .into_iter()
        .zip(&setup.sm.lam)
        .map(|(c, lam)| c * (-2.0 * lam).exp())
        .collect();
    forward_lattice_pair(setup, &beam.a, &one, &f)
}

/// A linear map between finite-dimensional weighted spaces.
pub trait LinearOp: Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>>;
    fn in_weights(&self) -> Vec<f64>;
    fn out_weights(&self) -> Vec<f64>;
    fn in_descriptor(&self) -> String;
    fn out_descriptor(&self) -> String;
}

/// Dense realization of a linear operator together with the inner-product
/// weights of its domain and codomain.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub entries: Mat<c64>,
    pub in_descriptor: String,
    pub out_descriptor: String,
    pub in_weights: Vec<f64>,
    pub out_weights: Vec<f64>,
}

impl OperatorMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols() {
            return Err(Error::mismatch(format!(
                "operator expects {} inputs, got {}",
                self.cols(),
                x.len()
            )));
        }
        let v = Mat::<c64>::from_fn(x.len(), 1, |i, _| to_c64(x[i]));
        let r = &self.entries * &v;
        Ok((0..self.rows()).map(|i| from_c64(r[(i, 0)])).collect())
    }

    /// Adjoint with respect to the stored weights: W_in⁻¹ Mᴴ W_out.
    pub fn weighted_adjoint(&self) -> OperatorMatrix {
        let m = &self.entries;
        let entries = Mat::<c64>::from_fn(m.ncols(), m.nrows(), |i, j| {
            m[(j, i)].conj() * (self.out_weights[j] / self.in_weights[i])
        });
        OperatorMatrix {
            entries,
            in_descriptor: self.out_descriptor.clone(),
            out_descriptor: self.in_descriptor.clone(),
            in_weights: self.out_weights.clone(),
            out_weights: self.in_weights.clone(),
        }
    }
}

/// Columns are the operator applied to the indicator vectors of the domain.
pub fn assemble(op: &dyn LinearOp, budget: usize) -> Result<OperatorMatrix> {
    let (n, m) = (op.in_dim(), op.out_dim());
    if n.saturating_mul(m) > budget {
        return Err(Error::Budget {
            rows: m,
            cols: n,
            budget,
        });
    }
    let cols = crate::par::map(n, |j| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        op.apply(&e)
    });
    let mut entries = Mat::<c64>::zeros(m, n);
    for (j, c) in cols.into_iter().enumerate() {
        let c = c?;
        if c.len() != m {
            return Err(Error::mismatch("operator output length changed"));
        }
        for (i, v) in c.into_iter().enumerate() {
            entries[(i, j)] = to_c64(v);
        }
    }
    Ok(OperatorMatrix {
        entries,
        in_descriptor: op.in_descriptor(),
        out_descriptor: op.out_descriptor(),
        in_weights: op.in_weights(),
        out_weights: op.out_weights(),
    })
}

/// Truncated-SVD pseudoinverse discarding σ < rel_cutoff·σ_max (plain
/// Euclidean coefficients).
pub fn pinv(m: &OperatorMatrix, rel_cutoff: f64) -> Result<OperatorMatrix> {
    let t = Tsvd::new(&m.entries, rel_cutoff)?;
    if t.rank() == 0 {
        return Err(Error::Linalg("pseudoinverse of a rank-0 matrix".into()));
    }
    Ok(OperatorMatrix {
        entries: t.pinv(),
        in_descriptor: m.out_descriptor.clone(),
        out_descriptor: m.in_descriptor.clone(),
        in_weights: m.out_weights.clone(),
        out_weights: m.in_weights.clone(),
    })
}

/// Operators that can be assembled by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpName {
    /// lattice scalar → ∂₊SM data
    ForwardI0,
    /// lattice scalar h → I¹(⋆dh)
    ForwardIperp,
    /// holomorphic basis coefficients (ω₁ then ω₋₁) → ∂₊SM data
    ForwardIpm1,
    /// ∂₊SM data → lattice scalar
    AdjointI0,
    /// ∂₊SM data → one-form (x components then y components)
    AdjointI1,
    /// ∂₊SM data → ∂₊SM data
    OpP,
    /// geodesic basis members even under α_A → ∂₊SM data
    PPlus,
    /// geodesic basis members odd under α_A → ∂₊SM data
    PMinus,
}

impl std::str::FromStr for OpName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::invalid(format!("unknown operator '{s}'")))
    }
}

/// A named operator bound to a discretization and an attenuation.
pub struct NamedOp<'a> {
    pub name: OpName,
    pub setup: &'a Setup,
    pub beam: &'a Beam,
    /// ω bases for ForwardIpm1
    pub holo: Option<(&'a crate::hodge::HoloBasis, &'a crate::hodge::HoloBasis)>,
    /// basis for the P± blocks
    pub geo: Option<&'a crate::transport::GeodesicBasis>,
}

impl<'a> NamedOp<'a> {
    pub fn new(name: OpName, setup: &'a Setup, beam: &'a Beam) -> Self {
        Self {
            name,
            setup,
            beam,
            holo: None,
            geo: None,
        }
    }

    fn bd_weights(&self) -> Vec<f64> {
        let bd = &self.setup.bd;
        (0..bd.len()).map(|q| bd.weight(q / bd.n_alpha, q % bd.n_alpha)).collect()
    }

    fn lattice_weights(&self) -> Vec<f64> {
        self.setup.sm.vol.clone()
    }

    fn flat_weights(&self) -> Vec<f64> {
        let l = &self.setup.sm.lattice;
        let a = l.area.clone();
        a.iter().chain(a.iter()).cloned().collect()
    }

    fn geo_idx(&self) -> Result<(&crate::transport::GeodesicBasis, Vec<usize>)> {
        let g = self.geo.ok_or_else(|| Error::invalid("P± blocks need a geodesic basis"))?;
        let parity = if self.name == OpName::PPlus { 1 } else { -1 };
        Ok((g, g.indices(parity)))
    }

    fn boundary(&self, x: &[C64]) -> BoundaryField {
        let mut w = self.setup.bd.zeros();
        w.data.copy_from_slice(x);
        w
    }
}

impl LinearOp for NamedOp<'_> {
    fn in_dim(&self) -> usize {
        let n = self.setup.sm.n_nodes();
        match self.name {
            OpName::ForwardI0 | OpName::ForwardIperp => n,
            OpName::ForwardIpm1 => self.holo.map(|(p, m)| p.len() + m.len()).unwrap_or(0),
            OpName::AdjointI0 | OpName::AdjointI1 | OpName::OpP => self.setup.bd.len(),
            OpName::PPlus | OpName::PMinus => self.geo_idx().map(|g| g.1.len()).unwrap_or(0),
        }
    }

    fn out_dim(&self) -> usize {
        let n = self.setup.sm.n_nodes();
        match self.name {
            OpName::AdjointI0 => n,
            OpName::AdjointI1 => 2 * n,
            _ => self.setup.bd.len(),
        }
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.in_dim() {
            return Err(Error::mismatch(format!("{:?} expects {} inputs, got {}", self.name, self.in_dim(), x.len())));
        }
        let s = self.setup;
        let n = s.sm.n_nodes();
        let a = &self.beam.a;
        let zero = vec![C64::new(0.0, 0.0); n];
        let out = match self.name {
            OpName::ForwardI0 => forward_lattice_pair(s, a, &OneForm::zeros(n), x)?.data,
            OpName::ForwardIperp => forward_lattice_pair(s, a, &OneForm::star_d(&s.sm.lattice, x), &zero)?.data,
            OpName::ForwardIpm1 => {
                let (p, m) = self.holo.ok_or_else(|| Error::invalid("forward_Ipm1 needs holomorphic bases"))?;
                let (px, py) = p.one_form(&x[..p.len()]);
                let (mx, my) = m.one_form(&x[p.len()..]);
                forward_field(s, a, &Pair::one_form(px.plus(mx), py.plus(my)).modes(&s.metric))?.data
            }
            OpName::AdjointI0 => adjoint_i0(s, self.beam, &self.boundary(x))?,
            OpName::AdjointI1 => {
                let f = adjoint_i1(s, self.beam, &self.boundary(x))?;
                f.x.into_iter().chain(f.y).collect()
            }
            OpName::OpP => crate::transport::op_p(s, self.beam, &self.boundary(x))?.data,
            OpName::PPlus | OpName::PMinus => {
                let (g, idx) = self.geo_idx()?;
                let mut c = vec![C64::new(0.0, 0.0); g.len()];
                for (k, &j) in idx.iter().enumerate() {
                    c[j] = x[k];
                }
                crate::transport::op_p_invariant(s, self.beam, &g.field_full(s, &c))?.data
            }
        };
        Ok(out)
    }

    fn in_weights(&self) -> Vec<f64> {
        match self.name {
            OpName::ForwardI0 | OpName::ForwardIperp => self.lattice_weights(),
            OpName::ForwardIpm1 | OpName::PPlus | OpName::PMinus => vec![1.0; self.in_dim()],
            _ => self.bd_weights(),
        }
    }

    fn out_weights(&self) -> Vec<f64> {
        match self.name {
            OpName::AdjointI0 => self.lattice_weights(),
            OpName::AdjointI1 => self.flat_weights(),
            _ => self.bd_weights(),
        }
    }

    fn in_descriptor(&self) -> String {
        let s = self.setup;
        match self.name {
            OpName::ForwardI0 | OpName::ForwardIperp => s.sm.descriptor(),
            OpName::ForwardIpm1 => format!("holo:{}", self.in_dim()),
            OpName::PPlus | OpName::PMinus => format!("geodesic:{:?}:{}", self.name, self.in_dim()),
            _ => s.bd.descriptor(),
        }
    }

    fn out_descriptor(&self) -> String {
        let s = self.setup;
        match self.name {
            OpName::AdjointI0 => s.sm.descriptor(),
            OpName::AdjointI1 => format!("{}:oneform", s.sm.descriptor()),
            _ => s.bd.descriptor(),
        }
    }
}

impl OperatorMatrix {
    /// Writes `<base>.bin` (complex128, row-major) and `<base>.json`.
    pub fn save(&self, base: &std::path::Path) -> Result<()> {
        let data: Vec<C64> = (0..self.rows())
            .flat_map(|i| (0..self.cols()).map(move |j| (i, j)))
            .map(|(i, j)| from_c64(self.entries[(i, j)]))
            .collect();
        let meta = serde_json::json!({
            "in": self.in_descriptor,
            "out": self.out_descriptor,
            "in_weights": self.in_weights,
            "out_weights": self.out_weights,
        });
        crate::io::write_complex(base, &data, &[self.rows(), self.cols()], &meta.to_string())
    }

    pub fn load(base: &std::path::Path) -> Result<Self> {
        let (h, d) = crate::io::read_array(base)?;
        if h.shape.len() != 2 {
            return Err(Error::Format("operator matrix must be two-dimensional".into()));
        }
        let meta: serde_json::Value = serde_json::from_str(&h.grid)?;
        let (r, c) = (h.shape[0], h.shape[1]);
        let d = d.into_complex();
        let weights = |k: &str| -> Result<Vec<f64>> {
            serde_json::from_value(meta[k].clone()).map_err(|e| Error::Format(format!("{k}: {e}")))
        };
        let text = |k: &str| meta[k].as_str().unwrap_or_default().to_string();
        Ok(Self {
            entries: Mat::<c64>::from_fn(r, c, |i, j| to_c64(d[i * c + j])),
            in_descriptor: text("in"),
            out_descriptor: text("out"),
            in_weights: weights("in_weights")?,
            out_weights: weights("out_weights")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConformalMetric;
    use crate::transport::GridSpec;
    use std::sync::Arc;

    fn small() -> Arc<Setup> {
        let g = GridSpec {
            n_x: 12,
            n_theta: 16,
            n_beta: 16,
            n_alpha: 8,
            ..Default::default()
        };
        Setup::new(Arc::new(ConformalMetric::euclidean()), &g).unwrap()
    }

    struct Diag(Vec<f64>);

    impl LinearOp for Diag {
        fn in_dim(&self) -> usize {
            self.0.len()
        }
        fn out_dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
            Ok(x.iter().zip(&self.0).map(|(a, d)| a * d).collect())
        }
        fn in_weights(&self) -> Vec<f64> {
            vec![1.0; self.0.len()]
        }
        fn out_weights(&self) -> Vec<f64> {
            vec![2.0; self.0.len()]
        }
        fn in_descriptor(&self) -> String {
            "in".into()
        }
        fn out_descriptor(&self) -> String {
            "out".into()
        }
    }

    #[test]
    fn op_names_parse() {
        for (s, n) in [("forward_i0", OpName::ForwardI0), ("op_p", OpName::OpP), ("p_minus", OpName::PMinus)] {
            assert_eq!(s.parse::<OpName>().unwrap(), n);
        }
        assert!(matches!("forward".parse::<OpName>(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let d = Diag(vec![1.0; 10]);
        assert!(matches!(assemble(&d, 99), Err(Error::Budget { rows: 10, cols: 10, .. })));
        assert_eq!(assemble(&d, 100).unwrap().rows(), 10);
    }

    #[test]
    fn pinv_drops_small_values() {
        let m = assemble(&Diag(vec![1.0, 2.0, 1e-12]), 100).unwrap();
        let p = pinv(&m, 1e-6).unwrap();
        let y = p.apply(&[C64::new(1.0, 0.0); 3]).unwrap();
        assert!((y[0] - 1.0).norm() < 1e-14 && (y[1] - 0.5).norm() < 1e-14 && y[2].norm() < 1e-14);
        assert_eq!(p.in_weights, vec![2.0; 3]);
        assert!(pinv(&assemble(&Diag(vec![0.0; 2]), 100).unwrap(), 1e-6).is_err());
    }

    #[test]
    fn unattenuated_backprojection_of_one() {
        let s = small();
        let beam = Beam::new(&s, &Func::Zero).unwrap();
        let h = s.bd.field_from_fn(|_, _| C64::new(1.0, 0.0));
        let g = adjoint_i0(&s, &beam, &h).unwrap();
        assert!(g.iter().all(|v| (v - 2.0 * PI).norm() < 1e-10));
        let w = adjoint_i1(&s, &beam, &h).unwrap();
        assert!(w.x.iter().chain(&w.y).all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn assembled_matrix_matches_operator() {
        let s = small();
        let beam = Beam::new(&s, &Func::gaussian([0.1, 0.0], 0.4, C64::new(0.5, 0.2))).unwrap();
        let op = NamedOp::new(OpName::ForwardI0, &s, &beam);
        let m = assemble(&op, 1 << 20).unwrap();
        let f: Vec<C64> = (0..op.in_dim()).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let direct = op.apply(&f).unwrap();
        let via = m.apply(&f).unwrap();
        let e = direct.iter().zip(&via).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(e < 1e-12, "{e}");
        assert!(matches!(m.apply(&f[1..]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn weighted_adjoint_is_involutive() {
        let m = assemble(&Diag(vec![1.0, -3.0]), 100).unwrap();
        let a = m.weighted_adjoint();
        assert!((a.entries[(1, 1)].re + 6.0).abs() < 1e-15);
        let b = a.weighted_adjoint();
        assert!((&b.entries - &m.entries).norm_l2() < 1e-15);
        assert_eq!(b.in_descriptor, "in");
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = assemble(&Diag(vec![1.5, 0.25, -2.0]), 100).unwrap();
        let base = dir.path().join("m");
        m.save(&base).unwrap();
        let l = OperatorMatrix::load(&base).unwrap();
        assert_eq!(l.entries, m.entries);
        assert_eq!((l.in_descriptor.as_str(), l.out_weights.as_slice()), ("in", m.out_weights.as_slice()));
    }
}
