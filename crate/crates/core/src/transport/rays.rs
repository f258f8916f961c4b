//! Geometry tables: for every SM node-angle its backward footpoint and
//! forward exit, and for every ∂SM node the other end of its chord.

use crate::error::Result;
use crate::func::Func;
use crate::phase_space::{BoundaryGrid, Lattice, SmGrid};
use crate::phase_space::AlphaNodes;
use crate::surface::{walk, wrap_pi, BoundaryPoint, ConformalMetric, Phase};
use crate::C64;
use std::f64::consts::PI;
use std::sync::Arc;

/// End of a geodesic segment on ∂M: boundary angle and the fiber coordinate
/// α = θ − β − π (inward points have α ∈ (−π/2, π/2), outward ones
/// α ∈ (π/2, 3π/2)).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct End {
    pub beta: f64,
    pub alpha: f64,
    pub tau: f64,
}

fn end_of(p: &Phase, tau: f64, inward: bool) -> End {
    let beta = p.y.atan2(p.x).rem_euclid(2.0 * PI);
    let mut a = wrap_pi(p.theta - beta - PI);
    if inward {
        a = a.clamp(-PI / 2.0, PI / 2.0);
    } else {
        // outward: θ − β ∈ [−π/2, π/2]
        let o = wrap_pi(p.theta - beta).clamp(-PI / 2.0, PI / 2.0);
        a = o + PI;
    }
    End { beta, alpha: a, tau }
}

/// Discretization shared by all operators: metric, SM grid, fan-beam grid,
/// ray step and the geometry tables.
pub struct Setup {
    pub metric: Arc<ConformalMetric>,
    pub sm: Arc<SmGrid>,
    pub bd: Arc<BoundaryGrid>,
    pub step: f64,
    /// per node-angle: backward footpoint on ∂₊SM
    pub foot: Vec<End>,
    /// per node-angle: forward exit on ∂₋SM
    pub exit: Vec<End>,
    /// per full ∂SM node: the other end of its chord
    pub chord: Vec<End>,
}

impl std::fmt::Debug for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Setup({:?}, {:?}, step {})", self.sm, self.bd, self.step)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_theta: usize,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub alpha_nodes: AlphaNodes,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_x: 64,
            n_theta: 64,
            n_beta: 64,
            n_alpha: 48,
            alpha_nodes: AlphaNodes::Midpoint,
            step: 1e-2,
        }
    }
}

impl Setup {
    pub fn new(metric: Arc<ConformalMetric>, g: &GridSpec) -> Result<Arc<Self>> {
        let lattice = Lattice::new(g.n_x)?;
        let sm = SmGrid::new(lattice, metric.clone(), g.n_theta)?;
        let bd = BoundaryGrid::new(metric.clone(), g.n_beta, g.n_alpha, g.alpha_nodes)?;
        Self::from_grids(sm, bd, g.step)
    }

    pub fn from_grids(sm: Arc<SmGrid>, bd: Arc<BoundaryGrid>, step: f64) -> Result<Arc<Self>> {
        let metric = sm.metric.clone();
        let nt = sm.n_theta;
        let n = sm.n_nodes() * nt;
        let pairs = crate::par::map(n, |q| -> Result<(End, End)> {
            let (x, y) = sm.lattice.node_xy(q / nt);
            let p = Phase::new(x, y, sm.theta(q % nt));
            let b = walk(&metric, &p, step, true, |_, _| {})?;
            let f = walk(&metric, &p, step, false, |_, _| {})?;
            Ok((end_of(&b.end, b.tau, true), end_of(&f.end, f.tau, false)))
        });
        let mut foot = Vec::with_capacity(n);
        let mut exit = Vec::with_capacity(n);
        for r in pairs {
            let (a, b) = r?;
            foot.push(a);
            exit.push(b);
        }
        let chord = if bd.kind == AlphaNodes::Midpoint {
            let nf = bd.n_fiber();
            let ends = crate::par::map(bd.n_beta * nf, |q| -> Result<End> {
                let bp = bd.full_point(q / nf, q % nf);
                let e = walk(&metric, &bp.to_phase(), step, !bp.inward, |_, _| {})?;
                Ok(end_of(&e.end, e.tau, !bp.inward))
            });
            ends.into_iter().collect::<Result<Vec<_>>>()?
        } else {
            let na = bd.n_alpha;
            let ends = crate::par::map(bd.len(), |q| -> Result<End> {
                let bp = bd.point(q / na, q % na);
                let e = walk(&metric, &bp.to_phase(), step, false, |_, _| {})?;
                Ok(end_of(&e.end, e.tau, false))
            });
            ends.into_iter().collect::<Result<Vec<_>>>()?
        };
        Ok(Arc::new(Self {
            metric,
            sm,
            bd,
            step,
            foot,
            exit,
            chord,
        }))
    }

    pub fn descriptor(&self) -> String {
        format!("{}|{}|step:{:?}", self.sm.descriptor(), self.bd.descriptor(), self.step)
    }

    /// Chord end of the ∂₊SM grid node (i, j).
    pub fn chord_plus(&self, i: usize, j: usize) -> End {
        if self.bd.kind == AlphaNodes::Midpoint {
            self.chord[i * self.bd.n_fiber() + j]
        } else {
            self.chord[i * self.bd.n_alpha + j]
        }
    }

    /// Line integrals of the given fields along every SM node-angle ray:
    /// (∫₀^{τ₊} f, ∫_{−τ₋}^0 f) per field.
    pub fn sm_integrals(&self, fs: &[&Func]) -> Result<Vec<(Vec<C64>, Vec<C64>)>> {
        let nt = self.sm.n_theta;
        let n = self.sm.n_nodes() * nt;
        let k = fs.len();
        let rows = crate::par::map(n, |q| -> Result<Vec<C64>> {
            let (x, y) = self.sm.lattice.node_xy(q / nt);
            let p = Phase::new(x, y, self.sm.theta(q % nt));
            let mut out = vec![C64::new(0.0, 0.0); 2 * k];
            for (dir, backward) in [(0usize, false), (1, true)] {
                let mut acc = vec![C64::new(0.0, 0.0); k];
                let mut prev: Option<(f64, Vec<C64>)> = None;
                walk(&self.metric, &p, self.step, backward, |t, s| {
                    let vals: Vec<C64> = fs.iter().map(|f| f.value(s.x, s.y)).collect();
                    if let Some((tp, vp)) = &prev {
                        let dt = t - tp;
                        for i in 0..k {
                            acc[i] += (vals[i] + vp[i]) * (0.5 * dt);
                        }
                    }
                    prev = Some((t, vals));
                })?;
                for i in 0..k {
                    out[2 * i + dir] = acc[i];
                }
            }
            Ok(out)
        });
        let mut res: Vec<(Vec<C64>, Vec<C64>)> = (0..k)
            .map(|_| (Vec::with_capacity(n), Vec::with_capacity(n)))
            .collect();
        for r in rows {
            let r = r?;
            for i in 0..k {
                res[i].0.push(r[2 * i]);
                res[i].1.push(r[2 * i + 1]);
            }
        }
        Ok(res)
    }

    /// Integral of each field over the full chord through every ∂SM node
    /// (midpoint grids) or ∂₊SM node.
    pub fn chord_integrals(&self, fs: &[&Func]) -> Result<Vec<Vec<C64>>> {
        let bd = &self.bd;
        let (n, nf) = if bd.kind == AlphaNodes::Midpoint {
            (bd.n_beta * bd.n_fiber(), bd.n_fiber())
        } else {
            (bd.len(), bd.n_alpha)
        };
        let k = fs.len();
        let rows = crate::par::map(n, |q| -> Result<Vec<C64>> {
            let bp = if bd.kind == AlphaNodes::Midpoint {
                bd.full_point(q / nf, q % nf)
            } else {
                bd.point(q / nf, q % nf)
            };
            let mut acc = vec![C64::new(0.0, 0.0); k];
            let mut prev: Option<(f64, Vec<C64>)> = None;
            walk(&self.metric, &bp.to_phase(), self.step, !bp.inward, |t, s| {
                let vals: Vec<C64> = fs.iter().map(|f| f.value(s.x, s.y)).collect();
                if let Some((tp, vp)) = &prev {
                    for i in 0..k {
                        acc[i] += (vals[i] + vp[i]) * (0.5 * (t - tp));
                    }
                }
                prev = Some((t, vals));
            })?;
            Ok(acc)
        });
        let mut res = vec![Vec::with_capacity(n); k];
        for r in rows {
            let r = r?;
            for i in 0..k {
                res[i].push(r[i]);
            }
        }
        Ok(res)
    }
}

/// Attenuation-dependent beam integrals on both grids.
#[derive(Clone, Debug)]
pub struct Beam {
    pub a: Func,
    /// ∫₀^{τ₊} a along each SM node-angle
    pub fwd: Vec<C64>,
    /// ∫_{−τ₋}^0 a along each SM node-angle
    pub back: Vec<C64>,
    /// ∫ a over the chord of each ∂SM (or ∂₊SM) node
    pub chord: Vec<C64>,
}

impl Beam {
    pub fn new(setup: &Setup, a: &Func) -> Result<Self> {
        let n_sm = setup.sm.n_nodes() * setup.sm.n_theta;
        let n_bd = setup.chord.len();
        if a.is_zero() {
            return Ok(Self {
                a: Func::Zero,
                fwd: vec![C64::new(0.0, 0.0); n_sm],
                back: vec![C64::new(0.0, 0.0); n_sm],
                chord: vec![C64::new(0.0, 0.0); n_bd],
            });
        }
        let mut s = setup.sm_integrals(&[a])?;
        let (fwd, back) = s.pop().unwrap();
        let chord = setup.chord_integrals(&[a])?.pop().unwrap();
        Ok(Self {
            a: a.clone(),
            fwd,
            back,
            chord,
        })
    }

    /// The beam of −ā from this one (integrals are linear in a).
    pub fn neg_conj(&self) -> Self {
        let f = |v: &Vec<C64>| v.iter().map(|z| -z.conj()).collect::<Vec<_>>();
        Self {
            a: self.a.clone().conj().scale(-1.0),
            fwd: f(&self.fwd),
            back: f(&self.back),
            chord: f(&self.chord),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero()
    }
}

pub fn boundary_point_of(end: &End) -> BoundaryPoint {
    if end.alpha.abs() <= PI / 2.0 {
        BoundaryPoint::inward(end.beta, end.alpha)
    } else {
        BoundaryPoint::outward(end.beta, end.alpha - PI)
    }
}
