//! Invariant functions on ∂₊SM built from smooth functions on ∂SM evaluated
//! at both ends of each geodesic: w = G + G∘α with
//! G_{j,m}(β, θ) = e^{ijβ} e^{i(m−j)θ}, j ≥ 0. Every member is smooth on the
//! space of geodesics (so its ψ-extension is smooth on SM) and has a definite
//! parity (−1)^{m−j} under the antipodal scattering map.

use super::rays::{End, Setup};
use crate::phase_space::{BoundaryField, FullBoundaryField, SmField};
use crate::C64;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct GeodesicBasis {
    /// (j, m) per member
    pub terms: Vec<(u32, i32)>,
    jmax: u32,
    kmax: i32,
}

impl GeodesicBasis {
    /// All members with |m| + j ≤ degree.
    pub fn triangular(degree: usize) -> Self {
        let l = degree as i32;
        let mut terms = Vec::new();
        for j in 0..=l {
            for m in -(l - j)..=(l - j) {
                terms.push((j as u32, m));
            }
        }
        Self::from_terms(terms)
    }

    pub fn from_terms(terms: Vec<(u32, i32)>) -> Self {
        let jmax = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let kmax = terms
            .iter()
            .map(|&(j, m)| (m - j as i32).abs())
            .max()
            .unwrap_or(0);
        Self { terms, jmax, kmax }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// +1 for members in V₊ (even under α_A), −1 for V₋.
    pub fn parity(&self, idx: usize) -> i32 {
        let (j, m) = self.terms[idx];
        if (m - j as i32).rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }

    pub fn indices(&self, parity: i32) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parity(i) == parity).collect()
    }

    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self::from_terms(idx.iter().map(|&i| self.terms[i]).collect())
    }

    fn powers(&self, beta: f64, theta: f64) -> (Vec<C64>, Vec<C64>) {
        let eb = C64::new(beta.cos(), beta.sin());
        let et = C64::new(theta.cos(), theta.sin());
        let mut pb = Vec::with_capacity(self.jmax as usize + 1);
        let mut z = C64::new(1.0, 0.0);
        for _ in 0..=self.jmax {
            pb.push(z);
            z *= eb;
        }
        let km = self.kmax as usize;
        let mut pt = vec![C64::new(0.0, 0.0); 2 * km + 1];
        pt[km] = C64::new(1.0, 0.0);
        let etc = et.conj();
        for k in 1..=km {
            pt[km + k] = pt[km + k - 1] * et;
            pt[km - k] = pt[km - k + 1] * etc;
        }
        (pb, pt)
    }

    /// Adds G_i(β, θ) for all members into `out`.
    pub fn add_g(&self, beta: f64, theta: f64, scale: C64, out: &mut [C64]) {
        let (pb, pt) = self.powers(beta, theta);
        let km = self.kmax;
        for (o, &(j, m)) in out.iter_mut().zip(&self.terms) {
            *o += scale * pb[j as usize] * pt[(m - j as i32 + km) as usize];
        }
    }

    /// w_i for the geodesic with the given two ends.
    pub fn eval_ends(&self, a: &End, b: &End, out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let one = C64::new(1.0, 0.0);
        self.add_g(a.beta, a.beta + PI + a.alpha, one, out);
        self.add_g(b.beta, b.beta + PI + b.alpha, one, out);
    }

    /// Σ c_i w_i at the ends a, b.
    pub fn combine_ends(&self, c: &[C64], a: &End, b: &End) -> C64 {
        let mut buf = vec![C64::new(0.0, 0.0); self.len()];
        self.eval_ends(a, b, &mut buf);
        buf.iter().zip(c).map(|(x, y)| x * y).sum()
    }

    /// Members sampled on the ∂₊SM grid: column-major blocks [member][node].
    pub fn on_plus(&self, setup: &Setup) -> Vec<Vec<C64>> {
        let bd = &setup.bd;
        let na = bd.n_alpha;
        let rows = crate::par::map(bd.len(), |q| {
            let (i, j) = (q / na, q % na);
            let me = End {
                beta: bd.beta(i),
                alpha: bd.alphas[j],
                tau: 0.0,
            };
            let mut buf = vec![C64::new(0.0, 0.0); self.len()];
            self.eval_ends(&me, &setup.chord_plus(i, j), &mut buf);
            buf
        });
        transpose(rows, self.len())
    }

    /// Σ c_i w_i on the ∂₊SM grid.
    pub fn field_plus(&self, setup: &Setup, c: &[C64]) -> BoundaryField {
        let bd = &setup.bd;
        let na = bd.n_alpha;
        let data = crate::par::map(bd.len(), |q| {
            let (i, j) = (q / na, q % na);
            let me = End {
                beta: bd.beta(i),
                alpha: bd.alphas[j],
                tau: 0.0,
            };
            self.combine_ends(c, &me, &setup.chord_plus(i, j))
        });
        BoundaryField {
            n_beta: bd.n_beta,
            n_alpha: na,
            data,
        }
    }

    /// Σ c_i w_i on all of ∂SM (unattenuated invariant values).
    pub fn field_full(&self, setup: &Setup, c: &[C64]) -> FullBoundaryField {
        let bd = &setup.bd;
        let nf = bd.n_fiber();
        let data = crate::par::map(bd.n_beta * nf, |q| {
            let (i, j) = (q / nf, q % nf);
            let me = End {
                beta: bd.beta(i),
                alpha: bd.full_alpha(j),
                tau: 0.0,
            };
            self.combine_ends(c, &me, &setup.chord[q])
        });
        FullBoundaryField {
            n_beta: bd.n_beta,
            n_fiber: nf,
            data,
        }
    }

    /// ψ-extension of Σ c_i w_i to the SM grid (exact, no interpolation).
    pub fn field_sm(&self, setup: &Setup, c: &[C64]) -> SmField {
        let data = crate::par::map(setup.foot.len(), |q| {
            self.combine_ends(c, &setup.foot[q], &setup.exit[q])
        });
        SmField {
            n_nodes: setup.sm.n_nodes(),
            n_theta: setup.sm.n_theta,
            data,
        }
    }

    /// Fiber modes lo..=hi at SM node p of every member's ψ-extension:
    /// returns [mode][member].
    pub fn node_modes(&self, setup: &Setup, p: usize, lo: i32, hi: i32) -> Vec<Vec<C64>> {
        let nt = setup.sm.n_theta;
        let nb = self.len();
        let mut samples = vec![vec![C64::new(0.0, 0.0); nb]; nt];
        for (l, row) in samples.iter_mut().enumerate() {
            let q = p * nt + l;
            self.eval_ends(&setup.foot[q], &setup.exit[q], row);
        }
        (lo..=hi)
            .map(|k| {
                let mut acc = vec![C64::new(0.0, 0.0); nb];
                for (l, row) in samples.iter().enumerate() {
                    let ph = C64::new(0.0, -(k as f64) * setup.sm.theta(l)).exp() / nt as f64;
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += v * ph;
                    }
                }
                acc
            })
            .collect()
    }
}

fn transpose(rows: Vec<Vec<C64>>, ncols: usize) -> Vec<Vec<C64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); ncols];
    for r in rows {
        for (c, v) in r.into_iter().enumerate() {
            cols[c].push(v);
        }
    }
    cols
}
