//! Linear-algebra glue over faer: sparse real factorizations for the
//! elliptic solves and truncated SVD for the dense operator inverses.

use crate::error::{Error, Result};
use crate::C64;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};

/// Factorized sparse real square matrix, reusable for many right-hand sides.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseLu({}x{})", self.n, self.n)
    }
}

impl SparseLu {
    pub fn new(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let trip: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Linalg(format!("sparse assembly: {e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::Linalg(format!("sparse LU: {e:?}")))?;
        Ok(Self { n, lu })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve_real(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        (0..self.n).map(|i| b[(i, 0)]).collect()
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let mut b = Mat::<f64>::from_fn(self.n, 2, |i, j| if j == 0 { rhs[i].re } else { rhs[i].im });
        self.lu.solve_in_place(b.as_mut());
        (0..self.n).map(|i| C64::new(b[(i, 0)], b[(i, 1)])).collect()
    }
}

/// Solves a small dense real system by partial-pivot LU.
pub fn dense_solve_real(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    a.partial_piv_lu().solve(b)
}

pub fn to_c64(z: C64) -> c64 {
    c64::new(z.re, z.im)
}

pub fn from_c64(z: c64) -> C64 {
    C64::new(z.re, z.im)
}

/// Truncated SVD A ≈ U Σ Vᴴ keeping singular values above
/// `rel_cutoff · σ_max`.
#[derive(Clone, Debug)]
pub struct Tsvd {
    pub u: Mat<c64>,
    pub s: Vec<f64>,
    pub v: Mat<c64>,
    /// full singular spectrum before truncation
    pub spectrum: Vec<f64>,
}

impl Tsvd {
    pub fn new(a: &Mat<c64>, rel_cutoff: f64) -> Result<Self> {
        if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
            return Err(Error::invalid(format!("svd cutoff must lie in (0,1), got {rel_cutoff}")));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Linalg("empty matrix".into()));
        }
        let svd = a
            .thin_svd()
            .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
        let k = a.nrows().min(a.ncols());
        let spectrum: Vec<f64> = (0..k).map(|i| svd.S()[i].re).collect();
        let smax = spectrum.first().copied().unwrap_or(0.0);
        if !(smax > 0.0) {
            return Err(Error::Linalg("rank-0 matrix".into()));
        }
        let rank = spectrum.iter().take_while(|&&s| s > rel_cutoff * smax).count();
        let u = svd.U().subcols(0, rank).to_owned();
        let v = svd.V().subcols(0, rank).to_owned();
        Ok(Self {
            u,
            s: spectrum[..rank].to_vec(),
            v,
            spectrum,
        })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// x = V Σ⁻¹ Uᴴ y
    pub fn solve(&self, y: &[C64]) -> Vec<C64> {
        let m = self.u.nrows();
        let yc = Mat::<c64>::from_fn(m, 1, |i, _| to_c64(y[i]));
        let mut t = self.u.adjoint() * &yc;
        for (i, s) in self.s.iter().enumerate() {
            t[(i, 0)] = t[(i, 0)] / *s;
        }
        let x = &self.v * &t;
        (0..x.nrows()).map(|i| from_c64(x[(i, 0)])).collect()
    }

    /// Projection of y onto the retained left singular space.
    pub fn project_range(&self, y: &[C64]) -> Vec<C64> {
        let m = self.u.nrows();
        let yc = Mat::<c64>::from_fn(m, 1, |i, _| to_c64(y[i]));
        let t = self.u.adjoint() * &yc;
        let p = &self.u * &t;
        (0..m).map(|i| from_c64(p[(i, 0)])).collect()
    }

    /// The pseudoinverse as a dense matrix.
    pub fn pinv(&self) -> Mat<c64> {
        let mut vs = self.v.clone();
        for j in 0..self.rank() {
            let inv = 1.0 / self.s[j];
            for i in 0..vs.nrows() {
                vs[(i, j)] = vs[(i, j)] * inv;
            }
        }
        &vs * self.u.adjoint()
    }
}

/// Solves the Hermitian positive semidefinite system G x = b by eigenvalue
/// truncation below `rel_cutoff · λ_max`.
pub fn hermitian_solve(g: &Mat<c64>, b: &Mat<c64>, rel_cutoff: f64) -> Result<Mat<c64>> {
    let eig = g
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigen solver failed: {e:?}")))?;
    let n = g.nrows();
    let vals: Vec<f64> = (0..n).map(|i| eig.S()[i].re).collect();
    let vmax = vals.iter().cloned().fold(0.0, f64::max);
    if !(vmax > 0.0) {
        return Err(Error::Linalg("rank-0 normal matrix".into()));
    }
    let u = eig.U();
    let mut t = u.adjoint() * b;
    for i in 0..n {
        let d = if vals[i] > rel_cutoff * vmax { 1.0 / vals[i] } else { 0.0 };
        for j in 0..t.ncols() {
            t[(i, j)] = t[(i, j)] * d;
        }
    }
    Ok(u * &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_lu_solves_tridiagonal() {
        let n = 50;
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0));
            if i > 0 {
                e.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                e.push((i, i + 1, -1.0));
            }
        }
        let lu = SparseLu::new(n, &e).unwrap();
        let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64, -(i as f64).sin())).collect();
        let mut b = vec![C64::new(0.0, 0.0); n];
        for &(r, c, v) in &e {
            b[r] += v * x[c];
        }
        let y = lu.solve(&b);
        for i in 0..n {
            assert!((y[i] - x[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn tsvd_cutoff_semantics() {
        let a = Mat::<c64>::from_fn(2, 2, |i, j| {
            if i != j {
                c64::new(0.0, 0.0)
            } else if i == 0 {
                c64::new(1.0, 0.0)
            } else {
                c64::new(1e-12, 0.0)
            }
        });
        let t = Tsvd::new(&a, 1e-6).unwrap();
        assert_eq!(t.rank(), 1);
        let p = t.pinv();
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(p[(1, 1)].norm() < 1e-14);
    }
}
