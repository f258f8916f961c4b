use super::lambda::{Jet, Lambda};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Number of boundary samples used for the convexity check.
pub const CONVEXITY_SAMPLES: usize = 720;

/// The metric e^{2λ}(dx² + dy²) on the closed unit disk.
#[derive(Clone, Debug)]
pub struct ConformalMetric {
    lambda: Lambda,
    euclidean: bool,
}

impl ConformalMetric {
    pub fn euclidean() -> Self {
        Self {
            lambda: Lambda::Zero,
            euclidean: true,
        }
    }

    /// Builds the metric and rejects it unless λ is finite on the disk and
    /// the boundary circle is strictly convex.
    pub fn new(lambda: Lambda) -> Result<Self> {
        let euclidean = lambda.is_zero();
        let m = Self { lambda, euclidean };
        for j in 0..=40 {
            for i in 0..=40 {
                let x = -1.0 + 0.05 * i as f64;
                let y = -1.0 + 0.05 * j as f64;
                if x * x + y * y > 1.0 {
                    continue;
                }
                let jt = m.jet(x, y);
                if ![jt.v, jt.x, jt.y, jt.xx, jt.xy, jt.yy]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(Error::NotSimple(format!(
                        "lambda or its derivatives are not finite at ({x}, {y})"
                    )));
                }
            }
        }
        let kmin = m.min_boundary_curvature();
        if kmin <= 0.0 {
            return Err(Error::NotSimple(format!(
                "boundary is not strictly convex (min geodesic curvature {kmin:.3e})"
            )));
        }
        Ok(m)
    }

    pub fn lambda_field(&self) -> &Lambda {
        &self.lambda
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    #[inline]
    pub fn jet(&self, x: f64, y: f64) -> Jet {
        if self.euclidean {
            Jet::default()
        } else {
            self.lambda.jet(x, y)
        }
    }

    #[inline]
    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        if self.euclidean {
            0.0
        } else {
            self.lambda.jet(x, y).v
        }
    }

    #[inline]
    pub fn grad_lambda(&self, x: f64, y: f64) -> (f64, f64) {
        if self.euclidean {
            (0.0, 0.0)
        } else {
            let j = self.lambda.jet(x, y);
            (j.x, j.y)
        }
    }

    /// Gaussian curvature κ = −e^{−2λ} Δλ.
    pub fn curvature(&self, x: f64, y: f64) -> f64 {
        let j = self.jet(x, y);
        -(-2.0 * j.v).exp() * j.laplacian()
    }

    /// Geodesic curvature of the unit circle at boundary angle β.
    pub fn boundary_curvature(&self, beta: f64) -> f64 {
        let (c, s) = (beta.cos(), beta.sin());
        let j = self.jet(c, s);
        (-j.v).exp() * (1.0 + j.x * c + j.y * s)
    }

    pub fn min_boundary_curvature(&self) -> f64 {
        (0..CONVEXITY_SAMPLES)
            .map(|i| self.boundary_curvature(2.0 * PI * i as f64 / CONVEXITY_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Stable identifier used for cache keys and report headers.
    pub fn descriptor(&self) -> String {
        self.lambda.descriptor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_circle_has_unit_curvature() {
        let m = ConformalMetric::euclidean();
        assert!((m.min_boundary_curvature() - 1.0).abs() < 1e-15);
        assert_eq!(m.curvature(0.3, 0.2), 0.0);
    }

    #[test]
    fn quadratic_metric_curvature() {
        // λ = c r²: Δλ = 4c, so κ = −4c e^{−2c r²}
        let c = 0.1;
        let m = ConformalMetric::new(Lambda::Quadratic { coeff: c }).unwrap();
        let k = m.curvature(0.3, 0.4);
        assert!((k + 4.0 * c * (-2.0 * c * 0.25f64).exp()).abs() < 1e-14);
        // boundary: e^{−c}(1 + 2c)
        assert!((m.boundary_curvature(1.0) - (-c).exp() * (1.0 + 2.0 * c)).abs() < 1e-14);
    }

    #[test]
    fn concave_boundary_is_rejected() {
        let r = ConformalMetric::new(Lambda::Quadratic { coeff: -0.6 });
        assert!(matches!(r, Err(Error::NotSimple(_))));
    }
}
