use super::metric::ConformalMetric;
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// A point of the unit circle bundle: position and the Euclidean-frame
/// direction angle of the unit tangent vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Phase {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn r2(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn reversed(&self) -> Self {
        Self {
            theta: self.theta + PI,
            ..*self
        }
    }
}

/// Fan-beam boundary point. For inward points α is measured from the inward
/// normal, for outward points from the outward normal; positive is
/// counterclockwise in both cases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub beta: f64,
    pub alpha: f64,
    pub inward: bool,
}

pub fn wrap_2pi(t: f64) -> f64 {
    let r = t.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Wraps to (−π, π].
pub fn wrap_pi(t: f64) -> f64 {
    let r = wrap_2pi(t + PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

impl BoundaryPoint {
    pub fn inward(beta: f64, alpha: f64) -> Self {
        Self {
            beta,
            alpha,
            inward: true,
        }
    }

    pub fn outward(beta: f64, alpha: f64) -> Self {
        Self {
            beta,
            alpha,
            inward: false,
        }
    }

    pub fn theta(&self) -> f64 {
        if self.inward {
            self.beta + PI + self.alpha
        } else {
            self.beta + self.alpha
        }
    }

    pub fn to_phase(&self) -> Phase {
        Phase::new(self.beta.cos(), self.beta.sin(), self.theta())
    }

    /// Classifies a phase point lying on the unit circle.
    pub fn from_phase(p: &Phase) -> Self {
        let beta = wrap_2pi(p.y.atan2(p.x));
        let phi = wrap_pi(p.theta - beta);
        if phi.abs() >= PI / 2.0 {
            Self::inward(beta, wrap_pi(p.theta - beta - PI))
        } else {
            Self::outward(beta, phi)
        }
    }
}

#[inline]
pub(crate) fn rhs(m: &ConformalMetric, s: &Phase) -> [f64; 3] {
    let (c, sn) = (s.theta.cos(), s.theta.sin());
    if m.is_euclidean() {
        return [c, sn, 0.0];
    }
    let j = m.jet(s.x, s.y);
    let e = (-j.v).exp();
    [e * c, e * sn, e * (-j.x * sn + j.y * c)]
}

/// The geodesic vector field X at a phase point, in (x, y, θ) components.
pub fn flow_derivative(m: &ConformalMetric, s: &Phase) -> Result<[f64; 3]> {
    if s.r2() > 1.0 + 1e-9 || !s.r2().is_finite() {
        return Err(Error::Domain { x: s.x, y: s.y });
    }
    Ok(rhs(m, s))
}

#[inline]
pub(crate) fn rk4(m: &ConformalMetric, s: &Phase, h: f64) -> Phase {
    let add = |s: &Phase, k: &[f64; 3], f: f64| Phase::new(s.x + f * k[0], s.y + f * k[1], s.theta + f * k[2]);
    let k1 = rhs(m, s);
    let k2 = rhs(m, &add(s, &k1, h / 2.0));
    let k3 = rhs(m, &add(s, &k2, h / 2.0));
    let k4 = rhs(m, &add(s, &k3, h));
    Phase::new(
        s.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s.y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s.theta + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )
}

/// Path length budget in units of the disk diameter before declaring trapping.
const LENGTH_BUDGET: f64 = 60.0;

/// Result of following a geodesic to the boundary.
#[derive(Clone, Copy, Debug)]
pub struct Exit {
    pub tau: f64,
    pub end: Phase,
}

/// Follows the geodesic from `start` (forward, or backward when `backward`)
/// until it leaves the disk. `visit(t, state)` is called at t = 0, at every
/// multiple of `step` below the exit time, and at the exit time itself. The
/// states passed always carry the direction of motion of the forward flow.
pub fn walk<F: FnMut(f64, &Phase)>(
    m: &ConformalMetric,
    start: &Phase,
    step: f64,
    backward: bool,
    mut visit: F,
) -> Result<Exit> {
    if !(step > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if start.r2() > 1.0 + 1e-9 {
        return Err(Error::Domain {
            x: start.x,
            y: start.y,
        });
    }
    let h = if backward { -step } else { step };
    if m.is_euclidean() {
        let (c, s) = (start.theta.cos(), start.theta.sin());
        let (dx, dy) = if backward { (-c, -s) } else { (c, s) };
        let pd = start.x * dx + start.y * dy;
        let disc = (pd * pd - start.r2() + 1.0).max(0.0);
        let tau = (-pd + disc.sqrt()).max(0.0);
        let mut k = 0usize;
        loop {
            let t = k as f64 * step;
            if t >= tau {
                break;
            }
            visit(t, &Phase::new(start.x + t * dx, start.y + t * dy, start.theta));
            k += 1;
        }
        let end = Phase::new(start.x + tau * dx, start.y + tau * dy, start.theta);
        visit(tau, &end);
        return Ok(Exit { tau, end });
    }
    let max_steps = (LENGTH_BUDGET / step).ceil() as usize;
    let mut s = *start;
    let mut t = 0.0;
    visit(0.0, &s);
    for _ in 0..max_steps {
        let next = rk4(m, &s, h);
        if next.r2() <= 1.0 {
            s = next;
            t += step;
            visit(t, &s);
            continue;
        }
        let delta = exit_fraction(m, &s, h, t == 0.0);
        let end = rk4(m, &s, delta * h);
        let tau = t + delta * step;
        visit(tau, &end);
        return Ok(Exit { tau, end });
    }
    Err(Error::Trapping { steps: max_steps })
}

/// Fraction δ ∈ (0, 1] of the step `h` from `s` at which the orbit crosses the
/// unit circle outward.
fn exit_fraction(m: &ConformalMetric, s: &Phase, h: f64, at_start: bool) -> f64 {
    let f = |d: f64| rk4(m, s, d * h).r2() - 1.0;
    let mut lo = 0.0;
    if at_start && s.r2() > 1.0 - 1e-13 {
        // starting on the circle: locate an interior point first
        let mut found = false;
        for k in (1..64).rev() {
            let d = k as f64 / 64.0;
            if f(d) < 0.0 {
                lo = d;
                found = true;
                break;
            }
        }
        if !found {
            let mut d = 1.0 / 64.0;
            while d > 1e-12 {
                d *= 0.5;
                if f(d) < 0.0 {
                    lo = d;
                    found = true;
                    break;
                }
            }
            if !found {
                return 0.0;
            }
        }
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sampled geodesic from an inward boundary point to its exit.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub samples: Vec<Phase>,
    pub tau: f64,
}

pub fn trace_geodesic(m: &ConformalMetric, entry: &BoundaryPoint, step: f64) -> Result<GeodesicPath> {
    if !entry.inward {
        return Err(Error::invalid("trace_geodesic expects an inward boundary point"));
    }
    let mut samples = Vec::new();
    let exit = walk(m, &entry.to_phase(), step, false, |_, p| samples.push(*p))?;
    Ok(GeodesicPath {
        samples,
        tau: exit.tau,
    })
}

/// Exit time τ of the geodesic through `p` (forward flow).
pub fn exit_time(m: &ConformalMetric, p: &Phase, step: f64) -> Result<f64> {
    Ok(walk(m, p, step, false, |_, _| {})?.tau)
}

/// Scattering relation: inward points map to their exit point, outward
/// points to their entry point, so the map is an involution.
pub fn scattering(m: &ConformalMetric, bp: &BoundaryPoint, step: f64) -> Result<BoundaryPoint> {
    let exit = walk(m, &bp.to_phase(), step, !bp.inward, |_, _| {})?;
    let mut out = BoundaryPoint::from_phase(&exit.end);
    // the endpoint has the opposite orientation by construction; guard the
    // classification against round-off at tangency
    if out.inward == bp.inward {
        out.inward = !bp.inward;
        let phi = wrap_pi(exit.end.theta - out.beta);
        out.alpha = if out.inward { wrap_pi(phi - PI) } else { phi };
    }
    Ok(out)
}

/// Santaló weight μ = ⟨v, ν⟩ = cos α.
pub fn santalo_weight(bp: &BoundaryPoint) -> f64 {
    bp.alpha.cos()
}

/// Jacobi field along the geodesic from `entry`: returns the minimum over the
/// interior samples of J(t)/t, which stays positive when there are no
/// conjugate points.
pub fn jacobi_witness(m: &ConformalMetric, entry: &BoundaryPoint, step: f64) -> Result<f64> {
    let exit = walk(m, &entry.to_phase(), step, false, |_, _| {})?;
    let tau = exit.tau;
    let n = (tau / step).ceil().max(1.0) as usize;
    let h = tau / n as f64;
    let f = |s: &[f64; 5]| -> [f64; 5] {
        let p = Phase::new(s[0], s[1], s[2]);
        let r = rhs(m, &p);
        let k = m.curvature(s[0], s[1]);
        [r[0], r[1], r[2], s[4], -k * s[3]]
    };
    let p0 = entry.to_phase();
    let mut s = [p0.x, p0.y, p0.theta, 0.0, 1.0];
    let mut min_ratio = f64::INFINITY;
    for i in 0..n {
        let k1 = f(&s);
        let a = |k: &[f64; 5], c: f64| std::array::from_fn::<f64, 5, _>(|j| s[j] + c * k[j]);
        let k2 = f(&a(&k1, h / 2.0));
        let k3 = f(&a(&k2, h / 2.0));
        let k4 = f(&a(&k3, h));
        for j in 0..5 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let t = (i + 1) as f64 * h;
        min_ratio = min_ratio.min(s[3] / t);
    }
    Ok(min_ratio)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SimplicityReport {
    pub min_boundary_curvature: f64,
    pub min_jacobi_ratio: f64,
    pub rays: usize,
    pub passed: bool,
}

/// Spot-checks convexity and absence of conjugate points on a boundary fan.
pub fn check_simplicity(m: &ConformalMetric, n_beta: usize, n_alpha: usize, step: f64) -> Result<SimplicityReport> {
    let rays: Vec<BoundaryPoint> = (0..n_beta)
        .flat_map(|i| {
            (0..n_alpha).map(move |j| {
                BoundaryPoint::inward(
                    2.0 * PI * i as f64 / n_beta as f64,
                    -PI / 2.0 + (j as f64 + 0.5) * PI / n_alpha as f64,
                )
            })
        })
        .collect();
    let ratios = crate::par::map(rays.len(), |k| jacobi_witness(m, &rays[k], step));
    let mut min_ratio = f64::INFINITY;
    for r in ratios {
        min_ratio = min_ratio.min(r?);
    }
    let kmin = m.min_boundary_curvature();
    Ok(SimplicityReport {
        min_boundary_curvature: kmin,
        min_jacobi_ratio: min_ratio,
        rays: rays.len(),
        passed: kmin > 0.0 && min_ratio > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::lambda::Lambda;

    #[test]
    fn euclidean_chords() {
        let m = ConformalMetric::euclidean();
        let p = trace_geodesic(&m, &BoundaryPoint::inward(0.0, 0.0), 1e-2).unwrap();
        assert!((p.tau - 2.0).abs() < 1e-14);
        let p = trace_geodesic(&m, &BoundaryPoint::inward(0.0, PI / 4.0), 1e-2).unwrap();
        assert!((p.tau - 2f64.sqrt()).abs() < 1e-14);
        let last = p.samples.last().unwrap();
        assert!((last.r2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_point_round_trip() {
        for &(b, a, inw) in &[(0.3, 0.2, true), (5.0, -1.2, false), (2.0, 1.4, true)] {
            let bp = BoundaryPoint {
                beta: b,
                alpha: a,
                inward: inw,
            };
            let back = BoundaryPoint::from_phase(&bp.to_phase());
            assert_eq!(back.inward, inw);
            assert!((back.beta - b).abs() < 1e-12 && (back.alpha - a).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_path_matches_euclidean_formula_when_lambda_is_flat_grid() {
        // a zero-valued Gaussian still takes the generic integrator path
        let m = ConformalMetric::new(Lambda::Linear { gx: 0.0, gy: 1e-300 }).unwrap();
        assert!(!m.is_euclidean());
        let bp = BoundaryPoint::inward(0.7, 0.4);
        let tau = exit_time(&m, &bp.to_phase(), 1e-2).unwrap();
        assert!((tau - 2.0 * 0.4f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn jacobi_field_in_flat_disk_is_linear() {
        let m = ConformalMetric::euclidean();
        let r = jacobi_witness(&m, &BoundaryPoint::inward(0.0, 0.3), 1e-2).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }
}
