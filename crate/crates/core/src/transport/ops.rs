use super::integrand::Integrand;
use super::rays::{Beam, Setup};
use crate::error::Result;
use crate::func::Func;
use crate::phase_space::{BoundaryField, FullBoundaryField, SmField};
use crate::surface::{walk, BoundaryPoint, ConformalMetric, Phase};
use crate::C64;

/// I_a F at one inward boundary point: ∫₀^τ F(φ_t) exp(∫₀^t a) dt with the
/// trapezoid rule at the tracing step for both integrals.
pub fn forward(
    metric: &ConformalMetric,
    a: &Func,
    f: &dyn Integrand,
    entry: &BoundaryPoint,
    step: f64,
) -> Result<C64> {
    integrate_from(metric, a, f, &entry.to_phase(), step)
}

/// ∫₀^τ F(φ_t) exp(∫₀^t a) dt from an arbitrary phase point to the exit.
fn integrate_from(metric: &ConformalMetric, a: &Func, f: &dyn Integrand, start: &Phase, step: f64) -> Result<C64> {
    let zero = C64::new(0.0, 0.0);
    let att = !a.is_zero();
    let mut expo = zero;
    let mut acc = zero;
    let mut prev: Option<(f64, C64, C64)> = None;
    walk(metric, start, step, false, |t, s| {
        let av = if att { a.value(s.x, s.y) } else { zero };
        if let Some((tp, ap, gp)) = prev {
            expo += (av + ap) * (0.5 * (t - tp));
            let g = f.eval(s.x, s.y, s.theta) * expo.exp();
            acc += (g + gp) * (0.5 * (t - tp));
            prev = Some((t, av, g));
        } else {
            prev = Some((t, av, f.eval(s.x, s.y, s.theta)));
        }
    })?;
    Ok(acc)
}

/// Fan-beam data I_a F on the ∂₊SM grid.
pub fn forward_field(setup: &Setup, a: &Func, f: &dyn Integrand) -> Result<BoundaryField> {
    let bd = &setup.bd;
    let na = bd.n_alpha;
    let vals = crate::par::map(bd.len(), |q| {
        forward(&setup.metric, a, f, &bd.point(q / na, q % na), setup.step)
    });
    let mut out = bd.zeros();
    for (q, v) in vals.into_iter().enumerate() {
        out.data[q] = v?;
    }
    Ok(out)
}

/// U_a = exp(−∫_{−τ(x,−v)}^0 a) on the SM grid.
pub fn integrating_factor_u(beam: &Beam) -> Vec<C64> {
    beam.back.iter().map(|b| (-b).exp()).collect()
}

pub fn integrating_factor_field(setup: &Setup, beam: &Beam) -> SmField {
    SmField {
        n_nodes: setup.sm.n_nodes(),
        n_theta: setup.sm.n_theta,
        data: integrating_factor_u(beam),
    }
}

/// Diagnostics of ψ-extension: footpoints whose α fell outside the node range.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct InterpDiag {
    pub clamped: usize,
    pub total: usize,
}

/// w_ψ: constant extension along geodesics of data on ∂₊SM.
pub fn psi_extension(setup: &Setup, w: &BoundaryField) -> Result<(SmField, InterpDiag)> {
    setup.bd.check(w)?;
    let vals = crate::par::map(setup.foot.len(), |q| {
        let e = &setup.foot[q];
        setup.bd.interp(w, e.beta, e.alpha)
    });
    let clamped = vals.iter().filter(|v| v.1).count();
    let total = vals.len();
    Ok((
        SmField {
            n_nodes: setup.sm.n_nodes(),
            n_theta: setup.sm.n_theta,
            data: vals.into_iter().map(|v| v.0).collect(),
        },
        InterpDiag { clamped, total },
    ))
}

/// w_ψ for data given in closed form on ∂₊SM as w(β, α).
pub fn psi_extension_fn(setup: &Setup, w: impl Fn(f64, f64) -> C64 + Sync + Send) -> SmField {
    let data = crate::par::map(setup.foot.len(), |q| {
        let e = &setup.foot[q];
        w(e.beta, e.alpha)
    });
    SmField {
        n_nodes: setup.sm.n_nodes(),
        n_theta: setup.sm.n_theta,
        data,
    }
}

/// w♯ = U_a w_ψ.
pub fn sharp_extension(setup: &Setup, beam: &Beam, w: &BoundaryField) -> Result<SmField> {
    let (psi, _) = psi_extension(setup, w)?;
    Ok(psi.zip(&integrating_factor_field(setup, beam), |a, b| a * b))
}

/// Q_a w: w on ∂₊SM; exp(−∫ a)·w(α(x,v)) on ∂₋SM.
pub fn op_q(setup: &Setup, beam: &Beam, w: &BoundaryField) -> Result<FullBoundaryField> {
    setup.bd.check(w)?;
    let bd = &setup.bd;
    op_q_with(setup, beam, |i, j, beta, alpha| {
        if j < bd.n_alpha {
            w.data[i * bd.n_alpha + j]
        } else {
            bd.interp(w, beta, alpha).0
        }
    })
}

/// Q_a of closed-form data w(β, α) on ∂₊SM.
pub fn op_q_fn(setup: &Setup, beam: &Beam, w: impl Fn(f64, f64) -> C64 + Sync) -> Result<FullBoundaryField> {
    let bd = &setup.bd;
    op_q_with(setup, beam, |i, j, beta, alpha| {
        if j < bd.n_alpha {
            w(bd.beta(i), bd.full_alpha(j))
        } else {
            w(beta, alpha)
        }
    })
}

/// `value(i, j, β_entry, α_entry)` gives w at the node (j < n_α) or at the
/// entry point of the chord (j ≥ n_α).
fn op_q_with(
    setup: &Setup,
    beam: &Beam,
    value: impl Fn(usize, usize, f64, f64) -> C64 + Sync,
) -> Result<FullBoundaryField> {
    let bd = &setup.bd;
    bd.require_full()?;
    let nf = bd.n_fiber();
    let data = crate::par::map(bd.n_beta * nf, |q| {
        let (i, j) = (q / nf, q % nf);
        if j < bd.n_alpha {
            value(i, j, 0.0, 0.0)
        } else {
            let e = &setup.chord[q];
            let att = if beam.is_zero() { C64::new(1.0, 0.0) } else { (-beam.chord[q]).exp() };
            att * value(i, j, e.beta, e.alpha)
        }
    });
    Ok(FullBoundaryField {
        n_beta: bd.n_beta,
        n_fiber: nf,
        data,
    })
}

/// B_a u = exp(∫₀^τ a)·u(α(x,v)) − u(x,v) on ∂₊SM.
pub fn op_b(setup: &Setup, beam: &Beam, u: &FullBoundaryField) -> Result<BoundaryField> {
    let bd = &setup.bd;
    bd.check_full(u)?;
    let (na, nf) = (bd.n_alpha, bd.n_fiber());
    let data = crate::par::map(bd.len(), |q| {
        let (i, j) = (q / na, q % na);
        let f = i * nf + j;
        let e = &setup.chord[f];
        let att = if beam.is_zero() { C64::new(1.0, 0.0) } else { beam.chord[f].exp() };
        att * bd.interp_full(u, e.beta, e.alpha) - u.data[f]
    });
    Ok(BoundaryField {
        n_beta: bd.n_beta,
        n_alpha: na,
        data,
    })
}

/// P_a = B_a H Q_a.
pub fn op_p(setup: &Setup, beam: &Beam, w: &BoundaryField) -> Result<BoundaryField> {
    let q = op_q(setup, beam, w)?;
    let h = setup.bd.hilbert(&q)?;
    op_b(setup, beam, &h)
}

/// P_a of closed-form data.
pub fn op_p_fn(setup: &Setup, beam: &Beam, w: impl Fn(f64, f64) -> C64 + Sync) -> Result<BoundaryField> {
    let q = op_q_fn(setup, beam, w)?;
    let h = setup.bd.hilbert(&q)?;
    op_b(setup, beam, &h)
}

/// u = ½[∫₀^{τ(x,v)} a − ∫₀^{τ(x,−v)} a(γ_{x,−v})] on the SM grid; Xu = −a.
pub fn beam_odd_solution(setup: &Setup, beam: &Beam) -> SmField {
    let data = beam
        .fwd
        .iter()
        .zip(&beam.back)
        .map(|(f, b)| (f - b) * 0.5)
        .collect();
    SmField {
        n_nodes: setup.sm.n_nodes(),
        n_theta: setup.sm.n_theta,
        data,
    }
}

/// The same odd solution on ∂SM (inward: ½∫chord, outward: −½∫chord).
pub fn beam_odd_boundary(setup: &Setup, beam: &Beam) -> Result<FullBoundaryField> {
    let bd = &setup.bd;
    bd.require_full()?;
    let nf = bd.n_fiber();
    let data = (0..bd.n_beta * nf)
        .map(|q| {
            if q % nf < bd.n_alpha {
                beam.chord[q] * 0.5
            } else {
                -beam.chord[q] * 0.5
            }
        })
        .collect();
    Ok(FullBoundaryField {
        n_beta: bd.n_beta,
        n_fiber: nf,
        data,
    })
}

/// Q_a from values of an invariant function on all of ∂SM (the ∂₋ values
/// are those carried from the entry point): attenuates the ∂₋SM part.
pub fn op_q_invariant(setup: &Setup, beam: &Beam, inv: &FullBoundaryField) -> Result<FullBoundaryField> {
    let bd = &setup.bd;
    bd.check_full(inv)?;
    let nf = bd.n_fiber();
    let mut out = inv.clone();
    if !beam.is_zero() {
        for (q, v) in out.data.iter_mut().enumerate() {
            if q % nf >= bd.n_alpha {
                *v *= (-beam.chord[q]).exp();
            }
        }
    }
    Ok(out)
}

/// P_a w for w given by its invariant values on ∂SM.
pub fn op_p_invariant(setup: &Setup, beam: &Beam, inv: &FullBoundaryField) -> Result<BoundaryField> {
    let q = op_q_invariant(setup, beam, inv)?;
    let h = setup.bd.hilbert(&q)?;
    op_b(setup, beam, &h)
}

/// The transport solution u of (X + a)u = −F with u|∂₋SM = 0 on the SM grid:
/// u(x,v) = ∫₀^{τ(x,v)} F(φ_t) exp(∫₀^t a) dt.
pub fn transport_solution(setup: &Setup, a: &Func, f: &dyn Integrand) -> Result<SmField> {
    let sm = &setup.sm;
    let nt = sm.n_theta;
    let vals = crate::par::map(sm.n_nodes() * nt, |q| {
        let (x, y) = sm.lattice.node_xy(q / nt);
        let p = Phase::new(x, y, sm.theta(q % nt));
        integrate_from(&setup.metric, a, f, &p, setup.step)
    });
    let mut data = Vec::with_capacity(vals.len());
    for v in vals {
        data.push(v?);
    }
    Ok(SmField {
        n_nodes: sm.n_nodes(),
        n_theta: nt,
        data,
    })
}
