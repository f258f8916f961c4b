//! End-to-end acceptance battery at the default grids (64² × 64 angles,
//! 64 × 48 fan beam). Each test prints one PASS/FAIL line with the measured
//! values; oracles are closed forms, symmetries or exact identities
//! evaluated independently of the operator under test.

use geotomo::func::Func;
use geotomo::phase_space::{BoundaryField, FiberSpectrum, Lattice, SmField, SmGrid};
use geotomo::range_ops::{RangeTarget, RangeTester};
use geotomo::reconstruct::{Omegas, Pipeline, PipelineConfig};
use geotomo::surface::{
    check_simplicity, flow_derivative, jacobi_witness, scattering, wrap_pi, BoundaryPoint, ConformalMetric, Lambda, Phase,
};
use geotomo::transport::{
    forward_field, op_p, psi_extension, transport_solution, Beam, GeodesicBasis, GridSpec, ModeList,
    Pair, Setup,
};
use geotomo::adjoint_ops::{adjoint_i, factorization_rhs};
use geotomo::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

struct Line {
    ok: bool,
    parts: Vec<String>,
}

impl Line {
    fn new() -> Self {
        Self { ok: true, parts: Vec::new() }
    }

    fn check(&mut self, what: &str, value: f64, pass: bool) {
        self.ok &= pass;
        self.parts.push(format!("{what}={value:.3e}{}", if pass { "" } else { " (!)" }));
    }

    fn finish(self, n: u32, title: &str) {
        let verdict = if self.ok { "PASS" } else { "FAIL" };
        let line = format!("criterion {n:>2} {title}: {verdict} [{}]", self.parts.join(", "));
        let _ = writeln!(std::io::stderr(), "{line}");
        assert!(self.ok, "{line}");
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn attenuation() -> Func {
    Func::gaussian([0.05, 0.1], 0.25, c(0.8, 0.6))
}

fn bump(amp: C64) -> Func {
    Func::PolyBump {
        center: [0.0, 0.0],
        radius: 1.0,
        power: 2,
        amp,
    }
}

fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn rand_gaussian(rng: &mut ChaCha8Rng, width: f64) -> Func {
    let center = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
    Func::gaussian(center, width, rand_c(rng))
}

fn conformal() -> ConformalMetric {
    ConformalMetric::new(Lambda::Gaussian {
        center: [0.1, -0.05],
        width: 0.5,
        amplitude: 0.1,
    })
    .unwrap()
}

fn grid(n: usize) -> GridSpec {
    GridSpec {
        n_x: n,
        n_theta: 64.max(n).next_power_of_two(),
        n_beta: n,
        n_alpha: 3 * n / 4,
        ..Default::default()
    }
}

fn euclid64() -> &'static Arc<Setup> {
    static S: OnceLock<Arc<Setup>> = OnceLock::new();
    S.get_or_init(|| Setup::new(Arc::new(ConformalMetric::euclidean()), &GridSpec::default()).unwrap())
}

fn conformal64() -> &'static Arc<Setup> {
    static S: OnceLock<Arc<Setup>> = OnceLock::new();
    S.get_or_init(|| Setup::new(Arc::new(conformal()), &GridSpec::default()).unwrap())
}

fn pipeline64() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| Pipeline::new(euclid64().clone(), &attenuation(), PipelineConfig::default()).unwrap())
}

fn rel_nodes(sm: &SmGrid, a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    sm.node_norm(&d) / sm.node_norm(b)
}

fn rel_bd(s: &Setup, a: &BoundaryField, b: &BoundaryField) -> f64 {
    s.bd.norm(&a.sub(b)) / s.bd.norm(b)
}

/// Data of the pair [⋆dh₀ + ω, f] with ω given by holomorphic basis coefficients.
fn quadruple_data(pl: &Pipeline, f: &Func, h0: &Func, om: &Omegas) -> BoundaryField {
    let s = &pl.setup;
    let (wx, wy) = pl.omega_form(om);
    let sd = Pair::star_d(h0);
    let pair = Pair::new(sd.ax.plus(wx), sd.ay.plus(wy), f.clone());
    forward_field(s, &pl.a, &pair.modes(&s.metric)).unwrap()
}

fn rand_omegas(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Omegas {
    Omegas {
        plus: (0..n).map(|_| rand_c(rng) * scale).collect(),
        minus: (0..n).map(|_| rand_c(rng) * scale).collect(),
    }
}

fn coeff_rel(a: &[C64], b: &[C64]) -> f64 {
    let n = |v: Vec<C64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    n(a.iter().zip(b).map(|(x, y)| x - y).collect()) / n(b.to_vec())
}

#[test]
fn c01_geometry() {
    let mut line = Line::new();
    let step = GridSpec::default().step;
    let metrics = [
        ("euclidean", ConformalMetric::euclidean()),
        ("gaussian", conformal()),
        ("quadratic", ConformalMetric::new(Lambda::Quadratic { coeff: 0.1 }).unwrap()),
        ("linear", ConformalMetric::new(Lambda::Linear { gx: 0.1, gy: -0.05 }).unwrap()),
    ];
    let mut inv: f64 = 0.0;
    for (_, m) in &metrics {
        for i in 0..12 {
            for j in 0..10 {
                let bp = BoundaryPoint::inward(2.0 * PI * i as f64 / 12.0, -PI / 2.0 + (j as f64 + 0.5) * PI / 10.0);
                let back = scattering(m, &scattering(m, &bp, step).unwrap(), step).unwrap();
                inv = inv.max(wrap_pi(back.beta - bp.beta).abs()).max(wrap_pi(back.alpha - bp.alpha).abs());
            }
        }
    }
    line.check("involution", inv, inv < 1e-6);

    let s = euclid64();
    let mut tau: f64 = 0.0;
    for i in 0..s.bd.n_beta {
        for j in 0..s.bd.n_alpha {
            let t = 2.0 * s.bd.alphas[j].cos();
            tau = tau.max((s.chord_plus(i, j).tau - t).abs() / t);
        }
    }
    line.check("euclid_tau", tau, tau < 1e-8);

    // rotational symmetry of λ = c r²: chord length depends on α only
    let q = &metrics[2].1;
    let mut sym: f64 = 0.0;
    for j in 0..8 {
        let alpha = -1.4 + 2.8 * j as f64 / 7.0;
        let t0 = geotomo::surface::trace_geodesic(q, &BoundaryPoint::inward(0.0, alpha), step).unwrap().tau;
        for i in 1..6 {
            let t = geotomo::surface::trace_geodesic(q, &BoundaryPoint::inward(1.1 * i as f64, alpha), step).unwrap().tau;
            sym = sym.max((t - t0).abs() / t0);
        }
    }
    line.check("radial_tau_symmetry", sym, sym < 1e-8);
    let kb = (q.boundary_curvature(0.7) - (-0.1f64).exp() * 1.2).abs();
    line.check("radial_boundary_curvature", kb, kb < 1e-12);

    let mut jac_euclid: f64 = 0.0;
    for j in 0..6 {
        let r = jacobi_witness(&metrics[0].1, &BoundaryPoint::inward(0.3, -1.2 + 0.45 * j as f64), step).unwrap();
        jac_euclid = jac_euclid.max((r - 1.0).abs());
    }
    line.check("euclid_jacobi", jac_euclid, jac_euclid < 1e-9);
    for (name, m) in &metrics[1..] {
        let r = check_simplicity(m, 24, 12, step).unwrap();
        line.check(&format!("{name}_convex"), r.min_boundary_curvature, r.min_boundary_curvature > 0.0);
        line.check(&format!("{name}_jacobi"), r.min_jacobi_ratio, r.passed && r.min_jacobi_ratio > 0.0);
    }
    line.finish(1, "geometry");
}

/// Residuals of [X,V]u = X⊥u, [X⊥,V]u = −Xu, [X,X⊥]u = −κVu and
/// [H,X+a]u = X⊥u₀ + (X⊥u)₀: left sides by the discrete operators, right
/// sides from the geodesic vector field and analytic derivatives.
fn calculus_residuals(n: usize) -> [f64; 4] {
    let metric = Arc::new(conformal());
    let sm = SmGrid::new(Lattice::new(n).unwrap(), metric.clone(), 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let modes: Vec<(i32, Func)> = (-2..=2).map(|k| (k, rand_gaussian(&mut rng, 0.35))).collect();
    let a = attenuation();
    let s = sm.spectrum_from_modes(&modes).unwrap();

    let m2 = modes.clone();
    let u_parts = move |x: f64, y: f64, t: f64| {
        let (mut u, mut ux, mut uy, mut ut) = (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        for (k, f) in &m2 {
            let e = C64::from_polar(1.0, *k as f64 * t);
            let (gx, gy) = f.grad(x, y);
            let v = f.value(x, y);
            u += v * e;
            ux += gx * e;
            uy += gy * e;
            ut += C64::i() * *k as f64 * v * e;
        }
        (u, ux, uy, ut)
    };
    let mt = metric.clone();
    let x_oracle = move |x: f64, y: f64, t: f64, (_, ux, uy, ut): (C64, C64, C64, C64)| {
        let d = flow_derivative(&mt, &Phase::new(x, y, t)).unwrap();
        ux * d[0] + uy * d[1] + ut * d[2]
    };
    let mp = metric.clone();
    let xp_oracle = move |x: f64, y: f64, t: f64, (_, ux, uy, ut): (C64, C64, C64, C64)| {
        let e = (-mp.lambda(x, y)).exp();
        let (lx, ly) = mp.grad_lambda(x, y);
        (ux * t.sin() - uy * t.cos() + ut * (lx * t.cos() + ly * t.sin())) * e
    };

    let syn = |f: &FiberSpectrum| sm.synthesize(f).unwrap();
    let rel = |a: &SmField, b: &SmField| sm.norm(&a.sub(b)) / sm.norm(b);
    let x = |u: &FiberSpectrum| sm.x_spec(u);
    let xp = |u: &FiberSpectrum| sm.xperp_spec(u);
    let v = |u: &FiberSpectrum| sm.v_spec(u);

    let (up, xo, xpo) = (u_parts.clone(), x_oracle.clone(), xp_oracle.clone());
    let xp_u = sm.field_from_fn(move |x, y, t| xpo(x, y, t, up(x, y, t)));
    let up = u_parts.clone();
    let x_u = sm.field_from_fn(move |x, y, t| xo(x, y, t, up(x, y, t)));
    let (up, mk) = (u_parts.clone(), metric.clone());
    let kv_u = sm.field_from_fn(move |x, y, t| -up(x, y, t).3 * mk.curvature(x, y));

    let e1 = rel(&syn(&x(&v(&s)).sub(&v(&x(&s)))), &xp_u);
    let e2 = rel(&syn(&xp(&v(&s)).sub(&v(&xp(&s)))), &x_u.scale(c(-1.0, 0.0)));
    let e3 = rel(&syn(&x(&xp(&s)).sub(&xp(&x(&s)))), &kv_u);

    let av = sm.lattice.sample(&a);
    let nm = sm.n_modes();
    let xa = |u: &FiberSpectrum| {
        let mut out = sm.x_spec(u);
        for (p, cv) in av.iter().enumerate() {
            for k in 0..nm {
                out.data[p * nm + k] += u.data[p * nm + k] * cv;
            }
        }
        out
    };
    let lhs = sm.hilbert_spec(&xa(&s)).sub(&xa(&sm.hilbert_spec(&s)));
    let c0 = modes.iter().find(|(k, _)| *k == 0).unwrap().1.clone();
    let xpo = xp_oracle.clone();
    let xp_u0 = sm.field_from_fn(move |x, y, t| {
        let (gx, gy) = c0.grad(x, y);
        xpo(x, y, t, (c0.value(x, y), gx, gy, c(0.0, 0.0)))
    });
    let rhs = sm.analyze(&xp_u0).unwrap().add(&sm.filter_modes(&sm.analyze(&xp_u).unwrap(), |k| k == 0));
    let e4 = sm.norm_spec(&lhs.sub(&rhs)) / sm.norm_spec(&rhs);
    [e1, e2, e3, e4]
}

#[test]
fn c02_calculus() {
    let coarse = calculus_residuals(64);
    let fine = calculus_residuals(128);
    let mut line = Line::new();
    for (i, name) in ["[X,V]", "[Xperp,V]", "[X,Xperp]", "[H,X+a]"].iter().enumerate() {
        line.check(&format!("{name}@64"), coarse[i], true);
        line.check(&format!("{name}@128"), fine[i], fine[i] < 1e-2 && fine[i] < coarse[i]);
    }
    line.finish(2, "calculus");
}

#[test]
fn c03_duality() {
    let mut line = Line::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let real_a = Func::gaussian([-0.1, 0.2], 0.3, c(1.0, 0.0));
    let mut worst: f64 = 0.0;
    for (si, s) in [euclid64(), conformal64()].into_iter().enumerate() {
        for a in [&real_a, &attenuation()] {
            let beam = Beam::new(s, a).unwrap();
            for _ in 0..5 {
                let modes: Vec<(i32, Func)> = (-2..=2).map(|k| (k, rand_gaussian(&mut rng, 0.3))).collect();
                let fi = forward_field(s, a, &ModeList::new(modes.clone())).unwrap();
                let cs: Vec<C64> = (0..6).map(|_| rand_c(&mut rng)).collect();
                let h = s.bd.field_from_fn(move |b, al| {
                    cs[0] + cs[1] * b.cos() + cs[2] * b.sin() + cs[3] * al.sin() + cs[4] * (2.0 * b).cos() * al.cos() + cs[5] * al * al
                });
                let lhs = s.bd.inner(&fi, &h).unwrap();
                let f = s.sm.synthesize(&s.sm.spectrum_from_modes(&modes).unwrap()).unwrap();
                let rhs = s.sm.inner(&f, &adjoint_i(s, &beam, &h).unwrap()).unwrap();
                worst = worst.max((lhs - rhs).norm() / (s.bd.norm(&fi) * s.bd.norm(&h)));
            }
        }
        let _ = si;
    }
    line.check("duality_max_20", worst, worst < 1e-3);

    // constant attenuation on the Euclidean disk: I_a 1 = (e^{a τ} − 1)/a, τ = 2cos α
    let s = euclid64();
    let mut closed: f64 = 0.0;
    for a0 in [c(0.7, 0.0), c(0.5, -0.8)] {
        let d = forward_field(s, &Func::constant(a0), &ModeList::scalar(Func::constant(1.0))).unwrap();
        for i in (0..s.bd.n_beta).step_by(7) {
            for j in 0..s.bd.n_alpha {
                let t = 2.0 * s.bd.alphas[j].cos();
                let want = ((a0 * t).exp() - 1.0) / a0;
                // composite trapezoid bound τ h² max|f''| / 12
                let bound = t * s.step * s.step * a0.norm_sqr() * (a0.re * t).exp().max(1.0) / 12.0;
                closed = closed.max((d.data[i * s.bd.n_alpha + j] - want).norm() / bound);
            }
        }
    }
    line.check("closed_form_over_trapezoid_bound", closed, closed <= 1.0);
    line.finish(3, "duality");
}

#[test]
fn c04_kernel() {
    let mut line = Line::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = attenuation();
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let s = if k % 2 == 0 { euclid64() } else { conformal64() };
        let m = bump(c(1.0, 0.0)).times(rand_gaussian(&mut rng, 0.4));
        let p = Pair::potential(&a, &m);
        let d = forward_field(s, &a, &p.modes(&s.metric)).unwrap();
        let scale = forward_field(s, &a, &Pair::one_form(p.ax.clone(), p.ay.clone()).modes(&s.metric)).unwrap();
        worst = worst.max(s.bd.norm(&d) / s.bd.norm(&scale));
    }
    line.check("potential_max_10", worst, worst < 1e-3);
    line.finish(4, "kernel");
}

#[test]
fn c05_factorization() {
    let mut line = Line::new();
    let a = attenuation();
    let coarse = Setup::new(Arc::new(ConformalMetric::euclidean()), &grid(32)).unwrap();
    let basis = GeodesicBasis::triangular(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ws: Vec<Vec<C64>> = (0..10).map(|_| (0..basis.len()).map(|_| rand_c(&mut rng)).collect()).collect();
    let residuals = |s: &Setup| -> Vec<f64> {
        let beam = Beam::new(s, &a).unwrap();
        ws.iter()
            .map(|cw| {
                let w = basis.field_plus(s, cw);
                let lhs = op_p(s, &beam, &w).unwrap().scale(c(-2.0 * PI, 0.0));
                let rhs = factorization_rhs(s, &beam, &basis.field_sm(s, cw)).unwrap();
                rel_bd(s, &lhs, &rhs)
            })
            .collect()
    };
    let r32 = residuals(&coarse);
    let r64 = residuals(euclid64());
    let max64 = r64.iter().cloned().fold(0.0, f64::max);
    let max32 = r32.iter().cloned().fold(0.0, f64::max);
    let decreasing = r64.iter().zip(&r32).filter(|(f, c)| f < c).count();
    line.check("max@32", max32, true);
    line.check("max@64", max64, max64 < 1e-2);
    line.check("decreasing_of_10", decreasing as f64, decreasing == 10);
    line.finish(5, "factorization");
}

#[test]
fn c06_holomorphization() {
    let mut line = Line::new();
    let s = euclid64();
    let sm = &s.sm;
    let ho = &pipeline64().holo;
    let zero = Func::Zero;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut neg_max, mut var_max): (f64, f64) = (0.0, 0.0);
    for trial in 0..10 {
        let lo = if trial % 2 == 0 { -1 } else { 0 };
        let modes: Vec<(i32, Func)> = (lo..=2).map(|k| (k, rand_gaussian(&mut rng, 0.3))).collect();
        let f = ModeList::new(modes);
        let u = transport_solution(s, &zero, &f).unwrap();
        let d = forward_field(s, &zero, &f).unwrap();
        let (q, _) = ho.apply(s, &s.bd.extend_by_zero(&d)).unwrap();
        let (qpsi, _) = psi_extension(s, &q).unwrap();
        let sp = sm.analyze(&u.sub(&qpsi)).unwrap();
        let total = sm.norm_spec(&sp);
        neg_max = neg_max.max(sm.norm_spec(&sm.filter_modes(&sp, |k| k < 0)) / total);
        if lo == 0 {
            let m0 = sm.mode(&sp, 0);
            let vol: f64 = sm.vol.iter().sum();
            let mean: C64 = m0.iter().zip(&sm.vol).map(|(a, b)| a * *b).sum::<C64>() / vol;
            let dev: Vec<C64> = m0.iter().map(|v| v - mean).collect();
            var_max = var_max.max(sm.node_norm(&dev) * (2.0 * PI).sqrt() / total);
        }
    }
    line.check("negative_mass_max_10", neg_max, neg_max < 1e-2);
    line.check("mode0_variance_max_5", var_max, var_max < 1e-2);
    line.finish(6, "holomorphization");
}

#[test]
fn c07_omega_recovery() {
    let mut line = Line::new();
    let pl = pipeline64();
    let n = pl.cfg.basis_size;
    assert_eq!(n, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut per_unit: f64 = 0.0;
    for _ in 0..3 {
        let om = rand_omegas(&mut rng, n, 0.5);
        let (p, m) = pl.forward_omegas(&om).unwrap();
        let d = p.add(&m);
        let rec = pl.recover_omegas(&d).unwrap();
        worst = worst.max(coeff_rel(&rec.plus, &om.plus)).max(coeff_rel(&rec.minus, &om.minus));
        let cn: f64 = om.plus.iter().chain(&om.minus).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        per_unit = per_unit.max(cn / pl.setup.bd.norm(&d));
    }
    line.check("omega_rel_max_3", worst, worst <= 3e-2);
    let zero = Omegas {
        plus: vec![c(0.0, 0.0); n],
        minus: vec![c(0.0, 0.0); n],
    };
    let mut cross: f64 = 0.0;
    for _ in 0..3 {
        let f = rand_gaussian(&mut rng, 0.3);
        let h0 = bump(rand_c(&mut rng));
        let d = quadruple_data(pl, &f, &h0, &zero);
        let rec = pl.recover_omegas(&d).unwrap();
        let cn: f64 = rec.plus.iter().chain(&rec.minus).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cross = cross.max(cn / pl.setup.bd.norm(&d) / per_unit);
    }
    line.check("cross_insensitivity", cross, cross < 2e-2);
    line.finish(7, "omega-recovery");
}

fn inversion_errors(pl: &Pipeline) -> (f64, f64) {
    let f = Func::gaussian([0.1, -0.2], 0.3, c(1.0, 0.5));
    let h0 = bump(c(0.3, -0.7));
    let zero = Omegas {
        plus: vec![c(0.0, 0.0); pl.cfg.basis_size],
        minus: vec![c(0.0, 0.0); pl.cfg.basis_size],
    };
    let d = quadruple_data(pl, &f, &h0, &zero);
    let q = pl.decompose_data(&d).unwrap();
    let sm = &pl.setup.sm;
    (
        rel_nodes(sm, &q.f, &sm.lattice.sample(&f)),
        rel_nodes(sm, &q.h0, &sm.lattice.sample(&h0)),
    )
}

#[test]
fn c08_exact_inversion() {
    let mut line = Line::new();
    let a = attenuation();
    let sup = (0..200)
        .map(|k| {
            let t = k as f64 / 199.0;
            a.value(0.05 + 0.2 * t, 0.1 - 0.1 * t).norm()
        })
        .fold(0.0, f64::max);
    line.check("sup|a|", sup, (sup - 1.0).abs() < 0.05);
    let mut errs = Vec::new();
    for n in [48, 96] {
        let s = Setup::new(Arc::new(ConformalMetric::euclidean()), &grid(n)).unwrap();
        let pl = Pipeline::new(s, &a, PipelineConfig::default()).unwrap();
        errs.push((n, inversion_errors(&pl)));
    }
    errs.insert(1, (64, inversion_errors(pipeline64())));
    for (n, (ef, eh)) in &errs {
        line.check(&format!("f@{n}"), *ef, *ef <= 5e-2);
        line.check(&format!("h0@{n}"), *eh, *eh <= 5e-2);
    }
    let (e48, e96) = (errs[0].1, errs[2].1);
    line.check("f_96_below_48", e96.0 / e48.0, e96.0 < e48.0);
    line.check("h0_96_below_48", e96.1 / e48.1, e96.1 < e48.1);
    line.finish(8, "exact-inversion");
}

#[test]
fn c09_range() {
    let mut line = Line::new();
    let pl = pipeline64();
    let s = euclid64();
    let a = attenuation();
    let tol = 2e-2;
    let mut tester = RangeTester::new(s, Beam::new(s, &a).unwrap(), 20, 1e-8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = pl.cfg.basis_size;
    let zero = Omegas {
        plus: vec![c(0.0, 0.0); n],
        minus: vec![c(0.0, 0.0); n],
    };
    let i0 = forward_field(s, &a, &ModeList::scalar(Func::gaussian([0.1, -0.2], 0.3, c(1.0, 0.5)))).unwrap();
    let perp = quadruple_data(pl, &Func::Zero, &bump(c(0.3, -0.7)), &zero);
    let mut probes = vec![i0.clone(), perp.clone()];
    for _ in 0..3 {
        let om = rand_omegas(&mut rng, n, 0.3);
        probes.push(quadruple_data(pl, &rand_gaussian(&mut rng, 0.3), &bump(rand_c(&mut rng)), &om));
    }
    let mut inr = Vec::new();
    let mut sums: f64 = 0.0;
    for u in &probes {
        let r = tester.test_pair(s, u, tol).unwrap();
        line.ok &= r.verdict;
        inr.push(r.residual_relative);
        sums = sums.max(rel_bd(s, &pl.projections(u).unwrap().sum(), u));
    }
    let mut sorted = inr.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    line.check("in_range_max", sorted[sorted.len() - 1], sorted[sorted.len() - 1] <= tol);
    let mut out_min = f64::INFINITY;
    for _ in 0..5 {
        let cs: Vec<C64> = (0..5).map(|_| rand_c(&mut rng)).collect();
        let u = s.bd.field_from_fn(move |b, al| {
            cs[0] * (3.0 * b).cos() + cs[1] * al.sin() * b.sin() + cs[2] * al + cs[3] * (2.0 * al).cos() + cs[4]
        });
        let r = tester.test_pair(s, &u, tol).unwrap();
        line.ok &= !r.verdict;
        out_min = out_min.min(r.residual_relative);
    }
    line.check("out_of_range_min/median", out_min / median, out_min >= 10.0 * median);
    line.check("projection_sum", sums, sums <= tol);

    let r = tester.test_constrained(s, &i0, RangeTarget::I0, tol, 1.0).unwrap();
    line.check("I0_accepts_I0", r.residual_relative, r.verdict);
    let r = tester.test_constrained(s, &perp, RangeTarget::I0, tol, 1.0).unwrap();
    line.check("I0_rejects_perp", r.residual_relative, !r.verdict);
    let r = tester.test_constrained(s, &perp, RangeTarget::I1Solenoidal, tol, 1.0).unwrap();
    line.check("I1sol_accepts_perp", r.residual_relative, r.verdict);
    let r = tester.test_constrained(s, &i0, RangeTarget::I1Solenoidal, tol, 1.0).unwrap();
    line.check("I1sol_rejects_I0", r.residual_relative, !r.verdict);
    line.finish(9, "range");
}

#[test]
fn c10_idempotence() {
    let mut line = Line::new();
    let pl = pipeline64();
    let s = &pl.setup;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = [0.0f64; 4];
    for _ in 0..2 {
        let om = rand_omegas(&mut rng, pl.cfg.basis_size, 0.3);
        let u = quadruple_data(pl, &rand_gaussian(&mut rng, 0.3), &bump(rand_c(&mut rng)), &om);
        let p = pl.projections(&u).unwrap();
        let parts = [&p.p0, &p.perp, &p.plus, &p.minus];
        for (k, pk) in parts.iter().enumerate() {
            let pp = pl.projections(pk).unwrap();
            let again = [&pp.p0, &pp.perp, &pp.plus, &pp.minus][k];
            worst[k] = worst[k].max(rel_bd(s, again, pk));
        }
    }
    for (k, name) in ["P0", "Pperp", "P+1", "P-1"].iter().enumerate() {
        line.check(name, worst[k], worst[k] < 2e-2);
    }
    line.finish(10, "idempotence");
}
