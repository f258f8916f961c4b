//! Command workflows behind the CLI: phantom synthesis, forward data,
//! reconstruction, range tests and the selfcheck battery. Each writes its
//! arrays and a JSON report into the output directory.

use crate::cache::Cache;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::func::Func;
use crate::hodge::HoloBasis;
use crate::io;
use crate::phase_space::BoundaryField;
use crate::range_ops::{RangeReport, RangeTarget, RangeTester};
use crate::reconstruct::{Omegas, Pipeline};
use crate::transport::{forward_field, Beam, Pair, Setup};
use crate::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub struct Context {
    pub cfg: RunConfig,
    /// directory relative paths in the config resolve against
    pub base: PathBuf,
    pub out: PathBuf,
    pub setup: Arc<Setup>,
    pub a: Func,
    pub cache: Option<Cache>,
}

/// Result of a command: the report written and whether it met tolerance.
#[derive(Debug)]
pub struct Outcome {
    pub report: PathBuf,
    pub passed: bool,
}

impl Context {
    pub fn load(config: &Path, out: Option<PathBuf>, svd_cutoff: Option<f64>) -> Result<Self> {
        let mut cfg = RunConfig::load(config)?;
        if let Some(r) = svd_cutoff {
            cfg.pipeline.svd_cutoff = r;
            cfg.range_cutoff = r;
            cfg.validate()?;
        }
        let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(cfg, base, out)
    }

    pub fn new(cfg: RunConfig, base: PathBuf, out: Option<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let out = match (out, &cfg.out_dir) {
            (Some(o), _) => o,
            (None, Some(o)) => base.join(o),
            (None, None) => base.join("out"),
        };
        std::fs::create_dir_all(&out)?;
        let metric = cfg.metric.build(&base)?;
        let setup = Setup::new(metric, &cfg.grid.spec())?;
        let a = cfg.attenuation.build(&setup.sm.lattice, &base)?;
        let cache = cfg.cache_dir.as_ref().map(|d| Cache::new(base.join(d))).transpose()?;
        Ok(Self {
            cfg,
            base,
            out,
            setup,
            a,
            cache,
        })
    }

    fn write_report<T: Serialize>(&self, name: &str, report: &T, passed: bool) -> Result<Outcome> {
        let path = self.out.join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
        Ok(Outcome { report: path, passed })
    }

    fn phantom(&self) -> Result<Phantom> {
        let p = &self.cfg.phantom;
        let l = &self.setup.sm.lattice;
        let n = self.cfg.pipeline.basis_size;
        let pad = |c: &[C64], side: &str| -> Result<Vec<C64>> {
            if c.len() > n {
                return Err(Error::invalid(format!(
                    "omega_{side} has {} coefficients, basis_size is {n}",
                    c.len()
                )));
            }
            let mut v = c.to_vec();
            v.resize(n, C64::new(0.0, 0.0));
            Ok(v)
        };
        Ok(Phantom {
            f: p.f.build(l, &self.base)?,
            h0: p.h0.build(l, &self.base)?,
            omegas: Omegas {
                plus: pad(&p.omega_plus, "plus")?,
                minus: pad(&p.omega_minus, "minus")?,
            },
        })
    }

    fn phantom_data(&self, ph: &Phantom) -> Result<BoundaryField> {
        let s = &self.setup;
        let bp = HoloBasis::new(&s.sm, 1, self.cfg.pipeline.basis_size)?;
        let bm = HoloBasis::new(&s.sm, -1, self.cfg.pipeline.basis_size)?;
        let (px, py) = bp.one_form(&ph.omegas.plus);
        let (mx, my) = bm.one_form(&ph.omegas.minus);
        let sd = Pair::star_d(&ph.h0);
        let pair = Pair::new(sd.ax.plus(px).plus(mx), sd.ay.plus(py).plus(my), ph.f.clone());
        forward_field(s, &self.a, &pair.modes(&s.metric))
    }

    /// Boundary data: the configured array, or the phantom's forward data.
    fn data(&self) -> Result<(BoundaryField, String)> {
        match &self.cfg.data {
            Some(p) => {
                let path = self.base.join(p);
                Ok((io::read_boundary(&path, &self.setup.bd)?, path.display().to_string()))
            }
            None => Ok((self.phantom_data(&self.phantom()?)?, "phantom".into())),
        }
    }
}

struct Phantom {
    f: Func,
    h0: Func,
    omegas: Omegas,
}

#[derive(Serialize)]
struct PhantomReport {
    grid: String,
    f: String,
    h0: String,
    omegas: Omegas,
    f_norm: f64,
    h0_norm: f64,
    files: Vec<String>,
}

pub fn phantom(ctx: &Context) -> Result<Outcome> {
    let ph = ctx.phantom()?;
    let sm = &ctx.setup.sm;
    let l = &sm.lattice;
    let f = l.sample(&ph.f);
    let h0 = l.sample(&ph.h0);
    let o = &ctx.out;
    io::write_lattice(&o.join("phantom_f"), l, &f)?;
    io::write_lattice(&o.join("phantom_h0"), l, &h0)?;
    let n = ph.omegas.plus.len();
    io::write_complex(&o.join("phantom_omega_plus"), &ph.omegas.plus, &[n], "holo-basis:+1")?;
    io::write_complex(&o.join("phantom_omega_minus"), &ph.omegas.minus, &[n], "holo-basis:-1")?;
    io::write_pgm_abs(&o.join("phantom_f.pgm"), l, &f)?;
    io::write_pgm_abs(&o.join("phantom_h0.pgm"), l, &h0)?;
    let report = PhantomReport {
        grid: l.descriptor(),
        f: ph.f.descriptor(),
        h0: ph.h0.descriptor(),
        f_norm: sm.node_norm(&f),
        h0_norm: sm.node_norm(&h0),
        omegas: ph.omegas,
        files: ["phantom_f", "phantom_h0", "phantom_omega_plus", "phantom_omega_minus", "phantom_f.pgm", "phantom_h0.pgm"]
            .map(String::from)
            .to_vec(),
    };
    ctx.write_report("phantom_report", &report, true)
}

#[derive(Serialize)]
struct ChordRow {
    beta: f64,
    alpha: f64,
    tau: f64,
    exit_beta: f64,
    exit_alpha: f64,
    /// |τ − 2cos α| on the Euclidean disk
    euclidean_deviation: Option<f64>,
}

#[derive(Serialize)]
struct ForwardReport {
    grid: String,
    attenuation: String,
    data_norm: f64,
    noise_snr: Option<f64>,
    noise_sigma: f64,
    seed: u64,
    chord_max_deviation: Option<f64>,
    chords: Vec<ChordRow>,
}

/// Adds complex Gaussian noise with E|n|² = (rms(w)/snr)², returning σ.
pub fn add_noise(w: &mut BoundaryField, snr: f64, seed: u64) -> f64 {
    let rms = (w.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / w.data.len().max(1) as f64).sqrt();
    let sigma = rms / snr;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sigma / 2f64.sqrt();
    for z in &mut w.data {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += C64::new(re * s, im * s);
    }
    sigma
}

pub fn forward(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.setup;
    let bd = &s.bd;
    let mut d = ctx.phantom_data(&ctx.phantom()?)?;
    let sigma = match ctx.cfg.noise_snr {
        Some(snr) => add_noise(&mut d, snr, ctx.cfg.seed),
        None => 0.0,
    };
    io::write_boundary(&ctx.out.join("data"), bd, &d)?;
    let euclid = s.metric.is_euclidean();
    let mut chords = Vec::new();
    for i in (0..bd.n_beta).step_by((bd.n_beta / 8).max(1)) {
        for j in (0..bd.n_alpha).step_by((bd.n_alpha / 6).max(1)) {
            let e = s.chord_plus(i, j);
            let alpha = bd.alphas[j];
            chords.push(ChordRow {
                beta: bd.beta(i),
                alpha,
                tau: e.tau,
                exit_beta: e.beta,
                exit_alpha: e.alpha,
                euclidean_deviation: euclid.then(|| (e.tau - 2.0 * alpha.cos()).abs()),
            });
        }
    }
    let report = ForwardReport {
        grid: bd.descriptor(),
        attenuation: ctx.a.descriptor(),
        data_norm: bd.norm(&d),
        noise_snr: ctx.cfg.noise_snr,
        noise_sigma: sigma,
        seed: ctx.cfg.seed,
        chord_max_deviation: euclid.then(|| chords.iter().filter_map(|c| c.euclidean_deviation).fold(0.0, f64::max)),
        chords,
    };
    ctx.write_report("forward_report", &report, true)
}

#[derive(Serialize)]
struct PhantomErrors {
    f: Option<f64>,
    h0: Option<f64>,
    omega_plus: Option<f64>,
    omega_minus: Option<f64>,
}

#[derive(Serialize)]
struct ReconstructReport {
    grid: String,
    attenuation: String,
    data: String,
    data_norm: f64,
    /// ‖Σ projections − data‖/‖data‖
    consistency: f64,
    projection_norms: [f64; 4],
    omegas: Omegas,
    diagnostics: crate::reconstruct::Diagnostics,
    phantom_errors: Option<PhantomErrors>,
    tolerances: crate::config::Tolerances,
    passed: bool,
}

fn rel_err(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn coeff_err(a: &[C64], b: &[C64]) -> Option<f64> {
    let n = |v: &mut dyn Iterator<Item = C64>| v.map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    rel_err(n(&mut a.iter().zip(b).map(|(x, y)| x - y)), n(&mut b.iter().cloned()))
}

pub fn reconstruct(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.setup;
    let sm = &s.sm;
    let l = &sm.lattice;
    let (d, source) = ctx.data()?;
    let beam = Beam::new(s, &ctx.a)?;
    let pl = Pipeline::with_beam(s.clone(), beam, ctx.cfg.pipeline.clone(), ctx.cache.as_ref())?;
    let q = pl.decompose_data(&d)?;
    let p = pl.forward_quadruple(&q)?;
    let dn = s.bd.norm(&d);
    let consistency = rel_err(s.bd.norm(&p.sum().sub(&d)), dn).unwrap_or(0.0);
    let o = &ctx.out;
    io::write_lattice(&o.join("recon_f"), l, &q.f)?;
    io::write_lattice(&o.join("recon_h0"), l, &q.h0)?;
    let n = q.omegas.plus.len();
    io::write_complex(&o.join("recon_omega_plus"), &q.omegas.plus, &[n], "holo-basis:+1")?;
    io::write_complex(&o.join("recon_omega_minus"), &q.omegas.minus, &[n], "holo-basis:-1")?;
    io::write_pgm_abs(&o.join("recon_f.pgm"), l, &q.f)?;
    io::write_pgm_abs(&o.join("recon_h0.pgm"), l, &q.h0)?;
    let t = &ctx.cfg.tolerances;
    let mut passed = consistency <= t.consistency;
    let errors = if ctx.cfg.phantom != Default::default() {
        let ph = ctx.phantom()?;
        let diff = |a: &[C64], b: &[C64]| -> Option<f64> {
            let e: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            rel_err(sm.node_norm(&e), sm.node_norm(b))
        };
        let e = PhantomErrors {
            f: diff(&q.f, &l.sample(&ph.f)),
            h0: diff(&q.h0, &l.sample(&ph.h0)),
            omega_plus: coeff_err(&q.omegas.plus, &ph.omegas.plus),
            omega_minus: coeff_err(&q.omegas.minus, &ph.omegas.minus),
        };
        passed &= [e.f, e.h0, e.omega_plus, e.omega_minus].iter().flatten().all(|&v| v <= t.reconstruct);
        Some(e)
    } else {
        None
    };
    let report = ReconstructReport {
        grid: s.descriptor(),
        attenuation: ctx.a.descriptor(),
        data: source,
        data_norm: dn,
        consistency,
        projection_norms: [&p.p0, &p.perp, &p.plus, &p.minus].map(|b| s.bd.norm(b)),
        omegas: q.omegas.clone(),
        diagnostics: q.diagnostics.clone(),
        phantom_errors: errors,
        tolerances: t.clone(),
        passed,
    };
    ctx.write_report("reconstruct_report", &report, passed)
}

pub fn rangetest(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.setup;
    let (u, _) = ctx.data()?;
    let beam = Beam::new(s, &ctx.a)?;
    let c = &ctx.cfg;
    let mut tester = RangeTester::with_cache(s, beam, c.range_degree, c.range_cutoff, ctx.cache.as_ref())?;
    let tol = c.tolerances.range;
    let report: RangeReport = match c.range_target {
        RangeTarget::Pair => tester.test_pair(s, &u, tol)?,
        t => tester.test_constrained(s, &u, t, tol, 1.0)?,
    };
    let passed = report.verdict;
    ctx.write_report("rangetest_report", &report, passed)
}

pub fn selfcheck(ctx: &Context) -> Result<Outcome> {
    let c = &ctx.cfg;
    let r = crate::selfcheck::run(&ctx.setup, &ctx.a, c.checks.as_deref(), c.tolerances.selfcheck_scale, c.seed)?;
    let passed = r.passed;
    ctx.write_report("selfcheck_report", &r, passed)
}

/// Input errors (bad config, missing or mismatched files, rejected metric)
/// as opposed to numerical failures.
pub fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_) | Error::Format(_) | Error::Io(_) | Error::GridMismatch(_) | Error::NotSimple(_) | Error::Domain { .. }
    )
}
