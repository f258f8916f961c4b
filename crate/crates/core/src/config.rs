//! JSON run configuration: metric, attenuation, grids, phantom, solver
//! parameters and tolerances.

use crate::error::{Error, Result};
use crate::func::Func;
use crate::phase_space::{AlphaNodes, Lattice, LatticeFunc};
use crate::range_ops::RangeTarget;
use crate::reconstruct::PipelineConfig;
use crate::surface::{ConformalMetric, Lambda, LambdaGrid};
use crate::transport::GridSpec;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Euclidean,
    Gaussian {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
    },
    Quadratic {
        coeff: f64,
    },
    Linear {
        gx: f64,
        gy: f64,
    },
    /// λ samples in the grid file format (header path)
    Grid {
        path: PathBuf,
    },
}

impl MetricSpec {
    pub fn build(&self, base: &Path) -> Result<Arc<ConformalMetric>> {
        let lambda = match self {
            MetricSpec::Euclidean => return Ok(Arc::new(ConformalMetric::euclidean())),
            MetricSpec::Gaussian { center, width, amplitude } => Lambda::Gaussian {
                center: *center,
                width: *width,
                amplitude: *amplitude,
            },
            MetricSpec::Quadratic { coeff } => Lambda::Quadratic { coeff: *coeff },
            MetricSpec::Linear { gx, gy } => Lambda::Linear { gx: *gx, gy: *gy },
            MetricSpec::Grid { path } => Lambda::Grid(LambdaGrid::load(&base.join(path))?),
        };
        Ok(Arc::new(ConformalMetric::new(lambda)?))
    }
}

/// Closed-form complex fields; complex numbers are written as [re, im].
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FuncSpec {
    #[default]
    Zero,
    Constant {
        value: C64,
    },
    /// amp·exp(−|p − c|²/(2σ²))
    Gaussian {
        #[serde(default)]
        center: [f64; 2],
        sigma: f64,
        #[serde(default = "one")]
        amp: C64,
    },
    /// amp·(1 − |p − c|²/R²)^power
    PolyBump {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "unit")]
        radius: f64,
        #[serde(default = "two")]
        power: u32,
        #[serde(default = "one")]
        amp: C64,
    },
    SmoothBump {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        amp: C64,
    },
    /// amp·z^p·z̄^q
    Monomial {
        p: u32,
        q: u32,
        #[serde(default = "one")]
        amp: C64,
    },
    Sum {
        terms: Vec<FuncSpec>,
    },
    /// n_x × n_x raster array on the spatial lattice (header path)
    Grid {
        path: PathBuf,
    },
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn unit() -> f64 {
    1.0
}

fn two() -> u32 {
    2
}

impl FuncSpec {
    pub fn build(&self, lattice: &Arc<Lattice>, base: &Path) -> Result<Func> {
        Ok(match self {
            FuncSpec::Zero => Func::Zero,
            FuncSpec::Constant { value } => Func::Const(*value),
            FuncSpec::Gaussian { center, sigma, amp } => {
                if !(*sigma > 0.0) {
                    return Err(Error::invalid("gaussian sigma must be positive"));
                }
                Func::gaussian(*center, *sigma, *amp)
            }
            FuncSpec::PolyBump { center, radius, power, amp } => {
                if !(*radius > 0.0) {
                    return Err(Error::invalid("bump radius must be positive"));
                }
                Func::PolyBump {
                    center: *center,
                    radius: *radius,
                    power: *power,
                    amp: *amp,
                }
            }
            FuncSpec::SmoothBump { center, radius, amp } => {
                if !(*radius > 0.0) {
                    return Err(Error::invalid("bump radius must be positive"));
                }
                Func::SmoothBump {
                    center: *center,
                    radius: *radius,
                    amp: *amp,
                }
            }
            FuncSpec::Monomial { p, q, amp } => Func::monomial(*p, *q, *amp),
            FuncSpec::Sum { terms } => terms
                .iter()
                .map(|t| t.build(lattice, base))
                .try_fold(Func::Zero, |acc, t| t.map(|t| acc.plus(t)))?,
            FuncSpec::Grid { path } => {
                let v = crate::io::read_lattice(&base.join(path), lattice)?;
                LatticeFunc::new(lattice.clone(), &v).into_func()
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_theta: usize,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub alpha_nodes: AlphaNodes,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            n_x: g.n_x,
            n_theta: g.n_theta,
            n_beta: g.n_beta,
            n_alpha: g.n_alpha,
            alpha_nodes: g.alpha_nodes,
            step: g.step,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n_x: self.n_x,
            n_theta: self.n_theta,
            n_beta: self.n_beta,
            n_alpha: self.n_alpha,
            alpha_nodes: self.alpha_nodes,
            step: self.step,
        }
    }
}

/// Phantom quadruple: f, h₀ (closed form) and ω± as coefficients in the
/// holomorphic one-form bases.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub f: FuncSpec,
    pub h0: FuncSpec,
    pub omega_plus: Vec<C64>,
    pub omega_minus: Vec<C64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// range-test residual
    pub range: f64,
    /// relative error of reconstructed components against a phantom
    pub reconstruct: f64,
    /// ‖forward(decomposition) − data‖/‖data‖
    pub consistency: f64,
    /// multiplier applied to every selfcheck tolerance
    pub selfcheck_scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            range: 2e-2,
            reconstruct: 8e-2,
            consistency: 5e-2,
            selfcheck_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub attenuation: FuncSpec,
    pub grid: GridConfig,
    pub pipeline: PipelineConfig,
    /// degree of the geodesic basis for range tests
    pub range_degree: usize,
    /// relative singular-value cutoff of the range tester
    pub range_cutoff: f64,
    pub range_target: RangeTarget,
    pub tolerances: Tolerances,
    pub phantom: PhantomSpec,
    /// boundary data for reconstruct / rangetest (array stem, relative to the config)
    pub data: Option<PathBuf>,
    /// signal-to-noise ratio of additive complex Gaussian noise in `forward`
    pub noise_snr: Option<f64>,
    /// selfcheck entries to run; all when absent
    pub checks: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: MetricSpec::Euclidean,
            attenuation: FuncSpec::Zero,
            grid: GridConfig::default(),
            pipeline: PipelineConfig::default(),
            range_degree: 20,
            range_cutoff: 1e-8,
            range_target: RangeTarget::Pair,
            tolerances: Tolerances::default(),
            phantom: PhantomSpec::default(),
            data: None,
            noise_snr: None,
            checks: None,
            out_dir: None,
            cache_dir: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !g.n_theta.is_power_of_two() || g.n_theta < 4 {
            return Err(Error::invalid(format!("n_theta must be a power of two >= 4, got {}", g.n_theta)));
        }
        if g.n_x < 8 || g.n_beta < 8 || g.n_alpha < 4 {
            return Err(Error::invalid("grids too small: need n_x, n_beta >= 8 and n_alpha >= 4"));
        }
        if !(g.step > 0.0 && g.step < 0.5) {
            return Err(Error::invalid("ray step must lie in (0, 0.5)"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("range", t.range),
            ("reconstruct", t.reconstruct),
            ("consistency", t.consistency),
            ("selfcheck_scale", t.selfcheck_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("tolerance '{name}' must be positive")));
            }
        }
        if let Some(s) = self.noise_snr {
            if !(s > 0.0) {
                return Err(Error::invalid("noise_snr must be positive"));
            }
        }
        if !(self.range_cutoff > 0.0 && self.range_cutoff < 1.0) {
            return Err(Error::invalid("range_cutoff must lie in (0, 1)"));
        }
        if self.range_degree == 0 {
            return Err(Error::invalid("range_degree must be positive"));
        }
        self.pipeline.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&s).unwrap(), c);
        assert_eq!(RunConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_json("{\"grid\": {\"n_theta\": 48}}").is_err());
        assert!(RunConfig::from_json("{\"tolerances\": {\"range\": 0}}").is_err());
        assert!(RunConfig::from_json("{\"phantom\": {\"f\": {\"kind\": \"spiral\"}}}").is_err());
        assert!(RunConfig::from_json("{\"bogus\": 1}").is_err());
        assert!(RunConfig::from_json("{\"metric\": ").is_err());
    }

    #[test]
    fn phantom_families_build() {
        let c = RunConfig::from_json(
            r#"{"phantom": {"f": {"kind": "gaussian", "sigma": 0.3},
                            "h0": {"kind": "poly-bump", "amp": [0.0, 2.0]},
                            "omega_plus": [[1.0, 0.5]]}}"#,
        )
        .unwrap();
        let l = Lattice::new(16).unwrap();
        let f = c.phantom.f.build(&l, Path::new(".")).unwrap();
        assert!((f.value(0.0, 0.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let h = c.phantom.h0.build(&l, Path::new(".")).unwrap();
        assert!((h.value(0.0, 0.0) - C64::new(0.0, 2.0)).norm() < 1e-15);
        assert!(h.value(1.0, 0.0).norm() < 1e-15);
        assert_eq!(c.phantom.omega_plus, vec![C64::new(1.0, 0.5)]);
    }
}
