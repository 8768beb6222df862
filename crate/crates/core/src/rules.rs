//! Growth functions, kernel construction, the Lenia and Glaberish updates,
//! and the shipped rule presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::Stepper;
use crate::error::{Error, Result};
use crate::grid::{Backend, Grid, Kernel};

/// Gaussian bump `2 exp(-(n - mu)^2 / (2 sigma^2)) - 1`, valued in `(-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianBump {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let bump = Self { mu, sigma };
        bump.validate()?;
        Ok(bump)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Parameter(format!(
                "mu must be finite, got {}",
                self.mu
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Parameter(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, n: f64) -> f64 {
        growth_value(self, n)
    }
}

/// Past this exponent `2 e^-x - 1` rounds to exactly `-1.0`, so the
/// shortcut below is bit-identical to evaluating the exponential.
const FLAT_TAIL_EXPONENT: f64 = 40.0;

#[inline]
pub fn growth_value(f: &GaussianBump, n: f64) -> f64 {
    let d = n - f.mu;
    let x = d * d / (2.0 * f.sigma * f.sigma);
    if x > FLAT_TAIL_EXPONENT {
        return -1.0;
    }
    2.0 * (-x).exp() - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Lenia,
    Glaberish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreKind {
    LeniaShell,
    GaussianRing,
}

/// Radial profile of one kernel ring, as a function of the position `q`
/// in `[0, 1]` across the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelCore {
    /// `exp(alpha (1 - 1 / (4 q (1 - q))))`, zero at both ring edges.
    LeniaShell { alpha: f64 },
    /// `exp(-(q - 0.5)^2 / (2 width^2))`.
    GaussianRing { width: f64 },
}

impl KernelCore {
    fn eval(&self, q: f64) -> f64 {
        match *self {
            KernelCore::LeniaShell { alpha } => {
                if q <= 0.0 || q >= 1.0 {
                    0.0
                } else {
                    (alpha * (1.0 - 1.0 / (4.0 * q * (1.0 - q)))).exp()
                }
            }
            KernelCore::GaussianRing { width } => {
                let d = q - 0.5;
                (-d * d / (2.0 * width * width)).exp()
            }
        }
    }

    fn kind(&self) -> CoreKind {
        match self {
            KernelCore::LeniaShell { .. } => CoreKind::LeniaShell,
            KernelCore::GaussianRing { .. } => CoreKind::GaussianRing,
        }
    }

    fn param(&self) -> f64 {
        match *self {
            KernelCore::LeniaShell { alpha } => alpha,
            KernelCore::GaussianRing { width } => width,
        }
    }
}

/// Concentric-ring kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecFile", into = "KernelSpecFile")]
pub struct KernelSpec {
    pub radius: usize,
    pub ring_weights: Vec<f64>,
    pub core: KernelCore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpecFile {
    radius: usize,
    ring_weights: Vec<f64>,
    core: CoreKind,
    core_param: f64,
}

impl TryFrom<KernelSpecFile> for KernelSpec {
    type Error = Error;

    fn try_from(f: KernelSpecFile) -> Result<Self> {
        let core = match f.core {
            CoreKind::LeniaShell => KernelCore::LeniaShell {
                alpha: f.core_param,
            },
            CoreKind::GaussianRing => KernelCore::GaussianRing {
                width: f.core_param,
            },
        };
        let spec = KernelSpec {
            radius: f.radius,
            ring_weights: f.ring_weights,
            core,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for KernelSpecFile {
    fn from(s: KernelSpec) -> Self {
        KernelSpecFile {
            radius: s.radius,
            ring_weights: s.ring_weights,
            core: s.core.kind(),
            core_param: s.core.param(),
        }
    }
}

impl KernelSpec {
    /// Single-ring shell, R = 13.
    pub fn orbium() -> Self {
        Self {
            radius: 13,
            ring_weights: vec![1.0],
            core: KernelCore::LeniaShell { alpha: 4.0 },
        }
    }

    /// Three-ring shell, R = 18.
    pub fn h_natans() -> Self {
        Self {
            radius: 18,
            ring_weights: vec![0.5, 1.0, 0.667],
            core: KernelCore::LeniaShell { alpha: 4.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::Parameter("kernel radius must be >= 1".into()));
        }
        if self.ring_weights.is_empty()
            || self.ring_weights.iter().any(|b| !b.is_finite() || *b < 0.0)
            || !self.ring_weights.iter().any(|b| *b > 0.0)
        {
            return Err(Error::Parameter(
                "ring weights must be nonnegative with at least one positive".into(),
            ));
        }
        let p = self.core.param();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Parameter(format!(
                "kernel core parameter must be > 0, got {p}"
            )));
        }
        Ok(())
    }
}

/// Samples the ring profile on the `(2R + 1)^2` lattice and normalizes it.
pub fn build_kernel(spec: &KernelSpec) -> Result<Kernel> {
    spec.validate()?;
    let radius = spec.radius;
    let side = 2 * radius + 1;
    let r = radius as f64;
    let rings = spec.ring_weights.len();
    let mut weights = vec![0.0; side * side];
    for u in 0..side {
        for v in 0..side {
            let (du, dv) = (u as f64 - r, v as f64 - r);
            let d = (du * du + dv * dv).sqrt();
            if d > r {
                continue;
            }
            let pos = rings as f64 * d / r;
            let k = (pos.floor() as usize).min(rings - 1);
            let q = pos - k as f64;
            weights[u * side + v] = spec.ring_weights[k] * spec.core.eval(q);
        }
    }
    Kernel::from_weights(radius, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Update {
    /// One growth function regardless of cell value.
    Lenia { growth: GaussianBump },
    /// Genesis acts on the empty fraction `1 - A`, persistence on `A`.
    Glaberish {
        genesis: GaussianBump,
        persistence: GaussianBump,
    },
}

impl Update {
    pub fn framework(&self) -> Framework {
        match self {
            Update::Lenia { .. } => Framework::Lenia,
            Update::Glaberish { .. } => Framework::Glaberish,
        }
    }

    /// Growth applied to an empty cell (the genesis function, or G for Lenia).
    pub fn genesis_value(&self, n: f64) -> f64 {
        match self {
            Update::Lenia { growth } => growth.value(n),
            Update::Glaberish { genesis, .. } => genesis.value(n),
        }
    }

    /// `rho(a + dt * rate)` with `rho` clipping to `[0, 1]`, applied cellwise
    /// given the neighborhood values.
    pub(crate) fn apply(&self, dt: f64, cells: &mut [f64], neighborhood: &[f64]) {
        match *self {
            Update::Lenia { growth } => {
                for (a, &n) in cells.iter_mut().zip(neighborhood) {
                    *a = (*a + dt * growth.value(n)).clamp(0.0, 1.0);
                }
            }
            Update::Glaberish {
                genesis,
                persistence,
            } => {
                for (a, &n) in cells.iter_mut().zip(neighborhood) {
                    let rate = (1.0 - *a) * genesis.value(n) + *a * persistence.value(n);
                    *a = (*a + dt * rate).clamp(0.0, 1.0);
                }
            }
        }
    }
}

/// A complete CA rule: neighborhood kernel, update functions and step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleFile", into = "RuleFile")]
pub struct RuleParams {
    pub name: String,
    pub kernel: KernelSpec,
    pub update: Update,
    pub dt: f64,
}

/// On-disk rule layout, one rule per file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    name: String,
    framework: Framework,
    kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    growth: Option<GaussianBump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    genesis: Option<GaussianBump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    persistence: Option<GaussianBump>,
    dt: f64,
}

impl TryFrom<RuleFile> for RuleParams {
    type Error = Error;

    fn try_from(f: RuleFile) -> Result<Self> {
        let update = match (f.framework, f.growth, f.genesis, f.persistence) {
            (Framework::Lenia, Some(growth), None, None) => Update::Lenia { growth },
            (Framework::Glaberish, None, Some(genesis), Some(persistence)) => Update::Glaberish {
                genesis,
                persistence,
            },
            (Framework::Lenia, ..) => {
                return Err(Error::Parameter(
                    "lenia rules take exactly one `growth` function".into(),
                ))
            }
            (Framework::Glaberish, ..) => {
                return Err(Error::Parameter(
                    "glaberish rules take exactly `genesis` and `persistence`".into(),
                ))
            }
        };
        let rule = RuleParams {
            name: f.name,
            kernel: f.kernel,
            update,
            dt: f.dt,
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl From<RuleParams> for RuleFile {
    fn from(r: RuleParams) -> Self {
        let (growth, genesis, persistence) = match r.update {
            Update::Lenia { growth } => (Some(growth), None, None),
            Update::Glaberish {
                genesis,
                persistence,
            } => (None, Some(genesis), Some(persistence)),
        };
        RuleFile {
            name: r.name,
            framework: r.update.framework(),
            kernel: r.kernel,
            growth,
            genesis,
            persistence,
            dt: r.dt,
        }
    }
}

pub const DEFAULT_DT: f64 = 0.1;

impl RuleParams {
    pub fn lenia(
        name: impl Into<String>,
        kernel: KernelSpec,
        growth: GaussianBump,
        dt: f64,
    ) -> Result<Self> {
        let rule = Self {
            name: name.into(),
            kernel,
            update: Update::Lenia { growth },
            dt,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn glaberish(
        name: impl Into<String>,
        kernel: KernelSpec,
        genesis: GaussianBump,
        persistence: GaussianBump,
        dt: f64,
    ) -> Result<Self> {
        let rule = Self {
            name: name.into(),
            kernel,
            update: Update::Glaberish {
                genesis,
                persistence,
            },
            dt,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn framework(&self) -> Framework {
        self.update.framework()
    }

    /// `dt = 0` is accepted and freezes the dynamics.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dt) {
            return Err(Error::Parameter(format!(
                "dt must lie in [0, 1], got {}",
                self.dt
            )));
        }
        self.kernel.validate()?;
        match &self.update {
            Update::Lenia { growth } => growth.validate(),
            Update::Glaberish {
                genesis,
                persistence,
            } => {
                genesis.validate()?;
                persistence.validate()
            }
        }
    }

    /// True when an all-zero grid stays all-zero under this rule.
    pub fn zero_is_fixed_point(&self) -> bool {
        self.dt * self.update.genesis_value(0.0) <= 0.0
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

fn step_with(grid: &Grid, rule: &RuleParams, expected: Framework) -> Result<Grid> {
    if rule.framework() != expected {
        return Err(Error::Usage(format!(
            "rule `{}` is a {:?} rule, not {:?}",
            rule.name,
            rule.framework(),
            expected
        )));
    }
    let mut stepper = Stepper::new(rule, grid.height(), grid.width(), Backend::Auto)?;
    let mut out = grid.clone();
    stepper.step_in_place(&mut out);
    Ok(out)
}

/// `rho(A + dt G(K * A))`.
pub fn step_lenia(grid: &Grid, rule: &RuleParams) -> Result<Grid> {
    step_with(grid, rule, Framework::Lenia)
}

/// `rho(A + dt [(1 - A) G_gen(K * A) + A P(K * A)])`.
pub fn step_glaberish(grid: &Grid, rule: &RuleParams) -> Result<Grid> {
    step_with(grid, rule, Framework::Glaberish)
}

const PRESETS: &[(&str, &str)] = &[
    ("Orbium", include_str!("../presets/Orbium.json")),
    ("P_s_labens", include_str!("../presets/P_s_labens.json")),
    ("S_valvatus", include_str!("../presets/S_valvatus.json")),
    ("D_valvatus", include_str!("../presets/D_valvatus.json")),
    ("H_natans", include_str!("../presets/H_natans.json")),
    ("s7", include_str!("../presets/s7.json")),
    ("s613", include_str!("../presets/s613.json")),
    ("s11", include_str!("../presets/s11.json")),
    ("s643", include_str!("../presets/s643.json")),
    ("s113", include_str!("../presets/s113.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

pub fn load_preset(name: &str) -> Result<RuleParams> {
    let (_, text) =
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::PresetNotFound {
                name: name.to_string(),
                available: preset_names().into_iter().map(String::from).collect(),
            })?;
    RuleParams::from_json(text)
}

/// Preset name, or else a path to a rule JSON file.
pub fn resolve_rule(name_or_path: &str) -> Result<RuleParams> {
    match load_preset(name_or_path) {
        Ok(rule) => Ok(rule),
        Err(err) => {
            let path = Path::new(name_or_path);
            if path.is_file() {
                RuleParams::load(path)
            } else {
                Err(err)
            }
        }
    }
}
