//! Experiment configuration, read from TOML. Every key has a default and
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::Scheme;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub grid: GridSection,
    pub integrator: IntegratorSection,
    pub sweep: SweepSection,
    pub saturation: SaturationSection,
    pub probe: ProbeSection,
    pub simulate: SimulateSection,
    pub output: OutputSection,
}

/// Rainfall value or a position relative to the Turing point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RainfallSpec {
    Value(f64),
    Relative(RelativeRainfall),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelativeRainfall {
    #[serde(rename = "critical")]
    Critical,
    #[serde(rename = "critical-eps2")]
    Below,
    #[serde(rename = "critical+eps2")]
    Above,
}

impl RainfallSpec {
    /// Resolves against the critical value; `eps` only matters for the
    /// relative forms.
    pub fn resolve(&self, a_crit: f64, eps: f64) -> f64 {
        match self {
            RainfallSpec::Value(a) => *a,
            RainfallSpec::Relative(RelativeRainfall::Critical) => a_crit,
            RainfallSpec::Relative(RelativeRainfall::Below) => a_crit - eps * eps,
            RainfallSpec::Relative(RelativeRainfall::Above) => a_crit + eps * eps,
        }
    }

    pub fn needs_critical(&self) -> bool {
        matches!(self, RainfallSpec::Relative(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub a: RainfallSpec,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            a: RainfallSpec::Relative(RelativeRainfall::Critical),
            b: 0.2,
            c: 0.0,
            d: 0.018,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Carrier wavelengths on the fast domain.
    pub carriers: usize,
    pub n: usize,
    pub n_slow: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            carriers: 64,
            n: 4096,
            n_slow: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub scheme: Scheme,
    /// Fast-time step, or "auto" for the quasilinear ceiling.
    pub dt: StepSpec,
    pub dt_max: f64,
    /// Safety factor applied to the ceiling in auto mode.
    pub safety: f64,
    /// Slow-time horizon.
    pub t0: f64,
    pub checkpoints: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::EtdRk4,
            dt: StepSpec::Auto(AutoTag::Auto),
            dt_max: 0.25,
            safety: 0.5,
            t0: 1.0,
            checkpoints: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    /// Weight exponent of the `X^r` norm.
    pub r: f64,
    /// Initial amplitude `A₀` of `A₀ (1 + 0.1 cos)`.
    pub a0: f64,
    pub c_gl: f64,
    pub max_retries: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.04, 0.06, 0.08, 0.1],
            r: 2.0,
            a0: 0.5,
            c_gl: 2.0,
            max_retries: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Unstable,
    Stable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaturationSection {
    pub eps: f64,
    pub side: Side,
    pub a0: f64,
    /// Slow-time horizon.
    pub t_end: f64,
    pub carriers: usize,
    pub n: usize,
    pub n_slow: usize,
    /// Record the projected amplitude every this many steps.
    pub sample_every: usize,
    /// Odd powers of `|A|` used as regressors.
    pub fit_powers: Vec<i32>,
}

impl Default for SaturationSection {
    fn default() -> Self {
        Self {
            eps: 0.05,
            side: Side::Unstable,
            a0: 0.3,
            t_end: 2.5,
            carriers: 4,
            n: 64,
            n_slow: 16,
            sample_every: 5,
            fit_powers: vec![1, 3, 5],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub k_max: f64,
    pub t_max: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            k_max: 10.0,
            t_max: 2000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    #[default]
    Ansatz,
    /// Ansatz plus seeded random low-mode noise.
    Noisy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub eps: f64,
    pub initial: InitialData,
    pub noise: f64,
    /// Highest perturbed mode index for noisy initial data.
    pub noise_modes: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            eps: 0.1,
            initial: InitialData::Ansatz,
            noise: 1e-3,
            noise_modes: 256,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// CSV destination; stdout when absent.
    pub path: Option<String>,
    /// Record wall times (breaks byte-identical output).
    pub timings: bool,
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML text (defaults filled in); hashed into CSV metadata.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(m.d > 0.0 && m.b >= 0.0 && m.b.is_finite() && m.c.is_finite()) {
            return Err(bad(format!("model needs d > 0, b >= 0 (b={}, d={})", m.b, m.d)));
        }
        if let RainfallSpec::Value(a) = m.a {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(bad(format!("model.a = {a} must be a nonnegative number")));
            }
        }
        let g = &self.grid;
        for (name, n) in [("grid.n", g.n), ("grid.n_slow", g.n_slow)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(bad(format!("{name} = {n} must be a power of two >= 16")));
            }
        }
        if g.carriers == 0 {
            return Err(bad("grid.carriers must be positive".into()));
        }
        let it = &self.integrator;
        if let StepSpec::Fixed(dt) = it.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(bad(format!("integrator.dt = {dt} must be positive")));
            }
        }
        if !(it.dt_max > 0.0) || !(it.safety > 0.0 && it.safety <= 1.0) || !(it.t0 > 0.0) || it.checkpoints == 0 {
            return Err(bad(
                "integrator needs dt_max > 0, 0 < safety <= 1, t0 > 0, checkpoints >= 1".into(),
            ));
        }
        let s = &self.sweep;
        if s.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(bad(format!("sweep.epsilons must lie in (0, 1): {:?}", s.epsilons)));
        }
        if !(s.r >= 0.0) || !(s.a0 >= 0.0) || !(s.c_gl > 0.0) {
            return Err(bad("sweep needs r >= 0, a0 >= 0, c_gl > 0".into()));
        }
        let sat = &self.saturation;
        if !(sat.eps > 0.0 && sat.eps < 1.0) || !(sat.a0 > 0.0) || !(sat.t_end > 0.0) || sat.sample_every == 0 {
            return Err(bad("saturation needs 0 < eps < 1, a0 > 0, t_end > 0, sample_every >= 1".into()));
        }
        if sat.fit_powers.is_empty() || sat.fit_powers.iter().any(|p| *p < 1 || p % 2 == 0) {
            return Err(bad(format!("saturation.fit_powers must be odd and positive: {:?}", sat.fit_powers)));
        }
        if !sat.fit_powers.contains(&1) || !sat.fit_powers.contains(&3) {
            return Err(bad("saturation.fit_powers must include 1 and 3".into()));
        }
        if !(self.probe.k_max > 0.0) || !(self.probe.t_max >= 0.0) {
            return Err(bad("probe needs k_max > 0 and t_max >= 0".into()));
        }
        let sim = &self.simulate;
        if !(sim.eps > 0.0 && sim.eps < 1.0) || !(sim.noise >= 0.0) {
            return Err(bad("simulate needs 0 < eps < 1 and noise >= 0".into()));
        }
        Ok(())
    }
}
