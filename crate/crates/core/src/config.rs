//! Run configuration.
//!
//! Configs are flat TOML: a few top-level scalars followed by one table per
//! concern. Parsing fills every default and validates the combination of
//! tables against the run mode; the resolved config serializes back to TOML
//! and parses to itself, which is what the metadata sidecars contain.
//!
//! ```toml
//! mode = "spectrum"
//! seed = 1729
//! realizations = 200
//!
//! [physics]
//! gamma = 2.0
//!
//! [pulses]
//! tau = 0.3
//! omega = 35.0
//!
//! [noise]
//! delta0 = 3.0
//! sigma = 4.0
//! tau_c = 0.03
//!
//! [grid]
//! t_total = 2.4
//! ```

use serde::{Deserialize, Serialize};

use crate::bloch::{PhysicsParams, PulseSequence, SimGrid, DEFAULT_GAMMA};
use crate::ensemble::{EnsembleSpec, DEFAULT_EMITTERS};
use crate::error::{Error, Result};
use crate::noise::NoiseProcess;
use crate::spectrum::{omega_grid, EmitterConfig};

pub const DEFAULT_SEED: u64 = 1729;
pub const DEFAULT_REALIZATIONS: usize = 200;
/// Step used for undriven runs unless the noise needs a finer one.
pub const DEFAULT_FREE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    Tpi,
    Ensemble,
    Noise,
    DecayCheck,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Tpi => "tpi",
            Mode::Ensemble => "ensemble",
            Mode::Noise => "noise",
            Mode::DecayCheck => "decay-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl Default for PhysicsBlock {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    pub tau: f64,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pulses: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub delta0: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_tau_c")]
    pub tau_c: f64,
}

fn default_tau_c() -> f64 {
    0.03
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "default_emitters")]
    pub n_emitters: usize,
    #[serde(default)]
    pub detuning_mean: f64,
    pub detuning_sigma: f64,
    /// Also compute the undriven spectrum, rescaled to the driven peak.
    #[serde(default)]
    pub reference: bool,
}

fn default_emitters() -> usize {
    DEFAULT_EMITTERS
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// Slices per pulse period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_slices: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaBlock {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for OmegaBlock {
    fn default() -> Self {
        Self {
            min: -40.0,
            max: 40.0,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub normalized: bool,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub physics: PhysicsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<PulseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitter1: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitter2: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses and validates a config whose `mode` key is set.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_for(text, None)
}

/// Parses a config for `mode`; a `mode` key in the file must agree with it.
pub fn parse_config_for(text: &str, mode: Option<Mode>) -> Result<RunConfig> {
    let raw = parse_unresolved(text)?;
    match mode {
        Some(m) => raw.with_mode(m)?.resolve(),
        None => raw.resolve(),
    }
}

/// Deserializes without filling defaults or validating, so that callers can
/// apply overrides before [`RunConfig::resolve`].
pub fn parse_unresolved(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
}

/// TOML text of a config; `parse_config` of the output yields the same config.
pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("config is always representable as TOML")
}

impl RunConfig {
    /// A config for `mode` with nothing but defaults, before validation.
    pub fn empty(mode: Mode) -> Self {
        Self {
            mode: Some(mode),
            seed: DEFAULT_SEED,
            realizations: None,
            threads: None,
            physics: PhysicsBlock::default(),
            pulses: None,
            noise: None,
            emitter1: None,
            emitter2: None,
            ensemble: None,
            grid: None,
            omega: None,
            output: OutputBlock::default(),
        }
    }

    /// Sets the mode, failing if the config already names a different one.
    pub fn with_mode(mut self, mode: Mode) -> Result<Self> {
        match self.mode {
            Some(m) if m != mode => Err(cfg_err(format!(
                "config declares mode `{}` but `{}` was requested",
                m.name(),
                mode.name()
            ))),
            _ => {
                self.mode = Some(mode);
                Ok(self)
            }
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode.expect("resolved configs always carry a mode")
    }

    fn require<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| {
            cfg_err(format!(
                "mode `{}` requires a [{name}] table",
                self.mode().name()
            ))
        })
    }

    fn forbid<T>(&self, v: &Option<T>, name: &str) -> Result<()> {
        if v.is_some() {
            return Err(cfg_err(format!(
                "[{name}] is not used by mode `{}`",
                self.mode().name()
            )));
        }
        Ok(())
    }

    /// Fills defaults and checks invariants. Idempotent.
    pub fn resolve(mut self) -> Result<Self> {
        let mode = self.mode.ok_or_else(|| cfg_err("missing field `mode`"))?;
        PhysicsParams::new(self.physics.gamma).map_err(field_err("physics.gamma"))?;
        if self.threads == Some(0) {
            return Err(cfg_err("threads: must be at least 1"));
        }
        if self.output.normalized && mode != Mode::Tpi {
            return Err(cfg_err("output.normalized only applies to mode `tpi`"));
        }
        match mode {
            Mode::Spectrum => {
                self.forbid(&self.emitter1, "emitter1")?;
                self.forbid(&self.emitter2, "emitter2")?;
                self.forbid(&self.ensemble, "ensemble")?;
                let n = self.require(self.noise, "noise")?;
                check_noise(&n, "noise")?;
                self.resolve_simulation_grid(&[n])?;
                self.resolve_realizations(n.sigma > 0.0)?;
                self.resolve_omega()?;
            }
            Mode::Tpi => {
                self.forbid(&self.noise, "noise")?;
                self.forbid(&self.ensemble, "ensemble")?;
                self.forbid(&self.omega, "omega")?;
                let a = self.require(self.emitter1, "emitter1")?;
                let b = self.require(self.emitter2, "emitter2")?;
                check_noise(&a, "emitter1")?;
                check_noise(&b, "emitter2")?;
                self.resolve_simulation_grid(&[a, b])?;
                self.resolve_realizations(a.sigma > 0.0 || b.sigma > 0.0)?;
            }
            Mode::Ensemble => {
                self.forbid(&self.noise, "noise")?;
                self.forbid(&self.emitter1, "emitter1")?;
                self.forbid(&self.emitter2, "emitter2")?;
                self.forbid(&self.realizations, "realizations")?;
                let e = self.require(self.ensemble, "ensemble")?;
                if e.n_emitters == 0 {
                    return Err(cfg_err("ensemble.n_emitters: must be at least 1"));
                }
                if !(e.detuning_sigma >= 0.0) {
                    return Err(cfg_err("ensemble.detuning_sigma: must be non-negative"));
                }
                self.resolve_simulation_grid(&[])?;
                self.resolve_omega()?;
            }
            Mode::Noise => {
                self.forbid(&self.pulses, "pulses")?;
                self.forbid(&self.emitter1, "emitter1")?;
                self.forbid(&self.emitter2, "emitter2")?;
                self.forbid(&self.ensemble, "ensemble")?;
                self.forbid(&self.omega, "omega")?;
                self.forbid(&self.realizations, "realizations")?;
                let n = self.require(self.noise, "noise")?;
                check_noise(&n, "noise")?;
                self.resolve_noise_grid()?;
            }
            Mode::DecayCheck => {
                self.forbid(&self.pulses, "pulses")?;
                self.forbid(&self.noise, "noise")?;
                self.forbid(&self.emitter1, "emitter1")?;
                self.forbid(&self.emitter2, "emitter2")?;
                self.forbid(&self.ensemble, "ensemble")?;
                self.forbid(&self.grid, "grid")?;
                self.forbid(&self.omega, "omega")?;
                self.forbid(&self.realizations, "realizations")?;
            }
        }
        Ok(self)
    }

    fn resolve_realizations(&mut self, noisy: bool) -> Result<()> {
        match self.realizations {
            Some(0) => Err(cfg_err("realizations: must be at least 1")),
            Some(_) => Ok(()),
            None => {
                self.realizations = Some(if noisy { DEFAULT_REALIZATIONS } else { 1 });
                Ok(())
            }
        }
    }

    fn resolve_omega(&mut self) -> Result<()> {
        let o = self.omega.unwrap_or_default();
        omega_grid(o.min, o.max, o.step).map_err(field_err("omega"))?;
        self.omega = Some(o);
        Ok(())
    }

    fn resolve_noise_grid(&mut self) -> Result<()> {
        let mut g = self.grid.unwrap_or_default();
        if g.n_slices.is_some() {
            return Err(cfg_err("grid.n_slices: only meaningful with [pulses]"));
        }
        let dt = g.dt.unwrap_or(DEFAULT_FREE_DT);
        positive(dt, "grid.dt")?;
        let n = steps_for(&g, dt)?;
        g.dt = Some(dt);
        g.n_steps = Some(n);
        g.t_total = Some(n as f64 * dt);
        self.grid = Some(g);
        Ok(())
    }

    fn resolve_simulation_grid(&mut self, noises: &[NoiseBlock]) -> Result<()> {
        let mut g = self.grid.unwrap_or_default();
        let tau_c = noises
            .iter()
            .filter(|n| n.sigma > 0.0)
            .map(|n| n.tau_c)
            .fold(None, |acc: Option<f64>, t| {
                Some(acc.map_or(t, |a| a.min(t)))
            });
        match self.pulses {
            Some(mut p) => {
                if g.n_steps.is_some() {
                    return Err(cfg_err(
                        "grid.n_steps: pulsed runs are sized by pulses.n_pulses or grid.t_total",
                    ));
                }
                let n_pulses = match (p.n_pulses, g.t_total) {
                    (Some(n), Some(t)) => {
                        if ((n as f64 * p.tau) - t).abs() > 1e-9 * t.abs().max(1.0) {
                            return Err(cfg_err(format!(
                                "grid.t_total = {t} contradicts pulses.n_pulses * pulses.tau = {}",
                                n as f64 * p.tau
                            )));
                        }
                        n
                    }
                    (Some(n), None) => n,
                    (None, Some(t)) => {
                        let n = (t / p.tau).round();
                        if n < 1.0 || (n * p.tau - t).abs() > 1e-9 * t.abs().max(1.0) {
                            return Err(cfg_err(format!(
                                "grid.t_total = {t} is not a whole number of periods tau = {}",
                                p.tau
                            )));
                        }
                        n as usize
                    }
                    (None, None) => return Err(cfg_err("[pulses] needs n_pulses or grid.t_total")),
                };
                let seq =
                    PulseSequence::new(p.tau, p.omega, n_pulses).map_err(field_err("pulses"))?;
                let grid = match (g.n_slices, g.dt) {
                    (Some(ns), dt) => {
                        let grid = SimGrid::pulsed(&seq, ns).map_err(field_err("grid"))?;
                        if let Some(dt) = dt {
                            if (grid.dt() - dt).abs() > 1e-12 * dt {
                                return Err(cfg_err(format!(
                                    "grid.dt = {dt} contradicts tau / n_slices = {}",
                                    grid.dt()
                                )));
                            }
                        }
                        grid
                    }
                    (None, Some(dt)) => {
                        positive(dt, "grid.dt")?;
                        let ns = (p.tau / dt).round() as usize;
                        let grid = SimGrid::pulsed(&seq, ns.max(1)).map_err(field_err("grid"))?;
                        if (grid.dt() - dt).abs() > 1e-9 * dt {
                            return Err(cfg_err(format!(
                                "grid.dt = {dt} does not divide pulses.tau = {}",
                                p.tau
                            )));
                        }
                        grid
                    }
                    (None, None) => {
                        SimGrid::default_pulsed(&seq, tau_c).map_err(field_err("grid"))?
                    }
                };
                if let Some(tc) = tau_c {
                    grid.check_noise_resolution(tc).map_err(field_err("grid"))?;
                }
                p.n_pulses = Some(n_pulses);
                self.pulses = Some(p);
                g.n_slices = grid.n_slices_per_period();
                g.dt = Some(grid.dt());
                g.t_total = Some(n_pulses as f64 * p.tau);
            }
            None => {
                if g.n_slices.is_some() {
                    return Err(cfg_err("grid.n_slices: only meaningful with [pulses]"));
                }
                let dt = g.dt.unwrap_or_else(|| {
                    tau_c.map_or(DEFAULT_FREE_DT, |t| DEFAULT_FREE_DT.min(t / 3.0))
                });
                positive(dt, "grid.dt")?;
                if let Some(tc) = tau_c {
                    if dt > tc / 3.0 * (1.0 + 1e-12) {
                        return Err(cfg_err(format!(
                            "grid.dt = {dt} does not resolve tau_c = {tc} (need dt <= tau_c/3)"
                        )));
                    }
                }
                let n = steps_for(&g, dt)?;
                g.dt = Some(dt);
                g.n_steps = Some(n);
                g.t_total = Some(n as f64 * dt);
            }
        }
        self.grid = Some(g);
        Ok(())
    }

    fn physics_params(&self) -> Result<PhysicsParams> {
        PhysicsParams::new(self.physics.gamma)
    }

    /// Simulation grid of a resolved spectrum/tpi/ensemble config.
    pub fn sim_grid(&self) -> Result<SimGrid> {
        let g = self.grid.ok_or_else(|| cfg_err("config is not resolved"))?;
        match self.pulses {
            Some(p) => {
                let seq = PulseSequence::new(p.tau, p.omega, p.n_pulses.unwrap_or(1))?;
                SimGrid::pulsed(&seq, g.n_slices.unwrap_or(1))
            }
            None => SimGrid::free(g.dt.unwrap_or(DEFAULT_FREE_DT), g.n_steps.unwrap_or(0)),
        }
    }

    fn emitter(&self, block: Option<NoiseBlock>, name: &str) -> Result<EmitterConfig> {
        let b = block.ok_or_else(|| cfg_err(format!("missing [{name}]")))?;
        EmitterConfig::new(
            self.physics_params()?,
            self.sim_grid()?,
            NoiseProcess::new(b.delta0, b.sigma, b.tau_c, self.seed)?,
        )
    }

    pub fn emitter_config(&self) -> Result<EmitterConfig> {
        self.emitter(self.noise, "noise")
    }

    pub fn emitter_pair(&self) -> Result<(EmitterConfig, EmitterConfig)> {
        Ok((
            self.emitter(self.emitter1, "emitter1")?,
            self.emitter(self.emitter2, "emitter2")?,
        ))
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let e = self.ensemble.ok_or_else(|| cfg_err("missing [ensemble]"))?;
        Ok(EnsembleSpec {
            n_emitters: e.n_emitters,
            detuning_mean: e.detuning_mean,
            detuning_sigma: e.detuning_sigma,
            seed: self.seed,
            physics: self.physics_params()?,
            grid: self.sim_grid()?,
        })
    }

    pub fn noise_process(&self) -> Result<NoiseProcess> {
        let b = self.noise.ok_or_else(|| cfg_err("missing [noise]"))?;
        NoiseProcess::new(b.delta0, b.sigma, b.tau_c, self.seed)
    }

    pub fn omega_values(&self) -> Result<Vec<f64>> {
        let o = self.omega.unwrap_or_default();
        omega_grid(o.min, o.max, o.step)
    }
}

fn field_err(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| cfg_err(format!("{field}: {e}"))
}

fn positive(v: f64, field: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(cfg_err(format!("{field}: must be positive, got {v}")));
    }
    Ok(())
}

fn check_noise(n: &NoiseBlock, name: &str) -> Result<()> {
    NoiseProcess::new(n.delta0, n.sigma, n.tau_c, 0)
        .map(|_| ())
        .map_err(|e| cfg_err(format!("{name}: {e}")))
}

fn steps_for(g: &GridBlock, dt: f64) -> Result<usize> {
    match (g.n_steps, g.t_total) {
        (Some(n), Some(t)) => {
            if (n as f64 * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
                return Err(cfg_err(format!(
                    "grid.t_total = {t} contradicts grid.n_steps * grid.dt"
                )));
            }
            Ok(n)
        }
        (Some(0), None) => Err(cfg_err("grid.n_steps: must be at least 1")),
        (Some(n), None) => Ok(n),
        (None, Some(t)) => {
            positive(t, "grid.t_total")?;
            let n = (t / dt).round();
            if n < 1.0 || (n * dt - t).abs() > 1e-9 * t.max(1.0) {
                return Err(cfg_err(format!(
                    "grid.t_total = {t} is not a whole number of steps dt = {dt}"
                )));
            }
            Ok(n as usize)
        }
        (None, None) => Err(cfg_err("missing grid.t_total (or grid.n_steps)")),
    }
}
