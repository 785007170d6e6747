//! Emission spectrum of a single emitter under the pulse protocol.
//!
//! `⟨σ₊(t+θ)σ₋(t)⟩` is obtained by seeding `σ₋ρ(t)` and evolving it with the
//! same slice maps as `ρ`; the `ge` element of the evolved matrix is the
//! correlator. Both the `t` and the `θ` integrals use the trapezoidal rule on
//! the simulation grid.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bloch::{BlochVector, PhysicsParams, SimGrid};
use crate::error::{invalid, Error, Result};
use crate::noise::{ou_trace_stream, NoiseProcess};
use crate::regression::{pairwise_sum, trapezoid_weights, Dynamics};

pub type Metadata = BTreeMap<String, String>;

/// `C(θ_j) = ∫₀^{T-θ_j} ⟨σ₊(t+θ_j)σ₋(t)⟩ dt` on the lag grid `θ_j = j dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationAccumulator {
    pub theta_grid: Vec<f64>,
    pub c_of_theta: Vec<C64>,
}

impl CorrelationAccumulator {
    pub fn dt(&self) -> f64 {
        self.theta_grid.get(1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega_grid: Vec<f64>,
    pub p: Vec<f64>,
    pub metadata: Metadata,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        self.p
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0
    }

    /// Spectrum divided by its maximum.
    pub fn peak_normalized(&self) -> Vec<f64> {
        let m = self.max();
        self.p.iter().map(|v| v / m).collect()
    }

    /// Full width at half maximum of the peak containing grid index `idx`,
    /// with linear interpolation of the half-height crossings.
    pub fn fwhm_at(&self, idx: usize) -> Option<f64> {
        let half = self.p[idx] / 2.0;
        let (w, p) = (&self.omega_grid, &self.p);
        let mut l = idx;
        while l > 0 && p[l] > half {
            l -= 1;
        }
        let mut r = idx;
        while r + 1 < p.len() && p[r] > half {
            r += 1;
        }
        if p[l] > half || p[r] > half {
            return None;
        }
        let cross = |a: usize, b: usize| w[a] + (half - p[a]) * (w[b] - w[a]) / (p[b] - p[a]);
        Some(cross(r - 1, r) - cross(l, l + 1))
    }
}

/// Uniform frequency grid `min, min+step, ..., max`.
pub fn omega_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max > min) {
        return Err(invalid(
            "omega",
            format!("need min < max and step > 0, got [{min}, {max}] step {step}"),
        ));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| min + k as f64 * step).collect())
}

/// Default grid: [-40, 40] in steps of 0.05.
pub fn default_omega_grid() -> Vec<f64> {
    omega_grid(-40.0, 40.0, 0.05).expect("static grid")
}

/// `σ₋ρ` in `(ee, gg, ge, eg)` layout.
pub fn regression_seed_sigma_minus(rho: &BlochVector) -> BlochVector {
    BlochVector {
        rho_gg: rho.rho_eg,
        rho_ge: rho.rho_ee,
        ..BlochVector::ZERO
    }
}

pub(crate) fn correlation_from_dynamics(dynamics: &Dynamics) -> CorrelationAccumulator {
    let c = dynamics.accumulate(regression_seed_sigma_minus, |x| x[2]);
    let dt = dynamics.dt();
    CorrelationAccumulator {
        theta_grid: (0..c.len()).map(|j| j as f64 * dt).collect(),
        c_of_theta: c,
    }
}

/// Two-time correlation accumulated over the triangular domain for one
/// detuning realization.
pub fn two_time_correlation(
    initial: &BlochVector,
    grid: &SimGrid,
    detuning: &[f64],
    params: &PhysicsParams,
) -> Result<CorrelationAccumulator> {
    let dynamics = Dynamics::new(initial, grid, detuning, params)?;
    Ok(correlation_from_dynamics(&dynamics))
}

/// `P(ω) = 2 Re Σ_j v_j C(θ_j) e^{-iωθ_j} dt` with trapezoid weights `v_j`.
pub fn emission_spectrum(corr: &CorrelationAccumulator, omega_grid: &[f64]) -> Result<Spectrum> {
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("omega_grid", "must be strictly increasing"));
    }
    let dt = corr.dt();
    let n = corr.c_of_theta.len().saturating_sub(1);
    let weighted: Vec<(f64, C64)> = trapezoid_weights(n)
        .zip(&corr.c_of_theta)
        .zip(&corr.theta_grid)
        .filter(|((w, _), _)| *w != 0.0)
        .map(|((w, c), &th)| (th, c * (w * dt)))
        .collect();
    let p = omega_grid
        .par_iter()
        .map(|&w| {
            2.0 * weighted
                .iter()
                .map(|&(th, c)| {
                    let (s, co) = (w * th).sin_cos();
                    // Re{c e^{-iωθ}}
                    c.re * co + c.im * s
                })
                .sum::<f64>()
        })
        .collect();
    Ok(Spectrum {
        omega_grid: omega_grid.to_vec(),
        p,
        metadata: Metadata::new(),
    })
}

/// Trapezoid integral of the piecewise-linear spectrum over `[lo, hi]`.
fn integrate(spec: &Spectrum, lo: f64, hi: f64) -> f64 {
    let (w, p) = (&spec.omega_grid, &spec.p);
    let mut total = 0.0;
    for k in 0..w.len().saturating_sub(1) {
        let (a, b) = (w[k].max(lo), w[k + 1].min(hi));
        if b <= a {
            continue;
        }
        let lerp = |x: f64| p[k] + (p[k + 1] - p[k]) * (x - w[k]) / (w[k + 1] - w[k]);
        total += 0.5 * (lerp(a) + lerp(b)) * (b - a);
    }
    total
}

/// Fraction of the total spectral weight inside `[window.0, window.1]`.
pub fn spectral_weight(spec: &Spectrum, window: (f64, f64)) -> Result<f64> {
    let (&first, &last) = match (spec.omega_grid.first(), spec.omega_grid.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Degenerate("empty spectrum".into())),
    };
    let total = integrate(spec, first, last);
    if !(total > 0.0) {
        return Err(Error::Degenerate(format!(
            "total spectral weight is {total}"
        )));
    }
    Ok(integrate(spec, window.0, window.1) / total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub omega: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima whose topographic prominence is at least
/// `min_prominence * max(p)`, sorted by height (highest first).
pub fn find_peaks(spec: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let p = &spec.p;
    let n = p.len();
    if n < 3 {
        return Vec::new();
    }
    let cutoff = min_prominence * spec.max();
    let mut peaks: Vec<Peak> = (1..n - 1)
        .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
        .map(|i| {
            let base = |range: &mut dyn Iterator<Item = usize>| {
                let mut lowest = p[i];
                for j in range {
                    if p[j] > p[i] {
                        break;
                    }
                    lowest = lowest.min(p[j]);
                }
                lowest
            };
            let left = base(&mut (0..i).rev());
            let right = base(&mut (i + 1..n));
            Peak {
                index: i,
                omega: spec.omega_grid[i],
                height: p[i],
                prominence: p[i] - left.max(right),
            }
        })
        .filter(|pk| pk.prominence >= cutoff)
        .collect();
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    peaks
}

/// Everything needed to simulate one emitter: physics, grid with its pulse
/// schedule, and the detuning process.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterConfig {
    pub physics: PhysicsParams,
    pub grid: SimGrid,
    pub noise: NoiseProcess,
}

impl EmitterConfig {
    pub fn new(physics: PhysicsParams, grid: SimGrid, noise: NoiseProcess) -> Result<Self> {
        if !noise.is_static() {
            grid.check_noise_resolution(noise.tau_c)?;
        }
        Ok(Self {
            physics,
            grid,
            noise,
        })
    }

    pub fn detuning_trace(&self, seed: u64, stream: u64) -> Result<Vec<f64>> {
        let process = NoiseProcess { seed, ..self.noise };
        ou_trace_stream(&process, stream, self.grid.dt(), self.grid.n_steps())
    }

    /// Regression dynamics for realization `stream` of `seed`, starting excited.
    pub fn dynamics(&self, seed: u64, stream: u64) -> Result<Dynamics> {
        let trace = self.detuning_trace(seed, stream)?;
        Dynamics::new(&BlochVector::excited(), &self.grid, &trace, &self.physics)
    }

    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("gamma".into(), self.physics.gamma.to_string());
        m.insert("dt".into(), self.grid.dt().to_string());
        m.insert("n_steps".into(), self.grid.n_steps().to_string());
        m.insert("t_total".into(), self.grid.duration().to_string());
        if let Some(p) = self.grid.pulses() {
            m.insert("tau".into(), p.tau.to_string());
            m.insert("omega".into(), p.omega.to_string());
            m.insert(
                "omega_effective".into(),
                self.grid.effective_rabi().to_string(),
            );
            m.insert("n_pulses".into(), p.n_pulses.to_string());
        }
        m.insert("delta0".into(), self.noise.delta0.to_string());
        m.insert("sigma".into(), self.noise.sigma.to_string());
        m.insert("tau_c".into(), self.noise.tau_c.to_string());
        m
    }
}

/// Correlation averaged over realizations `0..n_realizations` (one noise
/// stream each) of `base_seed`.
pub fn averaged_correlation(
    config: &EmitterConfig,
    n_realizations: usize,
    base_seed: u64,
) -> Result<CorrelationAccumulator> {
    if n_realizations == 0 {
        return Err(invalid("realizations", "must be at least 1"));
    }
    let runs: Vec<Vec<C64>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|k| Ok(correlation_from_dynamics(&config.dynamics(base_seed, k)?).c_of_theta))
        .collect::<Result<_>>()?;
    let scale = 1.0 / n_realizations as f64;
    let c_of_theta = pairwise_sum(&runs)
        .into_iter()
        .map(|c| c * scale)
        .collect::<Vec<_>>();
    let dt = config.grid.dt();
    Ok(CorrelationAccumulator {
        theta_grid: (0..c_of_theta.len()).map(|j| j as f64 * dt).collect(),
        c_of_theta,
    })
}

/// Mean of the per-realization spectra. The transform is linear, so this is
/// computed as the spectrum of the mean correlation.
pub fn averaged_spectrum(
    config: &EmitterConfig,
    n_realizations: usize,
    base_seed: u64,
    omega_grid: &[f64],
) -> Result<Spectrum> {
    let corr = averaged_correlation(config, n_realizations, base_seed)?;
    let mut spec = emission_spectrum(&corr, omega_grid)?;
    spec.metadata = config.metadata();
    spec.metadata.insert("seed".into(), base_seed.to_string());
    spec.metadata
        .insert("realizations".into(), n_realizations.to_string());
    Ok(spec)
}
