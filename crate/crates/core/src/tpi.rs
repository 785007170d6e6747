//! Hong-Ou-Mandel cross-correlation of two independent emitters.
//!
//! Both emitters feed a balanced beam splitter. For independent emitters the
//! detector cross-correlation reduces to
//!
//! ```text
//! G34(t,θ) = ¼ [ G1(t,θ) + G2(t,θ) + n1(t) n2(t+θ) + n2(t) n1(t+θ)
//!               - 2 Re{ g1(t,θ) g2*(t,θ) } ]
//! ```
//!
//! with `n = ⟨σ₊σ₋⟩`, `g(t,θ) = ⟨σ₊(t)σ₋(t+θ)⟩` and
//! `G(t,θ) = ⟨σ₊(t)σ₊(t+θ)σ₋(t+θ)σ₋(t)⟩`, each obtained by quantum regression.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bloch::BlochVector;
use crate::error::{invalid, Error, Result};
use crate::regression::{accumulate_rows, pairwise_sum, trapezoid_weight, Dynamics};
use crate::spectrum::{EmitterConfig, Metadata};

/// `ρσ₊`: seeds `g(t,θ)`, read back from the `eg` element.
pub fn first_order_seed(rho: &BlochVector) -> BlochVector {
    BlochVector {
        rho_eg: rho.rho_ee,
        rho_gg: rho.rho_ge,
        ..BlochVector::ZERO
    }
}

/// `σ₋ρσ₊`: seeds `G(t,θ)`, read back from the `ee` element.
pub fn second_order_seed(rho: &BlochVector) -> BlochVector {
    BlochVector {
        rho_gg: rho.rho_ee,
        ..BlochVector::ZERO
    }
}

/// Single-emitter correlators on the simulation grid.
///
/// `g2auto` is already integrated over `t` (trapezoid, `t ≤ T - θ`); the
/// first-order correlator is regenerated row by row when needed because the
/// beam-splitter combination multiplies rows of two different emitters.
#[derive(Debug, Clone)]
pub struct EmitterCorrelators {
    dynamics: Dynamics,
    pub n_of_t: Vec<f64>,
    pub g2auto: Vec<f64>,
    pub metadata: Metadata,
}

impl EmitterCorrelators {
    pub fn from_dynamics(dynamics: Dynamics, metadata: Metadata) -> Self {
        let n_of_t = dynamics.trajectory().iter().map(|s| s.rho_ee.re).collect();
        let g2auto = dynamics.accumulate(second_order_seed, |x| x[0].re);
        Self {
            dynamics,
            n_of_t,
            g2auto,
            metadata,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dynamics.dt()
    }

    pub fn n_steps(&self) -> usize {
        self.dynamics.n_steps()
    }

    /// `g(t_i, θ_m)` for `m = 0..=n-i` written into `row`.
    pub fn g1_row(&self, i: usize, row: &mut [C64]) {
        self.dynamics
            .regression_row(i, first_order_seed, |x| x[3], row);
    }

    /// `G(t_i, θ_m)` for `m = 0..=n-i` written into `row`.
    pub fn g2auto_row(&self, i: usize, row: &mut [f64]) {
        self.dynamics
            .regression_row(i, second_order_seed, |x| x[0].re, row);
    }
}

/// Correlators of one emitter for noise realization `stream` of `seed`.
pub fn emitter_correlators(
    config: &EmitterConfig,
    seed: u64,
    stream: u64,
) -> Result<EmitterCorrelators> {
    let dynamics = config.dynamics(seed, stream)?;
    let mut meta = config.metadata();
    meta.insert("seed".into(), seed.to_string());
    meta.insert("stream".into(), stream.to_string());
    Ok(EmitterCorrelators::from_dynamics(dynamics, meta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpiCurve {
    pub theta_grid: Vec<f64>,
    pub g2_34: Vec<f64>,
    pub metadata: Metadata,
}

impl TpiCurve {
    pub fn max(&self) -> f64 {
        self.g2_34.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombineOptions {
    /// Include the two-photon interference term. Switching it off gives the
    /// distinguishable-photon background.
    pub interference: bool,
    /// Divide by the distinguishable-photon background `¼ ∫ (n1 n2' + n2 n1') dt`,
    /// so 1 means no interference and 0 perfect coalescence.
    pub normalized: bool,
}

impl Default for CombineOptions {
    fn default() -> Self {
        Self {
            interference: true,
            normalized: false,
        }
    }
}

/// Raw `(g2_34, background)` integrals per lag.
struct Combined {
    raw: Vec<f64>,
    background: Vec<f64>,
}

fn combine(
    e1: &EmitterCorrelators,
    e2: &EmitterCorrelators,
    interference: bool,
) -> Result<Combined> {
    if e1.n_steps() != e2.n_steps() || e1.dt() != e2.dt() {
        return Err(Error::GridMismatch(format!(
            "emitter grids differ: {} steps of {} vs {} steps of {}",
            e1.n_steps(),
            e1.dt(),
            e2.n_steps(),
            e2.dt()
        )));
    }
    let n = e1.n_steps();
    let dt = e1.dt();
    let (n1, n2) = (&e1.n_of_t, &e2.n_of_t);

    let cross: Vec<f64> = accumulate_rows(
        n,
        || (),
        |i, acc: &mut [f64], _| {
            for (m, a) in acc.iter_mut().enumerate().take(n - i + 1) {
                *a += (n1[i] * n2[i + m] + n2[i] * n1[i + m]) * (trapezoid_weight(i, m, n) * dt);
            }
        },
    );

    let interfere: Vec<f64> = if interference {
        accumulate_rows(
            n,
            || (vec![C64::default(); n + 1], vec![C64::default(); n + 1]),
            |i, acc: &mut [f64], (r1, r2): &mut (Vec<C64>, Vec<C64>)| {
                e1.g1_row(i, r1);
                e2.g1_row(i, r2);
                for (m, a) in acc.iter_mut().enumerate().take(n - i + 1) {
                    let (a1, a2) = (r1[m], r2[m]);
                    *a += (a1.re * a2.re + a1.im * a2.im) * (trapezoid_weight(i, m, n) * dt);
                }
            },
        )
    } else {
        vec![0.0; n + 1]
    };

    let raw = (0..=n)
        .map(|m| 0.25 * ((e1.g2auto[m] + e2.g2auto[m]) + cross[m] - 2.0 * interfere[m]))
        .collect();
    let background = cross.iter().map(|c| 0.25 * c).collect();
    Ok(Combined { raw, background })
}

fn normalize(raw: &[f64], background: &[f64]) -> Vec<f64> {
    raw.iter()
        .zip(background)
        .map(|(r, b)| if *b > 0.0 { r / b } else { 0.0 })
        .collect()
}

fn curve_metadata(
    e1: &EmitterCorrelators,
    e2: &EmitterCorrelators,
    opts: CombineOptions,
) -> Metadata {
    let mut meta = Metadata::new();
    for (tag, e) in [("emitter1", e1), ("emitter2", e2)] {
        for (k, v) in &e.metadata {
            meta.insert(format!("{tag}.{k}"), v.clone());
        }
    }
    meta.insert("interference".into(), opts.interference.to_string());
    meta.insert("normalized".into(), opts.normalized.to_string());
    meta
}

/// `g2_34(θ) = ∫₀^{T-θ} G34(t, θ) dt` for one pair of emitter realizations.
pub fn hom_cross_correlation(e1: &EmitterCorrelators, e2: &EmitterCorrelators) -> Result<TpiCurve> {
    hom_cross_correlation_with(e1, e2, CombineOptions::default())
}

pub fn hom_cross_correlation_with(
    e1: &EmitterCorrelators,
    e2: &EmitterCorrelators,
    opts: CombineOptions,
) -> Result<TpiCurve> {
    let c = combine(e1, e2, opts.interference)?;
    let dt = e1.dt();
    let g2_34 = if opts.normalized {
        normalize(&c.raw, &c.background)
    } else {
        c.raw
    };
    Ok(TpiCurve {
        theta_grid: (0..g2_34.len()).map(|m| m as f64 * dt).collect(),
        g2_34,
        metadata: curve_metadata(e1, e2, opts),
    })
}

/// Cross-correlation averaged over `n_realizations` independent pairs of
/// noise realizations. Pair `k` uses streams `2k` and `2k+1` of `base_seed`.
pub fn averaged_hom(
    c1: &EmitterConfig,
    c2: &EmitterConfig,
    n_realizations: usize,
    base_seed: u64,
    opts: CombineOptions,
) -> Result<TpiCurve> {
    if n_realizations == 0 {
        return Err(invalid("realizations", "must be at least 1"));
    }
    let runs: Vec<(Vec<f64>, Vec<f64>, Metadata)> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|k| {
            let e1 = emitter_correlators(c1, base_seed, 2 * k)?;
            let e2 = emitter_correlators(c2, base_seed, 2 * k + 1)?;
            let c = combine(&e1, &e2, opts.interference)?;
            let meta = if k == 0 {
                curve_metadata(&e1, &e2, opts)
            } else {
                Metadata::new()
            };
            Ok((c.raw, c.background, meta))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / n_realizations as f64;
    let raws: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let raw: Vec<f64> = pairwise_sum(&raws).into_iter().map(|v| v * scale).collect();
    let g2_34 = if opts.normalized {
        let bgs: Vec<Vec<f64>> = runs.iter().map(|r| r.1.clone()).collect();
        let bg: Vec<f64> = pairwise_sum(&bgs).into_iter().map(|v| v * scale).collect();
        normalize(&raw, &bg)
    } else {
        raw
    };
    let dt = c1.grid.dt();
    let mut metadata = runs.into_iter().next().map(|r| r.2).unwrap_or_default();
    metadata.retain(|k, _| !k.ends_with(".stream"));
    metadata.insert("realizations".into(), n_realizations.to_string());
    Ok(TpiCurve {
        theta_grid: (0..g2_34.len()).map(|m| m as f64 * dt).collect(),
        g2_34,
        metadata,
    })
}

/// Contiguous runs of lags where `g2_34 ≤ threshold · max(g2_34)`, as
/// `(first θ, last θ)` pairs.
///
/// With an all-zero curve every point qualifies, so callers should choose a
/// threshold relative to a curve with non-zero maximum.
pub fn find_zero_intervals(curve: &TpiCurve, threshold: f64) -> Vec<(f64, f64)> {
    let cut = threshold * curve.max();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (k, &v) in curve.g2_34.iter().enumerate() {
        match (v <= cut, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((curve.theta_grid[s], curve.theta_grid[k - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((curve.theta_grid[s], *curve.theta_grid.last().unwrap()));
    }
    out
}

/// Midpoints of [`find_zero_intervals`].
pub fn find_zeros(curve: &TpiCurve, threshold: f64) -> Vec<f64> {
    find_zero_intervals(curve, threshold)
        .into_iter()
        .map(|(a, b)| 0.5 * (a + b))
        .collect()
}
