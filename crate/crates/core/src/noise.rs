//! Stationary Gaussian detuning noise.
//!
//! The detuning follows an Ornstein-Uhlenbeck process sampled with its exact
//! discrete update, so any step size reproduces the stationary mean, variance
//! and exponential correlation time. Random numbers come from ChaCha8 with one
//! stream per realization (`set_stream`), and normal variates from
//! `rand_distr::StandardNormal` (ziggurat). Both choices are part of the output
//! format: changing either changes every golden file.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProcess {
    pub delta0: f64,
    pub sigma: f64,
    pub tau_c: f64,
    pub seed: u64,
}

impl NoiseProcess {
    pub fn new(delta0: f64, sigma: f64, tau_c: f64, seed: u64) -> Result<Self> {
        if !delta0.is_finite() {
            return Err(invalid("delta0", "must be finite"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(
                "sigma",
                format!("must be non-negative, got {sigma}"),
            ));
        }
        if !(tau_c > 0.0) {
            return Err(invalid("tau_c", format!("must be positive, got {tau_c}")));
        }
        Ok(Self {
            delta0,
            sigma,
            tau_c,
            seed,
        })
    }

    /// A noiseless emitter with fixed detuning.
    pub fn fixed(delta0: f64) -> Self {
        Self {
            delta0,
            sigma: 0.0,
            tau_c: 1.0,
            seed: 0,
        }
    }

    pub fn is_static(&self) -> bool {
        self.sigma == 0.0
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Coefficients of the exact one-step OU transition
/// `x' = delta0 + (x - delta0) * decay + diffusion * xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuUpdate {
    pub delta0: f64,
    pub decay: f64,
    pub diffusion: f64,
}

impl OuUpdate {
    pub fn new(process: &NoiseProcess, dt: f64) -> Self {
        let decay = (-dt / process.tau_c).exp();
        // 1 - exp(-2dt/tau_c) without cancellation for tiny dt/tau_c
        let var_frac = -(-2.0 * dt / process.tau_c).exp_m1();
        Self {
            delta0: process.delta0,
            decay,
            diffusion: process.sigma * var_frac.sqrt(),
        }
    }

    pub fn conditional_mean(&self, x: f64) -> f64 {
        self.delta0 + (x - self.delta0) * self.decay
    }

    pub fn conditional_variance(&self) -> f64 {
        self.diffusion * self.diffusion
    }
}

/// OU detuning trace on `n` grid points spaced by `dt`, stream 0 of the seed.
pub fn ou_trace(process: &NoiseProcess, dt: f64, n: usize) -> Result<Vec<f64>> {
    ou_trace_stream(process, 0, dt, n)
}

/// OU detuning trace drawn from stream `stream` of `process.seed`.
///
/// The first sample comes from the stationary law `N(delta0, sigma²)`. The
/// path is generated in units of `sigma` around `delta0`, so traces that share
/// a seed and stream differ only by that affine map.
pub fn ou_trace_stream(process: &NoiseProcess, stream: u64, dt: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n", "trace length must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if process.is_static() {
        return Ok(vec![process.delta0; n]);
    }
    let unit = OuUpdate::new(
        &NoiseProcess {
            delta0: 0.0,
            sigma: 1.0,
            ..*process
        },
        dt,
    );
    let mut rng = stream_rng(process.seed, stream);
    let mut z: f64 = StandardNormal.sample(&mut rng);
    let mut out = Vec::with_capacity(n);
    out.push(process.delta0 + process.sigma * z);
    for _ in 1..n {
        let xi: f64 = StandardNormal.sample(&mut rng);
        z = unit.conditional_mean(z) + unit.diffusion * xi;
        out.push(process.delta0 + process.sigma * z);
    }
    Ok(out)
}

/// `n` independent draws from `N(mean, sigma²)`, stream 0 of `seed`.
pub fn static_sample(mean: f64, sigma: f64, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|_| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            mean + sigma * xi
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// Zero variance; no correlation time is defined.
    Degenerate,
    /// Correlations vanish within one step; the reported time is an upper bound of `dt`.
    ResolutionLimited,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStats {
    pub mean: f64,
    pub std: f64,
    pub tau_c: Option<f64>,
    pub fit: FitStatus,
}

/// Sample mean, standard deviation and a least-squares exponential fit of the
/// autocorrelation time.
pub fn noise_stats(trace: &[f64], dt: f64) -> Result<NoiseStats> {
    let n = trace.len();
    if n < 100 {
        return Err(invalid(
            "trace",
            format!("need at least 100 samples, got {n}"),
        ));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let std = (c0 * n as f64 / (n - 1) as f64).sqrt();

    if c0 <= f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return Ok(NoiseStats {
            mean,
            std,
            tau_c: None,
            fit: FitStatus::Degenerate,
        });
    }

    let autocorr = |k: usize| -> f64 {
        let s: f64 = centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum();
        s / (n - k) as f64 / c0
    };

    let r1 = autocorr(1);
    let threshold = (-1.0f64).exp();
    if r1 <= threshold {
        return Ok(NoiseStats {
            mean,
            std,
            tau_c: Some(-dt / r1.max(1e-12).ln()),
            fit: FitStatus::ResolutionLimited,
        });
    }

    // first crossing of 1/e gives the starting estimate
    let max_lag = n / 10;
    let mut r = vec![1.0, r1];
    let mut crossing = None;
    for k in 2..=max_lag {
        let rk = autocorr(k);
        r.push(rk);
        if rk <= threshold {
            let prev = r[k - 1];
            crossing = Some((k - 1) as f64 + (prev - threshold) / (prev - rk));
            break;
        }
    }
    let Some(cross) = crossing else {
        return Ok(NoiseStats {
            mean,
            std,
            tau_c: None,
            fit: FitStatus::NotConverged,
        });
    };
    let guess = cross * dt;
    let n_lags = ((5.0 * cross).ceil() as usize).min(max_lag).max(2);
    while r.len() <= n_lags {
        r.push(autocorr(r.len()));
    }

    // Gauss-Newton on the decay rate of exp(-lag / tau_c)
    let mut rate = 1.0 / guess;
    let mut fit = FitStatus::NotConverged;
    for _ in 0..100 {
        let (mut jtj, mut jtr) = (0.0, 0.0);
        for (k, rk) in r.iter().enumerate().take(n_lags + 1).skip(1) {
            let lag = k as f64 * dt;
            let model = (-rate * lag).exp();
            let jac = -lag * model;
            jtj += jac * jac;
            jtr += jac * (rk - model);
        }
        let step = jtr / jtj;
        rate = (rate + step).max(rate * 0.1);
        if (step / rate).abs() < 1e-10 {
            fit = FitStatus::Converged;
            break;
        }
    }
    Ok(NoiseStats {
        mean,
        std,
        tau_c: Some(1.0 / rate),
        fit,
    })
}
