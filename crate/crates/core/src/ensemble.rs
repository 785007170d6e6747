//! Summed emission spectrum of a dilute ensemble of emitters, each with its
//! own static detuning drawn once from a Gaussian.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bloch::{BlochVector, PhysicsParams, SimGrid};
use crate::error::{invalid, Error, Result};
use crate::noise::static_sample;
use crate::regression::{pairwise_sum, Dynamics};
use crate::spectrum::{
    correlation_from_dynamics, emission_spectrum, CorrelationAccumulator, Spectrum,
};

/// Default ensemble size.
pub const DEFAULT_EMITTERS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n_emitters: usize,
    pub detuning_mean: f64,
    pub detuning_sigma: f64,
    pub seed: u64,
    pub physics: PhysicsParams,
    /// Pulse schedule (if any) lives in the grid.
    pub grid: SimGrid,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_emitters == 0 {
            return Err(invalid("n_emitters", "must be at least 1"));
        }
        if !(self.detuning_sigma >= 0.0) {
            return Err(invalid("detuning_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// The static detunings, one per emitter.
    pub fn detunings(&self) -> Vec<f64> {
        static_sample(
            self.detuning_mean,
            self.detuning_sigma,
            self.seed,
            self.n_emitters,
        )
    }
}

/// Summed `θ`-correlation of emitters with the given static detunings.
pub fn ensemble_correlation(
    detunings: &[f64],
    grid: &SimGrid,
    physics: &PhysicsParams,
) -> Result<CorrelationAccumulator> {
    if detunings.is_empty() {
        return Err(invalid("n_emitters", "must be at least 1"));
    }
    let n = grid.n_steps();
    let per_emitter: Vec<Vec<C64>> = detunings
        .par_iter()
        .map(|&d| {
            let dynamics = Dynamics::new(&BlochVector::excited(), grid, &vec![d; n], physics)?;
            Ok(correlation_from_dynamics(&dynamics).c_of_theta)
        })
        .collect::<Result<_>>()?;
    let c_of_theta = pairwise_sum(&per_emitter);
    Ok(CorrelationAccumulator {
        theta_grid: (0..=n).map(|j| j as f64 * grid.dt()).collect(),
        c_of_theta,
    })
}

/// Unweighted sum of the single-emitter spectra for the given detunings.
pub fn spectrum_for_detunings(
    detunings: &[f64],
    grid: &SimGrid,
    physics: &PhysicsParams,
    omega_grid: &[f64],
) -> Result<Spectrum> {
    emission_spectrum(&ensemble_correlation(detunings, grid, physics)?, omega_grid)
}

pub fn ensemble_spectrum(spec: &EnsembleSpec, omega_grid: &[f64]) -> Result<Spectrum> {
    spec.validate()?;
    let mut s = spectrum_for_detunings(&spec.detunings(), &spec.grid, &spec.physics, omega_grid)?;
    let m = &mut s.metadata;
    m.insert("n_emitters".into(), spec.n_emitters.to_string());
    m.insert("detuning_mean".into(), spec.detuning_mean.to_string());
    m.insert("detuning_sigma".into(), spec.detuning_sigma.to_string());
    m.insert("seed".into(), spec.seed.to_string());
    m.insert("gamma".into(), spec.physics.gamma.to_string());
    m.insert("dt".into(), spec.grid.dt().to_string());
    m.insert("t_total".into(), spec.grid.duration().to_string());
    if let Some(p) = spec.grid.pulses() {
        m.insert("tau".into(), p.tau.to_string());
        m.insert("omega".into(), p.omega.to_string());
        m.insert("n_pulses".into(), p.n_pulses.to_string());
    }
    Ok(s)
}

/// `a` scaled so that its maximum equals the maximum of `b`.
pub fn rescale_to_match_peak(a: &Spectrum, b: &Spectrum) -> Result<Spectrum> {
    let (ma, mb) = (a.max(), b.max());
    if !(mb > 0.0) || !(ma > 0.0) {
        return Err(Error::Degenerate(format!(
            "cannot rescale: maxima are {ma} and {mb}"
        )));
    }
    let k = mb / ma;
    Ok(Spectrum {
        omega_grid: a.omega_grid.clone(),
        p: a.p.iter().map(|v| v * k).collect(),
        metadata: a.metadata.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Metadata;

    fn spec(p: Vec<f64>) -> Spectrum {
        Spectrum {
            omega_grid: (0..p.len()).map(|k| k as f64).collect(),
            p,
            metadata: Metadata::new(),
        }
    }

    #[test]
    fn rescale_cases() {
        let a = spec(vec![0.0, 2.0, 1.0]);
        assert_eq!(rescale_to_match_peak(&a, &a).unwrap(), a);
        let b = spec(vec![6.0, 3.0, 0.0]);
        assert_eq!(
            rescale_to_match_peak(&a, &b).unwrap().p,
            vec![0.0, 6.0, 3.0]
        );
        assert!(rescale_to_match_peak(&a, &spec(vec![0.0; 3])).is_err());
    }

    #[test]
    fn rejects_empty_ensemble() {
        let s = EnsembleSpec {
            n_emitters: 0,
            detuning_mean: 0.0,
            detuning_sigma: 1.0,
            seed: 0,
            physics: PhysicsParams::default(),
            grid: SimGrid::free(1e-3, 10).unwrap(),
        };
        assert!(ensemble_spectrum(&s, &[0.0, 1.0]).is_err());
    }
}
