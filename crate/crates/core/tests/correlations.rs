mod common;

use num_complex::Complex64 as C64;
use pulsed_emitter::bloch::{BlochVector, PhysicsParams, PulseSequence, SimGrid};
use pulsed_emitter::noise::NoiseProcess;
use pulsed_emitter::regression::Dynamics;
use pulsed_emitter::spectrum::{
    averaged_spectrum, emission_spectrum, omega_grid, regression_seed_sigma_minus,
    two_time_correlation, EmitterConfig,
};
use pulsed_emitter::tpi::{
    averaged_hom, emitter_correlators, hom_cross_correlation, hom_cross_correlation_with,
    CombineOptions,
};

fn free_dynamics(delta: f64, dt: f64, n: usize) -> Dynamics {
    let grid = SimGrid::free(dt, n).unwrap();
    Dynamics::new(
        &BlochVector::excited(),
        &grid,
        &vec![delta; n],
        &PhysicsParams::default(),
    )
    .unwrap()
}

fn emitter(delta0: f64, sigma: f64, grid: SimGrid) -> EmitterConfig {
    EmitterConfig::new(
        PhysicsParams::default(),
        grid,
        NoiseProcess::new(delta0, sigma, 0.03, 11).unwrap(),
    )
    .unwrap()
}

#[test]
fn free_decay_regression_matches_closed_form() {
    let (dt, n) = (1e-3, 2000);
    let dynamics = free_dynamics(0.0, dt, n);
    let mut row = vec![C64::default(); n + 1];
    for &i in &[0, 1, 500, 1234, 1999] {
        dynamics.regression_row(i, regression_seed_sigma_minus, |x| x[2], &mut row);
        for (m, v) in row.iter().enumerate().take(n - i + 1) {
            let (t, theta) = (i as f64 * dt, m as f64 * dt);
            let exact = (-2.0 * t).exp() * (-theta).exp();
            assert!((v - exact).norm() < 1e-6, "t={t} theta={theta}: {v}");
        }
    }
}

#[test]
fn zero_lag_correlation_is_integrated_population() {
    let (dt, n) = (1e-3, 3000);
    let grid = SimGrid::free(dt, n).unwrap();
    let corr = two_time_correlation(
        &BlochVector::excited(),
        &grid,
        &vec![0.0; n],
        &PhysicsParams::default(),
    )
    .unwrap();
    let traj = free_dynamics(0.0, dt, n).trajectory().to_vec();
    let trapz: f64 = (0..=n)
        .map(|k| traj[k].rho_ee.re * if k == 0 || k == n { 0.5 } else { 1.0 })
        .sum::<f64>()
        * dt;
    assert!((corr.c_of_theta[0].re - trapz).abs() < 1e-9);
    let t = n as f64 * dt;
    assert!((corr.c_of_theta[0].re - (1.0 - (-2.0 * t).exp()) / 2.0).abs() < 1e-6);
}

#[test]
fn resonant_spectrum_is_even() {
    let n = 4000;
    let grid = SimGrid::free(1e-3, n).unwrap();
    let corr = two_time_correlation(
        &BlochVector::excited(),
        &grid,
        &vec![0.0; n],
        &PhysicsParams::default(),
    )
    .unwrap();
    let spec = emission_spectrum(&corr, &omega_grid(-20.0, 20.0, 0.05).unwrap()).unwrap();
    let max = spec.max();
    let len = spec.p.len();
    for k in 0..len {
        assert!((spec.p[k] - spec.p[len - 1 - k]).abs() < 1e-6 * max);
    }
    assert!(spec.p.iter().all(|&v| v >= -0.02 * max));
}

#[test]
fn pulsed_spectrum_stays_nearly_positive() {
    let grid = SimGrid::pulsed(&PulseSequence::new(0.3, 35.0, 8).unwrap(), 300).unwrap();
    let spec = averaged_spectrum(
        &emitter(3.0, 4.0, grid),
        8,
        5,
        &omega_grid(-40.0, 40.0, 0.1).unwrap(),
    )
    .unwrap();
    let max = spec.max();
    assert!(spec.p.iter().all(|&v| v >= -0.02 * max));
}

fn lorentzian_half_width(t_total: f64) -> f64 {
    let n = (t_total / 1e-3).round() as usize;
    let grid = SimGrid::free(1e-3, n).unwrap();
    let corr = two_time_correlation(
        &BlochVector::excited(),
        &grid,
        &vec![0.0; n],
        &PhysicsParams::default(),
    )
    .unwrap();
    let spec = emission_spectrum(&corr, &omega_grid(-10.0, 10.0, 0.01).unwrap()).unwrap();
    spec.fwhm_at(spec.argmax()).unwrap() / 2.0
}

#[test]
fn half_width_is_insensitive_to_horizon() {
    let a = lorentzian_half_width(6.0);
    let b = lorentzian_half_width(12.0);
    assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
}

#[test]
fn spectrum_integrates_to_zero_lag_correlation() {
    let n = 6000;
    let grid = SimGrid::free(1e-3, n).unwrap();
    let corr = two_time_correlation(
        &BlochVector::excited(),
        &grid,
        &vec![0.0; n],
        &PhysicsParams::default(),
    )
    .unwrap();
    let spec = emission_spectrum(&corr, &omega_grid(-200.0, 200.0, 0.05).unwrap()).unwrap();
    let integral: f64 = spec.p.windows(2).map(|w| 0.5 * (w[0] + w[1]) * 0.05).sum();
    let c0 = corr.c_of_theta[0].re;
    assert!((integral / (2.0 * std::f64::consts::PI) - c0).abs() < 0.05 * c0);
}

#[test]
fn averaging_degenerate_cases() {
    let grid = SimGrid::pulsed(&PulseSequence::new(0.3, 35.0, 2).unwrap(), 300).unwrap();
    let omegas = omega_grid(-20.0, 20.0, 0.5).unwrap();
    // static detuning: every realization is the same
    let still = emitter(3.0, 0.0, grid.clone());
    let one = averaged_spectrum(&still, 1, 1, &omegas).unwrap();
    let many = averaged_spectrum(&still, 5, 1, &omegas).unwrap();
    for (a, b) in one.p.iter().zip(&many.p) {
        assert!((a - b).abs() < 1e-12 * one.max());
    }
    // one realization equals the single-shot spectrum of stream 0
    let noisy = emitter(3.0, 4.0, grid);
    let avg = averaged_spectrum(&noisy, 1, 9, &omegas).unwrap();
    let trace = noisy.detuning_trace(9, 0).unwrap();
    let single = emission_spectrum(
        &two_time_correlation(&BlochVector::excited(), &noisy.grid, &trace, &noisy.physics)
            .unwrap(),
        &omegas,
    )
    .unwrap();
    assert_eq!(avg.p, single.p);
}

#[test]
fn hom_is_symmetric_and_vanishes_at_zero_delay() {
    let grid = SimGrid::pulsed(&PulseSequence::new(0.3, 35.0, 3).unwrap(), 300).unwrap();
    let e1 = emitter_correlators(&emitter(4.0, 6.0, grid.clone()), 3, 0).unwrap();
    let e2 = emitter_correlators(&emitter(-3.0, 6.0, grid), 3, 1).unwrap();
    let a = hom_cross_correlation(&e1, &e2).unwrap();
    let b = hom_cross_correlation(&e2, &e1).unwrap();
    assert_eq!(a.g2_34, b.g2_34);
    assert!(a.g2_34[0].abs() < 1e-3 * a.max());
    assert!(a.g2_34.iter().all(|&v| v >= -1e-9));
}

/// `g2_34(θ)` of two undriven emitters at static detunings `d1`, `d2`:
/// `e^{-2θ} (1 - cos((d1-d2)θ)) (1 - e^{-4(T-θ)}) / 8`.
fn free_pair_oracle(theta: f64, split: f64, t_total: f64) -> f64 {
    (-2.0 * theta).exp() * (1.0 - (split * theta).cos()) * (1.0 - (-4.0 * (t_total - theta)).exp())
        / 8.0
}

#[test]
fn undriven_pair_beats_at_the_detuning_difference() {
    let (dt, n) = (1e-3, 3200);
    let grid = SimGrid::free(dt, n).unwrap();
    let e1 = emitter_correlators(&emitter(4.0, 0.0, grid.clone()), 0, 0).unwrap();
    let e2 = emitter_correlators(&emitter(-4.0, 0.0, grid), 0, 1).unwrap();
    let curve = hom_cross_correlation(&e1, &e2).unwrap();
    let t = n as f64 * dt;
    let max = curve.max();
    for (theta, v) in curve.theta_grid.iter().zip(&curve.g2_34) {
        assert!(
            (v - free_pair_oracle(*theta, 8.0, t)).abs() < 1e-5 * max,
            "theta {theta}"
        );
    }
    // minima near kπ/4
    for k in 1..=3 {
        let target = k as f64 * std::f64::consts::FRAC_PI_4;
        let lo = ((target - 0.1) / dt) as usize;
        let hi = ((target + 0.1) / dt) as usize;
        let argmin = (lo..=hi)
            .min_by(|&a, &b| curve.g2_34[a].total_cmp(&curve.g2_34[b]))
            .unwrap();
        assert!((curve.theta_grid[argmin] - target).abs() <= dt, "k={k}");
    }
}

#[test]
fn identical_emitters_fully_interfere() {
    let grid = SimGrid::free(1e-3, 2000).unwrap();
    let cfg = emitter(1.5, 0.0, grid);
    let e1 = emitter_correlators(&cfg, 0, 0).unwrap();
    let e2 = emitter_correlators(&cfg, 0, 1).unwrap();
    let curve = hom_cross_correlation(&e1, &e2).unwrap();
    let background = hom_cross_correlation_with(
        &e1,
        &e2,
        CombineOptions {
            interference: false,
            normalized: false,
        },
    )
    .unwrap();
    let scale = background.max();
    assert!(curve.g2_34.iter().all(|v| v.abs() < 1e-12 * scale));
}

#[test]
fn normalized_curve_approaches_one_for_distant_emitters() {
    // detunings far apart: interference averages out and g2_34 → background
    let grid = SimGrid::free(1e-3, 2000).unwrap();
    let c1 = emitter(30.0, 0.0, grid.clone());
    let c2 = emitter(-30.0, 0.0, grid);
    let opts = CombineOptions {
        interference: true,
        normalized: true,
    };
    let curve = averaged_hom(&c1, &c2, 1, 0, opts).unwrap();
    let mid = curve.g2_34[200..1500].iter().sum::<f64>() / 1300.0;
    assert!((mid - 1.0).abs() < 0.02, "{mid}");
}
