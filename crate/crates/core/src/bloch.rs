//! Optical Bloch equations for a driven two-level emitter.
//!
//! The state is stored as the four density-matrix elements
//! `(rho_ee, rho_gg, rho_ge, rho_eg)` and evolves under a 4x4 complex
//! generator that is constant within each time slice. The same linear
//! evolution is reused for operator-seeded matrices in the regression sweeps,
//! so nothing here assumes a trace-one Hermitian state.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};

pub type Mat4 = [[C64; 4]; 4];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Default spontaneous emission rate; frequencies are then in units of Γ/2.
pub const DEFAULT_GAMMA: f64 = 2.0;

/// Slices per pulse period used when the caller does not pick a resolution.
pub const DEFAULT_SLICES_PER_PERIOD: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    pub gamma: f64,
}

impl PhysicsParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub rho_ee: C64,
    pub rho_gg: C64,
    pub rho_ge: C64,
    pub rho_eg: C64,
}

impl BlochVector {
    pub const ZERO: Self = Self {
        rho_ee: ZERO,
        rho_gg: ZERO,
        rho_ge: ZERO,
        rho_eg: ZERO,
    };

    pub fn excited() -> Self {
        Self {
            rho_ee: ONE,
            ..Self::ZERO
        }
    }

    pub fn ground() -> Self {
        Self {
            rho_gg: ONE,
            ..Self::ZERO
        }
    }

    pub fn from_array(a: [C64; 4]) -> Self {
        Self {
            rho_ee: a[0],
            rho_gg: a[1],
            rho_ge: a[2],
            rho_eg: a[3],
        }
    }

    pub fn to_array(self) -> [C64; 4] {
        [self.rho_ee, self.rho_gg, self.rho_ge, self.rho_eg]
    }

    pub fn trace(&self) -> C64 {
        self.rho_ee + self.rho_gg
    }

    /// Largest deviation from `rho_eg = conj(rho_ge)` and real populations.
    pub fn hermiticity_defect(&self) -> f64 {
        (self.rho_eg - self.rho_ge.conj())
            .norm()
            .max(self.rho_ee.im.abs())
            .max(self.rho_gg.im.abs())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for BlochVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            rho_ee: self.rho_ee + o.rho_ee,
            rho_gg: self.rho_gg + o.rho_gg,
            rho_ge: self.rho_ge + o.rho_ge,
            rho_eg: self.rho_eg + o.rho_eg,
        }
    }
}

impl Sub for BlochVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            rho_ee: self.rho_ee - o.rho_ee,
            rho_gg: self.rho_gg - o.rho_gg,
            rho_ge: self.rho_ge - o.rho_ge,
            rho_eg: self.rho_eg - o.rho_eg,
        }
    }
}

impl Mul<C64> for BlochVector {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        Self {
            rho_ee: self.rho_ee * s,
            rho_gg: self.rho_gg * s,
            rho_ge: self.rho_ge * s,
            rho_eg: self.rho_eg * s,
        }
    }
}

#[inline(always)]
pub fn mat_vec(m: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for (o, row) in out.iter_mut().zip(m.iter()) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn identity() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

/// Generator of the optical Bloch equations in the rotating frame, acting on
/// `(rho_ee, rho_gg, rho_ge, rho_eg)`.
pub fn bloch_generator(delta: f64, omega_x: f64, params: &PhysicsParams) -> Mat4 {
    let g = params.gamma;
    let h = C64::new(0.0, omega_x / 2.0);
    [
        [C64::from(-g), ZERO, -h, h],
        [C64::from(g), ZERO, h, -h],
        [-h, h, C64::new(-g / 2.0, delta), ZERO],
        [h, -h, ZERO, C64::new(-g / 2.0, -delta)],
    ]
}

/// One classical fourth-order Runge-Kutta step for `dx/dt = A x` with `A` held
/// constant over the step.
pub fn step_rk4(state: &BlochVector, generator: &Mat4, dt: f64) -> BlochVector {
    let x = state.to_array();
    let k1 = mat_vec(generator, &x);
    let k2 = mat_vec(generator, &axpy(&x, dt / 2.0, &k1));
    let k3 = mat_vec(generator, &axpy(&x, dt / 2.0, &k2));
    let k4 = mat_vec(generator, &axpy(&x, dt, &k3));
    let mut out = [ZERO; 4];
    for i in 0..4 {
        out[i] = x[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
    }
    BlochVector::from_array(out)
}

fn axpy(x: &[C64; 4], a: f64, y: &[C64; 4]) -> [C64; 4] {
    [
        x[0] + y[0] * a,
        x[1] + y[1] * a,
        x[2] + y[2] * a,
        x[3] + y[3] * a,
    ]
}

/// The linear map performed by one RK4 step of a constant generator:
/// `I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24`.
///
/// Applying this matrix is algebraically identical to [`step_rk4`] and costs a
/// single mat-vec, which is what the O(N²) regression sweeps run on.
pub fn rk4_transfer(generator: &Mat4, dt: f64) -> Mat4 {
    let mut ha = *generator;
    for row in ha.iter_mut() {
        for v in row.iter_mut() {
            *v *= dt;
        }
    }
    // Horner: I + hA(I + hA/2(I + hA/3(I + hA/4)))
    let mut acc = identity();
    for k in [4.0, 3.0, 2.0, 1.0] {
        let mut next = mat_mul(&ha, &acc);
        for (i, row) in next.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v /= k;
            }
            row[i] += ONE;
        }
        acc = next;
    }
    acc
}

/// Periodic sequence of π pulses: free evolution for `tau - t_pi`, then a
/// resonant drive of Rabi frequency `omega` for `t_pi = π / omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSequence {
    pub tau: f64,
    pub omega: f64,
    pub n_pulses: usize,
}

impl PulseSequence {
    pub fn new(tau: f64, omega: f64, n_pulses: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive, got {tau}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be positive, got {omega}")));
        }
        if n_pulses == 0 {
            return Err(invalid("n_pulses", "must be at least 1"));
        }
        let t_pi = PI / omega;
        if t_pi >= tau {
            return Err(invalid(
                "omega",
                format!(
                    "pulse width t_pi = pi/omega = {t_pi:.6} does not fit in period tau = {tau}"
                ),
            ));
        }
        Ok(Self {
            tau,
            omega,
            n_pulses,
        })
    }

    pub fn t_pi(&self) -> f64 {
        PI / self.omega
    }

    pub fn duration(&self) -> f64 {
        self.tau * self.n_pulses as f64
    }
}

/// Uniform time discretisation plus the per-slice drive schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    dt: f64,
    n_steps: usize,
    pulses: Option<PulseSequence>,
    n_slices_per_period: Option<usize>,
    pulse_slices: usize,
    rabi: f64,
}

impl SimGrid {
    /// Grid for a pulsed run with `n_slices_per_period` slices in each period.
    ///
    /// The pulse width is rounded to whole slices and the Rabi frequency is
    /// re-adjusted so that each pulse is still an exact π rotation.
    pub fn pulsed(pulses: &PulseSequence, n_slices_per_period: usize) -> Result<Self> {
        if n_slices_per_period == 0 {
            return Err(invalid("n_slices", "must be at least 1"));
        }
        let dt = pulses.tau / n_slices_per_period as f64;
        let t_pi = pulses.t_pi();
        if dt > t_pi / 20.0 {
            return Err(invalid(
                "n_slices",
                format!(
                    "dt = {dt:.3e} does not resolve the pulse (need dt <= t_pi/20 = {:.3e})",
                    t_pi / 20.0
                ),
            ));
        }
        let pulse_slices = ((t_pi / dt).round() as usize).max(1);
        if pulse_slices >= n_slices_per_period {
            return Err(invalid(
                "omega",
                "rounded pulse window fills the whole period",
            ));
        }
        Ok(Self {
            dt,
            n_steps: n_slices_per_period * pulses.n_pulses,
            pulses: Some(*pulses),
            n_slices_per_period: Some(n_slices_per_period),
            pulse_slices,
            rabi: PI / (pulse_slices as f64 * dt),
        })
    }

    /// Pulsed grid at the default resolution of `tau/300`, refined further if
    /// the pulse or the noise correlation time would otherwise be unresolved.
    pub fn default_pulsed(pulses: &PulseSequence, tau_c: Option<f64>) -> Result<Self> {
        let mut limit = pulses.t_pi() / 20.0;
        if let Some(tc) = tau_c {
            limit = limit.min(tc / 3.0);
        }
        let needed = (pulses.tau / limit).ceil() as usize;
        Self::pulsed(pulses, DEFAULT_SLICES_PER_PERIOD.max(needed))
    }

    /// Grid with no drive at all.
    pub fn free(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        Ok(Self {
            dt,
            n_steps,
            pulses: None,
            n_slices_per_period: None,
            pulse_slices: 0,
            rabi: 0.0,
        })
    }

    /// Rejects grids too coarse for a detuning process with correlation time `tau_c`.
    pub fn check_noise_resolution(&self, tau_c: f64) -> Result<()> {
        if self.dt > tau_c / 3.0 * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!(
                    "dt = {:.3e} does not resolve the noise correlation time (need dt <= tau_c/3 = {:.3e})",
                    self.dt,
                    tau_c / 3.0
                ),
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn pulses(&self) -> Option<&PulseSequence> {
        self.pulses.as_ref()
    }

    pub fn n_slices_per_period(&self) -> Option<usize> {
        self.n_slices_per_period
    }

    /// Number of slices occupied by each pulse.
    pub fn pulse_slices(&self) -> usize {
        self.pulse_slices
    }

    /// Rabi frequency actually applied during pulse slices.
    pub fn effective_rabi(&self) -> f64 {
        self.rabi
    }

    /// Whether slice `k` (covering `[k dt, (k+1) dt)`) lies inside a pulse.
    /// Each pulse occupies the last slices of its period.
    pub fn pulse_on(&self, k: usize) -> bool {
        match self.n_slices_per_period {
            Some(nt) => k % nt >= nt - self.pulse_slices,
            None => false,
        }
    }

    pub fn drive(&self, k: usize) -> f64 {
        if self.pulse_on(k) {
            self.rabi
        } else {
            0.0
        }
    }

    /// Times of the slice boundaries `0, dt, ..., n_steps dt`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt).collect()
    }
}

/// Per-slice RK4 transfer matrices for one detuning realization.
#[derive(Debug, Clone)]
pub struct Propagators {
    dt: f64,
    maps: Vec<Mat4>,
}

impl Propagators {
    pub fn new(grid: &SimGrid, detuning: &[f64], params: &PhysicsParams) -> Result<Self> {
        if detuning.len() != grid.n_steps() {
            return Err(Error::TraceLength {
                expected: grid.n_steps(),
                got: detuning.len(),
            });
        }
        let maps = detuning
            .iter()
            .enumerate()
            .map(|(k, &d)| rk4_transfer(&bloch_generator(d, grid.drive(k), params), grid.dt()))
            .collect();
        Ok(Self {
            dt: grid.dt(),
            maps,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.maps.len()
    }

    #[inline]
    pub fn map(&self, k: usize) -> &Mat4 {
        &self.maps[k]
    }

    /// Evolves `state` from slice boundary `start` to the end of the grid,
    /// calling `visit(offset, &state)` at every boundary (offset 0 is the seed).
    #[inline]
    pub fn sweep_from(
        &self,
        start: usize,
        state: [C64; 4],
        mut visit: impl FnMut(usize, &[C64; 4]),
    ) {
        let mut x = state;
        visit(0, &x);
        for (m, map) in self.maps[start..].iter().enumerate() {
            x = mat_vec(map, &x);
            visit(m + 1, &x);
        }
    }

    pub fn trajectory(&self, initial: &BlochVector) -> Vec<BlochVector> {
        let mut out = Vec::with_capacity(self.maps.len() + 1);
        self.sweep_from(0, initial.to_array(), |_, x| {
            out.push(BlochVector::from_array(*x))
        });
        out
    }
}

/// Evolves `state` across the whole grid, returning the state at every slice
/// boundary (`trajectory[0]` is the input).
pub fn propagate(
    state: &BlochVector,
    grid: &SimGrid,
    detuning: &[f64],
    params: &PhysicsParams,
) -> Result<Vec<BlochVector>> {
    Ok(Propagators::new(grid, detuning, params)?.trajectory(state))
}
