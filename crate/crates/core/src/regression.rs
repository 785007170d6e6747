//! Quantum-regression sweeps over the triangular `(t, θ)` domain.
//!
//! For every start slice `i` an operator-seeded matrix built from `ρ(t_i)` is
//! evolved to the end of the grid with the same slice maps as the state
//! itself. Start slices are processed in fixed-size chunks whose partial sums
//! are combined in chunk order, so results do not depend on the worker count.

use std::ops::AddAssign;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bloch::{BlochVector, PhysicsParams, Propagators, SimGrid};
use crate::error::Result;

const CHUNK: usize = 16;

/// Trapezoid weight of start slice `i` for lag `m` on a grid of `n` slices:
/// the `t` integral runs over `[0, T - θ_m]`, i.e. `i = 0..=n-m`.
#[inline]
pub(crate) fn trapezoid_weight(i: usize, m: usize, n: usize) -> f64 {
    let last = n - m;
    if last == 0 {
        0.0
    } else if i == 0 || i == last {
        0.5
    } else {
        1.0
    }
}

/// Trapezoid weights for a uniformly sampled function on `0..=n`.
pub(crate) fn trapezoid_weights(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |j| {
        if n == 0 {
            0.0
        } else if j == 0 || j == n {
            0.5
        } else {
            1.0
        }
    })
}

/// State trajectory plus the slice maps that produced it.
#[derive(Debug, Clone)]
pub struct Dynamics {
    props: Propagators,
    trajectory: Vec<BlochVector>,
}

impl Dynamics {
    pub fn new(
        initial: &BlochVector,
        grid: &SimGrid,
        detuning: &[f64],
        params: &PhysicsParams,
    ) -> Result<Self> {
        let props = Propagators::new(grid, detuning, params)?;
        let trajectory = props.trajectory(initial);
        Ok(Self { props, trajectory })
    }

    pub fn dt(&self) -> f64 {
        self.props.dt()
    }

    pub fn n_steps(&self) -> usize {
        self.props.n_steps()
    }

    pub fn trajectory(&self) -> &[BlochVector] {
        &self.trajectory
    }

    pub fn propagators(&self) -> &Propagators {
        &self.props
    }

    /// Seeds `seed(ρ(t_i))`, evolves it to the end of the grid and writes
    /// `readout` at every lag into `row[0..=n-i]`.
    #[inline]
    pub fn regression_row<T>(
        &self,
        i: usize,
        seed: impl Fn(&BlochVector) -> BlochVector,
        readout: impl Fn(&[C64; 4]) -> T,
        row: &mut [T],
    ) {
        let s = seed(&self.trajectory[i]);
        self.props
            .sweep_from(i, s.to_array(), |m, x| row[m] = readout(x));
    }

    /// `Σ_i w(i, m) · readout(U(t_i + θ_m, t_i) seed(ρ(t_i))) · dt` for every lag `m`.
    pub fn accumulate<T>(
        &self,
        seed: impl Fn(&BlochVector) -> BlochVector + Sync,
        readout: impl Fn(&[C64; 4]) -> T + Sync,
    ) -> Vec<T>
    where
        T: Copy + Default + Send + AddAssign + std::ops::Mul<f64, Output = T>,
    {
        let n = self.n_steps();
        let dt = self.dt();
        accumulate_rows(
            n,
            || vec![T::default(); n + 1],
            |i, acc: &mut [T], row: &mut Vec<T>| {
                self.regression_row(i, &seed, &readout, row);
                for (m, (a, r)) in acc.iter_mut().zip(&row[..=n - i]).enumerate() {
                    *a += *r * (trapezoid_weight(i, m, n) * dt);
                }
            },
        )
    }
}

/// Runs `row_fn(i, acc, scratch)` for every start slice `i = 0..=n` and sums
/// the per-chunk accumulators in chunk order.
pub(crate) fn accumulate_rows<T, S, F>(
    n: usize,
    scratch: impl Fn() -> S + Sync,
    row_fn: F,
) -> Vec<T>
where
    T: Copy + Default + Send + AddAssign,
    F: Fn(usize, &mut [T], &mut S) + Sync,
{
    let n_chunks = (n + 1).div_ceil(CHUNK);
    let partials: Vec<Vec<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![T::default(); n + 1];
            let mut buf = scratch();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n + 1) {
                row_fn(i, &mut acc, &mut buf);
            }
            acc
        })
        .collect();
    let mut total = vec![T::default(); n + 1];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Deterministic pairwise sum of equal-length vectors.
pub(crate) fn pairwise_sum<T>(items: &[Vec<T>]) -> Vec<T>
where
    T: Copy + AddAssign,
{
    match items.len() {
        0 => Vec::new(),
        1 => items[0].clone(),
        len => {
            let (a, b) = items.split_at(len / 2);
            let mut left = pairwise_sum(a);
            for (l, r) in left.iter_mut().zip(pairwise_sum(b)) {
                *l += r;
            }
            left
        }
    }
}
