//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use pulsed_emitter::bloch::Mat4;

type M2 = [[C64; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn m2_add(a: &M2, b: &M2, s: C64) -> M2 {
    let mut c = *a;
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] += s * b[i][j];
        }
    }
    c
}

/// Lindblad right-hand side for a driven, decaying two-level system written
/// directly in 2×2 matrix form. Basis order is (e, g); the Hamiltonian is
/// `Δ/2 σ_z + Ω/2 σ_x` and the collapse operator `√Γ |g⟩⟨e|`.
pub fn lindblad_rhs(rho: &M2, delta: f64, omega: f64, gamma: f64) -> M2 {
    let z = C64::new(0.0, 0.0);
    let h: M2 = [
        [C64::new(delta / 2.0, 0.0), C64::new(omega / 2.0, 0.0)],
        [C64::new(omega / 2.0, 0.0), C64::new(-delta / 2.0, 0.0)],
    ];
    let lower: M2 = [[z, z], [C64::new(1.0, 0.0), z]];
    let raise: M2 = [[z, C64::new(1.0, 0.0)], [z, z]];
    let number = m2_mul(&raise, &lower);
    let i = C64::new(0.0, 1.0);
    let comm = m2_add(&m2_mul(&h, rho), &m2_mul(rho, &h), C64::new(-1.0, 0.0));
    let jump = m2_mul(&m2_mul(&lower, rho), &raise);
    let anti = m2_add(
        &m2_mul(&number, rho),
        &m2_mul(rho, &number),
        C64::new(1.0, 0.0),
    );
    let mut out = m2_add(&[[z, z], [z, z]], &comm, -i);
    out = m2_add(&out, &jump, C64::new(gamma, 0.0));
    m2_add(&out, &anti, C64::new(-gamma / 2.0, 0.0))
}

/// Generator on `(ρ_ee, ρ_gg, ρ_ge, ρ_eg)` assembled column by column from
/// [`lindblad_rhs`] applied to basis matrices.
pub fn oracle_generator(delta: f64, omega: f64, gamma: f64) -> Mat4 {
    let z = C64::new(0.0, 0.0);
    // (row, col) of each vector component in the 2×2 matrix
    let pos = [(0, 0), (1, 1), (1, 0), (0, 1)];
    let mut g = [[z; 4]; 4];
    for (col, &(r, c)) in pos.iter().enumerate() {
        let mut basis = [[z; 2]; 2];
        basis[r][c] = C64::new(1.0, 0.0);
        let d = lindblad_rhs(&basis, delta, omega, gamma);
        for (row, &(rr, cc)) in pos.iter().enumerate() {
            g[row][col] = d[rr][cc];
        }
    }
    g
}

fn m4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn norm1(a: &Mat4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a · t)` by scaling and squaring with a long Taylor series.
pub fn expm(a: &Mat4, t: f64) -> Mat4 {
    let mut s = 0;
    let n = norm1(a) * t.abs();
    while n / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let h = t / 2f64.powi(s);
    let mut scaled = *a;
    for row in scaled.iter_mut() {
        for v in row.iter_mut() {
            *v *= h;
        }
    }
    let mut result = [[C64::new(0.0, 0.0); 4]; 4];
    let mut term = result;
    for i in 0..4 {
        result[i][i] = C64::new(1.0, 0.0);
        term[i][i] = C64::new(1.0, 0.0);
    }
    for k in 1..30 {
        term = m4_mul(&term, &scaled);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = m4_mul(&result, &result);
    }
    result
}

pub fn apply(m: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    let mut out = [C64::new(0.0, 0.0); 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

pub fn lorentzian(omega: f64, center: f64) -> f64 {
    1.0 / ((omega - center).powi(2) + 1.0)
}
