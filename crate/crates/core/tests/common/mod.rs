#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use stopspde_core::noise::counter_normal;
use stopspde_core::{ModelSpec, SpectralField};

/// Composite Simpson rule on `[0, 1]` with `2^14` panels.
pub fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    let n = 1usize << 14;
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Composite Simpson on each piece between consecutive `breaks` (which must
/// include 0 and 1), `2^12` panels per piece.
pub fn simpson_pieces(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let n = 1usize << 12;
    breaks
        .windows(2)
        .map(|w| {
            let h = (w[1] - w[0]) / n as f64;
            let mut s = f(w[0]) + f(w[1]);
            for i in 1..n {
                let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += c * f(w[0] + i as f64 * h);
            }
            s * h / 3.0
        })
        .sum()
}

/// Zeros of `g` on `(0, 1)` from a `2^16`-point sign scan refined by bisection.
pub fn sign_changes(g: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = 1usize << 16;
    let mut roots = Vec::new();
    let mut prev = g(0.5 / n as f64);
    for i in 1..n {
        let x = (i as f64 + 0.5) / n as f64;
        let cur = g(x);
        if prev * cur < 0.0 {
            let (mut lo, mut hi) = (x - 1.0 / n as f64, x);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g(mid) * prev > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    roots
}

pub fn e(k: usize, x: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * x).sin()
}

/// Field with `N(0, scale²/k²)` coefficients drawn from the counter stream.
pub fn random_field(seed: u64, index: u64, n: usize, scale: f64) -> SpectralField {
    let coeffs = (0..n)
        .map(|k| scale * counter_normal(seed, index, k as u64) / (k + 1) as f64)
        .collect();
    SpectralField::new(coeffs).unwrap()
}

/// The single-mode scheme written out by hand. With `v = y e_1` and
/// `e_1 ≥ 0` on `(0,1)`:
/// `⟨e_1, F(v)⟩ = κ|y|(ρ − y ∫e_1³)`, `⟨e_1, B(v) e_1⟩ = σ√r_1 y ∫e_1³` and
/// `‖P_1 B(v)‖²_HS = σ² y² Σ_{l ≤ L} r_l (∫e_1² e_l)²`.
pub struct ScalarOracle {
    kappa: f64,
    rho: f64,
    sigma: f64,
    sqrt_r1: f64,
    cube: f64,
    hs_factor: f64,
    decay: f64,
    dt: f64,
    threshold: f64,
}

impl ScalarOracle {
    pub fn new(spec: &ModelSpec, steps: usize, theta: f64, l_tail: usize) -> Self {
        let cube = simpson(|x| e(1, x).powi(3));
        let hs_sq: f64 = (1..=l_tail)
            .map(|l| {
                let r = spec.noise.amplitude * (l as f64).powf(-spec.noise.decay);
                let c = simpson(|x| e(1, x) * e(1, x) * e(l, x));
                r * c * c
            })
            .sum();
        let dt = spec.horizon / steps as f64;
        Self {
            kappa: spec.reaction_rate,
            rho: spec.carrying_level,
            sigma: spec.noise_intensity,
            sqrt_r1: spec.noise.amplitude.sqrt(),
            cube,
            hs_factor: hs_sq.sqrt(),
            decay: (-spec.diffusivity * PI * PI * dt).exp(),
            dt,
            threshold: (steps as f64 / spec.horizon).powf(theta),
        }
    }

    /// One step; the flag is `true` when the step froze.
    pub fn step(&self, y: f64, dw: f64) -> (f64, bool) {
        let f = self.kappa * y.abs() * (self.rho - y * self.cube);
        let hs = self.sigma * y.abs() * self.hs_factor;
        let open = f.abs() + hs <= self.threshold;
        if open {
            let b = self.sigma * self.sqrt_r1 * y * self.cube * dw;
            (self.decay * (y + self.dt * f + b), false)
        } else {
            (self.decay * y, true)
        }
    }
}
