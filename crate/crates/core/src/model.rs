//! The stochastic reaction-diffusion model
//!
//! ```text
//! dX = [ε ∂²ₓX + κ|X|(ρ − X)] dt + σ X dW,   X(0) = ξ,   X(t,0) = X(t,1) = 0,
//! ```
//!
//! driven by a `Q`-Wiener process with `Q e_l = r_l e_l`, `r_l = c_q l^{-q}`.
//! In semigroup form `F(v)(x) = κ|v(x)|(ρ − v(x))` and
//! `(B(v)u)(x) = σ v(x) (√Q u)(x)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{OperatorSpectrum, SpectralField};
use crate::transform::{GridPlan, SineTransform};

/// Power-law covariance eigenvalues `r_l = amplitude · l^{-decay}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCovariance {
    pub amplitude: f64,
    pub decay: f64,
}

impl Default for NoiseCovariance {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            decay: 2.0,
        }
    }
}

impl NoiseCovariance {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::config(format!(
                "noise amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(self.decay.is_finite() && self.decay > 1.0) {
            return Err(Error::config(format!(
                "noise decay exponent must exceed 1 for a finite trace, got {}",
                self.decay
            )));
        }
        Ok(())
    }

    /// `r_l` for `l ≥ 1`.
    pub fn eigenvalue(&self, l: usize) -> f64 {
        self.amplitude * (l as f64).powf(-self.decay)
    }

    /// `Trace(Q) = Σ_{l≥1} r_l`.
    pub fn trace(&self) -> f64 {
        self.amplitude * power_tail(self.decay, 1)
    }

    /// `Σ_{l > after} r_l`.
    pub fn tail(&self, after: usize) -> f64 {
        self.amplitude * power_tail(self.decay, after + 1)
    }

    /// `sup_l l·r_l`; finite because the decay exponent is at least one.
    pub fn sup_weighted(&self) -> f64 {
        self.amplitude
    }
}

/// `Σ_{k ≥ start} k^{-q}` for `q > 1`: direct summation below 64, then
/// Euler–Maclaurin with three correction terms.
fn power_tail(q: f64, start: usize) -> f64 {
    const SWITCH: usize = 64;
    let start = start.max(1);
    let direct: f64 = (start..SWITCH.max(start))
        .map(|k| (k as f64).powf(-q))
        .sum();
    let k0 = SWITCH.max(start) as f64;
    let em = k0.powf(1.0 - q) / (q - 1.0) + 0.5 * k0.powf(-q) + q * k0.powf(-q - 1.0) / 12.0
        - q * (q + 1.0) * (q + 2.0) * k0.powf(-q - 3.0) / 720.0;
    direct + em
}

/// Initial condition `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `ξ(x) = scale · x(1 − x)`.
    Parabola { scale: f64 },
    /// Explicit sine coefficients; modes beyond the list are zero.
    Coefficients { coeffs: Vec<f64> },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Parabola { scale: 8.0 }
    }
}

impl InitialCondition {
    /// `P_n ξ`, exact: `⟨e_k, x(1−x)⟩ = 4√2/(kπ)³` for odd `k`, zero for even.
    pub fn project(&self, n: usize) -> SpectralField {
        let coeffs = match self {
            InitialCondition::Parabola { scale } => (1..=n)
                .map(|k| {
                    if k % 2 == 1 {
                        let kp = k as f64 * PI;
                        scale * 4.0 * SQRT_2 / (kp * kp * kp)
                    } else {
                        0.0
                    }
                })
                .collect(),
            InitialCondition::Coefficients { coeffs } => (0..n)
                .map(|i| coeffs.get(i).copied().unwrap_or(0.0))
                .collect(),
        };
        SpectralField::new(coeffs).expect("at least one mode")
    }

    fn validate(&self, spectrum: &OperatorSpectrum) -> Result<()> {
        match self {
            InitialCondition::Parabola { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::config(format!(
                        "initial scale must be finite and nonnegative, got {scale}"
                    )));
                }
            }
            InitialCondition::Coefficients { coeffs } => {
                let field = SpectralField::new(coeffs.clone())
                    .map_err(|_| Error::config("initial coefficients must not be empty"))?;
                if field.is_diverged() || !spectrum.fractional_norm(&field, 0.5).is_finite() {
                    return Err(Error::config("initial condition must lie in H_{1/2}"));
                }
                let plan = GridPlan::for_modes(field.modes());
                let values = plan.to_grid(&field)?;
                let tol = 1e-12 * field.sup_bound().max(1.0);
                if let Some(min) = values.iter().copied().reduce(f64::min) {
                    if min < -tol {
                        return Err(Error::config(format!(
                            "initial condition must be nonnegative; grid minimum is {min:e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parameters of the reaction-diffusion instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `ε`
    pub diffusivity: f64,
    /// `κ`
    pub reaction_rate: f64,
    /// `ρ`
    pub carrying_level: f64,
    /// `σ`
    pub noise_intensity: f64,
    pub noise: NoiseCovariance,
    pub initial: InitialCondition,
    /// `T`
    pub horizon: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            diffusivity: 1.0,
            reaction_rate: 1.0,
            carrying_level: 1.0,
            noise_intensity: 0.25,
            noise: NoiseCovariance::default(),
            initial: InitialCondition::default(),
            horizon: 1.0,
        }
    }
}

/// `‖P_n B(v)‖_{HS}` truncated at `l_tail` noise modes, with a certified bound
/// on the squared contribution of the omitted modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsNorm {
    pub value: f64,
    /// Upper bound on `‖P_n B(v)‖²_{HS} − value²`.
    pub tail_bound_sq: f64,
}

impl HsNorm {
    /// Certified upper bound on the untruncated norm.
    pub fn upper(&self) -> f64 {
        (self.value * self.value + self.tail_bound_sq).sqrt()
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let spectrum = self.spectrum()?;
        let checks = [
            ("reaction_rate", self.reaction_rate, self.reaction_rate >= 0.0),
            ("carrying_level", self.carrying_level, self.carrying_level > 0.0),
            ("noise_intensity", self.noise_intensity, self.noise_intensity >= 0.0),
            ("horizon", self.horizon, self.horizon > 0.0),
        ];
        for (name, value, ok) in checks {
            if !(ok && value.is_finite()) {
                return Err(Error::config(format!("{name} out of range: {value}")));
            }
        }
        self.noise.validate()?;
        self.initial.validate(&spectrum)
    }

    pub fn spectrum(&self) -> Result<OperatorSpectrum> {
        OperatorSpectrum::new(self.diffusivity)
    }

    pub fn initial_field(&self, n: usize) -> SpectralField {
        self.initial.project(n)
    }

    /// Pointwise `κ|v|(ρ − v)`.
    #[inline]
    pub fn reaction(&self, v: f64) -> f64 {
        self.reaction_rate * v.abs() * (self.carrying_level - v)
    }

    /// `P_{n_out} F(v)`.
    pub fn drift(&self, v: &SpectralField, plan: &GridPlan, n_out: usize) -> Result<SpectralField> {
        plan.require_dealiased(v.modes().max(n_out))?;
        let mut eval = Evaluator::new(self, plan, v.modes(), n_out, 1, n_out)?;
        eval.load(v.coeffs());
        let mut out = vec![0.0; n_out];
        eval.drift(&mut out);
        SpectralField::new(out)
    }

    /// `P_{n_out} B(v) P_m ΔW` for `m = noise_incr.len()` increments.
    pub fn diffusion_apply(
        &self,
        v: &SpectralField,
        noise_incr: &[f64],
        plan: &GridPlan,
        n_out: usize,
    ) -> Result<SpectralField> {
        let m = noise_incr.len();
        if m == 0 {
            return Err(Error::argument("at least one noise increment is required"));
        }
        plan.require_dealiased(v.modes().max(m).max(n_out))?;
        let mut eval = Evaluator::new(self, plan, v.modes(), n_out, m, n_out)?;
        eval.load(v.coeffs());
        let mut out = vec![0.0; n_out];
        eval.diffusion(noise_incr, &mut out);
        SpectralField::new(out)
    }

    /// `σ (Σ_{l ≤ l_tail} r_l ‖P_{n_proj}(v e_l)‖²_H)^{1/2}` plus the tail
    /// bound `σ² ‖v‖²_∞ Σ_{l > l_tail} r_l`.
    pub fn hs_norm(&self, v: &SpectralField, n_proj: usize, l_tail: usize) -> Result<HsNorm> {
        if l_tail < n_proj {
            return Err(Error::argument(format!(
                "HS truncation {l_tail} below projection size {n_proj}"
            )));
        }
        let plan = GridPlan::for_modes(v.modes().max(n_proj));
        let mut eval = Evaluator::new(self, &plan, v.modes(), n_proj, 1, l_tail)?;
        eval.load(v.coeffs());
        Ok(eval.hs())
    }

    pub fn constants(&self) -> Result<TheoryConstants> {
        self.noise.validate()?;
        Ok(TheoryConstants {
            kappa_rho: self.reaction_rate * self.carrying_level,
            sigma_sq: self.noise_intensity * self.noise_intensity,
            trace_q: self.noise.trace(),
        })
    }
}

/// Cosine moments `g(a) = ∫₀¹ v(x) cos(aπx) dx`, `a = 0..g.len()`, of
/// `v = Σ c_j e_j`:
/// `g(a) = (2√2/π) Σ_{j+a odd} c_j j / (j² − a²)`.
///
/// They give every product projection exactly:
/// `⟨e_k, v e_l⟩ = g(|k−l|) − g(k+l)`.
pub fn cosine_moments(coeffs: &[f64], g: &mut [f64]) {
    let table = MomentTable::new(coeffs.len(), g.len());
    let mut split = SplitCoeffs::new(coeffs.len());
    split.load(coeffs);
    table.apply(&split, g);
}

/// `out_k = ⟨e_k, v · Σ_l w_l e_l⟩` from the cosine moments of `v`; needs
/// `g.len() > out.len() + w.len()`.
pub fn product_projection(g: &[f64], w: &[f64], out: &mut [f64]) {
    assert!(g.len() > out.len() + w.len(), "too few moments");
    project_product(g, &reversed(g), w, out);
}

/// `Σ_l r_l Σ_{k ≤ n_proj} ⟨e_k, v e_l⟩²` from the cosine moments of `v`.
pub fn hs_weighted_sum(g: &[f64], rates: &[f64], n_proj: usize) -> f64 {
    assert!(g.len() > n_proj + rates.len(), "too few moments");
    weighted_square_sum(g, &reversed(g), rates, n_proj)
}

fn reversed(g: &[f64]) -> Vec<f64> {
    g.iter().rev().copied().collect()
}

/// `Σ (a_i − b_i)²` over equal-length slices, four lanes at a time.
#[inline]
fn sq_diff_sum(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ac, ar) = a.split_at(a.len() - a.len() % 4);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(4).zip(bc.chunks_exact(4)) {
        for i in 0..4 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Σ w_i (a_i − b_i)`.
#[inline]
fn weighted_diff_sum(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(a.len() == w.len() && b.len() == w.len());
    let mut acc = [0.0; 4];
    let split = w.len() - w.len() % 4;
    for ((ws, x), y) in w[..split]
        .chunks_exact(4)
        .zip(a[..split].chunks_exact(4))
        .zip(b[..split].chunks_exact(4))
    {
        for i in 0..4 {
            acc[i] += ws[i] * (x[i] - y[i]);
        }
    }
    let mut tail = 0.0;
    for i in split..w.len() {
        tail += w[i] * (a[i] - b[i]);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let split = a.len() - a.len() % 4;
    for (x, y) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for i in split..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

// `rev[i] = g[g.len() − 1 − i]` turns every descending index run into an
// ascending one.
fn project_product(g: &[f64], rev: &[f64], w: &[f64], out: &mut [f64]) {
    let top = g.len() - 1;
    let len = w.len();
    for (k0, o) in out.iter_mut().enumerate() {
        let k = k0 + 1;
        // l < k: g(k − l) runs downwards
        let below = len.min(k - 1);
        let lower = top + 1 - k;
        let mut acc = weighted_diff_sum(&w[..below], &rev[lower..lower + below], &g[k + 1..k + 1 + below]);
        if k <= len {
            acc += weighted_diff_sum(&w[k - 1..], &g[..=len - k], &g[2 * k..=len + k]);
        }
        *o = acc;
    }
}

fn weighted_square_sum(g: &[f64], rev: &[f64], rates: &[f64], n: usize) -> f64 {
    let top = g.len() - 1;
    let mut total = 0.0;
    for (l0, r) in rates.iter().enumerate() {
        let l = l0 + 1;
        let below = n.min(l - 1);
        let lower = top + 1 - l;
        let mut inner = sq_diff_sum(&rev[lower..lower + below], &g[l + 1..l + 1 + below]);
        if l <= n {
            inner += sq_diff_sum(&g[..=n - l], &g[2 * l..=n + l]);
        }
        total += r * inner;
    }
    total
}

/// Coefficients split by parity: `odd = (c_1, c_3, ..)`, `even = (c_2, c_4, ..)`,
/// both zero-padded to the same length.
struct SplitCoeffs {
    odd: Vec<f64>,
    even: Vec<f64>,
}

impl SplitCoeffs {
    fn new(modes: usize) -> Self {
        let half = modes.div_ceil(2);
        Self {
            odd: vec![0.0; half],
            even: vec![0.0; half],
        }
    }

    fn load(&mut self, coeffs: &[f64]) {
        self.even.fill(0.0);
        for (i, pair) in coeffs.chunks(2).enumerate() {
            self.odd[i] = pair[0];
            if let Some(&c) = pair.get(1) {
                self.even[i] = c;
            }
        }
    }
}

/// Precomputed weights `(2√2/π) j/(j² − a²)`; row `a` pairs with the odd
/// coefficients for even `a` and with the even ones for odd `a`.
struct MomentTable {
    half: usize,
    rows: usize,
    weights: Vec<f64>,
}

impl MomentTable {
    fn new(modes: usize, rows: usize) -> Self {
        let half = modes.div_ceil(2);
        let scale = 2.0 * SQRT_2 / PI;
        let mut weights = vec![0.0; rows * half];
        for a in 0..rows {
            let a2 = (a * a) as f64;
            let first = if a % 2 == 0 { 1 } else { 2 };
            for (t, w) in weights[a * half..(a + 1) * half].iter_mut().enumerate() {
                let j = first + 2 * t;
                if j <= modes {
                    let jf = j as f64;
                    *w = scale * jf / (jf * jf - a2);
                }
            }
        }
        Self { half, rows, weights }
    }

    fn apply(&self, split: &SplitCoeffs, g: &mut [f64]) {
        debug_assert_eq!(g.len(), self.rows);
        for (a, (ga, row)) in g.iter_mut().zip(self.weights.chunks_exact(self.half)).enumerate() {
            let c = if a % 2 == 0 { &split.odd } else { &split.even };
            *ga = dot(row, c);
        }
    }
}

/// `Σ c_j √2 sin(jπx)` by Clenshaw's recurrence.
fn sine_series(coeffs: &[f64], x: f64) -> f64 {
    let (sin, cos) = (PI * x).sin_cos();
    let two_cos = 2.0 * cos;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().rev() {
        let b0 = c + two_cos * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    SQRT_2 * b1 * sin
}

/// `Σ k c_k cos(kπx)`, so that `v' = √2 π ·` this, by Clenshaw's recurrence.
fn slope_series(coeffs: &[f64], x: f64) -> f64 {
    let cos = (PI * x).cos();
    let two_cos = 2.0 * cos;
    let (mut b1, mut b2) = (0.0, 0.0);
    for (k0, &c) in coeffs.iter().enumerate().rev() {
        let b0 = (k0 + 1) as f64 * c + two_cos * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    cos * b1 - b2
}

/// Intervals where `−sign · v > 0`, endpoints bisected to machine precision.
///
/// Sign changes are read off the interior grid values, with the sign of `v'`
/// standing in at `x = 0` and `x = 1`. A cell whose end values both exceed
/// `1.5 h² sup|v''|` cannot hide a pair of roots; any other cell is searched
/// for an interior extremum of the opposite status.
fn minority_set(grid: &[f64], coeffs: &[f64], sign: f64, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let m = grid.len();
    let h = 1.0 / (m + 1) as f64;
    let inside = |x: f64| -sign * sine_series(coeffs, x) > 0.0;
    let crossing = |mut lo: f64, mut hi: f64, entering: bool| {
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if inside(mid) == entering {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let curvature: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k0, c)| ((k0 + 1) * (k0 + 1)) as f64 * c.abs())
        .sum::<f64>()
        * SQRT_2
        * PI
        * PI;
    let certified = 1.5 * curvature * h * h;
    let value = |i: usize| if i == 0 || i == m + 1 { 0.0 } else { grid[i - 1] };
    let status = |i: usize| match i {
        0 => -sign * slope_series(coeffs, 0.0) > 0.0,
        i if i == m + 1 => sign * slope_series(coeffs, 1.0) > 0.0,
        i => -sign * grid[i - 1] > 0.0,
    };

    let mut start = status(0).then_some(0.0);
    let mut toggle = |x: f64, start: &mut Option<f64>| match start.take() {
        Some(a) => out.push((a, x)),
        None => *start = Some(x),
    };
    let mut prev = status(0);
    for i in 0..=m {
        let a = i as f64 * h;
        let b = if i == m { 1.0 } else { (i + 1) as f64 * h };
        let next = status(i + 1);
        if prev != next {
            toggle(crossing(a, b, next), &mut start);
        } else if value(i).abs().min(value(i + 1).abs()) <= certified {
            let da = slope_series(coeffs, a);
            let db = slope_series(coeffs, b);
            if da * db < 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if slope_series(coeffs, mid) * da > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let z = 0.5 * (lo + hi);
                if inside(z) != prev {
                    toggle(crossing(a, z, !prev), &mut start);
                    toggle(crossing(z, b, prev), &mut start);
                }
            }
        }
        prev = next;
    }
    if let Some(a) = start {
        out.push((a, 1.0));
    }
}

/// `∫_J cos(mπx) dx` and `∫_J sin(mπx) dx` for the union `J` of `intervals`,
/// written through the midpoint and half-width so narrow intervals keep their
/// relative accuracy.
fn set_moments(intervals: &[(f64, f64)], cos_out: &mut [f64], sin_out: &mut [f64]) {
    cos_out.fill(0.0);
    sin_out.fill(0.0);
    let top = cos_out.len().max(sin_out.len());
    for &(a, b) in intervals {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let (sm, cm) = (PI * mid).sin_cos();
        let (sh, ch) = (PI * half).sin_cos();
        if let Some(c) = cos_out.first_mut() {
            *c += b - a;
        }
        // rotations giving sin/cos of m·π·mid and sin of m·π·half
        let (mut s_mid, mut c_mid) = (0.0, 1.0);
        let (mut s_half, mut c_half) = (0.0, 1.0);
        for m in 1..top {
            (s_mid, c_mid) = (s_mid * cm + c_mid * sm, c_mid * cm - s_mid * sm);
            (s_half, c_half) = (s_half * ch + c_half * sh, c_half * ch - s_half * sh);
            let scale = 2.0 * s_half / (m as f64 * PI);
            if let Some(c) = cos_out.get_mut(m) {
                *c += c_mid * scale;
            }
            if let Some(s) = sin_out.get_mut(m) {
                *s += s_mid * scale;
            }
        }
    }
}

/// Cosine coefficients `d_a` of `v² = Σ_a d_a cos(aπx)`.
fn cosine_square(coeffs: &[f64], d: &mut [f64]) {
    let n = coeffs.len();
    d.fill(0.0);
    d[0] = dot(coeffs, coeffs);
    for a in 1..n {
        d[a] = 2.0 * dot(&coeffs[..n - a], &coeffs[a..]);
    }
    for j in 0..n {
        for l in 0..n {
            d[j + l + 2] -= coeffs[j] * coeffs[l];
        }
    }
}

/// Evaluates `P_n F`, `P_n B(·) P_m ΔW` and the truncated HS norm at one
/// state, sharing the cosine moments and the grid synthesis between them.
///
/// Everything is projected exactly. With `s = ±1` the dominant sign of `v` on
/// the grid, `|v| = s v + 2 max(−s v, 0)`; the polynomial part `s κ v(ρ − v)`
/// goes through the cosine moments of `v`, and the correction is integrated
/// over the set `J` where `−s v > 0`, whose endpoints are located by bisection
/// between grid points. Two roots closer than one grid cell go unseen.
pub struct Evaluator<'a> {
    spec: &'a ModelSpec,
    n_out: usize,
    sqrt_rates: Vec<f64>,
    rates: Vec<f64>,
    transform: SineTransform,
    table: MomentTable,
    split: SplitCoeffs,
    moments: Vec<f64>,
    reversed: Vec<f64>,
    coeffs: Vec<f64>,
    state_grid: Vec<f64>,
    correction: Vec<f64>,
    scaled_noise: Vec<f64>,
    minority: Vec<(f64, f64)>,
    set_cos: Vec<f64>,
    set_sin: Vec<f64>,
    square: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    /// `source_modes` is the length of the states to be loaded; `n_out` the
    /// projection size of the outputs; `noise_modes` the number of noise
    /// increments per step; `l_tail` the HS truncation.
    pub fn new(
        spec: &'a ModelSpec,
        plan: &GridPlan,
        source_modes: usize,
        n_out: usize,
        noise_modes: usize,
        l_tail: usize,
    ) -> Result<Self> {
        if source_modes == 0 || n_out == 0 {
            return Err(Error::argument("evaluator needs at least one mode"));
        }
        if source_modes > plan.grid_size() || n_out > plan.grid_size() {
            return Err(Error::config(format!(
                "grid of {} points cannot represent {} modes",
                plan.grid_size(),
                source_modes.max(n_out)
            )));
        }
        let reach = (n_out + source_modes)
            .max(n_out + noise_modes)
            .max(n_out + l_tail);
        Ok(Self {
            spec,
            n_out,
            sqrt_rates: (1..=noise_modes).map(|l| spec.noise.eigenvalue(l).sqrt()).collect(),
            rates: (1..=l_tail).map(|l| spec.noise.eigenvalue(l)).collect(),
            transform: plan.workspace(),
            table: MomentTable::new(source_modes, reach + 1),
            split: SplitCoeffs::new(source_modes),
            moments: vec![0.0; reach + 1],
            reversed: vec![0.0; reach + 1],
            coeffs: vec![0.0; source_modes],
            state_grid: vec![0.0; plan.grid_size()],
            correction: vec![0.0; n_out],
            scaled_noise: vec![0.0; noise_modes],
            minority: Vec::new(),
            set_cos: vec![0.0; n_out + source_modes + 1],
            set_sin: vec![0.0; n_out + 2 * source_modes + 1],
            square: vec![0.0; 2 * source_modes + 1],
        })
    }

    pub fn l_tail(&self) -> usize {
        self.rates.len()
    }

    /// Makes `coeffs` the current state.
    pub fn load(&mut self, coeffs: &[f64]) {
        assert_eq!(coeffs.len(), self.coeffs.len(), "state size");
        self.coeffs.copy_from_slice(coeffs);
        self.split.load(coeffs);
        self.table.apply(&self.split, &mut self.moments);
        for (r, g) in self.reversed.iter_mut().zip(self.moments.iter().rev()) {
            *r = *g;
        }
        self.transform
            .synthesize(coeffs, &mut self.state_grid)
            .expect("grid checked at construction");
    }

    /// Grid values of the current state.
    pub fn state_grid(&self) -> &[f64] {
        &self.state_grid
    }

    /// `P_{n_out} F(v)` of the current state.
    pub fn drift(&mut self, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_out, "output size");
        let kappa = self.spec.reaction_rate;
        let rho = self.spec.carrying_level;
        if kappa == 0.0 {
            out.fill(0.0);
            return;
        }
        let negative = self.state_grid.iter().filter(|&&v| v < 0.0).count();
        let positive = self.state_grid.iter().filter(|&&v| v > 0.0).count();
        let sign = if negative > positive { -1.0 } else { 1.0 };

        // ⟨e_k, v²⟩ = Σ_l c_l ⟨e_k, v e_l⟩
        project_product(&self.moments, &self.reversed, &self.coeffs, out);
        for (k0, o) in out.iter_mut().enumerate() {
            let c = self.coeffs.get(k0).copied().unwrap_or(0.0);
            *o = sign * kappa * (rho * c - *o);
        }

        if self.coeffs.iter().any(|c| !c.is_finite()) {
            out.fill(f64::NAN);
            return;
        }
        minority_set(&self.state_grid, &self.coeffs, sign, &mut self.minority);
        if self.minority.is_empty() {
            return;
        }
        set_moments(&self.minority, &mut self.set_cos, &mut self.set_sin);
        // ∫_J v e_k
        project_product(&self.set_cos, &reversed(&self.set_cos), &self.coeffs, &mut self.correction);
        // ∫_J v² e_k with v² = Σ_a d_a cos(aπx)
        cosine_square(&self.coeffs, &mut self.square);
        let t = &self.set_sin;
        for (k0, (o, lin)) in out.iter_mut().zip(&self.correction).enumerate() {
            let k = k0 + 1;
            let quad: f64 = self
                .square
                .iter()
                .enumerate()
                .map(|(a, d)| {
                    let diff = if a <= k { t[k - a] } else { -t[a - k] };
                    d * (t[k + a] + diff)
                })
                .sum::<f64>()
                * FRAC_1_SQRT_2;
            *o -= 2.0 * kappa * sign * (rho * lin - quad);
        }
    }

    /// `P_{n_out} B(v) P_m dW` of the current state.
    pub fn diffusion(&mut self, dw: &[f64], out: &mut [f64]) {
        assert_eq!(dw.len(), self.sqrt_rates.len(), "noise increment count");
        assert_eq!(out.len(), self.n_out, "output size");
        let sigma = self.spec.noise_intensity;
        for ((s, r), d) in self.scaled_noise.iter_mut().zip(&self.sqrt_rates).zip(dw) {
            *s = sigma * r * d;
        }
        project_product(&self.moments, &self.reversed, &self.scaled_noise, out);
    }

    /// Truncated HS norm of `P_{n_out} B(v)` with its tail bound.
    pub fn hs(&self) -> HsNorm {
        let sigma = self.spec.noise_intensity;
        if sigma == 0.0 {
            return HsNorm { value: 0.0, tail_bound_sq: 0.0 };
        }
        let sum = weighted_square_sum(&self.moments, &self.reversed, &self.rates, self.n_out);
        let sup = SQRT_2 * self.coeffs.iter().map(|c| c.abs()).sum::<f64>();
        HsNorm {
            value: sigma * sum.sqrt(),
            tail_bound_sq: sigma * sigma * sup * sup * self.spec.noise.tail(self.rates.len()),
        }
    }
}

/// Constants of the one-sided bounds satisfied by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    kappa_rho: f64,
    sigma_sq: f64,
    trace_q: f64,
}

impl TheoryConstants {
    pub fn trace_q(&self) -> f64 {
        self.trace_q
    }

    /// `κρ + 2 p̂ σ² Trace(Q)`, bounding `⟨v, F(v)⟩ + p̂‖B(v)‖²_{HS}` by a
    /// multiple of `‖v‖²_H`.
    pub fn coercive(&self, p_hat: f64) -> f64 {
        self.kappa_rho + 2.0 * p_hat * self.sigma_sq * self.trace_q
    }

    /// Monotonicity constant for the weight `(p − 1)(1 + ε_pert)/2` on
    /// `‖B(u) − B(v)‖²_{HS}`.
    pub fn monotone(&self, p: f64, eps_pert: f64) -> f64 {
        self.coercive((p - 1.0) * (1.0 + eps_pert) / 2.0)
    }
}

/// `κρ + 2 p̂ σ² Trace(Q)`.
pub fn coercivity_constant(spec: &ModelSpec, p_hat: f64) -> Result<f64> {
    if !(p_hat >= 0.0 && p_hat.is_finite()) {
        return Err(Error::argument(format!("moment weight must be nonnegative, got {p_hat}")));
    }
    Ok(spec.constants()?.coercive(p_hat))
}

/// `(N/T)^θ`, the stopping threshold.
pub fn taming_threshold(steps: usize, horizon: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 0.25) {
        return Err(Error::config(format!(
            "taming exponent must lie in (0, 1/4], got {theta}"
        )));
    }
    if steps == 0 || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("need at least one step over a positive horizon"));
    }
    Ok((steps as f64 / horizon).powf(theta))
}
