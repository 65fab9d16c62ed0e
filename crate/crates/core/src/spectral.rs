//! Sine-basis coefficient fields and the exact linear algebra of the diagonal
//! Dirichlet operator `A = ε ∂²ₓ` on `(0, 1)`.
//!
//! A [`SpectralField`] stores the coefficients `c_1..c_n` of
//! `v(x) = Σ c_k e_k(x)` with `e_k(x) = √2 sin(kπx)`. The basis is orthonormal
//! in `L²(0,1)` and diagonalises `A` with eigenvalues `λ_k = −ε π² k²`, so the
//! semigroup, fractional powers and φ-functions all act mode by mode.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Coefficient vector of a function in `span{e_1, .., e_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    /// Wraps a coefficient vector; `coeffs[k - 1]` multiplies `e_k`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::config("a spectral field needs at least one mode"));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "a spectral field needs at least one mode");
        Self { coeffs: vec![0.0; n] }
    }

    /// The single basis function `e_k` embedded in `n` modes.
    pub fn basis(k: usize, n: usize) -> Self {
        assert!(k >= 1 && k <= n, "basis index {k} outside 1..={n}");
        let mut field = Self::zeros(n);
        field.coeffs[k - 1] = 1.0;
        field
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `e_k` (1-based), zero beyond the stored modes.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    /// A field with any NaN or infinite coefficient counts as diverged.
    pub fn is_diverged(&self) -> bool {
        self.coeffs.iter().any(|c| !c.is_finite())
    }

    /// `‖v‖_H`, by Parseval.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Certified bound `‖v‖_∞ ≤ √2 Σ |c_k|`.
    pub fn sup_bound(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.coeffs.iter().map(|c| c.abs()).sum::<f64>()
    }

    /// `a·self + b·other`, zero-padding the shorter field.
    pub fn lin_comb(&self, a: f64, other: &SpectralField, b: f64) -> SpectralField {
        let n = self.modes().max(other.modes());
        let coeffs = (1..=n)
            .map(|k| a * self.coeff(k) + b * other.coeff(k))
            .collect();
        SpectralField { coeffs }
    }

    /// `‖self − other‖_H` after embedding both into the larger mode count.
    pub fn distance(&self, other: &SpectralField) -> f64 {
        let n = self.modes().max(other.modes());
        (1..=n)
            .map(|k| {
                let d = self.coeff(k) - other.coeff(k);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Spectrum `λ_k = −ε π² k²` of the Dirichlet Laplacian scaled by the
/// diffusivity `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpectrum {
    diffusivity: f64,
}

impl OperatorSpectrum {
    pub fn new(diffusivity: f64) -> Result<Self> {
        if !(diffusivity.is_finite() && diffusivity > 0.0) {
            return Err(Error::config(format!(
                "diffusivity must be positive and finite, got {diffusivity}"
            )));
        }
        Ok(Self { diffusivity })
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// `λ_k` for `k ≥ 1`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let k = k as f64;
        -self.diffusivity * PI * PI * k * k
    }

    /// Multiplies each coefficient by `e^{λ_k t}`.
    pub fn apply_semigroup(&self, v: &SpectralField, t: f64) -> Result<SpectralField> {
        let mut out = v.clone();
        self.apply_semigroup_in_place(out.coeffs_mut(), t)?;
        Ok(out)
    }

    pub fn apply_semigroup_in_place(&self, coeffs: &mut [f64], t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::argument(format!(
                "the semigroup runs forward in time only, got t = {t}"
            )));
        }
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c *= (self.eigenvalue(i + 1) * t).exp();
        }
        Ok(())
    }

    /// Per-mode factors `e^{λ_k t}`, `k = 1..=n`.
    pub fn semigroup_factors(&self, n: usize, t: f64) -> Vec<f64> {
        (1..=n).map(|k| (self.eigenvalue(k) * t).exp()).collect()
    }

    /// `‖v‖_{H_r} = (Σ |λ_k|^{2r} c_k²)^{1/2}`.
    pub fn fractional_norm(&self, v: &SpectralField, r: f64) -> f64 {
        self.fractional_norm_of(v.coeffs(), r)
    }

    pub fn fractional_norm_of(&self, coeffs: &[f64], r: f64) -> f64 {
        if r == 0.0 {
            return coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        }
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.eigenvalue(i + 1).abs().powf(2.0 * r) * c * c)
            .sum::<f64>()
            .sqrt()
    }
}

/// Exact drift weight `∫₀^{dt} e^{λ(dt−s)} ds = (e^{λ dt} − 1)/λ`.
///
/// Below `|λ dt| < 1e-8` the second-order Taylor expansion
/// `dt (1 + λ dt / 2)` is returned instead.
pub fn phi1_weight(lambda: f64, dt: f64) -> f64 {
    let z = lambda * dt;
    if z.abs() < 1e-8 {
        dt * (1.0 + 0.5 * z)
    } else {
        z.exp_m1() / lambda
    }
}

/// Galerkin projection `P_n`: truncate, or zero-pad when `n_target` exceeds
/// the stored modes. `n_target = 0` is the zero map; it is represented by a
/// single zero coefficient.
pub fn project(v: &SpectralField, n_target: usize) -> SpectralField {
    let n = n_target.max(1);
    let coeffs = (1..=n)
        .map(|k| if k <= n_target { v.coeff(k) } else { 0.0 })
        .collect();
    SpectralField { coeffs }
}

/// `‖(I − P_n) v‖_H`.
pub fn tail_norm(v: &SpectralField, n_target: usize) -> f64 {
    v.coeffs()
        .iter()
        .skip(n_target)
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> OperatorSpectrum {
        OperatorSpectrum::new(1.0).unwrap()
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let v = SpectralField::new(vec![0.3, -1.2, 4.0]).unwrap();
        assert_eq!(unit().apply_semigroup(&v, 0.0).unwrap(), v);
    }

    #[test]
    fn semigroup_first_mode_unit_time() {
        let v = SpectralField::basis(1, 1);
        let out = unit().apply_semigroup(&v, 1.0).unwrap();
        // e^{-π²}
        assert!((out.coeff(1) - 5.172_318_620_381_185e-5).abs() < 1e-18);
    }

    #[test]
    fn semigroup_rejects_negative_time() {
        let v = SpectralField::basis(1, 2);
        assert!(matches!(
            unit().apply_semigroup(&v, -0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn fractional_norm_values() {
        let s = unit();
        assert_eq!(s.fractional_norm(&SpectralField::zeros(5), 0.7), 0.0);
        let e1 = SpectralField::basis(1, 3);
        assert!((s.fractional_norm(&e1, 0.5) - PI).abs() < 1e-14);
        let v = SpectralField::new(vec![1.0, 2.0, -2.0]).unwrap();
        assert!((s.fractional_norm(&v, 0.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn phi1_values() {
        assert_eq!(phi1_weight(-3.0, 0.0), 0.0);
        assert_eq!(phi1_weight(0.0, 0.5), 0.5);
        let lam = -PI * PI;
        let expected = ((lam * 0.1).exp() - 1.0) / lam;
        assert!((phi1_weight(lam, 0.1) - expected).abs() < 1e-16);
        assert!((phi1_weight(lam, 0.1) - 0.063_558_0).abs() < 5e-8);
        // Taylor branch agrees with the closed form just above the cutoff
        let lam = -1e-9;
        assert!((phi1_weight(lam, 1.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projection_truncates_and_pads() {
        let v = SpectralField::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(project(&v, 2).coeffs(), &[1.0, 2.0]);
        assert_eq!(tail_norm(&v, 2), 3.0);
        assert_eq!(project(&v, 5).coeffs(), &[1.0, 2.0, 3.0, 0.0, 0.0]);
        assert_eq!(project(&v, 3), v);
        assert_eq!(project(&project(&v, 2), 2), project(&v, 2));
    }

    #[test]
    fn empty_field_rejected() {
        assert!(SpectralField::new(vec![]).is_err());
    }

    #[test]
    fn distance_embeds_by_zero_padding() {
        let a = SpectralField::new(vec![1.0]).unwrap();
        let b = SpectralField::new(vec![1.0, 0.0, 2.0]).unwrap();
        assert_eq!(a.distance(&b), 2.0);
    }
}
