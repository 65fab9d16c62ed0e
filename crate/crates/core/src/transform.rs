//! Collocation grid and the discrete sine transform pair used to evaluate
//! pointwise nonlinearities.
//!
//! The grid is `x_j = j/(M+1)`, `j = 1..M`. Synthesis evaluates the truncated
//! sine series exactly at the grid points; analysis is the trapezoidal rule for
//! `∫ f(x) √2 sin(kπx) dx`, which is exact for sine polynomials of degree `≤ M`.
//! Both directions are a DST-I computed through one complex FFT of length
//! `2(M+1)` on the odd extension.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

#[derive(Clone)]
pub struct GridPlan {
    grid_size: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for GridPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridPlan")
            .field("grid_size", &self.grid_size)
            .finish()
    }
}

impl PartialEq for GridPlan {
    fn eq(&self, other: &Self) -> bool {
        self.grid_size == other.grid_size
    }
}

impl GridPlan {
    pub fn new(grid_size: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::config("grid needs at least one interior point"));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (grid_size + 1));
        Ok(Self { grid_size, fft })
    }

    /// Smallest grid with `M + 1` a power of two and `M ≥ 3n + 1`, which keeps
    /// quadratic products of `n`-mode fields alias-free after projection.
    pub fn for_modes(n: usize) -> Self {
        let size = (3 * n.max(1) + 2).next_power_of_two() - 1;
        Self::new(size).expect("grid size is positive")
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Whether the grid is large enough for quadratic products of `n` modes.
    pub fn dealiases(&self, n: usize) -> bool {
        self.grid_size >= 3 * n + 1
    }

    pub(crate) fn require_dealiased(&self, n: usize) -> Result<()> {
        if self.dealiases(n) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "grid of {} points cannot resolve products of {} modes (need at least {})",
                self.grid_size,
                n,
                3 * n + 1
            )))
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let h = 1.0 / (self.grid_size + 1) as f64;
        (1..=self.grid_size).map(|j| j as f64 * h).collect()
    }

    /// Point values `Σ c_k √2 sin(kπ x_j)`.
    pub fn to_grid(&self, v: &SpectralField) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid_size];
        self.workspace().synthesize(v.coeffs(), &mut out)?;
        Ok(out)
    }

    /// Discrete projection of grid values onto `e_1..e_n`.
    pub fn from_grid(&self, values: &[f64], n: usize) -> Result<SpectralField> {
        let mut out = vec![0.0; n];
        self.workspace().analyze(values, &mut out)?;
        SpectralField::new(out)
    }

    /// Reusable buffers for repeated transforms on this grid.
    pub fn workspace(&self) -> SineTransform {
        SineTransform::new(self.clone())
    }
}

/// Transform buffers bound to one [`GridPlan`]; not shareable across threads
/// while in use, cheap to create per worker.
pub struct SineTransform {
    plan: GridPlan,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SineTransform {
    fn new(plan: GridPlan) -> Self {
        let len = 2 * (plan.grid_size + 1);
        let scratch_len = plan.fft.get_inplace_scratch_len();
        Self {
            plan,
            buffer: vec![Complex64::default(); len],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn plan(&self) -> &GridPlan {
        &self.plan
    }

    /// `out_k = Σ_j x_j sin(π j k / (M+1))` for `k = 1..=out.len()`, with
    /// `x_j = input[j-1]` zero-extended to `M` entries.
    fn dst1(&mut self, input: &[f64], out: &mut [f64]) {
        let m = self.plan.grid_size;
        let len = 2 * (m + 1);
        self.buffer.fill(Complex64::default());
        for (j, &x) in input.iter().enumerate() {
            self.buffer[j + 1].re = x;
            self.buffer[len - j - 1].re = -x;
        }
        self.plan
            .fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -0.5 * self.buffer[k + 1].im;
        }
    }

    /// Grid values of the sine series with coefficients `coeffs`.
    pub fn synthesize(&mut self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.plan.grid_size;
        if coeffs.len() > m {
            return Err(Error::config(format!(
                "grid of {m} points cannot represent {} modes",
                coeffs.len()
            )));
        }
        if out.len() != m {
            return Err(Error::argument(format!(
                "output holds {} values, grid has {m}",
                out.len()
            )));
        }
        self.dst1(coeffs, out);
        for o in out.iter_mut() {
            *o *= SQRT_2;
        }
        Ok(())
    }

    /// Coefficients of `e_1..e_{out.len()}` from grid values.
    pub fn analyze(&mut self, values: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.plan.grid_size;
        if values.len() != m {
            return Err(Error::argument(format!(
                "expected {m} grid values, got {}",
                values.len()
            )));
        }
        if out.len() > m {
            return Err(Error::config(format!(
                "cannot extract {} modes from {m} grid points",
                out.len()
            )));
        }
        self.dst1(values, out);
        let scale = SQRT_2 / (m + 1) as f64;
        for o in out.iter_mut() {
            *o *= scale;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn first_mode_on_three_points() {
        let plan = GridPlan::new(3).unwrap();
        let vals = plan.to_grid(&SpectralField::basis(1, 1)).unwrap();
        let expected = [1.0, SQRT_2, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-15, "{v} vs {e}");
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let plan = GridPlan::new(17).unwrap();
        assert!(plan
            .to_grid(&SpectralField::zeros(4))
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let back = plan.from_grid(&[0.0; 17], 5).unwrap();
        assert!(back.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn second_mode_round_trip() {
        let plan = GridPlan::new(7).unwrap();
        let vals = plan.to_grid(&SpectralField::basis(2, 2)).unwrap();
        let back = plan.from_grid(&vals, 2).unwrap();
        assert!(back.coeff(1).abs() < 1e-12);
        assert!((back.coeff(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn even_mode_of_sine_squared_vanishes() {
        let plan = GridPlan::new(16).unwrap();
        let vals: Vec<f64> = plan
            .points()
            .iter()
            .map(|x| 2.0 * (PI * x).sin().powi(2))
            .collect();
        let c = plan.from_grid(&vals, 4).unwrap();
        assert!(c.coeff(2).abs() < 1e-14);
        assert!(c.coeff(4).abs() < 1e-14);
    }

    #[test]
    fn size_checks() {
        let plan = GridPlan::new(3).unwrap();
        assert!(matches!(
            plan.to_grid(&SpectralField::zeros(4)),
            Err(Error::Config(_))
        ));
        assert!(matches!(plan.from_grid(&[0.0; 3], 4), Err(Error::Config(_))));
        assert!(GridPlan::new(0).is_err());
    }

    #[test]
    fn planned_sizes_dealias() {
        for n in [1, 4, 16, 100, 128, 256] {
            let plan = GridPlan::for_modes(n);
            assert!(plan.dealiases(n));
            assert!((plan.grid_size() + 1).is_power_of_two());
        }
        assert_eq!(GridPlan::for_modes(128).grid_size(), 511);
    }
}
