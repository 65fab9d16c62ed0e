//! Seeded Brownian increments with exact coarse/fine coupling.
//!
//! Every fine increment `ΔW[k][l]` is a pure function of
//! `(master_seed, k, l)`: two 64-bit words are drawn from a keyed SplitMix64
//! hash of the indices and mapped to a standard normal by the cosine branch of
//! Box–Muller, then scaled by `√(T/N_fine)`.
//!
//! Coarse increments are pairwise (binary-tree) sums of the fine ones. Because
//! the fine count is a power of two, the block sum at level `N` is bit for bit
//! the sum of its two child blocks at level `2N`, at every level.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAX_ENTRIES: usize = 1 << 28;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed hash of a `(seed, a, b)` counter triple.
#[inline]
pub fn counter_hash(seed: u64, a: u64, b: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN));
    h = mix64(h ^ a.wrapping_mul(0xd1b5_4a32_d192_ed03).wrapping_add(GOLDEN));
    mix64(h ^ b.wrapping_mul(0xaef1_7502_108e_f2d9).wrapping_add(GOLDEN))
}

/// Uniform in the open interval `(0, 1)` with 53 bits of resolution.
#[inline]
pub fn counter_uniform(seed: u64, a: u64, b: u64) -> f64 {
    ((counter_hash(seed, a, b) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate keyed by `(seed, a, b)`.
#[inline]
pub fn counter_normal(seed: u64, a: u64, b: u64) -> f64 {
    let u1 = counter_uniform(seed, a, 2 * b);
    let u2 = counter_uniform(seed, a, 2 * b + 1);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Independent per-sample seed derived from a master seed.
pub fn sample_seed(master_seed: u64, sample: u64) -> u64 {
    counter_hash(master_seed, u64::MAX, sample)
}

/// Fine-grid increment table `ΔW[k][l] ~ N(0, T/N_fine)`, `k < N_fine`,
/// `l = 1..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    fine_steps: usize,
    modes: usize,
    horizon: f64,
    // row-major, one row of `modes` entries per fine step
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn generate(seed: u64, fine_steps: usize, modes: usize, horizon: f64) -> Result<Self> {
        Self::check_shape(fine_steps, modes, horizon)?;
        let scale = (horizon / fine_steps as f64).sqrt();
        let mut increments = Vec::with_capacity(fine_steps * modes);
        for k in 0..fine_steps as u64 {
            for l in 1..=modes as u64 {
                increments.push(scale * counter_normal(seed, k, l));
            }
        }
        Ok(Self {
            seed,
            fine_steps,
            modes,
            horizon,
            increments,
        })
    }

    fn check_shape(fine_steps: usize, modes: usize, horizon: f64) -> Result<()> {
        if !fine_steps.is_power_of_two() {
            return Err(Error::config(format!(
                "fine step count must be a power of two, got {fine_steps}"
            )));
        }
        if modes == 0 {
            return Err(Error::config("need at least one noise mode"));
        }
        if fine_steps.saturating_mul(modes) > MAX_ENTRIES {
            return Err(Error::config(format!(
                "{fine_steps} x {modes} increments exceed the 2^28 entry limit"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!("horizon must be positive, got {horizon}")));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fine_steps(&self) -> usize {
        self.fine_steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Fine increment of mode `l` (1-based) over step `k`.
    pub fn fine(&self, k: usize, l: usize) -> f64 {
        self.increments[k * self.modes + (l - 1)]
    }

    fn check_level(&self, coarse_steps: usize, m: usize) -> Result<usize> {
        if coarse_steps == 0 || self.fine_steps % coarse_steps != 0 {
            return Err(Error::argument(format!(
                "{coarse_steps} steps do not divide the fine grid of {}",
                self.fine_steps
            )));
        }
        if m == 0 || m > self.modes {
            return Err(Error::argument(format!(
                "requested {m} noise modes, path carries {}",
                self.modes
            )));
        }
        Ok(self.fine_steps / coarse_steps)
    }

    /// Increment over `[jT/N, (j+1)T/N)` on modes `1..=m`.
    pub fn coarse_increment(&self, coarse_steps: usize, j: usize, m: usize) -> Result<Vec<f64>> {
        let ratio = self.check_level(coarse_steps, m)?;
        if j >= coarse_steps {
            return Err(Error::argument(format!(
                "step {j} outside a grid of {coarse_steps}"
            )));
        }
        let mut out = vec![0.0; m];
        self.block_sum(j * ratio, ratio, &mut out);
        Ok(out)
    }

    fn block_sum(&self, start: usize, len: usize, out: &mut [f64]) {
        if len == 1 {
            let row = &self.increments[start * self.modes..];
            out.copy_from_slice(&row[..out.len()]);
            return;
        }
        let half = len / 2;
        let mut right = vec![0.0; out.len()];
        self.block_sum(start, half, out);
        self.block_sum(start + half, half, &mut right);
        for (o, r) in out.iter_mut().zip(&right) {
            *o += r;
        }
    }

    /// All increments of level `coarse_steps` on modes `1..=m`, row-major.
    /// Entry `(j, l)` equals `coarse_increment(coarse_steps, j, m)[l-1]` bit
    /// for bit.
    pub fn level(&self, coarse_steps: usize, m: usize) -> Result<IncrementTable> {
        self.check_level(coarse_steps, m)?;
        let mut rows = self.fine_steps;
        let mut data: Vec<f64> = self
            .increments
            .chunks_exact(self.modes)
            .flat_map(|row| row[..m].iter().copied())
            .collect();
        while rows > coarse_steps {
            rows /= 2;
            let next: Vec<f64> = (0..rows)
                .flat_map(|j| {
                    let a = &data[2 * j * m..(2 * j + 1) * m];
                    let b = &data[(2 * j + 1) * m..(2 * j + 2) * m];
                    a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>()
                })
                .collect();
            data = next;
        }
        Ok(IncrementTable { steps: rows, modes: m, data })
    }

    /// Little-endian dump: seed (u64), fine steps (u64), modes (u64),
    /// horizon (f64), then the table row by row as f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.fine_steps as u64).to_le_bytes())?;
        w.write_all(&(self.modes as u64).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        for x in &self.increments {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let seed = u64::from_le_bytes(next(&mut r)?);
        let fine_steps = usize::try_from(u64::from_le_bytes(next(&mut r)?))
            .map_err(|_| Error::Format("fine step count overflows".into()))?;
        let modes = usize::try_from(u64::from_le_bytes(next(&mut r)?))
            .map_err(|_| Error::Format("mode count overflows".into()))?;
        let horizon = f64::from_le_bytes(next(&mut r)?);
        Self::check_shape(fine_steps, modes, horizon)
            .map_err(|e| Error::Format(format!("bad path header: {e}")))?;
        let mut increments = Vec::with_capacity(fine_steps * modes);
        for _ in 0..fine_steps * modes {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self {
            seed,
            fine_steps,
            modes,
            horizon,
            increments,
        })
    }
}

/// Increments of one coarse level.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    steps: usize,
    modes: usize,
    data: Vec<f64>,
}

impl IncrementTable {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.modes..(j + 1) * self.modes]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regeneration_is_bit_identical() {
        let a = BrownianPath::generate(42, 64, 5, 1.0).unwrap();
        let b = BrownianPath::generate(42, 64, 5, 1.0).unwrap();
        assert_eq!(a, b);
        let c = BrownianPath::generate(43, 64, 5, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn entries_do_not_depend_on_table_shape() {
        let small = BrownianPath::generate(9, 16, 3, 1.0).unwrap();
        let wide = BrownianPath::generate(9, 16, 7, 1.0).unwrap();
        for k in 0..16 {
            for l in 1..=3 {
                assert_eq!(small.fine(k, l), wide.fine(k, l));
            }
        }
    }

    #[test]
    fn finest_level_is_raw_table() {
        let p = BrownianPath::generate(1, 32, 4, 2.0).unwrap();
        for k in 0..32 {
            let inc = p.coarse_increment(32, k, 4).unwrap();
            for l in 1..=4 {
                assert_eq!(inc[l - 1], p.fine(k, l));
            }
        }
    }

    #[test]
    fn parents_are_sums_of_children() {
        let p = BrownianPath::generate(5, 256, 3, 1.0).unwrap();
        let mut n = 1;
        while n < 256 {
            for j in 0..n {
                let parent = p.coarse_increment(n, j, 3).unwrap();
                let a = p.coarse_increment(2 * n, 2 * j, 3).unwrap();
                let b = p.coarse_increment(2 * n, 2 * j + 1, 3).unwrap();
                for l in 0..3 {
                    assert_eq!(parent[l].to_bits(), (a[l] + b[l]).to_bits());
                }
            }
            n *= 2;
        }
    }

    #[test]
    fn level_table_matches_block_sums() {
        let p = BrownianPath::generate(11, 128, 4, 1.0).unwrap();
        let table = p.level(16, 3).unwrap();
        assert_eq!(table.steps(), 16);
        for j in 0..16 {
            assert_eq!(table.row(j), p.coarse_increment(16, j, 3).unwrap().as_slice());
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            BrownianPath::generate(0, 100, 2, 1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            BrownianPath::generate(0, 1 << 20, 1 << 9, 1.0),
            Err(Error::Config(_))
        ));
        let p = BrownianPath::generate(0, 64, 2, 1.0).unwrap();
        assert!(matches!(p.coarse_increment(48, 0, 1), Err(Error::Argument(_))));
        assert!(matches!(p.coarse_increment(8, 8, 1), Err(Error::Argument(_))));
        assert!(matches!(p.coarse_increment(8, 0, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn dump_round_trip() {
        let p = BrownianPath::generate(77, 16, 3, 0.5).unwrap();
        let mut bytes = Vec::new();
        p.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 16 * 3 * 8);
        assert_eq!(&bytes[..8], &77u64.to_le_bytes());
        let back = BrownianPath::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, p);
        assert!(BrownianPath::read_from(&bytes[..40]).is_err());
    }
}
