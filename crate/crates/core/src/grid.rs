//! Periodic grids on the torus `[0, 2π)^dim`.
//!
//! Sample `m` along an axis sits at `x_m = 2π m / n`; the matching Fourier
//! lattice holds the integer wavenumbers `[-n/2, n/2)` in FFT order.
//! Data are stored row-major with the last axis contiguous.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of lattice points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Box side length (always 2π).
    pub fn extent(&self) -> f64 {
        2.0 * PI
    }

    pub fn spacing(&self) -> f64 {
        self.extent() / self.n as f64
    }

    /// Volume of the torus, `(2π)^dim`.
    pub fn volume(&self) -> f64 {
        self.extent().powi(self.dim as i32)
    }

    /// Quadrature weight of one sample, `(2π/n)^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Largest resolvable dyadic block index, `log2(n) - 2`.
    pub fn j_max(&self) -> i32 {
        self.n.trailing_zeros() as i32 - 2
    }

    /// Radius of the ball on which `S_{j_max+1}` is the identity, `3n/8`.
    ///
    /// Fields whose spectrum lies inside this ball are exactly reconstructed
    /// by the dyadic blocks `-1..=j_max`.
    pub fn resolved_radius(&self) -> f64 {
        0.375 * self.n as f64
    }

    /// Spherical two-thirds truncation radius, `n/3`.
    pub fn dealias_radius(&self) -> f64 {
        self.n as f64 / 3.0
    }

    /// Integer wavenumber of FFT index `m` along one axis.
    pub fn wavenumber(&self, m: usize) -> i64 {
        let half = self.n / 2;
        if m < half {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// FFT index of wavenumber `k` along one axis (wrapping modulo `n`).
    pub fn index_of(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Per-axis FFT indices of flat position `flat`; unused trailing axes are 0.
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            2 => idx[0] * n + idx[1],
            _ => (idx[0] * n + idx[1]) * n + idx[2],
        }
    }

    /// Wavevector at flat position `flat`; unused trailing axes are 0.
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let idx = self.unravel(flat);
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            k[axis] = self.wavenumber(idx[axis]);
        }
        k
    }

    /// Flat position of wavevector `k`.
    pub fn flat_of(&self, k: [i64; 3]) -> usize {
        let mut idx = [0usize; 3];
        for axis in 0..self.dim {
            idx[axis] = self.index_of(k[axis]);
        }
        self.ravel(idx)
    }

    /// `|k|^2` at every flat position.
    pub fn k_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|flat| {
                let k = self.wavevector(flat);
                (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
            })
            .collect()
    }

    /// `|k|` at every flat position.
    pub fn k_norm(&self) -> Vec<f64> {
        self.k_squared().into_iter().map(f64::sqrt).collect()
    }

    /// Physical coordinates of flat position `flat`.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = h * idx[axis] as f64;
        }
        x
    }

    /// True when `k` lies on the Nyquist plane of some axis (`k_a = -n/2`).
    pub fn is_nyquist(&self, k: [i64; 3]) -> bool {
        let half = (self.n / 2) as i64;
        k[..self.dim].iter().any(|&ka| ka == -half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(3, 12).is_err());
        assert!(Grid::new(3, 4).is_err());
        assert!(Grid::new(1, 16).is_err());
        assert!(Grid::new(2, 16).is_ok());
    }

    #[test]
    fn wavenumbers_cover_half_open_range() {
        let g = Grid::new(2, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|m| g.wavenumber(m)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for k in -4..4 {
            assert_eq!(g.wavenumber(g.index_of(k)), k);
        }
    }

    #[test]
    fn ravel_round_trip() {
        let g = Grid::new(3, 8).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.ravel(g.unravel(flat)), flat);
            assert_eq!(g.flat_of(g.wavevector(flat)), flat);
        }
    }

    #[test]
    fn dyadic_range() {
        assert_eq!(Grid::new(3, 32).unwrap().j_max(), 3);
        assert_eq!(Grid::new(2, 64).unwrap().j_max(), 4);
        assert_eq!(Grid::new(2, 8).unwrap().j_max(), 1);
    }
}
