//! Seeded random fields.
//!
//! Coefficients are drawn while walking the lattice ball `|k| ≤ radius` in a
//! fixed lexicographic order that does not depend on the grid size, so a
//! given seed produces the same trigonometric polynomial at every resolution
//! that resolves it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::solver::leray_project;

pub type FieldRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FieldRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut FieldRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Lattice vectors of the ball `|k| ≤ radius` whose first nonzero entry is
/// positive, in lexicographic order.
fn half_ball(dim: usize, radius: f64) -> Vec<[i64; 3]> {
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let mut out = Vec::new();
    let zs: Vec<i64> = if dim == 3 { (-r..=r).collect() } else { vec![0] };
    for a in -r..=r {
        for b in -r..=r {
            for &c in &zs {
                let k = [a, b, c];
                if ((a * a + b * b + c * c) as f64) > r2 {
                    continue;
                }
                let positive = k.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0);
                if positive {
                    out.push(k);
                }
            }
        }
    }
    out
}

fn check_radius(grid: Grid, radius: f64) -> Result<()> {
    if radius <= 0.0 || radius >= (grid.n() / 2) as f64 {
        return Err(Error::Domain(format!(
            "band radius {radius} must lie in (0, n/2) for n = {}",
            grid.n()
        )));
    }
    Ok(())
}

/// Real random field with independent Gaussian coefficients on
/// `0 < |k| ≤ radius`, amplitude scaled by `weight(|k|)`; zero mean.
pub fn weighted_field(
    grid: Grid,
    rng: &mut FieldRng,
    radius: f64,
    components: usize,
    weight: impl Fn(f64) -> f64,
) -> Result<Field> {
    check_radius(grid, radius)?;
    let ball = half_ball(grid.dim(), radius);
    let mut comps = vec![vec![Complex64::default(); grid.len()]; components];
    for k in &ball {
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let w = weight(kn);
        let plus = grid.flat_of(*k);
        let minus = grid.flat_of([-k[0], -k[1], -k[2]]);
        for comp in comps.iter_mut() {
            let z = Complex64::new(gaussian(rng), gaussian(rng)) * (w / 2f64.sqrt());
            comp[plus] = z;
            comp[minus] = z.conj();
        }
    }
    Field::from_spectral(grid, comps)
}

/// Real random field with unit-variance Gaussian coefficients on `0 < |k| ≤ radius`.
pub fn band_limited(grid: Grid, rng: &mut FieldRng, radius: f64, components: usize) -> Result<Field> {
    weighted_field(grid, rng, radius, components, |_| 1.0)
}

/// Divergence-free, mean-zero random velocity with energy spectrum
/// `E(|k|) ∝ |k|^{-slope}` on `|k| ≤ radius`, scaled to `‖u‖₂ = l2_norm`.
pub fn divergence_free(
    grid: Grid,
    rng: &mut FieldRng,
    radius: f64,
    slope: f64,
    l2_norm: f64,
) -> Result<Field> {
    let dim = grid.dim() as f64;
    // shell energy ~ |k|^{dim-1} amp², so amp ~ |k|^{-(slope+dim-1)/2}
    let raw = weighted_field(grid, rng, radius, grid.dim(), |k| k.powf(-(slope + dim - 1.0) / 2.0))?;
    let projected = leray_project(&raw);
    let norm = projected.l2_norm();
    if norm == 0.0 {
        return Err(Error::Domain("random divergence-free draw vanished".into()));
    }
    Ok(projected.scale(l2_norm / norm))
}

/// Sum of `count` Dirac masses with Gaussian weights at random grid points,
/// given by its Fourier coefficients. Meant to be frequency-localised by a
/// dyadic block; the result is then the extremal profile for Bernstein-type
/// ratios.
pub fn spike_train(grid: Grid, rng: &mut FieldRng, count: usize) -> Field {
    let dim = grid.dim();
    let n = grid.n();
    let mut coeffs = vec![Complex64::default(); grid.len()];
    let h = grid.spacing();
    for _ in 0..count {
        let weight = gaussian(rng);
        let mut x = [0.0; 3];
        for xa in x.iter_mut().take(dim) {
            *xa = h * rng.random_range(0..n) as f64;
        }
        for (flat, c) in coeffs.iter_mut().enumerate() {
            let k = grid.wavevector(flat);
            let phase = -(k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
            *c += Complex64::from_polar(weight, phase);
        }
    }
    Field::from_spectral(grid, vec![coeffs]).expect("lengths match the grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_polynomial_across_resolutions() {
        let coarse = Grid::new(2, 16).unwrap();
        let fine = Grid::new(2, 32).unwrap();
        let a = band_limited(coarse, &mut rng(3), 5.0, 1).unwrap();
        let b = band_limited(fine, &mut rng(3), 5.0, 1).unwrap();
        let ca = &a.spectral_data().unwrap()[0];
        let cb = &b.spectral_data().unwrap()[0];
        for flat in 0..coarse.len() {
            let k = coarse.wavevector(flat);
            assert_eq!(ca[flat], cb[fine.flat_of(k)]);
        }
        assert!((a.l2_norm() - b.l2_norm()).abs() < 1e-12 * a.l2_norm());
    }

    #[test]
    fn random_fields_are_real_and_band_limited() {
        let g = Grid::new(3, 16).unwrap();
        let f = band_limited(g, &mut rng(1), 4.5, 1).unwrap();
        assert!(f.is_hermitian(0.0));
        assert!(f.spectral_radius(0.0) <= 4.5);
        assert!(band_limited(g, &mut rng(1), 8.0, 1).is_err());
    }

    #[test]
    fn divergence_free_draw() {
        let g = Grid::new(3, 16).unwrap();
        let u = divergence_free(g, &mut rng(9), 5.0, 5.0 / 3.0, 2.0).unwrap();
        assert!(u.divergence().max_abs() < 1e-13);
        assert!((u.l2_norm() - 2.0).abs() < 1e-12);
        assert!(u.mean().iter().all(|m| *m == 0.0));
    }
}
