//! Multi-dimensional complex FFTs on row-major cubes, built from rustfft's
//! one-dimensional plans.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((size, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(size)
            } else {
                planner.plan_fft_forward(size)
            }
        })
        .clone()
}

/// Unnormalised in-place transform of a `size^dim` cube.
///
/// Forward computes `Σ_x f(x) e^{-ik·x}`, inverse `Σ_k f̂(k) e^{+ik·x}`.
pub(crate) fn transform(data: &mut [Complex64], dim: usize, size: usize, inverse: bool) {
    debug_assert_eq!(data.len(), size.pow(dim as u32));
    let fft = plan(size, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    // contiguous axis: rustfft walks consecutive chunks of `size`
    fft.process_with_scratch(data, &mut scratch);

    // strided axes: gather a tile of columns, transform, scatter back
    const TILE: usize = 32;
    let mut buf = vec![Complex64::default(); TILE * size];
    for axis in (0..dim - 1).rev() {
        let stride = size.pow((dim - 1 - axis) as u32);
        let block = size * stride;
        for chunk in data.chunks_exact_mut(block) {
            let mut start = 0;
            while start < stride {
                let width = TILE.min(stride - start);
                for m in 0..size {
                    let row = &chunk[m * stride + start..m * stride + start + width];
                    for (t, &value) in row.iter().enumerate() {
                        buf[t * size + m] = value;
                    }
                }
                fft.process_with_scratch(&mut buf[..width * size], &mut scratch);
                for m in 0..size {
                    let row = &mut chunk[m * stride + start..m * stride + start + width];
                    for (t, slot) in row.iter_mut().enumerate() {
                        *slot = buf[t * size + m];
                    }
                }
                start += width;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], dim: usize, size: usize) -> Vec<Complex64> {
        let total = size.pow(dim as u32);
        let coords = |flat: usize| -> Vec<usize> {
            let mut c = vec![0; dim];
            let mut rest = flat;
            for axis in (0..dim).rev() {
                c[axis] = rest % size;
                rest /= size;
            }
            c
        };
        (0..total)
            .map(|kf| {
                let k = coords(kf);
                (0..total)
                    .map(|xf| {
                        let x = coords(xf);
                        let phase: usize = k.iter().zip(&x).map(|(a, b)| a * b).sum();
                        let angle =
                            -2.0 * std::f64::consts::PI * (phase % size) as f64 / size as f64;
                        data[xf] * Complex64::from_polar(1.0, angle)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_3d() {
        let size = 6;
        let dim = 3;
        let data: Vec<Complex64> = (0..size * size * size)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        transform(&mut fast, dim, size, false);
        let slow = naive_dft(&data, dim, size);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let size = 8;
        let data: Vec<Complex64> = (0..size * size)
            .map(|i| Complex64::new(i as f64, -(i as f64).sqrt()))
            .collect();
        let mut work = data.clone();
        transform(&mut work, 2, size, false);
        transform(&mut work, 2, size, true);
        for (a, b) in work.iter().zip(&data) {
            assert!((a / (size * size) as f64 - b).norm() < 1e-12);
        }
    }
}
