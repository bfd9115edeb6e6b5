//! Scalar and vector fields on the torus, held either as real samples or as
//! complex Fourier coefficients.
//!
//! Coefficients are normalised so that `f(x) = Σ_k f̂(k) e^{ik·x}`; a field
//! `cos(x₁)` therefore carries `1/2` at `k = ±e₁`. Vector fields store one
//! scalar array per component.

use std::borrow::Cow;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Physical,
    Spectral,
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    Physical(Vec<Vec<f64>>),
    Spectral(Vec<Vec<Complex64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Data,
}

/// How pointwise products of two fields are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductRule {
    /// Zero-padded transforms on a `3n/2` grid; retained modes are exact.
    #[default]
    ThreeHalves,
    /// Plain collocation on the base grid. Aliases; only used as a negative control.
    Aliased,
}

/// Validated Lebesgue exponent `p ∈ [1, ∞]`.
pub fn check_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("Lebesgue exponent must lie in [1, inf], got {p}")));
    }
    Ok(p)
}

impl Field {
    pub fn zeros(grid: Grid, components: usize, repr: Representation) -> Self {
        assert!(components > 0, "a field needs at least one component");
        let data = match repr {
            Representation::Physical => Data::Physical(vec![vec![0.0; grid.len()]; components]),
            Representation::Spectral => {
                Data::Spectral(vec![vec![Complex64::default(); grid.len()]; components])
            }
        };
        Self { grid, data }
    }

    pub fn from_physical(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        check_lengths(grid, components.iter().map(Vec::len))?;
        Ok(Self { grid, data: Data::Physical(components) })
    }

    pub fn from_spectral(grid: Grid, components: Vec<Vec<Complex64>>) -> Result<Self> {
        check_lengths(grid, components.iter().map(Vec::len))?;
        Ok(Self { grid, data: Data::Spectral(components) })
    }

    /// Samples a scalar function at the grid points.
    pub fn scalar_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, data: Data::Physical(vec![values]) }
    }

    /// Samples a vector function; only the first `dim` entries are kept.
    pub fn vector_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut comps = vec![Vec::with_capacity(grid.len()); grid.dim()];
        for i in 0..grid.len() {
            let v = f(grid.point(i));
            for (c, comp) in comps.iter_mut().enumerate() {
                comp.push(v[c]);
            }
        }
        Self { grid, data: Data::Physical(comps) }
    }

    /// Stacks scalar fields into one multi-component field (spectral).
    pub fn stack(parts: &[Field]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("cannot stack an empty list of fields".into()))?;
        let grid = first.grid;
        let mut comps = Vec::new();
        for part in parts {
            if part.grid != grid {
                return Err(Error::Shape("stacked fields live on different grids".into()));
            }
            comps.extend(part.spectral_components().into_owned());
        }
        Ok(Self { grid, data: Data::Spectral(comps) })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn components(&self) -> usize {
        match &self.data {
            Data::Physical(c) => c.len(),
            Data::Spectral(c) => c.len(),
        }
    }

    pub fn representation(&self) -> Representation {
        match self.data {
            Data::Physical(_) => Representation::Physical,
            Data::Spectral(_) => Representation::Spectral,
        }
    }

    pub fn is_vector(&self) -> bool {
        self.components() == self.grid.dim()
    }

    /// Physical samples if the field is held physically.
    pub fn physical_data(&self) -> Option<&[Vec<f64>]> {
        match &self.data {
            Data::Physical(c) => Some(c),
            Data::Spectral(_) => None,
        }
    }

    /// Fourier coefficients if the field is held spectrally.
    pub fn spectral_data(&self) -> Option<&[Vec<Complex64>]> {
        match &self.data {
            Data::Spectral(c) => Some(c),
            Data::Physical(_) => None,
        }
    }

    pub fn spectral_data_mut(&mut self) -> Option<&mut [Vec<Complex64>]> {
        match &mut self.data {
            Data::Spectral(c) => Some(c),
            Data::Physical(_) => None,
        }
    }

    pub fn physical_components(&self) -> Cow<'_, Vec<Vec<f64>>> {
        match &self.data {
            Data::Physical(c) => Cow::Borrowed(c),
            Data::Spectral(c) => {
                let refs: Vec<&[Complex64]> = c.iter().map(|v| v.as_slice()).collect();
                Cow::Owned(inverse_real_batch(self.grid, &refs))
            }
        }
    }

    pub fn spectral_components(&self) -> Cow<'_, Vec<Vec<Complex64>>> {
        match &self.data {
            Data::Spectral(c) => Cow::Borrowed(c),
            Data::Physical(c) => {
                Cow::Owned(c.iter().map(|comp| forward(self.grid, comp)).collect())
            }
        }
    }

    pub fn to_spectral(&self) -> Field {
        Field { grid: self.grid, data: Data::Spectral(self.spectral_components().into_owned()) }
    }

    /// Converts to real samples. Non-Hermitian coefficients lose their
    /// anti-Hermitian part (only the real part of the synthesis is kept).
    pub fn to_physical(&self) -> Field {
        Field { grid: self.grid, data: Data::Physical(self.physical_components().into_owned()) }
    }

    pub fn into_spectral(self) -> Field {
        match self.data {
            Data::Spectral(_) => self,
            Data::Physical(_) => self.to_spectral(),
        }
    }

    pub fn into_physical(self) -> Field {
        match self.data {
            Data::Physical(_) => self,
            Data::Spectral(_) => self.to_physical(),
        }
    }

    /// Single component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Field {
        let data = match &self.data {
            Data::Physical(v) => Data::Physical(vec![v[c].clone()]),
            Data::Spectral(v) => Data::Spectral(vec![v[c].clone()]),
        };
        Field { grid: self.grid, data }
    }

    /// Checks `f̂(-k) = conj f̂(k)` for every component up to `tol` (absolute).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let grid = self.grid;
        self.spectral_components().iter().all(|comp| {
            (0..grid.len()).all(|flat| {
                let k = grid.wavevector(flat);
                let mirror = grid.flat_of([-k[0], -k[1], -k[2]]);
                (comp[mirror] - comp[flat].conj()).norm() <= tol
            })
        })
    }

    /// Mean value of each component (the `k = 0` coefficient).
    pub fn mean(&self) -> Vec<f64> {
        self.spectral_components().iter().map(|c| c[0].re).collect()
    }

    /// Largest pointwise Euclidean magnitude over the grid samples.
    pub fn max_abs(&self) -> f64 {
        pointwise_magnitude(&self.physical_components())
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// `L^p` norm by rectangle-rule quadrature of the pointwise Euclidean
    /// magnitude; `p = ∞` takes the sample maximum.
    ///
    /// Exact for trigonometric polynomials of degree below `n/p` when `p` is
    /// an even integer. Other finite exponents are approximate.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let p = check_exponent(p)?;
        let mag = pointwise_magnitude(&self.physical_components());
        Ok(lp_of_magnitude(&mag, p, self.grid.cell_volume()))
    }

    /// `L²` norm; uses Parseval when the field is already spectral.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Real inner product `∫ f·g dx` summed over components.
    pub fn inner(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "inner product across grids");
        assert_eq!(self.components(), other.components(), "inner product component mismatch");
        match (&self.data, &other.data) {
            (Data::Physical(a), Data::Physical(b)) => {
                let s: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
                    .sum();
                s * self.grid.cell_volume()
            }
            _ => {
                let a = self.spectral_components();
                let b = other.spectral_components();
                let s: f64 = a
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p.conj() * q).re).sum::<f64>())
                    .sum();
                s * self.grid.volume()
            }
        }
    }

    /// `(2π)^dim Σ_k |f̂(k)|²`, the spectral side of Parseval.
    pub fn coefficient_energy(&self) -> f64 {
        let s: f64 = self
            .spectral_components()
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// Multiplies every component by a real Fourier multiplier given per
    /// lattice position.
    pub fn apply_multiplier(&self, multiplier: &[f64]) -> Field {
        assert_eq!(multiplier.len(), self.grid.len());
        let comps = self
            .spectral_components()
            .iter()
            .map(|c| c.iter().zip(multiplier).map(|(z, m)| z * m).collect())
            .collect();
        Field { grid: self.grid, data: Data::Spectral(comps) }
    }

    /// Multiplies every component by a complex multiplier `m(k)`.
    pub fn map_spectral(&self, m: impl Fn([i64; 3]) -> Complex64) -> Field {
        let grid = self.grid;
        let factors: Vec<Complex64> = (0..grid.len()).map(|i| m(grid.wavevector(i))).collect();
        let comps = self
            .spectral_components()
            .iter()
            .map(|c| c.iter().zip(&factors).map(|(z, f)| z * f).collect())
            .collect();
        Field { grid, data: Data::Spectral(comps) }
    }

    /// `∂^α f`: coefficient-wise multiplication by `(ik)^α`.
    ///
    /// Odd derivatives annihilate the Nyquist plane of their axis, which keeps
    /// real fields real.
    pub fn derivative(&self, alpha: &[u32]) -> Field {
        let grid = self.grid;
        let dim = grid.dim();
        assert!(alpha.len() <= dim, "multi-index longer than the grid dimension");
        let half = (grid.n() / 2) as i64;
        let one = Complex64::new(1.0, 0.0);
        let tables: Vec<Vec<Complex64>> = (0..dim)
            .map(|axis| {
                let order = alpha.get(axis).copied().unwrap_or(0);
                (0..grid.n())
                    .map(|i| {
                        let k = grid.wavenumber(i);
                        if order == 0 {
                            one
                        } else if k == -half && order % 2 == 1 {
                            Complex64::default()
                        } else {
                            Complex64::new(0.0, k as f64).powu(order)
                        }
                    })
                    .collect()
            })
            .collect();
        let factors: Vec<Complex64> = (0..grid.len())
            .map(|flat| {
                let idx = grid.unravel(flat);
                let mut factor = one;
                for (axis, &order) in alpha.iter().enumerate() {
                    if order != 0 {
                        factor *= tables[axis][idx[axis]];
                    }
                }
                factor
            })
            .collect();
        let comps = self
            .spectral_components()
            .iter()
            .map(|c| c.iter().zip(&factors).map(|(z, f)| z * f).collect())
            .collect();
        Field { grid, data: Data::Spectral(comps) }
    }

    /// `∂_axis f`.
    pub fn partial(&self, axis: usize) -> Field {
        let mut alpha = [0u32; 3];
        alpha[axis] = 1;
        self.derivative(&alpha[..self.grid.dim()])
    }

    /// Gradient. A scalar yields `dim` components; a field with `c`
    /// components yields `c·dim` components ordered `(c, i) ↦ ∂_i f_c`.
    pub fn gradient(&self) -> Field {
        let dim = self.grid.dim();
        let spec = self.to_spectral();
        let mut comps = Vec::with_capacity(self.components() * dim);
        for c in 0..self.components() {
            let fc = spec.component(c);
            for axis in 0..dim {
                comps.push(fc.partial(axis).take_single_spectral());
            }
        }
        Field { grid: self.grid, data: Data::Spectral(comps) }
    }

    /// Divergence of a vector field.
    pub fn divergence(&self) -> Field {
        assert!(self.is_vector(), "divergence needs a vector field");
        let dim = self.grid.dim();
        let spec = self.spectral_components();
        let grid = self.grid;
        let half = (grid.n() / 2) as i64;
        let mut out = vec![Complex64::default(); grid.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let k = grid.wavevector(flat);
            for axis in 0..dim {
                if k[axis] != -half {
                    *slot += Complex64::new(0.0, k[axis] as f64) * spec[axis][flat];
                }
            }
        }
        Field { grid, data: Data::Spectral(vec![out]) }
    }

    /// `-Δ f` eigenvalues applied: `|k|² f̂`.
    pub fn neg_laplacian(&self) -> Field {
        self.apply_multiplier(&self.grid.k_squared())
    }

    /// Keeps modes with `|k| ≤ radius`.
    pub fn truncate_radius(&self, radius: f64) -> Field {
        let r2 = radius * radius;
        let mask: Vec<f64> = self
            .grid
            .k_squared()
            .into_iter()
            .map(|k2| if k2 <= r2 { 1.0 } else { 0.0 })
            .collect();
        self.apply_multiplier(&mask)
    }

    /// Largest `|k|` carrying a coefficient above `tol` in magnitude.
    pub fn spectral_radius(&self, tol: f64) -> f64 {
        let k2 = self.grid.k_squared();
        let spec = self.spectral_components();
        let mut r2: f64 = 0.0;
        for comp in spec.iter() {
            for (z, &kk) in comp.iter().zip(&k2) {
                if z.norm() > tol {
                    r2 = r2.max(kk);
                }
            }
        }
        r2.sqrt()
    }

    /// Pointwise product with the default (three-halves) dealiasing.
    pub fn dealiased_product(&self, other: &Field) -> Result<Field> {
        product(self, other, ProductRule::ThreeHalves)
    }

    /// Pointwise dot product `Σ_c f_c g_c` of two fields with equal component counts.
    pub fn dot(&self, other: &Field, rule: ProductRule) -> Result<Field> {
        if self.components() != other.components() {
            return Err(Error::Shape("dot product of fields with different component counts".into()));
        }
        let space = ProductSpace::new(self.grid, rule);
        let a = self.spectral_components();
        let b = other.spectral_components();
        let mut acc = vec![Complex64::default(); space.work_len()];
        for (x, y) in a.iter().zip(b.iter()) {
            let xs = space.lift(x);
            let ys = space.lift(y);
            for ((s, p), q) in acc.iter_mut().zip(&xs).zip(&ys) {
                *s += p * q;
            }
        }
        Ok(Field { grid: self.grid, data: Data::Spectral(vec![space.project(acc)]) })
    }

    /// Advective derivative `(a·∇) f` for a vector `a` and any field `f`.
    pub fn advected_by(&self, a: &Field, rule: ProductRule) -> Result<Field> {
        if self.grid != a.grid {
            return Err(Error::Shape("advection across grids".into()));
        }
        if !a.is_vector() {
            return Err(Error::Shape("advecting field must be a vector".into()));
        }
        let dim = self.grid.dim();
        let space = ProductSpace::new(self.grid, rule);
        let a_spec = a.spectral_components();
        let a_lift: Vec<Vec<Complex64>> = a_spec.iter().map(|c| space.lift(c)).collect();
        let f_spec = self.to_spectral();
        let mut out = Vec::with_capacity(self.components());
        for c in 0..self.components() {
            let fc = f_spec.component(c);
            let mut acc = vec![Complex64::default(); space.work_len()];
            for (axis, ai) in a_lift.iter().enumerate().take(dim) {
                let d = space.lift(fc.partial(axis).single_spectral());
                for ((s, p), q) in acc.iter_mut().zip(ai).zip(&d) {
                    *s += p * q;
                }
            }
            out.push(space.project(acc));
        }
        Ok(Field { grid: self.grid, data: Data::Spectral(out) })
    }

    fn single_spectral(&self) -> &[Complex64] {
        match &self.data {
            Data::Spectral(c) => &c[0],
            Data::Physical(_) => panic!("expected spectral data"),
        }
    }

    fn take_single_spectral(self) -> Vec<Complex64> {
        match self.data {
            Data::Spectral(mut c) => c.swap_remove(0),
            Data::Physical(c) => forward(self.grid, &c[0]),
        }
    }

    fn combine(&self, other: &Field, alpha: f64, beta: f64) -> Field {
        assert_eq!(self.grid, other.grid, "field arithmetic across grids");
        assert_eq!(self.components(), other.components(), "field arithmetic component mismatch");
        match (&self.data, &other.data) {
            (Data::Physical(a), Data::Physical(b)) => Field {
                grid: self.grid,
                data: Data::Physical(
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| alpha * p + beta * q).collect())
                        .collect(),
                ),
            },
            _ => {
                let a = self.spectral_components();
                let b = other.spectral_components();
                Field {
                    grid: self.grid,
                    data: Data::Spectral(
                        a.iter()
                            .zip(b.iter())
                            .map(|(x, y)| {
                                x.iter().zip(y).map(|(p, q)| p * alpha + q * beta).collect()
                            })
                            .collect(),
                    ),
                }
            }
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        let data = match &self.data {
            Data::Physical(c) => {
                Data::Physical(c.iter().map(|v| v.iter().map(|x| x * s).collect()).collect())
            }
            Data::Spectral(c) => {
                Data::Spectral(c.iter().map(|v| v.iter().map(|x| x * s).collect()).collect())
            }
        };
        Field { grid: self.grid, data }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.combine(rhs, 1.0, 1.0)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.combine(rhs, 1.0, -1.0)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, s: f64) -> Field {
        self.scale(s)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

/// Pointwise product `f·g` under `rule`.
///
/// Equal component counts multiply component-wise; a scalar operand is
/// broadcast against a vector one. The result is spectral. When one operand
/// is a constant the product reduces to an exact scaling of the other.
pub fn product(f: &Field, g: &Field, rule: ProductRule) -> Result<Field> {
    if f.grid != g.grid {
        return Err(Error::Shape(format!(
            "product of fields on different grids ({:?} vs {:?})",
            f.grid, g.grid
        )));
    }
    let (cf, cg) = (f.components(), g.components());
    if cf != cg && cf != 1 && cg != 1 {
        return Err(Error::Shape(format!(
            "cannot multiply fields with {cf} and {cg} components"
        )));
    }
    let grid = f.grid;
    let a = f.spectral_components();
    let b = g.spectral_components();
    let out_components = cf.max(cg);

    let a_const = coeffs_constant(&a);
    let b_const = coeffs_constant(&b);
    if a_const || b_const {
        let comps = (0..out_components)
            .map(|c| {
                let x = &a[c.min(cf - 1)];
                let y = &b[c.min(cg - 1)];
                if a_const {
                    let s = x[0];
                    y.iter().map(|z| s * z).collect()
                } else {
                    let s = y[0];
                    x.iter().map(|z| z * s).collect()
                }
            })
            .collect();
        return Ok(Field { grid, data: Data::Spectral(comps) });
    }

    let space = ProductSpace::new(grid, rule);
    let la: Vec<Vec<Complex64>> = a.iter().map(|c| space.lift(c)).collect();
    let lb: Vec<Vec<Complex64>> = b.iter().map(|c| space.lift(c)).collect();
    let comps = (0..out_components)
        .map(|c| {
            let x = &la[c.min(cf - 1)];
            let y = &lb[c.min(cg - 1)];
            space.project(x.iter().zip(y).map(|(p, q)| p * q).collect())
        })
        .collect();
    Ok(Field { grid, data: Data::Spectral(comps) })
}

/// Working space for products: coefficients are lifted to physical values on
/// the (possibly padded) product grid, combined pointwise and projected back.
#[derive(Debug, Clone, Copy)]
pub struct ProductSpace {
    grid: Grid,
    size: usize,
}

impl ProductSpace {
    pub fn new(grid: Grid, rule: ProductRule) -> Self {
        let size = match rule {
            ProductRule::ThreeHalves => 3 * grid.n() / 2,
            ProductRule::Aliased => grid.n(),
        };
        Self { grid, size }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn work_len(&self) -> usize {
        self.size.pow(self.grid.dim() as u32)
    }

    fn work_flat(&self, k: [i64; 3]) -> usize {
        let m = self.size as i64;
        let mut flat = 0usize;
        for &ka in k.iter().take(self.grid.dim()) {
            flat = flat * self.size + ka.rem_euclid(m) as usize;
        }
        flat
    }

    /// Base-grid coefficients to physical values on the product grid.
    pub fn lift(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let grid = self.grid;
        let mut work = vec![Complex64::default(); self.work_len()];
        if self.size == grid.n() {
            work.copy_from_slice(coeffs);
        } else {
            for (flat, &z) in coeffs.iter().enumerate() {
                if z != Complex64::default() {
                    work[self.work_flat(grid.wavevector(flat))] = z;
                }
            }
        }
        fft::transform(&mut work, grid.dim(), self.size, true);
        work
    }

    /// Physical values on the product grid back to base-grid coefficients
    /// (modes outside the base lattice are dropped).
    pub fn project(&self, mut work: Vec<Complex64>) -> Vec<Complex64> {
        let grid = self.grid;
        fft::transform(&mut work, grid.dim(), self.size, false);
        let norm = 1.0 / self.work_len() as f64;
        if self.size == grid.n() {
            work.iter_mut().for_each(|z| *z *= norm);
            return work;
        }
        (0..grid.len())
            .map(|flat| work[self.work_flat(grid.wavevector(flat))] * norm)
            .collect()
    }
}

fn coeffs_constant(comps: &[Vec<Complex64>]) -> bool {
    comps.iter().all(|c| c[1..].iter().all(|z| *z == Complex64::default()))
}

/// Pointwise Euclidean magnitude across components.
pub fn pointwise_magnitude(comps: &[Vec<f64>]) -> Vec<f64> {
    if comps.len() == 1 {
        return comps[0].iter().map(|v| v.abs()).collect();
    }
    let len = comps[0].len();
    (0..len)
        .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

/// Rectangle-rule `L^p` norm of nonnegative samples.
pub fn lp_of_magnitude(mag: &[f64], p: f64, cell_volume: f64) -> f64 {
    if p.is_infinite() {
        return mag.iter().copied().fold(0.0, f64::max);
    }
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    // scaled by the peak to stay clear of overflow for large p
    let s: f64 = if p == 2.0 {
        mag.iter().map(|m| (m / peak) * (m / peak)).sum()
    } else {
        mag.iter().map(|m| (m / peak).powf(p)).sum()
    };
    peak * (s * cell_volume).powf(1.0 / p)
}

fn check_lengths(grid: Grid, lens: impl Iterator<Item = usize>) -> Result<()> {
    let mut count = 0;
    for len in lens {
        count += 1;
        if len != grid.len() {
            return Err(Error::Shape(format!(
                "component holds {len} values, grid expects {}",
                grid.len()
            )));
        }
    }
    if count == 0 {
        return Err(Error::Shape("field needs at least one component".into()));
    }
    Ok(())
}

fn forward(grid: Grid, values: &[f64]) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform(&mut work, grid.dim(), grid.n(), false);
    let norm = 1.0 / grid.len() as f64;
    work.iter_mut().for_each(|z| *z *= norm);
    work
}

fn inverse(grid: Grid, coeffs: &[Complex64]) -> Vec<f64> {
    let mut work = coeffs.to_vec();
    fft::transform(&mut work, grid.dim(), grid.n(), true);
    work.into_iter().map(|z| z.re).collect()
}

/// Flat index of `-k` for every flat `k`.
fn mirror_table(grid: Grid) -> Vec<usize> {
    let n = grid.n();
    let dim = grid.dim();
    (0..grid.len())
        .map(|flat| {
            let mut rest = flat;
            let mut out = 0;
            let mut place = 1;
            for _ in 0..dim {
                let i = rest % n;
                rest /= n;
                out += ((n - i) % n) * place;
                place *= n;
            }
            out
        })
        .collect()
}

/// Real parts of the inverse transforms of `coeffs`, two spectra per
/// complex transform. Each spectrum is reduced to its Hermitian part first,
/// which leaves the real part of its inverse unchanged.
pub(crate) fn inverse_real_batch(grid: Grid, coeffs: &[&[Complex64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(coeffs.len());
    if coeffs.len() < 2 {
        out.extend(coeffs.iter().map(|c| inverse(grid, c)));
        return out;
    }
    let mirror = mirror_table(grid);
    let i = Complex64::new(0.0, 1.0);
    for pair in coeffs.chunks(2) {
        if let [a, b] = pair {
            let mut work: Vec<Complex64> = (0..grid.len())
                .map(|k| {
                    let m = mirror[k];
                    let ha = (a[k] + a[m].conj()) * 0.5;
                    let hb = (b[k] + b[m].conj()) * 0.5;
                    ha + i * hb
                })
                .collect();
            fft::transform(&mut work, grid.dim(), grid.n(), true);
            out.push(work.iter().map(|z| z.re).collect());
            out.push(work.iter().map(|z| z.im).collect());
        } else {
            out.push(inverse(grid, pair[0]));
        }
    }
    out
}

/// `‖m·f‖_p` for every multiplier `m`, with `m(−k) = m(k)`. Components are
/// streamed two per complex transform through one work buffer.
pub fn filtered_norms(f: &Field, multipliers: &[&[f64]], p: f64) -> Result<Vec<f64>> {
    let p = check_exponent(p)?;
    let grid = f.grid;
    let len = grid.len();
    let mirror = mirror_table(grid);
    let sym: Vec<Vec<Complex64>> = f
        .spectral_components()
        .iter()
        .map(|c| (0..len).map(|k| (c[k] + c[mirror[k]].conj()) * 0.5).collect())
        .collect();
    let mut work = vec![Complex64::default(); len];
    let mut mag2 = vec![0.0; len];
    let mut out = Vec::with_capacity(multipliers.len());
    for m in multipliers {
        assert_eq!(m.len(), len, "multiplier length");
        mag2.fill(0.0);
        for pair in sym.chunks(2) {
            match pair {
                [a, b] => {
                    for k in 0..len {
                        work[k] = Complex64::new(a[k].re - b[k].im, a[k].im + b[k].re) * m[k];
                    }
                    fft::transform(&mut work, grid.dim(), grid.n(), true);
                    for (acc, z) in mag2.iter_mut().zip(&work) {
                        *acc += z.re * z.re + z.im * z.im;
                    }
                }
                [a] => {
                    for k in 0..len {
                        work[k] = a[k] * m[k];
                    }
                    fft::transform(&mut work, grid.dim(), grid.n(), true);
                    for (acc, z) in mag2.iter_mut().zip(&work) {
                        *acc += z.re * z.re;
                    }
                }
                _ => unreachable!("chunks of two"),
            }
        }
        let mag: Vec<f64> = mag2.iter().map(|x| x.sqrt()).collect();
        out.push(lp_of_magnitude(&mag, p, grid.cell_volume()));
    }
    Ok(out)
}

/// Physical samples of several fields on one grid, per field and component,
/// packing two real components into each complex transform.
pub fn physical_batch(fields: &[&Field]) -> Result<Vec<Vec<Vec<f64>>>> {
    let Some(first) = fields.first() else { return Ok(Vec::new()) };
    let grid = first.grid;
    let mut spectra: Vec<&[Complex64]> = Vec::new();
    let mut layout = Vec::with_capacity(fields.len());
    for f in fields {
        if f.grid != grid {
            return Err(Error::Shape("physical_batch needs fields on one grid".into()));
        }
        match &f.data {
            Data::Spectral(c) => {
                layout.push(Some(c.len()));
                spectra.extend(c.iter().map(|v| v.as_slice()));
            }
            Data::Physical(_) => layout.push(None),
        }
    }
    let mut samples = inverse_real_batch(grid, &spectra).into_iter();
    Ok(fields
        .iter()
        .zip(layout)
        .map(|(f, slot)| match slot {
            Some(count) => samples.by_ref().take(count).collect(),
            None => f.physical_data().expect("physical").to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3(n: usize) -> Grid {
        Grid::new(3, n).unwrap()
    }

    #[test]
    fn cosine_has_two_half_coefficients() {
        let g = grid3(8);
        let f = Field::scalar_fn(g, |x| x[0].cos()).to_spectral();
        let c = &f.spectral_data().unwrap()[0];
        for flat in 0..g.len() {
            let k = g.wavevector(flat);
            let expected = if k == [1, 0, 0] || k == [-1, 0, 0] { 0.5 } else { 0.0 };
            assert!((c[flat] - Complex64::new(expected, 0.0)).norm() < 1e-15, "k = {k:?}");
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = grid3(8);
        let f = Field::zeros(g, 1, Representation::Physical).to_spectral();
        assert!(f.spectral_data().unwrap()[0].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn lp_norm_of_sine_and_constant() {
        let g = grid3(16);
        let s = Field::scalar_fn(g, |x| x[0].sin());
        let expected = (2.0 * std::f64::consts::PI).powf(1.5) / 2f64.sqrt();
        assert!((s.lp_norm(2.0).unwrap() - expected).abs() < 1e-12 * expected);
        assert!((expected - 11.1366).abs() < 1e-4);
        let sup = s.lp_norm(f64::INFINITY).unwrap();
        assert!((sup - 1.0).abs() <= 1.0 / (16.0 * 16.0));

        let c = Field::scalar_fn(g, |_| -2.5);
        for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
            let want = 2.5 * g.volume().powf(1.0 / p);
            assert!((c.lp_norm(p).unwrap() - want).abs() < 1e-12 * want, "p = {p}");
        }
        assert!(matches!(c.lp_norm(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_of_sine_and_constant() {
        let g = grid3(16);
        let s = Field::scalar_fn(g, |x| x[0].sin());
        let ds = s.derivative(&[1, 0, 0]).to_physical();
        let c = Field::scalar_fn(g, |x| x[0].cos());
        assert!((&ds - &c).max_abs() < 1e-14);
        let k = Field::scalar_fn(g, |_| 3.0);
        assert!(k.derivative(&[1, 0, 0]).max_abs() == 0.0);
    }

    #[test]
    fn cosine_squared_has_modes_at_minus_two_zero_two() {
        let g = Grid::new(2, 16).unwrap();
        let f = Field::scalar_fn(g, |x| x[0].cos());
        let p = f.dealiased_product(&f).unwrap();
        let c = &p.spectral_data().unwrap()[0];
        for flat in 0..g.len() {
            let k = g.wavevector(flat);
            let expected = match k {
                [0, 0, _] => 0.5,
                [2, 0, _] | [-2, 0, _] => 0.25,
                _ => 0.0,
            };
            assert!((c[flat].re - expected).abs() < 1e-15 && c[flat].im.abs() < 1e-15);
        }
    }

    #[test]
    fn product_with_one_is_bit_identical() {
        let g = Grid::new(2, 16).unwrap();
        let f = Field::scalar_fn(g, |x| (x[0] + 2.0 * x[1]).sin() + 0.3 * x[1].cos()).to_spectral();
        let one = Field::scalar_fn(g, |_| 1.0);
        let p = f.dealiased_product(&one).unwrap();
        assert_eq!(p.spectral_data().unwrap(), f.spectral_data().unwrap());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::zeros(Grid::new(2, 16).unwrap(), 1, Representation::Spectral);
        let b = Field::zeros(Grid::new(2, 32).unwrap(), 1, Representation::Spectral);
        assert!(matches!(a.dealiased_product(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn divergence_of_gradient_is_minus_laplacian() {
        let g = Grid::new(2, 16).unwrap();
        let f = Field::scalar_fn(g, |x| (2.0 * x[0]).sin() * x[1].cos());
        let lap = f.gradient().divergence();
        let want = f.neg_laplacian().scale(-1.0);
        assert!((&lap - &want).max_abs() < 1e-12);
    }
}
