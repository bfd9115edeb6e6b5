//! Bony's paraproduct calculus and the block commutator.
//!
//! `T_u v = Σ_j S_{j−1}u · Δ_j v`, `R(u,v) = Σ_{|j′−j|≤1} Δ_j u · Δ_{j′} v`
//! and `T′_u v = T_u v + R(u,v)`. Every product goes through the product
//! rule of the [`Dyadic`] calculus, so with three-halves padding the
//! decomposition `uv = T_u v + T_v u + R(u,v)` holds to rounding for inputs
//! inside the resolved ball.

use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::field::{product, Field, ProductRule, ProductSpace};
use crate::lp::{BlockIndex, Dyadic};

#[derive(Debug, Clone, PartialEq)]
pub struct BonyParts {
    pub t_uv: Field,
    pub t_vu: Field,
    pub r_uv: Field,
}

impl BonyParts {
    pub fn sum(&self) -> Field {
        &(&self.t_uv + &self.t_vu) + &self.r_uv
    }
}

fn check_pair(dy: &Dyadic, u: &Field, v: &Field) -> Result<()> {
    dy.check_grid(u)?;
    dy.check_grid(v)
}

fn accumulate(acc: &mut Option<Field>, term: Field) {
    *acc = Some(match acc.take() {
        Some(a) => &a + &term,
        None => term,
    });
}

/// Blocks lifted once to the product grid; lifting is linear, so low-pass
/// pieces are sums of lifted blocks and each Bony piece needs one projection.
struct Lifted {
    space: ProductSpace,
    u: Vec<Vec<Vec<Complex64>>>,
    v: Vec<Vec<Vec<Complex64>>>,
    components: usize,
}

impl Lifted {
    fn new(dy: &Dyadic, u: &Field, v: &Field) -> Result<Self> {
        check_pair(dy, u, v)?;
        let (cu, cv) = (u.components(), v.components());
        if cu != cv && cu != 1 && cv != 1 {
            return Err(Error::Shape(format!("cannot multiply fields with {cu} and {cv} components")));
        }
        let space = ProductSpace::new(dy.grid(), dy.product_rule());
        let lift = |f: &Field| -> Result<Vec<Vec<Vec<Complex64>>>> {
            Ok(dy
                .blocks(f)?
                .iter()
                .map(|b| b.spectral_components().iter().map(|c| space.lift(c)).collect())
                .collect())
        };
        Ok(Self { space, u: lift(u)?, v: lift(v)?, components: cu.max(cv) })
    }

    fn zeros(&self) -> Vec<Vec<Complex64>> {
        vec![vec![Complex64::default(); self.space.work_len()]; self.components]
    }

    fn project(&self, acc: Vec<Vec<Complex64>>) -> Result<Field> {
        Field::from_spectral(self.space.grid(), acc.into_iter().map(|w| self.space.project(w)).collect())
    }

    /// `Σ_{j≥1} S_{j−1}a · Δ_j b` on the product grid.
    fn t(&self, a: &[Vec<Vec<Complex64>>], b: &[Vec<Vec<Complex64>>]) -> Vec<Vec<Complex64>> {
        let mut acc = self.zeros();
        let mut low = a[0].clone();
        for j in 2..b.len() {
            mul_add(&mut acc, &low, &b[j]);
            add_into(&mut low, &a[j - 1]);
        }
        acc
    }

    fn r(&self) -> Vec<Vec<Complex64>> {
        let mut acc = self.zeros();
        let last = self.v.len() - 1;
        for (i, uj) in self.u.iter().enumerate() {
            let mut near = self.v[i].clone();
            if i > 0 {
                add_into(&mut near, &self.v[i - 1]);
            }
            if i < last {
                add_into(&mut near, &self.v[i + 1]);
            }
            mul_add(&mut acc, uj, &near);
        }
        acc
    }
}

fn add_into(acc: &mut [Vec<Complex64>], x: &[Vec<Complex64>]) {
    for (a, b) in acc.iter_mut().zip(x) {
        a.iter_mut().zip(b).for_each(|(p, q)| *p += q);
    }
}

fn mul_add(acc: &mut [Vec<Complex64>], x: &[Vec<Complex64>], y: &[Vec<Complex64>]) {
    for (c, a) in acc.iter_mut().enumerate() {
        let (xc, yc) = (&x[c.min(x.len() - 1)], &y[c.min(y.len() - 1)]);
        for ((p, q), r) in a.iter_mut().zip(xc).zip(yc) {
            *p += q * r;
        }
    }
}

/// `T_u v = Σ_{j=1}^{j_max} S_{j−1}u · Δ_j v` (the `j ≤ 0` terms vanish).
pub fn paraproduct_t(dy: &Dyadic, u: &Field, v: &Field) -> Result<Field> {
    let l = Lifted::new(dy, u, v)?;
    l.project(l.t(&l.u, &l.v))
}

/// `R(u,v) = Σ_{|j′−j|≤1} Δ_j u · Δ_{j′} v`, grouped as `Σ_j Δ_j u · (Δ_{j−1} + Δ_j + Δ_{j+1}) v`.
pub fn remainder_r(dy: &Dyadic, u: &Field, v: &Field) -> Result<Field> {
    let l = Lifted::new(dy, u, v)?;
    l.project(l.r())
}

/// `T′_u v = T_u v + R(u,v)`.
pub fn t_prime(dy: &Dyadic, u: &Field, v: &Field) -> Result<Field> {
    let l = Lifted::new(dy, u, v)?;
    let mut acc = l.t(&l.u, &l.v);
    add_into(&mut acc, &l.r());
    l.project(acc)
}

/// The three Bony pieces of `uv`.
pub fn bony(dy: &Dyadic, u: &Field, v: &Field) -> Result<BonyParts> {
    let l = Lifted::new(dy, u, v)?;
    Ok(BonyParts {
        t_uv: l.project(l.t(&l.u, &l.v))?,
        t_vu: l.project(l.t(&l.v, &l.u))?,
        r_uv: l.project(l.r())?,
    })
}

/// `Σ_{|j′−j|≤4} [S_{j′−1}v^i, Δ_j] ∂_i Δ_{j′} w`, evaluated as
/// `S_{j′−1}v^i · Δ_j(∂_i w_{j′}) − Δ_j(S_{j′−1}v^i · ∂_i w_{j′})`.
///
/// The mean of `S_{j′−1}v^i` commutes with `Δ_j` and is dropped before
/// multiplying, so a constant `v` gives exactly zero.
pub fn commutator(dy: &Dyadic, v: &Field, j: i32, w: &Field) -> Result<Field> {
    check_pair(dy, v, w)?;
    let grid = dy.grid();
    if !v.is_vector() || !w.is_vector() {
        return Err(Error::Shape("commutator needs vector fields v and w".into()));
    }
    if j == -1 {
        return Err(Error::Range("commutator is defined for blocks j >= 0".into()));
    }
    let j = BlockIndex::new(j, grid)?.get();
    let div = crate::besov::divergence_defect(v);
    if div > 1e-12 {
        return Err(Error::Precondition(format!(
            "commutator needs a divergence-free v, ||div v|| / ||grad v|| = {div:e}"
        )));
    }
    let rule = dy.product_rule();
    let mut acc: Option<Field> = None;
    let lo = (j - 4).max(-1);
    let hi = (j + 4).min(dy.j_max());
    for jp in lo..=hi {
        let Some(low) = dy.low_multiplier(jp - 1) else { continue };
        let v_low = v.apply_multiplier(&low);
        let w_jp = dy.delta(w, jp)?;
        for i in 0..grid.dim() {
            let mut vi = v_low.component(i);
            vi.spectral_data_mut().expect("spectral")[0][0] = Default::default();
            let dw = w_jp.partial(i);
            let first = product(&vi, &dy.delta(&dw, j)?, rule)?;
            let second = dy.delta(&product(&vi, &dw, rule)?, j)?;
            accumulate(&mut acc, &first - &second);
        }
    }
    Ok(acc.unwrap_or_else(|| w.to_spectral().scale(0.0)))
}

/// Bony pieces built from plain collocation products; used to show that
/// aliasing breaks the decomposition.
pub fn bony_aliased(u: &Field, v: &Field) -> Result<BonyParts> {
    let dy = Dyadic::with_default_cutoffs(u.grid()).with_product_rule(ProductRule::Aliased);
    bony(&dy, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::random;

    fn rel(a: &Field, b: &Field) -> f64 {
        (a - b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn bony_identity_on_random_pairs() {
        let g = Grid::new(2, 32).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let mut rng = random::rng(11);
        for _ in 0..5 {
            let u = random::band_limited(g, &mut rng, 12.0, 1).unwrap();
            let v = random::band_limited(g, &mut rng, 12.0, 1).unwrap();
            let parts = bony(&dy, &u, &v).unwrap();
            let uv = u.dealiased_product(&v).unwrap();
            assert!(rel(&parts.sum(), &uv) < 1e-13);
        }
    }

    #[test]
    fn constant_left_factor_drops_lowest_blocks() {
        let g = Grid::new(2, 32).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let c = Field::scalar_fn(g, |_| 1.5);
        let v = random::band_limited(g, &mut random::rng(2), 12.0, 1).unwrap();
        let t = paraproduct_t(&dy, &c, &v).unwrap();
        let want = (&v.to_spectral() - &dy.low(&v, 1).unwrap()).scale(1.5);
        assert!(rel(&t, &want) < 1e-14);
    }

    #[test]
    fn commutator_vanishes_for_constant_velocity() {
        let g = Grid::new(2, 32).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let v = Field::vector_fn(g, |_| [0.3, -1.7, 0.0]);
        let w = random::band_limited(g, &mut random::rng(5), 10.0, 2).unwrap();
        for j in 0..=dy.j_max() {
            assert_eq!(commutator(&dy, &v, j, &w).unwrap().max_abs(), 0.0);
        }
        assert!(matches!(commutator(&dy, &v, -1, &w), Err(Error::Range(_))));
    }
}
