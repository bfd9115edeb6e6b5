//! Dyadic partition of unity and the Littlewood–Paley operators `Δ_j`, `S_j`.
//!
//! `χ` is a radial profile equal to 1 on `r ≤ 3/4` and 0 on `r ≥ 4/3`;
//! `φ(r) = χ(r/2) − χ(r)` is then supported in `3/4 ≤ r ≤ 8/3` and
//! `χ(r) + Σ_{j≥0} φ(2^{-j} r) = 1` telescopes. On the torus both act as
//! exact multipliers on the integer lattice:
//!
//! * `Δ_{-1} = S_0 = χ(|D|)`,
//! * `Δ_j = φ(2^{-j}|D|)` for `0 ≤ j ≤ j_max`,
//! * `S_j = χ(2^{-j}|D|) = Σ_{k ≤ j-1} Δ_k`, with `S_j = 0` for `j ≤ -1`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Field, ProductRule};
use crate::grid::Grid;
use crate::random;

pub const CHI_PLATEAU: f64 = 0.75;
pub const CHI_SUPPORT: f64 = 4.0 / 3.0;

/// Shape of the monotone transition of `χ` between its plateau and support radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transition {
    /// `C^∞` step built from `exp(-1/t)`.
    #[default]
    Exponential,
    /// `C²` quintic smoothstep `6t⁵ − 15t⁴ + 10t³`.
    Quintic,
}

impl Transition {
    /// Monotone step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
    pub fn step(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self {
            Transition::Exponential => {
                let a = (-1.0 / t).exp();
                let b = (-1.0 / (1.0 - t)).exp();
                a / (a + b)
            }
            Transition::Quintic => t * t * t * (t * (6.0 * t - 15.0) + 10.0),
        }
    }
}

impl std::str::FromStr for Transition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(Self::Exponential),
            "quintic" => Ok(Self::Quintic),
            other => Err(Error::Config(format!("unknown transition profile `{other}`"))),
        }
    }
}

/// The pair `(χ, φ)` with a dense tabulation on `[0, 3]`.
#[derive(Debug, Clone)]
pub struct DyadicCutoffs {
    transition: Transition,
    table: Vec<[f64; 3]>,
}

const TABLE_SAMPLES: usize = 1201;
const TABLE_RADIUS: f64 = 3.0;

impl DyadicCutoffs {
    pub fn new(transition: Transition) -> Self {
        let mut c = Self { transition, table: Vec::new() };
        c.table = (0..TABLE_SAMPLES)
            .map(|i| {
                let r = TABLE_RADIUS * i as f64 / (TABLE_SAMPLES - 1) as f64;
                [r, c.chi(r), c.phi(r)]
            })
            .collect();
        c
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    pub fn chi(&self, r: f64) -> f64 {
        1.0 - self
            .transition
            .step((r - CHI_PLATEAU) / (CHI_SUPPORT - CHI_PLATEAU))
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.chi(0.5 * r) - self.chi(r)
    }

    /// Rows `[r, χ(r), φ(r)]` on a uniform grid of `[0, 3]`.
    pub fn table(&self) -> &[[f64; 3]] {
        &self.table
    }

    /// `χ(r) + Σ_{j=0}^{last} φ(2^{-j} r)`, summed term by term.
    pub fn partition_sum(&self, r: f64, last: i32) -> f64 {
        let mut s = self.chi(r);
        for j in 0..=last {
            s += self.phi(r / 2f64.powi(j));
        }
        s
    }
}

impl Default for DyadicCutoffs {
    fn default() -> Self {
        Self::new(Transition::default())
    }
}

/// Dyadic block index `j ≥ -1` checked against a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockIndex(i32);

impl BlockIndex {
    pub fn new(j: i32, grid: Grid) -> Result<Self> {
        if j < -1 {
            return Err(Error::Range(format!("block index {j} below -1")));
        }
        if j > grid.j_max() {
            return Err(Error::Range(format!(
                "block {j} exceeds j_max = {} for n = {}",
                grid.j_max(),
                grid.n()
            )));
        }
        Ok(Self(j))
    }

    pub fn get(self) -> i32 {
        self.0
    }
}

/// Littlewood–Paley calculus bound to one grid: cached block multipliers plus
/// the product rule used by the bilinear operators built on top of it.
#[derive(Debug, Clone)]
pub struct Dyadic {
    grid: Grid,
    cutoffs: DyadicCutoffs,
    rule: ProductRule,
    /// `χ(2^{-j}|k|)` for `j = 0..=j_max+1`.
    low: Vec<Vec<f64>>,
    /// `Δ_j` multipliers for `j = -1..=j_max`.
    blocks: Vec<Vec<f64>>,
}

impl Dyadic {
    pub fn new(grid: Grid, cutoffs: DyadicCutoffs) -> Self {
        let knorm = grid.k_norm();
        let j_max = grid.j_max();
        let low: Vec<Vec<f64>> = (0..=j_max + 1)
            .map(|j| {
                let scale = 2f64.powi(-j);
                knorm.iter().map(|&k| cutoffs.chi(k * scale)).collect()
            })
            .collect();
        let mut blocks = Vec::with_capacity(j_max as usize + 2);
        blocks.push(low[0].clone());
        for j in 0..=j_max as usize {
            // φ(2^{-j}|k|) = χ(2^{-j-1}|k|) − χ(2^{-j}|k|), so S_{j+1} − S_j = Δ_j bit for bit
            blocks.push(low[j + 1].iter().zip(&low[j]).map(|(a, b)| a - b).collect());
        }
        Self { grid, cutoffs, rule: ProductRule::ThreeHalves, low, blocks }
    }

    pub fn with_default_cutoffs(grid: Grid) -> Self {
        Self::new(grid, DyadicCutoffs::default())
    }

    pub fn with_product_rule(mut self, rule: ProductRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn cutoffs(&self) -> &DyadicCutoffs {
        &self.cutoffs
    }

    pub fn product_rule(&self) -> ProductRule {
        self.rule
    }

    pub fn j_max(&self) -> i32 {
        self.grid.j_max()
    }

    /// Block indices `-1..=j_max`.
    pub fn block_range(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max()
    }

    /// Multiplier of `Δ_j`; `None` for `j ≤ -2` (the zero operator).
    pub fn block_multiplier(&self, j: i32) -> Result<Option<&[f64]>> {
        if j <= -2 {
            return Ok(None);
        }
        let j = BlockIndex::new(j, self.grid)?.get();
        Ok(Some(&self.blocks[(j + 1) as usize]))
    }

    /// Multiplier of `S_j`; `None` for `j ≤ -1`. Levels above `j_max + 1`
    /// are the identity on the lattice and reuse the top table.
    pub fn low_multiplier(&self, j: i32) -> Option<std::borrow::Cow<'_, [f64]>> {
        if j <= -1 {
            return None;
        }
        let top = self.j_max() + 1;
        if j <= top {
            return Some(std::borrow::Cow::Borrowed(&self.low[j as usize]));
        }
        let scale = 2f64.powi(-j);
        Some(std::borrow::Cow::Owned(
            self.grid.k_norm().iter().map(|&k| self.cutoffs.chi(k * scale)).collect(),
        ))
    }

    pub fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::Shape(format!(
                "field on {:?} used with calculus on {:?}",
                f.grid(),
                self.grid
            )));
        }
        Ok(())
    }

    /// `Δ_j f`; zero for `j ≤ -2`, range error above `j_max`.
    pub fn delta(&self, f: &Field, j: i32) -> Result<Field> {
        self.check_grid(f)?;
        Ok(match self.block_multiplier(j)? {
            Some(m) => f.apply_multiplier(m),
            None => f.to_spectral().scale(0.0),
        })
    }

    /// `S_j f`; zero for `j ≤ -1`.
    pub fn low(&self, f: &Field, j: i32) -> Result<Field> {
        self.check_grid(f)?;
        Ok(match self.low_multiplier(j) {
            Some(m) => f.apply_multiplier(&m),
            None => f.to_spectral().scale(0.0),
        })
    }

    /// All blocks `Δ_{-1} f, …, Δ_{j_max} f` (index `j + 1`).
    pub fn blocks(&self, f: &Field) -> Result<Vec<Field>> {
        self.check_grid(f)?;
        let spec = f.to_spectral();
        Ok(self.blocks.iter().map(|m| spec.apply_multiplier(m)).collect())
    }

    /// `S_0 f + Σ_{j=0}^{j_max} Δ_j f`.
    pub fn reconstruct(&self, f: &Field) -> Result<Field> {
        let blocks = self.blocks(f)?;
        let mut acc = blocks[0].clone();
        for b in &blocks[1..] {
            acc = &acc + b;
        }
        Ok(acc)
    }

    /// Product under this calculus' rule.
    pub fn product(&self, f: &Field, g: &Field) -> Result<Field> {
        field::product(f, g, self.rule)
    }

    /// Largest `|χ(|k|) + Σ_j φ(2^{-j}|k|) − 1|` over lattice points with `|k| ≤ radius`.
    pub fn partition_residual(&self, radius: f64) -> f64 {
        let knorm = self.grid.k_norm();
        let mut worst: f64 = 0.0;
        for (flat, &k) in knorm.iter().enumerate() {
            if k > radius {
                continue;
            }
            let s: f64 = self.blocks.iter().map(|b| b[flat]).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

/// One `(p, q, |α|)` combination of a Bernstein ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinCase {
    pub p: f64,
    pub q: f64,
    pub order: u32,
}

/// Sampling plan for [`bernstein_report`].
#[derive(Debug, Clone)]
pub struct BernsteinEnsemble {
    pub samples: usize,
    pub seed: u64,
    pub blocks: std::ops::RangeInclusive<i32>,
    pub cases: Vec<BernsteinCase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRow {
    pub j: i32,
    pub p: f64,
    pub q: f64,
    pub alpha: u32,
    pub measured_ratio_max: f64,
    pub ensemble_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantReport {
    pub rows: Vec<ConstantRow>,
    /// `(j, max 2^j ‖f‖₂ / ‖∇f‖₂)` for block-supported samples.
    pub reverse: Vec<(i32, f64)>,
}

impl ConstantReport {
    /// Ratio of the largest to the smallest per-block constant of a case.
    pub fn spread(&self, case: BernsteinCase) -> f64 {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.p == case.p && r.q == case.q && r.alpha == case.order)
            .map(|r| r.measured_ratio_max)
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }

    pub fn reverse_max(&self) -> f64 {
        self.reverse.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,p,q,alpha,measured_ratio_max,ensemble_size,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.17e},{},{}",
                r.j,
                fmt_exponent(r.p),
                fmt_exponent(r.q),
                r.alpha,
                r.measured_ratio_max,
                r.ensemble_size,
                r.seed
            );
        }
        out
    }
}

pub fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// Measures Bernstein ratios
/// `‖∂₁^{|α|} f‖_q / (2^{j|α| + dim·j(1/p − 1/q)} ‖f‖_p)` over random fields
/// supported in the annulus of block `j`, and the reverse ratio
/// `2^j ‖f‖₂ / ‖∇f‖₂`.
///
/// Even samples are spike trains localised by `Δ_j` (the extremal shape for
/// the forward inequality); odd samples are random-phase annulus fields.
pub fn bernstein_report(dy: &Dyadic, plan: &BernsteinEnsemble) -> Result<ConstantReport> {
    for case in &plan.cases {
        field::check_exponent(case.p)?;
        field::check_exponent(case.q)?;
        if case.q < case.p {
            return Err(Error::Domain(format!(
                "Bernstein requires q >= p, got p = {}, q = {}",
                case.p, case.q
            )));
        }
    }
    let grid = dy.grid();
    let dim = grid.dim() as f64;
    let mut rows = Vec::new();
    let mut reverse = Vec::new();
    for j in plan.blocks.clone() {
        BlockIndex::new(j, grid)?;
        let mut rng = random::rng(plan.seed ^ ((j as u64 + 1) << 32));
        let mut best = vec![0.0f64; plan.cases.len()];
        let mut best_reverse = 0.0f64;
        for s in 0..plan.samples {
            let raw = if s % 2 == 0 {
                random::spike_train(grid, &mut rng, 1 + s / 2 % 4)
            } else {
                let radius = ((grid.n() / 2) as f64 - 1.0).min(8.0 / 3.0 * 2f64.powi(j) + 1.0);
                random::band_limited(grid, &mut rng, radius, 1)?
            };
            let f = dy.delta(&raw, j)?;
            let grad = f.gradient();
            let reverse_ratio = 2f64.powi(j) * f.l2_norm() / grad.l2_norm();
            best_reverse = best_reverse.max(reverse_ratio);

            let mut derivs: Vec<Option<Field>> = vec![None; 3];
            for (ci, case) in plan.cases.iter().enumerate() {
                let order = case.order as usize;
                if derivs[order].is_none() {
                    let mut alpha = vec![0u32; grid.dim()];
                    alpha[0] = case.order;
                    derivs[order] = Some(f.derivative(&alpha).into_physical());
                }
                let d = derivs[order].as_ref().expect("filled above");
                let num = d.lp_norm(case.q)?;
                let den = f.lp_norm(case.p)?;
                let weight = 2f64.powf(
                    j as f64 * case.order as f64 + dim * j as f64 * (1.0 / case.p - 1.0 / case.q),
                );
                best[ci] = best[ci].max(num / (weight * den));
            }
        }
        for (case, &value) in plan.cases.iter().zip(&best) {
            rows.push(ConstantRow {
                j,
                p: case.p,
                q: case.q,
                alpha: case.order,
                measured_ratio_max: value,
                ensemble_size: plan.samples,
                seed: plan.seed,
            });
        }
        reverse.push((j, best_reverse));
    }
    Ok(ConstantReport { rows, reverse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn cutoff_plateaus_and_supports() {
        let c = DyadicCutoffs::default();
        assert_eq!(c.chi(0.5), 1.0);
        assert_eq!(c.chi(1.5), 0.0);
        assert_eq!(c.phi(0.7), 0.0);
        assert_eq!(c.phi(2.7), 0.0);
        assert!((c.partition_sum(1.0, 10) - 1.0).abs() <= 1e-14);
        for row in c.table() {
            assert!((0.0..=1.0).contains(&row[1]) && (0.0..=1.0).contains(&row[2]));
        }
    }

    #[test]
    fn quintic_profile_also_partitions_unity() {
        let c = DyadicCutoffs::new(Transition::Quintic);
        for i in 0..400 {
            let r = i as f64 * 0.04;
            assert!((c.partition_sum(r, 6) - 1.0).abs() <= 1e-14, "r = {r}");
        }
    }

    #[test]
    fn block_index_range() {
        let g = Grid::new(2, 32).unwrap();
        assert!(BlockIndex::new(-1, g).is_ok());
        assert!(BlockIndex::new(3, g).is_ok());
        assert!(matches!(BlockIndex::new(4, g), Err(Error::Range(_))));
        let dy = Dyadic::with_default_cutoffs(g);
        let f = Field::scalar_fn(g, |x| x[0].sin());
        assert!(matches!(dy.delta(&f, 4), Err(Error::Range(_))));
        assert_eq!(dy.delta(&f, -2).unwrap().max_abs(), 0.0);
        assert_eq!(dy.low(&f, -1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn delta_minus_one_is_s_zero() {
        let g = Grid::new(2, 32).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let f = random::band_limited(g, &mut random::rng(2), 10.0, 1).unwrap();
        assert_eq!(dy.delta(&f, -1).unwrap(), dy.low(&f, 0).unwrap());
    }

    #[test]
    fn telescoping_is_exact() {
        let g = Grid::new(3, 16).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        for j in 0..=g.j_max() {
            let d = dy.block_multiplier(j).unwrap().unwrap();
            let hi = dy.low_multiplier(j + 1).unwrap();
            let lo = dy.low_multiplier(j).unwrap();
            for i in 0..g.len() {
                assert_eq!(hi[i] - lo[i], d[i]);
            }
        }
    }

    #[test]
    fn exponential_mode_two_lives_in_blocks_zero_and_one() {
        let g = Grid::new(3, 16).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let mut coeffs = vec![Complex64::default(); g.len()];
        coeffs[g.flat_of([2, 0, 0])] = Complex64::new(1.0, 0.0);
        let f = Field::from_spectral(g, vec![coeffs]).unwrap();
        for j in -1..=g.j_max() {
            let b = dy.delta(&f, j).unwrap();
            let nonzero = b.spectral_data().unwrap()[0].iter().any(|z| z.norm() > 0.0);
            assert_eq!(nonzero, j == 0 || j == 1, "j = {j}");
        }
        let sum = &dy.delta(&f, 0).unwrap() + &dy.delta(&f, 1).unwrap();
        let diff = (&sum - &f).spectral_components().iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-15);
    }

    #[test]
    fn bernstein_rejects_reverse_embedding() {
        let g = Grid::new(2, 16).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let plan = BernsteinEnsemble {
            samples: 1,
            seed: 0,
            blocks: 0..=1,
            cases: vec![BernsteinCase { p: 4.0, q: 2.0, order: 0 }],
        };
        assert!(matches!(bernstein_report(&dy, &plan), Err(Error::Domain(_))));
    }

    #[test]
    fn monochromatic_bernstein_ratio_is_one() {
        let g = Grid::new(2, 32).unwrap();
        for j in 0..3 {
            let k = 2f64.powi(j);
            let f = Field::scalar_fn(g, |x| (k * x[0]).cos());
            let d = f.derivative(&[1, 0]);
            let ratio = d.lp_norm(f64::INFINITY).unwrap() / f.lp_norm(f64::INFINITY).unwrap();
            assert!((ratio - k).abs() < 1e-12 * k);
        }
    }
}
