//! Property suites with fixed seeds. Each returns a table of measured values
//! against their limits; the command line and the acceptance tests both
//! drive these.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::besov::{self, BesovSpec, CriterionTriple, TripleMode};
use crate::error::{Error, Result};
use crate::field::{product, Field, ProductRule};
use crate::grid::Grid;
use crate::lp::{self, BernsteinCase, BernsteinEnsemble, Dyadic};
use crate::monitor::{self, fmt_f};
use crate::paraproduct;
use crate::random;
use crate::solver::{self, SolverConfig, Stepper, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `"<="`, `">="` or `"flag"`.
    pub relation: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: "<=".into(), passed: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: ">=".into(), passed: value >= limit }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
            relation: "flag".into(),
            passed: ok,
        }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        if self.relation == "flag" {
            format!("{status}  {}", self.name)
        } else {
            format!("{status}  {}  {:.6e} {} {:.3e}", self.name, self.value, self.relation, self.limit)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    /// `(file name, contents)` of deterministic artifacts.
    #[serde(skip)]
    pub artifacts: Vec<(String, String)>,
    pub seconds: f64,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self { suite: suite.to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn table(&self) -> String {
        let mut out = format!("[{}]\n", self.suite);
        for c in &self.checks {
            let _ = writeln!(out, "  {}", c.line());
        }
        out
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn merge(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.artifacts.extend(other.artifacts);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lp,
    Bony,
    Bernstein,
    Bkm,
    Solver,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lp, Suite::Bony, Suite::Bernstein, Suite::Bkm, Suite::Solver];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lp => "lp",
            Suite::Bony => "bony",
            Suite::Bernstein => "bernstein",
            Suite::Bkm => "bkm",
            Suite::Solver => "solver",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Grid size; `None` picks the suite default.
    pub n: Option<usize>,
    pub seed: u64,
    /// Product rule of the calculus under test; `Aliased` is a negative control.
    pub rule: ProductRule,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { n: None, seed: 7, rule: ProductRule::ThreeHalves }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = match suite {
        Suite::Lp => lp_suite(opts)?,
        Suite::Bony => bony_suite(opts)?,
        Suite::Bernstein => bernstein_suite(opts)?,
        Suite::Bkm => bkm_suite(opts)?,
        Suite::Solver => solver_suite(opts)?,
    };
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn rel(a: &Field, b: &Field) -> f64 {
    (a - b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
}

fn max_coefficient(f: &Field) -> f64 {
    f.spectral_components().iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Partition, reconstruction, orthogonality, telescoping and block supports.
pub fn lp_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lp");
    let n = opts.n.unwrap_or(64);
    let mut rng = random::rng(opts.seed);
    for dim in [2, 3] {
        let n = if dim == 3 { n.min(32) } else { n };
        let g = Grid::new(dim, n)?;
        let dy = Dyadic::with_default_cutoffs(g).with_product_rule(opts.rule);
        rep.push(Check::at_most(
            format!("partition of unity residual ({dim}D, n={n})"),
            dy.partition_residual(g.resolved_radius()),
            1e-14,
        ));
        let f = random::band_limited(g, &mut rng, g.dealias_radius(), 1)?;
        rep.push(Check::at_most(
            format!("reconstruction relative error ({dim}D)"),
            rel(&dy.reconstruct(&f)?, &f.to_spectral()),
            1e-12,
        ));
        let blocks = dy.blocks(&f)?;
        let mut ortho: f64 = 0.0;
        for a in dy.block_range() {
            for b in dy.block_range() {
                if (a - b).abs() >= 2 {
                    ortho = ortho.max(dy.delta(&blocks[(b + 1) as usize], a)?.l2_norm());
                }
            }
        }
        rep.push(Check::at_most(
            format!("orthogonality |j-k|>=2: max ||D_j D_k f|| / ||f|| ({dim}D)"),
            ortho / f.l2_norm(),
            1e-13,
        ));
        let mut tele: f64 = 0.0;
        for j in 0..=dy.j_max() {
            let hi = dy.low_multiplier(j + 1).expect("j+1 >= 0");
            let lo = dy.low_multiplier(j).expect("j >= 0");
            let m = dy.block_multiplier(j)?.expect("j >= -1");
            for ((a, b), c) in hi.iter().zip(lo.iter()).zip(m) {
                tele = tele.max((a - b - c).abs());
            }
        }
        rep.push(Check::at_most(format!("telescoping S_(j+1) - S_j - D_j ({dim}D)"), tele, 0.0));
        let mut dissip: f64 = 0.0;
        for j in 0..=dy.j_max() {
            let b = &blocks[(j + 1) as usize];
            let lhs = b.gradient().l2_norm().powi(2);
            let rhs = 0.5625 * 4f64.powi(j) * b.l2_norm().powi(2);
            dissip = dissip.max(rhs / lhs.max(f64::MIN_POSITIVE));
        }
        rep.push(Check::at_most(
            format!("dissipation lower bound (3/4)^2 4^j ||D_j f||^2 / ||grad D_j f||^2 ({dim}D)"),
            dissip,
            1.0 + 1e-12,
        ));
    }
    rep.merge(orthogonality_products(opts, 128)?);

    let g = Grid::new(2, n)?;
    let dy = Dyadic::with_default_cutoffs(g);
    let mut c = vec![Complex64::default(); g.len()];
    c[g.flat_of([2, 0, 0])] = Complex64::new(1.0, 0.0);
    let mode = Field::from_spectral(g, vec![c])?;
    let mut ok = true;
    let mut sum = mode.scale(0.0);
    for j in dy.block_range() {
        let b = dy.delta(&mode, j)?;
        let nonzero = max_coefficient(&b) > 0.0;
        ok &= nonzero == (j == 0 || j == 1);
        sum = &sum + &b;
    }
    rep.push(Check::flag("e^{2ix} lives exactly in blocks 0 and 1", ok));
    rep.push(Check::at_most("e^{2ix}: D_0 f + D_1 f reproduces f", rel(&sum, &mode), 1e-15));

    let mono = lp::bernstein_report(
        &dy,
        &BernsteinEnsemble {
            samples: 0,
            seed: opts.seed,
            blocks: 1..=1,
            cases: vec![],
        },
    );
    rep.push(Check::flag("Bernstein plan accepted", mono.is_ok()));
    let mut worst: f64 = 0.0;
    for j in 0..=dy.j_max() {
        let k = 1i64 << j;
        if (k as f64) >= g.resolved_radius() {
            break;
        }
        let f = Field::scalar_fn(g, |x| (k as f64 * x[0]).cos());
        let d = f.partial(0);
        worst = worst.max((d.max_abs() / (2f64.powi(j) * f.max_abs()) - 1.0).abs());
    }
    rep.push(Check::at_most("monochromatic Bernstein ratio |ratio - 1|", worst, 1e-12));
    Ok(rep)
}

/// `‖Δ_j(S_{k−1}f · Δ_k f)‖₂ / ‖f‖₂²` over `|j − k| ≥ 5` on a 2D grid.
pub fn orthogonality_products(opts: &SuiteOptions, n: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lp");
    let g = Grid::new(2, n)?;
    let dy = Dyadic::with_default_cutoffs(g).with_product_rule(opts.rule);
    let f = random::band_limited(g, &mut random::rng(opts.seed ^ 0x5eed), g.dealias_radius(), 1)?;
    let norm = f.l2_norm();
    let mut worst: f64 = 0.0;
    for k in dy.block_range() {
        let prod = dy.product(&dy.low(&f, k - 1)?, &dy.delta(&f, k)?)?;
        for j in dy.block_range() {
            if (j - k).abs() >= 5 {
                worst = worst.max(dy.delta(&prod, j)?.l2_norm());
            }
        }
    }
    rep.push(Check::at_most(
        format!("orthogonality |j-k|>=5: ||D_j(S_(k-1) f D_k f)|| / ||f||^2 (n={n})"),
        worst / (norm * norm),
        1e-12,
    ));
    Ok(rep)
}

/// Brute-force `T_u v` by explicit convolution over lattice pairs.
pub fn paraproduct_oracle(dy: &Dyadic, u: &Field, v: &Field) -> Result<Field> {
    let g = dy.grid();
    let us = u.spectral_components();
    let vs = v.spectral_components();
    let half = (g.n() / 2) as i64;
    let mut weight = vec![vec![0.0; g.len()]; g.len()];
    for j in 1..=dy.j_max() {
        let low = dy.low_multiplier(j - 1).expect("j >= 1");
        let block = dy.block_multiplier(j)?.expect("j >= 1");
        for (l, wl) in weight.iter_mut().enumerate() {
            if low[l] == 0.0 {
                continue;
            }
            for (m, w) in wl.iter_mut().enumerate() {
                *w += low[l] * block[m];
            }
        }
    }
    let mut out = vec![Complex64::default(); g.len()];
    for l in 0..g.len() {
        let kl = g.wavevector(l);
        for m in 0..g.len() {
            let w = weight[l][m];
            if w == 0.0 {
                continue;
            }
            let km = g.wavevector(m);
            let k = [kl[0] + km[0], kl[1] + km[1], kl[2] + km[2]];
            if k.iter().take(g.dim()).any(|&x| x < -half || x >= half) {
                continue;
            }
            out[g.flat_of(k)] += us[0][l] * vs[0][m] * w;
        }
    }
    Field::from_spectral(g, vec![out])
}

/// `max ‖T_u v + T_v u + R(u,v) − uv‖₂ / (‖u‖₂‖v‖_∞)` over random pairs,
/// against the padded product whatever rule the calculus uses.
pub fn bony_identity_check(dy: &Dyadic, rng: &mut random::FieldRng, pairs: usize) -> Result<Check> {
    let g = dy.grid();
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let u = random::band_limited(g, rng, g.dealias_radius(), 1)?;
        let v = random::band_limited(g, rng, g.dealias_radius(), 1)?;
        let parts = paraproduct::bony(dy, &u, &v)?;
        let exact = product(&u, &v, ProductRule::ThreeHalves)?;
        worst = worst.max((&parts.sum() - &exact).l2_norm() / (u.l2_norm() * v.max_abs()));
    }
    Ok(Check::at_most(
        format!("Bony identity ||T_uv + T_vu + R - uv|| / (||u||_2 ||v||_inf), {pairs} pairs"),
        worst,
        1e-12,
    ))
}

/// Bony identity, bilinearity, oracle agreement, supports, commutator and cancellations.
pub fn bony_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("bony");
    let n = opts.n.unwrap_or(64);
    let g = Grid::new(2, n)?;
    let dy = Dyadic::with_default_cutoffs(g).with_product_rule(opts.rule);
    let mut rng = random::rng(opts.seed);
    let radius = g.dealias_radius();

    rep.push(bony_identity_check(&dy, &mut rng, 100)?);

    let u1 = random::band_limited(g, &mut rng, radius, 1)?;
    let u2 = random::band_limited(g, &mut rng, radius, 1)?;
    let v = random::band_limited(g, &mut rng, radius, 1)?;
    let (a, b) = (0.7, -1.3);
    let combo = &u1.scale(a) + &u2.scale(b);
    let t_lin = rel(
        &paraproduct::paraproduct_t(&dy, &combo, &v)?,
        &(&paraproduct::paraproduct_t(&dy, &u1, &v)?.scale(a)
            + &paraproduct::paraproduct_t(&dy, &u2, &v)?.scale(b)),
    );
    let r_lin = rel(
        &paraproduct::remainder_r(&dy, &v, &combo)?,
        &(&paraproduct::remainder_r(&dy, &v, &u1)?.scale(a)
            + &paraproduct::remainder_r(&dy, &v, &u2)?.scale(b)),
    );
    rep.push(Check::at_most("bilinearity of T and R (relative)", t_lin.max(r_lin), 1e-12));

    let small = Grid::new(2, 16)?;
    let dys = Dyadic::with_default_cutoffs(small).with_product_rule(opts.rule);
    let mut srng = random::rng(opts.seed ^ 0x0dd);
    let su = random::band_limited(small, &mut srng, small.dealias_radius(), 1)?;
    let sv = random::band_limited(small, &mut srng, small.dealias_radius(), 1)?;
    let oracle = paraproduct_oracle(&dys, &su, &sv)?;
    rep.push(Check::at_most(
        "T_u v against brute-force convolution (n=16)",
        rel(&paraproduct::paraproduct_t(&dys, &su, &sv)?, &oracle),
        1e-12,
    ));
    let c = Field::scalar_fn(small, |_| 2.5);
    let want = (&sv.to_spectral() - &dys.low(&sv, 1)?).scale(2.5);
    rep.push(Check::at_most(
        "T_c v = c (v - S_1 v) for constant c",
        rel(&paraproduct::paraproduct_t(&dys, &c, &sv)?, &want),
        1e-12,
    ));

    // each summand S_{j-1}u Δ_j v vanishes outside 2^j [1/12, 10/3]
    let u = random::band_limited(g, &mut rng, radius, 1)?;
    let knorm = g.k_norm();
    let mut outside: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 1..=dy.j_max() {
        let term = dy.product(&dy.low(&u, j - 1)?, &dy.delta(&v, j)?)?;
        let (lo, hi) = (2f64.powi(j) / 12.0, 2f64.powi(j) * 10.0 / 3.0);
        let coeffs = &term.spectral_data().expect("spectral")[0];
        for (z, &k) in coeffs.iter().zip(&knorm) {
            scale = scale.max(z.norm());
            if k < lo || k > hi {
                outside = outside.max(z.norm());
            }
        }
    }
    rep.push(Check::at_most(
        "paraproduct summands vanish outside their annuli (relative)",
        outside / scale,
        1e-13,
    ));

    // a single mode: R(u,u) carries the k = 0 and |k| = 4 content
    let mut cm = vec![Complex64::default(); g.len()];
    cm[g.flat_of([2, 0, 0])] = Complex64::new(0.5, 0.0);
    cm[g.flat_of([-2, 0, 0])] = Complex64::new(0.5, 0.0);
    let cos2 = Field::from_spectral(g, vec![cm])?;
    let parts = paraproduct::bony(&dy, &cos2, &cos2)?;
    let sq = product(&cos2, &cos2, ProductRule::ThreeHalves)?;
    rep.push(Check::at_most(
        "single mode |k|=2: T + T + R = cos^2(2x)",
        rel(&parts.sum(), &sq),
        1e-14,
    ));

    let comm = commutator_checks(&dy, opts.seed)?;
    rep.merge(comm);
    rep.merge(orthogonality_products(opts, 128)?);
    Ok(rep)
}

pub fn commutator_checks(dy: &Dyadic, seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("bony");
    let g = dy.grid();
    let mut rng = random::rng(seed ^ 0xc0);
    let radius = g.dealias_radius();
    // smooth v, and w with comparable energy in every dyadic block
    let v = random::divergence_free(g, &mut rng, 2.0, 2.5, 1.0)?;
    let flat = -(g.dim() as f64) / 2.0;
    let w = random::weighted_field(g, &mut rng, radius, g.dim(), |k| k.powf(flat))?;
    let c = Field::vector_fn(g, |_| [0.4, -1.1, 0.3]);
    let mut zero = true;
    for j in 0..=dy.j_max() {
        zero &= paraproduct::commutator(dy, &c, j, &w)?.max_abs() == 0.0;
    }
    rep.push(Check::flag("commutator with constant v is exactly 0", zero));

    let mut lin: f64 = 0.0;
    let mut constants = Vec::new();
    let wb = dy.blocks(&w)?;
    for j in 0..=dy.j_max() {
        let cj = paraproduct::commutator(dy, &v, j, &w)?;
        let c2 = paraproduct::commutator(dy, &v.scale(2.0), j, &w)?;
        lin = lin.max(rel(&c2, &cj.scale(2.0)));
        let grad = dy.low(&v, j + 3)?.gradient().max_abs();
        let near: f64 = ((j - 4).max(-1)..=(j + 4).min(dy.j_max()))
            .map(|jp| wb[(jp + 1) as usize].l2_norm())
            .sum();
        if j >= 1 {
            constants.push(cj.l2_norm() / (grad * near));
        }
    }
    rep.push(Check::at_most("commutator linear in v (relative)", lin, 1e-12));
    let max = constants.iter().cloned().fold(0.0, f64::max);
    let min = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.push(Check::at_most(
        format!("commutator constant spread over 1 <= j <= j_max (max {max:.3e})"),
        max / min,
        4.0,
    ));

    let gfield = random::band_limited(g, &mut rng, radius, 1)?;
    let adv = monitor::trilinear(&v, &gfield, &gfield)?;
    let scale = v.max_abs() * gfield.l2_norm() * gfield.gradient().l2_norm();
    rep.push(Check::at_most("cancellation <v.grad g, g> (scaled)", adv.abs() / scale, 1e-11));
    let mut worst: f64 = 0.0;
    let wv = random::band_limited(g, &mut rng, radius, g.dim())?;
    for j in dy.block_range() {
        let wj = dy.delta(&wv, j)?;
        for jp in dy.block_range() {
            let vj = dy.delta(&v, jp)?;
            let t = monitor::trilinear(&vj, &wj, &wj)?;
            let s = vj.max_abs() * wj.l2_norm() * wj.gradient().l2_norm();
            if s > 0.0 {
                worst = worst.max(t.abs() / s);
            }
        }
    }
    rep.push(Check::at_most("block cancellation <d_i w_j D_j' v^i, w_j> (scaled)", worst, 1e-11));
    Ok(rep)
}

pub fn bernstein_plan(j_max: i32, seed: u64, samples: usize) -> BernsteinEnsemble {
    BernsteinEnsemble {
        samples,
        seed,
        blocks: 1..=j_max - 1,
        cases: vec![
            BernsteinCase { p: 2.0, q: 2.0, order: 1 },
            BernsteinCase { p: 2.0, q: f64::INFINITY, order: 0 },
            BernsteinCase { p: f64::INFINITY, q: f64::INFINITY, order: 1 },
        ],
    }
}

/// Measured Bernstein constants on a 3D grid; the CSV is an artifact.
pub fn bernstein_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("bernstein");
    let n = opts.n.unwrap_or(64);
    let g = Grid::new(3, n)?;
    let dy = Dyadic::with_default_cutoffs(g);
    let plan = bernstein_plan(g.j_max(), opts.seed, 100);
    let report = lp::bernstein_report(&dy, &plan)?;
    for case in &plan.cases {
        rep.push(Check::at_most(
            format!(
                "Bernstein (p={}, q={}, |a|={}) spread over j",
                lp::fmt_exponent(case.p),
                lp::fmt_exponent(case.q),
                case.order
            ),
            report.spread(*case),
            4.0,
        ));
    }
    rep.push(Check::at_most("reverse Bernstein constant", report.reverse_max(), 4.0 / 3.0 * 1.1));
    rep.artifacts.push((format!("bernstein_n{n}_seed{}.csv", opts.seed), report.to_csv()));
    Ok(rep)
}

/// Maximum BKM ratio over `samples` random divergence-free fields.
pub fn bkm_ensemble(n: usize, seed: u64, samples: usize) -> Result<f64> {
    let g = Grid::new(3, n)?;
    let dy = Dyadic::with_default_cutoffs(g);
    let mut rng = random::rng(seed);
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let slope = 1.0 + (i % 3) as f64;
        let u = random::divergence_free(g, &mut rng, 8.0, slope, 1.0)?;
        worst = worst.max(besov::bkm_ratio(&dy, &u)?);
    }
    Ok(worst)
}

/// Maximum Gagliardo–Nirenberg ratio for exponent `p_tilde`.
pub fn gn_ensemble(n: usize, seed: u64, samples: usize, p_tilde: f64) -> Result<f64> {
    let g = Grid::new(3, n)?;
    let mut rng = random::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let w = random::band_limited(g, &mut rng, 8.0, 1)?;
        worst = worst.max(besov::gn_ratio(&w, p_tilde)?);
    }
    Ok(worst)
}

pub fn bkm_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("bkm");
    let coarse = bkm_ensemble(32, opts.seed, 100)?;
    let fine = bkm_ensemble(64, opts.seed, 100)?;
    rep.push(Check::flag(
        format!("BKM ratio finite (n=32: {coarse:.4e}, n=64: {fine:.4e})"),
        coarse.is_finite() && fine.is_finite() && coarse > 0.0,
    ));
    rep.push(Check::at_most(
        "BKM ratio spread between n=32 and n=64",
        coarse.max(fine) / coarse.min(fine),
        2.0,
    ));
    let g = Grid::new(3, 32)?;
    let dy = Dyadic::with_default_cutoffs(g);
    let u = Field::vector_fn(g, |x| [0.0, x[0].sin(), 0.0]);
    let r1 = besov::bkm_ratio(&dy, &u)?;
    let r2 = besov::bkm_ratio(&dy, &u.scale(2.0))?;
    rep.push(Check::at_most("BKM ratio scale invariance", (r1 - r2).abs() / r1, 1e-14));
    let gn32 = gn_ensemble(32, opts.seed, 20, 4.0)?;
    let gn64 = gn_ensemble(64, opts.seed, 20, 4.0)?;
    rep.push(Check::at_most("Gagliardo-Nirenberg ratio spread n=32/64", gn32.max(gn64) / gn32.min(gn64), 2.0));
    let w = random::band_limited(g, &mut random::rng(opts.seed), 8.0, 3)?;
    let curl_bs = besov::curl(&besov::biot_savart(&besov::curl(&w)?)?)?;
    rep.push(Check::at_most(
        "curl(biot_savart(w)) = w for w = curl(.)",
        rel(&curl_bs, &besov::curl(&w)?),
        1e-12,
    ));
    let grad = Field::scalar_fn(g, |x| (x[0] + 2.0 * x[2]).sin() * x[1].cos()).gradient();
    rep.push(Check::at_most("curl of a gradient", besov::curl(&grad)?.max_abs(), 1e-13));
    Ok(rep)
}

/// Taylor–Green and random-data checks of the Navier–Stokes solver.
pub fn solver_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("solver");
    let g = Grid::new(3, 16)?;
    let phi = random::band_limited(g, &mut random::rng(opts.seed), 6.0, 1)?;
    let grad = phi.gradient();
    rep.push(Check::at_most(
        "Leray projector kills gradients (relative max)",
        solver::leray_project(&grad).max_abs() / grad.max_abs(),
        1e-13,
    ));
    let u = random::divergence_free(g, &mut random::rng(opts.seed), 6.0, 1.0, 1.0)?;
    let adv = u.advected_by(&u, ProductRule::ThreeHalves)?;
    rep.push(Check::at_most(
        "energy orthogonality <u.grad u, u> (scaled)",
        adv.inner(&u).abs() / (u.max_abs() * u.l2_norm() * u.gradient().l2_norm()),
        1e-11,
    ));

    let tg = taylor_green_validation()?;
    rep.merge(tg);
    let order = rk4_order()?;
    rep.push(Check::at_least("RK4 observed order (Richardson)", order, 3.5));
    rep.push(Check::at_most("time reversal with nu = 0 (relative)", time_reversal()?, 1e-10));
    Ok(rep)
}

/// 2D Taylor–Green at `n = 64`, `ν = 1`, `t = 0.5`.
pub fn taylor_green_validation() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("solver");
    let cfg = SolverConfig { n: 64, viscosity: 1.0, dt: 0.01, t_end: 0.5, snapshot_every: 5, ..Default::default() };
    let traj = solver::run(&cfg)?;
    let u0 = &traj.snapshots[0].velocity;
    let last = traj.snapshots.last().expect("nonempty");
    let exact = u0.scale((-2.0 * cfg.viscosity * last.time).exp());
    rep.push(Check::at_most(
        "2D Taylor-Green vs u0 exp(-2 nu t), relative L2",
        rel(&last.velocity, &exact),
        1e-8,
    ));
    rep.push(Check::at_most("2D Taylor-Green energy balance", traj.energy_balance_residual(), 1e-6));
    rep.push(Check::at_most("2D Taylor-Green max |div u|", traj.max_divergence(), 1e-10));
    let mean0: Vec<Complex64> = u0.spectral_components().iter().map(|c| c[0]).collect();
    let mean_ok = traj.snapshots.iter().all(|s| {
        s.velocity.spectral_components().iter().zip(&mean0).all(|(c, m)| c[0] == *m)
    });
    rep.push(Check::flag("mean velocity conserved exactly", mean_ok));
    let decays = traj.snapshots.windows(2).all(|w| w[1].velocity.l2_norm() < w[0].velocity.l2_norm());
    rep.push(Check::flag("L2 norm decays monotonically", decays));
    Ok(rep)
}

fn perturbed_taylor_green(n: usize) -> Result<(SolverConfig, Field)> {
    let cfg = SolverConfig {
        n,
        viscosity: 0.05,
        t_end: 0.5,
        snapshot_every: 1_000_000,
        perturbation_radius: 4.0,
        ..Default::default()
    };
    let p = solver::twin_perturbation(&cfg, 1)?;
    Ok((cfg.clone(), &cfg.initial_velocity()? + &p.scale(0.3 * std::f64::consts::PI)))
}

/// Observed order from successive dt halvings on a perturbed Taylor–Green
/// flow (plain Taylor–Green is integrated exactly by the integrating factor).
pub fn rk4_order() -> Result<f64> {
    let (mut cfg, u0) = perturbed_taylor_green(32)?;
    let mut finals = Vec::new();
    for k in 4..=6 {
        cfg.dt = 0.5f64.powi(k);
        let t = solver::run_from(&cfg, &u0)?;
        finals.push(t.snapshots.last().expect("nonempty").velocity.clone());
    }
    let e1 = (&finals[0] - &finals[1]).l2_norm();
    let e2 = (&finals[1] - &finals[2]).l2_norm();
    Ok((e1 / e2).log2())
}

/// `‖u(0) − back(fwd(u(0)))‖₂ / ‖u(0)‖₂` for 20 inviscid steps each way.
pub fn time_reversal() -> Result<f64> {
    let (_, u0) = perturbed_taylor_green(32)?;
    let g = u0.grid();
    let fwd = Stepper::new(g, 0.0, 0.01, ProductRule::ThreeHalves).with_cfl(0.5);
    let back = Stepper::new(g, 0.0, -0.01, ProductRule::ThreeHalves).with_cfl(0.5);
    let end = fwd.advance(&u0, 0.0, 20)?;
    let again = back.advance(&end, 0.2, 20)?;
    Ok(rel(&again, &u0.to_spectral()))
}

/// 3D Taylor–Green at `n = 32` up to `t = 0.5`.
pub fn taylor_green_3d() -> Result<(Trajectory, SuiteReport)> {
    let mut rep = SuiteReport::new("solver-3d");
    let cfg = SolverConfig {
        dim: 3,
        n: 32,
        viscosity: 0.05,
        dt: 0.01,
        t_end: 0.5,
        snapshot_every: 10,
        ..Default::default()
    };
    let traj = solver::run(&cfg)?;
    let finite = traj
        .snapshots
        .iter()
        .all(|s| s.velocity.spectral_components().iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()));
    rep.push(Check::flag("3D Taylor-Green NaN-free", finite));
    rep.push(Check::at_most("3D Taylor-Green energy balance", traj.energy_balance_residual(), 1e-4));
    rep.push(Check::at_most("3D Taylor-Green max |div u|", traj.max_divergence(), 1e-10));
    Ok((traj, rep))
}

// ---------------------------------------------------------------------------
// Studies built on the suites: the frequency split, Gronwall fits and the
// losing-derivative weights.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTripleStats {
    pub triple: CriterionTriple,
    pub levels: Vec<i32>,
    pub level_formula_ok: bool,
    pub low_ratios: Vec<f64>,
    pub high_ratios: Vec<f64>,
    pub reconstruction: f64,
}

impl SplitTripleStats {
    pub fn low_spread(&self) -> f64 {
        spread(&self.low_ratios)
    }

    pub fn high_spread(&self) -> f64 {
        spread(&self.high_ratios)
    }
}

/// `max / min` over the positive entries; `1` when fewer than two.
pub fn spread(values: &[f64]) -> f64 {
    let pos: Vec<f64> = values.iter().cloned().filter(|x| *x > 0.0).collect();
    if pos.len() < 2 {
        return 1.0;
    }
    let max = pos.iter().cloned().fold(0.0, f64::max);
    let min = pos.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

pub fn split_triples() -> Vec<CriterionTriple> {
    [(0.25, 4.0), (0.5, 6.0), (1.0, 3.0)]
        .into_iter()
        .map(|(r, p)| CriterionTriple::from_r_p(r, p, TripleMode::Strict).expect("valid triple"))
        .collect()
}

/// Splits `samples` random fields on a 3D grid for each triple.
pub fn split_study(n: usize, seed: u64, samples: usize) -> Result<Vec<SplitTripleStats>> {
    let g = Grid::new(3, n)?;
    let dy = Dyadic::with_default_cutoffs(g);
    let mut out = Vec::new();
    for triple in split_triples() {
        let mut rng = random::rng(seed);
        let spec = BesovSpec { s: triple.r, p: triple.p, q: f64::INFINITY };
        let mut stats = SplitTripleStats {
            triple,
            levels: vec![],
            level_formula_ok: true,
            low_ratios: vec![],
            high_ratios: vec![],
            reconstruction: 0.0,
        };
        for _ in 0..samples {
            let raw = random::divergence_free(g, &mut rng, g.dealias_radius(), 1.0, 1.0)?;
            // norms log-uniform in [0.05, 1.2] keep N inside the grid for q <= 4
            let target = 0.05 * 24f64.powf(rng.random::<f64>());
            let norm = besov::besov_norm(&dy, &raw, spec)?;
            let u = raw.scale(target / norm);
            let split = besov::split_low_high(&dy, &u, &triple, None)?;
            let formula =
                (triple.q / 2.0 * (std::f64::consts::E + split.norm).log2()).floor() as i32 + 1;
            stats.level_formula_ok &= split.n == formula;
            stats.levels.push(split.n);
            stats.low_ratios.push(split.low_bound_ratio(&triple));
            stats.high_ratios.push(split.high_bound_ratio(&triple)?);
            stats.reconstruction =
                stats.reconstruction.max(rel(&(&split.u_low + &split.u_high), &u.to_spectral()));
        }
        out.push(stats);
    }
    Ok(out)
}

/// The split integrals of every study triple along a stored trajectory.
pub fn split_trajectory(traj: &Trajectory) -> Result<Vec<(CriterionTriple, monitor::SplitIntegrals)>> {
    let g = traj.grid().ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let dy = Dyadic::with_default_cutoffs(g);
    split_triples()
        .into_iter()
        .map(|t| Ok((t, monitor::split_integrals(&dy, traj, &t)?)))
        .collect()
}

/// Twin-run configuration for the Gronwall study.
pub fn gronwall_config(n: usize) -> SolverConfig {
    SolverConfig {
        dim: 2,
        n,
        viscosity: 0.01,
        dt: 0.01,
        t_end: 2.0,
        snapshot_every: 1,
        perturbation_radius: 4.0,
        ..Default::default()
    }
}

/// The criterion triple of the Gronwall study.
pub fn gronwall_triple() -> CriterionTriple {
    CriterionTriple::from_r_p(0.5, 6.0, TripleMode::Strict).expect("valid triple")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallRow {
    pub n: usize,
    pub delta: f64,
    pub c_fit: f64,
    pub max_growth: f64,
    pub envelope_holds: bool,
    pub zero_c_fails: bool,
    pub growth: Vec<f64>,
}

/// Twin runs for every `(n, δ)` pair, all from `seed`.
pub fn gronwall_study(ns: &[usize], deltas: &[f64], seed: u64) -> Result<(Vec<GronwallRow>, String)> {
    let triple = gronwall_triple();
    let mut rows = Vec::new();
    for &n in ns {
        let cfg = gronwall_config(n);
        let dy = Dyadic::with_default_cutoffs(cfg.grid()?);
        let u0 = cfg.initial_velocity()?;
        let base = solver::run_from(&cfg, &u0)?;
        let p = solver::twin_perturbation(&cfg, seed)?;
        for &delta in deltas {
            let v0 = &u0 + &p.scale(delta * u0.l2_norm());
            let twin = solver::run_from(&cfg, &v0)?;
            let fit = monitor::gronwall_fit(&dy, &base, &twin, &triple)?;
            rows.push(GronwallRow {
                n,
                delta,
                c_fit: fit.c_fit,
                max_growth: fit.max_growth,
                envelope_holds: fit.envelope_holds(fit.c_fit),
                zero_c_fails: !fit.envelope_holds(0.0),
                growth: fit.growth(&base, &twin),
            });
        }
    }
    let mut csv = String::from("n,delta,c_fit,max_growth,final_growth\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.n,
            fmt_f(r.delta),
            fmt_f(r.c_fit),
            fmt_f(r.max_growth),
            fmt_f(*r.growth.last().expect("nonempty"))
        );
    }
    Ok((rows, csv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosingStudy {
    pub epsilon_monotone: bool,
    pub growth_excess: f64,
    pub lambdas: Vec<f64>,
    pub t_star: Vec<f64>,
    pub sup_weight: Vec<f64>,
    pub synthetic_t_star: f64,
    pub synthetic_closed_form: f64,
    pub synthetic_interval: f64,
}

/// Case-(b) diagnostics on a stored twin run plus the synthetic check of `t*`.
pub fn losing_study(u: &Trajectory, v: &Trajectory, s: f64, lambdas: &[f64]) -> Result<LosingStudy> {
    let g = u.grid().ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let dy = Dyadic::with_default_cutoffs(g);
    let eps = monitor::epsilon_weights(&dy, u, v)?;
    let blocks = monitor::block_series(&dy, u, v)?;
    let times = u.times();
    let mut t_star = Vec::new();
    let mut sup_weight = Vec::new();
    for &lambda in lambdas {
        let ts = monitor::smallness_window(&times, &eps.lipschitz_integral, s, lambda);
        let weights = monitor::losing_weight(&blocks, &eps.eps, lambda, s);
        let sup = weights
            .iter()
            .zip(&times)
            .filter(|(_, &t)| t <= ts)
            .flat_map(|(row, _)| row.iter().cloned())
            .fold(0.0, f64::max);
        t_star.push(ts);
        sup_weight.push(sup);
    }

    // constant-in-time synthetic pair: L(t) = 2Mt, t* = (1−s)log 2 / (2λM)
    let field = u.snapshots[0].velocity.clone();
    let dt = 0.01;
    let syn_times: Vec<f64> = (0..=400).map(|i| i as f64 * dt).collect();
    let syn = Trajectory {
        config: u.config.clone(),
        snapshots: syn_times
            .iter()
            .map(|&t| solver::Snapshot { time: t, velocity: field.clone() })
            .collect(),
        dissipation: vec![0.0; syn_times.len()],
    };
    let m = besov::besov_norm(&dy, &field, BesovSpec { s: 1.0, p: f64::INFINITY, q: f64::INFINITY })?;
    let lambda = lambdas[0];
    let syn_eps = monitor::epsilon_weights(&dy, &syn, &syn)?;
    let synthetic_t_star = monitor::smallness_window(&syn_times, &syn_eps.lipschitz_integral, s, lambda);
    let synthetic_closed_form = (1.0 - s) * std::f64::consts::LN_2 / (2.0 * lambda * m);
    Ok(LosingStudy {
        epsilon_monotone: monitor::epsilon_monotone(&eps),
        growth_excess: monitor::epsilon_growth_excess(&eps),
        lambdas: lambdas.to_vec(),
        t_star,
        sup_weight,
        synthetic_t_star,
        synthetic_closed_form,
        synthetic_interval: dt,
    })
}
