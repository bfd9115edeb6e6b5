//! Diagnostics evaluated on stored trajectories: criterion integrals,
//! block norms of the difference `w = u − v`, the losing-derivative weights,
//! per-block energy audits, the trilinear identity and Gronwall fits.
//!
//! Time integrals use the trapezoid rule over snapshot times.

use std::f64::consts::{E, LN_2};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::besov::{self, BesovSpec, CriterionTriple};
use crate::error::{Error, Result};
use crate::field::{Field, ProductRule};
use crate::lp::Dyadic;
use crate::solver::Trajectory;

/// `∫_{t_0}^{t_i} f` by the trapezoid rule, one value per sample.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

fn nonempty(traj: &Trajectory) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::Precondition("trajectory has no snapshots".into()));
    }
    Ok(())
}

/// Checks that two trajectories share grid and snapshot times.
pub fn check_aligned(u: &Trajectory, v: &Trajectory) -> Result<()> {
    nonempty(u)?;
    if u.grid() != v.grid() {
        return Err(Error::Shape("trajectories live on different grids".into()));
    }
    if u.times() != v.times() {
        return Err(Error::Precondition("trajectories have misaligned snapshot times".into()));
    }
    Ok(())
}

fn differences(u: &Trajectory, v: &Trajectory) -> Vec<Field> {
    u.snapshots.iter().zip(&v.snapshots).map(|(a, b)| &a.velocity - &b.velocity).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSeries {
    pub times: Vec<f64>,
    /// `‖u(t_i)‖_{B^r_{p,∞}}`.
    pub norms: Vec<f64>,
    /// `I(t_i) = ∫₀^{t_i} (e + ‖u‖_{B^r_{p,∞}})^q`.
    pub integral: Vec<f64>,
}

pub fn besov_series(dy: &Dyadic, traj: &Trajectory, spec: BesovSpec) -> Result<Vec<f64>> {
    traj.snapshots.iter().map(|s| besov::besov_norm(dy, &s.velocity, spec)).collect()
}

pub fn criterion_integral(
    dy: &Dyadic,
    traj: &Trajectory,
    triple: &CriterionTriple,
) -> Result<CriterionSeries> {
    nonempty(traj)?;
    let spec = BesovSpec { s: triple.r, p: triple.p, q: f64::INFINITY };
    let norms = besov_series(dy, traj, spec)?;
    let times = traj.times();
    let integrand: Vec<f64> = norms.iter().map(|&b| (E + b).powf(triple.q)).collect();
    let integral = cumulative_trapezoid(&times, &integrand);
    Ok(CriterionSeries { times, norms, integral })
}

/// `‖Δ_j w(t_i)‖₂`, row `i`, column `j + 1`.
pub fn block_series(dy: &Dyadic, u: &Trajectory, v: &Trajectory) -> Result<Vec<Vec<f64>>> {
    check_aligned(u, v)?;
    differences(u, v).iter().map(|w| besov::block_norms(dy, w, 2.0)).collect()
}

/// `sup_j 2^{−js} b_j` for one row of block norms, with the smallest attaining `j`.
pub fn weighted_sup(row: &[f64], s: f64) -> (f64, i32) {
    let mut best = (0.0, -1);
    for (i, &b) in row.iter().enumerate() {
        let j = i as i32 - 1;
        let value = 2f64.powf(-(j as f64) * s) * b;
        if value > best.0 {
            best = (value, j);
        }
    }
    best
}

/// `W(t_i) = sup_j 2^{−js}‖Δ_j w(t_i)‖₂` with the attaining block.
pub fn diff_norm_w(dy: &Dyadic, u: &Trajectory, v: &Trajectory, s: f64) -> Result<Vec<(f64, i32)>> {
    Ok(block_series(dy, u, v)?.iter().map(|row| weighted_sup(row, s)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSeries {
    pub times: Vec<f64>,
    /// `ε_j(t_i)`, row `i`, column `j + 1`.
    pub eps: Vec<Vec<f64>>,
    /// `‖u‖_{L¹(0,t_i;B¹_{∞,∞})} + ‖v‖_{L¹(0,t_i;B¹_{∞,∞})}`.
    pub lipschitz_integral: Vec<f64>,
}

/// Per-snapshot block sup-norms `‖Δ_j f‖_∞` for `j = -1..=j_max`.
fn sup_blocks(dy: &Dyadic, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    traj.snapshots
        .iter()
        .map(|s| besov::block_norms(dy, &s.velocity, f64::INFINITY))
        .collect()
}

/// `ε_j(t) = ∫₀ᵗ Σ_{j′≤j+4} 2^{j′}(‖Δ_{j′}u‖_∞ + ‖Δ_{j′}v‖_∞)`.
///
/// The integrand for `j + 1` is the one for `j` plus nonnegative terms, and
/// the trapezoid sum is monotone in its integrand, so the computed `ε_j` is
/// nondecreasing in `t` and `j` without rounding exceptions.
pub fn epsilon_weights(dy: &Dyadic, u: &Trajectory, v: &Trajectory) -> Result<EpsilonSeries> {
    check_aligned(u, v)?;
    let times = u.times();
    let bu = sup_blocks(dy, u)?;
    let bv = sup_blocks(dy, v)?;
    let blocks = bu[0].len();
    let mut integrand = vec![vec![0.0; blocks]; times.len()];
    let mut lipschitz = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let terms: Vec<f64> = (0..blocks)
            .map(|b| 2f64.powi(b as i32 - 1) * (bu[i][b] + bv[i][b]))
            .collect();
        let mut prefix = vec![0.0; blocks + 1];
        for b in 0..blocks {
            prefix[b + 1] = prefix[b] + terms[b];
        }
        for (b, slot) in integrand[i].iter_mut().enumerate() {
            // j = b − 1, so j′ ≤ j + 4 covers columns 0..=b+4
            *slot = prefix[(b + 5).min(blocks)];
        }
        let lip_u = (0..blocks).map(|b| 2f64.powi(b as i32 - 1) * bu[i][b]).fold(0.0, f64::max);
        let lip_v = (0..blocks).map(|b| 2f64.powi(b as i32 - 1) * bv[i][b]).fold(0.0, f64::max);
        lipschitz.push(lip_u + lip_v);
    }
    let mut eps = vec![vec![0.0; blocks]; times.len()];
    for b in 0..blocks {
        let column: Vec<f64> = integrand.iter().map(|row| row[b]).collect();
        for (i, value) in cumulative_trapezoid(&times, &column).into_iter().enumerate() {
            eps[i][b] = value;
        }
    }
    let lipschitz_integral = cumulative_trapezoid(&times, &lipschitz);
    Ok(EpsilonSeries { times, eps, lipschitz_integral })
}

/// Largest relative violation of `ε_{j′} − ε_j ≤ (j′−j)(‖u‖_{L¹B¹} + ‖v‖_{L¹B¹})`;
/// nonpositive when the bound holds everywhere.
pub fn epsilon_growth_excess(series: &EpsilonSeries) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (row, &bound) in series.eps.iter().zip(&series.lipschitz_integral) {
        for a in 0..row.len() {
            for b in a + 1..row.len() {
                let gap = row[b] - row[a];
                let allowed = (b - a) as f64 * bound;
                worst = worst.max((gap - allowed) / allowed.max(f64::MIN_POSITIVE));
            }
        }
    }
    worst
}

/// Whether `ε_j(t_i)` is nondecreasing along both indices.
pub fn epsilon_monotone(series: &EpsilonSeries) -> bool {
    let rows = &series.eps;
    let in_j = rows.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
    let in_t = rows.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b));
    in_j && in_t
}

/// `W_j^λ(t_i) = 2^{−js} e^{−λ ε_j(t_i)} ‖w_j(t_i)‖₂`.
pub fn losing_weight(blocks: &[Vec<f64>], eps: &[Vec<f64>], lambda: f64, s: f64) -> Vec<Vec<f64>> {
    blocks
        .iter()
        .zip(eps)
        .map(|(brow, erow)| {
            brow.iter()
                .zip(erow)
                .enumerate()
                .map(|(i, (&b, &e))| 2f64.powf(-((i as f64) - 1.0) * s) * (-lambda * e).exp() * b)
                .collect()
        })
        .collect()
}

/// Largest snapshot time with `λ L(t) < (1 − s) log 2`, where `L` is the
/// cumulative Lipschitz integral; `0` if even the first sample fails.
pub fn smallness_window(times: &[f64], lipschitz_integral: &[f64], s: f64, lambda: f64) -> f64 {
    let limit = (1.0 - s) * LN_2;
    let mut t_star = 0.0;
    for (&t, &l) in times.iter().zip(lipschitz_integral) {
        if lambda * l < limit {
            t_star = t;
        } else {
            break;
        }
    }
    t_star
}

/// Loss index `s`, weight rate `λ` and the exponents of the two solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosingParams {
    pub s: f64,
    pub lambda: f64,
}

impl LosingParams {
    pub fn new(s: f64, lambda: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("loss index s must lie in (0, 1), got {s}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("weight rate must be positive, got {lambda}")));
        }
        Ok(Self { s, lambda })
    }
}

/// Admissible open interval `(−r₁, min(1 + r₁, 1 + r₂))` for `s` in the
/// sub-critical case; `None` when it is empty.
pub fn case_a_window(r1: f64, r2: f64) -> Option<(f64, f64)> {
    let lo = -r1;
    let hi = (1.0 + r1).min(1.0 + r2);
    (lo < hi).then_some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub j: i32,
    pub time: f64,
    /// Centered difference of `½‖w_j‖₂²`.
    pub half_energy_rate: f64,
    /// `ν‖∇w_j‖₂²`.
    pub dissipation: f64,
    /// `−⟨Δ_j(w·∇u), w_j⟩`.
    pub stretching: f64,
    /// `−⟨Δ_j(v·∇w) − v·∇w_j, w_j⟩`.
    pub transport: f64,
    /// `⟨v·∇w_j, w_j⟩`, zero for divergence-free `v`.
    pub cancellation: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// `‖∇w_j‖₂² ≥ (3/4)² 2^{2j} ‖w_j‖₂²`; always true for `j = −1`.
    pub lower_bound_holds: bool,
}

/// Energy balance of block `j` of `w = u − v` at interior snapshot `i`:
/// `½ d/dt‖w_j‖² + ν‖∇w_j‖² = −⟨Δ_j(w·∇u), w_j⟩ − ⟨Δ_j(v·∇w) − v·∇w_j, w_j⟩`.
pub fn block_energy_audit(
    dy: &Dyadic,
    u: &Trajectory,
    v: &Trajectory,
    j: i32,
    i: usize,
) -> Result<AuditRecord> {
    check_aligned(u, v)?;
    if i == 0 || i + 1 >= u.len() {
        return Err(Error::Range(format!("snapshot {i} has no centered difference")));
    }
    let nu = u.config.viscosity;
    let rule = ProductRule::ThreeHalves;
    let w_at = |k: usize| &u.snapshots[k].velocity - &v.snapshots[k].velocity;
    let e = |k: usize| -> Result<f64> { Ok(0.5 * dy.delta(&w_at(k), j)?.l2_norm().powi(2)) };
    let (t0, t2) = (u.snapshots[i - 1].time, u.snapshots[i + 1].time);
    let half_energy_rate = (e(i + 1)? - e(i - 1)?) / (t2 - t0);

    let uu = &u.snapshots[i].velocity;
    let vv = &v.snapshots[i].velocity;
    let w = w_at(i);
    let wj = dy.delta(&w, j)?;
    let grad_sq = wj.gradient().l2_norm().powi(2);
    let dissipation = nu * grad_sq;
    let stretching = -dy.delta(&uu.advected_by(&w, rule)?, j)?.inner(&wj);
    let local = wj.advected_by(vv, rule)?;
    let cancellation = local.inner(&wj);
    let transport = -(&dy.delta(&w.advected_by(vv, rule)?, j)? - &local).inner(&wj);
    let residual = half_energy_rate + dissipation - stretching - transport;
    let scale = half_energy_rate.abs() + dissipation + stretching.abs() + transport.abs();
    let lower_bound_holds = j < 0 || {
        let bound = 0.5625 * 4f64.powi(j) * wj.l2_norm().powi(2);
        grad_sq >= bound * (1.0 - 1e-12)
    };
    Ok(AuditRecord {
        j,
        time: u.snapshots[i].time,
        half_energy_rate,
        dissipation,
        stretching,
        transport,
        cancellation,
        residual,
        relative_residual: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
        lower_bound_holds,
    })
}

/// `∫ u·∇v·w dx = Σ_c ⟨(u·∇)v_c, w_c⟩`.
pub fn trilinear(u: &Field, v: &Field, w: &Field) -> Result<f64> {
    Ok(v.advected_by(u, ProductRule::ThreeHalves)?.inner(w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub times: Vec<f64>,
    /// `⟨u,v⟩ + 2ν∫⟨∇u,∇v⟩`.
    pub lhs: Vec<f64>,
    /// `⟨u₀,v₀⟩ + ∫⟨w·∇u, w⟩`.
    pub rhs: Vec<f64>,
    /// `max_i |lhs − rhs| / ‖u₀‖₂²`.
    pub residual: f64,
}

/// `⟨u,v⟩ + 2ν∫⟨∇u,∇v⟩ = ⟨u₀,v₀⟩ + ∫⟨w·∇u, w⟩` along a twin run.
pub fn integral_identity_check(u: &Trajectory, v: &Trajectory) -> Result<IdentityCheck> {
    check_aligned(u, v)?;
    let nu = u.config.viscosity;
    let times = u.times();
    let mut pair = Vec::new();
    let mut grad_pair = Vec::new();
    let mut tri = Vec::new();
    for (a, b) in u.snapshots.iter().zip(&v.snapshots) {
        let (uu, vv) = (&a.velocity, &b.velocity);
        let w = uu - vv;
        pair.push(uu.inner(vv));
        grad_pair.push(uu.gradient().inner(&vv.gradient()));
        tri.push(trilinear(&w, uu, &w)?);
    }
    let gi = cumulative_trapezoid(&times, &grad_pair);
    let ti = cumulative_trapezoid(&times, &tri);
    let lhs: Vec<f64> = pair.iter().zip(&gi).map(|(p, g)| p + 2.0 * nu * g).collect();
    let rhs: Vec<f64> = ti.iter().map(|t| pair[0] + t).collect();
    let scale = u.snapshots[0].velocity.l2_norm().powi(2).max(f64::MIN_POSITIVE);
    let residual = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    Ok(IdentityCheck { times, lhs, rhs, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallFit {
    pub times: Vec<f64>,
    /// `‖w(t)‖₂² + ν∫₀ᵗ‖∇w‖₂²`.
    pub lhs: Vec<f64>,
    pub w0_sq: f64,
    pub integral: Vec<f64>,
    /// `log(lhs/‖w₀‖²) / I(t)` for `t > 0`.
    pub c_t: Vec<f64>,
    /// `max(sup_t c_t, 0)`; zero for a degenerate (`w₀ = 0`) run.
    pub c_fit: f64,
    pub degenerate: bool,
    /// `max_t ‖w(t)‖₂ / ‖w₀‖₂`.
    pub max_growth: f64,
}

impl GronwallFit {
    /// `lhs(t) ≤ ‖w₀‖² exp(c I(t))` at every snapshot, up to `1e-12` relative.
    pub fn envelope_holds(&self, c: f64) -> bool {
        if self.degenerate {
            return true;
        }
        self.lhs
            .iter()
            .zip(&self.integral)
            .all(|(&l, &i)| l <= self.w0_sq * (c * i).exp() * (1.0 + 1e-12))
    }

    /// `‖w(t)‖₂/‖w₀‖₂` per snapshot.
    pub fn growth(&self, u: &Trajectory, v: &Trajectory) -> Vec<f64> {
        differences(u, v).iter().map(|w| w.l2_norm() / self.w0_sq.sqrt()).collect()
    }
}

pub fn gronwall_fit(
    dy: &Dyadic,
    u: &Trajectory,
    v: &Trajectory,
    triple: &CriterionTriple,
) -> Result<GronwallFit> {
    check_aligned(u, v)?;
    let nu = u.config.viscosity;
    let criterion = criterion_integral(dy, u, triple)?;
    let times = criterion.times.clone();
    let ws = differences(u, v);
    let w_sq: Vec<f64> = ws.iter().map(|w| w.l2_norm().powi(2)).collect();
    let grad_sq: Vec<f64> = ws.iter().map(|w| w.gradient().l2_norm().powi(2)).collect();
    let gi = cumulative_trapezoid(&times, &grad_sq);
    let lhs: Vec<f64> = w_sq.iter().zip(&gi).map(|(a, g)| a + nu * g).collect();
    let w0_sq = w_sq[0];
    let degenerate = w0_sq == 0.0;
    let mut c_t = Vec::with_capacity(times.len());
    let mut c_fit: f64 = 0.0;
    for (l, i) in lhs.iter().zip(&criterion.integral) {
        let c = if degenerate || *i == 0.0 { 0.0 } else { (l / w0_sq).ln() / i };
        c_fit = c_fit.max(c);
        c_t.push(c);
    }
    let max_growth = if degenerate {
        0.0
    } else {
        w_sq.iter().map(|x| (x / w0_sq).sqrt()).fold(0.0, f64::max)
    };
    Ok(GronwallFit {
        times,
        lhs,
        w0_sq,
        integral: criterion.integral,
        c_t,
        c_fit,
        degenerate,
        max_growth,
    })
}

/// `K = max(sup_t log(W(t)²/W(0)²) / J(t), 0)` with `J` the integral of `rate`.
pub fn growth_fit(times: &[f64], w: &[f64], rate: &[f64]) -> f64 {
    let j = cumulative_trapezoid(times, rate);
    let w0 = w[0];
    if w0 == 0.0 {
        return 0.0;
    }
    w.iter()
        .zip(&j)
        .filter(|(_, &ji)| ji > 0.0)
        .map(|(&wi, &ji)| ((wi / w0).powi(2)).ln() / ji)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIntegrals {
    /// `∫‖∇u^l‖_∞`.
    pub low_integral: f64,
    /// `∫‖u^h‖_{p̃}^{q̃}`.
    pub high_integral: f64,
    /// `∫(e + ‖u‖_{B^r_{p,∞}})^q`.
    pub criterion_integral: f64,
    pub low_constant: f64,
    pub high_constant: f64,
    /// `max_t 2^{2(1−1/q)N(t)} / (e + ‖u(t)‖)^{q−1}`, at most 4.
    pub chain_ratio: f64,
    pub levels: Vec<i32>,
}

/// Time integrals of the low and high parts of the split along a trajectory,
/// each measured against the criterion integral.
pub fn split_integrals(dy: &Dyadic, traj: &Trajectory, triple: &CriterionTriple) -> Result<SplitIntegrals> {
    let criterion = criterion_integral(dy, traj, triple)?;
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut levels = Vec::new();
    let mut chain: f64 = 0.0;
    for (s, &norm) in traj.snapshots.iter().zip(&criterion.norms) {
        let split = besov::split_low_high(dy, &s.velocity, triple, Some(norm))?;
        low.push(split.u_low.gradient().max_abs());
        let h = split.u_high.lp_norm(split.p_tilde)?;
        high.push(if split.q_tilde.is_infinite() { h } else { h.powf(split.q_tilde) });
        chain = chain.max(
            2f64.powf(2.0 * (1.0 - 1.0 / triple.q) * split.n as f64) / (E + norm).powf(triple.q - 1.0),
        );
        levels.push(split.n);
    }
    let times = &criterion.times;
    let low_integral = *cumulative_trapezoid(times, &low).last().expect("nonempty");
    let high_integral = *cumulative_trapezoid(times, &high).last().expect("nonempty");
    let ci = *criterion.integral.last().expect("nonempty");
    let denom = ci.max(f64::MIN_POSITIVE);
    Ok(SplitIntegrals {
        low_integral,
        high_integral,
        criterion_integral: ci,
        low_constant: low_integral / denom,
        high_constant: high_integral / denom,
        chain_ratio: chain,
        levels,
    })
}

/// Formats a float for reports; round-trips exactly.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

/// Parameters of a full twin-run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub triple: CriterionTriple,
    pub s: f64,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub triple: CriterionTriple,
    pub s: f64,
    pub c_fit: f64,
    pub degenerate: bool,
    pub max_growth: f64,
    pub envelope_holds: bool,
    pub identity_residual: f64,
    pub epsilon_monotone: bool,
    pub epsilon_growth_excess: f64,
    pub t_star: Vec<(f64, f64)>,
    pub losing_sup: Vec<(f64, f64)>,
    pub w_max: f64,
}

/// All series of a twin-run report plus their CSV renderings.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub summary: ReportSummary,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

pub fn build_report(
    dy: &Dyadic,
    u: &Trajectory,
    v: &Trajectory,
    params: &ReportParams,
) -> Result<CriterionReport> {
    check_aligned(u, v)?;
    for &lambda in &params.lambdas {
        LosingParams::new(params.s, lambda)?;
    }
    let criterion = criterion_integral(dy, u, &params.triple)?;
    let blocks = block_series(dy, u, v)?;
    let w: Vec<(f64, i32)> = blocks.iter().map(|r| weighted_sup(r, params.s)).collect();
    let eps = epsilon_weights(dy, u, v)?;
    let gron = gronwall_fit(dy, u, v, &params.triple)?;
    let ident = integral_identity_check(u, v)?;
    let times = u.times();

    let mut files = Vec::new();
    let mut csv = String::from("t,besov_norm,criterion_integral\n");
    for i in 0..times.len() {
        let _ = writeln!(csv, "{},{},{}", fmt_f(times[i]), fmt_f(criterion.norms[i]), fmt_f(criterion.integral[i]));
    }
    files.push(("criterion.csv".to_string(), csv));

    let mut csv = String::from("t,j,block_norm\n");
    for (i, row) in blocks.iter().enumerate() {
        for (b, x) in row.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", fmt_f(times[i]), b as i32 - 1, fmt_f(*x));
        }
    }
    files.push(("blocks.csv".to_string(), csv));

    let mut csv = String::from("t,W,j_attained\n");
    for (i, (value, j)) in w.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", fmt_f(times[i]), fmt_f(*value), j);
    }
    files.push(("w.csv".to_string(), csv));

    let mut csv = String::from("t,j,epsilon\n");
    for (i, row) in eps.eps.iter().enumerate() {
        for (b, x) in row.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", fmt_f(times[i]), b as i32 - 1, fmt_f(*x));
        }
    }
    files.push(("epsilon.csv".to_string(), csv));

    let mut csv = String::from("lambda,t,j,weighted_block\n");
    let mut t_star = Vec::new();
    let mut losing_sup = Vec::new();
    for &lambda in &params.lambdas {
        let weights = losing_weight(&blocks, &eps.eps, lambda, params.s);
        let ts = smallness_window(&times, &eps.lipschitz_integral, params.s, lambda);
        let mut sup: f64 = 0.0;
        for (i, row) in weights.iter().enumerate() {
            for (b, x) in row.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{},{}", fmt_f(lambda), fmt_f(times[i]), b as i32 - 1, fmt_f(*x));
                if times[i] <= ts {
                    sup = sup.max(*x);
                }
            }
        }
        t_star.push((lambda, ts));
        losing_sup.push((lambda, sup));
    }
    files.push(("losing.csv".to_string(), csv));

    let mut csv = String::from("t,lhs,criterion_integral,c_t\n");
    for i in 0..times.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f(times[i]),
            fmt_f(gron.lhs[i]),
            fmt_f(gron.integral[i]),
            fmt_f(gron.c_t[i])
        );
    }
    files.push(("gronwall.csv".to_string(), csv));

    let summary = ReportSummary {
        triple: params.triple,
        s: params.s,
        c_fit: gron.c_fit,
        degenerate: gron.degenerate,
        max_growth: gron.max_growth,
        envelope_holds: gron.envelope_holds(gron.c_fit),
        identity_residual: ident.residual,
        epsilon_monotone: epsilon_monotone(&eps),
        epsilon_growth_excess: epsilon_growth_excess(&eps),
        t_star,
        losing_sup,
        w_max: w.iter().map(|x| x.0).fold(0.0, f64::max),
    };
    files.push(("summary.json".to_string(), serde_json::to_string_pretty(&summary)? + "\n"));
    Ok(CriterionReport { summary, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::solver::{Snapshot, SolverConfig};

    fn constant_traj(u: &Field, times: &[f64]) -> Trajectory {
        Trajectory {
            config: SolverConfig::default(),
            snapshots: times.iter().map(|&t| Snapshot { time: t, velocity: u.clone() }).collect(),
            dissipation: vec![0.0; times.len()],
        }
    }

    #[test]
    fn trapezoid_is_exact_for_linear_integrands() {
        let t: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        let i = cumulative_trapezoid(&t, &f);
        assert!((i[10] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn zero_trajectory_criterion_integral() {
        let g = Grid::new(2, 16).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let zero = crate::solver::zero_velocity(g);
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.25).collect();
        let traj = constant_traj(&zero, &times);
        let triple = CriterionTriple::from_r_p(0.5, 6.0, crate::besov::TripleMode::Strict).unwrap();
        let c = criterion_integral(&dy, &traj, &triple).unwrap();
        assert!((c.integral[4] - E.powf(triple.q) * 1.0).abs() < 1e-13);
        let t_star = smallness_window(&times, &[0.0; 5], 0.5, 1.0);
        assert_eq!(t_star, 1.0);
    }

    #[test]
    fn epsilon_for_a_pure_block_zero_mode() {
        // |k| = √2 lies where φ = 1, so only Δ₀ is populated
        let g = Grid::new(2, 16).unwrap();
        let dy = Dyadic::with_default_cutoffs(g);
        let mut c = vec![num_complex::Complex64::default(); g.len()];
        c[g.flat_of([1, 1, 0])] = 0.5.into();
        c[g.flat_of([-1, -1, 0])] = 0.5.into();
        let minus: Vec<_> = c.iter().map(|z| -z).collect();
        let u = Field::from_spectral(g, vec![c, minus]).unwrap();
        let blocks = besov::block_norms(&dy, &u, f64::INFINITY).unwrap();
        assert_eq!(blocks[0], 0.0);
        let a = blocks[1];
        assert!(blocks[2..].iter().all(|&b| b == 0.0));
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let traj = constant_traj(&u, &times);
        let eps = epsilon_weights(&dy, &traj, &traj).unwrap();
        for (i, row) in eps.eps.iter().enumerate() {
            for &e in row {
                assert!((e - 2.0 * a * times[i]).abs() < 1e-13);
            }
        }
        assert!(epsilon_monotone(&eps));
        assert!(epsilon_growth_excess(&eps) <= 0.0);
    }

    #[test]
    fn case_a_window_conditions() {
        assert!(case_a_window(-0.25, -0.5).is_some());
        assert!(case_a_window(-0.6, 0.5).is_none());
        assert!(case_a_window(-0.4, -0.7).is_none());
    }
}
