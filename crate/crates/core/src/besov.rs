//! Inhomogeneous Besov norms, curl and Biot–Savart, and the low/high
//! frequency split driven by a criterion triple `(r, p, q)`.

use std::f64::consts::E;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_exponent, filtered_norms, Field};
use crate::lp::Dyadic;

/// Parses an exponent: a decimal, a fraction such as `8/3`, or `inf`.
pub fn parse_exponent(text: &str) -> Result<f64> {
    let t = text.trim();
    let value = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        s => match s.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| bad(t))?;
                let b: f64 = b.trim().parse().map_err(|_| bad(t))?;
                a / b
            }
            None => s.parse().map_err(|_| bad(t))?,
        },
    };
    if value.is_nan() {
        return Err(bad(t));
    }
    Ok(value)
}

fn bad(t: &str) -> Error {
    Error::Config(format!("cannot parse exponent `{t}`"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        check_exponent(p)?;
        check_exponent(q)?;
        if !s.is_finite() {
            return Err(Error::Domain(format!("regularity index must be finite, got {s}")));
        }
        Ok(Self { s, p, q })
    }
}

/// `‖Δ_j f‖_p` for `j = -1..=j_max` (index `j + 1`).
pub fn block_norms(dy: &Dyadic, f: &Field, p: f64) -> Result<Vec<f64>> {
    dy.check_grid(f)?;
    let tables: Vec<&[f64]> = dy
        .block_range()
        .map(|j| dy.block_multiplier(j).map(|m| m.expect("j >= -1")))
        .collect::<Result<_>>()?;
    filtered_norms(f, &tables, p)
}

/// Combines block norms `‖Δ_j f‖_p` into `‖(2^{js}‖Δ_j f‖_p)_j‖_{ℓ^q}`.
pub fn besov_from_blocks(norms: &[f64], s: f64, q: f64) -> f64 {
    let weighted = norms.iter().enumerate().map(|(i, &b)| 2f64.powf(s * (i as f64 - 1.0)) * b);
    if q.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        weighted.map(|x| x.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `‖f‖_{B^s_{p,q}}` over the blocks `-1..=j_max`.
pub fn besov_norm(dy: &Dyadic, f: &Field, spec: BesovSpec) -> Result<f64> {
    let norms = block_norms(dy, f, spec.p)?;
    Ok(besov_from_blocks(&norms, spec.s, spec.q))
}

/// Vorticity: a scalar in 2D, a vector in 3D.
pub fn curl(u: &Field) -> Result<Field> {
    if !u.is_vector() {
        return Err(Error::Shape("curl needs a vector field".into()));
    }
    let g = u.grid();
    let ik = ik_tables(g);
    let spec = u.spectral_components();
    let d = |flat: usize, c: usize, a: usize| {
        let idx = g.unravel(flat);
        ik[idx[a]] * spec[c][flat]
    };
    if g.dim() == 2 {
        let w = (0..g.len()).map(|f| d(f, 1, 0) - d(f, 0, 1)).collect();
        return Field::from_spectral(g, vec![w]);
    }
    let comps = [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)]
        .iter()
        .map(|&(c1, a1, c2, a2)| (0..g.len()).map(|f| d(f, c1, a1) - d(f, c2, a2)).collect())
        .collect();
    Field::from_spectral(g, comps)
}

/// `i k` per FFT index along one axis, zero on the Nyquist index.
fn ik_tables(g: crate::grid::Grid) -> Vec<Complex64> {
    let half = (g.n() / 2) as i64;
    (0..g.n())
        .map(|i| {
            let k = g.wavenumber(i);
            if k == -half {
                Complex64::default()
            } else {
                Complex64::new(0.0, k as f64)
            }
        })
        .collect()
}

/// Mean-zero divergence-free velocity with the given vorticity:
/// `û(k) = i k × ŵ(k) / |k|²` (3D), `û = i(k₂, −k₁) ŵ / |k|²` (2D).
pub fn biot_savart(w: &Field) -> Result<Field> {
    let g = w.grid();
    let dim = g.dim();
    let expected = if dim == 2 { 1 } else { 3 };
    if w.components() != expected {
        return Err(Error::Shape(format!(
            "vorticity in {dim}D has {expected} component(s), got {}",
            w.components()
        )));
    }
    let spec = w.spectral_components();
    let scale = spec.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if spec.iter().any(|c| c[0].norm() > 1e-10 * scale) {
        return Err(Error::Precondition("vorticity has nonzero mean".into()));
    }
    let mut out = vec![vec![Complex64::default(); g.len()]; dim];
    for flat in 1..g.len() {
        let k = g.wavevector(flat);
        if g.is_nyquist(k) {
            continue;
        }
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let k2 = kf.iter().map(|x| x * x).sum::<f64>();
        let i = Complex64::i();
        if dim == 2 {
            let z = spec[0][flat] / k2;
            out[0][flat] = i * kf[1] * z;
            out[1][flat] = -i * kf[0] * z;
        } else {
            let wv = [spec[0][flat], spec[1][flat], spec[2][flat]];
            let kdotw: Complex64 = (0..3).map(|a| wv[a] * kf[a]).sum();
            if kdotw.norm() > 1e-10 * scale * k2.sqrt() {
                return Err(Error::Precondition(format!(
                    "vorticity is not divergence-free at k = {k:?}"
                )));
            }
            let cross = [
                wv[2] * kf[1] - wv[1] * kf[2],
                wv[0] * kf[2] - wv[2] * kf[0],
                wv[1] * kf[0] - wv[0] * kf[1],
            ];
            for a in 0..3 {
                out[a][flat] = i * cross[a] / k2;
            }
        }
    }
    Field::from_spectral(g, out)
}

/// `‖div u‖₂ / max(‖∇u‖₂, 1)` by Parseval.
pub fn divergence_defect(u: &Field) -> f64 {
    let g = u.grid();
    let ik = ik_tables(g);
    let spec = u.spectral_components();
    let (mut div, mut grad) = (0.0, 0.0);
    for flat in 0..g.len() {
        let idx = g.unravel(flat);
        let mut d = Complex64::default();
        for (a, comp) in spec.iter().enumerate().take(g.dim()) {
            let f = ik[idx[a]];
            d += f * comp[flat];
            for c in spec.iter() {
                grad += (f * c[flat]).norm_sqr();
            }
        }
        div += d.norm_sqr();
    }
    let vol = g.volume();
    (div * vol).sqrt() / (grad * vol).sqrt().max(1.0)
}

fn check_divergence_free(u: &Field, tol: f64) -> Result<()> {
    let div = divergence_defect(u);
    if div > tol {
        return Err(Error::Precondition(format!("velocity is not divergence-free: {div:e}")));
    }
    Ok(())
}

/// `‖u‖_{B¹_{∞,∞}} / (‖u‖₂ + ‖curl u‖_{B⁰_{∞,∞}})`; zero for `u = 0`.
pub fn bkm_ratio(dy: &Dyadic, u: &Field) -> Result<f64> {
    check_divergence_free(u, 1e-10)?;
    let top = besov_norm(dy, u, BesovSpec { s: 1.0, p: f64::INFINITY, q: f64::INFINITY })?;
    if top == 0.0 {
        return Ok(0.0);
    }
    let w = curl(u)?;
    let vort = besov_norm(dy, &w, BesovSpec { s: 0.0, p: f64::INFINITY, q: f64::INFINITY })?;
    Ok(top / (u.l2_norm() + vort))
}

/// `‖w‖_{2p̃/(p̃−2)} / (‖w‖₂^{1−3/p̃} ‖∇w‖₂^{3/p̃})`; zero for `w = 0`.
pub fn gn_ratio(w: &Field, p_tilde: f64) -> Result<f64> {
    if !(p_tilde > 3.0) {
        return Err(Error::Domain(format!("needs p̃ > 3, got {p_tilde}")));
    }
    let l2 = w.l2_norm();
    if l2 == 0.0 {
        return Ok(0.0);
    }
    let m = if p_tilde.is_infinite() { 2.0 } else { 2.0 * p_tilde / (p_tilde - 2.0) };
    let theta = if p_tilde.is_infinite() { 0.0 } else { 3.0 / p_tilde };
    let grad = w.gradient().l2_norm();
    Ok(w.lp_norm(m)? / (l2.powf(1.0 - theta) * grad.powf(theta)))
}

/// Whether a triple is checked against the strict criterion range or the
/// wider range allowed for the losing-derivative case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleMode {
    /// `r ∈ (0, 1]`, `3/(1+r) < p ≤ ∞`, `(p, r) ≠ (∞, 1)`.
    Strict,
    /// `r ∈ (−1, 0]`.
    Losing,
}

/// Exponents `(r, p, q)` tied by `2/q + 3/p = 1 + r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionTriple {
    pub r: f64,
    pub p: f64,
    pub q: f64,
}

impl CriterionTriple {
    pub fn new(r: f64, p: f64, q: f64, mode: TripleMode) -> Result<Self> {
        check_exponent(p)?;
        check_exponent(q)?;
        let lhs = 2.0 / q + 3.0 / p;
        if (lhs - (1.0 + r)).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "(r, p, q) = ({r}, {p}, {q}) violates 2/q + 3/p = 1 + r (lhs {lhs}, rhs {})",
                1.0 + r
            )));
        }
        match mode {
            TripleMode::Strict => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::Domain(format!("r must lie in (0, 1], got {r}")));
                }
                if !(p > 3.0 / (1.0 + r)) {
                    return Err(Error::Domain(format!("p must exceed 3/(1+r), got {p}")));
                }
                if p.is_infinite() && r == 1.0 {
                    return Err(Error::Domain("(p, r) = (inf, 1) is excluded".into()));
                }
            }
            TripleMode::Losing => {
                if !(r > -1.0 && r <= 0.0) {
                    return Err(Error::Domain(format!("r must lie in (-1, 0], got {r}")));
                }
            }
        }
        Ok(Self { r, p, q })
    }

    /// The triple with `q` solved from the scaling relation.
    pub fn from_r_p(r: f64, p: f64, mode: TripleMode) -> Result<Self> {
        let inv = (1.0 + r - 3.0 / p) / 2.0;
        if !(inv > 0.0 && inv <= 1.0) {
            return Err(Error::Domain(format!(
                "no q >= 1 satisfies 2/q + 3/p = 1 + r for r = {r}, p = {p}"
            )));
        }
        Self::new(r, p, 1.0 / inv, mode)
    }

    /// `p̃ = max(3, p)(1 + δ)` with `δ` the first of `1/2, 1/4, …` giving
    /// `3/p − 3/p̃ − r < 0`; `p̃ = ∞` when `p = ∞`.
    pub fn p_tilde(&self) -> f64 {
        if self.p.is_infinite() {
            return f64::INFINITY;
        }
        let base = self.p.max(3.0);
        let mut delta = 0.5;
        for _ in 0..60 {
            let pt = base * (1.0 + delta);
            if 3.0 / self.p - 3.0 / pt - self.r < 0.0 {
                return pt;
            }
            delta *= 0.5;
        }
        // r > 0 makes the condition hold as δ → 0; unreachable for valid triples
        base * (1.0 + delta)
    }

    /// `q̃` from `2/q̃ = 1 − 3/p̃`.
    pub fn q_tilde(&self) -> f64 {
        2.0 / (1.0 - 3.0 / self.p_tilde())
    }

    /// `N = ⌊(q/2) log₂(e + norm)⌋ + 1`.
    pub fn split_level(&self, norm: f64) -> i32 {
        split_level(self.q, norm)
    }
}

/// `N = ⌊(q/2) log₂(e + norm)⌋ + 1`.
pub fn split_level(q: f64, norm: f64) -> i32 {
    (q / 2.0 * (E + norm).log2()).floor() as i32 + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub u_low: Field,
    pub u_high: Field,
    pub n: i32,
    pub p_tilde: f64,
    pub q_tilde: f64,
    /// `‖u‖_{B^r_{p,∞}}` used for `N`.
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub n: i32,
    pub p_tilde: f64,
    pub q_tilde: f64,
    pub norm: f64,
    pub r: f64,
    pub p: f64,
    pub q: f64,
    pub grad_low_sup: f64,
    pub high_lp_tilde: f64,
}

impl SplitResult {
    pub fn summary(&self, triple: &CriterionTriple) -> Result<SplitSummary> {
        Ok(SplitSummary {
            n: self.n,
            p_tilde: self.p_tilde,
            q_tilde: self.q_tilde,
            norm: self.norm,
            r: triple.r,
            p: triple.p,
            q: triple.q,
            grad_low_sup: self.u_low.gradient().max_abs(),
            high_lp_tilde: self.u_high.lp_norm(self.p_tilde)?,
        })
    }

    /// `‖∇u^l‖_∞ / (2^{(1 + dim/p − r)N} ‖u‖)`; the exponent is `2(1 − 1/q)` in 3D.
    pub fn low_bound_ratio(&self, triple: &CriterionTriple) -> f64 {
        let dim = self.u_low.grid().dim() as f64;
        let ex = 1.0 + dim / triple.p - triple.r;
        self.u_low.gradient().max_abs() / (2f64.powf(ex * self.n as f64) * self.norm)
    }

    /// `‖u^h‖_{p̃} / (2^{(dim/p − dim/p̃ − r)N} ‖u‖)`.
    pub fn high_bound_ratio(&self, triple: &CriterionTriple) -> Result<f64> {
        let dim = self.u_low.grid().dim() as f64;
        let ex = dim / triple.p - dim / self.p_tilde - triple.r;
        Ok(self.u_high.lp_norm(self.p_tilde)? / (2f64.powf(ex * self.n as f64) * self.norm))
    }
}

/// `u = S_N u + (u − S_N u)` with `N` from the triple and `‖u‖_{B^r_{p,∞}}`.
/// A negative or absent `norm` is recomputed.
pub fn split_low_high(
    dy: &Dyadic,
    u: &Field,
    triple: &CriterionTriple,
    norm: Option<f64>,
) -> Result<SplitResult> {
    CriterionTriple::new(triple.r, triple.p, triple.q, TripleMode::Strict)?;
    let norm = match norm {
        Some(v) if v >= 0.0 => v,
        _ => besov_norm(dy, u, BesovSpec { s: triple.r, p: triple.p, q: f64::INFINITY })?,
    };
    let n = triple.split_level(norm);
    if n > dy.j_max() {
        return Err(Error::Range(format!(
            "split level N = {n} exceeds j_max = {} (refine the grid)",
            dy.j_max()
        )));
    }
    let spec = u.to_spectral();
    let u_low = dy.low(&spec, n)?;
    let u_high = &spec - &u_low;
    Ok(SplitResult {
        u_low,
        u_high,
        n,
        p_tilde: triple.p_tilde(),
        q_tilde: triple.q_tilde(),
        norm,
    })
}
