//! Pseudospectral incompressible Navier–Stokes solver on the torus.
//!
//! The pressure is eliminated by the Leray projector. Time stepping uses
//! the integrating-factor (Lawson) RK4 scheme: viscous decay is exact through
//! `e^{-ν|k|²h}` and the projected advection term is advanced with classical
//! RK4. The state is kept inside the ball `|k| ≤ n/3`, and products are
//! formed with three-halves padding unless the configuration asks otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, ProductRule, ProductSpace, Representation};
use crate::grid::Grid;
use crate::random;

/// Orthogonal projection onto divergence-free fields:
/// `f̂(k) ↦ f̂(k) − k (k·f̂(k)) / |k|²`, mean mode untouched.
pub fn leray_project(f: &Field) -> Field {
    assert!(f.is_vector(), "Leray projection needs a vector field");
    let grid = f.grid();
    let dim = grid.dim();
    let mut comps = f.spectral_components().into_owned();
    let half = (grid.n() / 2) as i64;
    for flat in 1..grid.len() {
        let k = grid.wavevector(flat);
        // a Nyquist entry has no partner, so its projection is taken with that axis zeroed
        let kk: Vec<f64> = (0..dim)
            .map(|a| if k[a] == -half { 0.0 } else { k[a] as f64 })
            .collect();
        let k2: f64 = kk.iter().map(|x| x * x).sum();
        if k2 == 0.0 {
            continue;
        }
        let dot: Complex64 = (0..dim).map(|a| comps[a][flat] * kk[a]).sum();
        let coef = dot / k2;
        for a in 0..dim {
            comps[a][flat] -= coef * kk[a];
        }
    }
    Field::from_spectral(grid, comps).expect("shape preserved")
}

/// Right-hand side `−P(u·∇u) + νΔu` with the advection formed by dealiased products.
pub fn nse_rhs(u: &Field, viscosity: f64) -> Result<Field> {
    let advection = u.advected_by(u, ProductRule::ThreeHalves)?;
    let projected = leray_project(&advection);
    let diffusion = u.neg_laplacian().scale(-viscosity);
    Ok(&diffusion - &projected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// `A(sin x cos y cos z, −cos x sin y cos z, 0)` in 3D and
    /// `A(sin x cos y, −cos x sin y)` in 2D.
    TaylorGreen,
    /// Random divergence-free field with spectrum `|k|^{-slope}` on `|k| ≤ radius`.
    RandomDivFree { seed: u64, slope: f64, radius: f64 },
}

/// Solver settings; parsed from and written to flat `key = value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dim: usize,
    pub n: usize,
    pub viscosity: f64,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: ProductRule,
    pub initial: InitialCondition,
    /// Taylor–Green amplitude, or `‖u₀‖₂` for random data.
    pub amplitude: f64,
    /// Steps between stored snapshots.
    pub snapshot_every: usize,
    /// Advective Courant limit: `dt ≤ cfl · h / ‖u‖_∞`.
    pub cfl: f64,
    pub perturbation_radius: f64,
    pub perturbation_slope: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 64,
            viscosity: 1.0,
            dt: 0.01,
            t_end: 0.5,
            dealias: ProductRule::ThreeHalves,
            initial: InitialCondition::TaylorGreen,
            amplitude: 1.0,
            snapshot_every: 1,
            cfl: 0.5,
            perturbation_radius: 8.0,
            perturbation_slope: 5.0 / 3.0,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.viscosity >= 0.0) {
            return Err(Error::Config(format!("viscosity must be >= 0, got {}", self.viscosity)));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config("dt and t_end must be positive".into()));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "t_end = {} is not a whole number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::Config("cfl must be positive".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got `{raw}`", lineno + 1))
            })?;
            pairs.insert(k.trim().to_string(), v.trim().to_string());
        }
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key; used by the parser and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
        }
        // decimals or fractions such as 5/3
        fn real(key: &str, v: &str) -> Result<f64> {
            match v.split_once('/') {
                Some((a, b)) => Ok(num::<f64>(key, a.trim())? / num::<f64>(key, b.trim())?),
                None => num(key, v),
            }
        }
        match key {
            "dim" => self.dim = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "viscosity" | "nu" => self.viscosity = real(key, value)?,
            "dt" => self.dt = real(key, value)?,
            "t_end" => self.t_end = real(key, value)?,
            "amplitude" => self.amplitude = real(key, value)?,
            "snapshot_every" => self.snapshot_every = num(key, value)?,
            "cfl" => self.cfl = real(key, value)?,
            "perturbation_radius" => self.perturbation_radius = real(key, value)?,
            "perturbation_slope" => self.perturbation_slope = real(key, value)?,
            "dealias" => {
                self.dealias = match value {
                    "three-halves" | "3/2" => ProductRule::ThreeHalves,
                    "aliased" | "none" => ProductRule::Aliased,
                    other => return Err(Error::Config(format!("unknown dealias rule `{other}`"))),
                }
            }
            "initial" => {
                self.initial = match value {
                    "taylor-green" => InitialCondition::TaylorGreen,
                    "random-divfree" => InitialCondition::RandomDivFree {
                        seed: 0,
                        slope: 5.0 / 3.0,
                        radius: 8.0,
                    },
                    other => {
                        return Err(Error::Config(format!("unknown initial condition `{other}`")))
                    }
                }
            }
            "seed" | "slope" | "radius" => match &mut self.initial {
                InitialCondition::RandomDivFree { seed, slope, radius } => match key {
                    "seed" => *seed = num(key, value)?,
                    "slope" => *slope = real(key, value)?,
                    _ => *radius = real(key, value)?,
                },
                InitialCondition::TaylorGreen => {
                    return Err(Error::Config(format!(
                        "`{key}` only applies to initial = random-divfree (set `initial` first)"
                    )))
                }
            },
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Flat `key = value` text that [`SolverConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim = {}", self.dim);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "viscosity = {}", self.viscosity);
        let _ = writeln!(out, "dt = {}", self.dt);
        let _ = writeln!(out, "t_end = {}", self.t_end);
        let rule = match self.dealias {
            ProductRule::ThreeHalves => "three-halves",
            ProductRule::Aliased => "aliased",
        };
        let _ = writeln!(out, "dealias = {rule}");
        match &self.initial {
            InitialCondition::TaylorGreen => {
                let _ = writeln!(out, "initial = taylor-green");
            }
            InitialCondition::RandomDivFree { seed, slope, radius } => {
                let _ = writeln!(out, "initial = random-divfree");
                let _ = writeln!(out, "seed = {seed}");
                let _ = writeln!(out, "slope = {slope}");
                let _ = writeln!(out, "radius = {radius}");
            }
        }
        let _ = writeln!(out, "amplitude = {}", self.amplitude);
        let _ = writeln!(out, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(out, "cfl = {}", self.cfl);
        let _ = writeln!(out, "perturbation_radius = {}", self.perturbation_radius);
        let _ = writeln!(out, "perturbation_slope = {}", self.perturbation_slope);
        out
    }

    pub fn initial_velocity(&self) -> Result<Field> {
        let grid = self.grid()?;
        let a = self.amplitude;
        let u = match &self.initial {
            InitialCondition::TaylorGreen => taylor_green(grid, a),
            InitialCondition::RandomDivFree { seed, slope, radius } => {
                random::divergence_free(grid, &mut random::rng(*seed), *radius, *slope, a)?
            }
        };
        Ok(u.truncate_radius(grid.dealias_radius()))
    }
}

/// Taylor–Green vortex of amplitude `a` (spectral).
pub fn taylor_green(grid: Grid, a: f64) -> Field {
    let u = if grid.dim() == 2 {
        Field::vector_fn(grid, |x| {
            [a * x[0].sin() * x[1].cos(), -a * x[0].cos() * x[1].sin(), 0.0]
        })
    } else {
        Field::vector_fn(grid, |x| {
            [
                a * x[0].sin() * x[1].cos() * x[2].cos(),
                -a * x[0].cos() * x[1].sin() * x[2].cos(),
                0.0,
            ]
        })
    };
    u.into_spectral()
}

/// One fixed-step integrating-factor RK4 integrator.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    viscosity: f64,
    dt: f64,
    cfl: f64,
    space: ProductSpace,
    k2: Vec<f64>,
    mask: Vec<f64>,
    decay_half: Vec<f64>,
    decay_full: Vec<f64>,
}

/// `k1 = N(u)` plus the quantities the integrator reports alongside it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub nonlinear: Field,
    pub max_speed: f64,
    /// `‖∇u‖₂²`.
    pub dissipation: f64,
    /// `d/dt ‖∇u‖₂²`.
    pub dissipation_rate: f64,
}

impl Stepper {
    pub fn new(grid: Grid, viscosity: f64, dt: f64, rule: ProductRule) -> Self {
        let k2 = grid.k_squared();
        let r2 = grid.dealias_radius().powi(2);
        let mask = k2.iter().map(|&k| if k <= r2 { 1.0 } else { 0.0 }).collect();
        let decay = |h: f64| -> Vec<f64> { k2.iter().map(|&k| (-viscosity * k * h).exp()).collect() };
        Self {
            grid,
            viscosity,
            dt,
            cfl: f64::INFINITY,
            space: ProductSpace::new(grid, rule),
            decay_half: decay(0.5 * dt),
            decay_full: decay(dt),
            k2,
            mask,
        }
    }

    pub fn from_config(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mut s = Self::new(cfg.grid()?, cfg.viscosity, cfg.dt, cfg.dealias);
        s.cfl = cfg.cfl;
        Ok(s)
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Projected, truncated advection `−P(u·∇u)` with the mean mode removed,
    /// and the largest sampled speed.
    fn nonlinear(&self, u: &Field) -> Result<(Field, f64)> {
        let grid = self.grid;
        let dim = grid.dim();
        let spec = u.spectral_components();
        let lifted: Vec<Vec<Complex64>> = spec.iter().map(|c| self.space.lift(c)).collect();
        let max_speed = (0..self.space.work_len())
            .map(|i| lifted.iter().map(|c| c[i].re * c[i].re).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt();
        let mut adv = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut acc = vec![Complex64::default(); self.space.work_len()];
            for (axis, ua) in lifted.iter().enumerate() {
                let dc = u.component(c).partial(axis);
                let d = self.space.lift(&dc.spectral_data().expect("spectral")[0]);
                for ((s, p), q) in acc.iter_mut().zip(ua).zip(&d) {
                    *s += p * q;
                }
            }
            adv.push(self.space.project(acc));
        }
        let adv = Field::from_spectral(grid, adv)?;
        let mut n = leray_project(&adv).apply_multiplier(&self.mask).scale(-1.0);
        for comp in n.spectral_data_mut().expect("spectral") {
            comp[0] = Complex64::default();
        }
        Ok((n, max_speed))
    }

    /// Evaluates `k1` at `u` and checks the Courant limit.
    pub fn evaluate(&self, u: &Field, time: f64) -> Result<Evaluation> {
        let (nonlinear, max_speed) = self.nonlinear(u)?;
        if !max_speed.is_finite() {
            return Err(Error::NumericalAbort { time, reason: "non-finite velocity".into() });
        }
        let h = self.grid.spacing();
        if max_speed > 0.0 && self.dt.abs() > self.cfl * h / max_speed {
            return Err(Error::NumericalAbort {
                time,
                reason: format!(
                    "CFL violated: dt = {} exceeds {} * h / max|u| = {}",
                    self.dt,
                    self.cfl,
                    self.cfl * h / max_speed
                ),
            });
        }
        let vol = self.grid.volume();
        let us = u.spectral_components();
        let ns = nonlinear.spectral_components();
        let mut dissipation = 0.0;
        let mut rate = 0.0;
        for (uc, nc) in us.iter().zip(ns.iter()) {
            for ((z, w), &k2) in uc.iter().zip(nc.iter()).zip(&self.k2) {
                dissipation += k2 * z.norm_sqr();
                // d/dt |û|² = 2 Re(conj û · (N − ν|k|² û))
                rate += 2.0 * k2 * ((z.conj() * w).re - self.viscosity * k2 * z.norm_sqr());
            }
        }
        Ok(Evaluation {
            nonlinear,
            max_speed,
            dissipation: dissipation * vol,
            dissipation_rate: rate * vol,
        })
    }

    /// Advances `u` by one step given `k1 = N(u)`.
    pub fn step_with(&self, u: &Field, k1: &Field) -> Result<Field> {
        let h = self.dt;
        let eh = &self.decay_half;
        let ef = &self.decay_full;
        let u_half = u.apply_multiplier(eh);
        let k1_half = k1.apply_multiplier(eh);
        let (k2, _) = self.nonlinear(&(&u_half + &k1_half.scale(0.5 * h)))?;
        let (k3, _) = self.nonlinear(&(&u_half + &k2.scale(0.5 * h)))?;
        let u_full = u.apply_multiplier(ef);
        let (k4, _) = self.nonlinear(&(&u_full + &k3.apply_multiplier(eh).scale(h)))?;
        let incr = &(&k1.apply_multiplier(ef) + &(&k2 + &k3).apply_multiplier(eh).scale(2.0)) + &k4;
        Ok(&u_full + &incr.scale(h / 6.0))
    }

    /// One full step: evaluate, check, advance.
    pub fn step(&self, u: &Field, time: f64) -> Result<Field> {
        let e = self.evaluate(u, time)?;
        let next = self.step_with(u, &e.nonlinear)?;
        check_finite(&next, time + self.dt)?;
        Ok(next)
    }

    /// `steps` successive steps starting at `time`.
    pub fn advance(&self, u: &Field, time: f64, steps: usize) -> Result<Field> {
        let mut state = u.to_spectral();
        for i in 0..steps {
            state = self.step(&state, time + i as f64 * self.dt)?;
        }
        Ok(state)
    }
}

fn check_finite(u: &Field, time: f64) -> Result<()> {
    let ok = u
        .spectral_components()
        .iter()
        .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    if ok {
        Ok(())
    } else {
        Err(Error::NumericalAbort { time, reason: "NaN or infinity in the state".into() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub velocity: Field,
}

/// Time-ordered velocity snapshots of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub snapshots: Vec<Snapshot>,
    /// `∫₀^{t_i} ‖∇u‖₂² dt` at each snapshot, accumulated per step by the
    /// endpoint-corrected trapezoid rule (fourth order).
    pub dissipation: Vec<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn grid(&self) -> Option<Grid> {
        self.snapshots.first().map(|s| s.velocity.grid())
    }

    /// `max_i |‖u_i‖² + 2ν∫‖∇u‖² − ‖u₀‖²| / ‖u₀‖²`.
    pub fn energy_balance_residual(&self) -> f64 {
        let Some(first) = self.snapshots.first() else { return 0.0 };
        let e0 = first.velocity.l2_norm().powi(2);
        if e0 == 0.0 {
            return 0.0;
        }
        self.snapshots
            .iter()
            .zip(&self.dissipation)
            .map(|(s, d)| {
                (s.velocity.l2_norm().powi(2) + 2.0 * self.config.viscosity * d - e0).abs() / e0
            })
            .fold(0.0, f64::max)
    }

    /// Largest `‖div u‖_∞` over the snapshots.
    pub fn max_divergence(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.velocity.divergence().max_abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates from `u0` with the stepping of `cfg`.
pub fn run_from(cfg: &SolverConfig, u0: &Field) -> Result<Trajectory> {
    let stepper = Stepper::from_config(cfg)?;
    let grid = cfg.grid()?;
    if u0.grid() != grid || !u0.is_vector() {
        return Err(Error::Shape("initial velocity does not match the configured grid".into()));
    }
    let steps = cfg.steps();
    let mut u = u0.to_spectral();
    let mut snapshots = Vec::new();
    let mut dissipation = Vec::new();
    let mut integral = 0.0;
    let mut previous: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let time = i as f64 * cfg.dt;
        let e = stepper.evaluate(&u, time)?;
        if let Some((d0, r0)) = previous {
            let h = cfg.dt;
            integral += 0.5 * h * (d0 + e.dissipation) + h * h / 12.0 * (r0 - e.dissipation_rate);
        }
        previous = Some((e.dissipation, e.dissipation_rate));
        if i % cfg.snapshot_every == 0 || i == steps {
            snapshots.push(Snapshot { time, velocity: u.clone() });
            dissipation.push(integral);
        }
        if i < steps {
            u = stepper.step_with(&u, &e.nonlinear)?;
            check_finite(&u, time + cfg.dt)?;
        }
    }
    Ok(Trajectory { config: cfg.clone(), snapshots, dissipation })
}

/// Runs the configured initial condition.
pub fn run(cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    run_from(cfg, &cfg.initial_velocity()?)
}

/// Divergence-free perturbation used by twin runs, normalised to `‖p‖₂ = 1`.
pub fn twin_perturbation(cfg: &SolverConfig, seed: u64) -> Result<Field> {
    let grid = cfg.grid()?;
    let p = random::divergence_free(
        grid,
        &mut random::rng(seed),
        cfg.perturbation_radius,
        cfg.perturbation_slope,
        1.0,
    )?;
    let p = p.truncate_radius(grid.dealias_radius());
    let norm = p.l2_norm();
    Ok(p.scale(1.0 / norm))
}

/// Two runs from `u₀` and `v₀ = u₀ + δ‖u₀‖₂ p` with `p` a unit random
/// divergence-free field drawn from `seed`.
pub fn twin_run(cfg: &SolverConfig, delta: f64, seed: u64) -> Result<(Trajectory, Trajectory)> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("perturbation size must be >= 0, got {delta}")));
    }
    cfg.validate()?;
    let u0 = cfg.initial_velocity()?;
    let p = twin_perturbation(cfg, seed)?;
    let v0 = &u0 + &p.scale(delta * u0.l2_norm());
    let u = run_from(cfg, &u0)?;
    let v = run_from(cfg, &v0)?;
    Ok((u, v))
}

/// Zero velocity on `grid` (spectral).
pub fn zero_velocity(grid: Grid) -> Field {
    Field::zeros(grid, grid.dim(), Representation::Spectral)
}
