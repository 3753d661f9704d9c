//! Two-component renewal systems
//!
//! ```text
//! Z_j(t) = X_j(t) + Σ_k ( u_k Z_j(t - ℓ_k) + v_k Z_{3-j}(t - ℓ_k) ),   j = 1, 2
//! ```
//!
//! in three flavours: the discrete recursion on integer lags, the continuous
//! lattice system (integer lags, forcing supported on the positive axis),
//! solved fibre by fibre, and the non-arithmetic system with real delays,
//! solved by causal time marching.

mod forcing;

pub use forcing::{DecayCertificate, Forcing, Profile};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const MASS_TOL: f64 = 1e-12;
const SERIES_TOL: f64 = 1e-14;
const MAX_SERIES_TERMS: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenewalError {
    #[error("renewal coefficients invalid: {0}")]
    CoefficientInvariantViolation(String),
    #[error("coefficients do not have the degenerate parity structure (u_k = 0 for odd k, v_k = 0 for even k)")]
    NonDegenerateParity,
    #[error("forcing does not vanish on the negative half-line")]
    ForcingOnNegativeAxis,
    #[error("periodic limit series needs an exponential or compact-support decay certificate")]
    SeriesDivergence,
    #[error("grid step {step} exceeds min delay / 4 = {limit}")]
    UnstableStep { step: f64, limit: f64 },
    #[error("forcing mass {mass:e} left of t = {t_min} exceeds tolerance {tol:e}")]
    EnvelopeTooWide { t_min: f64, mass: f64, tol: f64 },
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Lags attached to the coefficients: `k` for the k-th coefficient, or
/// arbitrary positive real delays.
#[derive(Debug, Clone, PartialEq)]
pub enum Lags {
    Integer,
    Real(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalCoefficients {
    u: Vec<f64>,
    v: Vec<f64>,
    lags: Lags,
}

fn violation(msg: impl Into<String>) -> RenewalError {
    RenewalError::CoefficientInvariantViolation(msg.into())
}

impl RenewalCoefficients {
    /// Coefficients for lags `1, 2, …, N`.
    pub fn integer(u: Vec<f64>, v: Vec<f64>) -> Result<Self, RenewalError> {
        let c = Self::checked(u, v, Lags::Integer)?;
        let g = (0..c.len())
            .filter(|&i| c.u[i] + c.v[i] > 0.0)
            .fold(0usize, |g, i| gcd(g, i + 1));
        if g != 1 {
            return Err(violation(format!("gcd of active lags is {g}, expected 1")));
        }
        Ok(c)
    }

    /// Coefficients with real delays `ℓ_k > 0`.
    pub fn real(u: Vec<f64>, v: Vec<f64>, delays: Vec<f64>) -> Result<Self, RenewalError> {
        if delays.len() != u.len() {
            return Err(violation("delay vector length differs from u"));
        }
        if delays.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(violation("delays must be positive and finite"));
        }
        Self::checked(u, v, Lags::Real(delays))
    }

    /// Single-component system (`v ≡ 0`) with real delays.
    pub fn single(u: Vec<f64>, delays: Vec<f64>) -> Result<Self, RenewalError> {
        let v = vec![0.0; u.len()];
        Self::real(u, v, delays)
    }

    fn checked(u: Vec<f64>, v: Vec<f64>, lags: Lags) -> Result<Self, RenewalError> {
        if u.len() != v.len() {
            return Err(violation("u and v differ in length"));
        }
        if u.is_empty() {
            return Err(violation("no coefficients"));
        }
        if u.iter().chain(&v).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(violation("coefficients must be non-negative and finite"));
        }
        let total: f64 = u.iter().chain(&v).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(violation(format!(
                "sum of u_k + v_k is {total}, expected 1"
            )));
        }
        Ok(RenewalCoefficients { u, v, lags })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn lags(&self) -> &Lags {
        &self.lags
    }

    /// Delay of the k-th (zero-based) coefficient.
    pub fn delay(&self, k: usize) -> f64 {
        match &self.lags {
            Lags::Integer => (k + 1) as f64,
            Lags::Real(l) => l[k],
        }
    }

    pub fn is_two_component(&self) -> bool {
        self.v.iter().sum::<f64>() > 0.0
    }

    /// `J = Σ (u_k + v_k) ℓ_k`.
    pub fn mean_lag(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.u[k] + self.v[k]) * self.delay(k))
            .sum()
    }

    /// `u_k = 0` for odd `k` and `v_k = 0` for even `k` (one-based).
    pub fn has_degenerate_parity(&self) -> bool {
        (0..self.len()).all(|i| {
            let k = i + 1;
            if k % 2 == 1 {
                self.u[i] == 0.0
            } else {
                self.v[i] == 0.0
            }
        })
    }

    fn require_two_component(&self) -> Result<(), RenewalError> {
        if self.is_two_component() {
            Ok(())
        } else {
            Err(violation("two-component mode needs sum of v_k > 0"))
        }
    }

    fn require_integer(&self) -> Result<(), RenewalError> {
        match self.lags {
            Lags::Integer => Ok(()),
            Lags::Real(_) => Err(violation("integer lags required")),
        }
    }

    fn require_real(&self) -> Result<&[f64], RenewalError> {
        match &self.lags {
            Lags::Real(l) => Ok(l),
            Lags::Integer => Err(violation("real delays required")),
        }
    }

    /// `U(w) = Σ u_k w^k` and `V(w) = Σ v_k w^k` at a complex point `w = (re, im)`.
    pub fn generating_functions(&self, w: (f64, f64)) -> ((f64, f64), (f64, f64)) {
        let mut pow = (1.0, 0.0);
        let mut gu = (0.0, 0.0);
        let mut gv = (0.0, 0.0);
        for i in 0..self.len() {
            pow = cmul(pow, w);
            gu = (gu.0 + self.u[i] * pow.0, gu.1 + self.u[i] * pow.1);
            gv = (gv.0 + self.v[i] * pow.0, gv.1 + self.v[i] * pow.1);
        }
        (gu, gv)
    }

    /// Coefficients of `Q(w) = (1 - U(w) - V(w)) / (1 - w)`, lowest degree first.
    pub fn quotient_polynomial(&self) -> Vec<f64> {
        // p(w) = 1 - Σ (u_k + v_k) w^k has p(1) = 0; synthetic division by (1 - w)
        let n = self.len();
        let mut p = vec![0.0; n + 1];
        p[0] = 1.0;
        for i in 0..n {
            p[i + 1] = -(self.u[i] + self.v[i]);
        }
        // p(w) = (1 - w) q(w):  q_0 = p_0,  q_k = p_k + q_{k-1}
        let mut q = vec![0.0; n];
        let mut acc = 0.0;
        for (k, qk) in q.iter_mut().enumerate() {
            acc += p[k];
            *qk = acc;
        }
        q
    }
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solution of the discrete recursion for `0 ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
}

/// `z_{j,n} = x_{j,n} + Σ_{k ≤ min(N, n)} (u_k z_{j,n-k} + v_k z_{3-j,n-k})`.
///
/// Forcing sequences shorter than `n_max + 1` are padded with zeros.
pub fn solve_discrete(
    coeffs: &RenewalCoefficients,
    x1: &[f64],
    x2: &[f64],
    n_max: usize,
) -> Result<DiscreteSolution, RenewalError> {
    coeffs.require_integer()?;
    coeffs.require_two_component()?;
    if n_max < coeffs.len() {
        return Err(RenewalError::InvalidGrid(format!(
            "n_max = {n_max} is below the number of lags {}",
            coeffs.len()
        )));
    }
    let (u, v) = (coeffs.u(), coeffs.v());
    let mut z1 = vec![0.0; n_max + 1];
    let mut z2 = vec![0.0; n_max + 1];
    for n in 0..=n_max {
        let mut a = x1.get(n).copied().unwrap_or(0.0);
        let mut b = x2.get(n).copied().unwrap_or(0.0);
        for k in 1..=coeffs.len().min(n) {
            let (p, q) = (z1[n - k], z2[n - k]);
            a += u[k - 1] * p + v[k - 1] * q;
            b += u[k - 1] * q + v[k - 1] * p;
        }
        z1[n] = a;
        z2[n] = b;
    }
    Ok(DiscreteSolution { z1, z2 })
}

/// Limit constants of the discrete recursion in the degenerate parity case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteLimits {
    pub omega: f64,
    pub chi: f64,
    pub j: f64,
}

impl DiscreteLimits {
    /// `(ω - (-1)^{n+j} χ) / J` for component `j ∈ {1, 2}`.
    pub fn limit(&self, component: usize, n: usize) -> f64 {
        let sign = if (n + component).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        (self.omega - sign * self.chi) / self.j
    }
}

pub fn discrete_limits(
    coeffs: &RenewalCoefficients,
    x1: &[f64],
    x2: &[f64],
) -> Result<DiscreteLimits, RenewalError> {
    coeffs.require_integer()?;
    coeffs.require_two_component()?;
    if !coeffs.has_degenerate_parity() {
        return Err(RenewalError::NonDegenerateParity);
    }
    let len = x1.len().max(x2.len());
    let at = |x: &[f64], k: usize| x.get(k).copied().unwrap_or(0.0);
    let mut omega = 0.0;
    let mut chi = 0.0;
    for k in 0..len {
        let (a, b) = (at(x1, k), at(x2, k));
        omega += a + b;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        chi += sign * (a - b);
    }
    Ok(DiscreteLimits {
        omega: 0.5 * omega,
        chi: 0.5 * chi,
        j: coeffs.mean_lag(),
    })
}

/// Sampled solution of a continuous renewal system with its predicted limits.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    pub grid: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    /// Predicted long-time behaviour of `Z_1` and `Z_2` at each grid point.
    pub predicted: [Vec<f64>; 2],
    /// Window over which `tail_discrepancy` is measured.
    pub tail_window: (f64, f64),
    /// `sup |Z_j - predicted_j|` over the tail window.
    pub tail_discrepancy: f64,
}

impl RenewalSolution {
    fn finish(
        grid: Vec<f64>,
        z1: Vec<f64>,
        z2: Vec<f64>,
        predicted: [Vec<f64>; 2],
        tail_window: (f64, f64),
    ) -> Self {
        let mut tail: f64 = 0.0;
        for i in 0..grid.len() {
            if grid[i] >= tail_window.0 && grid[i] <= tail_window.1 {
                tail = tail
                    .max((z1[i] - predicted[0][i]).abs())
                    .max((z2[i] - predicted[1][i]).abs());
            }
        }
        RenewalSolution {
            grid,
            z1,
            z2,
            predicted,
            tail_window,
            tail_discrepancy: tail,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.z1
            .iter()
            .chain(&self.z2)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.z1
            .iter()
            .chain(&self.z2)
            .fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// Samples of `X` on the fibre `θ, θ + 1, …, θ + n_max`.
pub fn fiber_samples(forcing: &Forcing, theta: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| forcing.eval(theta + n as f64))
        .collect()
}

/// Solves the lattice system with integer lags on the fibres `θ + ℤ≥0` for
/// every requested phase and merges the fibres into one time-ordered grid.
pub fn solve_lattice(
    coeffs: &RenewalCoefficients,
    x1: &Forcing,
    x2: &Forcing,
    phases: &[f64],
    horizon: f64,
) -> Result<RenewalSolution, RenewalError> {
    coeffs.require_integer()?;
    coeffs.require_two_component()?;
    if !coeffs.has_degenerate_parity() {
        return Err(RenewalError::NonDegenerateParity);
    }
    validate_forcings(&[x1, x2])?;
    for f in [x1, x2] {
        let exp_cert = matches!(f.certificate, DecayCertificate::Exponential { .. });
        if !(f.vanishes_on_negative_axis() || exp_cert) {
            return Err(RenewalError::ForcingOnNegativeAxis);
        }
    }
    if phases.is_empty() || phases.iter().any(|&p| !(0.0..1.0).contains(&p)) {
        return Err(RenewalError::InvalidGrid(
            "phases must lie in [0, 1)".into(),
        ));
    }
    if !(horizon >= coeffs.len() as f64) {
        return Err(RenewalError::InvalidGrid(
            "horizon shorter than the longest lag".into(),
        ));
    }

    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for &theta in phases {
        let n_max = (horizon - theta).floor() as usize;
        let n_max = n_max.max(coeffs.len());
        let sol = solve_discrete(
            coeffs,
            &fiber_samples(x1, theta, n_max),
            &fiber_samples(x2, theta, n_max),
            n_max,
        )?;
        for n in 0..=n_max {
            rows.push((theta + n as f64, sol.z1[n], sol.z2[n]));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));

    let grid: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut p1 = Vec::with_capacity(grid.len());
    let mut p2 = Vec::with_capacity(grid.len());
    for &t in &grid {
        p1.push(periodic_limit_s(coeffs, x1, x2, t)?);
        p2.push(periodic_limit_s(coeffs, x1, x2, t - 1.0)?);
    }
    let t_end = grid.last().copied().unwrap_or(horizon);
    Ok(RenewalSolution::finish(
        grid,
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
        [p1, p2],
        (t_end - 2.0, t_end),
    ))
}

/// `s(t) = (1/J) Σ_{k ∈ ℤ} (X_1(t - 2k) + X_2(t - 2k - 1))`.
pub fn periodic_limit_s(
    coeffs: &RenewalCoefficients,
    x1: &Forcing,
    x2: &Forcing,
    t: f64,
) -> Result<f64, RenewalError> {
    let j: f64 = (0..coeffs.len())
        .map(|k| (k + 1) as f64 * (coeffs.u[k] + coeffs.v[k]))
        .sum();
    Ok((two_step_chain(x1, t)? + two_step_chain(x2, t - 1.0)?) / j)
}

/// `Σ_{k ∈ ℤ} X(t - 2k)`.
fn two_step_chain(forcing: &Forcing, t: f64) -> Result<f64, RenewalError> {
    match forcing.certificate {
        DecayCertificate::CompactSupport { lo, hi } => {
            if lo > hi {
                return Ok(0.0);
            }
            // arguments t - 2k inside [lo, hi]
            let k_hi = ((t - lo) / 2.0).floor() as i64;
            let k_lo = ((t - hi) / 2.0).ceil() as i64;
            Ok((k_lo..=k_hi)
                .map(|k| forcing.eval(t - 2.0 * k as f64))
                .sum())
        }
        DecayCertificate::Exponential { rate, bound } => {
            if !(rate > 0.0) {
                return Err(RenewalError::SeriesDivergence);
            }
            let ratio = 1.0 / (1.0 - (-2.0 * rate).exp());
            let mut k = (t / 2.0).floor() as i64;
            let mut sum: f64 = 0.0;
            for _ in 0..MAX_SERIES_TERMS {
                let s = t - 2.0 * k as f64;
                if bound * (-rate * s).exp() * ratio < SERIES_TOL * sum.abs().max(1.0) {
                    return Ok(sum);
                }
                sum += forcing.eval(s);
                k -= 1;
            }
            Err(RenewalError::SeriesDivergence)
        }
        _ => Err(RenewalError::SeriesDivergence),
    }
}

/// Interpolation of delayed values between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Four-point Lagrange, fourth order. May undershoot near kinks of the forcing.
    #[default]
    Cubic,
    /// Two-point, second order. Non-negative weights, so non-negative forcing stays non-negative.
    Linear,
}

/// Time-marching options for the non-arithmetic solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchOptions {
    /// Grid step; `min ℓ / 64` when absent.
    pub step: Option<f64>,
    /// Left end `T₋`; the solution is seeded with zero before it.
    pub t_min: f64,
    /// Right end `T₊`.
    pub t_max: f64,
    /// Allowed forcing mass left of `T₋`, relative to the total absolute mass.
    pub envelope_tol: f64,
    pub interpolation: Interpolation,
}

impl MarchOptions {
    pub fn new(t_min: f64, t_max: f64) -> Self {
        MarchOptions {
            step: None,
            t_min,
            t_max,
            envelope_tol: 1e-9,
            interpolation: Interpolation::Cubic,
        }
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }
}

/// Precomputed Lagrange stencil for a delay on the uniform grid.
#[derive(Debug, Clone, Copy)]
struct DelayStencil {
    /// Grid index offset of the leftmost stencil node.
    back: usize,
    weights: [f64; 4],
}

impl DelayStencil {
    fn new(delay: f64, h: f64, interpolation: Interpolation) -> Self {
        let p = delay / h;
        let q = p.floor();
        let f = p - q;
        // target i - p lies in [i - q - 1, i - q]; local coordinate s from node i - q - 1
        let s = 1.0 - f;
        let weights = match interpolation {
            Interpolation::Cubic => [
                -s * (s - 1.0) * (s - 2.0) / 6.0,
                (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                -(s + 1.0) * s * (s - 2.0) / 2.0,
                (s + 1.0) * s * (s - 1.0) / 6.0,
            ],
            Interpolation::Linear => [0.0, 1.0 - s, s, 0.0],
        };
        DelayStencil {
            back: q as usize + 2,
            weights,
        }
    }

    /// Interpolated value of `z` at `t_i - delay`; zero left of the grid.
    #[inline]
    fn apply(&self, z: &[f64], i: usize) -> f64 {
        let mut acc = 0.0;
        for (m, w) in self.weights.iter().enumerate() {
            // node i - back + m
            if let Some(idx) = (i + m).checked_sub(self.back) {
                acc += w * z[idx];
            }
        }
        acc
    }
}

fn validate_forcings(forcings: &[&Forcing]) -> Result<(), RenewalError> {
    forcings
        .iter()
        .try_for_each(|f| f.profile.validate().map_err(RenewalError::InvalidForcing))
}

fn march_setup(
    coeffs: &RenewalCoefficients,
    forcings: &[&Forcing],
    opts: &MarchOptions,
) -> Result<(f64, usize, Vec<DelayStencil>), RenewalError> {
    validate_forcings(forcings)?;
    let delays = coeffs.require_real()?;
    let min_delay = delays.iter().copied().fold(f64::INFINITY, f64::min);
    let h = opts.step.unwrap_or(min_delay / 64.0);
    let limit = min_delay / 4.0;
    if !(h > 0.0) || h > limit {
        return Err(RenewalError::UnstableStep { step: h, limit });
    }
    if !(opts.t_max > opts.t_min) {
        return Err(RenewalError::InvalidGrid("t_max must exceed t_min".into()));
    }
    let total: f64 = forcings
        .iter()
        .map(|f| f.profile.abs_mass_below(f64::INFINITY))
        .sum();
    let below: f64 = forcings
        .iter()
        .map(|f| f.profile.abs_mass_below(opts.t_min))
        .sum();
    let tol = opts.envelope_tol * total;
    if below > tol {
        return Err(RenewalError::EnvelopeTooWide {
            t_min: opts.t_min,
            mass: below,
            tol,
        });
    }
    let steps = ((opts.t_max - opts.t_min) / h).ceil() as usize;
    let stencils = delays
        .iter()
        .map(|&l| DelayStencil::new(l, h, opts.interpolation))
        .collect();
    Ok((h, steps, stencils))
}

/// Causal time march of the coupled system on a uniform grid, with delayed
/// values taken from cubic interpolation of already computed nodes.
pub fn solve_nonarithmetic(
    coeffs: &RenewalCoefficients,
    x1: &Forcing,
    x2: &Forcing,
    opts: &MarchOptions,
) -> Result<RenewalSolution, RenewalError> {
    let (h, steps, stencils) = march_setup(coeffs, &[x1, x2], opts)?;
    let grid: Vec<f64> = (0..=steps).map(|i| opts.t_min + h * i as f64).collect();
    let (u, v) = (coeffs.u(), coeffs.v());
    let mut z1 = vec![0.0; grid.len()];
    let mut z2 = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let mut a = x1.eval(grid[i]);
        let mut b = x2.eval(grid[i]);
        for (k, st) in stencils.iter().enumerate() {
            let (p, q) = (st.apply(&z1, i), st.apply(&z2, i));
            a += u[k] * p + v[k] * q;
            b += u[k] * q + v[k] * p;
        }
        z1[i] = a;
        z2[i] = b;
    }
    let limit = nonarithmetic_limit(coeffs, x1, x2)?;
    let n = grid.len();
    let max_delay = coeffs.require_real()?.iter().copied().fold(0.0, f64::max);
    let window = (opts.t_max - 2.0 * max_delay, opts.t_max);
    Ok(RenewalSolution::finish(
        grid,
        z1,
        z2,
        [vec![limit.limits[0]; n], vec![limit.limits[1]; n]],
        window,
    ))
}

/// Same system solved through the scalar equations for `S = Z_1 + Z_2`
/// (kernel `u + v`) and `Δ = Z_1 - Z_2` (kernel `u - v`). Used to cross-check
/// the coupled march.
pub fn solve_nonarithmetic_split(
    coeffs: &RenewalCoefficients,
    x1: &Forcing,
    x2: &Forcing,
    opts: &MarchOptions,
) -> Result<RenewalSolution, RenewalError> {
    let (h, steps, stencils) = march_setup(coeffs, &[x1, x2], opts)?;
    let grid: Vec<f64> = (0..=steps).map(|i| opts.t_min + h * i as f64).collect();
    let plus: Vec<f64> = coeffs
        .u()
        .iter()
        .zip(coeffs.v())
        .map(|(a, b)| a + b)
        .collect();
    let minus: Vec<f64> = coeffs
        .u()
        .iter()
        .zip(coeffs.v())
        .map(|(a, b)| a - b)
        .collect();
    let march = |kernel: &[f64], sign: f64| {
        let mut z = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            let mut acc = x1.eval(grid[i]) + sign * x2.eval(grid[i]);
            for (k, st) in stencils.iter().enumerate() {
                acc += kernel[k] * st.apply(&z, i);
            }
            z[i] = acc;
        }
        z
    };
    let sum = march(&plus, 1.0);
    let diff = march(&minus, -1.0);
    let z1 = sum.iter().zip(&diff).map(|(s, d)| 0.5 * (s + d)).collect();
    let z2 = sum.iter().zip(&diff).map(|(s, d)| 0.5 * (s - d)).collect();
    let limit = nonarithmetic_limit(coeffs, x1, x2)?;
    let n = grid.len();
    let max_delay = coeffs.require_real()?.iter().copied().fold(0.0, f64::max);
    Ok(RenewalSolution::finish(
        grid,
        z1,
        z2,
        [vec![limit.limits[0]; n], vec![limit.limits[1]; n]],
        (opts.t_max - 2.0 * max_delay, opts.t_max),
    ))
}

/// Long-time limits of the non-arithmetic system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonarithmeticLimit {
    /// `J = Σ (u_k + v_k) ℓ_k`.
    pub j: f64,
    /// `∫ X_1 dμ` and `∫ X_2 dμ`.
    pub integrals: [f64; 2],
    /// Limits of `Z_1` and `Z_2`.
    pub limits: [f64; 2],
}

/// `(1 / 2J) ∫ (X_1 + X_2) dμ` for both components when coupled, and
/// `(1 / J) ∫ X_j dμ` per component when `v ≡ 0`.
pub fn nonarithmetic_limit(
    coeffs: &RenewalCoefficients,
    x1: &Forcing,
    x2: &Forcing,
) -> Result<NonarithmeticLimit, RenewalError> {
    coeffs.require_real()?;
    let j = coeffs.mean_lag();
    let integrals = [x1.profile.integral(), x2.profile.integral()];
    let limits = if coeffs.is_two_component() {
        let l = (integrals[0] + integrals[1]) / (2.0 * j);
        [l, l]
    } else {
        [integrals[0] / j, integrals[1] / j]
    };
    Ok(NonarithmeticLimit {
        j,
        integrals,
        limits,
    })
}

/// A-priori bound `sup |Z_j| ≤ C Π` for forcings with `|X_j(t)| ≤ Π / (1 + t²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaBound {
    pub c: f64,
    /// `π / J`, the limit of `π / (η(t)(1 + t²))` as `|t| → ∞`.
    pub asymptotic: f64,
    /// `η(t) t²` at the far ends of the sampled window, both close to `J`.
    pub tail_ratios: (f64, f64),
    /// Smallest sampled value of `η`.
    pub min_eta: f64,
}

impl EtaBound {
    pub fn bound(&self, envelope: f64) -> f64 {
        self.c * envelope
    }
}

/// `η(t) = Σ (u_k + v_k)(arctan t - arctan(t - ℓ_k))`.
pub fn eta(coeffs: &RenewalCoefficients, t: f64) -> f64 {
    (0..coeffs.len())
        .map(|k| {
            let l = coeffs.delay(k);
            // arctan a - arctan b = atan2(a - b, 1 + ab) for a > b
            (coeffs.u[k] + coeffs.v[k]) * l.atan2(1.0 + t * (t - l))
        })
        .sum()
}

pub fn eta_bound(coeffs: &RenewalCoefficients) -> Result<EtaBound, RenewalError> {
    let delays = coeffs.require_real()?;
    let min_delay = delays.iter().copied().fold(f64::INFINITY, f64::min);
    let max_delay = delays.iter().copied().fold(0.0, f64::max);
    let reach = 400.0 * max_delay.max(1.0);
    let step = (min_delay / 50.0).min(0.05);
    let n = (2.0 * reach / step).ceil() as usize;
    let mut c: f64 = 0.0;
    let mut min_eta = f64::INFINITY;
    for i in 0..=n {
        let t = -reach + step * i as f64;
        let e = eta(coeffs, t);
        min_eta = min_eta.min(e);
        c = c.max(PI / (e * (1.0 + t * t)));
    }
    let asymptotic = PI / coeffs.mean_lag();
    let far = 1e6 * max_delay.max(1.0);
    let tail_ratios = (eta(coeffs, -far) * far * far, eta(coeffs, far) * far * far);
    Ok(EtaBound {
        c: c.max(asymptotic),
        asymptotic,
        tail_ratios,
        min_eta,
    })
}
