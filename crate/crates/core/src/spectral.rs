//! Galerkin discretization of the pencil
//!
//! ```text
//! ⟨T(λ) y, z⟩ = ∫ y' z' + λ P (y z)' dx,    y(0) = y(1) = 0,
//! ```
//!
//! with continuous piecewise-linear elements on the cell endpoints of a
//! level-`m` refinement. On that mesh every `P`-integral reduces to the
//! cell moments of [`crate::selfsim::cell_moments`], so the matrices are
//! exact up to rounding. The counting function at `λ` is the number of
//! negative eigenvalues of the tridiagonal matrix `A + λB`.

use crate::selfsim::{
    cell_moments, refine_with_budget, Classification, SelfSimError, SelfSimilarParams,
    SimilarityMeta, DEFAULT_CELL_BUDGET,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    SelfSim(#[from] SelfSimError),
    #[error("mesh at depth {0} has no interior nodes")]
    EmptyMesh(usize),
    #[error("only {available} eigenvalues exist on the {side} ray, {requested} requested")]
    RayExhausted {
        side: Side,
        available: usize,
        requested: usize,
    },
    #[error(
        "eigenvalues did not settle to {tol} relative change by depth {depth} (last change {gap})"
    )]
    NotConverged { depth: usize, tol: f64, gap: f64 },
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }

    pub fn of(lambda: f64) -> Self {
        if lambda < 0.0 {
            Side::Negative
        } else {
            Side::Positive
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Positive => "positive",
            Side::Negative => "negative",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pos" | "positive" | "+" => Ok(Side::Positive),
            "neg" | "negative" | "-" => Ok(Side::Negative),
            other => Err(format!("unknown side {other:?}, expected pos or neg")),
        }
    }
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of strictly negative eigenvalues, by Sylvester's law of inertia
    /// applied to the `LDLᵀ` pivots.
    pub fn negative_count(&self) -> Inertia {
        let scale = self
            .diag
            .iter()
            .chain(&self.off)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let floor = (scale * f64::EPSILON).max(f64::MIN_POSITIVE);
        sturm_count(self.len(), floor, |i| self.diag[i], |i| self.off[i])
    }
}

/// Result of a Sturm count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub count: usize,
    /// Some pivot fell below the guard threshold, i.e. `λ` sits on (or within
    /// rounding of) a pencil eigenvalue; such pivots are counted as positive.
    pub near_singular: bool,
}

/// Sturm count for the symmetric tridiagonal matrix with entries `diag(i)`
/// and `off(i)` (coupling `i` and `i + 1`). Pivots with `|q| ≤ floor` are
/// replaced by `+floor`, so zero eigenvalues are not counted.
fn sturm_count(
    n: usize,
    floor: f64,
    diag: impl Fn(usize) -> f64,
    off: impl Fn(usize) -> f64,
) -> Inertia {
    let mut count = 0;
    let mut near_singular = false;
    let mut q = 1.0;
    for i in 0..n {
        let d = diag(i);
        q = if i == 0 {
            d
        } else {
            let e = off(i - 1);
            d - e * e / q
        };
        if q.abs() <= floor {
            near_singular = true;
            q = floor;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    Inertia {
        count,
        near_singular,
    }
}

/// Discretized pencil `A + λB` on interior nodes.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub depth: usize,
    /// All mesh nodes including the two boundary points.
    pub mesh: Vec<f64>,
    pub stiffness: Tridiagonal,
    pub weight: Tridiagonal,
    /// Nodes where `P` jumps.
    pub discontinuities: Vec<usize>,
    pivot_floor: f64,
}

pub fn assemble_pencil(
    params: &SelfSimilarParams,
    meta: &SimilarityMeta,
    depth: usize,
) -> Result<Pencil, SpectralError> {
    assemble_pencil_with_budget(params, meta, depth, DEFAULT_CELL_BUDGET)
}

pub fn assemble_pencil_with_budget(
    params: &SelfSimilarParams,
    meta: &SimilarityMeta,
    depth: usize,
    budget: usize,
) -> Result<Pencil, SpectralError> {
    let refinement = refine_with_budget(params, meta, depth, budget)?;
    let cells = &refinement.cells;
    if cells.len() < 2 {
        return Err(SpectralError::EmptyMesh(depth));
    }
    let n = cells.len() - 1;
    let mut a_diag = vec![0.0; n];
    let mut a_off = vec![0.0; n.saturating_sub(1)];
    let mut b_diag = vec![0.0; n];
    let mut b_off = vec![0.0; n.saturating_sub(1)];

    // Cell c spans nodes c and c + 1; interior node i is global node i + 1.
    for (c, cell) in cells.iter().enumerate() {
        let w = cell.width();
        let (m0, m1) = cell_moments(cell, meta);
        // ∫ P φ_L and ∫ P φ_R with φ_L = (right - x)/w, φ_R = (x - left)/w
        let pl = (cell.right * m0 - m1) / w;
        let pr = (m1 - cell.left * m0) / w;
        // (φ_L²)' = -2 φ_L / w, (φ_L φ_R)' = (φ_L - φ_R) / w, (φ_R²)' = 2 φ_R / w
        let b_ll = -2.0 * pl / w;
        let b_lr = (pl - pr) / w;
        let b_rr = 2.0 * pr / w;
        let k = 1.0 / w;
        if c >= 1 {
            a_diag[c - 1] += k;
            b_diag[c - 1] += b_ll;
        }
        if c < n {
            a_diag[c] += k;
            b_diag[c] += b_rr;
        }
        if c >= 1 && c < n {
            a_off[c - 1] -= k;
            b_off[c - 1] += b_lr;
        }
    }

    let scale = a_diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(Pencil {
        depth,
        mesh: refinement.nodes(),
        stiffness: Tridiagonal {
            diag: a_diag,
            off: a_off,
        },
        weight: Tridiagonal {
            diag: b_diag,
            off: b_off,
        },
        discontinuities: refinement.discontinuities,
        pivot_floor: scale * f64::EPSILON,
    })
}

impl Pencil {
    pub fn size(&self) -> usize {
        self.stiffness.len()
    }

    /// Number of negative eigenvalues of `A + λB`, i.e. the number of pencil
    /// eigenvalues strictly between 0 and `λ` on the ray of `λ`.
    pub fn inertia(&self, lambda: f64) -> Inertia {
        let (a, b) = (&self.stiffness, &self.weight);
        let floor = self.pivot_floor * (1.0 + lambda.abs());
        sturm_count(
            a.len(),
            floor,
            |i| a.diag[i] + lambda * b.diag[i],
            |i| a.off[i] + lambda * b.off[i],
        )
    }

    /// Total number of eigenvalues on a ray: the number of negative
    /// eigenvalues of `±B`.
    pub fn ray_capacity(&self, side: Side) -> usize {
        let b = &self.weight;
        let signed = Tridiagonal {
            diag: b.diag.iter().map(|x| side.sign() * x).collect(),
            off: b.off.iter().map(|x| side.sign() * x).collect(),
        };
        signed.negative_count().count
    }

    /// The `k`-th (one-based) eigenvalue on the ray, by bisection on the
    /// counting function to relative width `rel_tol`. `None` when the
    /// counting function never reaches `k`.
    pub fn kth_eigenvalue(&self, side: Side, k: usize, rel_tol: f64) -> Option<f64> {
        let s = side.sign();
        let count = |mag: f64| self.inertia(s * mag).count;
        let mut hi = 1.0;
        let mut lo = 0.0;
        if count(hi) >= k {
            while hi > 1e-300 && count(hi * 0.5) >= k {
                hi *= 0.5;
            }
            lo = hi * 0.5;
        } else {
            while count(hi) < k {
                if hi > 1e250 {
                    return None;
                }
                lo = hi;
                hi *= 2.0;
            }
        }
        while hi - lo > rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if count(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(s * 0.5 * (lo + hi))
    }
}

/// Free-function form of [`Pencil::inertia`].
pub fn inertia(pencil: &Pencil, lambda: f64) -> Inertia {
    pencil.inertia(lambda)
}

/// First `count` eigenvalues on a ray, sorted by magnitude.
pub fn eigenvalues(
    pencil: &Pencil,
    side: Side,
    count: usize,
    rel_tol: f64,
) -> Result<Vec<f64>, SpectralError> {
    let available = pencil.ray_capacity(side);
    if count > available {
        return Err(SpectralError::RayExhausted {
            side,
            available,
            requested: count,
        });
    }
    let found: Vec<Option<f64>> = (1..=count)
        .into_par_iter()
        .map(|k| pencil.kth_eigenvalue(side, k, rel_tol))
        .collect();
    let values: Vec<f64> = found.iter().map_while(|v| *v).collect();
    if values.len() < count {
        return Err(SpectralError::RayExhausted {
            side,
            available: values.len(),
            requested: count,
        });
    }
    Ok(values)
}

/// Depth-refinement policy for eigenvalue extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePolicy {
    pub min_depth: Option<usize>,
    pub max_depth: usize,
    /// Largest allowed relative change between consecutive depths.
    pub tol: f64,
    /// Bisection width relative to the eigenvalue.
    pub bisection_tol: f64,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        ConvergencePolicy {
            min_depth: None,
            max_depth: 12,
            tol: 0.005,
            bisection_tol: 1e-8,
        }
    }
}

/// Eigenvalues from the last two depths of a refinement sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedEigenvalues {
    pub side: Side,
    pub depth: usize,
    pub values: Vec<f64>,
    pub previous: Vec<f64>,
    /// `|λ_m - λ_{m-1}| / |λ_m|` per eigenvalue.
    pub rel_gaps: Vec<f64>,
    pub converged: bool,
}

impl ConvergedEigenvalues {
    pub fn max_gap(&self) -> f64 {
        self.rel_gaps.iter().copied().fold(0.0, f64::max)
    }
}

/// Increases the depth until every one of the first `count` eigenvalues
/// changes by less than `policy.tol` between consecutive depths.
pub fn converged_eigenvalues(
    params: &SelfSimilarParams,
    meta: &SimilarityMeta,
    side: Side,
    count: usize,
    policy: &ConvergencePolicy,
) -> Result<ConvergedEigenvalues, SpectralError> {
    let pieces = params.len() as f64;
    // at least a few mesh nodes per requested eigenvalue
    let auto = (((4 * count + 2) as f64).ln() / pieces.ln()).ceil() as usize;
    let start = policy
        .min_depth
        .unwrap_or(auto)
        .max(1)
        .min(policy.max_depth);
    let mut previous: Option<Vec<f64>> = None;
    let mut last = None;
    for depth in start..=policy.max_depth {
        let pencil = assemble_pencil(params, meta, depth)?;
        let values = match eigenvalues(&pencil, side, count, policy.bisection_tol) {
            Ok(v) => v,
            Err(SpectralError::RayExhausted { .. }) if depth < policy.max_depth => continue,
            Err(e) => return Err(e),
        };
        if let Some(prev) = previous.take() {
            let rel_gaps: Vec<f64> = values
                .iter()
                .zip(&prev)
                .map(|(a, b)| ((a - b) / a).abs())
                .collect();
            let converged = rel_gaps.iter().all(|&g| g < policy.tol);
            let result = ConvergedEigenvalues {
                side,
                depth,
                values: values.clone(),
                previous: prev,
                rel_gaps,
                converged,
            };
            if converged {
                return Ok(result);
            }
            last = Some(result);
        }
        previous = Some(values);
    }
    match last {
        Some(r) => Ok(r),
        None => Err(SpectralError::NotConverged {
            depth: policy.max_depth,
            tol: policy.tol,
            gap: f64::NAN,
        }),
    }
}

/// One point of a counting series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSample {
    /// Signed spectral parameter.
    pub lambda: f64,
    pub ind: usize,
    #[serde(default)]
    pub near_singular: bool,
}

/// Counting function sampled along one ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingSeries {
    pub side: Side,
    pub samples: Vec<CountSample>,
    pub depth: usize,
    /// Spectral order `D`.
    pub order: f64,
    pub nu: Option<f64>,
    pub classification: Classification,
}

impl CountingSeries {
    /// Builds a series from externally supplied samples (e.g. a CSV file).
    pub fn from_samples(
        samples: Vec<CountSample>,
        meta: &SimilarityMeta,
        depth: usize,
    ) -> Result<Self, SpectralError> {
        let side = samples
            .first()
            .map(|s| Side::of(s.lambda))
            .ok_or_else(|| SpectralError::InvalidGrid("empty series".into()))?;
        if samples.iter().any(|s| Side::of(s.lambda) != side) {
            return Err(SpectralError::InvalidGrid("samples from both rays".into()));
        }
        let mut samples = samples;
        samples.sort_by(|a, b| a.lambda.abs().total_cmp(&b.lambda.abs()));
        Ok(CountingSeries {
            side,
            samples,
            depth,
            order: meta.order,
            nu: meta.step(),
            classification: meta.classification,
        })
    }

    /// True when `ind` never decreases with `|λ|`.
    pub fn is_monotone(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].ind <= w[1].ind)
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        let first = self.samples.first()?.lambda.abs();
        let last = self.samples.last()?.lambda.abs();
        Some((first, last))
    }
}

/// `n` log-spaced magnitudes from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, SpectralError> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(SpectralError::InvalidGrid(format!(
            "need 0 < lmin < lmax and at least 2 points (got {lo}, {hi}, {n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Evaluates the counting function at the magnitudes in `grid` on `side`.
pub fn counting_series(
    pencil: &Pencil,
    meta: &SimilarityMeta,
    side: Side,
    grid: &[f64],
) -> Result<CountingSeries, SpectralError> {
    if grid.iter().any(|&x| !(x > 0.0)) {
        return Err(SpectralError::InvalidGrid(
            "magnitudes must be positive".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SpectralError::InvalidGrid("grid must be sorted".into()));
    }
    let samples: Vec<CountSample> = grid
        .par_iter()
        .map(|&mag| {
            let lambda = side.sign() * mag;
            let inertia = pencil.inertia(lambda);
            CountSample {
                lambda,
                ind: inertia.count,
                near_singular: inertia.near_singular,
            }
        })
        .collect();
    Ok(CountingSeries {
        side,
        samples,
        depth: pencil.depth,
        order: meta.order,
        nu: meta.step(),
        classification: meta.classification,
    })
}
