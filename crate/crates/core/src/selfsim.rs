//! Self-similar functions defined by an affine iterated function system.
//!
//! A function `P` on `[0, 1]` is self-similar with parameters `(a, d, beta)`
//! when, on the k-th subinterval `[α_{k-1}, α_k]` of width `a_k`,
//!
//! ```text
//! P(α_{k-1} + a_k t) = beta_k + d_k P(t),   t ∈ [0, 1],
//! ```
//!
//! with `α_0 = 0` and `α_k = a_1 + … + a_k`. When `Σ a_k d_k² < 1` the
//! operator on the right is a contraction of `L2[0, 1]` and `P` is its unique
//! fixed point. Everything the spectral code needs (cell values, integrals of
//! `P` and `xP` over cells) follows in closed form from a handful of scalar
//! fixed-point equations, so no quadrature is ever performed on `P`.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Default upper bound on the number of cells a refinement may produce.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 22;

const SCALE_SUM_TOL: f64 = 1e-12;
const RATIONAL_TOL: f64 = 1e-9;
const MAX_DENOMINATOR: i64 = 64;
const CONTINUITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfSimError {
    #[error("parameter vectors differ in length (a: {a}, d: {d}, beta: {beta})")]
    LengthMismatch { a: usize, d: usize, beta: usize },
    #[error("at least two similarity pieces are required, got {0}")]
    TooFewPieces(usize),
    #[error("scale a[{index}] = {value} is not positive")]
    NonPositiveScale { index: usize, value: f64 },
    #[error("scales sum to {0}, expected 1")]
    ScaleSumMismatch(f64),
    #[error("parameter {name}[{index}] is not finite")]
    NonFinite { name: &'static str, index: usize },
    #[error("sum of a_k d_k^2 = {0} is not below 1, the IFS operator is not an L2 contraction")]
    ContractionViolation(f64),
    #[error("fewer than two pieces have d_k != 0; the spectral order is undefined")]
    NoSpectralOrder,
    #[error("fixed-point equation at the {0} endpoint is singular (multiplier equals 1)")]
    FixedPointSingular(&'static str),
    #[error("refinement needs {needed} cells but the budget is {budget}")]
    BudgetExceeded { needed: u128, budget: usize },
    #[error("malformed parameter file: {0}")]
    Parse(String),
}

/// A number that may be written either as a JSON float or as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Decimal(pub f64);

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(x) => Ok(Decimal(x)),
            Repr::Text(s) => parse_decimal(&s)
                .map(Decimal)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid number {s:?}"))),
        }
    }
}

/// Parses `"0.25"`, `"1e-3"` or a simple fraction such as `"1/3"`.
fn parse_decimal(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        return Some(num / den);
    }
    s.parse().ok()
}

/// Unchecked parameter record, as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub a: Vec<Decimal>,
    pub d: Vec<Decimal>,
    pub beta: Vec<Decimal>,
}

impl RawParams {
    pub fn from_json(text: &str) -> Result<Self, SelfSimError> {
        serde_json::from_str(text).map_err(|e| SelfSimError::Parse(e.to_string()))
    }
}

/// Validated IFS data `(a, d, beta)` of a self-similar function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfSimilarParams {
    a: Vec<f64>,
    d: Vec<f64>,
    beta: Vec<f64>,
}

impl SelfSimilarParams {
    pub fn new(a: Vec<f64>, d: Vec<f64>, beta: Vec<f64>) -> Result<Self, SelfSimError> {
        validate_params(&RawParams {
            a: a.into_iter().map(Decimal).collect(),
            d: d.into_iter().map(Decimal).collect(),
            beta: beta.into_iter().map(Decimal).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SelfSimError> {
        validate_params(&RawParams::from_json(text)?)
    }

    /// The three-piece weight with `a = 1/3`, `d = (-1/2, 0, -1/2)`,
    /// `beta = (0, 1/2, 1/2)`: a degenerate arithmetic example with
    /// spectral exponent `D/2 = log_6 2`.
    pub fn three_piece_example() -> Self {
        let third = 1.0 / 3.0;
        Self::new(
            vec![third, third, third],
            vec![-0.5, 0.0, -0.5],
            vec![0.0, 0.5, 0.5],
        )
        .expect("built-in parameters are valid")
    }

    /// Two equal halves reproducing `P(x) = x`, i.e. the uniform weight `ρ = 1`.
    pub fn lebesgue() -> Self {
        Self::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 0.5])
            .expect("built-in parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Left endpoints `α_{k-1}` of the first-level subintervals.
    pub fn offsets(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.a
            .iter()
            .map(|&ak| {
                let left = acc;
                acc += ak;
                left
            })
            .collect()
    }

    /// True when every multiplier vanishes, so `P` is a finite step function.
    pub fn is_flat(&self) -> bool {
        self.d.iter().all(|&dk| dk == 0.0)
    }

    /// Parameters of `-P`: negating the offsets negates the fixed point.
    pub fn negated(&self) -> Self {
        Self {
            a: self.a.clone(),
            d: self.d.clone(),
            beta: self.beta.iter().map(|b| -b).collect(),
        }
    }
}

/// Checks a raw record without normalizing anything.
pub fn validate_params(raw: &RawParams) -> Result<SelfSimilarParams, SelfSimError> {
    let (na, nd, nb) = (raw.a.len(), raw.d.len(), raw.beta.len());
    if na != nd || na != nb {
        return Err(SelfSimError::LengthMismatch {
            a: na,
            d: nd,
            beta: nb,
        });
    }
    if na < 2 {
        return Err(SelfSimError::TooFewPieces(na));
    }
    let unwrap = |v: &[Decimal]| v.iter().map(|x| x.0).collect::<Vec<_>>();
    let (a, d, beta) = (unwrap(&raw.a), unwrap(&raw.d), unwrap(&raw.beta));
    for (name, v) in [("a", &a), ("d", &d), ("beta", &beta)] {
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(SelfSimError::NonFinite { name, index });
        }
    }
    if let Some(index) = a.iter().position(|&x| x <= 0.0) {
        return Err(SelfSimError::NonPositiveScale {
            index,
            value: a[index],
        });
    }
    let total: f64 = a.iter().sum();
    if (total - 1.0).abs() > SCALE_SUM_TOL {
        return Err(SelfSimError::ScaleSumMismatch(total));
    }
    let contraction: f64 = a.iter().zip(&d).map(|(ak, dk)| ak * dk * dk).sum();
    if contraction >= 1.0 {
        return Err(SelfSimError::ContractionViolation(contraction));
    }
    Ok(SelfSimilarParams { a, d, beta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn of(n: i64) -> Self {
        if n.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Arithmetic type of the logarithmic scales `ln(a_k |d_k|)` of the active pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Nonarithmetic,
    Arithmetic { nu: f64 },
    DegenerateArithmetic { nu: f64 },
}

impl Classification {
    /// Step `ν` for the arithmetic cases.
    pub fn step(&self) -> Option<f64> {
        match *self {
            Classification::Nonarithmetic => None,
            Classification::Arithmetic { nu } | Classification::DegenerateArithmetic { nu } => {
                Some(nu)
            }
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Classification::DegenerateArithmetic { .. })
    }
}

/// Quantities derived from the parameters in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMeta {
    /// `P(0)`.
    pub p0: f64,
    /// `P(1)`.
    pub p1: f64,
    /// `∫ P dx` over `[0, 1]`.
    #[serde(rename = "M0")]
    pub m0: f64,
    /// `∫ x P dx` over `[0, 1]`.
    #[serde(rename = "M1")]
    pub m1: f64,
    /// Spectral order `D`.
    #[serde(rename = "D")]
    pub order: f64,
    /// `D / 2`, the growth exponent of the counting function.
    #[serde(rename = "D_half")]
    pub half_order: f64,
    pub classification: Classification,
    /// `ln(a_k |d_k|) / ν` for active pieces (arithmetic cases only).
    pub multiples: Vec<Option<i64>>,
    /// Parity of `multiples`, `None` for inactive pieces or non-arithmetic weights.
    pub parity: Vec<Option<Parity>>,
}

impl SimilarityMeta {
    /// `ν` if the weight is arithmetic.
    pub fn step(&self) -> Option<f64> {
        self.classification.step()
    }
}

/// Solves the fixed-point equations for `P(0)`, `P(1)`, the moments, the
/// spectral order and the arithmetic classification.
pub fn compute_meta(params: &SelfSimilarParams) -> Result<SimilarityMeta, SelfSimError> {
    let (a, d, beta) = (params.a(), params.d(), params.beta());
    let n = params.len();
    let active: Vec<usize> = (0..n).filter(|&k| d[k] != 0.0).collect();
    if active.len() < 2 {
        return Err(SelfSimError::NoSpectralOrder);
    }
    if d[0] == 1.0 {
        return Err(SelfSimError::FixedPointSingular("left"));
    }
    if d[n - 1] == 1.0 {
        return Err(SelfSimError::FixedPointSingular("right"));
    }
    let p0 = beta[0] / (1.0 - d[0]);
    let p1 = beta[n - 1] / (1.0 - d[n - 1]);

    // M0 = Σ a_k (beta_k + d_k M0)
    let ad: f64 = a.iter().zip(d).map(|(x, y)| x * y).sum();
    let ab: f64 = a.iter().zip(beta).map(|(x, y)| x * y).sum();
    let m0 = ab / (1.0 - ad);

    // M1 = Σ a_k ∫ (α + a_k t)(beta_k + d_k P(t)) dt
    let offsets = params.offsets();
    let mut rhs = 0.0;
    let mut coeff = 0.0;
    for k in 0..n {
        rhs += a[k] * (offsets[k] * (beta[k] + d[k] * m0) + 0.5 * a[k] * beta[k]);
        coeff += a[k] * a[k] * d[k];
    }
    let m1 = rhs / (1.0 - coeff);

    let logs: Vec<f64> = active.iter().map(|&k| (a[k] * d[k].abs()).ln()).collect();
    let half_order = solve_order_equation(&logs);

    let mut multiples = vec![None; n];
    let mut parity = vec![None; n];
    let classification = match arithmetic_step(&logs) {
        None => Classification::Nonarithmetic,
        Some((nu, ints)) => {
            let mut degenerate = true;
            for (&k, &m) in active.iter().zip(&ints) {
                multiples[k] = Some(m);
                let p = Parity::of(m);
                parity[k] = Some(p);
                let wanted = if d[k] > 0.0 {
                    Parity::Even
                } else {
                    Parity::Odd
                };
                degenerate &= p == wanted;
            }
            if degenerate {
                Classification::DegenerateArithmetic { nu }
            } else {
                Classification::Arithmetic { nu }
            }
        }
    };

    Ok(SimilarityMeta {
        p0,
        p1,
        m0,
        m1,
        order: 2.0 * half_order,
        half_order,
        classification,
        multiples,
        parity,
    })
}

/// Root `x > 0` of `Σ exp(x · log_k) = 1` for negative `log_k`, by bisection.
fn solve_order_equation(logs: &[f64]) -> f64 {
    let f = |x: f64| logs.iter().map(|l| (x * l).exp()).sum::<f64>() - 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-15 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `ν > 0` with every `log_k ∈ ν ℤ`, detected through rational
/// ratios with bounded denominators. Returns `ν` and the integers `log_k / ν`.
fn arithmetic_step(logs: &[f64]) -> Option<(f64, Vec<i64>)> {
    let base = logs[0];
    let mut fracs = Vec::with_capacity(logs.len());
    for &l in logs {
        fracs.push(bounded_rational(l / base)?);
    }
    let lcm_den = fracs.iter().fold(1i64, |acc, &(_, q)| lcm(acc, q));
    let ints: Vec<i64> = fracs.iter().map(|&(p, q)| p * (lcm_den / q)).collect();
    let g = ints.iter().fold(0i64, |acc, &m| gcd(acc, m.abs()));
    // base = (lcm_den / g) ν with sign of base, so ν = |base| g / lcm_den
    let nu = base.abs() * g as f64 / lcm_den as f64;
    let sign = if base < 0.0 { -1 } else { 1 };
    Some((nu, ints.iter().map(|m| sign * m / g).collect()))
}

fn bounded_rational(r: f64) -> Option<(i64, i64)> {
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (r * q as f64).round();
        ((r - p / q as f64).abs() <= RATIONAL_TOL).then_some((p as i64, q))
    })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Address of a cell: the sequence of piece indices `k_1 … k_m`, packed as
/// a base-`N` integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    index: u64,
    len: u32,
    base: u32,
}

impl Word {
    pub fn empty(base: usize) -> Self {
        Word {
            index: 0,
            len: 0,
            base: base as u32,
        }
    }

    pub fn push(self, k: usize) -> Self {
        Word {
            index: self.index * self.base as u64 + k as u64,
            len: self.len + 1,
            base: self.base,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Zero-based piece indices, outermost first.
    pub fn letters(&self) -> Vec<usize> {
        let mut out = vec![0; self.len as usize];
        let mut idx = self.index;
        for slot in out.iter_mut().rev() {
            *slot = (idx % self.base as u64) as usize;
            idx /= self.base as u64;
        }
        out
    }
}

/// One cell `ψ_w([0, 1])` of a refinement, where `P = beta_w + d_w P∘ψ_w⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellData {
    pub word: Word,
    pub left: f64,
    pub right: f64,
    pub d_w: f64,
    pub beta_w: f64,
}

impl CellData {
    pub fn root(base: usize) -> Self {
        CellData {
            word: Word::empty(base),
            left: 0.0,
            right: 1.0,
            d_w: 1.0,
            beta_w: 0.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    /// Subcell for piece `k`, with `offset = α_{k-1}`.
    pub fn child(&self, params: &SelfSimilarParams, offset: f64, k: usize) -> Self {
        let w = self.width();
        let left = self.left + w * offset;
        CellData {
            word: self.word.push(k),
            left,
            right: left + w * params.a()[k],
            d_w: self.d_w * params.d()[k],
            beta_w: self.beta_w + self.d_w * params.beta()[k],
        }
    }

    /// `P` at the left endpoint (limit from inside the cell).
    pub fn left_value(&self, meta: &SimilarityMeta) -> f64 {
        self.beta_w + self.d_w * meta.p0
    }

    /// `P` at the right endpoint (limit from inside the cell).
    pub fn right_value(&self, meta: &SimilarityMeta) -> f64 {
        self.beta_w + self.d_w * meta.p1
    }
}

/// Level-`m` tiling of `[0, 1]` with exact endpoint values of `P`.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub depth: usize,
    pub cells: Vec<CellData>,
    pub left_values: Vec<f64>,
    pub right_values: Vec<f64>,
    /// Interior nodes `i` (between cells `i - 1` and `i`) where the one-sided
    /// values of `P` disagree by more than `1e-12`.
    pub discontinuities: Vec<usize>,
}

impl Refinement {
    pub fn is_continuous(&self) -> bool {
        self.discontinuities.is_empty()
    }

    /// Cell endpoints `0 = x_0 < x_1 < … < x_K = 1`.
    pub fn nodes(&self) -> Vec<f64> {
        let mut nodes: Vec<f64> = self.cells.iter().map(|c| c.left).collect();
        nodes.push(1.0);
        nodes
    }
}

pub fn refine(
    params: &SelfSimilarParams,
    meta: &SimilarityMeta,
    depth: usize,
) -> Result<Refinement, SelfSimError> {
    refine_with_budget(params, meta, depth, DEFAULT_CELL_BUDGET)
}

pub fn refine_with_budget(
    params: &SelfSimilarParams,
    meta: &SimilarityMeta,
    depth: usize,
    budget: usize,
) -> Result<Refinement, SelfSimError> {
    let needed = cell_count(params.len(), depth);
    if needed > budget as u128 {
        return Err(SelfSimError::BudgetExceeded { needed, budget });
    }
    let offsets = params.offsets();
    let mut cells = vec![CellData::root(params.len())];
    for _ in 0..depth {
        cells = cells
            .iter()
            .flat_map(|c| (0..params.len()).map(|k| c.child(params, offsets[k], k)))
            .collect();
    }
    let left_values: Vec<f64> = cells.iter().map(|c| c.left_value(meta)).collect();
    let right_values: Vec<f64> = cells.iter().map(|c| c.right_value(meta)).collect();
    let discontinuities = (1..cells.len())
        .filter(|&i| (right_values[i - 1] - left_values[i]).abs() > CONTINUITY_TOL)
        .collect();
    Ok(Refinement {
        depth,
        cells,
        left_values,
        right_values,
        discontinuities,
    })
}

/// `N^m`, saturating instead of overflowing.
pub fn cell_count(pieces: usize, depth: usize) -> u128 {
    (pieces as u128)
        .checked_pow(depth as u32)
        .unwrap_or(u128::MAX)
}

/// `(∫_cell P dx, ∫_cell x P dx)` by the affine change of variables.
pub fn cell_moments(cell: &CellData, meta: &SimilarityMeta) -> (f64, f64) {
    let w = cell.width();
    let mean = cell.beta_w + cell.d_w * meta.m0;
    let first = w * mean;
    // ∫ (left + w t)(beta_w + d_w P(t)) w dt
    let x_moment = w * (cell.left * mean + w * (0.5 * cell.beta_w + cell.d_w * meta.m1));
    (first, x_moment)
}
