//! Amplitude of the counting function: `ind(λ) / |λ|^{D/2}` sorted by phase
//! `ln|λ| / ν (mod 2)` for arithmetic weights, or averaged over the top
//! decade of the window for non-arithmetic ones.

use crate::selfsim::Classification;
use crate::spectral::{CountingSeries, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-width of a phase bin, in units of the phase `ln|λ| / ν`.
pub const DEFAULT_PHASE_TOL: f64 = 0.025;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptError {
    #[error("window ratio {ratio:.3e} is below the required {required:.3e}")]
    WindowTooNarrow { ratio: f64, required: f64 },
    #[error("series classification {0:?} does not fit this estimator")]
    WrongClassification(Classification),
    #[error("series is empty")]
    EmptySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl BinStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(BinStats {
            mean,
            min,
            max,
            count: values.len(),
        })
    }

    pub fn spread(&self) -> f64 {
        self.max - self.min
    }

    pub fn disjoint_from(&self, other: &BinStats) -> bool {
        self.max < other.min || other.max < self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBin {
    pub phase: f64,
    /// `(λ, ind / |λ|^{D/2})` for every sample assigned to this phase.
    pub samples: Vec<(f64, f64)>,
    pub stats: Option<BinStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// Two-periodic in the phase `ln|λ| / ν`.
    Periodic {
        nu: f64,
    },
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEstimate {
    pub mode: AmplitudeMode,
    pub side: Side,
    pub phase_bins: Vec<PhaseBin>,
    /// `s₊` or `s₋` (according to `side`) in constant mode.
    pub constant: Option<BinStats>,
    pub lambda_window: (f64, f64),
}

impl AmplitudeEstimate {
    pub fn bin(&self, phase: f64) -> Option<&PhaseBin> {
        self.phase_bins
            .iter()
            .find(|b| (b.phase - phase).abs() < 1e-12)
    }
}

fn ratio(ind: usize, lambda: f64, half_order: f64) -> f64 {
    ind as f64 / lambda.abs().powf(half_order)
}

/// Evaluates `ind(λ) / λ^{D/2}` at `λ = e^{ν(2k + φ)}` for every requested
/// phase `φ` and every `k` inside the window, using the sample nearest in
/// `ln λ` within `phase_tol · ν`. Negative-ray series are read at
/// `|λ| = e^{ν(2k + φ + 1)}`, so both rays estimate the same function.
pub fn estimate_periodic_s(
    series: &CountingSeries,
    phases: &[f64],
    phase_tol: f64,
) -> Result<AmplitudeEstimate, AsymptError> {
    let nu = match series.classification {
        Classification::Nonarithmetic => {
            return Err(AsymptError::WrongClassification(series.classification))
        }
        c => c.step().expect("arithmetic classification carries a step"),
    };
    let (lo, hi) = series.window().ok_or(AsymptError::EmptySeries)?;
    let required = (6.0 * nu).exp();
    if hi / lo < required * (1.0 - 1e-9) {
        return Err(AsymptError::WindowTooNarrow {
            ratio: hi / lo,
            required,
        });
    }
    let half_order = 0.5 * series.order;
    let shift = match series.side {
        Side::Positive => 0.0,
        Side::Negative => 1.0,
    };
    let logs: Vec<f64> = series.samples.iter().map(|s| s.lambda.abs().ln()).collect();
    let (log_lo, log_hi) = (lo.ln(), hi.ln());

    let phase_bins = phases
        .iter()
        .map(|&phase| {
            let k_min = ((log_lo / nu - phase - shift) / 2.0).floor() as i64;
            let k_max = ((log_hi / nu - phase - shift) / 2.0).ceil() as i64;
            let mut samples = Vec::new();
            for k in k_min..=k_max {
                let target = nu * (2.0 * k as f64 + phase + shift);
                if target < log_lo - phase_tol * nu || target > log_hi + phase_tol * nu {
                    continue;
                }
                if let Some(idx) = nearest(&logs, target) {
                    if (logs[idx] - target).abs() <= phase_tol * nu {
                        let s = series.samples[idx];
                        samples.push((s.lambda, ratio(s.ind, s.lambda, half_order)));
                    }
                }
            }
            let values: Vec<f64> = samples.iter().map(|x| x.1).collect();
            PhaseBin {
                phase,
                stats: BinStats::from_values(&values),
                samples,
            }
        })
        .collect();

    Ok(AmplitudeEstimate {
        mode: AmplitudeMode::Periodic { nu },
        side: series.side,
        phase_bins,
        constant: None,
        lambda_window: (lo, hi),
    })
}

fn nearest(sorted: &[f64], target: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let i = sorted.partition_point(|&x| x < target);
    let candidates = [i.checked_sub(1), (i < sorted.len()).then_some(i)];
    candidates.into_iter().flatten().min_by(|&a, &b| {
        (sorted[a] - target)
            .abs()
            .total_cmp(&(sorted[b] - target).abs())
    })
}

/// Mean of `ind / |λ|^{D/2}` over the top decade `[λ_hi / 10, λ_hi]`.
pub fn estimate_constant_s(series: &CountingSeries) -> Result<AmplitudeEstimate, AsymptError> {
    if series.classification != Classification::Nonarithmetic {
        return Err(AsymptError::WrongClassification(series.classification));
    }
    let (lo, hi) = series.window().ok_or(AsymptError::EmptySeries)?;
    let half_order = 0.5 * series.order;
    let top: Vec<f64> = series
        .samples
        .iter()
        .filter(|s| s.lambda.abs() >= hi / 10.0)
        .map(|s| ratio(s.ind, s.lambda, half_order))
        .collect();
    if hi / lo < 10.0 || top.len() < 3 {
        return Err(AsymptError::WindowTooNarrow {
            ratio: hi / lo,
            required: 10.0,
        });
    }
    Ok(AmplitudeEstimate {
        mode: AmplitudeMode::Constant,
        side: series.side,
        phase_bins: Vec::new(),
        constant: BinStats::from_values(&top),
        lambda_window: (lo, hi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseComparison {
    pub phase: f64,
    pub positive: Option<BinStats>,
    pub negative: Option<BinStats>,
    /// `|ŝ_neg - ŝ_pos| / ŝ_pos` of the bin means.
    pub rel_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingPair {
    pub phase: f64,
    pub shifted_phase: f64,
    /// The spreads of `ŝ(φ)` and `ŝ(φ + 1)` do not overlap.
    pub disjoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodDoublingReport {
    pub comparisons: Vec<PhaseComparison>,
    pub max_rel_discrepancy: f64,
    pub doubling_pairs: Vec<DoublingPair>,
    /// Every pair `(φ, φ + 1)` among the requested phases has disjoint spreads.
    pub doubling_observed: bool,
    pub positive: AmplitudeEstimate,
    pub negative: AmplitudeEstimate,
}

/// Compares the positive-ray estimate of `s(φ)` against the negative-ray
/// one, and checks that `s(φ)` and `s(φ + 1)` are genuinely different.
pub fn period_doubling_check(
    pos: &CountingSeries,
    neg: &CountingSeries,
    phases: &[f64],
    phase_tol: f64,
) -> Result<PeriodDoublingReport, AsymptError> {
    let positive = estimate_periodic_s(pos, phases, phase_tol)?;
    let negative = estimate_periodic_s(neg, phases, phase_tol)?;
    let mut comparisons = Vec::new();
    let mut max_rel: f64 = 0.0;
    for (p, n) in positive.phase_bins.iter().zip(&negative.phase_bins) {
        let rel = match (p.stats, n.stats) {
            (Some(a), Some(b)) => Some(((b.mean - a.mean) / a.mean).abs()),
            _ => None,
        };
        if let Some(r) = rel {
            max_rel = max_rel.max(r);
        }
        comparisons.push(PhaseComparison {
            phase: p.phase,
            positive: p.stats,
            negative: n.stats,
            rel_discrepancy: rel,
        });
    }

    let mut doubling_pairs = Vec::new();
    for a in &positive.phase_bins {
        let partner = (a.phase + 1.0).rem_euclid(2.0);
        if a.phase >= 1.0 {
            continue;
        }
        if let Some(b) = positive
            .phase_bins
            .iter()
            .find(|b| (b.phase - partner).abs() < 1e-12)
        {
            if let (Some(x), Some(y)) = (a.stats, b.stats) {
                doubling_pairs.push(DoublingPair {
                    phase: a.phase,
                    shifted_phase: b.phase,
                    disjoint: x.disjoint_from(&y),
                });
            }
        }
    }
    let doubling_observed = !doubling_pairs.is_empty() && doubling_pairs.iter().all(|p| p.disjoint);
    Ok(PeriodDoublingReport {
        comparisons,
        max_rel_discrepancy: max_rel,
        doubling_pairs,
        doubling_observed,
        positive,
        negative,
    })
}

/// `(|ŝ₊ - ŝ₋|, spread₊ + spread₋)` for two constant-mode estimates.
pub fn constant_agreement(a: &BinStats, b: &BinStats) -> (f64, f64) {
    ((a.mean - b.mean).abs(), a.spread() + b.spread())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::CountSample;
    use approx::assert_abs_diff_eq;

    fn series(
        side: Side,
        classification: Classification,
        points: &[(f64, usize)],
    ) -> CountingSeries {
        CountingSeries {
            side,
            samples: points
                .iter()
                .map(|&(l, ind)| CountSample {
                    lambda: side.sign() * l,
                    ind,
                    near_singular: false,
                })
                .collect(),
            depth: 0,
            order: 2.0 * 2f64.ln() / 6f64.ln(),
            nu: classification.step(),
            classification,
        }
    }

    fn degenerate() -> Classification {
        Classification::DegenerateArithmetic { nu: 6f64.ln() }
    }

    #[test]
    fn constant_counting_function() {
        let half = 2f64.ln() / 6f64.ln();
        let pts: Vec<(f64, usize)> = (0..=40)
            .map(|i| (6f64.powf(2.0 + 0.25 * i as f64), 7))
            .collect();
        let s = series(Side::Positive, degenerate(), &pts);
        let est = estimate_periodic_s(&s, &[0.0, 1.0], DEFAULT_PHASE_TOL).unwrap();
        for bin in &est.phase_bins {
            assert!(bin.stats.unwrap().count >= 3);
            for &(l, r) in &bin.samples {
                assert_abs_diff_eq!(r, 7.0 / l.powf(half), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn negative_ray_is_shifted() {
        // samples only at even powers of 6: phase 0 on the positive ray,
        // phase 1 after the shift on the negative ray
        let pts: Vec<(f64, usize)> = (1..=6).map(|k| (36f64.powi(k), k as usize)).collect();
        let pos = estimate_periodic_s(
            &series(Side::Positive, degenerate(), &pts),
            &[0.0, 1.0],
            0.01,
        )
        .unwrap();
        let neg = estimate_periodic_s(
            &series(Side::Negative, degenerate(), &pts),
            &[0.0, 1.0],
            0.01,
        )
        .unwrap();
        assert_eq!(pos.bin(0.0).unwrap().samples.len(), 6);
        assert!(pos.bin(1.0).unwrap().samples.is_empty());
        assert!(neg.bin(0.0).unwrap().samples.is_empty());
        assert_eq!(neg.bin(1.0).unwrap().samples.len(), 6);
    }

    #[test]
    fn narrow_window_is_rejected() {
        let s = series(Side::Positive, degenerate(), &[(100.0, 1), (1000.0, 2)]);
        assert!(matches!(
            estimate_periodic_s(&s, &[0.0], DEFAULT_PHASE_TOL),
            Err(AsymptError::WindowTooNarrow { .. })
        ));
        let s = series(
            Side::Positive,
            Classification::Nonarithmetic,
            &[(100.0, 1), (1000.0, 2)],
        );
        assert!(matches!(
            estimate_constant_s(&s),
            Err(AsymptError::WindowTooNarrow { .. })
        ));
        assert!(matches!(
            estimate_periodic_s(&s, &[0.0], DEFAULT_PHASE_TOL),
            Err(AsymptError::WrongClassification(_))
        ));
    }

    #[test]
    fn identical_series_have_zero_discrepancy() {
        let pts: Vec<(f64, usize)> = (0..200)
            .map(|i| (10f64.powf(2.0 + 5.0 * i as f64 / 199.0), i))
            .collect();
        let s = series(Side::Positive, degenerate(), &pts);
        let report = period_doubling_check(&s, &s, &[0.0, 0.5, 1.0], DEFAULT_PHASE_TOL).unwrap();
        assert_eq!(report.max_rel_discrepancy, 0.0);
        assert_eq!(report.doubling_pairs.len(), 1);
    }

    #[test]
    fn constant_mode_uses_top_decade() {
        let pts: Vec<(f64, usize)> = (0..30)
            .map(|i| (10f64.powf(1.0 + 0.1 * i as f64), 3 * i))
            .collect();
        let mut s = series(Side::Positive, Classification::Nonarithmetic, &pts);
        s.order = 1.0;
        let est = estimate_constant_s(&s).unwrap();
        let stats = est.constant.unwrap();
        assert!((10..=11).contains(&stats.count));
        assert!(stats.min <= stats.mean && stats.mean <= stats.max);
    }
}
