use fractal_spectra::asympt::DEFAULT_PHASE_TOL;
use fractal_spectra::spectral::{log_grid, CountSample};
use fractal_spectra::*;
use proptest::prelude::*;

fn three_piece_meta() -> SimilarityMeta {
    compute_meta(&SelfSimilarParams::three_piece_example()).unwrap()
}

fn synthetic(meta: &SimilarityMeta, grid: &[f64], sign: f64) -> CountingSeries {
    let samples = grid
        .iter()
        .map(|&l| CountSample {
            lambda: sign * l,
            ind: (0.4 * l.powf(meta.half_order)).floor() as usize,
            near_singular: false,
        })
        .collect();
    CountingSeries::from_samples(samples, meta, 0).unwrap()
}

fn bin_lambdas(est: &AmplitudeEstimate, phase: f64) -> Vec<f64> {
    est.bin(phase)
        .unwrap()
        .samples
        .iter()
        .map(|s| s.0.abs())
        .collect()
}

#[test]
fn every_phase_is_covered_on_the_default_window() {
    let params = SelfSimilarParams::three_piece_example();
    let meta = three_piece_meta();
    let pencil = assemble_pencil(&params, &meta, 11).unwrap();
    let grid = log_grid(1e2, 1e7, 400).unwrap();
    let phases: Vec<f64> = (0..8).map(|i| 0.25 * i as f64).collect();
    for side in [Side::Positive, Side::Negative] {
        let series = counting_series(&pencil, &meta, side, &grid).unwrap();
        let est = estimate_periodic_s(&series, &phases, DEFAULT_PHASE_TOL).unwrap();
        for bin in &est.phase_bins {
            assert!(
                bin.samples.len() >= 3,
                "{side} phase {}: {}",
                bin.phase,
                bin.samples.len()
            );
        }
    }
}

#[test]
fn same_series_on_both_sides_has_no_discrepancy() {
    let meta = three_piece_meta();
    let grid = log_grid(1e2, 1e7, 300).unwrap();
    let pos = synthetic(&meta, &grid, 1.0);
    let report = period_doubling_check(&pos, &pos, &[0.0, 1.0], DEFAULT_PHASE_TOL).unwrap();
    assert_eq!(report.max_rel_discrepancy, 0.0);
}

#[test]
fn constant_counting_gives_the_envelope_decay() {
    let meta = three_piece_meta();
    let grid = log_grid(1e2, 1e7, 300).unwrap();
    let samples = grid
        .iter()
        .map(|&l| CountSample {
            lambda: l,
            ind: 7,
            near_singular: false,
        })
        .collect();
    let series = CountingSeries::from_samples(samples, &meta, 0).unwrap();
    let est = estimate_periodic_s(&series, &[0.0], DEFAULT_PHASE_TOL).unwrap();
    let stats = est.bin(0.0).unwrap().stats.unwrap();
    let (lo, hi) = est
        .bin(0.0)
        .unwrap()
        .samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |acc, s| {
            (acc.0.min(s.0), acc.1.max(s.0))
        });
    assert!((stats.max - 7.0 / lo.powf(meta.half_order)).abs() < 1e-12);
    assert!((stats.min - 7.0 / hi.powf(meta.half_order)).abs() < 1e-12);
}

#[test]
fn narrow_window_is_rejected() {
    let meta = three_piece_meta();
    let series = synthetic(&meta, &log_grid(1e2, 1e5, 50).unwrap(), 1.0);
    assert!(matches!(
        estimate_periodic_s(&series, &[0.0], DEFAULT_PHASE_TOL),
        Err(AsymptError::WindowTooNarrow { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scaling_by_two_periods_keeps_bin_membership(lo in 10.0f64..1e3, points in 200usize..500,
                                                  phase in 0.0f64..2.0) {
        let meta = three_piece_meta();
        let nu = meta.step().unwrap();
        let grid = log_grid(lo, lo * 1e6, points).unwrap();
        let shifted: Vec<f64> = grid.iter().map(|l| l * (2.0 * nu).exp()).collect();
        for sign in [1.0, -1.0] {
            let a = estimate_periodic_s(&synthetic(&meta, &grid, sign), &[phase], DEFAULT_PHASE_TOL).unwrap();
            let b = estimate_periodic_s(&synthetic(&meta, &shifted, sign), &[phase], DEFAULT_PHASE_TOL).unwrap();
            let moved: Vec<f64> = bin_lambdas(&a, phase).iter().map(|l| l * (2.0 * nu).exp()).collect();
            let got = bin_lambdas(&b, phase);
            prop_assert_eq!(moved.len(), got.len());
            for (x, y) in moved.iter().zip(&got) {
                prop_assert!(((x - y) / y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_power_law_is_recovered(c in 0.1f64..2.0, phase in 0.0f64..2.0) {
        let meta = three_piece_meta();
        let grid = log_grid(1e3, 1e9, 300).unwrap();
        let samples = grid.iter().map(|&l| CountSample {
            lambda: l,
            ind: (c * l.powf(meta.half_order)).round() as usize,
            near_singular: false,
        }).collect();
        let series = CountingSeries::from_samples(samples, &meta, 0).unwrap();
        let est = estimate_periodic_s(&series, &[phase], DEFAULT_PHASE_TOL).unwrap();
        let stats = est.bin(phase).unwrap().stats.unwrap();
        prop_assert!((stats.mean - c).abs() < 0.5 / 1e3f64.powf(meta.half_order));
    }
}
