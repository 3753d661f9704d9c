use std::path::{Path, PathBuf};

use fractal_spectra::asympt::{constant_agreement, DEFAULT_PHASE_TOL};
use fractal_spectra::renewal::DecayCertificate;
use fractal_spectra::spectral::{log_grid, CountSample};
use fractal_spectra::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{emit, json, read, round_sci, sci, Table};

/// Cell budget for the default counting depth.
const DEFAULT_CELLS: usize = 531_441;

pub fn load_params(path: &Path) -> Result<SelfSimilarParams, CliError> {
    Ok(SelfSimilarParams::from_json(&read(path)?)?)
}

fn load_meta(path: &Path) -> Result<SimilarityMeta, CliError> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn policy(depth_max: usize, tol: f64) -> Result<ConvergencePolicy, CliError> {
    if !(tol > 0.0) {
        return Err(CliError::Validation(format!(
            "--tol must be positive, got {tol}"
        )));
    }
    Ok(ConvergencePolicy {
        max_depth: depth_max,
        tol,
        ..ConvergencePolicy::default()
    })
}

pub fn meta(params: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let meta = compute_meta(&load_params(params)?)?;
    emit(out, &json(&meta))
}

pub fn table1(
    params: &Path,
    count: usize,
    depth_max: usize,
    tol: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = load_params(params)?;
    let meta = compute_meta(&params)?;
    let policy = policy(depth_max, tol)?;
    let mut table = Table::new(&["n", "lambda", "rel_gap", "ratio", "depth"]);
    let mut unsettled = Vec::new();
    for side in [Side::Positive, Side::Negative] {
        let res = match converged_eigenvalues(&params, &meta, side, count, &policy) {
            Ok(r) => r,
            Err(SpectralError::RayExhausted { available: 0, .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        if !res.converged {
            unsettled.push(format!("{side} ray (max change {:.3e})", res.max_gap()));
        }
        for (i, (&lambda, &gap)) in res.values.iter().zip(&res.rel_gaps).enumerate() {
            let n = (i + 1) as f64;
            table.push(vec![
                format!("{}", side.sign() as i64 * (i as i64 + 1)),
                sci(lambda),
                sci(gap),
                sci(n / lambda.abs().powf(meta.half_order)),
                res.depth.to_string(),
            ]);
        }
    }
    emit(out, &table.to_csv())?;
    if unsettled.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "not converged to {tol} by depth {depth_max}: {}",
            unsettled.join(", ")
        )))
    }
}

pub struct EigenArgs {
    pub side: Side,
    pub count: usize,
    pub depth: Option<usize>,
    pub depth_max: usize,
    pub tol: f64,
}

pub fn eigen(params: &Path, args: &EigenArgs, out: Option<&Path>) -> Result<(), CliError> {
    let params = load_params(params)?;
    let meta = compute_meta(&params)?;
    if args.count == 0 {
        return Err(CliError::Validation("--count must be at least 1".into()));
    }
    let mut table = Table::new(&["n", "lambda", "rel_gap", "depth"]);
    let sign = args.side.sign() as i64;
    match args.depth {
        Some(depth) => {
            let pencil = assemble_pencil(&params, &meta, depth)?;
            let values = eigenvalues(&pencil, args.side, args.count, 1e-8)?;
            for (i, lambda) in values.iter().enumerate() {
                table.push(vec![
                    (sign * (i as i64 + 1)).to_string(),
                    sci(*lambda),
                    String::new(),
                    depth.to_string(),
                ]);
            }
            emit(out, &table.to_csv())
        }
        None => {
            let policy = policy(args.depth_max, args.tol)?;
            let res = converged_eigenvalues(&params, &meta, args.side, args.count, &policy)?;
            for (i, (lambda, gap)) in res.values.iter().zip(&res.rel_gaps).enumerate() {
                table.push(vec![
                    (sign * (i as i64 + 1)).to_string(),
                    sci(*lambda),
                    sci(*gap),
                    res.depth.to_string(),
                ]);
            }
            emit(out, &table.to_csv())?;
            if res.converged {
                Ok(())
            } else {
                Err(SpectralError::NotConverged {
                    depth: res.depth,
                    tol: args.tol,
                    gap: res.max_gap(),
                }
                .into())
            }
        }
    }
}

/// Largest depth whose mesh stays within the default cell budget.
pub fn default_depth(pieces: usize) -> usize {
    let mut depth = 1;
    while pieces.pow(depth as u32 + 1) <= DEFAULT_CELLS {
        depth += 1;
    }
    depth
}

pub struct CountingArgs {
    pub side: Side,
    pub lmin: f64,
    pub lmax: f64,
    pub points: usize,
    pub depth: Option<usize>,
}

/// Counting series on a log grid rounded to the printed precision.
pub fn counting_in_process(
    params: &SelfSimilarParams,
    args: &CountingArgs,
) -> Result<CountingSeries, CliError> {
    let meta = compute_meta(params)?;
    let depth = args.depth.unwrap_or_else(|| default_depth(params.len()));
    let mut grid: Vec<f64> = log_grid(args.lmin, args.lmax, args.points)?
        .into_iter()
        .map(round_sci)
        .collect();
    grid.dedup();
    let pencil = assemble_pencil(params, &meta, depth)?;
    Ok(counting_series(&pencil, &meta, args.side, &grid)?)
}

pub fn counting(params: &Path, args: &CountingArgs, out: Option<&Path>) -> Result<(), CliError> {
    let series = counting_in_process(&load_params(params)?, args)?;
    let mut table = Table::new(&["lambda", "ind", "near_singular"]);
    for s in &series.samples {
        table.push(vec![
            sci(s.lambda),
            s.ind.to_string(),
            u8::from(s.near_singular).to_string(),
        ]);
    }
    emit(out, &table.to_csv())
}

#[derive(Deserialize)]
struct SeriesRow {
    lambda: f64,
    ind: usize,
    #[serde(default)]
    near_singular: u8,
}

pub fn read_series(path: &Path, meta: &SimilarityMeta) -> Result<CountingSeries, CliError> {
    let text = read(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let samples = reader
        .deserialize::<SeriesRow>()
        .map(|row| {
            row.map(|r| CountSample {
                lambda: r.lambda,
                ind: r.ind,
                near_singular: r.near_singular != 0,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(CountingSeries::from_samples(samples, meta, 0)?)
}

pub fn parse_phases(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|p| {
            let phase: f64 = p
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("bad phase {p:?}")))?;
            if (0.0..2.0).contains(&phase) {
                Ok(phase)
            } else {
                Err(CliError::Validation(format!(
                    "phase {phase} outside [0, 2)"
                )))
            }
        })
        .collect()
}

/// JSON report for one or two counting series (at most one per ray).
pub fn s_report(
    series: &[CountingSeries],
    meta: &SimilarityMeta,
    phases: &[f64],
    phase_tol: f64,
) -> Result<Value, CliError> {
    let pos = series.iter().find(|s| s.side == Side::Positive);
    let neg = series.iter().find(|s| s.side == Side::Negative);
    if series.is_empty()
        || series.len() > 2
        || (series.len() == 2 && (pos.is_none() || neg.is_none()))
    {
        return Err(CliError::Validation(
            "give one series per ray, at most one for each".into(),
        ));
    }
    let mut report = json!({ "classification": meta.classification, "D_half": meta.half_order });
    match meta.classification {
        Classification::Nonarithmetic => {
            let estimates = series
                .iter()
                .map(estimate_constant_s)
                .collect::<Result<Vec<_>, _>>()?;
            if let (Some(p), Some(n)) = (pos, neg) {
                let a = estimate_constant_s(p)?
                    .constant
                    .expect("non-empty top decade");
                let b = estimate_constant_s(n)?
                    .constant
                    .expect("non-empty top decade");
                let (diff, spread) = constant_agreement(&a, &b);
                report["agreement"] = json!({ "abs_diff": diff, "combined_spread": spread, "consistent": diff <= spread });
            }
            report["estimates"] = serde_json::to_value(estimates).expect("serializable");
        }
        _ => {
            let estimates = series
                .iter()
                .map(|s| estimate_periodic_s(s, phases, phase_tol))
                .collect::<Result<Vec<_>, _>>()?;
            if let (Some(p), Some(n)) = (pos, neg) {
                let check = period_doubling_check(p, n, phases, phase_tol)?;
                report["period_doubling"] = json!({
                    "comparisons": check.comparisons,
                    "max_rel_discrepancy": check.max_rel_discrepancy,
                    "doubling_pairs": check.doubling_pairs,
                    "doubling_observed": check.doubling_observed,
                });
            }
            report["estimates"] = serde_json::to_value(estimates).expect("serializable");
        }
    }
    Ok(report)
}

pub fn s_estimate(
    series: &[PathBuf],
    meta: &Path,
    phases: &str,
    phase_tol: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let meta = load_meta(meta)?;
    let phases = parse_phases(phases)?;
    let loaded = series
        .iter()
        .map(|p| read_series(p, &meta))
        .collect::<Result<Vec<_>, _>>()?;
    let report = s_report(
        &loaded,
        &meta,
        &phases,
        phase_tol.unwrap_or(DEFAULT_PHASE_TOL),
    )?;
    emit(out, &json(&report))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteSystem {
    u: Vec<f64>,
    v: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
}

pub fn renewal_discrete(system: &Path, n_max: usize, out: Option<&Path>) -> Result<(), CliError> {
    let sys: DiscreteSystem = parse_json(system)?;
    let coeffs = RenewalCoefficients::integer(sys.u, sys.v)?;
    let sol = solve_discrete(&coeffs, &sys.x1, &sys.x2, n_max)?;
    let limits = coeffs
        .has_degenerate_parity()
        .then(|| discrete_limits(&coeffs, &sys.x1, &sys.x2))
        .transpose()?;
    let mut table = Table::new(&["n", "Z1", "Z2", "predicted_limit"]);
    for n in 0..=n_max {
        let predicted = limits.map_or(String::new(), |l| sci(l.limit(1, n)));
        table.push(vec![
            n.to_string(),
            sci(sol.z1[n]),
            sci(sol.z2[n]),
            predicted,
        ]);
    }
    emit(out, &table.to_csv())
}

fn forcing(value: Option<Value>, name: &str) -> Result<Forcing, CliError> {
    let forcing = match value {
        None => Forcing::zero(),
        Some(v) => {
            Forcing::from_json_value(v).map_err(|e| CliError::Validation(format!("{name}: {e}")))?
        }
    };
    forcing
        .profile
        .validate()
        .map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
    if let DecayCertificate::Unknown = forcing.certificate {
        return Err(CliError::Validation(format!(
            "{name}: no decay certificate could be derived"
        )));
    }
    Ok(forcing)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeSystem {
    u: Vec<f64>,
    v: Vec<f64>,
    x1: Option<Value>,
    x2: Option<Value>,
    #[serde(default)]
    phases: Option<Vec<f64>>,
    #[serde(default)]
    horizon: Option<f64>,
}

fn solution_table(sol: &RenewalSolution, stride: usize) -> Table {
    let mut table = Table::new(&["t", "Z1", "Z2", "predicted_limit"]);
    let last = sol.grid.len().saturating_sub(1);
    for i in (0..sol.grid.len()).filter(|&i| i % stride == 0 || i == last) {
        table.push(vec![
            sci(sol.grid[i]),
            sci(sol.z1[i]),
            sci(sol.z2[i]),
            sci(sol.predicted[0][i]),
        ]);
    }
    table
}

fn summary(sol: &RenewalSolution) -> String {
    json!({
        "tail_window": [sol.tail_window.0, sol.tail_window.1],
        "tail_discrepancy": sol.tail_discrepancy,
        "points": sol.grid.len(),
    })
    .to_string()
}

pub fn renewal_lattice(
    system: &Path,
    phases: Option<&str>,
    horizon: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let sys: LatticeSystem = parse_json(system)?;
    let coeffs = RenewalCoefficients::integer(sys.u, sys.v)?;
    let (x1, x2) = (forcing(sys.x1, "x1")?, forcing(sys.x2, "x2")?);
    let phases = match phases {
        Some(text) => parse_phases(text)?,
        None => sys
            .phases
            .unwrap_or_else(|| (0..8).map(|i| i as f64 / 8.0).collect()),
    };
    let horizon = horizon.or(sys.horizon).unwrap_or(40.0);
    let sol = solve_lattice(&coeffs, &x1, &x2, &phases, horizon)?;
    emit(out, &solution_table(&sol, 1).to_csv())?;
    eprintln!("{}", summary(&sol));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NonarithSystem {
    u: Vec<f64>,
    #[serde(default)]
    v: Option<Vec<f64>>,
    delays: Vec<f64>,
    x1: Option<Value>,
    x2: Option<Value>,
    t_min: f64,
    t_max: f64,
    #[serde(default)]
    step: Option<f64>,
    #[serde(default)]
    interpolation: Option<Interpolation>,
}

pub fn renewal_nonarith(
    system: &Path,
    step: Option<f64>,
    interpolation: Option<Interpolation>,
    stride: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let sys: NonarithSystem = parse_json(system)?;
    let coeffs = match sys.v {
        Some(v) => RenewalCoefficients::real(sys.u, v, sys.delays)?,
        None => RenewalCoefficients::single(sys.u, sys.delays)?,
    };
    let (x1, x2) = (forcing(sys.x1, "x1")?, forcing(sys.x2, "x2")?);
    let mut opts = MarchOptions::new(sys.t_min, sys.t_max)
        .with_interpolation(interpolation.or(sys.interpolation).unwrap_or_default());
    if let Some(h) = step.or(sys.step) {
        opts = opts.with_step(h);
    }
    if stride == 0 {
        return Err(CliError::Validation("--stride must be at least 1".into()));
    }
    let sol = solve_nonarithmetic(&coeffs, &x1, &x2, &opts)?;
    emit(out, &solution_table(&sol, stride).to_csv())?;
    eprintln!("{}", summary(&sol));
    Ok(())
}
