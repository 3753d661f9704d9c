//! Forcing terms `X_j(t)` for the continuous renewal systems.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Closed-form or tabulated real function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// Normal density scaled to total integral `mass`.
    Gaussian {
        center: f64,
        width: f64,
        mass: f64,
    },
    /// Hat function on `[left, right]` with integral `mass`.
    Triangle {
        left: f64,
        right: f64,
        mass: f64,
    },
    /// `amplitude · (t - onset) · exp(-rate (t - onset))` for `t ≥ onset`, zero before.
    ExpCut {
        onset: f64,
        rate: f64,
        amplitude: f64,
    },
    /// `mass / (π (1 + (t - center)²))`, heavy tailed.
    Lorentzian {
        center: f64,
        mass: f64,
    },
    /// Piecewise-linear interpolation of samples, zero outside `[t_0, t_last]`.
    Table {
        t: Vec<f64>,
        x: Vec<f64>,
    },
    Shifted {
        by: f64,
        of: Box<Profile>,
    },
    Scaled {
        factor: f64,
        of: Box<Profile>,
    },
    Sum {
        terms: Vec<Profile>,
    },
}

/// Claimed decay behaviour of a forcing term. Trusted, not verified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayCertificate {
    /// Zero outside `[lo, hi]`.
    CompactSupport { lo: f64, hi: f64 },
    /// `|X(t)| ≤ bound · exp(-rate t)` for `t ≥ 0`, zero for `t < 0`.
    Exponential { rate: f64, bound: f64 },
    /// `|X(t)| ≤ bound / (1 + t²)` on the whole line.
    InverseSquare { bound: f64 },
    /// No decay information.
    Unknown,
}

impl Profile {
    pub fn gaussian(center: f64, width: f64, mass: f64) -> Self {
        Profile::Gaussian {
            center,
            width,
            mass,
        }
    }

    pub fn triangle(left: f64, right: f64, mass: f64) -> Self {
        Profile::Triangle { left, right, mass }
    }

    pub fn shifted(self, by: f64) -> Self {
        Profile::Shifted {
            by,
            of: Box::new(self),
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Profile::Scaled {
            factor,
            of: Box::new(self),
        }
    }

    /// Checks parameters that the closed forms rely on.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match self {
            Profile::Zero => Ok(()),
            Profile::Gaussian {
                center,
                width,
                mass,
            } => {
                finite("center", *center)?;
                finite("mass", *mass)?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err("gaussian width must be positive".into());
                }
                Ok(())
            }
            Profile::Triangle { left, right, mass } => {
                finite("left", *left)?;
                finite("mass", *mass)?;
                if !(right > left && right.is_finite()) {
                    return Err("triangle needs left < right".into());
                }
                Ok(())
            }
            Profile::ExpCut {
                onset,
                rate,
                amplitude,
            } => {
                finite("onset", *onset)?;
                finite("amplitude", *amplitude)?;
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err("exp_cut rate must be positive".into());
                }
                Ok(())
            }
            Profile::Lorentzian { center, mass } => {
                finite("center", *center)?;
                finite("mass", *mass)
            }
            Profile::Table { t, x } => {
                if t.len() != x.len() {
                    return Err(format!(
                        "table has {} times but {} values",
                        t.len(),
                        x.len()
                    ));
                }
                if t.len() < 2 {
                    return Err("table needs at least two samples".into());
                }
                if t.iter().chain(x).any(|v| !v.is_finite()) {
                    return Err("table entries must be finite".into());
                }
                if t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("table times must be strictly increasing".into());
                }
                Ok(())
            }
            Profile::Shifted { by, of } => {
                finite("shift", *by)?;
                of.validate()
            }
            Profile::Scaled { factor, of } => {
                finite("factor", *factor)?;
                of.validate()
            }
            Profile::Sum { terms } => terms.iter().try_for_each(Profile::validate),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Gaussian {
                center,
                width,
                mass,
            } => {
                let z = (t - center) / width;
                mass * (-0.5 * z * z).exp() / (width * (2.0 * PI).sqrt())
            }
            Profile::Triangle { left, right, mass } => {
                if t <= *left || t >= *right {
                    return 0.0;
                }
                let half = 0.5 * (right - left);
                let peak = mass / half;
                peak * (1.0 - (t - (left + half)).abs() / half)
            }
            Profile::ExpCut {
                onset,
                rate,
                amplitude,
            } => {
                if t < *onset {
                    0.0
                } else {
                    let s = t - onset;
                    amplitude * s * (-rate * s).exp()
                }
            }
            Profile::Lorentzian { center, mass } => {
                let s = t - center;
                mass / (PI * (1.0 + s * s))
            }
            Profile::Table { t: ts, x } => table_eval(ts, x, t),
            Profile::Shifted { by, of } => of.eval(t - by),
            Profile::Scaled { factor, of } => factor * of.eval(t),
            Profile::Sum { terms } => terms.iter().map(|p| p.eval(t)).sum(),
        }
    }

    /// Closed interval outside of which the profile vanishes, if bounded
    /// on either side.
    pub fn support(&self) -> (Option<f64>, Option<f64>) {
        match self {
            Profile::Zero => (Some(f64::INFINITY), Some(f64::NEG_INFINITY)),
            Profile::Gaussian { .. } | Profile::Lorentzian { .. } => (None, None),
            Profile::Triangle { left, right, .. } => (Some(*left), Some(*right)),
            Profile::ExpCut { onset, .. } => (Some(*onset), None),
            Profile::Table { t, .. } => (t.first().copied(), t.last().copied()),
            Profile::Shifted { by, of } => {
                let (lo, hi) = of.support();
                (lo.map(|x| x + by), hi.map(|x| x + by))
            }
            Profile::Scaled { factor, of } => {
                if *factor == 0.0 {
                    Profile::Zero.support()
                } else {
                    of.support()
                }
            }
            Profile::Sum { terms } => terms.iter().fold(Profile::Zero.support(), |acc, p| {
                let (lo, hi) = p.support();
                let lo = match (acc.0, lo) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    _ => None,
                };
                let hi = match (acc.1, hi) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
                (lo, hi)
            }),
        }
    }

    /// Upper bound for `∫_{-∞}^{t} |X| dμ`.
    pub fn abs_mass_below(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Gaussian {
                center,
                width,
                mass,
            } => {
                let z = (center - t) / width;
                if z <= 1.0 {
                    mass.abs()
                } else {
                    // Mills ratio bound for the normal tail
                    mass.abs() * (-0.5 * z * z).exp() / (z * (2.0 * PI).sqrt())
                }
            }
            Profile::Lorentzian { center, mass } => {
                let s = t - center;
                mass.abs() * (0.5 + s.atan() / PI)
            }
            Profile::Triangle { left, right, mass } => {
                if t <= *left {
                    0.0
                } else {
                    mass.abs().min(mass.abs() * triangle_cdf(*left, *right, t))
                }
            }
            Profile::ExpCut {
                onset,
                rate,
                amplitude,
            } => {
                if t <= *onset {
                    0.0
                } else {
                    let s = t - onset;
                    // ∫_0^s σ e^{-rσ} dσ
                    let r = *rate;
                    amplitude.abs() * (1.0 - (1.0 + r * s) * (-r * s).exp()) / (r * r)
                }
            }
            Profile::Table { t: ts, x } => {
                if ts.is_empty() || t <= ts[0] {
                    return 0.0;
                }
                let mut acc = 0.0;
                for i in 1..ts.len() {
                    let (a, b) = (ts[i - 1], ts[i]);
                    if a >= t {
                        break;
                    }
                    acc += 0.5 * (b - a) * (x[i - 1].abs() + x[i].abs());
                }
                acc
            }
            Profile::Shifted { by, of } => of.abs_mass_below(t - by),
            Profile::Scaled { factor, of } => factor.abs() * of.abs_mass_below(t),
            Profile::Sum { terms } => terms.iter().map(|p| p.abs_mass_below(t)).sum(),
        }
    }

    /// Total integral `∫ X dμ`, exact for every closed form.
    pub fn integral(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Gaussian { mass, .. }
            | Profile::Triangle { mass, .. }
            | Profile::Lorentzian { mass, .. } => *mass,
            Profile::ExpCut {
                rate, amplitude, ..
            } => amplitude / (rate * rate),
            Profile::Table { t, x } => t
                .windows(2)
                .zip(x.windows(2))
                .map(|(tt, xx)| 0.5 * (tt[1] - tt[0]) * (xx[0] + xx[1]))
                .sum(),
            Profile::Shifted { of, .. } => of.integral(),
            Profile::Scaled { factor, of } => factor * of.integral(),
            Profile::Sum { terms } => terms.iter().map(Profile::integral).sum(),
        }
    }

    /// A decay certificate read off the closed form.
    pub fn natural_certificate(&self) -> DecayCertificate {
        match self.support() {
            (Some(lo), Some(hi)) if lo <= hi => return DecayCertificate::CompactSupport { lo, hi },
            (Some(lo), Some(hi)) if lo > hi => {
                return DecayCertificate::CompactSupport { lo: 0.0, hi: 0.0 }
            }
            _ => {}
        }
        match self {
            Profile::ExpCut {
                onset,
                rate,
                amplitude,
            } if *onset >= 0.0 => {
                // s e^{-r s} ≤ e^{-r s / 2} · 2/(e r), and e^{-r (t - onset)/2} ≤ e^{r onset/2} e^{-r t/2}
                let bound = amplitude.abs() * 2.0 / (std::f64::consts::E * rate)
                    * (0.5 * rate * onset).exp();
                DecayCertificate::Exponential {
                    rate: 0.5 * rate,
                    bound,
                }
            }
            Profile::Lorentzian { center, mass } => {
                // (1 + t²) / (1 + (t - c)²) ≤ 1 + c² / 2 + |c| sqrt(1 + c² / 4)
                let c = center.abs();
                let factor = 1.0 + 0.5 * c * c + c * (1.0 + 0.25 * c * c).sqrt();
                DecayCertificate::InverseSquare {
                    bound: mass.abs() / PI * factor,
                }
            }
            Profile::Gaussian { center, width, .. } => DecayCertificate::InverseSquare {
                bound: sampled_inverse_square_bound(self, *center, *width),
            },
            Profile::Shifted { by, of } if *by >= 0.0 => match of.natural_certificate() {
                DecayCertificate::Exponential { rate, bound } => DecayCertificate::Exponential {
                    rate,
                    bound: bound * (rate * by).exp(),
                },
                _ => DecayCertificate::Unknown,
            },
            Profile::Scaled { factor, of } => match of.natural_certificate() {
                DecayCertificate::Exponential { rate, bound } => DecayCertificate::Exponential {
                    rate,
                    bound: bound * factor.abs(),
                },
                DecayCertificate::InverseSquare { bound } => DecayCertificate::InverseSquare {
                    bound: bound * factor.abs(),
                },
                _ => DecayCertificate::Unknown,
            },
            Profile::Sum { terms } => {
                let mut rate = f64::INFINITY;
                let mut total = 0.0;
                for p in terms {
                    match p.natural_certificate() {
                        DecayCertificate::Exponential { rate: r, bound } => {
                            rate = rate.min(r);
                            total += bound;
                        }
                        DecayCertificate::CompactSupport { lo, hi } if lo >= 0.0 => {
                            // sup |X| · e^{r hi} once a rate is known; sampled sup with margin
                            let sup = sampled_sup(p, lo, hi);
                            rate = rate.min(1.0);
                            total += sup * hi.exp();
                        }
                        _ => return DecayCertificate::Unknown,
                    }
                }
                DecayCertificate::Exponential { rate, bound: total }
            }
            _ => DecayCertificate::Unknown,
        }
    }
}

fn sampled_sup(p: &Profile, lo: f64, hi: f64) -> f64 {
    let n = 10_000;
    let sup = (0..=n)
        .map(|i| p.eval(lo + (hi - lo) * i as f64 / n as f64).abs())
        .fold(0.0, f64::max);
    1.1 * sup
}

fn triangle_cdf(left: f64, right: f64, t: f64) -> f64 {
    if t <= left {
        return 0.0;
    }
    if t >= right {
        return 1.0;
    }
    let mid = 0.5 * (left + right);
    let half = mid - left;
    if t <= mid {
        let s = (t - left) / half;
        0.5 * s * s
    } else {
        let s = (right - t) / half;
        1.0 - 0.5 * s * s
    }
}

fn table_eval(ts: &[f64], xs: &[f64], t: f64) -> f64 {
    if ts.is_empty() || t < ts[0] || t > ts[ts.len() - 1] {
        return 0.0;
    }
    let i = ts.partition_point(|&s| s <= t);
    if i == ts.len() {
        return xs[xs.len() - 1];
    }
    let (t0, t1) = (ts[i - 1], ts[i]);
    let w = (t - t0) / (t1 - t0);
    xs[i - 1] * (1.0 - w) + xs[i] * w
}

/// `sup (1 + t²) |X(t)|`, sampled densely around a Gaussian bump with a
/// 10% safety margin; beyond 40 widths the Gaussian decays faster than `t⁻²`.
fn sampled_inverse_square_bound(p: &Profile, center: f64, width: f64) -> f64 {
    let lo = center - 40.0 * width;
    let hi = center + 40.0 * width;
    let n = 20_000;
    let mut sup: f64 = 0.0;
    for i in 0..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        sup = sup.max((1.0 + t * t) * p.eval(t).abs());
    }
    1.1 * sup
}

/// A forcing term together with its decay certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub profile: Profile,
    pub certificate: DecayCertificate,
}

impl Forcing {
    pub fn new(profile: Profile) -> Self {
        let certificate = profile.natural_certificate();
        Forcing {
            profile,
            certificate,
        }
    }

    pub fn with_certificate(profile: Profile, certificate: DecayCertificate) -> Self {
        Forcing {
            profile,
            certificate,
        }
    }

    pub fn zero() -> Self {
        Forcing::new(Profile::Zero)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.profile.eval(t)
    }

    /// Parses either a bare profile (`{"kind": "gaussian", …}`) or a
    /// `{"profile": …, "certificate": …}` record.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self, serde_json::Error> {
        if value.get("profile").is_some() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(Forcing::new)
        }
    }

    /// True when the forcing vanishes on the open negative half-line.
    pub fn vanishes_on_negative_axis(&self) -> bool {
        match self.profile.support().0 {
            Some(lo) => lo >= 0.0,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_malformed_tables() {
        let bad = Profile::Table {
            t: vec![0.0, 1.0],
            x: vec![1.0],
        };
        assert!(bad.validate().is_err());
        let unsorted = Profile::Table {
            t: vec![0.0, 2.0, 1.0],
            x: vec![1.0; 3],
        };
        assert!(unsorted.validate().is_err());
        let nested = Profile::gaussian(0.0, -1.0, 1.0).shifted(2.0);
        assert!(nested.validate().is_err());
        assert!(Profile::triangle(0.0, 1.0, 1.0)
            .scaled(2.0)
            .validate()
            .is_ok());
    }

    fn trapezoid(p: &Profile, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let inner: f64 = (1..n).map(|i| p.eval(lo + h * i as f64)).sum();
        h * (inner + 0.5 * (p.eval(lo) + p.eval(hi)))
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        let cases = [
            Profile::gaussian(2.0, 0.3, 1.7),
            Profile::triangle(0.0, 1.0, 0.8),
            Profile::ExpCut {
                onset: 0.5,
                rate: 2.0,
                amplitude: 3.0,
            },
        ];
        for p in &cases {
            let q = trapezoid(p, -10.0, 30.0, 400_000);
            assert_abs_diff_eq!(p.integral(), q, epsilon = 1e-7);
        }
    }

    #[test]
    fn triangle_peak_and_support() {
        let p = Profile::triangle(0.0, 1.0, 1.0);
        assert_abs_diff_eq!(p.eval(0.5), 2.0);
        assert_eq!(p.eval(-0.1), 0.0);
        assert_eq!(p.support(), (Some(0.0), Some(1.0)));
        assert!(Forcing::new(p).vanishes_on_negative_axis());
        assert!(!Forcing::new(Profile::gaussian(5.0, 1.0, 1.0)).vanishes_on_negative_axis());
    }

    #[test]
    fn table_is_piecewise_linear() {
        let p = Profile::Table {
            t: vec![0.0, 1.0, 3.0],
            x: vec![0.0, 2.0, 0.0],
        };
        assert_abs_diff_eq!(p.eval(0.5), 1.0);
        assert_abs_diff_eq!(p.eval(2.0), 1.0);
        assert_eq!(p.eval(3.5), 0.0);
        assert_abs_diff_eq!(p.integral(), 3.0);
        assert_abs_diff_eq!(p.abs_mass_below(1.0), 1.0);
    }

    #[test]
    fn mass_below_bounds_quadrature() {
        let p = Profile::gaussian(0.0, 1.0, 1.0).shifted(4.0);
        for t in [-2.0, 0.0, 1.0, 2.5] {
            let q = trapezoid(&p, -40.0, t, 200_000);
            assert!(p.abs_mass_below(t) >= q - 1e-12, "t = {t}");
        }
    }

    #[test]
    fn certificates() {
        let g = Profile::gaussian(3.0, 0.5, 1.0);
        match g.natural_certificate() {
            DecayCertificate::InverseSquare { bound } => {
                for i in 0..2000 {
                    let t = -50.0 + 0.05 * i as f64;
                    assert!((1.0 + t * t) * g.eval(t) <= bound);
                }
            }
            other => panic!("{other:?}"),
        }
        let e = Profile::ExpCut {
            onset: 1.0,
            rate: 1.0,
            amplitude: 2.0,
        };
        match e.natural_certificate() {
            DecayCertificate::Exponential { rate, bound } => {
                for i in 0..4000 {
                    let t = 0.01 * i as f64;
                    assert!(e.eval(t) <= bound * (-rate * t).exp() + 1e-15);
                }
            }
            other => panic!("{other:?}"),
        }
        let l = Profile::Lorentzian {
            center: -2.0,
            mass: 1.0,
        };
        match l.natural_certificate() {
            DecayCertificate::InverseSquare { bound } => {
                for i in 0..4000 {
                    let t = -100.0 + 0.05 * i as f64;
                    assert!((1.0 + t * t) * l.eval(t) <= bound * (1.0 + 1e-12));
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_forms() {
        let f = Forcing::from_json_value(serde_json::json!(
            {"kind": "gaussian", "center": 1.0, "width": 0.5, "mass": 2.0}
        ))
        .unwrap();
        assert_eq!(f.profile, Profile::gaussian(1.0, 0.5, 2.0));
        let f = Forcing::from_json_value(serde_json::json!(
            {"kind": "table", "t": [0.0, 1.0], "x": [1.0, 0.0]}
        ))
        .unwrap();
        assert_eq!(
            f.certificate,
            DecayCertificate::CompactSupport { lo: 0.0, hi: 1.0 }
        );
        let f = Forcing::from_json_value(serde_json::json!({
            "profile": {"kind": "zero"},
            "certificate": {"kind": "exponential", "rate": 1.0, "bound": 1.0}
        }))
        .unwrap();
        assert_eq!(
            f.certificate,
            DecayCertificate::Exponential {
                rate: 1.0,
                bound: 1.0
            }
        );
    }
}
