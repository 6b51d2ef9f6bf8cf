//! Ordinary least-squares fits of steady-state entropies against system size
//! and against subsystem size.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitMode {
    /// `S = g L + s0`
    #[serde(rename = "linear")]
    Linear,
    /// `S = g ln L + s0`
    #[serde(rename = "log")]
    Log,
    /// `S = g ln L + g' L + s0`
    #[serde(rename = "combined")]
    Combined,
    /// `S = A sin(πl/L) + B ln sin(πl/L) + C`
    #[serde(rename = "profile_ABC")]
    ProfileAbc,
    /// `S = (c/6) ln sin(πl/L) + S0`
    #[serde(rename = "profile_central_charge")]
    ProfileCentralCharge,
}

impl FitMode {
    pub fn name(self) -> &'static str {
        match self {
            FitMode::Linear => "linear",
            FitMode::Log => "log",
            FitMode::Combined => "combined",
            FitMode::ProfileAbc => "profile_ABC",
            FitMode::ProfileCentralCharge => "profile_central_charge",
        }
    }

    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            FitMode::Linear | FitMode::Log => &["g", "s0"],
            FitMode::Combined => &["g", "g_prime", "s0"],
            FitMode::ProfileAbc => &["A", "B", "C"],
            FitMode::ProfileCentralCharge => &["c", "S0"],
        }
    }

    fn min_points(self) -> usize {
        match self {
            FitMode::Linear | FitMode::Log => 3,
            FitMode::Combined => 4,
            FitMode::ProfileAbc | FitMode::ProfileCentralCharge => 5,
        }
    }

    pub fn is_profile(self) -> bool {
        matches!(self, FitMode::ProfileAbc | FitMode::ProfileCentralCharge)
    }
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(FitMode::Linear),
            "log" => Ok(FitMode::Log),
            "combined" => Ok(FitMode::Combined),
            "profile_ABC" | "profile_abc" => Ok(FitMode::ProfileAbc),
            "profile_central_charge" => Ok(FitMode::ProfileCentralCharge),
            other => Err(Error::InvalidArgument(format!(
                "unknown fit mode '{other}' (expected linear, log, combined, profile_ABC or profile_central_charge)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub mode: FitMode,
    /// In the order of [`FitMode::coefficient_names`].
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
    pub data: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.mode
            .coefficient_names()
            .iter()
            .position(|n| *n == name)
            .map(|k| self.coefficients[k])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coefficients: serde_json::Map<String, serde_json::Value> = self
            .mode
            .coefficient_names()
            .iter()
            .zip(&self.coefficients)
            .map(|(n, c)| (n.to_string(), serde_json::json!(c)))
            .collect();
        serde_json::json!({
            "mode": self.mode.name(),
            "coefficients": coefficients,
            "residual_rms": self.residual_rms,
            "n_points": self.data.len(),
        })
    }
}

/// Fit of `S` against system size `L`.
pub fn fit_scaling(points: &[(f64, f64)], mode: FitMode) -> Result<ScalingFit> {
    if mode.is_profile() {
        return Err(Error::Fit(format!("{mode} is a profile mode; use fit_profile")));
    }
    check_points(points, mode)?;
    let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
    sizes.sort_by(f64::total_cmp);
    if sizes.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("duplicate system sizes make the design singular".into()));
    }
    if mode != FitMode::Linear && sizes[0] <= 0.0 {
        return Err(Error::Fit("logarithmic fits need positive sizes".into()));
    }
    let basis = |l: f64| -> Vec<f64> {
        match mode {
            FitMode::Linear => vec![l, 1.0],
            FitMode::Log => vec![l.ln(), 1.0],
            FitMode::Combined => vec![l.ln(), l, 1.0],
            _ => unreachable!(),
        }
    };
    least_squares(points, mode, basis, |c| c)
}

/// Fit of `S(L, l)` against the cut position `l` at fixed `L`.
pub fn fit_profile(points: &[(f64, f64)], l_total: usize, mode: FitMode) -> Result<ScalingFit> {
    if !mode.is_profile() {
        return Err(Error::Fit(format!("{mode} is not a profile mode")));
    }
    check_points(points, mode)?;
    let lf = l_total as f64;
    if let Some(bad) = points.iter().find(|p| !(p.0 > 0.0 && p.0 < lf)) {
        return Err(Error::Fit(format!(
            "profile point l = {} outside the open interval (0, {l_total})",
            bad.0
        )));
    }
    let chord = move |l: f64| (PI * l / lf).sin();
    match mode {
        FitMode::ProfileAbc => least_squares(
            points,
            mode,
            |l| vec![chord(l), chord(l).ln(), 1.0],
            |c| c,
        ),
        FitMode::ProfileCentralCharge => least_squares(
            points,
            mode,
            |l| vec![chord(l).ln(), 1.0],
            |mut c| {
                c[0] *= 6.0;
                c
            },
        ),
        _ => unreachable!(),
    }
}

/// Keeps `margin <= l <= L - margin`.
pub fn trim_profile_edges(points: &[(usize, f64)], l_total: usize, margin: usize) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|(l, _)| *l >= margin && *l + margin <= l_total)
        .map(|&(l, s)| (l as f64, s))
        .collect()
}

fn check_points(points: &[(f64, f64)], mode: FitMode) -> Result<()> {
    if points.len() < mode.min_points() {
        return Err(Error::Fit(format!(
            "{mode} fit needs at least {} points, got {}",
            mode.min_points(),
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("fit data contains non-finite values".into()));
    }
    Ok(())
}

/// Householder least squares on column-equilibrated regressors.
fn least_squares(
    points: &[(f64, f64)],
    mode: FitMode,
    basis: impl Fn(f64) -> Vec<f64>,
    finish: impl FnOnce(Vec<f64>) -> Vec<f64>,
) -> Result<ScalingFit> {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| basis(p.0)).collect();
    let (n, p) = (rows.len(), rows[0].len());
    let col_norms: Vec<f64> = (0..p)
        .map(|k| rows.iter().map(|r| r[k] * r[k]).sum::<f64>().sqrt())
        .collect();
    if col_norms.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Fit("a regressor vanishes on all points".into()));
    }
    let x = Mat::<f64>::from_fn(n, p, |i, k| rows[i][k] / col_norms[k]);
    let qr = x.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let largest = (0..p).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..p).any(|k| r[(k, k)].abs() <= 1e-12 * largest) {
        return Err(Error::Fit("singular design matrix".into()));
    }
    let qty: Vec<f64> = (0..p)
        .map(|k| (0..n).map(|i| q[(i, k)] * points[i].1).sum())
        .collect();
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let tail: f64 = (k + 1..p).map(|m| r[(k, m)] * beta[m]).sum();
        beta[k] = (qty[k] - tail) / r[(k, k)];
    }
    let raw: Vec<f64> = beta.iter().zip(&col_norms).map(|(b, c)| b / c).collect();
    let residual_rms = (rows
        .iter()
        .zip(points)
        .map(|(row, pt)| {
            let pred: f64 = row.iter().zip(&raw).map(|(a, b)| a * b).sum();
            (pt.1 - pred).powi(2)
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(ScalingFit {
        mode,
        coefficients: finish(raw),
        residual_rms,
        data: points.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIZES: [f64; 5] = [89.0, 144.0, 233.0, 377.0, 610.0];

    #[test]
    fn linear_recovers_synthetic_volume_law() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, 0.2 * l + 1.0)).collect();
        let fit = fit_scaling(&pts, FitMode::Linear).unwrap();
        assert!((fit.get("g").unwrap() - 0.2).abs() < 1e-12);
        assert!((fit.get("s0").unwrap() - 1.0).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn log_recovers_synthetic_log_law() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, 0.34 * l.ln() + 0.5)).collect();
        let fit = fit_scaling(&pts, FitMode::Log).unwrap();
        assert!((fit.get("g").unwrap() - 0.34).abs() < 1e-10);
        assert!((fit.get("s0").unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn combined_recovers_both_terms() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, 2.4 * l.ln() + 0.1 * l - 3.0)).collect();
        let fit = fit_scaling(&pts, FitMode::Combined).unwrap();
        assert!((fit.get("g").unwrap() - 2.4).abs() < 1e-8);
        assert!((fit.get("g_prime").unwrap() - 0.1).abs() < 1e-10);
        assert!((fit.get("s0").unwrap() + 3.0).abs() < 1e-7);
    }

    #[test]
    fn mismatched_model_has_much_larger_residual() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, 0.2 * l + 1.0)).collect();
        let good = fit_scaling(&pts, FitMode::Linear).unwrap();
        let bad = fit_scaling(&pts, FitMode::Log).unwrap();
        assert!(bad.residual_rms > 10.0 * good.residual_rms.max(1e-10));
    }

    #[test]
    fn degenerate_inputs() {
        let dup = [(89.0, 1.0), (89.0, 2.0), (144.0, 3.0)];
        assert!(matches!(fit_scaling(&dup, FitMode::Linear), Err(Error::Fit(_))));
        let few = [(89.0, 1.0), (144.0, 2.0), (233.0, 3.0)];
        assert!(fit_scaling(&few, FitMode::Combined).is_err());
        assert!(fit_scaling(&few[..2], FitMode::Log).is_err());
        assert!(fit_profile(&few, 10, FitMode::ProfileAbc).is_err());
        assert!(fit_scaling(&few, FitMode::ProfileAbc).is_err());
    }

    #[test]
    fn central_charge_from_synthetic_profile() {
        let l_total = 610;
        let pts: Vec<_> = (1..l_total)
            .map(|l| {
                let x = (PI * l as f64 / l_total as f64).sin().ln();
                (l, 2.0 / 6.0 * x + 1.0)
            })
            .collect();
        let trimmed = trim_profile_edges(&pts, l_total, 5);
        assert_eq!(trimmed.first().unwrap().0, 5.0);
        assert_eq!(trimmed.last().unwrap().0, 605.0);
        let fit = fit_profile(&trimmed, l_total, FitMode::ProfileCentralCharge).unwrap();
        assert!((fit.get("c").unwrap() - 2.0).abs() < 1e-10);
        assert!((fit.get("S0").unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_profile_has_no_central_charge() {
        let pts: Vec<_> = (1..100).map(|l| (l as f64, 0.7)).collect();
        let fit = fit_profile(&pts, 100, FitMode::ProfileCentralCharge).unwrap();
        assert!(fit.get("c").unwrap().abs() < 1e-10);
    }

    #[test]
    fn abc_profile() {
        let l_total = 233;
        let pts: Vec<_> = (1..l_total)
            .map(|l| {
                let s = (PI * l as f64 / l_total as f64).sin();
                (l as f64, 12.0 * s + 0.4 * s.ln() + 0.3)
            })
            .collect();
        let fit = fit_profile(&pts, l_total, FitMode::ProfileAbc).unwrap();
        for (name, want) in [("A", 12.0), ("B", 0.4), ("C", 0.3)] {
            assert!((fit.get(name).unwrap() - want).abs() < 1e-9, "{name}");
        }
        let bad = [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)];
        assert!(fit_profile(&bad, 10, FitMode::ProfileAbc).is_err());
    }

    #[test]
    fn json_layout() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, 0.2 * l + 1.0)).collect();
        let json = fit_scaling(&pts, FitMode::Linear).unwrap().to_json();
        assert_eq!(json["mode"], "linear");
        assert_eq!(json["n_points"], 5);
        assert!(json["coefficients"]["g"].is_number());
        assert!(json["residual_rms"].is_number());
        assert_eq!("profile_ABC".parse::<FitMode>().unwrap(), FitMode::ProfileAbc);
        assert!("cubic".parse::<FitMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn constant_shift_moves_only_the_intercept(
                g in -1.0f64..1.0, s0 in -5.0f64..5.0, shift in -10.0f64..10.0,
                noise in proptest::collection::vec(-0.05f64..0.05, 5),
            ) {
                let pts: Vec<_> = SIZES.iter().zip(&noise).map(|(&l, e)| (l, g * l.ln() + s0 + e)).collect();
                let moved: Vec<_> = pts.iter().map(|&(l, s)| (l, s + shift)).collect();
                for mode in [FitMode::Linear, FitMode::Log, FitMode::Combined] {
                    let a = fit_scaling(&pts, mode).unwrap();
                    let b = fit_scaling(&moved, mode).unwrap();
                    let k = a.coefficients.len() - 1;
                    for i in 0..k {
                        prop_assert!((a.coefficients[i] - b.coefficients[i]).abs() < 1e-8);
                    }
                    prop_assert!((b.coefficients[k] - a.coefficients[k] - shift).abs() < 1e-7);
                    prop_assert!((a.residual_rms - b.residual_rms).abs() < 1e-8);
                    prop_assert!(a.residual_rms >= 0.0);
                }
            }
        }
    }
}
