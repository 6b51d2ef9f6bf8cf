//! Right-eigenpairs of the lattice Hamiltonians, the `<|Im E|>` and `<IPR>`
//! diagnostics, the conjectured periodic-boundary spectra, and phase labels.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, HamiltonianMatrix, ModelSpec, Variant};

/// `<|Im E|>` above which a computed spectrum is treated as PT-broken.
pub const PT_BROKEN_THRESHOLD: f64 = 1e-6;
/// `<IPR>` above `LOCALIZED_IPR_FACTOR / L` is treated as localized.
pub const LOCALIZED_IPR_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<c64>,
    /// Column `j` belongs to `eigenvalues[j]`, unit Euclidean norm.
    pub right_eigenvectors: Mat<c64>,
    /// Per-eigenvector inverse participation ratio `Σ_n |ψ_n|^4`.
    pub ipr: Vec<f64>,
    pub mean_abs_im: f64,
    pub mean_ipr: f64,
    pub max_abs_im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub mean_abs_im: f64,
    pub mean_ipr: f64,
    pub max_abs_im: f64,
}

/// Dense right-eigendecomposition with a residual check on every pair.
pub fn eig_right(h: &HamiltonianMatrix) -> Result<SpectralReport> {
    let n = h.dim();
    let context = || format!("{n}x{n} Hamiltonian");
    let mat = h.as_mat();
    if mat.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::Eigensolver {
            context: context(),
            reason: "matrix has non-finite entries".to_string(),
        });
    }
    let evd = mat.eigen().map_err(|e| Error::Eigensolver {
        context: context(),
        reason: format!("{e:?}"),
    })?;
    let values = evd.S().column_vector();
    let vectors = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });

    let eigenvalues: Vec<c64> = order.iter().map(|&k| values[k]).collect();
    let mut right_eigenvectors = Mat::<c64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.col(src);
        let norm = col.norm_l2();
        if !(norm > 0.0) {
            return Err(Error::Eigensolver {
                context: context(),
                reason: format!("eigenvector {dst} has zero norm"),
            });
        }
        for i in 0..n {
            right_eigenvectors[(i, dst)] = col[i] / norm;
        }
    }

    let scale = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let hv = mat * &right_eigenvectors;
    for (j, &e) in eigenvalues.iter().enumerate() {
        let residual = (0..n)
            .map(|i| (hv[(i, j)] - right_eigenvectors[(i, j)] * e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > 1e-8 * scale {
            return Err(Error::Eigensolver {
                context: context(),
                reason: format!("residual {residual:.3e} for eigenvalue {j} exceeds 1e-8 |H|"),
            });
        }
    }

    let ipr: Vec<f64> = (0..n)
        .map(|j| inverse_participation_ratio(right_eigenvectors.col(j).iter().copied()))
        .collect();
    let mut report = SpectralReport {
        eigenvalues,
        right_eigenvectors,
        ipr,
        mean_abs_im: 0.0,
        mean_ipr: 0.0,
        max_abs_im: 0.0,
    };
    let summary = spectral_summary(&report);
    report.mean_abs_im = summary.mean_abs_im;
    report.mean_ipr = summary.mean_ipr;
    report.max_abs_im = summary.max_abs_im;
    Ok(report)
}

/// Builds and diagonalizes the model; solver failures name the model.
pub fn analyze(spec: &ModelSpec) -> Result<SpectralReport> {
    let h = build_hamiltonian(spec)?;
    eig_right(&h).map_err(|e| match e {
        Error::Eigensolver { reason, .. } => Error::Eigensolver {
            context: format!(
                "{} J={} V={} alpha={} L={}",
                spec.variant, spec.j, spec.v, spec.alpha, spec.l
            ),
            reason,
        },
        other => other,
    })
}

pub fn spectral_summary(report: &SpectralReport) -> SpectralSummary {
    let n = report.eigenvalues.len().max(1) as f64;
    let mean_abs_im = report.eigenvalues.iter().map(|e| e.im.abs()).sum::<f64>() / n;
    let max_abs_im = report.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.im.abs()));
    let mean_ipr = report.ipr.iter().sum::<f64>() / n;
    SpectralSummary {
        mean_abs_im,
        mean_ipr,
        max_abs_im,
    }
}

pub fn inverse_participation_ratio(amplitudes: impl IntoIterator<Item = c64>) -> f64 {
    amplitudes.into_iter().map(|a| a.norm_sqr().powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjecturedCurve {
    pub k_grid: Vec<f64>,
    pub energies: Vec<c64>,
}

/// Closed-form periodic-boundary energy `E(k)` for the model's branch.
pub fn conjectured_energy(variant: Variant, j: f64, v: f64, k: f64) -> c64 {
    let (c, s) = (k.cos(), k.sin());
    match variant {
        Variant::Nhaah1 => {
            if v.abs() <= j.abs() {
                c64::new(2.0 * j * c, 0.0)
            } else {
                c64::new((v + j * j / v) * c, (v - j * j / v) * s)
            }
        }
        Variant::Nhaah2 => {
            if v.abs() < j.abs() {
                c64::new((j + v * v / j) * c, (j - v * v / j) * s)
            } else {
                c64::new(2.0 * v * c, 0.0)
            }
        }
    }
}

/// Uniform grid `k_i = -π + 2π i / k_count` over `[-π, π)`.
pub fn conjectured_spectrum(spec: &ModelSpec, k_count: usize) -> Result<ConjecturedCurve> {
    if k_count == 0 {
        return Err(Error::InvalidArgument("k_count must be at least 1".to_string()));
    }
    let k_grid: Vec<f64> = (0..k_count)
        .map(|i| -PI + 2.0 * PI * i as f64 / k_count as f64)
        .collect();
    let energies = k_grid
        .iter()
        .map(|&k| conjectured_energy(spec.variant, spec.j, spec.v, k))
        .collect();
    Ok(ConjecturedCurve { k_grid, energies })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PtPhase {
    #[serde(rename = "PT_invariant")]
    Invariant,
    #[serde(rename = "PT_broken")]
    Broken,
    #[serde(rename = "critical")]
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Localization {
    #[serde(rename = "extended")]
    Extended,
    #[serde(rename = "localized")]
    Localized,
    #[serde(rename = "critical")]
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub pt: PtPhase,
    pub localization: Localization,
}

/// Phase from the analytic `|V|` vs `|J|` case split.
pub fn classify_phase(spec: &ModelSpec, tolerance: f64) -> PhaseLabel {
    let (j, v) = (spec.j.abs(), spec.v.abs());
    if (v - j).abs() <= tolerance {
        return PhaseLabel {
            pt: PtPhase::Critical,
            localization: Localization::Critical,
        };
    }
    let weak_potential = v < j;
    let pt = match (spec.variant, weak_potential) {
        (Variant::Nhaah1, true) | (Variant::Nhaah2, false) => PtPhase::Invariant,
        _ => PtPhase::Broken,
    };
    let localization = if weak_potential {
        Localization::Extended
    } else {
        Localization::Localized
    };
    PhaseLabel { pt, localization }
}

/// Phase read off computed diagnostics with the fixed thresholds.
pub fn classify_from_diagnostics(summary: &SpectralSummary, l: usize) -> PhaseLabel {
    PhaseLabel {
        pt: if summary.mean_abs_im > PT_BROKEN_THRESHOLD {
            PtPhase::Broken
        } else {
            PtPhase::Invariant
        },
        localization: if summary.mean_ipr > LOCALIZED_IPR_FACTOR / l as f64 {
            Localization::Localized
        } else {
            Localization::Extended
        },
    }
}

/// Symmetric Hausdorff distance between two finite point sets in the plane.
pub fn hausdorff_distance(a: &[c64], b: &[c64]) -> f64 {
    let directed = |from: &[c64], to: &[c64]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Largest distance between paired eigenvalues after greedy nearest-neighbour
/// matching; `INFINITY` when the lengths differ.
pub fn spectrum_mismatch(a: &[c64], b: &[c64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for p in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, q) in b.iter().enumerate() {
            if !used[k] {
                let d = (p - q).norm();
                if d < best.0 {
                    best = (d, k);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub mean_abs_im: f64,
    pub mean_ipr: f64,
    pub max_abs_im: f64,
    pub phase: PhaseLabel,
}

impl SpectralReport {
    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            mean_abs_im: self.mean_abs_im,
            mean_ipr: self.mean_ipr,
            max_abs_im: self.max_abs_im,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,ReE,ImE,IPR_j\n");
        for (i, (e, ipr)) in self.eigenvalues.iter().zip(&self.ipr).enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", e.re, e.im, ipr);
        }
        out
    }

    pub fn summary_json(&self) -> SpectrumJson {
        let summary = self.summary();
        SpectrumJson {
            mean_abs_im: summary.mean_abs_im,
            mean_ipr: summary.mean_ipr,
            max_abs_im: summary.max_abs_im,
            phase: classify_from_diagnostics(&summary, self.eigenvalues.len()),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, self.to_csv().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Alpha;

    fn spec(variant: Variant, j: f64, v: f64, l: usize, p: u64, q: u64) -> ModelSpec {
        ModelSpec::with_alpha(variant, j, v, Alpha::Rational { p, q }, l).unwrap()
    }

    fn assert_spectrum(got: &[c64], want: &[c64]) {
        assert!(spectrum_mismatch(got, want) < 1e-10, "{got:?} vs {want:?}");
    }

    #[test]
    fn hermitian_circulant_spectrum() {
        let r = analyze(&spec(Variant::Nhaah1, 1.0, 0.0, 4, 1, 4)).unwrap();
        let want = [2.0, 0.0, 0.0, -2.0].map(|x| c64::new(x, 0.0));
        assert_spectrum(&r.eigenvalues, &want);
        assert!(r.mean_abs_im <= 1e-10);
        // sorted by real part
        assert!(r.eigenvalues.windows(2).all(|w| w[0].re <= w[1].re));
    }

    #[test]
    fn one_directional_circulant_spectrum() {
        let r = analyze(&spec(Variant::Nhaah2, 1.0, 0.0, 4, 1, 4)).unwrap();
        let want = [c64::new(1.0, 0.0), c64::new(0.0, 1.0), c64::new(-1.0, 0.0), c64::new(0.0, -1.0)];
        assert_spectrum(&r.eigenvalues, &want);
        for e in &r.eigenvalues {
            assert!((e.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvectors_are_normalized() {
        let r = analyze(&ModelSpec::fibonacci(Variant::Nhaah1, 1.0, 2.0, 34).unwrap()).unwrap();
        for j in 0..34 {
            assert!((r.right_eigenvectors.col(j).norm_l2() - 1.0).abs() < 1e-12);
        }
        assert!(r.mean_ipr >= 1.0 / 34.0 - 1e-12 && r.mean_ipr <= 1.0 + 1e-12);
    }

    #[test]
    fn ipr_limits() {
        let unit = [1.0, 0.0, 0.0, 0.0].map(|x| c64::new(x, 0.0));
        assert_eq!(inverse_participation_ratio(unit), 1.0);
        let uniform = vec![c64::new(0.2f64.sqrt(), 0.0); 5];
        assert!((inverse_participation_ratio(uniform) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn conjectured_branches() {
        let e = conjectured_energy(Variant::Nhaah1, 1.0, 2.0, PI / 2.0);
        assert!((e - c64::new(0.0, 1.5)).norm() < 1e-14);
        let e = conjectured_energy(Variant::Nhaah2, 1.0, 0.5, 0.0);
        assert!((e - c64::new(1.25, 0.0)).norm() < 1e-14);
        let e = conjectured_energy(Variant::Nhaah1, 1.0, 0.3, 0.0);
        assert!((e - c64::new(2.0, 0.0)).norm() < 1e-14);
        // boundary cases follow the <= / < split of each model
        assert_eq!(conjectured_energy(Variant::Nhaah1, 1.0, 1.0, 0.3).im, 0.0);
        assert_eq!(conjectured_energy(Variant::Nhaah2, 1.0, 1.0, 0.3).im, 0.0);

        let curve = conjectured_spectrum(&spec(Variant::Nhaah1, 1.0, 2.0, 4, 1, 4), 4).unwrap();
        assert_eq!(curve.k_grid.len(), 4);
        assert_eq!(curve.k_grid[0], -PI);
        assert!(conjectured_spectrum(&spec(Variant::Nhaah1, 1.0, 2.0, 4, 1, 4), 0).is_err());
    }

    #[test]
    fn analytic_phase_labels() {
        let p = classify_phase(&spec(Variant::Nhaah1, 1.0, 0.5, 4, 1, 4), 1e-9);
        assert_eq!((p.pt, p.localization), (PtPhase::Invariant, Localization::Extended));
        let p = classify_phase(&spec(Variant::Nhaah2, 1.0, 0.5, 4, 1, 4), 1e-9);
        assert_eq!((p.pt, p.localization), (PtPhase::Broken, Localization::Extended));
        let p = classify_phase(&spec(Variant::Nhaah1, 1.0, 1.0, 4, 1, 4), 1e-9);
        assert_eq!((p.pt, p.localization), (PtPhase::Critical, Localization::Critical));
        let p = classify_phase(&spec(Variant::Nhaah2, 1.0, 2.0, 4, 1, 4), 1e-9);
        assert_eq!((p.pt, p.localization), (PtPhase::Invariant, Localization::Localized));
        let p = classify_phase(&spec(Variant::Nhaah1, -1.0, 2.0, 4, 1, 4), 1e-9);
        assert_eq!((p.pt, p.localization), (PtPhase::Broken, Localization::Localized));
    }

    #[test]
    fn csv_layout() {
        let r = analyze(&spec(Variant::Nhaah1, 1.0, 0.0, 4, 1, 4)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("index,ReE,ImE,IPR_j"));
        assert_eq!(csv.lines().count(), 5);
        let json = serde_json::to_value(r.summary_json()).unwrap();
        assert_eq!(json["phase"]["pt"], "PT_invariant");
    }

    #[test]
    fn rejects_non_finite_matrix() {
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 0)] = c64::new(f64::NAN, 0.0);
        let h = HamiltonianMatrix::from_mat(m).unwrap();
        assert!(matches!(eig_right(&h), Err(Error::Eigensolver { .. })));
    }
}
