//! Entanglement entropy of a contiguous block from the spectrum of the
//! restricted correlation matrix, its time series, steady-state averages,
//! and profiles over the cut position.

use std::fmt::Write as _;
use std::ops::Range;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    cdw_orbitals, hermitian_eigenvalues, CorrelationMatrix, OrbitalState, RenormPolicy, Trajectory,
};
use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, ModelSpec};

/// Occupations are clamped to `[ZETA_CLAMP, 1 - ZETA_CLAMP]` before the
/// entropy formula.
pub const ZETA_CLAMP: f64 = 1e-12;
/// Occupations further than this outside `[0, 1]` indicate a broken state.
pub const ZETA_TOLERANCE: f64 = 1e-6;

/// `-Σ [ζ ln ζ + (1 - ζ) ln(1 - ζ)]` in nats.
pub fn entropy_from_spectrum(zetas: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &z in zetas {
        if !(z >= -ZETA_TOLERANCE && z <= 1.0 + ZETA_TOLERANCE) {
            return Err(Error::Integrity(format!(
                "correlation block eigenvalue {z} outside [0, 1]"
            )));
        }
        let z = z.clamp(ZETA_CLAMP, 1.0 - ZETA_CLAMP);
        s -= z * z.ln() + (1.0 - z) * (1.0 - z).ln();
    }
    Ok(s)
}

/// Entropy of the sites `sites` (0-based rows) from a full correlation matrix.
pub fn entropy_from_correlations(c: &CorrelationMatrix, sites: Range<usize>) -> Result<f64> {
    let block = c.block(sites.start, sites.len())?;
    entropy_from_spectrum(&hermitian_eigenvalues(block.as_ref())?)
}

/// Spectrum of the correlation block on `sites`, computed from an orthonormal
/// orbital basis `Q` as the eigenvalues of `Q_A Q_A†` or, when the block is
/// larger than the particle number, of `Q_A† Q_A` padded with zeros.
pub fn block_spectrum(state: &OrbitalState, sites: Range<usize>) -> Result<Vec<f64>> {
    check_range(&sites, state.lattice_size())?;
    let state = state.orthonormalized()?;
    let q = state.orbitals().subrows(sites.start, sites.len());
    let n = q.ncols();
    if sites.len() <= n {
        hermitian_eigenvalues((q * q.adjoint()).as_ref())
    } else {
        let mut zetas = hermitian_eigenvalues((q.adjoint() * q).as_ref())?;
        zetas.resize(sites.len(), 0.0);
        Ok(zetas)
    }
}

pub fn block_entropy(state: &OrbitalState, sites: Range<usize>) -> Result<f64> {
    entropy_from_spectrum(&block_spectrum(state, sites)?)
}

/// Entropies `S(l)` of the blocks `0..l` for every `l = 1..L-1`.
pub fn cut_profile(state: &OrbitalState) -> Result<Vec<f64>> {
    let state = state.orthonormalized()?;
    let q = state.orbitals();
    let (l_total, n) = (q.nrows(), q.ncols());
    let projector = q * q.adjoint();
    let mut gram: Option<Mat<c64>> = None;
    let mut out = Vec::with_capacity(l_total - 1);
    for l in 1..l_total {
        let zetas = if l <= n {
            hermitian_eigenvalues(projector.submatrix(0, 0, l, l))?
        } else {
            let g = match gram.as_mut() {
                Some(g) => {
                    add_row_outer(g, q.row(l - 1).transpose());
                    g
                }
                None => {
                    let a = q.subrows(0, l);
                    gram.insert(a.adjoint() * a)
                }
            };
            let mut zetas = hermitian_eigenvalues(g.as_ref())?;
            zetas.resize(l, 0.0);
            zetas
        };
        out.push(entropy_from_spectrum(&zetas)?);
    }
    Ok(out)
}

/// `g += conj(r) r^T` for the row `r` of `Q`.
fn add_row_outer(g: &mut Mat<c64>, row: faer::ColRef<'_, c64>) {
    let n = g.nrows();
    for j in 0..n {
        let rj = row[j];
        for i in 0..n {
            g[(i, j)] += row[i].conj() * rj;
        }
    }
}

fn check_range(sites: &Range<usize>, l: usize) -> Result<()> {
    if sites.is_empty() || sites.end > l {
        return Err(Error::InvalidArgument(format!(
            "subsystem {}..{} must be a nonempty range within 0..{l}",
            sites.start, sites.end
        )));
    }
    Ok(())
}

/// Sampling and averaging settings for steady-state runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Total evolution time `T`.
    #[serde(rename = "T")]
    pub total_time: f64,
    /// Spacing of the sample times `0, Δ, 2Δ, ..., T`.
    pub sample_interval: f64,
    /// Averaging window starts at `window_fraction * T`.
    pub window_fraction: f64,
    /// Longest propagator step.
    pub max_step: f64,
    /// Profiles use every `profile_stride`-th sample inside the window.
    pub profile_stride: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            total_time: 1000.0,
            sample_interval: 1.0,
            window_fraction: 0.5,
            max_step: 1.0,
            profile_stride: 25,
        }
    }
}

impl EvolutionConfig {
    pub fn with_total_time(total_time: f64) -> Self {
        EvolutionConfig {
            total_time,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "T must be positive, got {}",
                self.total_time
            )));
        }
        if !(self.sample_interval > 0.0) || self.sample_interval > self.total_time {
            return Err(Error::InvalidArgument(format!(
                "sample interval must lie in (0, T], got {}",
                self.sample_interval
            )));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "window fraction must lie in (0, 1), got {}",
                self.window_fraction
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "max step must be positive, got {}",
                self.max_step
            )));
        }
        if self.profile_stride == 0 {
            return Err(Error::InvalidArgument("profile stride must be at least 1".into()));
        }
        Ok(())
    }

    /// `0, Δ, ..., T` (the last point is `T` itself).
    pub fn sample_times(&self) -> Vec<f64> {
        let count = (self.total_time / self.sample_interval).round() as usize;
        (0..=count)
            .map(|k| {
                if k == count {
                    self.total_time
                } else {
                    k as f64 * self.sample_interval
                }
            })
            .collect()
    }

    pub fn window_start(&self) -> f64 {
        self.window_fraction * self.total_time
    }

    fn in_window(&self, t: f64) -> bool {
        t >= self.window_start() - 1e-9 * self.total_time
    }

    fn policy(&self) -> RenormPolicy {
        RenormPolicy {
            max_step: self.max_step,
            reorthonormalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EESeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub spec: ModelSpec,
    pub subsystem_size: usize,
}

impl EESeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,S\n");
        for (t, s) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{s}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateEE {
    pub value: f64,
    pub window: [f64; 2],
    pub sample_count: usize,
}

/// Half-lattice block `0..⌊L/2⌋`.
pub fn bipartition(l: usize) -> usize {
    l / 2
}

/// Time series `S(t)` of the block of the first `subsystem` sites, starting
/// from the charge-density-wave state.
pub fn entropy_series(spec: &ModelSpec, config: &EvolutionConfig, subsystem: usize) -> Result<EESeries> {
    config.validate()?;
    check_range(&(0..subsystem), spec.l)?;
    let h = build_hamiltonian(spec)?;
    let times = config.sample_times();
    let mut traj = Trajectory::new(&h, cdw_orbitals(spec.l)?, config.policy())?;
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        let state = traj.advance_to(t)?;
        values.push(block_entropy(state, 0..subsystem)?);
    }
    Ok(EESeries {
        times,
        values,
        spec: *spec,
        subsystem_size: subsystem,
    })
}

/// Mean of `S(t)` over `t >= window_start_fraction * T`, where `T` is the
/// last sample time.
pub fn steady_state_entropy(series: &EESeries, window_start_fraction: f64) -> Result<SteadyStateEE> {
    if !(window_start_fraction > 0.0 && window_start_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window fraction must lie in (0, 1), got {window_start_fraction}"
        )));
    }
    let total = series
        .times
        .last()
        .copied()
        .ok_or_else(|| Error::InvalidArgument("empty entropy series".into()))?;
    let start = window_start_fraction * total;
    let window: Vec<f64> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= start - 1e-9 * total.abs())
        .map(|(_, s)| *s)
        .collect();
    if window.is_empty() || !(start < total) {
        return Err(Error::InvalidArgument(format!(
            "no samples in the averaging window [{start}, {total}]"
        )));
    }
    Ok(SteadyStateEE {
        value: mean(&window),
        window: [start, total],
        sample_count: window.len(),
    })
}

/// Steady-state entropy of the first `subsystem` sites, evaluating `S(t)`
/// only inside the averaging window.
pub fn steady_state_for(spec: &ModelSpec, config: &EvolutionConfig, subsystem: usize) -> Result<SteadyStateEE> {
    config.validate()?;
    check_range(&(0..subsystem), spec.l)?;
    let h = build_hamiltonian(spec)?;
    let mut traj = Trajectory::new(&h, cdw_orbitals(spec.l)?, config.policy())?;
    let mut window = Vec::new();
    for t in config.sample_times() {
        let state = traj.advance_to(t)?;
        if config.in_window(t) {
            window.push(block_entropy(state, 0..subsystem)?);
        }
    }
    Ok(SteadyStateEE {
        value: mean(&window),
        window: [config.window_start(), config.total_time],
        sample_count: window.len(),
    })
}

/// `S(L, ⌊L/2⌋)`.
pub fn steady_state_bipartite(spec: &ModelSpec, config: &EvolutionConfig) -> Result<SteadyStateEE> {
    steady_state_for(spec, config, bipartition(spec.l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub spec: ModelSpec,
    /// `(l, S(L, l))` for `l = 1..L-1`.
    pub points: Vec<(usize, f64)>,
    pub window: [f64; 2],
    pub sample_count: usize,
}

impl EntropyProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,S\n");
        for (l, s) in &self.points {
            let _ = writeln!(out, "{l},{s}");
        }
        out
    }

    /// Value at the half cut `⌊L/2⌋`.
    pub fn bipartite(&self) -> f64 {
        self.points[bipartition(self.spec.l) - 1].1
    }
}

/// Steady-state `S(L, l)` for every cut from a single trajectory.
pub fn entropy_profile(spec: &ModelSpec, config: &EvolutionConfig) -> Result<EntropyProfile> {
    config.validate()?;
    let h = build_hamiltonian(spec)?;
    let mut traj = Trajectory::new(&h, cdw_orbitals(spec.l)?, config.policy())?;
    let mut sums = vec![0.0; spec.l - 1];
    let mut count = 0usize;
    let mut in_window = 0usize;
    for t in config.sample_times() {
        let state = traj.advance_to(t)?;
        if !config.in_window(t) {
            continue;
        }
        if in_window % config.profile_stride == 0 {
            for (acc, s) in sums.iter_mut().zip(cut_profile(state)?) {
                *acc += s;
            }
            count += 1;
        }
        in_window += 1;
    }
    Ok(EntropyProfile {
        spec: *spec,
        points: sums
            .into_iter()
            .enumerate()
            .map(|(i, s)| (i + 1, s / count as f64))
            .collect(),
        window: [config.window_start(), config.total_time],
        sample_count: count,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
