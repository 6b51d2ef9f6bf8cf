//! Nonunitary evolution of Slater-determinant states.
//!
//! A Gaussian state of `N` fermions on `L` sites is stored as an `L x N`
//! matrix whose columns span the occupied single-particle subspace. The
//! normalized state `exp(-iHt)|Ψ0> / ||exp(-iHt)|Ψ0>||` is the Slater
//! determinant of the columns of `exp(-iht) Ψ0`, and every observable depends
//! only on their span, so the columns may be re-orthonormalized at will.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::lattice::HamiltonianMatrix;

/// Relative QR pivot below which the orbitals are considered rank deficient.
pub const RANK_COLLAPSE_PIVOT: f64 = 1e-12;
/// Maximum admissible `dt * growth bound` for one propagator.
pub const MAX_GROWTH_EXPONENT: f64 = 300.0;

#[derive(Debug, Clone)]
pub struct OrbitalState {
    orbitals: Mat<c64>,
    time: f64,
    orthonormal: bool,
}

impl OrbitalState {
    pub fn new(orbitals: Mat<c64>, time: f64) -> Result<Self> {
        if orbitals.ncols() == 0 || orbitals.ncols() > orbitals.nrows() {
            return Err(Error::InvalidArgument(format!(
                "orbital matrix must be L x N with 1 <= N <= L, got {}x{}",
                orbitals.nrows(),
                orbitals.ncols()
            )));
        }
        Ok(OrbitalState {
            orbitals,
            time,
            orthonormal: false,
        })
    }

    pub fn orbitals(&self) -> MatRef<'_, c64> {
        self.orbitals.as_ref()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn lattice_size(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn particle_count(&self) -> usize {
        self.orbitals.ncols()
    }

    /// Same physical state with orbitals `Ψ G`; `G` must be invertible.
    pub fn right_multiply(&self, gauge: MatRef<'_, c64>) -> OrbitalState {
        OrbitalState {
            orbitals: &self.orbitals * gauge,
            time: self.time,
            orthonormal: false,
        }
    }

    /// Orthonormal basis of the occupied subspace (thin QR).
    pub fn orthonormalized(&self) -> Result<OrbitalState> {
        if self.orthonormal {
            return Ok(self.clone());
        }
        let (q, _) = orthonormalize(self.orbitals.as_ref(), self.time)?;
        Ok(OrbitalState {
            orbitals: q,
            time: self.time,
            orthonormal: true,
        })
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// Site occupations `<n_i>` (diagonal of the correlation matrix).
    pub fn occupations(&self) -> Result<Vec<f64>> {
        let state = self.orthonormalized()?;
        Ok(state
            .orbitals
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect())
    }
}

/// Thin QR of `a`; fails when the smallest relative pivot of `R` is below
/// [`RANK_COLLAPSE_PIVOT`]. Returns `Q` and that pivot ratio.
fn orthonormalize(a: MatRef<'_, c64>, time: f64) -> Result<(Mat<c64>, f64)> {
    let qr = a.qr();
    let r = qr.thin_R();
    let diag: Vec<f64> = (0..r.ncols()).map(|i| r[(i, i)].norm()).collect();
    let largest = diag.iter().copied().fold(0.0f64, f64::max);
    let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let pivot = if largest > 0.0 { smallest / largest } else { 0.0 };
    if !pivot.is_finite() || pivot < RANK_COLLAPSE_PIVOT {
        return Err(Error::RankCollapse { time, pivot });
    }
    Ok((qr.compute_thin_Q(), pivot))
}

/// Charge-density-wave product state: one particle on every even site
/// `2, 4, ..., 2⌊L/2⌋`.
pub fn cdw_orbitals(l: usize) -> Result<OrbitalState> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("L must be at least 2, got {l}")));
    }
    let n = l / 2;
    // site 2r (1-based) is row 2r - 1
    let orbitals = Mat::from_fn(l, n, |i, r| {
        if i == 2 * r + 1 {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    Ok(OrbitalState {
        orbitals,
        time: 0.0,
        orthonormal: true,
    })
}

#[derive(Debug, Clone)]
pub struct Propagator {
    matrix: Mat<c64>,
    dt: f64,
}

impl Propagator {
    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Upper bound on `max |Im E|` (and on the exponential growth rate of
/// `exp(-iHt)`): Gershgorin radius of the anti-Hermitian part `(H - H†)/2i`.
pub fn growth_bound(h: &HamiltonianMatrix) -> f64 {
    let m = h.as_mat();
    let n = h.dim();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| ((m[(i, j)] - m[(j, i)].conj()) * 0.5).norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `U = exp(-i H dt)`.
pub fn make_propagator(h: &HamiltonianMatrix, dt: f64) -> Result<Propagator> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let product = dt * growth_bound(h);
    if product > MAX_GROWTH_EXPONENT {
        return Err(Error::PropagatorOverflow { product });
    }
    let scale = c64::new(0.0, -dt);
    let a = Mat::from_fn(h.dim(), h.dim(), |i, j| h.as_mat()[(i, j)] * scale);
    Ok(Propagator {
        matrix: expm(a.as_ref())?,
        dt,
    })
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).
pub fn expm(a: MatRef<'_, c64>) -> Result<Mat<c64>> {
    const THETA: [(usize, f64); 4] = [
        (3, 1.495585217958292e-2),
        (5, 2.539398330063230e-1),
        (7, 9.504178996162932e-1),
        (9, 2.097847961257068e0),
    ];
    const THETA_13: f64 = 5.371920351148152;

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Integrity("matrix exponential of non-finite matrix".into()));
    }
    for (m, theta) in THETA {
        if norm <= theta {
            return pade(a, m);
        }
    }
    let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = scale(a, 0.5f64.powi(squarings));
    let mut r = pade(scaled.as_ref(), 13)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

fn pade(a: MatRef<'_, c64>, degree: usize) -> Result<Mat<c64>> {
    let b: &[f64] = match degree {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!("unsupported Padé degree {degree}"),
    };
    let n = a.nrows();
    let ident = Mat::<c64>::identity(n, n);
    let a2 = a * a;
    let (odd, even) = if degree < 13 {
        // powers A^0, A^2, ..., A^(degree-1)
        let mut powers = vec![ident, a2.clone()];
        while powers.len() < (degree + 1) / 2 {
            let next = powers.last().unwrap() * &a2;
            powers.push(next);
        }
        let odd = combine(&powers, |k| b[2 * k + 1]);
        let even = combine(&powers, |k| b[2 * k]);
        (a * &odd, even)
    } else {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = combine(&[a2.clone(), a4.clone(), a6.clone()], |k| b[9 + 2 * k]);
        let u_outer = combine(
            &[ident.clone(), a2.clone(), a4.clone(), a6.clone()],
            |k| b[1 + 2 * k],
        );
        let odd = &a6 * &u_inner + &u_outer;
        let v_inner = combine(&[a2.clone(), a4.clone(), a6.clone()], |k| b[8 + 2 * k]);
        let v_outer = combine(&[ident, a2, a4, a6.clone()], |k| b[2 * k]);
        (a * &odd, &a6 * &v_inner + &v_outer)
    };
    let numer = &even + &odd;
    let denom = &even - &odd;
    let r = denom.partial_piv_lu().solve(&numer);
    if r.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::Integrity("Padé denominator is singular".into()));
    }
    Ok(r)
}

fn combine(powers: &[Mat<c64>], coeff: impl Fn(usize) -> f64) -> Mat<c64> {
    let n = powers[0].nrows();
    Mat::from_fn(n, n, |i, j| {
        powers
            .iter()
            .enumerate()
            .fold(c64::new(0.0, 0.0), |acc, (k, p)| acc + p[(i, j)] * coeff(k))
    })
}

fn scale(a: MatRef<'_, c64>, s: f64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Operator 1-norm (largest absolute column sum).
fn one_norm(a: MatRef<'_, c64>) -> f64 {
    a.col_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Integration settings for [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormPolicy {
    /// Longest single propagator step.
    pub max_step: f64,
    /// QR re-orthonormalization after every step.
    pub reorthonormalize: bool,
}

impl Default for RenormPolicy {
    fn default() -> Self {
        RenormPolicy {
            max_step: 1.0,
            reorthonormalize: true,
        }
    }
}

impl RenormPolicy {
    pub fn without_renormalization(max_step: f64) -> Self {
        RenormPolicy {
            max_step,
            reorthonormalize: false,
        }
    }
}

/// Streaming evolution of one state under a fixed Hamiltonian.
pub struct Trajectory<'h> {
    h: &'h HamiltonianMatrix,
    state: OrbitalState,
    policy: RenormPolicy,
    propagators: Vec<Propagator>,
}

impl<'h> Trajectory<'h> {
    pub fn new(h: &'h HamiltonianMatrix, state: OrbitalState, policy: RenormPolicy) -> Result<Self> {
        if state.lattice_size() != h.dim() {
            return Err(Error::InvalidArgument(format!(
                "state has {} sites but the Hamiltonian is {}x{}",
                state.lattice_size(),
                h.dim(),
                h.dim()
            )));
        }
        if !(policy.max_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "max_step must be positive, got {}",
                policy.max_step
            )));
        }
        let state = if policy.reorthonormalize {
            state.orthonormalized()?
        } else {
            state
        };
        Ok(Trajectory {
            h,
            state,
            policy,
            propagators: Vec::new(),
        })
    }

    pub fn state(&self) -> &OrbitalState {
        &self.state
    }

    pub fn into_state(self) -> OrbitalState {
        self.state
    }

    /// Advances to time `t >= current time`, splitting the interval into
    /// equal steps no longer than `max_step`.
    pub fn advance_to(&mut self, t: f64) -> Result<&OrbitalState> {
        let gap = t - self.state.time;
        if gap < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sample times must increase: {} after {}",
                t, self.state.time
            )));
        }
        if gap == 0.0 {
            return Ok(&self.state);
        }
        let steps = (gap / self.policy.max_step - 1e-9).ceil().max(1.0) as usize;
        let dt = gap / steps as f64;
        let k = self.propagator_index(dt)?;
        let start = self.state.time;
        for s in 1..=steps {
            let u = self.propagators[k].matrix();
            let next = u * self.state.orbitals.as_ref();
            let time = if s == steps { t } else { start + s as f64 * dt };
            self.state = if self.policy.reorthonormalize {
                let (q, _) = orthonormalize(next.as_ref(), time)?;
                OrbitalState {
                    orbitals: q,
                    time,
                    orthonormal: true,
                }
            } else {
                OrbitalState {
                    orbitals: next,
                    time,
                    orthonormal: false,
                }
            };
        }
        Ok(&self.state)
    }

    fn propagator_index(&mut self, dt: f64) -> Result<usize> {
        // equal gaps reuse the cached exponential; compare relative to dt
        if let Some(k) = self
            .propagators
            .iter()
            .position(|p| (p.dt - dt).abs() <= 1e-12 * dt)
        {
            return Ok(k);
        }
        self.propagators.push(make_propagator(self.h, dt)?);
        Ok(self.propagators.len() - 1)
    }
}

/// States at each requested time, starting from `state`.
pub fn evolve_trajectory(
    state: OrbitalState,
    h: &HamiltonianMatrix,
    sample_times: &[f64],
    policy: RenormPolicy,
) -> Result<Vec<OrbitalState>> {
    if let Some(&first) = sample_times.first() {
        if first < state.time() {
            return Err(Error::InvalidArgument(format!(
                "first sample time {first} precedes the state time {}",
                state.time()
            )));
        }
    }
    let mut traj = Trajectory::new(h, state, policy)?;
    sample_times
        .iter()
        .map(|&t| traj.advance_to(t).cloned())
        .collect()
}

/// `C_mn = <c†_m c_n>` over the whole lattice.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    entries: Mat<c64>,
}

impl CorrelationMatrix {
    pub fn entries(&self) -> MatRef<'_, c64> {
        self.entries.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    /// Hermitian block restricted to `start..start + len`.
    pub fn block(&self, start: usize, len: usize) -> Result<Mat<c64>> {
        if len == 0 || start + len > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "block {start}..{} outside 0..{}",
                start + len,
                self.dim()
            )));
        }
        Ok(self.entries.submatrix(start, start, len, len).to_owned())
    }

    /// Eigenvalues of the full matrix, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(self.entries.as_ref())
    }
}

pub(crate) fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Integrity(format!("Hermitian eigensolver failed: {e:?}")))
}

/// Correlation matrix `conj(Q Q†)` with `Q` an orthonormal basis of the
/// orbital span, i.e. `conj(Ψ (Ψ†Ψ)^-1 Ψ†)`.
pub fn correlation_matrix(state: &OrbitalState) -> Result<CorrelationMatrix> {
    let q = state.orthonormalized()?;
    let q = q.orbitals();
    let p = q * q.adjoint();
    let l = p.nrows();
    let entries = Mat::from_fn(l, l, |m, n| (p[(m, n)].conj() + p[(n, m)]) * 0.5);
    Ok(CorrelationMatrix { entries })
}

/// CSV rows `t,site,occupation` for each state; sites are 1-based.
pub fn occupation_dump_csv(states: &[OrbitalState]) -> Result<String> {
    let mut out = String::from("t,site,occupation\n");
    for s in states {
        for (i, n) in s.occupations()?.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", s.time(), i + 1, n);
        }
    }
    Ok(out)
}
