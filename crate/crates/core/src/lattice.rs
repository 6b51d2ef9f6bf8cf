//! Single-particle Hamiltonians of the two non-Hermitian Aubry-André-Harper
//! chains under periodic boundary conditions.
//!
//! * `NHAAH1`: symmetric hopping `J` and complex onsite potential
//!   `V exp(-i 2π α n)`.
//! * `NHAAH2`: unidirectional hopping `J` (site `n` to `n + 1`) and real
//!   potential `2V cos(2π α n)`.
//!
//! Sites are labelled `n = 1..=L`; row `n - 1` of the matrix belongs to site
//! `n`.

use std::f64::consts::PI;
use std::fmt;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "NHAAH1")]
    Nhaah1,
    #[serde(rename = "NHAAH2")]
    Nhaah2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Nhaah1 => "NHAAH1",
            Variant::Nhaah2 => "NHAAH2",
        }
    }

    pub fn from_index(model: u8) -> Result<Self> {
        match model {
            1 => Ok(Variant::Nhaah1),
            2 => Ok(Variant::Nhaah2),
            other => Err(Error::InvalidArgument(format!(
                "model must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    #[default]
    #[serde(rename = "PBC")]
    Periodic,
}

/// Superlattice wavenumber divided by 2π.
///
/// The rational form is the default; `Real` is the irrational cross-check
/// mode, for which the periodic wrap is not commensurate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Rational { p: u64, q: u64 },
    Real(f64),
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::Rational { p, q } => p as f64 / q as f64,
            Alpha::Real(a) => a,
        }
    }

    /// `exp(-i 2π α n)`, with the phase reduced modulo one period first so
    /// that identical `(α, n)` always give bit-identical entries.
    fn phase(self, n: u64) -> c64 {
        let turns = match self {
            Alpha::Rational { p, q } => ((p as u128 * n as u128) % q as u128) as f64 / q as f64,
            Alpha::Real(a) => (a * n as f64).rem_euclid(1.0),
        };
        let angle = -2.0 * PI * turns;
        c64::new(angle.cos(), angle.sin())
    }

    /// `cos(2π α n)` with the same phase reduction as [`Alpha::phase`].
    fn cosine(self, n: u64) -> f64 {
        self.phase(n).re
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Rational { p, q } => write!(f, "{p}/{q}"),
            Alpha::Real(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub alpha: Alpha,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default, skip_serializing)]
    pub boundary: Boundary,
}

impl ModelSpec {
    /// Model with the Fibonacci approximant of the inverse golden ratio,
    /// `α = F(m-1)/F(m)` with `F(m) = L`.
    pub fn fibonacci(variant: Variant, j: f64, v: f64, l: usize) -> Result<Self> {
        let alpha = fibonacci_approximant(l)?;
        let spec = ModelSpec {
            variant,
            j,
            v,
            alpha,
            l,
            boundary: Boundary::Periodic,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_alpha(variant: Variant, j: f64, v: f64, alpha: Alpha, l: usize) -> Result<Self> {
        let spec = ModelSpec {
            variant,
            j,
            v,
            alpha,
            l,
            boundary: Boundary::Periodic,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Particle number at half filling.
    pub fn half_filling(&self) -> usize {
        self.l / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidSpec(format!("L must be at least 2, got {}", self.l)));
        }
        if !self.j.is_finite() || !self.v.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "J and V must be finite, got J = {}, V = {}",
                self.j, self.v
            )));
        }
        match self.alpha {
            Alpha::Rational { p, q } => {
                if p == 0 || p >= q {
                    return Err(Error::InvalidSpec(format!(
                        "alpha = {p}/{q} must satisfy 0 < p < q"
                    )));
                }
                if gcd(p, q) != 1 {
                    return Err(Error::InvalidSpec(format!(
                        "alpha = {p}/{q} is not in lowest terms"
                    )));
                }
            }
            Alpha::Real(a) => {
                if !a.is_finite() {
                    return Err(Error::InvalidSpec(format!("alpha must be finite, got {a}")));
                }
            }
        }
        Ok(())
    }
}

/// Dense `L x L` single-particle Hamiltonian `H` with `Ĥ = Σ c†_m H_mn c_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix(Mat<c64>);

impl HamiltonianMatrix {
    pub fn from_mat(mat: Mat<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidArgument(format!(
                "Hamiltonian must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(HamiltonianMatrix(mat))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat<c64> {
        &self.0
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.0
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| (self.0[(i, j)] - self.0[(j, i)].conj()).norm() <= tol))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm_l2()
    }
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    let l = spec.l;
    let mut h = Mat::<c64>::zeros(l, l);
    let hop = c64::new(spec.j, 0.0);
    for i in 0..l {
        let n = (i + 1) as u64;
        let next = (i + 1) % l;
        match spec.variant {
            Variant::Nhaah1 => {
                h[(i, next)] = hop;
                h[(next, i)] = hop;
                h[(i, i)] = spec.alpha.phase(n) * spec.v;
            }
            Variant::Nhaah2 => {
                h[(next, i)] = hop;
                h[(i, i)] = c64::new(2.0 * spec.v * spec.alpha.cosine(n), 0.0);
            }
        }
    }
    Ok(HamiltonianMatrix(h))
}

/// Momentum-space form of NHAAH2: hopping `V` in both directions and
/// potential `J exp(-i 2π α ℓ)`, i.e. an NHAAH1 matrix with `J` and `V`
/// exchanged. Exact only when the approximant is commensurate (`q = L`).
pub fn momentum_dual_hamiltonian(spec: &ModelSpec) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    if spec.variant != Variant::Nhaah2 {
        return Err(Error::InvalidSpec(
            "momentum dual is defined for NHAAH2 only".to_string(),
        ));
    }
    match spec.alpha {
        Alpha::Rational { q, .. } if q as usize == spec.l => {}
        _ => {
            return Err(Error::InvalidSpec(format!(
                "momentum dual requires a rational alpha with q = L = {}, got alpha = {}",
                spec.l, spec.alpha
            )))
        }
    }
    build_hamiltonian(&ModelSpec {
        variant: Variant::Nhaah1,
        j: spec.v,
        v: spec.j,
        ..*spec
    })
}

/// Ratio of consecutive Fibonacci numbers `F(m-1)/F(m)` for `L = F(m)`.
pub fn fibonacci_approximant(l: usize) -> Result<Alpha> {
    let (mut prev, mut cur) = (1usize, 2usize);
    let mut below = 0usize;
    while cur < l {
        below = cur;
        let next = prev
            .checked_add(cur)
            .ok_or_else(|| Error::InvalidSpec(format!("L = {l} is too large")))?;
        prev = cur;
        cur = next;
    }
    if cur == l {
        return Ok(Alpha::Rational {
            p: prev as u64,
            q: cur as u64,
        });
    }
    if l < 2 {
        return Err(Error::InvalidSpec(format!(
            "L must be a Fibonacci number of at least 2, got {l}"
        )));
    }
    Err(Error::NotFibonacci {
        requested: l,
        below,
        above: cur,
    })
}

/// Fibonacci numbers in `[lo, hi]`, starting the sequence at 2.
pub fn fibonacci_sizes(lo: usize, hi: usize) -> Vec<usize> {
    let (mut a, mut b) = (1usize, 2usize);
    let mut out = Vec::new();
    while b <= hi {
        if b >= lo {
            out.push(b);
        }
        let next = a + b;
        a = b;
        b = next;
    }
    out
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}
