//! Brute-force many-body reference for tiny lattices: the fixed particle
//! number Fock sector, nonunitary evolution of the charge-density-wave
//! state, and entropies from the reduced density matrix.
//!
//! Nothing here shares code with the orbital pipeline beyond the
//! single-particle Hamiltonian and a Hermitian eigenvalue routine.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, HamiltonianMatrix, ModelSpec};

pub const MAX_ORACLE_SITES: usize = 10;
const TAYLOR_STEP: f64 = 0.05;
const TAYLOR_TERMS: usize = 24;

/// Occupation bitstrings with a fixed number of ones, ascending. Bit `n`
/// is site `n` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    states: Vec<u32>,
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_ORACLE_SITES {
            return Err(Error::InvalidArgument(format!(
                "the exact oracle supports 1..={MAX_ORACLE_SITES} sites, got L = {sites}"
            )));
        }
        if particles > sites {
            return Err(Error::InvalidArgument(format!(
                "{particles} particles do not fit on {sites} sites"
            )));
        }
        let states = (0u32..1 << sites)
            .filter(|s| s.count_ones() as usize == particles)
            .collect();
        Ok(FockBasis { sites, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    fn index_of(&self, s: u32) -> usize {
        self.states.binary_search(&s).expect("state outside the sector")
    }

    /// `c_m† c_n |s⟩ = sign |s'⟩`, or `None` when it vanishes.
    fn hop(s: u32, m: usize, n: usize) -> Option<(i32, u32)> {
        if s & (1 << n) == 0 {
            return None;
        }
        let removed = s & !(1 << n);
        let mut sign = parity_below(s, n);
        if removed & (1 << m) != 0 {
            return None;
        }
        sign *= parity_below(removed, m);
        Some((sign, removed | (1 << m)))
    }

    /// Matrix of `Σ_mn h_mn c_m† c_n` in this sector.
    pub fn many_body_matrix(&self, h: &HamiltonianMatrix) -> Mat<c64> {
        let h = h.as_mat();
        let dim = self.len();
        let mut out = Mat::<c64>::zeros(dim, dim);
        for (col, &s) in self.states.iter().enumerate() {
            for m in 0..self.sites {
                for n in 0..self.sites {
                    let amp = h[(m, n)];
                    if amp == c64::new(0.0, 0.0) {
                        continue;
                    }
                    if let Some((sign, target)) = Self::hop(s, m, n) {
                        out[(self.index_of(target), col)] += amp * f64::from(sign);
                    }
                }
            }
        }
        out
    }
}

fn parity_below(s: u32, site: usize) -> i32 {
    if (s & ((1u32 << site) - 1)).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Normalized many-body state in a fixed-particle-number sector.
#[derive(Debug, Clone)]
pub struct FockState {
    basis: FockBasis,
    amplitudes: Vec<c64>,
}

impl FockState {
    /// One particle on every second site, rows `1, 3, 5, ...`.
    pub fn charge_density_wave(sites: usize) -> Result<Self> {
        let particles = sites / 2;
        let basis = FockBasis::new(sites, particles)?;
        let occupied: u32 = (0..particles).map(|r| 1u32 << (2 * r + 1)).sum();
        let mut amplitudes = vec![c64::new(0.0, 0.0); basis.len()];
        amplitudes[basis.index_of(occupied)] = c64::new(1.0, 0.0);
        Ok(FockState { basis, amplitudes })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    /// `e^{-iHt}|ψ⟩ / ‖e^{-iHt}|ψ⟩‖` by short Taylor steps, normalizing
    /// after each step.
    pub fn evolve(&mut self, h: &HamiltonianMatrix, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("evolution time must be ≥ 0, got {t}")));
        }
        let hmb = self.basis.many_body_matrix(h);
        let steps = (t / TAYLOR_STEP).ceil() as usize;
        if steps == 0 {
            return Ok(());
        }
        let dt = t / steps as f64;
        let minus_i_dt = c64::new(0.0, -dt);
        for _ in 0..steps {
            let mut term = self.amplitudes.clone();
            let mut next = term.clone();
            for k in 1..=TAYLOR_TERMS {
                let scale = minus_i_dt / k as f64;
                term = mat_vec(&hmb, &term).into_iter().map(|x| x * scale).collect();
                for (acc, x) in next.iter_mut().zip(&term) {
                    *acc += *x;
                }
            }
            let norm = next.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Integrity(format!("many-body norm became {norm}")));
            }
            self.amplitudes = next.into_iter().map(|x| x / norm).collect();
        }
        Ok(())
    }

    /// Eigenvalues of the reduced density matrix of sites `0..l`.
    pub fn reduced_spectrum(&self, l: usize) -> Result<Vec<f64>> {
        let sites = self.basis.sites;
        if l > sites {
            return Err(Error::InvalidArgument(format!("cut {l} beyond {sites} sites")));
        }
        // Sites 0..l come first in the mode ordering, so the split into
        // subsystem and environment bits carries no extra fermionic signs.
        let mask = (1u32 << l) - 1;
        let mut amp = Mat::<c64>::zeros(1 << l, 1 << (sites - l));
        for (&s, &a) in self.basis.states.iter().zip(&self.amplitudes) {
            amp[((s & mask) as usize, (s >> l) as usize)] = a;
        }
        let rho = &amp * amp.adjoint();
        rho.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolver {
                context: "reduced density matrix".into(),
                reason: format!("{e:?}"),
            })
    }

    /// `-Tr ρ_A ln ρ_A` for `A = 0..l`.
    pub fn entropy(&self, l: usize) -> Result<f64> {
        Ok(self
            .reduced_spectrum(l)?
            .into_iter()
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum())
    }

    /// `C_mn = ⟨c_m† c_n⟩`.
    pub fn correlation(&self) -> Mat<c64> {
        let sites = self.basis.sites;
        let mut c = Mat::<c64>::zeros(sites, sites);
        for (col, &s) in self.basis.states.iter().enumerate() {
            let a = self.amplitudes[col];
            for m in 0..sites {
                for n in 0..sites {
                    if let Some((sign, target)) = FockBasis::hop(s, m, n) {
                        let b = self.amplitudes[self.basis.index_of(target)];
                        c[(m, n)] += b.conj() * a * f64::from(sign);
                    }
                }
            }
        }
        c
    }
}

fn mat_vec(m: &Mat<c64>, v: &[c64]) -> Vec<c64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Many-body state at time `t` starting from the charge-density-wave state.
pub fn exact_state(spec: &ModelSpec, t: f64) -> Result<FockState> {
    if spec.l > MAX_ORACLE_SITES {
        return Err(Error::InvalidArgument(format!(
            "the exact oracle supports L ≤ {MAX_ORACLE_SITES}, got L = {}",
            spec.l
        )));
    }
    let h = build_hamiltonian(spec)?;
    let mut state = FockState::charge_density_wave(spec.l)?;
    state.evolve(&h, t)?;
    Ok(state)
}

/// Entropy of sites `0..l` at time `t`.
pub fn exact_entropy(spec: &ModelSpec, t: f64, l: usize) -> Result<f64> {
    exact_state(spec, t)?.entropy(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Alpha, Variant};

    fn spec(variant: Variant, j: f64, v: f64, l: usize) -> ModelSpec {
        ModelSpec::fibonacci(variant, j, v, l).unwrap_or_else(|_| {
            ModelSpec::with_alpha(variant, j, v, Alpha::Rational { p: 1, q: 3 }, l).unwrap()
        })
    }

    #[test]
    fn sector_dimension_and_order() {
        let b = FockBasis::new(6, 3).unwrap();
        assert_eq!(b.len(), 20);
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(FockBasis::new(10, 5).unwrap().len(), 252);
        assert!(FockBasis::new(11, 5).is_err());
    }

    #[test]
    fn hop_signs() {
        // c_2† c_0 on |0,1 occupied⟩ passes site 1
        assert_eq!(FockBasis::hop(0b011, 2, 0), Some((-1, 0b110)));
        assert_eq!(FockBasis::hop(0b001, 1, 0), Some((1, 0b010)));
        assert_eq!(FockBasis::hop(0b011, 1, 0), None);
        assert_eq!(FockBasis::hop(0b010, 1, 1), Some((1, 0b010)));
    }

    #[test]
    fn oversized_lattice_rejected() {
        let s = ModelSpec::fibonacci(Variant::Nhaah1, 1.0, 0.5, 13).unwrap();
        assert!(matches!(exact_entropy(&s, 1.0, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn product_state_at_zero_time() {
        let s = spec(Variant::Nhaah2, 1.0, 2.0, 8);
        for l in 0..=8 {
            assert!(exact_entropy(&s, 0.0, l).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn two_site_oscillation() {
        let s = ModelSpec::with_alpha(Variant::Nhaah1, 1.0, 0.0, Alpha::Rational { p: 1, q: 2 }, 2).unwrap();
        for t in [0.3, 0.7, 1.2, 2.9] {
            let p = f64::cos(t).powi(2);
            let want = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
            assert!((exact_entropy(&s, t, 1).unwrap() - want).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn complement_has_equal_entropy() {
        let s = spec(Variant::Nhaah1, 1.0, 2.0, 8);
        let state = exact_state(&s, 5.0).unwrap();
        let c = state.correlation();
        let trace: c64 = (0..8).map(|i| c[(i, i)]).sum();
        assert!((trace.re - 4.0).abs() < 1e-12 && trace.im.abs() < 1e-12);
        let full = state.entropy(8).unwrap();
        assert!(full.abs() < 1e-10);
        // S(0..l) = S(l..L): reorder so the environment comes first
        let mut flipped = state.clone();
        let sites = 8;
        let mut pairs: Vec<(u32, c64)> = state
            .basis
            .states
            .iter()
            .zip(&state.amplitudes)
            .map(|(&s, &a)| {
                let r = (0..sites).fold(0u32, |acc, i| acc | (((s >> i) & 1) << (sites - 1 - i)));
                // reversing the mode order of k fermions gives (-1)^{k(k-1)/2}
                let k = s.count_ones();
                let sign = if (k * (k - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                (r, a * sign)
            })
            .collect();
        pairs.sort_by_key(|p| p.0);
        flipped.amplitudes = pairs.into_iter().map(|p| p.1).collect();
        for l in 1..8 {
            let a = state.entropy(l).unwrap();
            let b = flipped.entropy(sites - l).unwrap();
            assert!((a - b).abs() < 1e-10, "l={l}");
        }
    }
}
