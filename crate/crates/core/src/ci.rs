//! Exact diagonalization in a truncated Fock ⊗ spin basis.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::nccm::RabiParams;
use crate::observables::{variances_from_moments, ObservableRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Down,
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// `|n, spin⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockSpin {
    pub n: usize,
    pub spin: Spin,
}

impl FockSpin {
    /// Eigenvalue of `b†b + ½(σᶻ + 1)`.
    pub fn excitation(&self) -> usize {
        self.n + usize::from(self.spin == Spin::Up)
    }

    pub fn parity(&self) -> Parity {
        if self.excitation().is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sigma_z(&self) -> f64 {
        match self.spin {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CIBasis {
    pub states: Vec<FockSpin>,
    pub parity: Option<Parity>,
    pub n_max: usize,
    #[serde(skip)]
    index: HashMap<FockSpin, usize>,
}

impl CIBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: FockSpin) -> Option<usize> {
        self.index.get(&s).copied()
    }

    /// Unit vector on `|0,↓⟩`.
    pub fn vacuum(&self) -> CIVector {
        let mut amp = DVector::<C64>::zeros(self.len());
        if let Some(i) = self.index_of(FockSpin { n: 0, spin: Spin::Down }) {
            amp[i] = C64::new(1.0, 0.0);
        }
        CIVector { amplitudes: amp }
    }
}

/// States `|n,↓⟩, |n,↑⟩` with `n ≤ n_max`, optionally restricted to one
/// parity sector.
pub fn build_basis(n_max: usize, parity: Option<Parity>) -> CIBasis {
    let states: Vec<FockSpin> = (0..=n_max)
        .flat_map(|n| [FockSpin { n, spin: Spin::Down }, FockSpin { n, spin: Spin::Up }])
        .filter(|s| parity.is_none_or(|p| s.parity() == p))
        .collect();
    let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    CIBasis { states, parity, n_max, index }
}

/// The `N`-state basis paired with SUB-`N` in the inversion comparison: even
/// parity, photon number below `N`, i.e. `|n−2,↓⟩, |n−1,↑⟩` for even
/// `n ≤ N`.
pub fn matched_basis(n: usize) -> CIBasis {
    build_basis(n.saturating_sub(1), Some(Parity::Even))
}

/// `H|s⟩` as `(state, amplitude)` pairs, before truncation.
fn apply_h(params: RabiParams, s: FockSpin) -> Vec<(FockSpin, f64)> {
    let RabiParams { omega, omega0, g } = params;
    let mut out = vec![(s, 0.5 * omega0 * s.sigma_z() + omega * s.n as f64)];
    // σ± carry a factor 2: σ⁺|↓⟩ = 2|↑⟩, σ⁻|↑⟩ = 2|↓⟩
    let flipped = match s.spin {
        Spin::Down => Spin::Up,
        Spin::Up => Spin::Down,
    };
    out.push((FockSpin { n: s.n + 1, spin: flipped }, 2.0 * g * ((s.n + 1) as f64).sqrt()));
    if s.n > 0 {
        out.push((FockSpin { n: s.n - 1, spin: flipped }, 2.0 * g * (s.n as f64).sqrt()));
    }
    out
}

pub fn build_hamiltonian(params: RabiParams, basis: &CIBasis) -> DMatrix<f64> {
    let dim = basis.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (j, &s) in basis.states.iter().enumerate() {
        for (target, amp) in apply_h(params, s) {
            if let Some(i) = basis.index_of(target) {
                h[(i, j)] += amp;
            }
        }
    }
    h
}

/// Parity operator on the basis (diagonal ±1).
pub fn parity_matrix(basis: &CIBasis) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        basis.len(),
        basis.states.iter().map(|s| if s.parity() == Parity::Even { 1.0 } else { -1.0 }),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CIVector {
    pub amplitudes: DVector<C64>,
}

impl CIVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Hamiltonian with its cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct CISystem {
    pub params: RabiParams,
    pub basis: CIBasis,
    pub hamiltonian: DMatrix<f64>,
    /// ascending
    pub energies: Vec<f64>,
    /// eigenvectors as columns, aligned with `energies`
    pub vectors: DMatrix<f64>,
}

impl CISystem {
    pub fn new(params: RabiParams, basis: CIBasis) -> Self {
        let hamiltonian = build_hamiltonian(params, &basis);
        let eig = SymmetricEigen::new(hamiltonian.clone());
        let mut order: Vec<usize> = (0..basis.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_columns(
            &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
        );
        CISystem { params, basis, hamiltonian, energies, vectors }
    }

    /// `ψ(t) = Σₙ ⟨uₙ|ψ₀⟩ e^{−iEₙt} |uₙ⟩`.
    pub fn evolve(&self, psi0: &CIVector, t: f64) -> CIVector {
        let v = self.vectors.map(|x| C64::new(x, 0.0));
        let mut overlaps = v.adjoint() * &psi0.amplitudes;
        for (c, &e) in overlaps.iter_mut().zip(&self.energies) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        CIVector { amplitudes: v * overlaps }
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn energy(&self, psi: &CIVector) -> f64 {
        let h = self.hamiltonian.map(|x| C64::new(x, 0.0));
        psi.amplitudes.dotc(&(h * &psi.amplitudes)).re
    }

    /// Excitation energies `Eₙ − E₀` above the lowest level.
    pub fn excitation_energies(&self) -> Vec<f64> {
        let e0 = self.energies[0];
        self.energies[1..].iter().map(|e| e - e0).collect()
    }
}

pub fn evolve_exact(psi0: &CIVector, params: RabiParams, basis: &CIBasis, t: f64) -> CIVector {
    CISystem::new(params, basis.clone()).evolve(psi0, t)
}

/// Sorted eigenvalues of the truncated Hamiltonian.
pub fn ci_spectrum(params: RabiParams, basis: &CIBasis) -> Vec<f64> {
    CISystem::new(params, basis.clone()).energies
}

/// Exact observables on a CI state, in the same record as the NCCM ones.
pub fn ci_observables(psi: &CIVector, basis: &CIBasis, t: f64, omega: f64) -> ObservableRecord {
    let amp = |s: FockSpin| basis.index_of(s).map_or(C64::new(0.0, 0.0), |i| psi.amplitudes[i]);
    let mut sz = 0.0;
    let mut n_bar = 0.0;
    let mut bdbdbb = 0.0;
    let mut b = C64::new(0.0, 0.0);
    let mut b2 = C64::new(0.0, 0.0);
    for (i, &s) in basis.states.iter().enumerate() {
        let a = psi.amplitudes[i];
        let p = a.norm_sqr();
        let n = s.n as f64;
        sz += p * s.sigma_z();
        n_bar += p * n;
        bdbdbb += p * n * (n - 1.0);
        if s.n >= 1 {
            b += amp(FockSpin { n: s.n - 1, spin: s.spin }).conj() * a * n.sqrt();
        }
        if s.n >= 2 {
            b2 += amp(FockSpin { n: s.n - 2, spin: s.spin }).conj() * a * (n * (n - 1.0)).sqrt();
        }
    }
    let n_bar = C64::new(n_bar, 0.0);
    let q = variances_from_moments(n_bar, b, b2, t, omega);
    ObservableRecord {
        t,
        sigma_z: C64::new(sz, 0.0),
        n_bar,
        bdbdbb: C64::new(bdbdbb, 0.0),
        y: C64::new(bdbdbb - n_bar.re * n_bar.re, 0.0),
        b_expect: b,
        b2_expect: b2,
        var_q1: q.var_q1,
        var_q2: q.var_q2,
        f_value: C64::new((sz + 1.0) / 8.0, 0.0),
    }
}
