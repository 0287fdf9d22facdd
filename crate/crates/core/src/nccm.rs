//! SUB-N cluster states, the NCCM energy functional and its equations of
//! motion, the ground-state solver and linear-response spectra.
//!
//! With `Ŝ = Σ s⁽¹⁾ₙ(b†)ⁿ + Σ s⁽²⁾ₙ(b†)ⁿ⁻¹σ⁺` write `A(x) = Σ s⁽¹⁾ₙxⁿ` and
//! `B(x) = Σ s⁽²⁾ₙxⁿ⁻¹`, `x ≡ b†`. The transformed Hamiltonian acting on the
//! reference closes on two generating polynomials,
//!
//! ```text
//!   H̃|0,↓⟩ = P(b†)|0,↓⟩ + Q(b†)σ⁺|0,↓⟩
//!   P = −ω₀/2 + ω x A′ + 4g(B·U + B′)
//!   Q = ω₀B + ω x B′ + g(U(1 − 4B²) − 4B B′),      U = x + A′
//! ```
//!
//! so the ket residuals are coefficients of `P` and `Q` and everything else
//! (energy, bra gradient, Jacobian, Hessian) follows by linear algebra on
//! their coefficient arrays. [`expectation_by_algebra`] evaluates the same
//! quantities through the symbolic operator algebra as an independent route.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::op_algebra::{
    self, BasisIndex, Monomial, NormalOrderedPoly, SpinFactor,
};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    /// field frequency
    pub omega: f64,
    /// atomic level splitting
    pub omega0: f64,
    /// dipole coupling
    pub g: f64,
}

impl RabiParams {
    pub fn new(omega: f64, omega0: f64, g: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidParams(format!("omega must be positive, got {omega}")));
        }
        if !(omega0 >= 0.0) {
            return Err(Error::InvalidParams(format!("omega0 must be non-negative, got {omega0}")));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(Error::InvalidParams(format!("g must be non-negative, got {g}")));
        }
        Ok(RabiParams { omega, omega0, g })
    }

    /// ω = ω₀ = 1.
    pub fn resonant(g: f64) -> Self {
        RabiParams { omega: 1.0, omega0: 1.0, g }
    }

    pub fn with_g(self, g: f64) -> Self {
        RabiParams { g, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// SUB-N truncation index
    pub n: usize,
    /// only even-n coefficients are evolved and stored
    pub parity_reduced: bool,
}

impl ClusterConfig {
    pub fn new(n: usize, parity_reduced: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("truncation index must be positive".into()));
        }
        if parity_reduced && (n < 2 || n % 2 != 0) {
            return Err(Error::InvalidParams(format!(
                "parity-reduced truncation must be even and >= 2, got {n}"
            )));
        }
        Ok(ClusterConfig { n, parity_reduced })
    }

    pub fn sub(n: usize) -> Self {
        ClusterConfig { n, parity_reduced: false }
    }

    /// Whether excitation number `n` carries a coefficient under this config.
    pub fn stores(&self, n: usize) -> bool {
        n >= 1 && n <= self.n && (!self.parity_reduced || n % 2 == 0)
    }
}

/// Cluster coefficients at time `t`. Entry `n − 1` of each vector holds the
/// coefficient with excitation number `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub t: f64,
    pub s1: Vec<C64>,
    pub s2: Vec<C64>,
    pub st1: Vec<C64>,
    pub st2: Vec<C64>,
    pub k: Option<C64>,
}

impl ClusterState {
    /// The unexcited vacuum: all coefficients zero.
    pub fn vacuum(n: usize, t: f64) -> Self {
        ClusterState {
            t,
            s1: vec![ZERO; n],
            s2: vec![ZERO; n],
            st1: vec![ZERO; n],
            st2: vec![ZERO; n],
            k: None,
        }
    }

    pub fn with_phase(mut self) -> Self {
        self.k = Some(self.k.unwrap_or(ZERO));
        self
    }

    pub fn truncation(&self) -> usize {
        self.s1.len()
    }

    /// `s⁽¹⁾ₙ`, zero outside `1..=N`.
    pub fn s1(&self, n: usize) -> C64 {
        get(&self.s1, n)
    }
    pub fn s2(&self, n: usize) -> C64 {
        get(&self.s2, n)
    }
    pub fn st1(&self, n: usize) -> C64 {
        get(&self.st1, n)
    }
    pub fn st2(&self, n: usize) -> C64 {
        get(&self.st2, n)
    }

    pub fn check_dims(&self) -> Result<()> {
        let n = self.s1.len();
        for v in [&self.s2, &self.st1, &self.st2] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        Ok(())
    }

    /// Largest coefficient magnitude over all odd excitation numbers.
    pub fn max_odd(&self) -> f64 {
        [&self.s1, &self.s2, &self.st1, &self.st2]
            .iter()
            .flat_map(|v| v.iter().step_by(2))
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        [&self.s1, &self.s2, &self.st1, &self.st2]
            .iter()
            .flat_map(|v| v.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Flattened `[s1, s2, st1, st2, (k)]`.
    pub fn to_flat(&self) -> Vec<C64> {
        let mut y = Vec::with_capacity(4 * self.truncation() + 1);
        y.extend_from_slice(&self.s1);
        y.extend_from_slice(&self.s2);
        y.extend_from_slice(&self.st1);
        y.extend_from_slice(&self.st2);
        if let Some(k) = self.k {
            y.push(k);
        }
        y
    }

    pub fn from_flat(n: usize, t: f64, y: &[C64]) -> Self {
        ClusterState {
            t,
            s1: y[0..n].to_vec(),
            s2: y[n..2 * n].to_vec(),
            st1: y[2 * n..3 * n].to_vec(),
            st2: y[3 * n..4 * n].to_vec(),
            k: y.get(4 * n).copied(),
        }
    }
}

fn get(v: &[C64], n: usize) -> C64 {
    if n >= 1 && n <= v.len() {
        v[n - 1]
    } else {
        ZERO
    }
}

pub(crate) fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// `out = a·b` truncated to `out.len()` coefficients.
fn mul_trunc(a: &[C64], b: &[C64], out: &mut [C64]) {
    out.fill(ZERO);
    let len = out.len();
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(len - i) {
            out[i + j] += ai * bj;
        }
    }
}

/// `Σ_k w[k + shift]·f[k]`.
fn corr(w: &[C64], f: &[C64], shift: usize) -> C64 {
    if shift >= w.len() {
        return ZERO;
    }
    w[shift..].iter().zip(f).fold(ZERO, |acc, (&a, &b)| acc + a * b)
}

fn at(v: &[C64], idx: isize) -> C64 {
    if idx >= 0 && (idx as usize) < v.len() {
        v[idx as usize]
    } else {
        ZERO
    }
}

/// Time derivatives of every coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub s1: Vec<C64>,
    pub s2: Vec<C64>,
    pub st1: Vec<C64>,
    pub st2: Vec<C64>,
    pub k: C64,
}

impl Rates {
    /// Sup norm over the cluster coefficients (the phase is excluded).
    pub fn sup_norm(&self) -> f64 {
        [&self.s1, &self.s2, &self.st1, &self.st2]
            .iter()
            .flat_map(|v| v.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Precompiled evaluation of `⟨H⟩`, its gradients and the equations of
/// motion for fixed `(N, params)`. Holds scratch buffers, so clone one per
/// thread.
#[derive(Clone, Debug)]
pub struct EomPlan {
    params: RabiParams,
    config: ClusterConfig,
    fact: Vec<f64>,
    // generating-polynomial coefficients, degree 0..=N
    a_der: Vec<C64>,
    b: Vec<C64>,
    b_der: Vec<C64>,
    u: Vec<C64>,
    bu: Vec<C64>,
    bb: Vec<C64>,
    ubb: Vec<C64>,
    bbd: Vec<C64>,
    p: Vec<C64>,
    q: Vec<C64>,
    w_p: Vec<C64>,
    w_q: Vec<C64>,
}

impl EomPlan {
    pub fn new(params: RabiParams, config: ClusterConfig) -> Self {
        let n = config.n;
        let z = || vec![ZERO; n + 1];
        EomPlan {
            params,
            config,
            fact: factorials(n + 1),
            a_der: z(),
            b: z(),
            b_der: z(),
            u: z(),
            bu: z(),
            bb: vec![ZERO; n],
            ubb: vec![ZERO; n],
            bbd: vec![ZERO; n],
            p: z(),
            q: vec![ZERO; n],
            w_p: z(),
            w_q: vec![ZERO; n],
        }
    }

    pub fn params(&self) -> RabiParams {
        self.params
    }

    pub fn config(&self) -> ClusterConfig {
        self.config
    }

    /// Norm `N_I` for flat index `idx ∈ 0..2N` (bosons first).
    pub fn norm(&self, idx: usize) -> f64 {
        let n = self.config.n;
        if idx < n {
            self.fact[idx + 1]
        } else {
            4.0 * self.fact[idx - n]
        }
    }

    fn load_ket(&mut self, s1: &[C64], s2: &[C64]) {
        let n = self.config.n;
        self.a_der.fill(ZERO);
        self.b.fill(ZERO);
        self.b_der.fill(ZERO);
        for m in 0..n {
            self.a_der[m] = s1[m] * (m + 1) as f64;
            self.b[m] = s2[m];
            if m + 1 < n {
                self.b_der[m] = s2[m + 1] * (m + 1) as f64;
            }
        }
        self.u.copy_from_slice(&self.a_der);
        if n >= 1 {
            self.u[1] += 1.0;
        }
        mul_trunc(&self.b, &self.u, &mut self.bu);
        mul_trunc(&self.b, &self.b, &mut self.bb);
        mul_trunc(&self.u, &self.bb, &mut self.ubb);
        mul_trunc(&self.b, &self.b_der, &mut self.bbd);

        let RabiParams { omega, omega0, g } = self.params;
        for m in 0..=n {
            let mut v = 4.0 * g * (self.bu[m] + self.b_der[m]);
            if m == 0 {
                v -= 0.5 * omega0;
            } else {
                v += s1[m - 1] * (omega * m as f64);
            }
            self.p[m] = v;
        }
        for m in 0..n {
            self.q[m] = self.b[m] * (omega0 + omega * m as f64)
                + (self.u[m] - 4.0 * self.ubb[m] - 4.0 * self.bbd[m]) * g;
        }
    }

    fn load_bra(&mut self, st1: &[C64], st2: &[C64]) {
        let n = self.config.n;
        self.w_p[0] = C64::new(1.0, 0.0);
        for m in 1..=n {
            self.w_p[m] = st1[m - 1] * self.fact[m];
        }
        for m in 0..n {
            self.w_q[m] = st2[m] * (4.0 * self.fact[m]);
        }
    }

    /// `∂⟨H⟩/∂s_J` for all `J` after `load_ket`/`load_bra`.
    fn ket_gradient(&self, d1: &mut [C64], d2: &mut [C64]) {
        let n = self.config.n;
        let RabiParams { omega, omega0, g } = self.params;
        let (wp, wq) = (&self.w_p, &self.w_q);
        for j in 1..=n {
            let jf = j as f64;
            let v = wp[j] * omega
                + corr(wp, &self.b, j - 1) * (4.0 * g)
                + (wq[j - 1] - 4.0 * corr(wq, &self.bb, j - 1)) * g;
            d1[j - 1] = v * jf;

            let mut v = corr(wp, &self.u, j - 1) * (4.0 * g)
                + wq[j - 1] * (omega0 + omega * (jf - 1.0))
                - (8.0 * corr(wq, &self.bu, j - 1) + 4.0 * corr(wq, &self.b_der, j - 1)) * g;
            if j >= 2 {
                v += wp[j - 2] * (4.0 * g * (jf - 1.0));
                v -= corr(wq, &self.b, j - 2) * (4.0 * g * (jf - 1.0));
            }
            d2[j - 1] = v;
        }
    }

    fn energy_loaded(&self) -> C64 {
        let n = self.config.n;
        let mut e = ZERO;
        for m in 0..=n {
            e += self.w_p[m] * self.p[m];
        }
        for m in 0..n {
            e += self.w_q[m] * self.q[m];
        }
        e
    }

    /// Right-hand side on the flat layout `[s1, s2, st1, st2, (k)]`.
    pub fn rhs(&mut self, y: &[C64], dy: &mut [C64]) {
        let n = self.config.n;
        let (s1, rest) = y.split_at(n);
        let (s2, rest) = rest.split_at(n);
        let (st1, rest) = rest.split_at(n);
        let st2 = &rest[..n];
        self.load_ket(s1, s2);
        self.load_bra(st1, st2);

        let (d1, drest) = dy.split_at_mut(n);
        let (d2, drest) = drest.split_at_mut(n);
        for m in 1..=n {
            d1[m - 1] = -I * self.p[m];
            d2[m - 1] = -I * self.q[m - 1];
        }
        let (dt1, drest) = drest.split_at_mut(n);
        let (dt2, dk) = drest.split_at_mut(n);
        self.ket_gradient(dt1, dt2);
        for m in 1..=n {
            dt1[m - 1] *= I / self.fact[m];
            dt2[m - 1] *= I / (4.0 * self.fact[m - 1]);
        }
        if let Some(dk) = dk.first_mut() {
            *dk = -I * self.p[0];
        }
        if self.config.parity_reduced {
            for v in [d1, d2, dt1, dt2] {
                for c in v.iter_mut().step_by(2) {
                    *c = ZERO;
                }
            }
        }
    }

    /// `⟨H⟩ = ⟨Φ₀|Ŝ̃ e^{−Ŝ} H e^{Ŝ}|Φ₀⟩`.
    pub fn energy(&mut self, state: &ClusterState) -> C64 {
        self.load_ket(&state.s1, &state.s2);
        self.load_bra(&state.st1, &state.st2);
        self.energy_loaded()
    }

    /// Ket residuals `R_I = ⟨Φ₀|C_I H̃|Φ₀⟩ / N_I` (bosons first).
    pub fn ket_residuals(&mut self, s1: &[C64], s2: &[C64]) -> Vec<C64> {
        let n = self.config.n;
        self.load_ket(s1, s2);
        let mut r = Vec::with_capacity(2 * n);
        r.extend_from_slice(&self.p[1..=n]);
        r.extend_from_slice(&self.q[..n]);
        r
    }

    /// `⟨Φ₀|H̃|Φ₀⟩`.
    pub fn reference_energy(&mut self, s1: &[C64], s2: &[C64]) -> C64 {
        self.load_ket(s1, s2);
        self.p[0]
    }

    /// `(∂⟨H⟩/∂s̃_I, ∂⟨H⟩/∂s_I)` as flat vectors of length `2N`.
    pub fn gradients(&mut self, state: &ClusterState) -> (Vec<C64>, Vec<C64>) {
        let n = self.config.n;
        let r = self.ket_residuals(&state.s1, &state.s2);
        let d_bra: Vec<C64> = r.iter().enumerate().map(|(i, &v)| v * self.norm(i)).collect();
        self.load_bra(&state.st1, &state.st2);
        let mut d_ket = vec![ZERO; 2 * n];
        let (d1, d2) = d_ket.split_at_mut(n);
        self.ket_gradient(d1, d2);
        (d_bra, d_ket)
    }

    /// `∂R_I/∂s_J`, the ket block of the linearized flow.
    pub fn ket_jacobian(&mut self, s1: &[C64], s2: &[C64]) -> DMatrix<C64> {
        let n = self.config.n;
        self.load_ket(s1, s2);
        let RabiParams { omega, omega0, g } = self.params;
        let mut a = DMatrix::<C64>::zeros(2 * n, 2 * n);
        // row index: boson n ↔ P[n] at row n−1; spin-flip n ↔ Q[n−1] at row N+n−1
        for j in 1..=n {
            let jf = j as f64;
            let shift = j as isize - 1;
            // column s1_J
            for m in 1..=n {
                let mut v = at(&self.b, m as isize - shift) * (4.0 * g * jf);
                if m == j {
                    v += omega * jf;
                }
                a[(m - 1, j - 1)] = v;
            }
            for m in 0..n {
                let mut v = -at(&self.bb, m as isize - shift) * (4.0 * g * jf);
                if m + 1 == j {
                    v += g * jf;
                }
                a[(n + m, j - 1)] = v;
            }
            // column s2_J
            for m in 1..=n {
                let mut v = at(&self.u, m as isize - shift) * (4.0 * g);
                if m + 2 == j {
                    v += 4.0 * g * (jf - 1.0);
                }
                a[(m - 1, n + j - 1)] = v;
            }
            for m in 0..n {
                let mi = m as isize;
                let mut v = -(at(&self.bu, mi - shift) * 8.0
                    + at(&self.b_der, mi - shift) * 4.0
                    + at(&self.b, mi - shift + 1) * (4.0 * (jf - 1.0)))
                    * g;
                if m + 1 == j {
                    v += omega0 + omega * (jf - 1.0);
                }
                a[(n + m, n + j - 1)] = v;
            }
        }
        a
    }

    /// `∂²⟨H⟩/∂s_J∂s_K` (bosons first).
    pub fn ket_hessian(&mut self, state: &ClusterState) -> DMatrix<C64> {
        let n = self.config.n;
        self.load_ket(&state.s1, &state.s2);
        self.load_bra(&state.st1, &state.st2);
        let g = self.params.g;
        let (wp, wq) = (&self.w_p, &self.w_q);
        let mut h = DMatrix::<C64>::zeros(2 * n, 2 * n);
        for j in 1..=n {
            for k in 1..=n {
                let sh = j + k - 2;
                // s1_J, s2_K
                let v = (at(wp, sh as isize) * 4.0 - corr(wq, &self.b, sh) * 8.0) * (g * j as f64);
                h[(j - 1, n + k - 1)] = v;
                h[(n + k - 1, j - 1)] = v;
                // s2_J, s2_K
                let mut v = -corr(wq, &self.u, sh) * 8.0;
                if j + k >= 3 {
                    v -= at(wq, j as isize + k as isize - 3) * (4.0 * (j + k - 2) as f64);
                }
                h[(n + j - 1, n + k - 1)] = v * g;
            }
        }
        h
    }
}

/// `H = ½ω₀σᶻ + ω b†b + g(σ⁺ + σ⁻)(b† + b)` as six canonical monomials.
pub fn hamiltonian_poly(params: RabiParams) -> NormalOrderedPoly {
    let RabiParams { omega, omega0, g } = params;
    let mut terms = vec![
        Monomial::new(0.5 * omega0, 0, 0, SpinFactor::Z),
        Monomial::new(omega, 1, 1, SpinFactor::Identity),
    ];
    for spin in [SpinFactor::Plus, SpinFactor::Minus] {
        terms.push(Monomial::new(g, 1, 0, spin));
        terms.push(Monomial::new(g, 0, 1, spin));
    }
    NormalOrderedPoly::from_monomials(terms)
}

/// Excitation-number operator `b†b + ½(σᶻ + 1)`.
pub fn excitation_number_poly() -> NormalOrderedPoly {
    NormalOrderedPoly::from_monomials([
        Monomial::new(1.0, 1, 1, SpinFactor::Identity),
        Monomial::new(0.5, 0, 0, SpinFactor::Z),
        Monomial::new(0.5, 0, 0, SpinFactor::Identity),
    ])
}

/// The ket cluster operator `Ŝ` of a state.
pub fn cluster_operator(state: &ClusterState) -> NormalOrderedPoly {
    let mut terms = Vec::new();
    for n in 1..=state.truncation() {
        terms.push(Monomial::new(state.s1(n), n as u32, 0, SpinFactor::Identity));
        terms.push(Monomial::new(state.s2(n), n as u32 - 1, 0, SpinFactor::Plus));
    }
    NormalOrderedPoly::from_monomials(terms)
}

/// `⟨X⟩ = ⟨Φ₀|Ŝ̃ e^{−Ŝ} X e^{Ŝ}|Φ₀⟩` through the operator algebra.
pub fn expectation_by_algebra(x: &NormalOrderedPoly, state: &ClusterState) -> Result<C64> {
    let s = cluster_operator(state);
    let xt = op_algebra::similarity_transform(x, &s)?;
    let amp = op_algebra::apply_to_reference(&xt);
    let mut out = amp.reference;
    for n in 1..=state.truncation() {
        let b = BasisIndex::boson(n as u32);
        let f = BasisIndex::spin_flip(n as u32);
        out += state.st1(n) * b.norm() * amp.get(b);
        out += state.st2(n) * f.norm() * amp.get(f);
    }
    Ok(out)
}

/// Transformed Hamiltonian `H̃` for the ket coefficients of `state`.
pub fn transformed_hamiltonian(params: RabiParams, state: &ClusterState) -> Result<NormalOrderedPoly> {
    op_algebra::similarity_transform(&hamiltonian_poly(params), &cluster_operator(state))
}

pub fn energy_functional(state: &ClusterState, params: RabiParams) -> Result<C64> {
    state.check_dims()?;
    Ok(EomPlan::new(params, ClusterConfig::sub(state.truncation())).energy(state))
}

/// `ds_I/dt = −(i/N_I)∂⟨H⟩/∂s̃_I`, `ds̃_I/dt = (i/N_I)∂⟨H⟩/∂s_I`,
/// `dk/dt = −i⟨Φ₀|H̃|Φ₀⟩`.
pub fn eom_rhs(state: &ClusterState, params: RabiParams, config: ClusterConfig) -> Result<Rates> {
    state.check_dims()?;
    if state.truncation() != config.n {
        return Err(Error::DimensionMismatch { expected: config.n, got: state.truncation() });
    }
    let n = config.n;
    let mut plan = EomPlan::new(params, config);
    let y = state.clone().with_phase().to_flat();
    let mut dy = vec![ZERO; y.len()];
    plan.rhs(&y, &mut dy);
    Ok(Rates {
        s1: dy[0..n].to_vec(),
        s2: dy[n..2 * n].to_vec(),
        st1: dy[2 * n..3 * n].to_vec(),
        st2: dy[3 * n..4 * n].to_vec(),
        k: dy[4 * n],
    })
}

/// Newton solver with continuation in `g` from the trivial `g = 0` state.
#[derive(Clone, Debug)]
pub struct GroundStateSolver {
    pub config: ClusterConfig,
    /// continuation step in g
    pub dg: f64,
    /// smallest step tried before giving up
    pub min_dg: f64,
    /// Newton tolerance on the sup norm of the ket residuals
    pub tol: f64,
    pub max_iter: usize,
}

impl GroundStateSolver {
    pub fn new(config: ClusterConfig) -> Self {
        GroundStateSolver { config, dg: 0.01, min_dg: 1e-6, tol: 1e-13, max_iter: 40 }
    }

    pub fn solve(&self, params: RabiParams) -> Result<ClusterState> {
        let start = ClusterState::vacuum(self.config.n, 0.0);
        self.follow(&start, 0.0, params)
    }

    /// Follows the branch through `prev` (a solution at `g_prev`) to `params.g`.
    pub fn follow(&self, prev: &ClusterState, g_prev: f64, params: RabiParams) -> Result<ClusterState> {
        let mut state = prev.clone();
        let mut g = g_prev;
        let mut step = self.dg;
        let dir = if params.g >= g_prev { 1.0 } else { -1.0 };
        while (params.g - g) * dir > 1e-15 {
            let g_next = if ((params.g - g) * dir) <= step { params.g } else { g + dir * step };
            match self.newton(&state, params.with_g(g_next)) {
                Some(s) => {
                    state = s;
                    g = g_next;
                    step = (step * 2.0).min(self.dg);
                }
                None => {
                    step *= 0.5;
                    if step < self.min_dg {
                        return Err(Error::NoConvergence { g: g_next });
                    }
                }
            }
        }
        if g_prev == params.g {
            state = self.newton(&state, params).ok_or(Error::NoConvergence { g: params.g })?;
        }
        Ok(state)
    }

    fn newton(&self, guess: &ClusterState, params: RabiParams) -> Option<ClusterState> {
        let n = self.config.n;
        let mut plan = EomPlan::new(params, self.config);
        let mut x: Vec<C64> = guess.s1.iter().chain(&guess.s2).copied().collect();
        let mut converged = false;
        for _ in 0..self.max_iter {
            let r = plan.ket_residuals(&x[..n], &x[n..]);
            let res = r.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if !res.is_finite() {
                return None;
            }
            if res < self.tol {
                converged = true;
                break;
            }
            let a = plan.ket_jacobian(&x[..n], &x[n..]);
            let dx = a.lu().solve(&DVector::from_vec(r))?;
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi -= d;
            }
        }
        if !converged {
            return None;
        }
        // real Hamiltonian: a genuine branch stays real
        if x.iter().any(|c| c.im.abs() > 1e-10) {
            return None;
        }
        let (s1, s2) = x.split_at(n);
        // bra: Σ_I N_I s̃_I ∂R_I/∂s_J = −∂E/∂s_J
        let a = plan.ket_jacobian(s1, s2);
        let zero_bra = ClusterState {
            t: 0.0,
            s1: s1.to_vec(),
            s2: s2.to_vec(),
            st1: vec![ZERO; n],
            st2: vec![ZERO; n],
            k: None,
        };
        let (_, grad_e) = plan.gradients(&zero_bra);
        let mut m = a.transpose();
        for i in 0..2 * n {
            let w = plan.norm(i);
            m.column_mut(i).scale_mut(w);
        }
        let rhs = -DVector::from_vec(grad_e);
        let st = m.lu().solve(&rhs)?;
        let st: Vec<C64> = st.iter().copied().collect();
        let mut out = zero_bra;
        out.st1 = st[..n].to_vec();
        out.st2 = st[n..].to_vec();
        Some(out)
    }
}

pub fn ground_state_solve(params: RabiParams, config: ClusterConfig) -> Result<ClusterState> {
    GroundStateSolver::new(config).solve(params)
}

/// Linearization of the flow `i·d/dt (s, s̃)` about a stationary state.
#[derive(Clone, Debug)]
pub struct DynamicMatrix {
    pub entries: DMatrix<C64>,
    pub g: f64,
}

pub const STATIONARY_TOL: f64 = 1e-9;

pub fn dynamic_matrix(gs: &ClusterState, params: RabiParams) -> Result<DynamicMatrix> {
    gs.check_dims()?;
    let n = gs.truncation();
    let config = ClusterConfig::sub(n);
    let residual = eom_rhs(gs, params, config)?.sup_norm();
    if residual > STATIONARY_TOL {
        return Err(Error::NotStationary { residual });
    }
    let mut plan = EomPlan::new(params, config);
    let a = plan.ket_jacobian(&gs.s1, &gs.s2);
    let c = plan.ket_hessian(gs);
    let mut hd = DMatrix::<C64>::zeros(4 * n, 4 * n);
    for i in 0..2 * n {
        let ni = plan.norm(i);
        for j in 0..2 * n {
            hd[(i, j)] = a[(i, j)];
            hd[(2 * n + i, j)] = -c[(i, j)] / ni;
            // i ds̃_I/dt = −(1/N_I) Σ_J N_J s̃_J ∂R_J/∂s_I
            hd[(2 * n + i, 2 * n + j)] = -a[(j, i)] * (plan.norm(j) / ni);
        }
    }
    Ok(DynamicMatrix { entries: hd, g: params.g })
}

impl DynamicMatrix {
    /// All `4N` eigenvalues, sorted by real part then imaginary part.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let mut ev = eigenvalues(&self.entries);
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        ev
    }

    /// Positive-real-part eigenvalues (the physical half of the spectrum).
    pub fn excitation_energies(&self) -> Vec<C64> {
        self.eigenvalues().into_iter().filter(|e| e.re > 0.0).collect()
    }
}

pub fn max_imag(ev: &[C64]) -> f64 {
    ev.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
}

/// Eigenvalues of a general square matrix. Real matrices go through the real
/// Schur form so real eigenvalues stay exactly real.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    if m.iter().all(|c| c.im == 0.0) {
        let re = m.map(|c| c.re);
        return re.complex_eigenvalues().iter().copied().collect();
    }
    let schur = nalgebra::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    let dim = t.nrows();
    let mut out = Vec::with_capacity(dim);
    let mut i = 0;
    while i < dim {
        if i + 1 < dim && t[(i + 1, i)].norm() > 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5).powi(2) + b * c;
            let root = disc.sqrt();
            out.push(half_tr + root);
            out.push(half_tr - root);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out
}

/// Spectrum of the dynamic matrix at one coupling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub g: f64,
    pub n: usize,
    pub eigenvalues: Vec<C64>,
}

/// Threshold on `|Im λ|` signalling a complex excitation spectrum.
pub const IMAG_TOL: f64 = 1e-8;

/// Scan settings for [`critical_coupling`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CriticalScan {
    pub g_lo: f64,
    pub g_hi: f64,
    pub step: f64,
    pub imag_tol: f64,
    /// bisection width
    pub resolution: f64,
}

impl Default for CriticalScan {
    fn default() -> Self {
        CriticalScan { g_lo: 0.0, g_hi: 1.0, step: 0.01, imag_tol: IMAG_TOL, resolution: 1e-4 }
    }
}

/// Smallest coupling at which the SUB-N linear-response spectrum turns
/// complex. Losing the real ground-state branch also counts as breakdown:
/// at that fold a pair `±λ` of the dynamic matrix meets at zero.
pub fn critical_coupling(config: ClusterConfig, omega: f64, omega0: f64, scan: CriticalScan) -> Result<f64> {
    let solver = GroundStateSolver::new(ClusterConfig::sub(config.n));
    let base = RabiParams { omega, omega0, g: scan.g_lo };
    // Some(state) when the spectrum at g is real
    let healthy = |prev: &ClusterState, g_prev: f64, g: f64| -> Option<ClusterState> {
        let params = base.with_g(g);
        let gs = solver.follow(prev, g_prev, params).ok()?;
        let hd = dynamic_matrix(&gs, params).ok()?;
        (max_imag(&hd.eigenvalues()) <= scan.imag_tol).then_some(gs)
    };

    let start = solver.solve(base).map_err(|_| Error::NotFoundInRange { lo: scan.g_lo, hi: scan.g_hi })?;
    let mut good = healthy(&start, scan.g_lo, scan.g_lo)
        .ok_or(Error::NotFoundInRange { lo: scan.g_lo, hi: scan.g_hi })?;
    let mut g_good = scan.g_lo;
    let mut g_bad = None;
    let steps = ((scan.g_hi - scan.g_lo) / scan.step).ceil() as usize;
    for i in 1..=steps {
        let g = (scan.g_lo + i as f64 * scan.step).min(scan.g_hi);
        match healthy(&good, g_good, g) {
            Some(s) => {
                good = s;
                g_good = g;
            }
            None => {
                g_bad = Some(g);
                break;
            }
        }
    }
    let mut g_bad = g_bad.ok_or(Error::NotFoundInRange { lo: scan.g_lo, hi: scan.g_hi })?;
    while g_bad - g_good > scan.resolution {
        let mid = 0.5 * (g_good + g_bad);
        match healthy(&good, g_good, mid) {
            Some(s) => {
                good = s;
                g_good = mid;
            }
            None => g_bad = mid,
        }
    }
    Ok(0.5 * (g_good + g_bad))
}
