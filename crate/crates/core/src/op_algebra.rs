//! Normal-ordered polynomials in the boson operators `b`, `b†` and the
//! pseudo-spin operators `σ⁺`, `σ⁻`, `σᶻ`.
//!
//! The pseudo-spin matrices use the factor-2 convention
//!
//! ```text
//!   σᶻ = [[1, 0], [0, -1]]   σ⁺ = [[0, 2], [0, 0]]   σ⁻ = [[0, 0], [2, 0]]
//! ```
//!
//! so `σ⁺|↓⟩ = 2|↑⟩` and `σ⁻σ⁺ = 2 − 2σᶻ`. Every monomial is kept in the
//! canonical form `c · (b†)^k b^l · spin`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are removed after every product.
pub const DROP_TOL: f64 = 1e-15;

/// Maximum nested-commutator order tried by [`similarity_transform`].
pub const BCH_ORDER_CAP: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpinFactor {
    Identity,
    Plus,
    Minus,
    Z,
}

impl SpinFactor {
    pub const ALL: [SpinFactor; 4] =
        [SpinFactor::Identity, SpinFactor::Plus, SpinFactor::Minus, SpinFactor::Z];

    fn index(self) -> usize {
        match self {
            SpinFactor::Identity => 0,
            SpinFactor::Plus => 1,
            SpinFactor::Minus => 2,
            SpinFactor::Z => 3,
        }
    }

    /// The literal 2×2 matrix, row-major.
    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            SpinFactor::Identity => [[1.0, 0.0], [0.0, 1.0]],
            SpinFactor::Plus => [[0.0, 2.0], [0.0, 0.0]],
            SpinFactor::Minus => [[0.0, 0.0], [2.0, 0.0]],
            SpinFactor::Z => [[1.0, 0.0], [0.0, -1.0]],
        }
    }

    /// Change of excitation number (`+1` for σ⁺, `-1` for σ⁻).
    fn excitation_shift(self) -> i64 {
        match self {
            SpinFactor::Plus => 1,
            SpinFactor::Minus => -1,
            _ => 0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            SpinFactor::Identity => "1",
            SpinFactor::Plus => "sp",
            SpinFactor::Minus => "sm",
            SpinFactor::Z => "sz",
        }
    }
}

/// Expansion of a 2×2 matrix in the basis {1, σ⁺, σ⁻, σᶻ}.
fn decompose(m: [[f64; 2]; 2]) -> [f64; 4] {
    [
        0.5 * (m[0][0] + m[1][1]),
        0.5 * m[0][1],
        0.5 * m[1][0],
        0.5 * (m[0][0] - m[1][1]),
    ]
}

fn matmul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `SPIN_TABLE[a][b]` holds the coefficients of `a·b` in the basis
/// {1, σ⁺, σ⁻, σᶻ}, generated from the explicit matrices.
fn spin_table() -> &'static [[[f64; 4]; 4]; 4] {
    static TABLE: OnceLock<[[[f64; 4]; 4]; 4]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[[0.0; 4]; 4]; 4];
        for a in SpinFactor::ALL {
            for b in SpinFactor::ALL {
                t[a.index()][b.index()] = decompose(matmul2(a.matrix(), b.matrix()));
            }
        }
        t
    })
}

/// Product of two spin factors as a list of `(coefficient, factor)` pairs.
pub fn spin_product(a: SpinFactor, b: SpinFactor) -> impl Iterator<Item = (f64, SpinFactor)> {
    let row = spin_table()[a.index()][b.index()];
    SpinFactor::ALL
        .into_iter()
        .map(move |s| (row[s.index()], s))
        .filter(|(c, _)| *c != 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: C64,
    /// power of b†
    pub k: u32,
    /// power of b
    pub l: u32,
    pub spin: SpinFactor,
}

impl Monomial {
    pub fn new(coeff: impl Into<C64>, k: u32, l: u32, spin: SpinFactor) -> Self {
        Monomial { coeff: coeff.into(), k, l, spin }
    }

    /// Eigenvalue of the parity operator Π = exp(iπN) on this monomial's
    /// excitation-number change.
    pub fn parity(&self) -> i8 {
        let shift = self.k as i64 - self.l as i64 + self.spin.excitation_shift();
        if shift.rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }
}

type Key = (u32, u32, SpinFactor);

/// A finite sum of canonical monomials keyed by `(k, l, spin)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormalOrderedPoly {
    terms: BTreeMap<Key, C64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

impl NormalOrderedPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::from_monomial(Monomial::new(1.0, 0, 0, SpinFactor::Identity))
    }

    pub fn from_monomial(m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m.coeff, m.k, m.l, m.spin);
        p.prune(DROP_TOL);
        p
    }

    pub fn from_monomials(ms: impl IntoIterator<Item = Monomial>) -> Self {
        let mut p = Self::zero();
        for m in ms {
            p.add_term(m.coeff, m.k, m.l, m.spin);
        }
        p.prune(DROP_TOL);
        p
    }

    pub fn create(power: u32) -> Self {
        Self::from_monomial(Monomial::new(1.0, power, 0, SpinFactor::Identity))
    }

    pub fn annihilate(power: u32) -> Self {
        Self::from_monomial(Monomial::new(1.0, 0, power, SpinFactor::Identity))
    }

    pub fn spin(s: SpinFactor) -> Self {
        Self::from_monomial(Monomial::new(1.0, 0, 0, s))
    }

    fn add_term(&mut self, c: C64, k: u32, l: u32, spin: SpinFactor) {
        *self.terms.entry((k, l, spin)).or_insert(C64::new(0.0, 0.0)) += c;
    }

    /// Removes terms whose coefficient magnitude is below `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() >= tol);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `(b†)^k b^l spin`, zero when absent.
    pub fn coeff(&self, k: u32, l: u32, spin: SpinFactor) -> C64 {
        self.terms.get(&(k, l, spin)).copied().unwrap_or_default()
    }

    /// Terms in `(k, l, spin)` order.
    pub fn monomials(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(|(&(k, l, spin), &coeff)| Monomial { coeff, k, l, spin })
    }

    pub fn scale(&self, c: impl Into<C64>) -> Self {
        let c = c.into();
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out.prune(DROP_TOL);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for m in other.monomials() {
            out.add_term(m.coeff, m.k, m.l, m.spin);
        }
        out.prune(DROP_TOL);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Largest coefficient magnitude of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut diff = self.clone();
        for m in other.monomials() {
            diff.add_term(-m.coeff, m.k, m.l, m.spin);
        }
        diff.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// True when every monomial is a pure creation operator (no `b`, spin
    /// factor 1 or σ⁺), so that all terms commute with each other.
    pub fn is_pure_creation(&self) -> bool {
        self.monomials()
            .all(|m| m.l == 0 && matches!(m.spin, SpinFactor::Identity | SpinFactor::Plus))
    }

    /// Dagger: reverses operator order and conjugates coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for m in self.monomials() {
            // (c b†^k b^l s)† = c* s† b†^l b^k, spin commutes with the bosons
            let spin = match m.spin {
                SpinFactor::Plus => SpinFactor::Minus,
                SpinFactor::Minus => SpinFactor::Plus,
                s => s,
            };
            out.add_term(m.coeff.conj(), m.l, m.k, spin);
        }
        out
    }

    /// Debug dump: one `coeff * bdag^k b^l spin` line per term.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for m in self.monomials() {
            out.push_str(&format!(
                "({:.12e},{:.12e}) * bdag^{} b^{} {}\n",
                m.coeff.re,
                m.coeff.im,
                m.k,
                m.l,
                m.spin.label()
            ));
        }
        out
    }
}

impl fmt::Display for NormalOrderedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Operator product `p·q` in canonical normal order.
pub fn multiply(p: &NormalOrderedPoly, q: &NormalOrderedPoly) -> NormalOrderedPoly {
    let mut out = NormalOrderedPoly::zero();
    for a in p.monomials() {
        for b in q.monomials() {
            let c = a.coeff * b.coeff;
            // b^l b†^k = Σ_j C(l,j) C(k,j) j! b†^{k-j} b^{l-j}
            let jmax = a.l.min(b.k);
            for j in 0..=jmax {
                let w = binomial(a.l, j) * binomial(b.k, j) * factorial(j);
                let k = a.k + b.k - j;
                let l = a.l - j + b.l;
                for (sc, spin) in spin_product(a.spin, b.spin) {
                    out.add_term(c * (w * sc), k, l, spin);
                }
            }
        }
    }
    out.prune(DROP_TOL);
    out
}

/// `[p, q] = pq − qp`.
pub fn commutator(p: &NormalOrderedPoly, q: &NormalOrderedPoly) -> NormalOrderedPoly {
    multiply(p, q).sub(&multiply(q, p))
}

/// `e^{−S} X e^{S}` and the depth of the last non-vanishing nested commutator.
pub fn similarity_transform_with_depth(
    x: &NormalOrderedPoly,
    s: &NormalOrderedPoly,
) -> Result<(NormalOrderedPoly, usize)> {
    if !s.is_pure_creation() {
        return Err(Error::InvalidClusterOperator);
    }
    let mut result = x.clone();
    let mut term = x.clone();
    for order in 1..=BCH_ORDER_CAP + 1 {
        term = commutator(&term, s).scale(1.0 / order as f64);
        if term.is_zero() {
            return Ok((result, order - 1));
        }
        if order > BCH_ORDER_CAP {
            break;
        }
        result = result.add(&term);
    }
    Err(Error::NonTerminating { cap: BCH_ORDER_CAP })
}

/// `X̃ = X + [X,S] + [[X,S],S]/2! + …`, summed until a nested commutator
/// vanishes identically.
pub fn similarity_transform(
    x: &NormalOrderedPoly,
    s: &NormalOrderedPoly,
) -> Result<NormalOrderedPoly> {
    similarity_transform_with_depth(x, s).map(|(p, _)| p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    /// `C†_I = (b†)^n`
    Boson,
    /// `C†_I = (b†)^{n−1} σ⁺`
    SpinFlip,
}

/// Label of a cluster creation operator `C†_I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    pub channel: Channel,
    pub n: u32,
}

impl BasisIndex {
    pub fn boson(n: u32) -> Self {
        assert!(n >= 1, "excitation number starts at 1");
        BasisIndex { channel: Channel::Boson, n }
    }

    pub fn spin_flip(n: u32) -> Self {
        assert!(n >= 1, "excitation number starts at 1");
        BasisIndex { channel: Channel::SpinFlip, n }
    }

    /// `N_I = ⟨Φ₀|C_I C†_I|Φ₀⟩`: `n!` or `4(n−1)!`.
    pub fn norm(&self) -> f64 {
        match self.channel {
            Channel::Boson => factorial(self.n),
            Channel::SpinFlip => 4.0 * factorial(self.n - 1),
        }
    }

    pub fn creation(&self) -> NormalOrderedPoly {
        match self.channel {
            Channel::Boson => NormalOrderedPoly::create(self.n),
            Channel::SpinFlip => NormalOrderedPoly::from_monomial(Monomial::new(
                1.0,
                self.n - 1,
                0,
                SpinFactor::Plus,
            )),
        }
    }

    pub fn annihilation(&self) -> NormalOrderedPoly {
        self.creation().adjoint()
    }
}

/// Expansion coefficients of `p|0,↓⟩` over `{|Φ₀⟩} ∪ {C†_I|Φ₀⟩}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RefAmplitudes {
    pub reference: C64,
    pub components: BTreeMap<BasisIndex, C64>,
}

impl RefAmplitudes {
    pub fn get(&self, i: BasisIndex) -> C64 {
        self.components.get(&i).copied().unwrap_or_default()
    }
}

/// Evaluates `p|0,↓⟩`; every `b` and σ⁻ acting first on the reference gives
/// zero, `σᶻ|↓⟩ = −|↓⟩`, and `σ⁺|↓⟩` is the spin-flip basis direction.
pub fn apply_to_reference(p: &NormalOrderedPoly) -> RefAmplitudes {
    let mut out = RefAmplitudes::default();
    for m in p.monomials() {
        if m.l > 0 {
            continue;
        }
        let (idx, c) = match m.spin {
            SpinFactor::Minus => continue,
            SpinFactor::Identity => (m.k, m.coeff),
            SpinFactor::Z => (m.k, -m.coeff),
            SpinFactor::Plus => {
                *out.components.entry(BasisIndex::spin_flip(m.k + 1)).or_default() += m.coeff;
                continue;
            }
        };
        if idx == 0 {
            out.reference += c;
        } else {
            *out.components.entry(BasisIndex::boson(idx)).or_default() += c;
        }
    }
    out
}

/// `⟨Φ₀|C_I p|Φ₀⟩ / N_I`.
pub fn project(i: BasisIndex, p: &NormalOrderedPoly) -> C64 {
    apply_to_reference(p).get(i)
}

/// `⟨Φ₀|p|Φ₀⟩`.
pub fn reference_expectation(p: &NormalOrderedPoly) -> C64 {
    apply_to_reference(p).reference
}

/// Dense matrix of `p` on the truncated space `Fock(levels) ⊗ spin`, with
/// basis index `2·n + s` where `s = 0` is ↑ and `s = 1` is ↓.
pub fn matrix_representation(p: &NormalOrderedPoly, levels: usize) -> DMatrix<C64> {
    let dim = 2 * levels;
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for m in p.monomials() {
        let spin = m.spin.matrix();
        for n in 0..levels {
            // b^l lowers n → n − l, then (b†)^k raises it
            if (n as u32) < m.l {
                continue;
            }
            let mid = n - m.l as usize;
            let target = mid + m.k as usize;
            if target >= levels {
                continue;
            }
            let mut amp = 1.0;
            for j in 0..m.l as usize {
                amp *= ((n - j) as f64).sqrt();
            }
            for j in 0..m.k as usize {
                amp *= ((mid + j + 1) as f64).sqrt();
            }
            for (si, row) in spin.iter().enumerate() {
                for (sj, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        out[(2 * target + si, 2 * n + sj)] += m.coeff * (amp * v);
                    }
                }
            }
        }
    }
    out
}
