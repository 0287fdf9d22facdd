//! Physical expectation values evaluated from NCCM cluster coefficients.
//!
//! All expectations are returned complex: truncation breaks the exact
//! hermiticity of bra and ket, and the imaginary part of `⟨σᶻ⟩` serves as the
//! error diagnostic. Coefficients with index above `N` are zero.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nccm::{factorials, ClusterState};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Observables of one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub sigma_z: C64,
    pub n_bar: C64,
    pub bdbdbb: C64,
    pub y: C64,
    pub b_expect: C64,
    pub b2_expect: C64,
    pub var_q1: f64,
    pub var_q2: f64,
    pub f_value: C64,
}

impl ObservableRecord {
    pub fn from_state(state: &ClusterState, omega: f64) -> Self {
        let fact = factorials(state.truncation() + 1);
        let n_bar = photon_number_with(state, &fact);
        let bdbdbb = bdbdbb_with(state, &fact);
        let b_expect = expect_b_with(state, &fact);
        let b2_expect = expect_b2_with(state, &fact);
        let q = variances_from_moments(n_bar, b_expect, b2_expect, state.t, omega);
        let f_value = f_series_with(state, &fact);
        ObservableRecord {
            t: state.t,
            sigma_z: C64::new(-1.0, 0.0) + 8.0 * f_value,
            n_bar,
            bdbdbb,
            y: bdbdbb - n_bar * n_bar,
            b_expect,
            b2_expect,
            var_q1: q.var_q1,
            var_q2: q.var_q2,
            f_value,
        }
    }

    pub fn is_squeezed(&self) -> bool {
        self.var_q1 < 0.25 || self.var_q2 < 0.25
    }
}

/// `f(t) = Σₖ (k−1)! s⁽²⁾ₖ s̃⁽²⁾ₖ`.
pub fn f_series(state: &ClusterState) -> C64 {
    f_series_with(state, &factorials(state.truncation()))
}

fn f_series_with(state: &ClusterState, fact: &[f64]) -> C64 {
    (1..=state.truncation()).fold(ZERO, |acc, n| acc + state.s2(n) * state.st2(n) * fact[n - 1])
}

/// `⟨σᶻ⟩ = −1 + 8 Σ (n−1)! s⁽²⁾ₙ s̃⁽²⁾ₙ`.
pub fn atomic_inversion(state: &ClusterState) -> C64 {
    C64::new(-1.0, 0.0) + 8.0 * f_series(state)
}

/// `⟨b†b⟩`.
pub fn photon_number(state: &ClusterState) -> C64 {
    photon_number_with(state, &factorials(state.truncation()))
}

fn photon_number_with(state: &ClusterState, fact: &[f64]) -> C64 {
    let mut acc = ZERO;
    for n in 1..=state.truncation() {
        let nf = n as f64;
        acc += state.s1(n) * state.st1(n) * (nf * fact[n]);
        acc += state.s2(n) * state.st2(n) * (4.0 * (nf - 1.0) * fact[n - 1]);
    }
    acc
}

/// `⟨b†b†bb⟩`.
pub fn bdbdbb(state: &ClusterState) -> C64 {
    bdbdbb_with(state, &factorials(state.truncation()))
}

fn bdbdbb_with(state: &ClusterState, fact: &[f64]) -> C64 {
    let big_n = state.truncation();
    let mut acc = ZERO;
    for n in 1..=big_n {
        let nf = n as f64;
        acc += state.s1(n) * state.st1(n) * (nf * (nf - 1.0) * fact[n]);
        if n >= 3 {
            acc += state.s2(n) * state.st2(n) * (4.0 * (nf - 1.0) * (nf - 2.0) * fact[n - 1]);
        }
    }
    for n in 1..big_n {
        let s1n = state.s1(n);
        if s1n == ZERO {
            continue;
        }
        let nf = n as f64;
        for m in 1..=big_n - n {
            let mf = m as f64;
            acc += s1n * state.s1(m) * state.st1(n + m) * (nf * mf * fact[n + m]);
            if m >= 2 {
                acc += s1n * state.s2(m) * state.st2(n + m) * (8.0 * nf * (mf - 1.0) * fact[n + m - 1]);
            }
        }
    }
    acc
}

/// `y = ⟨b†b†bb⟩ − ⟨b†b⟩²`; negative values mean anti-bunching.
pub fn antibunching_y(state: &ClusterState) -> C64 {
    let n = photon_number(state);
    bdbdbb(state) - n * n
}

/// `⟨b⟩`.
pub fn expect_b(state: &ClusterState) -> C64 {
    expect_b_with(state, &factorials(state.truncation()))
}

fn expect_b_with(state: &ClusterState, fact: &[f64]) -> C64 {
    let mut acc = state.s1(1);
    for n in 2..=state.truncation() {
        acc += state.s1(n) * state.st1(n - 1) * fact[n];
        acc += state.s2(n) * state.st2(n - 1) * (4.0 * fact[n - 1]);
    }
    acc
}

/// `⟨b²⟩`.
pub fn expect_b2(state: &ClusterState) -> C64 {
    expect_b2_with(state, &factorials(state.truncation()))
}

fn expect_b2_with(state: &ClusterState, fact: &[f64]) -> C64 {
    let big_n = state.truncation();
    let mut acc = 2.0 * state.s1(2) + state.s1(1) * state.s1(1);
    for n in 3..=big_n {
        acc += state.s1(n) * state.st1(n - 2) * fact[n];
        acc += state.s2(n) * state.st2(n - 2) * (4.0 * fact[n - 1]);
    }
    for n in 1..=big_n {
        let s1n = state.s1(n);
        if s1n == ZERO {
            continue;
        }
        let nf = n as f64;
        for m in 1..=big_n {
            let mf = m as f64;
            // s̃_{n+m−2} with n = m = 1 is the reference, handled above
            if n + m >= 3 && n + m - 2 <= big_n {
                acc += s1n * state.s1(m) * state.st1(n + m - 2) * (nf * mf * fact[n + m - 2]);
            }
            if m >= 2 && n + m - 2 <= big_n {
                acc += s1n * state.s2(m) * state.st2(n + m - 2) * (8.0 * nf * (mf - 1.0) * fact[n + m - 3]);
            }
        }
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureVariances {
    pub var_q1: f64,
    pub var_q2: f64,
    /// `|Im ⟨b†b⟩|` dropped when forming the variances
    pub discarded_imag: f64,
}

impl QuadratureVariances {
    pub fn is_squeezed(&self) -> bool {
        self.var_q1 < 0.25 || self.var_q2 < 0.25
    }

    pub fn min(&self) -> f64 {
        self.var_q1.min(self.var_q2)
    }
}

/// `(ΔQ₁)²` and `(ΔQ₂)²` for `Q₁ = ½(b e^{iωt} + b† e^{−iωt})`,
/// `Q₂ = (1/2i)(b e^{iωt} − b† e^{−iωt})`.
pub fn quadrature_variances(state: &ClusterState, t: f64, omega: f64) -> QuadratureVariances {
    variances_from_moments(photon_number(state), expect_b(state), expect_b2(state), t, omega)
}

pub fn variances_from_moments(n_bar: C64, b: C64, b2: C64, t: f64, omega: f64) -> QuadratureVariances {
    let rot1 = C64::from_polar(1.0, omega * t);
    let rot2 = C64::from_polar(1.0, 2.0 * omega * t);
    let b_rot = b * rot1;
    let b2_rot = (b2 * rot2).re;
    QuadratureVariances {
        var_q1: 0.5 * (n_bar.re + b2_rot) - b_rot.re * b_rot.re + 0.25,
        var_q2: 0.5 * (n_bar.re - b2_rot) - b_rot.im * b_rot.im + 0.25,
        discarded_imag: n_bar.im.abs(),
    }
}

/// RMS and maximum of `|Im x|` over a series.
pub fn imag_diagnostic(series: &[C64]) -> Result<(f64, f64)> {
    if series.is_empty() {
        return Err(Error::InvalidParams("empty series".into()));
    }
    let sum_sq: f64 = series.iter().map(|c| c.im * c.im).sum();
    let max = series.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    Ok(((sum_sq / series.len() as f64).sqrt(), max))
}

/// Arithmetic mean of the real parts.
pub fn time_average(series: &[C64]) -> Option<f64> {
    if series.is_empty() {
        None
    } else {
        Some(series.iter().map(|c| c.re).sum::<f64>() / series.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_values() {
        let s = ClusterState::vacuum(10, 0.0);
        assert_eq!(atomic_inversion(&s), c(-1.0, 0.0));
        assert_eq!(photon_number(&s), ZERO);
        assert_eq!(bdbdbb(&s), ZERO);
        assert_eq!(antibunching_y(&s), ZERO);
        assert_eq!(expect_b(&s), ZERO);
        assert_eq!(expect_b2(&s), ZERO);
        assert_eq!(f_series(&s), ZERO);
        let q = quadrature_variances(&s, 3.7, 1.0);
        assert_eq!((q.var_q1, q.var_q2), (0.25, 0.25));
        assert!(!q.is_squeezed());
    }

    #[test]
    fn single_pair_coefficient() {
        let a = c(0.03, -0.01);
        let at = c(0.02, 0.05);
        let mut s = ClusterState::vacuum(4, 0.0);
        s.s1[1] = a;
        s.st1[1] = at;
        assert!((bdbdbb(&s) - 4.0 * a * at).norm() < 1e-16);
        let mut s = ClusterState::vacuum(4, 0.0);
        s.s1[1] = a;
        assert!((expect_b2(&s) - 2.0 * a).norm() < 1e-16);
    }

    #[test]
    fn inversion_is_f_series_shifted() {
        let mut s = ClusterState::vacuum(6, 0.0);
        for n in 0..6 {
            s.s2[n] = c(0.01 * n as f64, -0.02);
            s.st2[n] = c(0.03, 0.001 * n as f64);
        }
        let lhs = atomic_inversion(&s);
        let rhs = c(-1.0, 0.0) + 8.0 * f_series(&s);
        assert!((lhs - rhs).norm() < 1e-15);
        let rec = ObservableRecord::from_state(&s, 1.0);
        assert!((rec.sigma_z - lhs).norm() < 1e-15);
        assert!((rec.y - antibunching_y(&s)).norm() < 1e-15);
    }

    #[test]
    fn diagnostics() {
        assert_eq!(imag_diagnostic(&[c(1.0, 0.0), c(-2.0, 0.0)]).unwrap(), (0.0, 0.0));
        let (rms, max) = imag_diagnostic(&[c(0.0, 3.0), c(0.0, -4.0)]).unwrap();
        assert!((rms - (12.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(max, 4.0);
        assert!(imag_diagnostic(&[]).is_err());
        assert_eq!(time_average(&[c(1.0, 5.0), c(3.0, 0.0)]), Some(2.0));
    }
}
