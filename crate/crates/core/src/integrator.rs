//! Fixed-step classical RK4 integration of the NCCM equations of motion and
//! the step-size / truncation convergence studies built on it.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nccm::{ClusterConfig, ClusterState, EomPlan, RabiParams};

/// Any coefficient above this magnitude aborts the run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

pub const DEFAULT_STEP_BUDGET: usize = 200_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPlan {
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
    /// keep every `sample_every`-th step
    pub sample_every: usize,
    pub max_steps: usize,
}

impl IntegrationPlan {
    pub fn new(dt: f64, t0: f64, t1: f64, sample_every: usize) -> Result<Self> {
        let plan = IntegrationPlan { dt, t0, t1, sample_every, max_steps: DEFAULT_STEP_BUDGET };
        plan.validate()?;
        Ok(plan)
    }

    /// Interval `[0, gt_end / g]`.
    pub fn to_gt(dt: f64, g: f64, gt_end: f64, sample_every: usize) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::InvalidParams("a gt endpoint needs g > 0".into()));
        }
        Self::new(dt, 0.0, gt_end / g, sample_every)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParams(format!("step size must be positive, got {}", self.dt)));
        }
        if !(self.t1 >= self.t0) {
            return Err(Error::InvalidParams("t1 must not precede t0".into()));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParams("sample_every must be at least 1".into()));
        }
        if self.steps() > self.max_steps {
            return Err(Error::InvalidParams(format!(
                "{} steps exceed the budget of {}",
                self.steps(),
                self.max_steps
            )));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened when `dt` does not divide
    /// the interval.
    pub fn steps(&self) -> usize {
        let span = self.t1 - self.t0;
        let exact = span / self.dt;
        let rounded = exact.round();
        if (rounded - exact).abs() <= 1e-9 * exact.max(1.0) {
            rounded as usize
        } else {
            exact.ceil() as usize
        }
    }

    fn time_at(&self, step: usize, total: usize) -> f64 {
        if step == total {
            self.t1
        } else {
            self.t0 + step as f64 * self.dt
        }
    }
}

/// Uniformly sampled snapshots of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeSeries {
    pub params: RabiParams,
    pub config: ClusterConfig,
    pub dt: f64,
    pub samples: Vec<ClusterState>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&ClusterState> {
        self.samples.last()
    }
}

struct Rk4 {
    plan: EomPlan,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(plan: EomPlan, dim: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); dim];
        Rk4 { plan, k1: z(), k2: z(), k3: z(), k4: z(), tmp: z() }
    }

    fn step(&mut self, y: &mut [C64], h: f64) {
        let Rk4 { plan, k1, k2, k3, k4, tmp } = self;
        plan.rhs(y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        plan.rhs(tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        plan.rhs(tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + k3[i] * h;
        }
        plan.rhs(tmp, k4);
        let h6 = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
        }
    }
}

/// Integrates from `state0` and calls `observer` on every sampled state
/// (including the first and the last). Returns the final state.
pub fn evolve_with<F>(
    state0: &ClusterState,
    params: RabiParams,
    config: ClusterConfig,
    plan: &IntegrationPlan,
    mut observer: F,
) -> Result<ClusterState>
where
    F: FnMut(&ClusterState),
{
    plan.validate()?;
    state0.check_dims()?;
    if state0.truncation() != config.n {
        return Err(Error::DimensionMismatch { expected: config.n, got: state0.truncation() });
    }
    let n = config.n;
    let mut y = state0.to_flat();
    let mut rk = Rk4::new(EomPlan::new(params, config), y.len());
    let total = plan.steps();
    let mut state = ClusterState::from_flat(n, plan.t0, &y);
    observer(&state);
    for step in 1..=total {
        let t_prev = plan.time_at(step - 1, total);
        let t = plan.time_at(step, total);
        rk.step(&mut y, t - t_prev);
        let worst = y[..4 * n].iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(worst <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Diverged { t, magnitude: worst });
        }
        if step % plan.sample_every == 0 || step == total {
            state = ClusterState::from_flat(n, t, &y);
            observer(&state);
        }
    }
    if total == 0 {
        return Ok(state);
    }
    Ok(ClusterState::from_flat(n, plan.t1, &y))
}

/// Integrates and keeps every sampled state.
pub fn evolve(
    state0: &ClusterState,
    params: RabiParams,
    config: ClusterConfig,
    plan: &IntegrationPlan,
) -> Result<TimeSeries> {
    let mut samples = Vec::new();
    evolve_with(state0, params, config, plan, |s| samples.push(s.clone()))?;
    Ok(TimeSeries { params, config, dt: plan.dt, samples })
}

/// State at `gt_eval` after evolving the vacuum with SUB-`n` and step `dt`.
pub fn state_at_gt(g: f64, n: usize, dt: f64, gt_eval: f64) -> Result<ClusterState> {
    let params = RabiParams::resonant(g);
    let config = ClusterConfig::sub(n);
    let plan = IntegrationPlan::to_gt(dt, g, gt_eval, usize::MAX)?;
    evolve_with(&ClusterState::vacuum(n, 0.0), params, config, &plan, |_| {})
}

/// One row of a convergence table: `s⁽²⁾₂` and (when stored) `s⁽²⁾₈`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub dt: f64,
    pub n: usize,
    pub s2_2: C64,
    pub s2_8: Option<C64>,
}

fn row(g: f64, n: usize, dt: f64, gt_eval: f64) -> Result<StudyRow> {
    let s = state_at_gt(g, n, dt, gt_eval)?;
    Ok(StudyRow { dt, n, s2_2: s.s2(2), s2_8: (n >= 8).then(|| s.s2(8)) })
}

/// Coefficients at `gt_eval` for each step size (rows in input order).
pub fn step_convergence_study(g: f64, n: usize, dt_list: &[f64], gt_eval: f64) -> Result<Vec<StudyRow>> {
    if dt_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParams("step sizes must be descending".into()));
    }
    dt_list.par_iter().map(|&dt| row(g, n, dt, gt_eval)).collect()
}

/// Coefficients at `gt_eval` for each truncation; a diverging row is
/// reported in place rather than aborting the table.
pub fn subn_convergence_study(g: f64, dt: f64, n_list: &[usize], gt_eval: f64) -> Vec<Result<StudyRow>> {
    n_list.par_iter().map(|&n| row(g, n, dt, gt_eval)).collect()
}

/// Observed order `log(e₁/e₂)/log(h₁/h₂)` from three runs at `h`, `h/r`,
/// `h/r²` using successive differences.
pub fn richardson_order(values: [C64; 3], ratio: f64) -> f64 {
    let d1 = (values[0] - values[1]).norm();
    let d2 = (values[1] - values[2]).norm();
    (d1 / d2).ln() / ratio.ln()
}
