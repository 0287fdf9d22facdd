//! `rabi evolve`: time series of coefficients and observables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rabi_nccm::integrator::{evolve_with, IntegrationPlan};
use rabi_nccm::io::{write_json, write_parametric, BinaryWriter, CoefficientWriter, DumpHeader, ObservableWriter};
use rabi_nccm::observables::ObservableRecord;
use rabi_nccm::{ClusterConfig, ClusterState, Error};
use serde::Serialize;

use crate::config::{Output, RunConfig, Span};
use crate::error::{CliError, CliResult};
use crate::guard::breakdown_coupling;

#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub samples: usize,
    pub sigma_z_imag_rms: f64,
    pub sigma_z_imag_max: f64,
    pub mean_n_bar: f64,
    pub min_var_q1: f64,
    pub min_var_q2: f64,
    pub min_y: f64,
}

#[derive(Default)]
struct Accumulator {
    samples: usize,
    imag_sq: f64,
    imag_max: f64,
    n_bar: f64,
    min_q1: f64,
    min_q2: f64,
    min_y: f64,
}

impl Accumulator {
    fn push(&mut self, r: &ObservableRecord) {
        if self.samples == 0 {
            self.min_q1 = f64::INFINITY;
            self.min_q2 = f64::INFINITY;
            self.min_y = f64::INFINITY;
        }
        self.samples += 1;
        self.imag_sq += r.sigma_z.im * r.sigma_z.im;
        self.imag_max = self.imag_max.max(r.sigma_z.im.abs());
        self.n_bar += r.n_bar.re;
        self.min_q1 = self.min_q1.min(r.var_q1);
        self.min_q2 = self.min_q2.min(r.var_q2);
        self.min_y = self.min_y.min(r.y.re);
    }

    fn finish(&self) -> Summary {
        let k = self.samples.max(1) as f64;
        Summary {
            samples: self.samples,
            sigma_z_imag_rms: (self.imag_sq / k).sqrt(),
            sigma_z_imag_max: self.imag_max,
            mean_n_bar: self.n_bar / k,
            min_var_q1: self.min_q1,
            min_var_q2: self.min_q2,
            min_y: self.min_y,
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a RunConfig,
    t_end: f64,
    steps: usize,
    breakdown_coupling: Option<f64>,
    status: &'static str,
    diverged_at: Option<f64>,
    summary: Summary,
}

type Sink = BufWriter<File>;

struct Sinks {
    coefficients: Option<CoefficientWriter<Sink>>,
    observables: Option<ObservableWriter<Sink>>,
    binary: Option<BinaryWriter<Sink>>,
    parametric: Vec<(f64, f64, f64)>,
}

fn create(path: &PathBuf) -> CliResult<Sink> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

pub fn path_for(run: &RunConfig, suffix: &str) -> PathBuf {
    run.out_dir.join(format!("{}_{suffix}", run.stem()))
}

/// Refuses couplings beyond the breakdown point unless forced.
pub fn check_guard(run: &RunConfig) -> CliResult<Option<f64>> {
    let gc = breakdown_coupling(run.n, run.params.omega, run.params.omega0)?;
    if let Some(gc) = gc {
        if run.params.g > gc && !run.force {
            return Err(CliError::Config(format!(
                "g = {} lies above the SUB-{} breakdown coupling g_c = {gc:.4}; the evolution is not trustworthy there \
                 (pass --force to run anyway)",
                run.params.g, run.n
            )));
        }
    }
    Ok(gc)
}

/// Runs one configuration and writes the requested products. Returns the
/// list of files written.
pub fn run(cfg: &RunConfig) -> CliResult<(Summary, Vec<PathBuf>)> {
    let gc = check_guard(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    let plan = IntegrationPlan::new(cfg.dt, 0.0, cfg.t_end(), cfg.sample_every)?;
    let mut written = Vec::new();
    let mut sinks = Sinks { coefficients: None, observables: None, binary: None, parametric: Vec::new() };
    if cfg.wants(Output::Coefficients) {
        let p = path_for(cfg, "coefficients.csv");
        sinks.coefficients = Some(CoefficientWriter::new(create(&p)?, cfg.n, cfg.params.g)?);
        written.push(p);
    }
    if cfg.wants(Output::Observables) {
        let p = path_for(cfg, "observables.csv");
        sinks.observables = Some(ObservableWriter::new(create(&p)?, cfg.params.g)?);
        written.push(p);
    }
    if cfg.wants(Output::Binary) {
        let p = path_for(cfg, "dump.bin");
        let header = DumpHeader { n: cfg.n, params: cfg.params, dt: cfg.dt };
        sinks.binary = Some(BinaryWriter::new(create(&p)?, header)?);
        written.push(p);
    }

    let mut acc = Accumulator::default();
    let mut sink_error: Option<Error> = None;
    let parametric = cfg.wants(Output::Parametric) && cfg.n >= 2;
    let observer = |s: &ClusterState| {
        let r = ObservableRecord::from_state(s, cfg.params.omega);
        acc.push(&r);
        if parametric {
            let c = s.s2(2);
            sinks.parametric.push((s.t, c.re, c.im));
        }
        if sink_error.is_some() {
            return;
        }
        let res = (|| -> rabi_nccm::Result<()> {
            if let Some(w) = sinks.coefficients.as_mut() {
                w.write(s)?;
            }
            if let Some(w) = sinks.observables.as_mut() {
                w.write(&r)?;
            }
            if let Some(w) = sinks.binary.as_mut() {
                w.write(s)?;
            }
            Ok(())
        })();
        if let Err(e) = res {
            sink_error = Some(e);
        }
    };
    let outcome = evolve_with(&ClusterState::vacuum(cfg.n, 0.0), cfg.params, ClusterConfig::sub(cfg.n), &plan, observer);
    if let Some(e) = sink_error {
        return Err(e.into());
    }
    if let Some(w) = sinks.coefficients {
        w.into_inner().flush()?;
    }
    if let Some(w) = sinks.observables {
        w.into_inner().flush()?;
    }
    if let Some(w) = sinks.binary {
        w.into_inner().flush()?;
    }
    if parametric {
        let p = path_for(cfg, "parametric.csv");
        let mut w = create(&p)?;
        write_parametric(&mut w, 2, &sinks.parametric)?;
        w.flush()?;
        written.push(p);
    }

    let diverged_at = match &outcome {
        Err(Error::Diverged { t, .. }) => Some(*t),
        _ => None,
    };
    if cfg.wants(Output::Metadata) {
        let p = path_for(cfg, "meta.json");
        let mut w = create(&p)?;
        let meta = Metadata {
            config: cfg,
            t_end: cfg.t_end(),
            steps: plan.steps(),
            breakdown_coupling: gc,
            status: if outcome.is_ok() { "ok" } else { "diverged" },
            diverged_at,
            summary: acc.finish(),
        };
        write_json(&mut w, &meta)?;
        writeln!(w)?;
        w.flush()?;
        written.push(p);
    }
    outcome?;
    Ok((acc.finish(), written))
}

pub fn describe(cfg: &RunConfig, s: &Summary) -> String {
    let end = match cfg.span {
        Span::Gt(gt) => format!("gt = {gt}"),
        Span::T(t) => format!("t = {t}"),
    };
    format!(
        "g = {} SUB-{} to {end}: {} samples, mean n_bar {:.6e}, min var {:.6e}, min y {:.6e}, Im<sigma_z> rms {:.3e} max {:.3e}",
        cfg.params.g,
        cfg.n,
        s.samples,
        s.mean_n_bar,
        s.min_var_q1.min(s.min_var_q2),
        s.min_y,
        s.sigma_z_imag_rms,
        s.sigma_z_imag_max
    )
}
