//! `rabi spectrum` and `rabi critical`: linear-response spectra along a
//! coupling grid and the breakdown coupling per truncation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rabi_nccm::io::{num, write_eigen_rows};
use rabi_nccm::nccm::{critical_coupling, dynamic_matrix, CriticalScan, GroundStateSolver};
use rabi_nccm::{ClusterConfig, ClusterState, Error, RabiParams, C64};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

fn open(out_dir: &Path, name: &str) -> CliResult<(BufWriter<File>, std::path::PathBuf)> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let p = out_dir.join(name);
    let f = File::create(&p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?;
    Ok((BufWriter::new(f), p))
}

/// `g_min, g_min + step, …` up to `g_max` inclusive.
pub fn grid(g_min: f64, g_max: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0) || !(g_max >= g_min) || !(g_min >= 0.0) {
        return Err(CliError::Config(format!("bad grid: from {g_min} to {g_max} by {step}")));
    }
    let count = ((g_max - g_min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| g_min + k as f64 * step).collect())
}

/// Eigenvalues of the dynamic matrix at each coupling, following the real
/// ground-state branch upward. Points where the branch is lost are `None`.
pub fn sweep(n: usize, base: RabiParams, gs: &[f64]) -> Vec<(f64, Option<Vec<C64>>)> {
    let solver = GroundStateSolver::new(ClusterConfig::sub(n));
    let mut prev: Option<(ClusterState, f64)> = None;
    gs.iter()
        .map(|&g| {
            let params = base.with_g(g);
            let state = match &prev {
                Some((s, g_prev)) => solver.follow(s, *g_prev, params),
                None => solver.solve(params),
            };
            let eig = state.ok().and_then(|s| {
                let ev = dynamic_matrix(&s, params).ok()?.eigenvalues();
                prev = Some((s, g));
                Some(ev)
            });
            (g, eig)
        })
        .collect()
}

pub fn run_spectrum(n: usize, base: RabiParams, gs: &[f64], out_dir: &Path) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::Config("N must be at least 1".into()));
    }
    let rows = sweep(n, base, gs);
    let (mut w, path) = open(out_dir, &format!("spectrum_N{n}.csv"))?;
    write_eigen_rows(&mut w, n, &rows)?;
    w.flush()?;
    println!("wrote {}", path.display());
    let failed: Vec<f64> = rows.iter().filter(|r| r.1.is_none()).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("warning: no real ground state at {} of {} couplings (rows carry only g, N)", failed.len(), rows.len());
    }
    if !rows.is_empty() && failed.len() == rows.len() {
        return Err(Error::NoConvergence { g: failed[0] }.into());
    }
    Ok(())
}

pub fn run_critical(ns: &[usize], omega: f64, omega0: f64, scan: CriticalScan, out_dir: &Path) -> CliResult<()> {
    if ns.contains(&0) {
        return Err(CliError::Config("N must be at least 1".into()));
    }
    let results: Vec<Result<f64, Error>> = ns
        .par_iter()
        .map(|&n| critical_coupling(ClusterConfig::sub(n), omega, omega0, scan))
        .collect();
    let (mut w, path) = open(out_dir, "critical.csv")?;
    writeln!(w, "N,g_c,status")?;
    for (n, r) in ns.iter().zip(&results) {
        match r {
            Ok(gc) => {
                writeln!(w, "{n},{},ok", num(*gc))?;
                println!("N = {n}: g_c = {gc:.4}");
            }
            Err(Error::NotFoundInRange { lo, hi }) => {
                writeln!(w, "{n},nan,not_found")?;
                println!("N = {n}: spectrum stays real on [{lo}, {hi}]");
            }
            Err(e) => {
                writeln!(w, "{n},nan,failed")?;
                println!("N = {n}: {e}");
            }
        }
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}
