//! `rabi fourier`: spectrum of `f(t)` (or another column) and its peaks,
//! optionally set against the exact level differences.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rabi_nccm::ci::{build_basis, ci_spectrum, Parity};
use rabi_nccm::io::{read_table, write_compare, write_peaks, write_spectrum, CompareRow, Table};
use rabi_nccm::spectral::{dft, find_peaks, match_peaks, Window};
use rabi_nccm::{RabiParams, C64};

use crate::error::{CliError, CliResult};

/// Photon cutoff of the reference diagonalization.
pub const CI_NMAX: usize = 80;

pub struct Series {
    pub t: Vec<f64>,
    pub values: Vec<C64>,
    /// coupling recovered from a `gt` column, if present
    pub g: Option<f64>,
}

pub fn read_series(path: &Path, column: &str) -> CliResult<Series> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let table = read_table(BufReader::new(file))?;
    series_from_table(&table, column)
}

fn series_from_table(table: &Table, column: &str) -> CliResult<Series> {
    let t = table.column("t")?;
    let values = match table.complex_column(column) {
        Ok(v) => v,
        Err(_) => table.column(column)?.into_iter().map(|x| C64::new(x, 0.0)).collect(),
    };
    let g = table.column("gt").ok().and_then(|gt| {
        let (t_last, gt_last) = (*t.last()?, *gt.last()?);
        (t_last > 0.0).then(|| gt_last / t_last)
    });
    Ok(Series { t, values, g })
}

/// `E_j − E_i` for `i < j` among the lowest three even-parity levels.
pub fn reference_transitions(params: RabiParams) -> Vec<f64> {
    let levels = ci_spectrum(params, &build_basis(CI_NMAX, Some(Parity::Even)));
    let mut out = vec![levels[1] - levels[0], levels[2] - levels[0], levels[2] - levels[1]];
    out.sort_by(f64::total_cmp);
    out
}

pub struct FourierJob<'a> {
    pub series: Series,
    pub stem: String,
    pub window: Window,
    pub peaks: usize,
    pub prominence: f64,
    /// parameters for the reference comparison
    pub compare: Option<RabiParams>,
    pub out_dir: &'a Path,
}

fn create(path: &PathBuf) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

pub fn run(job: FourierJob) -> CliResult<()> {
    std::fs::create_dir_all(job.out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", job.out_dir.display())))?;
    let spec = dft(&job.series.values, &job.series.t, job.window)?;
    let positive = spec.positive();
    let peaks = find_peaks(&positive, job.peaks, job.prominence)?;

    let spec_path = job.out_dir.join(format!("{}_fourier_spectrum.csv", job.stem));
    let mut w = create(&spec_path)?;
    write_spectrum(&mut w, &spec)?;
    w.flush()?;
    let peaks_path = job.out_dir.join(format!("{}_fourier_peaks.csv", job.stem));
    let mut w = create(&peaks_path)?;
    write_peaks(&mut w, &peaks)?;
    w.flush()?;
    println!("resolution {:.6e}", spec.resolution);
    for (i, p) in peaks.iter().enumerate() {
        println!("peak {}: omega = {:.6}, magnitude = {:.6e}", i + 1, p.omega, p.magnitude);
    }
    println!("wrote {}", spec_path.display());
    println!("wrote {}", peaks_path.display());

    if let Some(params) = job.compare {
        let reference = reference_transitions(params);
        let matched = match_peaks(&peaks, &reference, spec.resolution);
        let rows: Vec<CompareRow> = matched
            .iter()
            .enumerate()
            .map(|(i, m)| CompareRow { label: format!("peak{}", i + 1), left: Some(m.omega), right: Some(m.reference) })
            .collect();
        let path = job.out_dir.join(format!("{}_fourier_compare.csv", job.stem));
        let mut w = create(&path)?;
        write_compare(&mut w, ["fourier", "ci"], &rows)?;
        w.flush()?;
        for (i, m) in matched.iter().enumerate() {
            println!("peak {} vs CI transition {:.6}: {:.3} bins", i + 1, m.reference, m.bins);
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}
