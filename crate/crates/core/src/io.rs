//! CSV, JSON and binary serialization of runs, spectra and tables.
//!
//! Every number in a CSV is written as `{:.8e}` (scientific, 9 significant
//! digits), which is locale-independent and byte-stable.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nccm::{ClusterState, RabiParams};
use crate::observables::ObservableRecord;
use crate::spectral::{Peak, Spectrum};

pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn push_complex(row: &mut Vec<String>, c: C64) {
    row.push(num(c.re));
    row.push(num(c.im));
}

fn write_row<W: Write>(w: &mut W, row: &[String]) -> Result<()> {
    writeln!(w, "{}", row.join(","))?;
    Ok(())
}

/// Streams cluster coefficients: `t, gt`, then Re/Im of `s⁽¹⁾ₙ, s⁽²⁾ₙ, s̃⁽¹⁾ₙ, s̃⁽²⁾ₙ`.
pub struct CoefficientWriter<W: Write> {
    out: W,
    n: usize,
    g: f64,
}

impl<W: Write> CoefficientWriter<W> {
    pub fn new(mut out: W, n: usize, g: f64) -> Result<Self> {
        let mut header = vec!["t".to_string(), "gt".to_string()];
        for name in ["s1", "s2", "st1", "st2"] {
            for k in 1..=n {
                header.push(format!("re_{name}_{k}"));
                header.push(format!("im_{name}_{k}"));
            }
        }
        write_row(&mut out, &header)?;
        Ok(CoefficientWriter { out, n, g })
    }

    pub fn write(&mut self, s: &ClusterState) -> Result<()> {
        if s.truncation() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.truncation() });
        }
        let mut row = vec![num(s.t), num(self.g * s.t)];
        for c in s.s1.iter().chain(&s.s2).chain(&s.st1).chain(&s.st2) {
            push_complex(&mut row, *c);
        }
        write_row(&mut self.out, &row)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub const OBSERVABLE_HEADER: [&str; 12] = [
    "t", "gt", "re_sigma_z", "im_sigma_z", "re_n_bar", "im_n_bar", "re_y", "im_y", "var_q1", "var_q2", "re_f",
    "im_f",
];

pub struct ObservableWriter<W: Write> {
    out: W,
    g: f64,
}

impl<W: Write> ObservableWriter<W> {
    pub fn new(mut out: W, g: f64) -> Result<Self> {
        writeln!(out, "{}", OBSERVABLE_HEADER.join(","))?;
        Ok(ObservableWriter { out, g })
    }

    pub fn write(&mut self, r: &ObservableRecord) -> Result<()> {
        let mut row = vec![num(r.t), num(self.g * r.t)];
        for c in [r.sigma_z, r.n_bar, r.y] {
            push_complex(&mut row, c);
        }
        row.push(num(r.var_q1));
        row.push(num(r.var_q2));
        push_complex(&mut row, r.f_value);
        write_row(&mut self.out, &row)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// A numeric CSV: header names and rows of floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Pairs `re_<name>` and `im_<name>` into complex values.
    pub fn complex_column(&self, name: &str) -> Result<Vec<C64>> {
        let re = self.column(&format!("re_{name}"))?;
        let im = self.column(&format!("im_{name}"))?;
        Ok(re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
    }
}

pub fn read_table<R: BufRead>(input: R) -> Result<Table> {
    let mut lines = input.lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Format("empty file".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "line {}: {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn write_spectrum<W: Write>(mut w: W, spec: &Spectrum) -> Result<()> {
    writeln!(w, "omega,magnitude")?;
    for (o, m) in spec.frequencies.iter().zip(&spec.magnitudes) {
        writeln!(w, "{},{}", num(*o), num(*m))?;
    }
    Ok(())
}

pub fn write_peaks<W: Write>(mut w: W, peaks: &[Peak]) -> Result<()> {
    writeln!(w, "rank,omega,magnitude")?;
    for (i, p) in peaks.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, num(p.omega), num(p.magnitude))?;
    }
    Ok(())
}

pub fn write_parametric<W: Write>(mut w: W, n: usize, trace: &[(f64, f64, f64)]) -> Result<()> {
    writeln!(w, "t,re_s2_{n},im_s2_{n}")?;
    for (t, re, im) in trace {
        writeln!(w, "{},{},{}", num(*t), num(*re), num(*im))?;
    }
    Ok(())
}

/// `index, eigenvalue`.
pub fn write_levels<W: Write>(mut w: W, levels: &[f64]) -> Result<()> {
    writeln!(w, "index,eigenvalue")?;
    for (i, e) in levels.iter().enumerate() {
        writeln!(w, "{},{}", i, num(*e))?;
    }
    Ok(())
}

/// One line per coupling: `g, N`, then Re/Im of each eigenvalue (rows may
/// have different lengths when a point failed; a failed point carries only
/// `g, N`).
pub fn write_eigen_rows<W: Write>(mut w: W, n: usize, rows: &[(f64, Option<Vec<C64>>)]) -> Result<()> {
    let width = rows.iter().filter_map(|(_, e)| e.as_ref().map(Vec::len)).max().unwrap_or(0);
    let mut header = vec!["g".to_string(), "N".to_string()];
    for k in 1..=width {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    write_row(&mut w, &header)?;
    for (g, eig) in rows {
        let mut row = vec![num(*g), n.to_string()];
        if let Some(eig) = eig {
            for c in eig {
                push_complex(&mut row, *c);
            }
        }
        write_row(&mut w, &row)?;
    }
    Ok(())
}

/// A row of a side-by-side comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl CompareRow {
    pub fn diff(&self) -> Option<f64> {
        Some((self.left? - self.right?).abs())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

pub fn write_compare<W: Write>(mut w: W, names: [&str; 2], rows: &[CompareRow]) -> Result<()> {
    writeln!(w, "label,{},{},abs_diff", names[0], names[1])?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.label, opt(r.left), opt(r.right), opt(r.diff()))?;
    }
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

const MAGIC: &[u8; 8] = b"RABICC01";

/// Header of the binary dump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DumpHeader {
    pub n: usize,
    pub params: RabiParams,
    pub dt: f64,
}

/// Little-endian binary dump: magic, `N` (u64), `g`, `dt`, `ω`, `ω₀`, then
/// per sample `t` followed by the coefficients ordered (channel, n,
/// ket/bra, re/im).
pub struct BinaryWriter<W: Write> {
    out: W,
    n: usize,
}

impl<W: Write> BinaryWriter<W> {
    pub fn new(mut out: W, header: DumpHeader) -> Result<Self> {
        out.write_all(MAGIC)?;
        out.write_all(&(header.n as u64).to_le_bytes())?;
        for x in [header.params.g, header.dt, header.params.omega, header.params.omega0] {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(BinaryWriter { out, n: header.n })
    }

    pub fn write(&mut self, s: &ClusterState) -> Result<()> {
        if s.truncation() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.truncation() });
        }
        let mut buf = Vec::with_capacity(8 * (1 + 8 * self.n));
        buf.extend_from_slice(&s.t.to_le_bytes());
        for (ket, bra) in [(&s.s1, &s.st1), (&s.s2, &s.st2)] {
            for k in 0..self.n {
                for c in [ket[k], bra[k]] {
                    buf.extend_from_slice(&c.re.to_le_bytes());
                    buf.extend_from_slice(&c.im.to_le_bytes());
                }
            }
        }
        self.out.write_all(&buf)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut input: R) -> Result<(DumpHeader, Vec<ClusterState>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a coefficient dump".into()));
    }
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b) as usize;
    let g = read_f64(&mut input)?;
    let dt = read_f64(&mut input)?;
    let omega = read_f64(&mut input)?;
    let omega0 = read_f64(&mut input)?;
    let header = DumpHeader { n, params: RabiParams { omega, omega0, g }, dt };

    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    let record = 8 * (1 + 8 * n);
    if rest.len() % record != 0 {
        return Err(Error::Format("truncated sample in dump".into()));
    }
    let f = |chunk: &[u8], i: usize| f64::from_le_bytes(chunk[8 * i..8 * i + 8].try_into().unwrap());
    let samples = rest
        .chunks_exact(record)
        .map(|chunk| {
            let mut s = ClusterState::vacuum(n, f(chunk, 0));
            let mut i = 1;
            for channel in 0..2 {
                for k in 0..n {
                    let ket = C64::new(f(chunk, i), f(chunk, i + 1));
                    let bra = C64::new(f(chunk, i + 2), f(chunk, i + 3));
                    i += 4;
                    if channel == 0 {
                        s.s1[k] = ket;
                        s.st1[k] = bra;
                    } else {
                        s.s2[k] = ket;
                        s.st2[k] = bra;
                    }
                }
            }
            s
        })
        .collect();
    Ok((header, samples))
}
