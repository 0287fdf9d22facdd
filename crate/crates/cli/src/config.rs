//! Run configuration: a flat TOML document mirrored by the `evolve` flags.
//! Flags win over the file.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rabi_nccm::RabiParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "RABI_OUT_DIR";
pub const DEFAULT_DT: f64 = 0.0005;
pub const DEFAULT_SAMPLE_EVERY: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Coefficients,
    Observables,
    Binary,
    Parametric,
    Metadata,
}

impl Output {
    pub const ALL: [Output; 5] =
        [Output::Coefficients, Output::Observables, Output::Binary, Output::Parametric, Output::Metadata];
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub g: Option<OneOrMany<f64>>,
    #[serde(rename = "N")]
    pub n: Option<OneOrMany<usize>>,
    pub dt: Option<f64>,
    pub gt_end: Option<f64>,
    pub t_end: Option<f64>,
    pub sample_every: Option<usize>,
    pub omega: Option<f64>,
    pub omega0: Option<f64>,
    pub outputs: Option<Vec<Output>>,
    pub out_dir: Option<PathBuf>,
    pub force: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag values before merging; empty lists and `None` defer to the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub g: Vec<f64>,
    pub n: Vec<usize>,
    pub dt: Option<f64>,
    pub gt_end: Option<f64>,
    pub t_end: Option<f64>,
    pub sample_every: Option<usize>,
    pub omega: Option<f64>,
    pub omega0: Option<f64>,
    pub outputs: Vec<Output>,
    pub out_dir: Option<PathBuf>,
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Span {
    /// endpoint in units of `gt`
    Gt(f64),
    T(f64),
}

/// One fully resolved, deterministic run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: RabiParams,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub span: Span,
    pub sample_every: usize,
    pub outputs: Vec<Output>,
    pub out_dir: PathBuf,
    pub force: bool,
}

impl RunConfig {
    /// End time. With `g = 0` a `gt` endpoint is read as `ωt`.
    pub fn t_end(&self) -> f64 {
        match self.span {
            Span::T(t) => t,
            Span::Gt(gt) if self.params.g > 0.0 => gt / self.params.g,
            Span::Gt(gt) => gt / self.params.omega,
        }
    }

    pub fn stem(&self) -> String {
        format!("g{}_N{}", self.params.g, self.n)
    }

    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Merges flags over the file and expands `g`/`N` lists pairwise (a single
/// value is broadcast).
pub fn resolve(file: FileConfig, flags: Overrides) -> CliResult<Vec<RunConfig>> {
    let g = if flags.g.is_empty() { file.g.map(OneOrMany::into_vec).unwrap_or_default() } else { flags.g };
    let n = if flags.n.is_empty() { file.n.map(OneOrMany::into_vec).unwrap_or_default() } else { flags.n };
    if g.is_empty() {
        return Err(CliError::Config("missing coupling `g`".into()));
    }
    if n.is_empty() {
        return Err(CliError::Config("missing truncation `N`".into()));
    }
    let pairs: Vec<(f64, usize)> = match (g.len(), n.len()) {
        (a, b) if a == b => g.into_iter().zip(n).collect(),
        (1, _) => n.into_iter().map(|n| (g[0], n)).collect(),
        (_, 1) => g.into_iter().map(|g| (g, n[0])).collect(),
        (a, b) => return Err(CliError::Config(format!("{a} couplings but {b} truncations"))),
    };

    let (gt_end, t_end) = if flags.gt_end.is_some() || flags.t_end.is_some() {
        (flags.gt_end, flags.t_end)
    } else {
        (file.gt_end, file.t_end)
    };
    let span = match (gt_end, t_end) {
        (Some(gt), None) => Span::Gt(gt),
        (None, Some(t)) => Span::T(t),
        (Some(_), Some(_)) => return Err(CliError::Config("give either gt_end or t_end, not both".into())),
        (None, None) => return Err(CliError::Config("missing endpoint: gt_end or t_end".into())),
    };
    let end = match span {
        Span::Gt(x) | Span::T(x) => x,
    };
    if !(end >= 0.0) || !end.is_finite() {
        return Err(CliError::Config(format!("endpoint must be finite and non-negative, got {end}")));
    }

    let dt = flags.dt.or(file.dt).unwrap_or(DEFAULT_DT);
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CliError::Config(format!("dt must be positive, got {dt}")));
    }
    let sample_every = flags.sample_every.or(file.sample_every).unwrap_or(DEFAULT_SAMPLE_EVERY);
    if sample_every == 0 {
        return Err(CliError::Config("sample_every must be at least 1".into()));
    }
    let omega = flags.omega.or(file.omega).unwrap_or(1.0);
    let omega0 = flags.omega0.or(file.omega0).unwrap_or(1.0);
    let outputs = if !flags.outputs.is_empty() {
        flags.outputs
    } else {
        file.outputs.unwrap_or_else(|| Output::ALL.to_vec())
    };
    let out_dir = flags.out_dir.or(file.out_dir).unwrap_or_else(default_out_dir);
    let force = flags.force || file.force.unwrap_or(false);

    pairs
        .into_iter()
        .map(|(g, n)| {
            let params = RabiParams::new(omega, omega0, g).map_err(|e| CliError::Config(e.to_string()))?;
            if n == 0 {
                return Err(CliError::Config("N must be at least 1".into()));
            }
            Ok(RunConfig {
                params,
                n,
                dt,
                span,
                sample_every,
                outputs: outputs.clone(),
                out_dir: out_dir.clone(),
                force,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: FileConfig = toml::from_str("g = 0.05\nN = 30\ndt = 0.001\ngt_end = 120\n").unwrap();
        let flags = Overrides { dt: Some(0.0005), n: vec![12], ..Default::default() };
        let runs = resolve(file, flags).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].n, 12);
        assert_eq!(runs[0].dt, 0.0005);
        assert_eq!(runs[0].params.g, 0.05);
        assert!((runs[0].t_end() - 2400.0).abs() < 1e-9);
    }

    #[test]
    fn lists_pair_up() {
        let file: FileConfig = toml::from_str("g = [0.05, 0.2]\nN = [30, 14]\nt_end = 1.0\n").unwrap();
        let runs = resolve(file, Overrides::default()).unwrap();
        assert_eq!(runs.iter().map(|r| (r.params.g, r.n)).collect::<Vec<_>>(), vec![(0.05, 30), (0.2, 14)]);
        assert_eq!(runs[1].stem(), "g0.2_N14");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(toml::from_str::<FileConfig>("gee = 1").is_err());
        let flags = Overrides { g: vec![0.1, 0.2], n: vec![4, 6, 8], gt_end: Some(1.0), ..Default::default() };
        assert!(matches!(resolve(FileConfig::default(), flags), Err(CliError::Config(_))));
        let flags = Overrides { g: vec![0.1], n: vec![4], ..Default::default() };
        assert!(matches!(resolve(FileConfig::default(), flags), Err(CliError::Config(_))));
    }

    #[test]
    fn zero_coupling_uses_omega_t() {
        let flags = Overrides { g: vec![0.0], n: vec![8], gt_end: Some(1.0), ..Default::default() };
        let runs = resolve(FileConfig::default(), flags).unwrap();
        assert_eq!(runs[0].t_end(), 1.0);
    }
}
