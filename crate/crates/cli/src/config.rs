//! `RunConfig`: a TOML file with `scheme`, `backend`, `problem` and `output`
//! blocks. Command-line flags override file values.

use std::path::{Path, PathBuf};

use fracstep::contour::ContourKind;
use fracstep::history::Backend;
use fracstep::odesolve::Exponents;
use fracstep::Family;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scheme: SchemeBlock,
    pub backend: BackendBlock,
    pub problem: ProblemBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeBlock {
    pub family: Option<Family>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    /// Second order for the PDE system.
    pub alpha2: Option<f64>,
    pub kappa: Option<f64>,
    pub lambda: Option<f64>,
    /// Number of multiples `kα`, or explicit exponents.
    pub corrections: Option<Exponents>,
    pub implicit: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Direct,
    Fast,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendBlock {
    pub kind: Option<BackendKind>,
    pub base: Option<usize>,
    pub n0: Option<usize>,
    pub contour: Option<ContourKind>,
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemBlock {
    pub case: Option<String>,
    pub t_end: Option<f64>,
    /// Step sizes such as `"2^-7"` or `"0.01"`.
    pub tau: Option<Vec<String>>,
    /// `"2^-5..2^-9"`.
    pub tau_sweep: Option<String>,
    /// Cells per side for the PDE cases.
    pub cells: Option<usize>,
    /// `implicit` or `exact`.
    pub startup: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    pub snapshots: Option<Vec<f64>>,
    pub save_ref: Option<bool>,
    pub reference: Option<PathBuf>,
    pub metric: Option<String>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(self.scheme, top.scheme, family, p, q, alpha, alpha2, kappa, lambda, corrections, implicit);
        overlay!(self.backend, top.backend, kind, base, n0, contour, nodes);
        overlay!(self.problem, top.problem, case, t_end, tau, tau_sweep, cells, startup);
        overlay!(self.output, top.output, dir, snapshots, save_ref, reference, metric);
        self
    }

    pub fn resolved_backend(&self) -> Backend {
        match self.backend.kind.unwrap_or(BackendKind::Fast) {
            BackendKind::Direct => Backend::Direct,
            BackendKind::Fast => {
                let Backend::Fast { base, n0, contour, .. } = Backend::fast() else {
                    unreachable!()
                };
                Backend::Fast {
                    base: self.backend.base.unwrap_or(base),
                    n0: self.backend.n0.unwrap_or(n0),
                    contour: self.backend.contour.unwrap_or(contour),
                    nodes: self.backend.nodes,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[scheme]\nalpha = [0.5]\nbogus = 1\n");
        assert!(err.is_err());
        let err = toml::from_str::<RunConfig>("[extra]\n");
        assert!(err.is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfig = toml::from_str(
            "[scheme]\nalpha = [0.2]\nkappa = 1.0\n[backend]\nkind = \"direct\"\n[problem]\ncase = \"1.2\"\n",
        )
        .unwrap();
        let mut flags = RunConfig::default();
        flags.scheme.kappa = Some(3.0);
        let merged = file.overlay(&flags);
        assert_eq!(merged.scheme.kappa, Some(3.0));
        assert_eq!(merged.scheme.alpha, Some(vec![0.2]));
        assert_eq!(merged.resolved_backend(), Backend::Direct);
    }

    #[test]
    fn corrections_accept_count_or_list() {
        let a: RunConfig = toml::from_str("[scheme]\ncorrections = 2\n").unwrap();
        assert_eq!(a.scheme.corrections, Some(Exponents::Multiples(2)));
        let b: RunConfig = toml::from_str("[scheme]\ncorrections = [1.0, 1.5]\n").unwrap();
        assert_eq!(b.scheme.corrections, Some(Exponents::Explicit(vec![1.0, 1.5])));
    }
}
