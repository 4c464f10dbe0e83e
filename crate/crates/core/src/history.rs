//! History-sum backends used by the time steppers.

use serde::{Deserialize, Serialize};

use crate::contour::ContourKind;
use crate::error::{invalid, Error, Result};
use crate::fastconv::{FastConvParams, FastConvState};
use crate::weights::GeneratingFunction;

/// Supplies `Σ_{j=0}^{n-1} ω_{n-j} u_j` for the next step `n`.
pub trait HistoryBackend: Send {
    fn dim(&self) -> usize;

    /// Number of values pushed.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends the next value `u_n`.
    fn push(&mut self, u: &[f64]) -> Result<()>;

    /// History sum for step `n = len()`, excluding `u_n`.
    fn history(&self) -> Result<Vec<f64>>;

    /// Current stored state in real scalars.
    fn memory_scalars(&self) -> usize;

    fn peak_memory_scalars(&self) -> usize;
}

/// Stores every value and sums directly, `O(n)` work per step.
#[derive(Debug, Clone)]
pub struct DirectHistory {
    dim: usize,
    omega: Vec<f64>,
    values: Vec<f64>,
}

impl DirectHistory {
    pub fn new(gf: &GeneratingFunction, dim: usize, n_max: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "need at least one component"));
        }
        Ok(Self {
            dim,
            omega: gf.weights(n_max).scaled(),
            values: Vec::with_capacity((n_max + 1) * dim),
        })
    }
}

impl HistoryBackend for DirectHistory {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    fn push(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(invalid("u", format!("expected {} components, got {}", self.dim, u.len())));
        }
        if self.len() >= self.omega.len() {
            return Err(Error::Capacity {
                horizon: self.omega.len() - 1,
                index: self.len(),
            });
        }
        self.values.extend_from_slice(u);
        Ok(())
    }

    fn history(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n >= self.omega.len() {
            return Err(Error::Capacity {
                horizon: self.omega.len() - 1,
                index: n,
            });
        }
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (j, u) in self.values.chunks_exact(d).enumerate() {
            let w = self.omega[n - j];
            for c in 0..d {
                out[c] += w * u[c];
            }
        }
        Ok(out)
    }

    fn memory_scalars(&self) -> usize {
        self.values.len()
    }

    fn peak_memory_scalars(&self) -> usize {
        self.values.len()
    }
}

impl HistoryBackend for FastConvState {
    fn dim(&self) -> usize {
        FastConvState::dim(self)
    }

    fn len(&self) -> usize {
        FastConvState::len(self)
    }

    fn push(&mut self, u: &[f64]) -> Result<()> {
        FastConvState::push(self, u)
    }

    fn history(&self) -> Result<Vec<f64>> {
        FastConvState::history(self)
    }

    fn memory_scalars(&self) -> usize {
        FastConvState::memory_scalars(self)
    }

    fn peak_memory_scalars(&self) -> usize {
        FastConvState::peak_memory_scalars(self)
    }
}

/// Choice of history backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Backend {
    Direct,
    Fast {
        #[serde(default = "default_base")]
        base: usize,
        #[serde(default = "default_n0")]
        n0: usize,
        #[serde(default = "default_contour")]
        contour: ContourKind,
        /// Half node count; `None` picks 32 for Talbot and the `ε = 1e-10`
        /// rule for the hyperbolic contour.
        #[serde(default)]
        nodes: Option<usize>,
    },
}

fn default_base() -> usize {
    5
}

fn default_n0() -> usize {
    50
}

fn default_contour() -> ContourKind {
    ContourKind::Talbot
}

impl Backend {
    pub fn fast() -> Self {
        Backend::Fast {
            base: 5,
            n0: 50,
            contour: ContourKind::Talbot,
            nodes: None,
        }
    }

    pub fn fast_params(&self, gf: &GeneratingFunction) -> Option<FastConvParams> {
        match *self {
            Backend::Direct => None,
            Backend::Fast {
                base,
                n0,
                contour,
                nodes,
            } => {
                let nodes = nodes.unwrap_or(match contour {
                    ContourKind::Talbot => 32,
                    ContourKind::Hyperbolic => {
                        crate::contour::hyperbolic_node_count(gf.tau(), gf.alpha(), 1e-10)
                    }
                });
                Some(FastConvParams {
                    base,
                    n0,
                    contour,
                    nodes,
                })
            }
        }
    }

    /// Builds a backend able to serve steps up to `n_max`.
    pub fn build(&self, gf: &GeneratingFunction, dim: usize, n_max: usize) -> Result<Box<dyn HistoryBackend>> {
        match self.fast_params(gf) {
            None => Ok(Box::new(DirectHistory::new(gf, dim, n_max)?)),
            Some(p) => Ok(Box::new(FastConvState::new(*gf, p, dim, n_max)?)),
        }
    }
}

impl Default for Backend {
    fn default() -> Self {
        Backend::fast()
    }
}
