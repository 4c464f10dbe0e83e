//! Fast evaluation of the history sum `Σ_j ω_{n-j} u_j`.
//!
//! The recent `n0 + 1` values are summed exactly. Older values are split into
//! geometrically growing windows; each window is represented by backward-Euler
//! solutions `y(λ_k)` of `y' = λy + u` at the nodes of a contour quadrature.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::contour::{transfer_function, ContourKind, ContourQuadrature};
use crate::corrections::StartingWeights;
use crate::error::{invalid, Error, Result};
use crate::weights::{GeneratingFunction, WeightTable};

/// Window boundaries for the history decomposition at step `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinPlan {
    pub n: usize,
    pub n0: usize,
    pub base: usize,
    /// Number of levels `L`.
    pub levels: usize,
    /// `b_0..=b_L`.
    pub b: Vec<usize>,
}

impl BinPlan {
    /// Windows `[b_ℓ, b_{ℓ-1} - 1]` for `ℓ = 1..=L` (inclusive bounds).
    pub fn windows(&self) -> Vec<(usize, usize)> {
        (1..=self.levels).map(|l| (self.b[l], self.b[l - 1] - 1)).collect()
    }

    /// The exactly summed window `[n - n0, n]`, clipped at 0.
    pub fn local_window(&self) -> (usize, usize) {
        (self.n.saturating_sub(self.n0), self.n)
    }
}

fn level_count(n: usize, n0: usize, base: usize) -> usize {
    if n < n0 {
        return 0;
    }
    let span = (n - n0 + 1) as u128;
    let mut l = 0usize;
    let mut pow = 1u128;
    while span >= 2 * pow {
        pow *= base as u128;
        l += 1;
    }
    l
}

/// Smallest admissible boundary `b_ℓ` (a multiple of `B^ℓ`), clamped at 0.
fn boundary(n: usize, n0: usize, base: usize, level: usize) -> usize {
    let size = (base as i128).pow(level as u32);
    let num = n as i128 - n0 as i128 + 2 - 2 * size;
    if num <= 0 {
        return 0;
    }
    (((num + size - 1) / size) * size) as usize
}

/// `bin_plan`: levels and boundaries at step `n`.
pub fn bin_plan(n: usize, n0: usize, base: usize) -> Result<BinPlan> {
    if base < 2 {
        return Err(invalid("B", format!("basis must be at least 2, got {base}")));
    }
    let levels = level_count(n, n0, base);
    let mut b = Vec::with_capacity(levels + 1);
    if levels == 0 {
        b.push(0);
    } else {
        b.push(n - n0);
        for l in 1..levels {
            b.push(boundary(n, n0, base, l));
        }
        b.push(0);
    }
    Ok(BinPlan {
        n,
        n0,
        base,
        levels,
        b,
    })
}

/// Parameters of the fast convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastConvParams {
    pub base: usize,
    pub n0: usize,
    pub contour: ContourKind,
    pub nodes: usize,
}

impl Default for FastConvParams {
    fn default() -> Self {
        Self {
            base: 5,
            n0: 50,
            contour: ContourKind::Talbot,
            nodes: 32,
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    block: usize,
    log_one_minus: Vec<Complex64>,
    inv_one_minus: Vec<Complex64>,
    block_factor: Vec<Complex64>,
    coef: Vec<Complex64>,
    blocks: VecDeque<(usize, Vec<Complex64>)>,
    current_start: usize,
    current: Vec<Complex64>,
    max_blocks: usize,
}

/// Incremental state for the fast history sum.
#[derive(Debug, Clone)]
pub struct FastConvState {
    gf: GeneratingFunction,
    params: FastConvParams,
    dim: usize,
    n_max: usize,
    omega_local: Vec<f64>,
    levels: Vec<Level>,
    recent: VecDeque<Vec<f64>>,
    pushed: usize,
    peak_scalars: usize,
}

impl FastConvState {
    /// Builds all levels needed to reach step `n_max`.
    pub fn new(gf: GeneratingFunction, params: FastConvParams, dim: usize, n_max: usize) -> Result<Self> {
        if params.base < 2 {
            return Err(invalid("B", "basis must be at least 2"));
        }
        if params.n0 < 1 {
            return Err(invalid("n0", "local window must hold at least one step"));
        }
        if dim == 0 {
            return Err(invalid("dim", "need at least one component"));
        }
        let tau = gf.tau();
        let table = gf.weights(params.n0);
        let omega_local = table.scaled();
        let top = level_count(n_max, params.n0, params.base);
        let mut levels = Vec::with_capacity(top);
        for l in 1..=top {
            let t_level = (2.0 * (params.base as f64).powi(l as i32) - 2.0 + params.n0 as f64) * tau;
            let quad = ContourQuadrature::new(params.contour, params.nodes, t_level)?;
            let block = params.base.pow(l as u32 - 1);
            let one = Complex64::new(1.0, 0.0);
            let log_one_minus: Vec<Complex64> = quad.upper_nodes().iter().map(|&z| (one - tau * z).ln()).collect();
            let inv_one_minus = quad.upper_nodes().iter().map(|&z| one / (one - tau * z)).collect();
            let block_factor = log_one_minus.iter().map(|&g| (-(block as f64) * g).exp()).collect();
            let coef = quad
                .upper_nodes()
                .iter()
                .zip(quad.upper_weights())
                .map(|(&z, &w)| 2.0 * w * transfer_function(&gf, z))
                .collect();
            levels.push(Level {
                block,
                log_one_minus,
                inv_one_minus,
                block_factor,
                coef,
                blocks: VecDeque::new(),
                current_start: 0,
                current: vec![Complex64::new(0.0, 0.0); params.nodes * dim],
                max_blocks: 0,
            });
        }
        let mut s = Self {
            gf,
            params,
            dim,
            n_max,
            omega_local,
            levels,
            recent: VecDeque::with_capacity(params.n0 + 1),
            pushed: 0,
            peak_scalars: 0,
        };
        s.peak_scalars = s.memory_scalars();
        Ok(s)
    }

    pub fn generating_function(&self) -> &GeneratingFunction {
        &self.gf
    }

    pub fn params(&self) -> FastConvParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of values pushed so far.
    pub fn len(&self) -> usize {
        self.pushed
    }

    pub fn is_empty(&self) -> bool {
        self.pushed == 0
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Largest number of completed blocks ever held by any level.
    pub fn max_blocks_per_level(&self) -> usize {
        self.levels.iter().map(|l| l.max_blocks).max().unwrap_or(0)
    }

    /// Live state size in real scalars (complex values count twice).
    pub fn memory_scalars(&self) -> usize {
        let per_block = 2 * self.params.nodes * self.dim;
        let blocks: usize = self.levels.iter().map(|l| l.blocks.len() + 1).sum();
        blocks * per_block + self.recent.len() * self.dim
    }

    pub fn peak_memory_scalars(&self) -> usize {
        self.peak_scalars
    }

    /// Appends `u_n` for `n = len()`.
    pub fn push(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(invalid("u", format!("expected {} components, got {}", self.dim, u.len())));
        }
        if self.pushed > self.n_max {
            return Err(Error::Capacity {
                horizon: self.n_max,
                index: self.pushed,
            });
        }
        let n = self.pushed;
        let n0 = self.params.n0;
        self.recent.push_back(u.to_vec());
        if self.recent.len() > n0 + 1 {
            self.recent.pop_front();
        }
        if n >= n0 {
            // u_{n - n0} leaves the local window of the next history sum.
            let old = self.recent[self.recent.len() - 1 - n0].clone();
            self.feed_levels(n - n0, &old);
        }
        self.pushed += 1;
        self.evict(n);
        self.peak_scalars = self.peak_scalars.max(self.memory_scalars());
        Ok(())
    }

    pub fn push_scalar(&mut self, u: f64) -> Result<()> {
        self.push(&[u])
    }

    fn feed_levels(&mut self, j: usize, u: &[f64]) {
        let tau = self.gf.tau();
        let dim = self.dim;
        for level in &mut self.levels {
            for (k, inv) in level.inv_one_minus.iter().enumerate() {
                for c in 0..dim {
                    let y = &mut level.current[k * dim + c];
                    *y = (*y + tau * u[c]) * inv;
                }
            }
            if (j + 1) % level.block == 0 {
                let done = std::mem::replace(&mut level.current, vec![Complex64::new(0.0, 0.0); level.coef.len() * dim]);
                level.blocks.push_back((level.current_start, done));
                level.current_start = j + 1;
                level.max_blocks = level.max_blocks.max(level.blocks.len());
            }
        }
    }

    fn evict(&mut self, m: usize) {
        let top = self.levels.len();
        for (i, level) in self.levels.iter_mut().enumerate() {
            let l = i + 1;
            if l == top {
                continue;
            }
            let keep_from = boundary(m, self.params.n0, self.params.base, l);
            while let Some((start, _)) = level.blocks.front() {
                if start + level.block <= keep_from {
                    level.blocks.pop_front();
                } else {
                    break;
                }
            }
        }
    }

    /// `Σ_{j=0}^{n} ω_{n-j} u_j` at the latest step `n = len() - 1`.
    pub fn evaluate(&self) -> Result<Vec<f64>> {
        if self.pushed == 0 {
            return Err(Error::Sequencing { expected: 0, got: 0 });
        }
        self.sum(self.pushed - 1, true)
    }

    /// `Σ_{j=0}^{n-1} ω_{n-j} u_j` for `n = len()`: the history sum of the next
    /// step, excluding the not yet known `u_n`.
    pub fn history(&self) -> Result<Vec<f64>> {
        self.sum(self.pushed, false)
    }

    fn sum(&self, n: usize, include_current: bool) -> Result<Vec<f64>> {
        if n > self.n_max {
            return Err(Error::Capacity {
                horizon: self.n_max,
                index: n,
            });
        }
        let dim = self.dim;
        let mut out = vec![0.0; dim];
        let plan = bin_plan(n, self.params.n0, self.params.base)?;
        // Local window: recent holds u_{len-k..len-1}.
        let (lo, _) = plan.local_window();
        let first = self.pushed - self.recent.len();
        for (i, u) in self.recent.iter().enumerate() {
            let j = first + i;
            if j < lo || (j == n && !include_current) {
                continue;
            }
            let w = self.omega_local[n - j];
            for c in 0..dim {
                out[c] += w * u[c];
            }
        }
        if first > lo {
            return Err(Error::Internal(format!("local window starts at {lo} but buffer starts at {first}")));
        }
        for l in 1..=plan.levels {
            let level = self.levels.get(l - 1).ok_or_else(|| Error::Internal(format!("level {l} missing")))?;
            let (a, b) = (plan.b[l], plan.b[l - 1]);
            let nodes = level.coef.len();
            let mut acc = vec![Complex64::new(0.0, 0.0); nodes * dim];
            let mut cursor = a;
            for (start, y) in &level.blocks {
                if *start < a {
                    continue;
                }
                if *start >= b {
                    break;
                }
                if *start != cursor {
                    return Err(Error::Internal(format!("level {l}: gap at {cursor}, next block starts at {start}")));
                }
                for k in 0..nodes {
                    let f = level.block_factor[k];
                    for c in 0..dim {
                        acc[k * dim + c] = acc[k * dim + c] * f + y[k * dim + c];
                    }
                }
                cursor = start + level.block;
            }
            if cursor != b {
                return Err(Error::Internal(format!(
                    "level {l}: window [{a}, {b}) covered only up to {cursor}"
                )));
            }
            let e = (n - b + 1) as f64;
            for k in 0..nodes {
                let scale = level.coef[k] * (-e * level.log_one_minus[k]).exp();
                for c in 0..dim {
                    out[c] += (scale * acc[k * dim + c]).im;
                }
            }
        }
        Ok(out)
    }
}

/// Block value `y([a,b), λ) = τ Σ_{j=a}^{b-1} (1-τλ)^{-(b-j)} u_j` by direct
/// summation.
pub fn block_value_direct(u: &[f64], a: usize, b: usize, tau: f64, lambda: Complex64) -> Complex64 {
    let d = Complex64::new(1.0, 0.0) - tau * lambda;
    (a..b).map(|j| tau * u[j] * d.powi(-((b - j) as i32))).sum()
}

/// Backward-Euler block value accumulated step by step.
pub fn block_value_recursive(u: &[f64], a: usize, b: usize, tau: f64, lambda: Complex64) -> Complex64 {
    let inv = 1.0 / (Complex64::new(1.0, 0.0) - tau * lambda);
    u[a..b].iter().fold(Complex64::new(0.0, 0.0), |y, &x| (y + tau * x) * inv)
}

/// `fast_discrete_caputo`: the corrected operator at step `n = len() - 1`
/// for a state that was fed the shifted history `u_j - u_0`.
pub fn fast_discrete_caputo(
    state: &FastConvState,
    corr: Option<&StartingWeights>,
    shifted: &[f64],
) -> Result<f64> {
    let n = state.len() - 1;
    let mut s = state.evaluate()?[0];
    if let Some(c) = corr {
        if c.m() > 0 {
            let scale = state.generating_function().scale();
            for (j, w) in c.row(n).iter().enumerate() {
                s += scale * w * shifted[j + 1];
            }
        }
    }
    Ok(s)
}

/// Direct `Σ_{j=0}^{n} ω_{n-j} u_j` for all `n`, the oracle for the fast sum.
pub fn direct_convolution(table: &WeightTable, u: &[f64]) -> Vec<f64> {
    let scale = table.generating_function().scale();
    let w = table.unscaled();
    (0..u.len())
        .map(|n| scale * (0..=n).map(|j| w[n - j] * u[j]).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_matches_hand_example() {
        let p = bin_plan(176, 50, 5).unwrap();
        assert_eq!(p.levels, 3);
        assert_eq!(p.b, vec![126, 120, 100, 0]);
        assert_eq!(p.windows(), vec![(120, 125), (100, 119), (0, 99)]);
        assert_eq!(p.local_window(), (126, 176));
    }

    #[test]
    fn plan_without_levels() {
        let p = bin_plan(50, 50, 5).unwrap();
        assert_eq!(p.levels, 0);
        assert_eq!(p.local_window(), (0, 50));
        assert_eq!(bin_plan(10, 50, 5).unwrap().levels, 0);
        assert!(bin_plan(10, 5, 1).is_err());
    }

    #[test]
    fn plan_partitions_history() {
        for base in [2, 3, 5] {
            for n0 in [1, 7, 50] {
                for n in n0..2000 {
                    let p = bin_plan(n, n0, base).unwrap();
                    let mut covered = 0;
                    for (l, (lo, hi)) in p.windows().into_iter().enumerate().rev() {
                        assert_eq!(lo, covered, "n={n} level {}", l + 1);
                        covered = hi + 1;
                        let level = l + 1;
                        let size = base.pow(level as u32 - 1);
                        assert_eq!(lo % size, 0);
                        assert_eq!((hi + 1) % size, 0);
                        if level < p.levels {
                            let d = n - n0 + 1 - p.b[level];
                            assert!(d >= base.pow(level as u32 - 1) && d <= 2 * base.pow(level as u32) - 1);
                        }
                    }
                    assert_eq!(covered, p.local_window().0);
                }
            }
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let gf = GeneratingFunction::gngf(2, 0.5, 0.01).unwrap();
        let mut s = FastConvState::new(gf, FastConvParams::default(), 1, 600).unwrap();
        for _ in 0..=600 {
            s.push_scalar(0.0).unwrap();
            assert_eq!(s.evaluate().unwrap()[0], 0.0);
        }
        assert!(s.push_scalar(0.0).is_err());
    }

    #[test]
    fn levels_stay_empty_inside_local_window() {
        let gf = GeneratingFunction::gngf(2, 0.5, 0.01).unwrap();
        let mut s = FastConvState::new(gf, FastConvParams::default(), 1, 1000).unwrap();
        for n in 0..50 {
            s.push_scalar(n as f64).unwrap();
        }
        assert!(s.levels.iter().all(|l| l.blocks.is_empty()));
    }

    #[test]
    fn block_recursion_matches_direct_sum() {
        let u: Vec<f64> = (0..40).map(|j| ((j * 7919) % 13) as f64 - 6.0).collect();
        for lambda in [Complex64::new(0.0, 0.0), Complex64::new(-30.0, 12.0), Complex64::new(2.0, 5.0)] {
            let a = block_value_direct(&u, 5, 30, 0.01, lambda);
            let b = block_value_recursive(&u, 5, 30, 0.01, lambda);
            assert!((a - b).norm() <= 1e-13 * a.norm());
        }
        let s: f64 = u[5..30].iter().sum();
        assert!((block_value_recursive(&u, 5, 30, 0.01, Complex64::new(0.0, 0.0)).re - 0.01 * s).abs() < 1e-14);
    }

    #[test]
    fn history_excludes_current_value() {
        let gf = GeneratingFunction::gngf(2, 0.5, 0.01).unwrap();
        let table = gf.weights(400);
        let u: Vec<f64> = (0..=400).map(|j| 1.0 + (j as f64 * 0.01).sin()).collect();
        let mut s = FastConvState::new(gf, FastConvParams::default(), 1, 400).unwrap();
        for n in 0..=400 {
            let h = s.history().unwrap()[0];
            s.push_scalar(u[n]).unwrap();
            let full = s.evaluate().unwrap()[0];
            assert!((full - h - table.omega(0) * u[n]).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }
}
