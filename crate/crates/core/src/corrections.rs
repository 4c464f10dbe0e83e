//! Starting weights for the discrete operator and correction weights for the
//! perturbation terms.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::weights::{GeneratingFunction, WeightTable};

/// Largest supported number of correction exponents.
pub const MAX_CORRECTIONS: usize = 6;

/// Moment matrices whose condition estimate exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1.0e13;

const DIRECT_LIMIT: usize = 4096;

/// `E_q^n(u)` for `q ∈ {1, 2}`. `u` holds the most recent values, oldest first.
pub fn perturbation(q: usize, u: &[f64]) -> Result<f64> {
    let need = match q {
        1 | 2 => q + 1,
        _ => {
            return Err(Error::UnsupportedOrder {
                what: "perturbation",
                order: q,
                supported: "1 or 2",
            })
        }
    };
    if u.len() < need {
        return Err(invalid("u", format!("perturbation of order {q} needs {need} values, got {}", u.len())));
    }
    let k = u.len();
    Ok(match q {
        1 => u[k - 1] - u[k - 2],
        _ => u[k - 1] - 2.0 * u[k - 2] + u[k - 3],
    })
}

/// `E_q^n(t^σ)` on the unit grid, computed without catastrophic cancellation.
pub(crate) fn perturbation_of_power(q: usize, sigma: f64, n: usize) -> f64 {
    let nf = n as f64;
    let shifted = |k: f64| (sigma * (-k / nf).ln_1p()).exp_m1();
    match q {
        1 => -nf.powf(sigma) * shifted(1.0),
        _ => {
            if n == 2 {
                // (1 - 2/n) = 0: the log form breaks down at the endpoint.
                2f64.powf(sigma) - 2.0
            } else {
                nf.powf(sigma) * (shifted(2.0) - 2.0 * shifted(1.0))
            }
        }
    }
}

fn validate_exponents(name: &'static str, sigma: &[f64]) -> Result<()> {
    if sigma.len() > MAX_CORRECTIONS {
        return Err(invalid(name, format!("at most {MAX_CORRECTIONS} exponents are supported, got {}", sigma.len())));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(invalid(name, "exponents must be positive and finite"));
    }
    if sigma.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(name, "exponents must be strictly increasing"));
    }
    Ok(())
}

fn moment_matrix(sigma: &[f64]) -> Result<Option<Lu>> {
    if sigma.is_empty() {
        return Ok(None);
    }
    let m = sigma.len();
    let rows: Vec<Vec<f64>> = sigma
        .iter()
        .map(|&s| (1..=m).map(|j| (j as f64).powf(s)).collect())
        .collect();
    let lu = Lu::new(&Matrix::from_rows(&rows)).map_err(|_| Error::IllConditioned { condition: f64::INFINITY })?;
    if !(lu.condition() <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            condition: lu.condition(),
        });
    }
    Ok(Some(lu))
}

/// `S(n) = Σ_{j=0}^n ω_{n-j} j^σ` for all `n <= n_max`.
fn power_convolution(omega: &[f64], partial: &[f64], sigma: f64) -> Vec<f64> {
    let len = omega.len();
    let direct_len = len.min(DIRECT_LIMIT + 1);
    let pw: Vec<f64> = (0..len).map(|j| (j as f64).powf(sigma)).collect();
    let mut out: Vec<f64> = (0..direct_len)
        .into_par_iter()
        .map(|n| (1..=n).map(|j| omega[n - j] * pw[j]).sum())
        .collect();
    if len > direct_len {
        // Summation by parts: S(n) = Σ_{i=1}^n (i^σ - (i-1)^σ) Ω_{n-i}.
        let delta: Vec<f64> = (0..len).map(|i| if i == 0 { 0.0 } else { pw[i] - pw[i - 1] }).collect();
        let conv = fft_convolve(&delta, partial, len);
        out.extend_from_slice(&conv[direct_len..len]);
    }
    out
}

/// First `len` entries of the linear convolution of `a` and `b`.
pub(crate) fn fft_convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let size = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(size, Complex::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.iter().take(len).map(|c| c.re / size as f64).collect()
}

/// Starting weights `w^(α)_{n,j}`, `j = 1..m`, for every `n <= n_max`.
#[derive(Debug, Clone)]
pub struct StartingWeights {
    sigma: Vec<f64>,
    rows: Vec<f64>,
    condition: f64,
}

impl StartingWeights {
    pub fn new(gf: &GeneratingFunction, sigma: &[f64], n_max: usize) -> Result<Self> {
        let table = gf.weights(n_max);
        Self::from_table(&table, sigma)
    }

    pub fn from_table(table: &WeightTable, sigma: &[f64]) -> Result<Self> {
        validate_exponents("sigma", sigma)?;
        let m = sigma.len();
        let len = table.len();
        let Some(lu) = moment_matrix(sigma)? else {
            return Ok(Self {
                sigma: Vec::new(),
                rows: Vec::new(),
                condition: 1.0,
            });
        };
        let alpha = table.generating_function().alpha();
        let omega = table.unscaled();
        let partial = table.unscaled_partial_sums();
        let sums: Vec<Vec<f64>> = sigma.iter().map(|&s| power_convolution(omega, &partial, s)).collect();
        let ratios: Vec<f64> = sigma
            .iter()
            .map(|&s| (ln_gamma(s + 1.0) - ln_gamma(s + 1.0 - alpha)).exp())
            .collect();
        let mut rows = vec![0.0; len * m];
        rows[m..]
            .par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, row)| {
                let n = i + 1;
                let rhs: Vec<f64> = (0..m)
                    .map(|r| ratios[r] * (n as f64).powf(sigma[r] - alpha) - sums[r][n])
                    .collect();
                row.copy_from_slice(&lu.solve(&rhs));
            });
        Ok(Self {
            sigma: sigma.to_vec(),
            rows,
            condition: lu.condition(),
        })
    }

    pub fn m(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn n_max(&self) -> usize {
        if self.sigma.is_empty() {
            usize::MAX
        } else {
            self.rows.len() / self.sigma.len() - 1
        }
    }

    /// `w^(α)_{n,1..m}`; empty when `m = 0`.
    pub fn row(&self, n: usize) -> &[f64] {
        let m = self.sigma.len();
        &self.rows[n * m..(n + 1) * m]
    }
}

/// `starting_weights`: the single row `w^(α)_{n,1..m}`.
pub fn starting_weights(gf: &GeneratingFunction, sigma: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < sigma.len() {
        return Err(invalid("n", format!("need n >= m = {}, got {n}", sigma.len())));
    }
    Ok(StartingWeights::new(gf, sigma, n)?.row(n).to_vec())
}

/// Correction weights for `E_q^{n,m,σ}`; rows are produced on demand.
#[derive(Debug, Clone)]
pub struct PerturbationWeights {
    q: usize,
    sigma: Vec<f64>,
    lu: Option<Lu>,
}

impl PerturbationWeights {
    pub fn new(q: usize, sigma: &[f64]) -> Result<Self> {
        if !(1..=2).contains(&q) {
            return Err(Error::UnsupportedOrder {
                what: "perturbation",
                order: q,
                supported: "1 or 2",
            });
        }
        validate_exponents("sigma", sigma)?;
        Ok(Self {
            q,
            sigma: sigma.to_vec(),
            lu: moment_matrix(sigma)?,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn condition(&self) -> f64 {
        self.lu.as_ref().map_or(1.0, Lu::condition)
    }

    /// `w^(u)_{n,1..m}` for `n >= q`.
    pub fn row(&self, n: usize) -> Vec<f64> {
        match &self.lu {
            None => Vec::new(),
            Some(lu) => {
                let rhs: Vec<f64> = self.sigma.iter().map(|&s| perturbation_of_power(self.q, s, n)).collect();
                lu.solve(&rhs)
            }
        }
    }

    /// `E_q^{n,m,σ}(u)` with `u` the full history `u_0..u_n`.
    pub fn corrected(&self, u: &[f64]) -> Result<f64> {
        let n = u.len() - 1;
        let mut e = perturbation(self.q, u)?;
        for (j, w) in self.row(n).iter().enumerate() {
            e -= w * (u[j + 1] - u[0]);
        }
        Ok(e)
    }
}

/// `correction_weights_E`: the row `w^(u)_{n,1..m}`. The weights are
/// independent of the step size, which is accepted for interface symmetry.
pub fn correction_weights_e(q: usize, sigma: &[f64], n: usize, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "step size must be positive"));
    }
    if n < q.max(sigma.len()) {
        return Err(invalid("n", format!("need n >= max(q, m), got {n}")));
    }
    Ok(PerturbationWeights::new(q, sigma)?.row(n))
}

/// The full set of correction data used by a scheme.
#[derive(Debug, Clone)]
pub struct CorrectionSet {
    pub operator: StartingWeights,
    pub u: PerturbationWeights,
    pub f: PerturbationWeights,
}

impl CorrectionSet {
    pub fn new(
        table: &WeightTable,
        q: usize,
        sigma: &[f64],
        sigma_u: &[f64],
        delta: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            operator: StartingWeights::from_table(table, sigma)?,
            u: PerturbationWeights::new(q, sigma_u)?,
            f: PerturbationWeights::new(q, delta)?,
        })
    }
}

/// `discrete_caputo_direct`: the corrected operator at step `n`, with the
/// history sum evaluated directly. `corr` may be `None` for `m = 0`.
pub fn discrete_caputo_direct(
    table: &WeightTable,
    corr: Option<&StartingWeights>,
    u: &[f64],
    u0: f64,
    n: usize,
) -> f64 {
    let omega = table.unscaled();
    let mut s: f64 = (0..=n).map(|j| omega[n - j] * (u[j] - u0)).sum();
    if let Some(c) = corr {
        if c.m() > 0 {
            for (j, w) in c.row(n).iter().enumerate() {
                s += w * (u[j + 1] - u0);
            }
        }
    }
    s * table.generating_function().scale()
}
