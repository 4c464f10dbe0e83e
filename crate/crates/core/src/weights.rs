//! Convolution weights of fractional linear multistep methods.
//!
//! The weights `ω_n` are the Maclaurin coefficients of one of two generating
//! functions, both raised to a fractional power `α`:
//!
//! * FBDF-p: `(Σ_{k=1}^p (1-z)^k / k)^α / τ^α`
//! * GNGF-p: `(1-z)^α Σ_{k=0}^{p-1} g_k (1-z)^k / τ^α`
//!
//! Throughout the crate the *unscaled* weights `ω^(α)_n = τ^α ω_n` are kept
//! separately from the step-size scaling.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported method order.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Fractional backward differentiation formula.
    Fbdf,
    /// Generalized Newton–Gregory formula.
    Gngf,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Fbdf => f.write_str("fbdf"),
            Family::Gngf => f.write_str("gngf"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fbdf" => Ok(Family::Fbdf),
            "gngf" => Ok(Family::Gngf),
            other => Err(invalid("family", format!("unknown family `{other}` (expected fbdf or gngf)"))),
        }
    }
}

/// A generating function `ω(p, α, τ, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratingFunction {
    family: Family,
    order: usize,
    alpha: f64,
    tau: f64,
}

impl GeneratingFunction {
    /// Validates `1 <= order <= 6`, `tau > 0` and `alpha ∈ (-1, 0) ∪ (0, 1]`.
    pub fn new(family: Family, order: usize, alpha: f64, tau: f64) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::UnsupportedOrder {
                what: "generating function",
                order,
                supported: "1..=6",
            });
        }
        if !(alpha > -1.0 && alpha <= 1.0) || alpha == 0.0 || !alpha.is_finite() {
            return Err(invalid("alpha", format!("{alpha} is outside (-1, 0) ∪ (0, 1]")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid("tau", format!("step size must be positive, got {tau}")));
        }
        Ok(Self {
            family,
            order,
            alpha,
            tau,
        })
    }

    pub fn fbdf(order: usize, alpha: f64, tau: f64) -> Result<Self> {
        Self::new(Family::Fbdf, order, alpha, tau)
    }

    pub fn gngf(order: usize, alpha: f64, tau: f64) -> Result<Self> {
        Self::new(Family::Gngf, order, alpha, tau)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same method with a different step size.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.family, self.order, self.alpha, tau)
    }

    /// `τ^{-α}`, the factor between scaled and unscaled weights.
    pub fn scale(&self) -> f64 {
        self.tau.powf(-self.alpha)
    }

    /// Evaluates the unscaled symbol `ω(p, α, 1, z)` on the principal branch.
    pub fn symbol(&self, z: Complex64) -> Complex64 {
        self.symbol_at_difference(Complex64::new(1.0, 0.0) - z)
    }

    /// `ω(p, α, 1, 1 - x)`, the symbol as a function of `x = 1 - z`.
    ///
    /// For FBDF the value is `x^α (Σ_k x^{k-1}/k)^α` with each factor on its
    /// principal branch, which is the analytic continuation from `x > 0`
    /// into the slit plane.
    pub fn symbol_at_difference(&self, x: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let tail = match self.family {
            Family::Fbdf => {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut pow = one;
                for k in 1..=self.order {
                    acc += pow / k as f64;
                    pow *= x;
                }
                if self.order == 1 {
                    one
                } else {
                    acc.powf(self.alpha)
                }
            }
            Family::Gngf => {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut pow = one;
                for gk in gngf_coefficients_unchecked(self.alpha, self.order) {
                    acc += pow * gk;
                    pow *= x;
                }
                acc
            }
        };
        let lead = if x == Complex64::new(0.0, 0.0) {
            x
        } else {
            x.powf(self.alpha)
        };
        lead * tail
    }

    /// Unscaled weights `ω^(α)_0..=ω^(α)_{n_max}`.
    pub fn unscaled_weights(&self, n_max: usize) -> Vec<f64> {
        let len = n_max + 1;
        match self.family {
            Family::Fbdf => {
                let p = fbdf_polynomial(self.order);
                if self.alpha == 1.0 {
                    let mut out = vec![0.0; len];
                    for (o, c) in out.iter_mut().zip(&p) {
                        *o = *c;
                    }
                    out
                } else {
                    power_series(&p, self.alpha, len)
                }
            }
            Family::Gngf => {
                let poly = gngf_polynomial(self.alpha, self.order);
                if self.alpha == 1.0 {
                    // (1 - z) * poly(z), a polynomial of degree p.
                    let mut out = vec![0.0; len];
                    for (i, c) in poly.iter().enumerate() {
                        if i < len {
                            out[i] += c;
                        }
                        if i + 1 < len {
                            out[i + 1] -= c;
                        }
                    }
                    out
                } else {
                    let binom = binomial_series(self.alpha, len);
                    multiply_by_polynomial(&binom, &poly)
                }
            }
        }
    }

    /// `convolution_weights`: the scaled weights `ω_0..=ω_{n_max}`.
    pub fn weights(&self, n_max: usize) -> WeightTable {
        WeightTable {
            gf: *self,
            unscaled: self.unscaled_weights(n_max),
        }
    }
}

impl fmt::Display for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "family={},p={},alpha={},tau={}",
            self.family, self.order, self.alpha, self.tau
        )
    }
}

/// Closed-form coefficients `g_0..g_{p-1}` of the generalized Newton–Gregory
/// correction polynomial.
pub fn gngf_coefficients(alpha: f64, p: usize) -> Result<Vec<f64>> {
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(Error::UnsupportedOrder {
            what: "GNGF coefficients",
            order: p,
            supported: "1..=6",
        });
    }
    Ok(gngf_coefficients_unchecked(alpha, p))
}

fn gngf_coefficients_unchecked(a: f64, p: usize) -> Vec<f64> {
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let a5 = a4 * a;
    let all = [
        1.0,
        a / 2.0,
        a2 / 8.0 + 5.0 * a / 24.0,
        a3 / 48.0 + 5.0 * a2 / 48.0 + a / 8.0,
        a4 / 384.0 + 5.0 * a3 / 192.0 + 97.0 * a2 / 1152.0 + 251.0 * a / 2880.0,
        a5 / 3840.0 + 5.0 * a4 / 1152.0 + 61.0 * a3 / 2304.0 + 401.0 * a2 / 5760.0 + 19.0 * a / 288.0,
    ];
    all[..p].to_vec()
}

/// Coefficients in `z` of `Σ_{k=1}^p (1-z)^k / k`.
fn fbdf_polynomial(p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p + 1];
    for k in 1..=p {
        for (i, c) in expand_one_minus_z(k).into_iter().enumerate() {
            out[i] += c / k as f64;
        }
    }
    out
}

/// Coefficients in `z` of `Σ_{k=0}^{p-1} g_k (1-z)^k`.
fn gngf_polynomial(alpha: f64, p: usize) -> Vec<f64> {
    let g = gngf_coefficients_unchecked(alpha, p);
    let mut out = vec![0.0; p];
    for (k, gk) in g.iter().enumerate() {
        for (i, c) in expand_one_minus_z(k).into_iter().enumerate() {
            out[i] += gk * c;
        }
    }
    out
}

fn expand_one_minus_z(k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k + 1];
    c[0] = 1.0;
    for i in 1..=k {
        c[i] = -c[i - 1] * (k + 1 - i) as f64 / i as f64;
    }
    c
}

/// Coefficients of `(1 - z)^β`, `len` terms.
pub(crate) fn binomial_series(beta: f64, len: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(len);
    if len == 0 {
        return c;
    }
    c.push(1.0);
    for k in 1..len {
        let prev = c[k - 1];
        c.push(prev * (1.0 - (beta + 1.0) / k as f64));
    }
    c
}

/// Coefficients of `a(z)^α` for a polynomial `a` with `a_0 > 0`, by the
/// J.C.P. Miller power recurrence
/// `n a_0 b_n = Σ_{k=1}^{min(n,deg)} ((α+1)k - n) a_k b_{n-k}`.
pub(crate) fn power_series(a: &[f64], alpha: f64, len: usize) -> Vec<f64> {
    assert!(a[0] > 0.0, "power series needs a positive constant term");
    let deg = a.len() - 1;
    let mut b = Vec::with_capacity(len);
    if len == 0 {
        return b;
    }
    b.push(a[0].powf(alpha));
    for n in 1..len {
        let mut s = 0.0;
        for k in 1..=deg.min(n) {
            s += ((alpha + 1.0) * k as f64 - n as f64) * a[k] * b[n - k];
        }
        b.push(s / (n as f64 * a[0]));
    }
    b
}

fn multiply_by_polynomial(series: &[f64], poly: &[f64]) -> Vec<f64> {
    (0..series.len())
        .map(|n| {
            poly.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, pk)| pk * series[n - k])
                .sum()
        })
        .collect()
}

/// Generated weights together with the generating function they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    gf: GeneratingFunction,
    unscaled: Vec<f64>,
}

impl WeightTable {
    pub fn generating_function(&self) -> &GeneratingFunction {
        &self.gf
    }

    pub fn len(&self) -> usize {
        self.unscaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unscaled.is_empty()
    }

    /// Scaled weight `ω_n`.
    pub fn omega(&self, n: usize) -> f64 {
        self.unscaled[n] * self.gf.scale()
    }

    /// Unscaled weight `ω^(α)_n`.
    pub fn omega_alpha(&self, n: usize) -> f64 {
        self.unscaled[n]
    }

    pub fn unscaled(&self) -> &[f64] {
        &self.unscaled
    }

    pub fn scaled(&self) -> Vec<f64> {
        let s = self.gf.scale();
        self.unscaled.iter().map(|w| w * s).collect()
    }

    /// Partial sums `Σ_{i<=k} ω^(α)_i`, accumulated with Neumaier compensation.
    pub fn unscaled_partial_sums(&self) -> Vec<f64> {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        self.unscaled
            .iter()
            .map(|&w| {
                let t = sum + w;
                if sum.abs() >= w.abs() {
                    comp += (sum - t) + w;
                } else {
                    comp += (w - t) + sum;
                }
                sum = t;
                sum + comp
            })
            .collect()
    }

    /// Writes `n,omega_n` rows after a `# family=..,p=..,alpha=..,tau=..` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {}", self.gf)?;
        writeln!(out, "n,omega_n")?;
        for n in 0..self.len() {
            writeln!(out, "{},{:.17e}", n, self.omega(n))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gngf_coefficients_closed_form() {
        assert_eq!(gngf_coefficients(0.5, 2).unwrap(), vec![1.0, 0.25]);
        assert_eq!(gngf_coefficients(1.0, 1).unwrap(), vec![1.0]);
        let g = gngf_coefficients(0.5, 3).unwrap();
        assert_relative_eq!(g[2], 0.25 / 8.0 + 2.5 / 24.0, epsilon = 1e-15);
        assert_relative_eq!(g[2], 0.135_416_666_666_666_66, epsilon = 1e-15);
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        assert!(matches!(gngf_coefficients(0.5, 0), Err(Error::UnsupportedOrder { .. })));
        assert!(matches!(gngf_coefficients(0.5, 7), Err(Error::UnsupportedOrder { .. })));
        assert!(GeneratingFunction::fbdf(7, 0.5, 1.0).is_err());
    }

    #[test]
    fn invalid_alpha_and_tau() {
        assert!(GeneratingFunction::gngf(2, 0.0, 1.0).is_err());
        assert!(GeneratingFunction::gngf(2, 1.2, 1.0).is_err());
        assert!(GeneratingFunction::gngf(2, -1.0, 1.0).is_err());
        assert!(GeneratingFunction::gngf(2, 0.5, 0.0).is_err());
        assert!(GeneratingFunction::gngf(2, 1.0, 0.1).is_ok());
        assert!(GeneratingFunction::gngf(2, -0.5, 0.1).is_ok());
    }

    #[test]
    fn fbdf1_binomial_values() {
        let w = GeneratingFunction::fbdf(1, 0.5, 1.0).unwrap().weights(2);
        assert_relative_eq!(w.omega(0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(w.omega(1), -0.5, epsilon = 1e-15);
        assert_relative_eq!(w.omega(2), -0.125, epsilon = 1e-15);
    }

    #[test]
    fn gngf2_constant_term() {
        let w = GeneratingFunction::gngf(2, 0.5, 1.0).unwrap().weights(0);
        assert_relative_eq!(w.omega(0), 1.25, epsilon = 1e-15);
        let w = GeneratingFunction::gngf(2, 0.5, 0.01).unwrap().weights(0);
        assert_relative_eq!(w.omega(0), 1.25 * 0.01f64.powf(-0.5), epsilon = 1e-13);
    }

    #[test]
    fn fbdf1_equals_gngf1() {
        for alpha in [-0.5, 0.3, 0.7, 1.0] {
            let a = GeneratingFunction::fbdf(1, alpha, 1.0).unwrap().unscaled_weights(10_000);
            let b = GeneratingFunction::gngf(1, alpha, 1.0).unwrap().unscaled_weights(10_000);
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-15, "alpha {alpha}: {diff}");
        }
    }

    #[test]
    fn integer_alpha_gives_finite_stencils() {
        // α = 1 reduces to the classical BDF-p / backward difference stencils.
        let w = GeneratingFunction::fbdf(2, 1.0, 1.0).unwrap().unscaled_weights(6);
        assert_relative_eq!(w[0], 1.5, epsilon = 1e-15);
        assert_relative_eq!(w[1], -2.0, epsilon = 1e-15);
        assert_relative_eq!(w[2], 0.5, epsilon = 1e-15);
        assert!(w[3..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn partial_sums_match_symbol_over_one_minus_z() {
        let gf = GeneratingFunction::gngf(2, 0.4, 1.0).unwrap();
        let table = gf.weights(50);
        let ps = table.unscaled_partial_sums();
        // Σ ω_i = coefficients of (1-z)^{α-1} (1 + α/2 - α/2 z)
        let binom = binomial_series(0.4 - 1.0, 51);
        for n in 0..=50 {
            let expected = binom[n] * 1.2 - if n > 0 { binom[n - 1] * 0.2 } else { 0.0 };
            assert_relative_eq!(ps[n], expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn csv_header_records_parameters() {
        let table = GeneratingFunction::gngf(2, 0.5, 1.0).unwrap().weights(3);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# family=gngf,p=2,alpha=0.5,tau=1");
        assert_eq!(lines.next().unwrap(), "n,omega_n");
        assert_eq!(text.lines().count(), 6);
    }
}
