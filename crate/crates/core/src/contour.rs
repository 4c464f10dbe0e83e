//! Contour quadratures for the integral representation of convolution
//! weights,
//!
//! `ω_n = τ/(2πi) ∫_Γ F(λ) e_n(τλ) dλ`,  `e_n(z) = (1 - z)^{-1-n}`,
//!
//! discretized by the trapezoidal rule on a Talbot or hyperbolic contour.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::weights::GeneratingFunction;

const TALBOT_SHIFT: f64 = -0.4814;
const TALBOT_SCALE: f64 = 0.6443;
const TALBOT_SLOPE: f64 = 0.5653;

/// Default angle of the hyperbolic contour.
pub const HYPERBOLIC_PSI: f64 = 0.4 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    Talbot,
    Hyperbolic,
}

impl fmt::Display for ContourKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContourKind::Talbot => f.write_str("talbot"),
            ContourKind::Hyperbolic => f.write_str("hyperbolic"),
        }
    }
}

impl FromStr for ContourKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "talbot" => Ok(ContourKind::Talbot),
            "hyperbolic" => Ok(ContourKind::Hyperbolic),
            other => Err(invalid("contour", format!("unknown contour `{other}`"))),
        }
    }
}

/// Point `z(θ, ν)` of the Talbot contour.
pub fn talbot_point(theta: f64, nu: f64) -> Complex64 {
    let cot_term = if theta == 0.0 { 1.0 } else { theta / theta.tan() };
    nu * (TALBOT_SHIFT + TALBOT_SCALE * Complex64::new(cot_term, TALBOT_SLOPE * theta))
}

fn talbot_derivative(theta: f64, nu: f64) -> Complex64 {
    let d = if theta == 0.0 {
        0.0
    } else {
        1.0 / theta.tan() - theta / theta.sin().powi(2)
    };
    nu * TALBOT_SCALE * Complex64::new(d, TALBOT_SLOPE)
}

/// Point `μ(1 - sin(ψ + iθ)) + σ` of the hyperbolic contour.
pub fn hyperbolic_point(theta: f64, mu: f64, psi: f64, shift: f64) -> Complex64 {
    mu * (1.0 - Complex64::new(psi, theta).sin()) + shift
}

/// Node count `⌈-ln(τ^{1-α} ε)⌉` for the hyperbolic contour.
pub fn hyperbolic_node_count(tau: f64, alpha: f64, eps: f64) -> usize {
    (-(tau.powf(1.0 - alpha) * eps).ln()).ceil().max(4.0) as usize
}

/// Trapezoidal quadrature on a contour, `2N` nodes in conjugate pairs.
///
/// Nodes are stored for `k = -N..N-1` at index `k + N`; the upper half
/// (`Im λ > 0`) occupies indices `N..2N`. The `1/(2πi)` factor and the
/// trapezoidal step are folded into the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourQuadrature {
    kind: ContourKind,
    half: usize,
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
    scale: f64,
    psi: f64,
    shift: f64,
}

impl ContourQuadrature {
    /// Talbot contour with `ν = N / T`.
    pub fn talbot(n: usize, t_level: f64) -> Result<Self> {
        check(n, t_level)?;
        let nu = n as f64 / t_level;
        let mut nodes = Vec::with_capacity(2 * n);
        let mut weights = Vec::with_capacity(2 * n);
        for k in -(n as i64)..n as i64 {
            let theta = (2 * k + 1) as f64 * PI / (2 * n) as f64;
            nodes.push(talbot_point(theta, nu));
            weights.push(talbot_derivative(theta, nu) / (2 * n) as f64);
        }
        Ok(Self {
            kind: ContourKind::Talbot,
            half: n,
            nodes,
            weights,
            scale: t_level,
            psi: 0.0,
            shift: 0.0,
        })
    }

    /// Hyperbolic contour with `μ = N / (2T)`, `ψ = 0.4π`, no shift.
    pub fn hyperbolic(n: usize, t_level: f64) -> Result<Self> {
        Self::hyperbolic_with(n, t_level, HYPERBOLIC_PSI, 0.0)
    }

    pub fn hyperbolic_with(n: usize, t_level: f64, psi: f64, shift: f64) -> Result<Self> {
        check(n, t_level)?;
        let mu = n as f64 / (2.0 * t_level);
        let h = PI / n as f64;
        let mut nodes = Vec::with_capacity(2 * n);
        let mut weights = Vec::with_capacity(2 * n);
        // θ runs downward through the upper half-plane, so traverse it as -θ.
        for k in -(n as i64)..n as i64 {
            let theta = -((k as f64) + 0.5) * h;
            nodes.push(hyperbolic_point(theta, mu, psi, shift));
            let dz = -mu * Complex64::new(psi, theta).cos() * Complex64::i();
            weights.push(-dz * h / (2.0 * PI));
        }
        Ok(Self {
            kind: ContourKind::Hyperbolic,
            half: n,
            nodes,
            weights,
            scale: mu,
            psi,
            shift,
        })
    }

    pub fn new(kind: ContourKind, n: usize, t_level: f64) -> Result<Self> {
        match kind {
            ContourKind::Talbot => Self::talbot(n, t_level),
            ContourKind::Hyperbolic => Self::hyperbolic(n, t_level),
        }
    }

    pub fn kind(&self) -> ContourKind {
        self.kind
    }

    /// Half node count `N`.
    pub fn half_count(&self) -> usize {
        self.half
    }

    /// `T_ℓ` for Talbot, `μ_ℓ` for hyperbolic.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `(ψ, σ)` of the hyperbolic contour.
    pub fn hyperbolic_params(&self) -> (f64, f64) {
        (self.psi, self.shift)
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn upper_nodes(&self) -> &[Complex64] {
        &self.nodes[self.half..]
    }

    pub fn upper_weights(&self) -> &[Complex64] {
        &self.weights[self.half..]
    }

    /// Writes `k,re_lambda,im_lambda,re_weight,im_weight` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,re_lambda,im_lambda,re_weight,im_weight")?;
        for (i, (l, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let k = i as i64 - self.half as i64;
            writeln!(out, "{k},{:.17e},{:.17e},{:.17e},{:.17e}", l.re, l.im, w.re, w.im)?;
        }
        Ok(())
    }
}

fn check(n: usize, t_level: f64) -> Result<()> {
    if n < 4 {
        return Err(invalid("N", format!("need at least 4 nodes, got {n}")));
    }
    if !(t_level > 0.0) || !t_level.is_finite() {
        return Err(invalid("T", format!("level horizon must be positive, got {t_level}")));
    }
    Ok(())
}

/// `talbot_quadrature`.
pub fn talbot_quadrature(n: usize, t_level: f64) -> Result<ContourQuadrature> {
    ContourQuadrature::talbot(n, t_level)
}

/// `hyperbolic_quadrature`. With `n = None` the node count is derived
/// from `(τ, α, ε)`.
pub fn hyperbolic_quadrature(
    n: Option<usize>,
    t_level: f64,
    tau: f64,
    alpha: f64,
    eps: f64,
) -> Result<ContourQuadrature> {
    let n = n.unwrap_or_else(|| hyperbolic_node_count(tau, alpha, eps));
    ContourQuadrature::hyperbolic(n, t_level)
}

/// Transfer function `F(λ)` with `ω(p, α, τ, z) = F((1 - z)/τ)`.
pub fn transfer_function(gf: &GeneratingFunction, lambda: Complex64) -> Complex64 {
    gf.symbol_at_difference(lambda * gf.tau()) * gf.scale()
}

/// Backward-Euler kernel `e_n(z) = (1 - z)^{-1-n}`.
pub fn kernel_e(n: usize, z: Complex64) -> Result<Complex64> {
    let d = Complex64::new(1.0, 0.0) - z;
    if d == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole);
    }
    Ok((-(n as f64 + 1.0) * d.ln()).exp())
}

/// Reconstructs `ω_n` from the contour integral.
pub fn weight_from_contour(gf: &GeneratingFunction, quad: &ContourQuadrature, n: usize) -> f64 {
    let tau = gf.tau();
    let s: Complex64 = quad
        .upper_nodes()
        .iter()
        .zip(quad.upper_weights())
        .map(|(&l, &w)| {
            let d = Complex64::new(1.0, 0.0) - tau * l;
            w * (-(n as f64 + 1.0) * d.ln()).exp() * transfer_function(gf, l)
        })
        .sum();
    2.0 * tau * s.im
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn talbot_node_at_quarter_turn() {
        let z = talbot_point(PI / 2.0, 32.0);
        assert!((z.re - -15.4048).abs() < 1e-3, "{z}");
        assert!((z.im - 18.3069).abs() < 1e-3, "{z}");
    }

    #[test]
    fn talbot_limit_at_zero() {
        let z = talbot_point(1e-9, 1.0);
        assert_relative_eq!(z.re, -0.4814 + 0.6443, epsilon = 1e-12);
        assert_eq!(talbot_point(0.0, 1.0).re, -0.4814 + 0.6443);
    }

    #[test]
    fn hyperbolic_vertex_and_node_count() {
        let z = hyperbolic_point(0.0, 1.0, 0.4 * PI, 0.0);
        assert!((z.re - 0.048943).abs() < 1e-6);
        assert_eq!(z.im, 0.0);
        assert_eq!(hyperbolic_node_count(0.01, 0.5, 1e-10), 26);
    }

    #[test]
    fn nodes_come_in_conjugate_pairs() {
        for quad in [
            ContourQuadrature::talbot(16, 2.0).unwrap(),
            ContourQuadrature::hyperbolic(16, 2.0).unwrap(),
        ] {
            let n = quad.half_count();
            for k in 0..n {
                let a = quad.nodes()[n + k];
                let b = quad.nodes()[n - 1 - k];
                assert!((a - b.conj()).norm() < 1e-12 * a.norm());
                assert!(a.im > 0.0);
                let wa = quad.weights()[n + k];
                let wb = quad.weights()[n - 1 - k];
                assert!((wa + wb.conj()).norm() < 1e-12 * wa.norm());
            }
        }
    }

    #[test]
    fn transfer_function_examples() {
        let gf = GeneratingFunction::gngf(2, 0.5, 1.0).unwrap();
        assert_relative_eq!(transfer_function(&gf, Complex64::new(1.0, 0.0)).re, 1.25, epsilon = 1e-15);
        let l = Complex64::new(0.3, 2.0);
        let g1 = GeneratingFunction::gngf(1, 0.7, 0.1).unwrap();
        assert!((transfer_function(&g1, l) - l.powf(0.7)).norm() < 1e-13);
        let f2 = GeneratingFunction::fbdf(2, 0.7, 0.1).unwrap();
        let expected = l.powf(0.7) * (1.0 + 0.1 * l / 2.0).powf(0.7);
        assert!((transfer_function(&f2, l) - expected).norm() < 1e-13);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_e(0, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        assert!((kernel_e(1, Complex64::new(0.5, 0.0)).unwrap() - 4.0).norm() < 1e-14);
        assert_eq!(kernel_e(3, Complex64::new(1.0, 0.0)), Err(Error::Pole));
    }

    #[test]
    fn halved_sum_matches_full_sum() {
        let gf = GeneratingFunction::gngf(2, 0.5, 0.01).unwrap();
        let quad = ContourQuadrature::talbot(32, 1.0).unwrap();
        let n = 80;
        let full: Complex64 = quad
            .nodes()
            .iter()
            .zip(quad.weights())
            .map(|(&l, &w)| w * kernel_e(n, l * 0.01).unwrap() * transfer_function(&gf, l))
            .sum();
        assert_relative_eq!(0.01 * full.im, weight_from_contour(&gf, &quad, n), max_relative = 1e-12);
    }

    #[test]
    fn reconstruction_within_level_window() {
        let tau = 0.01;
        for gf in [
            GeneratingFunction::gngf(2, 0.5, tau).unwrap(),
            GeneratingFunction::fbdf(2, 0.5, tau).unwrap(),
        ] {
            let table = gf.weights(298);
            let t_level = (2.0 * 125.0 - 2.0 + 50.0) * tau;
            let talbot = ContourQuadrature::talbot(32, t_level).unwrap();
            let hyper = ContourQuadrature::hyperbolic(hyperbolic_node_count(tau, 0.5, 1e-10), t_level).unwrap();
            for n in 55..=298 {
                let exact = table.omega(n);
                for quad in [&talbot, &hyper] {
                    let approx = weight_from_contour(&gf, quad, n);
                    assert!(((approx - exact) / exact).abs() <= 1e-8, "{:?} n={n}: {approx} vs {exact}", quad.kind());
                }
            }
        }
    }
}
