//! The scalar test problems `D^α u = -u + f(u, t)`.
//!
//! * 1.1: `f = -2u`, `u_0 = 3`, exact `3 E_α(-3 t^α)`.
//! * 1.2: `f = -u² + g(t)` with exact `u = 2 + t + t²/2 + t³/3 + t⁴/4`.
//! * 1.3: `f = u(1 - u²) + 2 cos(2πt)`, `u_0 = 1`, no closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::history::Backend;
use crate::mittag_leffler::mittag_leffler;
use crate::odesolve::{Exponents, Problem, SchemeConfig};
use crate::weights::Family;

pub const LAMBDA: f64 = -1.0;

/// `κ` for case 1.2 from the bound `∂f/∂u ≥ -434 5/6` on `[0, 5]`.
pub const CASE_II_KAPPA: f64 = 325.875;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OdeCase {
    #[serde(rename = "1.1")]
    Relaxation,
    #[serde(rename = "1.2")]
    Polynomial,
    #[serde(rename = "1.3")]
    Forced,
}

impl fmt::Display for OdeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OdeCase::Relaxation => "1.1",
            OdeCase::Polynomial => "1.2",
            OdeCase::Forced => "1.3",
        })
    }
}

impl FromStr for OdeCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1.1" => Ok(OdeCase::Relaxation),
            "1.2" => Ok(OdeCase::Polynomial),
            "1.3" => Ok(OdeCase::Forced),
            _ => Err(invalid("case", format!("unknown ODE case `{s}`"))),
        }
    }
}

fn polynomial_exact(t: f64) -> f64 {
    2.0 + t + t * t / 2.0 + t.powi(3) / 3.0 + t.powi(4) / 4.0
}

/// `D^α` of the case 1.2 solution: `Σ_k Γ(k) / Γ(k + 1 - α) t^{k-α}`.
fn polynomial_caputo(alpha: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    (1..=4)
        .map(|k| gamma(k as f64) / gamma(k as f64 + 1.0 - alpha) * t.powf(k as f64 - alpha))
        .sum()
}

impl OdeCase {
    pub fn all() -> [OdeCase; 3] {
        [OdeCase::Relaxation, OdeCase::Polynomial, OdeCase::Forced]
    }

    pub fn initial_value(&self) -> f64 {
        match self {
            OdeCase::Relaxation => 3.0,
            OdeCase::Polynomial => 2.0,
            OdeCase::Forced => 1.0,
        }
    }

    pub fn default_horizon(&self) -> f64 {
        match self {
            OdeCase::Relaxation => 40.0,
            OdeCase::Polynomial => 5.0,
            OdeCase::Forced => 50.0,
        }
    }

    pub fn default_kappa(&self) -> f64 {
        match self {
            OdeCase::Relaxation => 2.0,
            OdeCase::Polynomial => CASE_II_KAPPA,
            OdeCase::Forced => 3.0,
        }
    }

    /// Corrections used in the convergence tables.
    pub fn default_corrections(&self) -> Exponents {
        match self {
            OdeCase::Relaxation => Exponents::Multiples(3),
            OdeCase::Polynomial => Exponents::Explicit(vec![1.0]),
            OdeCase::Forced => Exponents::Multiples(1),
        }
    }

    pub fn problem(&self, alpha: f64) -> Problem {
        match self {
            OdeCase::Relaxation => {
                Problem::scalar(3.0, |_, u| -2.0 * u).with_jacobian(|_, _, j| j[(0, 0)] = -2.0)
            }
            OdeCase::Polynomial => Problem::scalar(2.0, move |t, u| {
                let e = polynomial_exact(t);
                -u * u + polynomial_caputo(alpha, t) - LAMBDA * e + e * e
            })
            .with_jacobian(|_, u, j| j[(0, 0)] = -2.0 * u[0]),
            OdeCase::Forced => Problem::scalar(1.0, |t, u| u * (1.0 - u * u) + 2.0 * (2.0 * PI * t).cos())
                .with_jacobian(|_, u, j| j[(0, 0)] = 1.0 - 3.0 * u[0] * u[0]),
        }
    }

    /// Closed-form solution where one exists.
    pub fn exact(&self, alpha: f64, t: f64) -> Option<f64> {
        match self {
            OdeCase::Relaxation => Some(3.0 * mittag_leffler(alpha, -3.0 * t.powf(alpha)).ok()?),
            OdeCase::Polynomial => Some(polynomial_exact(t)),
            OdeCase::Forced => None,
        }
    }

    /// GNGF-2 with `q = 2`, the case defaults and the fast Talbot backend.
    pub fn config(&self, alpha: f64, tau: f64) -> SchemeConfig {
        SchemeConfig::scalar(
            Family::Gngf,
            2,
            alpha,
            2,
            LAMBDA,
            self.default_kappa(),
            tau,
            self.default_horizon(),
        )
        .with_corrections(self.default_corrections())
        .with_backend(Backend::fast())
    }
}

/// `2^-k` steps for `k` in the given range.
pub fn dyadic_steps(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// Parses `2^-7`, `0.01` or `1e-3`.
pub fn parse_step(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((b, e)) = s.split_once('^') {
        let b: f64 = b.parse().map_err(|_| invalid("tau", format!("bad base in `{s}`")))?;
        let e: f64 = e.parse().map_err(|_| invalid("tau", format!("bad exponent in `{s}`")))?;
        b.powf(e)
    } else {
        s.parse().map_err(|_| invalid("tau", format!("cannot parse `{s}`")))?
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid("tau", format!("`{s}` is not a positive step")))
    }
}

/// Parses `a..b` into every power-of-two step between the endpoints.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| invalid("tau-sweep", format!("expected `start..end`, got `{s}`")))?;
    let (a, b) = (parse_step(a)?, parse_step(b)?);
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let mut out = Vec::new();
    let mut t = hi;
    while t >= lo * (1.0 - 1e-12) {
        out.push(t);
        t /= 2.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_syntax() {
        assert_eq!(parse_step("2^-7").unwrap(), 1.0 / 128.0);
        assert_eq!(parse_step("0.01").unwrap(), 0.01);
        assert!(parse_step("-1").is_err());
        assert_eq!(parse_sweep("2^-5..2^-9").unwrap().len(), 5);
    }

    #[test]
    fn case_ids_round_trip() {
        for c in OdeCase::all() {
            assert_eq!(c.to_string().parse::<OdeCase>().unwrap(), c);
        }
    }

    #[test]
    fn polynomial_forcing_is_consistent() {
        // At the exact solution f(u, t) = D^α u + u.
        let alpha = 0.3;
        let p = OdeCase::Polynomial.problem(alpha);
        let t = 1.7;
        let mut out = [0.0];
        p.eval(t, &[polynomial_exact(t)], &mut out);
        assert!((out[0] - polynomial_caputo(alpha, t) - polynomial_exact(t)).abs() < 1e-12);
    }
}
