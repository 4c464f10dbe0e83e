//! Python bindings.

use fracstep::cases::OdeCase;
use fracstep::contour::ContourKind;
use fracstep::fastconv::{direct_convolution, FastConvParams, FastConvState};
use fracstep::history::Backend;
use fracstep::odesolve::{implicit_solve, semi_implicit_solve, Exponents};
use fracstep::stability::{stability_interval, ScalarProblem};
use fracstep::Family;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: fracstep::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_family(s: &str) -> PyResult<Family> {
    s.parse().map_err(err)
}

/// Convolution weights `ω(p, α, τ, z)`.
#[pyclass(name = "GeneratingFunction", frozen)]
struct PyGeneratingFunction(fracstep::GeneratingFunction);

#[pymethods]
impl PyGeneratingFunction {
    #[new]
    #[pyo3(signature = (family, p, alpha, tau=1.0))]
    fn new(family: &str, p: usize, alpha: f64, tau: f64) -> PyResult<Self> {
        fracstep::GeneratingFunction::new(parse_family(family)?, p, alpha, tau)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    /// Unscaled weights `ω_0..ω_n`.
    fn unscaled(&self, n: usize) -> Vec<f64> {
        self.0.unscaled_weights(n)
    }

    /// Weights including the `τ^-α` factor.
    fn weights(&self, n: usize) -> Vec<f64> {
        self.0.weights(n).scaled()
    }

    fn symbol(&self, re: f64, im: f64) -> (f64, f64) {
        let s = self.0.symbol(num_complex::Complex64::new(re, im));
        (s.re, s.im)
    }

    fn __repr__(&self) -> String {
        format!("GeneratingFunction({})", self.0)
    }
}

/// Largest stable step for `D^α u = λu + ρ(u - v)` with `κ` stabilization.
#[pyfunction]
#[pyo3(signature = (alpha, kappa, family="gngf", p=2, q=2, lam=-1.0, rho=-2.0, tau_max=1e30))]
#[allow(clippy::too_many_arguments)]
fn stability(alpha: f64, kappa: f64, family: &str, p: usize, q: usize, lam: f64, rho: f64, tau_max: f64) -> PyResult<f64> {
    let prob = ScalarProblem::new(parse_family(family)?, p, alpha, q, lam, rho, kappa).map_err(err)?;
    stability_interval(&prob, tau_max, 1e-10).map(|s| s.tau_star).map_err(err)
}

/// Solves a built-in scalar case; returns `(t, u, exact)`.
#[pyfunction]
#[pyo3(signature = (case, alpha, tau, m=None, t_end=None, fast=true, implicit=false))]
fn solve(
    case: &str,
    alpha: f64,
    tau: f64,
    m: Option<usize>,
    t_end: Option<f64>,
    fast: bool,
    implicit: bool,
) -> PyResult<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
    let case: OdeCase = case.parse().map_err(err)?;
    let mut cfg = case.config(alpha, tau);
    if let Some(m) = m {
        cfg = cfg.with_corrections(Exponents::Multiples(m));
    }
    if let Some(t) = t_end {
        cfg.t_end = t;
    }
    cfg = cfg.with_backend(if fast { Backend::fast() } else { Backend::Direct });
    let prob = case.problem(alpha);
    let traj = if implicit {
        implicit_solve(&cfg, &prob)
    } else {
        semi_implicit_solve(&cfg, &prob)
    }
    .map_err(err)?;
    let t = traj.times();
    let exact = t.iter().map(|&s| case.exact(alpha, s)).collect::<Option<Vec<f64>>>();
    Ok((t, traj.component(0), exact))
}

/// Largest relative deviation of the fast history sum from the direct one
/// for `u = t^2 + t`.
#[pyfunction]
#[pyo3(signature = (alpha, tau, n, contour="talbot", nodes=32, base=5, n0=50))]
fn fastconv_check(alpha: f64, tau: f64, n: usize, contour: &str, nodes: usize, base: usize, n0: usize) -> PyResult<f64> {
    let contour: ContourKind = contour.parse().map_err(err)?;
    let gf = fracstep::GeneratingFunction::gngf(2, alpha, tau).map_err(err)?;
    let u: Vec<f64> = (0..=n).map(|k| k as f64 * tau).map(|t| t * t + t).collect();
    let direct = direct_convolution(&gf.weights(n), &u);
    let params = FastConvParams { base, n0, contour, nodes };
    let mut st = FastConvState::new(gf, params, 1, n).map_err(err)?;
    let mut worst = 0.0f64;
    for (x, d) in u.iter().zip(&direct) {
        st.push_scalar(*x).map_err(err)?;
        let f = st.evaluate().map_err(err)?[0];
        let e = if *d == 0.0 { (f - d).abs() } else { ((f - d) / d).abs() };
        worst = worst.max(e);
    }
    Ok(worst)
}

#[pymodule]
#[pyo3(name = "fracstep")]
fn fracstep_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", fracstep::VERSION)?;
    m.add_class::<PyGeneratingFunction>()?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fastconv_check, m)?)?;
    Ok(())
}
