//! Time stepping for `D^α u = A u + f(u, t)`, scalar or vector valued, with
//! one fractional order per component.
//!
//! The semi-implicit scheme treats `f` by extrapolation and adds the
//! perturbation `-κ E_q^{n,m_u,σ}(U)`, so each step is one linear solve with
//! a constant matrix. The fully implicit scheme runs Newton on every step.
//! Both start with a coupled implicit solve of `U_1..U_{n_s}`,
//! `n_s = max(q - 1, m, m_u, m_f)`.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corrections::{PerturbationWeights, StartingWeights};
use crate::error::{invalid, Error, Result};
use crate::history::{Backend, HistoryBackend};
use crate::linalg::{Lu, Matrix};
use crate::weights::{Family, GeneratingFunction};

/// Correction exponents: either the first `m` multiples of `α`, or an
/// explicit increasing list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponents {
    Multiples(usize),
    Explicit(Vec<f64>),
}

impl Exponents {
    pub fn none() -> Self {
        Exponents::Multiples(0)
    }

    pub fn count(&self) -> usize {
        match self {
            Exponents::Multiples(m) => *m,
            Exponents::Explicit(v) => v.len(),
        }
    }

    pub fn resolve(&self, alpha: f64) -> Vec<f64> {
        match self {
            Exponents::Multiples(m) => (1..=*m).map(|k| k as f64 * alpha).collect(),
            Exponents::Explicit(v) => v.clone(),
        }
    }
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents::none()
    }
}

/// Newton settings for the implicit solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-10,
            max_iter: 50,
        }
    }
}

/// One time-stepping scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub family: Family,
    pub order: usize,
    /// One order per component.
    pub alphas: Vec<f64>,
    pub q: usize,
    /// The implicit linear part `A` (`λ` for scalars).
    pub linear: Matrix,
    pub kappa: Matrix,
    pub sigma: Exponents,
    pub sigma_u: Exponents,
    pub delta: Exponents,
    pub tau: f64,
    pub t_end: f64,
    pub backend: Backend,
    pub newton: NewtonOptions,
    pub startup: Startup,
}

/// How `U_1..U_{n_s}` are obtained.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Startup {
    /// Coupled fully implicit solve.
    #[default]
    Implicit,
    /// Known values `U_1..U_k` (flat, row-major); any remaining start-up
    /// steps are solved implicitly.
    Given(Vec<f64>),
}

impl SchemeConfig {
    /// Scalar scheme with no corrections and the default fast backend.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(family: Family, order: usize, alpha: f64, q: usize, lambda: f64, kappa: f64, tau: f64, t_end: f64) -> Self {
        Self {
            family,
            order,
            alphas: vec![alpha],
            q,
            linear: Matrix::from_diag(&[lambda]),
            kappa: Matrix::from_diag(&[kappa]),
            sigma: Exponents::none(),
            sigma_u: Exponents::none(),
            delta: Exponents::none(),
            tau,
            t_end,
            backend: Backend::default(),
            newton: NewtonOptions::default(),
            startup: Startup::Implicit,
        }
    }

    /// Uses the same exponents for the operator and both perturbation terms.
    pub fn with_corrections(mut self, sigma: Exponents) -> Self {
        self.sigma_u = sigma.clone();
        self.delta = sigma.clone();
        self.sigma = sigma;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_startup(mut self, startup: Startup) -> Self {
        self.startup = startup;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    /// Number of steps `n_T = T / τ`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.tau > 0.0) || !(self.t_end > 0.0) {
            return Err(invalid("tau", "step size and horizon must be positive"));
        }
        let r = self.t_end / self.tau;
        let n = r.round();
        if (r - n).abs() > 1e-9 * r.max(1.0) || n < 1.0 {
            return Err(invalid("tau", format!("T / tau = {r} is not a positive integer")));
        }
        Ok(n as usize)
    }

    /// Start-up block length `max(q - 1, m, m_u, m_f)`, or the number of
    /// given start values if larger.
    pub fn startup_steps(&self) -> usize {
        let given = match &self.startup {
            Startup::Implicit => 0,
            Startup::Given(v) => v.len() / self.dim().max(1),
        };
        self.q.saturating_sub(1)
            .max(given)
            .max(self.sigma.count())
            .max(self.sigma_u.count())
            .max(self.delta.count())
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(invalid("alphas", "need at least one component"));
        }
        if self.q != 1 && self.q != 2 {
            return Err(Error::UnsupportedOrder {
                what: "perturbation",
                order: self.q,
                supported: "1 or 2",
            });
        }
        for (name, m) in [("linear", &self.linear), ("kappa", &self.kappa)] {
            if m.rows() != d || m.cols() != d {
                return Err(invalid(name, format!("must be {d}x{d}")));
            }
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a <= 1.0) {
                return Err(invalid("alpha", format!("orders must lie in (0, 1], got {a}")));
            }
        }
        self.steps()?;
        Ok(())
    }

    /// Compatibility warnings: `σ_m < α + p` and `σ_{m_u}, δ_{m_f} < q`.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for &a in &self.alphas {
            if let Some(&s) = self.sigma.resolve(a).last() {
                if s >= a + self.order as f64 {
                    out.push(format!("sigma_m = {s} >= alpha + p = {}", a + self.order as f64));
                }
            }
            for (name, e) in [("sigma_u", &self.sigma_u), ("delta", &self.delta)] {
                if let Some(&s) = e.resolve(a).last() {
                    if s >= self.q as f64 {
                        out.push(format!("{name} largest exponent {s} >= q = {}", self.q));
                    }
                }
            }
        }
        out
    }
}

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(f64, &[f64], &mut Matrix) + Send + Sync;

/// Initial value and nonlinearity `f(t, u)`.
#[derive(Clone)]
pub struct Problem {
    pub u0: Vec<f64>,
    f: Arc<RhsFn>,
    jac: Option<Arc<JacFn>>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("u0", &self.u0)
            .field("jacobian", &self.jac.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new<F>(u0: Vec<f64>, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            u0,
            f: Arc::new(f),
            jac: None,
        }
    }

    pub fn scalar<F>(u0: f64, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(vec![u0], move |t, u, out| out[0] = f(t, u[0]))
    }

    /// Supplies `∂f/∂u`; otherwise Newton uses finite differences.
    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &[f64], &mut Matrix) + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn eval(&self, t: f64, u: &[f64], out: &mut [f64]) {
        (self.f)(t, u, out)
    }
}

/// Solver statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub wall_seconds: f64,
    pub peak_history_scalars: usize,
    pub warnings: Vec<String>,
}

/// Computed solution on `t_n = nτ`, `n = 0..n_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    dim: usize,
    values: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of time points `n_T + 1`.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    pub fn value(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// Flat row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Sup norm over all steps and components.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// CSV with columns `t, u (one per component), ref, abs_err`.
    /// Reference columns are written for scalar trajectories only.
    pub fn write_csv<W: Write>(&self, mut out: W, reference: Option<&[f64]>) -> io::Result<()> {
        let with_ref = reference.is_some() && self.dim == 1;
        let mut head = String::from("t");
        if self.dim == 1 {
            head.push_str(",u");
        } else {
            for c in 0..self.dim {
                head.push_str(&format!(",u{}", c + 1));
            }
        }
        if with_ref {
            head.push_str(",ref,abs_err");
        }
        writeln!(out, "{head}")?;
        for n in 0..self.len() {
            let mut line = format!("{:.17e}", self.time(n));
            for v in self.value(n) {
                line.push_str(&format!(",{v:.17e}"));
            }
            if with_ref {
                let r = reference.unwrap()[n];
                line.push_str(&format!(",{r:.17e},{:.17e}", (r - self.value(n)[0]).abs()));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Errors against a reference on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `‖e‖_∞ / ‖u‖_∞`.
    pub max_relative: f64,
    /// `|e_n| / ‖u‖_∞` (max over components).
    pub pointwise: Vec<f64>,
}

impl ErrorReport {
    /// Relative error at the grid point nearest `t`.
    pub fn at(&self, tau: f64, t: f64) -> f64 {
        let n = ((t / tau).round() as usize).min(self.pointwise.len() - 1);
        self.pointwise[n]
    }
}

/// `error_report`: relative errors of `traj` against a flat reference.
pub fn error_report(traj: &Trajectory, reference: &[f64]) -> Result<ErrorReport> {
    if reference.len() != traj.values.len() {
        return Err(invalid(
            "reference",
            format!("expected {} values, got {}", traj.values.len(), reference.len()),
        ));
    }
    let norm = reference.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let norm = if norm > 0.0 { norm } else { 1.0 };
    let d = traj.dim;
    let pointwise: Vec<f64> = traj
        .values
        .chunks_exact(d)
        .zip(reference.chunks_exact(d))
        .map(|(u, r)| u.iter().zip(r).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / norm)
        .collect();
    let max_relative = pointwise.iter().fold(0.0f64, |a, &v| a.max(v));
    Ok(ErrorReport {
        max_relative,
        pointwise,
    })
}

/// `log2(e_k / e_{k+1})` for errors at successively halved steps.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Practical choice `κ = max(0, (λ - 3 ρ̂) / 4)`, with `ρ̂` the lower bound
/// of `∂f/∂u`.
pub fn kappa_guideline(lambda: f64, rho_min: f64) -> f64 {
    ((lambda - 3.0 * rho_min) / 4.0).max(0.0)
}

/// Per-component discretization data.
struct Component {
    scale: f64,
    omega: Vec<f64>,
    start: StartingWeights,
    pert_u: PerturbationWeights,
    pert_f: PerturbationWeights,
    history: Box<dyn HistoryBackend>,
}

struct Engine<'a> {
    cfg: &'a SchemeConfig,
    prob: &'a Problem,
    d: usize,
    n_max: usize,
    comps: Vec<Component>,
    u: Vec<f64>,
    f: Vec<f64>,
    diag: Diagnostics,
}

fn finite_difference_step(x: f64) -> f64 {
    f64::EPSILON.sqrt() * (1.0 + x.abs())
}

/// Newton iteration on `residual(x) = 0`; returns the iteration count.
fn newton<R>(
    x: &mut [f64],
    mut residual: R,
    jacobian: Option<&dyn Fn(&[f64], &mut Matrix)>,
    opts: &NewtonOptions,
    step: usize,
) -> Result<usize>
where
    R: FnMut(&[f64], &mut [f64]),
{
    let k = x.len();
    let mut r = vec![0.0; k];
    let mut rp = vec![0.0; k];
    let mut jac = Matrix::zeros(k, k);
    let mut xp = x.to_vec();
    let converged = |r: &[f64], x: &[f64]| {
        let rn = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let xn = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (rn, rn <= opts.atol + opts.rtol * xn)
    };
    residual(x, &mut r);
    let mut last = converged(&r, x);
    for it in 0..=opts.max_iter {
        if !last.0.is_finite() {
            return Err(Error::Unstable { step });
        }
        if last.1 {
            return Ok(it);
        }
        if it == opts.max_iter {
            break;
        }
        match jacobian {
            Some(j) => j(x, &mut jac),
            None => {
                for c in 0..k {
                    xp.copy_from_slice(x);
                    let h = finite_difference_step(x[c]);
                    xp[c] += h;
                    residual(&xp, &mut rp);
                    for i in 0..k {
                        jac[(i, c)] = (rp[i] - r[i]) / h;
                    }
                }
            }
        }
        let lu = Lu::new(&jac).map_err(|_| Error::ZeroPivot(format!("singular Newton matrix at step {step}")))?;
        let dx = lu.solve(&r);
        let mut small = true;
        for (xi, di) in x.iter_mut().zip(&dx) {
            if di.abs() > 4.0 * f64::EPSILON * (1.0 + xi.abs()) {
                small = false;
            }
            *xi -= di;
        }
        residual(x, &mut r);
        last = converged(&r, x);
        if small && last.0.is_finite() {
            return Ok(it + 1);
        }
    }
    Err(Error::NoConvergence {
        step,
        iterations: opts.max_iter,
        residual: last.0,
    })
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SchemeConfig, prob: &'a Problem) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dim();
        if prob.dim() != d {
            return Err(invalid("u0", format!("expected {d} components, got {}", prob.dim())));
        }
        let n_max = cfg.steps()?;
        let n_s = cfg.startup_steps();
        if n_s > n_max {
            return Err(invalid("tau", format!("need at least {n_s} steps for the start-up block")));
        }
        let mut comps = Vec::with_capacity(d);
        for &alpha in &cfg.alphas {
            let gf = GeneratingFunction::new(cfg.family, cfg.order, alpha, cfg.tau)?;
            let table = gf.weights(n_max);
            let start = StartingWeights::from_table(&table, &cfg.sigma.resolve(alpha))?;
            comps.push(Component {
                scale: gf.scale(),
                omega: table.unscaled()[..=n_s.min(n_max)].to_vec(),
                start,
                pert_u: PerturbationWeights::new(cfg.q, &cfg.sigma_u.resolve(alpha))?,
                pert_f: PerturbationWeights::new(cfg.q, &cfg.delta.resolve(alpha))?,
                history: cfg.backend.build(&gf, 1, n_max)?,
            });
        }
        let mut u = Vec::with_capacity((n_max + 1) * d);
        u.extend_from_slice(&prob.u0);
        let mut f = vec![0.0; d];
        prob.eval(0.0, &prob.u0, &mut f);
        f.reserve(n_max * d);
        let diag = Diagnostics {
            warnings: cfg.warnings(),
            ..Diagnostics::default()
        };
        let mut e = Self {
            cfg,
            prob,
            d,
            n_max,
            comps,
            u,
            f,
            diag,
        };
        for c in &mut e.comps {
            c.history.push(&[0.0])?;
        }
        Ok(e)
    }

    fn t(&self, n: usize) -> f64 {
        n as f64 * self.cfg.tau
    }

    fn uval(&self, n: usize, i: usize) -> f64 {
        self.u[n * self.d + i]
    }

    fn fval(&self, n: usize, i: usize) -> f64 {
        self.f[n * self.d + i]
    }

    /// Start values: the supplied `U_1..U_k`, then a coupled implicit solve
    /// for `U_{k+1}..U_{n_s}`.
    fn startup(&mut self) -> Result<()> {
        let n_s = self.cfg.startup_steps();
        let d = self.d;
        let given: Vec<f64> = match &self.cfg.startup {
            Startup::Implicit => Vec::new(),
            Startup::Given(v) => v.clone(),
        };
        let k = given.len() / d;
        if k * d != given.len() || k > self.n_max {
            return Err(invalid("startup", "given start values must hold whole steps within the horizon"));
        }
        for n in 1..=k {
            self.accept(n, &given[(n - 1) * d..n * d])?;
        }
        if n_s <= k {
            return Ok(());
        }
        let free = n_s - k;
        let u0 = self.prob.u0.clone();
        let mut x: Vec<f64> = (0..free).flat_map(|_| self.u[k * d..(k + 1) * d].to_vec()).collect();
        let cfg = self.cfg;
        let prob = self.prob;
        let comps = &self.comps;
        let known = &self.u;
        let mut fbuf = vec![0.0; d];
        let at = |x: &[f64], j: usize, i: usize| if j <= k { known[j * d + i] } else { x[(j - k - 1) * d + i] };
        let residual = |x: &[f64], r: &mut [f64]| {
            for n in k + 1..=n_s {
                let un = &x[(n - k - 1) * d..(n - k) * d];
                prob.eval(n as f64 * cfg.tau, un, &mut fbuf);
                let au = cfg.linear.mul_vec(un);
                for (i, c) in comps.iter().enumerate() {
                    let mut s: f64 = (0..=n).map(|j| c.omega[n - j] * (at(x, j, i) - u0[i])).sum();
                    if c.start.m() > 0 {
                        for (j, w) in c.start.row(n).iter().enumerate() {
                            s += w * (at(x, j + 1, i) - u0[i]);
                        }
                    }
                    r[(n - k - 1) * d + i] = c.scale * s - au[i] - fbuf[i];
                }
            }
        };
        let jac_fn = prob.jac.as_ref().map(|jf| {
            move |x: &[f64], out: &mut Matrix| {
                let size = free * d;
                let mut local = Matrix::zeros(d, d);
                for r in 0..size {
                    for c in 0..size {
                        out[(r, c)] = 0.0;
                    }
                }
                for n in k + 1..=n_s {
                    let un = &x[(n - k - 1) * d..(n - k) * d];
                    jf(n as f64 * cfg.tau, un, &mut local);
                    for (i, c) in comps.iter().enumerate() {
                        let row = (n - k - 1) * d + i;
                        for j in k + 1..=n {
                            out[(row, (j - k - 1) * d + i)] += c.scale * c.omega[n - j];
                        }
                        if c.start.m() > 0 {
                            for (j, w) in c.start.row(n).iter().enumerate() {
                                if j + 1 > k {
                                    out[(row, (j - k) * d + i)] += c.scale * w;
                                }
                            }
                        }
                        for kk in 0..d {
                            out[(row, (n - k - 1) * d + kk)] -= cfg.linear[(i, kk)] + local[(i, kk)];
                        }
                    }
                }
            }
        });
        let iters = newton(
            &mut x,
            residual,
            jac_fn.as_ref().map(|j| j as &dyn Fn(&[f64], &mut Matrix)),
            &cfg.newton,
            k + 1,
        )?;
        self.note_newton(iters);
        for n in k + 1..=n_s {
            let un = x[(n - k - 1) * d..(n - k) * d].to_vec();
            self.accept(n, &un)?;
        }
        Ok(())
    }

    fn note_newton(&mut self, iters: usize) {
        self.diag.newton_iterations += iters;
        self.diag.max_newton_iterations = self.diag.max_newton_iterations.max(iters);
    }

    /// Records `U_n`, pushes it into the history and evaluates `F_n`.
    fn accept(&mut self, n: usize, un: &[f64]) -> Result<()> {
        if un.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable { step: n });
        }
        self.u.extend_from_slice(un);
        let mut fnew = vec![0.0; self.d];
        self.prob.eval(self.t(n), un, &mut fnew);
        self.f.extend_from_slice(&fnew);
        for (i, c) in self.comps.iter_mut().enumerate() {
            c.history.push(&[un[i] - self.prob.u0[i]])?;
        }
        Ok(())
    }

    /// `τ^{-α}[H_n + Σ_j w^(α)_{n,j}(U_j - U_0)]` per component: the
    /// operator without its `τ^{-α} ω_0 (U_n - U_0)` term.
    fn operator_known(&self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.d);
        for (i, c) in self.comps.iter().enumerate() {
            let u0 = self.prob.u0[i];
            // The backend's weights are already scaled by τ^{-α}.
            let h = c.history.history()?[0];
            let mut corr = 0.0;
            if c.start.m() > 0 {
                for (j, w) in c.start.row(n).iter().enumerate() {
                    corr += w * (self.uval(j + 1, i) - u0);
                }
            }
            out.push(h + c.scale * corr);
        }
        Ok(out)
    }

    fn run_semi_implicit(&mut self) -> Result<()> {
        let d = self.d;
        let q = self.cfg.q;
        let mut m = self.cfg.kappa.add(&self.cfg.linear.scale(-1.0));
        for (i, c) in self.comps.iter().enumerate() {
            m[(i, i)] += c.scale * c.omega[0];
        }
        let lu = Lu::new(&m).map_err(|_| Error::ZeroPivot("tau^-alpha omega_0 - A + kappa is singular".into()))?;
        for n in self.cfg.startup_steps() + 1..=self.n_max {
            let known = self.operator_known(n)?;
            let au0 = self.cfg.linear.mul_vec(&self.prob.u0);
            // Unknown is W = U_n - U_0; v holds the extrapolated increment.
            let mut v = vec![0.0; d];
            let mut rhs = vec![0.0; d];
            for (i, c) in self.comps.iter().enumerate() {
                let (u0, f0) = (self.prob.u0[i], self.fval(0, i));
                let extrap = if q == 2 {
                    2.0 * self.fval(n - 1, i) - self.fval(n - 2, i)
                } else {
                    self.fval(n - 1, i)
                };
                let mut fc = 0.0;
                for (j, w) in c.pert_f.row(n).iter().enumerate() {
                    fc += w * (self.fval(j + 1, i) - f0);
                }
                let mut vi = if q == 2 {
                    2.0 * (self.uval(n - 1, i) - u0) - (self.uval(n - 2, i) - u0)
                } else {
                    self.uval(n - 1, i) - u0
                };
                for (j, w) in c.pert_u.row(n).iter().enumerate() {
                    vi += w * (self.uval(j + 1, i) - u0);
                }
                v[i] = vi;
                rhs[i] = -known[i] + au0[i] + extrap + fc;
            }
            let kv = self.cfg.kappa.mul_vec(&v);
            for i in 0..d {
                rhs[i] += kv[i];
            }
            let w = lu.solve(&rhs);
            let un: Vec<f64> = w.iter().zip(&self.prob.u0).map(|(a, b)| a + b).collect();
            self.accept(n, &un)?;
        }
        Ok(())
    }

    fn run_implicit(&mut self) -> Result<()> {
        let d = self.d;
        let diag_coef: Vec<f64> = self.comps.iter().map(|c| c.scale * c.omega[0]).collect();
        let cfg = self.cfg;
        let prob = self.prob;
        for n in cfg.startup_steps() + 1..=self.n_max {
            let known = self.operator_known(n)?;
            let u0 = &prob.u0;
            let t = self.t(n);
            let mut x = self.u[(n - 1) * d..n * d].to_vec();
            let mut fbuf = vec![0.0; d];
            let residual = |x: &[f64], r: &mut [f64]| {
                prob.eval(t, x, &mut fbuf);
                let ax = cfg.linear.mul_vec(x);
                for i in 0..d {
                    r[i] = diag_coef[i] * (x[i] - u0[i]) + known[i] - ax[i] - fbuf[i];
                }
            };
            let jac_fn = prob.jac.as_ref().map(|jf| {
                let diag_coef = diag_coef.clone();
                move |x: &[f64], out: &mut Matrix| {
                    jf(t, x, out);
                    for i in 0..d {
                        for j in 0..d {
                            out[(i, j)] = -out[(i, j)] - cfg.linear[(i, j)];
                        }
                        out[(i, i)] += diag_coef[i];
                    }
                }
            });
            let iters = newton(
                &mut x,
                residual,
                jac_fn.as_ref().map(|j| j as &dyn Fn(&[f64], &mut Matrix)),
                &cfg.newton,
                n,
            )?;
            self.note_newton(iters);
            self.accept(n, &x)?;
        }
        Ok(())
    }

    fn finish(mut self, started: Instant) -> Trajectory {
        self.diag.wall_seconds = started.elapsed().as_secs_f64();
        self.diag.peak_history_scalars = self.comps.iter().map(|c| c.history.peak_memory_scalars()).sum();
        Trajectory {
            tau: self.cfg.tau,
            dim: self.d,
            values: self.u,
            diagnostics: self.diag,
        }
    }
}

/// `semi_implicit_solve`: one constant-matrix linear solve per step.
pub fn semi_implicit_solve(cfg: &SchemeConfig, prob: &Problem) -> Result<Trajectory> {
    let started = Instant::now();
    let mut e = Engine::new(cfg, prob)?;
    e.startup()?;
    e.run_semi_implicit()?;
    Ok(e.finish(started))
}

/// `implicit_solve`: Newton on every step; `κ` and `q` only enter through
/// the start-up block length.
pub fn implicit_solve(cfg: &SchemeConfig, prob: &Problem) -> Result<Trajectory> {
    let started = Instant::now();
    let mut e = Engine::new(cfg, prob)?;
    e.startup()?;
    e.run_implicit()?;
    Ok(e.finish(started))
}
