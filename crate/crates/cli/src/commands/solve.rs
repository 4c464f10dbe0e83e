use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use fracstep::cases::{parse_step, parse_sweep, OdeCase, LAMBDA};
use fracstep::contour::ContourKind;
use fracstep::history::Backend;
use fracstep::linalg::Matrix;
use fracstep::odesolve::{
    error_report, implicit_solve, observed_orders, semi_implicit_solve, Exponents, SchemeConfig, Startup, Trajectory,
};
use fracstep::pde2d::{l2_errors, solve_pde, PdeCase, PdeConfig, PdeMethod};
use fracstep::Family;
use serde::Serialize;

use crate::config::{BackendKind, RunConfig};
use crate::error::{CliError, Result};
use crate::output::Output;
use crate::CheckArg;

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// TOML run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 1.1, 1.2, 1.3 (scalar) or 2.1, 2.2 (2D system).
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Order of the second field (2D cases).
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(short, long)]
    pub p: Option<usize>,
    #[arg(short, long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Correction counts `m` (exponents `kα`); one column group each.
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// Explicit correction exponents.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Fully implicit scheme instead of the semi-implicit one.
    #[arg(long)]
    pub implicit: bool,
    #[arg(long)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub contour: Option<ContourKind>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub base: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    /// Step sizes, e.g. `2^-7` or `0.01`.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<String>>,
    /// Halving sweep `2^-5..2^-9`.
    #[arg(long)]
    pub tau_sweep: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Cells per side (`h = 1/N`) for the 2D cases.
    #[arg(long = "h")]
    pub cells: Option<usize>,
    /// `implicit` or `exact` start values.
    #[arg(long)]
    pub startup: Option<String>,
    /// Snapshot times for the 2D cases.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Store the trajectory as a reference file.
    #[arg(long)]
    pub save_ref: bool,
    /// Reference trajectory for error tables.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// `max` (over the grid) or `final` (at `T`).
    #[arg(long)]
    pub metric: Option<String>,
    #[command(flatten)]
    pub check: CheckArg,
}

impl SolveArgs {
    fn as_config(&self) -> RunConfig {
        let mut c = RunConfig::default();
        c.scheme.family = self.family;
        c.scheme.p = self.p;
        c.scheme.q = self.q;
        c.scheme.alpha = self.alpha.clone();
        c.scheme.alpha2 = self.alpha2;
        c.scheme.kappa = self.kappa;
        c.scheme.lambda = self.lambda;
        c.scheme.corrections = self.sigma.clone().map(Exponents::Explicit);
        c.scheme.implicit = self.implicit.then_some(true);
        c.backend.kind = self.backend;
        c.backend.contour = self.contour;
        c.backend.nodes = self.nodes;
        c.backend.base = self.base;
        c.backend.n0 = self.n0;
        c.problem.case = self.case.clone();
        c.problem.tau = self.tau.clone();
        c.problem.tau_sweep = self.tau_sweep.clone();
        c.problem.t_end = self.t_end;
        c.problem.cells = self.cells;
        c.problem.startup = self.startup.clone();
        c.output.snapshots = self.snapshots.clone();
        c.output.save_ref = self.save_ref.then_some(true);
        c.output.reference = self.reference.clone();
        c.output.metric = self.metric.clone();
        c
    }
}

pub fn run(out: &Path, args: SolveArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.overlay(&args.as_config());
    let out_dir = cfg.output.dir.clone().unwrap_or_else(|| out.to_path_buf());
    let case = cfg
        .problem
        .case
        .clone()
        .ok_or_else(|| CliError::config("no case given (--case 1.1|1.2|1.3|2.1|2.2)"))?;
    if let Ok(c) = case.parse::<OdeCase>() {
        run_ode(&out_dir, c, &cfg, args.m.clone(), args.check.check)
    } else if let Ok(c) = case.parse::<PdeCase>() {
        if args.m.is_some() {
            return Err(CliError::config("--m applies to the scalar cases only"));
        }
        run_pde(&out_dir, c, &cfg, args.check.check)
    } else {
        Err(CliError::config(format!("unknown case `{case}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Metric {
    Max,
    Final,
}

#[derive(Debug, Serialize)]
struct ResolvedOde {
    case: OdeCase,
    family: Family,
    p: usize,
    q: usize,
    lambda: f64,
    kappa: f64,
    alphas: Vec<f64>,
    corrections: Vec<Exponents>,
    taus: Vec<f64>,
    t_end: f64,
    backend: Backend,
    implicit: bool,
    startup: String,
    metric: Metric,
    reference: String,
    run_config: RunConfig,
}

fn default_alphas(case: OdeCase) -> Vec<f64> {
    match case {
        OdeCase::Relaxation => vec![0.4],
        OdeCase::Polynomial => vec![0.2, 0.5, 0.8],
        OdeCase::Forced => vec![0.1, 0.2, 0.5, 0.8],
    }
}

fn default_sweep(case: OdeCase) -> &'static str {
    match case {
        OdeCase::Relaxation => "2^-7..2^-11",
        _ => "2^-5..2^-9",
    }
}

fn label(x: f64) -> String {
    let k = -x.log2();
    if (k - k.round()).abs() < 1e-12 && k > 0.0 {
        format!("2^-{}", k.round() as i64)
    } else {
        format!("{x}")
    }
}

fn group_label(e: &Exponents) -> String {
    match e {
        Exponents::Multiples(m) => format!("m{m}"),
        Exponents::Explicit(v) => format!(
            "s{}",
            v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("_")
        ),
    }
}

struct OdeSetup {
    family: Family,
    p: usize,
    q: usize,
    kappa: f64,
    t_end: f64,
    backend: Backend,
    implicit: bool,
    exact_start: bool,
}

impl OdeSetup {
    fn config(&self, case: OdeCase, alpha: f64, tau: f64, corr: &Exponents) -> Result<SchemeConfig> {
        let mut c = case.config(alpha, tau).with_corrections(corr.clone()).with_backend(self.backend);
        c.family = self.family;
        c.order = self.p;
        c.q = self.q;
        c.kappa = Matrix::from_diag(&[self.kappa]);
        c.t_end = self.t_end;
        if self.exact_start {
            let m = c.startup_steps();
            let start = (1..=m)
                .map(|n| {
                    case.exact(alpha, n as f64 * tau)
                        .ok_or_else(|| CliError::config(format!("case {case} has no exact start values")))
                })
                .collect::<Result<Vec<f64>>>()?;
            c = c.with_startup(Startup::Given(start));
        }
        Ok(c)
    }

    fn solve(&self, cfg: &SchemeConfig, case: OdeCase, alpha: f64) -> Result<Trajectory> {
        let prob = case.problem(alpha);
        Ok(if self.implicit {
            implicit_solve(cfg, &prob)?
        } else {
            semi_implicit_solve(cfg, &prob)?
        })
    }
}

/// Reads `t,u` columns from a trajectory CSV.
fn load_reference(path: &Path) -> Result<(f64, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: &str| CliError::config(format!("{}: malformed row `{line}`", path.display()));
    let mut t = Vec::new();
    let mut u = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let mut cols = line.split(',');
        let a: f64 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
        let b: f64 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
        t.push(a);
        u.push(b);
    }
    if t.len() < 2 {
        return Err(CliError::config(format!("{}: reference needs at least two rows", path.display())));
    }
    Ok((t[1] - t[0], u))
}

/// Reference values on the grid of `traj`.
fn sample(reference: &(f64, Vec<f64>), traj: &Trajectory) -> Result<Vec<f64>> {
    let (rt, ru) = reference;
    let ratio = traj.tau / rt;
    let stride = ratio.round() as usize;
    if stride == 0 || (ratio - stride as f64).abs() > 1e-6 {
        return Err(CliError::config(format!(
            "reference step {rt} does not divide tau = {}",
            traj.tau
        )));
    }
    (0..traj.len())
        .map(|n| {
            ru.get(n * stride)
                .copied()
                .ok_or_else(|| CliError::config("reference trajectory is shorter than the run"))
        })
        .collect()
}

fn run_ode(out: &Path, case: OdeCase, cfg: &RunConfig, ms: Option<Vec<usize>>, check: bool) -> Result<()> {
    let lambda = cfg.scheme.lambda.unwrap_or(LAMBDA);
    if lambda != LAMBDA {
        return Err(CliError::config(format!("the scalar cases are defined with lambda = {LAMBDA}")));
    }
    if cfg.scheme.alpha2.is_some() || cfg.problem.cells.is_some() || cfg.output.snapshots.is_some() {
        return Err(CliError::config("alpha2, h and snapshots apply to the 2D cases only"));
    }
    let alphas = cfg.scheme.alpha.clone().unwrap_or_else(|| default_alphas(case));
    let taus = match (&cfg.problem.tau_sweep, &cfg.problem.tau) {
        (Some(_), Some(_)) => return Err(CliError::config("give either tau or tau-sweep")),
        (Some(s), None) => parse_sweep(s)?,
        (None, Some(v)) => v.iter().map(|s| parse_step(s)).collect::<fracstep::Result<Vec<_>>>()?,
        (None, None) => parse_sweep(default_sweep(case))?,
    };
    let groups: Vec<Exponents> = match (ms, &cfg.scheme.corrections) {
        (Some(_), Some(_)) => return Err(CliError::config("give either m or explicit corrections")),
        (Some(ms), None) => ms.into_iter().map(Exponents::Multiples).collect(),
        (None, Some(e)) => vec![e.clone()],
        (None, None) => vec![case.default_corrections()],
    };
    let metric = match cfg.output.metric.as_deref() {
        Some("max") => Metric::Max,
        Some("final") => Metric::Final,
        None if case == OdeCase::Relaxation => Metric::Max,
        None => Metric::Final,
        Some(other) => return Err(CliError::config(format!("unknown metric `{other}`"))),
    };
    let exact_start = match cfg.problem.startup.as_deref() {
        None | Some("implicit") => false,
        Some("exact") => true,
        Some(other) => return Err(CliError::config(format!("unknown startup `{other}`"))),
    };
    let base = case.config(alphas[0], taus[0]);
    let setup = OdeSetup {
        family: cfg.scheme.family.unwrap_or(base.family),
        p: cfg.scheme.p.unwrap_or(base.order),
        q: cfg.scheme.q.unwrap_or(base.q),
        kappa: cfg.scheme.kappa.unwrap_or(base.kappa[(0, 0)]),
        t_end: cfg.problem.t_end.unwrap_or(base.t_end),
        backend: cfg.resolved_backend(),
        implicit: cfg.scheme.implicit.unwrap_or(false),
        exact_start,
    };
    let sweep = taus.len() > 1;
    let mut out = Output::new(out)?;
    let has_exact = case.exact(0.5, 1.0).is_some();
    let loaded = cfg.output.reference.as_deref().map(load_reference).transpose()?;
    let reference_kind = if has_exact {
        "exact".to_string()
    } else if let Some(p) = &cfg.output.reference {
        p.display().to_string()
    } else if sweep {
        "computed: tau=2^-13, m=2".to_string()
    } else {
        "none".to_string()
    };

    // errors[group][alpha][tau]
    let mut errors = vec![vec![Vec::new(); alphas.len()]; groups.len()];
    for (ai, &alpha) in alphas.iter().enumerate() {
        let computed = if !has_exact && loaded.is_none() && sweep {
            let tau_ref = 2f64.powi(-13);
            let c = setup.config(case, alpha, tau_ref, &Exponents::Multiples(2))?;
            let t = setup.solve(&c, case, alpha)?;
            Some((tau_ref, t.component(0)))
        } else {
            None
        };
        let reference = loaded.as_ref().or(computed.as_ref());
        for (gi, corr) in groups.iter().enumerate() {
            for &tau in &taus {
                let c = setup.config(case, alpha, tau, corr)?;
                let traj = setup.solve(&c, case, alpha)?;
                let refs: Option<Vec<f64>> = if has_exact {
                    Some(traj.times().iter().map(|&t| case.exact(alpha, t).expect("exact")).collect())
                } else {
                    reference.map(|r| sample(r, &traj)).transpose()?
                };
                if !sweep || cfg.output.save_ref == Some(true) {
                    let stem = format!("case{case}_a{alpha}_{}_tau{}", group_label(corr), label(tau));
                    let name = if cfg.output.save_ref == Some(true) {
                        format!("reference_{stem}.csv")
                    } else {
                        format!("trajectory_{stem}.csv")
                    };
                    out.write(&name, |w| traj.write_csv(w, refs.as_deref()))?;
                }
                if let Some(r) = refs {
                    let rep = error_report(&traj, &r)?;
                    let e = match metric {
                        Metric::Max => rep.max_relative,
                        Metric::Final => rep.at(tau, setup.t_end),
                    };
                    println!("case {case} alpha={alpha} {} tau={}: error {e:.4e}", group_label(corr), label(tau));
                    errors[gi][ai].push(e);
                }
            }
        }
    }

    let have_errors = errors.iter().all(|g| g.iter().all(|v| v.len() == taus.len()));
    if sweep && have_errors {
        out.write(&format!("convergence_case{case}.csv"), |w| {
            let mut head = vec!["tau".to_string()];
            for g in &groups {
                for a in &alphas {
                    head.push(format!("err_a{a}_{}", group_label(g)));
                    head.push(format!("order_a{a}_{}", group_label(g)));
                }
            }
            writeln!(w, "{}", head.join(","))?;
            for (ti, tau) in taus.iter().enumerate() {
                let mut row = vec![format!("{tau:.10e}")];
                for g in &errors {
                    for e in g {
                        row.push(format!("{:.6e}", e[ti]));
                        row.push(if ti == 0 {
                            String::new()
                        } else {
                            format!("{:.4}", (e[ti - 1] / e[ti]).log2())
                        });
                    }
                }
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })?;
    }
    let resolved = ResolvedOde {
        case,
        family: setup.family,
        p: setup.p,
        q: setup.q,
        lambda,
        kappa: setup.kappa,
        alphas: alphas.clone(),
        corrections: groups.clone(),
        taus: taus.clone(),
        t_end: setup.t_end,
        backend: setup.backend,
        implicit: setup.implicit,
        startup: if exact_start { "exact" } else { "implicit" }.into(),
        metric,
        reference: reference_kind,
        run_config: cfg.clone(),
    };
    out.manifest("solve", &resolved)?;
    if check {
        if !sweep || !have_errors {
            return Err(CliError::config("--check needs a step sweep with a reference"));
        }
        let failures = check_ode(case, &alphas, &groups, &taus, &errors, exact_start);
        if !failures.is_empty() {
            return Err(CliError::Check(failures.join("; ")));
        }
        println!("check passed");
    }
    Ok(())
}

/// Reference orders for case 1.1 at `α = 0.4`, steps `2^-7..2^-11`, `m = 0..3`,
/// exact start values.
const RELAXATION_ORDERS: [[f64; 4]; 4] = [
    [0.2361, 0.2706, 0.2988, 0.3215],
    [0.5520, 0.6161, 0.6657, 0.7030],
    [0.9189, 1.0007, 1.0664, 1.1187],
    [0.9862, 1.0841, 1.1865, 1.2631],
];
const RELAXATION_M3: [f64; 5] = [6.4330e-5, 3.2473e-5, 1.5317e-5, 6.7300e-6, 2.8040e-6];
const POLYNOMIAL_HALF_ERROR: f64 = 2.8700e-4;

fn check_ode(
    case: OdeCase,
    alphas: &[f64],
    groups: &[Exponents],
    taus: &[f64],
    errors: &[Vec<Vec<f64>>],
    exact_start: bool,
) -> Vec<String> {
    let mut bad = Vec::new();
    for (g, corr) in groups.iter().enumerate() {
        for (a, &alpha) in alphas.iter().enumerate() {
            let e = &errors[g][a];
            let orders = observed_orders(e);
            let tag = format!("alpha={alpha} {}", group_label(corr));
            match case {
                OdeCase::Polynomial => {
                    for o in &orders {
                        if (o - 2.0).abs() > 0.05 {
                            bad.push(format!("{tag}: order {o:.4} outside 2 +- 0.05"));
                        }
                    }
                    let default = *corr == case.default_corrections();
                    if let Some(i) = taus.iter().position(|&t| t == 2f64.powi(-5)) {
                        if alpha == 0.5 && default && (e[i] / POLYNOMIAL_HALF_ERROR - 1.0).abs() > 0.02 {
                            bad.push(format!("{tag}: error {:.4e} at tau=2^-5 not within 2%", e[i]));
                        }
                    }
                }
                OdeCase::Forced => {
                    for o in &orders {
                        if (o - 2.0).abs() > 0.15 {
                            bad.push(format!("{tag}: order {o:.4} outside 2 +- 0.15"));
                        }
                    }
                }
                OdeCase::Relaxation => {
                    let m = match corr {
                        Exponents::Multiples(m) if *m < 4 => Some(*m),
                        _ => None,
                    };
                    let grid = taus.len() == 5 && taus[0] == 2f64.powi(-7) && taus[4] == 2f64.powi(-11);
                    if let (Some(m), true, true) = (m, grid && exact_start, alpha == 0.4) {
                        for (o, r) in orders.iter().zip(RELAXATION_ORDERS[m]) {
                            if (o - r).abs() > 0.15 {
                                bad.push(format!("{tag}: order {o:.4} vs {r} (+- 0.15)"));
                            }
                        }
                        if m == 3 {
                            for (x, r) in e.iter().zip(RELAXATION_M3) {
                                if x / r > 1.5 || r / x > 1.5 {
                                    bad.push(format!("{tag}: error {x:.4e} vs {r:.4e} (x1.5)"));
                                }
                            }
                        }
                    } else if e.windows(2).any(|w| w[1] >= w[0]) {
                        bad.push(format!("{tag}: errors do not decrease with tau"));
                    }
                }
            }
        }
    }
    if case == OdeCase::Relaxation {
        for a in 0..alphas.len() {
            for g in 1..groups.len() {
                let more = matches!((&groups[g - 1], &groups[g]), (Exponents::Multiples(x), Exponents::Multiples(y)) if y > x);
                if more && errors[g][a].iter().zip(&errors[g - 1][a]).any(|(x, y)| x >= y) {
                    bad.push(format!("alpha={}: error does not decrease with m", alphas[a]));
                }
            }
        }
    }
    bad
}

#[derive(Debug, Serialize)]
struct ResolvedPde {
    case: PdeCase,
    cells: usize,
    alphas: [f64; 2],
    mus: [f64; 2],
    kappas: [f64; 2],
    tau: f64,
    t_end: f64,
    backend: Backend,
    method: PdeMethod,
    picard_tol: f64,
    picard_max: usize,
    snapshots: Vec<f64>,
    run_config: RunConfig,
}

fn run_pde(out: &Path, case: PdeCase, cfg: &RunConfig, check: bool) -> Result<()> {
    let s = &cfg.scheme;
    if s.family.is_some_and(|f| f != Family::Gngf) || s.p.is_some_and(|p| p != 2) || s.q.is_some_and(|q| q != 2) {
        return Err(CliError::config("the 2D solver uses GNGF with p = q = 2"));
    }
    if s.corrections.as_ref().is_some_and(|c| c.count() > 0) || s.lambda.is_some() {
        return Err(CliError::config("corrections and lambda do not apply to the 2D cases"));
    }
    if cfg.problem.tau_sweep.is_some() || cfg.problem.startup.is_some() || cfg.output.reference.is_some() {
        return Err(CliError::config("tau-sweep, startup and ref apply to the scalar cases only"));
    }
    let (d1, d2, dt) = match case {
        PdeCase::Manufactured => (0.2, 0.8, 2.0),
        PdeCase::Decay => (0.8, 0.2, 10.0),
    };
    let a1 = s.alpha.as_ref().and_then(|v| v.first().copied());
    let alphas = match (a1, s.alpha2) {
        (Some(a), Some(b)) => [a, b],
        (Some(a), None) => [a, a],
        (None, Some(b)) => [d1, b],
        (None, None) => [d1, d2],
    };
    let tau = match cfg.problem.tau.as_deref() {
        Some([t]) => parse_step(t)?,
        Some(_) => return Err(CliError::config("the 2D cases take a single tau")),
        None => 0.01,
    };
    let t_end = cfg.problem.t_end.unwrap_or(dt);
    let cells = cfg.problem.cells.unwrap_or(64);
    let kappa = s.kappa.unwrap_or(2.0);
    let mut pc = PdeConfig::new(cells, alphas, tau, t_end);
    pc.kappas = [kappa, kappa];
    pc.backend = cfg.resolved_backend();
    if s.implicit == Some(true) {
        pc.method = PdeMethod::Implicit;
    }
    pc.snapshot_times = cfg.output.snapshots.clone().unwrap_or_else(|| vec![t_end]);
    let grid = fracstep::pde2d::Grid2D::new(cells)?;
    let prob = case.problem(&grid, alphas, pc.mus, false);
    let sol = solve_pde(&pc, &prob)?;

    let mut out = Output::new(out)?;
    for snap in &sol.snapshots {
        out.write(&format!("fields_case{case}_t{}.csv", snap.t), |w| sol.write_snapshot_csv(snap, w))?;
    }
    out.write(&format!("timing_case{case}.csv"), |w| sol.write_timing_csv(w))?;
    out.write(&format!("norms_case{case}.csv"), |w| {
        writeln!(w, "t,max_abs_u,max_abs_v")?;
        for (t, u, v) in &sol.sup_norms {
            writeln!(w, "{t:.10e},{u:.10e},{v:.10e}")?;
        }
        Ok(())
    })?;
    if let Some((eu, ev)) = l2_errors(&sol, &prob) {
        println!("L2 error at t={t_end}: u {eu:.4e}, v {ev:.4e}");
        out.write(&format!("errors_case{case}.csv"), |w| {
            writeln!(w, "t,l2_err_u,l2_err_v")?;
            writeln!(w, "{t_end:.10e},{eu:.10e},{ev:.10e}")
        })?;
    }
    println!(
        "{} steps in {:.3}s, history scalars {}",
        sol.timing.len(),
        sol.diagnostics.wall_seconds,
        sol.diagnostics.peak_history_scalars
    );
    let resolved = ResolvedPde {
        case,
        cells,
        alphas,
        mus: pc.mus,
        kappas: pc.kappas,
        tau,
        t_end,
        backend: pc.backend,
        method: pc.method,
        picard_tol: pc.picard_tol,
        picard_max: pc.picard_max,
        snapshots: pc.snapshot_times.clone(),
        run_config: cfg.clone(),
    };
    out.manifest("solve", &resolved)?;
    if check {
        let mut bad = Vec::new();
        if alphas[0] == alphas[1] && case == PdeCase::Manufactured && sol.final_state.u != sol.final_state.v {
            bad.push("u and v differ although the system is symmetric".to_string());
        }
        if case == PdeCase::Decay {
            let (_, u0, v0) = sol.sup_norms[0];
            let (_, u1, v1) = *sol.sup_norms.last().expect("non-empty");
            if !(u1 < u0 && v1 < v0) {
                bad.push("solution does not decay".to_string());
            }
        }
        if !bad.is_empty() {
            return Err(CliError::Check(bad.join("; ")));
        }
        println!("check passed");
    }
    Ok(())
}
