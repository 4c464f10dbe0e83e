use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use fracstep::cases::{parse_step, OdeCase};
use fracstep::history::Backend;
use fracstep::odesolve::{semi_implicit_solve, Trajectory};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::Output;
use crate::CheckArg;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// TOML run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<String>,
    /// Exponents `k` of the step counts `2^k`.
    #[arg(long, default_value = "10..14")]
    pub pow: String,
    /// Timing repeats; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[command(flatten)]
    pub check: CheckArg,
}

#[derive(Debug, Serialize)]
struct Resolved {
    case: OdeCase,
    alpha: f64,
    tau: f64,
    kappa: f64,
    fast: Backend,
    steps: Vec<usize>,
    repeats: usize,
    run_config: RunConfig,
}

struct Row {
    n: usize,
    direct: f64,
    fast: f64,
    err: f64,
    peak: usize,
}

fn pow_range(s: &str) -> Result<Vec<usize>> {
    let bad = || CliError::config(format!("expected `a..b`, got `{s}`"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let (a, b): (u32, u32) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a > b || b > 24 {
        return Err(bad());
    }
    Ok((a..=b).map(|k| 1usize << k).collect())
}

pub fn run(out: &Path, args: BenchArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let case: OdeCase = match args.case.clone().or(file.problem.case.clone()) {
        Some(c) => c.parse()?,
        None => OdeCase::Forced,
    };
    let alpha = args
        .alpha
        .or_else(|| file.scheme.alpha.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(0.5);
    let tau = match args.tau.clone().or_else(|| file.problem.tau.as_ref().and_then(|v| v.first().cloned())) {
        Some(t) => parse_step(&t)?,
        None => 0.005,
    };
    let fast = match file.resolved_backend() {
        Backend::Direct => Backend::fast(),
        b => b,
    };
    let base = case.config(alpha, tau);
    let kappa = file.scheme.kappa.unwrap_or(base.kappa[(0, 0)]);
    let steps = pow_range(&args.pow)?;
    let prob = case.problem(alpha);
    let solve = |backend: Backend, n: usize| -> Result<(f64, Trajectory)> {
        let mut best = f64::INFINITY;
        let mut last = None;
        for _ in 0..args.repeats.max(1) {
            let mut cfg = case.config(alpha, tau).with_backend(backend);
            cfg.kappa = fracstep::linalg::Matrix::from_diag(&[kappa]);
            cfg.t_end = n as f64 * tau;
            let t = semi_implicit_solve(&cfg, &prob)?;
            best = best.min(t.diagnostics.wall_seconds);
            last = Some(t);
        }
        Ok((best, last.expect("at least one repeat")))
    };
    let mut rows = Vec::new();
    for &n in &steps {
        let (td, d) = solve(Backend::Direct, n)?;
        let (tf, f) = solve(fast, n)?;
        let scale = d.max_abs().max(f64::MIN_POSITIVE);
        let err = d
            .values()
            .iter()
            .zip(f.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        rows.push(Row {
            n,
            direct: td,
            fast: tf,
            err,
            peak: f.diagnostics.peak_history_scalars,
        });
    }
    let mut out = Output::new(out)?;
    out.write("bench.csv", |w| {
        writeln!(w, "n,direct_time_s,fast_time_s,max_rel_err,peak_state_scalars")?;
        for r in &rows {
            writeln!(w, "{},{:.6e},{:.6e},{:.6e},{}", r.n, r.direct, r.fast, r.err, r.peak)?;
        }
        Ok(())
    })?;
    let resolved = Resolved {
        case,
        alpha,
        tau,
        kappa,
        fast,
        steps: steps.clone(),
        repeats: args.repeats,
        run_config: file,
    };
    out.manifest("bench", &resolved)?;
    if args.check.check {
        let mut bad = Vec::new();
        for w in rows.windows(2).filter(|w| w[0].n >= 1 << 12) {
            let (rd, rf) = (w[1].direct / w[0].direct, w[1].fast / w[0].fast);
            if !(3.0..=5.0).contains(&rd) {
                bad.push(format!("direct ratio {rd:.2} at n={}", w[1].n));
            }
            if rf > 2.5 {
                bad.push(format!("fast ratio {rf:.2} at n={}", w[1].n));
            }
        }
        if !bad.is_empty() {
            return Err(CliError::Check(bad.join("; ")));
        }
        println!("check passed");
    }
    Ok(())
}
