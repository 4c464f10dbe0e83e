use std::io::Write;
use std::path::Path;

use clap::Args;
use fracstep::stability::{region_raster, stability_interval, ScalarProblem};
use fracstep::{Family, GeneratingFunction};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{fmt_value, Output};
use crate::CheckArg;

const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.2, 0.5, 0.9];
const DEFAULT_KAPPAS: [f64; 11] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.24, 1.25, 1.26, 1.4];

/// Reference intervals for `λ = -1`, `ρ = -2`, GNGF-2, `q = 2`; rows follow
/// the first eight entries of `DEFAULT_KAPPAS`, columns `DEFAULT_ALPHAS`.
const REFERENCE: [[f64; 4]; 8] = [
    [5.31e-7, 1.59e-3, 1.80e-1, 6.83e-1],
    [3.04e-6, 3.81e-3, 2.55e-1, 8.28e-1],
    [2.51e-5, 1.10e-2, 3.89e-1, 1.05e0],
    [3.67e-4, 4.19e-2, 6.66e-1, 1.41e0],
    [1.45e-2, 2.63e-1, 1.39e0, 2.12e0],
    [5.19e0, 4.98e0, 4.50e0, 4.08e0],
    [5.07e7, 1.56e4, 1.13e2, 2.44e1],
    [4.95e14, 4.86e7, 2.81e3, 1.46e2],
];

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[arg(long, default_value = "gngf")]
    pub family: Family,
    #[arg(short, long, default_value_t = 2)]
    pub p: usize,
    /// Extrapolation order.
    #[arg(short, long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub kappa: Vec<f64>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub rho: f64,
    /// Upper end of the interval search.
    #[arg(long, default_value_t = 1e30)]
    pub tau_max: f64,
    /// Rasterize the region in the `ξ = τ^α λ` plane instead.
    #[arg(long)]
    pub raster: bool,
    /// `ρ = γλ` for the raster.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// `κ = -θρ` for the raster.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value = "-2:10", allow_hyphen_values = true)]
    pub re: String,
    #[arg(long, default_value = "-6:6", allow_hyphen_values = true)]
    pub im: String,
    #[arg(long, default_value_t = 121)]
    pub nx: usize,
    #[arg(long, default_value_t = 121)]
    pub ny: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub check: CheckArg,
}

fn range(s: &str) -> Result<(f64, f64)> {
    let bad = || CliError::config(format!("expected `lo:hi`, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a < b {
        Ok((a, b))
    } else {
        Err(bad())
    }
}

pub fn run(out: &Path, mut args: StabilityArgs) -> Result<()> {
    if args.alpha.is_empty() {
        args.alpha = if args.raster { vec![0.5] } else { DEFAULT_ALPHAS.to_vec() };
    }
    if args.kappa.is_empty() {
        args.kappa = DEFAULT_KAPPAS.to_vec();
    }
    let mut out = Output::new(out)?;
    if args.raster {
        let (re, im) = (range(&args.re)?, range(&args.im)?);
        for &alpha in &args.alpha {
            let gf = GeneratingFunction::new(args.family, args.p, alpha, 1.0)?;
            let cells = region_raster(&gf, args.q, args.gamma, args.theta, re, im, args.nx, args.ny, 1024)?;
            let name = format!("region_raster_a{alpha}_g{}_t{}.csv", args.gamma, args.theta);
            out.write(&name, |w| {
                writeln!(w, "# {gf},q={},gamma={},theta={}", args.q, args.gamma, args.theta)?;
                writeln!(w, "re_xi,im_xi,stable01")?;
                for c in &cells {
                    writeln!(w, "{:.10e},{:.10e},{}", c.re_xi, c.im_xi, c.stable as u8)?;
                }
                Ok(())
            })?;
        }
        return out.manifest("stability", &args);
    }

    let cells: Vec<(f64, f64)> = args
        .kappa
        .iter()
        .flat_map(|&k| args.alpha.iter().map(move |&a| (a, k)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(alpha, kappa)| {
            let prob = ScalarProblem::new(args.family, args.p, alpha, args.q, args.lambda, args.rho, kappa)?;
            let s = stability_interval(&prob, args.tau_max, 1e-10)?;
            Ok(s.tau_star)
        })
        .collect::<fracstep::Result<Vec<f64>>>()?;
    out.write("stability_intervals.csv", |w| {
        writeln!(w, "alpha,kappa,tau_star")?;
        for ((a, k), t) in cells.iter().zip(&results) {
            writeln!(w, "{a},{k},{}", fmt_value(*t))?;
        }
        Ok(())
    })?;
    if cells.len() == 1 {
        println!("tau_star = {}", fmt_value(results[0]));
    }
    out.manifest("stability", &args)?;
    if args.check.check {
        check_intervals(&args, &cells, &results)?;
    }
    Ok(())
}

fn check_intervals(args: &StabilityArgs, cells: &[(f64, f64)], got: &[f64]) -> Result<()> {
    let reference_setup = args.family == Family::Gngf && args.p == 2 && args.q == 2 && args.lambda == -1.0 && args.rho == -2.0;
    if !reference_setup {
        return Err(CliError::config("--check needs the reference setup (gngf, p=2, q=2, lambda=-1, rho=-2)"));
    }
    let mut failures = Vec::new();
    let mut compared = 0;
    for (&(a, k), &t) in cells.iter().zip(got) {
        let Some(j) = DEFAULT_ALPHAS.iter().position(|&x| x == a) else { continue };
        let Some(i) = DEFAULT_KAPPAS.iter().position(|&x| x == k) else { continue };
        compared += 1;
        let ok = if i < REFERENCE.len() {
            (t / REFERENCE[i][j] - 1.0).abs() <= 0.05
        } else {
            t.is_infinite()
        };
        if !ok {
            failures.push(format!("alpha={a} kappa={k}: {}", fmt_value(t)));
        }
    }
    if compared == 0 {
        return Err(CliError::config("--check: no cell of the reference grid was requested"));
    }
    if failures.is_empty() {
        println!("check passed ({compared} cells)");
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}
