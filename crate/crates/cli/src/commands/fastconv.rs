use std::io::Write;
use std::path::Path;

use clap::Args;
use fracstep::contour::{hyperbolic_node_count, ContourKind, ContourQuadrature};
use fracstep::fastconv::{direct_convolution, FastConvParams, FastConvState};
use fracstep::{Family, GeneratingFunction};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::Output;
use crate::CheckArg;

#[derive(Debug, Clone, Args, Serialize)]
pub struct FastconvArgs {
    #[arg(long, default_value = "gngf")]
    pub family: Family,
    #[arg(short, long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    /// Number of steps.
    #[arg(short, long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub base: usize,
    #[arg(long, default_value_t = 50)]
    pub n0: usize,
    /// Talbot half node count.
    #[arg(long, default_value_t = 32)]
    pub talbot_nodes: usize,
    /// Hyperbolic half node count; default from the `ε = 1e-10` rule.
    #[arg(long)]
    pub hyperbolic_nodes: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Also write the level quadratures (nodes and weights).
    #[arg(long)]
    pub dump_quadrature: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub check: CheckArg,
}

fn run_contour(gf: GeneratingFunction, args: &FastconvArgs, contour: ContourKind, nodes: usize, u: &[f64]) -> Result<Vec<f64>> {
    let params = FastConvParams {
        base: args.base,
        n0: args.n0,
        contour,
        nodes,
    };
    let mut st = FastConvState::new(gf, params, 1, args.n)?;
    let mut out = Vec::with_capacity(u.len());
    for x in u {
        st.push_scalar(*x)?;
        out.push(st.evaluate()?[0]);
    }
    Ok(out)
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    }
}

pub fn run(out: &Path, mut args: FastconvArgs) -> Result<()> {
    let gf = GeneratingFunction::new(args.family, args.p, args.alpha, args.tau)?;
    let n_h = args
        .hyperbolic_nodes
        .unwrap_or_else(|| hyperbolic_node_count(args.tau, args.alpha, 1e-10));
    args.hyperbolic_nodes = Some(n_h);
    let u: Vec<f64> = (0..=args.n)
        .map(|n| {
            let t = n as f64 * args.tau;
            t * t + t
        })
        .collect();
    let direct = direct_convolution(&gf.weights(args.n), &u);
    let talbot = run_contour(gf, &args, ContourKind::Talbot, args.talbot_nodes, &u)?;
    let hyper = run_contour(gf, &args, ContourKind::Hyperbolic, n_h, &u)?;
    let mut out = Output::new(out)?;
    out.write("fastconv_check.csv", |w| {
        writeln!(w, "# {gf},u=t^2+t,B={},n0={},talbot_N={},hyperbolic_N={n_h}", args.base, args.n0, args.talbot_nodes)?;
        writeln!(w, "n,direct,fast_talbot,rel_err_talbot,fast_hyperbolic,rel_err_hyperbolic")?;
        for n in 0..=args.n {
            writeln!(
                w,
                "{n},{:.17e},{:.17e},{:.6e},{:.17e},{:.6e}",
                direct[n],
                talbot[n],
                rel(talbot[n], direct[n]),
                hyper[n],
                rel(hyper[n], direct[n])
            )?;
        }
        Ok(())
    })?;
    if args.dump_quadrature {
        let levels = fracstep::fastconv::bin_plan(args.n, args.n0, args.base)?.levels;
        for (kind, nodes) in [(ContourKind::Talbot, args.talbot_nodes), (ContourKind::Hyperbolic, n_h)] {
            for l in 1..=levels {
                let t_level = (2 * args.base.pow(l as u32) - 2 + args.n0) as f64 * args.tau;
                let q = ContourQuadrature::new(kind, nodes, t_level)?;
                out.write(&format!("quadrature_{kind}_level{l}.csv"), |w| q.write_csv(w))?;
            }
        }
    }
    out.manifest("fastconv-check", &args)?;
    let worst = |v: &[f64]| v.iter().zip(&direct).map(|(a, b)| rel(*a, *b)).fold(0.0f64, f64::max);
    let (wt, wh) = (worst(&talbot), worst(&hyper));
    println!("max relative error: talbot {wt:.3e} (N={}), hyperbolic {wh:.3e} (N={n_h})", args.talbot_nodes);
    if args.check.check {
        let mut bad = Vec::new();
        if wt > args.tol {
            bad.push(format!("talbot {wt:.3e} > {:.0e}", args.tol));
        }
        if wh > args.tol {
            bad.push(format!("hyperbolic {wh:.3e} > {:.0e}", args.tol));
        }
        if !bad.is_empty() {
            return Err(CliError::Check(bad.join("; ")));
        }
        println!("check passed");
    }
    Ok(())
}
