use std::io::Write;
use std::path::Path;

use clap::Args;
use fracstep::corrections::StartingWeights;
use fracstep::{Family, GeneratingFunction};
use serde::Serialize;

use crate::error::Result;
use crate::output::Output;

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightsArgs {
    #[arg(long, default_value = "gngf")]
    pub family: Family,
    /// Method order.
    #[arg(short, long, default_value_t = 2)]
    pub p: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Largest index.
    #[arg(short, long)]
    pub n: usize,
    /// Correction exponents; also writes starting weights.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
}

pub fn run(out: &Path, args: WeightsArgs) -> Result<()> {
    let gf = GeneratingFunction::new(args.family, args.p, args.alpha, args.tau)?;
    let table = gf.weights(args.n);
    let mut out = Output::new(out)?;
    out.write("weights.csv", |w| table.write_csv(w))?;
    if !args.sigma.is_empty() {
        let sw = StartingWeights::from_table(&table, &args.sigma)?;
        out.write("starting_weights.csv", |w| {
            writeln!(w, "# {gf},sigma={:?},condition={:.3e}", args.sigma, sw.condition())?;
            let head: Vec<String> = (1..=sw.m()).map(|j| format!("w_{j}")).collect();
            writeln!(w, "n,{}", head.join(","))?;
            for n in 0..=args.n {
                let row: Vec<String> = sw.row(n).iter().map(|x| format!("{x:.17e}")).collect();
                writeln!(w, "{n},{}", row.join(","))?;
            }
            Ok(())
        })?;
    }
    out.manifest("weights", &args)
}
