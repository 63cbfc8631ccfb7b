use std::io::Write;
use std::path::PathBuf;

use hahnfit::hahn::{decay_row, hahn_norm_sq_ln, hahn_value_log, root_bounds, summand_profile, HahnParams};
use serde::Serialize;

use crate::manifest::Recorder;
use crate::{usage, Context};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Lattice upper index N.
    #[arg(short = 'N', long = "upper")]
    upper: usize,
    /// Polynomial degree n.
    #[arg(short = 'n', long)]
    degree: usize,
    /// Grid points m, as `a..b` (inclusive) or a single value.
    #[arg(short, long, default_value = "1..10")]
    m: String,
    /// Also dump the summand profile q(k) at this m.
    #[arg(long)]
    profile: Option<usize>,
    /// Also dump log10 |Q^(x)| on a grid with this many steps per unit of x.
    #[arg(long)]
    grid: Option<usize>,
    /// Directory for decay.csv, the optional dumps and the manifest.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> anyhow::Result<std::ops::RangeInclusive<usize>> {
    let bad = || usage(format!("cannot read m range {s:?}; use a..b or a single value"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let params = HahnParams::new(args.upper, args.degree)?;
    let range = parse_range(&args.m)?;
    let mut rec = Recorder::start("decay");
    let mut table = Vec::new();
    writeln!(table, "m,k_tilde,abs_q,m_q_tilde")?;
    for m in range {
        if m >= 1 {
            let rb = root_bounds(args.upper, args.degree, m)?;
            if !rb.in_regime {
                log::warn!(
                    "m = {m}: outside the regime n >= N/2, m <= N/10; the root bracket is not guaranteed"
                );
            }
        }
        let row = decay_row(args.upper, args.degree, m)?;
        writeln!(table, "{},{},{:.6e},{:.6e}", row.m, row.peak_index, row.abs_value, row.bound)?;
    }
    std::io::stdout().write_all(&table)?;

    let Some(dir) = &args.out else {
        if args.profile.is_some() || args.grid.is_some() {
            return Err(usage("--profile and --grid need --out"));
        }
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let path = dir.join("decay.csv");
    std::fs::write(&path, &table)?;
    rec.output(&path);

    if let Some(m) = args.profile {
        let p = summand_profile(args.upper, args.degree, m)?;
        let mut out = String::from("k,log10_abs_q,sign\n");
        for (k, l) in p.ln_abs.iter().enumerate() {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            out.push_str(&format!("{k},{:.9},{sign}\n", l / std::f64::consts::LN_10));
        }
        let path = dir.join(format!("profile-{}-{}-{m}.csv", args.upper, args.degree));
        std::fs::write(&path, out)?;
        rec.output(&path);
    }
    if let Some(steps) = args.grid {
        if steps == 0 {
            return Err(usage("--grid needs at least one step per unit"));
        }
        let ln_h = hahn_norm_sq_ln(params);
        let mut out = String::from("x,log10_abs_value,sign\n");
        for i in 0..=args.upper * steps {
            let x = i as f64 / steps as f64;
            let v = hahn_value_log(params, x)?;
            if v.sign == 0 {
                out.push_str(&format!("{x},-inf,0\n"));
            } else {
                out.push_str(&format!("{x},{:.9},{}\n", (v.ln_abs - 0.5 * ln_h) / std::f64::consts::LN_10, v.sign));
            }
        }
        let path = dir.join(format!("grid-{}-{}.csv", args.upper, args.degree));
        std::fs::write(&path, out)?;
        rec.output(&path);
    }
    rec.finish(dir, &args, ctx.threads)?;
    Ok(())
}
