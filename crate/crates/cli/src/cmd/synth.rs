use std::path::PathBuf;

use chrono::{NaiveDate, NaiveDateTime};
use hahnfit::synth::{impulse_series, step_series, write_corpus, CorpusSpec, Injection, InjectionKind};
use hahnfit::{write_series_csv, DataSeries, Lattice};
use serde::Serialize;

use super::parse_satellites;
use crate::manifest::Recorder;
use crate::{usage, Context};

#[derive(clap::Subcommand, Debug, Serialize)]
pub enum Kind {
    /// Unit-style step: 0 before `at`, `magnitude` from `at` on.
    Jump(PatternArgs),
    /// Zero everywhere except `magnitude` at `at`.
    Outlier(PatternArgs),
    /// Daily SP3 files of smooth orbits with optional injected anomalies.
    Orbit(OrbitArgs),
}

#[derive(clap::Args, Debug, Serialize)]
pub struct PatternArgs {
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long, default_value_t = 40)]
    at: usize,
    #[arg(long, default_value_t = 1.0)]
    magnitude: f64,
    /// Output CSV with columns t,value.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug, Serialize)]
pub struct OrbitArgs {
    #[arg(long, default_value = "2010-08-01")]
    start: NaiveDate,
    #[arg(long, default_value_t = 10)]
    days: usize,
    #[arg(long, default_value = "G08,G09,G25")]
    sats: String,
    #[arg(long, default_value_t = 900.0)]
    interval: f64,
    /// Keep full precision instead of rounding to millimeters.
    #[arg(long)]
    no_round: bool,
    /// Uniform noise half-width in km, added before rounding.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Persistent offset: SAT,COORD,EPOCH,KM (EPOCH as 2010-08-04T00:00:00). Repeatable.
    #[arg(long = "jump")]
    jumps: Vec<String>,
    /// Single-epoch offset: SAT,COORD,EPOCH,KM. Repeatable.
    #[arg(long = "outlier")]
    outliers: Vec<String>,
    /// Output directory for the SP3 files, truth.json and the manifest.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[command(subcommand)]
    kind: Kind,
}

fn parse_injection(kind: InjectionKind, s: &str) -> anyhow::Result<Injection> {
    let bad = |why: &str| usage(format!("cannot read injection {s:?}: {why}"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [sat, coord, epoch, km] = parts[..] else {
        return Err(bad("expected SAT,COORD,EPOCH,KM"));
    };
    Ok(Injection {
        kind,
        satellite: sat.parse().map_err(|_| bad("satellite"))?,
        coordinate: coord.parse().map_err(|_| bad("coordinate"))?,
        epoch: NaiveDateTime::parse_from_str(epoch, "%Y-%m-%dT%H:%M:%S").map_err(|_| bad("epoch"))?,
        magnitude_km: km.parse().map_err(|_| bad("magnitude"))?,
    })
}

fn pattern(a: &PatternArgs, values: Vec<f64>, ctx: &Context, name: &'static str, args: &Args) -> anyhow::Result<()> {
    let mut rec = Recorder::start(name);
    let series = DataSeries::new(Lattice::equidistant(a.points - 1)?, values, "")?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_series_csv(&series, std::fs::File::create(&a.out)?)?;
    rec.output(&a.out);
    let dir = a.out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
    rec.finish(dir, args, ctx.threads)?;
    Ok(())
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    match &args.kind {
        Kind::Jump(a) | Kind::Outlier(a) => {
            if a.points < 2 || a.at >= a.points {
                return Err(usage(format!("need at least 2 points and 0 <= at < points, got {} and {}", a.points, a.at)));
            }
            if !a.magnitude.is_finite() {
                return Err(usage("magnitude must be finite"));
            }
            match &args.kind {
                Kind::Jump(_) => pattern(a, step_series(a.points, a.at, a.magnitude), ctx, "synth-jump", &args),
                _ => pattern(a, impulse_series(a.points, a.at, a.magnitude), ctx, "synth-outlier", &args),
            }
        }
        Kind::Orbit(o) => {
            let mut spec = CorpusSpec::new(o.start, o.days, parse_satellites(&o.sats)?);
            spec.interval_s = o.interval;
            spec.round_mm = !o.no_round;
            spec.noise_km = o.noise;
            spec.seed = o.seed;
            for j in &o.jumps {
                spec.injections.push(parse_injection(InjectionKind::Jump, j)?);
            }
            for j in &o.outliers {
                spec.injections.push(parse_injection(InjectionKind::Outlier, j)?);
            }
            let mut rec = Recorder::start("synth-orbit");
            let paths = write_corpus(&spec, &o.out)?;
            paths.iter().for_each(|p| rec.output(p));
            rec.output(o.out.join("truth.json"));
            println!("{} files written to {}", paths.len(), o.out.display());
            rec.finish(&o.out, &args, ctx.threads)?;
            Ok(())
        }
    }
}
