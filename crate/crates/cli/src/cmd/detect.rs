use std::io::{BufWriter, Write};
use std::path::PathBuf;

use hahnfit::detect::{analyze_store, write_events_csv, write_events_jsonl, DetectorConfig};
use hahnfit::BasisCache;
use serde::Serialize;

use super::{load_sp3_dir, parse_coordinates, parse_satellites, store_of, DEFAULT_SP3_GLOB};
use crate::manifest::Recorder;
use crate::{usage, Context, SeverityExceeded};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
    Both,
}

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Directory of SP3 files.
    dir: PathBuf,
    #[arg(long, default_value = DEFAULT_SP3_GLOB)]
    glob: String,
    /// Comma-separated satellites; all by default.
    #[arg(long)]
    sat: Option<String>,
    /// Coordinates to scan, e.g. XYZ or X,Z.
    #[arg(long, default_value = "XYZ")]
    coord: String,
    #[arg(long, default_value_t = 384)]
    window: usize,
    #[arg(long, default_value_t = 200)]
    degree: usize,
    #[arg(long, default_value_t = 96)]
    step: usize,
    /// Re-orthogonalization tolerance of the window bases.
    #[arg(long, default_value_t = f64::EPSILON)]
    tol: f64,
    /// Masked points at each window edge.
    #[arg(long, default_value_t = 8)]
    mask: usize,
    /// Also mask edge points where a unit spike keeps less than this fraction
    /// of itself after detrending.
    #[arg(long, default_value_t = 0.01)]
    min_observability: f64,
    /// Spike threshold in robust sigma units.
    #[arg(long, default_value_t = 6.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0.05)]
    max_gap_fraction: f64,
    /// Reject windows whose robust sigma exceeds this (km).
    #[arg(long)]
    noise_ceiling: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Exit with status 4 if any event is larger than this (km).
    #[arg(long)]
    fail_above: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Resolved<'a> {
    args: &'a Args,
    detector: &'a DetectorConfig,
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let config = DetectorConfig {
        window_points: args.window,
        degree: args.degree,
        step_points: args.step,
        spike_threshold_factor: args.threshold,
        boundary_mask_points: args.mask,
        min_observability: args.min_observability,
        orth_tol: args.tol,
        max_gap_fraction: args.max_gap_fraction,
        noise_ceiling_km: args.noise_ceiling,
        ..DetectorConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let coords = parse_coordinates(&args.coord)?;
    let mut rec = Recorder::start("detect");
    let (paths, files) = load_sp3_dir(&args.dir, &args.glob, ctx.exec)?;
    paths.iter().for_each(|p| rec.input(p));
    let (store, interval) = store_of(&files);
    let sats = match &args.sat {
        Some(list) => parse_satellites(list)?,
        None => store.satellites(),
    };
    let cache = BasisCache::from_env();
    let analysis = analyze_store(&store, &sats, &coords, interval, &cache, &config, ctx.exec)?;

    std::fs::create_dir_all(&args.out)?;
    if args.format != Format::Csv {
        let p = args.out.join("events.jsonl");
        let mut w = BufWriter::new(std::fs::File::create(&p)?);
        write_events_jsonl(&analysis.events, &mut w)?;
        w.flush()?;
        rec.output(&p);
    }
    if args.format != Format::Jsonl {
        let p = args.out.join("events.csv");
        write_events_csv(&analysis.events, BufWriter::new(std::fs::File::create(&p)?))?;
        rec.output(&p);
    }
    let p = args.out.join("windows.jsonl");
    let mut w = BufWriter::new(std::fs::File::create(&p)?);
    for r in &analysis.windows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    rec.output(&p);
    rec.finish(&args.out, &Resolved { args: &args, detector: &config }, ctx.threads)?;

    println!(
        "{} events in {} windows ({} failed)",
        analysis.events.len(),
        analysis.windows.len(),
        analysis.failed_windows()
    );
    for e in &analysis.events {
        println!("{} {} {} {} {:.6e} km", e.satellite, e.coordinate, e.epoch, e.kind.as_str(), e.magnitude_km);
    }
    if let Some(limit) = args.fail_above {
        let n = analysis.events.iter().filter(|e| e.magnitude_km > limit).count();
        if n > 0 {
            return Err(SeverityExceeded(n).into());
        }
    }
    Ok(())
}
