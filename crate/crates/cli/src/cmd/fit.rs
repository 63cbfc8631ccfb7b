use std::io::BufWriter;
use std::path::PathBuf;

use chrono::NaiveDate;
use hahnfit::fit::{write_fit_csv, write_fit_sidecar, FitSidecar};
use hahnfit::sp3::{assemble_window, Coordinate, SatId};
use hahnfit::{build_basis, detrend, read_series_csv, DataSeries};
use serde::Serialize;

use super::{load_sp3_dir, store_of, DEFAULT_SP3_GLOB};
use crate::manifest::Recorder;
use crate::{usage, Context};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// CSV input with `t` and `value` columns.
    #[arg(long, conflicts_with = "sp3")]
    csv: Option<PathBuf>,
    /// Directory of SP3 files.
    #[arg(long)]
    sp3: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_SP3_GLOB)]
    glob: String,
    /// Satellite for SP3 input, e.g. G08.
    #[arg(long)]
    sat: Option<String>,
    #[arg(long, default_value = "X")]
    coord: String,
    /// First day of the SP3 window (YYYY-MM-DD); defaults to the first day held.
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long, default_value_t = 4)]
    days: usize,
    /// Fit degree.
    #[arg(short, long)]
    degree: usize,
    #[arg(long, default_value_t = f64::EPSILON)]
    tol: f64,
    /// Unit label for CSV input.
    #[arg(long, default_value = "")]
    unit: String,
    /// Output directory for fit.csv, fit.json and the manifest.
    #[arg(short, long)]
    out: PathBuf,
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let mut rec = Recorder::start("fit");
    let series = match (&args.csv, &args.sp3) {
        (Some(path), None) => {
            rec.input(path);
            read_series_csv(std::fs::File::open(path)?, &args.unit)?
        }
        (None, Some(dir)) => sp3_series(&args, dir, &mut rec, ctx)?,
        _ => return Err(usage("give either --csv FILE or --sp3 DIR")),
    };
    if args.degree >= series.len() {
        return Err(usage(format!(
            "degree {} needs more than {} points",
            args.degree,
            series.len()
        )));
    }
    let basis = build_basis(series.lattice(), args.degree, args.tol)?;
    let fit = detrend(&basis, &series, args.degree)?;
    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("fit.csv");
    write_fit_csv(&series, &fit, BufWriter::new(std::fs::File::create(&csv_path)?))?;
    rec.output(&csv_path);
    let json_path = args.out.join("fit.json");
    write_fit_sidecar(&FitSidecar::new(&basis, &series, &fit), std::fs::File::create(&json_path)?)?;
    rec.output(&json_path);
    let max_res = fit.residue.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    println!("points {} degree {} max_abs_residue {max_res:e}", series.len(), args.degree);
    rec.finish(&args.out, &args, ctx.threads)?;
    Ok(())
}

fn sp3_series(args: &Args, dir: &std::path::Path, rec: &mut Recorder, ctx: &Context) -> anyhow::Result<DataSeries> {
    let Some(sat) = &args.sat else {
        return Err(usage("--sat is required with --sp3"));
    };
    let sat: SatId = sat.parse().map_err(|e: hahnfit::Error| usage(e.to_string()))?;
    let coord: Coordinate = args.coord.parse().map_err(|e: hahnfit::Error| usage(e.to_string()))?;
    let (paths, files) = load_sp3_dir(dir, &args.glob, ctx.exec)?;
    paths.iter().for_each(|p| rec.input(p));
    let (store, interval) = store_of(&files);
    let start = match args.start {
        Some(d) => d.and_hms_opt(0, 0, 0).unwrap(),
        None => {
            let (first, _) = store
                .epoch_range(sat)
                .ok_or_else(|| hahnfit::Error::InvalidSeries(format!("no records for {sat}")))?;
            first.date().and_hms_opt(0, 0, 0).unwrap()
        }
    };
    let window = assemble_window(&store, sat, coord, start, args.days, interval, 1.0)?;
    if !window.series.gaps.is_empty() {
        log::warn!("{} missing epochs; fitting on a perturbed lattice", window.series.gaps.len());
    }
    Ok(window.data_series()?)
}
