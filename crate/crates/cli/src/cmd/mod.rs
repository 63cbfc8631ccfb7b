pub mod basis;
pub mod decay;
pub mod detect;
pub mod fit;
pub mod synth;

use std::path::{Path, PathBuf};

use hahnfit::sp3::{parse_files, scan_dir, Coordinate, RecordStore, SatId, Sp3File};
use hahnfit::Execution;

use crate::usage;

pub const DEFAULT_SP3_GLOB: &str = "*.[sS][pP]3";

pub fn parse_satellites(list: &str) -> anyhow::Result<Vec<SatId>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<SatId>().map_err(|e| usage(e.to_string())))
        .collect()
}

pub fn parse_coordinates(list: &str) -> anyhow::Result<Vec<Coordinate>> {
    let mut out: Vec<Coordinate> = list
        .chars()
        .filter(|c| !matches!(c, ',' | ' '))
        .map(|c| c.to_string().parse::<Coordinate>().map_err(|e| usage(e.to_string())))
        .collect::<anyhow::Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(usage("no coordinates selected"));
    }
    Ok(out)
}

/// Parse every SP3 file in `dir`, skipping unreadable ones with a warning.
pub fn load_sp3_dir(dir: &Path, glob: &str, exec: Execution) -> anyhow::Result<(Vec<PathBuf>, Vec<Sp3File>)> {
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a directory", dir.display())));
    }
    let paths = scan_dir(dir, Some(glob))?;
    if paths.is_empty() {
        return Err(usage(format!("no files matching {glob} in {}", dir.display())));
    }
    let mut used = Vec::new();
    let mut files = Vec::new();
    for (p, r) in paths.iter().zip(parse_files(&paths, exec)) {
        match r {
            Ok(f) => {
                for issue in &f.issues {
                    log::warn!("{}:{}: {}", p.display(), issue.line, issue.reason);
                }
                used.push(p.clone());
                files.push(f);
            }
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
    }
    if files.is_empty() {
        return Err(hahnfit::Error::InvalidSeries(format!("no readable SP3 files in {}", dir.display())).into());
    }
    Ok((used, files))
}

pub fn store_of(files: &[Sp3File]) -> (RecordStore, f64) {
    let interval = files[0].header.interval_s;
    if files.iter().any(|f| f.header.interval_s != interval) {
        log::warn!("files declare different epoch intervals; using {interval} s");
    }
    (RecordStore::from_files(files), interval)
}
