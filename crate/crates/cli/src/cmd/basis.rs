use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hahnfit::basis::write_basis;
use hahnfit::conditioning::{basis_gram_condition, monomial_condition};
use hahnfit::{build_basis, Lattice};
use serde::Serialize;

use crate::manifest::Recorder;
use crate::{usage, Context};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Lattice upper index N (the grid is 0..=N).
    #[arg(short = 'n', long = "upper", conflicts_with = "lattice")]
    upper: Option<usize>,
    /// File with one abscissa per line ('#' starts a comment).
    #[arg(long)]
    lattice: Option<PathBuf>,
    /// Highest degree M; defaults to the number of points minus one.
    #[arg(short = 'm', long)]
    degree: Option<usize>,
    /// Re-orthogonalization tolerance.
    #[arg(long, default_value_t = f64::EPSILON)]
    tol: f64,
    /// Cache file to write.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print monomial design-matrix condition estimates on 11 and 31 points.
    #[arg(long)]
    show_conditioning: bool,
}

fn read_lattice(path: &Path) -> anyhow::Result<Lattice> {
    let text = std::fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line
            .parse()
            .map_err(|_| hahnfit::Error::InvalidLattice(format!("{}:{}: not a number", path.display(), i + 1)))?;
        pts.push(x);
    }
    Ok(Lattice::new(pts)?)
}

fn show_conditioning() -> anyhow::Result<()> {
    println!("points  degrees  monomial_condition  basis_gram_condition");
    for points in [11, 31] {
        let c = monomial_condition(points)?;
        let basis = build_basis(&Lattice::equidistant(points - 1)?, points - 1, f64::EPSILON)?;
        println!(
            "{points:>6}  0..{:<5}  {:>18.4e}  {:>20.12}",
            c.max_degree,
            c.condition,
            basis_gram_condition(&basis)
        );
    }
    Ok(())
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    if args.show_conditioning {
        show_conditioning()?;
    }
    let lattice = match (&args.upper, &args.lattice) {
        (Some(n), None) => Lattice::equidistant(*n)?,
        (None, Some(p)) => read_lattice(p)?,
        (None, None) if args.show_conditioning => return Ok(()),
        _ => return Err(usage("give either --upper N or --lattice FILE")),
    };
    let Some(out) = &args.out else {
        return Err(usage("--out is required when building a basis"));
    };
    let degree = args.degree.unwrap_or(lattice.upper());
    if degree > lattice.upper() {
        return Err(usage(format!(
            "degree {degree} exceeds N = {} for a {}-point lattice",
            lattice.upper(),
            lattice.len()
        )));
    }
    let mut rec = Recorder::start("basis");
    if let Some(p) = &args.lattice {
        rec.input(p);
    }
    let basis = build_basis(&lattice, degree, args.tol)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_basis(&basis, BufWriter::new(std::fs::File::create(out)?))?;
    rec.output(out);
    println!("points {} max_degree {} kind {:?}", basis.len(), basis.max_degree(), basis.kind());
    println!("achieved_orth_err {:e}", basis.achieved_orth_err());
    println!("max_sweeps {}", basis.sweeps().iter().max().unwrap_or(&0));
    if args.show_conditioning {
        println!("basis_gram_condition {:.12}", basis_gram_condition(&basis));
    }
    let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    rec.finish(dir, &args, ctx.threads)?;
    Ok(())
}
