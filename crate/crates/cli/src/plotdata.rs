//! `plotdata`: histogram and empirical-cdf tables from a CSV column.

use crate::output::{Cell, Format, Table};
use crate::Failure;
use clap::Args;
use overlap_core::verify::{ecdf, Histogram};
use std::path::{Path, PathBuf};

/// Columns holding counts; these get unit bins centred on the integers.
const INTEGER_COLUMNS: [&str; 7] = ["index", "n", "k", "upon", "during", "total", "window"];

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A CSV written by `simulate`.
    pub source: PathBuf,
    /// Column to summarize (default: the last one).
    #[arg(long)]
    pub column: Option<String>,
    /// Equal-width bins for real-valued columns.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Keep exact zeros of a real-valued column. By default they are
    /// dropped, so an overlap column yields its positive part.
    #[arg(long)]
    pub keep_zeros: bool,
    /// Output directory (default: next to the source).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn read_column(path: &Path, column: Option<&str>) -> Result<(String, Vec<f64>), Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?.clone();
    let name = match column {
        Some(c) => c.to_string(),
        None => headers.iter().last().ok_or_else(|| Failure::Config(format!("{} has no columns", path.display())))?.to_string(),
    };
    let idx = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Failure::Config(format!("{} has no column {name:?}; columns are {}", path.display(), headers.iter().collect::<Vec<_>>().join(", "))))?;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let field = record.get(idx).unwrap_or("");
        let x = field.parse::<f64>().map_err(|_| Failure::Config(format!("{}: row {} has non-numeric {name} {field:?}", path.display(), line + 2)))?;
        values.push(x);
    }
    Ok((name, values))
}

/// `bins` equal-width bins covering `[lo, hi]` whose width has three
/// significant digits and whose edges are integer multiples of the width's
/// last digit, so every edge prints exactly at nine significant digits and
/// widths read back from the CSV are exact.
fn round_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut span = (hi - lo).max(hi.abs() * 1e-6).max(1e-300);
    loop {
        let raw = span / bins as f64;
        let unit = 10f64.powi(raw.log10().floor() as i32 - 2);
        let width = (raw / unit).ceil() as i64;
        let start = (lo / unit).floor() as i64;
        let start = start - start.rem_euclid(width);
        let edges: Vec<f64> = (0..=bins as i64).map(|i| (start + i * width) as f64 * unit).collect();
        if edges[bins] >= hi && edges[0] <= lo {
            return edges;
        }
        span = hi - edges[0] + unit;
    }
}

pub fn run(args: &PlotArgs) -> Result<PlotOutput, Failure> {
    if !args.source.is_file() {
        return Err(Failure::Io(format!("source {} does not exist", args.source.display())));
    }
    let (name, mut values) = read_column(&args.source, args.column.as_deref())?;
    let integer = INTEGER_COLUMNS.contains(&name.as_str());
    let mut warnings = Vec::new();
    if !integer && !args.keep_zeros {
        let before = values.len();
        values.retain(|&x| x != 0.0);
        if before > values.len() {
            warnings.push(format!("dropped {} zero values of {} ({} left)", before - values.len(), before, values.len()));
        }
    }
    if values.is_empty() {
        warnings.push(format!("no values to summarize in column {name}; writing header-only files"));
    }

    let hist = if integer {
        if values.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
            return Err(Failure::Config(format!("column {name} should hold nonnegative integers")));
        }
        Histogram::integer(&values.iter().map(|&x| x as u64).collect::<Vec<_>>())?
    } else {
        if args.bins == 0 {
            return Err(Failure::Config("--bins must be at least 1".into()));
        }
        match (values.iter().copied().reduce(f64::min), values.iter().copied().reduce(f64::max)) {
            (Some(lo), Some(hi)) => Histogram::from_edges(&values, round_edges(lo, hi, args.bins))?,
            _ => Histogram::uniform(&values, args.bins)?,
        }
    };
    let mut h = Table::new(&["bin_left", "bin_right", "count", "density"]);
    for (i, (&c, &d)) in hist.counts.iter().zip(&hist.densities).enumerate() {
        h.push(vec![Cell::Real(hist.edges[i]), Cell::Real(hist.edges[i + 1]), Cell::Int(c), Cell::Real(d)]);
    }
    let mut f = Table::new(&["x", "F(x)"]);
    if !values.is_empty() {
        for (x, p) in ecdf(&values)?.steps() {
            f.push(vec![Cell::Real(x), Cell::Real(p)]);
        }
    }

    let stem = args.source.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    let stem = if args.column.is_some() { format!("{stem}_{name}") } else { stem };
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args.source.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    let mut files = h.write(&dir, &format!("{stem}_hist"), &[Format::Csv])?;
    files.extend(f.write(&dir, &format!("{stem}_cdf"), &[Format::Csv])?);
    Ok(PlotOutput { files, warnings })
}
