//! Series CSV input, corpus discovery and output sinks.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use infospread::series::TimeSeries;

use crate::error::{CliError, CliResult};

/// Column names picked, in order, when the config names none.
const VALUE_COLUMNS: [&str; 4] = ["count", "new_active", "rate", "value"];

pub fn read_text(path: &str) -> CliResult<String> {
    let mut s = String::new();
    if path == "-" {
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io("<stdin>", e))?;
    } else {
        s = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    }
    Ok(s)
}

fn parse_table(text: &str, origin: &str) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::config(format!("{origin}: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::config(format!("{origin}: {e}")))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::config(format!("{origin}: row {}: bad number {field:?}", row + 2))
            })?;
            columns[j].push(v);
        }
    }
    Ok((headers, columns))
}

fn pick_column(headers: &[String], wanted: Option<&str>, origin: &str) -> CliResult<usize> {
    if let Some(name) = wanted {
        return headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("{origin}: no column {name:?}")));
    }
    VALUE_COLUMNS
        .iter()
        .find_map(|c| headers.iter().position(|h| h == c))
        .or_else(|| headers.iter().rposition(|h| h != "t"))
        .ok_or_else(|| CliError::config(format!("{origin}: no value column")))
}

/// One series from a CSV with a header row; `-` reads stdin.
pub fn read_series(path: &str, column: Option<&str>, bin_width: f64) -> CliResult<TimeSeries> {
    let text = read_text(path)?;
    let (headers, mut columns) = parse_table(&text, path)?;
    let j = pick_column(&headers, column, path)?;
    Ok(TimeSeries::new(std::mem::take(&mut columns[j]), bin_width)?)
}

/// A corpus: every `*.csv` in a directory (sorted by file name, one series
/// each), or every non-`t` column of a single wide CSV.
pub fn read_corpus(
    path: &str,
    column: Option<&str>,
    bin_width: f64,
) -> CliResult<Vec<(String, TimeSeries)>> {
    let p = Path::new(path);
    if path != "-" && p.is_dir() {
        let mut files: Vec<_> = fs::read_dir(p)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|f| f.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        return files
            .iter()
            .map(|f| {
                let name = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok((name, read_series(&f.to_string_lossy(), column, bin_width)?))
            })
            .collect();
    }
    let text = read_text(path)?;
    let (headers, columns) = parse_table(&text, path)?;
    headers
        .into_iter()
        .zip(columns)
        .filter(|(h, _)| h != "t")
        .map(|(h, c)| Ok((h, TimeSeries::new(c, bin_width)?)))
        .collect()
}

/// Series CSV with a `t` column in hours.
pub fn series_csv(series: &TimeSeries, value_name: &str) -> String {
    let mut out = format!("t,{value_name}\n");
    for (i, v) in series.values().iter().enumerate() {
        out.push_str(&format!("{},{v}\n", i as f64 * series.bin_width()));
    }
    out
}

/// Writes to `path`, or stdout when it is absent or `-`.
pub fn write_output(path: Option<&str>, bytes: &[u8]) -> CliResult<()> {
    match path {
        None | Some("-") => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
    }
}
