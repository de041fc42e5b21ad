use std::path::{Path, PathBuf};

use clap::Args;

use crate::error::{CliError, CliResult};
use crate::io::{read_bytes, write_csv};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Per-scene CSVs written by `svp eval`; each becomes one output row.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Column-wise mean of every numeric column; the first column holds ids.
fn summarize(path: &Path) -> CliResult<(Vec<String>, usize, Vec<f64>)> {
    let bytes = read_bytes(path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::format(path, e))?
        .iter()
        .skip(1)
        .map(String::from)
        .collect();
    let mut sums = vec![0.0; header.len()];
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::format(path, e))?;
        for (sum, field) in sums.iter_mut().zip(record.iter().skip(1)) {
            *sum += field
                .parse::<f64>()
                .map_err(|e| CliError::format(path, format!("{field:?}: {e}")))?;
        }
        rows += 1;
    }
    if rows > 0 {
        for s in &mut sums {
            *s /= rows as f64;
        }
    }
    Ok((header, rows, sums))
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for path in &args.inputs {
        let (header, count, means) = summarize(path)?;
        match &columns {
            None => columns = Some(header),
            Some(c) if *c != header => {
                return Err(CliError::format(path, "columns differ from the first input"));
            }
            Some(_) => {}
        }
        let mut row = vec![path.display().to_string(), count.to_string()];
        row.extend(means.into_iter().map(|v| v.to_string()));
        rows.push(row);
    }
    let mut header = vec!["source".to_string(), "scenes".to_string()];
    header.extend(columns.unwrap_or_default());
    write_csv(&args.output, &header, &rows)
}
