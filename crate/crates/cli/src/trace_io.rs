//! Trace CSV files.
//!
//! Columns, in order: `t, p_x, p_y, v_x, v_y, y_noisy, hs_true, Lf_hs_true,
//! zhat1, zhat2, gp_h_mean, gp_h1_mean, baseline_Lf_gph, err_h1,
//! err_baseline, window_event`. `window_event` is 1 on rows where the sliding
//! window accepted a sample and 0 otherwise.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use hgo_gp::TraceRow;

use crate::CliError;

pub const COLUMNS: [&str; 16] = [
    "t",
    "p_x",
    "p_y",
    "v_x",
    "v_y",
    "y_noisy",
    "hs_true",
    "Lf_hs_true",
    "zhat1",
    "zhat2",
    "gp_h_mean",
    "gp_h1_mean",
    "baseline_Lf_gph",
    "err_h1",
    "err_baseline",
    "window_event",
];

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, rows: &[TraceRow]) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", path.display())))?;
    write_trace(BufWriter::new(file), rows)
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
}

/// Parses a trace, rejecting files with a different header, unparsable
/// rows, or no rows at all. Errors name the first offending line.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CliError::invalid(format!("line 1: unreadable header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::invalid("trace is empty"));
    }
    if !headers.iter().eq(COLUMNS) {
        return Err(CliError::invalid(format!(
            "line 1: unexpected header; expected columns {}",
            COLUMNS.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<TraceRow>().enumerate() {
        let line = i + 2;
        let row = record.map_err(|e| CliError::invalid(format!("line {line}: {}", describe(&e))))?;
        let values = [
            row.t,
            row.p_x,
            row.p_y,
            row.v_x,
            row.v_y,
            row.y_noisy,
            row.hs_true,
            row.lf_hs_true,
            row.zhat1,
            row.zhat2,
            row.gp_h_mean,
            row.gp_h1_mean,
            row.baseline_lf_gph,
            row.err_h1,
            row.err_baseline,
        ];
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(CliError::invalid(format!(
                "line {line}: column `{}` is not finite",
                COLUMNS[k]
            )));
        }
        if row.window_event > 1 {
            return Err(CliError::invalid(format!(
                "line {line}: `window_event` must be 0 or 1"
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::invalid("trace has a header but no rows"));
    }
    Ok(rows)
}

fn describe(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(k) => format!("column `{}`: {}", COLUMNS.get(k as usize).unwrap_or(&"?"), err.kind()),
            None => err.kind().to_string(),
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        other => format!("{other:?}"),
    }
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::invalid(format!("cannot open {}: {e}", path.display())))?;
    read_trace(std::io::BufReader::new(file))
        .map_err(|e| CliError::new(e.status, format!("{}: {}", path.display(), e.message)))
}
