//! CSV formats: datasets (`y,x1,...,xd`), per-step intervals and reports.
//! Floats are written with 17 significant digits.

use std::path::Path;

use enpi::eval::EvalRecord;
use enpi::{Dataset, ExperimentReport};

use crate::error::{CliError, Result};

pub const INTERVAL_HEADER: &str = "trial,t,y_true,center,lower,upper,covered,width,winkler";
pub const REPORT_HEADER: &str =
    "method,regressor,dataset,alpha,n_trials,coverage_mean,coverage_sd,width_mean,width_sd,winkler_mean,winkler_sd";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn dataset_csv(data: &Dataset) -> String {
    let d = data.n_features();
    let mut out = String::from("y");
    (1..=d).for_each(|j| out.push_str(&format!(",x{j}")));
    out.push('\n');
    for t in 0..data.len() {
        out.push_str(&fmt_f64(data.y(t)));
        for v in data.row(t) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes())
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| CliError::Csv(format!("row {row}: column {column}: cannot parse {cell:?} as a number")))?;
    if v.is_nan() {
        return Err(CliError::Csv(format!("row {row}: column {column}: NaN")));
    }
    Ok(v)
}

/// Rows are counted from 1 after the header.
fn records(text: &str) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut rdr = reader(text);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Csv(format!("header: {e}")))?
        .clone();
    let rows = rdr
        .records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Csv(format!("row {}: {e}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// Reads a dataset; the first column is the response.
pub fn read_dataset(text: &str) -> Result<Dataset> {
    let (header, rows) = records(text)?;
    if header.get(0).map(str::trim) != Some("y") {
        return Err(CliError::Csv("header: first column must be y".into()));
    }
    if header.len() < 2 {
        return Err(CliError::Csv("header: no feature columns".into()));
    }
    if rows.is_empty() {
        return Err(CliError::Csv("no data rows".into()));
    }
    let d = header.len() - 1;
    let mut response = Vec::with_capacity(rows.len());
    let mut features = Vec::with_capacity(rows.len() * d);
    for (i, rec) in rows.iter().enumerate() {
        let row = i + 1;
        for (j, cell) in rec.iter().enumerate() {
            let v = parse_cell(cell, row, &header[j])?;
            if !v.is_finite() {
                return Err(CliError::Csv(format!("row {row}: column {}: non-finite value", &header[j])));
            }
            if j == 0 {
                response.push(v);
            } else {
                features.push(v);
            }
        }
    }
    Ok(Dataset::new(features, response, d, 0)?)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    read_dataset(&text).map_err(|e| match e {
        CliError::Csv(m) => CliError::Csv(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn interval_rows(out: &mut String, trial: usize, records: &[EvalRecord]) {
    for r in records {
        out.push_str(&format!(
            "{trial},{},{},{},{},{},{},{},{}\n",
            r.t,
            fmt_f64(r.y_true),
            fmt_f64(r.center),
            fmt_f64(r.lower),
            fmt_f64(r.upper),
            u8::from(r.covered),
            fmt_f64(r.width),
            fmt_f64(r.winkler)
        ));
    }
}

/// Interval rows grouped by trial, in first-seen trial order.
///
/// Only `y_true`, `lower` and `upper` are required; `trial` defaults to 0,
/// `t` to the row number and `center` to the midpoint. Coverage, width and
/// Winkler score are recomputed at `alpha`.
pub fn read_intervals(text: &str, alpha: f64) -> Result<Vec<Vec<EvalRecord>>> {
    let (header, rows) = records(text)?;
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let need = |name: &str| col(name).ok_or_else(|| CliError::Csv(format!("header: missing column {name}")));
    let (iy, il, iu) = (need("y_true")?, need("lower")?, need("upper")?);
    let (itrial, it, ic) = (col("trial"), col("t"), col("center"));
    if rows.is_empty() {
        return Err(CliError::Csv("no data rows".into()));
    }

    let mut trials: Vec<(u64, Vec<EvalRecord>)> = Vec::new();
    for (i, rec) in rows.iter().enumerate() {
        let row = i + 1;
        let get = |k: usize| {
            rec.get(k)
                .ok_or_else(|| CliError::Csv(format!("row {row}: missing column {}", &header[k])))
        };
        let integer = |k: usize| -> Result<u64> {
            let cell = get(k)?;
            cell.trim()
                .parse()
                .map_err(|_| CliError::Csv(format!("row {row}: column {}: {cell:?} is not an integer", &header[k])))
        };
        let trial = itrial.map(integer).transpose()?.unwrap_or(0);
        let t = it.map(integer).transpose()?.map_or(row, |v| v as usize);
        let y = parse_cell(get(iy)?, row, "y_true")?;
        let lower = parse_cell(get(il)?, row, "lower")?;
        let upper = parse_cell(get(iu)?, row, "upper")?;
        if lower > upper {
            return Err(CliError::Csv(format!("row {row}: lower {lower} above upper {upper}")));
        }
        let center = match ic {
            Some(k) => parse_cell(get(k)?, row, "center")?,
            None => 0.5 * (lower + upper),
        };
        let record = EvalRecord::from_bounds(t, y, center, lower, upper, alpha);
        match trials.iter_mut().find(|(k, _)| *k == trial) {
            Some((_, list)) => list.push(record),
            None => trials.push((trial, vec![record])),
        }
    }
    Ok(trials.into_iter().map(|(_, r)| r).collect())
}

pub fn report_row(out: &mut String, r: &ExperimentReport) {
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        r.method,
        r.regressor,
        r.dataset,
        fmt_f64(r.alpha),
        r.n_trials,
        fmt_f64(r.coverage_mean),
        fmt_f64(r.coverage_sd),
        fmt_f64(r.width_mean),
        fmt_f64(r.width_sd),
        fmt_f64(r.winkler_mean),
        fmt_f64(r.winkler_sd)
    ));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_exact() {
        let data = Dataset::new(vec![0.1, 1e-300, -3.0, 1.0 / 3.0], vec![2.5, -7.0 / 9.0], 2, 0).unwrap();
        let back = read_dataset(&dataset_csv(&data)).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn dataset_errors_name_the_row() {
        let err = read_dataset("y,x1\n1,2\n3,abc\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let err = read_dataset("y,x1\n1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let err = read_dataset("y,x1\n1,NaN\n").unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(read_dataset("x1,y\n1,2\n").is_err());
        assert!(read_dataset("y,x1\n").is_err());
    }

    #[test]
    fn intervals_are_rescored() {
        let text = "trial,y_true,lower,upper\n0,0.5,0,1\n0,-0.5,0,1\n1,1.5,0,1\n";
        let trials = read_intervals(text, 0.1).unwrap();
        assert_eq!(trials.len(), 2);
        assert_eq!(trials[0][1].winkler, 11.0);
        assert!(!trials[0][1].covered);
        assert_eq!(trials[1][0].t, 3);
        assert!(read_intervals("y_true,lower\n1,2\n", 0.1).is_err());
        assert!(read_intervals("y_true,lower,upper\n1,2,0\n", 0.1).is_err());
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
