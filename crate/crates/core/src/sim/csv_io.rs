use std::io::{Read, Write};
use std::path::Path;

use super::{Method, ResultRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "trial",
    "method",
    "sweep_name",
    "sweep_value",
    "n_allocated",
    "sum_se_bits",
    "wall_time_ms",
];

/// `printf("%.{digits}g")`-style formatting; exponents are written `e-5`.
pub fn format_g(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    // the exponent after rounding to `digits` significant digits
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{exp}", strip_zeros(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes records as CSV (LF line endings, 12 significant digits).
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.method.tag().to_string(),
            r.sweep_name.clone(),
            format_g(r.sweep_value, 12),
            r.n_allocated.to_string(),
            format_g(r.sum_se_bits, 12),
            format_g(r.wall_time_ms, 12),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })
}

/// Parses CSV written by [`write_csv`].
pub fn parse_csv<R: Read>(input: R, path: &Path) -> Result<Vec<ResultRecord>> {
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(fmt(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| fmt(e.to_string()))?;
        let line = i + 2;
        let num = |col: usize| -> Result<f64> {
            row[col]
                .parse::<f64>()
                .map_err(|e| fmt(format!("line {line}, `{}`: {e}", CSV_HEADER[col])))
        };
        let int = |col: usize| -> Result<usize> {
            row[col]
                .parse::<usize>()
                .map_err(|e| fmt(format!("line {line}, `{}`: {e}", CSV_HEADER[col])))
        };
        out.push(ResultRecord {
            trial: int(0)?,
            method: Method::from_tag(&row[1]).ok_or_else(|| fmt(format!("line {line}: unknown method `{}`", &row[1])))?,
            sweep_name: row[2].to_string(),
            sweep_value: num(3)?,
            n_allocated: int(4)?,
            sum_se_bits: num(5)?,
            wall_time_ms: num(6)?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_csv(std::io::BufReader::new(file), path)
}
