//! Report envelopes, tidy CSV rows and decimal rendering.

use std::io::Write;
use std::path::Path;

use exact_cantor::rational::Rounding;
use exact_cantor::{CertifiedValue, Rational};
use serde::Serialize;

use crate::config::Echo;
use crate::error::{CliError, CliResult};

/// Significant digits of every decimal in a report.
pub const DIGITS: usize = 12;

pub fn decimal(r: &Rational, rounding: Rounding) -> String {
    r.to_sci(DIGITS, rounding)
}

pub fn decimal_f64(x: f64) -> String {
    format!("{:.*e}", DIGITS - 1, x)
}

/// A JSON report: the command, its full config echo and the result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub format: &'static str,
    pub command: &'a str,
    pub config: &'a Echo,
    pub result: &'a T,
}

pub const REPORT_FORMAT: &str = "report-v1";

pub fn json<T: Serialize>(command: &str, echo: &Echo, result: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        format: REPORT_FORMAT,
        command,
        config: echo,
        result,
    })?;
    s.push('\n');
    Ok(s)
}

/// One CSV row: `section,index,quantity,lo,hi,lo_decimal,hi_decimal`.
///
/// Exact values fill `lo` and `hi` with the same `p/q`; enclosures give both
/// ends with decimals rounded outward; fitted floats leave the exact columns
/// empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub section: String,
    pub index: String,
    pub quantity: String,
    pub lo: String,
    pub hi: String,
    pub lo_decimal: String,
    pub hi_decimal: String,
}

impl Row {
    fn new(section: &str, index: impl ToString, quantity: &str) -> Self {
        Row {
            section: section.into(),
            index: index.to_string(),
            quantity: quantity.into(),
            lo: String::new(),
            hi: String::new(),
            lo_decimal: String::new(),
            hi_decimal: String::new(),
        }
    }

    pub fn exact(section: &str, index: impl ToString, quantity: &str, v: &Rational) -> Self {
        let d = decimal(v, Rounding::Nearest);
        Row {
            lo: v.to_string(),
            hi: v.to_string(),
            lo_decimal: d.clone(),
            hi_decimal: d,
            ..Row::new(section, index, quantity)
        }
    }

    pub fn enclosure(section: &str, index: impl ToString, quantity: &str, v: &CertifiedValue) -> Self {
        let (lo_decimal, hi_decimal) = v.to_sci(DIGITS);
        Row {
            lo: v.lo.to_string(),
            hi: v.hi.to_string(),
            lo_decimal,
            hi_decimal,
            ..Row::new(section, index, quantity)
        }
    }

    pub fn float(section: &str, index: impl ToString, quantity: &str, x: f64) -> Self {
        let d = decimal_f64(x);
        Row {
            lo_decimal: d.clone(),
            hi_decimal: d,
            ..Row::new(section, index, quantity)
        }
    }

    pub fn text(section: &str, index: impl ToString, quantity: &str, v: impl ToString) -> Self {
        let v = v.to_string();
        Row {
            lo: v.clone(),
            hi: v,
            ..Row::new(section, index, quantity)
        }
    }
}

/// Config rows first, then the data rows.
pub fn csv(echo: &Echo, rows: &[Row]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (k, v) in &echo.0 {
        w.serialize(Row::text("config", "", k, v))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write to `path`, or to `stdout` when absent.
pub fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::file(p, e)),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enclosure_rows_round_outward() {
        let v = CertifiedValue::new(Rational::new(1, 3), Rational::new(2, 3));
        let row = Row::enclosure("mdp", 2, "b", &v);
        assert_eq!(row.lo_decimal, "3.33333333333e-1");
        assert_eq!(row.hi_decimal, "6.66666666667e-1");
        assert_eq!((row.lo.as_str(), row.hi.as_str()), ("1/3", "2/3"));
    }

    #[test]
    fn csv_has_header_and_quotes_commas() {
        let echo = Echo(vec![("psi".into(), "pow:a=1,tau=5/2".into())]);
        let s = csv(&echo, &[Row::exact("box", 8, "count", &Rational::from(12))]).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("section,index,quantity,lo,hi,lo_decimal,hi_decimal"));
        assert_eq!(
            lines.next(),
            Some("config,,psi,\"pow:a=1,tau=5/2\",\"pow:a=1,tau=5/2\",,")
        );
        let row = lines.next().unwrap();
        assert_eq!(row, "box,8,count,12/1,12/1,1.2e1,1.2e1");
    }
}
