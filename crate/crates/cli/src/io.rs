//! CSV input and TSV/JSON output.

use crate::CliError;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Column selector: a header name or a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<usize>() {
            Ok(0) => Err("column positions start at 1".into()),
            Ok(i) => Ok(Column::Index(i)),
            Err(_) if !s.is_empty() => Ok(Column::Name(s.to_string())),
            Err(_) => Err("empty column name".into()),
        }
    }
}

/// Reads one numeric column. Lines starting with `#` are skipped; a named
/// column implies a header row.
pub fn read_column(path: &Path, column: &Column, header: bool) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_column(&text, column, header)
}

pub fn parse_column(text: &str, column: &Column, header: bool) -> Result<Vec<f64>, CliError> {
    let header = header || matches!(column, Column::Name(_));
    // Comments and blank lines are dropped here rather than by the reader,
    // whose record positions point before any lines it skipped. `starts` maps byte offsets in the
    // filtered text back to 1-based source lines.
    let mut body = String::with_capacity(text.len());
    let mut starts: Vec<(usize, usize)> = Vec::new();
    for (k, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            starts.push((body.len(), k + 1));
            body.push_str(line);
        }
    }
    let source_line = |byte: u64| {
        let i = starts.partition_point(|&(b, _)| b as u64 <= byte);
        starts.get(i.wrapping_sub(1)).map_or(0, |s| s.1)
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let idx = match column {
        Column::Index(i) => i - 1,
        Column::Name(name) => {
            let headers = reader
                .headers()
                .map_err(|e| CliError::Input(format!("cannot read header: {e}")))?;
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::Input(format!("column '{name}' not found in header")))?
        }
    };
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(0, |p| source_line(p.byte()));
        let cell = record
            .get(idx)
            .ok_or_else(|| CliError::Input(format!("line {line}: no column {}", idx + 1)))?;
        let v: f64 = cell
            .parse()
            .map_err(|_| CliError::Input(format!("line {line}: '{cell}' is not a number")))?;
        if !v.is_finite() {
            return Err(CliError::Input(format!(
                "line {line}: '{cell}' is not finite"
            )));
        }
        values.push(v);
    }
    Ok(values)
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| {
                    CliError::Input(format!("cannot create {}: {e}", dir.display()))
                })?;
            }
            fs::write(p, text)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Two-column TSV with a header line.
pub fn tsv_curve(x_name: &str, y_name: &str, curve: &symmix::Curve) -> String {
    let mut s = format!("{x_name}\t{y_name}\n");
    for (x, y) in curve.iter() {
        s.push_str(&fmt_f64(x));
        s.push('\t');
        s.push_str(&fmt_f64(y));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_with_comments() {
        let v = parse_column("# data\n1.5\n\n-2\n# end\n3e1\n", &Column::Index(1), false).unwrap();
        assert_eq!(v, vec![1.5, -2.0, 30.0]);
    }

    #[test]
    fn named_and_indexed_columns() {
        let text = "city,rain\na,10.5\nb,40\n";
        let v = parse_column(text, &Column::Name("rain".into()), false).unwrap();
        assert_eq!(v, vec![10.5, 40.0]);
        let v = parse_column(text, &Column::Index(2), true).unwrap();
        assert_eq!(v, vec![10.5, 40.0]);
        assert!(parse_column(text, &Column::Name("snow".into()), false).is_err());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_column("1\n2\n# c\nabc\n", &Column::Index(1), false).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = parse_column("1\nnan\n", &Column::Index(1), false).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err =
            parse_column("# a\n# b\nx,y\n1,2\n\n# c\n3,z\n", &Column::Index(2), true).unwrap_err();
        assert!(err.to_string().contains("line 7"), "{err}");
    }

    #[test]
    fn column_parsing() {
        assert_eq!("2".parse::<Column>().unwrap(), Column::Index(2));
        assert!("0".parse::<Column>().is_err());
        assert_eq!("x".parse::<Column>().unwrap(), Column::Name("x".into()));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
