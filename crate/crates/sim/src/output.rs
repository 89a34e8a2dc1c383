//! CSV emission: one header line, then one self-describing row per record.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self, out: &mut String) {
        match self {
            Value::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\""));
                    out.push('"');
                } else {
                    out.push_str(s);
                }
            }
            Value::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Value::Float(x) => out.push_str(&format_sig6(*x)),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        }
    }
}

/// Six significant digits, `%g` style: fixed notation for exponents in
/// `[-5, 6)`, scientific otherwise, trailing zeros removed.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_owned()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Rows of one experiment. The `experiment` and `seed` columns are
/// prepended to every row on output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ExperimentResult {
    pub fn new(experiment: &str, seed: u64, columns: &[&str]) -> Self {
        ExperimentResult {
            experiment: experiment.to_owned(),
            seed,
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.experiment);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Value in column `name` of the first row whose column `key` equals `key_value`.
    pub fn lookup(&self, key: &str, key_value: &str, name: &str) -> Option<&Value> {
        let (k, c) = (self.column(key)?, self.column(name)?);
        self.rows
            .iter()
            .find(|r| r[k].as_str() == Some(key_value))
            .map(|r| &r[c])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,seed");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            Value::Text(self.experiment.clone()).render(&mut out);
            let _ = write!(out, ",{}", self.seed);
            for v in row {
                out.push(',');
                v.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<dir>/<experiment>.csv`, creating `dir` if needed.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.experiment));
        std::fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(51.6123456), "51.6123");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(1.5e-7), "1.5e-07");
        assert_eq!(format_sig6(-2.0), "-2");
        assert_eq!(format_sig6(100000.0), "100000");
        assert_eq!(format_sig6(999999.7), "1e+06");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(f64::INFINITY), "inf");
        assert_eq!(format_sig6(f64::NAN), "nan");
    }

    #[test]
    fn csv_rows_carry_experiment_and_seed() {
        let mut r = ExperimentResult::new("demo", 42, &["metric", "value"]);
        r.push(vec!["a,b".into(), 1.25.into()]);
        r.push(vec!["c".into(), f64::INFINITY.into()]);
        assert_eq!(r.to_csv(), "experiment,seed,metric,value\ndemo,42,\"a,b\",1.25\ndemo,42,c,inf\n");
        assert_eq!(r.lookup("metric", "c", "value"), Some(&Value::Float(f64::INFINITY)));
    }
}
