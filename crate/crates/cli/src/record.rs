//! Result records and the files written for each run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mpdo_core::fit::{loglog_fit, semilog_fit, LineFit};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// JSON value for a float; non-finite values become strings.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => Value::String("nan".into()),
        None if x > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

/// Rebuild every object with its keys in sorted order.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let sorted: BTreeMap<String, Value> = m.into_iter().map(|(k, v)| (k, canonical(v))).collect();
            Value::Object(sorted.into_iter().collect::<Map<_, _>>())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        other => other,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitScale {
    /// `log2 y` against `log2 x`.
    LogLog,
    /// `log2 y` against `x`.
    SemiLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableFit {
    pub x: String,
    pub y: String,
    pub scale: FitScale,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub fit: Option<TableFit>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), fit: None }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Least-squares fit of column `y` against column `x`.
    pub fn fit(&mut self, x: &str, y: &str, scale: FitScale) -> Option<LineFit> {
        let (xs, ys) = (self.column(x)?, self.column(y)?);
        let f = match scale {
            FitScale::LogLog => loglog_fit(&xs, &ys),
            FitScale::SemiLog => semilog_fit(&xs, &ys),
        }?;
        self.fit = Some(TableFit {
            x: x.into(),
            y: y.into(),
            scale,
            slope: f.slope,
            intercept: f.intercept,
            residual: f.residual,
        });
        Some(f)
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("columns".into(), serde_json::to_value(&self.columns).unwrap());
        m.insert("rows".into(), Value::Array(self.rows.iter().map(|r| Value::Array(r.clone())).collect()));
        if let Some(f) = &self.fit {
            let mut fm = serde_json::to_value(f).unwrap();
            for k in ["slope", "intercept", "residual"] {
                fm[k] = num(fm[k].as_f64().unwrap_or(f64::NAN));
            }
            m.insert("fit".into(), fm);
        }
        Value::Object(m)
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let cell = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(cell)).map_err(io)?;
        }
        if let Some(f) = &self.fit {
            w.write_record([
                "# fit".to_string(),
                "slope".into(),
                f.slope.to_string(),
                "intercept".into(),
                f.intercept.to_string(),
                "residual".into(),
                f.residual.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_gnuplot(&self, title: &str) -> String {
        let mut s = String::new();
        let (xi, yi, xname, yname) = match &self.fit {
            Some(f) => (
                self.columns.iter().position(|c| *c == f.x).unwrap_or(0) + 1,
                self.columns.iter().position(|c| *c == f.y).unwrap_or(1) + 1,
                f.x.clone(),
                f.y.clone(),
            ),
            None => (1, 2, self.columns.first().cloned().unwrap_or_default(), self.columns.get(1).cloned().unwrap_or_default()),
        };
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set datafile commentschars '#'");
        let _ = writeln!(s, "set title '{title}'");
        let _ = writeln!(s, "set xlabel '{xname}'");
        let _ = writeln!(s, "set ylabel '{yname}'");
        match &self.fit {
            Some(f) => {
                match f.scale {
                    FitScale::LogLog => {
                        let _ = writeln!(s, "set logscale xy 2");
                        let _ = writeln!(s, "fit_line(x) = 2**({:.17e}) * x**({:.17e})", f.intercept, f.slope);
                    }
                    FitScale::SemiLog => {
                        let _ = writeln!(s, "set logscale y 2");
                        let _ = writeln!(s, "fit_line(x) = 2**({:.17e} + ({:.17e}) * x)", f.intercept, f.slope);
                    }
                }
                let _ = writeln!(
                    s,
                    "plot 'table.csv' using {xi}:{yi} skip 1 with linespoints title '{yname}', \\\n     fit_line(x) title 'slope {:.4}'",
                    f.slope
                );
            }
            None => {
                let _ = writeln!(s, "plot 'table.csv' using {xi}:{yi} skip 1 with linespoints title '{yname}'");
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub command: String,
    /// The materialized config.
    pub config: Value,
    /// SHA-256 of the canonical config JSON.
    pub inputs_digest: String,
    pub scalars: BTreeMap<String, Value>,
    pub table: Option<Table>,
    /// SHA-256 of every extra file written, keyed by file name.
    pub artifacts: BTreeMap<String, String>,
    pub version: String,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn new(command: &str, config: Value) -> Self {
        let config = canonical(config);
        let inputs_digest = sha256_hex(config.to_string().as_bytes());
        ResultRecord {
            command: command.into(),
            config,
            inputs_digest,
            scalars: BTreeMap::new(),
            table: None,
            artifacts: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: 0.0,
        }
    }

    pub fn scalar(&mut self, key: &str, v: f64) {
        self.scalars.insert(key.into(), num(v));
    }

    pub fn scalar_value(&mut self, key: &str, v: Value) {
        self.scalars.insert(key.into(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).and_then(Value::as_f64)
    }

    pub fn to_value(&self, with_wall_time: bool) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::String(self.command.clone()));
        m.insert("config".into(), self.config.clone());
        m.insert("inputs_digest".into(), Value::String(self.inputs_digest.clone()));
        m.insert("scalars".into(), Value::Object(self.scalars.clone().into_iter().collect()));
        m.insert("table".into(), self.table.as_ref().map_or(Value::Null, Table::to_json));
        m.insert("artifacts".into(), serde_json::to_value(&self.artifacts).unwrap());
        m.insert("version".into(), Value::String(self.version.clone()));
        if with_wall_time {
            m.insert("wall_time_s".into(), num(self.wall_time_s));
        }
        canonical(Value::Object(m))
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self, with_wall_time: bool) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value(with_wall_time)).unwrap();
        s.push('\n');
        s
    }

    /// Write `result.json` and, when there is a table, `table.csv` and
    /// `plot.gp` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let put = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        };
        if let Some(t) = &self.table {
            put("table.csv", &t.to_csv()?)?;
            put("plot.gp", &t.to_gnuplot(&self.command))?;
        }
        put("result.json", &self.to_json(true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted_at_every_level() {
        let v = serde_json::json!({"b": 1, "a": {"z": 1, "c": [{"y": 0, "x": 1}]}});
        assert_eq!(canonical(v).to_string(), r#"{"a":{"c":[{"x":1,"y":0}],"z":1},"b":1}"#);
    }

    #[test]
    fn non_finite_numbers_become_strings() {
        assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(num(f64::NAN), Value::String("nan".into()));
        assert_eq!(num(0.5), serde_json::json!(0.5));
    }

    #[test]
    fn csv_has_fit_footer() {
        let mut t = Table::new(&["M", "value"]);
        for m in [4.0, 8.0, 16.0] {
            t.push(vec![num(m), num(m * m)]);
        }
        let f = t.fit("M", "value", FitScale::LogLog).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        let csv = t.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "M,value");
        assert!(lines[4].starts_with("# fit,slope,2"));
        assert!(t.to_gnuplot("x").contains("logscale xy 2"));
    }

    #[test]
    fn wall_time_is_the_only_optional_field() {
        let mut r = ResultRecord::new("dk", serde_json::json!({"seed": 1}));
        r.wall_time_s = 1.5;
        let a = r.to_json(false);
        r.wall_time_s = 2.5;
        assert_eq!(a, r.to_json(false));
        assert!(r.to_json(true).contains("wall_time_s"));
    }
}
