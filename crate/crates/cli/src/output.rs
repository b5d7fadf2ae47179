//! CSV and JSON artifacts. Every file names the command and configuration
//! hash; CSV numbers carry 17 significant digits.

use crate::error::CliError;
use nanoplate_core::geometry::Domain;
use nanoplate_core::neumann::NeumannData;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};

/// Destination directory plus the provenance stamped on every file.
pub struct Sink {
    pub dir: PathBuf,
    pub command: String,
    pub config_hash: String,
    pub written: Vec<PathBuf>,
}

/// A number with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table of preformatted cells.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Sink {
    pub fn new(dir: &Path, command: &str, config_hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Sink { dir: dir.to_path_buf(), command: command.into(), config_hash, written: Vec::new() })
    }

    fn stamp(&self) -> String {
        format!("# nanoplate {} config_hash={}\n", self.command, self.config_hash)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
        let mut text = self.stamp().into_bytes();
        text.extend(body);
        self.write(name, &text)
    }

    pub fn json(&mut self, name: &str, mut value: Value) -> Result<(), CliError> {
        if let Value::Object(map) = &mut value {
            map.insert("command".into(), json!(self.command));
            map.insert("config_hash".into(), json!(self.config_hash));
        }
        let mut text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut text = self.stamp();
        text.push_str(body);
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// `s, Vhat, Mn_hat, Mnh_hat` on `n` uniform arclength nodes.
pub fn data_table(data: &NeumannData, dom: &Domain, n: usize) -> Table {
    let mut t = Table::new(&["s", "Vhat", "Mn_hat", "Mnh_hat"]);
    for row in data.tabulate(dom, n) {
        t.push(row.iter().map(|v| num(*v)).collect());
    }
    t
}

/// Reads boundary data written by [`data_table`] (or by hand): uniform
/// arclength nodes starting at `s = 0`, one period.
pub fn read_data(path: &Path, dom: &Domain) -> Result<NeumannData, CliError> {
    let bad = |m: String| CliError::Config(format!("data file {}: {m}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column `{name}`")));
    let idx = [col("s")?, col("Vhat")?, col("Mn_hat")?, col("Mnh_hat")?];
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (k, &i) in idx.iter().enumerate() {
            let v: f64 = rec
                .get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(format!("row {}: column {} is not a number", line + 1, header[i])))?;
            cols[k].push(v);
        }
    }
    let n = cols[0].len();
    if n < 2 {
        return Err(bad("needs at least two rows".into()));
    }
    let per = dom.perimeter();
    for (j, s) in cols[0].iter().enumerate() {
        if (s - per * j as f64 / n as f64).abs() > 1e-9 * per {
            return Err(bad(format!("row {}: s = {s} is not on the uniform grid of {n} nodes", j + 1)));
        }
    }
    let [_, v, m, mh] = cols;
    NeumannData::from_samples(per, v, m, mh).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nanoplate_core::expr::Expr;
    use nanoplate_core::material::MaterialField;

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        let v = 0.1 + 0.2;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn boundary_data_round_trips_through_csv() {
        let dom = Domain::disk(1.0).unwrap();
        let mat = MaterialField::constant(1.0, 1.0, 1.0, [1.0; 3]);
        let data = nanoplate_core::neumann::synthesize(&Expr::parse("x1^3").unwrap(), &mat, &dom, 256).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let mut sink = Sink::new(tmp.path(), "solve", "abc".into()).unwrap();
        sink.csv("data.csv", &data_table(&data, &dom, 256)).unwrap();
        let back = read_data(&tmp.path().join("data.csv"), &dom).unwrap();
        for i in 0..50 {
            let f = dom.frame_wrapped(i as f64 * 0.123);
            let (a, b) = (data.eval(&f), back.eval(&f));
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn data_files_need_every_column() {
        let dom = Domain::disk(1.0).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("d.csv");
        std::fs::write(&p, "s,Vhat,Mn_hat\n0,1,2\n").unwrap();
        assert!(matches!(read_data(&p, &dom), Err(CliError::Config(_))));
    }
}
